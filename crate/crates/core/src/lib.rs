//! Numerical construction and verification of the heteroclinic connection
//! describing a domain wall between orthogonal convection rolls.
//!
//! The amplitude system
//!
//! ```text
//! A'''' = A (1 - A^2 - g B^2),    B'' = eps^2 B (-1 + g A^2 + B^2)
//! ```
//!
//! is written as a six-dimensional first-order system in
//! `(A0, A1, A2, A3, B0, B1)`. The crate provides the vector field and its
//! first integral ([`dynamics`]), scaling constants ([`params`]), the linear
//! frames along the slow and fast manifolds ([`frames`]), adaptive
//! integration ([`integrate`]), outer seeds and profiles ([`outer`]), the
//! corner-layer problem and its Picard solver ([`inner`]), the global
//! connection solver ([`connect`]), discretised linearised operators
//! ([`linop`]) and post-hoc verification ([`verify`]).

pub mod band;
pub mod connect;
pub mod dynamics;
pub mod error;
pub mod frames;
pub mod inner;
pub mod integrate;
pub mod linop;
pub mod outer;
pub mod params;
pub mod shooting;
pub mod verify;

pub use dynamics::State;
pub use error::{Error, Result};
pub use params::Params;
