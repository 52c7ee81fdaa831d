//! Scalar parameters, derived scalings and their admissibility checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Inequality, Result};

/// Lower end of the coupling range accepted by the solver.
pub const G_MIN: f64 = 10.0 / 9.0;
/// Upper end of the coupling range accepted by the solver.
pub const G_MAX: f64 = 2.0;
/// Default ceiling for the small parameter.
pub const EPSILON_CEILING: f64 = 0.25;

/// Whether the parameters lie inside the range covered by the existence theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Supported,
    Unsupported,
}

/// Limits applied when validating parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamLimits {
    pub epsilon_max: f64,
    /// Accept any `g > 1` and flag the result as unsupported.
    pub allow_unsupported: bool,
}

impl Default for ParamLimits {
    fn default() -> Self {
        Self {
            epsilon_max: EPSILON_CEILING,
            allow_unsupported: false,
        }
    }
}

/// The small parameter, the coupling coefficient and `delta = sqrt(g - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub epsilon: f64,
    pub g: f64,
    pub delta: f64,
    pub regime: Regime,
}

impl Params {
    /// `1 + delta^2`, which equals `g`.
    pub fn one_plus_delta2(&self) -> f64 {
        1.0 + self.delta * self.delta
    }
}

/// Validates `(epsilon, g)` against the default limits and derives `delta`.
pub fn derive_params(epsilon: f64, g: f64) -> Result<Params> {
    derive_params_with(epsilon, g, &ParamLimits::default())
}

/// Validates `(epsilon, g)` against explicit limits and derives `delta`.
pub fn derive_params_with(epsilon: f64, g: f64, limits: &ParamLimits) -> Result<Params> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(if epsilon == 0.0 {
            Error::SingularEpsilon
        } else {
            Error::Domain(format!("epsilon must be positive, got {epsilon}"))
        });
    }
    if epsilon > limits.epsilon_max {
        return Err(Error::Domain(format!(
            "epsilon = {epsilon} exceeds the ceiling {}",
            limits.epsilon_max
        )));
    }
    if !g.is_finite() || g <= 1.0 {
        return Err(Error::Domain(format!(
            "g = {g} must exceed 1 (admissible range is (10/9, 2])"
        )));
    }
    let supported = g > G_MIN && g <= G_MAX;
    if !supported && !limits.allow_unsupported {
        return Err(Error::Domain(format!(
            "g = {g} lies outside the admissible range (10/9, 2]"
        )));
    }
    Ok(Params {
        epsilon,
        g,
        delta: (g - 1.0).sqrt(),
        regime: if supported {
            Regime::Supported
        } else {
            Regime::Unsupported
        },
    })
}

/// Upper bound on `nu_minus / sqrt(delta)`.
pub fn nu_minus_ratio_max(delta: f64) -> f64 {
    1.0 / (84.33 * (1.0 + delta * delta))
}

/// Upper bound on `nu_plus / sqrt(delta)`.
pub fn nu_plus_ratio_max() -> f64 {
    2f64.sqrt() / 3.0
}

/// Strict lower bound on `nu_plus / sqrt(delta)`.
pub fn nu_plus_ratio_min(delta: f64) -> f64 {
    (1.0 + delta * delta).sqrt() / (2.0 * 6f64.powf(0.25))
}

/// Default `nu_minus`: 90% of its upper bound.
pub fn default_nu_minus(delta: f64) -> f64 {
    0.9 * nu_minus_ratio_max(delta) * delta.sqrt()
}

/// Default `nu_plus`: 90% of the way from the lower to the upper bound.
pub fn default_nu_plus(delta: f64) -> f64 {
    let lo = nu_plus_ratio_min(delta);
    let hi = nu_plus_ratio_max();
    (lo + 0.9 * (hi - lo)) * delta.sqrt()
}

/// Inner half-width `((1+delta^2) delta / (8 nu^2))^(2/5)`.
pub fn inner_half_width(delta: f64, nu: f64) -> f64 {
    ((1.0 + delta * delta) * delta / (8.0 * nu * nu)).powf(0.4)
}

/// Scaling constants tying the outer regions to the inner corner layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub nu_minus: f64,
    pub nu_plus: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    /// Asymptotic abscissa of the left junction (the section is at `-x_star`).
    pub x_star: f64,
    /// Asymptotic abscissa of the right junction.
    pub x_star_plus: f64,
    /// Radius factor of the unstable tangent-parameter ball.
    pub k0: f64,
    /// Radius of the stable tangent-parameter ball.
    pub k1: f64,
    /// Decay rate used by the envelope checks, `epsilon * delta_star`.
    pub kappa: f64,
    /// `B0` on the left section; `None` when `alpha_minus * delta >= 1`.
    pub b00: Option<f64>,
    /// `B0` on the right section.
    pub b01: f64,
}

/// Optional knobs of [`scaling_from_epsilon_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    pub k0: f64,
    pub k1: f64,
    /// Fraction of `delta` used for `kappa = epsilon * delta_star`.
    pub delta_star_fraction: f64,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            k0: 0.1,
            k1: 0.05,
            delta_star_fraction: 0.9,
        }
    }
}

const BOUND_SLACK: f64 = 1e-12;

/// Derives the scaling constants with default ball radii.
pub fn scaling_from_epsilon(p: &Params, nu_minus: f64, nu_plus: f64) -> Result<ScalingConfig> {
    scaling_from_epsilon_with(p, nu_minus, nu_plus, &ScalingOptions::default())
}

/// Derives the scaling constants, rejecting the first violated admissibility inequality.
pub fn scaling_from_epsilon_with(
    p: &Params,
    nu_minus: f64,
    nu_plus: f64,
    opts: &ScalingOptions,
) -> Result<ScalingConfig> {
    if !(nu_minus > 0.0 && nu_plus > 0.0 && nu_minus.is_finite() && nu_plus.is_finite()) {
        return Err(Error::Domain(format!(
            "nu_minus and nu_plus must be positive, got {nu_minus} and {nu_plus}"
        )));
    }
    let d = p.delta;
    let sd = d.sqrt();
    let rm = nu_minus / sd;
    let bound = nu_minus_ratio_max(d);
    if rm > bound * (1.0 + BOUND_SLACK) {
        return Err(Error::Admissibility {
            inequality: Inequality::NuMinusUpper,
            value: rm,
            bound,
        });
    }
    let rp = nu_plus / sd;
    let bound = nu_plus_ratio_max();
    if rp > bound * (1.0 + BOUND_SLACK) {
        return Err(Error::Admissibility {
            inequality: Inequality::NuPlusUpper,
            value: rp,
            bound,
        });
    }
    let bound = nu_plus_ratio_min(d);
    if rp <= bound {
        return Err(Error::Admissibility {
            inequality: Inequality::NuPlusLower,
            value: rp,
            bound,
        });
    }
    let a_plus = inner_half_width(d, nu_plus);
    let contraction = 2.0 * a_plus.powi(5) / 3.0;
    if contraction >= 1.0 {
        return Err(Error::Admissibility {
            inequality: Inequality::InnerContraction,
            value: contraction,
            bound: 1.0,
        });
    }
    let eps = p.epsilon;
    let g = p.one_plus_delta2();
    let alpha_minus = (eps / nu_minus).powf(0.4);
    let alpha_plus = (eps / nu_plus).powf(0.4);
    let junction = |alpha: f64| g.sqrt() * alpha * alpha / (2.0 * 2f64.sqrt() * eps);
    let left_gap = 1.0 - alpha_minus * alpha_minus * d * d;
    Ok(ScalingConfig {
        nu_minus,
        nu_plus,
        alpha_minus,
        alpha_plus,
        a_minus: inner_half_width(d, nu_minus),
        a_plus,
        x_star: junction(alpha_minus),
        x_star_plus: junction(alpha_plus),
        k0: opts.k0,
        k1: opts.k1,
        kappa: eps * opts.delta_star_fraction * d,
        b00: (left_gap > 0.0).then(|| (left_gap / g).sqrt()),
        b01: ((1.0 + alpha_plus * alpha_plus * d * d) / g).sqrt(),
    })
}

impl ScalingConfig {
    /// Scaling defaults for the given parameters.
    pub fn defaults(p: &Params) -> Result<Self> {
        scaling_from_epsilon(p, default_nu_minus(p.delta), default_nu_plus(p.delta))
    }

    /// Radius of the unstable tangent-parameter ball, `k0 sqrt(delta (1+delta^2))`.
    pub fn unstable_ball_radius(&self, p: &Params) -> f64 {
        self.k0 * (p.delta * p.one_plus_delta2()).sqrt()
    }

    /// Ratio `rho = (a_minus / a_plus)^(1/4)` seeding the closed-form matching.
    pub fn rho(&self) -> f64 {
        (self.a_minus / self.a_plus).powf(0.25)
    }
}

/// Inner-layer scale constant `K = (2 sqrt(2) delta^2 / sqrt(1+delta^2))^(1/5)`.
///
/// Together with the asymptotic junction abscissae it realises `z = K eps^(1/5) x`.
pub fn inner_scale_constant(delta: f64) -> f64 {
    (2.0 * 2f64.sqrt() * delta * delta / (1.0 + delta * delta).sqrt()).powf(0.2)
}

/// Scale constant matching the corner slope of the computed outer profiles.
///
/// Near `B = 1/sqrt(g)` both outer branches satisfy
/// `1 - g B^2 = -(sqrt(2) eps delta^2 / sqrt(g)) x + O(eps^2 x^2)`, which
/// turns the principal part of the `A` equation into the parameter-free
/// corner equation exactly when `K^5 = sqrt(2) delta^2 / sqrt(g)`.
pub fn corner_scale_constant(delta: f64) -> f64 {
    (2f64.sqrt() * delta * delta / (1.0 + delta * delta).sqrt()).powf(0.2)
}

/// One row of the physical-regime table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalRegime {
    pub boundary_conditions: &'static str,
    pub g_min: f64,
    pub delta_min: f64,
    pub prandtl_threshold: f64,
}

/// Minimal couplings for the three classical pairs of boundary conditions.
pub fn physical_regimes() -> Vec<PhysicalRegime> {
    [
        ("rigid-rigid", 1.227, 0.5308),
        ("rigid-free", 1.332, 0.6222),
        ("free-free", 1.423, 0.8078),
    ]
    .into_iter()
    .map(|(label, g_min, prandtl)| PhysicalRegime {
        boundary_conditions: label,
        g_min,
        delta_min: (g_min - 1.0f64).sqrt(),
        prandtl_threshold: prandtl,
    })
    .collect()
}
