//! Post-hoc checks on computed connections: exponential tail rates,
//! envelope bounds on `A` and its derivatives, monotonicity of `B`, and
//! the scaling of the corner with `epsilon`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connect::{heteroclinic_solve, HeteroclinicConfig, HeteroclinicProfile};
use crate::error::{Error, Result};
use crate::params::{derive_params, Params, ScalingConfig};

/// How a decay rate is extracted from samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitKind {
    /// Least squares on `log |y|`.
    Plain,
    /// Least squares on `log |y|` at the local maxima of `|y|`.
    Envelope,
}

/// Fitted exponential rate `r` in `|y| ~ exp(-r x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: [f64; 2],
    pub rate: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub kind: FitKind,
    pub points: usize,
}

impl DecayFit {
    /// Number of e-folds spanned by the fitted exponential over its window.
    pub fn efolds(&self) -> f64 {
        (self.rate * (self.window[1] - self.window[0])).abs()
    }
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(u, v)| (v - icpt - slope * u).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, icpt, rms)
}

/// Local maxima of `|y|`, refined by a parabola through the three neighbouring samples.
fn envelope_peaks(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut px = Vec::new();
    let mut py = Vec::new();
    for i in 1..ys.len().saturating_sub(1) {
        let (a, b, c) = (ys[i - 1].abs(), ys[i].abs(), ys[i + 1].abs());
        if b > a && b >= c && b > 0.0 {
            let den = a - 2.0 * b + c;
            let (mut x, mut v) = (xs[i], b);
            if den < 0.0 {
                let t = 0.5 * (a - c) / den;
                let h = 0.5 * (xs[i + 1] - xs[i - 1]);
                x = xs[i] + t * h;
                v = b - 0.25 * (a - c) * t;
            }
            px.push(x);
            py.push(v);
        }
    }
    (px, py)
}

/// Fits `|y| ~ exp(-rate x)` on the given samples.
pub fn fit_decay_rate(xs: &[f64], ys: &[f64], kind: FitKind) -> Result<DecayFit> {
    if xs.len() != ys.len() {
        return Err(Error::Domain("abscissae and values differ in length".into()));
    }
    let (fx, fy): (Vec<f64>, Vec<f64>) = match kind {
        FitKind::Plain => xs
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.abs() > 0.0 && y.is_finite())
            .map(|(x, y)| (*x, y.abs()))
            .unzip(),
        FitKind::Envelope => envelope_peaks(xs, ys),
    };
    let needed = match kind {
        FitKind::Plain => 2,
        FitKind::Envelope => 3,
    };
    if fx.len() < needed {
        return Err(Error::InsufficientTail(format!(
            "{} usable samples, at least {needed} required",
            fx.len()
        )));
    }
    let logs: Vec<f64> = fy.iter().map(|v| v.ln()).collect();
    let (slope, _, rms) = line_fit(&fx, &logs);
    Ok(DecayFit {
        window: [fx[0], fx[fx.len() - 1]],
        rate: -slope,
        residual: rms,
        kind,
        points: fx.len(),
    })
}

/// Tail rates of a connection, all reported as positive decay rates away from the corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRates {
    /// `B` as `x -> -inf`, expected `eps delta`.
    pub left_b: DecayFit,
    /// `1 - A` as `x -> -inf`, at least `eps delta`.
    pub left_a: DecayFit,
    /// `1 - B` as `x -> +inf`, expected `sqrt(2) eps`.
    pub right_b: DecayFit,
    /// Envelope of `A` as `x -> +inf`, expected `sqrt(delta / 2)`.
    pub right_a: DecayFit,
}

/// Thresholds selecting the linear regime of each tail.
const LINEAR_B: f64 = 0.05;
const LINEAR_A: f64 = 0.01;
const RIGHT_A_B_MIN: f64 = 0.98;
const NOISE_FLOOR: f64 = 1e-11;
const MIN_EFOLDS: f64 = 3.0;

fn tail_window(profile: &HeteroclinicProfile, x_star_plus: f64) -> ([f64; 2], [f64; 2]) {
    let lo = profile.xs[0];
    let hi = *profile.xs.last().expect("non-empty profile");
    let inner = 2.0 * x_star_plus;
    let left = [lo + 0.1 * (-inner - lo), -inner];
    let right = [inner, hi - 0.1 * (hi - inner)];
    (left, right)
}

fn checked(fit: DecayFit, what: &str) -> Result<DecayFit> {
    if fit.efolds() < MIN_EFOLDS {
        return Err(Error::InsufficientTail(format!(
            "{what}: window spans {:.2} e-folds, at least {MIN_EFOLDS} required",
            fit.efolds()
        )));
    }
    Ok(fit)
}

/// Fits the four tail rates, excluding the outer tenth of each tail and the corner `|x| <= 2 x_star_plus`.
pub fn fit_decay_rates(profile: &HeteroclinicProfile, x_star_plus: f64) -> Result<TailRates> {
    let (lw, rw) = tail_window(profile, x_star_plus);
    let pick = |win: [f64; 2], keep: &dyn Fn(usize) -> bool, value: &dyn Fn(usize) -> f64, mirror: bool| {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, &x) in profile.xs.iter().enumerate() {
            if x >= win[0] && x <= win[1] && keep(i) {
                xs.push(if mirror { -x } else { x });
                ys.push(value(i));
            }
        }
        if mirror {
            xs.reverse();
            ys.reverse();
        }
        (xs, ys)
    };
    let s = &profile.states;
    let (x, y) = pick(lw, &|i| s[i].b0() < LINEAR_B, &|i| s[i].b0(), true);
    let left_b = checked(fit_decay_rate(&x, &y, FitKind::Plain)?, "left B tail")?;
    let (x, y) = pick(
        lw,
        &|i| 1.0 - s[i].a0() < LINEAR_A && 1.0 - s[i].a0() > NOISE_FLOOR,
        &|i| 1.0 - s[i].a0(),
        true,
    );
    let left_a = checked(fit_decay_rate(&x, &y, FitKind::Plain)?, "left A tail")?;
    let (x, y) = pick(
        rw,
        &|i| 1.0 - s[i].b0() < LINEAR_B && 1.0 - s[i].b0() > NOISE_FLOOR,
        &|i| 1.0 - s[i].b0(),
        false,
    );
    let right_b = checked(fit_decay_rate(&x, &y, FitKind::Plain)?, "right B tail")?;
    let (x, y) = pick(
        rw,
        &|i| s[i].b0() >= RIGHT_A_B_MIN && s[i].a0().abs() > NOISE_FLOOR,
        &|i| s[i].a0(),
        false,
    );
    let right_a = checked(fit_decay_rate(&x, &y, FitKind::Envelope)?, "right A tail")?;
    Ok(TailRates {
        left_b,
        left_a,
        right_b,
        right_a,
    })
}

/// Expected linear rates at the equilibria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRates {
    pub left_b: f64,
    pub left_a_min: f64,
    pub right_b: f64,
    pub right_a: f64,
}

pub fn expected_rates(p: &Params) -> ExpectedRates {
    ExpectedRates {
        left_b: p.epsilon * p.delta,
        left_a_min: p.epsilon * p.delta,
        right_b: 2f64.sqrt() * p.epsilon,
        right_a: (p.delta / 2.0).sqrt(),
    }
}

/// One verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The property being checked.
    pub claim: String,
    pub measured: f64,
    /// Target value or bound the measurement is compared with.
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, claim: &str, measured: f64, bound: f64, passed: bool) -> Self {
        Self {
            name: name.into(),
            claim: claim.into(),
            measured,
            bound,
            passed: passed && measured.is_finite(),
        }
    }
}

/// Collection of checks on one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Relative tolerance of the rate identifications.
pub const RATE_TOLERANCE: f64 = 0.10;

/// Ceiling for fitted envelope constants.
pub const ENVELOPE_CEILING: f64 = 50.0;

fn rate_check(name: &str, claim: &str, fit: &DecayFit, target: f64) -> Check {
    let rel = (fit.rate - target).abs() / target;
    Check::new(name, claim, fit.rate, target, rel <= RATE_TOLERANCE)
}

/// Two-sided rate identifications (one-sided for the approach of `A` to 1).
pub fn rate_checks(rates: &TailRates, p: &Params) -> Vec<Check> {
    let e = expected_rates(p);
    vec![
        rate_check("left_b_rate", "B decays like exp(eps delta x) as x -> -inf", &rates.left_b, e.left_b),
        Check::new(
            "left_a_rate",
            "1 - A decays at least like exp(eps delta x) as x -> -inf",
            rates.left_a.rate,
            e.left_a_min,
            rates.left_a.rate >= (1.0 - RATE_TOLERANCE) * e.left_a_min,
        ),
        rate_check(
            "right_b_rate",
            "1 - B decays like exp(-sqrt(2) eps x) as x -> +inf",
            &rates.right_b,
            e.right_b,
        ),
        rate_check(
            "right_a_envelope",
            "the envelope of A decays like exp(-sqrt(delta/2) x) as x -> +inf",
            &rates.right_a,
            e.right_a,
        ),
    ]
}

/// Envelope bounds on `A` and its derivatives with fitted constants.
///
/// For `x <= 0`: `|A - sqrt(1 - g B^2)| <= c eps^(2/5) B e^(eps d x)` and
/// `|A^(m)| <= c eps^(3/5) B e^(eps d x)` for `m = 1, 2, 3`, with `d = 0.9 delta`.
/// For `x >= 0`: `|A^(m)| <= c eps^(2/5) e^(-d' eps^(1/5) x)` for `m = 0..3`,
/// with `d' = delta^(2/5) / 10`.
pub fn derivative_envelopes(profile: &HeteroclinicProfile, scaling: &ScalingConfig) -> Vec<Check> {
    let p = &profile.params;
    let eps = p.epsilon;
    let d_left = scaling.kappa / eps;
    let d_right = p.delta.powf(0.4) / 10.0;
    let mut c_left = [0.0f64; 4];
    let mut c_right = [0.0f64; 4];
    for (x, s) in profile.xs.iter().zip(&profile.states) {
        if *x <= 0.0 {
            let env = s.b0() * (eps * d_left * x).exp();
            let gap = (s.a0() - (1.0 - p.g * s.b0() * s.b0()).max(0.0).sqrt()).abs();
            c_left[0] = c_left[0].max(gap / (eps.powf(0.4) * env));
            for m in 1..4 {
                c_left[m] = c_left[m].max(s[m].abs() / (eps.powf(0.6) * env));
            }
        }
        if *x >= 0.0 {
            let env = eps.powf(0.4) * (-d_right * eps.powf(0.2) * x).exp();
            for m in 0..4 {
                c_right[m] = c_right[m].max(s[m].abs() / env);
            }
        }
    }
    let mut out = Vec::new();
    for m in 0..4 {
        let (name, claim) = if m == 0 {
            (
                "envelope_left_gap".to_string(),
                "|A - sqrt(1 - g B^2)| <= c eps^(2/5) B exp(0.9 eps delta x) for x <= 0".to_string(),
            )
        } else {
            (
                format!("envelope_left_d{m}"),
                format!("|A^({m})| <= c eps^(3/5) B exp(0.9 eps delta x) for x <= 0"),
            )
        };
        out.push(Check::new(&name, &claim, c_left[m], ENVELOPE_CEILING, c_left[m] <= ENVELOPE_CEILING));
    }
    for m in 0..4 {
        out.push(Check::new(
            &format!("envelope_right_d{m}"),
            &format!("|A^({m})| <= c eps^(2/5) exp(-delta^(2/5) eps^(1/5) x / 10) for x >= 0"),
            c_right[m],
            ENVELOPE_CEILING,
            c_right[m] <= ENVELOPE_CEILING,
        ));
    }
    out
}

/// Decay rate of the slow-manifold gap `|A - sqrt(1 - g B^2)|` on the left tail.
pub fn slow_gap_rate(profile: &HeteroclinicProfile, x_star_plus: f64) -> Result<DecayFit> {
    let p = &profile.params;
    let (lw, _) = tail_window(profile, x_star_plus);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, s) in profile.xs.iter().zip(&profile.states).rev() {
        if *x >= lw[0] && *x <= lw[1] && s.b0() < LINEAR_B {
            let gap = (s.a0() - (1.0 - p.g * s.b0() * s.b0()).max(0.0).sqrt()).abs();
            if gap > NOISE_FLOOR * 1e-3 {
                xs.push(-x);
                ys.push(gap);
            }
        }
    }
    checked(fit_decay_rate(&xs, &ys, FitKind::Plain)?, "slow-manifold gap")
}

/// `B1 > 0` at every sample and `0 < B0 < 1` strictly.
pub fn monotonicity(profile: &HeteroclinicProfile) -> Vec<Check> {
    let min_b1 = profile.states.iter().map(|s| s.b1()).fold(f64::INFINITY, f64::min);
    let increasing = profile.states.windows(2).all(|w| w[1].b0() > w[0].b0());
    let inside = profile.states.iter().all(|s| s.b0() > 0.0 && s.b0() < 1.0);
    let b_min = profile.states.iter().map(|s| s.b0()).fold(f64::INFINITY, f64::min);
    vec![
        Check::new("b1_positive", "B' > 0 at every sample", min_b1, 0.0, min_b1 > 0.0),
        Check::new(
            "b0_increasing",
            "B is strictly increasing over the samples",
            f64::from(u8::from(increasing)),
            1.0,
            increasing,
        ),
        Check::new("b0_in_unit_interval", "0 < B < 1 at every sample", b_min, 0.0, inside),
    ]
}

/// Full verification of a converged profile.
pub fn verify_profile(
    profile: &HeteroclinicProfile,
    scaling: &ScalingConfig,
    w_tolerance: f64,
) -> VerificationReport {
    let p = profile.params;
    let mut checks = vec![Check::new(
        "first_integral",
        "sup |W| over the samples is below the tolerance",
        profile.sup_w(),
        w_tolerance,
        profile.sup_w() < w_tolerance,
    )];
    let b_at_zero = profile.state_at(0.0).b0();
    let target = 1.0 / p.g.sqrt();
    checks.push(Check::new(
        "phase",
        "B(0) = 1/sqrt(g)",
        b_at_zero,
        target,
        (b_at_zero - target).abs() < 1e-8,
    ));
    checks.extend(monotonicity(profile));
    match fit_decay_rates(profile, scaling.x_star_plus) {
        Ok(r) => checks.extend(rate_checks(&r, &p)),
        Err(e) => checks.push(Check::new("tail_rates", &e.to_string(), f64::NAN, f64::NAN, false)),
    }
    match slow_gap_rate(profile, scaling.x_star_plus) {
        Ok(f) => checks.push(Check::new(
            "slow_gap_rate",
            "the slow-manifold gap decays faster than exp(0.9 eps delta x) as x -> -inf",
            f.rate,
            scaling.kappa,
            f.rate > scaling.kappa,
        )),
        Err(e) => checks.push(Check::new("slow_gap_rate", &e.to_string(), f64::NAN, f64::NAN, false)),
    }
    checks.extend(derivative_envelopes(profile, scaling));
    VerificationReport { checks }
}

/// One member of a scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingMember {
    pub epsilon: f64,
    pub a_at_zero: Option<f64>,
    pub half_width: Option<f64>,
    pub error: Option<String>,
}

/// Log-log regression of `A(0)` and of the corner half-width against `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub g: f64,
    pub members: Vec<ScalingMember>,
    pub a0_slope: f64,
    pub a0_residual: f64,
    pub width_slope: f64,
    pub width_residual: f64,
}

/// Rejects epsilon lists that are too short or too narrow for a slope fit.
pub fn check_scaling_span(epsilons: &[f64]) -> Result<()> {
    let lo = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = epsilons.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if epsilons.len() < 4 || !(hi / lo >= 8.0 * (1.0 - 1e-12)) {
        return Err(Error::InsufficientSpan(format!(
            "{} epsilon values spanning a factor {:.3}; at least 4 values over 3 octaves are required",
            epsilons.len(),
            hi / lo
        )));
    }
    Ok(())
}

/// Fits the scaling exponents from already computed members.
pub fn fit_scaling(g: f64, members: Vec<ScalingMember>) -> Result<ScalingFit> {
    let ok: Vec<&ScalingMember> = members
        .iter()
        .filter(|m| m.a_at_zero.is_some() && m.half_width.is_some())
        .collect();
    if ok.len() < 2 {
        return Err(Error::InsufficientSpan(format!(
            "only {} converged members",
            ok.len()
        )));
    }
    let le: Vec<f64> = ok.iter().map(|m| m.epsilon.ln()).collect();
    let la: Vec<f64> = ok.iter().map(|m| m.a_at_zero.unwrap_or(f64::NAN).ln()).collect();
    let lw: Vec<f64> = ok.iter().map(|m| m.half_width.unwrap_or(f64::NAN).ln()).collect();
    let (a0_slope, _, a0_residual) = line_fit(&le, &la);
    let (width_slope, _, width_residual) = line_fit(&le, &lw);
    Ok(ScalingFit {
        g,
        members,
        a0_slope,
        a0_residual,
        width_slope,
        width_residual,
    })
}

/// Solves at every epsilon in parallel and fits the scaling exponents.
/// Members whose solve fails are kept with their error and excluded from the fit.
pub fn scaling_study<F>(g: f64, epsilons: &[f64], config_for: F) -> Result<ScalingFit>
where
    F: Fn(&Params) -> Result<HeteroclinicConfig> + Sync,
{
    check_scaling_span(epsilons)?;
    let members: Vec<ScalingMember> = epsilons
        .par_iter()
        .map(|&eps| {
            let run = || -> Result<(f64, f64)> {
                let p = derive_params(eps, g)?;
                let cfg = config_for(&p)?;
                let sol = heteroclinic_solve(&p, &cfg)?;
                let w = sol
                    .profile
                    .corner_half_width()
                    .ok_or_else(|| Error::Domain("A has no zero for x > 0".into()))?;
                Ok((sol.profile.a_at_zero(), w))
            };
            match run() {
                Ok((a, w)) => ScalingMember {
                    epsilon: eps,
                    a_at_zero: Some(a),
                    half_width: Some(w),
                    error: None,
                },
                Err(e) => ScalingMember {
                    epsilon: eps,
                    a_at_zero: None,
                    half_width: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    fit_scaling(g, members)
}
