//! Adaptive Dormand-Prince 5(4) integration with dense output, event
//! location on hyperplane crossings and first-integral drift monitoring.

use serde::{Deserialize, Serialize};

use crate::dynamics::{first_integral, vector_field, State};
use crate::error::{Error, Result};
use crate::params::Params;

/// A first-order system `y' = f(x, y)` of fixed dimension.
pub trait OdeRhs {
    fn dim(&self) -> usize;
    fn eval(&self, x: f64, y: &[f64], dy: &mut [f64]);
}

impl<F> OdeRhs for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(x, y, dy)
    }
}

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Number of leading components entering the error norm; all when `None`.
    pub control_dim: Option<usize>,
    /// Number of leading components kept in the dense output; all when `None`.
    pub dense_dim: Option<usize>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            max_steps: 2_000_000,
            control_dim: None,
            dense_dim: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::Domain(
                "integrator tolerances and maximal step must be positive".into(),
            ));
        }
        Ok(())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseStep {
    pub x0: f64,
    pub h: f64,
    /// Five coefficient blocks of length `dense_dim`.
    pub coeffs: Vec<f64>,
}

impl DenseStep {
    fn dim(&self) -> usize {
        self.coeffs.len() / 5
    }

    /// Evaluates the interpolant at `x` (inside or slightly outside the step).
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let n = self.dim();
        let th = (x - self.x0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coeffs;
        for i in 0..n.min(out.len()) {
            out[i] = c[i]
                + th * (c[n + i] + th1 * (c[2 * n + i] + th * (c[3 * n + i] + th1 * c[4 * n + i])));
        }
    }

}

/// Raw solution of a generic system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub xs: Vec<f64>,
    /// Row-major states, one row of length `dim` per abscissa.
    pub ys: Vec<f64>,
    pub dim: usize,
    pub dense: Vec<DenseStep>,
    pub steps_rejected: usize,
}

impl Solution {
    pub fn len(&self) -> usize {
        self.xs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
    pub fn state(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }
    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
    pub fn x_end(&self) -> f64 {
        *self.xs.last().expect("solution has at least one point")
    }

    /// Dense-output evaluation; clamps to the end steps outside the span.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        match dense_lookup(&self.dense, x) {
            Some(d) => d.eval_into(x, out),
            None => {
                let n = out.len();
                out.copy_from_slice(&self.state(0)[..n]);
            }
        }
    }
}

/// Integrates `rhs` from `x0` to `x1` (either direction).
pub fn solve<R: OdeRhs + ?Sized>(
    rhs: &R,
    x0: f64,
    y0: &[f64],
    x1: f64,
    cfg: &IntegratorConfig,
) -> Result<Solution> {
    solve_with(rhs, x0, y0, x1, cfg, |_, _| false)
}

/// Integrates with a stop predicate evaluated after every accepted step.
pub fn solve_with<R: OdeRhs + ?Sized, S: FnMut(f64, &[f64]) -> bool>(
    rhs: &R,
    x0: f64,
    y0: &[f64],
    x1: f64,
    cfg: &IntegratorConfig,
    mut stop: S,
) -> Result<Solution> {
    cfg.validate()?;
    let n = rhs.dim();
    assert_eq!(y0.len(), n, "initial state has wrong dimension");
    let nc = cfg.control_dim.unwrap_or(n).min(n);
    let nd = cfg.dense_dim.unwrap_or(n).min(n);
    let mut sol = Solution {
        xs: vec![x0],
        ys: y0.to_vec(),
        dim: n,
        dense: Vec::new(),
        steps_rejected: 0,
    };
    if x1 == x0 {
        return Ok(sol);
    }
    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();

    let mut x = x0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    rhs.eval(x, &y, &mut k[0]);

    let mut h = initial_step(rhs, x, &y, &k[0], dir, cfg, nc).min(cfg.max_step).min(span);
    let mut reject_streak = false;
    for _ in 0..cfg.max_steps {
        let remaining = (x1 - x) * dir;
        if remaining <= 0.0 {
            break;
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let hs = h * dir;
        stage(&y, &k, &mut tmp, hs, &[(0, A21)]);
        rhs.eval(x + C2 * hs, &tmp, &mut k[1]);
        stage(&y, &k, &mut tmp, hs, &[(0, A31), (1, A32)]);
        rhs.eval(x + C3 * hs, &tmp, &mut k[2]);
        stage(&y, &k, &mut tmp, hs, &[(0, A41), (1, A42), (2, A43)]);
        rhs.eval(x + C4 * hs, &tmp, &mut k[3]);
        stage(&y, &k, &mut tmp, hs, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        rhs.eval(x + C5 * hs, &tmp, &mut k[4]);
        stage(&y, &k, &mut tmp, hs, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        rhs.eval(x + hs, &tmp, &mut k[5]);
        stage(&y, &k, &mut ynew, hs, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)]);
        let (k_head, k_tail) = k.split_at_mut(6);
        rhs.eval(x + hs, &ynew, &mut k_tail[0]);

        let mut err = 0.0;
        for i in 0..nc {
            let e = hs
                * (E1 * k_head[0][i] + E3 * k_head[2][i] + E4 * k_head[3][i] + E5 * k_head[4][i]
                    + E6 * k_head[5][i]
                    + E7 * k_tail[0][i]);
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / nc.max(1) as f64).sqrt();
        if !err.is_finite() {
            if h < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::NonFinite { x });
            }
            h *= 0.25;
            sol.steps_rejected += 1;
            reject_streak = true;
            continue;
        }
        if err <= 1.0 {
            let mut coeffs = vec![0.0; 5 * nd];
            for i in 0..nd {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k[0][i] - ydiff;
                coeffs[i] = y[i];
                coeffs[nd + i] = ydiff;
                coeffs[2 * nd + i] = bspl;
                coeffs[3 * nd + i] = ydiff - hs * k[6][i] - bspl;
                coeffs[4 * nd + i] = hs
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i]
                        + D6 * k[5][i]
                        + D7 * k[6][i]);
            }
            sol.dense.push(DenseStep { x0: x, h: hs, coeffs });
            x = if last { x1 } else { x + hs };
            y.copy_from_slice(&ynew);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { x });
            }
            let k6 = k[6].clone();
            k[0].copy_from_slice(&k6);
            sol.xs.push(x);
            sol.ys.extend_from_slice(&y);
            if stop(x, &y) || last {
                return Ok(sol);
            }
            let mut fac = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 10.0);
            if reject_streak {
                fac = fac.min(1.0);
            }
            reject_streak = false;
            h = (h * fac).min(cfg.max_step);
        } else {
            sol.steps_rejected += 1;
            reject_streak = true;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            if h < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::StepUnderflow { x, state: y });
            }
        }
    }
    if (x1 - x) * dir > 0.0 {
        return Err(Error::StepUnderflow { x, state: y });
    }
    Ok(sol)
}

fn stage(y: &[f64], k: &[Vec<f64>], out: &mut [f64], h: f64, coefs: &[(usize, f64)]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for &(j, a) in coefs {
            acc += a * k[j][i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn initial_step<R: OdeRhs + ?Sized>(
    rhs: &R,
    x: f64,
    y: &[f64],
    f0: &[f64],
    dir: f64,
    cfg: &IntegratorConfig,
    nc: usize,
) -> f64 {
    let sc = |i: usize| cfg.abs_tol + cfg.rel_tol * y[i].abs();
    let d0 = (0..nc).map(|i| (y[i] / sc(i)).powi(2)).sum::<f64>().sqrt();
    let d1 = (0..nc).map(|i| (f0[i] / sc(i)).powi(2)).sum::<f64>().sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(cfg.max_step);
    let y1: Vec<f64> = (0..y.len()).map(|i| y[i] + dir * h0 * f0[i]).collect();
    let mut f1 = vec![0.0; y.len()];
    rhs.eval(x + dir * h0, &y1, &mut f1);
    let d2 = (0..nc)
        .map(|i| ((f1[i] - f0[i]) / sc(i)).powi(2))
        .sum::<f64>()
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

/// Crossing direction accepted by an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

/// A smooth scalar functional of the state whose zero crossings are located.
pub struct EventSpec<'a> {
    pub name: String,
    pub function: Box<dyn Fn(&State) -> f64 + Send + Sync + 'a>,
    pub direction: Crossing,
    /// Stop the integration at the first accepted crossing.
    pub terminal: bool,
}

impl<'a> EventSpec<'a> {
    /// Event on the hyperplane `state[component] = value`.
    pub fn hyperplane(component: usize, value: f64, direction: Crossing, terminal: bool) -> Self {
        Self {
            name: format!("s[{component}]={value}"),
            function: Box::new(move |s: &State| s[component] - value),
            direction,
            terminal,
        }
    }
}

/// A located event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventHit {
    pub name: String,
    pub x: f64,
    pub state: State,
}

/// Sampled orbit of the amplitude system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub xs: Vec<f64>,
    pub states: Vec<State>,
    /// First-integral value at every accepted step.
    pub w: Vec<f64>,
    pub events: Vec<EventHit>,
    dense: Vec<DenseStep>,
}

impl Trajectory {
    /// `sup |W(x) - W(x0)|` along the accepted steps.
    pub fn max_drift(&self) -> f64 {
        let w0 = self.w[0];
        self.w.iter().fold(0.0, |m, w| m.max((w - w0).abs()))
    }

    pub fn last(&self) -> State {
        *self.states.last().expect("trajectory is never empty")
    }

    /// Writes `x, A0, A1, A2, A3, B0, B1, W` with 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_profile_csv(w, &self.xs, &self.states, &self.w)
    }

    /// Dense-output evaluation at `x` inside the span.
    pub fn state_at(&self, x: f64) -> State {
        let mut out = [0.0; 6];
        match dense_lookup(&self.dense, x) {
            Some(d) => d.eval_into(x, &mut out),
            None => return self.states[0],
        }
        State(out)
    }
}

/// Column names of profile files.
pub const PROFILE_COLUMNS: [&str; 8] = ["x", "A0", "A1", "A2", "A3", "B0", "B1", "W"];

/// Writes samples as CSV with the columns [`PROFILE_COLUMNS`], 17 significant digits.
pub fn write_profile_csv<W: std::io::Write>(
    w: W,
    xs: &[f64],
    states: &[State],
    ws: &[f64],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PROFILE_COLUMNS)?;
    for ((x, s), wv) in xs.iter().zip(states).zip(ws) {
        let row = std::iter::once(*x)
            .chain(s.0.iter().copied())
            .chain(std::iter::once(*wv))
            .map(|v| format!("{v:.16e}"));
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads samples written by [`write_profile_csv`]; the `W` column is optional.
pub fn read_profile_csv<R: std::io::Read>(r: R) -> Result<(Vec<f64>, Vec<State>)> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Domain(format!("profile file lacks column '{name}'")))
    };
    let idx: Vec<usize> = PROFILE_COLUMNS[..7].iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut xs = Vec::new();
    let mut states = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let mut v = [0.0; 7];
        for (slot, &i) in v.iter_mut().zip(&idx) {
            let field = rec.get(i).unwrap_or("").trim();
            *slot = field
                .parse()
                .map_err(|_| Error::Domain(format!("unparsable number '{field}' in profile file")))?;
        }
        xs.push(v[0]);
        states.push(State([v[1], v[2], v[3], v[4], v[5], v[6]]));
    }
    if xs.len() < 2 || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "profile file needs at least two samples with increasing x".into(),
        ));
    }
    Ok((xs, states))
}

fn dense_lookup(dense: &[DenseStep], x: f64) -> Option<&DenseStep> {
    if dense.is_empty() {
        return None;
    }
    let forward = dense[0].h > 0.0;
    let idx = dense.partition_point(|d| {
        let end = d.x0 + d.h;
        if forward {
            x > end
        } else {
            x < end
        }
    });
    Some(&dense[idx.min(dense.len() - 1)])
}

/// Right-hand side of the amplitude system as an [`OdeRhs`].
pub struct AmplitudeRhs<'a> {
    pub params: &'a Params,
}

impl OdeRhs for AmplitudeRhs<'_> {
    fn dim(&self) -> usize {
        6
    }
    fn eval(&self, _x: f64, y: &[f64], dy: &mut [f64]) {
        let f = vector_field(&State::from_slice(y), self.params);
        dy.copy_from_slice(&f.0);
    }
}

struct PendingEvent {
    event: usize,
    step: usize,
    x_lo: f64,
    x_hi: f64,
}

/// Integrates the amplitude system with event detection.
pub fn integrate(
    s0: State,
    span: [f64; 2],
    p: &Params,
    cfg: &IntegratorConfig,
    events: &[EventSpec<'_>],
) -> Result<Trajectory> {
    if span[0] == span[1] {
        return Err(Error::Domain("integration span is degenerate".into()));
    }
    if !s0.is_finite() {
        return Err(Error::NonFinite { x: span[0] });
    }
    let rhs = AmplitudeRhs { params: p };
    let cfg = IntegratorConfig {
        dense_dim: Some(6),
        ..*cfg
    };
    let mut pending: Vec<PendingEvent> = Vec::new();
    let mut prev_x = span[0];
    let mut prev_vals: Vec<f64> = events.iter().map(|e| (e.function)(&s0)).collect();
    let mut step = 0usize;
    let stop = |x: f64, y: &[f64]| {
        let s = State::from_slice(y);
        let vals: Vec<f64> = events.iter().map(|e| (e.function)(&s)).collect();
        let mut terminal = false;
        for (k, ev) in events.iter().enumerate() {
            let (a, b) = (prev_vals[k], vals[k]);
            let crossed = match ev.direction {
                Crossing::Rising => a < 0.0 && b >= 0.0,
                Crossing::Falling => a > 0.0 && b <= 0.0,
                Crossing::Either => (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0),
            };
            if crossed {
                pending.push(PendingEvent {
                    event: k,
                    step,
                    x_lo: prev_x,
                    x_hi: x,
                });
                terminal |= ev.terminal;
            }
        }
        prev_vals = vals;
        prev_x = x;
        step += 1;
        terminal
    };
    let sol = solve_with(&rhs, span[0], &s0.0, span[1], &cfg, stop)?;
    let hits = pending
        .iter()
        .map(|pe| {
            let ev = &events[pe.event];
            let d = &sol.dense[pe.step];
            let eval = |x: f64| {
                let mut out = [0.0; 6];
                d.eval_into(x, &mut out);
                State(out)
            };
            let x = bisect(|x| (ev.function)(&eval(x)), pe.x_lo, pe.x_hi, 1e-13);
            EventHit {
                name: ev.name.clone(),
                x,
                state: eval(x),
            }
        })
        .collect();
    let states: Vec<State> = (0..sol.len()).map(|i| State::from_slice(sol.state(i))).collect();
    let w = states.iter().map(|s| first_integral(s, p)).collect();
    Ok(Trajectory {
        xs: sol.xs,
        states,
        w,
        events: hits,
        dense: sol.dense,
    })
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
