//! Pressure and the pressure-based estimate checks: the Laplacian-type
//! quantity `w`, lower (Aronson-Benilan type) bounds on it, complementarity
//! residuals and a suite of uniform norms over space-time.

use serde::{Deserialize, Serialize};

use crate::coefficients::{congestion_margin, CoefficientFrame, FrameProvider};
use crate::error::{Error, Result};
use crate::grid::{self, erode, ScalarField};
use crate::report::DiagnosticsReport;
use crate::solver::{pressure_value, Trajectory};

/// Relative level defining the pressure support.
pub const THETA: f64 = 1e-3;

/// Cells removed from each edge of a support before stencil checks.
pub const EROSION: usize = 3;

pub fn pressure_of(rho: &ScalarField, m: &ScalarField, k: f64) -> ScalarField {
    ScalarField {
        grid: rho.grid,
        t: rho.t,
        values: rho.values.iter().zip(&m.values).map(|(r, m)| pressure_value((r / m).max(0.0), k)).collect(),
    }
}

/// `(1/m) div(m grad p)`.
pub fn w_field(p: &ScalarField, m: &ScalarField) -> ScalarField {
    let mut w = grid::div_m_grad(m, p);
    for (w, m) in w.values.iter_mut().zip(&m.values) {
        *w /= m;
    }
    w
}

/// `{p > theta max p}` eroded by `cells`; all false when `p` vanishes.
pub fn interior_mask(p: &ScalarField, theta: f64, cells: usize) -> Vec<bool> {
    match grid::support(p, theta) {
        Ok(s) if p.max() > 0.0 => erode(&p.grid, &s.mask, cells),
        _ => vec![false; p.values.len()],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbMode {
    /// `w >= -2/((k-1)t) - K1`
    Generalized,
    /// `w >= -F - beta/(k-1) - 1/((k-1)t)`
    Refined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbReport {
    pub k: f64,
    pub mode: AbMode,
    pub times: Vec<f64>,
    /// Minimum of `w` over the eroded support (0 when the support is empty).
    pub min_w: Vec<f64>,
    /// Constant needed at each time (never negative).
    pub required: Vec<f64>,
    /// Smallest constant making every margin nonnegative.
    pub fitted: f64,
    /// Constant the margins are measured against (supplied or fitted).
    pub constant: f64,
    /// Per-time minimum of `w - bound` over the eroded support.
    pub margins: Vec<f64>,
    pub worst_margin: f64,
    pub notes: Vec<String>,
}

impl AbReport {
    pub fn passes(&self) -> bool {
        self.worst_margin >= 0.0
    }
}

/// Evaluates the lower bound on `w` at every snapshot with `t > 0` and
/// fits the smallest constant (`K1` or `beta`) for which it holds.
pub fn ab_check(traj: &Trajectory, mode: AbMode, provider: &FrameProvider, constant: Option<f64>) -> Result<AbReport> {
    let k = traj.k();
    let mut rep = AbReport {
        k,
        mode,
        times: Vec::new(),
        min_w: Vec::new(),
        required: Vec::new(),
        fitted: 0.0,
        constant: 0.0,
        margins: Vec::new(),
        worst_margin: f64::INFINITY,
        notes: Vec::new(),
    };
    // (w, F) pairs on each eroded support
    let mut samples: Vec<Vec<(f64, f64)>> = Vec::new();
    for s in &traj.snapshots {
        if !(s.t > 0.0) {
            rep.notes.push(format!("skipped snapshot at t = {}: bound undefined at t = 0", s.t));
            continue;
        }
        let frame = provider.frame(s.t)?;
        let mask = interior_mask(&s.p, THETA, EROSION);
        if mode == AbMode::Refined && mask.iter().any(|&b| b) {
            let eps = congestion_margin(&frame, &mask);
            if !(eps > 0.0) {
                return Err(Error::NotCongested { margin: eps });
            }
        }
        let w = w_field(&s.p, &frame.m);
        let pts: Vec<(f64, f64)> = mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (w.values[i], frame.big_f.values[i]))
            .collect();
        let t = s.t;
        let need = pts
            .iter()
            .map(|&(w, f)| match mode {
                AbMode::Generalized => -2.0 / ((k - 1.0) * t) - w,
                AbMode::Refined => (k - 1.0) * (-f - w) - 1.0 / t,
            })
            .fold(0.0, f64::max);
        rep.times.push(t);
        rep.min_w.push(if pts.is_empty() { 0.0 } else { pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) });
        rep.required.push(need);
        samples.push(pts);
    }
    rep.fitted = rep.required.iter().copied().fold(0.0, f64::max);
    rep.constant = constant.unwrap_or(rep.fitted);
    for (pts, &t) in samples.iter().zip(&rep.times) {
        let c = rep.constant;
        let margin = pts
            .iter()
            .map(|&(w, f)| match mode {
                AbMode::Generalized => w - (-2.0 / ((k - 1.0) * t) - c),
                AbMode::Refined => w - (-f - c / (k - 1.0) - 1.0 / ((k - 1.0) * t)),
            })
            .fold(f64::INFINITY, f64::min);
        let margin = if margin.is_finite() { margin } else { 0.0 };
        rep.margins.push(margin);
        rep.worst_margin = rep.worst_margin.min(margin);
    }
    if !rep.worst_margin.is_finite() {
        rep.worst_margin = 0.0;
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complementarity {
    /// `max p (m - rho)` over cells with `rho <= m`.
    pub residual: f64,
    /// `max (rho - m)`, zero when `rho <= m` everywhere.
    pub overshoot: f64,
}

pub fn complementarity_residual(p: &ScalarField, rho: &ScalarField, m: &ScalarField) -> Complementarity {
    let mut residual: f64 = 0.0;
    let mut overshoot: f64 = 0.0;
    for i in 0..p.values.len() {
        let gap = m.values[i] - rho.values[i];
        if gap >= 0.0 {
            residual = residual.max(p.values[i] * gap);
        } else {
            overshoot = overshoot.max(-gap);
        }
    }
    Complementarity { residual, overshoot }
}

/// `max over v in [0,1]` of `k/(k-1) v^(k-1) (1 - v)`, i.e.
/// `((k-1)/k)^(k-1) / (k-1)`.
pub fn complementarity_scalar_bound(k: f64) -> f64 {
    ((k - 1.0) / k).powf(k - 1.0) / (k - 1.0)
}

/// Volume-weighted mean of `|div(m grad p) + m F|` over the eroded support.
pub fn pressure_equation_residual(p: &ScalarField, frame: &CoefficientFrame, theta: f64) -> Result<f64> {
    if !(p.max() > 0.0) {
        return Err(Error::EmptySupport);
    }
    let mask = interior_mask(p, theta, EROSION);
    let lap = grid::div_m_grad(&frame.m, p);
    let g = p.grid;
    let (mut num, mut vol) = (0.0, 0.0);
    for i in 0..mask.len() {
        if mask[i] {
            let r = lap.values[i] + frame.m.values[i] * frame.big_f.values[i];
            num += r.abs() * g.volume(i);
            vol += g.volume(i);
        }
    }
    if vol == 0.0 {
        return Err(Error::EmptySupport);
    }
    Ok(num / vol)
}

fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Outermost `|x|` of the `THETA`-support of `p` (0 when empty).
pub fn support_radius(p: &ScalarField) -> f64 {
    match grid::support(p, THETA) {
        Ok(s) if p.max() > 0.0 => s.interval.0.abs().max(s.interval.1.abs()),
        _ => 0.0,
    }
}

/// Uniform-in-`k` quantities over the trajectory. `tau` bounds the time
/// window for the BV and time-derivative metrics from below.
pub fn estimate_suite(traj: &Trajectory, tau: f64) -> DiagnosticsReport {
    let mut r = DiagnosticsReport::new();
    let snaps = &traj.snapshots;
    let ts: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let mut g2 = Vec::with_capacity(snaps.len());
    let mut g4 = Vec::with_capacity(snaps.len());
    for s in snaps {
        let gp = grid::grad(&s.p);
        let (mut a, mut b) = (0.0, 0.0);
        for (i, &d) in gp.values.iter().enumerate() {
            let vol = s.grid().volume(i);
            a += vol * d * d;
            b += vol * d.powi(4);
        }
        g2.push(a);
        g4.push(b);
    }
    let sup_p = snaps.iter().map(|s| s.p.max()).fold(0.0, f64::max);
    let radius = snaps.iter().map(|s| support_radius(&s.p)).fold(0.0, f64::max);
    let late: Vec<_> = snaps.iter().filter(|s| s.t >= tau).collect();
    let bv = late.iter().map(|s| grid::bv_seminorm(&s.v)).fold(0.0, f64::max);
    let (mut dv, mut dp) = (0.0, 0.0);
    for w in late.windows(2) {
        for i in 0..w[0].v.values.len() {
            let vol = w[0].grid().volume(i);
            dv += vol * (w[1].v.values[i] - w[0].v.values[i]).abs();
            dp += vol * (w[1].p.values[i] - w[0].p.values[i]).abs();
        }
    }
    r.value("sup_p", sup_p)
        .value("support_radius", radius)
        .value("grad_p_l2_sq", trapezoid(&ts, &g2))
        .value("grad_p_l4_4", trapezoid(&ts, &g4))
        .value("bv_v_sup", bv)
        .value("dt_v_l1", dv)
        .value("dt_p_l1", dp);
    if late.len() < 2 {
        r.note(format!("fewer than two snapshots at t >= {tau}; time-derivative metrics are zero"));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn pressure_examples() {
        let g = Grid::line(0.0, 1.0, 10).unwrap();
        let m = ScalarField::from_fn(g, 0.0, |x| 1.0 + x);
        assert!(pressure_of(&m, &m, 2.0).values.iter().all(|&p| (p - 2.0).abs() < 1e-15));
        assert!(pressure_of(&ScalarField::zeros(g, 0.0), &m, 7.0).values.iter().all(|&p| p == 0.0));
        let one = ScalarField::from_fn(g, 0.0, |_| 1.0);
        let half = ScalarField::from_fn(g, 0.0, |_| 0.5);
        assert!(pressure_of(&half, &one, 2.0).values.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn w_examples() {
        let g = Grid::line(-1.0, 1.0, 50).unwrap();
        let one = ScalarField::from_fn(g, 0.0, |_| 1.0);
        let w = w_field(&ScalarField::from_fn(g, 0.0, |x| x * x), &one);
        for i in 1..49 {
            assert!((w.values[i] - 2.0).abs() < 1e-10);
        }
        let m = ScalarField::from_fn(g, 0.0, |x| 2.0 + x.sin());
        assert!(w_field(&ScalarField::from_fn(g, 0.0, |_| 3.5), &m).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn complementarity_examples() {
        let g = Grid::line(-2.0, 2.0, 40).unwrap();
        let m = ScalarField::from_fn(g, 0.0, |x| (-x * x / 10.0).exp());
        let rho = ScalarField::from_fn(g, 0.0, |x| if x.abs() < 1.0 { (-x * x / 10.0).exp() } else { 0.0 });
        let p = ScalarField::from_fn(g, 0.0, |x| if x.abs() < 1.0 { 0.7 } else { 0.0 });
        let c = complementarity_residual(&p, &rho, &m);
        assert_eq!(c.residual, 0.0);
        assert_eq!(c.overshoot, 0.0);
        assert!((complementarity_scalar_bound(40.0) - 9.552463902376867e-3).abs() < 1e-15);
        assert!((complementarity_scalar_bound(80.0) - 4.6860201127654965e-3).abs() < 1e-15);
    }

    #[test]
    fn pressure_equation_examples() {
        use crate::coefficients::{eval_frame, CoefficientSpec, Profile};
        let g = Grid::line(-1.0, 1.0, 200).unwrap();
        let s = CoefficientSpec::new(Profile::constant(1.0), Profile::constant(0.0), Profile::constant(1.0), 0.5, &g).unwrap();
        let fr = eval_frame(&s, &g, 0.0).unwrap();
        // -p'' = F = 1 on (-1/2, 1/2)
        let p = ScalarField::from_fn(g, 0.0, |x| (0.125 - 0.5 * x * x).max(0.0));
        assert!(pressure_equation_residual(&p, &fr, 1e-3).unwrap() < 1e-10);
        assert!(matches!(pressure_equation_residual(&ScalarField::zeros(g, 0.0), &fr, 1e-3), Err(Error::EmptySupport)));
    }
}
