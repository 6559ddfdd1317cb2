//! Streamlines `X' = -b(X, t)`, the external density carried along them,
//! and retention and monotonicity checks along streamlines.

use serde::{Deserialize, Serialize};

use crate::coefficients::{congestion_margin, CoefficientSpec, FrameProvider};
use crate::error::{Error, Result};
use crate::grid::{self, Grid, ScalarField};
use crate::solver::Trajectory;

/// Default RK4 step.
pub const DT_ODE: f64 = 1e-3;

const EDGE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Streamline {
    pub x0: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub dt_ode: f64,
}

impl Streamline {
    pub fn end(&self) -> f64 {
        *self.positions.last().expect("streamline has a start point")
    }

    /// Position at time `t`, linearly interpolated between RK4 nodes.
    pub fn at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        let (lo, hi) = if self.times[0] <= self.times[n - 1] { (self.times[0], self.times[n - 1]) } else { (self.times[n - 1], self.times[0]) };
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return None;
        }
        if n == 1 {
            return Some(self.positions[0]);
        }
        let step = (self.times[n - 1] - self.times[0]) / (n - 1) as f64;
        let s = ((t - self.times[0]) / step).clamp(0.0, (n - 1) as f64);
        let j = (s.floor() as usize).min(n - 2);
        let w = s - j as f64;
        Some(self.positions[j] * (1.0 - w) + self.positions[j + 1] * w)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x\n");
        for (t, x) in self.times.iter().zip(&self.positions) {
            s.push_str(&format!("{},{}\n", grid::fmt_f64(*t), grid::fmt_f64(*x)));
        }
        s
    }
}

/// Classical RK4 for `X' = -b(X, t)` from `(x0, t0)` to `t1`; `t1 < t0`
/// integrates backward. The step is the largest not exceeding `dt_ode`
/// that divides the interval evenly.
pub fn integrate_streamline(
    b: &dyn Fn(f64, f64) -> f64,
    domain: (f64, f64),
    x0: f64,
    t0: f64,
    t1: f64,
    dt_ode: f64,
) -> Result<Streamline> {
    if !(dt_ode > 0.0) {
        return Err(Error::InvalidConfig(format!("dt_ode must be positive, got {dt_ode}")));
    }
    let span = t1 - t0;
    let n = ((span.abs() / dt_ode).ceil() as usize).max(1);
    let h = span / n as f64;
    let rhs = |x: f64, t: f64| -b(x, t);
    let check = |x: f64, t: f64| {
        if x < domain.0 - EDGE_SLACK || x > domain.1 + EDGE_SLACK || !x.is_finite() {
            Err(Error::LeftDomain { x, t })
        } else {
            Ok(())
        }
    };
    check(x0, t0)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut positions = Vec::with_capacity(n + 1);
    times.push(t0);
    positions.push(x0);
    let mut x = x0;
    for i in 0..n {
        let t = t0 + i as f64 * h;
        if span == 0.0 {
            break;
        }
        let k1 = rhs(x, t);
        let k2 = rhs(x + 0.5 * h * k1, t + 0.5 * h);
        let k3 = rhs(x + 0.5 * h * k2, t + 0.5 * h);
        let k4 = rhs(x + h * k3, t + h);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let tn = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
        check(x, tn)?;
        times.push(tn);
        positions.push(x);
    }
    Ok(Streamline { x0, times, positions, dt_ode })
}

fn spec_domain(spec: &CoefficientSpec) -> (f64, f64) {
    spec.extent
}

/// Foot of the streamline through `(x, t)` at time 0.
pub fn inverse_point(spec: &CoefficientSpec, x: f64, t: f64, dt_ode: f64) -> Result<f64> {
    let b = |x: f64, t: f64| spec.b(x, t);
    Ok(integrate_streamline(&b, spec_domain(spec), x, t, 0.0, dt_ode)?.end())
}

/// Streamline from `x0` at time 0 to time `t`, with drift taken from `spec`.
pub fn streamline(spec: &CoefficientSpec, x0: f64, t: f64, dt_ode: f64) -> Result<Streamline> {
    let b = |x: f64, t: f64| spec.b(x, t);
    integrate_streamline(&b, spec_domain(spec), x0, 0.0, t, dt_ode)
}

/// `rho0(X(-t, x)) exp(int_0^t (f + div b)(X(s), s) ds)`, with the exponent
/// integrated by the trapezoid rule on the RK4 nodes.
pub fn external_density(
    rho0: &dyn Fn(f64) -> f64,
    b: &dyn Fn(f64, f64) -> f64,
    rate: &dyn Fn(f64, f64) -> f64,
    domain: (f64, f64),
    x: f64,
    t: f64,
    dt_ode: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidConfig(format!("time must be >= 0, got {t}")));
    }
    let back = integrate_streamline(b, domain, x, t, 0.0, dt_ode)?;
    let vals: Vec<f64> = back.times.iter().zip(&back.positions).map(|(&s, &y)| rate(y, s)).collect();
    let mut expo = 0.0;
    for i in 1..vals.len() {
        expo += 0.5 * (back.times[i - 1] - back.times[i]) * (vals[i - 1] + vals[i]);
    }
    Ok(rho0(back.end()) * expo.exp())
}

/// External density built from the problem data and a sampled initial
/// density (linearly interpolated between cell centers).
#[derive(Clone, Debug)]
pub struct ExternalDensity {
    pub spec: CoefficientSpec,
    pub rho0: ScalarField,
    pub dt_ode: f64,
}

impl ExternalDensity {
    pub fn new(spec: &CoefficientSpec, rho0: &ScalarField) -> Self {
        ExternalDensity { spec: spec.clone(), rho0: rho0.clone(), dt_ode: DT_ODE }
    }

    pub fn at(&self, x: f64, t: f64) -> Result<f64> {
        let r0 = |y: f64| self.rho0.at(y).unwrap_or(0.0);
        let b = |y: f64, s: f64| self.spec.b(y, s);
        let rate = |y: f64, s: f64| self.spec.transport_rate(y, s);
        external_density(&r0, &b, &rate, self.spec.extent, x, t, self.dt_ode)
    }

    /// Samples cells listed in `cells` (all cells when `None`); others are 0.
    pub fn field(&self, grid: &Grid, t: f64, cells: Option<&[bool]>) -> Result<ScalarField> {
        let mut out = ScalarField::zeros(*grid, t);
        for i in 0..grid.n_cells() {
            if cells.is_none_or(|c| c[i]) {
                out.values[i] = if t == 0.0 { self.rho0.values[i] } else { self.at(grid.center(i), t)? };
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub tau: f64,
    pub beta: f64,
    pub tol: f64,
    /// Worst margin per seed point.
    pub margins: Vec<f64>,
    pub worst_margin: f64,
    /// Smallest `beta >= 0` with every margin `>= -tol` (infinite if none).
    pub fitted_beta: f64,
}

impl RetentionReport {
    pub fn passes(&self) -> bool {
        self.worst_margin >= -self.tol
    }
}

/// Compares `p(X(t), t)` against `p(X(tau), tau) exp(-(beta + 1/tau)(t - tau))`
/// for every snapshot `t >= tau`. The reference snapshot is the first one at
/// or after `tau`.
pub fn retention_check(traj: &Trajectory, spec: &CoefficientSpec, x0s: &[f64], tau: f64, beta: f64, tol: f64) -> Result<RetentionReport> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    let snaps: Vec<_> = traj.snapshots.iter().filter(|s| s.t >= tau - 1e-12).collect();
    let t_end = snaps.last().map_or(tau, |s| s.t);
    let mut rep = RetentionReport { tau, beta, tol, margins: Vec::new(), worst_margin: 0.0, fitted_beta: 0.0 };
    let Some(first) = snaps.first() else {
        return Ok(rep);
    };
    let tau = first.t;
    rep.tau = tau;
    for &x0 in x0s {
        let line = streamline(spec, x0, t_end, DT_ODE)?;
        let at = |s: &crate::solver::SolverState| -> f64 {
            let x = line.at(s.t).unwrap_or(x0);
            s.grid().interpolate(&s.p.values, x).unwrap_or(0.0)
        };
        let p_tau = at(first);
        let mut worst: f64 = 0.0;
        for s in &snaps[1..] {
            let p_t = at(s);
            let dt = s.t - tau;
            let margin = p_t - p_tau * (-(beta + 1.0 / tau) * dt).exp();
            worst = worst.min(margin);
            if p_tau > 0.0 && dt > 0.0 {
                let need = if p_t + tol > 0.0 { -((p_t + tol) / p_tau).ln() / dt - 1.0 / tau } else { f64::INFINITY };
                rep.fitted_beta = rep.fitted_beta.max(need);
            }
        }
        rep.margins.push(worst);
        rep.worst_margin = rep.worst_margin.min(worst);
    }
    Ok(rep)
}

fn check_congested(traj: &Trajectory, provider: &FrameProvider) -> Result<()> {
    for s in &traj.snapshots {
        let frame = provider.frame(s.t)?;
        let eps = congestion_margin(&frame, &vec![true; frame.m.values.len()]);
        if !(eps > 0.0) {
            return Err(Error::NotCongested { margin: eps });
        }
    }
    Ok(())
}

/// For consecutive snapshots, transports the `theta`-support of `p` along
/// streamlines and returns the largest fraction of transported cells that
/// land outside the later support.
pub fn monotone_support_check(traj: &Trajectory, provider: &FrameProvider, theta: f64) -> Result<f64> {
    check_congested(traj, provider)?;
    let spec = provider.spec();
    let mut worst: f64 = 0.0;
    for w in traj.snapshots.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if !(a.p.max() > 0.0) {
            continue;
        }
        let Ok(sa) = grid::support(&a.p, theta) else { continue };
        let mb = if b.p.max() > 0.0 { grid::support(&b.p, theta)?.mask } else { vec![false; b.p.values.len()] };
        let g = a.grid();
        let drift = |x: f64, t: f64| spec.b(x, t);
        let (mut total, mut lost) = (0usize, 0usize);
        for i in (0..sa.mask.len()).filter(|&i| sa.mask[i]) {
            total += 1;
            let x = integrate_streamline(&drift, spec.extent, g.center(i), a.t, b.t, DT_ODE)?.end();
            match g.cell_of(x) {
                Some(j) if mb[j] => {}
                _ => lost += 1,
            }
        }
        if total > 0 {
            worst = worst.max(lost as f64 / total as f64);
        }
    }
    Ok(worst)
}

/// Worst value over seed points and snapshot pairs `t1 < t2` (both `> 0`) of
/// `v(X(t2), t2) - v(X(t1), t1) (t1/t2)^(1/(k-1)) exp(-beta (t2 - t1)/(k-1))`.
pub fn normalized_monotonicity_check(traj: &Trajectory, spec: &CoefficientSpec, x0s: &[f64], beta: f64) -> Result<f64> {
    let k = traj.k();
    let snaps: Vec<_> = traj.snapshots.iter().filter(|s| s.t > 0.0).collect();
    let Some(t_end) = snaps.last().map(|s| s.t) else { return Ok(0.0) };
    let mut worst: f64 = 0.0;
    for &x0 in x0s {
        let line = streamline(spec, x0, t_end, DT_ODE)?;
        let vals: Vec<(f64, f64)> = snaps
            .iter()
            .map(|s| (s.t, s.grid().interpolate(&s.v.values, line.at(s.t).unwrap_or(x0)).unwrap_or(0.0)))
            .collect();
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                let (t1, v1) = vals[i];
                let (t2, v2) = vals[j];
                let lower = v1 * (t1 / t2).powf(1.0 / (k - 1.0)) * (-beta * (t2 - t1) / (k - 1.0)).exp();
                worst = worst.min(v2 - lower);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOM: (f64, f64) = (-10.0, 10.0);

    #[test]
    fn identity_and_translation() {
        let zero = |_: f64, _: f64| 0.0;
        let s = integrate_streamline(&zero, DOM, 0.3, 0.0, 1.0, 1e-3).unwrap();
        assert!(s.positions.iter().all(|&x| x == 0.3));
        let c = |_: f64, _: f64| 0.7;
        let s = integrate_streamline(&c, DOM, 0.3, 0.5, 2.0, 1e-3).unwrap();
        assert!((s.end() - (0.3 - 0.7 * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn linear_drift_is_exponential() {
        let b = |x: f64, _: f64| x;
        let s = integrate_streamline(&b, DOM, 1.5, 0.0, 2.0, 1e-3).unwrap();
        assert!((s.end() - 1.5 * (-2.0f64).exp()).abs() < 1e-8);
        let back = integrate_streamline(&b, DOM, s.end(), 2.0, 0.0, 1e-3).unwrap();
        assert!((back.end() - 1.5).abs() < 1e-8);
    }

    #[test]
    fn leaving_the_domain_is_an_error() {
        let c = |_: f64, _: f64| -3.0;
        assert!(matches!(integrate_streamline(&c, (0.0, 1.0), 0.5, 0.0, 1.0, 1e-3), Err(Error::LeftDomain { .. })));
    }

    #[test]
    fn sine_round_trip() {
        let b = |x: f64, _: f64| x.sin();
        let foot = integrate_streamline(&b, DOM, 0.8, 1.0, 0.0, 1e-3).unwrap().end();
        let back = integrate_streamline(&b, DOM, foot, 0.0, 1.0, 1e-3).unwrap().end();
        assert!((back - 0.8).abs() < 1e-6);
    }

    #[test]
    fn external_density_examples() {
        let r0 = |x: f64| (-x * x).exp();
        let zero = |_: f64, _: f64| 0.0;
        let c = |_: f64, _: f64| 0.4;
        let v = external_density(&r0, &zero, &zero, DOM, 0.5, 1.3, 1e-3).unwrap();
        assert_eq!(v, r0(0.5));
        let v = external_density(&r0, &zero, &c, DOM, 0.5, 1.3, 1e-3).unwrap();
        assert!((v - r0(0.5) * (0.4f64 * 1.3).exp()).abs() < 1e-12);
        let b = |_: f64, _: f64| 0.25;
        let v = external_density(&r0, &b, &zero, DOM, 0.5, 1.3, 1e-3).unwrap();
        assert!((v - r0(0.5 + 0.25 * 1.3)).abs() < 1e-12);
    }

    #[test]
    fn external_density_solves_continuity() {
        // d_t rho = d_x(rho b) + f rho with b = sin x, f = 0.3
        let r0 = |x: f64| (-x * x).exp();
        let b = |x: f64, _: f64| x.sin();
        let rate = |x: f64, _: f64| 0.3 + x.cos();
        let e = |x: f64, t: f64| external_density(&r0, &b, &rate, DOM, x, t, 1e-3).unwrap();
        let (x, t, d) = (0.4, 0.6, 1e-3);
        let dt = (e(x, t + d) - e(x, t - d)) / (2.0 * d);
        let flux = |y: f64| e(y, t) * b(y, t);
        let dx = (flux(x + d) - flux(x - d)) / (2.0 * d);
        let res = dt - dx - 0.3 * e(x, t);
        assert!(res.abs() < 1e-5, "{res}");
    }
}
