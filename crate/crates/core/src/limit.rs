//! Sweeps over the pressure exponent and the checks that only make sense
//! across a sweep or against the limiting free-boundary problem.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{congestion_margin, FrameProvider};
use crate::error::{Error, Result};
use crate::grid::{self, components, erode, Grid, ScalarField};
use crate::pressure::{complementarity_residual, estimate_suite, Complementarity, EROSION};
use crate::report::DiagnosticsReport;
use crate::solver::{run_lockstep, run_with, SolverConfig, SolverState, Trajectory};
use crate::streamlines::ExternalDensity;

#[derive(Clone, Debug)]
pub struct KSweepResult {
    pub scenario: String,
    pub ks: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// `d_rho[i][j] = |rho_i - rho_j|_{L1(Q_T)}`
    pub d_rho: Vec<Vec<f64>>,
    pub d_p: Vec<Vec<f64>>,
    /// Per k, per snapshot.
    pub complementarity: Vec<Vec<Complementarity>>,
    pub estimates: Vec<DiagnosticsReport>,
}

impl KSweepResult {
    pub fn index_of(&self, k: f64) -> Option<usize> {
        self.ks.iter().position(|&x| x == k)
    }

    pub fn distances_csv(&self) -> String {
        let mut s = String::from("k_i,k_j,d_rho,d_p\n");
        for i in 0..self.ks.len() {
            for j in 0..self.ks.len() {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    grid::fmt_f64(self.ks[i]),
                    grid::fmt_f64(self.ks[j]),
                    grid::fmt_f64(self.d_rho[i][j]),
                    grid::fmt_f64(self.d_p[i][j])
                ));
            }
        }
        s
    }

    pub fn residuals_csv(&self) -> String {
        let mut s = String::from("k,t,residual,overshoot\n");
        for (k, (tr, series)) in self.ks.iter().zip(self.trajectories.iter().zip(&self.complementarity)) {
            for (snap, c) in tr.snapshots.iter().zip(series) {
                s.push_str(&format!("{},{},{},{}\n", grid::fmt_f64(*k), grid::fmt_f64(snap.t), grid::fmt_f64(c.residual), grid::fmt_f64(c.overshoot)));
            }
        }
        s
    }
}

pub fn check_ks(ks: &[f64]) -> Result<()> {
    if ks.len() < 3 {
        return Err(Error::InvalidConfig(format!("a sweep needs at least 3 values of k, got {}", ks.len())));
    }
    if ks.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidConfig("k values must be sorted ascending".into()));
    }
    if ks.iter().any(|&k| !(k > 1.0)) {
        return Err(Error::InvalidConfig("every k must exceed 1".into()));
    }
    Ok(())
}

fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// `int_0^T |a - b|_{L1} dt` by the trapezoid rule over common snapshots.
pub fn l1_qt(a: &Trajectory, b: &Trajectory, field: impl Fn(&SolverState) -> &ScalarField) -> f64 {
    let ts = a.times();
    let ys: Vec<f64> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| {
            let (fx, fy) = (field(x), field(y));
            (0..fx.values.len()).map(|i| (fx.values[i] - fy.values[i]).abs() * fx.grid.volume(i)).sum()
        })
        .collect();
    trapezoid(&ts, &ys)
}

/// Runs one trajectory per `k` (in parallel) on common output times.
pub fn k_sweep(scenario: &str, provider: &FrameProvider, rho0: &ScalarField, ks: &[f64], config: &SolverConfig, tau: f64) -> Result<KSweepResult> {
    check_ks(ks)?;
    let trajectories: Vec<Trajectory> = ks
        .par_iter()
        .map(|&k| run_with(provider, rho0, &SolverConfig { k, ..config.clone() }))
        .collect::<Result<_>>()?;
    let n = ks.len();
    let (mut d_rho, mut d_p) = (vec![vec![0.0; n]; n], vec![vec![0.0; n]; n]);
    for i in 0..n {
        for j in i + 1..n {
            d_rho[i][j] = l1_qt(&trajectories[i], &trajectories[j], |s| &s.rho);
            d_p[i][j] = l1_qt(&trajectories[i], &trajectories[j], |s| &s.p);
            d_rho[j][i] = d_rho[i][j];
            d_p[j][i] = d_p[i][j];
        }
    }
    let mut complementarity = Vec::with_capacity(n);
    for tr in &trajectories {
        let mut series = Vec::with_capacity(tr.snapshots.len());
        for s in &tr.snapshots {
            let m = provider.frame(s.t)?.m;
            series.push(complementarity_residual(&s.p, &s.rho, &m));
        }
        complementarity.push(series);
    }
    let estimates = trajectories.iter().map(|t| estimate_suite(t, tau)).collect();
    Ok(KSweepResult { scenario: scenario.to_string(), ks: ks.to_vec(), trajectories, d_rho, d_p, complementarity, estimates })
}

fn require_congestion(provider: &FrameProvider, t: f64) -> Result<()> {
    let frame = provider.frame(t)?;
    let eps = congestion_margin(&frame, &vec![true; frame.m.values.len()]);
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Error::NotCongested { margin: eps })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationSample {
    pub t: f64,
    /// `max |rho - m| / m` over the eroded positive-pressure set.
    pub saturated_mismatch: f64,
    /// `max |rho - rho_E| / (rho_E + 1e-12)` over the eroded zero-pressure set.
    pub external_mismatch: f64,
    pub saturated_cells: usize,
    pub external_cells: usize,
}

/// Positive-pressure and zero-pressure interiors of a snapshot.
pub fn phases(p: &ScalarField, theta: f64) -> (Vec<bool>, Vec<bool>) {
    let g = p.grid;
    let pos = if p.max() > 0.0 { grid::support(p, theta).map(|s| s.mask).unwrap_or_else(|_| vec![false; p.values.len()]) } else { vec![false; p.values.len()] };
    let zero: Vec<bool> = pos.iter().map(|&b| !b).collect();
    (erode(&g, &pos, EROSION), erode(&g, &zero, EROSION))
}

/// Compares a trajectory (the limit proxy, usually the largest `k`) with
/// `m` on the saturated set and with the external density elsewhere.
pub fn identify_density(traj: &Trajectory, provider: &FrameProvider, external: &ExternalDensity, theta: f64) -> Result<Vec<IdentificationSample>> {
    require_congestion(provider, 0.0)?;
    let mut out = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        let g = s.grid();
        let m = provider.frame(s.t)?.m;
        let (plus, zero) = phases(&s.p, theta);
        let rho_e = external.field(&g, s.t, Some(&zero))?;
        let mut smp = IdentificationSample { t: s.t, saturated_mismatch: 0.0, external_mismatch: 0.0, saturated_cells: 0, external_cells: 0 };
        for i in 0..g.n_cells() {
            let r = s.rho.values[i];
            if plus[i] {
                smp.saturated_cells += 1;
                smp.saturated_mismatch = smp.saturated_mismatch.max((r - m.values[i]).abs() / m.values[i]);
            } else if zero[i] {
                smp.external_cells += 1;
                let e = rho_e.values[i];
                smp.external_mismatch = smp.external_mismatch.max((r - e).abs() / (e + 1e-12));
            }
        }
        out.push(smp);
    }
    Ok(out)
}

/// Cells within `band` of a transition in `mask`.
fn transition_band(mask: &[bool], band: usize) -> Vec<bool> {
    let n = mask.len();
    let mut out = vec![false; n];
    for j in 0..n.saturating_sub(1) {
        if mask[j] != mask[j + 1] {
            let lo = (j + 1).saturating_sub(band);
            let hi = (j + band).min(n - 1);
            out[lo..=hi].iter_mut().for_each(|b| *b = true);
        }
    }
    out
}

/// Fraction of cells with `theta < v < 1 - theta`, ignoring a band of
/// [`EROSION`] cells on each side of every edge of `{v > theta}`.
pub fn mushy_fraction(v: &ScalarField, theta: f64) -> f64 {
    let mask: Vec<bool> = v.values.iter().map(|&x| x > theta).collect();
    let band = transition_band(&mask, EROSION);
    let mushy = v.values.iter().zip(&band).filter(|(&x, &b)| !b && x > theta && x < 1.0 - theta).count();
    mushy as f64 / v.values.len() as f64
}

/// Largest mushy fraction over the snapshots of a run started from patch data.
pub fn patch_test(traj: &Trajectory, provider: &FrameProvider, theta: f64) -> Result<f64> {
    let Some(first) = traj.snapshots.first() else { return Ok(0.0) };
    for (cell, &v) in first.v.values.iter().enumerate() {
        if !(v == 0.0 || (v >= 1.0 - theta && v <= 1.0 + 1e-12)) {
            return Err(Error::NotAPatch { cell, v });
        }
    }
    require_congestion(provider, 0.0)?;
    Ok(traj.snapshots.iter().map(|s| mushy_fraction(&s.v, theta)).fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontLocator {
    /// Linear interpolation of the `theta max p` level crossing.
    Crossing,
    /// Zero of the line through `p` at the two cells behind the outermost
    /// supported cell.
    Extrapolated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontState {
    pub t: f64,
    pub position: f64,
    /// One-sided `dp/dx` just inside the front.
    pub slope: f64,
    /// Index of the outermost supported cell.
    pub cell: usize,
}

fn lsq_slope(y: &[f64], h: f64) -> f64 {
    let n = y.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
    }
    sxy / (sxx * h)
}

/// Cells between the outermost supported cell and the one-sided slope stencil.
/// The last few cells are still filling and carry depressed pressure.
pub const SLOPE_BACKOFF: usize = 3;
/// Cells in the least-squares slope stencil.
pub const SLOPE_WIDTH: usize = 4;

/// Locates the outer (rightmost) front of a single supported interval.
pub fn locate_front(p: &ScalarField, theta: f64, how: FrontLocator) -> Result<FrontState> {
    let g = p.grid;
    if !(p.max() > 0.0) {
        return Err(Error::EmptySupport);
    }
    let sup = grid::support(p, theta)?;
    let comps = components(&sup.mask);
    if comps.len() != 1 {
        return Err(Error::MultipleFronts { t: p.t, count: comps.len() });
    }
    let i = comps[0].1;
    let h = g.h();
    let v = &p.values;
    if i < SLOPE_BACKOFF + SLOPE_WIDTH || i + 1 >= v.len() {
        return Err(Error::SupportNearBoundary { t: p.t, cell: i });
    }
    let j = i - SLOPE_BACKOFF;
    let slope = lsq_slope(&v[j + 1 - SLOPE_WIDTH..=j], h);
    let position = match how {
        FrontLocator::Crossing => {
            let level = sup.threshold;
            let w = (v[i] - level) / (v[i] - v[i + 1]);
            g.center(i) + w * h
        }
        FrontLocator::Extrapolated => {
            if slope >= 0.0 {
                g.center(i)
            } else {
                g.center(j) - v[j] / slope
            }
        }
    };
    Ok(FrontState { t: p.t, position, slope, cell: i })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontSample {
    pub t: f64,
    pub position: f64,
    pub measured: f64,
    pub predicted: f64,
    pub rel_err: f64,
}

/// Measured front speed (centered differences over `span` snapshots on each
/// side) against `-m p_x / (m - rho_E) - b` at the front, for snapshots with
/// `t` in `window`. A wide span averages out the cell-by-cell advance of the front.
pub fn front_velocity_check(
    traj: &Trajectory,
    provider: &FrameProvider,
    external: &ExternalDensity,
    theta: f64,
    window: (f64, f64),
    margin: f64,
    how: FrontLocator,
    span: usize,
) -> Result<Vec<FrontSample>> {
    let span = span.max(1);
    let snaps = &traj.snapshots;
    let spec = provider.spec();
    let mut out = Vec::new();
    for n in span..snaps.len().saturating_sub(span) {
        let t = snaps[n].t;
        if t < window.0 - 1e-12 || t > window.1 + 1e-12 {
            continue;
        }
        let a = locate_front(&snaps[n - span].p, theta, how)?;
        let c = locate_front(&snaps[n].p, theta, how)?;
        let b = locate_front(&snaps[n + span].p, theta, how)?;
        let measured = (b.position - a.position) / (b.t - a.t);
        let x = c.position;
        let m = spec.m(x, t);
        let rho_e = external.at((x + traj.grid().map_or(0.0, |g| g.h())).min(spec.extent.1), t)?;
        let denom = m - rho_e;
        if denom < margin {
            return Err(Error::DegenerateDenominator { t, value: denom });
        }
        let predicted = -m * c.slope / denom - spec.b(x, t);
        let rel_err = (measured - predicted).abs() / predicted.abs().max(1e-12);
        out.push(FrontSample { t, position: x, measured, predicted, rel_err });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    /// `max (rho_lo - rho_hi)_+` over cells and snapshots.
    pub violation: f64,
    /// `max rho_hi` over cells and snapshots.
    pub hi_sup: f64,
}

/// Runs both data on a shared time step and measures any loss of ordering.
pub fn ordered_pair_test(provider: &FrameProvider, lo: &ScalarField, hi: &ScalarField, config: &SolverConfig) -> Result<OrderingReport> {
    if let Some(i) = (0..lo.values.len()).find(|&i| lo.values[i] > hi.values[i]) {
        return Err(Error::InvalidConfig(format!("initial data are not ordered at cell {i}")));
    }
    let runs = run_lockstep(provider, &[lo.clone(), hi.clone()], config)?;
    let mut rep = OrderingReport { violation: 0.0, hi_sup: 0.0 };
    for (a, b) in runs[0].snapshots.iter().zip(&runs[1].snapshots) {
        rep.hi_sup = rep.hi_sup.max(b.rho.max());
        for (x, y) in a.rho.values.iter().zip(&b.rho.values) {
            rep.violation = rep.violation.max(x - y);
        }
    }
    Ok(rep)
}

/// `max (rho - m)_+ / m` over cells and snapshots.
pub fn density_overshoot(traj: &Trajectory, provider: &FrameProvider) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in &traj.snapshots {
        let m = provider.frame(s.t)?.m;
        for (r, m) in s.rho.values.iter().zip(&m.values) {
            worst = worst.max((r - m) / m);
        }
    }
    Ok(worst)
}

/// Grid-level helper: a ramp from 0 to 1 across the grid.
pub fn ramp(grid: &Grid) -> ScalarField {
    let n = grid.n_cells() as f64;
    ScalarField { grid: *grid, t: 0.0, values: (0..grid.n_cells()).map(|i| (i as f64 + 0.5) / n).collect() }
}
