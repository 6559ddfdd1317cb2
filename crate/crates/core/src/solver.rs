//! Explicit finite-volume solver for the density equation
//! `d_t rho = div(m grad v^k + rho b) + f rho`, `v = rho / m`.
//!
//! Diffusive face fluxes are `m_face (q_{i+1} - q_i) / h` with `q = v^k`;
//! the drift flux is upwinded on the sign of `b` at the face. The step size
//! is the largest one for which every updated cell is a nondecreasing
//! function of the old cell values, so ordered data stay ordered.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientFrame, CoefficientSpec, FrameProvider, StepCoeffs};
use crate::error::{Error, Result};
use crate::grid::{fmt_f64, Geometry, Grid, ScalarField};

/// Hard ceiling on `v` before exponentiation.
pub const V_CAP: f64 = 3.0;

/// Relative floor in the step-size denominator.
const RATE_FLOOR: f64 = 1e-8;

/// Cells kept clear of the domain edge.
pub const GUARD_CELLS: usize = 5;

/// Relative level above which a cell counts as occupied for the boundary guard.
const GUARD_LEVEL: f64 = 1e-9;

/// Steps between boundary guard checks.
const GUARD_EVERY: u64 = 100;

#[inline]
pub fn pow_k(v: f64, k: f64) -> f64 {
    if k.fract() == 0.0 && k.abs() < 1e6 {
        v.powi(k as i32)
    } else {
        v.powf(k)
    }
}

/// `k/(k-1) v^(k-1)`.
#[inline]
pub fn pressure_value(v: f64, k: f64) -> f64 {
    k / (k - 1.0) * pow_k(v, k - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub k: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub output_times: Vec<f64>,
    pub regularization_n: Option<u64>,
    pub max_steps: u64,
    /// Ledger rows are written every this many steps (plus at outputs).
    pub ledger_stride: u64,
}

impl SolverConfig {
    /// `count + 1` evenly spaced output times on `[0, t_end]`.
    pub fn new(k: f64, t_end: f64, count: usize) -> Self {
        let count = count.max(1);
        SolverConfig {
            k,
            cfl_safety: 0.4,
            t_end,
            output_times: (0..=count).map(|i| t_end * i as f64 / count as f64).collect(),
            regularization_n: None,
            max_steps: 50_000_000,
            ledger_stride: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 1.0) || !self.k.is_finite() {
            return Err(Error::InvalidConfig(format!("k must exceed 1, got {}", self.k)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidConfig(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.output_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("output times must be strictly increasing".into()));
        }
        if self.output_times.iter().any(|&t| !(t >= 0.0 && t <= self.t_end)) {
            return Err(Error::InvalidConfig("output times must lie in [0, t_end]".into()));
        }
        if self.regularization_n == Some(0) {
            return Err(Error::InvalidConfig("regularization_n must be >= 1".into()));
        }
        if self.ledger_stride == 0 {
            return Err(Error::InvalidConfig("ledger_stride must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub rho: ScalarField,
    pub v: ScalarField,
    pub p: ScalarField,
    pub t: f64,
    pub steps: u64,
}

impl SolverState {
    pub fn new(rho: ScalarField, m: &ScalarField, k: f64) -> Self {
        let t = rho.t;
        let v = ScalarField {
            grid: rho.grid,
            t,
            values: rho.values.iter().zip(&m.values).map(|(r, m)| r / m).collect(),
        };
        let p = v.map(|v| pressure_value(v, k));
        SolverState { rho, v, p, t, steps: 0 }
    }

    pub fn grid(&self) -> Grid {
        self.rho.grid
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    /// Cumulative `sum dt * integral(f rho)`.
    pub source_integral: f64,
    /// Cumulative mass added by clamping to the floor.
    pub clamped_mass: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub rows: Vec<LedgerRow>,
    pub initial_mass: f64,
    pub source_integral: f64,
    pub clamped_mass: f64,
    pub clamp_events: u64,
    pub cap_events: u64,
}

impl Ledger {
    /// `|M(T) - M(0) - int f rho| - clamped`; nonpositive up to rounding
    /// when the balance holds.
    pub fn balance_defect(&self) -> f64 {
        let last = self.rows.last().map_or(self.initial_mass, |r| r.mass);
        (last - self.initial_mass - self.source_integral).abs() - self.clamped_mass
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,t,dt,mass,source_integral,clamped_mass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step,
                fmt_f64(r.t),
                fmt_f64(r.dt),
                fmt_f64(r.mass),
                fmt_f64(r.source_integral),
                fmt_f64(r.clamped_mass)
            ));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub snapshots: Vec<SolverState>,
    pub ledger: Ledger,
}

impl Trajectory {
    pub fn k(&self) -> f64 {
        self.config.k
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn grid(&self) -> Option<Grid> {
        self.snapshots.first().map(|s| s.grid())
    }

    pub fn last(&self) -> Option<&SolverState> {
        self.snapshots.last()
    }

    /// Snapshot closest in time to `t`.
    pub fn nearest(&self, t: f64) -> Option<&SolverState> {
        self.snapshots.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// Largest rate at which any cell's own value can decrease per unit time.
fn max_rate(grid: &Grid, rho: &[f64], c: &StepCoeffs, k: f64) -> f64 {
    let n = rho.len();
    let h = grid.h();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (gl, gr) = grid.face_factors(i);
        let (gl, gr) = (if i == 0 { 0.0 } else { gl }, if i + 1 == n { 0.0 } else { gr });
        let m = c.m[i];
        let v = (rho[i] / m).clamp(0.0, V_CAP);
        let ml = if i > 0 { 0.5 * (c.m[i - 1] + m) } else { 0.0 };
        let mr = if i + 1 < n { 0.5 * (m + c.m[i + 1]) } else { 0.0 };
        let diff = if v > 0.0 { (gl * ml + gr * mr) / h * k * pow_k(v, k - 1.0) / m } else { 0.0 };
        let bl = if i > 0 { 0.5 * (c.b[i - 1] + c.b[i]) } else { 0.0 };
        let br = if i + 1 < n { 0.5 * (c.b[i] + c.b[i + 1]) } else { 0.0 };
        let adv = gr * (-br).max(0.0) + gl * bl.max(0.0);
        worst = worst.max(diff + adv + c.f[i].abs());
    }
    worst
}

fn dt_from_rate(rate: f64, h: f64, safety: f64) -> f64 {
    safety / (rate + RATE_FLOOR / (h * h))
}

/// Stable step for `state` under `frame`: `cfl_safety` times the inverse of
/// the largest diagonal decay rate of the update.
pub fn cfl_dt(state: &SolverState, frame: &CoefficientFrame, config: &SolverConfig) -> f64 {
    let c = StepCoeffs { t: frame.t, m: frame.m.values.clone(), b: frame.b.values.clone(), f: frame.f.values.clone() };
    let g = state.grid();
    dt_from_rate(max_rate(&g, &state.rho.values, &c, config.k), g.h(), config.cfl_safety)
}

#[derive(Clone, Copy, Debug, Default)]
struct StepStats {
    source: f64,
    clamped: f64,
    clamp_events: u64,
    cap_events: u64,
}

/// One forward Euler update written into `out`. `floor` is the per-cell
/// lower clamp (zero, or `m/n` when regularized).
fn advance(grid: &Grid, rho: &[f64], c: &StepCoeffs, k: f64, dt: f64, floor_n: Option<u64>, q: &mut Vec<f64>, out: &mut Vec<f64>) -> StepStats {
    let n = rho.len();
    let h = grid.h();
    let mut st = StepStats::default();
    q.clear();
    for i in 0..n {
        let v = rho[i] / c.m[i];
        if v > V_CAP {
            st.cap_events += 1;
        }
        q.push(if v > 0.0 { pow_k(v.min(V_CAP), k) } else { 0.0 });
    }
    out.clear();
    let mut flux_left = 0.0;
    for i in 0..n {
        let flux_right = if i + 1 < n {
            let m_face = 0.5 * (c.m[i] + c.m[i + 1]);
            let b_face = 0.5 * (c.b[i] + c.b[i + 1]);
            let up = if b_face > 0.0 { rho[i + 1] } else { rho[i] };
            m_face * (q[i + 1] - q[i]) / h + b_face * up
        } else {
            0.0
        };
        let (gl, gr) = grid.face_factors(i);
        let src = c.f[i] * rho[i];
        st.source += dt * src * grid.volume(i);
        let mut r = rho[i] + dt * (gr * flux_right - gl * flux_left + src);
        let floor = floor_n.map_or(0.0, |n| c.m[i] / n as f64);
        if r < floor {
            st.clamped += (floor - r) * grid.volume(i);
            st.clamp_events += 1;
            r = floor;
        }
        out.push(r);
        flux_left = flux_right;
    }
    st
}

/// Advances `state` by `dt` using coefficients `frame` (at `state.t`);
/// `v` and `p` are rebuilt with `next.m` (at `state.t + dt`).
pub fn step(state: &SolverState, frame: &CoefficientFrame, next: &CoefficientFrame, config: &SolverConfig, dt: f64) -> Result<SolverState> {
    let limit = cfl_dt(state, frame, config);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let g = state.grid();
    let c = StepCoeffs { t: frame.t, m: frame.m.values.clone(), b: frame.b.values.clone(), f: frame.f.values.clone() };
    let mut q = Vec::new();
    let mut out = Vec::new();
    advance(&g, &state.rho.values, &c, config.k, dt, config.regularization_n, &mut q, &mut out);
    if let Some(cell) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: state.steps + 1, cell });
    }
    let t = state.t + dt;
    let mut s = SolverState::new(ScalarField { grid: g, t, values: out }, &next.m, config.k);
    s.steps = state.steps + 1;
    Ok(s)
}

/// `rho0 + m(., 0)/n`.
pub fn regularize_initial(rho0: &ScalarField, m_at_0: &ScalarField, n: u64) -> ScalarField {
    let n = n.max(1) as f64;
    ScalarField {
        grid: rho0.grid,
        t: rho0.t,
        values: rho0.values.iter().zip(&m_at_0.values).map(|(r, m)| r + m / n).collect(),
    }
}

fn boundary_hit(grid: &Grid, rho: &[f64]) -> Option<usize> {
    let n = rho.len();
    let top = rho.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return None;
    }
    let level = GUARD_LEVEL * top;
    let outer = (n - GUARD_CELLS.min(n))..n;
    let inner = match grid.geometry() {
        Geometry::Line => 0..GUARD_CELLS.min(n),
        Geometry::Radial => 0..0,
    };
    inner.chain(outer).find(|&i| rho[i] > level)
}

/// Runs one initial datum.
pub fn run(spec: &CoefficientSpec, rho0: &ScalarField, config: &SolverConfig) -> Result<Trajectory> {
    let provider = FrameProvider::new(spec, &rho0.grid)?;
    run_with(&provider, rho0, config)
}

pub fn run_with(provider: &FrameProvider, rho0: &ScalarField, config: &SolverConfig) -> Result<Trajectory> {
    let mut out = run_lockstep(provider, std::slice::from_ref(rho0), config)?;
    Ok(out.pop().expect("one member"))
}

/// Runs several initial data on a shared time step (the smallest stable
/// step over the members), so that ordered data can be compared step by step.
pub fn run_lockstep(provider: &FrameProvider, rho0s: &[ScalarField], config: &SolverConfig) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let grid = *provider.grid();
    for r in rho0s {
        if !r.grid.same_layout(&grid) {
            return Err(Error::InvalidGrid("initial data grid differs from the coefficient grid".into()));
        }
        if let Some(cell) = r.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0, cell });
        }
    }
    let k = config.k;
    let n_cells = grid.n_cells();
    let mut now = StepCoeffs::default();
    let mut next = StepCoeffs::default();
    provider.step_coeffs(0.0, &mut now)?;
    let mut rho: Vec<Vec<f64>> = rho0s.iter().map(|r| r.values.clone()).collect();
    let mut trajs: Vec<Trajectory> = rho0s
        .iter()
        .map(|r| {
            let m0 = r.integral();
            Trajectory {
                config: config.clone(),
                snapshots: Vec::new(),
                ledger: Ledger {
                    initial_mass: m0,
                    rows: vec![LedgerRow { mass: m0, ..LedgerRow::default() }],
                    ..Ledger::default()
                },
            }
        })
        .collect();

    let snapshot = |rho: &[f64], m: &[f64], t: f64, steps: u64| {
        let mut s = SolverState::new(ScalarField { grid, t, values: rho.to_vec() }, &ScalarField { grid, t, values: m.to_vec() }, k);
        s.steps = steps;
        s
    };

    let mut outputs = config.output_times.iter().copied().peekable();
    let mut t = 0.0;
    let mut steps: u64 = 0;
    let mut q = Vec::with_capacity(n_cells);
    let mut buf = Vec::with_capacity(n_cells);
    if outputs.peek() == Some(&0.0) {
        outputs.next();
        for (tr, r) in trajs.iter_mut().zip(&rho) {
            tr.snapshots.push(snapshot(r, &now.m, 0.0, 0));
        }
    }
    let h = grid.h();
    while t < config.t_end {
        if steps >= config.max_steps {
            return Err(Error::MaxSteps { steps, t });
        }
        let rate = rho.iter().map(|r| max_rate(&grid, r, &now, k)).fold(0.0, f64::max);
        let mut dt = dt_from_rate(rate, h, config.cfl_safety);
        let target = outputs.peek().copied().unwrap_or(config.t_end).min(config.t_end);
        let mut hit = false;
        if t + dt >= target * (1.0 - 1e-14) {
            dt = target - t;
            hit = true;
        }
        let t_next = if hit { target } else { t + dt };
        provider.step_coeffs(t_next, &mut next)?;
        steps += 1;
        let record = hit || steps % config.ledger_stride == 0 || t_next >= config.t_end;
        for (tr, r) in trajs.iter_mut().zip(rho.iter_mut()) {
            let st = advance(&grid, r, &now, k, dt, config.regularization_n, &mut q, &mut buf);
            if let Some(cell) = buf.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: steps, cell });
            }
            std::mem::swap(r, &mut buf);
            let l = &mut tr.ledger;
            l.source_integral += st.source;
            l.clamped_mass += st.clamped;
            l.clamp_events += st.clamp_events;
            l.cap_events += st.cap_events;
            if record {
                let mass = r.iter().enumerate().map(|(i, v)| v * grid.volume(i)).sum();
                l.rows.push(LedgerRow {
                    step: steps,
                    t: t_next,
                    dt,
                    mass,
                    source_integral: l.source_integral,
                    clamped_mass: l.clamped_mass,
                });
            }
        }
        t = t_next;
        std::mem::swap(&mut now, &mut next);
        // Regularized data are positive everywhere by construction.
        if config.regularization_n.is_none() && (hit || steps % GUARD_EVERY == 0) {
            for r in &rho {
                if let Some(cell) = boundary_hit(&grid, r) {
                    return Err(Error::SupportNearBoundary { t, cell });
                }
            }
        }
        if hit && outputs.peek().is_some_and(|&o| o <= t) {
            outputs.next();
            for (tr, r) in trajs.iter_mut().zip(&rho) {
                tr.snapshots.push(snapshot(r, &now.m, t, steps));
            }
        }
    }
    Ok(trajs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{eval_frame, Profile};

    fn flat(grid: &Grid, f: f64) -> CoefficientSpec {
        CoefficientSpec::new(Profile::constant(1.0), Profile::constant(0.0), Profile::constant(f), 1e-3, grid).unwrap()
    }

    #[test]
    fn cfl_examples() {
        let g = Grid::line(0.0, 1.0, 40).unwrap();
        let s = flat(&g, 0.0);
        let fr = eval_frame(&s, &g, 0.0).unwrap();
        let cfg = SolverConfig::new(40.0, 1.0, 1);
        let one = SolverState::new(ScalarField::from_fn(g, 0.0, |_| 1.0), &fr.m, 40.0);
        let dt = cfl_dt(&one, &fr, &cfg);
        assert!((dt - 0.4 * 0.025 * 0.025 / 80.0).abs() < 1e-9 * dt, "{dt}");
        let zero = SolverState::new(ScalarField::zeros(g, 0.0), &fr.m, 40.0);
        assert!((cfl_dt(&zero, &fr, &cfg) - 0.4 * 0.025 * 0.025 / 1e-8).abs() < 1e-3);
        let cfg80 = SolverConfig::new(80.0, 1.0, 1);
        assert!((cfl_dt(&one, &fr, &cfg80) * 2.0 - dt).abs() < 1e-9 * dt);
    }

    #[test]
    fn zero_is_fixed() {
        let g = Grid::line(-1.0, 1.0, 20).unwrap();
        let s = CoefficientSpec::new(Profile::constant(1.0), Profile::Linear { offset: 0.0, slope: 1.0 }, Profile::constant(0.5), 1e-3, &g).unwrap();
        let tr = run(&s, &ScalarField::zeros(g, 0.0), &SolverConfig::new(10.0, 0.1, 4)).unwrap();
        assert_eq!(tr.snapshots.len(), 5);
        assert!(tr.snapshots.iter().all(|st| st.rho.values.iter().all(|&v| v == 0.0)));
        assert!(tr.ledger.rows.iter().all(|r| r.mass == 0.0));
    }

    #[test]
    fn source_grows_flat_interior() {
        let g = Grid::line(-1.0, 1.0, 40).unwrap();
        let s = flat(&g, 0.7);
        let fr = eval_frame(&s, &g, 0.0).unwrap();
        let rho = ScalarField::from_fn(g, 0.0, |x| if x.abs() < 0.6 { 1e-3 } else { 0.0 });
        let st = SolverState::new(rho, &fr.m, 4.0);
        let dt = 1e-3;
        let next = step(&st, &fr, &fr, &SolverConfig::new(4.0, 1.0, 1), dt).unwrap();
        let i = g.cell_of(0.0).unwrap();
        assert!((next.rho.values[i] - 1e-3 * (1.0 + 0.7 * dt)).abs() < 1e-15);
    }

    #[test]
    fn oversize_step_is_rejected() {
        let g = Grid::line(-1.0, 1.0, 40).unwrap();
        let fr = eval_frame(&flat(&g, 0.0), &g, 0.0).unwrap();
        let st = SolverState::new(ScalarField::from_fn(g, 0.0, |_| 1.0), &fr.m, 10.0);
        let cfg = SolverConfig::new(10.0, 1.0, 1);
        let dt = cfl_dt(&st, &fr, &cfg);
        assert!(matches!(step(&st, &fr, &fr, &cfg, 2.0 * dt), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn regularization_examples() {
        let g = Grid::line(0.0, 1.0, 10).unwrap();
        let one = ScalarField::from_fn(g, 0.0, |_| 1.0);
        let zero = ScalarField::zeros(g, 0.0);
        assert!(regularize_initial(&zero, &one, 10).values.iter().all(|&v| (v - 0.1).abs() < 1e-15));
        let m = ScalarField::from_fn(g, 0.0, |x| 1.0 + x);
        let r = regularize_initial(&m, &m, 1_000_000_000);
        assert!(r.values.iter().zip(&m.values).all(|(a, b)| (a - b).abs() <= 1e-8));
        let r = regularize_initial(&m, &m, 1);
        assert!(r.values.iter().zip(&m.values).all(|(a, b)| (a - 2.0 * b).abs() < 1e-15));
    }

    #[test]
    fn regularized_run_respects_floor() {
        let g = Grid::line(-3.0, 3.0, 60).unwrap();
        let m = Profile::GaussDecay { amp: 1.0, ax: 0.1, at: 1.0 / 6.0, center: 0.0 };
        let s = CoefficientSpec::new(m, Profile::constant(0.0), Profile::constant(0.0), 1e-3, &g).unwrap();
        let fr = eval_frame(&s, &g, 0.0).unwrap();
        let rho0 = ScalarField::from_fn(g, 0.0, |x| if x.abs() < 1.0 { 0.9 * (-x * x / 10.0).exp() } else { 0.0 });
        let mut cfg = SolverConfig::new(10.0, 0.2, 4);
        cfg.regularization_n = Some(50);
        let tr = run(&s, &regularize_initial(&rho0, &fr.m, 50), &cfg).unwrap();
        let last = tr.last().unwrap();
        let mt = eval_frame(&s, &g, last.t).unwrap();
        for i in 0..g.n_cells() {
            assert!(last.rho.values[i] >= mt.m.values[i] / 50.0 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn boundary_guard_trips() {
        let g = Grid::line(-1.0, 1.0, 40).unwrap();
        let s = flat(&g, 0.0);
        let rho0 = ScalarField::from_fn(g, 0.0, |x| if x.abs() < 0.8 { 1.0 } else { 0.0 });
        let e = run(&s, &rho0, &SolverConfig::new(2.0, 1.0, 2)).unwrap_err();
        assert!(matches!(e, Error::SupportNearBoundary { .. }), "{e}");
    }

    #[test]
    fn radial_mass_is_conserved() {
        let g = Grid::radial(3.0, 60).unwrap();
        let s = flat(&g, 0.0);
        let rho0 = ScalarField::from_fn(g, 0.0, |r| if r < 1.0 { 1.0 } else { 0.0 });
        let tr = run(&s, &rho0, &SolverConfig::new(5.0, 0.05, 5)).unwrap();
        let m0 = tr.ledger.initial_mass;
        assert!((m0 - std::f64::consts::PI).abs() < 0.1);
        assert!((tr.last().unwrap().mass() - m0).abs() < 1e-12 * m0);
        assert_eq!(tr.ledger.clamped_mass, 0.0);
    }

    #[test]
    fn output_times_are_hit_exactly() {
        let g = Grid::line(-2.0, 2.0, 40).unwrap();
        let s = flat(&g, 0.3);
        let rho0 = ScalarField::from_fn(g, 0.0, |x| if x.abs() < 0.5 { 0.5 } else { 0.0 });
        let mut cfg = SolverConfig::new(3.0, 0.3, 3);
        cfg.output_times = vec![0.05, 0.1, 0.3];
        let tr = run(&s, &rho0, &cfg).unwrap();
        assert_eq!(tr.times(), vec![0.05, 0.1, 0.3]);
        let l = &tr.ledger;
        assert!(l.balance_defect() <= 1e-12 * l.initial_mass);
        let csv = l.to_csv();
        assert!(csv.starts_with("step,t,dt,mass,source_integral,clamped_mass\n"));
    }
}
