//! Problem data `m`, `b`, `f` drawn from a small registry of analytic
//! families, sampled into frames together with the derived forcing
//! `F = (div(m b) + m f - dt m) / m` and `lambda = log m`.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Geometry, Grid, ScalarField, VectorField};
use crate::report::DiagnosticsReport;
use crate::solver::pressure_value;

/// Parses a real that may be written as a number or as a `"p/q"` string.
fn real<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(s) => parse_real(&s).map_err(serde::de::Error::custom),
    }
}

pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: f64 = den.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if d == 0.0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(n / d)
    } else {
        s.parse().map_err(|_| format!("not a real number: {s:?}"))
    }
}

fn one() -> f64 {
    1.0
}

/// A closed-form function of one space coordinate (`x`, or `r` on radial
/// grids) and time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        #[serde(deserialize_with = "real")]
        value: f64,
    },
    /// `amp * exp(-at t - ax (x - center)^2)`
    GaussDecay {
        #[serde(default = "one", deserialize_with = "real")]
        amp: f64,
        #[serde(deserialize_with = "real")]
        ax: f64,
        #[serde(default, deserialize_with = "real")]
        at: f64,
        #[serde(default, deserialize_with = "real")]
        center: f64,
    },
    /// `offset + slope x`
    Linear {
        #[serde(default, deserialize_with = "real")]
        offset: f64,
        #[serde(deserialize_with = "real")]
        slope: f64,
    },
    /// `offset + amp sin(freq x + phase)`
    Sine {
        #[serde(deserialize_with = "real")]
        amp: f64,
        #[serde(default = "one", deserialize_with = "real")]
        freq: f64,
        #[serde(default, deserialize_with = "real")]
        phase: f64,
        #[serde(default, deserialize_with = "real")]
        offset: f64,
    },
    /// Piecewise linear through `(x, values)`, constant beyond the ends.
    /// Carries no analytic derivatives.
    Tabulated { x: Vec<f64>, values: Vec<f64> },
}

/// Value with first/second space and first time derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dx: f64,
    pub dxx: f64,
    pub dt: f64,
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::GaussDecay { amp, ax, at, center } => {
                let y = x - center;
                amp * (-at * t - ax * y * y).exp()
            }
            Profile::Linear { offset, slope } => offset + slope * x,
            Profile::Sine { amp, freq, phase, offset } => offset + amp * (freq * x + phase).sin(),
            Profile::Tabulated { x: xs, values } => tabulated(xs, values, x),
        }
    }

    pub fn analytic_jet(&self, x: f64, t: f64) -> Option<Jet> {
        Some(match self {
            Profile::Constant { value } => Jet { value: *value, ..Jet::default() },
            Profile::GaussDecay { ax, at, center, .. } => {
                let v = self.value(x, t);
                let y = x - center;
                Jet {
                    value: v,
                    dx: -2.0 * ax * y * v,
                    dxx: (4.0 * ax * ax * y * y - 2.0 * ax) * v,
                    dt: -at * v,
                }
            }
            Profile::Linear { offset, slope } => Jet { value: offset + slope * x, dx: *slope, dxx: 0.0, dt: 0.0 },
            Profile::Sine { amp, freq, phase, offset } => {
                let arg = freq * x + phase;
                Jet {
                    value: offset + amp * arg.sin(),
                    dx: amp * freq * arg.cos(),
                    dxx: -amp * freq * freq * arg.sin(),
                    dt: 0.0,
                }
            }
            Profile::Tabulated { .. } => return None,
        })
    }

    /// Analytic jet when available, else fourth-order central differences
    /// with spacing `h` in both `x` and `t`. The flag reports the fallback.
    pub fn jet(&self, x: f64, t: f64, h: f64) -> (Jet, bool) {
        if let Some(j) = self.analytic_jet(x, t) {
            return (j, false);
        }
        let f = |x, t| self.value(x, t);
        let v = f(x, t);
        let (xp1, xm1, xp2, xm2) = (f(x + h, t), f(x - h, t), f(x + 2.0 * h, t), f(x - 2.0 * h, t));
        let dx = (-xp2 + 8.0 * xp1 - 8.0 * xm1 + xm2) / (12.0 * h);
        let dxx = (-xp2 + 16.0 * xp1 - 30.0 * v + 16.0 * xm1 - xm2) / (12.0 * h * h);
        let dt = (-f(x, t + 2.0 * h) + 8.0 * f(x, t + h) - 8.0 * f(x, t - h) + f(x, t - 2.0 * h)) / (12.0 * h);
        (Jet { value: v, dx, dxx, dt }, true)
    }

    pub fn is_time_independent(&self) -> bool {
        !matches!(self, Profile::GaussDecay { at, .. } if *at != 0.0)
    }

    /// `(s(t), s'(t))` with `value(x, t) = value(x, 0) s(t)`.
    pub fn time_factor(&self, t: f64) -> (f64, f64) {
        match self {
            Profile::GaussDecay { at, .. } => {
                let e = (-at * t).exp();
                (e, -at * e)
            }
            _ => (1.0, 0.0),
        }
    }

    /// Zero for constants, `None` when the profile is not constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Profile::Constant { value } => Some(*value),
            _ => None,
        }
    }
}

fn tabulated(xs: &[f64], values: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return values[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return values[n - 1];
    }
    let j = xs.partition_point(|&v| v <= x).saturating_sub(1);
    let w = (x - xs[j]) / (xs[j + 1] - xs[j]);
    values[j] * (1.0 - w) + values[j + 1] * w
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSpec {
    pub m: Profile,
    /// On radial grids, the radial component of the drift.
    pub b: Profile,
    pub f: Profile,
    pub delta: f64,
    pub geometry: Geometry,
    pub extent: (f64, f64),
    /// Declares the far-field decay alternative `|grad m| <= eps/|x|`.
    /// Recorded by [`validate_assumptions`]; no barrier is built for it.
    pub gradient_decay_declared: bool,
}

impl CoefficientSpec {
    pub fn new(m: Profile, b: Profile, f: Profile, delta: f64, grid: &Grid) -> Result<Self> {
        let spec = CoefficientSpec {
            m,
            b,
            f,
            delta,
            geometry: grid.geometry(),
            extent: (grid.lo(), grid.hi()),
            gradient_decay_declared: false,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidConfig(format!("delta must be positive, got {}", self.delta)));
        }
        for (name, p) in [("m", &self.m), ("b", &self.b), ("f", &self.f)] {
            if let Profile::Tabulated { x, values } = p {
                if x.len() < 2 || x.len() != values.len() || x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidConfig(format!(
                        "{name}: tabulated profile needs >= 2 strictly increasing nodes with matching values"
                    )));
                }
            }
        }
        if self.geometry == Geometry::Radial {
            // Radial data must be smooth through the axis: m_r(0) = 0 and b_r(0) = 0.
            for t in [0.0, 1.0] {
                let (mj, _) = self.m.jet(0.0, t, 1e-4);
                if mj.dx.abs() > 1e-9 {
                    return Err(Error::InvalidConfig("radial geometry needs m with zero slope at r = 0".into()));
                }
                if self.b.value(0.0, t).abs() > 1e-12 {
                    return Err(Error::InvalidConfig("radial drift must vanish at r = 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_time_independent(&self) -> bool {
        self.m.is_time_independent() && self.b.is_time_independent() && self.f.is_time_independent()
    }

    pub fn m(&self, x: f64, t: f64) -> f64 {
        self.m.value(x, t)
    }

    pub fn b(&self, x: f64, t: f64) -> f64 {
        self.b.value(x, t)
    }

    pub fn f(&self, x: f64, t: f64) -> f64 {
        self.f.value(x, t)
    }

    /// `div b`, including the `b/r` term on radial grids.
    pub fn div_b(&self, x: f64, t: f64) -> f64 {
        let (bj, _) = self.b.jet(x, t, 1e-4);
        match self.geometry {
            Geometry::Line => bj.dx,
            Geometry::Radial if x.abs() < 1e-12 => 2.0 * bj.dx,
            Geometry::Radial => bj.dx + bj.value / x,
        }
    }

    /// `f + div b`, the growth rate of the external density along streamlines.
    pub fn transport_rate(&self, x: f64, t: f64) -> f64 {
        self.f(x, t) + self.div_b(x, t)
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        grid.geometry() == self.geometry && grid.lo() == self.extent.0 && grid.hi() == self.extent.1
    }
}

/// Sampled coefficients and derived fields at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientFrame {
    pub t: f64,
    pub m: ScalarField,
    pub dtm: ScalarField,
    pub dxm: ScalarField,
    pub lambda: ScalarField,
    pub grad_lambda: VectorField,
    pub b: VectorField,
    pub div_b: ScalarField,
    pub f: ScalarField,
    pub div_mb: ScalarField,
    pub big_f: ScalarField,
    /// Set when any derivative came from the finite-difference fallback.
    pub finite_difference: bool,
}

impl CoefficientFrame {
    pub fn grid(&self) -> Grid {
        self.m.grid
    }
}

pub fn eval_frame(spec: &CoefficientSpec, grid: &Grid, t: f64) -> Result<CoefficientFrame> {
    if !(t >= 0.0) {
        return Err(Error::InvalidConfig(format!("frame time must be >= 0, got {t}")));
    }
    if !spec.matches(grid) {
        return Err(Error::InvalidGrid("grid does not match the coefficient domain".into()));
    }
    let n = grid.n_cells();
    let h = grid.h();
    let mut fd = false;
    let mut cols: [Vec<f64>; 11] = Default::default();
    for c in cols.iter_mut() {
        c.reserve(n);
    }
    for i in 0..n {
        let x = grid.center(i);
        let (mj, a) = spec.m.jet(x, t, h);
        let (bj, b) = spec.b.jet(x, t, h);
        let (fj, c) = spec.f.jet(x, t, h);
        fd |= a || b || c;
        if !(mj.value >= spec.delta) {
            return Err(Error::EvalDomain { x, t, value: mj.value, delta: spec.delta });
        }
        let m = mj.value;
        let div_b = match grid.geometry() {
            Geometry::Line => bj.dx,
            Geometry::Radial => bj.dx + bj.value / x,
        };
        let div_mb = mj.dx * bj.value + m * div_b;
        let big_f = (div_mb + m * fj.value - mj.dt) / m;
        for (col, v) in cols.iter_mut().zip([
            m,
            mj.dt,
            mj.dx,
            m.ln(),
            mj.dx / m,
            bj.value,
            div_b,
            fj.value,
            div_mb,
            big_f,
            0.0,
        ]) {
            col.push(v);
        }
    }
    let [m, dtm, dxm, lambda, grad_lambda, b, div_b, f, div_mb, big_f, _] = cols;
    let sf = |values: Vec<f64>| ScalarField { grid: *grid, t, values };
    let vf = |values: Vec<f64>| VectorField { grid: *grid, t, values };
    Ok(CoefficientFrame {
        t,
        m: sf(m),
        dtm: sf(dtm),
        dxm: sf(dxm),
        lambda: sf(lambda),
        grad_lambda: vf(grad_lambda),
        b: vf(b),
        div_b: sf(div_b),
        f: sf(f),
        div_mb: sf(div_mb),
        big_f: sf(big_f),
        finite_difference: fd,
    })
}

/// Per-cell `m`, `b`, `f` at one time; the only data a solver step reads.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepCoeffs {
    pub t: f64,
    pub m: Vec<f64>,
    pub b: Vec<f64>,
    pub f: Vec<f64>,
}

/// Evaluates frames on demand.
///
/// Every registry family factors as `g(x) s(t)`, so frames are produced by
/// rescaling a frame sampled once at `t = 0`.
#[derive(Clone, Debug)]
pub struct FrameProvider {
    spec: CoefficientSpec,
    grid: Grid,
    base: CoefficientFrame,
    min_m0: f64,
}

impl FrameProvider {
    pub fn new(spec: &CoefficientSpec, grid: &Grid) -> Result<Self> {
        let base = eval_frame(spec, grid, 0.0)?;
        let min_m0 = base.m.min();
        Ok(FrameProvider { spec: spec.clone(), grid: *grid, base, min_m0 })
    }

    fn check_delta(&self, t: f64, sm: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::InvalidConfig(format!("frame time must be >= 0, got {t}")));
        }
        if !(self.min_m0 * sm >= self.spec.delta) {
            let i = self.base.m.values.iter().position(|&v| v == self.min_m0).unwrap_or(0);
            return Err(Error::EvalDomain {
                x: self.grid.center(i),
                t,
                value: self.min_m0 * sm,
                delta: self.spec.delta,
            });
        }
        Ok(())
    }

    pub fn frame(&self, t: f64) -> Result<CoefficientFrame> {
        let (sm, dsm) = self.spec.m.time_factor(t);
        let (sb, _) = self.spec.b.time_factor(t);
        let (sf, _) = self.spec.f.time_factor(t);
        self.check_delta(t, sm)?;
        let b0 = &self.base;
        let scale = |f: &ScalarField, s: f64| ScalarField { grid: self.grid, t, values: f.values.iter().map(|v| v * s).collect() };
        let m = scale(&b0.m, sm);
        let dtm = scale(&b0.m, dsm);
        let div_mb = scale(&b0.div_mb, sm * sb);
        let f = scale(&b0.f, sf);
        let big_f = ScalarField {
            grid: self.grid,
            t,
            values: (0..self.grid.n_cells())
                .map(|i| (div_mb.values[i] + m.values[i] * f.values[i] - dtm.values[i]) / m.values[i])
                .collect(),
        };
        Ok(CoefficientFrame {
            t,
            lambda: ScalarField { grid: self.grid, t, values: m.values.iter().map(|v| v.ln()).collect() },
            dxm: scale(&b0.dxm, sm),
            grad_lambda: VectorField { grid: self.grid, t, values: b0.grad_lambda.values.clone() },
            b: VectorField { grid: self.grid, t, values: b0.b.values.iter().map(|v| v * sb).collect() },
            div_b: scale(&b0.div_b, sb),
            m,
            dtm,
            f,
            div_mb,
            big_f,
            finite_difference: b0.finite_difference,
        })
    }

    /// Fills `out` with `m`, `b`, `f` at time `t` without allocating.
    pub fn step_coeffs(&self, t: f64, out: &mut StepCoeffs) -> Result<()> {
        let (sm, _) = self.spec.m.time_factor(t);
        let (sb, _) = self.spec.b.time_factor(t);
        let (sf, _) = self.spec.f.time_factor(t);
        self.check_delta(t, sm)?;
        out.t = t;
        for (dst, src, s) in [(&mut out.m, &self.base.m.values, sm), (&mut out.b, &self.base.b.values, sb), (&mut out.f, &self.base.f.values, sf)] {
            dst.clear();
            dst.extend(src.iter().map(|v| v * s));
        }
        Ok(())
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// `min over region of (m f + div(m b) - dt m)`; positive means congestion.
/// An empty region yields `+inf`.
pub fn congestion_margin(frame: &CoefficientFrame, region: &[bool]) -> f64 {
    region
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(i, _)| frame.m.values[i] * frame.f.values[i] + frame.div_mb.values[i] - frame.dtm.values[i])
        .fold(f64::INFINITY, f64::min)
}

/// Cells kept clear of the domain edge by the solver's boundary guard.
pub const BOUNDARY_GUARD_CELLS: usize = 5;

/// Checks the standing assumptions on the data and the initial density.
/// Failures are carried in the report, never raised.
pub fn validate_assumptions(spec: &CoefficientSpec, rho0: &ScalarField, k_list: &[f64]) -> DiagnosticsReport {
    let mut r = DiagnosticsReport::new();
    let grid = rho0.grid;
    match eval_frame(spec, &grid, 0.0) {
        Ok(frame) => {
            r.lower("min_m_vs_delta", frame.m.min(), spec.delta);
            let nonneg = rho0.min();
            r.lower("rho0_nonnegative", nonneg, 0.0);
            let n = grid.n_cells();
            let inside = rho0.values.iter().enumerate().all(|(i, &v)| {
                let edge = match grid.geometry() {
                    Geometry::Line => i < BOUNDARY_GUARD_CELLS,
                    Geometry::Radial => false,
                };
                !(v > 0.0) || !(edge || i + BOUNDARY_GUARD_CELLS >= n)
            });
            r.flag("rho0_compact_support", inside);
            let nrm = grid::norms(rho0);
            r.value("rho0_linf", nrm.linf);
            r.value("rho0_l1", nrm.l1);
            r.value("rho0_bv", grid::bv_seminorm(rho0));
            let p0 = k_list
                .iter()
                .map(|&k| {
                    rho0.values
                        .iter()
                        .zip(&frame.m.values)
                        .map(|(&rho, &m)| pressure_value(rho.max(0.0) / m, k))
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            r.value("initial_pressure_linf", p0);
            if k_list.iter().any(|&k| !(k > 1.0)) {
                r.flag("k_above_one", false);
            }
        }
        Err(e) => {
            r.flag("min_m_vs_delta", false).note(e.to_string());
        }
    }
    if spec.geometry == Geometry::Radial {
        r.flag("radial_data", spec.check().is_ok());
    }
    if spec.gradient_decay_declared {
        r.note("far-field decay of grad m declared; accepted without a barrier");
    }
    r
}
