//! Scenarios: coefficients, initial data, grid and solver defaults bundled
//! under an id, stored as TOML (see `docs/scenario.md`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::{validate_assumptions, CoefficientSpec, FrameProvider, Profile};
use crate::error::{Error, Result};
use crate::grid::{read_snapshot, Geometry, Grid, ScalarField};
use crate::report::DiagnosticsReport;
use crate::solver::SolverConfig;

pub const BUILTINS: &[&str] = &["fig1", "fig1-saturated", "pme-barenblatt", "source-drift", "radial-source", "drift-transport"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default = "line")]
    pub geometry: Geometry,
    /// Ignored (taken as 0) on radial grids.
    #[serde(default)]
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

fn line() -> Geometry {
    Geometry::Line
}

fn zero() -> f64 {
    0.0
}

fn one() -> f64 {
    1.0
}

/// Initial density families. Patch levels are relative to `m(x, 0)`;
/// the other families give the density directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `level * m(x, 0)` on `|x - center| <= half_width`, zero elsewhere.
    Patch {
        #[serde(default = "zero")]
        center: f64,
        half_width: f64,
        #[serde(default = "one")]
        level: f64,
    },
    /// Self-similar solution of `u_t = lap(u^exponent)` evaluated at time `t0`.
    Barenblatt {
        exponent: f64,
        t0: f64,
        #[serde(default = "one")]
        c: f64,
        #[serde(default = "zero")]
        center: f64,
    },
    /// `amp * exp(-(x - center)^2 / (2 width^2))`, cut to zero beyond `cutoff` widths.
    Gaussian {
        amp: f64,
        width: f64,
        #[serde(default = "zero")]
        center: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// `x,value` CSV (one row per cell) or a binary snapshot (`.bin`).
    /// Relative paths resolve against the scenario file.
    File { path: String },
}

fn default_cutoff() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub k: f64,
    pub t_end: f64,
    /// Number of uniform output intervals; snapshots at `t_end * i / outputs`.
    pub outputs: usize,
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<u64>,
}

fn default_safety() -> f64 {
    0.4
}

fn default_delta() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub congested: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub gradient_decay: bool,
    pub grid: GridParams,
    pub m: Profile,
    pub b: Profile,
    pub f: Profile,
    pub initial: InitialData,
    pub solver: SolverParams,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Closed-form Barenblatt profile of `u_t = lap(u^k)` in `dim` dimensions.
pub fn barenblatt(k: f64, dim: usize, c: f64, t: f64, r: f64) -> f64 {
    let d = dim as f64;
    let alpha = d / (d * (k - 1.0) + 2.0);
    let beta = alpha / d;
    let kappa = alpha * (k - 1.0) / (2.0 * k * d);
    let inner = c - kappa * r * r * t.powf(-2.0 * beta);
    if inner <= 0.0 {
        0.0
    } else {
        t.powf(-alpha) * inner.powf(1.0 / (k - 1.0))
    }
}

/// Radius of the Barenblatt support at time `t`.
pub fn barenblatt_radius(k: f64, dim: usize, c: f64, t: f64) -> f64 {
    let d = dim as f64;
    let alpha = d / (d * (k - 1.0) + 2.0);
    let kappa = alpha * (k - 1.0) / (2.0 * k * d);
    (c / kappa).sqrt() * t.powf(alpha / d)
}

impl Scenario {
    pub fn grid(&self) -> Result<Grid> {
        match self.grid.geometry {
            Geometry::Line => Grid::line(self.grid.lo, self.grid.hi, self.grid.cells),
            Geometry::Radial => Grid::radial(self.grid.hi, self.grid.cells),
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientSpec> {
        let mut spec = CoefficientSpec::new(self.m.clone(), self.b.clone(), self.f.clone(), self.delta, &self.grid()?)?;
        spec.gradient_decay_declared = self.gradient_decay;
        Ok(spec)
    }

    pub fn provider(&self) -> Result<FrameProvider> {
        FrameProvider::new(&self.coefficients()?, &self.grid()?)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.solver.k, self.solver.t_end, self.solver.outputs);
        cfg.cfl_safety = self.solver.cfl_safety;
        cfg.regularization_n = self.solver.regularization;
        cfg
    }

    pub fn initial_density(&self) -> Result<ScalarField> {
        let g = self.grid()?;
        let dim = g.dim();
        Ok(match &self.initial {
            InitialData::Patch { center, half_width, level } => {
                ScalarField::from_fn(g, 0.0, |x| if (x - center).abs() <= *half_width { level * self.m.value(x, 0.0) } else { 0.0 })
            }
            InitialData::Barenblatt { exponent, t0, c, center } => {
                ScalarField::from_fn(g, 0.0, |x| barenblatt(*exponent, dim, *c, *t0, x - center))
            }
            InitialData::Gaussian { amp, width, center, cutoff } => ScalarField::from_fn(g, 0.0, |x| {
                let z = (x - center) / width;
                if z.abs() > *cutoff {
                    0.0
                } else {
                    amp * (-0.5 * z * z).exp()
                }
            }),
            InitialData::File { path } => {
                let path = match &self.base_dir {
                    Some(dir) if Path::new(path).is_relative() => dir.join(path),
                    _ => PathBuf::from(path),
                };
                load_field(&path, &g)?
            }
        })
    }

    /// Runs the standing-assumption checks; any failing metric is an error.
    pub fn validate(&self) -> Result<DiagnosticsReport> {
        self.check_params()?;
        let spec = self.coefficients()?;
        let rho0 = self.initial_density()?;
        let rep = validate_assumptions(&spec, &rho0, &[self.solver.k]);
        if !rep.all_pass() {
            return Err(Error::Validation(format!("scenario {}: failed {}", self.id, rep.failures().join(", "))));
        }
        Ok(rep)
    }

    fn check_params(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(format!("scenario {}: {m}", self.id)));
        match &self.initial {
            InitialData::Patch { half_width, level, .. } if !(*half_width > 0.0) || !(*level >= 0.0) => {
                return bad("patch needs half_width > 0 and level >= 0".into());
            }
            InitialData::Barenblatt { exponent, t0, c, .. } if !(*exponent > 1.0 && *t0 > 0.0 && *c > 0.0) => {
                return bad("barenblatt needs exponent > 1, t0 > 0, c > 0".into());
            }
            InitialData::Gaussian { amp, width, cutoff, .. } if !(*amp >= 0.0 && *width > 0.0 && *cutoff > 0.0) => {
                return bad("gaussian needs amp >= 0, width > 0, cutoff > 0".into());
            }
            _ => {}
        }
        if self.solver.outputs == 0 {
            return bad("solver.outputs must be >= 1".into());
        }
        self.solver_config().validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

fn load_field(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let ctx = path.display().to_string();
    let parse_err = |message: String| Error::Parse { context: ctx.clone(), message };
    let field = if path.extension().is_some_and(|e| e == "bin") {
        let file = std::fs::File::open(path).map_err(|e| parse_err(e.to_string()))?;
        read_snapshot(std::io::BufReader::new(file))?
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| parse_err(e.to_string()))?;
        let mut values = Vec::with_capacity(grid.n_cells());
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| parse_err(format!("line {}: bad number {s:?}", n + 1)));
            if cols.len() < 2 {
                return Err(parse_err(format!("line {}: expected x,value", n + 1)));
            }
            let (x, v) = (num(cols[0])?, num(cols[1])?);
            let i = values.len();
            if i >= grid.n_cells() || (x - grid.center(i)).abs() > 0.5 * grid.h() {
                return Err(parse_err(format!("line {}: x = {x} does not match cell {i} of the scenario grid", n + 1)));
            }
            values.push(v);
        }
        ScalarField::new(*grid, 0.0, values)?
    };
    if !field.grid.same_layout(grid) {
        return Err(parse_err("initial field grid differs from the scenario grid".into()));
    }
    Ok(field)
}

pub fn builtin(name: &str) -> Option<Scenario> {
    let fig1_m = Profile::GaussDecay { amp: 1.0, ax: 0.1, at: 1.0 / 6.0, center: 0.0 };
    let zero = Profile::constant(0.0);
    let unit = Profile::constant(1.0);
    let line = |lo: f64, hi: f64, cells: usize| GridParams { geometry: Geometry::Line, lo, hi, cells };
    let solver = |k: f64, t_end: f64, outputs: usize| SolverParams { k, t_end, outputs, cfl_safety: 0.4, regularization: None };
    let base = |id: &str, congested: bool, grid: GridParams, m: Profile, b: Profile, f: Profile, initial: InitialData, solver: SolverParams| Scenario {
        id: id.into(),
        congested,
        delta: 1e-3,
        gradient_decay: false,
        grid,
        m,
        b,
        f,
        initial,
        solver,
        base_dir: None,
    };
    Some(match name {
        "fig1" => base(
            name,
            true,
            line(-5.0, 5.0, 200),
            fig1_m,
            zero.clone(),
            zero,
            InitialData::Patch { center: 0.0, half_width: 1.0, level: 0.9 },
            solver(40.0, 6.0, 60),
        ),
        "fig1-saturated" => base(
            name,
            true,
            line(-5.0, 5.0, 300),
            fig1_m,
            zero.clone(),
            zero,
            InitialData::Patch { center: 0.0, half_width: 1.0, level: 1.0 },
            solver(80.0, 1.0, 20),
        ),
        "pme-barenblatt" => base(
            name,
            false,
            line(-4.0, 4.0, 400),
            unit,
            zero.clone(),
            zero,
            InitialData::Barenblatt { exponent: 2.0, t0: 0.05, c: 1.0, center: 0.0 },
            solver(2.0, 0.25, 5),
        ),
        "source-drift" => base(
            name,
            false,
            line(-5.0, 5.0, 400),
            unit,
            Profile::Sine { amp: 1.0, freq: 1.0, phase: 0.0, offset: 0.0 },
            Profile::constant(0.5),
            InitialData::Patch { center: 0.0, half_width: 1.0, level: 0.9 },
            solver(40.0, 1.0, 50),
        ),
        "radial-source" => base(
            name,
            true,
            GridParams { geometry: Geometry::Radial, lo: 0.0, hi: 3.0, cells: 300 },
            unit,
            zero,
            Profile::constant(0.5),
            InitialData::Patch { center: 0.0, half_width: 1.5, level: 1.0 },
            solver(80.0, 0.7, 70),
        ),
        "drift-transport" => base(
            name,
            false,
            line(-5.0, 5.0, 1000),
            unit,
            Profile::constant(-1.0),
            zero,
            InitialData::Gaussian { amp: 1e-3, width: 0.25, center: -2.0, cutoff: 4.0 },
            solver(4.0, 1.0, 100),
        ),
        _ => return None,
    })
}

pub fn parse_scenario(text: &str, context: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Parse { context: context.to_string(), message: e.to_string() })?;
    s.base_dir = base_dir.map(Path::to_path_buf);
    Ok(s)
}

/// Resolves a builtin name or a TOML file path, then validates.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    let s = match builtin(name_or_path) {
        Some(s) => s,
        None => {
            let path = Path::new(name_or_path);
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse { context: name_or_path.to_string(), message: e.to_string() })?;
            parse_scenario(&text, name_or_path, path.parent())?
        }
    };
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip_and_validate() {
        for name in BUILTINS {
            let s = builtin(name).unwrap();
            let back = parse_scenario(&s.to_toml(), name, None).unwrap();
            assert_eq!(back, s, "{name}");
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn fig1_defaults() {
        let s = load_scenario("fig1").unwrap();
        assert_eq!(s.solver.k, 40.0);
        assert!(s.congested);
        assert_eq!(s.m, Profile::GaussDecay { amp: 1.0, ax: 0.1, at: 1.0 / 6.0, center: 0.0 });
        assert_eq!(s.b.as_constant(), Some(0.0));
        assert_eq!(s.f.as_constant(), Some(0.0));
    }

    #[test]
    fn pme_builtin_is_plain() {
        let s = load_scenario("pme-barenblatt").unwrap();
        assert_eq!(s.m.as_constant(), Some(1.0));
        assert_eq!(s.b.as_constant(), Some(0.0));
        assert_eq!(s.f.as_constant(), Some(0.0));
        assert!(matches!(s.initial, InitialData::Barenblatt { .. }));
    }

    #[test]
    fn missing_file_is_a_parse_error() {
        assert!(matches!(load_scenario("/nonexistent/x.toml"), Err(Error::Parse { .. })));
    }

    #[test]
    fn parse_errors_name_the_key() {
        let text = builtin("fig1").unwrap().to_toml().replace("cells = 200", "cells = \"many\"");
        let err = parse_scenario(&text, "t.toml", None).unwrap_err().to_string();
        assert!(err.contains("t.toml") && err.contains("cells"), "{err}");
        let err = parse_scenario("id = \"x\"\nbogus = 1\n", "u.toml", None).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn fractions_are_accepted_in_profiles() {
        let text = builtin("fig1").unwrap().to_toml().replace("at = 0.16666666666666666", "at = \"1/6\"");
        assert!(text.contains("\"1/6\""));
        assert_eq!(parse_scenario(&text, "t", None).unwrap(), builtin("fig1").unwrap());
    }

    #[test]
    fn validation_catches_uncontained_data() {
        let mut s = builtin("fig1").unwrap();
        s.initial = InitialData::Patch { center: 0.0, half_width: 6.0, level: 0.9 };
        assert!(matches!(s.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn barenblatt_conserves_mass() {
        let g = Grid::line(-6.0, 6.0, 4000).unwrap();
        let mass = |t: f64| ScalarField::from_fn(g, 0.0, |x| barenblatt(2.0, 1, 1.0, t, x)).integral();
        let (a, b) = (mass(0.05), mass(0.5));
        assert!((a - b).abs() < 1e-4 * a, "{a} {b}");
        assert!((barenblatt_radius(2.0, 1, 1.0, 1.0) - 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_initial_data_loads() {
        let dir = tempfile::tempdir().unwrap();
        let s = builtin("fig1").unwrap();
        let rho0 = s.initial_density().unwrap();
        std::fs::write(dir.path().join("rho0.csv"), crate::grid::field_csv(&rho0)).unwrap();
        let mut t = s.clone();
        t.initial = InitialData::File { path: "rho0.csv".into() };
        let path = dir.path().join("s.toml");
        std::fs::write(&path, t.to_toml()).unwrap();
        let loaded = load_scenario(path.to_str().unwrap()).unwrap();
        let back = loaded.initial_density().unwrap();
        for (a, b) in back.values.iter().zip(&rho0.values) {
            assert_eq!(a, b);
        }
    }
}
