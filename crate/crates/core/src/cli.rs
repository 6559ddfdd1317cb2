//! Command-line front end. [`run_command`] parses arguments, runs the
//! requested work and maps the outcome onto the process exit code.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::barriers::{barrier_csv, barrier_residual, build_sub_pi, build_super_z, comparison_vs_solver, fit_alpha, phi_for, Barrier, ResidualStats};
use crate::coefficients::{CoefficientSpec, FrameProvider};
use crate::error::Error;
use crate::grid::{erode, fmt_f64, support};
use crate::limit::{check_ks, front_velocity_check, k_sweep, FrontLocator};
use crate::output::{add_trajectory, read_run, schema, series_csv, OutputSet, SCENARIO_FILE};
use crate::pressure::{ab_check, complementarity_residual, complementarity_scalar_bound, estimate_suite, AbMode, THETA};
use crate::report::DiagnosticsReport;
use crate::scenario::{load_scenario, Scenario};
use crate::solver::{run_with, Trajectory};
use crate::streamlines::{retention_check, ExternalDensity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Complementarity acceptance: residual <= SLACK * max(m) * bound(k) + overshoot.
pub const COMPLEMENTARITY_SLACK: f64 = 1.1;
/// Cauchy acceptance: d(k2, k3) <= CAUCHY_RATIO * d(k1, k2) for consecutive triples.
pub const CAUCHY_RATIO: f64 = 0.8;
/// Plateau erosion and saturation tolerance of the figure reproduction.
pub const PLATEAU_EROSION: usize = 5;
pub const SATURATION_TOL: f64 = 0.05;
/// Front checks: time window, relative tolerance and the time span of the
/// centered difference.
pub const FRONT_WINDOW: (f64, f64) = (0.2, 0.5);
pub const FRONT_TOL: f64 = 0.15;
pub const FRONT_SPAN: f64 = 0.15;
pub const FRONT_MARGIN: f64 = 0.1;
/// Retention: horizon, seed count and tolerance relative to `sup p`.
pub const RETENTION_TAU: f64 = 0.1;
pub const RETENTION_SEEDS: usize = 20;
pub const RETENTION_TOL: f64 = 1e-3;
/// Barrier parameters used by the `barriers` command.
pub const Z_GAMMA: f64 = 2.0;
pub const PI_GAMMA: f64 = 0.02;
pub const PI_RADIUS: f64 = 0.2;
pub const BARRIER_TIMES: [f64; 3] = [0.05, 0.2, 0.5];

#[derive(Parser, Debug)]
#[command(name = "hslab", version, about = "Porous-medium solver with a moving density ceiling, and Hele-Shaw limit diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Pressure exponent.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of grid cells.
    #[arg(long)]
    cells: Option<usize>,
    /// Number of uniform output intervals.
    #[arg(long)]
    outputs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write snapshots, ledger and report.
    Simulate {
        /// Builtin name or TOML file.
        scenario: String,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario for several k and compare them.
    Sweep {
        scenario: String,
        /// Ascending, at least three values.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run checks on a directory written by `simulate`. With no flags, every
    /// check except `--front` runs and inapplicable ones are skipped with a note.
    Diagnose {
        run_dir: PathBuf,
        #[arg(long)]
        ab: bool,
        #[arg(long)]
        estimates: bool,
        #[arg(long)]
        complementarity: bool,
        #[arg(long)]
        retention: bool,
        #[arg(long)]
        front: bool,
        /// Write the report here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual and comparison checks for the explicit barriers. With no flags, both.
    Barriers {
        scenario: String,
        #[arg(long)]
        z: bool,
        #[arg(long)]
        pi: bool,
        /// Exponents at which residuals are evaluated.
        #[arg(long, value_delimiter = ',', default_value = "10,40")]
        ks: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the builtin `fig1` scenario and measure plateau saturation.
    #[command(name = "reproduce-fig1")]
    ReproduceFig1 {
        #[arg(long, default_value = "fig1")]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Validation(_) | Error::InvalidConfig(_) | Error::InvalidGrid(_) => Failure::Usage(e.to_string()),
            e => Failure::Run(e),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

/// Runs the command line and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_CHECK_FAILED
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Simulate { scenario, overrides, out } => simulate(&scenario, &overrides, &out),
        Command::Sweep { scenario, ks, overrides, out } => sweep(&scenario, &ks, &overrides, out),
        Command::Diagnose { run_dir, ab, estimates, complementarity, retention, front, out } => {
            let all = !(ab || estimates || complementarity || retention || front);
            let which = Checks { ab: ab || all, estimates: estimates || all, complementarity: complementarity || all, retention: retention || all, front, explicit: !all };
            diagnose(&run_dir, which, out)
        }
        Command::Barriers { scenario, z, pi, ks, overrides, out } => {
            let both = !(z || pi);
            barriers(&scenario, z || both, pi || both, &ks, &overrides, out)
        }
        Command::ReproduceFig1 { out } => reproduce_fig1(&out),
    }
}

fn resolve(name: &str, o: &Overrides) -> std::result::Result<Scenario, Failure> {
    let mut s = load_scenario(name)?;
    if let Some(k) = o.k {
        s.solver.k = k;
    }
    if let Some(t) = o.t_end {
        s.solver.t_end = t;
    }
    if let Some(c) = o.cells {
        s.grid.cells = c;
    }
    if let Some(n) = o.outputs {
        s.solver.outputs = n;
    }
    s.validate()?;
    Ok(s)
}

fn setup(s: &Scenario) -> std::result::Result<(CoefficientSpec, FrameProvider), Failure> {
    let spec = s.coefficients()?;
    let provider = FrameProvider::new(&spec, &s.grid()?)?;
    Ok((spec, provider))
}

fn report_line(name: &str, rep: &DiagnosticsReport) {
    let fails = rep.failures();
    if fails.is_empty() {
        println!("{name}: pass");
    } else {
        println!("{name}: FAIL ({})", fails.join(", "));
    }
}

/// Mass balance of one run: defect and clamped mass against `1e-8 M(0)`.
pub fn mass_balance(rep: &mut DiagnosticsReport, prefix: &str, traj: &Trajectory) {
    let l = &traj.ledger;
    let scale = 1e-8 * l.initial_mass.max(f64::MIN_POSITIVE);
    rep.upper(&format!("{prefix}mass_balance_defect"), l.balance_defect(), scale);
    rep.upper(&format!("{prefix}clamped_mass"), l.clamped_mass, scale);
}

fn simulate(name: &str, o: &Overrides, out: &Path) -> Outcome {
    let s = resolve(name, o)?;
    let (spec, provider) = setup(&s)?;
    let rho0 = s.initial_density()?;
    let traj = run_with(&provider, &rho0, &s.solver_config())?;
    let mut rep = crate::coefficients::validate_assumptions(&spec, &rho0, &[s.solver.k]);
    mass_balance(&mut rep, "", &traj);
    rep.value("steps", traj.last().map_or(0.0, |st| st.steps as f64));
    let mut set = OutputSet::new();
    let toml = s.to_toml();
    set.add(SCENARIO_FILE, schema::SCENARIO, toml.clone());
    add_trajectory(&mut set, "", &traj);
    set.add("report.json", schema::REPORT, rep.to_json());
    set.write(out, "simulate", &toml)?;
    report_line("simulate", &rep);
    Ok(rep.all_pass())
}

fn max_m(provider: &FrameProvider, traj: &Trajectory) -> crate::Result<f64> {
    let mut mx: f64 = 0.0;
    for st in &traj.snapshots {
        mx = mx.max(provider.frame(st.t)?.m.max());
    }
    Ok(mx)
}

fn sweep(name: &str, ks: &[f64], o: &Overrides, out: Option<PathBuf>) -> Outcome {
    check_ks(ks).map_err(|e| Failure::Usage(e.to_string()))?;
    let s = resolve(name, o)?;
    let (_, provider) = setup(&s)?;
    let rho0 = s.initial_density()?;
    let res = k_sweep(&s.id, &provider, &rho0, ks, &s.solver_config(), RETENTION_TAU)?;
    let mut rep = DiagnosticsReport::new();
    let mut set = OutputSet::new();
    for (i, (&k, tr)) in ks.iter().zip(&res.trajectories).enumerate() {
        let tag = format!("k{k}");
        mass_balance(&mut rep, &format!("{tag}_"), tr);
        let mm = max_m(&provider, tr)?;
        let worst = res.complementarity[i].iter().map(|c| c.residual - c.overshoot).fold(0.0, f64::max);
        rep.upper(&format!("{tag}_complementarity"), worst, COMPLEMENTARITY_SLACK * mm * complementarity_scalar_bound(k));
        add_trajectory(&mut set, &format!("{tag}/"), tr);
        set.add(format!("{tag}/estimates.json"), schema::REPORT, res.estimates[i].to_json());
    }
    for i in 0..ks.len().saturating_sub(2) {
        if ks[i] == ks[i + 1] {
            continue;
        }
        let (a, b) = (res.d_rho[i][i + 1], res.d_rho[i + 1][i + 2]);
        rep.upper(&format!("cauchy_{}_{}_{}", ks[i], ks[i + 1], ks[i + 2]), b, CAUCHY_RATIO * a);
    }
    let toml = s.to_toml();
    set.add(SCENARIO_FILE, schema::SCENARIO, toml.clone());
    set.add("distances.csv", schema::DISTANCES, res.distances_csv());
    set.add("residuals.csv", schema::RESIDUALS, res.residuals_csv());
    set.add("report.json", schema::REPORT, rep.to_json());
    let dir = out.unwrap_or_else(|| PathBuf::from(format!("sweep-{}", s.id)));
    let config = format!("{toml}\nks = {ks:?}\n");
    set.write(&dir, "sweep", &config)?;
    report_line("sweep", &rep);
    Ok(rep.all_pass())
}

#[derive(Clone, Copy)]
struct Checks {
    ab: bool,
    estimates: bool,
    complementarity: bool,
    retention: bool,
    front: bool,
    /// Flags were given: inapplicable checks are errors rather than skipped.
    explicit: bool,
}

fn diagnose(dir: &Path, which: Checks, out: Option<PathBuf>) -> Outcome {
    let run = read_run(dir)?;
    let s = &run.scenario;
    let (spec, provider) = setup(s)?;
    let traj = &run.trajectory;
    let mut rep = DiagnosticsReport::new();
    let congested = s.congested;
    let mut beta = None;
    if which.ab || which.retention {
        let mode = if congested { AbMode::Refined } else { AbMode::Generalized };
        match ab_check(traj, mode, &provider, None) {
            Ok(ab) => {
                for n in &ab.notes {
                    eprintln!("notice: {n}");
                    rep.note(n.clone());
                }
                if which.ab {
                    rep.value(if congested { "ab_beta" } else { "ab_k1" }, ab.fitted);
                    rep.flag("ab_bound_holds", ab.passes());
                }
                beta = Some(ab.fitted);
            }
            Err(e) if !which.explicit => {
                rep.note(format!("ab skipped: {e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if which.estimates {
        let est = estimate_suite(traj, RETENTION_TAU);
        for (k, m) in est.metrics {
            rep.value(&format!("estimate_{k}"), m.value);
        }
    }
    if which.complementarity {
        let k = traj.k();
        let mm = max_m(&provider, traj)?;
        let mut worst: f64 = 0.0;
        for st in &traj.snapshots {
            let c = complementarity_residual(&st.p, &st.rho, &provider.frame(st.t)?.m);
            worst = worst.max(c.residual - c.overshoot);
        }
        rep.upper("complementarity", worst, COMPLEMENTARITY_SLACK * mm * complementarity_scalar_bound(k));
    }
    if which.retention {
        let res = match beta {
            Some(b) => retention(traj, &spec, b),
            None => Err(Error::InvalidConfig("retention needs the fitted Aronson-Benilan constant".into())),
        };
        match res {
            Ok((worst, tol)) => {
                rep.lower("retention_worst_margin", worst, -tol);
            }
            Err(e) if !which.explicit => {
                rep.note(format!("retention skipped: {e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if which.front {
        match front(traj, s, &spec, &provider) {
            Ok(series) => {
                let worst = series.iter().map(|r| r[4]).fold(0.0, f64::max);
                rep.upper("front_velocity_rel_err", worst, FRONT_TOL);
                rep.value("front_samples", series.len() as f64);
            }
            Err(e) if !which.explicit => {
                rep.note(format!("front skipped: {e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(Error::from)?;
            }
            std::fs::write(&path, rep.to_json()).map_err(Error::from)?;
        }
        None => println!("{}", rep.to_json()),
    }
    report_line("diagnose", &rep);
    Ok(rep.all_pass())
}

/// Worst retention margin and its tolerance, seeds spread over the initial
/// support.
fn retention(traj: &Trajectory, spec: &CoefficientSpec, beta: f64) -> crate::Result<(f64, f64)> {
    let first = traj.snapshots.first().ok_or(Error::EmptySupport)?;
    let sup = support(&first.rho, THETA)?;
    let (lo, hi) = sup.interval;
    let x0s: Vec<f64> = (0..RETENTION_SEEDS).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / RETENTION_SEEDS as f64).collect();
    let p_sup = traj.snapshots.iter().map(|s| s.p.max()).fold(0.0, f64::max);
    let tol = RETENTION_TOL * p_sup;
    let r = retention_check(traj, spec, &x0s, RETENTION_TAU, beta, tol)?;
    Ok((r.worst_margin, tol))
}

/// Rows `t, position, measured, predicted, rel_err` over the front window.
fn front(traj: &Trajectory, s: &Scenario, spec: &CoefficientSpec, provider: &FrameProvider) -> crate::Result<Vec<Vec<f64>>> {
    let ts = traj.times();
    let dt = ts.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let span = if dt.is_finite() && dt > 0.0 { (FRONT_SPAN / dt).round().max(1.0) as usize } else { 1 };
    let ext = ExternalDensity::new(spec, &s.initial_density()?);
    let samples = front_velocity_check(traj, provider, &ext, THETA, FRONT_WINDOW, FRONT_MARGIN, FrontLocator::Crossing, span)?;
    if samples.is_empty() {
        return Err(Error::InvalidConfig(format!("no snapshots in the front window {FRONT_WINDOW:?} with a {span}-snapshot span")));
    }
    Ok(samples.iter().map(|f| vec![f.t, f.position, f.measured, f.predicted, f.rel_err]).collect())
}

fn residual_report(rep: &mut DiagnosticsReport, name: &str, st: &ResidualStats) {
    let k = st.k;
    rep.value(&format!("{name}_k{k}_min_residual"), st.min);
    rep.value(&format!("{name}_k{k}_max_residual"), st.max);
    rep.lower(&format!("{name}_k{k}_residual_margin"), st.margin, 0.0);
}

fn barriers(name: &str, z: bool, pi: bool, ks: &[f64], o: &Overrides, out: Option<PathBuf>) -> Outcome {
    if ks.is_empty() || ks.iter().any(|&k| !(k > 1.0)) {
        return Err(Failure::Usage("--ks needs values above 1".into()));
    }
    let s = resolve(name, o)?;
    let (_, provider) = setup(&s)?;
    let grid = s.grid()?;
    let t_end = s.solver.t_end;
    let times: Vec<f64> = BARRIER_TIMES.iter().copied().filter(|&t| t <= t_end).collect();
    if times.is_empty() {
        return Err(Failure::Usage(format!("t_end = {t_end} is below the first residual time {}", BARRIER_TIMES[0])));
    }
    let traj = run_with(&provider, &s.initial_density()?, &s.solver_config())?;
    let mut rep = DiagnosticsReport::new();
    let mut set = OutputSet::new();
    let tol = 1e-8;
    if z {
        let phi = phi_for(&provider)?;
        let mut b_sup: f64 = 0.0;
        for &t in &traj.times() {
            b_sup = b_sup.max(provider.frame(t)?.b.values.iter().fold(0.0, |a: f64, b| a.max(b.abs())));
        }
        let alpha = fit_alpha(&|a| build_super_z(&phi, a, Z_GAMMA, b_sup), &provider, ks, &times)?;
        let zb = build_super_z(&phi, alpha, Z_GAMMA, b_sup)?;
        rep.value("z_alpha", alpha);
        for &k in ks {
            residual_report(&mut rep, "z", &barrier_residual(&zb, &provider, k, &times, None)?);
        }
        rep.upper("z_comparison", comparison_vs_solver(&zb, &traj, tol)?, tol);
        set.add("z.csv", schema::PROFILE, barrier_csv(&zb as &dyn Barrier, &grid, &times));
    }
    if pi {
        let pb = build_sub_pi(&provider, PI_GAMMA, PI_RADIUS, 0.0, t_end)?;
        rep.value("pi_lipschitz", pb.lipschitz);
        for &k in ks {
            let st = barrier_residual(&pb, &provider, k, &times, None).map_err(|e| match e {
                Error::RegionOutsidePositivity => Failure::Usage(format!(
                    "the positivity set of Pi (radius {}) is too narrow for this grid after erosion; use more --cells",
                    pb.radius(0.0)
                )),
                e => e.into(),
            })?;
            residual_report(&mut rep, "pi", &st);
        }
        rep.upper("pi_comparison", comparison_vs_solver(&pb, &traj, tol)?, tol);
        set.add("pi.csv", schema::PROFILE, barrier_csv(&pb as &dyn Barrier, &grid, &times));
    }
    let toml = s.to_toml();
    set.add(SCENARIO_FILE, schema::SCENARIO, toml.clone());
    set.add("report.json", schema::REPORT, rep.to_json());
    let dir = out.unwrap_or_else(|| PathBuf::from(format!("barriers-{}", s.id)));
    set.write(&dir, "barriers", &format!("{toml}\nks = {ks:?}\nz = {z}\npi = {pi}\n"))?;
    report_line("barriers", &rep);
    Ok(rep.all_pass())
}

/// `max |rho - m| / m` over the support of `p` eroded by [`PLATEAU_EROSION`]
/// cells, or `None` when that set is empty.
pub fn plateau_saturation(traj: &Trajectory, provider: &FrameProvider, index: usize) -> crate::Result<Option<f64>> {
    let st = &traj.snapshots[index];
    if !(st.p.max() > 0.0) {
        return Ok(None);
    }
    let sup = support(&st.p, THETA)?;
    let plateau = erode(&st.p.grid, &sup.mask, PLATEAU_EROSION);
    if !plateau.iter().any(|&b| b) {
        return Ok(None);
    }
    let m = provider.frame(st.t)?.m;
    Ok(Some((0..plateau.len()).filter(|&i| plateau[i]).map(|i| (st.rho.values[i] - m.values[i]).abs() / m.values[i]).fold(0.0, f64::max)))
}

fn reproduce_fig1(out: &Path) -> Outcome {
    let s = resolve("fig1", &Overrides::default())?;
    let (_, provider) = setup(&s)?;
    let traj = run_with(&provider, &s.initial_density()?, &s.solver_config())?;
    let mut rows = Vec::new();
    for (i, st) in traj.snapshots.iter().enumerate() {
        if let Some(sat) = plateau_saturation(&traj, &provider, i)? {
            rows.push(vec![st.t, sat]);
        }
    }
    let last = traj.snapshots.len() - 1;
    let mut rep = DiagnosticsReport::new();
    match plateau_saturation(&traj, &provider, last)? {
        Some(sat) => rep.upper("final_plateau_saturation", sat, SATURATION_TOL),
        None => rep.flag("final_plateau_saturation", false),
    };
    mass_balance(&mut rep, "", &traj);
    let mut set = OutputSet::new();
    let toml = s.to_toml();
    set.add(SCENARIO_FILE, schema::SCENARIO, toml.clone());
    add_trajectory(&mut set, "", &traj);
    set.add("saturation.csv", schema::SERIES, series_csv("t,saturation", &rows));
    set.add("report.json", schema::REPORT, rep.to_json());
    set.write(out, "reproduce-fig1", &toml)?;
    if let Some(m) = rep.get("final_plateau_saturation") {
        println!("final plateau saturation: {}", fmt_f64(m.value));
    }
    report_line("reproduce-fig1", &rep);
    Ok(rep.all_pass())
}
