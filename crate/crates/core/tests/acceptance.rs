//! End-to-end acceptance checks. `acceptance_criteria` prints one line per
//! criterion and fails if any of them fails.

use std::path::Path;
use std::time::{Duration, Instant};

use hslab::cli::{plateau_saturation, run_command, SATURATION_TOL};
use hslab::coefficients::FrameProvider;
use hslab::grid::ScalarField;
use hslab::limit::{front_velocity_check, identify_density, k_sweep, ordered_pair_test, patch_test, FrontLocator};
use hslab::pressure::{ab_check, complementarity_scalar_bound, AbMode};
use hslab::report::DiagnosticsReport;
use hslab::scenario::{barenblatt, builtin, Scenario};
use hslab::solver::{run_with, Trajectory};
use hslab::streamlines::{retention_check, ExternalDensity};

const THETA: f64 = 1e-3;
const SWEEP_KS: [f64; 4] = [10.0, 20.0, 40.0, 80.0];

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: usize, name: &'static str, pass: bool, detail: String) -> Line {
    Line { id, name, pass, detail }
}

fn scenario(name: &str, edit: impl FnOnce(&mut Scenario)) -> Scenario {
    let mut s = builtin(name).unwrap();
    edit(&mut s);
    s.validate().unwrap();
    s
}

fn run(s: &Scenario) -> (FrameProvider, Trajectory) {
    let p = s.provider().unwrap();
    let t = run_with(&p, &s.initial_density().unwrap(), &s.solver_config()).unwrap();
    (p, t)
}

fn p_sup(t: &Trajectory) -> f64 {
    t.snapshots.iter().map(|s| s.p.max()).fold(0.0, f64::max)
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    hi / lo
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn barenblatt_oracle() -> Line {
    let clock = Instant::now();
    let s = builtin("pme-barenblatt").unwrap();
    let (_, tr) = run(&s);
    let elapsed = clock.elapsed();
    let last = tr.last().unwrap();
    let g = last.rho.grid;
    let t_abs = 0.05 + s.solver.t_end;
    let (mut err, mut norm) = (0.0, 0.0);
    for i in 0..g.n_cells() {
        let exact = barenblatt(2.0, 1, 1.0, t_abs, g.center(i));
        err += (last.rho.values[i] - exact).abs() * g.volume(i);
        norm += exact * g.volume(i);
    }
    let rel = err / norm;
    let moved = (tr.snapshots[0].rho.max() - last.rho.max()) / tr.snapshots[0].rho.max();
    line(1, "Barenblatt L1 error", rel <= 0.02 && moved > 0.1 && elapsed.as_secs() <= 30, format!("rel L1 {rel:.2e}, peak drop {moved:.2}, {}", secs(elapsed)))
}

fn acceptance_lines() -> Vec<Line> {
    let mut lines = Vec::new();
    let mut ledgers: Vec<(String, Trajectory)> = Vec::new();

    lines.push(barenblatt_oracle());

    // fig1 sweep at the default resolution.
    let clock = Instant::now();
    let fig1 = builtin("fig1").unwrap();
    let provider = fig1.provider().unwrap();
    let rho0 = fig1.initial_density().unwrap();
    let sw = k_sweep("fig1", &provider, &rho0, &SWEEP_KS, &fig1.solver_config(), 0.1).unwrap();
    let sweep_time = clock.elapsed();
    let max_m = provider.frame(0.0).unwrap().m.max();
    let worst = |i: usize| {
        let c = &sw.complementarity[i];
        (c.iter().map(|c| c.residual).fold(0.0, f64::max), c.iter().map(|c| c.overshoot).fold(0.0, f64::max))
    };
    let ((r40, o40), (r80, _)) = (worst(2), worst(3));
    let bound40 = 1.1 * max_m * complementarity_scalar_bound(40.0) + o40;
    lines.push(line(
        2,
        "complementarity decay",
        r40 <= bound40 && r80 <= 0.6 * r40 && sweep_time.as_secs() <= 600,
        format!("k40 {r40:.3e} <= {bound40:.3e}, k80/k40 {:.3}, sweep {}", r80 / r40, secs(sweep_time)),
    ));
    let (d1, d2) = (sw.d_rho[1][2], sw.d_rho[2][3]);
    lines.push(line(3, "L1 Cauchy", d2 <= 0.8 * d1, format!("d(40,80) {d2:.3e}, d(20,40) {d1:.3e}, ratio {:.3}", d2 / d1)));
    for (k, t) in SWEEP_KS.iter().zip(&sw.trajectories) {
        ledgers.push((format!("fig1 k{k}"), t.clone()));
    }

    // Refined bound on fig1 needs fine cells and dense snapshots.
    let fine: Vec<(FrameProvider, Trajectory)> = std::thread::scope(|sc| {
        let hs: Vec<_> = SWEEP_KS
            .iter()
            .map(|&k| {
                sc.spawn(move || {
                    run(&scenario("fig1", |s| {
                        s.grid.cells = 800;
                        s.solver.k = k;
                        s.solver.t_end = 1.0;
                        s.solver.outputs = 200;
                    }))
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let betas: Vec<f64> = fine.iter().map(|(p, t)| ab_check(t, AbMode::Refined, p, None).unwrap().fitted).collect();
    let drift = scenario("source-drift", |_| {});
    let drift_runs: Vec<(FrameProvider, Trajectory)> = SWEEP_KS
        .iter()
        .map(|&k| run(&scenario("source-drift", |s| s.solver.k = k)))
        .collect();
    let k1s: Vec<f64> = drift_runs.iter().map(|(p, t)| ab_check(t, AbMode::Generalized, p, None).unwrap().fitted).collect();
    let all_hold = fine.iter().zip(&betas).all(|((p, t), &b)| ab_check(t, AbMode::Refined, p, Some(b)).unwrap().passes())
        && drift_runs.iter().zip(&k1s).all(|((p, t), &c)| ab_check(t, AbMode::Generalized, p, Some(c)).unwrap().passes());
    lines.push(line(
        4,
        "Aronson-Benilan constants",
        all_hold && spread(&betas) <= 2.0 && spread(&k1s) <= 2.0,
        format!("beta {betas:.2?} (x{:.2}), K1 {k1s:.2?} (x{:.2}) on {}", spread(&betas), spread(&k1s), drift.id),
    ));

    let spec = fig1.coefficients().unwrap();
    let seeds: Vec<f64> = (0..20).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / 20.0).collect();
    let mut ret_ok = true;
    let mut ret_worst = f64::INFINITY;
    for ((_, t), &b) in fine.iter().zip(&betas) {
        let tol = 1e-3 * p_sup(t);
        let r = retention_check(t, &spec, &seeds, 0.1, b, tol).unwrap();
        ret_ok &= r.worst_margin >= -tol;
        ret_worst = ret_worst.min(r.worst_margin / tol);
    }
    lines.push(line(5, "retention along streamlines", ret_ok, format!("worst margin {ret_worst:.3e} tol units over 20 seeds")));
    for ((_, t), k) in fine.into_iter().zip(SWEEP_KS) {
        ledgers.push((format!("fig1 n800 k{k}"), t));
    }
    for ((_, t), k) in drift_runs.into_iter().zip(SWEEP_KS) {
        ledgers.push((format!("source-drift k{k}"), t));
    }

    // Saturated patch.
    let sat = builtin("fig1-saturated").unwrap();
    let (sp, st) = run(&sat);
    let ext = ExternalDensity::new(&sat.coefficients().unwrap(), &sat.initial_density().unwrap());
    let id = identify_density(&st, &sp, &ext, THETA).unwrap();
    let last = id.last().unwrap();
    lines.push(line(
        6,
        "identification at t=1",
        (last.t - 1.0).abs() < 1e-12 && last.saturated_mismatch <= 0.05 && last.external_mismatch <= 0.05 && last.saturated_cells > 0,
        format!("P+ {:.3} over {} cells, P0 {:.3} over {} cells", last.saturated_mismatch, last.saturated_cells, last.external_mismatch, last.external_cells),
    ));
    let mushy = patch_test(&st, &sp, 0.05).unwrap();
    lines.push(line(7, "patch preservation", mushy <= 0.05, format!("max mushy fraction {mushy:.3}")));
    ledgers.push(("fig1-saturated".into(), st));

    let mut pair_cfg = fig1.solver_config();
    pair_cfg.k = 40.0;
    let half = ScalarField::new(rho0.grid, 0.0, rho0.values.iter().map(|v| 0.5 * v).collect()).unwrap();
    let ord = ordered_pair_test(&provider, &half, &rho0, &pair_cfg).unwrap();
    lines.push(line(8, "comparison principle", ord.violation <= 1e-10 * ord.hi_sup, format!("violation {:.2e}, sup {:.3}", ord.violation, ord.hi_sup)));

    // Radial front speed.
    let radial = builtin("radial-source").unwrap();
    let (rp, rt) = run(&radial);
    let rext = ExternalDensity::new(&radial.coefficients().unwrap(), &radial.initial_density().unwrap());
    let front = front_velocity_check(&rt, &rp, &rext, THETA, (0.2, 0.5), 0.1, FrontLocator::Crossing, 15).unwrap();
    let worst_front = front.iter().map(|f| f.rel_err).fold(0.0, f64::max);
    lines.push(line(11, "radial front velocity", !front.is_empty() && worst_front <= 0.15, format!("worst rel err {worst_front:.3} over {} samples", front.len())));
    ledgers.push(("radial-source".into(), rt));

    let dir = tempfile::tempdir().unwrap();
    lines.push(barrier_line(dir.path()));

    let fig_dir = dir.path().join("fig1");
    let code = run_command(["hslab", "reproduce-fig1", "--out", fig_dir.to_str().unwrap()]);
    let (_, ft) = run(&fig1);
    let satf = plateau_saturation(&ft, &provider, ft.snapshots.len() - 1).unwrap();
    lines.push(line(
        12,
        "fig1 reproduction",
        code == 0 && satf.is_some_and(|v| v <= SATURATION_TOL),
        format!("exit {code}, final plateau saturation {satf:.4?}"),
    ));
    ledgers.push(("fig1 reproduction".into(), ft));

    let mut mass_ok = true;
    let mut worst_rel: f64 = 0.0;
    for (name, t) in &ledgers {
        let l = &t.ledger;
        let m0 = l.initial_mass;
        let ok = l.clamped_mass <= 1e-8 * m0 && l.balance_defect() <= 1e-8 * m0;
        if !ok {
            eprintln!("mass balance fails on {name}: defect {:e}, clamped {:e}", l.balance_defect(), l.clamped_mass);
        }
        mass_ok &= ok;
        worst_rel = worst_rel.max(l.balance_defect().max(l.clamped_mass) / m0);
    }
    lines.push(line(9, "mass balance", mass_ok, format!("{} runs, worst {worst_rel:.2e} of M(0)", ledgers.len())));

    lines.sort_by_key(|l| l.id);
    lines
}

fn barrier_line(dir: &Path) -> Line {
    let z_dir = dir.join("z");
    let pi_dir = dir.join("pi");
    let z_code = run_command(["hslab", "barriers", "fig1", "--z", "--cells", "800", "--t-end", "1", "--out", z_dir.to_str().unwrap()]);
    let pi_code = run_command(["hslab", "barriers", "fig1-saturated", "--pi", "--k", "40", "--cells", "800", "--out", pi_dir.to_str().unwrap()]);
    let read = |d: &Path| -> DiagnosticsReport { serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap() };
    let (z, pi) = (read(&z_dir), read(&pi_dir));
    let margin = |r: &DiagnosticsReport, n: &str| r.get(n).map_or(f64::NAN, |m| m.value);
    let names = [("z", &z), ("pi", &pi)];
    let mut detail = Vec::new();
    let mut ok = z_code == 0 && pi_code == 0;
    for (b, rep) in names {
        for k in [10, 40] {
            let m = rep.get(&format!("{b}_k{k}_residual_margin"));
            ok &= m.is_some_and(|m| m.pass);
            detail.push(format!("{b} k{k} margin {:.2e}", margin(rep, &format!("{b}_k{k}_residual_margin"))));
        }
        let c = rep.get(&format!("{b}_comparison"));
        ok &= c.is_some_and(|m| m.pass);
        detail.push(format!("{b} comparison {:.1e}", margin(rep, &format!("{b}_comparison"))));
    }
    line(10, "barrier residual signs", ok, detail.join(", "))
}

#[test]
fn acceptance_criteria() {
    let lines = acceptance_lines();
    assert_eq!(lines.len(), 12);
    for l in &lines {
        println!("[{}] criterion {:>2} {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.name, l.detail);
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn drift_transport_front_moves_with_the_drift() {
    let s = builtin("drift-transport").unwrap();
    let (p, t) = run(&s);
    let ext = ExternalDensity::new(&s.coefficients().unwrap(), &s.initial_density().unwrap());
    let front = front_velocity_check(&t, &p, &ext, THETA, (0.2, 0.5), 0.1, FrontLocator::Crossing, 15).unwrap();
    assert!(!front.is_empty());
    let worst = front.iter().map(|f| f.rel_err).fold(0.0, f64::max);
    assert!(worst <= 0.05, "worst rel err {worst}");
}
