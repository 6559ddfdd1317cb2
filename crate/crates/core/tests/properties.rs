use hslab::coefficients::{congestion_margin, eval_frame, CoefficientSpec, FrameProvider, Profile};
use hslab::grid::{div_m_grad, read_snapshot, snapshot_bytes, Geometry, Grid, ScalarField};
use hslab::pressure::{complementarity_residual, complementarity_scalar_bound, pressure_of};
use hslab::scenario::{builtin, parse_scenario, InitialData};
use hslab::solver::{run_lockstep, run_with, SolverConfig};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (prop_oneof![Just(Geometry::Line), Just(Geometry::Radial)], 8usize..40).prop_map(|(geo, n)| match geo {
        Geometry::Line => Grid::line(-2.0, 3.0, n).unwrap(),
        Geometry::Radial => Grid::radial(2.5, n).unwrap(),
    })
}

fn weighted_dot(a: &ScalarField, b: &ScalarField) -> f64 {
    (0..a.values.len()).map(|i| a.values[i] * b.values[i] * a.grid.volume(i)).sum()
}

fn field(grid: Grid, vals: &[f64]) -> ScalarField {
    ScalarField::new(grid, 0.0, (0..grid.n_cells()).map(|i| vals[i % vals.len()]).collect()).unwrap()
}

fn gauss(ax: f64, at: f64) -> Profile {
    Profile::GaussDecay { amp: 1.0, ax, at, center: 0.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn div_m_grad_is_symmetric_and_conservative(
        g in grid_strategy(),
        mv in prop::collection::vec(0.1f64..3.0, 1..50),
        uv in prop::collection::vec(-2.0f64..2.0, 1..50),
        wv in prop::collection::vec(-2.0f64..2.0, 1..50),
    ) {
        let m = field(g, &mv);
        let u = field(g, &uv);
        let w = field(g, &wv);
        let lu = div_m_grad(&m, &u);
        let lw = div_m_grad(&m, &w);
        let (a, b) = (weighted_dot(&lu, &w), weighted_dot(&u, &lw));
        let scale = 1.0 + a.abs().max(b.abs());
        prop_assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        let total: f64 = (0..g.n_cells()).map(|i| lu.values[i] * g.volume(i)).sum();
        let mag: f64 = (0..g.n_cells()).map(|i| lu.values[i].abs() * g.volume(i)).sum();
        prop_assert!(total.abs() <= 1e-11 * (1.0 + mag));
        // negative semidefinite
        prop_assert!(weighted_dot(&lu, &u) <= 1e-10 * (1.0 + mag));
    }

    #[test]
    fn pressure_is_monotone_in_density(
        k in 1.5f64..120.0,
        m in 0.05f64..2.0,
        a in 0.0f64..3.0,
        d in 0.0f64..1.0,
    ) {
        let g = Grid::line(0.0, 1.0, 8).unwrap();
        let mf = ScalarField::new(g, 0.0, vec![m; 8]).unwrap();
        let lo = ScalarField::new(g, 0.0, vec![a * m; 8]).unwrap();
        let hi = ScalarField::new(g, 0.0, vec![(a + d) * m; 8]).unwrap();
        let (pl, ph) = (pressure_of(&lo, &mf, k), pressure_of(&hi, &mf, k));
        prop_assert!(pl.values[0] >= 0.0);
        prop_assert!(ph.values[0] >= pl.values[0]);
    }

    #[test]
    fn complementarity_respects_the_scalar_bound(
        k in 1.5f64..200.0,
        vs in prop::collection::vec(0.0f64..1.0, 8),
        m in 0.1f64..3.0,
    ) {
        let g = Grid::line(0.0, 1.0, 8).unwrap();
        let mf = ScalarField::new(g, 0.0, vec![m; 8]).unwrap();
        let rho = ScalarField::new(g, 0.0, vs.iter().map(|v| v * m).collect()).unwrap();
        let p = pressure_of(&rho, &mf, k);
        let c = complementarity_residual(&p, &rho, &mf);
        prop_assert_eq!(c.overshoot, 0.0);
        prop_assert!(c.residual <= m * complementarity_scalar_bound(k) * (1.0 + 1e-12));
    }

    #[test]
    fn congestion_margin_grows_with_f(
        ax in 0.01f64..0.3,
        at in 0.0f64..0.5,
        f0 in -1.0f64..1.0,
        df in 0.0f64..1.0,
        t in 0.0f64..2.0,
    ) {
        let g = Grid::line(-3.0, 3.0, 30).unwrap();
        let frame = |f: f64| {
            let s = CoefficientSpec::new(gauss(ax, at), Profile::constant(0.0), Profile::constant(f), 1e-6, &g).unwrap();
            eval_frame(&s, &g, t).unwrap()
        };
        let all = vec![true; 30];
        let (a, b) = (congestion_margin(&frame(f0), &all), congestion_margin(&frame(f0 + df), &all));
        prop_assert!(b >= a - 1e-14);
    }

    #[test]
    fn frames_satisfy_the_forcing_identity(
        ax in 0.01f64..0.3,
        at in 0.0f64..0.5,
        slope in -0.5f64..0.5,
        f in -1.0f64..1.0,
        t in 0.0f64..3.0,
    ) {
        let g = Grid::line(-3.0, 3.0, 40).unwrap();
        let s = CoefficientSpec::new(gauss(ax, at), Profile::Linear { offset: 0.1, slope }, Profile::constant(f), 1e-6, &g).unwrap();
        let fr = eval_frame(&s, &g, t).unwrap();
        let provider = FrameProvider::new(&s, &g).unwrap();
        let pf = provider.frame(t).unwrap();
        for i in 0..40 {
            let m = fr.m.values[i];
            let lhs = fr.big_f.values[i] * m;
            let rhs = fr.div_mb.values[i] + m * fr.f.values[i] - fr.dtm.values[i];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            prop_assert!((fr.lambda.values[i] - m.ln()).abs() <= 1e-12);
            prop_assert!((fr.dtm.values[i] + at * m).abs() <= 1e-12);
            for (a, b) in [(&pf.m, &fr.m), (&pf.big_f, &fr.big_f), (&pf.div_mb, &fr.div_mb)] {
                prop_assert!((a.values[i] - b.values[i]).abs() <= 1e-12 * (1.0 + b.values[i].abs()));
            }
        }
    }

    #[test]
    fn time_independent_frames_do_not_change(
        amp in 0.5f64..2.0,
        ax in 0.01f64..0.3,
        f in -1.0f64..1.0,
        t1 in 0.0f64..5.0,
        t2 in 0.0f64..5.0,
    ) {
        let g = Grid::line(-3.0, 3.0, 20).unwrap();
        let s = CoefficientSpec::new(Profile::GaussDecay { amp, ax, at: 0.0, center: 0.0 }, Profile::Sine { amp: 0.3, freq: 1.0, phase: 0.0, offset: 0.0 }, Profile::constant(f), 1e-6, &g).unwrap();
        prop_assert!(s.is_time_independent());
        let (a, b) = (eval_frame(&s, &g, t1).unwrap(), eval_frame(&s, &g, t2).unwrap());
        prop_assert_eq!(&a.m.values, &b.m.values);
        prop_assert_eq!(&a.big_f.values, &b.big_f.values);
        prop_assert!(a.dtm.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn snapshots_round_trip(g in grid_strategy(), vals in prop::collection::vec(-1e3f64..1e3, 1..50), t in 0.0f64..10.0) {
        let mut f = field(g, &vals);
        f.t = t;
        let back = read_snapshot(snapshot_bytes(&f).as_slice()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn scenarios_round_trip(center in -1.0f64..1.0, half in 0.1f64..2.0, level in 0.0f64..1.0, k in 1.5f64..100.0, cells in 20usize..500) {
        let mut s = builtin("fig1").unwrap();
        s.initial = InitialData::Patch { center, half_width: half, level };
        s.solver.k = k;
        s.grid.cells = cells;
        prop_assert_eq!(parse_scenario(&s.to_toml(), "prop", None).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solver_preserves_order(
        lo_level in 0.0f64..0.9,
        gap in 0.0f64..0.5,
        half in 0.3f64..1.2,
        k in 2.0f64..30.0,
        b in -0.5f64..0.5,
    ) {
        let g = Grid::line(-4.0, 4.0, 80).unwrap();
        let m = gauss(0.1, 1.0 / 6.0);
        let s = CoefficientSpec::new(m.clone(), Profile::constant(b), Profile::constant(0.2), 1e-3, &g).unwrap();
        let provider = FrameProvider::new(&s, &g).unwrap();
        let lo = ScalarField::from_fn(g, 0.0, |x| if x.abs() <= half { lo_level * m.value(x, 0.0) } else { 0.0 });
        let hi = ScalarField::from_fn(g, 0.0, |x| if x.abs() <= half + 0.2 { (lo_level + gap) * m.value(x, 0.0) } else { 0.0 });
        let runs = run_lockstep(&provider, &[lo, hi], &SolverConfig::new(k, 0.3, 6)).unwrap();
        for (a, b) in runs[0].snapshots.iter().zip(&runs[1].snapshots) {
            let scale = b.rho.max().max(1e-300);
            for (x, y) in a.rho.values.iter().zip(&b.rho.values) {
                prop_assert!(x - y <= 1e-10 * scale, "{x} > {y}");
            }
        }
    }

    #[test]
    fn solver_balances_mass(
        level in 0.1f64..1.0,
        half in 0.3f64..1.2,
        k in 2.0f64..40.0,
        f in -0.5f64..1.0,
        radial in any::<bool>(),
    ) {
        let (g, b) = if radial { (Grid::radial(4.0, 60).unwrap(), Profile::constant(0.0)) } else { (Grid::line(-4.0, 4.0, 60).unwrap(), Profile::Sine { amp: 0.3, freq: 1.0, phase: 0.0, offset: 0.0 }) };
        let s = CoefficientSpec::new(Profile::constant(1.0), b, Profile::constant(f), 1e-3, &g).unwrap();
        let rho0 = ScalarField::from_fn(g, 0.0, |x| if x.abs() <= half { level } else { 0.0 });
        let tr = run_with(&FrameProvider::new(&s, &g).unwrap(), &rho0, &SolverConfig::new(k, 0.3, 3)).unwrap();
        let l = &tr.ledger;
        prop_assert!(l.clamped_mass <= 1e-8 * l.initial_mass);
        prop_assert!(l.balance_defect() <= 1e-8 * l.initial_mass, "defect {}", l.balance_defect());
        prop_assert!(tr.snapshots.iter().all(|st| st.rho.min() >= 0.0));
    }
}
