use l4dict::experiments::{
    cell_seed, run_2k_sweep, run_convergence, run_phase_transition, Axis, AxisKind, ConvergenceMode, FixedParams,
    GridSpec, SolverSettings, SweepSpec,
};
use l4dict_core::{ModelParams, SolveConfig};

fn small_grid(seed: u64) -> GridSpec {
    GridSpec {
        axis1: Axis::new(AxisKind::Theta, vec![0.2, 0.5]),
        axis2: Axis::new(AxisKind::P, vec![300.0, 3000.0]),
        fixed: FixedParams {
            n: 8,
            p: 1000,
            theta: 0.3,
        },
        trials: 3,
        cfg: SolverSettings {
            max_iters: 50,
            ..SolverSettings::default()
        },
        base_seed: seed,
    }
}

#[test]
fn grid_is_byte_identical_across_runs_and_pools() {
    let spec = small_grid(4);
    let a = run_phase_transition(&spec).unwrap().csv().unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    let b = pool.install(|| run_phase_transition(&spec).unwrap().csv().unwrap());
    assert_eq!(a, b);
    let other = run_phase_transition(&small_grid(5)).unwrap().csv().unwrap();
    assert_ne!(a, other);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some("axis1,axis2,mean_error,success_rate"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn cell_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for c in 0..50 {
        for t in 0..50 {
            assert!(seen.insert(cell_seed(42, c, t)));
        }
    }
}

#[test]
fn grid_cells_are_well_formed() {
    let r = run_phase_transition(&small_grid(6)).unwrap();
    assert_eq!(r.cells.len(), 4);
    for c in &r.cells {
        assert_eq!(c.errors.len(), 3);
        assert!((0.0..=1.0).contains(&c.success_rate));
        assert_eq!(c.bound_violations, 0);
        let mean = c.errors.iter().sum::<f64>() / 3.0;
        assert!((mean - c.mean_error).abs() < 1e-15);
    }
    assert!(r.cell(0.2, 3000.0).unwrap().mean_error < 0.01);
}

#[test]
fn invalid_grid_is_rejected() {
    let mut spec = small_grid(1);
    spec.trials = 0;
    assert!(run_phase_transition(&spec).is_err());
    let mut spec = small_grid(1);
    spec.axis1 = Axis::new(AxisKind::Theta, vec![1.5]);
    assert!(run_phase_transition(&spec).is_err());
}

#[test]
fn convergence_replay_and_trial_independence() {
    let params = ModelParams::new(10, 3000, 0.3, 9).unwrap();
    let cfg = SolveConfig {
        max_iters: 30,
        ..SolveConfig::default()
    };
    let a = run_convergence(&params, &cfg, 3, ConvergenceMode::DictionaryLearning).unwrap();
    let b = run_convergence(&params, &cfg, 3, ConvergenceMode::DictionaryLearning).unwrap();
    assert_eq!(a.csv().unwrap(), b.csv().unwrap());
    assert_eq!(a.failures().count(), 0);
    assert!(a.final_g().into_iter().all(|g| g.unwrap() > 0.95));

    let orth = run_convergence(&params, &cfg, 3, ConvergenceMode::Orthogonal).unwrap();
    for rec in &orth.records {
        assert!(rec.outcome.as_ref().unwrap().converged);
    }
}

#[test]
fn sweep_shares_data_across_orders() {
    let spec = SweepSpec {
        n: 8,
        theta: 0.3,
        p_grid: vec![500, 5000],
        orders: vec![4, 6, 8],
        trials: 3,
        cfg: SolverSettings {
            max_iters: 60,
            ..SolverSettings::default()
        },
        det_tol: 1e-6,
        base_seed: 3,
    };
    let r = run_2k_sweep(&spec).unwrap();
    assert_eq!(r.errors.len(), 6);
    assert_eq!(r.iterations.len(), 3);
    assert!(r.error_at(4, 5000).unwrap() <= r.error_at(4, 500).unwrap());
    assert!(r.error_at(4, 5000).unwrap() < 0.01);
    // Higher orders sharpen the fixed-point map, so they need no more steps.
    let its: Vec<usize> = r.iterations.iter().map(|(_, i)| i.unwrap()).collect();
    assert!(its.windows(2).all(|w| w[1] <= w[0]), "{its:?}");
    assert_eq!(r, run_2k_sweep(&spec).unwrap());
    assert_eq!(String::from_utf8(r.errors_csv().unwrap()).unwrap().lines().count(), 7);
    assert_eq!(
        String::from_utf8(r.iterations_csv().unwrap()).unwrap().lines().count(),
        4
    );
}
