mod common;

use common::{dense_gram_lambda_max, dense_gram_lambda_min};
use proxsplit::aps::run_solver;
use proxsplit::bcd::run_bcd;
use proxsplit::diagnostics::{reference_solution, Trajectory};
use proxsplit::generate::{generate_group_lasso, generate_logistic_group_lasso, GroupLassoParams, LogisticParams};
use proxsplit::trace::{read_iterates_csv, read_trace_csv};
use proxsplit::{
    BcdConfig, BlockPartition, ErrorPolicy, Matrix, Mode, ProblemInstance, Regularizer, SmoothObjective, SolverConfig,
    UpdateOrder, Vector,
};

fn design(m: usize, n: usize, seed: f64) -> Matrix {
    Matrix::from_fn(m, n, |i, j| {
        ((i * 13 + j * 7) as f64 * 0.29 + seed).sin() + 0.05 * u8::from(i == j) as f64
    })
}

#[test]
fn lipschitz_brackets_dense_spectrum() {
    for s in 0..10 {
        let a = design(12, 7, s as f64);
        let top = dense_gram_lambda_max(&a);
        let ls = SmoothObjective::least_squares(a.clone(), Vector::zeros(12)).unwrap();
        assert!(ls.lipschitz() >= top && ls.lipschitz() <= 1.01 * top * (1.0 + 1e-6));
        let lg = SmoothObjective::logistic(a, Vector::from_fn(12, |i, _| (i % 2) as f64)).unwrap();
        assert!((lg.lipschitz() - ls.lipschitz() / 4.0).abs() <= 1e-12 * ls.lipschitz());
    }
}

#[test]
fn block_moduli_match_dense_eigenvalues() {
    let a = design(10, 6, 0.4);
    let part = BlockPartition::new(vec![2, 3, 1]).unwrap();
    let inst = ProblemInstance::new(
        SmoothObjective::least_squares(a.clone(), Vector::zeros(10)).unwrap(),
        Regularizer::Zero,
        part.clone(),
    )
    .unwrap();
    for (k, r) in part.ranges().enumerate() {
        let want = dense_gram_lambda_min(&a.columns(r.start, r.len()).into_owned());
        assert!((inst.block_moduli().values[k] - want).abs() <= 1e-10 * (1.0 + want));
    }
}

#[test]
fn box_constrained_diagonal_closed_form() {
    let d = [1.0, 2.0, 0.5, 3.0];
    let b = [3.0, -1.0, 0.2, 9.0];
    let (lo, hi) = (vec![-1.0, 0.0, -1.0, 0.0], vec![1.0, 1.0, 1.0, 2.0]);
    let a = Matrix::from_diagonal(&Vector::from_vec(d.to_vec()));
    let inst = ProblemInstance::new(
        SmoothObjective::least_squares(a, Vector::from_vec(b.to_vec())).unwrap(),
        Regularizer::Box {
            lower: lo.clone(),
            upper: hi.clone(),
            lambda: 0.0,
        },
        BlockPartition::unit(4).unwrap(),
    )
    .unwrap();
    let r = reference_solution(&inst, 1e-13, 100_000).unwrap();
    for i in 0..4 {
        let want = (b[i] / d[i]).clamp(lo[i], hi[i]);
        assert!((r.x_star[i] - want).abs() < 1e-12);
    }
    let run = run_bcd(
        &inst,
        &BcdConfig {
            tol: 1e-12,
            ..BcdConfig::default()
        },
        &Vector::zeros(4),
    )
    .unwrap();
    assert!((run.trace.final_point.clone() - r.x_star).norm() < 1e-10);
}

fn small_group(seed: u64) -> ProblemInstance {
    generate_group_lasso(
        &GroupLassoParams {
            block_sizes: vec![3, 2, 4, 3],
            m: 20,
            active_blocks: 2,
            noise_sigma: 0.05,
            weights: None,
            correlation: 0.3,
        },
        seed,
    )
    .unwrap()
}

#[test]
fn all_solvers_agree_on_group_lasso() {
    for seed in 0..5 {
        let inst = small_group(seed);
        let r = reference_solution(&inst, 1e-13, 1_000_000).unwrap();
        let x0 = Vector::zeros(inst.dim());
        let psm = run_solver(
            &inst,
            &SolverConfig::for_instance(&inst, 0.0).unwrap().with_tol(1e-11),
            &x0,
            Mode::Psm,
        )
        .unwrap();
        let kappa = 0.5 * inst.lipschitz();
        let aps_cfg = SolverConfig::for_instance(&inst, kappa)
            .unwrap()
            .with_policy(ErrorPolicy::RandomBounded { fraction: 0.99 })
            .with_random_steps(
                0.5 / (inst.lipschitz() + 2.0 * kappa),
                1.8 / (inst.lipschitz() + 2.0 * kappa),
            )
            .with_tol(1e-11)
            .with_max_iter(50_000)
            .with_seed(seed);
        let aps = run_solver(&inst, &aps_cfg, &x0, Mode::Aps).unwrap();
        let cyc = run_bcd(
            &inst,
            &BcdConfig {
                tol: 1e-11,
                ..BcdConfig::default()
            },
            &x0,
        )
        .unwrap();
        let order = UpdateOrder::EssentiallyCyclic {
            schedule: vec![0, 2, 1, 2, 3, 0],
            period: 6,
        };
        let ess = run_bcd(
            &inst,
            &BcdConfig {
                tol: 1e-11,
                order,
                ..BcdConfig::default()
            },
            &x0,
        )
        .unwrap();
        for (name, f) in [
            ("psm", psm.final_objective()),
            ("aps", aps.final_objective()),
            ("bcd", cyc.trace.final_objective()),
            ("essentially cyclic", ess.trace.final_objective()),
        ] {
            assert!((f - r.f_star).abs() <= 1e-9, "{name}: {f} vs {}", r.f_star);
        }
        assert!(ess.cycles.is_empty());
        assert!(cyc.block_increase_events.is_empty());
    }
}

#[test]
fn logistic_solvers_agree() {
    let inst = generate_logistic_group_lasso(
        &LogisticParams {
            block_sizes: vec![2, 3, 2],
            m: 80,
            active_blocks: 2,
            signal_scale: 1.0,
            weights: None,
        },
        3,
    )
    .unwrap();
    let r = reference_solution(&inst, 1e-12, 1_000_000).unwrap();
    let x0 = Vector::zeros(inst.dim());
    let cfg = BcdConfig {
        tol: 1e-10,
        allow_weak_blocks: true,
        ..BcdConfig::default()
    };
    let bcd = run_bcd(&inst, &cfg, &x0).unwrap();
    assert!((bcd.trace.final_objective() - r.f_star).abs() < 1e-9);
    let aps_cfg = SolverConfig::for_instance(&inst, inst.lipschitz())
        .unwrap()
        .with_policy(ErrorPolicy::Adversarial { fraction: 0.9 })
        .with_tol(1e-10)
        .with_max_iter(100_000);
    let aps = run_solver(&inst, &aps_cfg, &x0, Mode::Aps).unwrap();
    assert!((aps.final_objective() - r.f_star).abs() < 1e-9);
}

#[test]
fn trace_files_round_trip_exactly() {
    let inst = small_group(9);
    let cfg = SolverConfig::for_instance(&inst, 0.3 * inst.lipschitz())
        .unwrap()
        .with_policy(ErrorPolicy::RandomBounded { fraction: 0.5 })
        .with_tol(1e-9)
        .with_iterates(usize::MAX);
    let trace = run_solver(&inst, &cfg, &Vector::zeros(inst.dim()), Mode::Aps).unwrap();
    let table = read_trace_csv(trace.to_csv_string().unwrap().as_bytes()).unwrap();
    assert!(!table.cycle_layout);
    assert_eq!(table.records, trace.records);
    let mut buf = Vec::new();
    trace.write_iterates_csv(&mut buf).unwrap();
    let its = read_iterates_csv(buf.as_slice()).unwrap();
    assert_eq!(its, trace.iterates.iter().cloned().collect::<Vec<_>>());
    let direct = Trajectory::from(&trace);
    let reread = Trajectory::new(&table.records, its.iter());
    assert_eq!(direct.iterate(3), reread.iterate(3));

    let run = run_bcd(
        &inst,
        &BcdConfig {
            tol: 1e-9,
            ..BcdConfig::default()
        },
        &Vector::zeros(inst.dim()),
    )
    .unwrap();
    let table = read_trace_csv(run.to_cycle_csv_string().unwrap().as_bytes()).unwrap();
    assert!(table.cycle_layout);
    assert_eq!(table.records.len(), run.trace.records.len());
    for (c, rhs) in run.cycles.iter().zip(&table.err_bound_rhs) {
        assert_eq!(Some(c.bound_rhs()), *rhs);
    }
}

#[test]
fn instance_file_round_trip() {
    let inst = small_group(4);
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    inst.save(&p1).unwrap();
    ProblemInstance::load(&p1).unwrap().save(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}
