mod common;

use common::{desk_instance, kron_oracle, max_abs_diff, rel_diff};
use jadce::consensus::ConsensusSolve;
use jadce::instance::generate;
use jadce::metrics::{detect, kkt_residual, nmse, objective};
use jadce::solvers::prox::subgradient;
use jadce::solvers::splitting::{run_with, Splitting, Variant};
use jadce::solvers::{lipschitz_estimate, solve_from, write_trace_csv};
use jadce::{
    solve, BlockVector, ConsensusFactor, GroupLassoProblem, InstanceConfig, Reduction, SolverKind,
    SolverOptions, Status,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn opts() -> SolverOptions {
    SolverOptions {
        max_iterations: 100_000,
        ..Default::default()
    }
}

fn small_problem(seed: u64) -> GroupLassoProblem {
    desk_instance(seed).to_problem(0.5).unwrap()
}

#[test]
fn zero_data_gives_zero_solution() {
    let inst = desk_instance(1);
    let a = inst.operator().unwrap();
    let p = GroupLassoProblem::new(a, vec![0.0; inst.q.rows() * 2 * inst.config.antennas], 1.0).unwrap();
    for kind in SolverKind::ALL {
        let r = solve(&p, kind, &opts()).unwrap();
        assert_eq!(r.status, Status::Converged, "{kind}");
        assert!(r.final_x.as_slice().iter().all(|&v| v == 0.0), "{kind}");
        assert_eq!(r.final_objective, 0.0);
    }
}

#[test]
fn all_solvers_reach_kkt_and_agree() {
    for seed in 0..6 {
        let p = small_problem(seed);
        let reports: Vec<_> = SolverKind::ALL.iter().map(|&k| solve(&p, k, &opts()).unwrap()).collect();
        for r in &reports {
            assert_eq!(r.status, Status::Converged, "seed {seed} {}", r.solver);
            assert!(r.kkt_residual <= 1e-5 * p.gamma.max(1.0));
            assert!(rel_diff(r.final_objective, reports[0].final_objective) <= 1e-6);
        }
    }
}

#[test]
fn solution_is_locally_optimal() {
    let p = small_problem(11);
    let r = solve(&p, SolverKind::Aladin, &opts()).unwrap();
    let f = r.final_objective;
    let mut rng = 0x2545f4914f6cdd1d_u64;
    for _ in 0..50 {
        let mut x = r.final_x.clone();
        for v in x.as_mut_slice() {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            *v += 1e-3 * ((rng % 2001) as f64 / 1000.0 - 1.0);
        }
        assert!(objective(&p, &x).unwrap() >= f - 1e-8 * f.abs());
    }
}

#[test]
fn proxgrad_objective_is_monotone() {
    for seed in 0..4 {
        let p = small_problem(seed);
        let r = solve(&p, SolverKind::ProxGradient, &opts()).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].objective <= w[0].objective * (1.0 + 1e-12), "seed {seed} iter {}", w[1].iter);
        }
    }
}

#[test]
fn fista_ends_below_start() {
    for seed in 0..4 {
        let p = small_problem(seed);
        let r = solve(&p, SolverKind::Fista, &opts()).unwrap();
        let f0 = objective(&p, &p.zero_x()).unwrap();
        assert!(r.final_objective <= f0);
        assert!(r.trace.last().unwrap().objective <= r.trace[0].objective);
    }
}

#[test]
fn local_step_certifies_subgradient_every_iteration() {
    let p = small_problem(3);
    let rho = 0.8 * p.gamma;
    let f = ConsensusFactor::precompute(p.a.q(), p.a.antennas(), rho).unwrap();
    for variant in [Variant::Aladin, Variant::Admm] {
        let mut s = Splitting::new(&p, &f, variant, rho, Reduction::Tree, p.zero_x()).unwrap();
        for _ in 0..60 {
            s.update().unwrap();
            s.local_step();
            for i in 0..p.blocks() {
                let xi = s.state().xi.block(i);
                let g = subgradient(s.state().z.block(i), xi, s.at_lambda().block(i), rho);
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                if xn > 0.0 {
                    for (gv, xv) in g.iter().zip(xi) {
                        assert!((gv - p.gamma * xv / xn).abs() <= 1e-9 * p.gamma.max(1.0));
                    }
                } else {
                    assert!(gn <= p.gamma * (1.0 + 1e-12));
                }
                assert_eq!(g, s.subgradient(i));
            }
            let parts = s.agent_products().unwrap();
            s.consensus(parts);
        }
    }
}

#[test]
fn aladin_and_admm_differ_only_in_update() {
    let p = small_problem(5);
    let a = solve(&p, SolverKind::Aladin, &opts()).unwrap();
    let b = solve(&p, SolverKind::Admm, &opts()).unwrap();
    assert!(rel_diff(a.final_objective, b.final_objective) <= 1e-6);
    // first iterate is identical, the paths split afterwards
    assert_eq!(a.trace[0].objective, b.trace[0].objective);
    assert_ne!(a.trace[3].objective, b.trace[3].objective);
}

#[test]
fn tree_and_sequential_reductions_agree() {
    for seed in 0..3 {
        let p = small_problem(seed);
        for kind in SolverKind::ALL {
            let t = solve(&p, kind, &SolverOptions { reduction: Reduction::Tree, ..opts() }).unwrap();
            let s = solve(&p, kind, &SolverOptions { reduction: Reduction::Sequential, ..opts() }).unwrap();
            assert!(max_abs_diff(t.final_x.as_slice(), s.final_x.as_slice()) <= 1e-9, "{kind}");
        }
    }
}

fn trace_bytes(p: &GroupLassoProblem, kind: SolverKind, threads: usize) -> Vec<u8> {
    let r = solve(p, kind, &SolverOptions { threads, ..opts() }).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&r.trace, &mut buf, false).unwrap();
    buf
}

#[test]
fn thread_count_does_not_change_results() {
    // large enough for several chunks
    let inst = generate(&InstanceConfig::new(300, 4, 6, 8, 2)).unwrap();
    let p = inst.to_problem(0.5).unwrap();
    for kind in SolverKind::ALL {
        let one = trace_bytes(&p, kind, 1);
        for threads in [2, 3] {
            assert_eq!(one, trace_bytes(&p, kind, threads), "{kind} with {threads} threads");
        }
    }
}

struct DenseConsensus(DMatrix<f64>);

impl ConsensusSolve for DenseConsensus {
    fn solve(&self, v: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(v)).as_slice().to_vec()
    }
}

#[test]
fn dense_consensus_gives_same_iterates() {
    let p = small_problem(8);
    let rho = 0.8 * p.gamma;
    let d = kron_oracle(p.a.q(), p.a.antennas());
    let lambda = DMatrix::<f64>::identity(p.a.rows(), p.a.rows()) + &d * d.transpose() / rho;
    let dense = DenseConsensus(lambda.try_inverse().unwrap());
    let fast = ConsensusFactor::precompute(p.a.q(), p.a.antennas(), rho).unwrap();
    let o = SolverOptions { max_iterations: 200, ..opts() };
    for variant in [Variant::Aladin, Variant::Admm] {
        let a = run_with(&p, variant, &o, p.zero_x(), &dense).unwrap();
        let b = run_with(&p, variant, &o, p.zero_x(), &fast).unwrap();
        assert!(max_abs_diff(a.final_x.as_slice(), b.final_x.as_slice()) <= 1e-8);
    }
}

#[test]
fn warm_start_at_solution_stops_quickly() {
    let p = small_problem(2);
    let first = solve(&p, SolverKind::Fista, &opts()).unwrap();
    for kind in SolverKind::ALL {
        let r = solve_from(&p, kind, &opts(), Some(&first.final_x)).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.iterations < first.iterations, "{kind}: {}", r.iterations);
    }
}

#[test]
fn max_iterations_status_and_trace() {
    let p = small_problem(4);
    let o = SolverOptions { max_iterations: 7, trace_every: 3, ..opts() };
    for kind in SolverKind::ALL {
        let r = solve(&p, kind, &o).unwrap();
        assert_eq!(r.status, Status::MaxIterations);
        assert_eq!(r.iterations, 7);
        assert_eq!(r.timings.len(), 7);
        let iters: Vec<_> = r.trace.iter().map(|t| t.iter).collect();
        assert_eq!(iters, vec![3, 6, 7]);
    }
}

#[test]
fn rejects_mismatched_start() {
    let p = small_problem(4);
    let bad = BlockVector::zeros(p.blocks() + 1, p.block_size());
    assert!(solve_from(&p, SolverKind::Aladin, &opts(), Some(&bad)).is_err());
}

#[test]
fn lipschitz_matches_top_eigenvalue() {
    let p = small_problem(6);
    let lf = lipschitz_estimate(&p.a, Reduction::Tree).unwrap();
    let d = kron_oracle(p.a.q(), p.a.antennas());
    let eig = (d.transpose() * &d).symmetric_eigenvalues();
    let top = eig.iter().cloned().fold(0.0, f64::max);
    assert!(rel_diff(lf, top) <= 1e-5, "{lf} vs {top}");
}

#[test]
fn detection_and_nmse_on_easy_instance() {
    let cfg = InstanceConfig::new(40, 8, 12, 3, 17);
    let inst = generate(&cfg).unwrap();
    let p = inst.to_problem(0.1).unwrap();
    let r = solve(&p, SolverKind::Aladin, &opts()).unwrap();
    let d = detect(&r.final_x, 0.1, &inst.true_active);
    assert_eq!(d.estimated_active, inst.true_active);
    let e = nmse(&r.final_x, &inst).unwrap();
    assert!(e < 0.2, "nmse {e}");
    assert!(kkt_residual(&p, &r.final_x).unwrap() <= 1e-5 * p.gamma.max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn above_gamma_max_zero_is_returned(seed in 0u64..1000) {
        let inst = desk_instance(seed);
        let p = inst.to_problem(1.0).unwrap();
        for kind in SolverKind::ALL {
            let r = solve(&p, kind, &opts()).unwrap();
            prop_assert_eq!(r.status, Status::Converged);
            prop_assert!(r.final_x.norm() <= 1e-6 * p.b.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }

    #[test]
    fn objective_never_below_solver_optimum(seed in 0u64..1000, scale in 0.2f64..0.9) {
        let p = desk_instance(seed).to_problem(scale).unwrap();
        let r = solve(&p, SolverKind::Aladin, &opts()).unwrap();
        prop_assert_eq!(r.status, Status::Converged);
        let truth = objective(&p, &p.zero_x()).unwrap();
        prop_assert!(r.final_objective <= truth);
    }
}
