mod common;

use common::{random_instance, Instance, Mat};
use netgame::covariance::{
    build_operators, steady_state, steady_state_direct, steady_state_neumann, SchedulingPolicy, Solver,
};
use netgame::linalg::{min_sym_eigenvalue, spectral_norm};
use netgame::model::discretize;
use netgame::riccati::{check_hurwitz, riccati_residual, solve_game_riccati};
use netgame::scheduler::{evaluate_costs, grad_cost};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, lo: f64, hi: f64, rho_max: f64) -> Instance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 3, lo, hi, rho_max)
}

fn close(a: &Mat, b: &Mat, rel: f64) -> bool {
    (a - b).amax() <= rel * (1.0 + b.amax())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn riccati_solution_is_stabilizing_and_psd(seed in any::<u64>()) {
        let inst = instance(seed, 0.0, 1.0, 1.0);
        let (spec, ric) = (&inst.spec, &inst.ric);
        let s = spec.s2() - spec.s1();
        let res = riccati_residual(&spec.a, &s, &spec.q, &ric.p);
        prop_assert!(res.amax() <= 1e-8 * (1.0 + ric.p.norm_squared()));
        prop_assert!(min_sym_eigenvalue(&ric.p) >= -1e-10);
        prop_assert!(check_hurwitz(&ric.atilde));
    }

    #[test]
    fn covariance_scales_with_noise_power(seed in any::<u64>(), c in 0.1f64..10.0) {
        let inst = instance(seed, 0.0, 1.0, 0.999);
        let mut scaled = inst.spec.clone();
        scaled.g *= c;
        let ric = solve_game_riccati(&scaled).unwrap();
        prop_assert!(close(&ric.p, &inst.ric.p, 1e-12));
        let d = discretize(&scaled, &ric).unwrap();
        let (_, base) = steady_state(&inst.disc, inst.policy, Solver::Direct).unwrap();
        let (_, sig) = steady_state(&d, inst.policy, Solver::Direct).unwrap();
        prop_assert!(close(&sig, &(base * (c * c)), 1e-8));
        prop_assert!((d.phi_over_h - c * c * inst.disc.phi_over_h).abs() <= 1e-9 * (1.0 + inst.disc.phi_over_h.abs() * c * c));
    }

    #[test]
    fn orthogonal_noise_rotation_changes_nothing(seed in any::<u64>(), useed in any::<u64>()) {
        let inst = instance(seed, 0.0, 1.0, 0.999);
        let n = inst.spec.n();
        let mut rng = ChaCha8Rng::seed_from_u64(useed);
        let u = common::gaussian(&mut rng, n, n, 1.0).qr().q();
        let mut rotated = inst.spec.clone();
        rotated.g = &inst.spec.g * u;
        let d = discretize(&rotated, &inst.ric).unwrap();
        prop_assert!(close(&d.gtilde(), &inst.disc.gtilde(), 1e-10));
        prop_assert!((d.phi_over_h - inst.disc.phi_over_h).abs() <= 1e-9 * (1.0 + inst.disc.phi_over_h.abs()));
        let (_, a) = steady_state(&d, inst.policy, Solver::Direct).unwrap();
        let (_, b) = steady_state(&inst.disc, inst.policy, Solver::Direct).unwrap();
        prop_assert!(close(&a, &b, 1e-9));
    }

    #[test]
    fn neumann_tail_equals_propagated_fixed_point(seed in any::<u64>(), tp in 0usize..60) {
        // Σ − Σ_tp = T^{tp+1}(Σ)
        let inst = instance(seed, 0.0, 1.0, 0.98);
        let ops = build_operators(&inst.disc, inst.policy);
        let exact = steady_state_direct(&ops).unwrap();
        let partial = steady_state_neumann(&ops, tp).unwrap().sigma;
        let mut tail = exact.clone();
        for _ in 0..=tp {
            tail = ops.transfer(&tail);
        }
        let scale = spectral_norm(&exact) / (1.0 - inst.rho);
        prop_assert!((&exact - &partial - tail).amax() <= 1e-9 * scale);
    }

    #[test]
    fn neumann_partial_sums_increase_in_loewner_order(seed in any::<u64>(), tp in 0usize..40, extra in 1usize..40) {
        let inst = instance(seed, 0.0, 1.0, 0.999);
        let ops = build_operators(&inst.disc, inst.policy);
        let a = steady_state_neumann(&ops, tp).unwrap().sigma;
        let b = steady_state_neumann(&ops, tp + extra).unwrap().sigma;
        let tol = 1e-12 * (1.0 + b.amax());
        prop_assert!(min_sym_eigenvalue(&a) >= -tol);
        prop_assert!(min_sym_eigenvalue(&(&b - &a)) >= -tol);
        prop_assert!(min_sym_eigenvalue(&ops.gpq) >= -tol);
    }

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let inst = instance(seed, 0.05, 0.95, 0.99);
        let (ric, disc, lam, pol) = (&inst.ric, &inst.disc, &inst.spec.lambda, inst.policy);
        let g = grad_cost(disc, lam, pol, Solver::Direct).unwrap();
        let at = |p: f64, q: f64| evaluate_costs(ric, disc, lam, SchedulingPolicy { p, q }, Solver::Direct);
        let d = 1e-5;
        let fd_p = (at(pol.p + d, pol.q).j1 - at(pol.p - d, pol.q).j1) / (2.0 * d);
        let fd_q = (at(pol.p, pol.q + d).j2 - at(pol.p, pol.q - d).j2) / (2.0 * d);
        prop_assert!((g.dj1dp - fd_p).abs() <= 1e-4 * fd_p.abs().max(g.dj1dp.abs()));
        prop_assert!((g.dj2dq - fd_q).abs() <= 1e-4 * fd_q.abs().max(g.dj2dq.abs()));
    }

    #[test]
    fn cost_gap_is_the_communication_identity(seed in any::<u64>()) {
        let inst = instance(seed, 0.0, 1.0, 0.999);
        let (lam, pol) = (&inst.spec.lambda, inst.policy);
        let c = evaluate_costs(&inst.ric, &inst.disc, lam, pol, Solver::Direct);
        let want = (lam.l11() + lam.l21()) * (1.0 - pol.p) + (lam.l12() + lam.l22()) * (1.0 - pol.q);
        prop_assert!((c.j1 - c.j2 - want).abs() <= 1e-10 * (1.0 + c.j1.abs()));
    }

    #[test]
    fn solvers_agree_when_contraction_is_strong(seed in any::<u64>()) {
        let inst = instance(seed, 0.0, 1.0, 0.9);
        let (_, a) = steady_state(&inst.disc, inst.policy, Solver::Direct).unwrap();
        let (_, b) = steady_state(&inst.disc, inst.policy, Solver::Neumann { tp: 2000 }).unwrap();
        prop_assert!(close(&b, &a, 1e-9));
    }
}
