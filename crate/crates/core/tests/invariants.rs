//! Property tests for the structural invariants of kernels, reactions,
//! eigenpairs and the truncated solver.

use fraplace_core::reactions::{weights_infty, weights_zero, NodalReaction};
use fraplace_core::solver::{
    minimize_truncated_observed, submodular_comparison_slack, weak_defect,
};
use fraplace_core::spectral::{constant_weight, energy_matrix_p2};
use fraplace_core::*;
use proptest::prelude::*;

fn setup(n: usize, p: f64) -> (Grid, Kernel) {
    let g = build_grid(0.0, 1.0, n).unwrap();
    let k = assemble_kernel(&g, 0.5, p).unwrap();
    (g, k)
}

fn reaction_strategy() -> impl Strategy<Value = Reaction> {
    let p = 1.3f64..3.5;
    prop_oneof![
        (p.clone(), 0.5f64..30.0, 0.0f64..1.0, 0.1f64..3.0).prop_map(|(p, lambda, qf, dr)| {
            Reaction::logistic(lambda, 1.0 + 1e-3 + qf * (p - 1.0 - 1e-3), p + dr, p).unwrap()
        }),
        (
            p.clone(),
            0.0f64..2.0,
            -3.0f64..10.0,
            1.0f64..4.0,
            0.1f64..3.0,
            0.1f64..3.0
        )
            .prop_map(|(p, c0, lambda, q, mu, dr)| {
                Reaction::new(
                    ReactionKind::PowerCombo {
                        c0,
                        lambda,
                        q,
                        mu,
                        r: p + dr,
                    },
                    p,
                )
                .unwrap()
            }),
        (p, 0.2f64..5.0, 0.0f64..2.0, 0.1f64..2.0).prop_map(|(p, lambda, da, dr)| {
            let kind = ReactionKind::Exponential {
                lambda,
                alpha: p - 1.0 + da,
                r: p + dr,
            };
            Reaction::new(kind, p).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_is_nonnegative_and_p_homogeneous(
        p in 1.2f64..4.0,
        t in -3.0f64..3.0,
        u in prop::collection::vec(-2.0f64..2.0, 12),
    ) {
        let (_, k) = setup(12, p);
        let e = gagliardo_energy(&k, &u).unwrap();
        prop_assert!(e >= 0.0);
        let tu: Vec<f64> = u.iter().map(|x| t * x).collect();
        let et = gagliardo_energy(&k, &tu).unwrap();
        let want = t.abs().powf(p) * e;
        prop_assert!((et - want).abs() <= 1e-12 * want.max(f64::MIN_POSITIVE) + 1e-300);
    }

    #[test]
    fn absolute_value_does_not_raise_energy(
        p in 1.2f64..4.0,
        u in prop::collection::vec(-2.0f64..2.0, 12),
    ) {
        let (_, k) = setup(12, p);
        let abs: Vec<f64> = u.iter().map(|x| x.abs()).collect();
        let (e, ea) = (gagliardo_energy(&k, &u).unwrap(), gagliardo_energy(&k, &abs).unwrap());
        prop_assert!(ea <= e * (1.0 + 1e-12));
    }

    #[test]
    fn operator_matches_finite_differences_for_p_at_least_two(
        p in 2.0f64..4.0,
        u in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        let (_, k) = setup(10, p);
        let g = apply_operator(&k, &u).unwrap();
        let scale = g.sup_norm().max(1e-8);
        for i in 0..10 {
            let eps = 1e-5;
            let mut a = u.clone();
            a[i] += eps;
            let mut b = u.clone();
            b[i] -= eps;
            let fd = (gagliardo_energy(&k, &a).unwrap() - gagliardo_energy(&k, &b).unwrap()) / (2.0 * eps * p);
            prop_assert!((fd - g.0[i]).abs() <= 1e-6 * scale, "node {}: {} vs {}", i, fd, g.0[i]);
        }
    }

    #[test]
    fn reaction_is_constant_on_the_negative_axis(r in reaction_strategy(), t in -50.0f64..0.0) {
        prop_assert_eq!(eval_f(&r, 0.5, t), eval_f(&r, 0.5, 0.0));
        for k in [1u32, 8] {
            let rk = truncate(&r, k).unwrap();
            prop_assert_eq!(eval_f(&rk, 0.5, t), eval_f(&rk, 0.5, 0.0));
        }
    }

    #[test]
    fn primitive_differentiates_to_reaction(r in reaction_strategy(), t in 0.01f64..3.0, k in 1u32..64) {
        for rr in [r.clone(), truncate(&r, k).unwrap()] {
            let e = 1e-6 * t;
            let fd = (eval_F(&rr, 0.5, t + e) - eval_F(&rr, 0.5, t - e)) / (2.0 * e);
            let f = eval_f(&rr, 0.5, t);
            // Skip the kink of the clamp, where F is only piecewise smooth.
            let kink = rr.truncation().is_some() && {
                let (lo, hi) = (eval_f(&rr, 0.5, t - e), eval_f(&rr, 0.5, t + e));
                let base = rr.untruncated();
                let raw = |s: f64| eval_f(&base, 0.5, s);
                (lo == raw(t - e)) != (hi == raw(t + e))
            };
            if !kink {
                prop_assert!((fd - f).abs() <= 1e-6 * f.abs().max(1.0), "t = {}: {} vs {}", t, fd, f);
            }
        }
    }

    #[test]
    fn asymptotes_bracket_the_value_at_one(r in reaction_strategy()) {
        // Only meaningful when f(t)/t^{p-1} is nonincreasing.
        if let ReactionKind::PowerCombo { c0, q, r: rr, .. } = r.kind() {
            prop_assume!(*c0 >= 0.0 && *q <= r.p() && r.p() <= *rr);
        }
        let a0 = asymptote_zero(&r, 0.5).unwrap();
        let ainf = asymptote_infty(&r, 0.5).unwrap();
        let f1 = ExtendedReal::Finite(eval_f(&r, 0.5, 1.0));
        prop_assert!(a0 >= f1, "a0 = {} < f(1) = {}", a0, f1);
        prop_assert!(f1 >= ainf, "f(1) = {} < a_inf = {}", f1, ainf);
    }

    #[test]
    fn truncation_chain_is_monotone(r in reaction_strategy(), t in 0.0f64..20.0) {
        let mut prev = f64::INFINITY;
        let mut prev_inf = ExtendedReal::PlusInfinity;
        for j in 0..=10 {
            let rk = truncate(&r, 1 << j).unwrap();
            let fk = eval_f(&rk, 0.5, t);
            prop_assert!(fk <= prev && fk >= eval_f(&r, 0.5, t));
            prev = fk;
            let ak = asymptote_infty(&rk, 0.5).unwrap();
            prop_assert!(ak <= prev_inf);
            prev_inf = ak;
        }
        let ainf = asymptote_infty(&r, 0.5).unwrap();
        let k_max = -(1024.0f64);
        prop_assert_eq!(prev_inf, ainf.max_finite(k_max));
    }

    #[test]
    fn small_argument_lower_bound(r in reaction_strategy(), delta in 0.05f64..3.0, frac in 0.0f64..1.0) {
        // Sup over [0, δ] of the negative part of f(t)/t^{p-1}, sampled densely.
        let p = r.p();
        let c_delta = (1..=400)
            .map(|j| {
                let t = delta * j as f64 / 400.0;
                (-eval_f(&r, 0.5, t) / t.powf(p - 1.0)).max(0.0)
            })
            .fold(0.0f64, f64::max)
            .max(eval_f(&r, 0.5, delta).abs() / delta.powf(p - 1.0));
        let t = delta * frac.max(1e-3);
        prop_assert!(eval_f(&r, 0.5, t) >= -c_delta * t.powf(p - 1.0) * (1.0 + 1e-9));
    }
}

#[test]
fn asymptotic_weights_follow_the_reaction_family() {
    let g = build_grid(0.0, 1.0, 8).unwrap();
    let sub = Reaction::logistic(2.0, 1.5, 4.0, 2.0).unwrap();
    assert!(weights_zero(&sub, &g)
        .unwrap()
        .iter()
        .all(|a| *a == ExtendedReal::PlusInfinity));
    let lin = Reaction::logistic(2.0, 2.0, 4.0, 2.0).unwrap();
    assert!(weights_zero(&lin, &g)
        .unwrap()
        .iter()
        .all(|a| *a == ExtendedReal::Finite(2.0)));
    assert!(weights_infty(&lin, &g)
        .unwrap()
        .iter()
        .all(|a| *a == ExtendedReal::MinusInfinity));
    let k4 = truncate(&lin, 4).unwrap();
    assert!(weights_infty(&k4, &g)
        .unwrap()
        .iter()
        .all(|a| *a == ExtendedReal::Finite(-4.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn eigenfunction_is_positive_and_aligned_with_dense_oracle(
        a in prop::collection::vec(-15.0f64..15.0, 24),
    ) {
        let (g, k) = setup(24, 2.0);
        let ext: Vec<ExtendedReal> = a.iter().map(|&x| ExtendedReal::Finite(x)).collect();
        let got = principal_eigenpair(&k, &g, &ext, &EigenOptions::default()).unwrap();
        let want = dense_oracle_p2(&k, &g, &a).unwrap();
        prop_assert!(got.v.0.iter().all(|&x| x > 0.0));
        let (l1, l2) = (got.lambda.expect_finite(), want.lambda.expect_finite());
        prop_assert!(((l1 - l2) / l2).abs() < 1e-8);
        let h = g.cell_measure();
        let dot: f64 = got.v.0.iter().zip(&want.v.0).map(|(x, y)| x * y).sum::<f64>() * h;
        prop_assert!(dot.abs() > 1.0 - 1e-6, "alignment {}", dot);
    }

    #[test]
    fn rayleigh_quotient_is_scale_invariant(
        p in 1.5f64..3.0,
        c in 0.01f64..50.0,
        v in prop::collection::vec(0.05f64..1.0, 16),
    ) {
        let (g, k) = setup(16, p);
        let a = constant_weight(16, 1.5);
        let r1 = rayleigh_quotient(&k, &g, &a, &v).unwrap();
        let cv: Vec<f64> = v.iter().map(|x| c * x).collect();
        let r2 = rayleigh_quotient(&k, &g, &a, &cv).unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-10 * r1.abs().max(1.0));
    }
}

#[test]
fn energy_matrix_reproduces_the_quadratic_energy() {
    let (_, k) = setup(20, 2.0);
    let m = energy_matrix_p2(&k).unwrap();
    let u: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let quad: f64 = (0..20)
        .map(|i| (0..20).map(|j| u[i] * m[(i, j)] * u[j]).sum::<f64>())
        .sum();
    let e = gagliardo_energy(&k, &u).unwrap();
    assert!((quad - e).abs() <= 1e-12 * e);
}

fn lambda1_zero(g: &Grid, k: &Kernel) -> f64 {
    principal_eigenpair(k, g, &constant_weight(g.n(), 0.0), &EigenOptions::default())
        .unwrap()
        .lambda
        .expect_finite()
}

/// Positive-part replacement along a descent trajectory, the minimum
/// principle and the comparison between consecutive truncation levels.
#[test]
fn descent_trajectory_invariants() {
    let (g, k) = setup(48, 2.0);
    let l0 = lambda1_zero(&g, &k);
    let r = Reaction::logistic(1.8 * l0, 2.0, 4.0, 2.0).unwrap();
    let opts = SolveOptions::default();
    for level in [1u32, 4] {
        let rk = truncate(&r, level).unwrap();
        // Start with negative entries so the positive part actually acts.
        let start: Vec<f64> = (0..48)
            .map(|i| if i % 5 == 0 { -0.3 } else { 0.5 })
            .collect();
        let mut iterates = Vec::new();
        let mut obs = |it: usize, u: &[f64], _f: f64| {
            if it % 3 == 0 {
                iterates.push(u.to_vec());
            }
        };
        let res = minimize_truncated_observed(&k, &g, &rk, &opts, &start, &mut obs).unwrap();
        assert!(res.converged);
        assert!(res.min_u >= -1e-10, "min before cleanup {}", res.min_u);
        assert!(iterates.len() > 3);
        for u in &iterates {
            let plus: Vec<f64> = u.iter().map(|x| x.max(0.0)).collect();
            let (a, b) = (
                phi(&k, &g, &rk, &plus).unwrap(),
                phi(&k, &g, &rk, u).unwrap(),
            );
            assert!(
                a <= b + 1e-12 * b.abs().max(1.0),
                "phi(u+) = {a} > phi(u) = {b}"
            );
        }
        for pair in iterates.windows(2) {
            let slack = submodular_comparison_slack(&k, &g, &r, level, &pair[0], &pair[1]).unwrap();
            assert!(slack >= -1e-10, "slack {slack}");
        }
    }
}

#[test]
fn converged_solution_satisfies_residual_duality_and_clamp_inactivity() {
    let (g, k) = setup(64, 2.0);
    let r = Reaction::logistic(25.0, 2.0, 4.0, 2.0).unwrap();
    let opts = SolveOptions::default();
    let res = solve(&k, &g, &r, &opts, &EigenOptions::default()).unwrap();
    assert!(res.converged && res.classification == Classification::Positive);
    let u = &res.u.0;
    let defect = weak_defect(&k, &g, &r, u).unwrap();
    let h = g.cell_measure();
    let pairing: f64 = defect.0.iter().zip(u).map(|(d, x)| d * x).sum::<f64>() * h;
    let e = gagliardo_energy(&k, u).unwrap();
    assert!(
        pairing.abs() <= opts.tol * (1.0 + e),
        "pairing {pairing:e}, E = {e}"
    );
    let rk = truncate(&r, res.k_final).unwrap();
    let nodal = NodalReaction::new(&rk, &g);
    assert!((0..64).all(|i| nodal.f(i, u[i]) == eval_f(&r, g.nodes()[i], u[i])));
}

#[test]
fn solution_sup_norm_is_grid_stable() {
    let r = Reaction::logistic(25.0, 2.0, 4.0, 2.0).unwrap();
    let sup: Vec<f64> = [64usize, 128]
        .iter()
        .map(|&n| {
            let (g, k) = setup(n, 2.0);
            solve(
                &k,
                &g,
                &r,
                &SolveOptions::default(),
                &EigenOptions::default(),
            )
            .unwrap()
            .u
            .sup_norm()
        })
        .collect();
    assert!((sup[1] / sup[0] - 1.0).abs() < 0.05, "{sup:?}");
}

#[test]
fn uniqueness_degenerate_cases() {
    let (g, k) = setup(32, 2.0);
    let l0 = lambda1_zero(&g, &k);
    let solvable = Reaction::logistic(2.0 * l0, 2.0, 4.0, 2.0).unwrap();
    let one = multi_start_uniqueness(&k, &g, &solvable, 1, 1e-6, &SolveOptions::default()).unwrap();
    assert_eq!(one.max_pairwise_dist, 0.0);
    let below = Reaction::logistic(0.5 * l0, 2.0, 4.0, 2.0).unwrap();
    let zero = multi_start_uniqueness(&k, &g, &below, 4, 1e-6, &SolveOptions::default()).unwrap();
    assert!(
        zero.sup_norms.iter().all(|&s| s < 1e-8),
        "{:?}",
        zero.sup_norms
    );
}
