use std::sync::Arc;

use bkm_core::atlas::{extend, luxemburg, plus_convexity_check, ManifoldPoint};
use bkm_core::exec::Execution;
use bkm_core::geometry::{bkm, bkm_gram, transport, TransportMap};
use bkm_core::gibbs::{center, gibbs_state, regularized_mean, TangentVector};
use bkm_core::operator::{build_model, HermitianOperator, ModelKind, ModelParams};
use bkm_core::perturbation::{klmn, relative_norm, Perturbation};
use bkm_core::sampling::CaseRng;
use bkm_core::suites::{default_models, run_suite, Suite, SuiteConfig};
use proptest::prelude::*;

fn model(kind: ModelKind, dim: usize) -> bkm_core::ModelHamiltonian {
    build_model(kind, dim, &ModelParams::default()).unwrap()
}

fn kinds() -> impl Strategy<Value = ModelKind> {
    prop_oneof![
        Just(ModelKind::HarmonicOscillator),
        Just(ModelKind::DirichletBox)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_norm_is_a_norm(seed: u64, dim in 1usize..8, c in -4.0f64..4.0) {
        let mut rng = CaseRng::new(seed, 0);
        let h = rng.positive_definite(dim, 1.0);
        let x = rng.hermitian(dim);
        let y = rng.hermitian(dim);
        let nx = relative_norm(&x, &h).unwrap();
        let ny = relative_norm(&y, &h).unwrap();
        let ncx = relative_norm(&x.scaled(c), &h).unwrap();
        prop_assert!((ncx - c.abs() * nx).abs() <= 1e-12 * (1.0 + ncx));
        prop_assert!(relative_norm(&(&x + &y), &h).unwrap() <= nx + ny + 1e-12 * (1.0 + nx + ny));
        prop_assert!(nx >= 0.0);
    }

    #[test]
    fn small_perturbations_stay_positive(seed: u64, kind in kinds(), dim in 1usize..16, a in 0.0f64..0.999) {
        let m = model(kind, dim);
        let mut rng = CaseRng::new(seed, 1);
        let x = rng.perturbation(m.h0(), a);
        let p = Perturbation::new(x, &m).unwrap();
        prop_assert!(klmn(&p).min_eigenvalue().unwrap() > 0.0);
    }

    #[test]
    fn mean_is_lambda_independent(seed: u64, dim in 1usize..10, l1 in 0.01f64..0.99, l2 in 0.01f64..0.99) {
        let mut rng = CaseRng::new(seed, 2);
        let s = gibbs_state(&rng.hermitian(dim)).unwrap();
        let y = rng.hermitian(dim);
        let a = regularized_mean(&s, &y, l1).unwrap();
        let b = regularized_mean(&s, &y, l2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn gauge_invariance(seed: u64, dim in 1usize..10, alpha in -20.0f64..20.0) {
        let mut rng = CaseRng::new(seed, 3);
        let h = rng.hermitian(dim);
        let s = gibbs_state(&h).unwrap();
        let t = gibbs_state(&h.shifted(alpha)).unwrap();
        prop_assert!(s.rho().frobenius_distance(t.rho()) <= 1e-12);
        prop_assert!((t.psi() - (s.psi() - alpha)).abs() <= 1e-12 * (1.0 + alpha.abs()));
    }

    #[test]
    fn bkm_symmetric_and_positive(seed: u64, dim in 2usize..8) {
        let mut rng = CaseRng::new(seed, 4);
        let s = gibbs_state(&rng.hermitian(dim)).unwrap();
        let u = center(&s, &rng.hermitian(dim)).unwrap();
        let v = center(&s, &rng.hermitian(dim)).unwrap();
        let guv = bkm(&s, &u, &v).unwrap();
        let gvu = bkm(&s, &v, &u).unwrap();
        let guu = bkm(&s, &u, &u).unwrap();
        let gvv = bkm(&s, &v, &v).unwrap();
        prop_assert!((guv - gvu).abs() <= 1e-12 * (guu + gvv));
        prop_assert!(guu > 0.0);
        // Cauchy–Schwarz
        prop_assert!(guv * guv <= guu * gvv * (1.0 + 1e-12));
    }

    #[test]
    fn gram_of_independent_basis_is_positive(seed: u64, dim in 2usize..6, k in 1usize..4) {
        let mut rng = CaseRng::new(seed, 5);
        let s = gibbs_state(&rng.hermitian(dim)).unwrap();
        let basis: Vec<TangentVector> = (0..k).map(|_| center(&s, &rng.hermitian(dim)).unwrap()).collect();
        let g = bkm_gram(&s, &basis).unwrap();
        prop_assert!(g.min_eigenvalue.unwrap() > 0.0);
    }

    #[test]
    fn transport_is_affine(seed: u64, dim in 1usize..8, l in 0.0f64..1.0) {
        let mut rng = CaseRng::new(seed, 6);
        let a = gibbs_state(&rng.hermitian(dim)).unwrap();
        let b = gibbs_state(&rng.hermitian(dim)).unwrap();
        let u = center(&a, &rng.hermitian(dim)).unwrap();
        let v = center(&a, &rng.hermitian(dim)).unwrap();
        let map = TransportMap::new(a, b).unwrap();
        let lhs = transport(&map, &TangentVector::combine(l, &u, 1.0 - l, &v)).unwrap();
        let rhs = TangentVector::combine(l, &transport(&map, &u).unwrap(), 1.0 - l, &transport(&map, &v).unwrap());
        let scale = 1.0 + u.centered.frobenius_norm() + v.centered.frobenius_norm();
        prop_assert!(lhs.centered.frobenius_distance(&rhs.centered) <= 1e-12 * scale);
    }

    #[test]
    fn mixtures_of_one_step_chains_are_admitted(seed: u64, dim in 1usize..8, beta0 in 0.0f64..0.7, l in 0.0f64..1.0) {
        let m = Arc::new(model(ModelKind::HarmonicOscillator, dim).with_beta0(beta0).unwrap());
        let mut rng = CaseRng::new(seed, 7);
        let o = ManifoldPoint::origin(m.clone());
        let (ta, tb) = (rng.uniform(0.0, 0.95) * m.radius(), rng.uniform(0.0, 0.95) * m.radius());
        let p = extend(&o, &rng.perturbation(m.h0(), ta)).unwrap();
        let q = extend(&o, &rng.perturbation(m.h0(), tb)).unwrap();
        let r = plus_convexity_check(&p, &q, &[l]).unwrap();
        prop_assert!(!r.falsified);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn luxemburg_is_absolutely_homogeneous(seed: u64, dim in 1usize..6, c in prop_oneof![Just(0.5), Just(2.0), Just(-1.0)]) {
        let m = model(ModelKind::HarmonicOscillator, dim);
        let x = CaseRng::new(seed, 8).hermitian(dim);
        let tol = 1e-8;
        let a = luxemburg(&m, &x, tol).unwrap().value;
        let b = luxemburg(&m, &x.scaled(c), tol).unwrap().value;
        prop_assert!((b - c.abs() * a).abs() <= 2.0 * tol * c.abs().max(1.0));
    }
}

#[test]
fn positivity_gate_thousand_per_dim() {
    for (i, &dim) in [2usize, 4, 8, 16].iter().enumerate() {
        let m = model(ModelKind::HarmonicOscillator, dim);
        for case in 0..1000u64 {
            let mut rng = CaseRng::new(99, (i as u64) << 20 | case);
            let a = rng.uniform(0.0, 0.999);
            let p = Perturbation::new(rng.perturbation(m.h0(), a), &m).unwrap();
            assert!(
                klmn(&p).min_eigenvalue().unwrap() > 0.0,
                "dim {dim} case {case}"
            );
        }
    }
}

#[test]
fn reports_do_not_depend_on_execution_mode() {
    let models = default_models();
    for suite in [Suite::Lemma5, Suite::Thm8Duhamel, Suite::Thm14Convex] {
        let seq = SuiteConfig {
            seed: 3,
            cases: Some(24),
            exec: Execution::Sequential,
            ..SuiteConfig::default()
        };
        let par = SuiteConfig {
            exec: Execution::Parallel,
            ..seq.clone()
        };
        let a = run_suite(suite, &models, &seq).unwrap().to_json();
        let b = run_suite(suite, &models, &par).unwrap().to_json();
        assert_eq!(a, b, "{suite}");
    }
}

#[test]
fn identity_gauge_leaves_state_fixed() {
    let m = model(ModelKind::DirichletBox, 6);
    let s = gibbs_state(m.h0()).unwrap();
    let shifted = gibbs_state(&(m.h0() + &HermitianOperator::identity(6).scaled(3.5))).unwrap();
    assert!(s.rho().frobenius_distance(shifted.rho()) < 1e-12);
}
