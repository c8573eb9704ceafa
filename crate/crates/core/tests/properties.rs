mod support;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rkadapt::adapt::{free_adapt, AdaptationRequest, AdaptationStatus};
use rkadapt::linprog::{self, LpStatus};
use rkadapt::order::{assemble, degrees_of_freedom, satisfied_order, MAX_ORDER};
use rkadapt::problems::Bounds;
use rkadapt::stability::{perturbation_bound_check, stability_function, verify_convex_containment};
use rkadapt::tableau::{builtin, ButcherTableau, Method};

fn method() -> impl Strategy<Value = Method> {
    proptest::sample::select(Method::ALL.to_vec())
}

fn z() -> impl Strategy<Value = Complex64> {
    (-6.0..0.5f64, -4.0..4.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

/// `b` shifted by a zero-sum perturbation.
fn shifted(t: &ButcherTableau, noise: &[f64]) -> DVector<f64> {
    let s = t.stages();
    let d = DVector::from_fn(s, |i, _| noise[i % noise.len()]);
    let mean = d.sum() / s as f64;
    &t.b + d.add_scalar(-mean)
}

fn normalized(raw: &[f64]) -> DVector<f64> {
    let sum: f64 = raw.iter().sum();
    DVector::from_iterator(raw.len(), raw.iter().map(|v| v / sum))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn convex_combination_stays_in_common_region(
        m in method(),
        noise in prop::collection::vec(-0.2..0.2f64, 1..10),
        g in prop::collection::vec(0.01..1.0f64, 2..=2),
        z in z(),
    ) {
        let t = builtin(m);
        let cols = DMatrix::from_columns(&[t.b.clone(), shifted(&t, &noise)]);
        let rep = verify_convex_containment(&t, &cols, &normalized(&g), &[z]);
        prop_assert!(rep.holds(), "{m} at {z}: excess {:e}", rep.max_excess);
    }

    #[test]
    fn perturbation_bound_holds(
        m in method(),
        noise in prop::collection::vec(-0.5..0.5f64, 1..10),
        z in z(),
    ) {
        let t = builtin(m);
        let bt = shifted(&t, &noise);
        if let Some(r) = perturbation_bound_check(&t, &t.b, &bt, z) {
            prop_assert!(r.holds(), "{m} at {z}: {} > {}", r.adapted, r.bound);
        }
    }

    #[test]
    fn stability_function_is_affine_in_weights(
        m in method(),
        n1 in prop::collection::vec(-1.0..1.0f64, 1..10),
        n2 in prop::collection::vec(-1.0..1.0f64, 1..10),
        theta in -2.0..3.0f64,
        z in z(),
    ) {
        let t = builtin(m);
        let (w1, w2) = (shifted(&t, &n1), shifted(&t, &n2));
        let mixed = stability_function(&t, &(&w1 * theta + &w2 * (1.0 - theta)), z);
        let split = stability_function(&t, &w1, z) * theta + stability_function(&t, &w2, z) * (1.0 - theta);
        prop_assume!(mixed.is_finite() && split.is_finite());
        prop_assert!((mixed - split).norm() <= 1e-12 * (1.0 + split.norm()));
    }

    #[test]
    fn simplex_agrees_with_vertex_enumeration(seed in any::<u64>()) {
        let lp = support::random_lp(&mut ChaCha8Rng::seed_from_u64(seed));
        let oracle = support::vertex_oracle(&lp);
        let sol = linprog::solve(&lp).unwrap();
        prop_assert_eq!(sol.status, oracle.status);
        if sol.status == LpStatus::Optimal {
            prop_assert!((sol.objective_value - oracle.objective).abs() <= 1e-8);
            prop_assert!(lp.max_violation(&sol.x) <= 1e-9);
        }
    }

    #[test]
    fn free_adaptation_keeps_order_and_bounds(
        m in proptest::sample::select(vec![Method::Ssp33, Method::Rk4, Method::CashKarp, Method::ExtrapolationBe3]),
        p in 1usize..=3,
        f in prop::collection::vec(-6.0..6.0f64, 60),
        u in prop::collection::vec(0.0..1.0f64, 3),
        dt in 0.05..0.5f64,
    ) {
        let t = builtin(m);
        let s = t.stages();
        let f = DMatrix::from_fn(3, s, |i, j| f[i * s + j]);
        let u = DVector::from_vec(u);
        let sys = assemble(&t, p).unwrap();
        let bounds = Bounds::nonnegative(3);
        let req = AdaptationRequest { stage_derivatives: &f, state: &u, dt, bounds: &bounds, order_system: &sys, base_weights: &t.b };
        let r = free_adapt(&req).unwrap();
        match r.status {
            AdaptationStatus::Unmodified => prop_assert_eq!(r.weights, t.b.clone()),
            AdaptationStatus::Adapted => {
                prop_assert!(sys.residual(&r.weights) <= 1e-9);
                prop_assert!(req.update(&r.weights).min() >= -req.tolerance());
                prop_assert!(r.enlargements() <= 10);
            }
            AdaptationStatus::Infeasible => {}
        }
    }
}

#[test]
fn degrees_of_freedom_shrink_with_order() {
    for m in Method::ALL {
        let t = builtin(m);
        let top = t.order.min(MAX_ORDER);
        let dof: Vec<usize> = (1..=top).map(|p| degrees_of_freedom(&t, p).unwrap()).collect();
        assert!(dof.windows(2).all(|w| w[1] <= w[0]), "{m}: {dof:?}");
        assert!(dof[0] < t.stages(), "{m}");
        assert_eq!(satisfied_order(&t, &t.b, 1e-12), top, "{m}");
    }
}
