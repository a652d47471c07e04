use laglab::ambient::AlmostCyModel;
use laglab::connection::w_field;
use laglab::curvature::{riemann_field_raw, riemann_quad_raw, sectional};
use laglab::graph::GraphLagrangian;
use laglab::mirror::{herm_sectional, random_point, random_tangent, HermBase};
use laglab::torus::{PeriodicGrid, Phase, ScalarField, TrigPolynomial, TrigTerm};
use proptest::prelude::*;
use rand::SeedableRng;

fn term(max_mode: i64, amp: f64) -> impl Strategy<Value = TrigTerm> {
    (
        -amp..amp,
        prop::collection::vec(-max_mode..=max_mode, 2),
        prop::bool::ANY,
    )
        .prop_map(|(c, k, s)| TrigTerm::new(c, k, if s { Phase::Sin } else { Phase::Cos }))
}

fn poly(max_mode: i64, amp: f64) -> impl Strategy<Value = TrigPolynomial> {
    prop::collection::vec(term(max_mode, amp), 1..4).prop_map(TrigPolynomial::new)
}

/// Potentials with `Σ |c||k|² ≤ 0.3`, which keeps the graph positive.
fn potential() -> impl Strategy<Value = TrigPolynomial> {
    poly(3, 1.0).prop_map(|p| {
        let w: f64 = p
            .terms
            .iter()
            .map(|t| t.coefficient.abs() * t.wavevector.iter().map(|k| (k * k) as f64).sum::<f64>())
            .sum();
        if w > 0.3 {
            p.scaled(0.3 / w)
        } else {
            p
        }
    })
}

fn grid() -> PeriodicGrid {
    PeriodicGrid::standard(2, 32).unwrap()
}

fn model(twisted: bool) -> AlmostCyModel {
    if twisted {
        AlmostCyModel::twisted(2, 0.1, 1).unwrap()
    } else {
        AlmostCyModel::flat(2)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval(p in poly(6, 2.0)) {
        let f = p.sample(&grid()).unwrap();
        let energy: f64 = f.spectrum().iter().map(|c| c.norm_sqr()).sum();
        let mean_square = (&f * &f).mean();
        prop_assert!((energy - mean_square).abs() <= 1e-12 * mean_square.max(1.0));
    }

    #[test]
    fn derivatives_integrate_to_zero(p in poly(6, 2.0), axis in 0usize..2) {
        let f = p.sample(&grid()).unwrap();
        prop_assert!(f.partial(axis).integrate().abs() < 1e-11);
    }

    #[test]
    fn normalized_functions_have_zero_mean(phi in potential(), h in poly(3, 1.0), tw in prop::bool::ANY) {
        let g = grid();
        let gamma = GraphLagrangian::from_potential(&model(tw), &g, &phi).unwrap();
        let hn = gamma.tangent(&h).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        prop_assert!(gamma.pairing(hn.field(), &one).abs() < 1e-12);
        prop_assert!(gamma.lagang_residual() < 1e-10);
    }

    #[test]
    fn w_field_is_linear(phi in potential(), a in poly(3, 1.0), b in poly(3, 1.0), s in -2.0f64..2.0) {
        let g = grid();
        let gamma = GraphLagrangian::from_potential(&model(true), &g, &phi).unwrap();
        let (a, b) = (a.sample(&g).unwrap(), b.sample(&g).unwrap());
        let combined = w_field(&gamma, &(&a + &b.scale(s))).unwrap();
        let wa = w_field(&gamma, &a).unwrap();
        let wb = w_field(&gamma, &b).unwrap();
        for i in 0..2 {
            let expected = &wa[i] + &wb[i].scale(s);
            prop_assert!((&combined[i] - &expected).max_abs() < 1e-10);
        }
    }

    #[test]
    fn quadruple_symmetries(
        phi in potential(),
        fs in prop::collection::vec(poly(3, 1.0), 4),
        tw in prop::bool::ANY,
    ) {
        let g = grid();
        let gamma = GraphLagrangian::from_potential(&model(tw), &g, &phi).unwrap();
        let f: Vec<ScalarField> = fs.iter().map(|p| p.sample(&g).unwrap()).collect();
        let q = |a: usize, b: usize, c: usize, d: usize| riemann_quad_raw(&gamma, &f[a], &f[b], &f[c], &f[d]);
        let base = q(0, 1, 2, 3);
        let tol = 1e-10 * (1.0 + base.abs());
        prop_assert!((base + q(1, 0, 2, 3)).abs() < tol);
        prop_assert!((base + q(0, 1, 3, 2)).abs() < tol);
        prop_assert!((base - q(2, 3, 0, 1)).abs() < tol);
        let bianchi = base + q(1, 2, 0, 3) + q(2, 0, 1, 3);
        prop_assert!(bianchi.abs() < tol);
    }

    #[test]
    fn curvature_ignores_constants(phi in potential(), fs in prop::collection::vec(poly(3, 1.0), 3), c in -5.0f64..5.0) {
        let g = grid();
        let gamma = GraphLagrangian::from_potential(&model(true), &g, &phi).unwrap();
        let f: Vec<ScalarField> = fs.iter().map(|p| p.sample(&g).unwrap()).collect();
        let r = riemann_field_raw(&gamma, &f[0], &f[1], &f[2]);
        let shifted = riemann_field_raw(&gamma, &f[0].add_constant(c), &f[1], &f[2].add_constant(-c));
        prop_assert!((&r - &shifted).max_abs() < 1e-11);
    }

    #[test]
    fn sectional_nonpositive(phi in potential(), a in poly(3, 1.0), b in poly(3, 1.0), tw in prop::bool::ANY) {
        let g = grid();
        let gamma = GraphLagrangian::from_potential(&model(tw), &g, &phi).unwrap();
        let (h, k) = (gamma.tangent(&a).unwrap(), gamma.tangent(&b).unwrap());
        if let Ok(s) = sectional(&gamma, &h, &k) {
            prop_assert!(s.value <= 1e-10);
        }
    }

    #[test]
    fn herm_sectional_nonpositive(seed in any::<u64>(), size in 2usize..4, points in 1usize..4) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = random_point(&mut rng, HermBase::new(vec![1.0; points]).unwrap(), size);
        let x = random_tangent(&mut rng, points, size);
        let y = random_tangent(&mut rng, points, size);
        prop_assert!(herm_sectional(&h, &x, &y).unwrap() <= 1e-12);
    }
}
