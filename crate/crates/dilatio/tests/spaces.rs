use dilatio::dilation::DilationStructure;
use dilatio::scalar::{euclid, max_abs_diff};
use dilatio::spaces::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

type G = dilatio::CarnotGroup;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

#[test]
fn heisenberg_products() {
    let h = G::heisenberg();
    assert_eq!(
        h.multiply(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]),
        vec![1.0, 1.0, 0.5]
    );
    let g = [0.3, -1.2, 2.0];
    assert_eq!(h.multiply(&g, &[0.0; 3]), g.to_vec());
    let inv = h.invert(&[1.0, 2.0, 3.0]);
    assert_eq!(inv, vec![-1.0, -2.0, -3.0]);
    let e = h.multiply(&[1.0, 2.0, 3.0], &inv);
    assert!(e.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn heisenberg_dilations_and_gauge() {
    let h = G::heisenberg();
    assert_eq!(h.dilate(0.5, &[2.0, 2.0, 4.0]), vec![1.0, 1.0, 1.0]);
    assert_eq!(h.dilate(1.0, &[0.1, 0.2, 0.3]), vec![0.1, 0.2, 0.3]);
    assert_eq!(h.gauge_norm(&[1.0, 0.0, 0.0]), 1.0);
    assert!((h.gauge_norm(&[0.0, 0.0, 1.0]) - 2.0).abs() < 1e-15);
    assert_eq!(h.homogeneous_dim(), 4);
}

#[test]
fn dilation_is_a_morphism_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in [G::heisenberg(), G::new(BracketTable::engel()).unwrap()] {
        let n = g.dim();
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let a = rand_vec(&mut rng, n, 2.0);
            let b = rand_vec(&mut rng, n, 2.0);
            let e = rng.gen_range(0.01..3.0);
            let lhs = g.dilate(e, &g.multiply(&a, &b));
            let rhs = g.multiply(&g.dilate(e, &a), &g.dilate(e, &b));
            worst = worst.max(max_abs_diff(&lhs, &rhs));
        }
        assert!(worst < 1e-12, "{worst}");
    }
}

#[test]
fn gauge_is_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for g in [
        G::heisenberg(),
        G::new(BracketTable::engel()).unwrap(),
        G::new(BracketTable::free_step2_rank3()).unwrap(),
    ] {
        for _ in 0..1000 {
            let a = rand_vec(&mut rng, g.dim(), 3.0);
            let e = rng.gen_range(0.001..10.0);
            let lhs = g.gauge_norm(&g.dilate(e, &a));
            let rhs = e * g.gauge_norm(&a);
            assert!((lhs - rhs).abs() <= 1e-13 * rhs.max(1.0));
        }
    }
}

#[test]
fn associativity_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for g in [G::heisenberg(), G::new(BracketTable::engel()).unwrap()] {
        for _ in 0..500 {
            let a = rand_vec(&mut rng, g.dim(), 2.0);
            let b = rand_vec(&mut rng, g.dim(), 2.0);
            let c = rand_vec(&mut rng, g.dim(), 2.0);
            let l = g.multiply(&g.multiply(&a, &b), &c);
            let r = g.multiply(&a, &g.multiply(&b, &c));
            assert!(max_abs_diff(&l, &r) < 1e-12);
        }
    }
}

#[test]
fn engel_product_oracle() {
    // [e0,e1] = e2, [e0,e2] = e3; BCH to third order
    let g = G::new(BracketTable::engel()).unwrap();
    let x = [1.0, 2.0, 0.5, -1.0];
    let y = [-0.5, 1.0, 2.0, 0.25];
    let z = g.multiply(&x, &y);
    let b01 = x[0] * y[1] - x[1] * y[0];
    let b02 = x[0] * y[2] - x[2] * y[0];
    // [x,[x,y]] and [y,[y,x]] in the e3 direction
    let xxy = x[0] * b01;
    let yyx = -y[0] * b01;
    let oracle = [
        x[0] + y[0],
        x[1] + y[1],
        x[2] + y[2] + 0.5 * b01,
        x[3] + y[3] + 0.5 * b02 + (xxy + yyx) / 12.0,
    ];
    assert!(max_abs_diff(&z, &oracle) < 1e-14);
}

#[test]
fn invalid_tables_are_rejected() {
    let grading = BracketTable {
        step: 2,
        dims: vec![2, 1],
        brackets: vec![(0, 1, 1, 1.0)],
    };
    assert!(matches!(
        G::new(grading),
        Err(dilatio::Error::InvalidBrackets(_))
    ));
    let ungenerated = BracketTable {
        step: 2,
        dims: vec![2, 2],
        brackets: vec![(0, 1, 2, 1.0)],
    };
    assert!(matches!(
        G::new(ungenerated),
        Err(dilatio::Error::InvalidBrackets(_))
    ));
    let deep = BracketTable {
        step: 4,
        dims: vec![2, 1, 1, 1],
        brackets: vec![],
    };
    assert!(matches!(G::new(deep), Err(dilatio::Error::Unsupported(_))));
    let json = r#"{"step":2,"dims":[2,1],"brackets":[[0,1,2,1.0]]}"#;
    let t = BracketTable::from_json(json).unwrap();
    assert_eq!(t, BracketTable::heisenberg());
    assert!(
        "carnot {\"step\":2,\"dims\":[2,1],\"brackets\":[[0,1,0,1.0]]}"
            .parse::<SpaceSpec>()
            .unwrap()
            .build::<f64>()
            .is_err()
    );
}

#[test]
fn cc_upper_bound_word_reproduces_the_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for g in [
        G::heisenberg(),
        G::new(BracketTable::engel()).unwrap(),
        G::new(BracketTable::free_step2_rank3()).unwrap(),
    ] {
        let mut ratio_min = f64::INFINITY;
        for _ in 0..200 {
            let p = rand_vec(&mut rng, g.dim(), 1.5);
            let (len, word) = g.cc_decomposition(&p);
            let mut acc = vec![0.0; g.dim()];
            let mut total = 0.0;
            for w in &word {
                acc = g.multiply(&acc, &g.horizontal(w));
                total += dilatio::scalar::norm(w);
            }
            assert!(max_abs_diff(&acc, &p) < 1e-10);
            assert!((total - len).abs() < 1e-10);
            ratio_min = ratio_min.min(len / g.gauge_norm(&p));
        }
        assert!(ratio_min > 0.3, "{ratio_min}");
    }
    let h = G::heisenberg();
    assert!((h.cc_norm_upper(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    assert!((h.cc_norm_upper(&[0.0, 0.0, 1.0]) - 4.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn gauge_triangle_inequality(
        a in prop::collection::vec(-2.0f64..2.0, 6),
        b in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let h = G::heisenberg();
        let (x, y) = (&a[..3], &b[..3]);
        prop_assert!(h.gauge_norm(&h.multiply(x, y)) <= h.gauge_norm(x) + h.gauge_norm(y) + 1e-12);
        let f = G::new(BracketTable::free_step2_rank3()).unwrap();
        prop_assert!(f.gauge_norm(&f.multiply(&a, &b)) <= f.gauge_norm(&a) + f.gauge_norm(&b) + 1e-12);
        let e = G::new(BracketTable::engel()).unwrap();
        let (x, y) = (&a[..4], &b[..4]);
        prop_assert!(e.gauge_norm(&e.multiply(x, y)) <= e.gauge_norm(x) + e.gauge_norm(y) + 1e-12);
    }

    #[test]
    fn carnot_handles_are_conical(
        x in prop::collection::vec(-1.0f64..1.0, 3),
        u in prop::collection::vec(-1.0f64..1.0, 3),
        v in prop::collection::vec(-1.0f64..1.0, 3),
        e in 0.125f64..1.0,
    ) {
        let s = CarnotSpace::heisenberg();
        let a = s.dil(&x, e, &u).unwrap();
        let b = s.dil(&x, e, &v).unwrap();
        prop_assert!((s.dist(&a, &b) / e - s.dist(&u, &v)).abs() < 1e-12);
    }

    #[test]
    fn nonstandard_dilations_are_similarities(
        x in prop::collection::vec(-1.0f64..1.0, 2),
        u in prop::collection::vec(-1.0f64..1.0, 2),
        v in prop::collection::vec(-1.0f64..1.0, 2),
        e in 0.01f64..4.0,
        theta in -3.0f64..3.0,
    ) {
        let s = NonstandardPlane::new(theta);
        let a = s.dil(&x, e, &u).unwrap();
        let b = s.dil(&x, e, &v).unwrap();
        prop_assert!((euclid(&a, &b) / e - euclid(&u, &v)).abs() < 1e-12);
    }

    #[test]
    fn snowflake_is_conical(
        x in prop::collection::vec(-1.0f64..1.0, 2),
        u in prop::collection::vec(-1.0f64..1.0, 2),
        v in prop::collection::vec(-1.0f64..1.0, 2),
        e in 0.125f64..1.0,
    ) {
        let s = Snowflake::new(Euclidean::<f64>::new(2), 0.5).unwrap();
        let a = s.dil(&x, e, &u).unwrap();
        let b = s.dil(&x, e, &v).unwrap();
        prop_assert!((s.dist(&a, &b) / e - s.dist(&u, &v)).abs() < 1e-12);
    }
}

#[test]
fn construct_space_examples() {
    let e: dilatio::Space = "euclidean 3".parse::<SpaceSpec>().unwrap().build().unwrap();
    assert_eq!(e.dim(), 3);
    assert_eq!(e.dist(&[0.0, 0.0, 0.0], &[1.0, 2.0, 2.0]), 3.0);
    assert_eq!(
        e.dil(&[1.0, 1.0, 1.0], 0.5, &[3.0, 1.0, -1.0]).unwrap(),
        vec![2.0, 1.0, 0.0]
    );

    let s: dilatio::Space = "snowflake(euclidean 2, 1/2)"
        .parse::<SpaceSpec>()
        .unwrap()
        .build()
        .unwrap();
    assert_eq!(s.dist(&[0.0, 0.0], &[4.0, 0.0]), 2.0);
    let p = s.dil(&[1.0, 1.0], 0.5, &[3.0, 5.0]).unwrap();
    assert!(max_abs_diff(&p, &[1.5, 2.0]) < 1e-15);

    let h: dilatio::Space = "carnot heisenberg"
        .parse::<SpaceSpec>()
        .unwrap()
        .build()
        .unwrap();
    assert_eq!(h.dim(), 3);
    assert_eq!(h.name(), "carnot(heisenberg)");
    for text in [
        "nonstandard 1",
        "riemannian sphere",
        "riemannian flat 2",
        "sphere",
        "carnot engel",
    ] {
        let spec: SpaceSpec = text.parse().unwrap();
        assert_eq!(spec.to_string(), text);
        assert!(spec.build::<f64>().is_ok());
    }
    assert!("torus 2".parse::<SpaceSpec>().is_err());
    assert!("snowflake(euclidean 2, 1.5)"
        .parse::<SpaceSpec>()
        .unwrap()
        .build::<f64>()
        .is_err());
}

#[test]
fn flat_exponential() {
    let c = NumericExpChart::new(FlatTensor { dim: 2 }, f64::INFINITY);
    let p = c.exp(&[1.0, 2.0], &[0.5, -3.0]);
    assert!(max_abs_diff(&p, &[1.5, -1.0]) < 1e-14);
    let s = ExpSpace::new(c);
    let q = s.dil(&[1.0, 2.0], 0.25, &[5.0, 6.0]).unwrap();
    assert!(max_abs_diff(&q, &[2.0, 3.0]) < 1e-12);
}

#[test]
fn sphere_exponential_reaches_the_equator() {
    let num = NumericExpChart::new(StereographicSphereTensor, 2.5);
    let v = [PI / 4.0, 0.0]; // |v|_g = 2 |v| at the pole
    let p = num.exp(&[0.0, 0.0], &v);
    assert!((sphere_distance(&[0.0, 0.0], &p) - PI / 2.0).abs() < 1e-6);
    let exact = ExpChart::<f64>::exp(&SphereChart::default(), &[0.0, 0.0], &v);
    assert!(max_abs_diff(&exact, &[1.0, 0.0]) < 1e-15);
    assert!(max_abs_diff(&p, &exact) < 1e-6);
}

#[test]
fn log_inverts_exp() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let num = NumericExpChart::new(StereographicSphereTensor, 2.5);
    let exact = SphereChart::default();
    let mut worst_num = 0.0f64;
    let mut worst_exact = 0.0f64;
    for _ in 0..100 {
        let x = rand_vec(&mut rng, 2, 0.8);
        let v = rand_vec(&mut rng, 2, 0.5);
        let y = num.exp(&x, &v);
        worst_num = worst_num.max(max_abs_diff(&num.log(&x, &y).unwrap(), &v));
        let y = exact.exp(&x, &v);
        worst_exact = worst_exact.max(max_abs_diff(&exact.log(&x, &y).unwrap(), &v));
    }
    assert!(worst_num < 1e-8, "{worst_num}");
    assert!(worst_exact < 1e-12, "{worst_exact}");
}

#[test]
fn riemannian_dilations() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let num = ExpSpace::new(NumericExpChart::new(StereographicSphereTensor, 2.5));
    let exact = ExpSpace::sphere();
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let x = rand_vec(&mut rng, 2, 0.5);
        let y = rand_vec(&mut rng, 2, 0.5);
        assert!(max_abs_diff(&num.dil(&x, 1.0, &y).unwrap(), &y) < 1e-8);
        let (e, m) = (rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0));
        let a = num.dil(&x, e, &num.dil(&x, m, &y).unwrap()).unwrap();
        let b = num.dil(&x, e * m, &y).unwrap();
        worst = worst.max(max_abs_diff(&a, &b));
        let c = exact.dil(&x, e * m, &y).unwrap();
        assert!(max_abs_diff(&b, &c) < 1e-5);
        assert!((num.dist(&x, &y) - exact.dist(&x, &y)).abs() < 1e-6);
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn numeric_christoffel_matches_closed_form() {
    struct Fd;
    impl MetricTensorField<f64> for Fd {
        fn name(&self) -> String {
            "fd".into()
        }
        fn dim(&self) -> usize {
            2
        }
        fn metric(&self, x: &[f64]) -> Vec<Vec<f64>> {
            StereographicSphereTensor.metric(x)
        }
    }
    let x = [0.3, -0.7];
    let a = Fd.christoffel(&x);
    let b = StereographicSphereTensor.christoffel(&x);
    for k in 0..2 {
        assert!(max_abs_diff(&a[k].concat(), &b[k].concat()) < 1e-8);
    }
}
