use dilatio::gh::*;
use dilatio::FiniteMetricSpace;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(xs: &[f64]) -> FiniteMetricSpace {
    FiniteMetricSpace::from_points(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>())
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricSpace {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    FiniteMetricSpace::from_points(&pts)
}

/// Accuracy of a relation given as a bitmask over `n x m` pairs.
fn acc_mask(x: &FiniteMetricSpace, y: &FiniteMetricSpace, mask: u32) -> Option<f64> {
    let (n, m) = (x.len(), y.len());
    let pairs: Vec<(usize, usize)> = (0..n * m)
        .filter(|b| mask & (1 << b) != 0)
        .map(|b| (b / m, b % m))
        .collect();
    let dom: std::collections::BTreeSet<_> = pairs.iter().map(|p| p.0).collect();
    let im: std::collections::BTreeSet<_> = pairs.iter().map(|p| p.1).collect();
    if dom.len() != n || im.len() != m {
        return None;
    }
    let mut a = 0.0f64;
    for &(x1, y1) in &pairs {
        for &(x2, y2) in &pairs {
            a = a.max((y.d(y1, y2) - x.d(x1, x2)).abs());
        }
    }
    Some(a)
}

/// Brute force over every subset of pairs.
fn brute_gh(x: &FiniteMetricSpace, y: &FiniteMetricSpace, forced: Option<(usize, usize)>) -> f64 {
    let total = x.len() * y.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << total) {
        if let Some((a, b)) = forced {
            if mask & (1 << (a * y.len() + b)) == 0 {
                continue;
            }
        }
        if let Some(a) = acc_mask(x, y, mask) {
            best = best.min(a);
        }
    }
    best
}

#[test]
fn stats_of_identity_vanish() {
    let x = line(&[0.0, 1.0, 3.5]);
    let s = relation_stats(&x, &x, &Relation::identity(3)).unwrap();
    assert_eq!((s.accuracy, s.precision, s.resolution), (0.0, 0.0, 0.0));
}

#[test]
fn stats_two_point_example() {
    let x = line(&[0.0, 1.0]);
    let y = line(&[0.0, 2.0]);
    let s = relation_stats(&x, &y, &Relation::from_pairs([(0, 0), (1, 1)])).unwrap();
    assert_eq!(s.accuracy, 1.0);
    assert_eq!(s.resolution, 0.0);
    assert_eq!(s.precision, 0.0);
}

#[test]
fn precision_of_split_point() {
    let x = line(&[0.0]);
    let y = line(&[0.0, 2.0]);
    let s = relation_stats(&x, &y, &Relation::from_pairs([(0, 0), (0, 1)])).unwrap();
    assert_eq!(s.precision, 2.0);
    assert_eq!(s.resolution, 0.0);
}

#[test]
fn empty_relation_is_an_error() {
    let x = line(&[0.0]);
    assert_eq!(
        relation_stats(&x, &x, &Relation::default()),
        Err(dilatio::Error::EmptyRelation)
    );
}

#[test]
fn generalization_trivial_cases() {
    let x = line(&[0.0, 1.0, 2.5]);
    let y = line(&[0.0, 0.5]);
    let rho = Relation::from_pairs([(0, 0), (1, 1), (2, 1)]);
    assert_eq!(bar_generalize(&x, &y, &rho, 0.0, 0.0).unwrap(), rho);
    let full = Relation::full(3, 2);
    assert_eq!(bar_generalize(&x, &y, &full, 0.3, 0.7).unwrap(), full);
}

#[test]
fn generalization_checks_density() {
    let x = line(&[0.0, 1.0, 2.5]);
    let y = line(&[0.0, 0.5]);
    let rho = Relation::from_pairs([(0, 0), (1, 1)]);
    match bar_generalize(&x, &y, &rho, 1.0, 1.0) {
        Err(dilatio::Error::DensityViolation { point, .. }) => assert_eq!(point, "p2"),
        other => panic!("expected density violation, got {other:?}"),
    }
    assert!(bar_generalize(&x, &y, &rho, 1.5, 1.0).is_ok());
}

#[test]
fn gh_small_examples() {
    let a = line(&[0.0, 1.0, 3.0]);
    let b = line(&[10.0, 11.0, 13.0]);
    let r = gh_exact_small(&a, &b, GH_EXACT_CAP).unwrap();
    assert_eq!(r.value, 0.0);
    assert_eq!(r.kind, GhKind::Exact);

    let s = line(&[0.0]);
    let t = line(&[0.0, 2.0]);
    assert_eq!(gh_exact_small(&s, &t, GH_EXACT_CAP).unwrap().value, 2.0);

    let u = line(&[0.0, 1.0]);
    let v = line(&[0.0, 1.2]);
    assert!((gh_exact_small(&u, &v, GH_EXACT_CAP).unwrap().value - 0.2).abs() < 1e-15);
}

#[test]
fn gh_witness_is_a_correspondence_with_matching_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let (n, m) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let x = cloud(&mut rng, n);
        let y = cloud(&mut rng, m);
        let r = gh_exact_small(&x, &y, GH_EXACT_CAP).unwrap();
        assert!(r.witness.is_correspondence(n, m));
        assert_eq!(accuracy(&x, &y, &r.witness).unwrap(), r.value);
        assert!((r.value - brute_gh(&x, &y, None)).abs() < 1e-15);
    }
}

#[test]
fn gh_cap_is_enforced() {
    let x = line(&[0.0, 1.0, 2.0, 3.0]);
    let y = line(&[0.0, 1.0, 2.0, 3.0]);
    assert!(matches!(
        gh_exact_small(&x, &y, GH_EXACT_CAP),
        Err(dilatio::Error::CapExceeded { size: 16, cap: 12 })
    ));
    assert_eq!(
        gh_distance(&x, &y, GH_EXACT_CAP).unwrap().kind,
        GhKind::UpperBound
    );
}

#[test]
fn pointed_examples() {
    let x = line(&[0.0, 1.0, 3.0]);
    assert_eq!(gh_pointed(&x, 1, &x, 1, GH_EXACT_CAP).unwrap().value, 0.0);
    let s = line(&[0.0]);
    let t = line(&[0.0, 2.0]);
    assert_eq!(gh_pointed(&s, 0, &t, 0, GH_EXACT_CAP).unwrap().value, 2.0);
    assert_eq!(gh_pointed(&s, 0, &t, 1, GH_EXACT_CAP).unwrap().value, 2.0);
}

#[test]
fn pointed_dominates_unpointed() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (n, m) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let x = cloud(&mut rng, n);
        let y = cloud(&mut rng, m);
        let (x0, y0) = (rng.gen_range(0..n), rng.gen_range(0..m));
        let p = gh_pointed(&x, x0, &y, y0, GH_EXACT_CAP).unwrap();
        let u = gh_exact_small(&x, &y, GH_EXACT_CAP).unwrap();
        assert!(p.value >= u.value);
        assert!(p.witness.pairs.contains(&(x0, y0)));
        assert!((p.value - brute_gh(&x, &y, Some((x0, y0)))).abs() < 1e-15);
    }
}

#[test]
fn upper_bound_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = cloud(&mut rng, 8);
    assert_eq!(gh_upper_bound(&x, &x).unwrap().value, 0.0);

    let pts: Vec<Vec<f64>> = x.coords.clone().unwrap();
    let mut moved = pts.clone();
    moved[3][0] += 0.05;
    let y = FiniteMetricSpace::from_points(&moved);
    let r = gh_upper_bound(&x, &y).unwrap();
    assert_eq!(r.kind, GhKind::UpperBound);
    assert!(r.value <= 0.1);

    for _ in 0..100 {
        let (n, m) = (rng.gen_range(1..5), rng.gen_range(1..4));
        let (n, m) = if n * m > 12 { (3, 4) } else { (n, m) };
        let a = cloud(&mut rng, n);
        let b = cloud(&mut rng, m);
        let ub = gh_upper_bound(&a, &b).unwrap();
        let ex = gh_exact_small(&a, &b, GH_EXACT_CAP).unwrap();
        assert!(ub.witness.is_correspondence(n, m));
        assert!(ub.value >= ex.value);
    }
}

#[test]
fn gh_result_json_shape() {
    let s = line(&[0.0]);
    let t = line(&[0.0, 2.0]);
    let r = gh_exact_small(&s, &t, GH_EXACT_CAP).unwrap();
    let j = r.to_json(&s, &t);
    assert_eq!(j["value"], 2.0);
    assert_eq!(j["kind"], "exact");
    assert_eq!(j["witness"][0][0], "p0");
    let rel = Relation::from_json(&r.witness.to_json(&s, &t), &s, &t).unwrap();
    assert_eq!(rel, r.witness);
}

#[test]
fn relation_inequalities_that_always_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (eps, mu) = (0.1, 0.1);
    for _ in 0..200 {
        let x = cloud(&mut rng, 5);
        let y = cloud(&mut rng, 5);
        let f: Vec<usize> = (0..5).map(|_| rng.gen_range(0..5)).collect();
        let g: Vec<usize> = (0..5).map(|_| rng.gen_range(0..5)).collect();
        let rho = Relation::from_pairs(
            f.iter()
                .enumerate()
                .map(|(i, &j)| (i, j))
                .chain(g.iter().enumerate().map(|(j, &i)| (i, j))),
        );
        let s = relation_stats(&x, &y, &rho).unwrap();
        assert!(s.resolution <= s.accuracy && s.precision <= s.accuracy);
        let bar = bar_generalize(&x, &y, &rho, eps, mu).unwrap();
        let b = relation_stats(&x, &y, &bar).unwrap();
        let slack = 2.0 * (eps + mu) + 1e-12;
        assert!(b.resolution <= s.accuracy + slack);
        assert!(b.precision <= s.accuracy + slack);
        assert!((b.accuracy - s.accuracy).abs() <= slack);
    }
}

proptest! {
    #[test]
    fn gh_is_symmetric_and_relabel_invariant(
        a in prop::collection::vec(-2.0f64..2.0, 1..4),
        b in prop::collection::vec(-2.0f64..2.0, 1..4),
        shift in -5.0f64..5.0,
    ) {
        let x = line(&a);
        let y = line(&b);
        let xy = gh_exact_small(&x, &y, GH_EXACT_CAP).unwrap().value;
        let yx = gh_exact_small(&y, &x, GH_EXACT_CAP).unwrap().value;
        prop_assert_eq!(xy, yx);
        let mut rev: Vec<f64> = a.iter().rev().map(|v| -v + shift).collect();
        rev.rotate_left(1);
        let z = line(&rev);
        let xz = gh_exact_small(&z, &y, GH_EXACT_CAP).unwrap().value;
        prop_assert!((xz - xy).abs() < 1e-12);
    }

    #[test]
    fn gh_triangle_inequality(
        a in prop::collection::vec(-2.0f64..2.0, 1..4),
        b in prop::collection::vec(-2.0f64..2.0, 1..4),
        c in prop::collection::vec(-2.0f64..2.0, 1..4),
    ) {
        let (x, y, z) = (line(&a), line(&b), line(&c));
        let g = |p: &FiniteMetricSpace, q: &FiniteMetricSpace| gh_exact_small(p, q, GH_EXACT_CAP).unwrap().value;
        prop_assert!(g(&x, &z) <= g(&x, &y) + g(&y, &z) + 1e-9);
    }
}
