use sg_extrema::decimation::{phi_branch, psi_inverse, Sign};
use sg_extrema::eigenfunction::EigenFn;
use sg_extrema::gasket::BoundaryKind;
use sg_extrema::oracle::{crosscheck_decimation, find_prelocalized, DiscreteSpectrum};
use sg_extrema::projective::apply_p;

const TOL: f64 = 1e-9;

/// Sorted `(value, multiplicity)` pairs with equal values merged.
fn merged(mut v: Vec<(f64, usize)>) -> Vec<(f64, usize)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, usize)> = Vec::new();
    for (x, m) in v {
        match out.last_mut() {
            Some(last) if (last.0 - x).abs() < 1e-9 => last.1 += m,
            _ => out.push((x, m)),
        }
    }
    out
}

fn assert_spectrum(level: usize, kind: BoundaryKind, expected: Vec<(f64, usize)>) {
    let got = DiscreteSpectrum::compute(level, kind).unwrap().multiset();
    let expected = merged(expected);
    assert_eq!(got.len(), expected.len(), "level {level} {kind}: {got:?} vs {expected:?}");
    for ((g, gm), (e, em)) in got.iter().zip(&expected) {
        assert!((g - e).abs() <= TOL, "level {level} {kind}: {g} vs {e}");
        assert_eq!(gm, em, "multiplicity of {e} at level {level} {kind}");
    }
}

/// Next level from the branch rule: 6 continues only to 3, 0 stays 0, every
/// other value splits into both preimages under `x(5 - x)`. New eigenvalues 5
/// and 6 are born with the given multiplicities.
fn next_level(prev: &[(f64, usize)], born5: usize, born6: usize) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for &(v, m) in prev {
        if (v - 6.0).abs() < 1e-12 {
            out.push((3.0, m));
        } else if v == 0.0 {
            out.push((0.0, m));
        } else {
            out.push((phi_branch(Sign::Minus, v).unwrap(), m));
            out.push((phi_branch(Sign::Plus, v).unwrap(), m));
        }
    }
    if born5 > 0 {
        out.push((5.0, born5));
    }
    out.push((6.0, born6));
    out
}

#[test]
fn dirichlet_spectra_levels_one_to_three() {
    let l1 = vec![(2.0, 1), (5.0, 2)];
    assert_spectrum(1, BoundaryKind::Dirichlet, l1);
    let s5 = 5f64.sqrt();
    let l2 = vec![
        (phi_branch(Sign::Minus, 2.0).unwrap(), 1),
        ((5.0 - s5) / 2.0, 2),
        (phi_branch(Sign::Plus, 2.0).unwrap(), 1),
        ((5.0 + s5) / 2.0, 2),
        (5.0, 3),
        (6.0, 3),
    ];
    assert_spectrum(2, BoundaryKind::Dirichlet, l2.clone());
    // Births at level 3: (3^2 + 3)/2 fives and (3^3 - 3)/2 sixes.
    let l3 = next_level(&l2, 6, 12);
    assert_eq!(l3.iter().map(|p| p.1).sum::<usize>(), 39);
    assert_spectrum(3, BoundaryKind::Dirichlet, l3);
}

#[test]
fn neumann_spectra_levels_one_to_three() {
    let l1 = vec![(0.0, 1), (3.0, 2), (6.0, 3)];
    assert_spectrum(1, BoundaryKind::Neumann, l1.clone());
    let l2 = next_level(&l1, 1, 6);
    assert_eq!(l2.iter().map(|p| p.1).sum::<usize>(), 15);
    assert_spectrum(2, BoundaryKind::Neumann, l2.clone());
    let l3 = next_level(&l2, 4, 15);
    assert_eq!(l3.iter().map(|p| p.1).sum::<usize>(), 42);
    assert_spectrum(3, BoundaryKind::Neumann, l3);
}

#[test]
fn crosscheck_matches_through_level_four() {
    for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
        for m in 1..=4 {
            let rows = crosscheck_decimation(m, kind, 1e-8).unwrap();
            assert!(rows.iter().all(|r| r.matched), "{kind} level {m}");
        }
    }
}

#[test]
fn dirichlet_matrix_is_positive_definite_and_neumann_has_zero() {
    for m in 1..=3 {
        let d = DiscreteSpectrum::compute(m, BoundaryKind::Dirichlet).unwrap().multiset();
        assert!(d[0].0 > 0.0);
        let n = DiscreteSpectrum::compute(m, BoundaryKind::Neumann).unwrap().multiset();
        assert!(n[0].0.abs() < 1e-12 && n[0].1 == 1);
    }
}

/// For boundary data `(0, 1, 1)` the transfer map at corner 1 multiplies the
/// data by `(6 - l)/((2 - l)(5 - l))`, so the normal derivative is a product.
#[test]
fn normal_derivative_product_formula() {
    for lambda in [0.5, 3.0, 9.0, 15.0] {
        let f = EigenFn::small(lambda, [0.0, 1.0, 1.0]).unwrap();
        let mut product = 1.0;
        let mut data = [0.0, 1.0, 1.0];
        for m in 1..60 {
            let l = f.lambda_at(m);
            product *= 5.0 / 3.0 * (6.0 - l) / ((2.0 - l) * (5.0 - l));
            let next = apply_p(1, l, data);
            let factor = (6.0 - l) / ((2.0 - l) * (5.0 - l));
            assert!((next[1] - factor * data[1]).abs() < 1e-12 * data[1].abs());
            data = next;
        }
        let expected = -2.0 * product;
        let got = f.normal_derivative(1).unwrap();
        assert!((got - expected).abs() <= 1e-9 * expected.abs(), "lambda {lambda}: {got} vs {expected}");
        assert!((f.lambda_at(0) - psi_inverse(lambda).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn prelocalized_vectors_exist_at_level_two() {
    let found = find_prelocalized(2).unwrap();
    assert!(!found.is_empty());
    for p in &found {
        assert!((p.lambda_m - 5.0).abs() < 1e-8 || (p.lambda_m - 6.0).abs() < 1e-8);
    }
}
