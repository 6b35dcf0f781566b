use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sg_extrema::decimation::{psi_inverse, BranchWord, Series};
use sg_extrema::eigenfunction::EigenFn;
use sg_extrema::extrema::{
    count_discrete, count_exact, vertex_is_extreme, ExtremaOptions, ExtremeKind, Flag, Locus, Method,
};
use sg_extrema::gasket::{vertex_of, Word};
use sg_extrema::oracle::sample_series;
use sg_extrema::regions::{classify_triple, Pair, RegionClass};
use sg_extrema::Error;

fn opts() -> ExtremaOptions {
    ExtremaOptions::default()
}

fn midpoint(i: u8, j: u8) -> Locus {
    Locus::Vertex(vertex_of(&Word::new(vec![i]).unwrap(), j))
}

#[test]
fn constant_data_peaks_on_the_middle_triangle() {
    let f = EigenFn::small(4.0, [1.0, 1.0, 1.0]).unwrap();
    assert_eq!(classify_triple(f.lambda_at(0), [1.0; 3], 1e-9).unwrap().class, RegionClass::Theta);
    let rep = count_exact(&f, &opts()).unwrap();
    assert_eq!(rep.count, 1);
    assert_eq!(rep.sets[0].kind, ExtremeKind::Max);
    assert_eq!(rep.sets[0].locus, Locus::CellTriangle(Word::empty()));
    let disc = count_discrete(&f.extend(9).unwrap(), 1e-12);
    assert_eq!(disc.count, 1);
    assert_eq!(disc.sets[0].locus, Locus::CellTriangle(Word::empty()));
}

#[test]
fn equal_pair_peaks_at_the_midpoint() {
    let a = [1.0, 1.0, 0.8];
    let f = EigenFn::small(2.0, a).unwrap();
    assert_eq!(classify_triple(f.lambda_at(0), a, 1e-9).unwrap().class, RegionClass::SegmentL(Pair::P12));
    let rep = count_exact(&f, &opts()).unwrap();
    assert_eq!(rep.count, 1);
    assert_eq!(rep.sets[0].locus, midpoint(1, 2));
    let disc = count_discrete(&f.extend(9).unwrap(), 1e-12);
    assert_eq!(disc.count, 1);
    assert_eq!(disc.sets[0].locus, midpoint(1, 2));
}

#[test]
fn sub_triangle_data_peaks_inside_its_cell() {
    let a = [1.0, 0.95, 0.9];
    let f = EigenFn::small(1.0, a).unwrap();
    let class = classify_triple(f.lambda_at(0), a, 1e-9).unwrap().class;
    assert_eq!(class, RegionClass::SubTriangleG(1));
    let rep = count_exact(&f, &opts()).unwrap();
    assert_eq!(rep.count, 1);
    let inside = |locus: &Locus| match locus {
        Locus::CellTriangle(w) | Locus::CellLimit(w) => w.symbols().first() == Some(&1),
        Locus::Vertex(v) => 2 * v.bary[0] as u64 > 1u64 << v.level,
        Locus::Plateau(_) => false,
    };
    assert!(inside(&rep.sets[0].locus), "{:?}", rep.sets[0].locus);
    let disc = count_discrete(&f.extend(10).unwrap(), 1e-12);
    assert_eq!(disc.count, 1);
    assert!(inside(&disc.sets[0].locus), "{:?}", disc.sets[0].locus);
}

#[test]
fn outside_data_has_no_interior_extremum() {
    let a = [1.0, 0.3, -2.0];
    let f = EigenFn::small(5.0, a).unwrap();
    assert_eq!(classify_triple(f.lambda_at(0), a, 1e-9).unwrap().class, RegionClass::Outside);
    assert_eq!(count_exact(&f, &opts()).unwrap().count, 0);
    assert_eq!(count_discrete(&f.extend(10).unwrap(), 1e-12).count, 0);
}

#[test]
fn dirichlet_ground_state_has_one_extreme_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = sample_series(Series::D2, 1, BranchWord::empty(), &mut rng).unwrap();
    let rep = count_exact(&f, &opts()).unwrap();
    assert_eq!(rep.count, 1);
    assert_eq!(rep.sets[0].locus, Locus::CellTriangle(Word::empty()));
}

#[test]
fn constant_and_first_neumann_functions_have_none() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for series in [Series::N0, Series::N6Prime] {
        for _ in 0..5 {
            let f = sample_series(series, 1, BranchWord::empty(), &mut rng).unwrap();
            assert_eq!(count_exact(&f, &opts()).unwrap().count, 0, "{series}");
        }
    }
}

#[test]
fn symmetric_branch_function_peaks_at_a_vertex() {
    let f = EigenFn::u_eps(4.0, "+".parse().unwrap(), [1.0, 0.3, 0.3]).unwrap();
    let rep = count_exact(&f, &opts()).unwrap();
    let mid23 = midpoint(2, 3);
    assert!(rep.sets.iter().any(|s| s.locus == mid23), "{:?}", rep.sets);
    let hit = vertex_is_extreme(&f, &Word::empty(), Pair::P23, &opts()).unwrap();
    assert_eq!(hit.map(|s| s.locus), Some(mid23));
    for pair in [Pair::P12, Pair::P31] {
        let other = vertex_is_extreme(&f, &Word::empty(), pair, &opts()).unwrap();
        assert!(other.is_none(), "{pair:?}: {other:?}");
    }
}

/// Vertex tests agree with the full count on every vertex. Data symmetric in
/// corners 2 and 3 puts extrema on the mirror axis, where vertices can be extreme.
#[test]
fn vertex_test_agrees_with_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut seen = 0;
    for _ in 0..40 {
        let n = rng.gen_range(1..=3);
        let signs: String = (0..n).map(|k| if k + 1 == n || rng.gen() { '+' } else { '-' }).collect();
        let y = rng.gen_range(-1.0..1.0);
        let a = [rng.gen_range(-1.0..1.0), y, y];
        let f = EigenFn::u_eps(rng.gen_range(0.1..5.9), signs.parse().unwrap(), a).unwrap();
        let rep = count_exact(&f, &opts()).unwrap();
        if rep.near_boundary() {
            continue;
        }
        let small = f.small_level();
        for w in (0..small).flat_map(Word::all_of_length) {
            for pair in Pair::ALL {
                let (i, j) = pair.corners();
                let v = vertex_of(&w.child(i), j);
                let listed = rep.sets.iter().any(|s| s.locus == Locus::Vertex(v));
                let tested = vertex_is_extreme(&f, &w, pair, &opts()).unwrap();
                let tested_vertex = matches!(tested, Some(ref s) if s.locus == Locus::Vertex(v));
                assert_eq!(listed, tested_vertex, "vertex {v} of {w} in {signs} {a:?}");
                seen += usize::from(listed);
            }
        }
    }
    assert!(seen > 0);
}

/// `3^(n-1) <= N(u^eps) <= 4 3^n`, and every cell of level `n - 1` holds an extremum.
#[test]
fn branch_functions_fill_every_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 1..=4usize {
        for _ in 0..5 {
            let signs: String = (0..n).map(|k| if k + 1 == n || rng.gen() { '+' } else { '-' }).collect();
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let f = EigenFn::u_eps(rng.gen_range(0.01..5.99), signs.parse().unwrap(), a).unwrap();
            let count = count_exact(&f, &opts()).unwrap().count;
            assert!(3usize.pow(n as u32 - 1) <= count && count <= 4 * 3usize.pow(n as u32), "{count} at n={n}");
            for w in Word::all_of_length(n - 1) {
                let cell = count_exact(&f.restrict_to_cell(&w).unwrap(), &opts()).unwrap();
                assert!(cell.count >= 1, "cell {w} of {signs} {a:?}");
            }
        }
    }
}

/// Data a hair off the zero-derivative edge: the region test is fragile, so the
/// count falls back to the grid or, in strict mode, refuses.
#[test]
fn fragile_data_falls_back_or_fails_strictly() {
    let lambda = 5.0;
    let l0 = psi_inverse(lambda).unwrap();
    let (a2, a3) = (0.7, 0.5);
    let a = [2.0 * (a2 + a3) / (4.0 - l0) + 1e-8, a2, a3];
    let f = EigenFn::small(lambda, a).unwrap();
    let cl = classify_triple(l0, a, 1e-9).unwrap();
    assert!(cl.near_boundary, "{cl:?}");
    let rep = count_exact(&f, &opts()).unwrap();
    assert_eq!(rep.method, Method::Discrete);
    assert!(rep.flags.iter().any(|f| matches!(f, Flag::Fallback { .. })));
    let strict = ExtremaOptions { strict: true, ..opts() };
    assert!(matches!(count_exact(&f, &strict), Err(Error::Ambiguous(_))));
}

#[test]
fn count_json_has_the_documented_fields() {
    let f = EigenFn::small(4.0, [1.0, 1.0, 1.0]).unwrap();
    let v = count_exact(&f, &opts()).unwrap().to_json();
    assert_eq!(v["count"], 1);
    assert_eq!(v["method"], "exact");
    assert_eq!(v["sets"][0]["kind"], "max");
    assert_eq!(v["sets"][0]["locus_type"], "cell_triangle");
    assert!(v["flags"].as_array().unwrap().is_empty());
}
