use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sg_extrema::decimation::{phi_branch, phi_forward, Sign};
use sg_extrema::projective::{apply_p_proj, RP2Point};
use sg_extrema::regions::{classify, classify_triple, covering_check, in_m, zeta, Pair, RegionClass, REGION_TOL};

fn alphas() -> Vec<f64> {
    (1..40).map(|k| 6.0 * k as f64 / 40.0).filter(|a| ![2.0, 3.0, 5.0].contains(a)).collect()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Corner whose sub-triangle (origin and the two vertices adjacent to it)
/// strictly contains `p`, found with orientation tests only.
fn sector(alpha: f64, p: [f64; 2]) -> Option<u8> {
    (1..=3u8).find(|&i| {
        let (j, k) = match i {
            1 => (Pair::P12, Pair::P31),
            2 => (Pair::P23, Pair::P12),
            _ => (Pair::P31, Pair::P23),
        };
        let (a, b) = (zeta(alpha, j), zeta(alpha, k));
        let o = [0.0, 0.0];
        let s = cross(o, a, b).signum();
        cross(o, a, p) * s > 0.0 && cross(a, b, p) * s > 0.0 && cross(b, o, p) * s > 0.0
    })
}

#[test]
fn triangle_splits_into_three_sub_triangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for alpha in alphas() {
        let z = Pair::ALL.map(|q| zeta(alpha, q));
        for _ in 0..250 {
            let mut w = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let s: f64 = w.iter().sum();
            w = w.map(|x| x / s);
            let p = [0, 1].map(|c| w[0] * z[0][c] + w[1] * z[1][c] + w[2] * z[2][c]);
            let cl = classify(alpha, &RP2Point::Affine(p), REGION_TOL).unwrap();
            if cl.near_boundary || cl.near_median {
                continue;
            }
            assert!(cl.class.is_interior(), "alpha {alpha} {p:?} {cl:?}");
            match cl.class {
                RegionClass::SubTriangleG(i) => assert_eq!(sector(alpha, p), Some(i), "alpha {alpha} {p:?}"),
                other => panic!("generic point classified {other:?}"),
            }
        }
    }
}

#[test]
fn transfer_maps_move_vertices_to_vertices() {
    for alpha in alphas().into_iter().filter(|a| (*a < 2.0) || (*a > 3.0 && *a < 5.0)) {
        let parent = phi_forward(alpha);
        let sources = [
            RP2Point::origin(),
            RP2Point::Affine(zeta(parent, Pair::P31)),
            RP2Point::Affine(zeta(parent, Pair::P12)),
        ];
        let targets = [Pair::P23, Pair::P31, Pair::P12].map(|q| RP2Point::Affine(zeta(alpha, q)));
        for (s, t) in sources.iter().zip(&targets) {
            let img = apply_p_proj(1, alpha, s);
            assert!(img.distance(t) < 1e-9, "alpha {alpha}: {img:?} vs {t:?}");
        }
    }
}

#[test]
fn m_regions_sit_between_segments_and_the_triangle() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for k in 1..20 {
        let l0 = 6.0 * k as f64 / 20.0;
        let l1 = phi_branch(Sign::Minus, l0).unwrap();
        for pair in Pair::ALL {
            let z = zeta(l0, pair);
            for t in [0.01, 0.3, 0.6, 0.99] {
                let p = RP2Point::Affine([t * z[0], t * z[1]]);
                assert!(in_m(l0, l1, pair, &p), "segment point {t} of {pair:?} at {l0}");
            }
            let r = z[0].hypot(z[1]);
            for _ in 0..400 {
                let p = [rng.gen_range(-r..r), rng.gen_range(-r..r)];
                if !in_m(l0, l1, pair, &RP2Point::Affine(p)) {
                    continue;
                }
                let cl = classify(l0, &RP2Point::Affine(p), REGION_TOL).unwrap();
                assert!(cl.class.is_interior() || cl.near_boundary, "{p:?} in M{pair:?} at {l0}: {cl:?}");
            }
        }
    }
}

#[test]
fn preimages_cover_the_plane_for_middle_values() {
    for alpha in [3.2, 3.7, 4.1, 4.6, 4.9] {
        let rep = covering_check(alpha, 4000, 23).unwrap();
        assert!(rep.uncovered.is_empty(), "alpha {alpha}: {:?}", &rep.uncovered[..rep.uncovered.len().min(3)]);
        assert_eq!(rep.form_mismatches, 0, "alpha {alpha}");
    }
}

#[test]
fn mirror_symmetric_data_stays_on_the_median() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..2000 {
        let alpha = rng.gen_range(0.05..5.95);
        let y: f64 = rng.gen_range(-1.0..1.0);
        let a = [rng.gen_range(-1.0..1.0), y, y];
        let cl = classify_triple(alpha, a, REGION_TOL).unwrap();
        assert!(
            !matches!(cl.class, RegionClass::SubTriangleG(2 | 3) | RegionClass::SegmentL(Pair::P31 | Pair::P12)),
            "{a:?} at {alpha}: {cl:?}"
        );
        assert!(!cl.near_median, "{a:?} at {alpha}: {cl:?}");
    }
}
