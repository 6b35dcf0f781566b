use proptest::prelude::*;

use sg_extrema::decimation::{phi_branch, phi_forward, psi, psi_inverse, BranchWord, Sign};
use sg_extrema::eigenfunction::EigenFn;
use sg_extrema::extrema::{count_exact, ExtremaOptions, ExtremeKind};
use sg_extrema::gasket::{vertex_of, GasketGraph, Word};
use sg_extrema::projective::{apply_p, apply_p_proj, lift, project, RP2Point};

fn close(p: &RP2Point, q: &RP2Point, tol: f64) -> bool {
    match (p, q) {
        (RP2Point::Affine(a), RP2Point::Affine(b)) => {
            (a[0] - b[0]).hypot(a[1] - b[1]) <= tol * (1.0 + a[0].hypot(a[1]))
        }
        _ => p.distance(q) <= tol,
    }
}

fn sign() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Minus), Just(Sign::Plus)]
}

fn branch_word(max: usize) -> impl Strategy<Value = BranchWord> {
    prop::collection::vec(sign(), 0..=max).prop_map(|mut s| {
        if let Some(last) = s.last_mut() {
            *last = Sign::Plus;
        }
        BranchWord::new(s).unwrap()
    })
}

fn boundary() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64].prop_filter("not tiny", |a| a.iter().any(|x| x.abs() > 0.05))
}

proptest! {
    #[test]
    fn psi_renormalisation(x in 1e-3..5.99f64) {
        let lhs = 5.0 * psi(phi_branch(Sign::Minus, x).unwrap()).unwrap();
        prop_assert!((lhs - psi(x).unwrap()).abs() <= 1e-11 * psi(x).unwrap().max(1.0));
    }

    #[test]
    fn branches_invert_phi(x in 0.0..6.25f64, s in sign()) {
        let y = phi_branch(s, x).unwrap();
        prop_assert!((phi_forward(y) - x).abs() <= 1e-12 * x.max(1.0));
    }

    #[test]
    fn psi_inverse_round_trip(x in 1e-4..6.0f64) {
        let back = psi_inverse(psi(x).unwrap()).unwrap();
        prop_assert!((back - x).abs() <= 1e-9);
    }

    #[test]
    fn word_index_round_trip(len in 0usize..9, seed in any::<u64>()) {
        let idx = (seed % 3u64.pow(len as u32)) as usize;
        let w = Word::from_index(len, idx);
        prop_assert_eq!(w.len(), len);
        prop_assert_eq!(w.index(), idx);
        let text = w.to_string();
        prop_assert_eq!(text.parse::<Word>().unwrap(), w);
    }

    #[test]
    fn cell_corners_match_vertex_ids(idx in 0usize..243, i in 1u8..=3) {
        let g = GasketGraph::shared(5).unwrap();
        let w = Word::from_index(5, idx);
        let v = g.cells(5)[idx][i as usize - 1] as usize;
        prop_assert_eq!(g.vertex_id(v).canonical(), vertex_of(&w, i).canonical());
        prop_assert_eq!(g.index_of(vertex_of(&w, i)), Some(v));
    }

    #[test]
    fn projection_commutes_with_transfer(alpha in -3.0..8.0f64, x in prop::array::uniform3(-5.0..5.0f64), centre in any::<bool>(), i in 1u8..=3) {
        prop_assume!([2.0f64, 5.0, 6.0].iter().all(|f| (alpha - f).abs() > 1e-2));
        let mut x = x;
        if centre {
            let m = (x[0] + x[1] + x[2]) / 3.0;
            x = x.map(|v| v - m);
        }
        prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
        let direct = project(apply_p(i, alpha, x));
        let via = apply_p_proj(i, alpha, &project(x));
        prop_assert!(close(&direct, &via, 1e-9), "{:?} vs {:?}", direct, via);
    }

    #[test]
    fn lift_is_a_section(x in prop::array::uniform3(-5.0..5.0f64)) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
        let p = project(x);
        prop_assert!(close(&p, &project(lift(&p)), 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn count_is_scale_invariant(lambda0 in 0.05..5.95f64, eps in branch_word(2), a in boundary(), k in 0.01..100.0f64) {
        let opts = ExtremaOptions::default();
        let f = EigenFn::u_eps(lambda0, eps.clone(), a).unwrap();
        let base = count_exact(&f, &opts).unwrap();
        prop_assume!(!base.near_boundary());
        let up = count_exact(&EigenFn::u_eps(lambda0, eps.clone(), a.map(|x| k * x)).unwrap(), &opts).unwrap();
        prop_assert_eq!(up.count, base.count);
        let flipped = count_exact(&EigenFn::u_eps(lambda0, eps, a.map(|x| -k * x)).unwrap(), &opts).unwrap();
        prop_assert_eq!(flipped.count, base.count);
        let maxima = |r: &sg_extrema::extrema::CountReport, kind| r.sets.iter().filter(|s| s.kind == kind).count();
        prop_assert_eq!(maxima(&flipped, ExtremeKind::Max), maxima(&base, ExtremeKind::Min));
    }

    #[test]
    fn extreme_values_have_the_sign_of_their_kind(lambda0 in 0.05..5.95f64, eps in branch_word(3), a in boundary()) {
        let f = EigenFn::u_eps(lambda0, eps, a).unwrap();
        let rep = count_exact(&f, &ExtremaOptions::default()).unwrap();
        for s in &rep.sets {
            match s.kind {
                ExtremeKind::Max => prop_assert!(s.value > 0.0),
                ExtremeKind::Min => prop_assert!(s.value < 0.0),
            }
        }
    }

    #[test]
    fn extension_solves_the_discrete_equation(lambda0 in 0.05..5.95f64, eps in branch_word(3), a in boundary()) {
        let f = EigenFn::u_eps(lambda0, eps, a).unwrap();
        let g = f.extend(f.small_level() + 3).unwrap();
        prop_assert!(g.equation_residual() <= 1e-9 * g.sup_norm().max(1.0));
    }
}
