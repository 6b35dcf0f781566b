//! The triangle `D_alpha` of projected boundary triples whose cell function has
//! all three normal derivatives of one sign, its strata, and the regions used
//! to track extreme sets from a cell into its children.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decimation::phi_forward;
use crate::error::{Error, Result};
use crate::projective::{apply_p_proj, q_transpose, rotate_k, RP2Point, INFINITY_TOL};

pub const REGION_TOL: f64 = 1e-9;
/// Margins between the snapping tolerance and this value are reported as fragile.
pub const FRAGILE_TOL: f64 = 1e-6;

const S3: f64 = 1.732_050_807_568_877_2;

/// Pair of corners, stored in the cyclic order 23, 31, 12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pair {
    P23,
    P31,
    P12,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::P23, Pair::P31, Pair::P12];

    /// Corner not in the pair.
    pub fn opposite(self) -> u8 {
        match self {
            Pair::P23 => 1,
            Pair::P31 => 2,
            Pair::P12 => 3,
        }
    }

    pub fn from_opposite(k: u8) -> Pair {
        match k {
            1 => Pair::P23,
            2 => Pair::P31,
            _ => Pair::P12,
        }
    }

    pub fn corners(self) -> (u8, u8) {
        match self {
            Pair::P23 => (2, 3),
            Pair::P31 => (3, 1),
            Pair::P12 => (1, 2),
        }
    }

    /// Pair containing both corners, if distinct.
    pub fn of(i: u8, j: u8) -> Pair {
        assert!(i != j);
        Pair::from_opposite(6 - i - j)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = self.corners();
        write!(f, "{i}{j}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionClass {
    Outside,
    /// The origin: constant boundary triples.
    Theta,
    /// Open segment from the origin to `zeta_ij`.
    SegmentL(Pair),
    /// Open triangle spanned by the origin and the two vertices next to corner `i`.
    SubTriangleG(u8),
    VertexZeta(Pair),
    /// Open edge on which the normal derivative at corner `i` vanishes.
    EdgeI(u8),
}

impl RegionClass {
    pub fn is_interior(self) -> bool {
        matches!(self, RegionClass::Theta | RegionClass::SegmentL(_) | RegionClass::SubTriangleG(_))
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, RegionClass::VertexZeta(_) | RegionClass::EdgeI(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: RegionClass,
    /// Some edge form lies in the fragile band, so the inside/boundary/outside
    /// decision could flip under a small perturbation.
    pub near_boundary: bool,
    /// A median or the origin lies in the fragile band; only the locus is at stake.
    pub near_median: bool,
}

/// Half the side scale: the vertices of `D_alpha` sit at distance `alpha/(6-alpha)` from the origin.
pub fn scale(alpha: f64) -> f64 {
    alpha / (6.0 - alpha)
}

pub fn zeta(alpha: f64, pair: Pair) -> [f64; 2] {
    let s = scale(alpha);
    match pair {
        Pair::P23 => [0.0, -s],
        Pair::P31 => [0.5 * S3 * s, 0.5 * s],
        Pair::P12 => [-0.5 * S3 * s, 0.5 * s],
    }
}

/// Signed distances to the three edges of `D_alpha` divided by `alpha/(6-alpha)`;
/// all positive inside, form `i` vanishing on `I_i`.
pub fn edge_forms(alpha: f64, xi: [f64; 2]) -> [f64; 3] {
    let s = scale(alpha);
    let [x, y] = xi;
    [(0.5 * s - y) / s, 0.5 * (y + S3 * x + s) / s, 0.5 * (y - S3 * x + s) / s]
}

fn median_dir(pair: Pair) -> [f64; 2] {
    match pair {
        Pair::P23 => [0.0, -1.0],
        Pair::P31 => [0.5 * S3, 0.5],
        Pair::P12 => [-0.5 * S3, 0.5],
    }
}

pub fn classify(alpha: f64, p: &RP2Point, tol: f64) -> Result<Classification> {
    if !(alpha > 0.0 && alpha < 6.0) {
        return Err(Error::Domain { op: "classify", value: alpha });
    }
    let xi = match p {
        RP2Point::Infinite(_) => {
            return Ok(Classification { class: RegionClass::Outside, near_boundary: false, near_median: false })
        }
        RP2Point::Affine(xi) => *xi,
    };
    let e = edge_forms(alpha, xi);
    let fragile = |v: f64| v.abs() > tol && v.abs() <= FRAGILE_TOL.max(tol);
    let near_boundary = e.iter().any(|&v| fragile(v));
    let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut class = if min < -tol {
        RegionClass::Outside
    } else {
        let zeros: Vec<u8> = (0..3).filter(|&i| e[i].abs() <= tol).map(|i| i as u8 + 1).collect();
        match zeros.len() {
            0 => RegionClass::Theta,
            1 => RegionClass::EdgeI(zeros[0]),
            2 => RegionClass::VertexZeta(Pair::of(zeros[0], zeros[1])),
            _ => return Err(Error::Ambiguous(format!("degenerate region at alpha {alpha}"))),
        }
    };
    let mut near_median = false;
    if class == RegionClass::Theta {
        let s = scale(alpha);
        let r = xi[0].hypot(xi[1]) / s;
        near_median |= fragile(r);
        if r > tol {
            let mut on_median = None;
            for pair in Pair::ALL {
                let d = median_dir(pair);
                let cross = (xi[0] * d[1] - xi[1] * d[0]) / s;
                let along = xi[0] * d[0] + xi[1] * d[1];
                if along > 0.0 {
                    near_median |= fragile(cross);
                    if cross.abs() <= tol {
                        on_median = Some(pair);
                    }
                }
            }
            class = match on_median {
                Some(pair) => RegionClass::SegmentL(pair),
                None => {
                    let u = [[0.0, 1.0], [-0.5 * S3, -0.5], [0.5 * S3, -0.5]];
                    let dots = u.map(|d| d[0] * xi[0] + d[1] * xi[1]);
                    let i = (0..3).max_by(|&a, &b| dots[a].total_cmp(&dots[b])).expect("three sectors");
                    RegionClass::SubTriangleG(i as u8 + 1)
                }
            };
        }
    }
    Ok(Classification { class, near_boundary, near_median })
}

/// Projects a boundary triple and classifies it. When two entries agree bit
/// for bit the point is first moved onto the corresponding median line.
pub fn classify_triple(alpha: f64, a: [f64; 3], tol: f64) -> Result<Classification> {
    classify_split(alpha, 0.0, a, tol)
}

/// Classifies the triple `c (1,1,1) + delta`. Keeping the constant part apart
/// preserves the relative accuracy of `tau` when the triple is nearly constant.
pub fn classify_split(alpha: f64, c: f64, delta: [f64; 3], tol: f64) -> Result<Classification> {
    let sum = 3.0 * c + delta.iter().sum::<f64>();
    let norm = 3.0 * c.abs() + delta.iter().map(|d| d.abs()).sum::<f64>();
    let q = q_transpose(delta);
    let mut p = if sum.abs() <= INFINITY_TOL * norm {
        RP2Point::infinite(q)
    } else {
        RP2Point::Affine([q[0] / sum, q[1] / sum])
    };
    if let RP2Point::Affine(xi) = p {
        for (i, j, pair) in [(1, 2, Pair::P23), (2, 0, Pair::P31), (0, 1, Pair::P12)] {
            if delta[i] == delta[j] {
                let d = median_dir(pair);
                let t = xi[0] * d[0] + xi[1] * d[1];
                p = RP2Point::Affine([t * d[0], t * d[1]]);
                break;
            }
        }
    }
    classify(alpha, &p, tol)
}

/// Membership in `M_{lambda, ij}`: the part of `D_{lambda0}` whose children stay
/// clear of the extreme point of the neighbouring cell.
pub fn in_m(lambda0: f64, lambda1: f64, pair: Pair, p: &RP2Point) -> bool {
    let k = pair.opposite() as usize - 1;
    let q = rotate_k(p, 3 - k);
    let Some([x, y]) = q.affine() else { return false };
    let top = (3.0 - lambda1) / (6.0 - lambda1) * lambda0 / (2.0 * (6.0 - lambda0));
    let slope = (5.0 - lambda1) / (3.0 - lambda1) * S3;
    let c = lambda0 / (6.0 - lambda0);
    y < top && y > -slope * x - c && y > slope * x - c
}

/// Closed-form test of `p` in the preimage of `D_alpha` under the projective
/// transfer map towards corner `i`.
pub fn preimage_classify(alpha: f64, i: u8, p: &RP2Point) -> Result<bool> {
    let q = rotate_k(p, 3 - (i as usize - 1));
    let phi = phi_forward(alpha);
    if alpha > 0.0 && alpha < 2.0 {
        let Some([x, y]) = q.affine() else { return Ok(false) };
        return Ok(phi / (2.0 * (6.0 - phi)) > y && y > x.abs() / S3);
    }
    if alpha == 3.0 {
        let Some([x, y]) = q.affine() else { return Ok(false) };
        return Ok(y < -x.abs() / S3);
    }
    if alpha > 3.0 && alpha < 5.0 {
        return Ok(match q {
            RP2Point::Affine([x, y]) => {
                (y > phi / (2.0 * (6.0 - phi)) && y > x.abs() / S3) || y < -x.abs() / S3
            }
            RP2Point::Infinite([x, y]) => y.abs() > x.abs() / S3,
        });
    }
    Err(Error::Domain { op: "preimage_classify", value: alpha })
}

/// Whether the forward image of `p` under the transfer map towards corner `i` lies in `D_alpha`.
pub fn preimage_forward(alpha: f64, i: u8, p: &RP2Point, tol: f64) -> Result<bool> {
    Ok(classify(alpha, &apply_p_proj(i, alpha, p), tol)?.class.is_interior())
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    pub alpha: f64,
    pub samples: usize,
    pub covered: usize,
    pub by_edges: usize,
    pub uncovered: Vec<RP2Point>,
    /// Samples where the closed form and the forward image disagree.
    pub form_mismatches: usize,
}

/// Random points of the projective plane: affine points at several radii plus
/// a share of points at infinity.
pub fn sample_points(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<RP2Point> {
    (0..n)
        .map(|k| {
            let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            if k % 10 == 9 {
                RP2Point::infinite([t.cos(), t.sin()])
            } else {
                let r = radius * 10f64.powf(rng.gen_range(-3.0..1.0));
                RP2Point::Affine([r * t.cos(), r * t.sin()])
            }
        })
        .collect()
}

/// Checks that every sample lies in one of the three open preimages of
/// `D_alpha`, on a preimage of an edge, or at the origin.
pub fn covering_check(alpha: f64, samples: usize, seed: u64) -> Result<CoverReport> {
    if !(alpha > 3.0 && alpha < 5.0) {
        return Err(Error::Domain { op: "covering_check", value: alpha });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = sample_points(&mut rng, samples, scale(alpha));
    let mut report = CoverReport { alpha, samples, covered: 0, by_edges: 0, uncovered: Vec::new(), form_mismatches: 0 };
    for p in pts {
        let mut hit = false;
        for i in 1..=3u8 {
            let closed = preimage_classify(alpha, i, &p)?;
            let forward = preimage_forward(alpha, i, &p, REGION_TOL)?;
            if closed != forward {
                report.form_mismatches += 1;
            }
            hit |= closed;
        }
        if !hit {
            let on_edge = (1..=3u8).any(|i| {
                classify(alpha, &apply_p_proj(i, alpha, &p), REGION_TOL)
                    .map(|c| matches!(c.class, RegionClass::EdgeI(j) if j != i))
                    .unwrap_or(false)
            });
            if on_edge {
                report.by_edges += 1;
                hit = true;
            } else if p.distance(&RP2Point::origin()) <= REGION_TOL {
                hit = true;
            }
        }
        if hit {
            report.covered += 1;
        } else {
            report.uncovered.push(p);
        }
    }
    Ok(report)
}

/// Polylines of the triangle, its medians and the three `M` triangles, as CSV
/// rows `alpha,shape,point,x,y`.
pub fn polylines_csv(alpha: f64, lambda1: f64) -> String {
    let mut out = String::from("alpha,shape,point,x,y\n");
    let mut push = |name: &str, pts: &[[f64; 2]]| {
        for (k, p) in pts.iter().enumerate() {
            out.push_str(&format!("{alpha},{name},{k},{},{}\n", p[0], p[1]));
        }
    };
    let z = Pair::ALL.map(|q| zeta(alpha, q));
    push("D", &[z[0], z[1], z[2], z[0]]);
    for (q, zq) in Pair::ALL.iter().zip(z) {
        push(&format!("L{q}"), &[[0.0, 0.0], zq]);
    }
    let top = (3.0 - lambda1) / (6.0 - lambda1) * alpha / (2.0 * (6.0 - alpha));
    let slope = (5.0 - lambda1) / (3.0 - lambda1) * S3;
    let c = alpha / (6.0 - alpha);
    let half = (top + c) / slope;
    let base = [[0.0, -c], [half, top], [-half, top], [0.0, -c]];
    for q in Pair::ALL {
        let k = q.opposite() as usize - 1;
        let pts: Vec<[f64; 2]> = base
            .iter()
            .map(|&v| rotate_k(&RP2Point::Affine(v), k).affine().expect("affine"))
            .collect();
        push(&format!("M{q}"), &pts);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertices_and_edges() {
        let a = 2.5;
        for q in Pair::ALL {
            let c = classify(a, &RP2Point::Affine(zeta(a, q)), REGION_TOL).unwrap();
            assert_eq!(c.class, RegionClass::VertexZeta(q));
        }
        let top = 0.5 * scale(a);
        let c = classify(a, &RP2Point::Affine([0.1 * scale(a), top]), REGION_TOL).unwrap();
        assert_eq!(c.class, RegionClass::EdgeI(1));
        let c = classify(a, &RP2Point::Affine([0.0, 0.3 * scale(a)]), REGION_TOL).unwrap();
        assert_eq!(c.class, RegionClass::SubTriangleG(1));
        let c = classify(a, &RP2Point::Affine([0.0, -0.3 * scale(a)]), REGION_TOL).unwrap();
        assert_eq!(c.class, RegionClass::SegmentL(Pair::P23));
    }

    #[test]
    fn m_region_examples() {
        let l0 = 1.2;
        let l1 = crate::decimation::phi_branch(crate::decimation::Sign::Minus, l0).unwrap();
        assert!(in_m(l0, l1, Pair::P23, &RP2Point::origin()));
        assert!(!in_m(l0, l1, Pair::P23, &RP2Point::Affine(zeta(l0, Pair::P31))));
    }
}
