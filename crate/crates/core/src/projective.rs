//! Boundary triples as points of the projective plane.
//!
//! A triple `x` with `1^t x != 0` becomes the affine point `Q^t x / 1^t x`;
//! otherwise it is the direction `Q^t x` at infinity. The three corners go to
//! `(0, 1)`, `(-sqrt3/2, -1/2)`, `(sqrt3/2, -1/2)` and constants go to the origin.

use serde::{Deserialize, Serialize};

/// Relative threshold for the at-infinity test `|1^t x| <= tol * ||x||_1`.
pub const INFINITY_TOL: f64 = 1e-12;

const S3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RP2Point {
    Affine([f64; 2]),
    /// Unit direction whose first nonzero coordinate is positive.
    Infinite([f64; 2]),
}

impl RP2Point {
    pub fn infinite(d: [f64; 2]) -> RP2Point {
        let n = d[0].hypot(d[1]);
        let mut u = [d[0] / n, d[1] / n];
        if u[0] < 0.0 || (u[0] == 0.0 && u[1] < 0.0) {
            u = [-u[0], -u[1]];
        }
        RP2Point::Infinite(u)
    }

    pub fn origin() -> RP2Point {
        RP2Point::Affine([0.0, 0.0])
    }

    pub fn affine(&self) -> Option<[f64; 2]> {
        match *self {
            RP2Point::Affine(p) => Some(p),
            RP2Point::Infinite(_) => None,
        }
    }

    /// Homogeneous coordinates `(1, xi)` or `(0, eta)`.
    pub fn homogeneous(&self) -> [f64; 3] {
        match *self {
            RP2Point::Affine([a, b]) => [1.0, a, b],
            RP2Point::Infinite([a, b]) => [0.0, a, b],
        }
    }

    fn from_homogeneous(h: [f64; 3]) -> RP2Point {
        let scale = h[0].abs() + h[1].abs() + h[2].abs();
        if h[0].abs() <= INFINITY_TOL * scale {
            RP2Point::infinite([h[1], h[2]])
        } else {
            RP2Point::Affine([h[1] / h[0], h[2] / h[0]])
        }
    }

    /// Distance in the plane for affine pairs, angle between directions for
    /// infinite pairs, and `inf` for mixed pairs.
    pub fn distance(&self, other: &RP2Point) -> f64 {
        match (self, other) {
            (RP2Point::Affine(a), RP2Point::Affine(b)) => (a[0] - b[0]).hypot(a[1] - b[1]),
            (RP2Point::Infinite(a), RP2Point::Infinite(b)) => {
                let cross = a[0] * b[1] - a[1] * b[0];
                cross.abs().asin()
            }
            _ => f64::INFINITY,
        }
    }
}

/// `Q^t x`.
pub fn q_transpose(x: [f64; 3]) -> [f64; 2] {
    [0.5 * S3 * (x[2] - x[1]), x[0] - 0.5 * (x[1] + x[2])]
}

/// `Q xi`.
pub fn q_apply(xi: [f64; 2]) -> [f64; 3] {
    [xi[1], -0.5 * S3 * xi[0] - 0.5 * xi[1], 0.5 * S3 * xi[0] - 0.5 * xi[1]]
}

pub fn project(x: [f64; 3]) -> RP2Point {
    let s = x[0] + x[1] + x[2];
    let norm = x[0].abs() + x[1].abs() + x[2].abs();
    let q = q_transpose(x);
    if s.abs() <= INFINITY_TOL * norm {
        RP2Point::infinite(q)
    } else {
        RP2Point::Affine([q[0] / s, q[1] / s])
    }
}

/// Representative triple: sum one for affine points, sum zero at infinity.
pub fn lift(p: &RP2Point) -> [f64; 3] {
    match *p {
        RP2Point::Affine(xi) => {
            let q = q_apply(xi);
            q.map(|c| 1.0 / 3.0 + 2.0 / 3.0 * c)
        }
        RP2Point::Infinite(eta) => q_apply(eta).map(|c| 2.0 / 3.0 * c),
    }
}

/// Transfer matrix `P^i_alpha` (i in 1..=3) applied to a boundary triple: the
/// boundary values of `u o F_i` from those of `u`, with `alpha` the decimation
/// value of the next level.
pub fn apply_p(i: u8, alpha: f64, a: [f64; 3]) -> [f64; 3] {
    let i = i as usize - 1;
    let d = (2.0 - alpha) * (5.0 - alpha);
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = if j == i {
            a[i]
        } else {
            let k = 3 - i - j;
            ((4.0 - alpha) * (a[i] + a[j]) + 2.0 * a[k]) / d
        };
    }
    out
}

/// Dense form of `P^i_alpha`, row-major.
pub fn p_matrix(i: u8, alpha: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for c in 0..3 {
        let mut e = [0.0; 3];
        e[c] = 1.0;
        let col = apply_p(i, alpha, e);
        for r in 0..3 {
            m[r][c] = col[r];
        }
    }
    m
}

/// Rotation `G` by 120 degrees, which realises the corner relabelling 1->2->3->1.
pub fn rotate(p: &RP2Point) -> RP2Point {
    let g = |v: [f64; 2]| [-0.5 * v[0] - 0.5 * S3 * v[1], 0.5 * S3 * v[0] - 0.5 * v[1]];
    match *p {
        RP2Point::Affine(v) => RP2Point::Affine(g(v)),
        RP2Point::Infinite(v) => RP2Point::infinite(g(v)),
    }
}

pub fn rotate_k(p: &RP2Point, k: usize) -> RP2Point {
    (0..k % 3).fold(*p, |q, _| rotate(&q))
}

fn apply_p1_proj(alpha: f64, p: &RP2Point) -> RP2Point {
    let [h0, h1, h2] = p.homogeneous();
    let c = (5.0 - alpha) * (6.0 - alpha) * h0 + 2.0 * (2.0 - alpha) * (6.0 - alpha) * h2;
    let r0 = 3.0 * (2.0 - alpha) * h1;
    let r1 = -alpha * (5.0 - alpha) * h0 + (2.0 - alpha) * (9.0 - 2.0 * alpha) * h2;
    RP2Point::from_homogeneous([c, r0, r1])
}

/// Induced projective map of `P^i_alpha`, evaluated in closed form and
/// conjugated by the rotation for `i = 2, 3`.
pub fn apply_p_proj(i: u8, alpha: f64, p: &RP2Point) -> RP2Point {
    let k = i as usize - 1;
    let back = rotate_k(p, 3 - k);
    rotate_k(&apply_p1_proj(alpha, &back), k)
}

/// Inverse of a 3x3 matrix, if it is not numerically singular.
pub fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let a = nalgebra::Matrix3::from_fn(|r, c| m[r][c]);
    let inv = a.try_inverse()?;
    Some(std::array::from_fn(|r| std::array::from_fn(|c| inv[(r, c)])))
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}
