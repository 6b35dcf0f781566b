//! Eigenfunctions given by seed values on `V_s` plus a decimation path, their
//! level-synchronous extension, restrictions to cells and normal derivatives.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decimation::{BranchWord, DecimationPath, Series};
use crate::error::{Error, Result};
use crate::gasket::{vertex_count, GasketGraph, Word, MAX_LEVEL};
use crate::projective::apply_p;

/// Levels of the decimation sequence kept beyond the last branch step.
const TAIL_LEVELS: usize = 140;
/// Depth cap for the normal-derivative limit.
pub const DERIVATIVE_DEPTH: usize = 60;
const DERIVATIVE_TOL: f64 = 1e-11;
/// Relative residual allowed when checking seed values against the discrete equation.
pub const SEED_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenFn {
    pub path: DecimationPath,
    pub lambda: f64,
    seed_level: usize,
    seed: Vec<f64>,
    /// `lambdas[k]` is the decimation value at level `seed_level + k`.
    lambdas: Vec<f64>,
}

impl EigenFn {
    /// Function with values `a` on `V_0` and a path born at level 0.
    pub fn from_boundary(path: DecimationPath, a: [f64; 3]) -> Result<Self> {
        if path.m0 != 0 {
            return Err(Error::Invalid("boundary data needs a path born at level 0".into()));
        }
        EigenFn::assemble(path, 0, a.to_vec())
    }

    /// Eigenfunction with eigenvalue `lambda` below the first Dirichlet
    /// eigenvalue and boundary values `a`.
    pub fn small(lambda: f64, a: [f64; 3]) -> Result<Self> {
        EigenFn::from_boundary(DecimationPath::small(lambda)?, a)
    }

    /// `u^eps` with `lambda_0` and boundary values `a`.
    pub fn u_eps(lambda0: f64, eps: BranchWord, a: [f64; 3]) -> Result<Self> {
        EigenFn::from_boundary(DecimationPath::from_level_zero(lambda0, eps)?, a)
    }

    /// Function born at level `path.m0` with values `seed` on `V_m0`. The seed
    /// must satisfy the discrete equation with `lambda_m0` at every non-boundary
    /// vertex; named series also get their boundary condition checked.
    pub fn from_seed(path: DecimationPath, seed: Vec<f64>) -> Result<Self> {
        let s = path.m0;
        if seed.len() != vertex_count(s) {
            return Err(Error::Invalid(format!(
                "seed has {} values, level {s} has {}",
                seed.len(),
                vertex_count(s)
            )));
        }
        let g = GasketGraph::shared(s)?;
        let lam = path.lambda_birth;
        let norm = seed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm == 0.0 {
            return Err(Error::Invalid("seed is identically zero".into()));
        }
        let residual = |v: usize| {
            let lap: f64 = g.neighbors(v).iter().map(|&q| seed[v] - seed[q as usize]).sum();
            let lap = if v < 3 { 2.0 * lap } else { lap };
            (lap - lam * seed[v]).abs()
        };
        let neumann = !path.series.is_dirichlet() && path.series != Series::Generic;
        let bad = (0..g.len()).find(|&v| {
            if v < 3 {
                if path.series.is_dirichlet() {
                    seed[v].abs() > SEED_RESIDUAL_TOL * norm
                } else {
                    neumann && s > 0 && residual(v) > SEED_RESIDUAL_TOL * norm
                }
            } else {
                residual(v) > SEED_RESIDUAL_TOL * norm
            }
        });
        if let Some(v) = bad {
            return Err(Error::Invalid(format!("seed violates the level-{s} equation at vertex {v}")));
        }
        EigenFn::assemble(path, s, seed)
    }

    fn assemble(path: DecimationPath, seed_level: usize, seed: Vec<f64>) -> Result<Self> {
        let top = path.small_level().max(seed_level) + TAIL_LEVELS;
        let all = path.lambda_sequence(top)?;
        let lambdas = all[seed_level - path.m0..].to_vec();
        let lambda = path.eigenvalue()?;
        Ok(EigenFn { path, lambda, seed_level, seed, lambdas })
    }

    pub fn seed_level(&self) -> usize {
        self.seed_level
    }

    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    /// Values on `V_0`.
    pub fn boundary(&self) -> [f64; 3] {
        [self.seed[0], self.seed[1], self.seed[2]]
    }

    /// Decimation value at level `m >= seed_level`.
    pub fn lambda_at(&self, m: usize) -> f64 {
        self.lambdas[m - self.seed_level]
    }

    /// Decimation values from level `m` on.
    pub fn lambdas_from(&self, m: usize) -> &[f64] {
        &self.lambdas[m - self.seed_level..]
    }

    /// Level from which the cell functions have eigenvalue below the first
    /// Dirichlet eigenvalue.
    pub fn small_level(&self) -> usize {
        self.path.small_level().max(self.seed_level)
    }

    pub fn extend(&self, level: usize) -> Result<ValueGrid> {
        if level > MAX_LEVEL {
            return Err(Error::LevelTooLarge { level, limit: MAX_LEVEL });
        }
        if level < self.seed_level {
            return Err(Error::Invalid(format!("level {level} is below the seed level {}", self.seed_level)));
        }
        let g = GasketGraph::shared(level)?;
        let mut u = vec![0.0; g.len()];
        u[..self.seed.len()].copy_from_slice(&self.seed);
        for k in self.seed_level..level {
            let lam = self.lambda_at(k + 1);
            let d = (2.0 - lam) * (5.0 - lam);
            let c = 4.0 - lam;
            let base = vertex_count(k);
            for (ci, cell) in g.cells(k).iter().enumerate() {
                let [x1, x2, x3] = cell.map(|v| u[v as usize]);
                let out = base + 3 * ci;
                u[out] = (c * (x2 + x3) + 2.0 * x1) / d;
                u[out + 1] = (c * (x3 + x1) + 2.0 * x2) / d;
                u[out + 2] = (c * (x1 + x2) + 2.0 * x3) / d;
            }
        }
        Ok(ValueGrid {
            graph: g,
            values: u,
            lambda_level: self.lambda_at(level),
            header: GridHeader::of(self, level),
        })
    }

    /// Values on the corners of cell `w`.
    pub fn cell_triple(&self, w: &Word) -> [f64; 3] {
        let s = self.seed_level;
        if w.len() <= s {
            let g = GasketGraph::shared(s).expect("seed level within limits");
            let cell = g.cells(w.len())[w.index()];
            return cell.map(|v| self.seed[v as usize]);
        }
        let head = Word::new(w.symbols()[..s].to_vec()).expect("valid symbols");
        let mut t = self.cell_triple(&head);
        for (k, &i) in w.symbols()[s..].iter().enumerate() {
            t = apply_p(i, self.lambda_at(s + k + 1), t);
        }
        t
    }

    /// `u o F_w` as an eigenfunction in its own right.
    pub fn restrict_to_cell(&self, w: &Word) -> Result<EigenFn> {
        let k = w.len();
        let path = self.path.shifted(k)?;
        let lambda = self.lambda / 5f64.powi(k as i32);
        if k >= self.seed_level {
            let lambdas = self.lambdas[k - self.seed_level..].to_vec();
            return Ok(EigenFn { path, lambda, seed_level: 0, seed: self.cell_triple(w).to_vec(), lambdas });
        }
        let s = self.seed_level - k;
        let big = GasketGraph::shared(self.seed_level)?;
        let small = GasketGraph::shared(s)?;
        let mut seed = vec![0.0; small.len()];
        let offset = w.index() * 3usize.pow(s as u32);
        for (ci, cell) in small.cells(s).iter().enumerate() {
            let target = big.cells(self.seed_level)[offset + ci];
            for j in 0..3 {
                seed[cell[j] as usize] = self.seed[target[j] as usize];
            }
        }
        Ok(EigenFn { path, lambda, seed_level: s, seed, lambdas: self.lambdas.clone() })
    }

    /// Sequence `(5/3)^m (2u(p_i) - u(F_i^m p_j) - u(F_i^m p_k))` for `m` from the seed level.
    pub fn derivative_terms(&self, i: u8, depth: usize) -> Vec<f64> {
        let s = self.seed_level;
        let corner = Word::new(vec![i; s]).expect("valid corner");
        let mut t = self.cell_triple(&corner);
        let ii = i as usize - 1;
        let mut out = Vec::with_capacity(depth);
        let mut scale = (5.0f64 / 3.0).powi(s as i32);
        for m in s..s + depth {
            let others: f64 = (0..3).filter(|&j| j != ii).map(|j| t[j]).sum();
            out.push(scale * (2.0 * t[ii] - others));
            t = apply_p(i, self.lambda_at(m + 1), t);
            scale *= 5.0 / 3.0;
        }
        out
    }

    /// Outward normal derivative at corner `i` (1..=3): the raw limit,
    /// accelerated by a geometric-tail estimate once the branch steps are over.
    pub fn normal_derivative(&self, i: u8) -> Result<f64> {
        let terms = self.derivative_terms(i, DERIVATIVE_DEPTH);
        let norm = self.seed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let first = self.small_level() - self.seed_level + 2;
        let mut prev: Option<f64> = None;
        for m in first.max(2)..terms.len() {
            let (a, b, c) = (terms[m - 2], terms[m - 1], terms[m]);
            let d1 = b - a;
            let d2 = c - b;
            let est = if d1 != 0.0 && (d2 / d1).abs() < 0.9 {
                let r = d2 / d1;
                c + d2 * r / (1.0 - r)
            } else {
                c
            };
            if let Some(p) = prev {
                let scale = est.abs().max(norm);
                if (est - p).abs() <= DERIVATIVE_TOL * scale {
                    return Ok(est);
                }
            }
            prev = Some(est);
        }
        Err(Error::NoConvergence { op: "normal_derivative", iterations: DERIVATIVE_DEPTH })
    }

    pub fn normal_derivatives(&self) -> Result<[f64; 3]> {
        Ok([self.normal_derivative(1)?, self.normal_derivative(2)?, self.normal_derivative(3)?])
    }
}

/// Metadata written in front of exported grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub level: usize,
    pub lambda: f64,
    pub series: Series,
    pub m0: usize,
    pub eps: BranchWord,
    pub a: [f64; 3],
    pub lambda_birth: f64,
    pub seed_level: usize,
}

impl GridHeader {
    fn of(f: &EigenFn, level: usize) -> GridHeader {
        GridHeader {
            level,
            lambda: f.lambda,
            series: f.path.series,
            m0: f.path.m0,
            eps: f.path.eps.clone(),
            a: f.boundary(),
            lambda_birth: f.path.lambda_birth,
            seed_level: f.seed_level,
        }
    }

    pub fn path(&self) -> Result<DecimationPath> {
        DecimationPath::new(self.m0, self.lambda_birth, self.eps.clone(), self.series)
    }
}

/// Values of a function on `V_level`, in the graph's vertex order.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    pub graph: Arc<GasketGraph>,
    pub values: Vec<f64>,
    /// Decimation value at the grid level.
    pub lambda_level: f64,
    pub header: GridHeader,
}

impl ValueGrid {
    pub fn level(&self) -> usize {
        self.graph.level()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|lambda u(p) + Delta u(p)|` over non-boundary vertices.
    pub fn equation_residual(&self) -> f64 {
        let g = &self.graph;
        (3..g.len())
            .map(|v| {
                let lap: f64 = g.neighbors(v).iter().map(|&q| self.values[q as usize] - self.values[v]).sum();
                (lap + self.lambda_level * self.values[v]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `# {json header}` line, then `c1,c2,c3,value` rows with coordinates at the grid level.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\n", serde_json::to_string(&self.header).expect("header serialises"));
        out.push_str("c1,c2,c3,value\n");
        for (v, val) in self.values.iter().enumerate() {
            let c = self.graph.coords(v);
            out.push_str(&format!("{},{},{},{:e}\n", c[0], c[1], c[2], val));
        }
        out
    }

    /// Rebuilds a grid from a header and `(coordinates, value)` rows.
    pub fn from_rows(header: GridHeader, rows: &[([u32; 3], f64)]) -> Result<ValueGrid> {
        let graph = GasketGraph::shared(header.level)?;
        if rows.len() != graph.len() {
            return Err(Error::Invalid(format!("expected {} rows, found {}", graph.len(), rows.len())));
        }
        let mut values = vec![f64::NAN; graph.len()];
        for (c, val) in rows {
            let id = crate::gasket::VertexId { level: header.level, bary: *c };
            let v = graph.index_of(id).ok_or_else(|| Error::Invalid(format!("{id} is not a vertex")))?;
            values[v] = *val;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Invalid("grid has repeated or missing vertices".into()));
        }
        let path = header.path()?;
        let lambda_level = path.lambda_at(header.level.max(path.m0))?;
        Ok(ValueGrid { graph, values, lambda_level, header })
    }

    /// Eigenfunction whose seed is read off the grid.
    pub fn to_eigenfn(&self) -> Result<EigenFn> {
        let path = self.header.path()?;
        let s = self.header.seed_level;
        if s > self.level() {
            return Err(Error::Invalid("grid is coarser than the seed level".into()));
        }
        let seed = self.values[..vertex_count(s)].to_vec();
        if s == 0 {
            let a = [seed[0], seed[1], seed[2]];
            return EigenFn::from_boundary(path, a);
        }
        EigenFn::from_seed(path, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussGreen {
    pub level: usize,
    pub energy: f64,
    pub boundary_term: f64,
    pub mass_term: f64,
    /// `|energy - boundary_term - mass_term|` divided by `max(energy, ||u||^2)`.
    pub relative_residual: f64,
}

/// Discrete energy at `level` against the boundary term plus `lambda * int u^2`.
pub fn gauss_green_residual(f: &EigenFn, level: usize) -> Result<GaussGreen> {
    let grid = f.extend(level)?;
    let u = &grid.values;
    let energy = (5.0f64 / 3.0).powi(level as i32)
        * grid.graph.edges().map(|(a, b)| (u[a] - u[b]).powi(2)).sum::<f64>();
    let d = f.normal_derivatives()?;
    let boundary_term: f64 = (0..3).map(|i| u[i] * d[i]).sum();
    let w = 1.0 / 3f64.powi(level as i32 + 1);
    let integral: f64 = u.iter().enumerate().map(|(v, x)| if v < 3 { w } else { 2.0 * w } * x * x).sum();
    let mass_term = f.lambda * integral;
    let norm2 = grid.sup_norm().powi(2);
    let relative_residual = (energy - boundary_term - mass_term).abs() / energy.abs().max(norm2);
    Ok(GaussGreen { level, energy, boundary_term, mass_term, relative_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_satisfies_discrete_equation() {
        let f = EigenFn::u_eps(2.3, "-+".parse().unwrap(), [0.4, -1.0, 0.7]).unwrap();
        for m in 1..7 {
            let g = f.extend(m).unwrap();
            assert!(g.equation_residual() < 1e-9 * g.sup_norm().max(1.0), "level {m}");
        }
    }

    #[test]
    fn cell_triple_matches_grid() {
        let f = EigenFn::u_eps(1.1, "+".parse().unwrap(), [1.0, 0.2, -0.3]).unwrap();
        let g = f.extend(4).unwrap();
        for w in Word::all_of_length(4) {
            let t = f.cell_triple(&w);
            let c = g.graph.cells(4)[w.index()];
            for j in 0..3 {
                assert!((t[j] - g.values[c[j] as usize]).abs() < 1e-12);
            }
        }
    }
}
