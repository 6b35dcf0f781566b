//! Dense diagonalisation of the level-m graph Laplacians, used as ground truth
//! for the decimation spectra and as a source of seed vectors.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::decimation::{phi_branch, BranchWord, DecimationPath, Series, Sign, FORBIDDEN, FORBIDDEN_GUARD};
use crate::eigenfunction::EigenFn;
use crate::error::{Error, Result};
use crate::gasket::{vertex_count, BoundaryKind, GasketGraph};

pub const ORACLE_MAX_LEVEL: usize = 5;
/// Eigenvalues closer than this (relative to `max(1, |lambda|)`) form one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
const PRELOCALIZED_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Cluster {
    pub value: f64,
    /// Eigenvectors over all of `V_m`, orthonormal for the vertex mass (one half
    /// on `V_0` in the Neumann case). Dirichlet vectors vanish on `V_0`.
    pub vectors: Vec<Vec<f64>>,
}

impl Cluster {
    pub fn multiplicity(&self) -> usize {
        self.vectors.len()
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteSpectrum {
    pub level: usize,
    pub kind: BoundaryKind,
    pub clusters: Vec<Cluster>,
}

impl DiscreteSpectrum {
    pub fn compute(m: usize, kind: BoundaryKind) -> Result<Self> {
        if m > ORACLE_MAX_LEVEL {
            return Err(Error::LevelTooLarge { level: m, limit: ORACLE_MAX_LEVEL });
        }
        let g = GasketGraph::shared(m)?;
        let mut a: DMatrix<f64> = g.laplacian_matrix(kind);
        let off = g.len() - a.nrows();
        // Neumann boundary vertices carry half mass: rows there are doubled.
        // Solve the symmetric form M^-1/2 L M^-1/2 and map vectors back.
        let weight = |r: usize| if kind == BoundaryKind::Neumann && r < 3 { 2f64.sqrt() } else { 1.0 };
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                a[(r, c)] *= weight(r) * weight(c);
            }
        }
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut sums: Vec<(f64, f64)> = Vec::new();
        for idx in order {
            let val = eig.eigenvalues[idx];
            let mut full = vec![0.0; g.len()];
            for r in 0..eig.eigenvectors.nrows() {
                full[r + off] = eig.eigenvectors[(r, idx)] * weight(r);
            }
            match (clusters.last_mut(), sums.last_mut()) {
                (Some(c), Some((sum, last))) if (val - *last).abs() <= CLUSTER_TOL * val.abs().max(1.0) => {
                    c.vectors.push(full);
                    *sum += val;
                    *last = val;
                    c.value = *sum / c.vectors.len() as f64;
                }
                _ => {
                    clusters.push(Cluster { value: val, vectors: vec![full] });
                    sums.push((val, val));
                }
            }
        }
        Ok(DiscreteSpectrum { level: m, kind, clusters })
    }

    /// Cached spectrum.
    pub fn shared(m: usize, kind: BoundaryKind) -> Result<Arc<DiscreteSpectrum>> {
        type Cache = Mutex<HashMap<(usize, bool), Arc<DiscreteSpectrum>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (m, kind == BoundaryKind::Dirichlet);
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().expect("spectrum cache").get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(DiscreteSpectrum::compute(m, kind)?);
        cache.lock().expect("spectrum cache").entry(key).or_insert_with(|| s.clone());
        Ok(s)
    }

    pub fn dimension(&self) -> usize {
        self.clusters.iter().map(Cluster::multiplicity).sum()
    }

    pub fn eigenspace(&self, lambda: f64, tol: f64) -> Result<&Cluster> {
        self.clusters
            .iter()
            .find(|c| (c.value - lambda).abs() <= tol * lambda.abs().max(1.0))
            .ok_or(Error::NoSuchEigenvalue(lambda))
    }

    /// `(value, multiplicity)` pairs in increasing order.
    pub fn multiset(&self) -> Vec<(f64, usize)> {
        self.clusters.iter().map(|c| (c.value, c.multiplicity())).collect()
    }
}

/// Discrete spectrum at level `m` predicted by decimation: every series born at
/// a level up to `m`, carried to level `m` along all branch choices that avoid
/// the forbidden values.
pub fn predicted_spectrum(m: usize, kind: BoundaryKind) -> Vec<(f64, usize)> {
    let series: &[Series] = match kind {
        BoundaryKind::Dirichlet => &Series::ALL_DIRICHLET,
        BoundaryKind::Neumann => &Series::ALL_NEUMANN,
    };
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &s in series {
        let (lo, hi) = s.birth_levels();
        let hi = hi.unwrap_or(m).min(m);
        for m0 in lo..=hi {
            let mut values = vec![s.birth_value().expect("named series")];
            for _ in m0..m {
                values = values
                    .iter()
                    .flat_map(|&v| [Sign::Minus, Sign::Plus].map(|sg| phi_branch(sg, v)))
                    .filter_map(|r| r.ok())
                    .filter(|v| FORBIDDEN.iter().all(|f| (v - f).abs() > FORBIDDEN_GUARD))
                    .collect();
            }
            for v in values {
                out.push((v, s.multiplicity(m0)));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, usize)> = Vec::new();
    for (v, k) in out {
        match merged.last_mut() {
            Some(last) if (last.0 - v).abs() <= 1e-9 * v.abs().max(1.0) => last.1 += k,
            _ => merged.push((v, k)),
        }
    }
    merged
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckRow {
    pub level: usize,
    pub kind: String,
    pub lambda_m: f64,
    pub multiplicity: usize,
    pub predicted_multiplicity: usize,
    #[serde(rename = "match")]
    pub matched: bool,
}

/// Compares the oracle spectrum with the decimation prediction, value by value.
pub fn crosscheck_decimation(m: usize, kind: BoundaryKind, tol: f64) -> Result<Vec<CrosscheckRow>> {
    let spec = DiscreteSpectrum::shared(m, kind)?;
    let predicted = predicted_spectrum(m, kind);
    let mut rows = Vec::new();
    let mut used = vec![false; predicted.len()];
    for c in &spec.clusters {
        let hit = predicted.iter().position(|(v, _)| (v - c.value).abs() <= tol * c.value.abs().max(1.0));
        let pm = hit.map_or(0, |k| {
            used[k] = true;
            predicted[k].1
        });
        rows.push(CrosscheckRow {
            level: m,
            kind: kind.to_string(),
            lambda_m: c.value,
            multiplicity: c.multiplicity(),
            predicted_multiplicity: pm,
            matched: pm == c.multiplicity(),
        });
    }
    for (k, (v, pm)) in predicted.iter().enumerate() {
        if !used[k] {
            rows.push(CrosscheckRow {
                level: m,
                kind: kind.to_string(),
                lambda_m: *v,
                multiplicity: 0,
                predicted_multiplicity: *pm,
                matched: false,
            });
        }
    }
    Ok(rows)
}

pub fn crosscheck_csv(rows: &[CrosscheckRow]) -> String {
    let mut out = String::from("level,kind,lambda_m,multiplicity,predicted_multiplicity,match\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.12},{},{},{}\n",
            r.level, r.kind, r.lambda_m, r.multiplicity, r.predicted_multiplicity, r.matched
        ));
    }
    out
}

/// Discrete eigenvector that is both a Dirichlet and a Neumann eigenvector.
#[derive(Debug, Clone)]
pub struct PreLocalized {
    pub level: usize,
    pub lambda_m: f64,
    pub values: Vec<f64>,
}

/// Intersections of the Dirichlet and Neumann eigenspaces at level `m`, from
/// the singular values of the product of their orthonormal bases.
pub fn find_prelocalized(m: usize) -> Result<Vec<PreLocalized>> {
    let d = DiscreteSpectrum::shared(m, BoundaryKind::Dirichlet)?;
    let n = DiscreteSpectrum::shared(m, BoundaryKind::Neumann)?;
    let mut out = Vec::new();
    for cd in &d.clusters {
        let Ok(cn) = n.eigenspace(cd.value, CLUSTER_TOL) else { continue };
        let bd = DMatrix::from_fn(vertex_count(m), cd.multiplicity(), |r, c| cd.vectors[c][r]);
        let bn = DMatrix::from_fn(vertex_count(m), cn.multiplicity(), |r, c| cn.vectors[c][r]);
        let svd = (bd.transpose() * &bn).svd(true, false);
        let u = svd.u.expect("left singular vectors");
        for (k, s) in svd.singular_values.iter().enumerate() {
            if *s >= 1.0 - PRELOCALIZED_TOL {
                let v = &bd * u.column(k);
                out.push(PreLocalized { level: m, lambda_m: cd.value, values: v.iter().copied().collect() });
            }
        }
    }
    Ok(out)
}

/// Copies of a pre-localized vector placed in every cell of level `n`: the
/// eigenfunction born at level `n + p.level` with the same decimation value.
pub fn prelocalized_sum(p: &PreLocalized, n: usize) -> Result<EigenFn> {
    let m = n + p.level;
    let g = GasketGraph::shared(m)?;
    let local = GasketGraph::shared(p.level)?;
    let per_cell = local.cells(p.level).len();
    let mut seed = vec![0.0; g.len()];
    for w in 0..3usize.pow(n as u32) {
        for (v, corners) in local.cells(p.level).iter().enumerate() {
            let target = g.cells(m)[w * per_cell + v];
            for k in 0..3 {
                seed[target[k] as usize] = p.values[corners[k] as usize];
            }
        }
    }
    let nearest = p.lambda_m.round();
    let birth = if (p.lambda_m - nearest).abs() <= PRELOCALIZED_TOL { nearest } else { p.lambda_m };
    let path = DecimationPath::new(m, birth, BranchWord::empty(), Series::Generic)?;
    EigenFn::from_seed(path, seed)
}

/// Orthonormal basis of the eigenspace born at level `m0` for a named series.
pub fn series_eigenspace(series: Series, m0: usize) -> Result<Vec<Vec<f64>>> {
    let kind = if series.is_dirichlet() { BoundaryKind::Dirichlet } else { BoundaryKind::Neumann };
    let birth = series.birth_value().ok_or_else(|| Error::Invalid("generic series".into()))?;
    let spec = DiscreteSpectrum::shared(m0, kind)?;
    let c = spec.eigenspace(birth, CLUSTER_TOL)?;
    if c.multiplicity() != series.multiplicity(m0) {
        return Err(Error::Invalid(format!(
            "eigenspace of {birth} at level {m0} has dimension {}, series {series} needs {}",
            c.multiplicity(),
            series.multiplicity(m0)
        )));
    }
    Ok(c.vectors.clone())
}

/// Random member of a series eigenspace with Gaussian coefficients.
pub fn sample_series<R: Rng>(series: Series, m0: usize, eps: BranchWord, rng: &mut R) -> Result<EigenFn> {
    let basis = series_eigenspace(series, m0)?;
    let mut seed = vec![0.0; basis[0].len()];
    for b in &basis {
        let c: f64 = rng.sample(StandardNormal);
        for (s, x) in seed.iter_mut().zip(b) {
            *s += c * x;
        }
    }
    let path = DecimationPath::for_series(series, m0, eps)?;
    EigenFn::from_seed(path, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_spectra() {
        let d = DiscreteSpectrum::compute(1, BoundaryKind::Dirichlet).unwrap().multiset();
        assert_eq!(d.len(), 2);
        assert!((d[0].0 - 2.0).abs() < 1e-12 && d[0].1 == 1);
        assert!((d[1].0 - 5.0).abs() < 1e-12 && d[1].1 == 2);
        let n = DiscreteSpectrum::compute(1, BoundaryKind::Neumann).unwrap().multiset();
        let expect = [(0.0, 1), (3.0, 2), (6.0, 3)];
        assert_eq!(n.len(), 3);
        for (got, want) in n.iter().zip(expect) {
            assert!((got.0 - want.0).abs() < 1e-12 && got.1 == want.1);
        }
    }
}
