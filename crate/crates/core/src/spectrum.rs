//! Dirichlet and Neumann spectra by series, counting functions, and the
//! partition of words by the size `gamma_w^2 x` of their cells.

use serde::Serialize;

use crate::decimation::{constants, BranchWord, DecimationPath, Series};
use crate::error::{Error, Result};
use crate::gasket::{BoundaryKind, Word};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub series: Series,
    pub m0: usize,
    pub eps: BranchWord,
    pub multiplicity: usize,
}

impl SpectrumEntry {
    pub fn path(&self) -> Result<DecimationPath> {
        DecimationPath::for_series(self.series, self.m0, self.eps.clone())
    }
}

fn series_of(kind: BoundaryKind) -> &'static [Series] {
    match kind {
        BoundaryKind::Dirichlet => &Series::ALL_DIRICHLET,
        BoundaryKind::Neumann => &Series::ALL_NEUMANN,
    }
}

/// Every eigenvalue up to `x_max` (with relative slack `1e-9`) with its series
/// data, sorted by eigenvalue. Enumeration stops at `5^(m+|eps|) psi(2) > x_max`.
pub fn enumerate_spectrum(kind: BoundaryKind, x_max: f64) -> Result<Vec<SpectrumEntry>> {
    if !(x_max >= 0.0) {
        return Err(Error::Domain { op: "enumerate_spectrum", value: x_max });
    }
    let cap = x_max * (1.0 + 1e-9);
    let floor = constants().psi2;
    let mut out = Vec::new();
    for &series in series_of(kind) {
        if series == Series::N0 {
            out.push(SpectrumEntry { lambda: 0.0, series, m0: 1, eps: BranchWord::empty(), multiplicity: 1 });
            continue;
        }
        let (lo, hi) = series.birth_levels();
        let forced = usize::from(series.birth_value() == Some(6.0));
        let mut m0 = lo;
        while hi.is_none_or(|h| m0 <= h) && 5f64.powi((m0 + forced) as i32) * floor <= cap {
            let mut k = 0;
            while 5f64.powi((m0 + forced + k) as i32) * floor <= cap {
                for eps in BranchWord::all_of_length(k) {
                    let path = DecimationPath::for_series(series, m0, eps.clone())?;
                    let lambda = path.eigenvalue()?;
                    if lambda <= cap {
                        out.push(SpectrumEntry { lambda, series, m0, eps, multiplicity: series.multiplicity(m0) });
                    }
                }
                k += 1;
            }
            m0 += 1;
        }
    }
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(out)
}

pub fn spectrum_csv(entries: &[SpectrumEntry]) -> String {
    let mut out = String::from("lambda,series,m0,eps,multiplicity\n");
    for e in entries {
        out.push_str(&format!("{:.12},{},{},{},{}\n", e.lambda, e.series, e.m0, e.eps, e.multiplicity));
    }
    out
}

/// Number of eigenvalues `<= x`, with multiplicity.
pub fn counting_function(kind: BoundaryKind, x: f64) -> Result<usize> {
    Ok(enumerate_spectrum(kind, x)?.iter().filter(|e| e.lambda <= x).map(|e| e.multiplicity).sum())
}

/// `rho(x) / x^(d_S/2)`.
pub fn weyl_ratio(kind: BoundaryKind, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain { op: "weyl_ratio", value: x });
    }
    Ok(counting_function(kind, x)? as f64 / x.powf(constants().d_s / 2.0))
}

/// `x,rho,ratio` rows for `points` log-spaced values in `[x_min, x_max]`.
pub fn weyl_sweep_csv(kind: BoundaryKind, x_min: f64, x_max: f64, points: usize) -> Result<String> {
    let entries = enumerate_spectrum(kind, x_max)?;
    let ds = constants().d_s;
    let mut out = String::from("x,rho,ratio\n");
    for k in 0..points {
        let t = if points > 1 { k as f64 / (points - 1) as f64 } else { 0.0 };
        let x = x_min * (x_max / x_min).powf(t);
        let rho: usize = entries.iter().filter(|e| e.lambda <= x).map(|e| e.multiplicity).sum();
        out.push_str(&format!("{x:.6},{rho},{:.9}\n", rho as f64 / x.powf(ds / 2.0)));
    }
    Ok(out)
}

/// Exponent `d` with `sum gamma_i^d = 1`.
pub fn similarity_dimension(gammas: &[f64; 3]) -> Result<f64> {
    if gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
        return Err(Error::Invalid(format!("contractions must lie in (0,1): {gammas:?}")));
    }
    let f = |d: f64| gammas.iter().map(|g| g.powf(d)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Relative slack for deciding `gamma_w^2 x >= 1` at an exact threshold.
pub const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct ThetaPartition {
    pub x: f64,
    pub gammas: [f64; 3],
    pub d_s: f64,
    pub words: Vec<Word>,
}

/// Words `w` with `gamma_{w'}^2 x >= 1 > gamma_w^2 x`, `w'` the parent of `w`.
/// A cell at exactly the threshold is still refined.
pub fn theta_partition(x: f64, gammas: [f64; 3]) -> Result<ThetaPartition> {
    if !(x >= 1.0) {
        return Err(Error::Domain { op: "theta_partition", value: x });
    }
    let d_s = similarity_dimension(&gammas)?;
    let mut words = Vec::new();
    let mut stack = vec![(Word::empty(), 1.0f64)];
    while let Some((w, g2)) = stack.pop() {
        if g2 * x < 1.0 - THRESHOLD_SLACK {
            words.push(w);
            continue;
        }
        for i in (1..=3u8).rev() {
            let gi = gammas[i as usize - 1];
            stack.push((w.child(i), g2 * gi * gi));
        }
    }
    words.sort();
    Ok(ThetaPartition { x, gammas, d_s, words })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionCheck {
    pub count: usize,
    pub prefix_free: bool,
    pub covering: bool,
    /// `|sum gamma_w^d_S - 1|`.
    pub mass_defect: f64,
    pub lower: f64,
    pub upper: f64,
    pub bounds_hold: bool,
}

impl ThetaPartition {
    pub fn gamma(&self, w: &Word) -> f64 {
        w.symbols().iter().map(|&i| self.gammas[i as usize - 1]).product()
    }

    /// Prefix-freeness, covering of all words of the maximal length, mass
    /// identity and `x^(d_S/2) < theta(x) <= C^d_S x^(d_S/2)`, `C = 1/min gamma`.
    pub fn check(&self) -> PartitionCheck {
        let count = self.words.len();
        let mut prefix_free = true;
        for pair in self.words.windows(2) {
            if pair[0].is_prefix_of(&pair[1]) {
                prefix_free = false;
            }
        }
        let depth = self.words.iter().map(Word::len).max().unwrap_or(0);
        // Prefix-free words cover disjoint sets of depth-`depth` words.
        let covered: u128 = self.words.iter().map(|w| 3u128.pow((depth - w.len()) as u32)).sum();
        let covering = prefix_free && covered == 3u128.pow(depth as u32);
        let mass: f64 = self.words.iter().map(|w| self.gamma(w).powf(self.d_s)).sum();
        let c = 1.0 / self.gammas.iter().cloned().fold(f64::INFINITY, f64::min);
        let lower = self.x.powf(self.d_s / 2.0);
        let upper = c.powf(self.d_s) * lower;
        let n = count as f64;
        PartitionCheck {
            count,
            prefix_free,
            covering,
            mass_defect: (mass - 1.0).abs(),
            lower,
            upper,
            bounds_hold: n > lower && n <= upper * (1.0 + 1e-12),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        let g = [0.2f64.sqrt(); 3];
        let t = theta_partition(1.0, g).unwrap();
        assert_eq!(t.words.len(), 3);
        let t = theta_partition(25.0, g).unwrap();
        assert_eq!(t.words.len(), 27);
        assert!(t.check().bounds_hold);
    }

    #[test]
    fn dirichlet_ground_state_first() {
        let e = enumerate_spectrum(BoundaryKind::Dirichlet, 200.0).unwrap();
        assert_eq!(e[0].series, Series::D2);
        assert!((e[0].lambda - constants().lambda1_dirichlet).abs() < 1e-9);
    }
}
