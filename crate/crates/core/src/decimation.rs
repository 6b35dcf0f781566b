//! Spectral decimation scalars: the map `x(5 - x)`, its two inverse branches,
//! the renormalised limit `psi`, and decimation paths that pin down one
//! eigenvalue together with its level-by-level discrete values.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right end of the domain of both inverse branches.
pub const BRANCH_DOMAIN_MAX: f64 = 6.25;
/// Values a decimation sequence may not take after its birth level.
pub const FORBIDDEN: [f64; 3] = [2.0, 5.0, 6.0];
/// Absolute guard band around the forbidden values.
pub const FORBIDDEN_GUARD: f64 = 1e-12;
/// Default relative stopping tolerance for `psi`.
pub const PSI_TOL: f64 = 1e-13;
const PSI_MAX_ITER: usize = 200;
const PSI_INVERSE_STEPS: usize = 60;

pub fn phi_forward(x: f64) -> f64 {
    x * (5.0 - x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn as_char(self) -> char {
        match self {
            Sign::Minus => '-',
            Sign::Plus => '+',
        }
    }
}

/// Inverse branch of `phi_forward`. The minus branch is evaluated in the
/// cancellation-free form `2x / (5 + sqrt(25 - 4x))`.
pub fn phi_branch(sign: Sign, x: f64) -> Result<f64> {
    if !(x <= BRANCH_DOMAIN_MAX) {
        return Err(Error::Domain { op: "phi_branch", value: x });
    }
    let root = (25.0 - 4.0 * x).max(0.0).sqrt();
    Ok(match sign {
        Sign::Minus => 2.0 * x / (5.0 + root),
        Sign::Plus => 0.5 * (5.0 + root),
    })
}

pub fn psi(x: f64) -> Result<f64> {
    psi_with_tol(x, PSI_TOL)
}

/// `1.5 * lim 5^m phi_-^m(x)`, stopped when successive iterates agree to a
/// relative `tol`.
pub fn psi_with_tol(x: f64, tol: f64) -> Result<f64> {
    if !(x < BRANCH_DOMAIN_MAX) {
        return Err(Error::Domain { op: "psi", value: x });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut y = x;
    let mut scale = 1.5;
    let mut value = scale * y;
    for _ in 0..PSI_MAX_ITER {
        y = phi_branch(Sign::Minus, y)?;
        scale *= 5.0;
        let next = scale * y;
        if (next - value).abs() <= tol * next.abs() {
            return Ok(next);
        }
        value = next;
    }
    Err(Error::NoConvergence { op: "psi", iterations: PSI_MAX_ITER })
}

/// Inverse of `psi` on `[0, 6.25)` by bisection. Uses `psi(x) >= 1.5 x` for the
/// upper end of the bracket so small arguments keep relative accuracy.
pub fn psi_inverse(y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::Domain { op: "psi_inverse", value: y });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let top = BRANCH_DOMAIN_MAX - 1e-12;
    let mut hi = (y / 1.5).min(top);
    if psi(hi)? < y {
        if hi >= top {
            return Err(Error::Domain { op: "psi_inverse", value: y });
        }
        hi = top;
        if psi(hi)? < y {
            return Err(Error::Domain { op: "psi_inverse", value: y });
        }
    }
    let mut lo = 0.0;
    for _ in 0..PSI_INVERSE_STEPS {
        let mid = 0.5 * (lo + hi);
        if psi(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Word over {-1, +1}; non-empty words must end in +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BranchWord(Vec<Sign>);

impl BranchWord {
    pub fn new(signs: Vec<Sign>) -> Result<Self> {
        if signs.last() == Some(&Sign::Minus) {
            return Err(Error::TrailingMinus);
        }
        Ok(BranchWord(signs))
    }

    pub fn empty() -> Self {
        BranchWord(Vec::new())
    }

    pub fn signs(&self) -> &[Sign] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All admissible words of length exactly `k`.
    pub fn all_of_length(k: usize) -> Vec<BranchWord> {
        if k == 0 {
            return vec![BranchWord::empty()];
        }
        (0..1u64 << (k - 1))
            .map(|bits| {
                let mut v: Vec<Sign> = (0..k - 1)
                    .map(|b| if bits >> b & 1 == 1 { Sign::Plus } else { Sign::Minus })
                    .collect();
                v.push(Sign::Plus);
                BranchWord(v)
            })
            .collect()
    }
}

impl fmt::Display for BranchWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for BranchWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '+' => Ok(Sign::Plus),
                '-' => Ok(Sign::Minus),
                other => Err(Error::Invalid(format!("bad branch symbol {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        BranchWord::new(signs)
    }
}

impl TryFrom<String> for BranchWord {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BranchWord> for String {
    fn from(w: BranchWord) -> String {
        w.to_string()
    }
}

/// Birth pattern of an eigenfunction family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Series {
    D2,
    D5,
    D6,
    N0,
    N5,
    N6,
    #[serde(rename = "N6'")]
    N6Prime,
    #[serde(rename = "generic")]
    Generic,
}

impl Series {
    pub const ALL_DIRICHLET: [Series; 3] = [Series::D2, Series::D5, Series::D6];
    pub const ALL_NEUMANN: [Series; 4] = [Series::N0, Series::N5, Series::N6, Series::N6Prime];

    pub fn label(self) -> &'static str {
        match self {
            Series::D2 => "D2",
            Series::D5 => "D5",
            Series::D6 => "D6",
            Series::N0 => "N0",
            Series::N5 => "N5",
            Series::N6 => "N6",
            Series::N6Prime => "N6'",
            Series::Generic => "generic",
        }
    }

    pub fn birth_value(self) -> Option<f64> {
        match self {
            Series::D2 => Some(2.0),
            Series::D5 | Series::N5 => Some(5.0),
            Series::D6 | Series::N6 => Some(6.0),
            Series::N0 => Some(0.0),
            Series::N6Prime => Some(3.0),
            Series::Generic => None,
        }
    }

    pub fn is_dirichlet(self) -> bool {
        matches!(self, Series::D2 | Series::D5 | Series::D6)
    }

    /// Admissible birth levels: `None` means unbounded above.
    pub fn birth_levels(self) -> (usize, Option<usize>) {
        match self {
            Series::D2 | Series::N0 | Series::N6Prime => (1, Some(1)),
            Series::D5 | Series::N6 => (1, None),
            Series::D6 | Series::N5 => (2, None),
            Series::Generic => (0, None),
        }
    }

    /// Dimension of the eigenspace born at level `m0`.
    pub fn multiplicity(self, m0: usize) -> usize {
        let p = |k: usize| 3usize.pow(k as u32);
        match self {
            Series::D2 | Series::N0 => 1,
            Series::N6Prime => 2,
            Series::D5 => (p(m0 - 1) + 3) / 2,
            Series::D6 => (p(m0) - 3) / 2,
            Series::N5 => (p(m0 - 1) - 1) / 2,
            Series::N6 => (p(m0) + 3) / 2,
            Series::Generic => 1,
        }
    }
}

impl FromStr for Series {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "D2" => Series::D2,
            "D5" => Series::D5,
            "D6" => Series::D6,
            "N0" => Series::N0,
            "N5" => Series::N5,
            "N6" => Series::N6,
            "N6'" | "N6p" => Series::N6Prime,
            "generic" | "Generic" => Series::Generic,
            other => return Err(Error::Invalid(format!("unknown series {other:?}"))),
        })
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn check_forbidden(level: usize, value: f64) -> Result<()> {
    if FORBIDDEN.iter().any(|f| (value - f).abs() <= FORBIDDEN_GUARD) {
        return Err(Error::ForbiddenValue { level, value });
    }
    Ok(())
}

/// Birth level and value, branch word, and series tag. A birth value of 6
/// forces the next value to 3 before the word is consumed. Level 0 births
/// describe functions fixed by their boundary values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationPath {
    pub m0: usize,
    pub lambda_birth: f64,
    pub eps: BranchWord,
    pub series: Series,
}

impl DecimationPath {
    pub fn new(m0: usize, lambda_birth: f64, eps: BranchWord, series: Series) -> Result<Self> {
        if !(0.0..=BRANCH_DOMAIN_MAX).contains(&lambda_birth) {
            return Err(Error::Domain { op: "DecimationPath", value: lambda_birth });
        }
        let path = DecimationPath { m0, lambda_birth, eps, series };
        path.lambda_sequence(path.small_level() + 2)?;
        Ok(path)
    }

    /// Path of a named series born at `m0`.
    pub fn for_series(series: Series, m0: usize, eps: BranchWord) -> Result<Self> {
        let birth = series
            .birth_value()
            .ok_or_else(|| Error::Invalid("generic series has no birth value".into()))?;
        let (lo, hi) = series.birth_levels();
        if m0 < lo || hi.is_some_and(|h| m0 > h) {
            return Err(Error::Invalid(format!("series {series} cannot be born at level {m0}")));
        }
        if series == Series::N0 && !eps.is_empty() {
            return Err(Error::Invalid("the constant series has no branch word".into()));
        }
        DecimationPath::new(m0, birth, eps, series)
    }

    /// Function determined by boundary values at level 0 with `lambda_0` given.
    pub fn from_level_zero(lambda0: f64, eps: BranchWord) -> Result<Self> {
        DecimationPath::new(0, lambda0, eps, Series::Generic)
    }

    /// Eigenvalue below the first Dirichlet eigenvalue, as a level-0 path.
    pub fn small(lambda: f64) -> Result<Self> {
        DecimationPath::from_level_zero(psi_inverse(lambda)?, BranchWord::empty())
    }

    pub fn forced(&self) -> bool {
        self.lambda_birth == 6.0
    }

    /// First level from which every later step takes the minus branch.
    pub fn small_level(&self) -> usize {
        self.m0 + usize::from(self.forced()) + self.eps.len()
    }

    fn step(&self, level: usize, value: f64) -> Result<f64> {
        // `level` is the level of `value`; returns the value at level + 1.
        let k = level - self.m0;
        let forced = usize::from(self.forced());
        if k < forced {
            return phi_branch(Sign::Plus, value);
        }
        let sign = self.eps.signs().get(k - forced).copied().unwrap_or(Sign::Minus);
        phi_branch(sign, value)
    }

    /// `lambda_m` for `m` in `m0..=m_max`.
    pub fn lambda_sequence(&self, m_max: usize) -> Result<Vec<f64>> {
        if m_max < self.m0 {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(m_max - self.m0 + 1);
        let mut value = self.lambda_birth;
        out.push(value);
        for level in self.m0..m_max {
            value = self.step(level, value)?;
            check_forbidden(level + 1, value)?;
            out.push(value);
        }
        Ok(out)
    }

    pub fn lambda_at(&self, m: usize) -> Result<f64> {
        if m < self.m0 {
            return Err(Error::Invalid(format!("level {m} precedes birth level {}", self.m0)));
        }
        Ok(*self.lambda_sequence(m)?.last().expect("non-empty"))
    }

    /// Continuum eigenvalue `5^n psi(lambda_n)` with `n = small_level()`.
    pub fn eigenvalue(&self) -> Result<f64> {
        let n = self.small_level();
        Ok(5f64.powi(n as i32) * psi(self.lambda_at(n)?)?)
    }

    /// Path of the same function restricted to a cell of depth `k`.
    pub fn shifted(&self, k: usize) -> Result<Self> {
        if k <= self.m0 {
            return Ok(DecimationPath { m0: self.m0 - k, series: Series::Generic, ..self.clone() });
        }
        let birth = self.lambda_at(k)?;
        let used = (k - self.m0).saturating_sub(usize::from(self.forced()));
        let rest = self.eps.signs().get(used.min(self.eps.len())..).unwrap_or(&[]).to_vec();
        Ok(DecimationPath { m0: 0, lambda_birth: birth, eps: BranchWord(rest), series: Series::Generic })
    }
}

/// `phi_eps(x)`, applying the first symbol first.
pub fn phi_word(eps: &BranchWord, x: f64) -> Result<f64> {
    eps.signs().iter().try_fold(x, |v, &s| phi_branch(s, v))
}

/// `5^(m + |eps|) psi(phi_eps(x))`.
pub fn big_psi(m: usize, eps: &BranchWord, x: f64) -> Result<f64> {
    let inner = phi_word(eps, x)?;
    Ok(5f64.powi((m + eps.len()) as i32) * psi(inner)?)
}

/// Constants of the gasket that recur in the counting bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralConstants {
    /// Spectral dimension `log 9 / log 5`.
    pub d_s: f64,
    /// Common contraction of the energy weights, `gamma^2 = 1/5`.
    pub gamma: f64,
    pub lambda1_dirichlet: f64,
    pub lambda2_neumann: f64,
    pub psi2: f64,
    pub psi3: f64,
    pub psi5: f64,
}

pub fn constants() -> &'static SpectralConstants {
    static C: OnceLock<SpectralConstants> = OnceLock::new();
    C.get_or_init(|| {
        let p = |x: f64| psi(x).expect("psi on (0, 6)");
        SpectralConstants {
            d_s: 9f64.ln() / 5f64.ln(),
            gamma: 0.2f64.sqrt(),
            lambda1_dirichlet: 5.0 * p(2.0),
            lambda2_neumann: 5.0 * p(3.0),
            psi2: p(2.0),
            psi3: p(3.0),
            psi5: p(5.0),
        }
    })
}
