//! Exact counting of extreme sets.
//!
//! Past the level `n` where every cell function has eigenvalue below the first
//! Dirichlet eigenvalue, each cell holds at most one extreme set in its
//! interior, found by following the projected boundary triple through the
//! sub-triangles of `D_alpha`. The remaining extreme sets pass through `V_n`;
//! they are read off from the classifications of the cells meeting there.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eigenfunction::{EigenFn, ValueGrid};
use crate::error::{Error, Result};
use crate::gasket::{vertex_of, GasketGraph, VertexId, Word};
use crate::projective::apply_p;
use crate::regions::{classify_split, classify_triple, Pair, RegionClass, REGION_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtremeKind {
    Max,
    Min,
}

impl ExtremeKind {
    /// Kind of the extreme set of a cell function whose boundary values sum to `sum`.
    pub fn from_sum(sum: f64) -> ExtremeKind {
        if sum > 0.0 {
            ExtremeKind::Max
        } else {
            ExtremeKind::Min
        }
    }
}

impl fmt::Display for ExtremeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtremeKind::Max => "max",
            ExtremeKind::Min => "min",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Locus {
    Vertex(VertexId),
    /// Triangle through the three midpoints of the cell.
    CellTriangle(Word),
    /// Shrinking nest of cells cut off at the depth cap; the extreme set lies in this cell.
    CellLimit(Word),
    /// Tied vertices at the working level that form none of the shapes above.
    Plateau(Vec<VertexId>),
}

impl Locus {
    pub fn type_name(&self) -> &'static str {
        match self {
            Locus::Vertex(_) => "vertex",
            Locus::CellTriangle(_) => "cell_triangle",
            Locus::CellLimit(_) => "cell_limit",
            Locus::Plateau(_) => "plateau",
        }
    }

    pub fn label(&self) -> String {
        match self {
            Locus::Vertex(v) => v.to_string(),
            Locus::CellTriangle(w) | Locus::CellLimit(w) => w.to_string(),
            Locus::Plateau(vs) => vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeSet {
    pub kind: ExtremeKind,
    pub locus: Locus,
    /// For a `CellLimit` the extreme corner value of the last cell, which
    /// bounds the true value from inside.
    pub value: f64,
    /// Corner values of the last cell of a `CellLimit`.
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum Flag {
    /// A cell classification fell in the fragile band.
    NearBoundary { cell: Word },
    /// The locator stopped at the depth cap.
    DepthCap { cell: Word },
    /// The locator stopped where rounding could flip the next classification.
    ResolutionLimit { cell: Word },
    /// The exact count was abandoned for the grid count at this level.
    Fallback { level: usize },
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::NearBoundary { cell } => write!(f, "near_boundary:{cell}"),
            Flag::DepthCap { cell } => write!(f, "depth_cap:{cell}"),
            Flag::ResolutionLimit { cell } => write!(f, "resolution_limit:{cell}"),
            Flag::Fallback { level } => write!(f, "fallback:{level}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub count: usize,
    pub sets: Vec<ExtremeSet>,
    pub method: Method,
    pub level_used: usize,
    pub flags: Vec<Flag>,
}

impl CountReport {
    pub fn near_boundary(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, Flag::NearBoundary { .. }))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "count": self.count,
            "method": self.method,
            "level": self.level_used,
            "sets": self.sets.iter().map(|s| json!({
                "kind": s.kind.to_string(),
                "locus_type": s.locus.type_name(),
                "word_or_vertex": s.locus.label(),
                "value": s.value,
            })).collect::<Vec<_>>(),
            "flags": self.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremaOptions {
    pub region_tol: f64,
    /// Relative tolerance (of the sup norm) under which grid values are tied.
    pub tie_tol: f64,
    pub depth_cap: usize,
    pub max_level: usize,
    /// Fail with `Error::Ambiguous` instead of falling back to the grid count.
    pub strict: bool,
}

impl Default for ExtremaOptions {
    fn default() -> Self {
        ExtremaOptions { region_tol: REGION_TOL, tie_tol: 1e-12, depth_cap: 64, max_level: 12, strict: false }
    }
}

/// Result of the locator on one cell function.
#[derive(Debug, Clone, PartialEq)]
pub struct Located {
    pub set: Option<ExtremeSet>,
    pub flags: Vec<Flag>,
}

/// Follows the cell with boundary values `a` down the sub-triangles. `lambdas[k]`
/// is the decimation value `k` levels below the cell, `prefix` its word.
pub fn locate_cell(a: [f64; 3], lambdas: &[f64], prefix: &Word, opts: &ExtremaOptions) -> Result<Located> {
    let c = (a[0] + a[1] + a[2]) / 3.0;
    let mut d = a.map(|x| x - c);
    let kind = ExtremeKind::from_sum(a.iter().sum());
    let mut w = prefix.clone();
    let mut flags = Vec::new();
    let done = |set: ExtremeSet, flags: Vec<Flag>| Ok(Located { set: Some(set), flags });
    for depth in 0.. {
        if depth + 1 >= lambdas.len() {
            return Err(Error::Invalid("decimation sequence too short for the locator".into()));
        }
        let alpha = lambdas[depth];
        let next = lambdas[depth + 1];
        let cl = classify_split(alpha, c, d, opts.region_tol)?;
        if depth == 0 {
            if cl.near_boundary {
                if opts.strict {
                    return Err(Error::Ambiguous(format!("cell {w} near the boundary of D")));
                }
                flags.push(Flag::NearBoundary { cell: w.clone() });
            }
            if !cl.class.is_interior() {
                return Ok(Located { set: None, flags });
            }
        }
        // Rounding errors grow along the descent, so a small margin ends it.
        if cl.near_median || (depth > 0 && (cl.near_boundary || !cl.class.is_interior())) {
            flags.push(Flag::ResolutionLimit { cell: w.clone() });
            return done(cell_limit(kind, w, c, d), flags);
        }
        let full = d.map(|x| x + c);
        match cl.class {
            RegionClass::Theta => {
                let value = apply_p(1, next, full)[1];
                return done(ExtremeSet { kind, locus: Locus::CellTriangle(w), value, range: None }, flags);
            }
            RegionClass::SegmentL(pair) => {
                let (i, j) = pair.corners();
                let value = apply_p(i, next, full)[j as usize - 1];
                let locus = Locus::Vertex(vertex_of(&w.child(i), j));
                return done(ExtremeSet { kind, locus, value, range: None }, flags);
            }
            RegionClass::SubTriangleG(i) => {
                // P^i (c 1) = c (1 + next/(2-next) (1 - e_i)), so the constant part stays put.
                let shift = c * next / (2.0 - next);
                let mut nd = apply_p(i, next, d);
                for (k, x) in nd.iter_mut().enumerate() {
                    if k != i as usize - 1 {
                        *x += shift;
                    }
                }
                d = nd;
                w = w.child(i);
                if depth + 1 >= opts.depth_cap {
                    flags.push(Flag::DepthCap { cell: w.clone() });
                    return done(cell_limit(kind, w, c, d), flags);
                }
            }
            _ => unreachable!("non-interior classes end the descent above"),
        }
    }
    unreachable!("the locator loop only exits by returning")
}

fn cell_limit(kind: ExtremeKind, w: Word, c: f64, d: [f64; 3]) -> ExtremeSet {
    let vals = d.map(|x| x + c);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let value = if kind == ExtremeKind::Max { hi } else { lo };
    ExtremeSet { kind, locus: Locus::CellLimit(w), value, range: Some([lo, hi]) }
}

/// Extreme set of an eigenfunction with eigenvalue in `(0, lambda_1^D)` and
/// boundary data on `V_0`, if any.
pub fn locate_small_lambda(f: &EigenFn, opts: &ExtremaOptions) -> Result<Located> {
    if f.seed_level() != 0 || f.small_level() != 0 {
        return Err(Error::Invalid("locator needs boundary data with eigenvalue below lambda_1^D".into()));
    }
    if !(f.lambda > 0.0) {
        return Err(Error::Domain { op: "locate_small_lambda", value: f.lambda });
    }
    locate_cell(f.boundary(), f.lambdas_from(0), &Word::empty(), opts)
}

/// Vertex test for `F_w p_ij`, `|w| < n` with `n` the small level: the cell
/// triangle of `w` when `u o F_w` is constant on `V_0`, the single vertex when
/// the level-`n` cell `w j i..i` projects onto the edge `I_i`.
pub fn vertex_is_extreme(f: &EigenFn, w: &Word, pair: Pair, opts: &ExtremaOptions) -> Result<Option<ExtremeSet>> {
    let n = f.small_level();
    if w.len() >= n {
        return Err(Error::Invalid(format!("word {w} is not shorter than the small level {n}")));
    }
    let (i, j) = pair.corners();
    let a = f.cell_triple(w);
    let norm = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let spread = a.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) - a.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    if norm > 0.0 && spread <= opts.region_tol * norm {
        let kind = ExtremeKind::from_sum(a.iter().sum());
        let value = apply_p(1, f.lambda_at(w.len() + 1), a)[1];
        return Ok(Some(ExtremeSet { kind, locus: Locus::CellTriangle(w.clone()), value, range: None }));
    }
    let mut side = w.child(j);
    for _ in 0..n - w.len() - 1 {
        side = side.child(i);
    }
    let t = f.cell_triple(&side);
    let cl = classify_triple(f.lambda_at(n), t, opts.region_tol)?;
    if cl.near_boundary && opts.strict {
        return Err(Error::Ambiguous(format!("cell {side} near the boundary of D")));
    }
    if cl.class != RegionClass::EdgeI(i) {
        return Ok(None);
    }
    let value = t[i as usize - 1];
    let kind = ExtremeKind::from_sum(t.iter().sum());
    Ok(Some(ExtremeSet { kind, locus: Locus::Vertex(vertex_of(&w.child(i), j)), value, range: None }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CellState {
    Dead,
    Interior,
    /// Zero derivative at this corner, the other two of one sign.
    Peak(u8, ExtremeKind),
    /// Constant along the edge between these corners.
    Ridge(Pair, ExtremeKind),
    Plain,
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Names a tied set of level-`m` vertices: a single vertex, the middle triangle
/// of a cell when the coarsest members are that cell's three midpoints and the
/// size fits, otherwise the vertex list.
fn plateau_locus(g: &GasketGraph, members: &[usize]) -> Locus {
    if members.len() == 1 {
        return Locus::Vertex(g.vertex_id(members[0]));
    }
    let b = members.iter().map(|&v| g.birth_level(v)).min().expect("nonempty plateau");
    let coarse: Vec<usize> = members.iter().copied().filter(|&v| g.birth_level(v) == b).collect();
    if b >= 1 && coarse.len() == 3 && members.len() == 3 << (g.level() - b) {
        let cells: Vec<(usize, usize)> = coarse.iter().filter_map(|&v| g.birth_cell(v)).collect();
        if cells.len() == 3 && cells.iter().all(|c| c.0 == cells[0].0) {
            return Locus::CellTriangle(Word::from_index(b - 1, cells[0].0));
        }
    }
    let mut ids: Vec<VertexId> = members.iter().map(|&v| g.vertex_id(v)).collect();
    ids.sort_by_key(|v| v.bary);
    Locus::Plateau(ids)
}

/// Exact count `N(u)`: locator on every level-`n` cell plus the extreme sets
/// through `V_n`. A fragile classification switches to [`count_discrete`] at
/// level `min(n + 8, max_level)` unless `opts.strict`.
pub fn count_exact(f: &EigenFn, opts: &ExtremaOptions) -> Result<CountReport> {
    if f.lambda == 0.0 {
        return Ok(CountReport { count: 0, sets: vec![], method: Method::Exact, level_used: 0, flags: vec![] });
    }
    if !(f.lambda > 0.0) {
        return Err(Error::Domain { op: "count_exact", value: f.lambda });
    }
    let n = f.small_level();
    if n > opts.max_level {
        return Err(Error::LevelTooLarge { level: n, limit: opts.max_level });
    }
    let grid = f.extend(n)?;
    let g = grid.graph.clone();
    let u = &grid.values;
    let norm = grid.sup_norm();
    let alpha = f.lambda_at(n);
    let tail = f.lambdas_from(n);
    let cells = g.cells(n);

    let mut sets = Vec::new();
    let mut flags = Vec::new();
    let mut states = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        let a = cell.map(|v| u[v as usize]);
        if a.iter().all(|x| x.abs() <= opts.tie_tol * norm) {
            states.push(CellState::Dead);
            continue;
        }
        let kind = ExtremeKind::from_sum(a.iter().sum());
        let cl = classify_triple(alpha, a, opts.region_tol)?;
        if cl.near_boundary {
            flags.push(Flag::NearBoundary { cell: Word::from_index(n, ci) });
        }
        states.push(match cl.class {
            c if c.is_interior() => CellState::Interior,
            RegionClass::EdgeI(i) => CellState::Peak(i, kind),
            RegionClass::VertexZeta(pair) => CellState::Ridge(pair, kind),
            _ => CellState::Plain,
        });
    }
    if !flags.is_empty() {
        if opts.strict {
            return Err(Error::Ambiguous(format!("{} fragile cell classifications", flags.len())));
        }
        let level = (n + 8).min(opts.max_level).max(n);
        let mut rep = count_discrete(&f.extend(level)?, opts.tie_tol);
        flags.push(Flag::Fallback { level });
        rep.flags = flags;
        return Ok(rep);
    }

    for (ci, cell) in cells.iter().enumerate() {
        if states[ci] == CellState::Interior {
            let a = cell.map(|v| u[v as usize]);
            let found = locate_cell(a, tail, &Word::from_index(n, ci), opts)?;
            flags.extend(found.flags);
            sets.extend(found.set);
        }
    }

    // Each vertex off V_0 joins two cells; it is extreme when both see it as a
    // peak or a ridge end of one kind. Ridges glue vertices into plateaus.
    let mut sides: Vec<Vec<Option<ExtremeKind>>> = vec![Vec::new(); g.len()];
    let mut ds = DisjointSets::new(g.len());
    for (ci, cell) in cells.iter().enumerate() {
        for corner in 1..=3u8 {
            let v = cell[corner as usize - 1] as usize;
            let side = match states[ci] {
                CellState::Peak(i, k) if i == corner => Some(k),
                CellState::Ridge(pair, k) => {
                    let (p, q) = pair.corners();
                    if corner == p || corner == q {
                        let other = if corner == p { q } else { p };
                        ds.union(v, cell[other as usize - 1] as usize);
                        Some(k)
                    } else {
                        None
                    }
                }
                _ => None,
            };
            sides[v].push(side);
        }
    }
    let vertex_kind = |v: usize| -> Option<ExtremeKind> {
        match sides[v].as_slice() {
            [Some(a), Some(b)] if a == b && v >= 3 => Some(*a),
            _ => None,
        }
    };
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..g.len() {
        if sides[v].iter().any(Option::is_some) {
            components.entry(ds.find(v)).or_default().push(v);
        }
    }
    for members in components.values() {
        let kinds: Vec<Option<ExtremeKind>> = members.iter().map(|&v| vertex_kind(v)).collect();
        let Some(kind) = kinds[0] else { continue };
        if kinds.iter().any(|k| *k != Some(kind)) {
            continue;
        }
        let value = members.iter().map(|&v| u[v]).sum::<f64>() / members.len() as f64;
        sets.push(ExtremeSet { kind, locus: plateau_locus(&g, members), value, range: None });
    }
    Ok(CountReport { count: sets.len(), sets, method: Method::Exact, level_used: n, flags })
}

/// Grid estimate of `N(u)`: tied vertex components (ties within `tie_tol`
/// times the sup norm) off `V_0` whose outer neighbours are all strictly below,
/// or all strictly above.
pub fn count_discrete(grid: &ValueGrid, tie_tol: f64) -> CountReport {
    let g = &grid.graph;
    let u = &grid.values;
    let tie = tie_tol * grid.sup_norm();
    let mut ds = DisjointSets::new(g.len());
    for (a, b) in g.edges() {
        if (u[a] - u[b]).abs() <= tie {
            ds.union(a, b);
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..g.len() {
        components.entry(ds.find(v)).or_default().push(v);
    }
    let mut sets = Vec::new();
    for (root, members) in &components {
        if members.iter().any(|&v| g.is_boundary(v)) {
            continue;
        }
        let (mut above, mut below) = (false, false);
        for &v in members {
            for &q in g.neighbors(v) {
                let q = q as usize;
                if ds.find(q) == *root {
                    continue;
                }
                if u[q] > u[v] {
                    above = true;
                } else {
                    below = true;
                }
            }
        }
        let kind = match (above, below) {
            (false, true) => ExtremeKind::Max,
            (true, false) => ExtremeKind::Min,
            _ => continue,
        };
        let value = members.iter().map(|&v| u[v]).sum::<f64>() / members.len() as f64;
        sets.push(ExtremeSet { kind, locus: plateau_locus(g, members), value, range: None });
    }
    CountReport { count: sets.len(), sets, method: Method::Discrete, level_used: g.level(), flags: vec![] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decimation::{DecimationPath, Series};
    use crate::oracle::series_eigenspace;

    #[test]
    fn dirichlet_ground_state_is_one_triangle() {
        let seed = series_eigenspace(Series::D2, 1).unwrap().remove(0);
        let f = EigenFn::from_seed(DecimationPath::for_series(Series::D2, 1, crate::decimation::BranchWord::empty()).unwrap(), seed).unwrap();
        let rep = count_exact(&f, &ExtremaOptions::default()).unwrap();
        assert_eq!(rep.count, 1, "{rep:?}");
        assert_eq!(rep.sets[0].locus, Locus::CellTriangle(Word::empty()));
        let disc = count_discrete(&f.extend(8).unwrap(), 1e-12);
        assert_eq!(disc.count, 1, "{disc:?}");
        assert_eq!(disc.sets[0].locus, Locus::CellTriangle(Word::empty()));
    }

    #[test]
    fn constant_boundary_gives_middle_triangle() {
        let f = EigenFn::small(3.0, [1.0, 1.0, 1.0]).unwrap();
        let loc = locate_small_lambda(&f, &ExtremaOptions::default()).unwrap();
        let set = loc.set.unwrap();
        assert_eq!(set.locus, Locus::CellTriangle(Word::empty()));
        assert_eq!(set.kind, ExtremeKind::Max);
        assert!(set.value > 1.0);
    }
}
