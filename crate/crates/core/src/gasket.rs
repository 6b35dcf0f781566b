//! Words, vertices and the level-m approximating graphs of the gasket.
//!
//! Vertices are numbered level by level: `V_0` takes indices 0..3 and the three
//! midpoints born inside cell `c` of level `k` take `|V_k| + 3c + o`, where
//! `o = 0, 1, 2` stands for the midpoints opposite corners 1, 2, 3. Hence the
//! vertices of `V_k` are exactly the first `|V_k|` indices at every finer level.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_LEVEL: usize = 14;

/// `|V_m| = (3^(m+1) + 3) / 2`.
pub fn vertex_count(m: usize) -> usize {
    (3usize.pow(m as u32 + 1) + 3) / 2
}

pub fn cell_count(m: usize) -> usize {
    3usize.pow(m as u32)
}

/// Word over {1, 2, 3}; the empty word is the whole gasket.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if symbols.iter().any(|s| !(1..=3).contains(s)) {
            return Err(Error::Invalid(format!("word symbols must be 1, 2 or 3: {symbols:?}")));
        }
        Ok(Word(symbols))
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: u8) -> Word {
        let mut v = self.0.clone();
        v.push(i);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Position among the words of the same length in lexicographic order.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &s| acc * 3 + (s as usize - 1))
    }

    pub fn from_index(len: usize, mut idx: usize) -> Word {
        let mut v = vec![1u8; len];
        for slot in v.iter_mut().rev() {
            *slot = (idx % 3) as u8 + 1;
            idx /= 3;
        }
        Word(v)
    }

    pub fn all_of_length(len: usize) -> impl Iterator<Item = Word> {
        (0..cell_count(len)).map(move |i| Word::from_index(len, i))
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("()");
        }
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "()" || s.is_empty() {
            return Ok(Word::empty());
        }
        let v = s
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(|| Error::Invalid(format!("bad word {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Word::new(v)
    }
}

impl TryFrom<String> for Word {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

/// Vertex of `V_level` in integer barycentric coordinates summing to `2^level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub level: usize,
    pub bary: [u32; 3],
}

impl VertexId {
    /// Same point written at the coarsest level where it exists.
    pub fn canonical(self) -> VertexId {
        let mut v = self;
        while v.level > 0 && v.bary.iter().all(|c| c % 2 == 0) {
            v.level -= 1;
            v.bary = v.bary.map(|c| c / 2);
        }
        v
    }

    /// Same point at a finer level.
    pub fn at_level(self, level: usize) -> VertexId {
        assert!(level >= self.level);
        let f = 1u32 << (level - self.level);
        VertexId { level, bary: self.bary.map(|c| c * f) }
    }

    /// Euclidean position with corners on the unit triangle `p1=(0,0), p2=(1,0), p3=(1/2, sqrt3/2)`.
    pub fn position(self) -> [f64; 2] {
        let s = (1u64 << self.level) as f64;
        let b = self.bary.map(|c| c as f64 / s);
        [b[1] + 0.5 * b[2], b[2] * 3f64.sqrt() / 2.0]
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}/{}/{}", self.level, self.bary[0], self.bary[1], self.bary[2])
    }
}

/// `F_w p_i` (corner `i` in 1..=3) at level `|w|`.
pub fn vertex_of(w: &Word, i: u8) -> VertexId {
    assert!((1..=3).contains(&i));
    let mut c = [0u32; 3];
    c[i as usize - 1] = 1;
    for (k, &j) in w.symbols().iter().rev().enumerate() {
        c[j as usize - 1] += 1 << k;
    }
    VertexId { level: w.len(), bary: c }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

impl FromStr for BoundaryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" | "D" | "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "n" | "N" | "neumann" => Ok(BoundaryKind::Neumann),
            other => Err(Error::Invalid(format!("unknown boundary kind {other:?}"))),
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
        })
    }
}

/// Level-m graph `Gamma_m` together with the cell structure of every coarser level.
#[derive(Debug)]
pub struct GasketGraph {
    level: usize,
    coords: Vec<[u32; 3]>,
    cells: Vec<Vec<[u32; 3]>>,
    neighbors: Vec<[u32; 4]>,
    degree: Vec<u8>,
    lookup: HashMap<[u32; 3], u32>,
}

impl GasketGraph {
    pub fn build(m: usize) -> Result<Self> {
        if m > MAX_LEVEL {
            return Err(Error::LevelTooLarge { level: m, limit: MAX_LEVEL });
        }
        let top = 1u32 << m;
        let mut coords = vec![[top, 0, 0], [0, top, 0], [0, 0, top]];
        coords.reserve(vertex_count(m) - 3);
        let mut cells: Vec<Vec<[u32; 3]>> = vec![vec![[0, 1, 2]]];
        for k in 0..m {
            let prev = &cells[k];
            let base = vertex_count(k) as u32;
            let mut next = Vec::with_capacity(prev.len() * 3);
            for (c, corners) in prev.iter().enumerate() {
                let mid = |o: u32| base + 3 * c as u32 + o;
                let (m23, m31, m12) = (mid(0), mid(1), mid(2));
                for (a, b) in [(1, 2), (2, 0), (0, 1)] {
                    let pa = coords[corners[a] as usize];
                    let pb = coords[corners[b] as usize];
                    coords.push([(pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2, (pa[2] + pb[2]) / 2]);
                }
                next.push([corners[0], m12, m31]);
                next.push([m12, corners[1], m23]);
                next.push([m31, m23, corners[2]]);
            }
            cells.push(next);
        }
        let n = coords.len();
        let mut neighbors = vec![[u32::MAX; 4]; n];
        let mut degree = vec![0u8; n];
        for cell in &cells[m] {
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                for (p, q) in [(cell[a], cell[b]), (cell[b], cell[a])] {
                    let d = &mut degree[p as usize];
                    neighbors[p as usize][*d as usize] = q;
                    *d += 1;
                }
            }
        }
        let lookup = coords.iter().enumerate().map(|(i, c)| (*c, i as u32)).collect();
        Ok(GasketGraph { level: m, coords, cells, neighbors, degree, lookup })
    }

    /// Process-wide cache of built graphs.
    pub fn shared(m: usize) -> Result<Arc<GasketGraph>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GasketGraph>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(g) = cache.lock().expect("graph cache").get(&m) {
            return Ok(g.clone());
        }
        let g = Arc::new(GasketGraph::build(m)?);
        cache.lock().expect("graph cache").entry(m).or_insert_with(|| g.clone());
        Ok(g)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        3 * self.cells[self.level].len()
    }

    /// Corner vertex indices of the cells of level `k`, indexed by `Word::index`.
    pub fn cells(&self, k: usize) -> &[[u32; 3]] {
        &self.cells[k]
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[v][..self.degree[v] as usize]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degree[v] as usize
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        v < 3
    }

    pub fn vertex_id(&self, v: usize) -> VertexId {
        VertexId { level: self.level, bary: self.coords[v] }.canonical()
    }

    pub fn index_of(&self, id: VertexId) -> Option<usize> {
        if id.level > self.level {
            let c = id.canonical();
            if c.level > self.level {
                return None;
            }
            return self.index_of(c);
        }
        self.lookup.get(&id.at_level(self.level).bary).map(|&i| i as usize)
    }

    /// Level at which vertex `v` first appears.
    pub fn birth_level(&self, v: usize) -> usize {
        (0..=self.level).find(|&k| v < vertex_count(k)).expect("vertex index in range")
    }

    /// Cell of level `birth_level(v) - 1` whose midpoint `v` is, and the
    /// opposite-corner offset (0 for `p23`, 1 for `p31`, 2 for `p12`).
    pub fn birth_cell(&self, v: usize) -> Option<(usize, usize)> {
        let k = self.birth_level(v);
        if k == 0 {
            return None;
        }
        let r = v - vertex_count(k - 1);
        Some((r / 3, r % 3))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells[self.level]
            .iter()
            .flat_map(|c| [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])])
            .map(|(a, b)| (a as usize, b as usize))
    }

    /// Dense graph Laplacian `-Delta_m`. Dirichlet rows and columns are the
    /// non-boundary vertices in index order (index `v` maps to row `v - 3`).
    /// The Neumann eigenproblem pairs this matrix with boundary mass one half;
    /// see `oracle`.
    pub fn laplacian_matrix(&self, kind: BoundaryKind) -> DMatrix<f64> {
        let n = self.len();
        let off = match kind {
            BoundaryKind::Dirichlet => 3,
            BoundaryKind::Neumann => 0,
        };
        let mut a = DMatrix::zeros(n - off, n - off);
        for v in off..n {
            a[(v - off, v - off)] = self.degree(v) as f64;
            for &q in self.neighbors(v) {
                let q = q as usize;
                if q >= off {
                    a[(v - off, q - off)] -= 1.0;
                }
            }
        }
        a
    }

    /// `level,v1_c1,v1_c2,v1_c3,v2_c1,v2_c2,v2_c3` rows with coordinates at this level.
    pub fn edge_list_csv(&self) -> String {
        let mut out = String::from("level,v1_c1,v1_c2,v1_c3,v2_c1,v2_c2,v2_c3\n");
        for (a, b) in self.edges() {
            let (p, q) = (self.coords[a], self.coords[b]);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.level, p[0], p[1], p[2], q[0], q[1], q[2]
            ));
        }
        out
    }

    /// Integer coordinates of `v` at this graph's level.
    pub fn coords(&self, v: usize) -> [u32; 3] {
        self.coords[v]
    }
}
