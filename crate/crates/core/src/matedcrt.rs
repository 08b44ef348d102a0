//! Mated-CRT map with boundary: cells are consecutive time intervals of an
//! `(L, R)` path, glued along horizontal segments under the graphs of `L` and
//! `R`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bm::Path2D;
use crate::error::{Error, Result};

/// Per-cell minima of the two coordinates. Cells are numbered from 1; cell `k`
/// covers `[(k - 1) s, k s]` after the path's start for cell size `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPath {
    pub n: usize,
    pub l_min: Vec<f64>,
    pub r_min: Vec<f64>,
}

impl CellPath {
    /// Minima over the grid points inside each full cell. Requires
    /// `cell_size >= 10 dt` and at least one full cell.
    pub fn from_path(path: &Path2D, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::Input(format!("cell size must be positive, got {cell_size}")));
        }
        if cell_size < 10.0 * path.dt * (1.0 - 1e-12) {
            return Err(Error::Input(format!(
                "cell size {cell_size} is below 10 dt = {} of the input path",
                10.0 * path.dt
            )));
        }
        let steps_per_cell = cell_size / path.dt;
        let n = (path.duration() / cell_size + 1e-9).floor() as usize;
        if n == 0 {
            return Err(Error::Input(format!(
                "path of duration {} holds no full cell of size {cell_size}",
                path.duration()
            )));
        }
        let mut l_min = Vec::with_capacity(n);
        let mut r_min = Vec::with_capacity(n);
        for k in 0..n {
            let lo = (k as f64 * steps_per_cell - 1e-9).ceil().max(0.0) as usize;
            let hi = (((k + 1) as f64 * steps_per_cell + 1e-9).floor() as usize).min(path.len() - 1);
            let (mut l, mut r) = (f64::INFINITY, f64::INFINITY);
            for &(pl, pr) in &path.points[lo..=hi] {
                l = l.min(pl);
                r = r.min(pr);
            }
            l_min.push(l);
            r_min.push(r);
        }
        Ok(Self { n, l_min, r_min })
    }

    pub fn from_minima(l_min: Vec<f64>, r_min: Vec<f64>) -> Result<Self> {
        if l_min.is_empty() || l_min.len() != r_min.len() {
            return Err(Error::Input("cell minima must be nonempty and of equal length".into()));
        }
        Ok(Self { n: l_min.len(), l_min, r_min })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeTag {
    #[serde(rename = "consecutive")]
    Consecutive,
    L,
    R,
}

impl EdgeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeTag::Consecutive => "consecutive",
            EdgeTag::L => "L",
            EdgeTag::R => "R",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "consecutive" => Ok(EdgeTag::Consecutive),
            "L" => Ok(EdgeTag::L),
            "R" => Ok(EdgeTag::R),
            other => Err(Error::Input(format!("unknown edge tag {other:?}"))),
        }
    }
}

/// An edge `a < b` between cells, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub tag: EdgeTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatedCrtGraph {
    pub n: usize,
    /// Sorted by `(a, b)`, one entry per adjacent pair.
    pub edges: Vec<Edge>,
    pub boundary: Vec<bool>,
}

/// Collects candidate edges and keeps, for each pair, the highest-precedence
/// tag (`Consecutive`, then `L`, then `R`).
fn assemble(n: usize, mut edges: Vec<Edge>) -> MatedCrtGraph {
    edges.sort_unstable();
    edges.dedup_by(|later, first| later.a == first.a && later.b == first.b);
    MatedCrtGraph { n, edges, boundary: vec![false; n] }
}

fn push_pair(edges: &mut Vec<Edge>, a: usize, b: usize, tag: EdgeTag) {
    let tag = if b == a + 1 { EdgeTag::Consecutive } else { tag };
    edges.push(Edge { a: a + 1, b: b + 1, tag });
}

/// Direct evaluation of the adjacency rule: cells `a < b` are `W`-adjacent iff
/// `max(m_a, m_b) <= min_{a < k < b} m_k` (an empty minimum is `+inf`), where
/// `m_k` is the minimum of `W` over cell `k`. `O(n^2)`.
pub fn build_brute_cells(cells: &CellPath) -> MatedCrtGraph {
    let mut edges = Vec::new();
    for (tag, m) in [(EdgeTag::L, &cells.l_min), (EdgeTag::R, &cells.r_min)] {
        for a in 0..cells.n {
            let mut between = f64::INFINITY;
            for b in a + 1..cells.n {
                if m[a].max(m[b]) <= between {
                    push_pair(&mut edges, a, b, tag);
                }
                between = between.min(m[b]);
            }
        }
    }
    assemble(cells.n, edges)
}

/// Neighbors of each new cell from a stack of earlier cells whose minima are
/// non-decreasing upward: every entry popped by the new minimum is adjacent,
/// as is the surviving top and, below it, any run of entries tied with the new
/// minimum.
fn stack_edges(m: &[f64], tag: EdgeTag, edges: &mut Vec<Edge>) {
    let mut stack: Vec<usize> = Vec::new();
    for b in 0..m.len() {
        let mb = m[b];
        while let Some(&top) = stack.last() {
            if m[top] > mb {
                push_pair(edges, top, b, tag);
                stack.pop();
            } else {
                break;
            }
        }
        let mut i = stack.len();
        if i > 0 {
            i -= 1;
            push_pair(edges, stack[i], b, tag);
            while i > 0 && m[stack[i]] == mb {
                i -= 1;
                push_pair(edges, stack[i], b, tag);
            }
        }
        stack.push(b);
    }
}

/// Same edge set as [`build_brute_cells`] with one monotone stack per
/// coordinate; linear time unless minima tie.
pub fn build_fast_cells(cells: &CellPath) -> MatedCrtGraph {
    let mut edges = Vec::with_capacity(4 * cells.n);
    stack_edges(&cells.l_min, EdgeTag::L, &mut edges);
    stack_edges(&cells.r_min, EdgeTag::R, &mut edges);
    assemble(cells.n, edges)
}

pub fn build_brute(path: &Path2D, cell_size: f64) -> Result<MatedCrtGraph> {
    Ok(build_brute_cells(&CellPath::from_path(path, cell_size)?))
}

pub fn build_fast(path: &Path2D, cell_size: f64) -> Result<MatedCrtGraph> {
    Ok(build_fast_cells(&CellPath::from_path(path, cell_size)?))
}

/// Cell `a` is a boundary cell iff `R` reaches a new running minimum during it:
/// its cell minimum of `R` is below that of every earlier cell. Cell 1 is
/// always a boundary cell.
pub fn mark_boundary_cells(cells: &CellPath, g: &MatedCrtGraph) -> Result<MatedCrtGraph> {
    if cells.n != g.n {
        return Err(Error::Input(format!("graph has {} cells but the path has {}", g.n, cells.n)));
    }
    let mut boundary = Vec::with_capacity(cells.n);
    let mut running = f64::INFINITY;
    for &r in &cells.r_min {
        boundary.push(r < running);
        running = running.min(r);
    }
    Ok(MatedCrtGraph { boundary, ..g.clone() })
}

pub fn mark_boundary(path: &Path2D, cell_size: f64, g: &MatedCrtGraph) -> Result<MatedCrtGraph> {
    mark_boundary_cells(&CellPath::from_path(path, cell_size)?, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFormat {
    Csv,
    Json,
}

impl MatedCrtGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            deg[e.a - 1] += 1;
            deg[e.b - 1] += 1;
        }
        deg
    }

    /// `degree -> number of cells` with that degree.
    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for d in self.degrees() {
            *h.entry(d).or_insert(0) += 1;
        }
        h
    }

    pub fn degree_histogram_csv(&self) -> String {
        let mut out = String::from("degree,count\n");
        for (d, c) in self.degree_histogram() {
            out.push_str(&format!("{d},{c}\n"));
        }
        out
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    pub fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (ra, rb) = (find(&mut parent, e.a - 1), find(&mut parent, e.b - 1));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        (0..self.n).all(|v| find(&mut parent, v) == root)
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    /// Lines `a,b,tag` in `(a, b)` order, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 16);
        for e in &self.edges {
            out.push_str(&format!("{},{},{}\n", e.a, e.b, e.tag.as_str()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn export(&self, format: GraphFormat) -> String {
        match format {
            GraphFormat::Csv => self.to_csv(),
            GraphFormat::Json => self.to_json(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: MatedCrtGraph = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.boundary.len() != self.n {
            return Err(Error::Input("boundary flags do not match the cell count".into()));
        }
        for w in self.edges.windows(2) {
            if (w[0].a, w[0].b) >= (w[1].a, w[1].b) {
                return Err(Error::Input("edges must be sorted and unique".into()));
            }
        }
        for e in &self.edges {
            if !(1 <= e.a && e.a < e.b && e.b <= self.n) {
                return Err(Error::Input(format!("edge ({}, {}) out of range", e.a, e.b)));
            }
        }
        Ok(())
    }
}
