//! Support patterns: block detection, r-decompositions and rank-1 splitting.

use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::distribution::{JointDistribution, MassMatrix};
use crate::error::{Error, Result};

/// Halvings allowed when searching for a positive rank-1 basis.
pub const DEFAULT_HALVINGS: u32 = 60;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportPattern {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
}

impl SupportPattern {
    pub fn from_positions(rows: usize, cols: usize, cells: &[(usize, usize)]) -> Self {
        let mut mask = vec![false; rows * cols];
        for &(i, j) in cells {
            mask[i * cols + j] = true;
        }
        Self { rows, cols, mask }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols + j]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.contains(&true)
    }

    pub fn positions(&self) -> Vec<(usize, usize)> {
        (0..self.rows).flat_map(|i| (0..self.cols).map(move |j| (i, j))).filter(|&(i, j)| self.contains(i, j)).collect()
    }

    pub fn row_set(&self) -> Vec<usize> {
        (0..self.rows).filter(|&i| (0..self.cols).any(|j| self.contains(i, j))).collect()
    }

    pub fn col_set(&self) -> Vec<usize> {
        (0..self.cols).filter(|&j| (0..self.rows).any(|i| self.contains(i, j))).collect()
    }

    /// True when the support is a nonempty Cartesian product of a row set and a column set.
    pub fn is_rectangle(&self) -> bool {
        let rows = self.row_set();
        let cols = self.col_set();
        !rows.is_empty() && rows.len() * cols.len() == self.len()
    }

    fn union(&self, other: &SupportPattern) -> SupportPattern {
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect();
        SupportPattern { rows: self.rows, cols: self.cols, mask }
    }

    fn intersects(&self, other: &SupportPattern) -> bool {
        self.mask.iter().zip(&other.mask).any(|(a, b)| *a && *b)
    }
}

pub fn support_pattern(m: &MassMatrix, zero_tol: f64) -> SupportPattern {
    let (rows, cols) = m.shape();
    let mask = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| m[(i, j)] > zero_tol).collect();
    SupportPattern { rows, cols, mask }
}

/// Row and column bipartition witnessing a block matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockSplit {
    pub rows1: Vec<usize>,
    pub rows2: Vec<usize>,
    pub cols1: Vec<usize>,
    pub cols2: Vec<usize>,
}

impl BlockSplit {
    /// Checks the split against a support pattern.
    pub fn separates(&self, s: &SupportPattern) -> bool {
        let covers = |a: &[usize], b: &[usize], n: usize| {
            let mut seen = vec![false; n];
            for &x in a.iter().chain(b) {
                if x >= n || seen[x] {
                    return false;
                }
                seen[x] = true;
            }
            seen.iter().all(|&x| x)
        };
        let hit = |rs: &[usize], cs: &[usize]| rs.iter().any(|&i| cs.iter().any(|&j| s.contains(i, j)));
        covers(&self.rows1, &self.rows2, s.rows())
            && covers(&self.cols1, &self.cols2, s.cols())
            && hit(&self.rows1, &self.cols1)
            && hit(&self.rows2, &self.cols2)
            && !hit(&self.rows1, &self.cols2)
            && !hit(&self.rows2, &self.cols1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Blockness {
    Block(BlockSplit),
    NotBlock,
}

/// Decides blockness from the connected components of the bipartite row/column support graph.
pub fn split_support(s: &SupportPattern) -> Result<Blockness> {
    let (m, n) = (s.rows(), s.cols());
    let cells = s.positions();
    let Some(&(first_row, _)) = cells.first() else {
        return Err(Error::EmptySupport);
    };
    let mut uf = UnionFind::<usize>::new(m + n);
    for &(i, j) in &cells {
        uf.union(i, m + j);
    }
    let root = uf.find(first_row);
    let rows = s.row_set();
    let cols = s.col_set();
    if rows.iter().all(|&i| uf.find(i) == root) && cols.iter().all(|&j| uf.find(m + j) == root) {
        return Ok(Blockness::NotBlock);
    }
    let (rows1, rows2) = (0..m).partition(|&i| rows.contains(&i) && uf.find(i) == root);
    let (cols1, cols2) = (0..n).partition(|&j| cols.contains(&j) && uf.find(m + j) == root);
    Ok(Blockness::Block(BlockSplit { rows1, rows2, cols1, cols2 }))
}

pub fn block_split(j: &JointDistribution) -> Result<Blockness> {
    split_support(&support_pattern(j.matrix(), 0.0))
}

pub(crate) fn require_nonblock(j: &JointDistribution) -> Result<()> {
    match block_split(j)? {
        Blockness::Block(split) => Err(Error::IsBlock(split)),
        Blockness::NotBlock => Ok(()),
    }
}

/// Sum of r-matrices whose consecutive supports intersect.
#[derive(Clone, Debug)]
pub struct RDecomposition {
    pub summands: Vec<MassMatrix>,
}

impl RDecomposition {
    pub fn len(&self) -> usize {
        self.summands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summands.is_empty()
    }

    pub fn total(&self) -> MassMatrix {
        let (m, n) = self.summands[0].shape();
        self.summands.iter().fold(DMatrix::zeros(m, n), |acc, s| acc + s)
    }

    pub fn supports(&self) -> Vec<SupportPattern> {
        self.summands.iter().map(|s| support_pattern(s, 0.0)).collect()
    }

    /// Every summand is an r-matrix and consecutive supports meet.
    pub fn is_valid(&self) -> bool {
        let supports = self.supports();
        supports.iter().all(SupportPattern::is_rectangle) && supports.windows(2).all(|w| w[0].intersects(&w[1]))
    }
}

/// Walk of the cell graph (cells adjacent when they share a row or column) that visits
/// every cell: a depth-first traversal with each tree edge walked down and back, cut off
/// once the last cell has been reached.
fn support_walk(s: &SupportPattern) -> Vec<(usize, usize)> {
    let cells = s.positions();
    let mut visited = vec![false; cells.len()];
    let mut walk = vec![0usize];
    let mut stack = vec![0usize];
    visited[0] = true;
    let mut seen = 1;
    while let Some(&top) = stack.last() {
        if seen == cells.len() {
            break;
        }
        let (r, c) = cells[top];
        let next = (0..cells.len()).find(|&k| !visited[k] && (cells[k].0 == r || cells[k].1 == c));
        match next {
            Some(k) => {
                visited[k] = true;
                seen += 1;
                stack.push(k);
                walk.push(k);
            }
            None => {
                stack.pop();
                if let Some(&parent) = stack.last() {
                    walk.push(parent);
                }
            }
        }
    }
    walk.into_iter().map(|k| cells[k]).collect()
}

/// Splits each cell's mass equally among the given supports that contain it.
fn equal_split(m: &MassMatrix, supports: &[Vec<(usize, usize)>]) -> Vec<MassMatrix> {
    let (rows, cols) = m.shape();
    let mut count = DMatrix::<f64>::zeros(rows, cols);
    for sup in supports {
        for &c in sup {
            count[c] += 1.0;
        }
    }
    supports
        .iter()
        .map(|sup| {
            let mut x = DMatrix::zeros(rows, cols);
            for &c in sup {
                x[c] = m[c] / count[c];
            }
            x
        })
        .collect()
}

pub fn r_decomposition(j: &JointDistribution) -> Result<RDecomposition> {
    require_nonblock(j)?;
    let s = support_pattern(j.matrix(), 0.0);
    if s.is_rectangle() {
        return Ok(RDecomposition { summands: vec![j.matrix().clone()] });
    }
    let walk = support_walk(&s);
    let edges: Vec<Vec<(usize, usize)>> = walk.windows(2).map(|w| vec![w[0], w[1]]).collect();
    Ok(RDecomposition { summands: equal_split(j.matrix(), &edges) })
}

/// Maximal rectangles inside a support pattern, enumerated over subsets of the shorter side.
pub(crate) fn maximal_rectangles(s: &SupportPattern) -> Option<Vec<(Vec<usize>, Vec<usize>)>> {
    let transpose = s.cols() < s.rows();
    let (short, long) = if transpose { (s.cols(), s.rows()) } else { (s.rows(), s.cols()) };
    if short > 16 {
        return None;
    }
    let has = |a: usize, b: usize| if transpose { s.contains(b, a) } else { s.contains(a, b) };
    let mut out = Vec::new();
    for mask in 1u32..(1 << short) {
        let side: Vec<usize> = (0..short).filter(|&a| mask >> a & 1 == 1).collect();
        let other: Vec<usize> = (0..long).filter(|&b| side.iter().all(|&a| has(a, b))).collect();
        if other.is_empty() {
            continue;
        }
        let closure: Vec<usize> = (0..short).filter(|&a| other.iter().all(|&b| has(a, b))).collect();
        if closure != side {
            continue;
        }
        out.push(if transpose { (other, side) } else { (side, other) });
    }
    Some(out)
}

fn rect_cells(rect: &(Vec<usize>, Vec<usize>)) -> Vec<(usize, usize)> {
    rect.0.iter().flat_map(|&i| rect.1.iter().map(move |&j| (i, j))).collect()
}

/// Shortest chain of rectangles inside the support, consecutive ones intersecting, that
/// covers the support. Iterative deepening up to `limit` links; `None` when the search is
/// out of reach or no chain that short exists.
pub(crate) fn shortest_rect_chain(s: &SupportPattern, limit: usize) -> Option<Vec<Vec<(usize, usize)>>> {
    let rects = maximal_rectangles(s)?;
    if rects.len() > 64 {
        return None;
    }
    let cells = s.positions();
    let bits: Vec<u128> = if cells.len() <= 128 {
        rects
            .iter()
            .map(|r| rect_cells(r).iter().fold(0u128, |acc, c| acc | 1u128 << cells.binary_search(c).unwrap()))
            .collect()
    } else {
        return None;
    };
    let full: u128 = if cells.len() == 128 { u128::MAX } else { (1u128 << cells.len()) - 1 };

    fn extend(
        bits: &[u128],
        full: u128,
        depth: usize,
        path: &mut Vec<usize>,
        covered: u128,
        budget: &mut usize,
    ) -> bool {
        if covered == full {
            return true;
        }
        if path.len() == depth || *budget == 0 {
            return false;
        }
        *budget -= 1;
        for k in 0..bits.len() {
            if let Some(&last) = path.last() {
                if bits[last] & bits[k] == 0 || bits[k] & !covered == 0 {
                    continue;
                }
            }
            path.push(k);
            if extend(bits, full, depth, path, covered | bits[k], budget) {
                return true;
            }
            path.pop();
        }
        false
    }

    let mut budget = 2_000_000usize;
    for depth in 1..=limit {
        let mut path = Vec::new();
        if extend(&bits, full, depth, &mut path, 0, &mut budget) {
            return Some(path.iter().map(|&k| rect_cells(&rects[k])).collect());
        }
        if budget == 0 {
            return None;
        }
    }
    None
}

/// Merges consecutive supports while their union stays a rectangle.
fn merge_supports(supports: Vec<SupportPattern>) -> Vec<SupportPattern> {
    let mut out: Vec<SupportPattern> = Vec::new();
    for s in supports {
        if let Some(last) = out.last_mut() {
            let joined = last.union(&s);
            if joined.is_rectangle() {
                *last = joined;
                continue;
            }
        }
        out.push(s);
    }
    out
}

/// Decomposition used by the construction: the shortest rectangle chain when the search
/// is in reach, otherwise the merged walk. Mass is split equally among covering summands.
pub fn chain_decomposition(j: &JointDistribution) -> Result<RDecomposition> {
    require_nonblock(j)?;
    let s = support_pattern(j.matrix(), 0.0);
    let merged = merge_supports(r_decomposition(j)?.supports());
    let chain =
        shortest_rect_chain(&s, merged.len()).unwrap_or_else(|| merged.iter().map(SupportPattern::positions).collect());
    Ok(RDecomposition { summands: equal_split(j.matrix(), &chain) })
}

/// Upper bound on r-complexity: the merged walk, improved by a rectangle chain when shorter.
pub fn r_complexity_bound(j: &JointDistribution) -> Result<usize> {
    Ok(chain_decomposition(j)?.len())
}

/// Exact r-complexity by exhaustive search, or `None` when it exceeds `limit`.
pub fn exact_r_complexity(j: &JointDistribution, limit: usize) -> Result<Option<usize>> {
    require_nonblock(j)?;
    if j.rows() * j.cols() > 12 {
        return Err(Error::TooLarge(format!("{}x{} exceeds 12 cells", j.rows(), j.cols())));
    }
    let s = support_pattern(j.matrix(), 0.0);
    Ok(shortest_rect_chain(&s, limit).map(|c| c.len()))
}

/// Second singular value relative to the first.
pub fn rank1_defect(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    match v.as_slice() {
        [] | [_] => 0.0,
        [s0, s1, ..] if *s0 > 0.0 => s1 / s0,
        _ => 0.0,
    }
}

/// Writes an r-matrix as a sum of rank-1 matrices with the same support, using the
/// perturbed basis `(e_i + eps 1_A)(e_j + eps 1_B)^T` and halving `eps` from 1/4.
pub fn rank1_split(r: &MassMatrix) -> Result<Vec<MassMatrix>> {
    rank1_split_with(r, DEFAULT_HALVINGS)
}

pub fn rank1_split_with(r: &MassMatrix, halvings: u32) -> Result<Vec<MassMatrix>> {
    let s = support_pattern(r, 0.0);
    if s.is_empty() || !s.is_rectangle() || r.iter().any(|&v| v < 0.0) {
        return Err(Error::NotRMatrix);
    }
    let rows = s.row_set();
    let cols = s.col_set();
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |a, b| r[(rows[a], cols[b])]);
    if rows.len() == 1 || cols.len() == 1 || rank1_defect(&sub) <= 1e-12 {
        return Ok(vec![r.clone()]);
    }
    let (na, nb) = (rows.len() as f64, cols.len() as f64);
    let mut eps = 0.25;
    for _ in 0..=halvings {
        // Inverse of I + eps J is I - eps / (1 + n eps) J.
        let sa = eps / (1.0 + na * eps);
        let sb = eps / (1.0 + nb * eps);
        let row_sums: Vec<f64> = (0..rows.len()).map(|a| sub.row(a).sum()).collect();
        let col_sums: Vec<f64> = (0..cols.len()).map(|b| sub.column(b).sum()).collect();
        let total = sub.sum();
        let coef = DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
            sub[(a, b)] - sa * col_sums[b] - sb * row_sums[a] + sa * sb * total
        });
        if coef.iter().all(|&c| c > 0.0) {
            let mut parts = Vec::with_capacity(rows.len() * cols.len());
            for a in 0..rows.len() {
                for b in 0..cols.len() {
                    let u = DVector::from_fn(rows.len(), |k, _| if k == a { 1.0 + eps } else { eps });
                    let v = DVector::from_fn(cols.len(), |k, _| if k == b { 1.0 + eps } else { eps });
                    let mut part = DMatrix::zeros(r.nrows(), r.ncols());
                    for (x, &i) in rows.iter().enumerate() {
                        for (y, &jj) in cols.iter().enumerate() {
                            part[(i, jj)] = coef[(a, b)] * u[x] * v[y];
                        }
                    }
                    parts.push(part);
                }
            }
            return Ok(parts);
        }
        eps /= 2.0;
    }
    Err(Error::DegeneratePositivity)
}

/// Rank-1 split with one part per row of the shorter side: part `a` is
/// `(e_a + eps 1) v_a^T` where `v_a = row_a - s * colsums`, `s = eps / (1 + n eps)`.
pub(crate) fn compact_rank1_split(r: &MassMatrix) -> Result<Vec<MassMatrix>> {
    let s = support_pattern(r, 0.0);
    if s.is_empty() || !s.is_rectangle() {
        return Err(Error::NotRMatrix);
    }
    let rows = s.row_set();
    let cols = s.col_set();
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |a, b| r[(rows[a], cols[b])]);
    if rows.len() == 1 || cols.len() == 1 || rank1_defect(&sub) <= 1e-12 {
        return Ok(vec![r.clone()]);
    }
    let transpose = cols.len() < rows.len();
    let (sub, rows, cols) = if transpose { (sub.transpose(), cols, rows) } else { (sub, rows, cols) };
    let n = sub.nrows() as f64;
    let col_sums: Vec<f64> = (0..sub.ncols()).map(|b| sub.column(b).sum()).collect();
    // Largest shift keeping every v_a positive is min_ab sub_ab / colsum_b; use half of it.
    let rho = (0..sub.nrows())
        .flat_map(|a| (0..sub.ncols()).map(move |b| (a, b)))
        .map(|(a, b)| sub[(a, b)] / col_sums[b])
        .fold(f64::INFINITY, f64::min);
    let shift = rho / 2.0;
    let eps = shift / (1.0 - n * shift);
    let mut parts = Vec::with_capacity(sub.nrows());
    for a in 0..sub.nrows() {
        let mut part = DMatrix::zeros(r.nrows(), r.ncols());
        for x in 0..sub.nrows() {
            let u = if x == a { 1.0 + eps } else { eps };
            for (y, &c) in cols.iter().enumerate() {
                let v = sub[(a, y)] - shift * col_sums[y];
                let (i, j) = if transpose { (c, rows[x]) } else { (rows[x], c) };
                part[(i, j)] = u * v;
            }
        }
        parts.push(part);
    }
    Ok(parts)
}
