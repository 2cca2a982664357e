//! Multiscale cubical decomposition of a rectangular region.
//!
//! Cells are half-open `[lo, hi)` on every axis except along the domain's
//! maximal face, which is closed. A refined leaf is replaced by its `2^d`
//! children (bisection on every axis at once), so the leaves always form a
//! forest of `2^d`-ary trees rooted at the cells of the initial uniform grid.
//!
//! Leaves are kept in tree order: the initial cells in lexicographic index
//! order, and each refined cell replaced in place by its children, again in
//! lexicographic order of their indices. Every graph built on top of a grid
//! refers to cells by their position in that list.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Default upper bound on the number of leaves a grid may hold.
pub const DEFAULT_LEAF_CAP: usize = 1 << 20;

/// Largest depth (per axis) a cell may reach; keeps `j / 2^depth` exact in `f64`.
pub const MAX_DEPTH: u8 = 48;

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// An axis-aligned box `[lower, upper]` in `d` dimensions.
///
/// `lower[i] <= upper[i]` always holds; zero extent is allowed so that point
/// images can be represented. Grid domains additionally require positive
/// extent on every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Rect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(invalid!("box must have dimension >= 1"));
        }
        if lower.len() != upper.len() {
            return Err(invalid!(
                "box bounds have different dimensions ({} vs {})",
                lower.len(),
                upper.len()
            ));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(invalid!("box bound on axis {i} is not finite"));
            }
            if lo > hi {
                return Err(invalid!("box has lower > upper on axis {i} ({lo} > {hi})"));
            }
        }
        Ok(Rect { lower, upper })
    }

    /// A box with strictly positive extent on every axis.
    pub fn proper(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let rect = Rect::new(lower, upper)?;
        if let Some(i) = (0..rect.dim()).find(|&i| rect.extent(i) <= 0.0) {
            return Err(invalid!("degenerate box: zero extent on axis {i}"));
        }
        Ok(rect)
    }

    /// Degenerate box holding a single point.
    pub fn point(p: &[f64]) -> Result<Self> {
        Rect::new(p.to_vec(), p.to_vec())
    }

    /// Closed bounding box of a non-empty point set.
    pub fn hull<'a>(mut points: impl Iterator<Item = &'a [f64]>) -> Result<Self> {
        let first = points.next().ok_or_else(|| invalid!("hull of an empty point set"))?;
        let mut lower = first.to_vec();
        let mut upper = first.to_vec();
        for p in points {
            if p.len() != lower.len() {
                return Err(invalid!("hull points have mixed dimensions"));
            }
            for i in 0..p.len() {
                lower[i] = lower[i].min(p[i]);
                upper[i] = upper[i].max(p[i]);
            }
        }
        Rect::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.extent(i)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Closed membership.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    /// Closed intersection test; boxes that only touch intersect.
    pub fn meets(&self, other: &Rect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] <= other.upper[i] && other.lower[i] <= self.upper[i])
    }

    /// Intersection with `bounds`, or `None` when the two are disjoint.
    pub fn clip(&self, bounds: &Rect) -> Option<Rect> {
        if !self.meets(bounds) {
            return None;
        }
        let lower = (0..self.dim())
            .map(|i| self.lower[i].max(bounds.lower[i]))
            .collect();
        let upper = (0..self.dim())
            .map(|i| self.upper[i].min(bounds.upper[i]))
            .collect();
        Some(Rect { lower, upper })
    }

    /// Grows every axis by `rel * extent` on both sides.
    pub fn inflate(&self, rel: f64) -> Rect {
        let mut out = self.clone();
        for i in 0..self.dim() {
            let pad = rel * self.extent(i);
            out.lower[i] -= pad;
            out.upper[i] += pad;
        }
        out
    }

    /// Grows every axis by a fraction of its extent, falling back to an
    /// absolute pad on axes with zero extent.
    pub fn inflate_or_pad(&self, rel: f64, pad: f64) -> Rect {
        let mut out = self.clone();
        for i in 0..self.dim() {
            let e = self.extent(i);
            let p = if e > 0.0 { rel * e } else { pad };
            out.lower[i] -= p;
            out.upper[i] += p;
        }
        out
    }
}

/// Identifies one cell of a grid by its per-axis depth and index.
///
/// The derived ordering is lexicographic by depth vector, then index vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub depth: Vec<u8>,
    pub index: Vec<u64>,
}

impl CellId {
    pub fn new(depth: Vec<u8>, index: Vec<u64>) -> Self {
        CellId { depth, index }
    }

    pub fn dim(&self) -> usize {
        self.depth.len()
    }

    fn is_well_formed(&self, dim: usize) -> bool {
        self.depth.len() == dim
            && self.index.len() == dim
            && self
                .depth
                .iter()
                .zip(&self.index)
                .all(|(&k, &j)| k <= MAX_DEPTH && j < (1u64 << k))
    }

    /// The `2^d` children in lexicographic index order.
    pub fn children(&self) -> impl Iterator<Item = CellId> + '_ {
        let d = self.dim();
        (0..1usize << d).map(move |k| {
            let depth = self.depth.iter().map(|&x| x + 1).collect();
            let index = (0..d)
                .map(|i| 2 * self.index[i] + ((k >> (d - 1 - i)) & 1) as u64)
                .collect();
            CellId { depth, index }
        })
    }
}

/// An adaptive cubical decomposition of a rectangular domain.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Rect,
    base_depth: Vec<u8>,
    leaves: Vec<CellId>,
    position: BTreeMap<CellId, usize>,
    leaf_cap: usize,
    max_level: u8,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.leaves == other.leaves
    }
}

impl Grid {
    /// Uniform grid with `2^initial_depth[i]` cells along axis `i`.
    pub fn uniform(domain: Rect, initial_depth: &[u8]) -> Result<Self> {
        Grid::uniform_with_cap(domain, initial_depth, DEFAULT_LEAF_CAP)
    }

    pub fn uniform_with_cap(domain: Rect, initial_depth: &[u8], leaf_cap: usize) -> Result<Self> {
        let d = domain.dim();
        check_domain(&domain)?;
        if initial_depth.len() != d {
            return Err(invalid!(
                "initial depth has {} entries for a {d}-dimensional domain",
                initial_depth.len()
            ));
        }
        if let Some(&k) = initial_depth.iter().find(|&&k| k > MAX_DEPTH) {
            return Err(invalid!("initial depth {k} exceeds the maximum of {MAX_DEPTH}"));
        }
        let total: u32 = initial_depth.iter().map(|&k| u32::from(k)).sum();
        if total >= usize::BITS - 1 || (1usize << total) > leaf_cap {
            return Err(Error::Capacity(alloc::format!(
                "uniform grid of depth {initial_depth:?} exceeds the leaf cap of {leaf_cap}"
            )));
        }
        let mut leaves = Vec::with_capacity(1 << total);
        let counts: Vec<u64> = initial_depth.iter().map(|&k| 1u64 << k).collect();
        let mut index = vec![0u64; d];
        loop {
            leaves.push(CellId::new(initial_depth.to_vec(), index.clone()));
            // Odometer with axis 0 most significant.
            let mut axis = d;
            loop {
                if axis == 0 {
                    return Ok(Grid::assemble(domain, initial_depth.to_vec(), leaves, leaf_cap));
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < counts[axis] {
                    break;
                }
                index[axis] = 0;
            }
        }
    }

    /// Rebuilds a grid from an explicit leaf list (for example one read from
    /// disk), checking that the leaves tile the domain.
    pub fn from_leaves(domain: Rect, leaves: Vec<CellId>, leaf_cap: usize) -> Result<Self> {
        let d = domain.dim();
        check_domain(&domain)?;
        if leaves.is_empty() {
            return Err(invalid!("grid has no leaves"));
        }
        if leaves.len() > leaf_cap {
            return Err(Error::Capacity(alloc::format!(
                "{} leaves exceed the leaf cap of {leaf_cap}",
                leaves.len()
            )));
        }
        if let Some(bad) = leaves.iter().find(|c| !c.is_well_formed(d)) {
            return Err(invalid!("malformed cell id {bad:?}"));
        }
        // Every axis must have been refined in lockstep from a common base.
        let offsets: Vec<i32> = (0..d)
            .map(|i| i32::from(leaves[0].depth[i]) - i32::from(leaves[0].depth[0]))
            .collect();
        for c in &leaves {
            if (0..d).any(|i| i32::from(c.depth[i]) - i32::from(c.depth[0]) != offsets[i]) {
                return Err(invalid!("cell {c:?} is not a bisection descendant of the grid root"));
            }
        }
        let min_level = leaves.iter().map(|c| c.depth[0]).min().unwrap_or(0);
        let max_level = leaves.iter().map(|c| c.depth[0]).max().unwrap_or(0);
        let base_depth: Vec<u8> = (0..d)
            .map(|i| u8::try_from(i32::from(min_level) + offsets[i]).unwrap_or(0))
            .collect();

        // Tiling check in exact integer arithmetic: measured in units of the
        // finest cell, the leaf volumes must add up to the whole domain.
        let spread = u32::from(max_level - min_level) * d as u32;
        let base_cells: u32 = base_depth.iter().map(|&k| u32::from(k)).sum();
        if spread + base_cells > 120 {
            return Err(Error::Capacity("grid is too deep to validate".into()));
        }
        let total: u128 = 1u128 << (spread + base_cells);
        let covered: u128 = leaves
            .iter()
            .map(|c| 1u128 << (u32::from(max_level - c.depth[0]) * d as u32))
            .sum();
        if covered != total {
            return Err(invalid!("leaves do not tile the domain"));
        }
        let mut seen = BTreeMap::new();
        for (pos, c) in leaves.iter().enumerate() {
            if seen.insert(c.clone(), pos).is_some() {
                return Err(invalid!("duplicate leaf {c:?}"));
            }
        }
        let grid = Grid::assemble(domain, base_depth, leaves, leaf_cap);
        // Equal volume plus every leaf owning its own center rules out overlaps.
        for (pos, c) in grid.leaves.iter().enumerate() {
            let center = grid.bounds_of(c).center();
            if grid.locate_position(&center).ok() != Some(pos) {
                return Err(invalid!("leaf {c:?} overlaps another leaf"));
            }
        }
        Ok(grid)
    }

    fn assemble(domain: Rect, base_depth: Vec<u8>, leaves: Vec<CellId>, leaf_cap: usize) -> Self {
        let position = leaves
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let max_level = leaves
            .iter()
            .map(|c| c.depth[0] - base_depth[0])
            .max()
            .unwrap_or(0);
        Grid {
            domain,
            base_depth,
            leaves,
            position,
            leaf_cap,
            max_level,
        }
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn leaf_cap(&self) -> usize {
        self.leaf_cap
    }

    pub fn set_leaf_cap(&mut self, cap: usize) {
        self.leaf_cap = cap;
    }

    /// Leaves in canonical order.
    pub fn leaves(&self) -> &[CellId] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Depth of the base (unrefined) cells.
    pub fn base_depth(&self) -> &[u8] {
        &self.base_depth
    }

    /// Largest per-axis depth of any leaf.
    pub fn max_depth(&self) -> u8 {
        self.leaves
            .iter()
            .flat_map(|c| c.depth.iter().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn position(&self, cell: &CellId) -> Option<usize> {
        self.position.get(cell).copied()
    }

    pub fn is_leaf(&self, cell: &CellId) -> bool {
        self.position.contains_key(cell)
    }

    /// Coordinate of boundary `j` of the `2^depth` uniform cells on `axis`.
    fn boundary(&self, axis: usize, depth: u8, j: u64) -> f64 {
        let n = 1u64 << depth;
        let (lo, hi) = (self.domain.lower[axis], self.domain.upper[axis]);
        if j == 0 {
            lo
        } else if j >= n {
            hi
        } else {
            lo + (hi - lo) * (j as f64 / n as f64)
        }
    }

    /// Index of the half-open cell holding `x` among `2^depth` cells on `axis`.
    fn axis_index(&self, axis: usize, depth: u8, x: f64) -> u64 {
        let n = 1u64 << depth;
        let (lo, hi) = (self.domain.lower[axis], self.domain.upper[axis]);
        let guess = libm::floor((x - lo) / (hi - lo) * n as f64);
        let mut j = if guess <= 0.0 {
            0
        } else {
            (guess as u64).min(n - 1)
        };
        while j > 0 && x < self.boundary(axis, depth, j) {
            j -= 1;
        }
        while j + 1 < n && x >= self.boundary(axis, depth, j + 1) {
            j += 1;
        }
        j
    }

    /// Box of any cell id (leaf or not).
    pub fn bounds_of(&self, cell: &CellId) -> Rect {
        let d = self.dim();
        let lower = (0..d)
            .map(|i| self.boundary(i, cell.depth[i], cell.index[i]))
            .collect();
        let upper = (0..d)
            .map(|i| self.boundary(i, cell.depth[i], cell.index[i] + 1))
            .collect();
        Rect { lower, upper }
    }

    /// Box of the leaf `cell`.
    pub fn cell_bounds(&self, cell: &CellId) -> Result<Rect> {
        if !self.is_leaf(cell) {
            return Err(Error::UnknownCell);
        }
        Ok(self.bounds_of(cell))
    }

    /// Box of the leaf at canonical position `pos`.
    pub fn bounds(&self, pos: usize) -> Rect {
        self.bounds_of(&self.leaves[pos])
    }

    /// The leaf containing `point` under the half-open convention.
    pub fn locate(&self, point: &[f64]) -> Result<&CellId> {
        self.locate_position(point).map(|pos| &self.leaves[pos])
    }

    /// Canonical position of the leaf containing `point`.
    pub fn locate_position(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim() {
            return Err(invalid!(
                "point has dimension {}, grid has {}",
                point.len(),
                self.dim()
            ));
        }
        if !point.iter().all(|x| x.is_finite()) || !self.domain.contains(point) {
            return Err(Error::OutOfDomain);
        }
        let d = self.dim();
        let mut cell = CellId::new(
            self.base_depth.clone(),
            (0..d)
                .map(|i| self.axis_index(i, self.base_depth[i], point[i]))
                .collect(),
        );
        for _ in 0..=self.max_level {
            if let Some(pos) = self.position(&cell) {
                return Ok(pos);
            }
            for i in 0..d {
                let k = cell.depth[i] + 1;
                let mid = self.boundary(i, k, 2 * cell.index[i] + 1);
                cell.index[i] = 2 * cell.index[i] + u64::from(point[i] >= mid);
                cell.depth[i] = k;
            }
        }
        Err(Error::Numerical("point location did not reach a leaf".into()))
    }

    /// Positions (sorted) of every leaf whose closed box meets the closed box `b`.
    pub fn leaves_meeting(&self, b: &Rect) -> Vec<usize> {
        let mut out = Vec::new();
        let Some(b) = b.clip(&self.domain) else {
            return out;
        };
        let d = self.dim();
        let ranges: Vec<(u64, u64)> = (0..d)
            .map(|i| {
                let k = self.base_depth[i];
                let mut lo = self.axis_index(i, k, b.lower[i]);
                if lo > 0 && self.boundary(i, k, lo) >= b.lower[i] {
                    lo -= 1;
                }
                (lo, self.axis_index(i, k, b.upper[i]))
            })
            .collect();
        let mut index: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        loop {
            let cell = CellId::new(self.base_depth.clone(), index.clone());
            self.collect_meeting(&cell, &b, &mut out);
            let mut axis = d;
            loop {
                if axis == 0 {
                    out.sort_unstable();
                    return out;
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] <= ranges[axis].1 {
                    break;
                }
                index[axis] = ranges[axis].0;
            }
        }
    }

    fn collect_meeting(&self, cell: &CellId, b: &Rect, out: &mut Vec<usize>) {
        if !self.bounds_of(cell).meets(b) {
            return;
        }
        if let Some(pos) = self.position(cell) {
            out.push(pos);
            return;
        }
        if cell.depth[0] - self.base_depth[0] >= self.max_level {
            return;
        }
        for child in cell.children() {
            self.collect_meeting(&child, b, out);
        }
    }

    /// Replaces each listed leaf by its `2^d` children.
    pub fn refine(&self, cells: &[CellId]) -> Result<Grid> {
        let mut positions = Vec::with_capacity(cells.len());
        for c in cells {
            positions.push(self.position(c).ok_or_else(|| {
                invalid!("cannot refine {c:?}: not a leaf of the grid")
            })?);
        }
        self.refine_positions(&positions)
    }

    /// Same as [`Grid::refine`], addressing leaves by canonical position.
    pub fn refine_positions(&self, positions: &[usize]) -> Result<Grid> {
        let mut marked = vec![false; self.len()];
        for &p in positions {
            if p >= self.len() {
                return Err(invalid!("cannot refine position {p}: grid has {} leaves", self.len()));
            }
            marked[p] = true;
        }
        let count = marked.iter().filter(|&&m| m).count();
        if count == 0 {
            return Ok(self.clone());
        }
        let fanout = 1usize << self.dim();
        let new_len = self.len() + count * (fanout - 1);
        if new_len > self.leaf_cap {
            return Err(Error::Capacity(alloc::format!(
                "refinement would create {new_len} leaves (cap {})",
                self.leaf_cap
            )));
        }
        let mut leaves = Vec::with_capacity(new_len);
        for (cell, &m) in self.leaves.iter().zip(&marked) {
            if m {
                if cell.depth.iter().any(|&k| k >= MAX_DEPTH) {
                    return Err(Error::Capacity(alloc::format!(
                        "cell {cell:?} is already at the maximum depth"
                    )));
                }
                leaves.extend(cell.children());
            } else {
                leaves.push(cell.clone());
            }
        }
        Ok(Grid::assemble(
            self.domain.clone(),
            self.base_depth.clone(),
            leaves,
            self.leaf_cap,
        ))
    }

    /// Total volume of the listed leaves.
    pub fn volume_of(&self, positions: &[usize]) -> f64 {
        positions.iter().map(|&p| self.bounds(p).volume()).sum()
    }
}

fn check_domain(domain: &Rect) -> Result<()> {
    if domain.dim() > MAX_DIM {
        return Err(invalid!(
            "dimension {} exceeds the supported maximum of {MAX_DIM}",
            domain.dim()
        ));
    }
    if let Some(i) = (0..domain.dim()).find(|&i| domain.extent(i) <= 0.0) {
        return Err(invalid!("degenerate domain: zero extent on axis {i}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn unit(d: usize) -> Rect {
        Rect::new(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    fn id(depth: &[u8], index: &[u64]) -> CellId {
        CellId::new(depth.to_vec(), index.to_vec())
    }

    #[test]
    fn uniform_grid_sizes() {
        let g = Grid::uniform(unit(2), &[1, 1]).unwrap();
        assert_eq!(g.len(), 4);
        for c in g.leaves() {
            let b = g.cell_bounds(c).unwrap();
            assert_eq!(b.extent(0), 0.5);
            assert_eq!(b.extent(1), 0.5);
        }

        let g = Grid::uniform(unit(2), &[0, 0]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.bounds(0), unit(2));

        let g = Grid::uniform(Rect::new(vec![-1.0], vec![1.0]).unwrap(), &[3]).unwrap();
        assert_eq!(g.len(), 8);
        assert!(g.leaves().iter().all(|c| g.cell_bounds(c).unwrap().extent(0) == 0.25));
    }

    #[test]
    fn degenerate_domain_rejected() {
        let flat = Rect::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(Grid::uniform(flat, &[1, 1]), Err(Error::Validation(_))));
        assert!(Rect::new(vec![1.0], vec![0.0]).is_err());
        assert!(Rect::new(vec![], vec![]).is_err());
    }

    #[test]
    fn leaf_cap_enforced() {
        let r = Grid::uniform_with_cap(unit(2), &[3, 3], 63);
        assert!(matches!(r, Err(Error::Capacity(_))));
        let g = Grid::uniform_with_cap(unit(2), &[1, 1], 7).unwrap();
        let c = g.leaves()[0].clone();
        assert!(g.refine(std::slice::from_ref(&c)).is_ok());
        let g = Grid::uniform_with_cap(unit(2), &[1, 1], 6).unwrap();
        assert!(matches!(g.refine(&[c]), Err(Error::Capacity(_))));
    }

    #[test]
    fn locate_examples() {
        let g = Grid::uniform(unit(2), &[1, 1]).unwrap();
        assert_eq!(g.locate(&[0.25, 0.75]).unwrap().index, vec![0, 1]);

        let g = Grid::uniform(unit(1), &[1]).unwrap();
        assert_eq!(g.locate(&[0.5]).unwrap().index, vec![1]);
        assert_eq!(g.locate(&[1.0]).unwrap().index, vec![1]);
        assert_eq!(g.locate(&[0.0]).unwrap().index, vec![0]);
        assert_eq!(g.locate(&[1.0 + 1e-12]), Err(Error::OutOfDomain));
        assert_eq!(g.locate(&[f64::NAN]), Err(Error::OutOfDomain));
    }

    #[test]
    fn cell_bounds_examples() {
        let g = Grid::uniform(unit(2), &[1, 1]).unwrap();
        let b = g.cell_bounds(&id(&[1, 1], &[0, 1])).unwrap();
        assert_eq!(b, Rect::new(vec![0.0, 0.5], vec![0.5, 1.0]).unwrap());

        let g = Grid::uniform(unit(2), &[0, 0]).unwrap();
        assert_eq!(g.cell_bounds(&id(&[0, 0], &[0, 0])).unwrap(), unit(2));

        let g = Grid::uniform(Rect::new(vec![-1.0], vec![1.0]).unwrap(), &[2]).unwrap();
        let b = g.cell_bounds(&id(&[2], &[3])).unwrap();
        assert_eq!(b, Rect::new(vec![0.5], vec![1.0]).unwrap());

        assert_eq!(g.cell_bounds(&id(&[3], &[0])), Err(Error::UnknownCell));
    }

    #[test]
    fn refine_examples() {
        let g = Grid::uniform(unit(2), &[1, 1]).unwrap();
        let r = g.refine(&[id(&[1, 1], &[0, 0])]).unwrap();
        assert_eq!(r.len(), 7);
        let expect = [
            id(&[2, 2], &[0, 0]),
            id(&[2, 2], &[0, 1]),
            id(&[2, 2], &[1, 0]),
            id(&[2, 2], &[1, 1]),
            id(&[1, 1], &[0, 1]),
            id(&[1, 1], &[1, 0]),
            id(&[1, 1], &[1, 1]),
        ];
        assert_eq!(r.leaves(), &expect);

        assert_eq!(g.refine(&[]).unwrap(), g);

        let g = Grid::uniform(unit(1), &[1]).unwrap();
        let all: Vec<CellId> = g.leaves().to_vec();
        let r = g.refine(&all).unwrap();
        assert_eq!(r.len(), 4);
        assert!((0..4).all(|p| r.bounds(p).extent(0) == 0.25));

        let err = r.refine(&[id(&[1], &[0])]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn leaves_ordering() {
        let g = Grid::uniform(unit(2), &[1, 1]).unwrap();
        let idx: Vec<_> = g.leaves().iter().map(|c| c.index.clone()).collect();
        assert_eq!(idx, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let g = Grid::uniform(unit(1), &[0]).unwrap();
        assert_eq!(g.leaves(), &[id(&[0], &[0])]);
    }

    #[test]
    fn leaves_meeting_counts_touching() {
        let g = Grid::uniform(unit(1), &[2]).unwrap();
        let b = Rect::new(vec![0.125], vec![0.25]).unwrap();
        assert_eq!(g.leaves_meeting(&b), vec![0, 1]);
        let b = Rect::new(vec![0.3], vec![0.3]).unwrap();
        assert_eq!(g.leaves_meeting(&b), vec![1]);
        let b = Rect::new(vec![2.0], vec![3.0]).unwrap();
        assert!(g.leaves_meeting(&b).is_empty());

        let g = Grid::uniform(unit(2), &[1, 1]).unwrap();
        let g = g.refine(&[id(&[1, 1], &[0, 0])]).unwrap();
        // The point (0.5, 0.5) is a corner shared by four cells of mixed depth.
        let b = Rect::point(&[0.5, 0.5]).unwrap();
        assert_eq!(g.leaves_meeting(&b), vec![3, 4, 5, 6]);
    }

    #[test]
    fn from_leaves_round_trip_and_rejects_gaps() {
        let g = Grid::uniform(unit(2), &[1, 1]).unwrap();
        let g = g.refine(&[id(&[1, 1], &[1, 0])]).unwrap();
        let back = Grid::from_leaves(unit(2), g.leaves().to_vec(), DEFAULT_LEAF_CAP).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.locate(&[0.9, 0.1]).unwrap(), g.locate(&[0.9, 0.1]).unwrap());

        let mut gap = g.leaves().to_vec();
        gap.pop();
        assert!(Grid::from_leaves(unit(2), gap, DEFAULT_LEAF_CAP).is_err());

        // Right total volume, but one region covered twice and another missed.
        let overlap = vec![
            id(&[1, 1], &[0, 0]),
            id(&[1, 1], &[0, 1]),
            id(&[1, 1], &[1, 0]),
            id(&[2, 2], &[0, 0]),
            id(&[2, 2], &[0, 1]),
            id(&[2, 2], &[1, 0]),
            id(&[2, 2], &[1, 1]),
        ];
        assert!(Grid::from_leaves(unit(2), overlap, DEFAULT_LEAF_CAP).is_err());
    }
}
