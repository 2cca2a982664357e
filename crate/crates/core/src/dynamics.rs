//! Combinatorial multivalued maps over grid leaves.
//!
//! A [`MultivaluedMap`] sends every leaf to the set of leaves met by its image
//! box. Images are clipped to the domain; cells whose image left the domain are
//! flagged instead of being routed to an exterior vertex.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::{Grid, Rect};
use crate::surrogate::SamplePair;

/// Directed graph on the canonical leaf positions of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultivaluedMap {
    adjacency: Vec<Vec<usize>>,
    clipped: Vec<bool>,
}

impl MultivaluedMap {
    /// Builds a map from raw adjacency lists. Lists are sorted and deduplicated.
    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>, clipped: Vec<bool>) -> Result<Self> {
        let n = adjacency.len();
        if clipped.len() != n {
            return Err(invalid!("clipped flags cover {} cells, map has {n}", clipped.len()));
        }
        for (v, succ) in adjacency.iter_mut().enumerate() {
            if let Some(&w) = succ.iter().find(|&&w| w >= n) {
                return Err(invalid!("edge {v} -> {w} leaves the cell range 0..{n}"));
            }
            succ.sort_unstable();
            succ.dedup();
        }
        Ok(MultivaluedMap { adjacency, clipped })
    }

    /// Map with the given edges and no clipped cells.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(s, t) in edges {
            if s >= n {
                return Err(invalid!("edge source {s} out of range 0..{n}"));
            }
            adjacency[s].push(t);
        }
        MultivaluedMap::from_adjacency(adjacency, vec![false; n])
    }

    /// Outer approximation built from images of leaf boxes.
    ///
    /// For every leaf `ξ` the image `B = box_image(|ξ|)` is clipped to the
    /// domain, and an edge `ξ -> ξ'` is added for every leaf whose closed box
    /// meets the closed box `B`.
    pub fn build<F>(grid: &Grid, mut box_image: F) -> Result<Self>
    where
        F: FnMut(&Rect) -> Result<Rect>,
    {
        let mut adjacency = Vec::with_capacity(grid.len());
        let mut clipped = Vec::with_capacity(grid.len());
        for pos in 0..grid.len() {
            let image = box_image(&grid.bounds(pos))?;
            let (succ, clip) = image_targets(grid, &image)?;
            adjacency.push(succ);
            clipped.push(clip);
        }
        Ok(MultivaluedMap { adjacency, clipped })
    }

    /// Same as [`MultivaluedMap::build`] from images already computed in canonical order.
    pub fn from_images(grid: &Grid, images: &[Rect]) -> Result<Self> {
        if images.len() != grid.len() {
            return Err(invalid!("{} images for {} cells", images.len(), grid.len()));
        }
        let mut adjacency = Vec::with_capacity(grid.len());
        let mut clipped = Vec::with_capacity(grid.len());
        for image in images {
            let (succ, clip) = image_targets(grid, image)?;
            adjacency.push(succ);
            clipped.push(clip);
        }
        Ok(MultivaluedMap { adjacency, clipped })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn clipped(&self) -> &[bool] {
        &self.clipped
    }

    pub fn clipped_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.clipped[v]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// All edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(s, succ)| succ.iter().map(move |&t| (s, t)))
    }

    /// Mutable access to one cell's targets, kept sorted on reinsertion.
    pub fn set_successors(&mut self, v: usize, mut targets: Vec<usize>) -> Result<()> {
        if let Some(&w) = targets.iter().find(|&&w| w >= self.len()) {
            return Err(invalid!("target {w} out of range"));
        }
        targets.sort_unstable();
        targets.dedup();
        self.adjacency[v] = targets;
        Ok(())
    }
}

/// Target leaves of one image box, and whether the box had to be clipped.
pub fn image_targets(grid: &Grid, image: &Rect) -> Result<(Vec<usize>, bool)> {
    if image.dim() != grid.dim() {
        return Err(invalid!(
            "image box has dimension {}, grid has {}",
            image.dim(),
            grid.dim()
        ));
    }
    let clipped = !grid.domain().contains_rect(image);
    Ok((grid.leaves_meeting(image), clipped))
}

/// Per-cell tally from [`validate_outer`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellCoverage {
    pub samples: usize,
    pub out_of_domain: usize,
    pub violations: usize,
}

impl CellCoverage {
    /// Fraction of in-domain samples whose image cell is a successor.
    pub fn coverage(&self) -> f64 {
        let inside = self.samples - self.out_of_domain;
        if inside == 0 {
            1.0
        } else {
            (inside - self.violations) as f64 / inside as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub samples: usize,
    pub violations: usize,
    pub out_of_domain: usize,
    /// Out-of-domain images from cells whose image box was not flagged as clipped.
    pub unflagged_exits: usize,
    pub per_cell: Vec<CellCoverage>,
}

impl CoverageReport {
    pub fn violation_fraction(&self) -> f64 {
        let inside = self.samples - self.out_of_domain;
        if inside == 0 {
            0.0
        } else {
            self.violations as f64 / inside as f64
        }
    }

    pub fn cells_with_violations(&self) -> Vec<usize> {
        (0..self.per_cell.len())
            .filter(|&v| self.per_cell[v].violations > 0)
            .collect()
    }
}

/// Seed of the sampler used by [`validate_outer`].
pub const VALIDATION_SEED: u64 = 0x005e_ed0f_0c7e;

/// Checks sampled transitions of `point_map` against the map's edges.
///
/// Draws `n_samples` uniform points from every leaf (fixed seed), maps them,
/// and counts every sample whose image lands in the domain but in a leaf that
/// is not a successor of the sample's own leaf.
pub fn validate_outer<F>(
    map: &MultivaluedMap,
    grid: &Grid,
    mut point_map: F,
    n_samples: usize,
) -> Result<CoverageReport>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if map.len() != grid.len() {
        return Err(invalid!("map has {} cells, grid has {}", map.len(), grid.len()));
    }
    if n_samples == 0 {
        return Err(invalid!("n_samples must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
    let mut report = CoverageReport {
        samples: 0,
        violations: 0,
        out_of_domain: 0,
        unflagged_exits: 0,
        per_cell: vec![CellCoverage::default(); grid.len()],
    };
    let mut x = vec![0.0; grid.dim()];
    for v in 0..grid.len() {
        let b = grid.bounds(v);
        for _ in 0..n_samples {
            for i in 0..x.len() {
                let t: f64 = rng.random();
                x[i] = b.lower()[i] + b.extent(i) * t;
            }
            // Samples must stay in the half-open cell; rounding may land on the upper face.
            if grid.locate_position(&x).ok() != Some(v) {
                x = b.lower().to_vec();
            }
            let y = point_map(&x);
            let cell = &mut report.per_cell[v];
            cell.samples += 1;
            match grid.locate_position(&y) {
                Ok(t) => {
                    if map.successors(v).binary_search(&t).is_err() {
                        cell.violations += 1;
                    }
                }
                Err(_) => {
                    cell.out_of_domain += 1;
                    if !map.clipped()[v] {
                        report.unflagged_exits += 1;
                    }
                }
            }
        }
    }
    for c in &report.per_cell {
        report.samples += c.samples;
        report.violations += c.violations;
        report.out_of_domain += c.out_of_domain;
    }
    Ok(report)
}

/// Observed transitions checked against the map: `(captured, in_domain, total)`.
pub fn pair_coverage(map: &MultivaluedMap, grid: &Grid, pairs: &[SamplePair]) -> (usize, usize, usize) {
    let mut captured = 0;
    let mut inside = 0;
    for p in pairs {
        if let (Ok(s), Ok(t)) = (grid.locate_position(&p.input), grid.locate_position(&p.output)) {
            inside += 1;
            if map.successors(s).binary_search(&t).is_ok() {
                captured += 1;
            }
        }
    }
    (captured, inside, pairs.len())
}
