//! Adaptive refinement loop: build the map, find the Morse sets, refine them,
//! and repeat until the target depth is reached.

use alloc::vec::Vec;

use super::graph::{Condensation, MorseGraph};
use super::retraction::{order_retraction, Retraction};
use crate::dynamics::MultivaluedMap;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, MAX_DEPTH};

/// Which cells get refined between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefineRule {
    /// Cells belonging to a Morse node.
    #[default]
    MorseCells,
    /// Every leaf (a uniform grid at each round).
    AllCells,
}

impl RefineRule {
    pub fn name(self) -> &'static str {
        match self {
            RefineRule::MorseCells => "morse-cells",
            RefineRule::AllCells => "all-cells",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "morse-cells" => Some(RefineRule::MorseCells),
            "all-cells" => Some(RefineRule::AllCells),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Cells are never refined past this per-axis depth.
    pub max_depth: u8,
    pub rule: RefineRule,
}

/// Statistics of one round of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub round: usize,
    pub leaves: usize,
    pub edges: usize,
    pub morse_nodes: usize,
    pub morse_cells: usize,
    pub morse_volume: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub grid: Grid,
    pub map: MultivaluedMap,
    pub condensation: Condensation,
    pub morse_graph: MorseGraph,
    pub retraction: Option<Retraction>,
    /// True when the leaf cap stopped refinement before `max_depth`.
    pub truncated: bool,
    pub history: Vec<LevelSummary>,
}

/// Runs the refinement loop starting from `grid`.
///
/// `build` computes the outer approximation on a grid; the caller chooses how
/// (exact images, surrogate, parallel or not). When the leaf cap is hit the
/// last completed round is returned with `truncated` set.
pub fn adaptive_morse_pipeline<B>(grid: Grid, options: PipelineOptions, mut build: B) -> Result<PipelineResult>
where
    B: FnMut(&Grid) -> Result<MultivaluedMap>,
{
    let start = grid.max_depth();
    if options.max_depth < start {
        return Err(invalid!(
            "max depth {} is below the initial depth {start}",
            options.max_depth
        ));
    }
    if options.max_depth > MAX_DEPTH {
        return Err(invalid!("max depth {} exceeds {MAX_DEPTH}", options.max_depth));
    }
    let mut grid = grid;
    let mut history = Vec::new();
    let mut truncated = false;
    loop {
        let map = build(&grid)?;
        if map.len() != grid.len() {
            return Err(invalid!("map has {} cells, grid has {}", map.len(), grid.len()));
        }
        let condensation = Condensation::new(&map);
        let morse_graph = MorseGraph::new(&condensation);
        let mut morse_cells: Vec<usize> = morse_graph
            .nodes()
            .iter()
            .flat_map(|n| n.cells.iter().copied())
            .collect();
        morse_cells.sort_unstable();
        history.push(LevelSummary {
            round: history.len(),
            leaves: grid.len(),
            edges: map.edge_count(),
            morse_nodes: morse_graph.len(),
            morse_cells: morse_cells.len(),
            morse_volume: grid.volume_of(&morse_cells),
        });

        let candidates: Vec<usize> = match options.rule {
            RefineRule::MorseCells => morse_cells,
            RefineRule::AllCells => (0..grid.len()).collect(),
        };
        let targets: Vec<usize> = candidates
            .into_iter()
            .filter(|&p| grid.leaves()[p].depth.iter().all(|&k| k < options.max_depth))
            .collect();
        let next = if targets.is_empty() {
            None
        } else {
            match grid.refine_positions(&targets) {
                Ok(g) => Some(g),
                Err(Error::Capacity(_)) => {
                    truncated = true;
                    None
                }
                Err(e) => return Err(e),
            }
        };
        match next {
            Some(g) => grid = g,
            None => {
                let retraction = order_retraction(&condensation, &morse_graph);
                return Ok(PipelineResult {
                    grid,
                    map,
                    condensation,
                    morse_graph,
                    retraction,
                    truncated,
                    history,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rect;
    use crate::systems::AnalyticSystem;
    use alloc::vec;

    fn exact(system: AnalyticSystem) -> impl FnMut(&Grid) -> Result<MultivaluedMap> {
        move |g: &Grid| MultivaluedMap::build(g, |b: &Rect| system.image(b))
    }

    #[test]
    fn degenerate_loop_is_a_single_pass() {
        let s = AnalyticSystem::Contraction;
        let grid = Grid::uniform(s.domain(), &[4]).unwrap();
        let opts = PipelineOptions {
            max_depth: 4,
            rule: RefineRule::MorseCells,
        };
        let r = adaptive_morse_pipeline(grid.clone(), opts, exact(s)).unwrap();
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.grid, grid);
        let map = MultivaluedMap::build(&grid, |b: &Rect| s.image(b)).unwrap();
        assert_eq!(r.map, map);
        let mg = MorseGraph::new(&Condensation::new(&map));
        assert_eq!(r.morse_graph, mg);
    }

    #[test]
    fn contraction_morse_volume_shrinks() {
        let s = AnalyticSystem::Contraction;
        let grid = Grid::uniform(s.domain(), &[3]).unwrap();
        let opts = PipelineOptions {
            max_depth: 6,
            rule: RefineRule::MorseCells,
        };
        let r = adaptive_morse_pipeline(grid, opts, exact(s)).unwrap();
        assert_eq!(r.history.len(), 4);
        for w in r.history.windows(2) {
            assert!(w[1].morse_volume <= w[0].morse_volume);
        }
        assert!(!r.truncated);
    }

    #[test]
    fn cap_truncates() {
        let s = AnalyticSystem::Contraction;
        let grid = Grid::uniform_with_cap(s.domain(), &[2], 6).unwrap();
        let opts = PipelineOptions {
            max_depth: 10,
            rule: RefineRule::AllCells,
        };
        let r = adaptive_morse_pipeline(grid, opts, exact(s)).unwrap();
        assert!(r.truncated);
        assert_eq!(r.grid.len(), 4);
    }

    #[test]
    fn rejects_shallow_max_depth() {
        let grid = Grid::uniform(Rect::new(vec![0.0], vec![1.0]).unwrap(), &[3]).unwrap();
        let opts = PipelineOptions {
            max_depth: 2,
            rule: RefineRule::MorseCells,
        };
        assert!(adaptive_morse_pipeline(grid, opts, |g: &Grid| {
            MultivaluedMap::build(g, |b: &Rect| Ok(b.clone()))
        })
        .is_err());
    }
}
