//! Order retractions of `SC(F)` onto the Morse graph, and the basins they induce.

use alloc::vec;
use alloc::vec::Vec;

use super::bitset::BitSet;
use super::graph::{Condensation, MorseGraph};

/// An order-preserving map from condensation components onto Morse nodes that
/// fixes every Morse node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Retraction {
    assignment: Vec<usize>,
}

impl Retraction {
    /// Wraps an assignment after checking it is an order retraction.
    pub fn new(cond: &Condensation, mg: &MorseGraph, assignment: Vec<usize>) -> Option<Self> {
        is_order_retraction(cond, mg, &assignment).then_some(Retraction { assignment })
    }

    /// Morse node assigned to condensation component `c`.
    pub fn node_of(&self, c: usize) -> usize {
        self.assignment[c]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

/// True iff `assignment` fixes Morse nodes and is order preserving.
///
/// Order preservation is checked on condensation edges; the Morse order is
/// transitive, so that covers every comparable pair.
pub fn is_order_retraction(cond: &Condensation, mg: &MorseGraph, assignment: &[usize]) -> bool {
    if assignment.len() != cond.len() || assignment.iter().any(|&n| n >= mg.len()) {
        return false;
    }
    let fixes = mg
        .nodes()
        .iter()
        .enumerate()
        .all(|(id, node)| assignment[node.component] == id);
    fixes && cond.edges().all(|(u, v)| mg.le(assignment[v], assignment[u]))
}

/// Finds an order retraction, or `None` if none exists.
///
/// Components are visited sinks first. A non-recurrent component `v` may take
/// any Morse node that lies above the values of all its successors and below
/// every Morse node that reaches `v`. When those candidates have a least
/// element it is the only choice worth trying: a smaller value never tightens
/// the constraints of anything visited later. Otherwise each minimal candidate
/// is tried in turn with backtracking, so the search is exact.
pub fn order_retraction(cond: &Condensation, mg: &MorseGraph) -> Option<Retraction> {
    let n = cond.len();
    let m = mg.len();
    if m == 0 {
        return (n == 0).then(|| Retraction { assignment: Vec::new() });
    }
    let order = cond.topological_order()?;

    // Morse nodes that reach each component.
    let mut ancestors: Vec<BitSet> = vec![BitSet::new(m); n];
    for &c in &order {
        if let Some(id) = mg.node_of_component(c) {
            ancestors[c].insert(id);
        }
        let here = ancestors[c].clone();
        for &d in cond.successors(c) {
            ancestors[d].union_with(&here);
        }
    }

    // Nodes below every Morse ancestor, per component.
    let allowed: Vec<BitSet> = ancestors
        .iter()
        .map(|anc| BitSet::from_indices(m, (0..m).filter(|&p| anc.iter().all(|q| mg.le(p, q)))))
        .collect();

    let mut assignment = vec![usize::MAX; n];
    for (id, node) in mg.nodes().iter().enumerate() {
        assignment[node.component] = id;
    }
    let free: Vec<usize> = order
        .iter()
        .rev()
        .copied()
        .filter(|&c| mg.node_of_component(c).is_none())
        .collect();

    // Explicit backtracking stack: candidate list and cursor per free component.
    let mut frames: Vec<(Vec<usize>, usize)> = Vec::with_capacity(free.len());
    let mut depth = 0usize;
    loop {
        if depth == free.len() {
            break;
        }
        let c = free[depth];
        if frames.len() == depth {
            let candidates = candidates_for(c, cond, mg, &allowed[c], &assignment);
            frames.push((candidates, 0));
        }
        let (cands, cursor) = &mut frames[depth];
        if let Some(&choice) = cands.get(*cursor) {
            *cursor += 1;
            assignment[c] = choice;
            depth += 1;
        } else {
            frames.pop();
            assignment[c] = usize::MAX;
            if depth == 0 {
                return None;
            }
            depth -= 1;
        }
    }
    Retraction::new(cond, mg, assignment)
}

fn candidates_for(
    c: usize,
    cond: &Condensation,
    mg: &MorseGraph,
    allowed: &BitSet,
    assignment: &[usize],
) -> Vec<usize> {
    let lower: Vec<usize> = cond.successors(c).iter().map(|&d| assignment[d]).collect();
    let domain: Vec<usize> = allowed
        .iter()
        .filter(|&p| lower.iter().all(|&q| mg.le(q, p)))
        .collect();
    if let Some(&least) = domain.iter().find(|&&p| domain.iter().all(|&q| mg.le(p, q))) {
        return vec![least];
    }
    domain
        .iter()
        .copied()
        .filter(|&p| domain.iter().all(|&q| q == p || !mg.le(q, p)))
        .collect()
}

/// Role of a cell in the decomposition induced by a retraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    /// The cell belongs to a Morse node.
    Morse,
    /// The cell retracts to a minimal Morse node.
    Basin,
    /// The cell retracts to a non-minimal Morse node.
    Separatrix,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Morse => "morse",
            Role::Basin => "basin",
            Role::Separatrix => "separatrix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellLabel {
    pub node: usize,
    pub role: Role,
}

/// Labels every cell by the Morse node it retracts to.
pub fn basins(cond: &Condensation, mg: &MorseGraph, retraction: &Retraction) -> Vec<CellLabel> {
    (0..cond.cell_count())
        .map(|cell| {
            let c = cond.component_of(cell);
            let node = retraction.node_of(c);
            let role = if mg.node_of_component(c).is_some() {
                Role::Morse
            } else if mg.nodes()[node].minimal {
                Role::Basin
            } else {
                Role::Separatrix
            };
            CellLabel { node, role }
        })
        .collect()
}

/// Cells in the basin of the minimal node `node` (excluding its own cells).
pub fn basin_cells(labels: &[CellLabel], node: usize) -> Vec<usize> {
    (0..labels.len())
        .filter(|&v| labels[v].node == node && labels[v].role == Role::Basin)
        .collect()
}
