use alloc::vec;
use alloc::vec::Vec;

use super::scc::tarjan;
use crate::dynamics::MultivaluedMap;

/// The condensation DAG `SC(F)` of a multivalued map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condensation {
    components: Vec<Vec<usize>>,
    component_of: Vec<usize>,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
    recurrent: Vec<bool>,
}

impl Condensation {
    pub fn new(map: &MultivaluedMap) -> Self {
        Condensation::from_adjacency(map.adjacency())
    }

    pub fn from_adjacency(adjacency: &[Vec<usize>]) -> Self {
        let components = tarjan(adjacency);
        let mut component_of = vec![0usize; adjacency.len()];
        for (c, comp) in components.iter().enumerate() {
            for &v in comp {
                component_of[v] = c;
            }
        }
        let mut successors = vec![Vec::new(); components.len()];
        let mut recurrent = vec![false; components.len()];
        for (v, succ) in adjacency.iter().enumerate() {
            let cv = component_of[v];
            for &w in succ {
                let cw = component_of[w];
                if cv == cw {
                    recurrent[cv] = true;
                } else {
                    successors[cv].push(cw);
                }
            }
        }
        let mut predecessors = vec![Vec::new(); components.len()];
        for (c, succ) in successors.iter_mut().enumerate() {
            succ.sort_unstable();
            succ.dedup();
            for &d in succ.iter() {
                predecessors[d].push(c);
            }
        }
        Condensation {
            components,
            component_of,
            successors,
            predecessors,
            recurrent,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, cell: usize) -> usize {
        self.component_of[cell]
    }

    pub fn cell_count(&self) -> usize {
        self.component_of.len()
    }

    pub fn successors(&self, c: usize) -> &[usize] {
        &self.successors[c]
    }

    pub fn predecessors(&self, c: usize) -> &[usize] {
        &self.predecessors[c]
    }

    pub fn is_recurrent(&self, c: usize) -> bool {
        self.recurrent[c]
    }

    pub fn recurrent_flags(&self) -> &[bool] {
        &self.recurrent
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.successors
            .iter()
            .enumerate()
            .flat_map(|(c, s)| s.iter().map(move |&d| (c, d)))
    }

    /// Kahn's algorithm; sources first. `None` only if the edge relation has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.predecessors.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..n).rev().filter(|&c| indegree[c] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(c) = ready.pop() {
            order.push(c);
            for &d in self.successors[c].iter().rev() {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    ready.push(d);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Components reachable from `c` (including `c`).
    pub fn reachable_from(&self, c: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![c];
        seen[c] = true;
        while let Some(u) = stack.pop() {
            for &w in &self.successors[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}

/// One recurrent component of the map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorseNode {
    pub component: usize,
    pub cells: Vec<usize>,
    pub minimal: bool,
}

/// Recurrent components ordered by reachability: `p <= q` iff `q` reaches `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorseGraph {
    nodes: Vec<MorseNode>,
    /// `above[q][p]` is true iff `p <= q`.
    above: Vec<Vec<bool>>,
    node_of_component: Vec<Option<usize>>,
}

impl MorseGraph {
    pub fn new(cond: &Condensation) -> Self {
        let mut node_of_component = vec![None; cond.len()];
        let mut nodes = Vec::new();
        for c in 0..cond.len() {
            if cond.is_recurrent(c) {
                node_of_component[c] = Some(nodes.len());
                nodes.push(MorseNode {
                    component: c,
                    cells: cond.components()[c].clone(),
                    minimal: true,
                });
            }
        }
        let m = nodes.len();
        let mut above = vec![vec![false; m]; m];
        for q in 0..m {
            let reach = cond.reachable_from(nodes[q].component);
            for p in 0..m {
                above[q][p] = reach[nodes[p].component];
            }
        }
        for q in 0..m {
            nodes[q].minimal = (0..m).all(|p| p == q || !above[q][p]);
        }
        MorseGraph {
            nodes,
            above,
            node_of_component,
        }
    }

    /// Builds a Morse graph directly from an order relation; used by tests and
    /// for reading stored graphs. `above[q][p]` must be a partial order.
    pub fn from_order(nodes: Vec<MorseNode>, above: Vec<Vec<bool>>, components: usize) -> Self {
        let mut node_of_component = vec![None; components];
        for (i, n) in nodes.iter().enumerate() {
            if n.component < components {
                node_of_component[n.component] = Some(i);
            }
        }
        MorseGraph {
            nodes,
            above,
            node_of_component,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[MorseNode] {
        &self.nodes
    }

    pub fn node_of_component(&self, c: usize) -> Option<usize> {
        self.node_of_component.get(c).copied().flatten()
    }

    /// `p <= q` in the Morse order.
    pub fn le(&self, p: usize, q: usize) -> bool {
        self.above[q][p]
    }

    pub fn order_matrix(&self) -> &[Vec<bool>] {
        &self.above
    }

    pub fn minimal_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.nodes[p].minimal).collect()
    }

    /// Covering pairs `(q, p)`: `p < q` with nothing strictly between.
    pub fn covering_edges(&self) -> Vec<(usize, usize)> {
        covering_pairs(&self.above)
    }

    /// Length of the longest chain below each node (minimal nodes have height 0).
    pub fn heights(&self) -> Vec<usize> {
        let m = self.len();
        let mut order: Vec<usize> = (0..m).collect();
        // Nodes with fewer elements below come first; that is a linear extension.
        order.sort_by_key(|&q| (0..m).filter(|&p| self.above[q][p]).count());
        let mut height = vec![0usize; m];
        for &q in &order {
            height[q] = (0..m)
                .filter(|&p| p != q && self.above[q][p])
                .map(|p| height[p] + 1)
                .max()
                .unwrap_or(0);
        }
        height
    }

    /// Least upper bound of a set of nodes, if one exists.
    pub fn join(&self, items: &[usize]) -> Option<usize> {
        let uppers: Vec<usize> = (0..self.len())
            .filter(|&u| items.iter().all(|&p| self.le(p, u)))
            .collect();
        uppers
            .iter()
            .copied()
            .find(|&u| uppers.iter().all(|&v| self.le(u, v)))
    }
}

/// Covering pairs `(q, p)` of a reflexive order given as `above[q][p] = (p <= q)`.
pub fn covering_pairs(above: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let m = above.len();
    let mut out = Vec::new();
    for q in 0..m {
        for p in 0..m {
            if p == q || !above[q][p] {
                continue;
            }
            let between = (0..m).any(|r| r != p && r != q && above[q][r] && above[r][p]);
            if !between {
                out.push((q, p));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cond(n: usize, edges: &[(usize, usize)]) -> Condensation {
        Condensation::new(&MultivaluedMap::from_edges(n, edges).unwrap())
    }

    #[test]
    fn cycle_with_tail_condenses() {
        let c = cond(4, &[(0, 1), (1, 2), (2, 0), (3, 0)]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.components(), &[vec![0, 1, 2], vec![3]]);
        assert_eq!(c.edges().collect::<Vec<_>>(), vec![(1, 0)]);
        assert!(c.is_recurrent(0));
        assert!(!c.is_recurrent(1));
    }

    #[test]
    fn self_loop_rule() {
        let c = cond(1, &[(0, 0)]);
        assert_eq!(c.len(), 1);
        assert!(c.is_recurrent(0));
        assert_eq!(c.edges().count(), 0);
        let c = cond(1, &[]);
        assert!(!c.is_recurrent(0));
    }

    #[test]
    fn morse_order_and_covers() {
        // top(0) -> mid(1) -> bottom(2), plus top -> non-recurrent 3 -> bottom.
        let c = cond(4, &[(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 3), (3, 2)]);
        let mg = MorseGraph::new(&c);
        assert_eq!(mg.len(), 3);
        assert!(mg.le(2, 0) && mg.le(1, 0) && mg.le(2, 1));
        assert!(!mg.le(0, 2));
        assert_eq!(mg.minimal_nodes(), vec![2]);
        assert_eq!(mg.covering_edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(mg.heights(), vec![2, 1, 0]);
        assert_eq!(mg.join(&[1, 2]), Some(1));
        assert_eq!(mg.join(&[]), Some(2));
    }

    #[test]
    fn topological_order_respects_edges() {
        let c = cond(6, &[(5, 4), (4, 3), (5, 0), (0, 3), (2, 1)]);
        let order = c.topological_order().unwrap();
        let pos: Vec<usize> = (0..c.len()).map(|x| order.iter().position(|&y| y == x).unwrap()).collect();
        for (a, b) in c.edges() {
            assert!(pos[a] < pos[b]);
        }
    }
}
