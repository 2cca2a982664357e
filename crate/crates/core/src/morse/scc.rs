//! Tarjan's strongly connected components, iterative.

use alloc::vec;
use alloc::vec::Vec;

const UNVISITED: usize = usize::MAX;

/// Strongly connected components of the graph given by `adjacency`.
///
/// Every component is sorted, and components are ordered by their smallest
/// vertex.
pub fn tarjan(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0usize;
    // (vertex, next successor slot)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut slot)) = call.last_mut() {
            if let Some(&w) = adjacency[v].get(*slot) {
                *slot += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps.sort_unstable_by_key(|c| c[0]);
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_with_tail() {
        // 1->2, 2->3, 3->1, 4->1 shifted to 0-based.
        let adj = vec![vec![1], vec![2], vec![0], vec![0]];
        assert_eq!(tarjan(&adj), vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn edgeless_graph() {
        let adj = vec![Vec::new(); 5];
        assert_eq!(tarjan(&adj), (0..5).map(|v| vec![v]).collect::<Vec<_>>());
    }

    #[test]
    fn long_path_does_not_recurse() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|v| if v + 1 < n { vec![v + 1] } else { vec![0] }).collect();
        let c = tarjan(&adj);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), n);
    }
}
