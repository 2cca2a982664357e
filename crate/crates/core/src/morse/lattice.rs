//! Forward-reachable regions `A(M)`, the lattice they generate, and its
//! join-irreducible elements.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::bitset::BitSet;
use super::graph::{covering_pairs, MorseGraph};
use crate::dynamics::MultivaluedMap;
use crate::error::{invalid, Error, Result};

/// Upper bound on the number of lattice elements produced by closure.
pub const DEFAULT_LATTICE_CAP: usize = 1 << 12;

/// Forward closure of `seeds` under the map (sorted, includes the seeds).
pub fn forward_closure(map: &MultivaluedMap, seeds: &[usize]) -> Vec<usize> {
    let mut seen = BitSet::new(map.len());
    let mut stack: Vec<usize> = Vec::new();
    for &s in seeds {
        if seen.insert(s) {
            stack.push(s);
        }
    }
    while let Some(v) = stack.pop() {
        for &w in map.successors(v) {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.to_vec()
}

/// The region `A(M)` of Morse node `node`: every cell reachable from its cells.
pub fn reachable_region(map: &MultivaluedMap, mg: &MorseGraph, node: usize) -> Result<Vec<usize>> {
    let n = mg
        .nodes()
        .get(node)
        .ok_or_else(|| invalid!("no Morse node {node}"))?;
    Ok(forward_closure(map, &n.cells))
}

/// True iff every successor of a cell in `region` is in `region`.
pub fn is_forward_invariant(map: &MultivaluedMap, region: &[usize]) -> bool {
    let set = BitSet::from_indices(map.len(), region.iter().copied());
    region
        .iter()
        .all(|&v| map.successors(v).iter().all(|&w| set.contains(w)))
}

/// Family of cell sets closed under union and intersection, ordered by inclusion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLattice {
    universe: usize,
    elements: Vec<BitSet>,
    generators: Vec<usize>,
}

impl RegionLattice {
    /// Smallest family containing the empty set and `regions` that is closed
    /// under pairwise union and intersection.
    pub fn generate(universe: usize, regions: &[Vec<usize>]) -> Result<Self> {
        RegionLattice::generate_with_cap(universe, regions, DEFAULT_LATTICE_CAP)
    }

    pub fn generate_with_cap(universe: usize, regions: &[Vec<usize>], cap: usize) -> Result<Self> {
        let mut gens = Vec::with_capacity(regions.len());
        for r in regions {
            if let Some(&v) = r.iter().find(|&&v| v >= universe) {
                return Err(invalid!("region cell {v} outside 0..{universe}"));
            }
            gens.push(BitSet::from_indices(universe, r.iter().copied()));
        }
        let mut elements: Vec<BitSet> = vec![BitSet::new(universe)];
        let mut seen: BTreeSet<BitSet> = elements.iter().cloned().collect();
        for g in &gens {
            if seen.insert(g.clone()) {
                elements.push(g.clone());
            }
        }
        // Fixed point: combine every element with everything before it.
        let mut frontier = 0;
        while frontier < elements.len() {
            let a = elements[frontier].clone();
            for j in 0..frontier {
                for c in [a.union(&elements[j]), a.intersection(&elements[j])] {
                    if !seen.contains(&c) {
                        if elements.len() >= cap {
                            return Err(Error::Capacity(alloc::format!(
                                "region lattice exceeds {cap} elements"
                            )));
                        }
                        seen.insert(c.clone());
                        elements.push(c);
                    }
                }
            }
            frontier += 1;
        }
        elements.sort_by(|a, b| a.count().cmp(&b.count()).then_with(|| a.to_vec().cmp(&b.to_vec())));
        let generators = gens
            .iter()
            .map(|g| elements.iter().position(|e| e == g).expect("generator in lattice"))
            .collect();
        Ok(RegionLattice {
            universe,
            elements,
            generators,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    /// Element `i` as a sorted cell list.
    pub fn element(&self, i: usize) -> Vec<usize> {
        self.elements[i].to_vec()
    }

    pub fn elements(&self) -> Vec<Vec<usize>> {
        self.elements.iter().map(BitSet::to_vec).collect()
    }

    /// Index of the element equal to `cells`, if present.
    pub fn index_of(&self, cells: &[usize]) -> Option<usize> {
        let set = BitSet::from_indices(self.universe, cells.iter().copied());
        self.elements.iter().position(|e| *e == set)
    }

    /// Indices of the generators.
    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn is_subset(&self, a: usize, b: usize) -> bool {
        self.elements[a].is_subset(&self.elements[b])
    }

    pub fn union(&self, a: usize, b: usize) -> Option<usize> {
        let u = self.elements[a].union(&self.elements[b]);
        self.elements.iter().position(|e| *e == u)
    }

    pub fn intersection(&self, a: usize, b: usize) -> Option<usize> {
        let u = self.elements[a].intersection(&self.elements[b]);
        self.elements.iter().position(|e| *e == u)
    }

    /// Elements immediately below `a` under inclusion.
    pub fn lower_covers(&self, a: usize) -> Vec<usize> {
        let below: Vec<usize> = (0..self.len())
            .filter(|&b| b != a && self.is_subset(b, a))
            .collect();
        below
            .iter()
            .copied()
            .filter(|&b| !below.iter().any(|&c| c != b && self.is_subset(b, c)))
            .collect()
    }
}

/// Join-irreducible elements of a lattice with the induced inclusion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinIrreducibles {
    /// Lattice indices of the join-irreducible elements.
    pub elements: Vec<usize>,
    /// `above[q][p]` is true iff element `p` is contained in element `q`.
    pub above: Vec<Vec<bool>>,
}

impl JoinIrreducibles {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn covering_edges(&self) -> Vec<(usize, usize)> {
        covering_pairs(&self.above)
    }
}

/// Elements with exactly one immediate predecessor.
///
/// Joins are unions here, so `a` has a unique lower cover exactly when the
/// union of everything strictly below `a` is not `a` itself (two distinct
/// covers would join to `a`); the bottom element has no cover at all.
pub fn join_irreducibles(lat: &RegionLattice) -> JoinIrreducibles {
    let elements: Vec<usize> = (0..lat.len())
        .filter(|&a| {
            let target = &lat.elements[a];
            let mut below = BitSet::new(lat.universe);
            let mut any = false;
            for (b, e) in lat.elements.iter().enumerate() {
                if b != a && e.is_subset(target) {
                    below.union_with(e);
                    any = true;
                }
            }
            any && below != *target
        })
        .collect();
    let above = elements
        .iter()
        .map(|&q| elements.iter().map(|&p| lat.is_subset(p, q)).collect())
        .collect();
    JoinIrreducibles { elements, above }
}

/// Order isomorphism test for two small posets given as `above[q][p] = (p <= q)`.
pub fn posets_isomorphic(a: &[Vec<bool>], b: &[Vec<bool>]) -> bool {
    let n = a.len();
    if b.len() != n {
        return false;
    }
    let profile = |o: &[Vec<bool>], v: usize| {
        let down = (0..n).filter(|&u| o[v][u]).count();
        let up = (0..n).filter(|&u| o[u][v]).count();
        (down, up)
    };
    let pa: Vec<_> = (0..n).map(|v| profile(a, v)).collect();
    let pb: Vec<_> = (0..n).map(|v| profile(b, v)).collect();
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    extend_iso(0, a, b, &pa, &pb, &mut image, &mut used)
}

fn extend_iso(
    v: usize,
    a: &[Vec<bool>],
    b: &[Vec<bool>],
    pa: &[(usize, usize)],
    pb: &[(usize, usize)],
    image: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    let n = a.len();
    if v == n {
        return true;
    }
    for w in 0..n {
        if used[w] || pa[v] != pb[w] {
            continue;
        }
        let consistent = (0..v).all(|u| a[v][u] == b[w][image[u]] && a[u][v] == b[image[u]][w]);
        if !consistent {
            continue;
        }
        image[v] = w;
        used[w] = true;
        if extend_iso(v + 1, a, b, pa, pb, image, used) {
            return true;
        }
        used[w] = false;
    }
    image[v] = usize::MAX;
    false
}

/// Checks that the join-irreducibles of the lattice generated by the regions
/// `A(M)` are exactly those regions, ordered like the Morse graph.
///
/// Returns `true` when `M -> A(M)` is an order isomorphism onto the
/// join-irreducible poset.
pub fn birkhoff_correspondence(mg: &MorseGraph, regions: &[Vec<usize>], lat: &RegionLattice) -> bool {
    let ji = join_irreducibles(lat);
    if ji.len() != mg.len() || regions.len() != mg.len() {
        return false;
    }
    let mut image = Vec::with_capacity(regions.len());
    for r in regions {
        match lat.index_of(r) {
            Some(i) if ji.elements.contains(&i) => image.push(i),
            _ => return false,
        }
    }
    let mut distinct = image.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != image.len() {
        return false;
    }
    (0..mg.len()).all(|q| (0..mg.len()).all(|p| mg.le(p, q) == lat.is_subset(image[p], image[q])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_generator() {
        let lat = RegionLattice::generate(4, &[vec![1, 2]]).unwrap();
        assert_eq!(lat.elements(), vec![vec![], vec![1, 2]]);
        let ji = join_irreducibles(&lat);
        assert_eq!(ji.elements, vec![1]);
    }

    #[test]
    fn chain_is_closed() {
        let lat = RegionLattice::generate(4, &[vec![1], vec![1, 2]]).unwrap();
        assert_eq!(lat.len(), 3);
        let ji = join_irreducibles(&lat);
        assert_eq!(ji.len(), 2);
        assert_eq!(ji.covering_edges(), vec![(1, 0)]);
    }

    #[test]
    fn two_overlapping_generators() {
        let lat = RegionLattice::generate(5, &[vec![0, 1], vec![1, 2]]).unwrap();
        // ∅, {1}, {0,1}, {1,2}, {0,1,2}
        assert_eq!(lat.len(), 5);
        for a in 0..lat.len() {
            for b in 0..lat.len() {
                assert!(lat.union(a, b).is_some());
                assert!(lat.intersection(a, b).is_some());
            }
        }
        // {1}, {0,1}, {1,2} each have a single lower cover.
        assert_eq!(join_irreducibles(&lat).len(), 3);
        for &a in &join_irreducibles(&lat).elements {
            assert_eq!(lat.lower_covers(a).len(), 1);
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let gens: Vec<Vec<usize>> = (0..8).map(|i| vec![i]).collect();
        assert!(matches!(
            RegionLattice::generate_with_cap(8, &gens, 100),
            Err(Error::Capacity(_))
        ));
        assert_eq!(RegionLattice::generate(8, &gens).unwrap().len(), 256);
    }

    #[test]
    fn isomorphism() {
        let chain = vec![vec![true, false], vec![true, true]];
        let rev = vec![vec![true, true], vec![false, true]];
        let anti = vec![vec![true, false], vec![false, true]];
        assert!(posets_isomorphic(&chain, &rev));
        assert!(!posets_isomorphic(&chain, &anti));
    }

    #[test]
    fn forward_invariance_of_closure() {
        let map = MultivaluedMap::from_edges(5, &[(0, 1), (1, 2), (2, 1), (3, 4)]).unwrap();
        let r = forward_closure(&map, &[0]);
        assert_eq!(r, vec![0, 1, 2]);
        assert!(is_forward_invariant(&map, &r));
        assert!(!is_forward_invariant(&map, &[0, 1]));
    }
}
