//! Readers and writers for every artifact the tool produces or consumes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use morsedyn_core::dynamics::MultivaluedMap;
use morsedyn_core::grid::{CellId, Grid, Rect, DEFAULT_LEAF_CAP};
use morsedyn_core::harness::{Dataset, EnsembleRecord};
use morsedyn_core::morse::{CellLabel, Condensation, MorseGraph, MorseNode, Retraction, Role};
use morsedyn_core::surrogate::{CoordinateFit, SamplePair, SurrogateModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

// ---- boxes and grids ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFile {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl From<&Rect> for BoxFile {
    fn from(r: &Rect) -> Self {
        BoxFile {
            lower: r.lower().to_vec(),
            upper: r.upper().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFile {
    pub depth: Vec<u8>,
    pub index: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub domain: BoxFile,
    pub leaves: Vec<CellFile>,
}

pub fn grid_json(grid: &Grid) -> String {
    to_json(&GridFile {
        domain: grid.domain().into(),
        leaves: grid
            .leaves()
            .iter()
            .map(|c| CellFile {
                depth: c.depth.clone(),
                index: c.index.clone(),
            })
            .collect(),
    })
}

pub fn parse_grid(text: &str) -> CliResult<Grid> {
    let f: GridFile =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("grid file: {e}")))?;
    let domain = Rect::proper(f.domain.lower, f.domain.upper)?;
    let cap = DEFAULT_LEAF_CAP.max(f.leaves.len());
    let leaves = f
        .leaves
        .into_iter()
        .map(|c| CellId::new(c.depth, c.index))
        .collect();
    Ok(Grid::from_leaves(domain, leaves, cap)?)
}

// ---- multivalued maps ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub cells: usize,
    pub edges: Vec<[usize; 2]>,
    pub clipped: Vec<usize>,
}

pub fn map_json(map: &MultivaluedMap) -> String {
    to_json(&MapFile {
        cells: map.len(),
        edges: map.edges().map(|(s, t)| [s, t]).collect(),
        clipped: map.clipped_cells(),
    })
}

pub fn parse_map(text: &str) -> CliResult<MultivaluedMap> {
    let f: MapFile =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("map file: {e}")))?;
    let mut adjacency = vec![Vec::new(); f.cells];
    for [s, t] in f.edges {
        if s >= f.cells {
            return Err(CliError::Validation(format!("map file: edge source {s} out of range")));
        }
        adjacency[s].push(t);
    }
    let mut clipped = vec![false; f.cells];
    for c in f.clipped {
        *clipped
            .get_mut(c)
            .ok_or_else(|| CliError::Validation(format!("map file: clipped cell {c} out of range")))? = true;
    }
    Ok(MultivaluedMap::from_adjacency(adjacency, clipped)?)
}

pub fn map_edges_csv(map: &MultivaluedMap) -> String {
    csv_bytes(
        &["src", "dst"],
        map.edges().map(|(s, t)| vec![s.to_string(), t.to_string()]),
    )
}

// ---- surrogate ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateFile {
    pub prior_mean: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub dual_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFile {
    pub kernel: String,
    pub length_scales: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
    pub coordinates: Vec<CoordinateFile>,
}

pub fn surrogate_json(model: &SurrogateModel) -> String {
    to_json(&SurrogateFile {
        kernel: "squared-exponential".into(),
        length_scales: model.length_scales().to_vec(),
        inputs: model.inputs().to_vec(),
        coordinates: model
            .coordinates()
            .iter()
            .map(|c| CoordinateFile {
                prior_mean: c.prior_mean,
                signal_variance: c.signal_variance,
                noise_variance: c.noise_variance,
                dual_weights: c.dual_weights.clone(),
            })
            .collect(),
    })
}

pub fn parse_surrogate(text: &str) -> CliResult<SurrogateModel> {
    let f: SurrogateFile = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("surrogate file: {e}")))?;
    let coords = f
        .coordinates
        .into_iter()
        .map(|c| CoordinateFit {
            prior_mean: c.prior_mean,
            signal_variance: c.signal_variance,
            noise_variance: c.noise_variance,
            dual_weights: c.dual_weights,
        })
        .collect();
    Ok(SurrogateModel::from_parts(f.inputs, f.length_scales, coords)?)
}

// ---- Morse graph ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFile {
    pub id: usize,
    pub cells: Vec<usize>,
    pub minimal: bool,
}

/// Morse graph artifact. `order_edges` are covering pairs `[q, p]` with
/// `p < q`; `components` lists the cells of every condensation component so
/// that basins can be recomputed from the file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseFile {
    pub cells: usize,
    pub nodes: Vec<NodeFile>,
    pub order_edges: Vec<[usize; 2]>,
    pub components: Vec<Vec<usize>>,
    pub retraction: Option<BTreeMap<usize, usize>>,
}

impl MorseFile {
    pub fn new(cond: &Condensation, mg: &MorseGraph, retraction: Option<&Retraction>) -> Self {
        MorseFile {
            cells: cond.cell_count(),
            nodes: mg
                .nodes()
                .iter()
                .enumerate()
                .map(|(id, n)| NodeFile {
                    id,
                    cells: n.cells.clone(),
                    minimal: n.minimal,
                })
                .collect(),
            order_edges: mg.covering_edges().into_iter().map(|(q, p)| [q, p]).collect(),
            components: cond.components().to_vec(),
            retraction: retraction.map(|r| r.assignment().iter().copied().enumerate().collect()),
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let f: MorseFile = serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("Morse graph file: {e}")))?;
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Validation(format!("Morse graph file: {m}")));
        let m = self.nodes.len();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return bad(format!("node ids must be 0..{m} in order"));
            }
            if n.cells.iter().any(|&c| c >= self.cells) {
                return bad(format!("node {i} names a cell outside 0..{}", self.cells));
            }
        }
        if self.order_edges.iter().flatten().any(|&x| x >= m) {
            return bad("order edge names an unknown node".into());
        }
        let mut seen = vec![false; self.cells];
        for comp in &self.components {
            for &c in comp {
                if c >= self.cells || std::mem::replace(&mut seen[c], true) {
                    return bad("components must partition the cells".into());
                }
            }
        }
        if !self.components.is_empty() && seen.iter().any(|s| !s) {
            return bad("components must partition the cells".into());
        }
        if let Some(r) = &self.retraction {
            if r.len() != self.components.len() || r.keys().copied().ne(0..self.components.len()) {
                return bad("retraction must map every component".into());
            }
            if r.values().any(|&v| v >= m) {
                return bad("retraction targets an unknown node".into());
            }
        }
        Ok(())
    }

    /// `above[q][p]` from the covering edges.
    pub fn order_matrix(&self) -> CliResult<Vec<Vec<bool>>> {
        let m = self.nodes.len();
        let mut above = vec![vec![false; m]; m];
        for (q, row) in above.iter_mut().enumerate() {
            row[q] = true;
        }
        for &[q, p] in &self.order_edges {
            above[q][p] = true;
        }
        for k in 0..m {
            for q in 0..m {
                if above[q][k] {
                    for p in 0..m {
                        if above[k][p] {
                            above[q][p] = true;
                        }
                    }
                }
            }
        }
        for q in 0..m {
            for p in 0..m {
                if p != q && above[q][p] && above[p][q] {
                    return Err(CliError::Validation(
                        "Morse graph file: order edges contain a cycle".into(),
                    ));
                }
            }
        }
        Ok(above)
    }

    pub fn morse_graph(&self) -> CliResult<MorseGraph> {
        let above = self.order_matrix()?;
        let nodes = self
            .nodes
            .iter()
            .map(|n| MorseNode {
                component: self.component_of(n.cells.first().copied()).unwrap_or(usize::MAX),
                cells: n.cells.clone(),
                minimal: n.minimal,
            })
            .collect();
        Ok(MorseGraph::from_order(nodes, above, self.components.len()))
    }

    fn component_of(&self, cell: Option<usize>) -> Option<usize> {
        let cell = cell?;
        self.components.iter().position(|c| c.contains(&cell))
    }

    /// Cell labels derived from the stored retraction; without one only the
    /// Morse cells are labelled.
    pub fn labels(&self) -> Vec<(usize, CellLabel)> {
        let mut node_of_cell = vec![None; self.cells];
        for n in &self.nodes {
            for &c in &n.cells {
                node_of_cell[c] = Some(n.id);
            }
        }
        let mut out = Vec::new();
        match &self.retraction {
            Some(r) => {
                for (comp, cells) in self.components.iter().enumerate() {
                    let node = r[&comp];
                    for &c in cells {
                        let role = if node_of_cell[c].is_some() {
                            Role::Morse
                        } else if self.nodes[node].minimal {
                            Role::Basin
                        } else {
                            Role::Separatrix
                        };
                        out.push((c, CellLabel { node, role }));
                    }
                }
            }
            None => {
                for (c, n) in node_of_cell.iter().enumerate() {
                    if let Some(node) = n {
                        out.push((
                            c,
                            CellLabel {
                                node: *node,
                                role: Role::Morse,
                            },
                        ));
                    }
                }
            }
        }
        out.sort_by_key(|(c, _)| *c);
        out
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    /// Graphviz rendering: one rank per poset height, highest at the top.
    pub fn to_dot(&self) -> CliResult<String> {
        let mg = self.morse_graph()?;
        let heights = mg.heights();
        let mut s = String::new();
        s.push_str("digraph morse {\n  rankdir=TB;\n  node [shape=box];\n");
        for n in &self.nodes {
            let kind = if n.minimal { "minimal" } else { "non-minimal" };
            let _ = writeln!(
                s,
                "  n{} [label=\"{} ({} cells, {kind})\"];",
                n.id,
                n.id,
                n.cells.len()
            );
        }
        let top = heights.iter().copied().max().unwrap_or(0);
        for h in (0..=top).rev() {
            let ids: Vec<String> = (0..self.nodes.len())
                .filter(|&i| heights[i] == h)
                .map(|i| format!("n{i};"))
                .collect();
            if !ids.is_empty() {
                let _ = writeln!(s, "  {{ rank=same; {} }}", ids.join(" "));
            }
        }
        for &[q, p] in &self.order_edges {
            let _ = writeln!(s, "  n{q} -> n{p};");
        }
        s.push_str("}\n");
        Ok(s)
    }

    pub fn basins_csv(&self) -> String {
        basins_csv_rows(self.labels())
    }
}

pub fn basins_csv(labels: &[CellLabel]) -> String {
    basins_csv_rows(labels.iter().copied().enumerate().collect())
}

fn basins_csv_rows(rows: Vec<(usize, CellLabel)>) -> String {
    csv_bytes(
        &["cell", "node", "role"],
        rows.into_iter().map(|(c, l)| {
            vec![c.to_string(), l.node.to_string(), l.role.as_str().to_string()]
        }),
    )
}

// ---- ensemble records ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLine {
    pub cycle: usize,
    pub seed: u64,
    pub diverged: bool,
    pub initial: Vec<f64>,
    #[serde(rename = "final")]
    pub final_weights: Vec<f64>,
    pub predictions: Vec<usize>,
    pub balanced_accuracy: f64,
}

pub fn records_jsonl(records: &[EnsembleRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let line = RecordLine {
            cycle: r.cycle,
            seed: r.seed,
            diverged: r.diverged,
            initial: r.initial.clone(),
            final_weights: r.final_weights.clone(),
            predictions: r.predictions.clone(),
            balanced_accuracy: r.balanced_accuracy,
        };
        s.push_str(&serde_json::to_string(&line).expect("record serializes"));
        s.push('\n');
    }
    s
}

pub fn parse_records(text: &str) -> CliResult<Vec<EnsembleRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: RecordLine = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("records line {}: {e}", i + 1)))?;
        out.push(EnsembleRecord {
            cycle: r.cycle,
            seed: r.seed,
            diverged: r.diverged,
            initial: r.initial,
            final_weights: r.final_weights,
            predictions: r.predictions,
            balanced_accuracy: r.balanced_accuracy,
        });
    }
    if out.is_empty() {
        return Err(CliError::Validation("records file is empty".into()));
    }
    let n = out[0].initial.len();
    if let Some(r) = out
        .iter()
        .find(|r| r.initial.len() != n || r.final_weights.len() != n)
    {
        return Err(CliError::Validation(format!(
            "records: cycle {} has weight vectors of a different length",
            r.cycle
        )));
    }
    Ok(out)
}

// ---- sample pairs ----

pub fn pairs_csv(pairs: &[SamplePair]) -> String {
    let d = pairs.first().map_or(0, |p| p.input.len());
    let header: Vec<String> = (1..=d)
        .map(|i| format!("x{i}"))
        .chain((1..=d).map(|i| format!("y{i}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_bytes(
        &header,
        pairs.iter().map(|p| {
            p.input
                .iter()
                .chain(&p.output)
                .map(|v| v.to_string())
                .collect()
        }),
    )
}

/// Reads `2d` numeric columns: the first half are inputs, the second outputs.
pub fn parse_pairs(path: &Path) -> CliResult<Vec<SamplePair>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let width = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .len();
    if width == 0 || width % 2 != 0 {
        return Err(CliError::Validation(format!(
            "{}: pair files need an even, positive number of columns (got {width})",
            path.display()
        )));
    }
    let d = width / 2;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let vals = row
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Validation(format!("{} row {}: {e}", path.display(), i + 1)))?;
        if vals.len() != width {
            return Err(CliError::Validation(format!(
                "{} row {}: expected {width} columns",
                path.display(),
                i + 1
            )));
        }
        out.push(SamplePair::new(vals[..d].to_vec(), vals[d..].to_vec()));
    }
    Ok(out)
}

// ---- datasets ----

/// Reads a CSV with a header; `label_column` holds non-negative integer
/// labels, every other column is a numeric feature.
pub fn parse_dataset(path: &Path, label_column: &str) -> CliResult<Dataset> {
    let err = |m: String| CliError::Validation(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    let label_at = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| err(format!("no column named {label_column:?}")))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| err(e.to_string()))?;
        let mut f = Vec::with_capacity(row.len().saturating_sub(1));
        for (j, v) in row.iter().enumerate() {
            if j == label_at {
                let l = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| err(format!("row {}: label {v:?} is not a class index", i + 1)))?;
                labels.push(l);
            } else {
                f.push(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| err(format!("row {}, column {}: {e}", i + 1, j + 1)))?,
                );
            }
        }
        features.push(f);
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    Dataset::new(features, labels, classes).map_err(|e| err(e.to_string()))
}

pub fn entropy_csv(entropy: &[f64], labels: &[usize]) -> String {
    csv_bytes(
        &["test_point", "label", "entropy_bits"],
        entropy
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (h, l))| vec![i.to_string(), l.to_string(), h.to_string()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use morsedyn_core::morse::{basins, order_retraction};

    fn sample_graph() -> (Condensation, MorseGraph) {
        let map =
            MultivaluedMap::from_edges(5, &[(0, 0), (2, 2), (4, 4), (0, 1), (0, 3), (1, 2), (3, 4)]).unwrap();
        let c = Condensation::new(&map);
        let mg = MorseGraph::new(&c);
        (c, mg)
    }

    #[test]
    fn morse_json_round_trip_and_labels() {
        let (c, mg) = sample_graph();
        let r = order_retraction(&c, &mg).unwrap();
        let f = MorseFile::new(&c, &mg, Some(&r));
        let text = f.to_json();
        let back = MorseFile::parse(&text).unwrap();
        assert_eq!(back.to_json(), text);
        let direct: Vec<CellLabel> = basins(&c, &mg, &r);
        assert_eq!(basins_csv(&direct), back.basins_csv());
        assert_eq!(back.morse_graph().unwrap().order_matrix(), mg.order_matrix());
    }

    #[test]
    fn dot_has_ranks_and_covers() {
        let (c, mg) = sample_graph();
        let dot = MorseFile::new(&c, &mg, None).to_dot().unwrap();
        assert_eq!(dot.matches("->").count(), 2);
        assert!(dot.contains("rank=same; n1; n2;"));
        assert!(dot.contains("rank=same; n0;"));
    }

    #[test]
    fn map_round_trip() {
        let map = MultivaluedMap::from_adjacency(vec![vec![1], vec![0, 1], vec![]], vec![false, false, true])
            .unwrap();
        assert_eq!(parse_map(&map_json(&map)).unwrap(), map);
        assert_eq!(map_edges_csv(&map), "src,dst\n0,1\n1,0\n1,1\n");
    }

    #[test]
    fn grid_round_trip() {
        let g = Grid::uniform(Rect::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap(), &[1, 1])
            .unwrap()
            .refine_positions(&[2])
            .unwrap();
        assert_eq!(parse_grid(&grid_json(&g)).unwrap(), g);
    }
}
