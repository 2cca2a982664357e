//! The train and analyze stages, and writing their artifacts.

use std::path::Path;

use morsedyn_core::dynamics::{pair_coverage, validate_outer, MultivaluedMap};
use morsedyn_core::grid::{Grid, Rect};
use morsedyn_core::harness::{
    check_not_all_diverged, prediction_entropy, project, select_coordinates, stratified_split,
    train_cycle, EnsembleRecord,
};
use morsedyn_core::morse::{
    adaptive_morse_pipeline, basins, birkhoff_correspondence, is_forward_invariant,
    join_irreducibles, reachable_region, CellLabel, PipelineOptions, PipelineResult, RegionLattice,
};
use morsedyn_core::surrogate::{SamplePair, SurrogateModel};
use morsedyn_core::systems::AnalyticSystem;
use morsedyn_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DomainSpec, LoadedConfig, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{self, BoxFile, MorseFile};

/// Named file contents, written together or not at all.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn push(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }

    pub fn extend(&mut self, other: Artifacts) {
        self.files.extend(other.files);
    }

    /// Writes every file into `dir`; on failure removes what was written.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, contents) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(CliError::io(&path, e));
            }
            written.push(path);
        }
        Ok(())
    }
}

/// Runs `f` on a pool of `threads` workers (`None` or 0: rayon's default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Outer approximation with the per-cell images computed in parallel.
/// Results are collected in canonical cell order, so the map does not depend
/// on scheduling.
pub fn build_map_parallel<F>(grid: &Grid, box_image: F) -> morsedyn_core::Result<MultivaluedMap>
where
    F: Fn(&Rect) -> morsedyn_core::Result<Rect> + Sync,
{
    let images = (0..grid.len())
        .into_par_iter()
        .map(|p| box_image(&grid.bounds(p)))
        .collect::<morsedyn_core::Result<Vec<Rect>>>()?;
    MultivaluedMap::from_images(grid, &images)
}

// ---- training ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub cycles: usize,
    pub diverged: usize,
    pub weight_count: usize,
    pub test_points: usize,
    pub mean_balanced_accuracy: f64,
    pub std_balanced_accuracy: f64,
    pub mean_entropy_bits: f64,
    pub min_entropy_bits: f64,
    pub max_entropy_bits: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub records: Vec<EnsembleRecord>,
    pub entropy: Vec<f64>,
    pub test_labels: Vec<usize>,
    pub summary: TrainSummary,
}

pub fn train(loaded: &LoadedConfig) -> CliResult<TrainOutput> {
    let cfg = &loaded.config;
    cfg.validate()?;
    cfg.validate_training()?;
    let path = loaded.dataset_path().expect("checked above");
    let data = formats::parse_dataset(&path, &cfg.dataset.label_column)?;
    let mut split = stratified_split(&data, cfg.dataset.train_fraction, cfg.dataset.split_seed)?;
    if cfg.dataset.standardize {
        split = split.standardized();
    }
    let net = cfg.net_config(data.width(), data.classes);
    net.validate()
        .map_err(|e| CliError::Validation(format!("network: {e}")))?;
    let ens = cfg.ensemble_config(&net)?;
    ens.validate(&net)?;

    let records = (0..ens.cycles)
        .into_par_iter()
        .map(|c| train_cycle(&net, &ens, &split, c))
        .collect::<morsedyn_core::Result<Vec<_>>>()?;
    check_not_all_diverged(&records)?;
    let entropy = prediction_entropy(&records, data.classes)?;

    let live: Vec<f64> = records
        .iter()
        .filter(|r| !r.diverged)
        .map(|r| r.balanced_accuracy)
        .collect();
    let (mean, std) = mean_std(&live);
    let summary = TrainSummary {
        cycles: records.len(),
        diverged: records.len() - live.len(),
        weight_count: net.weight_count(),
        test_points: split.test.len(),
        mean_balanced_accuracy: mean,
        std_balanced_accuracy: std,
        mean_entropy_bits: mean_std(&entropy).0,
        min_entropy_bits: entropy.iter().copied().fold(f64::INFINITY, f64::min),
        max_entropy_bits: entropy.iter().copied().fold(0.0, f64::max),
    };
    Ok(TrainOutput {
        records,
        entropy,
        test_labels: split.test.labels.clone(),
        summary,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn train_artifacts(cfg: &PipelineConfig, out: &TrainOutput) -> Artifacts {
    let mut a = Artifacts::default();
    a.push("records.jsonl", formats::records_jsonl(&out.records));
    a.push("summary.json", json(&out.summary));
    a.push("entropy.csv", formats::entropy_csv(&out.entropy, &out.test_labels));
    a.push("config.resolved.json", cfg.resolved_json());
    a
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s
}

// ---- analysis ----

/// Where the dynamics come from.
#[derive(Debug, Clone)]
pub enum Source {
    Records(Vec<EnsembleRecord>),
    Pairs(Vec<SamplePair>),
    System(AnalyticSystem),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceReport {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSection {
    /// `sampled-points` (analytic systems) or `training-pairs`.
    pub method: &'static str,
    pub samples: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    pub out_of_domain: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unflagged_exits: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSection {
    pub elements: usize,
    pub join_irreducibles: usize,
    /// Join-irreducibles are exactly the regions `A(M)`, ordered like the Morse graph.
    pub matches_morse_graph: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelFile {
    pub round: usize,
    pub leaves: usize,
    pub edges: usize,
    pub morse_nodes: usize,
    pub morse_cells: usize,
    pub morse_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub source: SourceReport,
    pub domain: BoxFile,
    pub leaves: usize,
    pub edges: usize,
    pub max_depth: u8,
    pub truncated: bool,
    pub morse_nodes: usize,
    pub minimal_nodes: Vec<usize>,
    pub order_edges: Vec<[usize; 2]>,
    pub retraction_present: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub basin_cells: usize,
    pub separatrix_cells: usize,
    pub clipped_cells: usize,
    pub forward_invariant: bool,
    pub coverage: CoverageSection,
    pub lattice: Option<LatticeSection>,
    pub history: Vec<LevelFile>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub result: PipelineResult,
    pub labels: Option<Vec<CellLabel>>,
    pub regions: Vec<Vec<usize>>,
    pub surrogate: Option<SurrogateModel>,
    pub pairs: Option<Vec<SamplePair>>,
    pub report: Report,
}

impl Analysis {
    pub fn morse_file(&self) -> MorseFile {
        MorseFile::new(
            &self.result.condensation,
            &self.result.morse_graph,
            self.result.retraction.as_ref(),
        )
    }
}

/// Box of the projected initial weights, grown by 5% of its extent on each
/// side (10% per axis in total). Axes with no spread get a pad of 0.5.
pub fn auto_domain(pairs: &[SamplePair]) -> CliResult<Rect> {
    let hull = Rect::hull(pairs.iter().map(|p| p.input.as_slice()))?;
    Ok(hull.inflate_or_pad(0.05, 0.5))
}

fn resolve_domain(cfg: &PipelineConfig, fallback: impl FnOnce() -> CliResult<Rect>) -> CliResult<Rect> {
    match &cfg.grid.domain {
        DomainSpec::Explicit { lower, upper } => Ok(Rect::proper(lower.clone(), upper.clone())?),
        DomainSpec::Named(_) => fallback(),
    }
}

pub fn analyze(cfg: &PipelineConfig, source: Source) -> CliResult<Analysis> {
    cfg.validate()?;
    let (source_report, pairs, system) = match source {
        Source::System(s) => (
            SourceReport {
                kind: "system",
                system: Some(s.name()),
                records: None,
                diverged: None,
                pairs: None,
                coordinates: None,
            },
            None,
            Some(s),
        ),
        Source::Pairs(p) => (
            SourceReport {
                kind: "pairs",
                system: None,
                records: None,
                diverged: None,
                pairs: Some(p.len()),
                coordinates: None,
            },
            Some(p),
            None,
        ),
        Source::Records(records) => {
            let live = records.iter().filter(|r| !r.diverged).count();
            if live == 0 {
                return Err(CliError::Runtime("every training cycle in the records diverged".into()));
            }
            if live < 2 {
                return Err(CliError::Validation(
                    "analysis needs at least two non-diverged records".into(),
                ));
            }
            let coords = match &cfg.selection.indices {
                Some(ix) => ix.clone(),
                None => select_coordinates(&records, cfg.selection.k)?,
            };
            let pairs = project(&records, &coords)?;
            (
                SourceReport {
                    kind: "records",
                    system: None,
                    records: Some(records.len()),
                    diverged: Some(records.len() - live),
                    pairs: Some(pairs.len()),
                    coordinates: Some(coords),
                },
                Some(pairs),
                None,
            )
        }
    };

    let domain = match (&system, &pairs) {
        (Some(s), _) => resolve_domain(cfg, || Ok(s.domain()))?,
        (None, Some(p)) => resolve_domain(cfg, || auto_domain(p))?,
        _ => unreachable!("a source always yields a system or pairs"),
    };
    let dim = domain.dim();
    let grid = Grid::uniform_with_cap(domain.clone(), &vec![cfg.grid.initial_depth; dim], cfg.grid.leaf_cap)?;
    let options = PipelineOptions {
        max_depth: cfg.grid.max_depth,
        rule: cfg.refine_rule(),
    };

    let surrogate = match &pairs {
        Some(p) => Some(SurrogateModel::fit(p, &cfg.kernel_config())?),
        None => None,
    };
    let result = match (&system, &surrogate) {
        (Some(s), _) => {
            let s = *s;
            adaptive_morse_pipeline(grid, options, |g| build_map_parallel(g, |b| s.image(b)))?
        }
        (None, Some(model)) => {
            let vc = cfg.variance_config(dim);
            vc.validate()?;
            adaptive_morse_pipeline(grid, options, |g| build_map_parallel(g, |b| model.image_box(b, &vc)))?
        }
        _ => unreachable!(),
    };

    let coverage = match (&system, &pairs) {
        (Some(s), _) => {
            let s = *s;
            let rep = validate_outer(&result.map, &result.grid, |x| s.apply(x), cfg.validation.samples_per_cell)?;
            CoverageSection {
                method: "sampled-points",
                samples: rep.samples,
                violations: rep.violations,
                violation_fraction: rep.violation_fraction(),
                out_of_domain: rep.out_of_domain,
                unflagged_exits: Some(rep.unflagged_exits),
            }
        }
        (None, Some(p)) => {
            let (captured, inside, total) = pair_coverage(&result.map, &result.grid, p);
            CoverageSection {
                method: "training-pairs",
                samples: inside,
                violations: inside - captured,
                violation_fraction: if inside == 0 {
                    0.0
                } else {
                    (inside - captured) as f64 / inside as f64
                },
                out_of_domain: total - inside,
                unflagged_exits: None,
            }
        }
        _ => unreachable!(),
    };

    let mg = &result.morse_graph;
    let regions = (0..mg.len())
        .map(|n| reachable_region(&result.map, mg, n))
        .collect::<morsedyn_core::Result<Vec<_>>>()?;
    let forward_invariant = regions.iter().all(|r| is_forward_invariant(&result.map, r));
    let lattice = match RegionLattice::generate(result.map.len(), &regions) {
        Ok(lat) => Some(LatticeSection {
            elements: lat.len(),
            join_irreducibles: join_irreducibles(&lat).len(),
            matches_morse_graph: birkhoff_correspondence(mg, &regions, &lat),
        }),
        Err(CoreError::Capacity(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let labels = result
        .retraction
        .as_ref()
        .map(|r| basins(&result.condensation, mg, r));
    let count_role = |role| {
        labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|c| c.role == role).count())
    };

    let report = Report {
        source: source_report,
        domain: (&domain).into(),
        leaves: result.grid.len(),
        edges: result.map.edge_count(),
        max_depth: result.grid.max_depth(),
        truncated: result.truncated,
        morse_nodes: mg.len(),
        minimal_nodes: mg.minimal_nodes(),
        order_edges: mg.covering_edges().into_iter().map(|(q, p)| [q, p]).collect(),
        retraction_present: result.retraction.is_some(),
        note: result.retraction.is_none().then(|| {
            "no order retraction exists: the map does not resolve the dynamics; refine further".to_string()
        }),
        basin_cells: count_role(morsedyn_core::morse::Role::Basin),
        separatrix_cells: count_role(morsedyn_core::morse::Role::Separatrix),
        clipped_cells: result.map.clipped_cells().len(),
        forward_invariant,
        coverage,
        lattice,
        history: result
            .history
            .iter()
            .map(|h| LevelFile {
                round: h.round,
                leaves: h.leaves,
                edges: h.edges,
                morse_nodes: h.morse_nodes,
                morse_cells: h.morse_cells,
                morse_volume: h.morse_volume,
            })
            .collect(),
    };
    Ok(Analysis {
        result,
        labels,
        regions,
        surrogate,
        pairs,
        report,
    })
}

pub fn analysis_artifacts(cfg: &PipelineConfig, a: &Analysis) -> CliResult<Artifacts> {
    let mut out = Artifacts::default();
    let morse = a.morse_file();
    out.push("grid.json", formats::grid_json(&a.result.grid));
    out.push("map.json", formats::map_json(&a.result.map));
    if cfg.wants("csv") {
        out.push("map_edges.csv", formats::map_edges_csv(&a.result.map));
    }
    if let Some(p) = &a.pairs {
        out.push("pairs.csv", formats::pairs_csv(p));
    }
    if let Some(m) = &a.surrogate {
        out.push("surrogate.json", formats::surrogate_json(m));
    }
    if cfg.wants("json") {
        out.push("morse.json", morse.to_json());
    }
    if cfg.wants("dot") {
        out.push("morse.dot", morse.to_dot()?);
    }
    if cfg.wants("csv") {
        out.push("basins.csv", morse.basins_csv());
    }
    out.push("report.json", json(&a.report));
    out.push("config.resolved.json", cfg.resolved_json());
    Ok(out)
}
