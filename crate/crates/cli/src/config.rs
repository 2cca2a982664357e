//! The pipeline configuration document.
//!
//! Every section and field is optional; missing values take the defaults
//! below. `validate` checks all fields up front and reports each problem
//! with its dotted path.

use std::path::{Path, PathBuf};

use morsedyn_core::grid::{Rect, DEFAULT_LEAF_CAP, MAX_DEPTH, MAX_DIM};
use morsedyn_core::harness::{Activation, EnsembleConfig, NetConfig};
use morsedyn_core::morse::RefineRule;
use morsedyn_core::surrogate::{KernelConfig, VarianceConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub ensemble: EnsembleSection,
    pub selection: SelectionConfig,
    pub surrogate: SurrogateConfig,
    pub grid: GridConfig,
    pub validation: ValidationConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// CSV file; relative paths are resolved against the config file's directory.
    pub path: Option<PathBuf>,
    pub label_column: String,
    pub split_seed: u64,
    pub train_fraction: f64,
    /// Scale features to zero mean and unit variance (training statistics).
    pub standardize: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            label_column: "label".into(),
            split_seed: 0,
            train_fraction: 0.8,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Hidden layer widths. Input and output widths come from the dataset.
    pub hidden: Vec<usize>,
    pub activation: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![1],
            activation: "tanh".into(),
            epochs: 150,
            batch_size: 16,
            learning_rate: 0.1,
        }
    }
}

/// A bound given once for every coordinate or per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    PerCoordinate(Vec<f64>),
}

impl Bound {
    fn expand(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            Bound::Scalar(v) => Some(vec![*v; n]),
            Bound::PerCoordinate(v) if v.len() == n => Some(v.clone()),
            Bound::PerCoordinate(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitBox {
    pub lower: Bound,
    pub upper: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub cycles: usize,
    pub base_seed: u64,
    pub init_box: InitBox,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            cycles: 100,
            base_seed: 0,
            init_box: InitBox {
                lower: Bound::Scalar(-1.0),
                upper: Bound::Scalar(1.0),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Number of coordinates chosen by displacement variance.
    pub k: usize,
    /// Explicit coordinates; overrides `k` when present.
    pub indices: Option<Vec<usize>>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { k: 2, indices: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub jitter: f64,
    pub max_escalations: u32,
    pub length_scales: Option<Vec<f64>>,
    pub z: f64,
    /// `None` means `min(2^d + 3^d, 64)`.
    pub samples_per_cell: Option<usize>,
    pub epsilon: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            jitter: 1e-6,
            max_escalations: 6,
            length_scales: None,
            z: 2.0,
            samples_per_cell: None,
            epsilon: 1e-9,
        }
    }
}

/// `"auto"` or an explicit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Named(String),
    Explicit { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub domain: DomainSpec,
    pub initial_depth: u8,
    pub max_depth: u8,
    pub leaf_cap: usize,
    pub refine: String,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            domain: DomainSpec::Named("auto".into()),
            initial_depth: 3,
            max_depth: 6,
            leaf_cap: DEFAULT_LEAF_CAP,
            refine: RefineRule::MorseCells.name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Samples per cell for the outer-approximation check of analytic systems.
    pub samples_per_cell: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { samples_per_cell: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Subset of `json`, `csv`, `dot` for the Morse artifacts.
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec!["json".into(), "csv".into(), "dot".into()],
        }
    }
}

pub const FORMATS: [&str; 3] = ["json", "csv", "dot"];

/// A parsed config plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(LoadedConfig { config, base_dir })
    }

    pub fn defaults() -> Self {
        LoadedConfig {
            config: PipelineConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn dataset_path(&self) -> Option<PathBuf> {
        self.config.dataset.path.as_ref().map(|p| {
            if p.is_absolute() {
                p.clone()
            } else {
                self.base_dir.join(p)
            }
        })
    }
}

impl PipelineConfig {
    /// Pretty JSON with every default spelled out.
    pub fn resolved_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Checks every field that does not depend on the dataset. Training
    /// stages additionally call [`PipelineConfig::validate_training`].
    pub fn validate(&self) -> CliResult<()> {
        let mut errs = Vec::new();
        let d = &self.dataset;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            errs.push("dataset.train_fraction: must lie strictly between 0 and 1".to_string());
        }
        if d.label_column.is_empty() {
            errs.push("dataset.label_column: must not be empty".into());
        }
        let n = &self.network;
        if n.hidden.contains(&0) {
            errs.push("network.hidden: widths must be positive".into());
        }
        if Activation::from_name(&n.activation).is_none() {
            errs.push(format!(
                "network.activation: unknown activation {:?} (expected tanh, relu, sigmoid or identity)",
                n.activation
            ));
        }
        if n.batch_size == 0 {
            errs.push("network.batch_size: must be positive".into());
        }
        if !(n.learning_rate.is_finite() && n.learning_rate > 0.0) {
            errs.push("network.learning_rate: must be positive and finite".into());
        }
        let e = &self.ensemble;
        if e.cycles == 0 {
            errs.push("ensemble.cycles: must be positive".into());
        }
        for (name, b) in [("lower", &e.init_box.lower), ("upper", &e.init_box.upper)] {
            let vals: Vec<f64> = match b {
                Bound::Scalar(v) => vec![*v],
                Bound::PerCoordinate(v) => v.clone(),
            };
            if vals.iter().any(|v| !v.is_finite()) {
                errs.push(format!("ensemble.init_box.{name}: must be finite"));
            }
        }
        if let (Bound::Scalar(lo), Bound::Scalar(hi)) = (&e.init_box.lower, &e.init_box.upper) {
            if lo >= hi {
                errs.push("ensemble.init_box: lower must be below upper".into());
            }
        }
        let s = &self.selection;
        match &s.indices {
            Some(ix) if ix.is_empty() => errs.push("selection.indices: must not be empty".into()),
            Some(ix) if ix.len() > MAX_DIM => {
                errs.push(format!("selection.indices: at most {MAX_DIM} coordinates"))
            }
            Some(ix) => {
                let mut sorted = ix.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != ix.len() {
                    errs.push("selection.indices: duplicate coordinate".into());
                }
            }
            None if s.k == 0 || s.k > MAX_DIM => {
                errs.push(format!("selection.k: must lie in 1..={MAX_DIM}"))
            }
            None => {}
        }
        let g = &self.surrogate;
        if !(g.jitter.is_finite() && g.jitter > 0.0) {
            errs.push("surrogate.jitter: must be positive and finite".into());
        }
        if let Some(ls) = &g.length_scales {
            if ls.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                errs.push("surrogate.length_scales: must be positive and finite".into());
            }
        }
        if !(g.z.is_finite() && g.z >= 0.0) {
            errs.push("surrogate.z: must be finite and non-negative".into());
        }
        if g.samples_per_cell == Some(0) {
            errs.push("surrogate.samples_per_cell: must be at least 1".into());
        }
        if !(g.epsilon.is_finite() && g.epsilon >= 0.0) {
            errs.push("surrogate.epsilon: must be finite and non-negative".into());
        }
        let gr = &self.grid;
        match &gr.domain {
            DomainSpec::Named(n) if n != "auto" => {
                errs.push(format!("grid.domain: expected \"auto\" or {{lower, upper}}, got {n:?}"))
            }
            DomainSpec::Explicit { lower, upper } => {
                if let Err(e) = Rect::proper(lower.clone(), upper.clone()) {
                    errs.push(format!("grid.domain: {e}"));
                } else if lower.len() > MAX_DIM {
                    errs.push(format!("grid.domain: at most {MAX_DIM} dimensions"));
                }
            }
            _ => {}
        }
        if gr.max_depth < gr.initial_depth {
            errs.push("grid.max_depth: must be at least grid.initial_depth".into());
        }
        if gr.max_depth > MAX_DEPTH {
            errs.push(format!("grid.max_depth: must be at most {MAX_DEPTH}"));
        }
        if gr.leaf_cap == 0 {
            errs.push("grid.leaf_cap: must be positive".into());
        }
        if RefineRule::from_name(&gr.refine).is_none() {
            errs.push(format!(
                "grid.refine: unknown rule {:?} (expected morse-cells or all-cells)",
                gr.refine
            ));
        }
        if self.validation.samples_per_cell == 0 {
            errs.push("validation.samples_per_cell: must be positive".into());
        }
        for f in &self.output.formats {
            if !FORMATS.contains(&f.as_str()) {
                errs.push(format!("output.formats: unknown format {f:?}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errs.join("\n")))
        }
    }

    /// Checks that a dataset path is configured.
    pub fn validate_training(&self) -> CliResult<()> {
        if self.dataset.path.is_none() {
            return Err(CliError::Validation("dataset.path: required for training".into()));
        }
        Ok(())
    }

    pub fn net_config(&self, inputs: usize, classes: usize) -> NetConfig {
        let mut layers = vec![inputs];
        layers.extend_from_slice(&self.network.hidden);
        layers.push(classes);
        NetConfig {
            layers,
            activation: Activation::from_name(&self.network.activation).unwrap_or_default(),
            epochs: self.network.epochs,
            batch_size: self.network.batch_size,
            learning_rate: self.network.learning_rate,
        }
    }

    pub fn ensemble_config(&self, net: &NetConfig) -> CliResult<EnsembleConfig> {
        let n = net.weight_count();
        let b = &self.ensemble.init_box;
        let (lower, upper) = match (b.lower.expand(n), b.upper.expand(n)) {
            (Some(l), Some(u)) => (l, u),
            _ => {
                return Err(CliError::Validation(format!(
                    "ensemble.init_box: per-coordinate bounds must have {n} entries"
                )))
            }
        };
        let init_box = Rect::proper(lower, upper)
            .map_err(|e| CliError::Validation(format!("ensemble.init_box: {e}")))?;
        Ok(EnsembleConfig {
            cycles: self.ensemble.cycles,
            base_seed: self.ensemble.base_seed,
            init_box,
        })
    }

    pub fn kernel_config(&self) -> KernelConfig {
        KernelConfig {
            jitter: self.surrogate.jitter,
            max_escalations: self.surrogate.max_escalations,
            length_scales: self.surrogate.length_scales.clone(),
        }
    }

    pub fn variance_config(&self, dim: usize) -> VarianceConfig {
        let mut v = VarianceConfig::for_dim(dim);
        v.z = self.surrogate.z;
        v.epsilon = self.surrogate.epsilon;
        if let Some(s) = self.surrogate.samples_per_cell {
            v.samples_per_cell = s;
        }
        v
    }

    pub fn refine_rule(&self) -> RefineRule {
        RefineRule::from_name(&self.grid.refine).unwrap_or_default()
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}
