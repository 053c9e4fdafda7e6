//! Run configuration.
//!
//! A `RunConfig` is read from TOML, overridden by command-line flags, and
//! written back next to every stage's outputs. Caps and limits use `0` for
//! "unlimited" so a dumped config always reloads to the same value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{ModelKind, TrainConfig};
use crate::client::{ClientConfig, StubPolicy};
use crate::error::{Error, Result};
use crate::ingest::LoadOptions;
use crate::io::sha256_hex;
use crate::promptgen::{Icl, Style, Task};
use crate::sampler::{PathOptions, SamplerConfig, SplitSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub merge_splits: bool,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection { merge_splits: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub per_root_cap: usize,
    pub cell_cap: usize,
    pub chunk_size: usize,
    pub train_node_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let paths = PathOptions::default();
        let sampler = SamplerConfig::default();
        let split = SplitSpec::default();
        SamplerSection {
            min_nodes: paths.min_nodes,
            max_nodes: paths.max_nodes,
            per_root_cap: paths.per_root_cap.unwrap_or(0),
            cell_cap: sampler.cell_cap.unwrap_or(0),
            chunk_size: sampler.chunk_size,
            train_node_fraction: split.train_node_fraction,
            validation_fraction: split.validation_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub task: Task,
    pub style: Style,
    pub icl: Icl,
    pub token_limit: usize,
    /// Relation options listed in relation-task instructions.
    pub max_options: usize,
}

impl Default for PromptSection {
    fn default() -> Self {
        PromptSection {
            task: Task::Link,
            style: Style::Kgllm,
            icl: Icl::None,
            token_limit: 512,
            max_options: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub kind: ModelKind,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub negatives: usize,
    pub batch_size: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        BaselineSection {
            kind: ModelKind::TransE,
            dim: t.dim,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            margin: t.margin,
            negatives: t.negatives,
            batch_size: t.batch_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Answer with a local stub instead of calling the endpoint.
    pub stub: Option<StubPolicy>,
    /// Highest tolerated share of unparseable responses.
    pub max_parse_failure_rate: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            stub: None,
            max_parse_failure_rate: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub ingest: IngestSection,
    pub sampler: SamplerSection,
    pub prompts: PromptSection,
    pub baseline: BaselineSection,
    pub eval: EvalSection,
    pub client: ClientConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            dataset_dir: None,
            out_dir: PathBuf::from("runs/default"),
            ingest: IngestSection::default(),
            sampler: SamplerSection::default(),
            prompts: PromptSection::default(),
            baseline: BaselineSection::default(),
            eval: EvalSection::default(),
            client: ClientConfig::default(),
        }
    }
}

fn none_if_zero(v: usize) -> Option<usize> {
    (v > 0).then_some(v)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, ignoring where data is read from
    /// and written to.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.dataset_dir = None;
        c.out_dir = PathBuf::new();
        // serde_json::Value keeps object keys sorted
        let canonical = serde_json::to_value(&c).expect("config serializes").to_string();
        sha256_hex(canonical.as_bytes())
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            merge_splits: self.ingest.merge_splits,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: self.seed,
            train_node_fraction: self.sampler.train_node_fraction,
            validation_fraction: self.sampler.validation_fraction,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            paths: PathOptions {
                min_nodes: s.min_nodes,
                max_nodes: s.max_nodes,
                per_root_cap: none_if_zero(s.per_root_cap),
            },
            cell_cap: none_if_zero(s.cell_cap),
            chunk_size: s.chunk_size,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let b = &self.baseline;
        TrainConfig {
            dim: b.dim,
            epochs: b.epochs,
            learning_rate: b.learning_rate,
            margin: b.margin,
            negatives: b.negatives,
            batch_size: b.batch_size,
            seed: self.seed,
        }
    }

    pub fn max_hops(&self) -> usize {
        self.sampler.max_nodes.saturating_sub(1)
    }

    /// Directory name for the configured prompt family.
    pub fn prompt_set(&self) -> String {
        format!("{}-{}-{}", self.prompts.task, self.prompts.style, self.prompts.icl)
    }

    pub fn validate(&self) -> Result<()> {
        self.split_spec().validate()?;
        self.sampler_config().paths.validate()?;
        if self.sampler.chunk_size == 0 {
            return Err(Error::Config("sampler.chunk_size must be positive".into()));
        }
        self.train_config().validate()?;
        if !(0.0..=1.0).contains(&self.eval.max_parse_failure_rate) {
            return Err(Error::Config("eval.max_parse_failure_rate must lie in [0, 1]".into()));
        }
        self.client.validate().map_err(|e| Error::Config(e.to_string()))
    }
}
