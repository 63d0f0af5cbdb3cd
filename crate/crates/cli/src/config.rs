//! Experiment configuration: one JSON document per run directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nnolab_core::diff::Activation;
use nnolab_core::field::Grid2D;
use nnolab_core::neuralop::{Basis, NnoConfig};
use nnolab_core::pde::{Task, TaskParams};
use nnolab_core::random_field::GrfSpec;
use nnolab_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Points per side; must be a power of two.
    pub grid: usize,
    /// Input prior override; the task default when absent.
    pub grf: Option<GrfSpec>,
    pub solver: TaskParams,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub sweep: SweepSection,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::DarcyPc,
            grid: 64,
            grf: None,
            solver: TaskParams::default(),
            data: DataSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            sweep: SweepSection::default(),
            seeds: vec![0],
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub n_train: usize,
    pub n_test: usize,
    /// Seed of the dataset and of the train/test split.
    pub seed: u64,
    /// Pointwise normalization; the task default when absent.
    pub normalize: Option<bool>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_test: 50,
            seed: 1,
            normalize: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub basis: Basis,
    pub d_c: usize,
    pub layers: usize,
    pub activation: Activation,
    pub lifting_width: usize,
    pub projection_width: usize,
    pub positional_encoding: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            basis: Basis::Fourier { modes: 2 },
            d_c: 16,
            layers: 4,
            activation: Activation::Gelu,
            lifting_width: 64,
            projection_width: 64,
            positional_encoding: true,
        }
    }
}

impl ModelSection {
    pub fn network(&self, in_channels: usize, out_channels: usize) -> NnoConfig {
        NnoConfig {
            basis: self.basis,
            layers: self.layers,
            activation: self.activation,
            lifting_width: self.lifting_width,
            projection_width: self.projection_width,
            positional_encoding: self.positional_encoding,
            ..NnoConfig::fno(
                in_channels,
                out_channels,
                self.d_c,
                self.basis.modes().unwrap_or(0),
            )
        }
    }

    /// The same architecture at channel width `d_c` and Fourier cutoff `k`.
    pub fn at_budget(
        &self,
        in_channels: usize,
        out_channels: usize,
        d_c: usize,
        k: usize,
    ) -> NnoConfig {
        NnoConfig {
            d_c,
            basis: Basis::Fourier { modes: k },
            ..self.network(in_channels, out_channels)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Budgets `C = d_c K`.
    #[serde(rename = "C_list")]
    pub c_list: Vec<usize>,
    /// Cutoffs to keep; every admissible `K` when empty.
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            c_list: vec![32],
            k_list: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.task == Task::Synthetic {
            bail!("the synthetic task has no data generator");
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            bail!("n_train and n_test must be positive");
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if self.sweep.c_list.iter().any(|&c| c < 4) {
            bail!("every budget C must be at least 4");
        }
        self.train.validate()?;
        self.model.network(1, 1).validate()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Ok(self.task.grid(self.grid)?)
    }

    pub fn params(&self) -> TaskParams {
        TaskParams {
            grf: self.grf.or(self.solver.grf),
            ..self.solver
        }
    }

    pub fn normalize(&self) -> bool {
        self.data.normalize.unwrap_or(self.task.normalizes())
    }

    /// Every default made explicit.
    pub fn resolved(&self) -> Self {
        let mut r = self.clone();
        r.solver = self.params();
        r.grf = None;
        r.data.normalize = Some(self.normalize());
        r
    }

    pub fn write_resolved(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))?;
        let path = self.output_dir.join(RESOLVED_CONFIG);
        std::fs::write(&path, serde_json::to_string_pretty(&self.resolved())?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
