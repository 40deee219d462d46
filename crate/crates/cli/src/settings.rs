//! Run settings: command-line flags layered over an optional JSON config file.

use std::path::{Path, PathBuf};

use clap::Args;
use rprofile_core::bootstrap::SamplingPlan;
use rprofile_core::distributions::Family;
use rprofile_core::pipeline::HyperParams;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SIM_N: usize = 1000;

/// Every key may come from the config file or from a flag; flags win.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Input CSV (user_id,item_id,polarity,value[,scale_min,scale_max]).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON file with any of these settings as keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Split threshold; the main range is [th, 1 - th].
    #[arg(long)]
    pub th: Option<f64>,
    /// Minimum peak separation for a bimodal main profile.
    #[arg(long, visible_alias = "accept")]
    pub accept_bidist: Option<f64>,
    /// Main-profile family: gaussian or beta.
    #[arg(long)]
    pub family: Option<Family>,
    /// Tail-weight grid step.
    #[arg(long)]
    pub w_step: Option<f64>,
    #[arg(long)]
    pub min_sub_n: Option<usize>,
    #[arg(long)]
    pub min_main_n: Option<usize>,
    #[arg(long)]
    pub min_bimodal_n: Option<usize>,
    /// Histogram bin width for fit metrics.
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Records drawn per item in the first resampling step.
    #[arg(long)]
    pub level1_n: Option<usize>,
    /// Records drawn per polarity in the second resampling step.
    #[arg(long)]
    pub level2_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated condition id (all conditions when omitted).
    #[arg(long)]
    pub condition: Option<u32>,
    /// Samples per simulated condition.
    #[arg(long)]
    pub n: Option<usize>,
    /// Independent draws per condition in recovery.
    #[arg(long)]
    pub repeats: Option<usize>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($f:ident),*) => {
        Settings { config: $top.config.clone(), $($f: $top.$f.clone().or($base.$f.clone())),* }
    };
}

impl Settings {
    /// Flags layered over the config file named by `--config`, if any.
    pub fn resolve(self) -> Result<Self, CliError> {
        let Some(path) = self.config.as_deref() else {
            return Ok(self);
        };
        let file = Self::read_file(path)?;
        Ok(overlay!(
            self, file, input, output, th, accept_bidist, family, w_step, min_sub_n, min_main_n, min_bimodal_n,
            bin_width, replicates, level1_n, level2_n, seed, condition, n, repeats
        ))
    }

    fn read_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn hyper_params(&self) -> Result<HyperParams, CliError> {
        let d = HyperParams::default();
        let hp = HyperParams {
            th: self.th.unwrap_or(d.th),
            accept_bidist: self.accept_bidist.unwrap_or(d.accept_bidist),
            family: self.family.unwrap_or(d.family),
            w_step: self.w_step.unwrap_or(d.w_step),
            min_sub_n: self.min_sub_n.unwrap_or(d.min_sub_n),
            min_main_n: self.min_main_n.unwrap_or(d.min_main_n),
            min_bimodal_n: self.min_bimodal_n.unwrap_or(d.min_bimodal_n),
            bin_width: self.bin_width.unwrap_or(d.bin_width),
        };
        hp.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(hp)
    }

    pub fn plan(&self) -> Result<SamplingPlan, CliError> {
        let d = SamplingPlan::default();
        let plan = SamplingPlan {
            level1_n: self.level1_n.unwrap_or(d.level1_n),
            level2_n: self.level2_n.unwrap_or(d.level2_n),
            replicates: self.replicates.unwrap_or(d.replicates),
        };
        plan.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(plan)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn sim_n(&self) -> Result<usize, CliError> {
        match self.n.unwrap_or(DEFAULT_SIM_N) {
            0 => Err(CliError::Config("n must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn repeats(&self) -> Result<usize, CliError> {
        match self.repeats.unwrap_or(1) {
            0 => Err(CliError::Config("repeats must be at least 1".into())),
            r => Ok(r),
        }
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| CliError::Config("--input is required".into()))
    }
}
