//! `rprofile` command-line front end.
//!
//! Exit codes: 0 success, 2 input or output error, 3 invalid configuration,
//! 4 internal invariant violation. Outputs are written once, after all work
//! is done, through a temporary file and a rename.

pub mod input;
pub mod report;
pub mod settings;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rprofile_core::bootstrap::bootstrap_profiles;
use rprofile_core::pipeline::{estimate_profile, normalize, Polarity};
use rprofile_core::simulation::{builtin_conditions, data_seed, find_condition, run_recovery, RecoveryConfig, RecoveryGrid};

use report::{BootstrapOutput, BootstrapReport, FitOutput, ProfileReport, RecoveryRow, Skipped};
pub use settings::Settings;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rprofile", version, about = "Response-profile estimation for repeated VAS data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one response profile per user.
    Fit(Settings),
    /// Bootstrap each user's profile over stratified resamples.
    Bootstrap(Settings),
    /// Write samples from the built-in simulated conditions as input CSV.
    Simulate(Settings),
    /// Run the parameter-recovery experiment over the hyperparameter grid.
    Recover(Settings),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(s) => cmd_fit(&s.resolve()?),
        Command::Bootstrap(s) => cmd_bootstrap(&s.resolve()?),
        Command::Simulate(s) => cmd_simulate(&s.resolve()?),
        Command::Recover(s) => cmd_recover(&s.resolve()?),
    }
}

pub fn cmd_fit(s: &Settings) -> Result<(), CliError> {
    let hp = s.hyper_params()?;
    let users = input::read_records(s.require_input()?)?;
    let mut out = FitOutput { settings: hp, users: Vec::new(), skipped: Vec::new() };
    for (user_id, records) in users {
        let n = records.len();
        let skip = |reason: String| Skipped { user_id: user_id.clone(), n, reason };
        if n < hp.min_main_n {
            out.skipped.push(skip(format!("{n} records, at least {} needed", hp.min_main_n)));
            continue;
        }
        let data = normalize(records).map_err(|e| CliError::Input(format!("user {user_id}: {e}")))?;
        match estimate_profile(&data, &hp) {
            Ok(profile) => {
                let report = ProfileReport::new(&user_id, &profile);
                report.validate()?;
                out.users.push(report);
            }
            Err(e) => out.skipped.push(skip(e.to_string())),
        }
    }
    report::write_output(s.output.as_deref(), &report::to_json(&out)?)
}

pub fn cmd_bootstrap(s: &Settings) -> Result<(), CliError> {
    let hp = s.hyper_params()?;
    let plan = s.plan()?;
    let seed = s.seed();
    let users = input::read_records(s.require_input()?)?;
    let mut out = BootstrapOutput {
        settings: hp,
        level1_n: plan.level1_n,
        level2_n: plan.level2_n,
        seed,
        users: Vec::new(),
        skipped: Vec::new(),
    };
    for (user_id, records) in users {
        let n = records.len();
        let data = normalize(records).map_err(|e| CliError::Input(format!("user {user_id}: {e}")))?;
        let run = bootstrap_profiles(&data, &hp, &plan, seed).map_err(|e| CliError::Config(e.to_string()))?;
        match run.summary() {
            Ok(summary) => {
                let report = BootstrapReport::new(&user_id, n, summary);
                report.validate()?;
                out.users.push(report);
            }
            Err(e) => out.skipped.push(Skipped { user_id, n, reason: format!("all replicates failed: {e}") }),
        }
    }
    report::write_output(s.output.as_deref(), &report::to_json(&out)?)
}

#[derive(serde::Serialize)]
struct SimRow<'a> {
    user_id: &'a str,
    item_id: &'a str,
    polarity: Polarity,
    value: f64,
    scale_min: f64,
    scale_max: f64,
}

/// Samples of the chosen condition (or all of them), one user per condition,
/// on a 0-1 scale. The draw matches the first recovery repeat for that seed.
pub fn cmd_simulate(s: &Settings) -> Result<(), CliError> {
    let n = s.sim_n()?;
    let conditions = match s.condition {
        Some(id) => vec![find_condition(id).map_err(|e| CliError::Config(e.to_string()))?],
        None => builtin_conditions(),
    };
    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for c in &conditions {
        let values = c
            .sample(n, data_seed(s.seed(), c.id, 0))
            .map_err(|e| CliError::Invariant(format!("condition #{}: {e}", c.id)))?;
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(CliError::Invariant(format!("condition #{}: sample {v} outside (0, 1)", c.id)));
        }
        ids.push(format!("sim-{}", c.id));
        rows.push(values);
    }
    let flat: Vec<SimRow> = ids
        .iter()
        .zip(&rows)
        .flat_map(|(id, values)| {
            values.iter().map(move |&value| SimRow {
                user_id: id,
                item_id: "sim",
                polarity: Polarity::Bipolar,
                value,
                scale_min: 0.0,
                scale_max: 1.0,
            })
        })
        .collect();
    report::write_output(s.output.as_deref(), &report::to_csv(&flat)?)
}

/// Sibling path holding the per-condition JSON of a recovery run.
pub fn recovery_json_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Agreement table as CSV (one row per grid cell). With `--output`, the
/// per-condition outcomes go to the same path with a `.json` extension.
pub fn cmd_recover(s: &Settings) -> Result<(), CliError> {
    let base = s.hyper_params()?;
    let defaults = RecoveryGrid::default();
    let grid = RecoveryGrid {
        families: s.family.map_or(defaults.families, |f| vec![f]),
        th: s.th.map_or(defaults.th, |t| vec![t]),
        accept_bidist: s.accept_bidist.map_or(defaults.accept_bidist, |a| vec![a]),
    };
    let conditions = match s.condition {
        Some(id) => vec![find_condition(id).map_err(|e| CliError::Config(e.to_string()))?],
        None => builtin_conditions(),
    };
    let config = RecoveryConfig { n_per_condition: s.sim_n()?, repeats: s.repeats()?, seed: s.seed() };
    let reports = run_recovery(&conditions, &grid, &base, &config).map_err(|e| CliError::Config(e.to_string()))?;

    let rows: Vec<RecoveryRow> = reports.iter().map(RecoveryRow::new).collect();
    for row in &rows {
        row.validate()?;
    }
    let csv = report::to_csv(&rows)?;
    if let Some(path) = s.output.as_deref() {
        let json = report::to_json(&reports)?;
        report::write_output(Some(&recovery_json_path(path)), &json)?;
    }
    report::write_output(s.output.as_deref(), &csv)
}
