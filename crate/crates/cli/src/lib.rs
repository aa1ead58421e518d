//! Command-line front end for `causal-ph`: simulate cohorts, fit Cox models,
//! evaluate the backdoor and frontdoor estimators, run the do-intervention
//! oracle, and execute whole experiments that compare the two.
//!
//! Data goes to files only; progress and errors go to stderr. Exit codes are
//! 0 on success, 2 for invalid input and 3 for numerical failures.

pub mod experiment;

use std::fs;
use std::path::{Path, PathBuf};

use causal_ph::backdoor::{BackdoorModel, BackdoorSummary, Incidence};
use causal_ph::coxph::{fit_cox_with, CoxFit, CoxOptions};
use causal_ph::frontdoor::{
    estimate_frontdoor_params, frontdoor_causal_rr, frontdoor_do_cdf_empirical,
    frontdoor_do_cdf_gaussian, mediation_indirect_rr, Binning, FrontdoorParams,
};
use causal_ph::oracle::{oracle_rr, oracle_rr_shared, OracleRatio, DEFAULT_ORACLE_N};
use causal_ph::scm::{generate, load_dataset, save_dataset, Dataset, ScenarioConfig};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use experiment::{cmd_experiment, Contrast, Emit, EstimateRow, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<causal_ph::Error> for CliError {
    fn from(e: causal_ph::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "causal-ph",
    version,
    about = "Causal estimators for rare-disease proportional-hazards studies"
)]
pub struct Cli {
    /// Override the seed of any scenario or oracle run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a cohort from a scenario config and save it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `<out-dir>/dataset.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a Cox model and save it as JSON.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated covariate names; all observed covariates by default.
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        /// Defaults to `<out-dir>/fit.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backdoor-adjusted estimates from a dataset and a saved fit.
    Backdoor {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        /// Exposure value(s), comma-separated for vector exposures.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        /// Reference exposure; zeros by default.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        t: f64,
        /// Defaults to `<out-dir>/backdoor.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frontdoor estimates from a dataset with scalar exposure and mediator.
    Frontdoor {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = Binning::default().x_bins)]
        x_bins: usize,
        #[arg(long, default_value_t = Binning::default().z_bins)]
        z_bins: usize,
        /// Defaults to `<out-dir>/frontdoor.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulated do-ratio P(T ≤ t | do(x)) / P(T ≤ t | do(x0)).
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long, default_value_t = DEFAULT_ORACLE_N)]
        n: usize,
        #[arg(long)]
        t: f64,
        /// Draw both arms from one stream, so x = x0 gives exactly 1.
        #[arg(long)]
        shared_seed: bool,
        /// Defaults to `<out-dir>/oracle.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run simulate → fit → estimate → oracle from an experiment config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Global flags shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Globals {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub quiet: bool,
}

impl Globals {
    fn output(&self, explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.unwrap_or_else(|| {
            self.out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("."))
                .join(default_name)
        })
    }

    pub(crate) fn progress(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", message.as_ref());
        }
    }
}

/// Executes one parsed command line; returns the files written.
pub fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let globals = Globals {
        seed: cli.seed,
        out_dir: cli.out_dir,
        quiet: cli.quiet,
    };
    let written = match cli.command {
        Command::Simulate { config, out } => {
            vec![cmd_simulate(
                &globals,
                &config,
                globals.output(out, "dataset.csv"),
            )?]
        }
        Command::Fit {
            data,
            covariates,
            out,
        } => vec![cmd_fit(
            &data,
            &covariates,
            globals.output(out, "fit.json"),
        )?],
        Command::Backdoor {
            data,
            fit,
            x,
            x0,
            t,
            out,
        } => {
            let x0 = x0.unwrap_or_else(|| vec![0.0; x.len()]);
            let report = cmd_backdoor(&data, &fit, &x, &x0, t)?;
            vec![write_json(&globals.output(out, "backdoor.json"), &report)?]
        }
        Command::Frontdoor {
            data,
            x,
            x0,
            t,
            x_bins,
            z_bins,
            out,
        } => {
            let report = cmd_frontdoor(&data, x, x0, t, Binning { x_bins, z_bins })?;
            vec![write_json(&globals.output(out, "frontdoor.json"), &report)?]
        }
        Command::Oracle {
            config,
            x,
            x0,
            n,
            t,
            shared_seed,
            out,
        } => {
            let report = cmd_oracle(&globals, &config, x, x0, n, t, shared_seed)?;
            vec![write_json(&globals.output(out, "oracle.json"), &report)?]
        }
        Command::Experiment { config } => cmd_experiment(&globals, &config)?,
    };
    for path in &written {
        globals.progress(format!("wrote {}", path.display()));
    }
    Ok(written)
}

/// Parses JSON, naming the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Validation(format!("{origin}: {inner}"))
        } else {
            CliError::Validation(format!("{origin}: field `{path}`: {inner}"))
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Validation(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<PathBuf> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_error(path, e))?;
    Ok(path.to_path_buf())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Validation(format!("cannot write {}: {e}", path.display()))
}

/// Loads and validates a scenario config, applying the `--seed` override.
pub fn load_scenario(globals: &Globals, path: &Path) -> CliResult<ScenarioConfig> {
    let mut config: ScenarioConfig = read_json(path)?;
    if let Some(seed) = globals.seed {
        config.seed = seed;
    }
    config
        .validate()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    load_dataset(path).map_err(|e| match e {
        causal_ph::Error::Io(io) => {
            CliError::Validation(format!("cannot read {}: {io}", path.display()))
        }
        other => CliError::Validation(format!("{}: {other}", path.display())),
    })
}

pub fn cmd_simulate(globals: &Globals, config_path: &Path, out: PathBuf) -> CliResult<PathBuf> {
    let config = load_scenario(globals, config_path)?;
    let dataset = generate(&config)?;
    save_dataset(&dataset, &out).map_err(|e| match e {
        causal_ph::Error::Io(io) => io_error(&out, io),
        other => other.into(),
    })?;
    Ok(out)
}

pub fn cmd_fit(data: &Path, covariates: &[String], out: PathBuf) -> CliResult<PathBuf> {
    let dataset = load_data(data)?;
    let names = if covariates.is_empty() {
        dataset.covariate_names().to_vec()
    } else {
        covariates.to_vec()
    };
    let fit = fit_cox_with(&dataset, &names, CoxOptions::default())?;
    write_json(&out, &fit)
}

#[derive(Clone, Debug, Serialize)]
pub struct BackdoorReport {
    pub exposures: Vec<String>,
    pub confounders: Vec<String>,
    pub x: Vec<f64>,
    pub x0: Vec<f64>,
    pub t: f64,
    pub causal_rr: f64,
    pub causal_rr_se: f64,
    pub do_cdf_x: Incidence,
    pub do_cdf_x0: Incidence,
    pub do_cumhaz_x: f64,
    pub paf: f64,
    pub summary: BackdoorSummary,
}

/// The confounders are the dataset's `z` columns present in the fit.
pub fn cmd_backdoor(
    data: &Path,
    fit_path: &Path,
    x: &[f64],
    x0: &[f64],
    t: f64,
) -> CliResult<BackdoorReport> {
    let dataset = load_data(data)?;
    let fit: CoxFit = read_json(fit_path)?;
    let confounders: Vec<String> = dataset.covariate_names()[dataset.x_dim()..]
        .iter()
        .filter(|name| fit.covariate_names.contains(name))
        .cloned()
        .collect();
    let model = BackdoorModel::new(&fit, &confounders)?;
    let summary = model.compute_az(&dataset, t)?;
    Ok(BackdoorReport {
        exposures: model.exposure_names(),
        confounders,
        x: x.to_vec(),
        x0: x0.to_vec(),
        t,
        causal_rr: model.causal_rr(x, x0)?,
        causal_rr_se: model.causal_rr_se(x, x0)?,
        do_cdf_x: model.do_cdf(&summary, x, t)?,
        do_cdf_x0: model.do_cdf(&summary, x0, t)?,
        do_cumhaz_x: model.do_cumhaz(&summary, x, t)?,
        paf: model.paf_at(&summary, x0)?,
        summary,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontdoorReport {
    pub x: f64,
    pub x0: f64,
    pub t: f64,
    pub params: FrontdoorParams,
    pub alpha_se: f64,
    pub causal_rr: f64,
    pub causal_rr_se: f64,
    pub mediation_rr: f64,
    pub h0_t: f64,
    pub do_cdf_gaussian: Incidence,
    pub do_cdf_empirical: Incidence,
    pub cox_converged: bool,
}

pub fn cmd_frontdoor(
    data: &Path,
    x: f64,
    x0: f64,
    t: f64,
    binning: Binning,
) -> CliResult<FrontdoorReport> {
    let dataset = load_data(data)?;
    let fit = estimate_frontdoor_params(&dataset, CoxOptions::default())?;
    let h0_t = fit.cox.baseline_cumhaz.eval(t);
    Ok(FrontdoorReport {
        x,
        x0,
        t,
        params: fit.params,
        alpha_se: fit.mediator_regression.alpha_se,
        causal_rr: frontdoor_causal_rr(&fit.params, x, x0)?,
        causal_rr_se: fit.causal_rr_se(x, x0)?,
        mediation_rr: mediation_indirect_rr(&fit.params, x, x0)?,
        h0_t,
        do_cdf_gaussian: frontdoor_do_cdf_gaussian(&fit.params, h0_t, x)?,
        do_cdf_empirical: frontdoor_do_cdf_empirical(&dataset, &fit.cox, x, t, binning)?,
        cox_converged: fit.cox.converged,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub x: f64,
    pub x0: f64,
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub shared_seed: bool,
    pub ratio: OracleRatio,
}

pub fn cmd_oracle(
    globals: &Globals,
    config_path: &Path,
    x: f64,
    x0: f64,
    n: usize,
    t: f64,
    shared_seed: bool,
) -> CliResult<OracleReport> {
    let config = load_scenario(globals, config_path)?;
    let ratio = if shared_seed {
        oracle_rr_shared(&config, x, x0, n, config.seed, t)?
    } else {
        oracle_rr(&config, x, x0, n, config.seed, t)?
    };
    Ok(OracleReport {
        x,
        x0,
        t,
        n,
        seed: config.seed,
        shared_seed,
        ratio,
    })
}
