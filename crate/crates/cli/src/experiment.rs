//! The `experiment` pipeline: simulate a cohort, fit, evaluate every
//! estimator on a grid of contrasts and horizons, and put the oracle value
//! next to each estimate.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use causal_ph::backdoor::{unadjusted_rr, BackdoorModel, BackdoorSummary};
use causal_ph::coxph::{fit_cox, CoxFit, CoxOptions};
use causal_ph::frontdoor::{
    estimate_frontdoor_params, frontdoor_causal_rr, frontdoor_do_cdf_empirical,
    frontdoor_do_cdf_gaussian, mediation_indirect_rr, Binning, FrontdoorParams,
};
use causal_ph::oracle::{
    approx_error_report, interventional_nelson_aalen, oracle_paf, ratio_of, simulate_arm,
    ApproxErrorReport, Arm, OracleRatio, OracleResult, DEFAULT_ORACLE_N,
};
use causal_ph::scm::{generate, DagKind, Dataset, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::{read_json, write_file, write_json, CliError, CliResult, Globals};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contrast {
    pub x: f64,
    pub x0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub contrasts: Vec<Contrast>,
    pub horizon_grid: Vec<f64>,
    /// Subjects per oracle arm; 0 disables the oracle.
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    /// Relative paths resolve against the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_emit")]
    pub emit: BTreeSet<Emit>,
}

fn default_oracle_n() -> usize {
    DEFAULT_ORACLE_N
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("experiment-out")
}

fn default_emit() -> BTreeSet<Emit> {
    [Emit::Csv, Emit::Json].into_iter().collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Validation(msg));
        self.scenario
            .validate()
            .map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        if self.contrasts.is_empty() {
            return fail("contrasts: at least one (x, x0) pair is required".into());
        }
        for (i, c) in self.contrasts.iter().enumerate() {
            if !c.x.is_finite() || !c.x0.is_finite() {
                return fail(format!("contrasts[{i}]: x and x0 must be finite"));
            }
        }
        if self.horizon_grid.is_empty() {
            return fail("horizon_grid: at least one time is required".into());
        }
        for (i, &t) in self.horizon_grid.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return fail(format!("horizon_grid[{i}]: must be positive, got {t}"));
            }
            if t > self.scenario.horizon_t {
                return fail(format!(
                    "horizon_grid[{i}]: {t} exceeds scenario.horizon_t = {}",
                    self.scenario.horizon_t
                ));
            }
        }
        if self.emit.is_empty() {
            return fail("emit: name at least one of \"csv\", \"json\"".into());
        }
        Ok(())
    }
}

/// One line of `estimates.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub method: String,
    pub x: Option<f64>,
    pub x0: Option<f64>,
    pub t: f64,
    pub estimate: Option<f64>,
    pub std_err: Option<f64>,
    pub oracle_value: Option<f64>,
    pub oracle_se: Option<f64>,
    pub rel_err: Option<f64>,
    pub rarity_flag: bool,
}

impl EstimateRow {
    fn new(method: &str, x: Option<f64>, x0: Option<f64>, t: f64) -> Self {
        Self {
            method: method.to_string(),
            x,
            x0,
            t,
            estimate: None,
            std_err: None,
            oracle_value: None,
            oracle_se: None,
            rel_err: None,
            rarity_flag: false,
        }
    }

    fn estimate(mut self, value: f64, std_err: Option<f64>) -> Self {
        self.estimate = Some(value);
        self.std_err = std_err;
        self
    }

    fn oracle(mut self, truth: Option<(f64, f64)>) -> Self {
        if let Some((value, se)) = truth {
            self.oracle_value = Some(value);
            self.oracle_se = Some(se);
            self.rel_err = self.estimate.map(|e| (e - value).abs() / value.abs());
        }
        self
    }

    fn rarity(mut self, flag: bool) -> Self {
        self.rarity_flag = flag;
        self
    }
}

pub const CSV_HEADER: &str =
    "method,x,x0,t,estimate,std_err,oracle_value,oracle_se,rel_err,rarity_flag";

/// 12 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.11e}")
}

fn field(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub fn render_csv(rows: &[EstimateRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            field(r.x),
            field(r.x0),
            format_number(r.t),
            field(r.estimate),
            field(r.std_err),
            field(r.oracle_value),
            field(r.oracle_se),
            field(r.rel_err),
            r.rarity_flag
        );
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct DatasetSummary {
    pub n_subjects: usize,
    pub n_events: usize,
    pub event_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitDiagnostics {
    pub covariate_names: Vec<String>,
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub final_score_norm: f64,
    pub neg_log_partial_likelihood: f64,
}

impl From<&CoxFit> for FitDiagnostics {
    fn from(fit: &CoxFit) -> Self {
        Self {
            covariate_names: fit.covariate_names.clone(),
            beta: fit.beta.clone(),
            std_errors: fit.std_errors(),
            covariance: fit.covariance.clone(),
            iterations: fit.iterations,
            converged: fit.converged,
            final_score_norm: fit.final_score_norm,
            neg_log_partial_likelihood: fit.neg_log_partial_likelihood,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontdoorDiagnostics {
    pub params: FrontdoorParams,
    pub alpha_se: f64,
    pub mediator_intercept: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub scenario: ScenarioConfig,
    pub oracle_n: usize,
    pub dataset: DatasetSummary,
    pub fit: FitDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backdoor: Option<Vec<BackdoorSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frontdoor: Option<FrontdoorDiagnostics>,
    pub approximation: Vec<ApproxErrorReport>,
    pub estimates: Vec<EstimateRow>,
    pub notes: Vec<String>,
}

/// Oracle arms on the horizon grid, simulated once per (x, arm) pair.
struct Oracle<'a> {
    config: &'a ScenarioConfig,
    n: usize,
    grid: &'a [f64],
    arms: Vec<(u64, u64, Vec<OracleResult>)>,
    hazards: Vec<(u64, Vec<f64>)>,
}

impl<'a> Oracle<'a> {
    fn new(config: &'a ScenarioConfig, n: usize, grid: &'a [f64]) -> Self {
        Self {
            config,
            n,
            grid,
            arms: Vec::new(),
            hazards: Vec::new(),
        }
    }

    fn enabled(&self) -> bool {
        self.n > 0
    }

    fn arm(&mut self, x: f64, arm_index: u64) -> CliResult<&[OracleResult]> {
        let key = (x.to_bits(), arm_index);
        let pos = match self.arms.iter().position(|a| (a.0, a.1) == key) {
            Some(pos) => pos,
            None => {
                let runs = simulate_arm(
                    self.config,
                    Arm::Do(x),
                    self.n,
                    self.config.seed,
                    arm_index,
                    self.grid,
                )?;
                self.arms.push((key.0, key.1, runs));
                self.arms.len() - 1
            }
        };
        Ok(&self.arms[pos].2)
    }

    /// Matches `oracle_rr(config, x, x0, n, seed, t)` at every grid time.
    fn ratio(&mut self, c: Contrast, k: usize) -> CliResult<Option<OracleRatio>> {
        if !self.enabled() {
            return Ok(None);
        }
        let num = self.arm(c.x, 0)?[k];
        let den = self.arm(c.x0, 1)?[k];
        Ok(Some(ratio_of(num, den)?))
    }

    fn incidence(&mut self, x: f64, arm_index: u64, k: usize) -> CliResult<Option<(f64, f64)>> {
        if !self.enabled() {
            return Ok(None);
        }
        let r = self.arm(x, arm_index)?[k];
        Ok(Some((r.incidence, r.standard_error)))
    }

    fn cumhaz(&mut self, x: f64, k: usize) -> CliResult<Option<(f64, f64)>> {
        if !self.enabled() {
            return Ok(None);
        }
        let pos = match self.hazards.iter().position(|h| h.0 == x.to_bits()) {
            Some(pos) => pos,
            None => {
                let na = interventional_nelson_aalen(
                    self.config,
                    x,
                    self.n,
                    self.config.seed,
                    0,
                    self.grid,
                )?;
                self.hazards.push((x.to_bits(), na));
                self.hazards.len() - 1
            }
        };
        let h = self.hazards[pos].1[k];
        // Nelson–Aalen SE from the binomial SE of 1 − e^{−H}
        let p = -(-h).exp_m1();
        let se = (p * (1.0 - p) / self.n as f64).sqrt() / (1.0 - p);
        Ok(Some((h, se)))
    }

    fn paf(&self, x0: f64, t: f64) -> CliResult<Option<(f64, f64)>> {
        if !self.enabled() {
            return Ok(None);
        }
        let r = oracle_paf(self.config, x0, self.n, self.config.seed, t)?;
        Ok(Some((r.value, r.standard_error)))
    }
}

fn with_ratio(truth: Option<OracleRatio>) -> Option<(f64, f64)> {
    truth.map(|r| (r.ratio, r.standard_error))
}

fn oracle_row(c: Contrast, t: f64, truth: Option<OracleRatio>) -> Option<EstimateRow> {
    truth.map(|r| {
        EstimateRow::new("oracle", Some(c.x), Some(c.x0), t)
            .estimate(r.ratio, Some(r.standard_error))
    })
}

/// Distinct-value tracker so each (x, t) incidence is emitted once.
#[derive(Default)]
struct Seen(HashSet<(u64, u64)>);

impl Seen {
    fn first(&mut self, x: f64, t: f64) -> bool {
        self.0.insert((x.to_bits(), t.to_bits()))
    }
}

struct Outcome {
    fit: CoxFit,
    rows: Vec<EstimateRow>,
    backdoor: Option<Vec<BackdoorSummary>>,
    frontdoor: Option<FrontdoorDiagnostics>,
    notes: Vec<String>,
}

fn run_backdoor(cfg: &ExperimentConfig, ds: &Dataset, oracle: &mut Oracle) -> CliResult<Outcome> {
    let options = CoxOptions::default();
    let fit = fit_cox(ds, options)?;
    let z_columns = ds.covariate_names()[ds.x_dim()..].to_vec();
    let model = BackdoorModel::new(&fit, &z_columns)?;
    let summaries = cfg
        .horizon_grid
        .iter()
        .map(|&t| model.compute_az(ds, t))
        .collect::<Result<Vec<_>, _>>()?;
    let exposure = ds.covariate_names()[0].clone();

    let mut rows = Vec::new();
    let (mut seen_cdf, mut seen_paf) = (Seen::default(), Seen::default());
    for &c in &cfg.contrasts {
        let naive = unadjusted_rr(ds, &exposure, c.x, c.x0, options)?;
        let rr = model.causal_rr(&[c.x], &[c.x0])?;
        let rr_se = model.causal_rr_se(&[c.x], &[c.x0])?;
        for (k, (&t, summary)) in cfg.horizon_grid.iter().zip(&summaries).enumerate() {
            let cdf_x = model.do_cdf(summary, &[c.x], t)?;
            let cdf_x0 = model.do_cdf(summary, &[c.x0], t)?;
            let rarity = cdf_x.rarity_warning || cdf_x0.rarity_warning;
            let truth = oracle.ratio(c, k)?;

            rows.push(
                EstimateRow::new("causal_rr", Some(c.x), Some(c.x0), t)
                    .estimate(rr, Some(rr_se))
                    .oracle(with_ratio(truth))
                    .rarity(rarity),
            );
            rows.push(
                EstimateRow::new("unadjusted_rr", Some(c.x), Some(c.x0), t)
                    .estimate(naive.rr, Some(naive.std_err))
                    .oracle(with_ratio(truth))
                    .rarity(rarity),
            );
            for (value, cdf, arm) in [(c.x, cdf_x, 0), (c.x0, cdf_x0, 1)] {
                if seen_cdf.first(value, t) {
                    rows.push(
                        EstimateRow::new("do_cdf", Some(value), None, t)
                            .estimate(cdf.value, None)
                            .oracle(oracle.incidence(value, arm, k)?)
                            .rarity(cdf.rarity_warning),
                    );
                    rows.push(
                        EstimateRow::new("do_cumhaz", Some(value), None, t)
                            .estimate(model.do_cumhaz(summary, &[value], t)?, None)
                            .oracle(oracle.cumhaz(value, k)?)
                            .rarity(cdf.rarity_warning),
                    );
                }
            }
            if seen_paf.first(c.x0, t) {
                rows.push(
                    EstimateRow::new("paf", None, Some(c.x0), t)
                        .estimate(model.paf_at(summary, &[c.x0])?, None)
                        .oracle(oracle.paf(c.x0, t)?)
                        .rarity(summary.rarity_violated),
                );
            }
            rows.extend(oracle_row(c, t, truth));
        }
    }
    Ok(Outcome {
        fit,
        rows,
        backdoor: Some(summaries),
        frontdoor: None,
        notes: Vec::new(),
    })
}

fn run_frontdoor(cfg: &ExperimentConfig, ds: &Dataset, oracle: &mut Oracle) -> CliResult<Outcome> {
    let options = CoxOptions::default();
    let fd = estimate_frontdoor_params(ds, options)?;
    let p = fd.params;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let mut seen = Seen::default();
    for &c in &cfg.contrasts {
        let naive = unadjusted_rr(ds, "x", c.x, c.x0, options)?;
        let rr = frontdoor_causal_rr(&p, c.x, c.x0)?;
        let rr_se = fd.causal_rr_se(c.x, c.x0)?;
        let nie = mediation_indirect_rr(&p, c.x, c.x0)?;
        for (k, &t) in cfg.horizon_grid.iter().enumerate() {
            let h0 = fd.cox.baseline_cumhaz.eval(t);
            let gx = frontdoor_do_cdf_gaussian(&p, h0, c.x)?;
            let gx0 = frontdoor_do_cdf_gaussian(&p, h0, c.x0)?;
            let rarity = gx.rarity_warning || gx0.rarity_warning;
            let truth = oracle.ratio(c, k)?;

            for (method, value, se) in [
                ("frontdoor_rr", rr, rr_se),
                ("mediation_rr", nie, rr_se),
                ("unadjusted_rr", naive.rr, naive.std_err),
            ] {
                rows.push(
                    EstimateRow::new(method, Some(c.x), Some(c.x0), t)
                        .estimate(value, Some(se))
                        .oracle(with_ratio(truth))
                        .rarity(rarity),
                );
            }
            for (value, gauss, arm) in [(c.x, gx, 0), (c.x0, gx0, 1)] {
                if !seen.first(value, t) {
                    continue;
                }
                let truth = oracle.incidence(value, arm, k)?;
                rows.push(
                    EstimateRow::new("do_cdf_gaussian", Some(value), None, t)
                        .estimate(gauss.value, None)
                        .oracle(truth)
                        .rarity(gauss.rarity_warning),
                );
                match frontdoor_do_cdf_empirical(ds, &fd.cox, value, t, Binning::default()) {
                    Ok(emp) => rows.push(
                        EstimateRow::new("do_cdf_empirical", Some(value), None, t)
                            .estimate(emp.value, None)
                            .oracle(truth)
                            .rarity(emp.rarity_warning),
                    ),
                    Err(e) => notes.push(format!(
                        "do_cdf_empirical at x = {value}, t = {t} skipped: {e}"
                    )),
                }
            }
            rows.extend(oracle_row(c, t, truth));
        }
    }
    Ok(Outcome {
        frontdoor: Some(FrontdoorDiagnostics {
            params: p,
            alpha_se: fd.mediator_regression.alpha_se,
            mediator_intercept: fd.mediator_regression.intercept,
        }),
        fit: fd.cox,
        rows,
        backdoor: None,
        notes,
    })
}

/// Runs an already-validated experiment and returns its report.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    let ds = generate(&cfg.scenario)?;
    let mut oracle = Oracle::new(&cfg.scenario, cfg.oracle_n, &cfg.horizon_grid);
    let outcome = match cfg.scenario.dag_kind {
        DagKind::Backdoor => run_backdoor(cfg, &ds, &mut oracle)?,
        DagKind::Frontdoor => run_frontdoor(cfg, &ds, &mut oracle)?,
    };
    let approximation = cfg
        .horizon_grid
        .iter()
        .map(|&t| approx_error_report(&outcome.fit, &ds, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentReport {
        scenario: cfg.scenario.clone(),
        oracle_n: cfg.oracle_n,
        dataset: DatasetSummary {
            n_subjects: ds.len(),
            n_events: ds.event_count(),
            event_fraction: ds.event_fraction(),
        },
        fit: FitDiagnostics::from(&outcome.fit),
        backdoor: outcome.backdoor,
        frontdoor: outcome.frontdoor,
        approximation,
        estimates: outcome.rows,
        notes: outcome.notes,
    })
}

pub fn load_experiment(globals: &Globals, path: &Path) -> CliResult<ExperimentConfig> {
    let mut cfg: ExperimentConfig = read_json(path)?;
    if let Some(seed) = globals.seed {
        cfg.scenario.seed = seed;
    }
    cfg.validate()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

/// `--out-dir` wins over the config's `output_dir`.
fn output_dir(globals: &Globals, cfg: &ExperimentConfig, config_path: &Path) -> PathBuf {
    if let Some(dir) = &globals.out_dir {
        return dir.clone();
    }
    if cfg.output_dir.is_absolute() {
        return cfg.output_dir.clone();
    }
    config_path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&cfg.output_dir)
}

pub fn cmd_experiment(globals: &Globals, config_path: &Path) -> CliResult<Vec<PathBuf>> {
    let cfg = load_experiment(globals, config_path)?;
    let dir = output_dir(globals, &cfg, config_path);
    globals.progress(format!(
        "running {:?} experiment: n = {}, oracle n = {} per arm",
        cfg.scenario.dag_kind, cfg.scenario.n_subjects, cfg.oracle_n
    ));
    let report = run_experiment(&cfg)?;
    for note in &report.notes {
        globals.progress(format!("note: {note}"));
    }
    let mut written = Vec::new();
    if cfg.emit.contains(&Emit::Csv) {
        written.push(write_file(
            &dir.join("estimates.csv"),
            render_csv(&report.estimates).as_bytes(),
        )?);
    }
    if cfg.emit.contains(&Emit::Json) {
        written.push(write_json(&dir.join("report.json"), &report)?);
    }
    Ok(written)
}
