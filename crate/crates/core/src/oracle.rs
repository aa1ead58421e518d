//! Ground truth by brute force: interventions are simulated directly on the
//! structural model, with the arrows into X cut, and the latent failure CDF
//! is read off by counting. No censoring is applied apart from stopping at t.

use serde::{Deserialize, Serialize};

use crate::coxph::CoxFit;
use crate::error::{invalid, Error, Result};
use crate::scm::{sharded, Coefficients, Dataset, ScenarioConfig, ZDist};
use crate::stats::RngStream;

const ORACLE_STREAM: u64 = 0x4f52_4143_4c45_0000;

/// Oracle sample size per arm used by the acceptance runs.
pub const DEFAULT_ORACLE_N: usize = 1_000_000;

/// Relative Taylor error above which an approximation report is flagged.
pub const TAYLOR_REPORT_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub incidence: f64,
    pub standard_error: f64,
    pub n: usize,
    /// `None` for the factual (non-intervened) population.
    pub x_value: Option<f64>,
    pub horizon_t: f64,
    pub seed: u64,
}

/// Which population an oracle arm simulates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arm {
    /// do(X = x): X forced, everything upstream drawn from its own law.
    Do(f64),
    /// The observational population.
    Factual,
    /// Subjects with X = x in the observational population, P(· | X = x).
    Conditional(f64),
}

impl Arm {
    fn x_value(&self) -> Option<f64> {
        match *self {
            Arm::Do(x) | Arm::Conditional(x) => Some(x),
            Arm::Factual => None,
        }
    }
}

fn arm_stream(seed: u64, arm_index: u64) -> RngStream {
    RngStream::new(seed, ORACLE_STREAM).substream(arm_index)
}

/// Distribution of the upstream variable (Z or U) given X = x.
#[derive(Clone, Copy, Debug)]
enum Posterior {
    Normal { mean: f64, sd: f64 },
    Binary { p_one: f64 },
}

fn posterior_given_exposure(config: &ScenarioConfig, x: f64) -> Result<Posterior> {
    let normal_posterior = |slope: f64, noise_sd: f64| {
        let var_x = slope * slope + noise_sd * noise_sd;
        if var_x == 0.0 {
            return Posterior::Normal { mean: 0.0, sd: 1.0 };
        }
        Posterior::Normal {
            mean: slope * x / var_x,
            sd: (noise_sd * noise_sd / var_x).sqrt(),
        }
    };
    match (config.coefficients, config.z_dist) {
        (Coefficients::Backdoor(c), ZDist::Bernoulli { p }) => {
            if c.sigma_x <= 0.0 {
                return Err(invalid("conditioning on X with binary Z needs sigma_x > 0"));
            }
            // log-odds of Z = 1 given x
            let r1 = (x - c.a_zx) / c.sigma_x;
            let r0 = x / c.sigma_x;
            let log_odds = p.ln() - (1.0 - p).ln() - 0.5 * (r1 * r1 - r0 * r0);
            Ok(Posterior::Binary {
                p_one: 1.0 / (1.0 + (-log_odds).exp()),
            })
        }
        (Coefficients::Backdoor(c), ZDist::StandardNormal) => {
            Ok(normal_posterior(c.a_zx, c.sigma_x))
        }
        (Coefficients::Frontdoor(c), _) => Ok(normal_posterior(c.c_ux, c.sigma_x)),
    }
}

fn check_request(config: &ScenarioConfig, n: usize, t: f64) -> Result<()> {
    config.validate()?;
    if n == 0 {
        return Err(invalid("oracle sample size n must be at least 1"));
    }
    if !(t >= 0.0 && t <= config.horizon_t) {
        return Err(invalid(format!(
            "t must lie in [0, horizon_t = {}], got {t}",
            config.horizon_t
        )));
    }
    Ok(())
}

/// Latent failure times of `n` subjects from one arm.
pub fn latent_failure_times(
    config: &ScenarioConfig,
    arm: Arm,
    n: usize,
    seed: u64,
    arm_index: u64,
) -> Result<Vec<f64>> {
    check_request(config, n, 0.0)?;
    let posterior = match arm {
        Arm::Conditional(x) => Some(posterior_given_exposure(config, x)?),
        _ => None,
    };
    let base = arm_stream(seed, arm_index);
    Ok(sharded(&base, n, |rng| {
        let mut e = config.draw_exogenous(rng);
        if let Some(post) = posterior {
            e.confounder = match post {
                Posterior::Normal { mean, sd } => mean + sd * rng.standard_normal(),
                Posterior::Binary { p_one } => f64::from(u8::from(rng.uniform() < p_one)),
            };
        }
        let realized = config.realize(&e, arm.x_value());
        config.failure_time(&e, realized.eta)
    }))
}

fn incidence_at(times: &[f64], t: f64) -> f64 {
    times.iter().filter(|&&v| v <= t).count() as f64 / times.len() as f64
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Incidences of one arm on a grid of times, all from the same draws.
pub fn simulate_arm(
    config: &ScenarioConfig,
    arm: Arm,
    n: usize,
    seed: u64,
    arm_index: u64,
    times: &[f64],
) -> Result<Vec<OracleResult>> {
    for &t in times {
        check_request(config, n, t)?;
    }
    let failures = latent_failure_times(config, arm, n, seed, arm_index)?;
    Ok(times
        .iter()
        .map(|&t| {
            let incidence = incidence_at(&failures, t);
            OracleResult {
                incidence,
                standard_error: binomial_se(incidence, n),
                n,
                x_value: arm.x_value(),
                horizon_t: t,
                seed,
            }
        })
        .collect())
}

/// P(T ≤ t | do(X = x_value)) by direct simulation.
pub fn simulate_do(
    config: &ScenarioConfig,
    x_value: f64,
    n: usize,
    seed: u64,
    t: f64,
) -> Result<OracleResult> {
    Ok(simulate_arm(config, Arm::Do(x_value), n, seed, 0, &[t])?[0])
}

/// P(T ≤ t | X = x_value): conditioning rather than intervening.
pub fn simulate_conditional(
    config: &ScenarioConfig,
    x_value: f64,
    n: usize,
    seed: u64,
    t: f64,
) -> Result<OracleResult> {
    Ok(simulate_arm(config, Arm::Conditional(x_value), n, seed, 0, &[t])?[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRatio {
    pub ratio: f64,
    pub standard_error: f64,
    pub numerator: OracleResult,
    pub denominator: OracleResult,
}

/// Ratio of two oracle incidences with a delta-method SE on the log scale.
pub fn ratio_of(numerator: OracleResult, denominator: OracleResult) -> Result<OracleRatio> {
    let degenerate = |which: &str| {
        Error::DegenerateOracle(format!(
            "no events in the {which} arm by t = {}; increase n or t",
            denominator.horizon_t
        ))
    };
    if denominator.incidence == 0.0 {
        return Err(degenerate("denominator"));
    }
    if numerator.incidence == 0.0 {
        return Err(degenerate("numerator"));
    }
    let ratio = numerator.incidence / denominator.incidence;
    let var_log = |r: &OracleResult| (1.0 - r.incidence) / (r.n as f64 * r.incidence);
    Ok(OracleRatio {
        ratio,
        standard_error: ratio * (var_log(&numerator) + var_log(&denominator)).sqrt(),
        numerator,
        denominator,
    })
}

/// do-ratio P(T ≤ t | do(x)) / P(T ≤ t | do(x0)) from independent arms.
pub fn oracle_rr(
    config: &ScenarioConfig,
    x: f64,
    x0: f64,
    n: usize,
    seed: u64,
    t: f64,
) -> Result<OracleRatio> {
    let num = simulate_arm(config, Arm::Do(x), n, seed, 0, &[t])?[0];
    let den = simulate_arm(config, Arm::Do(x0), n, seed, 1, &[t])?[0];
    ratio_of(num, den)
}

/// Like [`oracle_rr`] but both arms reuse one stream, so x = x0 gives exactly 1.
pub fn oracle_rr_shared(
    config: &ScenarioConfig,
    x: f64,
    x0: f64,
    n: usize,
    seed: u64,
    t: f64,
) -> Result<OracleRatio> {
    let num = simulate_arm(config, Arm::Do(x), n, seed, 0, &[t])?[0];
    let den = simulate_arm(config, Arm::Do(x0), n, seed, 0, &[t])?[0];
    ratio_of(num, den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OraclePaf {
    pub value: f64,
    pub standard_error: f64,
    pub factual_incidence: f64,
    pub counterfactual_incidence: f64,
    pub n: usize,
    pub horizon_t: f64,
}

/// (I_factual − I_do(x0)) / I_factual, each simulated unit contributing both
/// its factual and its counterfactual outcome.
pub fn oracle_paf(
    config: &ScenarioConfig,
    x0: f64,
    n: usize,
    seed: u64,
    t: f64,
) -> Result<OraclePaf> {
    check_request(config, n, t)?;
    let base = arm_stream(seed, u64::MAX);
    let pairs = sharded(&base, n, |rng| {
        let e = config.draw_exogenous(rng);
        let factual = config.realize(&e, None);
        let counterfactual = config.realize(&e, Some(x0));
        (
            config.failure_time(&e, factual.eta) <= t,
            config.failure_time(&e, counterfactual.eta) <= t,
        )
    });
    let nf = n as f64;
    let factual = pairs.iter().filter(|p| p.0).count() as f64;
    let counter = pairs.iter().filter(|p| p.1).count() as f64;
    let both = pairs.iter().filter(|p| p.0 && p.1).count() as f64;
    if factual == 0.0 {
        return Err(Error::DegenerateOracle(format!(
            "no factual events by t = {t}; increase n or t"
        )));
    }
    let (i_f, i_c, i_fc) = (factual / nf, counter / nf, both / nf);
    let r = i_c / i_f;
    // Var(C − r·F) for the paired indicators; its mean is zero at r.
    let var = (i_c - 2.0 * r * i_fc + r * r * i_f).max(0.0);
    Ok(OraclePaf {
        value: 1.0 - r,
        standard_error: (var / nf).sqrt() / i_f,
        factual_incidence: i_f,
        counterfactual_incidence: i_c,
        n,
        horizon_t: t,
    })
}

/// Nelson–Aalen cumulative hazard at each `t` of an uncensored do-arm.
pub fn interventional_nelson_aalen(
    config: &ScenarioConfig,
    x_value: f64,
    n: usize,
    seed: u64,
    arm_index: u64,
    times: &[f64],
) -> Result<Vec<f64>> {
    for &t in times {
        check_request(config, n, t)?;
    }
    let mut failures = latent_failure_times(config, Arm::Do(x_value), n, seed, arm_index)?;
    failures.sort_by(f64::total_cmp);
    Ok(times
        .iter()
        .map(|&t| nelson_aalen_sorted(&failures, t))
        .collect())
}

fn nelson_aalen_sorted(sorted: &[f64], t: f64) -> f64 {
    let n = sorted.len();
    let mut total = 0.0;
    let mut k = 0;
    while k < n && sorted[k] <= t {
        let mut end = k + 1;
        while end < n && sorted[end] == sorted[k] {
            end += 1;
        }
        total += (end - k) as f64 / (n - k) as f64;
        k = end;
    }
    total
}

/// Relative error of `1 − e^{−H} ≈ H`, i.e. `(H − (1 − e^{−H})) / (1 − e^{−H})`.
pub fn taylor_relative_error(h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    if h < 1e-4 {
        return h / 2.0 + h * h / 12.0 - h.powi(4) / 720.0;
    }
    h / -(-h).exp_m1() - 1.0
}

/// The bound `H/2 · (1 + H)` on [`taylor_relative_error`].
pub fn taylor_error_bound(h: f64) -> f64 {
    0.5 * h * (1.0 + h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxErrorReport {
    pub horizon_t: f64,
    pub max_cumhaz: f64,
    pub mean_cumhaz: f64,
    pub max_relative_error: f64,
    pub bound_holds: bool,
    /// `max_relative_error` exceeds [`TAYLOR_REPORT_THRESHOLD`].
    pub flagged: bool,
}

impl ApproxErrorReport {
    pub fn from_cumhaz(horizon_t: f64, cumhaz: &[f64]) -> Self {
        let max_cumhaz = cumhaz.iter().copied().fold(0.0, f64::max);
        let mean_cumhaz = if cumhaz.is_empty() {
            0.0
        } else {
            cumhaz.iter().sum::<f64>() / cumhaz.len() as f64
        };
        // the relative error is increasing in H, so the largest H decides
        let max_relative_error = taylor_relative_error(max_cumhaz);
        let bound_holds = cumhaz
            .iter()
            .all(|&h| taylor_relative_error(h) <= taylor_error_bound(h));
        Self {
            horizon_t,
            max_cumhaz,
            mean_cumhaz,
            max_relative_error,
            bound_holds,
            flagged: max_relative_error > TAYLOR_REPORT_THRESHOLD,
        }
    }
}

/// Size of the rare-disease approximation error across the fitted sample at `t`.
pub fn approx_error_report(fit: &CoxFit, dataset: &Dataset, t: f64) -> Result<ApproxErrorReport> {
    let rows = dataset.design(&fit.covariate_names)?;
    let cumhaz = rows
        .iter()
        .map(|row| fit.predict_cumhaz(row, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ApproxErrorReport::from_cumhaz(t, &cumhaz))
}
