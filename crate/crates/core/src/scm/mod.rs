//! Structural causal models for simulated survival cohorts.
//!
//! Two graphs are supported. In the backdoor graph a measured confounder Z
//! drives both the exposure X and the hazard. In the frontdoor graph a hidden
//! U drives X and the hazard, X acts on the hazard only through the mediator
//! Z, and U is kept out of reach of the estimators.
//!
//! Every subject is simulated from five exogenous draws taken in a fixed
//! order from its shard's stream; the structural equations are then applied,
//! optionally with X forced to a value (the oracle's interventions).

mod dataset;

pub use dataset::{load_dataset, save_dataset, Dataset, Provenance, SubjectRecord, LATENT_COLUMN};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};
use crate::stats::{unit_exponential, RngStream};

/// Subjects per RNG shard. Changing this changes every simulated dataset.
pub const SHARD_SIZE: usize = 4096;

const GENERATION_STREAM: u64 = 0x5343_4d5f_4745_4e00;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DagKind {
    Backdoor,
    Frontdoor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum BaselineHazard {
    /// Constant hazard `rate` per year.
    Exponential { rate: f64 },
    /// H₀(t) = (t / scale)^shape.
    Weibull { shape: f64, scale: f64 },
}

impl BaselineHazard {
    pub fn cumulative(&self, t: f64) -> f64 {
        match *self {
            BaselineHazard::Exponential { rate } => rate * t,
            BaselineHazard::Weibull { shape, scale } => (t / scale).powf(shape),
        }
    }

    /// The time at which H₀ reaches `target`.
    pub fn inverse_cumulative(&self, target: f64) -> f64 {
        match *self {
            BaselineHazard::Exponential { rate } => target / rate,
            BaselineHazard::Weibull { shape, scale } => scale * target.powf(shape.recip()),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!(
                    "baseline_hazard.{name} must be positive, got {v}"
                )))
            }
        };
        match *self {
            BaselineHazard::Exponential { rate } => positive("rate", rate),
            BaselineHazard::Weibull { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackdoorCoefficients {
    pub a_zx: f64,
    pub sigma_x: f64,
    pub beta_x: f64,
    pub beta_z: f64,
}

impl BackdoorCoefficients {
    pub fn log_hazard(&self, x: f64, z: f64) -> f64 {
        self.beta_x * x + self.beta_z * z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontdoorCoefficients {
    pub c_ux: f64,
    pub sigma_x: f64,
    pub alpha: f64,
    pub sigma_z: f64,
    pub beta_z: f64,
    pub beta_u: f64,
}

impl FrontdoorCoefficients {
    /// The exposure has no arrow into the hazard, so it is not an argument.
    pub fn log_hazard(&self, z: f64, u: f64) -> f64 {
        self.beta_z * z + self.beta_u * u
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coefficients {
    Backdoor(BackdoorCoefficients),
    Frontdoor(FrontdoorCoefficients),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub enum ZDist {
    #[default]
    StandardNormal,
    Bernoulli {
        p: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dag_kind: DagKind,
    pub n_subjects: usize,
    pub seed: u64,
    pub baseline_hazard: BaselineHazard,
    pub horizon_t: f64,
    #[serde(default)]
    pub censor_rate: f64,
    pub coefficients: Coefficients,
    #[serde(default)]
    pub z_dist: ZDist,
}

/// Exogenous inputs of one subject, drawn in this field order.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Exogenous {
    /// Z (backdoor) or U (frontdoor).
    pub confounder: f64,
    pub exposure_noise: f64,
    pub mediator_noise: f64,
    pub failure_u: f64,
    pub censor_u: f64,
}

/// Endogenous values of one subject after the structural equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Realized {
    pub x: f64,
    pub z: f64,
    pub u: Option<f64>,
    pub eta: f64,
}

/// Time T with `H₀(T)·e^eta = −ln(1 − u)`.
pub fn inverse_survival_time(u: f64, eta: f64, baseline: &BaselineHazard) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!(
            "u must lie in the open interval (0, 1), got {u}"
        )));
    }
    ensure_finite("eta", eta)?;
    Ok(survival_time(u, eta, baseline))
}

pub(crate) fn survival_time(u: f64, eta: f64, baseline: &BaselineHazard) -> f64 {
    baseline.inverse_cumulative(unit_exponential(u) / eta.exp())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(invalid("n_subjects must be at least 1"));
        }
        if !(self.horizon_t.is_finite() && self.horizon_t > 0.0) {
            return Err(invalid(format!(
                "horizon_t must be positive, got {}",
                self.horizon_t
            )));
        }
        if !(self.censor_rate.is_finite() && self.censor_rate >= 0.0) {
            return Err(invalid(format!(
                "censor_rate must be nonnegative, got {}",
                self.censor_rate
            )));
        }
        self.baseline_hazard.validate()?;
        let check = |name: &str, v: f64, nonneg: bool| {
            ensure_finite(&format!("coefficients.{name}"), v)?;
            if nonneg && v < 0.0 {
                return Err(invalid(format!(
                    "coefficients.{name} must be nonnegative, got {v}"
                )));
            }
            Ok(())
        };
        match (self.dag_kind, &self.coefficients) {
            (DagKind::Backdoor, Coefficients::Backdoor(c)) => {
                check("a_zx", c.a_zx, false)?;
                check("sigma_x", c.sigma_x, true)?;
                check("beta_x", c.beta_x, false)?;
                check("beta_z", c.beta_z, false)?;
                if let ZDist::Bernoulli { p } = self.z_dist {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(invalid(format!("z_dist.p must lie in [0, 1], got {p}")));
                    }
                }
            }
            (DagKind::Frontdoor, Coefficients::Frontdoor(c)) => {
                check("c_ux", c.c_ux, false)?;
                check("sigma_x", c.sigma_x, true)?;
                check("alpha", c.alpha, false)?;
                check("sigma_z", c.sigma_z, true)?;
                check("beta_z", c.beta_z, false)?;
                check("beta_u", c.beta_u, false)?;
            }
            (kind, _) => {
                return Err(invalid(format!(
                    "coefficients do not match dag_kind {kind:?}"
                )))
            }
        }
        Ok(())
    }

    pub(crate) fn draw_exogenous(&self, rng: &mut RngStream) -> Exogenous {
        let confounder = match (self.dag_kind, self.z_dist) {
            (DagKind::Backdoor, ZDist::Bernoulli { p }) => f64::from(u8::from(rng.uniform() < p)),
            _ => rng.standard_normal(),
        };
        Exogenous {
            confounder,
            exposure_noise: rng.standard_normal(),
            mediator_noise: rng.standard_normal(),
            failure_u: rng.uniform(),
            censor_u: rng.uniform(),
        }
    }

    /// Applies the structural equations; `forced_x` severs the arrows into X.
    pub(crate) fn realize(&self, e: &Exogenous, forced_x: Option<f64>) -> Realized {
        match self.coefficients {
            Coefficients::Backdoor(c) => {
                let z = e.confounder;
                let x = forced_x.unwrap_or(c.a_zx * z + c.sigma_x * e.exposure_noise);
                Realized {
                    x,
                    z,
                    u: None,
                    eta: c.log_hazard(x, z),
                }
            }
            Coefficients::Frontdoor(c) => {
                let u = e.confounder;
                let x = forced_x.unwrap_or(c.c_ux * u + c.sigma_x * e.exposure_noise);
                let z = c.alpha * x + c.sigma_z * e.mediator_noise;
                Realized {
                    x,
                    z,
                    u: Some(u),
                    eta: c.log_hazard(z, u),
                }
            }
        }
    }

    pub(crate) fn failure_time(&self, e: &Exogenous, eta: f64) -> f64 {
        survival_time(e.failure_u, eta, &self.baseline_hazard)
    }

    fn censoring_time(&self, e: &Exogenous) -> f64 {
        if self.censor_rate > 0.0 {
            self.horizon_t
                .min(unit_exponential(e.censor_u) / self.censor_rate)
        } else {
            self.horizon_t
        }
    }

    fn subject(&self, e: &Exogenous) -> SubjectRecord {
        let r = self.realize(e, None);
        let failure = self.failure_time(e, r.eta);
        let censor = self.censoring_time(e);
        let event = failure <= censor;
        let record = SubjectRecord::new(failure.min(censor), event, vec![r.x], vec![r.z]);
        match r.u {
            Some(u) => record.with_latent(u),
            None => record,
        }
    }

    fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        let base = RngStream::new(self.seed, GENERATION_STREAM);
        let records = sharded(&base, self.n_subjects, |rng| {
            let e = self.draw_exogenous(rng);
            self.subject(&e)
        });
        Dataset::new(records, Provenance::Scenario(self.clone()))
    }
}

/// Runs `draw` once per subject, subject `i` using shard `i / SHARD_SIZE`'s
/// stream. Output order is subject order however the shards are scheduled.
pub(crate) fn sharded<T, F>(base: &RngStream, n: usize, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync,
{
    let shards = n.div_ceil(SHARD_SIZE);
    let chunks: Vec<Vec<T>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = base.substream(s as u64);
            let count = SHARD_SIZE.min(n - s * SHARD_SIZE);
            (0..count).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

pub fn generate_backdoor(config: &ScenarioConfig) -> Result<Dataset> {
    if config.dag_kind != DagKind::Backdoor {
        return Err(invalid("generate_backdoor needs dag_kind = Backdoor"));
    }
    config.generate()
}

pub fn generate_frontdoor(config: &ScenarioConfig) -> Result<Dataset> {
    if config.dag_kind != DagKind::Frontdoor {
        return Err(invalid("generate_frontdoor needs dag_kind = Frontdoor"));
    }
    config.generate()
}

pub fn generate(config: &ScenarioConfig) -> Result<Dataset> {
    config.generate()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn frontdoor_config() -> ScenarioConfig {
        ScenarioConfig {
            dag_kind: DagKind::Frontdoor,
            n_subjects: 1000,
            seed: 7,
            baseline_hazard: BaselineHazard::Exponential { rate: 0.002 },
            horizon_t: 10.0,
            censor_rate: 0.0,
            coefficients: Coefficients::Frontdoor(FrontdoorCoefficients {
                c_ux: 0.8,
                sigma_x: 0.6,
                alpha: 1.0,
                sigma_z: 0.5,
                beta_z: 0.5,
                beta_u: 0.7,
            }),
            z_dist: ZDist::StandardNormal,
        }
    }

    #[test]
    fn inverse_time_examples() {
        let u = 1.0 - (-1.0f64).exp();
        let unit = BaselineHazard::Exponential { rate: 1.0 };
        assert!((inverse_survival_time(u, 0.0, &unit).unwrap() - 1.0).abs() < 1e-12);
        assert!((inverse_survival_time(u, 2f64.ln(), &unit).unwrap() - 0.5).abs() < 1e-12);
        let weibull = BaselineHazard::Weibull {
            shape: 2.0,
            scale: 1.0,
        };
        assert!((inverse_survival_time(u, 0.0, &weibull).unwrap() - 1.0).abs() < 1e-12);
        assert!(inverse_survival_time(0.0, 0.0, &unit).is_err());
        assert!(inverse_survival_time(1.0, 0.0, &unit).is_err());
    }

    #[test]
    fn inverse_time_inverts_cumulative_hazard() {
        let weibull = BaselineHazard::Weibull {
            shape: 1.7,
            scale: 30.0,
        };
        for &(u, eta) in &[(0.01, 0.3), (0.5, -1.0), (0.99, 2.0)] {
            let t = inverse_survival_time(u, eta, &weibull).unwrap();
            let h = weibull.cumulative(t) * f64::exp(eta);
            assert!((h - unit_exponential(u)).abs() < 1e-12 * h.max(1.0));
        }
    }

    #[test]
    fn frontdoor_hazard_ignores_exposure() {
        let config = frontdoor_config();
        let e = Exogenous {
            confounder: 0.4,
            exposure_noise: -0.2,
            mediator_noise: 0.3,
            failure_u: 0.5,
            censor_u: 0.5,
        };
        let Coefficients::Frontdoor(c) = config.coefficients else {
            unreachable!()
        };
        let base = config.realize(&e, Some(0.0));
        // moving X changes the hazard only by alpha·beta_z·Δx, through Z
        for x in [-2.0, 1.0, 3.5] {
            let r = config.realize(&e, Some(x));
            assert_eq!(r.z, c.alpha * x + c.sigma_z * e.mediator_noise);
            assert_eq!(r.eta, c.log_hazard(r.z, 0.4));
        }
        // with the mediator frozen, no X value moves the hazard
        let mut decoupled = config.clone();
        decoupled.coefficients = Coefficients::Frontdoor(FrontdoorCoefficients { alpha: 0.0, ..c });
        let etas: Vec<f64> = [-2.0, 0.0, 5.0]
            .iter()
            .map(|&x| decoupled.realize(&e, Some(x)).eta)
            .collect();
        assert!(etas.iter().all(|&v| v == etas[0]));
        assert_eq!(base.u, Some(0.4));
    }

    #[test]
    fn latent_stored_only_for_frontdoor() {
        let ds = generate_frontdoor(&frontdoor_config()).unwrap();
        assert!(ds.has_latent());
        let r = &ds.records()[0];
        assert!(r.latent().is_some());
    }

    #[test]
    fn wrong_kind_rejected() {
        let config = frontdoor_config();
        assert!(generate_backdoor(&config).is_err());
        let mut mismatched = config.clone();
        mismatched.dag_kind = DagKind::Backdoor;
        assert!(mismatched.validate().is_err());
    }

    #[test]
    fn shard_boundaries_do_not_depend_on_scheduling() {
        let base = RngStream::new(3, 3);
        let a = sharded(&base, 3 * SHARD_SIZE + 17, |rng| rng.next_u64());
        let b = sharded(&base, 3 * SHARD_SIZE + 17, |rng| rng.next_u64());
        assert_eq!(a, b);
        assert_eq!(a.len(), 3 * SHARD_SIZE + 17);
        let first_shard: Vec<u64> = {
            let mut rng = base.substream(0);
            (0..10).map(|_| rng.next_u64()).collect()
        };
        assert_eq!(a[..10], first_shard[..]);
    }
}
