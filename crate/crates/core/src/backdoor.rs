//! Backdoor-adjusted estimators built on a fitted proportional-hazards model
//! whose covariates split into exposures X and measured confounders Z.
//!
//! Under rare incidence the interventional cumulative incidence factorizes as
//! `P(T ≤ t | do(X = x)) ≈ e^{η_x(x)} · H₀(t) · A_Z`, with
//! `A_Z = E[e^{η_z(Z)}]` taken over the study-start population.

use serde::{Deserialize, Serialize};

use crate::coxph::{fit_cox_with, CoxFit, CoxOptions};
use crate::error::{invalid, Result};
use crate::scm::Dataset;

/// Cumulative hazard above which `1 − e^{−H} ≈ H` is flagged as degraded.
pub const RARITY_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackdoorSummary {
    pub a_z: f64,
    /// Sample mean of e^{η_x + η_z}.
    pub mean_joint_risk: f64,
    pub horizon_t: f64,
    /// Largest e^{η}·H₀(horizon_t) in the sample.
    pub max_cumhaz: f64,
    pub rarity_violated: bool,
    pub mean_eta_z: f64,
}

/// A probability computed under the rare-disease approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incidence {
    pub value: f64,
    pub rarity_warning: bool,
}

impl Incidence {
    pub(crate) fn new(value: f64) -> Self {
        Self {
            value,
            rarity_warning: value > RARITY_THRESHOLD,
        }
    }
}

/// A fitted model with its covariates partitioned into exposures and confounders.
#[derive(Clone, Debug)]
pub struct BackdoorModel<'a> {
    fit: &'a CoxFit,
    exposures: Vec<usize>,
    confounders: Vec<usize>,
}

impl<'a> BackdoorModel<'a> {
    /// Every fitted covariate not named in `z_columns` is an exposure.
    pub fn new(fit: &'a CoxFit, z_columns: &[String]) -> Result<Self> {
        let confounders = z_columns
            .iter()
            .map(|c| fit.index_of(c))
            .collect::<Result<Vec<_>>>()?;
        let exposures: Vec<usize> = (0..fit.beta.len())
            .filter(|k| !confounders.contains(k))
            .collect();
        if exposures.is_empty() {
            return Err(invalid(
                "no exposure columns remain after removing the confounders",
            ));
        }
        Ok(Self {
            fit,
            exposures,
            confounders,
        })
    }

    pub fn fit(&self) -> &CoxFit {
        self.fit
    }

    pub fn exposure_names(&self) -> Vec<String> {
        self.exposures
            .iter()
            .map(|&k| self.fit.covariate_names[k].clone())
            .collect()
    }

    fn partial_eta(&self, block: &[usize], row: &[f64]) -> f64 {
        block
            .iter()
            .map(|&k| self.fit.beta[k] * (row[k] - self.fit.baseline_x0[k]))
            .sum()
    }

    fn exposure_contrast(&self, x: &[f64], x0: &[f64]) -> Result<f64> {
        self.check_exposure(x)?;
        self.check_exposure(x0)?;
        Ok(self
            .exposures
            .iter()
            .zip(x.iter().zip(x0))
            .map(|(&k, (a, b))| self.fit.beta[k] * (a - b))
            .sum())
    }

    fn check_exposure(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.exposures.len() {
            return Err(invalid(format!(
                "expected {} exposure values ({}), got {}",
                self.exposures.len(),
                self.exposure_names().join(", "),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("exposure values must be finite"));
        }
        Ok(())
    }

    /// η_x(x), relative to the fit's baseline.
    pub fn exposure_eta(&self, x: &[f64]) -> Result<f64> {
        let x0: Vec<f64> = self
            .exposures
            .iter()
            .map(|&k| self.fit.baseline_x0[k])
            .collect();
        self.exposure_contrast(x, &x0)
    }

    /// A_Z and related sample summaries; the dataset stands in for the
    /// study-start population with equal weights.
    pub fn compute_az(&self, dataset: &Dataset, horizon_t: f64) -> Result<BackdoorSummary> {
        if !(horizon_t.is_finite() && horizon_t >= 0.0) {
            return Err(invalid(format!(
                "horizon_t must be nonnegative, got {horizon_t}"
            )));
        }
        let rows = dataset.design(&self.fit.covariate_names)?;
        let h0 = self.fit.baseline_cumhaz.eval(horizon_t);
        let n = rows.len() as f64;
        let (mut sum_az, mut sum_joint, mut sum_eta_z, mut max_joint) = (0.0, 0.0, 0.0, 0.0f64);
        for row in &rows {
            let eta_z = self.partial_eta(&self.confounders, row);
            let joint = (eta_z + self.partial_eta(&self.exposures, row)).exp();
            sum_az += eta_z.exp();
            sum_eta_z += eta_z;
            sum_joint += joint;
            max_joint = max_joint.max(joint);
        }
        let summary = BackdoorSummary {
            a_z: sum_az / n,
            mean_joint_risk: sum_joint / n,
            horizon_t,
            max_cumhaz: max_joint * h0,
            rarity_violated: max_joint * h0 > RARITY_THRESHOLD,
            mean_eta_z: sum_eta_z / n,
        };
        debug_assert!(summary.a_z >= summary.mean_eta_z.exp() * (1.0 - 1e-12));
        Ok(summary)
    }

    /// Interventional cumulative incidence `e^{η_x(x)} · H₀(t) · A_Z`.
    pub fn do_cdf(&self, summary: &BackdoorSummary, x: &[f64], t: f64) -> Result<Incidence> {
        Ok(Incidence::new(self.do_cumhaz(summary, x, t)?))
    }

    /// Interventional cumulative hazard; same value as [`Self::do_cdf`] without the flag.
    pub fn do_cumhaz(&self, summary: &BackdoorSummary, x: &[f64], t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("t must be nonnegative, got {t}")));
        }
        let eta = self.exposure_eta(x)?;
        Ok(eta.exp() * self.fit.baseline_cumhaz.eval(t) * summary.a_z)
    }

    /// Average interventional hazard over (t1, t2].
    pub fn do_interval_hazard(
        &self,
        summary: &BackdoorSummary,
        x: &[f64],
        t1: f64,
        t2: f64,
    ) -> Result<f64> {
        if !(t2 > t1) {
            return Err(invalid(format!("interval needs t2 > t1, got ({t1}, {t2}]")));
        }
        let increment = self.do_cumhaz(summary, x, t2)? - self.do_cumhaz(summary, x, t1)?;
        Ok(increment / (t2 - t1))
    }

    /// log RR = η_x(x) − η_x(x0); the confounder coefficients never enter.
    pub fn log_causal_rr(&self, x: &[f64], x0: &[f64]) -> Result<f64> {
        self.exposure_contrast(x, x0)
    }

    pub fn causal_rr(&self, x: &[f64], x0: &[f64]) -> Result<f64> {
        Ok(self.log_causal_rr(x, x0)?.exp())
    }

    /// Delta-method standard error of [`Self::causal_rr`].
    pub fn causal_rr_se(&self, x: &[f64], x0: &[f64]) -> Result<f64> {
        let rr = self.causal_rr(x, x0)?;
        let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        let mut var = 0.0;
        for (i, &ki) in self.exposures.iter().enumerate() {
            for (j, &kj) in self.exposures.iter().enumerate() {
                var += d[i] * self.fit.covariance[ki][kj] * d[j];
            }
        }
        Ok(rr * var.max(0.0).sqrt())
    }

    /// Share of factual incidence removed by setting every exposure to baseline.
    pub fn paf(&self, summary: &BackdoorSummary) -> f64 {
        1.0 - summary.a_z / summary.mean_joint_risk
    }

    /// PAF against a counterfactual reference `x0` other than the fit's baseline.
    pub fn paf_at(&self, summary: &BackdoorSummary, x0: &[f64]) -> Result<f64> {
        let shift = self.exposure_eta(x0)?.exp();
        Ok(1.0 - shift * summary.a_z / summary.mean_joint_risk)
    }
}

pub fn compute_az(
    dataset: &Dataset,
    fit: &CoxFit,
    z_columns: &[String],
    horizon_t: f64,
) -> Result<BackdoorSummary> {
    BackdoorModel::new(fit, z_columns)?.compute_az(dataset, horizon_t)
}

/// Relative risk from a Cox model on a single exposure, ignoring confounders.
#[derive(Clone, Debug)]
pub struct UnadjustedRr {
    pub rr: f64,
    pub std_err: f64,
    pub fit: CoxFit,
}

pub fn unadjusted_rr(
    dataset: &Dataset,
    exposure: &str,
    x: f64,
    x0: f64,
    options: CoxOptions,
) -> Result<UnadjustedRr> {
    let fit = fit_cox_with(dataset, &[exposure.to_string()], options)?;
    let rr = (fit.beta[0] * (x - x0)).exp();
    let std_err = rr * fit.covariance[0][0].sqrt() * (x - x0).abs();
    Ok(UnadjustedRr { rr, std_err, fit })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::coxph::StepFunction;
    use crate::scm::{Provenance, SubjectRecord};

    pub(crate) fn manual_fit(beta: Vec<f64>, names: &[&str]) -> CoxFit {
        let p = beta.len();
        CoxFit {
            covariate_names: names.iter().map(|s| s.to_string()).collect(),
            beta,
            baseline_cumhaz: StepFunction::new(vec![1.0, 2.0, 5.0], vec![0.01, 0.015, 0.03])
                .unwrap(),
            covariance: (0..p)
                .map(|i| (0..p).map(|j| if i == j { 0.01 } else { 0.002 }).collect())
                .collect(),
            iterations: 0,
            final_score_norm: 0.0,
            converged: true,
            baseline_x0: vec![0.0; p],
            neg_log_partial_likelihood: 0.0,
            objective_trace: vec![],
            n_subjects: 0,
            n_events: 0,
        }
    }

    fn xz(rows: &[(f64, f64)]) -> Dataset {
        let records = rows
            .iter()
            .map(|&(x, z)| SubjectRecord::new(1.0, true, vec![x], vec![z]))
            .collect();
        Dataset::new(records, Provenance::InMemory).unwrap()
    }

    fn z_only() -> Vec<String> {
        vec!["z".to_string()]
    }

    #[test]
    fn az_is_one_at_baseline_confounders() {
        let fit = manual_fit(vec![0.3, 0.9], &["x", "z"]);
        let ds = xz(&[(1.0, 0.0), (-2.0, 0.0), (0.5, 0.0)]);
        let s = compute_az(&ds, &fit, &z_only(), 5.0).unwrap();
        assert_eq!(s.a_z, 1.0);
    }

    #[test]
    fn az_two_point_expectation() {
        let fit = manual_fit(vec![0.3, 2f64.ln()], &["x", "z"]);
        let ds = xz(&[(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)]);
        let s = compute_az(&ds, &fit, &z_only(), 5.0).unwrap();
        assert!((s.a_z - 1.5).abs() < 1e-15);
        assert!(s.a_z >= s.mean_eta_z.exp());
    }

    #[test]
    fn unknown_column_rejected() {
        let fit = manual_fit(vec![0.3, 0.1], &["x", "z"]);
        assert!(BackdoorModel::new(&fit, &["w".to_string()]).is_err());
        assert!(BackdoorModel::new(&fit, &["x".to_string(), "z".to_string()]).is_err());
    }

    #[test]
    fn do_cdf_examples() {
        let fit = manual_fit(vec![0.3, 0.0], &["x", "z"]);
        let model = BackdoorModel::new(&fit, &z_only()).unwrap();
        let ds = xz(&[(1.0, 0.0), (0.0, 0.0)]);
        let s = model.compute_az(&ds, 5.0).unwrap();
        assert_eq!(s.a_z, 1.0);
        assert_eq!(model.do_cdf(&s, &[0.0], 2.0).unwrap().value, 0.015);
        assert_eq!(model.do_cdf(&s, &[0.0], 0.0).unwrap().value, 0.0);
        assert!(model.do_cdf(&s, &[0.0], -1.0).is_err());
        assert!(model.do_cdf(&s, &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn rarity_flag_tracks_value() {
        let fit = manual_fit(vec![1.0, 0.0], &["x", "z"]);
        let model = BackdoorModel::new(&fit, &z_only()).unwrap();
        let s = model
            .compute_az(&xz(&[(0.0, 0.0), (1.0, 0.0)]), 5.0)
            .unwrap();
        for x in [0.0, 1.0, 1.2, 1.203, 1.21, 2.0, 3.0] {
            let inc = model.do_cdf(&s, &[x], 5.0).unwrap();
            assert_eq!(inc.rarity_warning, inc.value > RARITY_THRESHOLD, "x={x}");
        }
        assert!(model.do_cdf(&s, &[2.0], 5.0).unwrap().rarity_warning);
        assert!(!model.do_cdf(&s, &[0.0], 5.0).unwrap().rarity_warning);
    }

    #[test]
    fn causal_rr_examples() {
        let fit = manual_fit(vec![2f64.ln(), 0.7], &["x", "z"]);
        let model = BackdoorModel::new(&fit, &z_only()).unwrap();
        assert_eq!(model.causal_rr(&[0.4], &[0.4]).unwrap(), 1.0);
        assert!((model.causal_rr(&[1.0], &[0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(model.causal_rr(&[1.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn causal_rr_ignores_confounder_coefficients() {
        let fit = manual_fit(vec![0.37, 0.7], &["x", "z"]);
        let mut perturbed = fit.clone();
        perturbed.beta[1] = -3.1;
        let a = BackdoorModel::new(&fit, &z_only()).unwrap();
        let b = BackdoorModel::new(&perturbed, &z_only()).unwrap();
        for (x, x0) in [(1.0, 0.0), (-2.5, 0.3), (7.0, 7.5)] {
            assert_eq!(
                a.causal_rr(&[x], &[x0]).unwrap().to_bits(),
                b.causal_rr(&[x], &[x0]).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn interval_hazard_telescopes() {
        let fit = manual_fit(vec![0.2, 0.5], &["x", "z"]);
        let model = BackdoorModel::new(&fit, &z_only()).unwrap();
        let s = model
            .compute_az(&xz(&[(0.0, 1.0), (1.0, -1.0)]), 5.0)
            .unwrap();
        let x = [0.7];
        let (t1, t2) = (1.5, 4.0);
        let inc = model.do_interval_hazard(&s, &x, t1, t2).unwrap() * (t2 - t1);
        let lhs = model.do_cumhaz(&s, &x, t2).unwrap();
        let rhs = model.do_cumhaz(&s, &x, t1).unwrap() + inc;
        assert!((lhs - rhs).abs() < 1e-16);
        assert!(model.do_interval_hazard(&s, &x, 2.0, 2.0).is_err());
        // a_z = 1 and x at baseline gives back H₀
        let flat = manual_fit(vec![0.2, 0.0], &["x", "z"]);
        let m = BackdoorModel::new(&flat, &z_only()).unwrap();
        let s = m.compute_az(&xz(&[(0.0, 1.0), (1.0, -1.0)]), 5.0).unwrap();
        assert_eq!(m.do_cumhaz(&s, &[0.0], 5.0).unwrap(), 0.03);
    }

    #[test]
    fn paf_examples() {
        let fit = manual_fit(vec![2f64.ln(), 0.4], &["x", "z"]);
        let model = BackdoorModel::new(&fit, &z_only()).unwrap();
        let baseline = xz(&[(0.0, 1.0), (0.0, -0.5), (0.0, 0.2)]);
        let s = model.compute_az(&baseline, 5.0).unwrap();
        assert!(model.paf(&s).abs() < 1e-15);

        let binary = xz(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        let s = model.compute_az(&binary, 5.0).unwrap();
        assert!((model.paf(&s) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(model.paf_at(&s, &[0.0]).unwrap(), model.paf(&s));
        // everyone exposed is the counterfactual: factual risk 1.5, reference 2
        assert!((model.paf_at(&s, &[1.0]).unwrap() + 1.0 / 3.0).abs() < 1e-15);
    }
}
