//! Frontdoor estimators: the exposure X reaches the outcome only through a
//! measured mediator Z, while a hidden U confounds X and the outcome.
//!
//! Under rare incidence
//! `P(T ≤ t | do(x)) ≈ H₀(t) · E[e^{η_z} | X = x] · E[e^{η_x'}]`, and with
//! Gaussian X and Z | X both expectations have closed forms. The x-dependence
//! then sits entirely in `e^{β_z·α·x}`.

use serde::{Deserialize, Serialize};

use crate::backdoor::Incidence;
use crate::coxph::{fit_cox_with, CoxFit, CoxOptions};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::scm::Dataset;
use crate::stats::{empirical_moments, gaussian_exponential_moment, ols_fit, GaussianSpec, OlsFit};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontdoorParams {
    /// Exposure coefficient from the (x, z) Cox fit. It absorbs the hidden
    /// confounder, so it only sets incidence levels and never enters a ratio.
    pub beta_x: f64,
    pub beta_z: f64,
    pub alpha: f64,
    pub mu_x: f64,
    pub sigma_x: f64,
    pub sigma_z: f64,
}

impl FrontdoorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_x", self.beta_x),
            ("beta_z", self.beta_z),
            ("alpha", self.alpha),
            ("mu_x", self.mu_x),
            ("sigma_x", self.sigma_x),
            ("sigma_z", self.sigma_z),
        ] {
            ensure_finite(name, v)?;
        }
        if self.sigma_x < 0.0 || self.sigma_z < 0.0 {
            return Err(invalid("sigma_x and sigma_z must be nonnegative"));
        }
        Ok(())
    }
}

/// Everything estimated from a frontdoor dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontdoorFit {
    pub params: FrontdoorParams,
    pub cox: CoxFit,
    pub mediator_regression: OlsFit,
}

impl FrontdoorFit {
    /// Delta-method SE of [`frontdoor_causal_rr`], treating β̂_z and α̂ as independent.
    pub fn causal_rr_se(&self, x: f64, x0: f64) -> Result<f64> {
        let rr = frontdoor_causal_rr(&self.params, x, x0)?;
        let d = x - x0;
        let var_beta_z = self.cox.covariance[1][1];
        let var_alpha = self.mediator_regression.alpha_se.powi(2);
        let a = self.params.alpha * d;
        let b = self.params.beta_z * d;
        Ok(rr * (a * a * var_beta_z + b * b * var_alpha).sqrt())
    }
}

fn frontdoor_columns() -> Vec<String> {
    vec!["x".to_string(), "z".to_string()]
}

/// Estimates the six frontdoor parameters from scalar `x` and `z` columns.
/// The latent confounder, if stored, is never read.
pub fn estimate_frontdoor_params(dataset: &Dataset, options: CoxOptions) -> Result<FrontdoorFit> {
    if dataset.x_dim() != 1 || dataset.z_dim() != 1 {
        return Err(invalid(
            "frontdoor estimation needs scalar `x` and `z` columns",
        ));
    }
    let x = dataset.column("x")?;
    let z = dataset.column("z")?;
    let mediator_regression = ols_fit(&x, &z)?;
    let exposure = empirical_moments(&x)?;
    let cox = fit_cox_with(dataset, &frontdoor_columns(), options)?;
    let params = FrontdoorParams {
        beta_x: cox.beta[0],
        beta_z: cox.beta[1],
        alpha: mediator_regression.alpha,
        mu_x: exposure.mean,
        sigma_x: exposure.sd,
        sigma_z: mediator_regression.sigma_z,
    };
    Ok(FrontdoorFit {
        params,
        cox,
        mediator_regression,
    })
}

/// `H₀(t) · e^{β_x μ_x} · e^{σ_x²β_x²/2 + σ_z²β_z²/2} · e^{β_z α x}`.
pub fn frontdoor_do_cdf_gaussian(params: &FrontdoorParams, h0_t: f64, x: f64) -> Result<Incidence> {
    params.validate()?;
    ensure_finite("x", x)?;
    if !(h0_t >= 0.0) || !h0_t.is_finite() {
        return Err(invalid(format!(
            "h0_t must be a nonnegative number, got {h0_t}"
        )));
    }
    let p = params;
    let spread = 0.5 * p.sigma_x * p.sigma_x * p.beta_x * p.beta_x
        + 0.5 * p.sigma_z * p.sigma_z * p.beta_z * p.beta_z;
    let value = h0_t * (p.beta_x * p.mu_x).exp() * spread.exp() * (p.beta_z * p.alpha * x).exp();
    Ok(Incidence::new(value))
}

/// The same quantity assembled from two Gaussian exponential moments.
pub fn frontdoor_do_cdf_factorized(params: &FrontdoorParams, h0_t: f64, x: f64) -> Result<f64> {
    let exposure = gaussian_exponential_moment(
        params.beta_x,
        GaussianSpec::new(params.mu_x, params.sigma_x)?,
    )?;
    let mediator = gaussian_exponential_moment(
        params.beta_z,
        GaussianSpec::new(params.alpha * x, params.sigma_z)?,
    )?;
    Ok(exposure * mediator * h0_t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub x_bins: usize,
    pub z_bins: usize,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            x_bins: 50,
            z_bins: 50,
        }
    }
}

/// Interior edges of `bins` quantile bins (linear interpolation between
/// order statistics).
fn quantile_edges(sorted: &[f64], bins: usize) -> Vec<f64> {
    let n = sorted.len();
    (1..bins)
        .map(|b| {
            let h = (n - 1) as f64 * b as f64 / bins as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect()
}

fn bin_index(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v)
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Empirical double sum with X and Z discretized into quantile bins.
///
/// Bins are bounded by sample quantiles. The conditional mediator sum uses
/// the subjects in the x-bin that contains `x_value`, each z replaced by the
/// mean of its z-bin; the exposure sum runs over every subject.
pub fn frontdoor_do_cdf_empirical(
    dataset: &Dataset,
    fit: &CoxFit,
    x_value: f64,
    t: f64,
    binning: Binning,
) -> Result<Incidence> {
    if binning.x_bins == 0 || binning.z_bins == 0 {
        return Err(invalid("x_bins and z_bins must be at least 1"));
    }
    if !(t >= 0.0) {
        return Err(invalid(format!("t must be nonnegative, got {t}")));
    }
    ensure_finite("x_value", x_value)?;
    let kx = fit.index_of("x")?;
    let kz = fit.index_of("z")?;
    let x = dataset.column("x")?;
    let z = dataset.column("z")?;
    let n = x.len();
    let (beta_x, x_ref) = (fit.beta[kx], fit.baseline_x0[kx]);
    let (beta_z, z_ref) = (fit.beta[kz], fit.baseline_x0[kz]);

    let sorted_x = sorted_copy(&x);
    let (min, max) = (sorted_x[0], sorted_x[n - 1]);
    if x_value < min || x_value > max {
        return Err(invalid(format!(
            "x_value {x_value} lies outside the observed support [{min}, {max}]"
        )));
    }
    let x_edges = quantile_edges(&sorted_x, binning.x_bins);
    let target_bin = bin_index(&x_edges, x_value);

    let z_edges = quantile_edges(&sorted_copy(&z), binning.z_bins);
    let z_bin_of: Vec<usize> = z.iter().map(|&v| bin_index(&z_edges, v)).collect();
    let mut z_sum = vec![0.0; binning.z_bins];
    let mut z_count = vec![0usize; binning.z_bins];
    for (i, &b) in z_bin_of.iter().enumerate() {
        z_sum[b] += z[i];
        z_count[b] += 1;
    }
    let z_weight: Vec<f64> = z_sum
        .iter()
        .zip(&z_count)
        .map(|(&s, &c)| {
            if c > 0 {
                (beta_z * (s / c as f64 - z_ref)).exp()
            } else {
                0.0
            }
        })
        .collect();

    let mut in_bin = 0usize;
    let mut conditional = 0.0;
    for (xi, &zb) in x.iter().zip(&z_bin_of) {
        if bin_index(&x_edges, *xi) == target_bin {
            in_bin += 1;
            conditional += z_weight[zb];
        }
    }
    if in_bin == 0 {
        return Err(Error::EmptyStratum(format!(
            "x-bin {target_bin} of {} (containing x = {x_value}) has no subjects",
            binning.x_bins
        )));
    }
    let conditional = conditional / in_bin as f64;
    let marginal = x.iter().map(|&v| (beta_x * (v - x_ref)).exp()).sum::<f64>() / n as f64;
    Ok(Incidence::new(
        fit.baseline_cumhaz.eval(t) * conditional * marginal,
    ))
}

/// `exp(β_z·α·(x − x0))`; the exposure coefficient and the spreads cancel.
pub fn frontdoor_causal_rr(params: &FrontdoorParams, x: f64, x0: f64) -> Result<f64> {
    params.validate()?;
    ensure_finite("x", x)?;
    ensure_finite("x0", x0)?;
    Ok((params.beta_z * params.alpha * (x - x0)).exp())
}

/// Natural-indirect-effect rate ratio of a measured-confounder mediation
/// analysis with no direct effect and no exposure–mediator interaction:
/// the product of the mediator slope and the mediator's log-hazard coefficient.
pub fn mediation_indirect_rr(params: &FrontdoorParams, x: f64, x0: f64) -> Result<f64> {
    params.validate()?;
    ensure_finite("x", x)?;
    ensure_finite("x0", x0)?;
    let outcome_coef = params.beta_z;
    let mediator_slope = params.alpha;
    Ok((outcome_coef * mediator_slope * (x - x0)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backdoor::tests::manual_fit;
    use crate::scm::{Provenance, SubjectRecord};

    fn params(
        beta_x: f64,
        beta_z: f64,
        alpha: f64,
        mu_x: f64,
        sigma_x: f64,
        sigma_z: f64,
    ) -> FrontdoorParams {
        FrontdoorParams {
            beta_x,
            beta_z,
            alpha,
            mu_x,
            sigma_x,
            sigma_z,
        }
    }

    fn xz(rows: &[(f64, f64)]) -> Dataset {
        let records = rows
            .iter()
            .map(|&(x, z)| SubjectRecord::new(1.0, true, vec![x], vec![z]))
            .collect();
        Dataset::new(records, Provenance::InMemory).unwrap()
    }

    #[test]
    fn gaussian_examples() {
        let p = params(0.0, 0.0, 1.3, 0.4, 2.0, 1.0);
        assert_eq!(
            frontdoor_do_cdf_gaussian(&p, 0.02, 1.7).unwrap().value,
            0.02
        );
        let p = params(0.0, 2f64.ln(), 1.0, 0.0, 0.0, 0.0);
        let v = frontdoor_do_cdf_gaussian(&p, 0.02, 1.0).unwrap().value;
        assert!((v - 0.04).abs() < 1e-17);
        assert!(frontdoor_do_cdf_gaussian(&p, -0.1, 1.0).is_err());
        assert!(
            frontdoor_do_cdf_gaussian(&p, 0.09, 3.0)
                .unwrap()
                .rarity_warning
        );
    }

    #[test]
    fn rr_examples() {
        let p = params(0.9, 2f64.ln(), 1.0, 0.3, 1.0, 0.5);
        assert_eq!(frontdoor_causal_rr(&p, 0.4, 0.4).unwrap(), 1.0);
        assert!((frontdoor_causal_rr(&p, 1.5, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(
            mediation_indirect_rr(&params(0.9, 0.0, 1.0, 0.0, 1.0, 1.0), 3.0, 0.0).unwrap(),
            1.0
        );
        assert_eq!(
            mediation_indirect_rr(&params(0.9, 0.5, 0.0, 0.0, 1.0, 1.0), 3.0, 0.0).unwrap(),
            1.0
        );
        assert!(frontdoor_causal_rr(&p, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn one_bin_reduces_to_unconditional_sums() {
        let rows = [
            (0.1, -0.3),
            (0.7, 0.2),
            (-1.2, 0.9),
            (2.0, 1.4),
            (0.4, -0.8),
        ];
        let ds = xz(&rows);
        let fit = manual_fit(vec![0.6, 0.35], &["x", "z"]);
        let binning = Binning {
            x_bins: 1,
            z_bins: rows.len(),
        };
        let got = frontdoor_do_cdf_empirical(&ds, &fit, 0.4, 2.0, binning)
            .unwrap()
            .value;
        let n = rows.len() as f64;
        let ez: f64 = rows.iter().map(|r| (0.35 * r.1).exp()).sum::<f64>() / n;
        let ex: f64 = rows.iter().map(|r| (0.6 * r.0).exp()).sum::<f64>() / n;
        let want = fit.baseline_cumhaz.eval(2.0) * ez * ex;
        assert!((got - want).abs() < 1e-15 * want);
    }

    #[test]
    fn null_mediator_coefficient_gives_marginal_only() {
        let rows: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 / 7.0, i as f64 / 7.0)).collect();
        let ds = xz(&rows);
        let fit = manual_fit(vec![0.25, 0.0], &["x", "z"]);
        let got = frontdoor_do_cdf_empirical(
            &ds,
            &fit,
            2.0,
            5.0,
            Binning {
                x_bins: 4,
                z_bins: 4,
            },
        )
        .unwrap()
        .value;
        let ex: f64 = rows.iter().map(|r| (0.25 * r.0).exp()).sum::<f64>() / rows.len() as f64;
        assert!((got - fit.baseline_cumhaz.eval(5.0) * ex).abs() < 1e-15);
    }

    #[test]
    fn empty_stratum_and_support_errors() {
        let ds = xz(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]);
        let fit = manual_fit(vec![0.2, 0.3], &["x", "z"]);
        let err = frontdoor_do_cdf_empirical(
            &ds,
            &fit,
            0.5,
            1.0,
            Binning {
                x_bins: 5,
                z_bins: 2,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyStratum(_)), "{err}");
        assert!(frontdoor_do_cdf_empirical(&ds, &fit, 3.0, 1.0, Binning::default()).is_err());
        assert!(frontdoor_do_cdf_empirical(
            &ds,
            &fit,
            1.0,
            1.0,
            Binning {
                x_bins: 0,
                z_bins: 1
            }
        )
        .is_err());
    }
}
