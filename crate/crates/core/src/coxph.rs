//! Cox proportional-hazards fitting: Breslow partial likelihood, Newton–Raphson
//! with step halving, and the Breslow baseline cumulative hazard.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scm::Dataset;

/// Right-continuous nondecreasing step function, zero before the first knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(invalid("step function needs one value per knot"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("step function knots must be strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || values.windows(2).any(|w| w[1] < w[0])
        {
            return Err(invalid(
                "step function values must be nonnegative and nondecreasing",
            ));
        }
        Ok(Self { knots, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k <= t) {
            0 => 0.0,
            i => self.values[i - 1],
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub covariate_names: Vec<String>,
    pub beta: Vec<f64>,
    pub baseline_cumhaz: StepFunction,
    /// Inverse of the observed information at `beta`.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub final_score_norm: f64,
    pub converged: bool,
    /// Covariate values at which the linear predictor is zero.
    pub baseline_x0: Vec<f64>,
    pub neg_log_partial_likelihood: f64,
    /// Objective at the start and after every accepted Newton step.
    pub objective_trace: Vec<f64>,
    pub n_subjects: usize,
    pub n_events: usize,
}

impl CoxFit {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.beta.len())
            .map(|k| self.covariance[k][k].sqrt())
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| invalid(format!("covariate `{name}` is not in the fit")))
    }

    /// Re-references the fit at `x0`: η(x0) becomes 0 and H₀ is rescaled so
    /// every predicted cumulative hazard is unchanged.
    pub fn with_baseline(&self, x0: Vec<f64>) -> Result<CoxFit> {
        if x0.len() != self.beta.len() {
            return Err(invalid("baseline dimension does not match the fit"));
        }
        let shift = self.linear_predictor(&x0)?;
        Ok(CoxFit {
            baseline_cumhaz: self.baseline_cumhaz.scaled(shift.exp()),
            baseline_x0: x0,
            ..self.clone()
        })
    }

    pub fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        if covariates.len() != self.beta.len() {
            return Err(invalid(format!(
                "expected {} covariates, got {}",
                self.beta.len(),
                covariates.len()
            )));
        }
        Ok(self
            .beta
            .iter()
            .zip(covariates.iter().zip(&self.baseline_x0))
            .map(|(b, (c, c0))| b * (c - c0))
            .sum())
    }

    pub fn predict_cumhaz(&self, covariates: &[f64], t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("t must be nonnegative, got {t}")));
        }
        let eta = self.linear_predictor(covariates)?;
        Ok(eta.exp() * self.baseline_cumhaz.eval(t))
    }
}

pub fn linear_predictor(fit: &CoxFit, covariates: &[f64]) -> Result<f64> {
    fit.linear_predictor(covariates)
}

pub fn predict_cumhaz(fit: &CoxFit, covariates: &[f64], t: f64) -> Result<f64> {
    fit.predict_cumhaz(covariates, t)
}

#[derive(Clone, Copy, Debug)]
pub struct CoxOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Objective {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major p×p.
    pub hessian: Vec<Vec<f64>>,
}

/// Survival data sorted by ascending time, covariates row-major.
struct Design {
    p: usize,
    time: Vec<f64>,
    event: Vec<bool>,
    cov: Vec<f64>,
}

impl Design {
    fn new(dataset: &Dataset, names: &[String]) -> Result<Self> {
        let rows = dataset.design(names)?;
        let times = dataset.times();
        let events = dataset.events();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let p = names.len();
        let mut cov = Vec::with_capacity(rows.len() * p);
        for &i in &order {
            cov.extend_from_slice(&rows[i]);
        }
        Ok(Self {
            p,
            time: order.iter().map(|&i| times[i]).collect(),
            event: order.iter().map(|&i| events[i]).collect(),
            cov,
        })
    }

    fn n(&self) -> usize {
        self.time.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.cov[i * self.p..(i + 1) * self.p]
    }

    fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    /// η_i = β·(c_i − x0) and their maximum.
    fn etas(&self, beta: &[f64], x0: &[f64]) -> Result<(Vec<f64>, f64)> {
        let etas: Vec<f64> = (0..self.n())
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(beta.iter().zip(x0))
                    .map(|(c, (b, c0))| b * (c - c0))
                    .sum()
            })
            .collect();
        if etas.iter().any(|e| !e.is_finite()) {
            return Err(Error::NumericalOverflow(
                "non-finite linear predictor".into(),
            ));
        }
        let max = etas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((etas, max))
    }

    /// Visits tie groups from the latest time backwards; `visit` sees the
    /// group's range after the group has joined the risk-set accumulators.
    fn sweep(
        &self,
        weights: &[f64],
        with_second: bool,
        mut visit: impl FnMut(std::ops::Range<usize>, f64, &[f64], &[f64]),
    ) {
        let p = self.p;
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; if with_second { p * p } else { 0 }];
        let mut end = self.n();
        while end > 0 {
            let t = self.time[end - 1];
            let mut start = end - 1;
            while start > 0 && self.time[start - 1] == t {
                start -= 1;
            }
            for j in start..end {
                let w = weights[j];
                let x = self.row(j);
                s0 += w;
                for a in 0..p {
                    s1[a] += w * x[a];
                    if with_second {
                        for b in 0..p {
                            s2[a * p + b] += w * x[a] * x[b];
                        }
                    }
                }
            }
            visit(start..end, s0, &s1, &s2);
            end = start;
        }
    }

    fn objective(&self, beta: &[f64]) -> Result<Objective> {
        let p = self.p;
        let zeros = vec![0.0; p];
        let (etas, m) = self.etas(beta, &zeros)?;
        let weights: Vec<f64> = etas.iter().map(|e| (e - m).exp()).collect();
        let mut value = 0.0;
        let mut gradient = vec![0.0; p];
        let mut hessian = vec![0.0; p * p];
        let mut degenerate = false;
        self.sweep(&weights, true, |range, s0, s1, s2| {
            let d = range.clone().filter(|&i| self.event[i]).count();
            if d == 0 {
                return;
            }
            if !(s0 > 0.0 && s0.is_finite()) {
                degenerate = true;
                return;
            }
            let df = d as f64;
            value += df * (m + s0.ln());
            for i in range.filter(|&i| self.event[i]) {
                value -= etas[i];
                for (g, x) in gradient.iter_mut().zip(self.row(i)) {
                    *g -= x;
                }
            }
            for a in 0..p {
                let mean_a = s1[a] / s0;
                gradient[a] += df * mean_a;
                for b in 0..p {
                    hessian[a * p + b] += df * (s2[a * p + b] / s0 - mean_a * s1[b] / s0);
                }
            }
        });
        if degenerate || !value.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalOverflow(
                "risk-set sums left the floating-point range".into(),
            ));
        }
        Ok(Objective {
            value,
            gradient,
            hessian: hessian.chunks(p).map(|r| r.to_vec()).collect(),
        })
    }

    fn breslow(&self, beta: &[f64], x0: &[f64]) -> Result<StepFunction> {
        let (etas, m) = self.etas(beta, x0)?;
        let weights: Vec<f64> = etas.iter().map(|e| (e - m).exp()).collect();
        let mut increments = Vec::new();
        self.sweep(&weights, false, |range, s0, _, _| {
            let d = range.clone().filter(|&i| self.event[i]).count();
            if d > 0 {
                increments.push((self.time[range.start], d as f64 / s0 * (-m).exp()));
            }
        });
        increments.reverse();
        let mut total = 0.0;
        let mut knots = Vec::with_capacity(increments.len());
        let mut values = Vec::with_capacity(increments.len());
        for (t, dh) in increments {
            total += dh;
            knots.push(t);
            values.push(total);
        }
        if !total.is_finite() {
            return Err(Error::NumericalOverflow(
                "baseline hazard overflowed".into(),
            ));
        }
        StepFunction::new(knots, values)
    }
}

/// The information matrix underflows when a coefficient runs off along a ridge;
/// doubling the coefficients then still lowers the objective.
fn diverging_coefficient(
    design: &Design,
    covariates: &[String],
    beta: &[f64],
    current: &Objective,
) -> Option<Error> {
    let k = argmax_abs(beta);
    if beta[k] == 0.0 {
        return None;
    }
    let doubled: Vec<f64> = beta.iter().map(|b| 2.0 * b).collect();
    let further = design.objective(&doubled).ok()?;
    (further.value <= current.value).then(|| Error::MonotoneLikelihood {
        covariate: covariates[k].clone(),
        magnitude: beta[k].abs(),
    })
}

fn require_events(design: &Design) -> Result<()> {
    if design.n_events() == 0 {
        Err(Error::NoEvents)
    } else {
        Ok(())
    }
}

fn all_covariates(dataset: &Dataset) -> Vec<String> {
    dataset.covariate_names().to_vec()
}

/// Negative Breslow log partial likelihood over all covariates of `dataset`,
/// with its exact gradient and Hessian.
pub fn neg_log_partial_likelihood(dataset: &Dataset, beta: &[f64]) -> Result<Objective> {
    neg_log_partial_likelihood_with(dataset, &all_covariates(dataset), beta)
}

pub fn neg_log_partial_likelihood_with(
    dataset: &Dataset,
    covariates: &[String],
    beta: &[f64],
) -> Result<Objective> {
    if beta.len() != covariates.len() {
        return Err(invalid(format!(
            "beta has {} entries for {} covariates",
            beta.len(),
            covariates.len()
        )));
    }
    let design = Design::new(dataset, covariates)?;
    require_events(&design)?;
    design.objective(beta)
}

/// Breslow cumulative baseline hazard at `beta`, referenced to all-zero covariates.
pub fn breslow_baseline(dataset: &Dataset, beta: &[f64]) -> Result<StepFunction> {
    breslow_baseline_with(dataset, &all_covariates(dataset), beta)
}

pub fn breslow_baseline_with(
    dataset: &Dataset,
    covariates: &[String],
    beta: &[f64],
) -> Result<StepFunction> {
    if beta.len() != covariates.len() {
        return Err(invalid("beta dimension does not match the covariates"));
    }
    let design = Design::new(dataset, covariates)?;
    require_events(&design)?;
    design.breslow(beta, &vec![0.0; beta.len()])
}

pub fn fit_cox(dataset: &Dataset, options: CoxOptions) -> Result<CoxFit> {
    fit_cox_with(dataset, &all_covariates(dataset), options)
}

pub fn fit_cox_with(
    dataset: &Dataset,
    covariates: &[String],
    options: CoxOptions,
) -> Result<CoxFit> {
    if covariates.is_empty() {
        return Err(invalid("at least one covariate is required"));
    }
    let design = Design::new(dataset, covariates)?;
    require_events(&design)?;
    for (k, name) in covariates.iter().enumerate() {
        let first = design.cov[k];
        if (0..design.n()).all(|i| design.row(i)[k] == first) {
            return Err(Error::DegenerateCovariate(name.clone()));
        }
    }

    let p = covariates.len();
    let mut beta = vec![0.0; p];
    let mut current = design.objective(&beta)?;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_relative_change = f64::INFINITY;
    let mut objective_trace = vec![current.value];

    while iterations < options.max_iter {
        let step = match newton_step(&current) {
            Ok(step) => step,
            Err(e) => {
                return Err(diverging_coefficient(&design, covariates, &beta, &current).unwrap_or(e))
            }
        };
        let step_norm = max_norm(&step);
        let beta_scale = 1.0 + max_norm(&beta);
        // A vanishing score with a non-vanishing Newton step is a flat ridge
        // (coefficient running off to infinity), not an optimum.
        if max_norm(&current.gradient) <= options.tol && step_norm <= STEP_TOL * beta_scale {
            converged = true;
            break;
        }
        iterations += 1;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=30 {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b - scale * s).collect();
            if let Ok(obj) = design.objective(&candidate) {
                // Near the optimum the decrease drops below the rounding noise of the
                // objective; there a shrinking score is the only usable signal.
                let noise = OBJECTIVE_NOISE * current.value.abs();
                let improves = obj.value < current.value
                    || (obj.value <= current.value + noise
                        && max_norm(&obj.gradient) < max_norm(&current.gradient));
                if improves {
                    accepted = Some((candidate, obj));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((next_beta, next)) = accepted else {
            // No representable decrease left: we are at the floating-point floor.
            if step_norm > RIDGE_STEP * beta_scale {
                let k = argmax_abs(&step);
                return Err(Error::MonotoneLikelihood {
                    covariate: covariates[k].clone(),
                    magnitude: beta[k].abs(),
                });
            }
            converged = last_relative_change <= options.tol;
            break;
        };
        if let Some(k) = next_beta.iter().position(|b| b.abs() > 50.0) {
            return Err(Error::MonotoneLikelihood {
                covariate: covariates[k].clone(),
                magnitude: next_beta[k].abs(),
            });
        }
        last_relative_change = (current.value - next.value) / current.value.abs().max(1e-300);
        beta = next_beta;
        current = next;
        objective_trace.push(current.value);
    }

    let covariance = invert(&current.hessian)?;
    let baseline_x0 = vec![0.0; p];
    let baseline_cumhaz = design.breslow(&beta, &baseline_x0)?;
    Ok(CoxFit {
        covariate_names: covariates.to_vec(),
        beta,
        baseline_cumhaz,
        covariance,
        iterations,
        final_score_norm: max_norm(&current.gradient),
        converged,
        baseline_x0,
        neg_log_partial_likelihood: current.value,
        objective_trace,
        n_subjects: design.n(),
        n_events: design.n_events(),
    })
}

const STEP_TOL: f64 = 1e-6;
const RIDGE_STEP: f64 = 1e-3;
const OBJECTIVE_NOISE: f64 = 1e-12;

fn argmax_abs(v: &[f64]) -> usize {
    (0..v.len()).fold(
        0,
        |best, k| if v[k].abs() > v[best].abs() { k } else { best },
    )
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows.len();
    DMatrix::from_fn(p, p, |i, j| rows[i][j])
}

fn newton_step(obj: &Objective) -> Result<Vec<f64>> {
    let h = to_matrix(&obj.hessian);
    let g = DVector::from_column_slice(&obj.gradient);
    let chol = h.cholesky().ok_or_else(|| {
        Error::SingularInformation(
            "Hessian is not positive definite during Newton iteration".into(),
        )
    })?;
    Ok(chol.solve(&g).iter().copied().collect())
}

fn invert(hessian: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let p = hessian.len();
    let inv = to_matrix(hessian)
        .cholesky()
        .ok_or_else(|| {
            Error::SingularInformation("information matrix is not positive definite".into())
        })?
        .inverse();
    Ok((0..p)
        .map(|i| (0..p).map(|j| inv[(i, j)]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{Provenance, SubjectRecord};

    fn dataset(rows: &[(f64, bool, f64)]) -> Dataset {
        let records = rows
            .iter()
            .map(|&(t, e, x)| SubjectRecord::new(t, e, vec![x], vec![]))
            .collect();
        Dataset::new(records, Provenance::InMemory).unwrap()
    }

    fn three_subjects() -> Dataset {
        dataset(&[(1.0, true, 1.0), (2.0, true, 0.0), (3.0, true, 1.0)])
    }

    #[test]
    fn null_likelihood_is_log_of_risk_set_sizes() {
        let obj = neg_log_partial_likelihood(&three_subjects(), &[0.0]).unwrap();
        assert!((obj.value - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_subject_likelihood_is_zero() {
        let ds = dataset(&[(4.0, true, 2.0)]);
        for beta in [-3.0, 0.0, 1.7] {
            assert_eq!(neg_log_partial_likelihood(&ds, &[beta]).unwrap().value, 0.0);
        }
    }

    #[test]
    fn no_events_is_an_error() {
        let ds = dataset(&[(1.0, false, 1.0), (2.0, false, 0.0)]);
        assert!(matches!(
            neg_log_partial_likelihood(&ds, &[0.0]),
            Err(Error::NoEvents)
        ));
        assert!(matches!(
            fit_cox(&ds, CoxOptions::default()),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn tied_events_share_the_risk_set() {
        // two tied events among three at risk, then one alone: Breslow gives
        // 2·ln 3 + ln 1 at beta = 0
        let ds = dataset(&[(1.0, true, 0.0), (1.0, true, 1.0), (2.0, true, 0.5)]);
        let obj = neg_log_partial_likelihood(&ds, &[0.0]).unwrap();
        assert!((obj.value - 2.0 * 3f64.ln()).abs() < 1e-12);
        let h = breslow_baseline(&ds, &[0.0]).unwrap();
        assert_eq!(h.knots(), [1.0, 2.0]);
        assert!((h.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((h.eval(2.0) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn three_subject_fixture_matches_grid_search() {
        let ds = three_subjects();
        let fit = fit_cox(&ds, CoxOptions::default()).unwrap();
        // grid search of the partial likelihood over [-3, 3], step 1e-4
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=60_000 {
            let b = -3.0 + k as f64 * 1e-4;
            let v = neg_log_partial_likelihood(&ds, &[b]).unwrap().value;
            if v < best.0 {
                best = (v, b);
            }
        }
        assert!((best.1 - (-0.5 * 2f64.ln())).abs() <= 1e-4);
        assert!(
            (fit.beta[0] - (-0.5 * 2f64.ln())).abs() < 1e-9,
            "{:?}",
            fit.beta
        );
        assert!(fit.converged);
        assert!(fit.final_score_norm <= 1e-9);
    }

    #[test]
    fn nelson_aalen_at_null_beta() {
        let h = breslow_baseline(&three_subjects(), &[0.0]).unwrap();
        assert_eq!(h.eval(1.0), 1.0 / 3.0);
        assert_eq!(h.eval(2.0), 1.0 / 3.0 + 1.0 / 2.0);
        assert_eq!(h.eval(3.0), 1.0 / 3.0 + 1.0 / 2.0 + 1.0);
        assert_eq!(h.eval(0.5), 0.0);
        assert_eq!(h.eval(2.5), h.eval(2.0));
    }

    #[test]
    fn single_event_among_censored() {
        let mut rows = vec![(1.0, true, 0.3)];
        for k in 0..9 {
            rows.push((2.0 + k as f64, false, k as f64));
        }
        let h = breslow_baseline(&dataset(&rows), &[0.0]).unwrap();
        assert_eq!(h.eval(1.0), 1.0 / 10.0);
    }

    #[test]
    fn constant_covariate_is_degenerate() {
        let ds = dataset(&[(1.0, true, 0.5), (2.0, false, 0.5), (3.0, true, 0.5)]);
        match fit_cox(&ds, CoxOptions::default()) {
            Err(Error::DegenerateCovariate(name)) => assert_eq!(name, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn separable_data_fails_loudly() {
        // every event has a larger x than everyone still at risk
        let ds = dataset(&[
            (1.0, true, 3.0),
            (2.0, true, 2.0),
            (3.0, true, 1.0),
            (4.0, false, 0.0),
        ]);
        match fit_cox(&ds, CoxOptions::default()) {
            Err(Error::MonotoneLikelihood { covariate, .. }) => assert_eq!(covariate, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn max_iter_exceeded_reports_not_converged() {
        let ds = dataset(&[
            (1.0, true, 1.0),
            (2.0, true, 0.0),
            (3.0, true, 1.0),
            (4.0, false, 2.0),
        ]);
        let fit = fit_cox(
            &ds,
            CoxOptions {
                tol: 1e-9,
                max_iter: 1,
            },
        )
        .unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn prediction_examples() {
        let fit = fit_cox(&three_subjects(), CoxOptions::default()).unwrap();
        assert_eq!(fit.linear_predictor(&[0.0]).unwrap(), 0.0);
        assert_eq!(
            fit.predict_cumhaz(&[0.0], 2.0).unwrap(),
            fit.baseline_cumhaz.eval(2.0)
        );
        assert_eq!(fit.predict_cumhaz(&[1.0], 0.5).unwrap(), 0.0);
        assert!(fit.linear_predictor(&[1.0, 2.0]).is_err());
        assert!(fit.predict_cumhaz(&[0.0], -1.0).is_err());

        let mut doubled = fit.clone();
        doubled.beta = vec![2f64.ln()];
        let h = doubled.baseline_cumhaz.eval(3.0);
        assert_eq!(
            doubled.predict_cumhaz(&[1.0], 3.0).unwrap(),
            2f64.ln().exp() * h
        );
        assert!((doubled.predict_cumhaz(&[1.0], 3.0).unwrap() - 2.0 * h).abs() <= 1e-15 * h);
    }

    #[test]
    fn rebaselining_preserves_predictions() {
        let fit = fit_cox(
            &dataset(&[
                (1.0, true, 1.0),
                (2.0, true, 0.0),
                (3.0, true, 1.0),
                (3.5, false, 0.2),
            ]),
            CoxOptions::default(),
        )
        .unwrap();
        let moved = fit.with_baseline(vec![1.0]).unwrap();
        assert_eq!(moved.linear_predictor(&[1.0]).unwrap(), 0.0);
        for (c, t) in [(0.0, 1.0), (1.0, 2.0), (0.3, 3.0)] {
            let a = fit.predict_cumhaz(&[c], t).unwrap();
            let b = moved.predict_cumhaz(&[c], t).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn step_function_validation() {
        assert!(StepFunction::new(vec![1.0, 1.0], vec![0.1, 0.2]).is_err());
        assert!(StepFunction::new(vec![1.0, 2.0], vec![0.2, 0.1]).is_err());
        assert!(StepFunction::new(vec![1.0], vec![0.1, 0.2]).is_err());
        let f = StepFunction::new(vec![1.0, 2.0], vec![0.1, 0.3]).unwrap();
        assert_eq!(f.eval(0.999), 0.0);
        assert_eq!(f.eval(1.0), 0.1);
        assert_eq!(f.eval(1.999), 0.1);
        assert_eq!(f.eval(2.0), 0.3);
        assert_eq!(f.eval(100.0), 0.3);
    }
}
