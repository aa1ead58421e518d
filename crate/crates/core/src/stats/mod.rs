//! Numerical primitives shared by the estimators and the simulators.

mod quadrature;
mod rng;

pub use quadrature::{gauss_legendre, integrate};
pub use rng::{
    draw_bernoulli, draw_normal, draw_uniform, inverse_normal_cdf, unit_exponential, RngStream,
};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};

/// A normal distribution N(mean, sd²); `sd == 0` is a point mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: f64,
    pub sd: f64,
}

impl GaussianSpec {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        let spec = Self { mean, sd };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mean", self.mean)?;
        ensure_finite("sd", self.sd)?;
        if self.sd < 0.0 {
            return Err(invalid(format!("sd must be nonnegative, got {}", self.sd)));
        }
        Ok(())
    }

    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        (-0.5 * z * z).exp() / (self.sd * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// E[exp(beta·X)] for X ~ N(mean, sd²): `exp(beta·mean + sd²·beta²/2)`.
pub fn gaussian_exponential_moment(beta: f64, spec: GaussianSpec) -> Result<f64> {
    ensure_finite("beta", beta)?;
    spec.validate()?;
    Ok((beta * spec.mean + 0.5 * spec.sd * spec.sd * beta * beta).exp())
}

/// Least-squares line `z ≈ intercept + alpha·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub alpha: f64,
    pub intercept: f64,
    /// Residual standard deviation, denominator n − 2.
    pub sigma_z: f64,
    /// Standard error of `alpha`.
    pub alpha_se: f64,
}

impl OlsFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.alpha * x
    }
}

pub fn ols_fit(x: &[f64], z: &[f64]) -> Result<OlsFit> {
    if x.len() != z.len() {
        return Err(invalid(format!(
            "length mismatch: x has {} values, z has {}",
            x.len(),
            z.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(invalid(format!(
            "regression needs at least 3 points, got {n}"
        )));
    }
    if x.iter().chain(z).any(|v| !v.is_finite()) {
        return Err(invalid("regression inputs must be finite"));
    }
    let nf = n as f64;
    let x_mean = x.iter().sum::<f64>() / nf;
    let z_mean = z.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxz) = (0.0, 0.0);
    for (&xi, &zi) in x.iter().zip(z) {
        let dx = xi - x_mean;
        sxx += dx * dx;
        sxz += dx * (zi - z_mean);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateCovariate("x".into()));
    }
    let alpha = sxz / sxx;
    let intercept = z_mean - alpha * x_mean;
    let ssr: f64 = x
        .iter()
        .zip(z)
        .map(|(&xi, &zi)| {
            let r = zi - intercept - alpha * xi;
            r * r
        })
        .sum();
    let sigma_z = (ssr / (nf - 2.0)).sqrt();
    Ok(OlsFit {
        alpha,
        intercept,
        sigma_z,
        alpha_se: sigma_z / sxx.sqrt(),
    })
}

/// Sample mean and standard deviation (denominator n − 1).
pub fn empirical_moments(sample: &[f64]) -> Result<GaussianSpec> {
    let n = sample.len();
    if n < 2 {
        return Err(invalid(format!("moments need at least 2 values, got {n}")));
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let ss: f64 = sample.iter().map(|v| (v - mean) * (v - mean)).sum();
    let spec = GaussianSpec {
        mean,
        sd: (ss / (n as f64 - 1.0)).sqrt(),
    };
    spec.validate()?;
    Ok(spec)
}
