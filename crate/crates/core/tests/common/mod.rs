#![allow(dead_code)]

use causal_ph::scm::{
    BackdoorCoefficients, BaselineHazard, Coefficients, DagKind, Dataset, FrontdoorCoefficients,
    Provenance, ScenarioConfig, SubjectRecord, ZDist,
};

pub const REFERENCE_N: usize = 100_000;
pub const ORACLE_N: usize = 1_000_000;

pub fn backdoor(beta_x: f64, beta_z: f64) -> ScenarioConfig {
    ScenarioConfig {
        dag_kind: DagKind::Backdoor,
        n_subjects: REFERENCE_N,
        seed: 42,
        baseline_hazard: BaselineHazard::Exponential { rate: 0.002 },
        horizon_t: 10.0,
        censor_rate: 0.0,
        coefficients: Coefficients::Backdoor(BackdoorCoefficients {
            a_zx: 0.5,
            sigma_x: 1.0,
            beta_x,
            beta_z,
        }),
        z_dist: ZDist::StandardNormal,
    }
}

pub fn backdoor_reference() -> ScenarioConfig {
    backdoor(0.3, 0.4)
}

pub fn frontdoor(beta_u: f64) -> ScenarioConfig {
    ScenarioConfig {
        dag_kind: DagKind::Frontdoor,
        n_subjects: REFERENCE_N,
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
            beta_u,
        }),
        z_dist: ZDist::StandardNormal,
    }
}

pub fn frontdoor_reference() -> ScenarioConfig {
    frontdoor(0.7)
}

pub fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Small dataset from (time, event, x, z) rows.
pub fn rows(data: &[(f64, bool, f64, f64)]) -> Dataset {
    let records = data
        .iter()
        .map(|&(t, e, x, z)| SubjectRecord::new(t, e, vec![x], vec![z]))
        .collect();
    Dataset::new(records, Provenance::InMemory).unwrap()
}

pub fn rel_err(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth.abs()
}
