//! Causal estimators for rare-disease proportional-hazards studies.
//!
//! * [`stats`]: seeded random streams and small numerical primitives.
//! * [`scm`]: backdoor and frontdoor structural models that simulate cohorts.
//! * [`coxph`]: Breslow partial likelihood, Newton–Raphson, baseline hazard.
//! * [`backdoor`]: standardization factor, interventional incidence and hazard,
//!   causal relative risk, population attributable fraction.
//! * [`frontdoor`]: mediator-based estimators under hidden confounding.
//! * [`oracle`]: brute-force do-interventions on the structural models.

pub mod backdoor;
pub mod coxph;
pub mod error;
pub mod frontdoor;
pub mod oracle;
pub mod scm;
pub mod stats;

pub use error::{Error, Result};
