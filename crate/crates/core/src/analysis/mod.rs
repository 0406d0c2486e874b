//! From ghost images to the quantitative results: correlation maps,
//! visibility fits, Bell parameters, κ estimates and the local-hidden-variable
//! bound.

mod bell;
mod correlation;
mod fringe;
mod kappa;
mod lhv;
mod report;

pub use bell::{bell_s_chsh, bell_s_chsh_raw, bell_s_freedman, quantum_freedman_s, sd_violation, CurvePoint, FreedmanResult};
pub use correlation::{c_marginal, correlation_map, CorrelationMap};
pub use fringe::{fringe_fit, pixel_phasors, AverageAxis, FringeFit, FringePoint};
pub use kappa::{fit_gaussian, kappa_fit, GaussianFit, KappaFit};
pub use lhv::{enumerate_strategies, lhv_bound_oracle, LhvBound, Strategy};
pub use report::{parse_report, BellReport, ParsedReport};
