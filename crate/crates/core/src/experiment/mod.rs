//! Problem generators, perturbation harness, oracles and table runners.

pub mod generators;
pub mod oracle;
pub mod perturb;
pub mod rng;
pub mod tables;
pub mod trial;

pub use generators::{gen_gap_controlled, gen_intercept, gen_transfer_function, InterceptMode};
pub use oracle::finite_difference_jacobian;
pub use perturb::{eps_measures, perturb_entrywise, perturb_structured, EpsMeasures};
pub use rng::ExperimentRng;
pub use tables::{table1, table2, table3, table4, TableConfig, TableReport};
pub use trial::{run_bound_trial, run_first_order_trial, BoundAnalysis, BoundTrialSpec, TrialRecord};
