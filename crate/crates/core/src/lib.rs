//! Modeling human task-duration uncertainty for human-robot teams.
//!
//! The crate fits heavy-tailed duration distributions by maximum likelihood
//! ([`fitting`]), ranks them by Anderson-Darling, AIC and BIC
//! ([`selection`]), emits diagnostic plot data ([`reporting`]), simulates
//! the collaborative packing task ([`sim`]) and chooses robot dispatch
//! times against a fitted duration model ([`dispatch`]).

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod dispatch;
pub mod distributions;
pub mod error;
pub mod fitting;
pub mod par;
pub mod quadrature;
pub mod reporting;
pub mod selection;
pub mod sim;
pub mod special;

pub use dataset::{empirical_summary, Dataset, Summary};
pub use distributions::{DurationModel, Family, FamilyParams};
pub use error::{Error, Result};
pub use fitting::{fit_mle, moment_init, FitResult};
pub use par::Execution;
pub use selection::{anderson_darling, compare_models, ComparisonTable, Criterion, FitReport};
pub use dispatch::{expected_cost, optimal_dispatch, schedule_session, CostSpec, DispatchPlan};
pub use sim::{run_batch, run_session, HumanModel, Item, OrderSpec, SessionTrace, SimConfig};
