//! Longitudinal Alzheimer's-disease trajectory simulator with ground-truth
//! counterfactual outcomes and a CATE benchmark harness.
//!
//! The numerical core in [`fitkit`] and the effect algebra in [`intervene`] are
//! generic over the scalar type; the pipeline modules work in `f64`.

pub mod bench;
pub mod cohort;
pub mod error;
pub mod estim;
pub mod fitkit;
pub mod genmodel;
pub mod graph;
pub mod intervene;
pub mod reference;
pub mod scalar;
pub mod sim;

pub use error::{Error, ExitCode};
pub use graph::CausalGraph;
pub use scalar::Real;

pub type LinearModel = fitkit::LinearGaussianModel<f64>;
pub type LogisticModel = fitkit::MultinomialLogisticModel<f64>;
pub type Gmm = fitkit::Gmm1D<f64>;
pub type Design = fitkit::DesignMatrix<f64>;
pub type Report = fitkit::FitReport<f64>;
pub type Effect = intervene::EffectSpec<f64>;
pub type ExactEffect = intervene::EffectSpec<num_rational::Rational64>;
