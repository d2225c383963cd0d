//! Sobol' sensitivity maps for multivariate outputs.
//!
//! Outputs are expanded on a truncated basis `y = mean + sum_k c_k phi_k`.
//! Pick-freeze estimation of the covariance-type matrices of the coefficients
//! then gives every output dimension's index as a ratio of two quadratic
//! forms (the *basis-derived* route), instead of one scalar estimate per
//! dimension (the *dimension-wise* route). Both routes are exposed and agree
//! to rounding on a shared sample.
//!
//! Typical flow:
//!
//! 1. [`sampling::sample_lhs_seeded`] a design of experiments and fit a
//!    [`basis::BasisExpansion`] on the snapshots;
//! 2. draw a [`sampling::PickFreezeDesign`] and build paired coefficient
//!    samples with [`pipeline::build_index_samples`];
//! 3. compute maps with [`sensmap::sensitivity_map_bd`] (or
//!    [`sensmap::sm_dimension_wise`]), scalar summaries with
//!    [`sensmap::gsi_for_sample`], and bands with [`bootstrap`].

pub mod basis;
pub mod bench;
pub mod bootstrap;
pub mod cost;
pub mod error;
pub mod io;
pub mod pf;
pub mod pipeline;
pub mod sampling;
pub mod sensmap;
pub mod summation;
pub mod testbed;

pub use basis::{BasisExpansion, CoefficientSample, PcaTarget};
pub use bootstrap::{bootstrap_gsi, bootstrap_sm, BootstrapBands, BootstrapSpec, Resampling, ScalarBands, Summary};
pub use cost::{cost_bd, cost_dw, cost_ratio, ratio_lower_bound, CostModel, CostReport};
pub use error::{Error, Result};
pub use pf::{
    pf_scalar_closed, pf_scalar_second_order, pf_scalar_total_complement, pf_scalar_total_jansen, pf_vector,
    PairedOutputSample, ScalarIndexEstimate, SobolMatrixSet,
};
pub use pipeline::{build_index_samples, CoefficientSource, ModelOutputs, ProjectedModel};
pub use sampling::{DesignTag, IndexKind, IndexSet, InputSpace, PickFreezeDesign, Uniform};
pub use sensmap::{
    gsi, gsi_for_sample, max_relative_difference, q_squared, sensitivity_map_bd, sm_basis_derived,
    sm_dimension_wise, IndexSample, Method, SensitivityMap,
};
pub use testbed::{brute_force_sobol, parse_model, AdditiveModel, AnalyticModel, Campbell2d, GridSpec, ProductModel};
