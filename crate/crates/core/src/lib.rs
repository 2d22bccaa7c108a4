//! Band-constraint Lp-norm (BCLP) projection optimization for tomographic
//! volumetric additive manufacturing.
//!
//! A sinogram of areal doses is optimized so that the volumetric dose it
//! delivers, mapped through a material response model, lands inside a
//! per-voxel tolerance band around a response target.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar for the common cases.

pub mod bclp;
pub mod error;
pub mod grid;
pub mod init;
pub mod io;
pub mod metrics;
pub mod optimize;
pub mod propagation;
pub mod response;
pub mod scalar;
pub mod schemes;

pub use bclp::{
    composite_loss, loss, loss_and_gradient, loss_gradient, violation_set, LossReport, ProblemSpec,
    WeightSchedule,
};
pub use error::{Error, Result};
pub use grid::{disk_mask, field_stats, inscribed_disk_mask, make_grid, Field, FieldStats, GridSpec};
pub use init::{analytic_init, lsq_init, ram_lak_filter, FilterKind};
pub use metrics::{eval_metric, MetricKind, MetricSpec, MetricValue};
pub use optimize::{
    converged, pgd_step, project_feasible, run, FeasibleSet, OptimizerConfig, QuantizeMode, RunRecord,
    Termination,
};
pub use propagation::{
    field_inner, field_norm, memory_estimate, operator_norm_sq, Propagation, Propagator, Sinogram,
    SinogramSpec, SparseOperator,
};
pub use response::{LogisticParams, ResponseModel, ResponseVariant};
pub use scalar::Scalar;
pub use schemes::{
    dm_preset, erode, osmo_preset, osmo_reference_step, pm_preset, OsmoState, PmParams, SchemeName,
    SchemePreset,
};

pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Sinogram64 = Sinogram<f64>;
pub type Sinogram32 = Sinogram<f32>;
pub type Propagator64 = Propagator<f64>;
pub type Propagator32 = Propagator<f32>;
pub type SparseOperator64 = SparseOperator<f64>;
pub type SparseOperator32 = SparseOperator<f32>;
pub type ResponseModel64 = ResponseModel<f64>;
pub type ResponseModel32 = ResponseModel<f32>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type ProblemSpec32 = ProblemSpec<f32>;
pub type RunRecord64 = RunRecord<f64>;
pub type RunRecord32 = RunRecord<f32>;
