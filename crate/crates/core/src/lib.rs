//! One-step CT segmentation from sinograms.
//!
//! A segmented slice is found by minimizing a QUBO whose energy equals the
//! squared difference between the measured sinogram and the forward
//! projection of a binary-encoded image. The crate provides the parallel-beam
//! projector, sinogram preprocessing, QUBO assembly, classical minimizers
//! (exhaustive search and simulated annealing) and a filtered back projection
//! + Otsu baseline for comparison.
//!
//! The data-parallel loops (system matrix construction, projection, QUBO
//! assembly, annealing restarts, FBP filtering) run on rayon when the
//! `parallel` feature is enabled (default) and sequentially otherwise; both
//! paths give bitwise identical results. See [`Execution`].

// `!(x > 0.0)` is used deliberately so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod image;
pub mod phantom;
pub mod preprocess;
pub mod projection;
pub mod qubo;
pub mod rng;
pub mod solver;

pub use baseline::{
    compare_segmentations, fbp_reconstruct, threshold_segment, Filter, SegmentationMetrics,
    ThresholdMethod,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{AttenuationSpec, ProjectionGeometry};
pub use image::{scale_binary, BinaryImage, GridImage};
pub use phantom::{generate_phantom, PhantomKind};
pub use preprocess::{
    add_noise, background_subtract, estimate_alpha, intensity_to_attenuation, normalize_columns,
    BackgroundRegion, Normalization,
};
pub use projection::{
    back_project, build_system_matrix, forward_project, reference_weight, Sinogram, SystemMatrix,
    WeightModel,
};
pub use qubo::{
    build_qubo, build_reconstruction_qubo, build_segmentation_qubo, decode, encode, energy,
    residual, Assignment, Encoding, EncodingSpec, QuboModel, VarLayout,
};
pub use solver::{
    brute_force, delta_energy, simulated_anneal, AnnealSchedule, ExactSolution, SolveResult,
};
