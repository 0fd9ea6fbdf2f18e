//! Pel-recursive optical flow with a kurtosis-adaptive mixed-norm estimator.
//!
//! Each pixel's displacement is refined by minimizing a convex blend of the
//! squared and fourth-power norms of the linearized brightness-constancy
//! residuals,
//!
//! ```text
//! J(u) = (1 - gamma) ||z - G u||_2^2 + gamma ||z - G u||_4^4,
//! ```
//!
//! where the blend weight `gamma` is driven by the excess kurtosis of the
//! local residuals: heavy-tailed (super-Gaussian) errors push the estimate
//! toward the robust-against-their-tails squared norm, light-tailed
//! (sub-Gaussian) errors toward the fourth norm. No prior knowledge of the
//! noise distribution is needed.
//!
//! Modules:
//! - [`image`]: PGM images, bilinear sampling, gradients, frame differences,
//!   backward warping.
//! - [`noise`]: seeded Gaussian / Laplacian / uniform / mixture noise,
//!   SNR-targeted degradation, quality metrics.
//! - [`hos`]: windowed kurtosis estimators and the kurtosis-to-gamma sigmoid.
//! - [`solver`]: the per-pixel mixed-norm solve.
//! - [`pelrec`]: the raster-scan engine, `.flo` files, color visualization.
//! - [`synth`]: synthetic sequences with exact ground-truth motion.
//! - [`cli`]: the experiment harness behind the `mnflow` binary.
//!
//! See the crate examples for runnable end-to-end demonstrations of each
//! capability.

pub mod cli;
pub mod hos;
pub mod image;
pub mod noise;
pub mod pelrec;
pub mod solver;
pub mod synth;

pub use hos::{gamma_of_kurtosis, GammaParams, KurtosisMode, KurtosisNormalization};
pub use image::{dfd, motion_compensate, Displacement, FlowField, Image, PixelCoord};
pub use noise::{degrade_to_snr, sample_noise, snr_between, NoiseFamily, NoiseSpec, SnrReport};
pub use pelrec::{
    estimate_flow, flow_to_color, read_flo, write_flo, Diagnostics, PelRecConfig, PredictionRule,
    Window, WindowShape,
};
pub use solver::{
    assemble, mixed_norm_cost, mixed_norm_gradient, solve_update, GammaSource, NormMode,
    ObservationSystem, SolverConfig, UpdateResult,
};
