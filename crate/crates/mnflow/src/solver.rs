//! Per-pixel mixed-norm estimation.
//!
//! A neighborhood of displaced-frame-difference observations is linearized
//! into `z = G u + n` (one row per neighborhood pixel, two unknowns), and the
//! displacement update `u` is found by steepest descent on the mixed-norm
//! functional
//!
//! ```text
//! J(u) = (1 - gamma) * ||z - G u||_2^2 + gamma * ||z - G u||_4^4
//! ```
//!
//! `gamma = 0` is the least-mean-squares criterion, `gamma = 1` the
//! least-mean-fourth criterion, and the adaptive mode re-derives `gamma`
//! every iteration from the kurtosis of the current residuals.

use thiserror::Error;

use crate::hos::{
    excess_kurtosis_or_neutral, gamma_of_kurtosis, GammaParams, KurtosisMode, KurtosisNormalization,
};
use crate::image::{dfd, Displacement, Image, PixelCoord};

/// Regularizer for the curvature-scaled step size.
const BETA_EPSILON: f64 = 1e-8;

/// Maximum number of step halvings before the iteration is declared stuck.
const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("observation window must contain at least 2 points, got {0}")]
    WindowTooSmall(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite arithmetic encountered (divergent configuration)")]
    NonFinite,
}

/// The stacked linearized observation system for one working point.
///
/// `z` holds the projected brightness-change observations, signed so that
/// `z = G u + n` holds for the true update `u` (each entry is the negated
/// displaced frame difference at the prediction). `g` stacks the spatial
/// gradients of the previous frame at the displaced neighborhood positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSystem {
    pub z: Vec<f64>,
    pub g: Vec<[f64; 2]>,
    pub coords: Vec<PixelCoord>,
}

impl ObservationSystem {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Residual vector `z - G u`.
    pub fn residuals(&self, u: [f64; 2]) -> Vec<f64> {
        self.z
            .iter()
            .zip(&self.g)
            .map(|(&z, g)| z - g[0] * u[0] - g[1] * u[1])
            .collect()
    }

    /// Squared Frobenius norm of `G`; bounds the curvature of the quadratic
    /// part of the functional.
    pub fn frobenius_sq(&self) -> f64 {
        self.g.iter().map(|g| g[0] * g[0] + g[1] * g[1]).sum()
    }
}

/// Build the observation system for working point `r` at prediction `d_pred`.
///
/// For each offset in `window`, the observation is taken at `r + offset` and
/// the gradient row at the displaced position `r + offset - d_pred` in the
/// previous frame.
pub fn assemble(
    frame_k: &Image,
    frame_km1: &Image,
    r: PixelCoord,
    d_pred: Displacement,
    window: &[(i32, i32)],
) -> Result<ObservationSystem, SolverError> {
    if window.len() < 2 {
        return Err(SolverError::WindowTooSmall(window.len()));
    }
    let mut z = Vec::with_capacity(window.len());
    let mut g = Vec::with_capacity(window.len());
    let mut coords = Vec::with_capacity(window.len());
    for &(ox, oy) in window {
        let rj = PixelCoord::new(r.x + f64::from(ox), r.y + f64::from(oy));
        z.push(-dfd(frame_k, frame_km1, rj, d_pred));
        let displaced = rj - d_pred;
        let (gx, gy) = frame_km1.spatial_gradient(displaced.x, displaced.y);
        g.push([gx, gy]);
        coords.push(rj);
    }
    Ok(ObservationSystem { z, g, coords })
}

/// Which norm the per-pixel solve minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    /// Pure squared-error criterion (`gamma = 0`).
    Lms,
    /// Pure fourth-power criterion (`gamma = 1`).
    Lmf,
    /// Kurtosis-driven blend, re-estimated from the data.
    #[default]
    Adaptive,
}

impl NormMode {
    pub fn label(&self) -> &'static str {
        match self {
            NormMode::Lms => "lms",
            NormMode::Lmf => "lmf",
            NormMode::Adaptive => "adaptive",
        }
    }
}

/// Per-pixel solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Dimensionless step scale; the effective step is
    /// `beta0 / (1e-8 + ||G||_F^2)`.
    pub beta0: f64,
    pub gamma_params: GammaParams,
    pub mode: NormMode,
    pub max_iters: usize,
    /// Stop when the update norm falls below this (pixels).
    pub tol: f64,
    pub kurtosis_mode: KurtosisMode,
    pub kurtosis_normalization: KurtosisNormalization,
    /// Window length for intensity-mode kurtosis.
    pub kurtosis_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            gamma_params: GammaParams::default(),
            mode: NormMode::Adaptive,
            max_iters: 50,
            tol: 1e-4,
            kurtosis_mode: KurtosisMode::Residual,
            kurtosis_normalization: KurtosisNormalization::SampleExcess,
            kurtosis_window: 5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(SolverError::InvalidConfig("beta0 must be positive"));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolverError::InvalidConfig("tol must be positive"));
        }
        if !self.gamma_params.is_valid() {
            return Err(SolverError::InvalidConfig(
                "gamma parameters must be positive",
            ));
        }
        if self.kurtosis_window < 2 {
            return Err(SolverError::InvalidConfig(
                "kurtosis window must be at least 2",
            ));
        }
        Ok(())
    }

    /// The gamma source implied by the configured mode, with no pooled
    /// residual context. The scan engine builds per-pixel sources itself so
    /// it can attach the causal residual pool (or a pinned intensity-window
    /// gamma).
    pub fn gamma_source(&self) -> GammaSource {
        match self.mode {
            NormMode::Lms => GammaSource::Fixed(0.0),
            NormMode::Lmf => GammaSource::Fixed(1.0),
            NormMode::Adaptive => GammaSource::ResidualKurtosis {
                params: self.gamma_params,
                normalization: self.kurtosis_normalization,
                context: Vec::new(),
            },
        }
    }
}

/// Supplies the norm-mixing parameter for each solver iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaSource {
    /// A constant gamma in `[0, 1]`.
    Fixed(f64),
    /// `gamma(kurtosis(context ++ residuals))`, re-evaluated every iteration;
    /// a degenerate window falls back to the neutral `chi = 0`.
    ///
    /// `context` holds residuals pooled from neighboring already-solved
    /// pixels. A 3x3 window alone gives only 9 samples, too few for the
    /// kurtosis sign to be reliable; the scan engine pools the residual
    /// vectors of the last few scanned pixels to stabilize it. An empty
    /// context estimates from the current residuals only.
    ResidualKurtosis {
        params: GammaParams,
        normalization: KurtosisNormalization,
        context: Vec<f64>,
    },
}

impl GammaSource {
    fn gamma(&self, residuals: &[f64]) -> f64 {
        match self {
            GammaSource::Fixed(g) => *g,
            GammaSource::ResidualKurtosis {
                params,
                normalization,
                context,
            } => {
                let chi = if context.is_empty() {
                    excess_kurtosis_or_neutral(residuals, *normalization)
                } else {
                    let pooled: Vec<f64> = context.iter().chain(residuals).copied().collect();
                    excess_kurtosis_or_neutral(&pooled, *normalization)
                };
                gamma_of_kurtosis(chi, params)
            }
        }
    }
}

/// Result of one per-pixel mixed-norm solve.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateResult {
    /// Displacement update relative to the prediction.
    pub u: Displacement,
    /// Iterations performed (`<= max_iters`).
    pub iters: usize,
    /// `J(u)` under the last iteration's gamma.
    pub final_cost: f64,
    /// Gamma used at each iteration.
    pub gamma_trace: Vec<f64>,
    pub converged: bool,
}

/// Mixed-norm functional `(1 - gamma) sum r_i^2 + gamma sum r_i^4` with
/// `r = z - G u`.
pub fn mixed_norm_cost(obs: &ObservationSystem, u: [f64; 2], gamma: f64) -> f64 {
    cost_of_residuals(&obs.residuals(u), gamma)
}

fn cost_of_residuals(residuals: &[f64], gamma: f64) -> f64 {
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    for &r in residuals {
        let r2 = r * r;
        s2 += r2;
        s4 += r2 * r2;
    }
    (1.0 - gamma) * s2 + gamma * s4
}

/// Gradient of the mixed-norm functional with gamma frozen:
/// `-2 (1 - gamma) G^T (z - G u) - 4 gamma G^T (z - G u)^3`
/// with the cube taken elementwise.
pub fn mixed_norm_gradient(obs: &ObservationSystem, u: [f64; 2], gamma: f64) -> [f64; 2] {
    let mut grad = [0.0, 0.0];
    for (&z, g) in obs.z.iter().zip(&obs.g) {
        let r = z - g[0] * u[0] - g[1] * u[1];
        let w = 2.0 * (1.0 - gamma) * r + 4.0 * gamma * r * r * r;
        grad[0] -= w * g[0];
        grad[1] -= w * g[1];
    }
    grad
}

/// Steepest-descent iteration on the mixed-norm functional.
///
/// Starts at `u = 0` (the update is measured relative to the prediction) and
/// applies
///
/// ```text
/// u <- u + beta * G^T [ (1 - gamma) I + 2 gamma P(u) ] (z - G u)
/// ```
///
/// with `P(u)` diagonal, `P_ii = (z_i - (G u)_i)^2`, which equals
/// `u - (beta / 2) * grad J(u)` for the frozen-gamma gradient. The step
/// `beta = beta0 / (1e-8 + ||G||_F^2)` is halved (up to 20 times) whenever it
/// would increase the current-gamma cost, so the iteration descends
/// monotonically for fixed gamma. In adaptive mode gamma is re-derived from
/// the residuals each iteration; if the drifting functional leaves the final
/// iterate worse than the start under the final gamma, the zero update is
/// returned instead.
pub fn solve_update(
    obs: &ObservationSystem,
    config: &SolverConfig,
    gamma_source: &GammaSource,
) -> Result<UpdateResult, SolverError> {
    config.validate()?;
    if obs.len() < 2 {
        return Err(SolverError::WindowTooSmall(obs.len()));
    }
    if let GammaSource::Fixed(g) = gamma_source {
        if !(0.0..=1.0).contains(g) {
            return Err(SolverError::InvalidConfig("fixed gamma must be in [0, 1]"));
        }
    }

    let beta = config.beta0 / (BETA_EPSILON + obs.frobenius_sq());
    let mut u = [0.0f64, 0.0f64];
    let mut gamma_trace = Vec::with_capacity(config.max_iters.min(64));
    let mut iters = 0;
    let mut converged = false;

    for _ in 0..config.max_iters {
        iters += 1;
        let residuals = obs.residuals(u);
        let gamma = gamma_source.gamma(&residuals);
        gamma_trace.push(gamma);
        let cost_here = cost_of_residuals(&residuals, gamma);
        if !cost_here.is_finite() {
            return Err(SolverError::NonFinite);
        }

        // Descent direction G^T [(1 - gamma) I + 2 gamma P] r = -grad J / 2.
        let mut dir = [0.0, 0.0];
        for (&r, g) in residuals.iter().zip(&obs.g) {
            let w = (1.0 - gamma) * r + 2.0 * gamma * r * r * r;
            dir[0] += w * g[0];
            dir[1] += w * g[1];
        }
        if !(dir[0].is_finite() && dir[1].is_finite()) {
            return Err(SolverError::NonFinite);
        }

        let mut step = beta;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = [u[0] + step * dir[0], u[1] + step * dir[1]];
            let cost_cand = mixed_norm_cost(obs, cand, gamma);
            if cost_cand.is_finite() && cost_cand <= cost_here {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            // No step length descends: stationary for this gamma.
            converged = true;
            break;
        };
        let delta = ((next[0] - u[0]).powi(2) + (next[1] - u[1]).powi(2)).sqrt();
        u = next;
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    let gamma_final = *gamma_trace.last().expect("at least one iteration ran");
    let mut final_cost = mixed_norm_cost(obs, u, gamma_final);
    let cost_at_zero = mixed_norm_cost(obs, [0.0, 0.0], gamma_final);
    if final_cost > cost_at_zero {
        // Only reachable when adaptive gamma drifted between iterations.
        u = [0.0, 0.0];
        final_cost = cost_at_zero;
        converged = false;
    }
    if !(u[0].is_finite() && u[1].is_finite() && final_cost.is_finite()) {
        return Err(SolverError::NonFinite);
    }

    Ok(UpdateResult {
        u: Displacement::new(u[0], u[1]),
        iters,
        final_cost,
        gamma_trace,
        converged,
    })
}
