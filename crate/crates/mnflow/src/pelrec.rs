//! Pel-recursive scan engine: causal displacement prediction, per-pixel
//! mixed-norm solves, clamping, and flow-field export (`.flo` files and a
//! color visualization).
//!
//! The scan is a single left-to-right, top-to-bottom pass. Each pixel's
//! prediction is formed only from already-finalized vectors, so the output is
//! reproducible pixel by pixel with no hidden lookahead.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::hos::{excess_kurtosis_or_neutral, gamma_of_kurtosis, KurtosisMode};
use crate::image::{dfd, Displacement, FlowField, Image, PixelCoord};
use crate::solver::{assemble, solve_update, GammaSource, NormMode, SolverConfig, SolverError};

/// Sentinel float at the head of a flow interchange file.
pub const FLO_SENTINEL: f32 = 202021.25;

#[derive(Debug, Error)]
pub enum PelRecError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("frames ({0}x{1}) are smaller than the {2}x{2} window")]
    FrameTooSmall(usize, usize, usize),
    #[error("invalid window: {0}")]
    InvalidWindow(&'static str),
    #[error("displacement clamp must be positive, got {0}")]
    InvalidClamp(f64),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Error)]
pub enum FlowIoError {
    #[error("bad sentinel {0}: not a flow file")]
    BadSentinel(f32),
    #[error("bad flow dimensions {0}x{1}")]
    BadDimensions(i32, i32),
    #[error("truncated flow file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Neighborhood geometry for the observation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowShape {
    /// Square window centered on the working point; side must be odd.
    Centered,
    /// Square window of already-scanned offsets ending at the working point.
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub side: usize,
    pub shape: WindowShape,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            side: 3,
            shape: WindowShape::Centered,
        }
    }
}

impl Window {
    pub fn centered(side: usize) -> Self {
        Self {
            side,
            shape: WindowShape::Centered,
        }
    }

    fn validate(&self) -> Result<(), PelRecError> {
        if self.side == 0 {
            return Err(PelRecError::InvalidWindow("window side must be >= 1"));
        }
        if self.shape == WindowShape::Centered && self.side.is_multiple_of(2) {
            return Err(PelRecError::InvalidWindow(
                "centered window side must be odd",
            ));
        }
        if self.side * self.side < 2 {
            return Err(PelRecError::InvalidWindow(
                "window must contain at least 2 points",
            ));
        }
        Ok(())
    }

    /// Window offsets in row-major order.
    pub fn offsets(&self) -> Vec<(i32, i32)> {
        let side = self.side as i32;
        let (lo, hi) = match self.shape {
            WindowShape::Centered => (-(side - 1) / 2, (side - 1) / 2),
            WindowShape::Causal => (-(side - 1), 0),
        };
        let mut offsets = Vec::with_capacity(self.side * self.side);
        for oy in lo..=hi {
            for ox in lo..=hi {
                offsets.push((ox, oy));
            }
        }
        offsets
    }
}

/// How the prediction `d_pred` for each pixel is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictionRule {
    /// Mean of the finalized west, north-west, north and north-east vectors
    /// that exist; `(0, 0)` when none do.
    #[default]
    CausalAverage,
    /// The west neighbor's vector.
    PreviousPixel,
    Zero,
}

/// Configuration of the full scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PelRecConfig {
    pub window: Window,
    /// Componentwise clamp on output vectors, in pixels.
    pub d_max: f64,
    pub prediction: PredictionRule,
    pub solver: SolverConfig,
}

impl Default for PelRecConfig {
    fn default() -> Self {
        Self {
            window: Window::default(),
            d_max: 5.0,
            prediction: PredictionRule::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// Aggregate scan statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub pixels: usize,
    pub mean_iters: f64,
    /// Mean over pixels of the final iteration's gamma.
    pub mean_gamma: f64,
    /// Mean |DFD| at zero displacement (plain frame difference).
    pub mean_abs_dfd_before: f64,
    /// Mean |DFD| at the estimated displacement.
    pub mean_abs_dfd_after: f64,
    /// Mean magnitude of the output vectors.
    pub mean_flow_magnitude: f64,
    pub converged_fraction: f64,
}

/// Causal prediction of the displacement at `(x, y)`.
///
/// `flow_so_far` must hold finalized vectors for every raster-earlier pixel;
/// later entries are never read.
pub fn predict_displacement(
    flow_so_far: &FlowField,
    x: usize,
    y: usize,
    rule: PredictionRule,
) -> Displacement {
    match rule {
        PredictionRule::Zero => Displacement::ZERO,
        PredictionRule::PreviousPixel => {
            if x > 0 {
                flow_so_far.get(x - 1, y)
            } else {
                Displacement::ZERO
            }
        }
        PredictionRule::CausalAverage => {
            let mut sum = Displacement::ZERO;
            let mut count = 0.0;
            if x > 0 {
                sum = sum + flow_so_far.get(x - 1, y);
                count += 1.0;
            }
            if y > 0 {
                if x > 0 {
                    sum = sum + flow_so_far.get(x - 1, y - 1);
                    count += 1.0;
                }
                sum = sum + flow_so_far.get(x, y - 1);
                count += 1.0;
                if x + 1 < flow_so_far.width() {
                    sum = sum + flow_so_far.get(x + 1, y - 1);
                    count += 1.0;
                }
            }
            if count > 0.0 {
                sum * (1.0 / count)
            } else {
                Displacement::ZERO
            }
        }
    }
}

/// Gamma for a pixel in intensity-window mode: kurtosis of the causal window
/// of `m` raster-order intensities ending at the working point.
fn intensity_window_gamma(frame_k: &Image, x: usize, y: usize, config: &SolverConfig) -> f64 {
    let idx = y * frame_k.width() + x;
    let m = config.kurtosis_window;
    let start = idx.saturating_sub(m - 1);
    let window = &frame_k.as_slice()[start..=idx];
    let chi = if window.len() >= 2 {
        excess_kurtosis_or_neutral(window, config.kurtosis_normalization)
    } else {
        0.0
    };
    gamma_of_kurtosis(chi, &config.gamma_params)
}

/// Residual vector of an already-finalized pixel, reconstructed from the
/// stored field: `z - G u` with `u` the stored vector minus the causal
/// prediction. Everything derives from the frames and raster-earlier flow
/// entries, so the kurtosis pool built from these stays reproducible pixel
/// by pixel.
fn finalized_residuals(
    frame_k: &Image,
    frame_km1: &Image,
    flow: &FlowField,
    x: usize,
    y: usize,
    config: &PelRecConfig,
    offsets: &[(i32, i32)],
) -> Result<Vec<f64>, PelRecError> {
    let d_pred = predict_displacement(flow, x, y, config.prediction);
    let obs = assemble(
        frame_k,
        frame_km1,
        PixelCoord::new(x as f64, y as f64),
        d_pred,
        offsets,
    )?;
    let u = flow.get(x, y) - d_pred;
    Ok(obs.residuals([u.dx, u.dy]))
}

/// Per-pixel gamma source: pure modes pin gamma, intensity-mode adaptation
/// pins the sigmoid of the causal intensity window, residual-mode adaptation
/// attaches the pooled residuals of the last `kurtosis_window - 1` pixels.
fn pixel_gamma_source(
    frame_k: &Image,
    x: usize,
    y: usize,
    config: &SolverConfig,
    pool: &std::collections::VecDeque<Vec<f64>>,
) -> GammaSource {
    match config.mode {
        NormMode::Lms => GammaSource::Fixed(0.0),
        NormMode::Lmf => GammaSource::Fixed(1.0),
        NormMode::Adaptive => match config.kurtosis_mode {
            KurtosisMode::IntensityWindow => {
                GammaSource::Fixed(intensity_window_gamma(frame_k, x, y, config))
            }
            KurtosisMode::Residual => GammaSource::ResidualKurtosis {
                params: config.gamma_params,
                normalization: config.kurtosis_normalization,
                context: pool.iter().flatten().copied().collect(),
            },
        },
    }
}

/// Estimate a dense flow field from `frame_km1` to `frame_k`.
///
/// Raster scan: predict, assemble, solve, clamp. Border working points use
/// the clamped sampler, so no pixels are skipped.
pub fn estimate_flow(
    frame_k: &Image,
    frame_km1: &Image,
    config: &PelRecConfig,
) -> Result<(FlowField, Diagnostics), PelRecError> {
    if !frame_k.same_dimensions(frame_km1) {
        return Err(PelRecError::DimensionMismatch(
            frame_k.width(),
            frame_k.height(),
            frame_km1.width(),
            frame_km1.height(),
        ));
    }
    config.window.validate()?;
    if frame_k.width() < config.window.side || frame_k.height() < config.window.side {
        return Err(PelRecError::FrameTooSmall(
            frame_k.width(),
            frame_k.height(),
            config.window.side,
        ));
    }
    if !(config.d_max > 0.0 && config.d_max.is_finite()) {
        return Err(PelRecError::InvalidClamp(config.d_max));
    }
    config.solver.validate()?;

    let width = frame_k.width();
    let height = frame_k.height();
    let offsets = config.window.offsets();
    let pool_residuals = config.solver.mode == NormMode::Adaptive
        && config.solver.kurtosis_mode == KurtosisMode::Residual;

    let mut flow = FlowField::zero(width, height);
    let mut pool: std::collections::VecDeque<Vec<f64>> = std::collections::VecDeque::new();
    let mut iters_sum = 0.0;
    let mut gamma_sum = 0.0;
    let mut dfd_before_sum = 0.0;
    let mut dfd_after_sum = 0.0;
    let mut flow_mag_sum = 0.0;
    let mut converged = 0usize;

    for y in 0..height {
        for x in 0..width {
            let r = PixelCoord::new(x as f64, y as f64);
            let d_pred = predict_displacement(&flow, x, y, config.prediction);
            let obs = assemble(frame_k, frame_km1, r, d_pred, &offsets)?;
            let source = pixel_gamma_source(frame_k, x, y, &config.solver, &pool);
            let result = solve_update(&obs, &config.solver, &source)?;
            let d = (d_pred + result.u).clamp_box(config.d_max);
            flow.set(x, y, d);

            if pool_residuals {
                pool.push_back(finalized_residuals(
                    frame_k, frame_km1, &flow, x, y, config, &offsets,
                )?);
                while pool.len() + 1 > config.solver.kurtosis_window {
                    pool.pop_front();
                }
            }

            iters_sum += result.iters as f64;
            gamma_sum += result.gamma_trace.last().copied().unwrap_or(0.0);
            dfd_before_sum += dfd(frame_k, frame_km1, r, Displacement::ZERO).abs();
            dfd_after_sum += dfd(frame_k, frame_km1, r, flow.get(x, y)).abs();
            flow_mag_sum += flow.get(x, y).norm();
            converged += usize::from(result.converged);
        }
    }

    let n = (width * height) as f64;
    let diagnostics = Diagnostics {
        pixels: width * height,
        mean_iters: iters_sum / n,
        mean_gamma: gamma_sum / n,
        mean_abs_dfd_before: dfd_before_sum / n,
        mean_abs_dfd_after: dfd_after_sum / n,
        mean_flow_magnitude: flow_mag_sum / n,
        converged_fraction: converged as f64 / n,
    };
    Ok((flow, diagnostics))
}

/// Write a flow field in the sentinel-202021.25 interchange layout:
/// sentinel f32, width i32, height i32, then row-major interleaved `(u, v)`
/// f32 pairs, all little-endian.
pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<(), FlowIoError> {
    let mut out = Vec::with_capacity(12 + flow.vectors().len() * 8);
    out.write_all(&FLO_SENTINEL.to_le_bytes())?;
    out.write_all(&(flow.width() as i32).to_le_bytes())?;
    out.write_all(&(flow.height() as i32).to_le_bytes())?;
    for &(u, v) in flow.vectors() {
        out.write_all(&u.to_le_bytes())?;
        out.write_all(&v.to_le_bytes())?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a flow field written by [`write_flo`].
pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField, FlowIoError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 {
        return Err(FlowIoError::Truncated {
            expected: 12,
            found: bytes.len(),
        });
    }
    let sentinel = f32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if sentinel != FLO_SENTINEL {
        return Err(FlowIoError::BadSentinel(sentinel));
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if width <= 0 || height <= 0 {
        return Err(FlowIoError::BadDimensions(width, height));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = 12 + width * height * 8;
    if bytes.len() < expected {
        return Err(FlowIoError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let mut vectors = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let at = 12 + i * 8;
        let u = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let v = f32::from_le_bytes(bytes[at + 4..at + 8].try_into().unwrap());
        vectors.push((u, v));
    }
    Ok(FlowField::from_vectors(width, height, vectors))
}

/// An 8-bit RGB image, used only for flow visualization.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    /// Interleaved RGB bytes, row-major.
    data: Vec<u8>,
}

impl RgbImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let at = (y * self.width + x) * 3;
        [self.data[at], self.data[at + 1], self.data[at + 2]]
    }

    /// Write as binary PPM (P6, maxval 255).
    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<(), io::Error> {
        let mut out = Vec::with_capacity(self.data.len() + 32);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.extend_from_slice(&self.data);
        fs::write(path, out)
    }
}

/// Map a flow field to colors: hue encodes direction, saturation encodes
/// magnitude relative to `max_mag` (clamped to 1), full value. The zero
/// vector maps to white. `max_mag = None` auto-scales to the field's largest
/// magnitude.
pub fn flow_to_color(flow: &FlowField, max_mag: Option<f64>) -> RgbImage {
    let scale = match max_mag {
        Some(m) => {
            assert!(m > 0.0, "max_mag must be positive");
            m
        }
        None => {
            let m = flow.max_magnitude();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let mut data = Vec::with_capacity(flow.width() * flow.height() * 3);
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            let d = flow.get(x, y);
            let mag = d.norm();
            let hue = d.dy.atan2(d.dx).rem_euclid(std::f64::consts::TAU);
            let sat = (mag / scale).clamp(0.0, 1.0);
            data.extend_from_slice(&hsv_to_rgb(hue, sat, 1.0));
        }
    }
    RgbImage {
        width: flow.width(),
        height: flow.height(),
        data,
    }
}

/// `hue` in radians, `sat` and `value` in [0, 1].
fn hsv_to_rgb(hue: f64, sat: f64, value: f64) -> [u8; 3] {
    let h = hue / std::f64::consts::TAU * 6.0;
    let c = value * sat;
    let xcomp = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let m = value - c;
    let (r, g, b) = match h {
        h if h < 1.0 => (c, xcomp, 0.0),
        h if h < 2.0 => (xcomp, c, 0.0),
        h if h < 3.0 => (0.0, c, xcomp),
        h if h < 4.0 => (0.0, xcomp, c),
        h if h < 5.0 => (xcomp, 0.0, c),
        _ => (c, 0.0, xcomp),
    };
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}
