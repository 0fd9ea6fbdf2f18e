//! Higher-order statistics: windowed excess-kurtosis estimators and the
//! sigmoid that maps kurtosis to the norm-mixing parameter `gamma`.
//!
//! Excess kurtosis is zero for Gaussian data, positive for super-Gaussian
//! (e.g. Laplacian) and negative for sub-Gaussian (e.g. uniform) data. The
//! sigmoid turns that sign into a blend weight: heavy-tailed data pushes the
//! estimator toward the squared-error norm, light-tailed data toward the
//! fourth-power norm.

use thiserror::Error;

/// Centered windows whose RMS falls below this are treated as degenerate.
const DEGENERATE_RMS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HosError {
    #[error("kurtosis undefined: window is constant after mean removal")]
    DegenerateWindow,
    #[error("kurtosis window needs at least 2 values, got {0}")]
    WindowTooSmall(usize),
}

/// How the windowed fourth-moment ratio is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KurtosisNormalization {
    /// `m * sum(v^4) / sum(v^2)^2 - 3`: the sample excess kurtosis. This is
    /// dimensionless in the window size, so a Gaussian window of any length
    /// estimates ~0.
    #[default]
    SampleExcess,
    /// `sum(v^4) / sum(v^2)^2 - 3`: the bare moment ratio without the window
    /// factor. Kept for comparison; its value shrinks with window size.
    RawRatio,
}

/// What signal the per-pixel kurtosis is estimated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KurtosisMode {
    /// Kurtosis of the current solver residuals (the quantity the mixing
    /// parameter is meant to classify). Recomputed every iteration.
    #[default]
    Residual,
    /// Kurtosis of a causal window of raw image intensities ending at the
    /// working point. Constant over the per-pixel iterations.
    IntensityWindow,
}

/// A windowed kurtosis estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KurtosisEstimate {
    /// Excess kurtosis; `>= -2` for any real window.
    pub chi: f64,
    /// Number of samples the estimate was formed from.
    pub window: usize,
}

/// Windowed excess kurtosis of `values`.
///
/// The window is mean-centered first (the definition assumes a zero-mean
/// variable; raw intensities are not). Returns [`HosError::DegenerateWindow`]
/// when the centered window is numerically constant; callers that need a
/// total function substitute the Gaussian-neutral `chi = 0`.
pub fn excess_kurtosis_window(
    values: &[f64],
    normalization: KurtosisNormalization,
) -> Result<KurtosisEstimate, HosError> {
    let m = values.len();
    if m < 2 {
        return Err(HosError::WindowTooSmall(m));
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    for &v in values {
        let c = v - mean;
        let c2 = c * c;
        s2 += c2;
        s4 += c2 * c2;
    }
    if (s2 / m as f64).sqrt() <= DEGENERATE_RMS {
        return Err(HosError::DegenerateWindow);
    }
    let ratio = s4 / (s2 * s2);
    let chi = match normalization {
        KurtosisNormalization::SampleExcess => m as f64 * ratio - 3.0,
        KurtosisNormalization::RawRatio => ratio - 3.0,
    };
    Ok(KurtosisEstimate { chi, window: m })
}

/// Like [`excess_kurtosis_window`] but mapping degenerate windows to the
/// Gaussian-neutral `chi = 0`, keeping solvers total.
pub fn excess_kurtosis_or_neutral(values: &[f64], normalization: KurtosisNormalization) -> f64 {
    excess_kurtosis_window(values, normalization)
        .map(|e| e.chi)
        .unwrap_or(0.0)
}

/// Sample fourth cumulant `(1/n) sum(v^4) - 3 ((1/n) sum(v^2))^2` of the
/// mean-centered values (the unnormalized kurtosis).
pub fn fourth_cumulant(values: &[f64]) -> f64 {
    debug_assert!(values.len() >= 2, "fourth cumulant needs at least 2 values");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    for &v in values {
        let c = v - mean;
        let c2 = c * c;
        s2 += c2;
        s4 += c2 * c2;
    }
    s4 / n - 3.0 * (s2 / n) * (s2 / n)
}

/// Parameters of the kurtosis-to-gamma sigmoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    /// Sharpness: larger values steepen the transition toward a step.
    pub c: f64,
    /// Shift: larger values lower gamma pointwise.
    pub a: f64,
}

impl Default for GammaParams {
    fn default() -> Self {
        // chi = 0 maps to the balanced gamma = 0.5.
        Self { c: 1.0, a: 1.0 }
    }
}

impl GammaParams {
    pub fn new(c: f64, a: f64) -> Self {
        Self { c, a }
    }

    pub fn is_valid(&self) -> bool {
        self.c > 0.0 && self.c.is_finite() && self.a > 0.0 && self.a.is_finite()
    }
}

/// Norm-mixing parameter `gamma(chi) = exp(-c*chi) / (A + exp(-c*chi))`,
/// evaluated as `1 / (A * exp(c*chi) + 1)` so large `|c*chi|` cannot
/// overflow. The result is clamped strictly inside `(0, 1)`.
pub fn gamma_of_kurtosis(chi: f64, params: &GammaParams) -> f64 {
    debug_assert!(params.is_valid(), "gamma parameters must be positive");
    let gamma = 1.0 / (params.a * (params.c * chi).exp() + 1.0);
    gamma.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn alternating_window_hits_lower_bound() {
        for m in [2, 4, 6, 10] {
            let values: Vec<f64> = (0..m)
                .map(|i| if i % 2 == 0 { 0.7 } else { -0.7 })
                .collect();
            let est = excess_kurtosis_window(&values, KurtosisNormalization::SampleExcess).unwrap();
            assert!((est.chi + 2.0).abs() < 1e-12, "m={m} chi={}", est.chi);
            assert_eq!(est.window, m);
        }
    }

    #[test]
    fn constant_window_is_degenerate() {
        let values = vec![0.3; 5];
        assert_eq!(
            excess_kurtosis_window(&values, KurtosisNormalization::SampleExcess),
            Err(HosError::DegenerateWindow)
        );
        assert_eq!(
            excess_kurtosis_or_neutral(&values, KurtosisNormalization::SampleExcess),
            0.0
        );
    }

    #[test]
    fn window_too_small() {
        assert_eq!(
            excess_kurtosis_window(&[1.0], KurtosisNormalization::SampleExcess),
            Err(HosError::WindowTooSmall(1))
        );
    }

    #[test]
    fn gaussian_stream_window_average_is_near_zero() {
        // Large windows keep the small-sample bias (-6/(m+1) for Gaussian
        // data) well inside the tolerance.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = 1000;
        let windows = 100;
        let mut acc = 0.0;
        for _ in 0..windows {
            let window: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            acc += excess_kurtosis_window(&window, KurtosisNormalization::SampleExcess)
                .unwrap()
                .chi;
        }
        let mean = acc / windows as f64;
        assert!(mean.abs() < 0.1, "mean windowed kurtosis {mean}");
    }

    #[test]
    fn raw_ratio_differs_by_window_factor() {
        let values = [0.1, -0.4, 0.9, -0.2, 0.5];
        let scaled = excess_kurtosis_window(&values, KurtosisNormalization::SampleExcess).unwrap();
        let raw = excess_kurtosis_window(&values, KurtosisNormalization::RawRatio).unwrap();
        assert!(((raw.chi + 3.0) * 5.0 - (scaled.chi + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn kurtosis_is_scale_invariant() {
        let values = [0.3, -1.2, 0.8, 0.05, -0.4, 2.1, -0.9];
        let base = excess_kurtosis_window(&values, KurtosisNormalization::SampleExcess)
            .unwrap()
            .chi;
        for s in [-3.0, 0.01, 17.5] {
            let scaled: Vec<f64> = values.iter().map(|v| v * s).collect();
            let chi = excess_kurtosis_window(&scaled, KurtosisNormalization::SampleExcess)
                .unwrap()
                .chi;
            assert!((chi - base).abs() < 1e-10, "scale {s}");
        }
    }

    #[test]
    fn fourth_cumulant_examples() {
        assert_eq!(fourth_cumulant(&[0.0; 8]), 0.0);
        let alternating: Vec<f64> = (0..10)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert!((fourth_cumulant(&alternating) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_balanced_at_zero_kurtosis() {
        for c in [0.2, 1.0, 8.0] {
            let g = gamma_of_kurtosis(0.0, &GammaParams::new(c, 1.0));
            assert!((g - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_at_minus_one() {
        let g = gamma_of_kurtosis(-1.0, &GammaParams::default());
        let e = std::f64::consts::E;
        assert!((g - e / (1.0 + e)).abs() < 1e-12);
        assert!((g - 0.731059).abs() < 1e-6);
    }

    #[test]
    fn gamma_vanishes_for_large_positive_kurtosis() {
        let g = gamma_of_kurtosis(50.0, &GammaParams::default());
        assert!(g < 1e-20);
        assert!(g > 0.0);
    }

    #[test]
    fn gamma_limits_are_reached_but_open() {
        let p = GammaParams::default();
        let lo = gamma_of_kurtosis(100.0, &p);
        let hi = gamma_of_kurtosis(-100.0, &p);
        assert!(lo > 0.0 && lo < 1e-12);
        assert!(hi < 1.0 && hi > 1.0 - 1e-12);
        // Extreme arguments stay strictly inside (0, 1).
        assert!(gamma_of_kurtosis(1e6, &p) > 0.0);
        assert!(gamma_of_kurtosis(-1e6, &p) < 1.0);
    }

    #[test]
    fn gamma_is_strictly_decreasing_in_chi() {
        let p = GammaParams::new(1.3, 0.7);
        let mut prev = f64::INFINITY;
        let mut chi = -20.0;
        while chi <= 20.0 {
            let g = gamma_of_kurtosis(chi, &p);
            assert!(g < prev, "gamma not decreasing at chi={chi}");
            prev = g;
            chi += 0.25;
        }
    }

    #[test]
    fn larger_c_steepens_the_transition() {
        let eps = 0.1;
        let mut prev_gap = 0.0;
        for c in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let p = GammaParams::new(c, 1.0);
            let gap = gamma_of_kurtosis(-eps, &p) - gamma_of_kurtosis(eps, &p);
            assert!(gap > prev_gap, "c={c}");
            prev_gap = gap;
        }
    }

    #[test]
    fn larger_a_lowers_gamma_pointwise() {
        for chi in [-3.0, -0.5, 0.0, 0.5, 3.0] {
            let mut prev = f64::INFINITY;
            for a in [0.25, 1.0, 4.0, 16.0] {
                let g = gamma_of_kurtosis(chi, &GammaParams::new(1.0, a));
                assert!(g < prev, "chi={chi} a={a}");
                prev = g;
            }
        }
    }
}
