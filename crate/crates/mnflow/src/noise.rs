//! Seeded noise generation (Gaussian, Laplacian, uniform, two-component
//! mixtures), SNR-targeted image degradation and quality metrics.
//!
//! All generators are zero-mean. Degraded intensities are deliberately left
//! unclamped: clamping to `[0, 1]` would distort the tails that the kurtosis
//! machinery has to detect. Values are clamped only when written to PGM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::image::Image;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("noise variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("mixture weights must be positive, got ({0}, {1})")]
    NonPositiveWeight(f64, f64),
    #[error("target SNR must be finite, got {0}")]
    NonFiniteTarget(f64),
    #[error("image is constant; SNR targeting needs nonzero signal variance")]
    ConstantImage,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// A zero-mean noise distribution family.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseFamily {
    Gaussian,
    Laplacian,
    Uniform,
    /// `a * n1 + b * n2` with independent unit-variance components, rescaled
    /// to the requested total variance.
    Mixture {
        weight_a: f64,
        family_a: Box<NoiseFamily>,
        weight_b: f64,
        family_b: Box<NoiseFamily>,
    },
}

impl NoiseFamily {
    pub fn mixture(
        weight_a: f64,
        family_a: NoiseFamily,
        weight_b: f64,
        family_b: NoiseFamily,
    ) -> Self {
        NoiseFamily::Mixture {
            weight_a,
            family_a: Box::new(family_a),
            weight_b,
            family_b: Box::new(family_b),
        }
    }

    /// Short name used in CLI arguments and CSV rows.
    pub fn label(&self) -> String {
        match self {
            NoiseFamily::Gaussian => "gaussian".into(),
            NoiseFamily::Laplacian => "laplacian".into(),
            NoiseFamily::Uniform => "uniform".into(),
            NoiseFamily::Mixture {
                weight_a,
                family_a,
                weight_b,
                family_b,
            } => format!(
                "mix:{},{},{},{}",
                weight_a,
                family_a.label(),
                weight_b,
                family_b.label()
            ),
        }
    }

    /// Population excess kurtosis of the family (independent of variance).
    ///
    /// For a mixture of independent zero-mean components the fourth cumulant
    /// is `a^4 k4(n1) + b^4 k4(n2)`; dividing by the squared variance
    /// `(a^2 + b^2)^2` of the unit-component combination gives the excess.
    pub fn excess_kurtosis(&self) -> f64 {
        match self {
            NoiseFamily::Gaussian => 0.0,
            NoiseFamily::Laplacian => 3.0,
            NoiseFamily::Uniform => -1.2,
            NoiseFamily::Mixture {
                weight_a,
                family_a,
                weight_b,
                family_b,
            } => {
                let a2 = weight_a * weight_a;
                let b2 = weight_b * weight_b;
                (a2 * a2 * family_a.excess_kurtosis() + b2 * b2 * family_b.excess_kurtosis())
                    / ((a2 + b2) * (a2 + b2))
            }
        }
    }

    fn validate(&self) -> Result<(), NoiseError> {
        if let NoiseFamily::Mixture {
            weight_a,
            family_a,
            weight_b,
            family_b,
        } = self
        {
            if !(*weight_a > 0.0 && *weight_b > 0.0) {
                return Err(NoiseError::NonPositiveWeight(*weight_a, *weight_b));
            }
            family_a.validate()?;
            family_b.validate()?;
        }
        Ok(())
    }

    /// One unit-variance draw.
    fn sample_unit(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::Laplacian => {
                // Inverse CDF; unit variance means scale b = 1/sqrt(2).
                let b = std::f64::consts::FRAC_1_SQRT_2;
                let u: f64 = rng.random::<f64>() - 0.5;
                let t = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                -b * u.signum() * t.ln()
            }
            NoiseFamily::Uniform => {
                let l = 3.0_f64.sqrt();
                rng.random_range(-l..l)
            }
            NoiseFamily::Mixture {
                weight_a,
                family_a,
                weight_b,
                family_b,
            } => {
                let raw =
                    weight_a * family_a.sample_unit(rng) + weight_b * family_b.sample_unit(rng);
                raw / (weight_a * weight_a + weight_b * weight_b).sqrt()
            }
        }
    }
}

/// A fully-specified noise source: family, variance and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, variance: f64, seed: u64) -> Self {
        Self {
            family,
            variance,
            seed,
        }
    }
}

/// Draw `count` i.i.d. zero-mean samples with population variance
/// `spec.variance`. Same spec, same output.
pub fn sample_noise(spec: &NoiseSpec, count: usize) -> Result<Vec<f64>, NoiseError> {
    if !spec.variance.is_finite() || spec.variance <= 0.0 {
        return Err(NoiseError::NonPositiveVariance(spec.variance));
    }
    spec.family.validate()?;
    let sd = spec.variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..count)
        .map(|_| sd * spec.family.sample_unit(&mut rng))
        .collect())
}

/// Signal/noise accounting between a clean and a degraded image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrReport {
    /// Population variance of the clean image.
    pub signal_variance: f64,
    /// Population variance of `degraded - clean`.
    pub noise_variance: f64,
    /// `10 log10(signal_variance / noise_variance)`; `+inf` when the frames
    /// are identical.
    pub snr_db: f64,
    /// Mean squared error between the frames.
    pub mse: f64,
    /// Peak SNR with peak intensity 1.0; `+inf` for identical frames.
    pub psnr_db: f64,
}

/// Add noise of the given family so the degraded image hits `target_snr_db`.
///
/// The noise variance is `signal_variance / 10^(target/10)`. The drawn noise
/// is centered and rescaled so its sample variance equals that value exactly,
/// which pins the achieved SNR to the target for any seed (the rescale is a
/// constant factor, so the family's shape and kurtosis are untouched).
/// The degraded intensities may leave `[0, 1]`; they are not clamped.
pub fn degrade_to_snr(
    image: &Image,
    family: NoiseFamily,
    target_snr_db: f64,
    seed: u64,
) -> Result<(Image, NoiseSpec), NoiseError> {
    if !target_snr_db.is_finite() {
        return Err(NoiseError::NonFiniteTarget(target_snr_db));
    }
    let signal_variance = image.variance();
    if signal_variance <= 0.0 {
        return Err(NoiseError::ConstantImage);
    }
    let noise_variance = signal_variance / 10f64.powf(target_snr_db / 10.0);
    let spec = NoiseSpec::new(family, noise_variance, seed);
    let mut noise = sample_noise(&spec, image.width() * image.height())?;

    let n = noise.len() as f64;
    let mean = noise.iter().sum::<f64>() / n;
    let var = noise.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(NoiseError::NonPositiveVariance(var));
    }
    let scale = (noise_variance / var).sqrt();
    for v in noise.iter_mut() {
        *v = (*v - mean) * scale;
    }

    let data: Vec<f64> = image
        .as_slice()
        .iter()
        .zip(noise.iter())
        .map(|(&p, &e)| p + e)
        .collect();
    Ok((Image::from_vec(image.width(), image.height(), data), spec))
}

/// Measure SNR, MSE and PSNR of `degraded` against `clean`.
pub fn snr_between(clean: &Image, degraded: &Image) -> Result<SnrReport, NoiseError> {
    if !clean.same_dimensions(degraded) {
        return Err(NoiseError::DimensionMismatch(
            clean.width(),
            clean.height(),
            degraded.width(),
            degraded.height(),
        ));
    }
    let signal_variance = clean.variance();
    let n = clean.as_slice().len() as f64;
    let diff: Vec<f64> = degraded
        .as_slice()
        .iter()
        .zip(clean.as_slice())
        .map(|(&d, &c)| d - c)
        .collect();
    let mean = diff.iter().sum::<f64>() / n;
    let noise_variance = diff.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mse = diff.iter().map(|v| v * v).sum::<f64>() / n;
    let snr_db = if noise_variance > 0.0 {
        10.0 * (signal_variance / noise_variance).log10()
    } else {
        f64::INFINITY
    };
    let psnr_db = if mse > 0.0 {
        10.0 * (1.0 / mse).log10()
    } else {
        f64::INFINITY
    };
    Ok(SnrReport {
        signal_variance,
        noise_variance,
        snr_db,
        mse,
        psnr_db,
    })
}
