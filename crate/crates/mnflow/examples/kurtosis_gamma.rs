//! The kurtosis-to-gamma mechanism on its own.
//!
//! Draws each noise family, estimates its excess kurtosis with the windowed
//! estimator, and shows the resulting norm-mixing parameter: sub-Gaussian
//! noise drives gamma toward 1 (fourth norm), super-Gaussian noise toward 0
//! (squared norm), Gaussian noise sits at the balance point.
//!
//! ```bash
//! cargo run --example kurtosis_gamma
//! ```

use mnflow::hos::{excess_kurtosis_window, gamma_of_kurtosis, GammaParams, KurtosisNormalization};
use mnflow::noise::{sample_noise, NoiseFamily, NoiseSpec};

fn main() {
    let params = GammaParams::default();
    println!(
        "{:<26} {:>12} {:>12} {:>9}",
        "noise", "analytic chi", "windowed chi", "gamma"
    );

    let families = [
        NoiseFamily::Laplacian,
        NoiseFamily::Gaussian,
        NoiseFamily::Uniform,
        NoiseFamily::mixture(0.7, NoiseFamily::Laplacian, 0.7, NoiseFamily::Uniform),
    ];
    for family in families {
        let samples = sample_noise(&NoiseSpec::new(family.clone(), 1.0, 99), 100_000).unwrap();
        // Average the windowed estimator over the stream.
        let m = 1000;
        let mut chi_sum = 0.0;
        let mut windows = 0.0;
        for window in samples.chunks_exact(m) {
            chi_sum += excess_kurtosis_window(window, KurtosisNormalization::SampleExcess)
                .unwrap()
                .chi;
            windows += 1.0;
        }
        let chi = chi_sum / windows;
        println!(
            "{:<26} {:>12.3} {:>12.3} {:>9.4}",
            family.label(),
            family.excess_kurtosis(),
            chi,
            gamma_of_kurtosis(chi, &params)
        );
    }

    println!();
    println!("sigmoid shape (c=1, A=1):");
    for chi in [-5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0] {
        println!("  gamma({chi:>4}) = {:.6}", gamma_of_kurtosis(chi, &params));
    }
}
