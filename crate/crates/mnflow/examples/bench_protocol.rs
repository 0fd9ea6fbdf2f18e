//! The full noise-degradation / motion-compensation protocol.
//!
//! Writes a synthetic shifted pair to disk, then runs the bench grid:
//! every (noise family, SNR, solver mode) cell degrades the current frame,
//! estimates flow against the clean previous frame, compensates, and scores
//! the result. The CSV lands on stdout; artifacts go to a temp directory.
//!
//! ```bash
//! cargo run --example bench_protocol
//! ```

use mnflow::cli::{run_bench, ExperimentPlan};
use mnflow::image::Displacement;
use mnflow::noise::NoiseFamily;
use mnflow::pelrec::PelRecConfig;
use mnflow::solver::NormMode;
use mnflow::synth::shifted_pair;

fn main() {
    let dir = std::env::temp_dir().join("mnflow_bench");
    std::fs::create_dir_all(&dir).unwrap();

    let (frame_k, frame_km1) = shifted_pair(64, 64, 5, Displacement::new(1.0, 0.0));
    let k_path = dir.join("frame_k.pgm");
    let km1_path = dir.join("frame_km1.pgm");
    frame_k.save_pgm(&k_path).unwrap();
    frame_km1.save_pgm(&km1_path).unwrap();

    let plan = ExperimentPlan {
        frame_k: k_path,
        frame_km1: km1_path,
        noises: vec![
            NoiseFamily::Gaussian,
            NoiseFamily::Laplacian,
            NoiseFamily::Uniform,
        ],
        snrs_db: vec![30.0, 20.0],
        modes: vec![NormMode::Lms, NormMode::Lmf, NormMode::Adaptive],
        seed: 7,
        out_dir: dir.clone(),
        degrade_both: false,
        config: PelRecConfig::default(),
    };

    let report = run_bench(&plan).unwrap();
    print!("{}", report.to_csv());
    eprintln!("artifacts in {}", dir.display());
}
