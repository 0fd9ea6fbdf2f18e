//! Motion compensation: reconstruct the current frame by warping the
//! previous one along the estimated flow.
//!
//! Compares the compensated frame's PSNR against the zero-flow baseline
//! (plain frame difference) on a noiseless shifted pair.
//!
//! ```bash
//! cargo run --example compensate
//! ```

use mnflow::image::{motion_compensate, Displacement};
use mnflow::noise::snr_between;
use mnflow::pelrec::{estimate_flow, PelRecConfig};
use mnflow::synth::shifted_pair;

fn main() {
    let shift = Displacement::new(1.0, 0.0);
    let (frame_k, frame_km1) = shifted_pair(96, 96, 23, shift);

    let baseline = snr_between(&frame_k, &frame_km1).unwrap().psnr_db;
    println!("zero-flow baseline PSNR: {baseline:.2} dB");

    let (flow, _) = estimate_flow(&frame_k, &frame_km1, &PelRecConfig::default()).unwrap();
    let compensated = motion_compensate(&frame_km1, &flow);
    let psnr = snr_between(&frame_k, &compensated).unwrap().psnr_db;
    println!("motion-compensated PSNR: {psnr:.2} dB");
    println!("gain: {:+.2} dB", psnr - baseline);

    let out = std::env::temp_dir().join("mnflow_compensated.pgm");
    compensated.save_pgm(&out).unwrap();
    println!("wrote {}", out.display());
}
