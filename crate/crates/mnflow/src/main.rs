//! Thin command-line shell over the [`mnflow::cli`] harness.
//!
//! Exit status: 0 on success, 1 on runtime failure, 2 on usage errors
//! (the argument parser exits with 2 on its own).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mnflow::cli::{
    evaluate_row, parse_noise, run_bench, run_compensate, run_degrade, run_estimate, run_evaluate,
    ExperimentPlan, EVALUATE_HEADER,
};
use mnflow::hos::{GammaParams, KurtosisMode};
use mnflow::noise::NoiseFamily;
use mnflow::pelrec::{PelRecConfig, Window};
use mnflow::solver::NormMode;

#[derive(Parser)]
#[command(
    name = "mnflow",
    version,
    about = "Pel-recursive optical flow with a kurtosis-adaptive mixed-norm estimator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add noise to a PGM frame at a target SNR.
    Degrade {
        /// Clean input frame (binary PGM).
        input: PathBuf,
        /// Degraded output frame.
        output: PathBuf,
        /// gaussian | laplacian | uniform | mix:a,f1,b,f2
        #[arg(long, value_parser = parse_noise_arg)]
        noise: NoiseFamily,
        /// Target SNR in dB.
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate a dense flow field between two frames.
    Estimate {
        /// Current frame I_k.
        frame_k: PathBuf,
        /// Previous frame I_{k-1}.
        frame_km1: PathBuf,
        /// Output flow file (.flo).
        output: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Optional color visualization (PPM).
        #[arg(long)]
        viz: Option<PathBuf>,
    },
    /// Backward-warp a frame along a stored flow field.
    Compensate {
        frame_km1: PathBuf,
        flow: PathBuf,
        output: PathBuf,
    },
    /// Print mse,psnr_db,snr_db of a test frame against a reference.
    Evaluate {
        reference: PathBuf,
        test: PathBuf,
        /// Emit the CSV header row first.
        #[arg(long)]
        header: bool,
    },
    /// Run the degrade/estimate/compensate/evaluate grid and print CSV.
    Bench {
        /// Current and previous frame, in that order.
        #[arg(long, num_args = 2, value_names = ["FRAME_K", "FRAME_KM1"], required = true)]
        frames: Vec<PathBuf>,
        /// Comma-separated simple families; repeat the flag for mixtures.
        #[arg(long = "noise", value_parser = parse_noise_list, default_value = "gaussian,laplacian,uniform")]
        noise: Vec<NoiseList>,
        /// Comma-separated SNR targets in dB.
        #[arg(long, value_delimiter = ',', default_value = "30,20")]
        snr: Vec<f64>,
        /// Comma-separated solver modes.
        #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "lms,lmf,adaptive")]
        modes: Vec<NormMode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for degraded frames, flow files and compensated frames.
        #[arg(long)]
        out: PathBuf,
        /// Degrade the previous frame as well as the current one.
        #[arg(long)]
        degrade_both: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args)]
struct SolverArgs {
    /// lms | lmf | adaptive (bench ignores this; it sweeps --modes).
    #[arg(long, value_parser = parse_mode, default_value = "adaptive")]
    mode: NormMode,
    /// Side of the centered observation window (odd).
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Componentwise displacement clamp in pixels.
    #[arg(long, default_value_t = 5.0)]
    dmax: f64,
    /// Step scale of the descent iteration.
    #[arg(long, default_value_t = 1.0)]
    beta0: f64,
    /// Sharpness of the kurtosis-to-gamma sigmoid.
    #[arg(long = "gamma-c", default_value_t = 1.0)]
    gamma_c: f64,
    /// Shift of the kurtosis-to-gamma sigmoid.
    #[arg(long = "gamma-A", default_value_t = 1.0)]
    gamma_a: f64,
    /// residual | intensity
    #[arg(long = "kurtosis-mode", value_parser = parse_kurtosis_mode, default_value = "residual")]
    kurtosis_mode: KurtosisMode,
    /// Window length for intensity-mode kurtosis.
    #[arg(long = "kurtosis-window", default_value_t = 5)]
    kurtosis_window: usize,
    #[arg(long = "max-iters", default_value_t = 50)]
    max_iters: usize,
    /// Update-norm stopping threshold in pixels.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

impl SolverArgs {
    fn to_config(&self) -> PelRecConfig {
        let mut config = PelRecConfig {
            window: Window::centered(self.window),
            d_max: self.dmax,
            ..PelRecConfig::default()
        };
        config.solver.mode = self.mode;
        config.solver.beta0 = self.beta0;
        config.solver.gamma_params = GammaParams::new(self.gamma_c, self.gamma_a);
        config.solver.kurtosis_mode = self.kurtosis_mode;
        config.solver.kurtosis_window = self.kurtosis_window;
        config.solver.max_iters = self.max_iters;
        config.solver.tol = self.tol;
        config
    }
}

fn parse_noise_arg(s: &str) -> Result<NoiseFamily, String> {
    parse_noise(s)
}

/// A comma list of simple families; mixtures must be separate occurrences
/// because their syntax contains commas.
#[derive(Clone)]
struct NoiseList(Vec<NoiseFamily>);

fn parse_noise_list(s: &str) -> Result<NoiseList, String> {
    if s.starts_with("mix:") {
        return Ok(NoiseList(vec![parse_noise(s)?]));
    }
    s.split(',')
        .map(parse_noise)
        .collect::<Result<Vec<_>, _>>()
        .map(NoiseList)
}

fn parse_mode(s: &str) -> Result<NormMode, String> {
    match s {
        "lms" => Ok(NormMode::Lms),
        "lmf" => Ok(NormMode::Lmf),
        "adaptive" => Ok(NormMode::Adaptive),
        _ => Err(format!("unknown mode {s:?} (lms|lmf|adaptive)")),
    }
}

fn parse_kurtosis_mode(s: &str) -> Result<KurtosisMode, String> {
    match s {
        "residual" => Ok(KurtosisMode::Residual),
        "intensity" => Ok(KurtosisMode::IntensityWindow),
        _ => Err(format!("unknown kurtosis mode {s:?} (residual|intensity)")),
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Degrade {
            input,
            output,
            noise,
            snr,
            seed,
        } => {
            let report = run_degrade(&input, &output, noise, snr, seed)?;
            println!(
                "achieved SNR {:.4} dB (target {snr} dB), noise variance {:.6e}",
                report.snr_db, report.noise_variance
            );
        }
        Command::Estimate {
            frame_k,
            frame_km1,
            output,
            solver,
            viz,
        } => {
            let config = solver.to_config();
            let diag = run_estimate(&frame_k, &frame_km1, &config, &output, viz.as_deref())?;
            println!("pixels {}", diag.pixels);
            println!("mean iters {:.3}", diag.mean_iters);
            println!("mean gamma {:.6}", diag.mean_gamma);
            println!("mean |d| {:.6} px", diag.mean_flow_magnitude);
            println!(
                "mean |DFD| before {:.6} after {:.6}",
                diag.mean_abs_dfd_before, diag.mean_abs_dfd_after
            );
        }
        Command::Compensate {
            frame_km1,
            flow,
            output,
        } => {
            run_compensate(&frame_km1, &flow, &output)?;
        }
        Command::Evaluate {
            reference,
            test,
            header,
        } => {
            let report = run_evaluate(&reference, &test)?;
            if header {
                println!("{EVALUATE_HEADER}");
            }
            println!("{}", evaluate_row(&report));
        }
        Command::Bench {
            frames,
            noise,
            snr,
            modes,
            seed,
            out,
            degrade_both,
            solver,
        } => {
            let plan = ExperimentPlan {
                frame_k: frames[0].clone(),
                frame_km1: frames[1].clone(),
                noises: noise.into_iter().flat_map(|l| l.0).collect(),
                snrs_db: snr,
                modes,
                seed,
                out_dir: out,
                degrade_both,
                config: solver.to_config(),
            };
            let report = run_bench(&plan)?;
            print!("{}", report.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
