//! Experiment harness behind the command-line interface: degradation,
//! estimation, compensation, evaluation, and the full noise/SNR/mode bench
//! grid with CSV reporting.
//!
//! Everything here is a plain library function so the binary stays a thin
//! argument-parsing shell and tests can drive the exact command surfaces.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::image::{motion_compensate, FlowField, Image, PgmError};
use crate::noise::{degrade_to_snr, snr_between, NoiseError, NoiseFamily, SnrReport};
use crate::pelrec::{
    estimate_flow, flow_to_color, read_flo, write_flo, Diagnostics, FlowIoError, PelRecConfig,
    PelRecError, WindowShape,
};
use crate::solver::NormMode;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Pgm { path: PathBuf, source: PgmError },
    #[error("{path}: {source}")]
    FlowIo { path: PathBuf, source: FlowIoError },
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    PelRec(#[from] PelRecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("dimension mismatch: {left} is {lw}x{lh} but {right} is {rw}x{rh}")]
    DimensionMismatch {
        left: String,
        lw: usize,
        lh: usize,
        right: String,
        rw: usize,
        rh: usize,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

fn load_pgm(path: &Path) -> Result<Image, CliError> {
    Image::load_pgm(path).map_err(|source| CliError::Pgm {
        path: path.to_path_buf(),
        source,
    })
}

fn save_pgm(image: &Image, path: &Path) -> Result<(), CliError> {
    image.save_pgm(path).map_err(|source| CliError::Pgm {
        path: path.to_path_buf(),
        source,
    })
}

fn load_flo(path: &Path) -> Result<FlowField, CliError> {
    read_flo(path).map_err(|source| CliError::FlowIo {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse a noise family name: `gaussian`, `laplacian`, `uniform` or
/// `mix:a,family1,b,family2` with positive weights.
pub fn parse_noise(s: &str) -> Result<NoiseFamily, String> {
    match s {
        "gaussian" => Ok(NoiseFamily::Gaussian),
        "laplacian" => Ok(NoiseFamily::Laplacian),
        "uniform" => Ok(NoiseFamily::Uniform),
        _ => {
            let body = s.strip_prefix("mix:").ok_or_else(|| {
                format!("unknown noise {s:?} (gaussian|laplacian|uniform|mix:a,f1,b,f2)")
            })?;
            let parts: Vec<&str> = body.split(',').collect();
            if parts.len() != 4 {
                return Err(format!("mixture {s:?} must be mix:a,family1,b,family2"));
            }
            let weight_a: f64 = parts[0]
                .parse()
                .map_err(|_| format!("bad mixture weight {:?}", parts[0]))?;
            let weight_b: f64 = parts[2]
                .parse()
                .map_err(|_| format!("bad mixture weight {:?}", parts[2]))?;
            if !(weight_a > 0.0 && weight_b > 0.0) {
                return Err("mixture weights must be positive".into());
            }
            let family_a = parse_noise(parts[1])?;
            let family_b = parse_noise(parts[3])?;
            Ok(NoiseFamily::mixture(weight_a, family_a, weight_b, family_b))
        }
    }
}

/// Degrade `input` to the target SNR and write the result. Returns the
/// measured report against the clean frame.
pub fn run_degrade(
    input: &Path,
    output: &Path,
    family: NoiseFamily,
    target_snr_db: f64,
    seed: u64,
) -> Result<SnrReport, CliError> {
    let clean = load_pgm(input)?;
    let (noisy, _spec) = degrade_to_snr(&clean, family, target_snr_db, seed)?;
    let report = snr_between(&clean, &noisy)?;
    save_pgm(&noisy, output)?;
    Ok(report)
}

/// Estimate flow from `frame_km1` to `frame_k` and write it as a `.flo`
/// file, plus an optional color visualization PPM.
pub fn run_estimate(
    frame_k: &Path,
    frame_km1: &Path,
    config: &PelRecConfig,
    output: &Path,
    viz: Option<&Path>,
) -> Result<Diagnostics, CliError> {
    let current = load_pgm(frame_k)?;
    let previous = load_pgm(frame_km1)?;
    let (flow, diagnostics) = estimate_flow(&current, &previous, config)?;
    write_flo(&flow, output).map_err(|source| CliError::FlowIo {
        path: output.to_path_buf(),
        source,
    })?;
    if let Some(viz_path) = viz {
        flow_to_color(&flow, None).save_ppm(viz_path)?;
    }
    Ok(diagnostics)
}

/// Backward-warp `frame_km1` along a stored flow field.
pub fn run_compensate(frame_km1: &Path, flow: &Path, output: &Path) -> Result<(), CliError> {
    let previous = load_pgm(frame_km1)?;
    let field = load_flo(flow)?;
    if previous.width() != field.width() || previous.height() != field.height() {
        return Err(CliError::DimensionMismatch {
            left: frame_km1.display().to_string(),
            lw: previous.width(),
            lh: previous.height(),
            right: flow.display().to_string(),
            rw: field.width(),
            rh: field.height(),
        });
    }
    let compensated = motion_compensate(&previous, &field);
    save_pgm(&compensated, output)
}

/// Compare `test` against `reference`.
pub fn run_evaluate(reference: &Path, test: &Path) -> Result<SnrReport, CliError> {
    let reference_img = load_pgm(reference)?;
    let test_img = load_pgm(test)?;
    Ok(snr_between(&reference_img, &test_img)?)
}

/// CSV header for `evaluate` rows.
pub const EVALUATE_HEADER: &str = "mse,psnr_db,snr_db";

/// One `evaluate` CSV row.
pub fn evaluate_row(report: &SnrReport) -> String {
    format!(
        "{},{},{}",
        fmt_scientific(report.mse),
        fmt_db(report.psnr_db),
        fmt_db(report.snr_db)
    )
}

/// A full degradation / estimation / compensation experiment grid.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub frame_k: PathBuf,
    pub frame_km1: PathBuf,
    pub noises: Vec<NoiseFamily>,
    pub snrs_db: Vec<f64>,
    pub modes: Vec<NormMode>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Degrade both frames instead of only the current one.
    pub degrade_both: bool,
    pub config: PelRecConfig,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.noises.is_empty() {
            return Err(CliError::InvalidPlan("at least one noise family".into()));
        }
        if self.snrs_db.is_empty() || self.snrs_db.iter().any(|s| !s.is_finite()) {
            return Err(CliError::InvalidPlan(
                "SNR targets must be a nonempty list of finite values".into(),
            ));
        }
        if self.modes.is_empty() {
            return Err(CliError::InvalidPlan("at least one mode".into()));
        }
        Ok(())
    }
}

/// One bench grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub noise: String,
    pub snr_target_db: f64,
    pub snr_achieved_db: f64,
    pub mode: NormMode,
    /// PSNR of the compensated frame against the clean current frame.
    pub psnr_compensated_db: f64,
    pub mean_gamma: f64,
    pub mean_iters: f64,
    pub runtime_ms: u128,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    metadata: Vec<String>,
}

pub const BENCH_HEADER: &str =
    "noise,snr_target_db,snr_achieved_db,mode,psnr_compensated_db,mean_gamma,mean_iters,runtime_ms";

impl BenchReport {
    /// Full CSV: `#`-prefixed metadata, a header row, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in &self.metadata {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{BENCH_HEADER}");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                row.noise,
                fmt_db(row.snr_target_db),
                fmt_db(row.snr_achieved_db),
                row.mode.label(),
                fmt_db(row.psnr_compensated_db),
                fmt_fraction(row.mean_gamma),
                fmt_fraction(row.mean_iters),
                row.runtime_ms
            );
        }
        out
    }
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Run the full grid: for each (noise, snr) the current frame is degraded
/// once (both frames under `degrade_both`), then every mode estimates flow
/// on that same degraded input, compensates the previous frame used for
/// estimation, and is scored against the clean current frame.
pub fn run_bench(plan: &ExperimentPlan) -> Result<BenchReport, CliError> {
    plan.validate()?;
    let clean_k = load_pgm(&plan.frame_k)?;
    let clean_km1 = load_pgm(&plan.frame_km1)?;
    fs::create_dir_all(&plan.out_dir)?;

    let metadata = bench_metadata(plan);
    let mut rows = Vec::new();

    for (ni, noise) in plan.noises.iter().enumerate() {
        for (si, &snr) in plan.snrs_db.iter().enumerate() {
            // Deterministic per-cell seeds so any cell can be reproduced
            // independently of grid order.
            let cell_seed = plan
                .seed
                .wrapping_add(ni as u64 * 1_000_003)
                .wrapping_add(si as u64 * 10_007);
            let (noisy_k, _) = degrade_to_snr(&clean_k, noise.clone(), snr, cell_seed)?;
            let previous = if plan.degrade_both {
                degrade_to_snr(&clean_km1, noise.clone(), snr, cell_seed.wrapping_add(1))?.0
            } else {
                clean_km1.clone()
            };
            let achieved = snr_between(&clean_k, &noisy_k)?.snr_db;

            let stem = format!("{}_{}db", sanitize_label(&noise.label()), fmt_db(snr));
            save_pgm(&noisy_k, &plan.out_dir.join(format!("{stem}.pgm")))?;

            for mode in &plan.modes {
                let mut config = plan.config.clone();
                config.solver.mode = *mode;
                let started = Instant::now();
                let (flow, diagnostics) = estimate_flow(&noisy_k, &previous, &config)?;
                let compensated = motion_compensate(&previous, &flow);
                let runtime_ms = started.elapsed().as_millis();

                let psnr = snr_between(&clean_k, &compensated)?.psnr_db;
                let flo_path = plan.out_dir.join(format!("{stem}_{}.flo", mode.label()));
                write_flo(&flow, &flo_path).map_err(|source| CliError::FlowIo {
                    path: flo_path.clone(),
                    source,
                })?;
                save_pgm(
                    &compensated,
                    &plan
                        .out_dir
                        .join(format!("{stem}_{}_comp.pgm", mode.label())),
                )?;

                rows.push(BenchRow {
                    noise: noise.label(),
                    snr_target_db: snr,
                    snr_achieved_db: achieved,
                    mode: *mode,
                    psnr_compensated_db: psnr,
                    mean_gamma: diagnostics.mean_gamma,
                    mean_iters: diagnostics.mean_iters,
                    runtime_ms,
                });
            }
        }
    }

    let report = BenchReport { rows, metadata };
    fs::write(plan.out_dir.join("bench.csv"), report.to_csv())?;
    Ok(report)
}

fn bench_metadata(plan: &ExperimentPlan) -> Vec<String> {
    let solver = &plan.config.solver;
    let window_shape = match plan.config.window.shape {
        WindowShape::Centered => "centered",
        WindowShape::Causal => "causal",
    };
    vec![
        format!("mnflow bench v{}", env!("CARGO_PKG_VERSION")),
        format!(
            "frames={} {}",
            plan.frame_k.display(),
            plan.frame_km1.display()
        ),
        format!(
            "noises={}",
            plan.noises
                .iter()
                .map(|n| n.label())
                .collect::<Vec<_>>()
                .join(";")
        ),
        format!(
            "snr_targets_db={}",
            plan.snrs_db
                .iter()
                .map(|s| fmt_db(*s))
                .collect::<Vec<_>>()
                .join(";")
        ),
        format!(
            "modes={}",
            plan.modes
                .iter()
                .map(|m| m.label())
                .collect::<Vec<_>>()
                .join(";")
        ),
        format!("seed={} degrade_both={}", plan.seed, plan.degrade_both),
        format!(
            "window={}x{} {} d_max={} prediction={:?}",
            plan.config.window.side,
            plan.config.window.side,
            window_shape,
            plan.config.d_max,
            plan.config.prediction
        ),
        format!(
            "solver: beta0={} gamma_c={} gamma_A={} mode_default={} kurtosis={:?}/{:?} window={} max_iters={} tol={}",
            solver.beta0,
            solver.gamma_params.c,
            solver.gamma_params.a,
            solver.mode.label(),
            solver.kurtosis_mode,
            solver.kurtosis_normalization,
            solver.kurtosis_window,
            solver.max_iters,
            solver.tol
        ),
    ]
}

/// Fixed four-decimal formatting with an `inf` sentinel, used for dB values.
pub fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v == v.trunc() && v.abs() < 1e12 {
        format!("{}", v as i64)
    } else {
        format!("{v:.4}")
    }
}

fn fmt_fraction(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_scientific(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.6e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Displacement;
    use crate::synth::shifted_pair;

    fn write_pair(dir: &Path) -> (PathBuf, PathBuf) {
        let (frame_k, frame_km1) = shifted_pair(48, 48, 1234, Displacement::new(1.0, 0.0));
        let k = dir.join("k.pgm");
        let km1 = dir.join("km1.pgm");
        frame_k.save_pgm(&k).unwrap();
        frame_km1.save_pgm(&km1).unwrap();
        (k, km1)
    }

    #[test]
    fn parse_noise_names() {
        assert_eq!(parse_noise("gaussian").unwrap(), NoiseFamily::Gaussian);
        assert_eq!(parse_noise("laplacian").unwrap(), NoiseFamily::Laplacian);
        assert_eq!(parse_noise("uniform").unwrap(), NoiseFamily::Uniform);
        let mix = parse_noise("mix:0.5,gaussian,0.5,laplacian").unwrap();
        assert_eq!(
            mix,
            NoiseFamily::mixture(0.5, NoiseFamily::Gaussian, 0.5, NoiseFamily::Laplacian)
        );
        assert!(parse_noise("salt").is_err());
        assert!(parse_noise("mix:0.5,gaussian").is_err());
        assert!(parse_noise("mix:-1,gaussian,1,uniform").is_err());
    }

    #[test]
    fn degrade_reports_target_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (k, _) = write_pair(dir.path());
        let out_a = dir.path().join("a.pgm");
        let out_b = dir.path().join("b.pgm");
        let report = run_degrade(&k, &out_a, NoiseFamily::Gaussian, 30.0, 7).unwrap();
        assert!((report.snr_db - 30.0).abs() < 0.2);
        run_degrade(&k, &out_b, NoiseFamily::Gaussian, 30.0, 7).unwrap();
        assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
    }

    #[test]
    fn estimate_identical_frames_reports_tiny_flow() {
        let dir = tempfile::tempdir().unwrap();
        let (k, _) = write_pair(dir.path());
        let out = dir.path().join("zero.flo");
        let diag = run_estimate(&k, &k, &PelRecConfig::default(), &out, None).unwrap();
        assert!(diag.mean_flow_magnitude < 1e-3);
        let field = read_flo(&out).unwrap();
        assert_eq!(field.width(), 48);
    }

    #[test]
    fn estimate_missing_frame_creates_no_output() {
        let dir = tempfile::tempdir().unwrap();
        let (k, _) = write_pair(dir.path());
        let out = dir.path().join("missing.flo");
        let err = run_estimate(
            &k,
            &dir.path().join("nope.pgm"),
            &PelRecConfig::default(),
            &out,
            None,
        );
        assert!(err.is_err());
        assert!(!out.exists());
    }

    #[test]
    fn compensate_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (k, km1) = write_pair(dir.path());
        let flo = dir.path().join("flow.flo");
        run_estimate(&k, &km1, &PelRecConfig::default(), &flo, None).unwrap();
        let out = dir.path().join("comp.pgm");
        run_compensate(&km1, &flo, &out).unwrap();
        let report = run_evaluate(&k, &out).unwrap();
        assert!(report.psnr_db >= 30.0, "psnr {}", report.psnr_db);
    }

    #[test]
    fn compensate_rejects_mismatched_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let (k, _) = write_pair(dir.path());
        let flo = dir.path().join("small.flo");
        write_flo(&FlowField::zero(4, 4), &flo).unwrap();
        let out = dir.path().join("comp.pgm");
        assert!(matches!(
            run_compensate(&k, &flo, &out),
            Err(CliError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn evaluate_identical_is_infinite() {
        let dir = tempfile::tempdir().unwrap();
        let (k, _) = write_pair(dir.path());
        let report = run_evaluate(&k, &k).unwrap();
        assert_eq!(evaluate_row(&report), "0,inf,inf");
    }

    #[test]
    fn bench_grid_has_full_cardinality() {
        let dir = tempfile::tempdir().unwrap();
        let (k, km1) = write_pair(dir.path());
        let plan = ExperimentPlan {
            frame_k: k,
            frame_km1: km1,
            noises: vec![
                NoiseFamily::Gaussian,
                NoiseFamily::Laplacian,
                NoiseFamily::Uniform,
            ],
            snrs_db: vec![30.0, 20.0],
            modes: vec![NormMode::Lms, NormMode::Lmf, NormMode::Adaptive],
            seed: 9,
            out_dir: dir.path().join("out"),
            degrade_both: false,
            config: PelRecConfig::default(),
        };
        let report = run_bench(&plan).unwrap();
        assert_eq!(report.rows.len(), 18);
        let csv = report.to_csv();
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 19);
        assert!(csv.contains(BENCH_HEADER));
    }

    #[test]
    fn plan_validation_catches_empty_modes() {
        let plan = ExperimentPlan {
            frame_k: "a.pgm".into(),
            frame_km1: "b.pgm".into(),
            noises: vec![NoiseFamily::Gaussian],
            snrs_db: vec![30.0],
            modes: vec![],
            seed: 0,
            out_dir: ".".into(),
            degrade_both: false,
            config: PelRecConfig::default(),
        };
        assert!(matches!(plan.validate(), Err(CliError::InvalidPlan(_))));
    }

    #[test]
    fn db_formatting() {
        assert_eq!(fmt_db(30.0), "30");
        assert_eq!(fmt_db(29.1234567), "29.1235");
        assert_eq!(fmt_db(f64::INFINITY), "inf");
    }
}
