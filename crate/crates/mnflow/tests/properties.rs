//! Property tests over the public API.

use proptest::prelude::*;

use mnflow::hos::{excess_kurtosis_window, KurtosisNormalization};
use mnflow::image::{dfd, Displacement, FlowField, Image, PixelCoord};
use mnflow::pelrec::{read_flo, write_flo};
use mnflow::solver::{mixed_norm_cost, solve_update, ObservationSystem, SolverConfig};

fn image_strategy() -> impl Strategy<Value = Image> {
    (2usize..12, 2usize..12).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0.0f64..=1.0, w * h)
            .prop_map(move |data| Image::from_vec(w, h, data))
    })
}

proptest! {
    #[test]
    fn bilinear_sample_stays_within_neighbor_bounds(
        img in image_strategy(),
        fx in -2.0f64..14.0,
        fy in -2.0f64..14.0,
    ) {
        let v = img.bilinear_sample(fx, fy);
        let x = fx.clamp(0.0, (img.width() - 1) as f64);
        let y = fy.clamp(0.0, (img.height() - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(img.width() - 1);
        let y1 = (y0 + 1).min(img.height() - 1);
        let corners = [
            img.get(x0, y0),
            img.get(x1, y0),
            img.get(x0, y1),
            img.get(x1, y1),
        ];
        let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }

    #[test]
    fn bilinear_sample_is_exact_at_integer_coordinates(img in image_strategy()) {
        for y in 0..img.height() {
            for x in 0..img.width() {
                prop_assert_eq!(img.bilinear_sample(x as f64, y as f64), img.get(x, y));
            }
        }
    }

    #[test]
    fn pgm_round_trip_preserves_bytes(
        w in 1usize..20,
        h in 1usize..20,
        seed in any::<u16>(),
    ) {
        let img = Image::from_fn(w, h, |x, y| {
            ((x * 131 + y * 17 + seed as usize) % 256) as f64 / 255.0
        });
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.pgm");
        let second = dir.path().join("b.pgm");
        img.save_pgm(&first).unwrap();
        Image::load_pgm(&first).unwrap().save_pgm(&second).unwrap();
        prop_assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    }

    #[test]
    fn flo_round_trip_preserves_field(
        w in 1usize..12,
        h in 1usize..12,
        raw in proptest::collection::vec(-100.0f32..100.0, 144),
    ) {
        let vectors: Vec<(f32, f32)> = (0..w * h)
            .map(|i| (raw[i % raw.len()], raw[(i * 7 + 3) % raw.len()]))
            .collect();
        let flow = FlowField::from_vectors(w, h, vectors);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.flo");
        write_flo(&flow, &path).unwrap();
        prop_assert_eq!(read_flo(&path).unwrap(), flow);
    }

    #[test]
    fn dfd_vanishes_for_integer_shifts(
        img in image_strategy(),
        sx in 0usize..3,
        sy in 0usize..3,
    ) {
        // frame_k is img with content moved right/down by (sx, sy).
        let shifted = Image::from_fn(img.width(), img.height(), |x, y| {
            img.get(x.saturating_sub(sx), y.saturating_sub(sy))
        });
        let d = Displacement::new(sx as f64, sy as f64);
        for y in sy..img.height() {
            for x in sx..img.width() {
                let r = PixelCoord::new(x as f64, y as f64);
                prop_assert!(dfd(&shifted, &img, r, d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn windowed_kurtosis_respects_lower_bound_and_scale(
        values in proptest::collection::vec(-10.0f64..10.0, 2..40),
        scale in prop_oneof![(-20.0f64..-0.01), (0.01f64..20.0)],
    ) {
        if let Ok(est) = excess_kurtosis_window(&values, KurtosisNormalization::SampleExcess) {
            prop_assert!(est.chi >= -2.0 - 1e-9, "chi = {}", est.chi);
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let rescaled = excess_kurtosis_window(&scaled, KurtosisNormalization::SampleExcess)
                .unwrap();
            prop_assert!((rescaled.chi - est.chi).abs() < 1e-9 * est.chi.abs().max(1.0));
        }
    }

    #[test]
    fn solver_descends_for_any_gamma_source(
        z in proptest::collection::vec(-2.0f64..2.0, 9),
        g in proptest::collection::vec(-2.0f64..2.0, 18),
        fixed_gamma in proptest::option::of(0.0f64..=1.0),
    ) {
        let obs = ObservationSystem {
            z,
            g: g.chunks_exact(2).map(|p| [p[0], p[1]]).collect(),
            coords: (0..9).map(|i| PixelCoord::new(i as f64, 0.0)).collect(),
        };
        let config = SolverConfig::default();
        let source = match fixed_gamma {
            Some(gamma) => mnflow::solver::GammaSource::Fixed(gamma),
            None => config.gamma_source(),
        };
        let result = solve_update(&obs, &config, &source).unwrap();
        prop_assert!(result.final_cost >= 0.0);
        prop_assert!(result.iters <= config.max_iters);
        let gamma_last = *result.gamma_trace.last().unwrap();
        let at_zero = mixed_norm_cost(&obs, [0.0, 0.0], gamma_last);
        prop_assert!(
            result.final_cost <= at_zero + 1e-12,
            "final {} vs initial {}",
            result.final_cost,
            at_zero
        );
    }
}
