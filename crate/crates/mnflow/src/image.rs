//! Single-channel intensity images: PGM I/O, sub-pixel sampling, spatial
//! gradients, displaced frame differences and backward warping.
//!
//! Intensities are stored as `f64` normalized to `[0, 1]` on load (8-bit
//! values divided by 255), so solver step sizes and tolerances do not depend
//! on the file bit depth. Sampling outside the image clamps to the border
//! (replicate padding), which keeps every operation total.

use std::fs;
use std::io::{self, Write};
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use thiserror::Error;

/// Step used for central differences on the bilinear surface.
const GRADIENT_STEP: f64 = 0.5;

/// Errors produced by the PGM reader/writer.
#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM: expected magic \"P5\", found {found:?}")]
    BadMagic { found: String },
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("unsupported maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A sampling position `(x, y)`; real-valued when sub-pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// A displacement vector `(dx, dy)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    /// Euclidean length in pixels.
    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Clamp each component to `[-bound, bound]`.
    pub fn clamp_box(&self, bound: f64) -> Self {
        Self {
            dx: self.dx.clamp(-bound, bound),
            dy: self.dy.clamp(-bound, bound),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }
}

impl Add for Displacement {
    type Output = Displacement;
    fn add(self, rhs: Displacement) -> Displacement {
        Displacement::new(self.dx + rhs.dx, self.dy + rhs.dy)
    }
}

impl Sub for Displacement {
    type Output = Displacement;
    fn sub(self, rhs: Displacement) -> Displacement {
        Displacement::new(self.dx - rhs.dx, self.dy - rhs.dy)
    }
}

impl Mul<f64> for Displacement {
    type Output = Displacement;
    fn mul(self, s: f64) -> Displacement {
        Displacement::new(self.dx * s, self.dy * s)
    }
}

impl Sub<Displacement> for PixelCoord {
    type Output = PixelCoord;
    fn sub(self, d: Displacement) -> PixelCoord {
        PixelCoord::new(self.x - d.dx, self.y - d.dy)
    }
}

/// A single-channel image with row-major `f64` intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Zero-filled image.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Build from a row-major intensity vector.
    ///
    /// Panics if `data.len() != width * height` or any value is non-finite.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        assert_eq!(
            data.len(),
            width * height,
            "data length ({}) must equal width * height ({})",
            data.len(),
            width * height
        );
        assert!(
            data.iter().all(|v| v.is_finite()),
            "image intensities must be finite"
        );
        Self {
            width,
            height,
            data,
        }
    }

    /// Build by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn same_dimensions(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance of the intensities.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.data
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.data.len() as f64
    }

    /// Load a binary PGM (magic `P5`, maxval 255); intensities scaled by 1/255.
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image, PgmError> {
        let bytes = fs::read(path)?;
        parse_pgm(&bytes)
    }

    /// Write a binary PGM; each intensity stored as
    /// `round(clamp(v, 0, 1) * 255)` with halves rounded away from zero.
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<(), PgmError> {
        let mut out = Vec::with_capacity(self.data.len() + 32);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.extend(self.data.iter().map(|&v| quantize_u8(v)));
        fs::write(path, out)?;
        Ok(())
    }

    /// Bilinear interpolation over the four surrounding pixels.
    ///
    /// Coordinates are clamped to `[0, width-1] x [0, height-1]`, so the
    /// function is total; at integer coordinates it returns the stored value.
    pub fn bilinear_sample(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let p00 = self.data[y0 * self.width + x0];
        let p10 = self.data[y0 * self.width + x1];
        let p01 = self.data[y1 * self.width + x0];
        let p11 = self.data[y1 * self.width + x1];
        (1.0 - fy) * ((1.0 - fx) * p00 + fx * p10) + fy * ((1.0 - fx) * p01 + fx * p11)
    }

    /// Spatial gradient `(g_x, g_y)` by central differences of the bilinear
    /// surface with step 0.5.
    pub fn spatial_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let h = GRADIENT_STEP;
        let gx = (self.bilinear_sample(x + h, y) - self.bilinear_sample(x - h, y)) / (2.0 * h);
        let gy = (self.bilinear_sample(x, y + h) - self.bilinear_sample(x, y - h)) / (2.0 * h);
        (gx, gy)
    }
}

fn quantize_u8(v: f64) -> u8 {
    // f64::round already rounds halves away from zero.
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn parse_pgm(bytes: &[u8]) -> Result<Image, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(PgmError::BadMagic { found });
    }
    let mut pos = 2;
    let width = read_header_number(bytes, &mut pos)?;
    let height = read_header_number(bytes, &mut pos)?;
    let maxval = read_header_number(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(PgmError::BadHeader(
                "missing whitespace before payload".into(),
            ))
        }
    }
    let expected = width * height;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(PgmError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let data = payload[..expected]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    Ok(Image {
        width,
        height,
        data,
    })
}

/// Read one ASCII decimal token, skipping whitespace and `#` comments.
fn read_header_number(bytes: &[u8], pos: &mut usize) -> Result<usize, PgmError> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return Err(PgmError::BadHeader(format!(
            "expected decimal number at byte {start}"
        )));
    }
    let token = std::str::from_utf8(&bytes[start..*pos]).expect("digits are valid UTF-8");
    token
        .parse::<usize>()
        .map_err(|e| PgmError::BadHeader(format!("number {token:?}: {e}")))
}

/// Displaced frame difference `I_k(r) - I_{k-1}(r - d)`.
///
/// Zero iff the displacement registers the frames perfectly at `r`. Both
/// frames are sampled bilinearly, so `r` may be fractional even though
/// working points are integer-valued in practice.
pub fn dfd(frame_k: &Image, frame_km1: &Image, r: PixelCoord, d: Displacement) -> f64 {
    let displaced = r - d;
    frame_k.bilinear_sample(r.x, r.y) - frame_km1.bilinear_sample(displaced.x, displaced.y)
}

/// A dense per-pixel displacement field.
///
/// Components are stored at `f32` interchange precision so that flow files
/// round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<(f32, f32)>,
}

impl FlowField {
    /// All-zero field.
    pub fn zero(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "flow dimensions must be nonzero");
        Self {
            width,
            height,
            vectors: vec![(0.0, 0.0); width * height],
        }
    }

    pub fn from_vectors(width: usize, height: usize, vectors: Vec<(f32, f32)>) -> Self {
        assert_eq!(
            vectors.len(),
            width * height,
            "vector count must equal width * height"
        );
        Self {
            width,
            height,
            vectors,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Displacement {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        let (dx, dy) = self.vectors[y * self.width + x];
        Displacement::new(f64::from(dx), f64::from(dy))
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: Displacement) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.vectors[y * self.width + x] = (d.dx as f32, d.dy as f32);
    }

    pub fn vectors(&self) -> &[(f32, f32)] {
        &self.vectors
    }

    /// Largest vector magnitude in the field.
    pub fn max_magnitude(&self) -> f64 {
        self.vectors
            .iter()
            .map(|&(dx, dy)| f64::from(dx).hypot(f64::from(dy)))
            .fold(0.0, f64::max)
    }
}

/// Backward-warp `frame_km1` along `flow`:
/// `out(r) = frame_km1(r - d(r))` at every pixel.
pub fn motion_compensate(frame_km1: &Image, flow: &FlowField) -> Image {
    assert!(
        frame_km1.width() == flow.width() && frame_km1.height() == flow.height(),
        "flow dimensions must match the frame"
    );
    Image::from_fn(frame_km1.width(), frame_km1.height(), |x, y| {
        let d = flow.get(x, y);
        frame_km1.bilinear_sample(x as f64 - d.dx, y as f64 - d.dy)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corners_image() -> Image {
        // 10 20
        // 30 40
        Image::from_vec(2, 2, vec![10.0, 20.0, 30.0, 40.0])
    }

    #[test]
    fn load_pgm_scales_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        fs::write(&path, b"P5\n2 2\n255\n\x00\xff\x80\x40").unwrap();
        let img = Image::load_pgm(&path).unwrap();
        assert_eq!(img.width(), 2);
        assert_eq!(img.height(), 2);
        assert_eq!(img.as_slice(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0][..]);
    }

    #[test]
    fn load_pgm_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.pgm");
        fs::write(&path, b"P5\n2 2\n255\n\x00\x01\x02").unwrap();
        match Image::load_pgm(&path) {
            Err(PgmError::TruncatedPayload {
                expected: 4,
                found: 3,
            }) => {}
            other => panic!("expected truncated payload, got {other:?}"),
        }
    }

    #[test]
    fn load_pgm_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"P2\n1 1\n255\n0").unwrap();
        assert!(matches!(
            Image::load_pgm(&path),
            Err(PgmError::BadMagic { .. })
        ));
    }

    #[test]
    fn load_pgm_rejects_maxval() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("max.pgm");
        fs::write(&path, b"P5\n1 1\n65535\n\x00\x00").unwrap();
        assert!(matches!(
            Image::load_pgm(&path),
            Err(PgmError::UnsupportedMaxval(65535))
        ));
    }

    #[test]
    fn load_pgm_accepts_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comment.pgm");
        fs::write(&path, b"P5\n# made by hand\n1 1\n255\n\x7f").unwrap();
        let img = Image::load_pgm(&path).unwrap();
        assert_eq!(img.get(0, 0), 127.0 / 255.0);
    }

    #[test]
    fn save_pgm_rounds_half_away_from_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.pgm");
        // 1.0 -> 255, -0.1 clamps to 0, 0.5*255 = 127.5 -> 128
        let img = Image::from_vec(3, 1, vec![1.0, -0.1, 0.5]);
        img.save_pgm(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[bytes.len() - 3..], &[255, 0, 128]);
    }

    #[test]
    fn pgm_round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.pgm");
        let copy = dir.path().join("rt2.pgm");
        let img = Image::from_fn(13, 7, |x, y| ((x * 31 + y * 7) % 256) as f64 / 255.0);
        img.save_pgm(&path).unwrap();
        let loaded = Image::load_pgm(&path).unwrap();
        loaded.save_pgm(&copy).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&copy).unwrap());
    }

    #[test]
    fn bilinear_identity_at_integer_coordinates() {
        let img = Image::from_fn(5, 4, |x, y| (x * 10 + y) as f64);
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(img.bilinear_sample(x as f64, y as f64), img.get(x, y));
            }
        }
    }

    #[test]
    fn bilinear_center_of_corners() {
        let img = corners_image();
        assert!((img.bilinear_sample(0.5, 0.5) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_quarter_point() {
        let img = corners_image();
        // 10 + 0.25 * (20 - 10)
        assert!((img.bilinear_sample(0.25, 0.0) - 12.5).abs() < 1e-12);
    }

    #[test]
    fn bilinear_clamps_outside() {
        let img = corners_image();
        assert_eq!(img.bilinear_sample(-3.0, -3.0), 10.0);
        assert_eq!(img.bilinear_sample(9.0, 9.0), 40.0);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let img = Image::from_fn(6, 6, |_, _| 0.4);
        for y in 0..6 {
            for x in 0..6 {
                let (gx, gy) = img.spatial_gradient(x as f64, y as f64);
                assert_eq!((gx, gy), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn gradient_exact_on_ramps() {
        let w = 9;
        let h = 7;
        let ramp_x = Image::from_fn(w, h, |x, _| x as f64 / (w - 1) as f64);
        let ramp_y = Image::from_fn(w, h, |_, y| y as f64 / (h - 1) as f64);
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let (gx, gy) = ramp_x.spatial_gradient(x as f64, y as f64);
                assert!((gx - 1.0 / (w - 1) as f64).abs() < 1e-10);
                assert!(gy.abs() < 1e-10);
                let (gx, gy) = ramp_y.spatial_gradient(x as f64, y as f64);
                assert!(gx.abs() < 1e-10);
                assert!((gy - 1.0 / (h - 1) as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dfd_zero_for_identical_frames() {
        let img = Image::from_fn(8, 8, |x, y| ((x * y) % 7) as f64 / 7.0);
        for y in 0..8 {
            for x in 0..8 {
                let r = PixelCoord::new(x as f64, y as f64);
                assert_eq!(dfd(&img, &img, r, Displacement::ZERO), 0.0);
            }
        }
    }

    #[test]
    fn dfd_zero_under_perfect_registration() {
        let prev = Image::from_fn(10, 6, |x, y| ((x * 13 + y * 5) % 11) as f64 / 11.0);
        // frame_k is prev shifted right by one pixel.
        let curr = Image::from_fn(10, 6, |x, y| prev.get(if x == 0 { 0 } else { x - 1 }, y));
        let d = Displacement::new(1.0, 0.0);
        for y in 0..6 {
            for x in 1..10 {
                let r = PixelCoord::new(x as f64, y as f64);
                assert!(dfd(&curr, &prev, r, d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dfd_of_constant_frames() {
        let a = Image::from_fn(4, 4, |_, _| 0.5);
        let b = Image::from_fn(4, 4, |_, _| 0.25);
        let r = PixelCoord::new(2.0, 2.0);
        assert!((dfd(&a, &b, r, Displacement::new(0.7, -1.3)) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn compensate_with_zero_flow_is_identity() {
        let img = Image::from_fn(7, 5, |x, y| ((x + 2 * y) % 9) as f64 / 9.0);
        let flow = FlowField::zero(7, 5);
        assert_eq!(motion_compensate(&img, &flow), img);
    }

    #[test]
    fn compensate_with_integer_flow_shifts() {
        let img = Image::from_fn(8, 5, |x, y| ((3 * x + y) % 13) as f64 / 13.0);
        let mut flow = FlowField::zero(8, 5);
        for y in 0..5 {
            for x in 0..8 {
                flow.set(x, y, Displacement::new(1.0, 0.0));
            }
        }
        let out = motion_compensate(&img, &flow);
        for y in 0..5 {
            for x in 1..8 {
                assert_eq!(out.get(x, y), img.get(x - 1, y));
            }
        }
    }

    #[test]
    fn compensate_half_pixel_on_ramp() {
        let w = 12;
        let ramp = Image::from_fn(w, 4, |x, _| x as f64 / (w - 1) as f64);
        let mut flow = FlowField::zero(w, 4);
        for y in 0..4 {
            for x in 0..w {
                flow.set(x, y, Displacement::new(0.5, 0.0));
            }
        }
        let out = motion_compensate(&ramp, &flow);
        let step = 1.0 / (w - 1) as f64;
        for y in 0..4 {
            for x in 1..w {
                let expected = (x as f64 - 0.5) * step;
                assert!((out.get(x, y) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn compensate_true_flow_recovers_shifted_frame() {
        let prev = Image::from_fn(16, 16, |x, y| {
            0.5 + 0.4 * ((x as f64) * 0.58).sin() * ((y as f64) * 0.37).cos()
        });
        let curr = Image::from_fn(16, 16, |x, y| {
            prev.get(x.saturating_sub(1), if y == 0 { 0 } else { y - 1 })
        });
        let mut flow = FlowField::zero(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                flow.set(x, y, Displacement::new(1.0, 1.0));
            }
        }
        let out = motion_compensate(&prev, &flow);
        for y in 1..16 {
            for x in 1..16 {
                assert!((out.get(x, y) - curr.get(x, y)).abs() < 1e-6);
            }
        }
    }
}
