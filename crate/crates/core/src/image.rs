//! Grayscale images, synthetic phantoms, degradation and PGM I/O.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::operators::BlurOperator;

/// Square grayscale image stored column-major: pixel `(i, j)` lives at `i + j·n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(n: usize, pixels: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize {
                n,
                reason: "side length must be positive",
            });
        }
        Error::check_len("image pixels", n * n, pixels.len())?;
        if !pixels.iter().all(|p| p.is_finite()) {
            return Err(Error::invalid("image pixels must be finite"));
        }
        Ok(Self { n, pixels })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            pixels: vec![0.0; n * n],
        }
    }

    /// Builds an image from a function of `(row, col)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                pixels.push(f(i, j));
            }
        }
        Self { n, pixels }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row + col * self.n]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn vectorize(&self) -> Vec<f64> {
        self.pixels.clone()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.pixels
    }

    pub fn devectorize(vec: Vec<f64>, n: usize) -> Result<Self> {
        Self::new(n, vec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    Checkerboard,
    Ramp,
    Disks,
    TextBars,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 4] = [
        PhantomKind::Checkerboard,
        PhantomKind::Ramp,
        PhantomKind::Disks,
        PhantomKind::TextBars,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::Checkerboard => "checkerboard",
            PhantomKind::Ramp => "ramp",
            PhantomKind::Disks => "disks",
            PhantomKind::TextBars => "text_bars",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "checkerboard" => Ok(PhantomKind::Checkerboard),
            "ramp" => Ok(PhantomKind::Ramp),
            "disks" => Ok(PhantomKind::Disks),
            "text_bars" | "textbars" | "bars" => Ok(PhantomKind::TextBars),
            other => Err(Error::invalid(format!("unknown phantom kind '{other}'"))),
        }
    }
}

/// Generates a deterministic synthetic test image with pixels in `[0, 1]`.
///
/// The checkerboard uses `n/4`-pixel blocks so that its edges survive a wide blur.
pub fn make_phantom(kind: PhantomKind, n: usize, seed: u64) -> Result<Image> {
    if n < 8 {
        return Err(Error::InvalidSize {
            n,
            reason: "phantoms need n >= 8",
        });
    }
    let img = match kind {
        PhantomKind::Checkerboard => {
            let b = n / 4;
            Image::from_fn(n, |i, j| ((i / b + j / b) % 2) as f64)
        }
        PhantomKind::Ramp => {
            let d = 2.0 * (n - 1) as f64;
            Image::from_fn(n, |i, j| (i + j) as f64 / d)
        }
        PhantomKind::Disks => disks(n, seed),
        PhantomKind::TextBars => text_bars(n, seed),
    };
    Ok(img)
}

fn disks(n: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let mut img = Image::zeros(n);
    for _ in 0..6 {
        let cx = rng.random_range(0.15..0.85) * nf;
        let cy = rng.random_range(0.15..0.85) * nf;
        let r = rng.random_range(0.06..0.2) * nf;
        let val = rng.random_range(0.3..1.0);
        for j in 0..n {
            for i in 0..n {
                let (di, dj) = (i as f64 - cy, j as f64 - cx);
                if di * di + dj * dj <= r * r {
                    img.pixels[i + j * n] = val;
                }
            }
        }
    }
    img
}

// Horizontal "text lines" of varying length crossed by a few dimmer vertical strokes.
fn text_bars(n: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (n / 16).max(1);
    let mut img = Image::zeros(n);
    let mut fill = |r0: usize, r1: usize, c0: usize, c1: usize, val: f64| {
        for j in c0..c1.min(n) {
            for i in r0..r1.min(n) {
                img.pixels[i + j * n] = val;
            }
        }
    };
    for t in 0..4 {
        let r0 = n / 8 + t * (n / 5) + rng.random_range(0..=w);
        let len = (3 * n / 4) * (t + 2) / 5 + rng.random_range(0..=w);
        fill(r0, r0 + w, n / 8, n / 8 + len, 1.0);
    }
    for t in 0..3 {
        let c0 = n / 6 + t * (n / 4) + rng.random_range(0..=w);
        fill(n / 10, n - n / 10, c0, c0 + w, 0.6);
    }
    img
}

/// Parameters of the blur-plus-noise degradation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationSpec {
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        Self {
            kernel_size: 17,
            kernel_sigma: 7.0,
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel size must be odd and positive, got {}",
                self.kernel_size
            )));
        }
        if !(self.kernel_sigma > 0.0) {
            return Err(Error::invalid("kernel sigma must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be nonnegative"));
        }
        Ok(())
    }
}

/// Returns `blur(img) + e` with `e` i.i.d. Gaussian of standard deviation `noise_sigma`.
pub fn degrade(img: &Image, spec: &DegradationSpec, blur: &BlurOperator) -> Result<Image> {
    spec.validate()?;
    Error::check_len("blur operator side", img.n(), blur.n())?;
    let mut out = blur.apply(img.pixels())?;
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
        for x in out.iter_mut() {
            *x += normal.sample(&mut rng);
        }
    }
    Image::new(img.n(), out)
}

/// Decodes a binary PGM (`P5`, maxval 255, square).
pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| fmt_err("magic", "missing"))?;
    if magic != b"P5" {
        return Err(fmt_err(
            "magic",
            format!("expected P5, found {}", String::from_utf8_lossy(magic)),
        ));
    }
    let width = header_number(bytes, &mut pos, "width")?;
    let height = header_number(bytes, &mut pos, "height")?;
    let maxval = header_number(bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(fmt_err("maxval", format!("expected 255, found {maxval}")));
    }
    if width != height {
        return Err(fmt_err(
            "width/height",
            format!("image must be square, found {width}x{height}"),
        ));
    }
    if width == 0 {
        return Err(fmt_err("width/height", "image is empty"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < n * n {
        return Err(fmt_err(
            "raster",
            format!("expected {} bytes, found {}", n * n, raster.len()),
        ));
    }
    // PGM rasters are row-major.
    Ok(Image::from_fn(n, |i, j| raster[i * n + j] as f64 / 255.0))
}

/// Encodes an image as binary PGM, clamping to `[0, 1]` and rounding half up.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let n = img.n();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.reserve(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(to_byte(img.get(i, j)));
        }
    }
    out
}

pub(crate) fn to_byte(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

fn fmt_err(field: &'static str, message: impl Into<String>) -> Error {
    Error::Format {
        field,
        message: message.into(),
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize, field: &'static str) -> Result<usize> {
    let tok = next_token(bytes, pos).ok_or_else(|| fmt_err(field, "missing"))?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| fmt_err(field, format!("not a number: {}", String::from_utf8_lossy(tok))))
}
