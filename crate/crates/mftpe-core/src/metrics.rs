//! Statistical measurements on plaintext and ciphertext images:
//! histograms, adjacent-pixel correlation, noise injection, PSNR and
//! storage expansion. Everything that samples is seeded and deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::Image;

/// Per-channel 256-bin pixel counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Histogram {
    pub bins: Vec<Vec<u64>>,
}

pub fn histogram(image: &Image) -> Histogram {
    let mut bins = vec![vec![0u64; 256]; image.channels() as usize];
    for c in 0..image.channels() {
        for &px in image.channel_plane(c) {
            bins[c as usize][px as usize] += 1;
        }
    }
    Histogram { bins }
}

impl Histogram {
    /// Dump as CSV: one row per bin value, one column per channel.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value");
        for c in 0..self.bins.len() {
            out.push_str(&format!(",channel{c}"));
        }
        out.push('\n');
        for v in 0..256 {
            out.push_str(&v.to_string());
            for bins in &self.bins {
                out.push_str(&format!(",{}", bins[v]));
            }
            out.push('\n');
        }
        out
    }
}

/// Neighbor axis for adjacent-pixel sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Horizontal,
    Vertical,
    Diagonal,
}

impl Direction {
    pub const ALL: [Direction; 3] = [
        Direction::Horizontal,
        Direction::Vertical,
        Direction::Diagonal,
    ];

    fn offsets(self) -> (u32, u32) {
        match self {
            Direction::Horizontal => (1, 0),
            Direction::Vertical => (0, 1),
            Direction::Diagonal => (1, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Horizontal => "horizontal",
            Direction::Vertical => "vertical",
            Direction::Diagonal => "diagonal",
        }
    }
}

/// Pearson correlation over `pairs` uniformly sampled adjacent pixel
/// pairs; deterministic for a given seed. Constant samples have no
/// defined coefficient and error out rather than reporting zero.
pub fn correlation(image: &Image, direction: Direction, pairs: u32, seed: u64) -> Result<f64> {
    assert!(pairs >= 100, "need at least 100 sampled pairs");
    let (dx, dy) = direction.offsets();
    if image.width() <= dx || image.height() <= dy {
        // No adjacent pairs exist along this axis.
        return Err(Error::DegenerateVariance(direction.name()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(pairs as usize);
    let mut ys = Vec::with_capacity(pairs as usize);
    for _ in 0..pairs {
        let c = rng.gen_range(0..image.channels());
        let x = rng.gen_range(0..image.width() - dx);
        let y = rng.gen_range(0..image.height() - dy);
        xs.push(image.sample(c, x, y) as f64);
        ys.push(image.sample(c, x + dx, y + dy) as f64);
    }
    let n = pairs as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mx, my) = (mean(&xs), mean(&ys));
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in xs.iter().zip(&ys) {
        cov += (a - mx) * (b - my);
        var_x += (a - mx) * (a - mx);
        var_y += (b - my) * (b - my);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::DegenerateVariance(direction.name()));
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Coefficients for all three directions; `None` marks an undefined
/// (degenerate-variance) direction.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    pub horizontal: Option<f64>,
    pub vertical: Option<f64>,
    pub diagonal: Option<f64>,
    pub pairs: u32,
    pub seed: u64,
}

pub fn correlation_report(image: &Image, pairs: u32, seed: u64) -> CorrelationReport {
    let get = |dir| correlation(image, dir, pairs, seed).ok();
    CorrelationReport {
        horizontal: get(Direction::Horizontal),
        vertical: get(Direction::Vertical),
        diagonal: get(Direction::Diagonal),
        pairs,
        seed,
    }
}

/// Noise model applied to ciphertext payloads.
#[derive(Debug, Clone, Serialize)]
pub enum NoiseKind {
    /// Additive zero-mean Gaussian with the given standard deviation, in
    /// sample units, clamped to `[0, 255]`.
    Gaussian { sigma: f64 },
    /// Each sample independently becomes 0 or 255 with probability
    /// `density`.
    SaltPepper { density: f64 },
    /// Speckle: `x' = clamp(x * (1 + u))` with `u` zero-mean uniform of
    /// the given variance.
    Multiplicative { variance: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

/// Corrupt an image in place, deterministically for a given seed.
pub fn add_noise(image: &mut Image, spec: &NoiseSpec) {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let (w, h, cs) = (image.width(), image.height(), image.channels());
    match spec.kind {
        NoiseKind::Gaussian { sigma } => {
            if sigma == 0.0 {
                return;
            }
            for c in 0..cs {
                for y in 0..h {
                    for x in 0..w {
                        let noise = sigma * standard_normal(&mut rng);
                        let v = image.sample(c, x, y) as f64 + noise;
                        image.set_sample(c, x, y, v.round().clamp(0.0, 255.0) as u8);
                    }
                }
            }
        }
        NoiseKind::SaltPepper { density } => {
            if density == 0.0 {
                return;
            }
            for c in 0..cs {
                for y in 0..h {
                    for x in 0..w {
                        if rng.gen::<f64>() < density {
                            let v = if rng.gen::<bool>() { 255 } else { 0 };
                            image.set_sample(c, x, y, v);
                        }
                    }
                }
            }
        }
        NoiseKind::Multiplicative { variance } => {
            if variance == 0.0 {
                return;
            }
            let half_width = (3.0 * variance).sqrt();
            for c in 0..cs {
                for y in 0..h {
                    for x in 0..w {
                        let u = rng.gen_range(-half_width..=half_width);
                        let v = image.sample(c, x, y) as f64 * (1.0 + u);
                        image.set_sample(c, x, y, v.round().clamp(0.0, 255.0) as u8);
                    }
                }
            }
        }
    }
}

/// Box-Muller, one variate per call.
fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Peak signal-to-noise ratio in dB; infinite for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch(
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels(),
        ));
    }
    let sq_err: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    if sq_err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sq_err / a.data().len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Losslessly-compressed ciphertext bytes over losslessly-compressed
/// plaintext bytes, same codec and settings on both sides (PNG).
pub fn storage_expansion(plain: &Image, cipher: &Image) -> Result<f64> {
    let a = plain.to_png_bytes()?.len() as f64;
    let b = cipher.to_png_bytes()?.len() as f64;
    Ok(b / a)
}
