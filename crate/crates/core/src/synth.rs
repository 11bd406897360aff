//! Seeded synthetic images for demos, benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image_io::Image;

pub fn uniform_noise(height: usize, width: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..height * width * channels)
        .map(|_| rng.gen::<f64>())
        .collect();
    Image {
        height,
        width,
        channels,
        data,
    }
}

/// Vertical hard-edged stripes alternating between 0.2 and 0.8.
pub fn stripes(height: usize, width: usize, channels: usize, period: usize) -> Image {
    let half = (period / 2).max(1);
    let mut img = Image::zeros(height, width, channels);
    for r in 0..height {
        for c in 0..width {
            let v = if (c / half).is_multiple_of(2) { 0.2 } else { 0.8 };
            for ch in 0..channels {
                let i = img.index(r, c, ch);
                img.data[i] = v;
            }
        }
    }
    img
}

/// `img` plus independent uniform noise in `[-sigma, sigma]`, clamped to [0, 1].
pub fn with_uniform_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    if sigma > 0.0 {
        for v in &mut out.data {
            *v += rng.gen_range(-sigma..=sigma);
        }
    }
    out.clamp_unit();
    out
}

/// Multi-octave value noise, octave amplitude growing as sqrt(scale) and the
/// finest octave two pixels wide. At t = 20 about 7-10% of pixels are edges,
/// in the range of ordinary photographs.
pub fn natural_like(height: usize, width: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let luma = value_noise(height, width, &mut rng, 1.0);
    let mut img = Image::zeros(height, width, channels);
    for ch in 0..channels {
        let tint = if channels > 1 {
            value_noise(height, width, &mut rng, 0.15)
        } else {
            vec![0.0; height * width]
        };
        for i in 0..height * width {
            img.data[i * channels + ch] = luma[i] + tint[i];
        }
    }
    let (lo, hi) = img
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = (hi - lo).max(1e-12);
    for v in &mut img.data {
        *v = 0.05 + 0.9 * (*v - lo) / span;
    }
    img
}

fn value_noise(height: usize, width: usize, rng: &mut ChaCha8Rng, gain: f64) -> Vec<f64> {
    let mut out = vec![0.0; height * width];
    let mut cell = 32usize;
    while cell >= 2 {
        let gh = height / cell + 2;
        let gw = width / cell + 2;
        let grid: Vec<f64> = (0..gh * gw).map(|_| rng.gen::<f64>() - 0.5).collect();
        let amp = gain * (cell as f64).sqrt();
        for r in 0..height {
            let fy = r as f64 / cell as f64;
            let (y0, ty) = (fy.floor() as usize, fy.fract());
            for c in 0..width {
                let fx = c as f64 / cell as f64;
                let (x0, tx) = (fx.floor() as usize, fx.fract());
                let g = |y: usize, x: usize| grid[y * gw + x];
                let top = g(y0, x0) * (1.0 - tx) + g(y0, x0 + 1) * tx;
                let bottom = g(y0 + 1, x0) * (1.0 - tx) + g(y0 + 1, x0 + 1) * tx;
                out[r * width + c] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
        cell /= 2;
    }
    out
}
