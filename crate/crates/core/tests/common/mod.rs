#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssgloss::{compute_ssg_oracle, ssl_forward, EdgeMask, Image, SsgConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mid-gray image with uniform perturbations of the given amplitude.
pub fn textured(h: usize, w: usize, c: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> Image {
    let data = (0..h * w * c)
        .map(|_| 0.5 + rng.gen_range(-amplitude..=amplitude))
        .collect();
    Image::new(h, w, c, data).unwrap()
}

pub fn perturbed(img: &Image, amplitude: f64, rng: &mut ChaCha8Rng) -> Image {
    let mut out = img.clone();
    for v in &mut out.data {
        *v = (*v + rng.gen_range(-amplitude..=amplitude)).clamp(0.0, 1.0);
    }
    out
}

/// Every admissible pixel of an `h x w` image is a center.
pub fn full_mask(h: usize, w: usize, cfg: &SsgConfig) -> EdgeMask {
    let r = cfg.footprint_radius();
    let centers: Vec<_> = (r..h.saturating_sub(r))
        .flat_map(|row| (r..w.saturating_sub(r)).map(move |col| (row, col)))
        .collect();
    EdgeMask::with_centers(h, w, &centers, cfg).unwrap()
}

pub fn ssl_value(hr: &Image, sr: &Image, mask: &EdgeMask, cfg: &SsgConfig) -> f64 {
    let a = compute_ssg_oracle(hr, mask, cfg).unwrap();
    let b = compute_ssg_oracle(sr, mask, cfg).unwrap();
    ssl_forward(&a, &b, cfg).unwrap().ssl
}

/// Central differences of the forward loss with respect to every SR pixel.
pub fn finite_difference_gradient(
    hr: &Image,
    sr: &Image,
    mask: &EdgeMask,
    cfg: &SsgConfig,
    step: f64,
) -> Vec<f64> {
    let mut work = sr.clone();
    (0..sr.data.len())
        .map(|i| {
            let orig = work.data[i];
            work.data[i] = orig + step;
            let up = ssl_value(hr, &work, mask, cfg);
            work.data[i] = orig - step;
            let down = ssl_value(hr, &work, mask, cfg);
            work.data[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest entrywise error, relative to the largest reference magnitude.
pub fn max_relative_error(analytic: &[f32], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = analytic
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, r)| m.max((f64::from(*a) - r).abs()));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

pub fn max_abs_diff_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_abs_diff_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max(f64::from((x - y).abs())))
}

/// True when some central-difference stencil point `sr ± step·e_i` flips the
/// sign of a `q - p` entry. The l1 term has a kink there, and a difference
/// quotient straddling it does not approximate the derivative.
pub fn straddles_kink(hr: &Image, sr: &Image, mask: &EdgeMask, cfg: &SsgConfig, step: f64) -> bool {
    let p = compute_ssg_oracle(hr, mask, cfg).unwrap();
    let side = |img: &Image| -> Vec<f64> {
        let q = compute_ssg_oracle(img, mask, cfg).unwrap();
        q.weights
            .iter()
            .zip(&p.weights)
            .map(|(q, p)| (q - p).signum() * f64::from(u8::from(q != p)))
            .collect()
    };
    let base = side(sr);
    let mut work = sr.clone();
    for i in 0..sr.data.len() {
        for delta in [step, -step] {
            work.data[i] = sr.data[i] + delta;
            if side(&work) != base {
                return true;
            }
        }
        work.data[i] = sr.data[i];
    }
    false
}

/// Draws (hr, sr) pairs until one has no kink inside the difference stencil.
pub fn smooth_pair(
    h: usize,
    w: usize,
    c: usize,
    mask: &EdgeMask,
    cfg: &SsgConfig,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> (Image, Image) {
    loop {
        let hr = textured(h, w, c, 0.05, rng);
        let sr = perturbed(&hr, 0.1, rng);
        if !straddles_kink(&hr, &sr, mask, cfg, step) {
            return (hr, sr);
        }
    }
}
