//! Self-similarity graphs: patch distances, exponential similarities,
//! stride-sampled search areas and per-center normalization.
//!
//! [`compute_ssg_oracle`] is the plain nested-loop reference. Its summation
//! order is fixed and defines the bits every faster path is measured against.

use crate::config::SsgConfig;
use crate::edge_mask::EdgeMask;
use crate::error::{Error, Result};
use crate::image_io::Image;

/// Normalized similarity distributions, one per edge center.
#[derive(Debug, Clone, PartialEq)]
pub struct Ssg {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub search: usize,
    pub window: usize,
    pub h: f64,
    pub stride: usize,
    pub centers: Vec<(usize, usize)>,
    /// Sample displacements shared by every center, row-major.
    pub offsets: Vec<(isize, isize)>,
    /// `centers.len() * offsets.len()` weights, one row per center.
    pub weights: Vec<f64>,
    /// Pre-normalization similarity sum of each center.
    pub norm_constants: Vec<f64>,
}

impl Ssg {
    pub(crate) fn empty_like(img: &Image, cfg: &SsgConfig) -> Self {
        Ssg {
            height: img.height,
            width: img.width,
            channels: img.channels,
            search: cfg.search,
            window: cfg.window,
            h: cfg.h,
            stride: cfg.stride,
            centers: Vec::new(),
            offsets: sample_offsets(cfg),
            weights: Vec::new(),
            norm_constants: Vec::new(),
        }
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn n_offsets(&self) -> usize {
        self.offsets.len()
    }

    /// Weight row of the `i`-th center.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.offsets.len();
        &self.weights[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.offsets.len().max(1))
    }

    /// Index of the `(0, 0)` displacement.
    pub fn self_offset_index(&self) -> usize {
        self.offsets
            .iter()
            .position(|&o| o == (0, 0))
            .expect("offset grid always contains the origin")
    }
}

/// Mean squared difference between the windows centered at `p` and `q`,
/// averaged over channels and window pixels.
pub fn patch_distance(
    img: &Image,
    p: (usize, usize),
    q: (usize, usize),
    window: usize,
) -> Result<f64> {
    let f = (window - 1) / 2;
    for &(row, col) in &[p, q] {
        if row < f || col < f || row + f >= img.height || col + f >= img.width {
            return Err(Error::Bounds {
                row,
                col,
                window,
                height: img.height,
                width: img.width,
            });
        }
    }
    Ok(patch_distance_unchecked(img, p, q, f))
}

fn patch_distance_unchecked(img: &Image, p: (usize, usize), q: (usize, usize), f: usize) -> f64 {
    let k = 2 * f + 1;
    let mut acc = 0.0;
    for ch in 0..img.channels {
        for dy in 0..k {
            for dx in 0..k {
                let a = img.get(p.0 + dy - f, p.1 + dx - f, ch);
                let b = img.get(q.0 + dy - f, q.1 + dx - f, ch);
                acc += (a - b) * (a - b);
            }
        }
    }
    acc / (img.channels * k * k) as f64
}

#[inline]
pub fn similarity(d2: f64, h: f64) -> f64 {
    (-d2 / h).exp()
}

/// Stride grid over the search area, anchored so that `(0, 0)` is a sample.
pub fn sample_offsets(cfg: &SsgConfig) -> Vec<(isize, isize)> {
    sample_offsets_for(cfg.search, cfg.stride)
}

pub fn sample_offsets_for(search: usize, stride: usize) -> Vec<(isize, isize)> {
    let radius = ((search.max(1) - 1) / 2) as isize;
    let step = stride.max(1) as isize;
    let reach = radius / step;
    let axis: Vec<isize> = (-reach..=reach).map(|k| k * step).collect();
    axis.iter()
        .flat_map(|&dr| axis.iter().map(move |&dc| (dr, dc)))
        .collect()
}

/// Fail unless `mask` describes `img` and every center's footprint fits under `cfg`.
pub fn check_mask(img: &Image, mask: &EdgeMask, cfg: &SsgConfig) -> Result<()> {
    if (mask.height, mask.width) != (img.height, img.width) {
        return Err(Error::ShapeMismatch {
            left: format!("image {}x{}", img.height, img.width),
            right: format!("mask {}x{}", mask.height, mask.width),
        });
    }
    let r = cfg.footprint_radius();
    if let Some(&(row, col)) = mask
        .centers
        .iter()
        .find(|&&(row, col)| row < r || col < r || row + r >= img.height || col + r >= img.width)
    {
        return Err(Error::ConfigMismatch(format!(
            "center ({row}, {col}) has a footprint of radius {r} outside the {}x{} image \
             (mask built for Ks={}, Kw={}, config has Ks={}, Kw={})",
            img.height, img.width, mask.search, mask.window, cfg.search, cfg.window
        )));
    }
    Ok(())
}

/// Reference graph construction with plain loops and left-to-right sums.
pub fn compute_ssg_oracle(img: &Image, mask: &EdgeMask, cfg: &SsgConfig) -> Result<Ssg> {
    cfg.validate()?;
    check_mask(img, mask, cfg)?;
    let mut ssg = Ssg::empty_like(img, cfg);
    let f = cfg.window_radius();
    let n = ssg.offsets.len();
    ssg.weights.reserve(mask.centers.len() * n);
    let mut sims = vec![0.0; n];
    for &p in &mask.centers {
        let mut eps = 0.0;
        for (s, &(dr, dc)) in sims.iter_mut().zip(&ssg.offsets) {
            let q = ((p.0 as isize + dr) as usize, (p.1 as isize + dc) as usize);
            *s = similarity(patch_distance_unchecked(img, p, q, f), cfg.h);
            eps += *s;
        }
        ssg.weights.extend(sims.iter().map(|s| s / eps));
        ssg.norm_constants.push(eps);
        ssg.centers.push(p);
    }
    Ok(ssg)
}

/// Multiply-adds spent on patch distances: centers x offsets x channels x window area.
pub fn estimate_cost(cfg: &SsgConfig, mask: &EdgeMask, channels: usize) -> u64 {
    let offsets = sample_offsets(cfg).len() as u64;
    mask.centers.len() as u64 * offsets * channels as u64 * (cfg.window * cfg.window) as u64
}
