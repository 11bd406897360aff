//! Parallel graph construction and backward pass.
//!
//! Centers are grouped into spatial tiles. Tiles are the unit of parallel
//! work and their layout depends only on the plan geometry, never on the
//! worker count, so results are bit-identical for any `n_workers`.
//! Gradient contributions go into a private buffer per tile which are then
//! merged in tile order.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::config::SsgConfig;
use crate::edge_mask::EdgeMask;
use crate::error::{Error, Result};
use crate::image_io::Image;
use crate::loss::{
    center_terms, check_pair, distance_coefficients, CenterLoss, GradientField, LossReport,
};
use crate::ssg::{check_mask, similarity, Ssg};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelPlan {
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub n_workers: usize,
    /// Cache per-window sums of squares and compute distances as
    /// `|a|^2 + |b|^2 - 2 a.b`.
    pub precompute_sq: bool,
}

impl Default for KernelPlan {
    fn default() -> Self {
        KernelPlan {
            tile_rows: 32,
            tile_cols: 32,
            n_workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            precompute_sq: false,
        }
    }
}

impl KernelPlan {
    pub fn with_workers(n_workers: usize) -> Self {
        KernelPlan {
            n_workers,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tile_rows == 0 || self.tile_cols == 0 {
            return Err(Error::InvalidConfig(
                "tile dimensions must be at least 1".into(),
            ));
        }
        if self.n_workers == 0 {
            return Err(Error::InvalidConfig("n_workers must be at least 1".into()));
        }
        Ok(())
    }

    fn run<R: Send>(&self, job: impl FnOnce() -> R + Send) -> Result<R> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.n_workers)
            .build()
            .map_err(|e| {
                Error::InvalidConfig(format!("cannot start {} workers: {e}", self.n_workers))
            })?;
        Ok(pool.install(job))
    }

    /// Center indices grouped by tile, tiles in row-major order.
    fn tiles(&self, centers: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut tiles: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, &(r, c)) in centers.iter().enumerate() {
            tiles
                .entry((r / self.tile_rows, c / self.tile_cols))
                .or_default()
                .push(i);
        }
        tiles.into_values().collect()
    }
}

/// Runs `job` compiled for AVX2 when the CPU has it.
///
/// Only the vector width changes. Accumulation order is spelled out in the
/// kernels and nothing is fused, so both paths give the same bits.
#[inline(always)]
fn wide<R>(job: impl FnOnce() -> R) -> R {
    #[cfg(target_arch = "x86_64")]
    {
        #[target_feature(enable = "avx2")]
        fn avx2<R>(job: impl FnOnce() -> R) -> R {
            job()
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { avx2(job) };
        }
    }
    job()
}

/// Row-slice view of an image for window arithmetic.
struct Windows<'a> {
    data: &'a [f64],
    row_stride: usize,
    channels: usize,
    radius: usize,
    side: usize,
    span: usize,
    /// Sum of squares of the window centered at each pixel (interior only).
    sq: Option<Vec<f64>>,
    width: usize,
}

impl<'a> Windows<'a> {
    fn new(img: &'a Image, window: usize, precompute_sq: bool) -> Self {
        let mut w = Windows {
            data: &img.data,
            row_stride: img.width * img.channels,
            channels: img.channels,
            radius: (window - 1) / 2,
            side: window,
            span: window * img.channels,
            sq: None,
            width: img.width,
        };
        if precompute_sq {
            w.sq = Some(window_square_sums(img, window));
        }
        w
    }

    #[inline(always)]
    fn start(&self, r: usize, c: usize) -> usize {
        (r - self.radius) * self.row_stride + (c - self.radius) * self.channels
    }

    #[inline(always)]
    fn distance(&self, p: (usize, usize), q: (usize, usize)) -> f64 {
        self.distances(p, [q])[0]
    }

    /// Distances from `p` to `N` windows at once. Each has its own
    /// accumulators, so the result for a given `q` does not depend on `N`.
    #[inline(always)]
    fn distances<const N: usize>(&self, p: (usize, usize), qs: [(usize, usize); N]) -> [f64; N] {
        let raw = match &self.sq {
            None => self.row_sums(p, &qs, |x, z| (x - z) * (x - z)),
            Some(sq) => {
                let dots = self.row_sums(p, &qs, |x, z| x * z);
                let na = sq[p.0 * self.width + p.1];
                std::array::from_fn(|k| {
                    let nb = sq[qs[k].0 * self.width + qs[k].1];
                    (na + nb - 2.0 * dots[k]).max(0.0)
                })
            }
        };
        let norm = (self.channels * self.side * self.side) as f64;
        raw.map(|v| v / norm)
    }

    #[inline(always)]
    fn row_sums<const N: usize>(
        &self,
        p: (usize, usize),
        qs: &[(usize, usize); N],
        term: impl Fn(f64, f64) -> f64,
    ) -> [f64; N] {
        let a0 = self.start(p.0, p.1);
        let b0: [usize; N] = std::array::from_fn(|k| self.start(qs[k].0, qs[k].1));
        let whole = self.span / 4 * 4;
        // a ragged row end is covered by the last four elements, with the
        // lanes already counted switched off
        let tail = (self.span > whole && self.span >= 4).then(|| {
            let skip = 4 - (self.span - whole);
            let mask: [f64; 4] = std::array::from_fn(|l| if l < skip { 0.0 } else { 1.0 });
            (self.span - 4, mask)
        });
        let mut acc = [[0.0f64; 4]; N];
        for y in 0..self.side {
            let off = y * self.row_stride;
            let a = &self.data[a0 + off..][..self.span];
            let b: [&[f64]; N] = std::array::from_fn(|k| &self.data[b0[k] + off..][..self.span]);
            for j in (0..whole).step_by(4) {
                let x: [f64; 4] = a[j..j + 4].try_into().unwrap();
                for k in 0..N {
                    let z: [f64; 4] = b[k][j..j + 4].try_into().unwrap();
                    for l in 0..4 {
                        acc[k][l] += term(x[l], z[l]);
                    }
                }
            }
            match tail {
                Some((j, mask)) => {
                    let x: [f64; 4] = a[j..j + 4].try_into().unwrap();
                    for k in 0..N {
                        let z: [f64; 4] = b[k][j..j + 4].try_into().unwrap();
                        for l in 0..4 {
                            acc[k][l] += mask[l] * term(x[l], z[l]);
                        }
                    }
                }
                None => {
                    for i in whole..self.span {
                        for k in 0..N {
                            acc[k][0] += term(a[i], b[k][i]);
                        }
                    }
                }
            }
        }
        acc.map(|v| (v[0] + v[1]) + (v[2] + v[3]))
    }
}

/// Box sums of per-pixel squared intensity over `window x window` neighborhoods.
fn window_square_sums(img: &Image, window: usize) -> Vec<f64> {
    let (h, w) = (img.height, img.width);
    let f = (window - 1) / 2;
    // integral image with a zero border row and column
    let mut integral = vec![0.0f64; (h + 1) * (w + 1)];
    for r in 0..h {
        let mut row_sum = 0.0;
        for c in 0..w {
            let base = (r * w + c) * img.channels;
            row_sum += img.data[base..base + img.channels]
                .iter()
                .map(|v| v * v)
                .sum::<f64>();
            integral[(r + 1) * (w + 1) + c + 1] = integral[r * (w + 1) + c + 1] + row_sum;
        }
    }
    let mut out = vec![0.0; h * w];
    if h < window || w < window {
        return out;
    }
    for r in f..h - f {
        for c in f..w - f {
            let (r0, c0, r1, c1) = (r - f, c - f, r + f + 1, c + f + 1);
            out[r * w + c] = integral[r1 * (w + 1) + c1]
                - integral[r0 * (w + 1) + c1]
                - integral[r1 * (w + 1) + c0]
                + integral[r0 * (w + 1) + c0];
        }
    }
    out
}

#[inline(always)]
fn center_row(
    win: &Windows<'_>,
    p: (usize, usize),
    offsets: &[(isize, isize)],
    h: f64,
    out: &mut [f64],
) -> f64 {
    let at =
        |&(dr, dc): &(isize, isize)| ((p.0 as isize + dr) as usize, (p.1 as isize + dc) as usize);
    let mut eps = 0.0;
    let mut quads = offsets.chunks_exact(4);
    let mut cells = out.chunks_exact_mut(4);
    for (quad, cell) in (&mut quads).zip(&mut cells) {
        let d = win.distances(p, [at(&quad[0]), at(&quad[1]), at(&quad[2]), at(&quad[3])]);
        for (s, d) in cell.iter_mut().zip(d) {
            *s = similarity(d, h);
            eps += *s;
        }
    }
    for (s, o) in cells.into_remainder().iter_mut().zip(quads.remainder()) {
        *s = similarity(win.distance(p, at(o)), h);
        eps += *s;
    }
    let inv = 1.0 / eps;
    for s in out.iter_mut() {
        *s *= inv;
    }
    eps
}

fn build_ssg(img: &Image, mask: &EdgeMask, cfg: &SsgConfig, plan: &KernelPlan) -> Ssg {
    let mut ssg = Ssg::empty_like(img, cfg);
    if mask.centers.is_empty() {
        return ssg;
    }
    let n = ssg.offsets.len();
    let win = Windows::new(img, cfg.window, plan.precompute_sq);
    let offsets = &ssg.offsets;
    let tiles = plan.tiles(&mask.centers);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = tiles
        .par_iter()
        .map(|tile| {
            wide(
                #[inline(always)]
                || {
                    let mut weights = vec![0.0; tile.len() * n];
                    let mut eps = Vec::with_capacity(tile.len());
                    for (row, &ci) in weights.chunks_exact_mut(n).zip(tile) {
                        eps.push(center_row(&win, mask.centers[ci], offsets, cfg.h, row));
                    }
                    (weights, eps)
                },
            )
        })
        .collect();
    let total = mask.centers.len();
    ssg.weights = vec![0.0; total * n];
    ssg.norm_constants = vec![0.0; total];
    for (tile, (weights, eps)) in tiles.iter().zip(parts) {
        for (k, &ci) in tile.iter().enumerate() {
            ssg.weights[ci * n..(ci + 1) * n].copy_from_slice(&weights[k * n..(k + 1) * n]);
            ssg.norm_constants[ci] = eps[k];
        }
    }
    ssg.centers = mask.centers.clone();
    ssg
}

/// Same graph as [`crate::ssg::compute_ssg_oracle`], computed tile-parallel.
pub fn compute_ssg_fast(
    img: &Image,
    mask: &EdgeMask,
    cfg: &SsgConfig,
    plan: &KernelPlan,
) -> Result<Ssg> {
    cfg.validate()?;
    plan.validate()?;
    check_mask(img, mask, cfg)?;
    if mask.centers.is_empty() {
        return Ok(Ssg::empty_like(img, cfg));
    }
    plan.run(|| build_ssg(img, mask, cfg, plan))
}

/// Gradient buffer covering one tile's footprint.
struct TileGrad {
    row0: usize,
    col0: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[inline(always)]
fn tile_gradient(
    img: &Image,
    tile: &[usize],
    hr: &Ssg,
    sr: &Ssg,
    cfg: &SsgConfig,
) -> Option<TileGrad> {
    let c = img.channels;
    let reach = cfg.footprint_radius();
    let f = cfg.window_radius();
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (usize::MAX, 0, usize::MAX, 0);
    for &ci in tile {
        let (r, col) = sr.centers[ci];
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(col);
        cmax = cmax.max(col);
    }
    let (row0, col0) = (rmin - reach, cmin - reach);
    let rows = rmax + reach + 1 - row0;
    let cols = cmax + reach + 1 - col0;
    let mut grad = TileGrad {
        row0,
        col0,
        rows,
        cols,
        data: vec![0.0; rows * cols * c],
    };
    let img_stride = img.width * c;
    let loc_stride = cols * c;
    let span = cfg.window * c;
    let norm = 2.0 / (c * cfg.window * cfg.window) as f64;
    let mut coeffs = vec![0.0; sr.n_offsets()];
    // p's own window is written once per center; q windows are updated in place
    let mut own = vec![0.0; cfg.window * span];
    let mut touched = false;
    for &ci in tile {
        if !distance_coefficients(hr.row(ci), sr.row(ci), cfg, &mut coeffs) {
            continue;
        }
        touched = true;
        own.fill(0.0);
        let (pr, pc) = sr.centers[ci];
        for (&coef, &(dr, dc)) in coeffs.iter().zip(&sr.offsets) {
            if coef == 0.0 || (dr, dc) == (0, 0) {
                continue;
            }
            let k = coef * norm;
            let (qr, qc) = ((pr as isize + dr) as usize, (pc as isize + dc) as usize);
            for (y, own_row) in own.chunks_exact_mut(span).enumerate() {
                let a0 = (pr - f + y) * img_stride + (pc - f) * c;
                let b0 = (qr - f + y) * img_stride + (qc - f) * c;
                let a = &img.data[a0..a0 + span];
                let b = &img.data[b0..b0 + span];
                let gq0 = (qr - f + y - row0) * loc_stride + (qc - f - col0) * c;
                push_pull(k, a, b, own_row, &mut grad.data[gq0..gq0 + span]);
            }
        }
        for (y, own_row) in own.chunks_exact(span).enumerate() {
            let gp0 = (pr - f + y - row0) * loc_stride + (pc - f - col0) * c;
            for (g, o) in grad.data[gp0..gp0 + span].iter_mut().zip(own_row) {
                *g += o;
            }
        }
    }
    touched.then_some(grad)
}

/// `own += k (a - b)` and `other -= k (a - b)`, elementwise.
#[inline(always)]
fn push_pull(k: f64, a: &[f64], b: &[f64], own: &mut [f64], other: &mut [f64]) {
    let n = a.len();
    let (b, own, other) = (&b[..n], &mut own[..n], &mut other[..n]);
    for i in 0..n {
        let d = k * (a[i] - b[i]);
        own[i] += d;
        other[i] -= d;
    }
}

/// Parallel counterpart of [`crate::loss::ssl_backward`].
pub fn ssl_backward_fast(
    img_hr: &Image,
    img_sr: &Image,
    mask: &EdgeMask,
    cfg: &SsgConfig,
    plan: &KernelPlan,
) -> Result<(LossReport, GradientField)> {
    check_pair(img_hr, img_sr)?;
    cfg.validate()?;
    plan.validate()?;
    check_mask(img_sr, mask, cfg)?;
    let (h, w, c) = img_sr.shape();
    if mask.centers.is_empty() {
        return Ok((
            LossReport::from_centers(Vec::new(), cfg.alpha),
            GradientField::zeros(h, w, c),
        ));
    }
    plan.run(|| {
        let hr = build_ssg(img_hr, mask, cfg, plan);
        let sr = build_ssg(img_sr, mask, cfg, plan);
        let per_center: Vec<CenterLoss> = (0..hr.n_centers())
            .into_par_iter()
            .map(|i| {
                let (kl, l1) = center_terms(hr.row(i), sr.row(i), cfg.eps_log);
                CenterLoss {
                    center: hr.centers[i],
                    kl,
                    l1,
                }
            })
            .collect();
        let report = LossReport::from_centers(per_center, cfg.alpha);

        let tiles = plan.tiles(&mask.centers);
        let parts: Vec<Option<TileGrad>> = tiles
            .par_iter()
            .map(|tile| {
                wide(
                    #[inline(always)]
                    || tile_gradient(img_sr, tile, &hr, &sr, cfg),
                )
            })
            .collect();
        let mut acc = vec![0.0f64; h * w * c];
        for part in parts.into_iter().flatten() {
            let span = part.cols * c;
            for r in 0..part.rows {
                let dst = ((part.row0 + r) * w + part.col0) * c;
                for (g, v) in acc[dst..dst + span]
                    .iter_mut()
                    .zip(&part.data[r * span..(r + 1) * span])
                {
                    *g += v;
                }
            }
        }
        let scale = 1.0 / report.n_centers as f64;
        (report, GradientField::from_f64(h, w, c, &acc, scale))
    })
}
