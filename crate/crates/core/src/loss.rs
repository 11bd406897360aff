//! The self-similarity loss, its composite objectives and its analytic gradient.
//!
//! Per center, with `p` the ground-truth weights and `q` the reconstruction
//! weights over the shared offset grid:
//!
//! ```text
//! kl  = sum_r p_r ln(p_r / max(q_r, eps_log))      (terms with p_r == 0 or p_r == q_r are 0)
//! l1  = sum_r |q_r - p_r|
//! ssl = mean(kl) + alpha * mean(l1)
//! ```
//!
//! The backward pass follows the chain through normalization, the
//! exponential similarity and the patch distance, and scatters into the
//! reconstruction image only.

use serde::{Deserialize, Serialize};

use crate::config::{CompositeWeights, Mode, SsgConfig};
use crate::edge_mask::EdgeMask;
use crate::error::{Error, Result};
use crate::image_io::Image;
use crate::ssg::{compute_ssg_oracle, Ssg};

/// Partial derivatives of the loss with respect to reconstruction pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl GradientField {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        GradientField {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub(crate) fn from_f64(
        height: usize,
        width: usize,
        channels: usize,
        acc: &[f64],
        scale: f64,
    ) -> Self {
        GradientField {
            height,
            width,
            channels,
            data: acc.iter().map(|&g| (g * scale) as f32).collect(),
        }
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterLoss {
    pub center: (usize, usize),
    pub kl: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub kl: f64,
    pub l1: f64,
    pub ssl: f64,
    pub n_centers: usize,
    pub alpha: f64,
    pub reduction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_center: Option<Vec<CenterLoss>>,
}

impl LossReport {
    /// Mean-reduce per-center terms, summing in center order.
    pub(crate) fn from_centers(per_center: Vec<CenterLoss>, alpha: f64) -> Self {
        let n = per_center.len();
        let (mut kl, mut l1) = (0.0, 0.0);
        for c in &per_center {
            kl += c.kl;
            l1 += c.l1;
        }
        if n > 0 {
            kl /= n as f64;
            l1 /= n as f64;
        }
        LossReport {
            kl,
            l1,
            ssl: kl + alpha * l1,
            n_centers: n,
            alpha,
            reduction: "mean-over-centers".into(),
            per_center: Some(per_center),
        }
    }

    pub fn without_per_center(mut self) -> Self {
        self.per_center = None;
        self
    }
}

/// KL and L1 terms of one center.
pub fn center_terms(p: &[f64], q: &[f64], eps_log: f64) -> (f64, f64) {
    let mut kl = 0.0;
    let mut l1 = 0.0;
    for (&pr, &qr) in p.iter().zip(q) {
        if pr > 0.0 && pr != qr {
            kl += pr * (pr / qr.max(eps_log)).ln();
        }
        l1 += (qr - pr).abs();
    }
    (kl, l1)
}

/// Writes `d loss_i / d d2_r` for every offset `r` of one center into `out`.
///
/// With `g_r = d loss / d q_r` and `gbar = sum_r g_r q_r`, the derivative
/// through normalization and the exponential is `-(q_r / h) (g_r - gbar)`.
/// `q_r g_r` is formed directly so underflowed weights never divide.
/// Returns false (and leaves `out` zeroed) when the two rows are identical.
pub fn distance_coefficients(p: &[f64], q: &[f64], cfg: &SsgConfig, out: &mut [f64]) -> bool {
    out.iter_mut().for_each(|v| *v = 0.0);
    if p == q {
        return false;
    }
    let mut gbar = 0.0;
    for ((o, &pr), &qr) in out.iter_mut().zip(p).zip(q) {
        let kl = if qr > cfg.eps_log { -pr } else { 0.0 };
        let diff = qr - pr;
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        let qg = kl + cfg.alpha * sign * qr;
        *o = qg;
        gbar += qg;
    }
    for (o, &qr) in out.iter_mut().zip(q) {
        *o = -(*o - qr * gbar) / cfg.h;
    }
    true
}

pub fn check_graphs(hr: &Ssg, sr: &Ssg) -> Result<()> {
    if hr.centers != sr.centers {
        return Err(Error::GraphMismatch(format!(
            "center lists differ ({} vs {} centers)",
            hr.centers.len(),
            sr.centers.len()
        )));
    }
    if hr.offsets != sr.offsets {
        return Err(Error::GraphMismatch(format!(
            "offset grids differ ({} vs {} offsets)",
            hr.offsets.len(),
            sr.offsets.len()
        )));
    }
    Ok(())
}

/// Loss between the ground-truth graph and the reconstruction graph.
pub fn ssl_forward(ssg_hr: &Ssg, ssg_sr: &Ssg, cfg: &SsgConfig) -> Result<LossReport> {
    check_graphs(ssg_hr, ssg_sr)?;
    let per_center = ssg_hr
        .centers
        .iter()
        .enumerate()
        .map(|(i, &center)| {
            let (kl, l1) = center_terms(ssg_hr.row(i), ssg_sr.row(i), cfg.eps_log);
            CenterLoss { center, kl, l1 }
        })
        .collect();
    Ok(LossReport::from_centers(per_center, cfg.alpha))
}

pub(crate) fn check_pair(hr: &Image, sr: &Image) -> Result<()> {
    if hr.shape() != sr.shape() {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}x{}", hr.height, hr.width, hr.channels),
            right: format!("{}x{}x{}", sr.height, sr.width, sr.channels),
        });
    }
    Ok(())
}

/// Reference backward pass: oracle graphs, then a center-ordered scatter.
pub fn ssl_backward(
    img_hr: &Image,
    img_sr: &Image,
    mask: &EdgeMask,
    cfg: &SsgConfig,
) -> Result<(LossReport, GradientField)> {
    check_pair(img_hr, img_sr)?;
    let ssg_hr = compute_ssg_oracle(img_hr, mask, cfg)?;
    let ssg_sr = compute_ssg_oracle(img_sr, mask, cfg)?;
    let report = ssl_forward(&ssg_hr, &ssg_sr, cfg)?;

    let (h, w, c) = img_sr.shape();
    let mut acc = vec![0.0f64; h * w * c];
    let f = cfg.window_radius() as isize;
    let norm = 2.0 / (c * cfg.window * cfg.window) as f64;
    let mut coeffs = vec![0.0; ssg_sr.n_offsets()];
    for (i, &(pr, pc)) in ssg_sr.centers.iter().enumerate() {
        if !distance_coefficients(ssg_hr.row(i), ssg_sr.row(i), cfg, &mut coeffs) {
            continue;
        }
        for (&coef, &(dr, dc)) in coeffs.iter().zip(&ssg_sr.offsets) {
            let k = coef * norm;
            for y in -f..=f {
                for x in -f..=f {
                    let prow = (pr as isize + y) as usize;
                    let pcol = (pc as isize + x) as usize;
                    let qrow = (pr as isize + dr + y) as usize;
                    let qcol = (pc as isize + dc + x) as usize;
                    for ch in 0..c {
                        let ip = img_sr.index(prow, pcol, ch);
                        let iq = img_sr.index(qrow, qcol, ch);
                        let diff = img_sr.data[ip] - img_sr.data[iq];
                        acc[ip] += k * diff;
                        acc[iq] -= k * diff;
                    }
                }
            }
        }
    }
    let scale = if report.n_centers > 0 {
        1.0 / report.n_centers as f64
    } else {
        0.0
    };
    Ok((report, GradientField::from_f64(h, w, c, &acc, scale)))
}

/// Mean absolute pixel difference.
pub fn pixel_l1(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    if a.data.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data.len() as f64)
}

/// `original + beta * ssl`, plus `gamma * pixel_l1` in DM mode.
pub fn composite_total(original_loss: f64, ssl: f64, pixel_l1: f64, w: &CompositeWeights) -> f64 {
    match w.mode {
        Mode::Gan => original_loss + w.beta * ssl,
        Mode::Dm => original_loss + w.beta * ssl + w.gamma * pixel_l1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssg::sample_offsets_for;

    fn two_atom(p: [f64; 2], q: [f64; 2]) -> (Ssg, Ssg) {
        let base = Ssg {
            height: 1,
            width: 1,
            channels: 1,
            search: 3,
            window: 1,
            h: 0.004,
            stride: 1,
            centers: vec![(0, 0)],
            offsets: vec![(0, 0), (0, 1)],
            weights: p.to_vec(),
            norm_constants: vec![1.0],
        };
        let other = Ssg {
            weights: q.to_vec(),
            ..base.clone()
        };
        (base, other)
    }

    #[test]
    fn two_atom_example() {
        let cfg = SsgConfig::default();
        let (hr, sr) = two_atom([0.5, 0.5], [0.8, 0.2]);
        let r = ssl_forward(&hr, &sr, &cfg).unwrap();
        // 0.5 ln(0.625) + 0.5 ln(2.5)
        let kl = 0.5 * (0.5f64 / 0.8).ln() + 0.5 * (0.5f64 / 0.2).ln();
        assert!((kl - 0.223_143_551_314_209_7).abs() < 1e-15);
        assert!((r.kl - kl).abs() < 1e-15);
        assert!((r.l1 - 0.6).abs() < 1e-15);
        assert_eq!(r.ssl, r.kl + r.l1);

        // KL is asymmetric, L1 is not
        let back = ssl_forward(&sr, &hr, &cfg).unwrap();
        assert!((back.kl - r.kl).abs() > 1e-3);
        assert_eq!(back.l1, r.l1);
    }

    #[test]
    fn identical_graphs_cost_nothing() {
        let cfg = SsgConfig::default();
        let (hr, _) = two_atom([0.3, 0.7], [0.0, 0.0]);
        let r = ssl_forward(&hr, &hr, &cfg).unwrap();
        assert_eq!((r.kl, r.l1, r.ssl), (0.0, 0.0, 0.0));
    }

    #[test]
    fn tiny_weights_are_floored() {
        let cfg = SsgConfig::default();
        let (hr, sr) = two_atom([0.5, 0.5], [1.0, 0.0]);
        let r = ssl_forward(&hr, &sr, &cfg).unwrap();
        let expected = 0.5 * (0.5f64).ln() + 0.5 * (0.5 / 1e-12f64).ln();
        assert!((r.kl - expected).abs() < 1e-12);
        assert!(r.kl.is_finite());
    }

    #[test]
    fn mismatched_graphs() {
        let cfg = SsgConfig::default();
        let (hr, sr) = two_atom([0.5, 0.5], [0.8, 0.2]);
        let moved = Ssg {
            centers: vec![(0, 1)],
            ..sr.clone()
        };
        assert!(matches!(
            ssl_forward(&hr, &moved, &cfg),
            Err(Error::GraphMismatch(_))
        ));
        let regrid = Ssg {
            offsets: sample_offsets_for(3, 1)[..2].to_vec(),
            ..sr
        };
        assert!(matches!(
            ssl_forward(&hr, &regrid, &cfg),
            Err(Error::GraphMismatch(_))
        ));
    }

    #[test]
    fn empty_graphs_report_zero() {
        let cfg = SsgConfig::default();
        let (mut hr, _) = two_atom([0.5, 0.5], [0.5, 0.5]);
        hr.centers.clear();
        hr.weights.clear();
        let r = ssl_forward(&hr, &hr, &cfg).unwrap();
        assert_eq!((r.kl, r.l1, r.n_centers), (0.0, 0.0, 0));
    }

    #[test]
    fn coefficients_match_direct_chain_rule() {
        // brute-force Jacobian of normalization and the exponential
        let cfg = SsgConfig {
            h: 0.01,
            alpha: 0.7,
            ..SsgConfig::default()
        };
        let d = [0.0, 0.004, 0.011, 0.02];
        let s: Vec<f64> = d.iter().map(|x: &f64| (-x / cfg.h).exp()).collect();
        let eps: f64 = s.iter().sum();
        let q: Vec<f64> = s.iter().map(|v| v / eps).collect();
        let p = [0.4, 0.3, 0.2, 0.1];
        let g: Vec<f64> = (0..4)
            .map(|r| -p[r] / q[r] + cfg.alpha * (q[r] - p[r]).signum())
            .collect();
        let mut out = [0.0; 4];
        assert!(distance_coefficients(&p, &q, &cfg, &mut out));
        for r in 0..4 {
            let mut dl_ds = 0.0;
            for k in 0..4 {
                let dq_ds = (if k == r { 1.0 } else { 0.0 } - q[k]) / eps;
                dl_ds += g[k] * dq_ds;
            }
            let expected = dl_ds * (-s[r] / cfg.h);
            assert!((out[r] - expected).abs() < 1e-10 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn composite() {
        let gan = SsgConfig::gan().composite_weights();
        assert!((composite_total(0.5, 6e-4, 123.0, &gan) - 1.1).abs() < 1e-12);
        let dm = SsgConfig::dm().composite_weights();
        assert_eq!(composite_total(0.0, 0.0, 0.0, &dm), 0.0);
        assert!((composite_total(0.0, 5e-4, 0.04, &dm) - 0.0045).abs() < 1e-15);
    }

    #[test]
    fn report_json_keys() {
        let cfg = SsgConfig::default();
        let (hr, sr) = two_atom([0.5, 0.5], [0.8, 0.2]);
        let r = ssl_forward(&hr, &sr, &cfg).unwrap().without_per_center();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["alpha", "kl", "l1", "n_centers", "reduction", "ssl"]);
        assert_eq!(v["reduction"], "mean-over-centers");
    }
}
