//! Pixel-space gradient descent on `ssl + gamma * pixel_l1`.

use serde::Serialize;

use crate::backend::Backend;
use crate::config::SsgConfig;
use crate::edge_mask::EdgeMask;
use crate::error::{Error, Result};
use crate::image_io::Image;
use crate::loss::{check_pair, pixel_l1};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLoss {
    pub step: usize,
    pub ssl: f64,
    pub pixel_l1: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub image: Image,
    /// Loss of the iterate each step started from.
    pub trace: Vec<StepLoss>,
}

/// Objective value of `sr` against `hr`.
pub fn total_loss(
    sr: &Image,
    hr: &Image,
    mask: &EdgeMask,
    cfg: &SsgConfig,
    backend: &Backend,
) -> Result<StepLoss> {
    let hr_ssg = backend.compute_ssg(hr, mask, cfg)?;
    let sr_ssg = backend.compute_ssg(sr, mask, cfg)?;
    let ssl = crate::loss::ssl_forward(&hr_ssg, &sr_ssg, cfg)?.ssl;
    let l1 = pixel_l1(sr, hr)?;
    Ok(StepLoss {
        step: 0,
        ssl,
        pixel_l1: l1,
        total: ssl + cfg.gamma * l1,
    })
}

/// Plain gradient descent from `sr_init`, clamping to [0, 1] after every step.
pub fn toy_optimize(
    sr_init: &Image,
    hr: &Image,
    mask: &EdgeMask,
    cfg: &SsgConfig,
    steps: usize,
    lr: f64,
    backend: &Backend,
) -> Result<Optimized> {
    check_pair(hr, sr_init)?;
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    let mut x = sr_init.clone();
    let mut trace = Vec::with_capacity(steps);
    let n = x.data.len().max(1) as f64;
    for step in 0..steps {
        let (report, grad) = backend.ssl_backward(hr, &x, mask, cfg)?;
        let l1 = pixel_l1(&x, hr)?;
        trace.push(StepLoss {
            step,
            ssl: report.ssl,
            pixel_l1: l1,
            total: report.ssl + cfg.gamma * l1,
        });
        for ((v, &g), &t) in x.data.iter_mut().zip(&grad.data).zip(&hr.data) {
            let diff = *v - t;
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            *v -= lr * (f64::from(g) + cfg.gamma * sign / n);
        }
        x.clamp_unit();
    }
    Ok(Optimized { image: x, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge_mask::compute_edge_mask;
    use crate::image_io::from_unit;
    use crate::synth;

    fn setup() -> (Image, EdgeMask, SsgConfig) {
        let cfg = SsgConfig {
            gamma: 0.1,
            ..SsgConfig::default().with_geometry(7, 3, 1)
        };
        let hr = synth::stripes(20, 20, 1, 6);
        let mask = compute_edge_mask(&from_unit(&hr), &cfg).unwrap();
        (hr, mask, cfg)
    }

    #[test]
    fn starting_at_the_target_stays_there() {
        let (hr, mask, cfg) = setup();
        let out = toy_optimize(&hr, &hr, &mask, &cfg, 5, 0.05, &Backend::Oracle).unwrap();
        assert_eq!(out.image, hr);
        assert!(out.trace.iter().all(|s| s.total == 0.0));
    }

    #[test]
    fn zero_steps() {
        let (hr, mask, cfg) = setup();
        let init = synth::with_uniform_noise(&hr, 0.1, 2);
        let out = toy_optimize(&init, &hr, &mask, &cfg, 0, 0.05, &Backend::default()).unwrap();
        assert_eq!(out.image, init);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn first_small_step_descends() {
        let (hr, mask, cfg) = setup();
        for seed in 0..5 {
            let init = synth::with_uniform_noise(&hr, 0.1, seed);
            let out = toy_optimize(&init, &hr, &mask, &cfg, 1, 1e-4, &Backend::default()).unwrap();
            let after = total_loss(&out.image, &hr, &mask, &cfg, &Backend::default()).unwrap();
            assert!(after.total <= out.trace[0].total, "seed {seed}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (hr, mask, cfg) = setup();
        assert!(toy_optimize(&hr, &hr, &mask, &cfg, 1, 0.0, &Backend::Oracle).is_err());
        let other = synth::stripes(20, 21, 1, 6);
        assert!(matches!(
            toy_optimize(&other, &hr, &mask, &cfg, 1, 0.1, &Backend::Oracle),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
