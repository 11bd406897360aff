use crate::config::SsgConfig;
use crate::edge_mask::EdgeMask;
use crate::error::Result;
use crate::fast_kernel::{compute_ssg_fast, ssl_backward_fast, KernelPlan};
use crate::image_io::Image;
use crate::loss::{ssl_backward, GradientField, LossReport};
use crate::ssg::{compute_ssg_oracle, Ssg};

/// Which implementation evaluates graphs and gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Single-threaded nested loops.
    Oracle,
    Fast(KernelPlan),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Fast(KernelPlan::default())
    }
}

impl Backend {
    pub fn compute_ssg(&self, img: &Image, mask: &EdgeMask, cfg: &SsgConfig) -> Result<Ssg> {
        match self {
            Backend::Oracle => compute_ssg_oracle(img, mask, cfg),
            Backend::Fast(plan) => compute_ssg_fast(img, mask, cfg, plan),
        }
    }

    pub fn ssl_backward(
        &self,
        img_hr: &Image,
        img_sr: &Image,
        mask: &EdgeMask,
        cfg: &SsgConfig,
    ) -> Result<(LossReport, GradientField)> {
        match self {
            Backend::Oracle => ssl_backward(img_hr, img_sr, mask, cfg),
            Backend::Fast(plan) => ssl_backward_fast(img_hr, img_sr, mask, cfg, plan),
        }
    }
}
