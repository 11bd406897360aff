use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which composite objective the SSL term is folded into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `original + beta * ssl`
    Gan,
    /// `original + beta * ssl + gamma * pixel_l1`
    Dm,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gan" => Ok(Mode::Gan),
            "dm" => Ok(Mode::Dm),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

/// Every hyperparameter of the mask, the graph and the loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsgConfig {
    /// Search area side length, odd.
    pub search: usize,
    /// Sliding window side length, odd.
    pub window: usize,
    /// Similarity temperature on the unit intensity scale.
    pub h: f64,
    /// Sampling step over the search area.
    pub stride: usize,
    /// Laplacian threshold on the 8-bit scale.
    pub threshold: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Floor applied to the reconstruction weight inside the KL logarithm.
    pub eps_log: f64,
    pub mode: Mode,
}

impl Default for SsgConfig {
    fn default() -> Self {
        Self::gan()
    }
}

impl SsgConfig {
    pub fn gan() -> Self {
        SsgConfig {
            search: 25,
            window: 9,
            h: 0.004,
            stride: 3,
            threshold: 20.0,
            alpha: 1.0,
            beta: 1000.0,
            gamma: 0.0,
            eps_log: 1e-12,
            mode: Mode::Gan,
        }
    }

    pub fn dm() -> Self {
        SsgConfig {
            beta: 1.0,
            gamma: 0.1,
            mode: Mode::Dm,
            ..Self::gan()
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Gan => Self::gan(),
            Mode::Dm => Self::dm(),
        }
    }

    pub fn with_geometry(mut self, search: usize, window: usize, stride: usize) -> Self {
        self.search = search;
        self.window = window;
        self.stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.search.is_multiple_of(2) {
            return bad(format!("search size {} must be odd", self.search));
        }
        if self.window.is_multiple_of(2) {
            return bad(format!("window size {} must be odd", self.window));
        }
        if self.window > self.search {
            return bad(format!(
                "window size {} exceeds search size {}",
                self.window, self.search
            ));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.eps_log > 0.0 && self.eps_log.is_finite()) {
            return bad(format!("eps_log must be positive, got {}", self.eps_log));
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite".into());
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!(
                    "{name} must be a nonnegative finite number, got {v}"
                ));
            }
        }
        Ok(())
    }

    pub fn search_radius(&self) -> usize {
        (self.search - 1) / 2
    }

    pub fn window_radius(&self) -> usize {
        (self.window - 1) / 2
    }

    /// Distance from a center to the farthest pixel any of its windows reads.
    pub fn footprint_radius(&self) -> usize {
        self.search_radius() + self.window_radius()
    }

    pub fn composite_weights(&self) -> CompositeWeights {
        CompositeWeights {
            mode: self.mode,
            beta: self.beta,
            gamma: self.gamma,
        }
    }
}

/// Weights of the composite training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub mode: Mode,
    pub beta: f64,
    /// Ignored in GAN mode.
    pub gamma: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_published_values() {
        let gan = SsgConfig::gan();
        assert_eq!((gan.search, gan.window, gan.stride), (25, 9, 3));
        assert_eq!(gan.h, 0.004);
        assert_eq!(gan.threshold, 20.0);
        assert_eq!(gan.alpha, 1.0);
        assert_eq!(gan.beta, 1000.0);
        let dm = SsgConfig::dm();
        assert_eq!((dm.beta, dm.gamma), (1.0, 0.1));
        assert_eq!(dm.h, gan.h);
        gan.validate().unwrap();
        dm.validate().unwrap();
    }

    #[test]
    fn rejects_bad_geometry() {
        let base = SsgConfig::default();
        assert!(base.with_geometry(24, 9, 3).validate().is_err());
        assert!(base.with_geometry(25, 8, 3).validate().is_err());
        assert!(base.with_geometry(5, 9, 1).validate().is_err());
        assert!(base.with_geometry(25, 9, 0).validate().is_err());
        assert!(SsgConfig { h: 0.0, ..base }.validate().is_err());
        assert!(SsgConfig {
            eps_log: -1.0,
            ..base
        }
        .validate()
        .is_err());
        assert!(SsgConfig { beta: -1.0, ..base }.validate().is_err());
        assert!(base.with_geometry(1, 1, 1).validate().is_ok());
    }

    #[test]
    fn footprint() {
        let cfg = SsgConfig::default();
        assert_eq!(cfg.footprint_radius(), 16);
        assert_eq!("DM".parse::<Mode>().unwrap(), Mode::Dm);
        assert!("vae".parse::<Mode>().is_err());
    }
}
