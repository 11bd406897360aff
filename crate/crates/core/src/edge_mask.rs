//! Laplacian edge masks and the list of admissible graph centers.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::SsgConfig;
use crate::error::{Error, Result};
use crate::field::{read_field, write_field, Field, FieldRef};
use crate::image_io::{load_image, ImageU8};

/// Binary edge map of a ground-truth image.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask {
    pub height: usize,
    pub width: usize,
    /// Row-major 0/1 map.
    pub bits: Vec<u8>,
    /// Set pixels whose whole search + window footprint fits in the image,
    /// sorted row-major.
    pub centers: Vec<(usize, usize)>,
    pub threshold: f64,
    pub search: usize,
    pub window: usize,
    pub edge_fraction: f64,
}

fn footprint(search: usize, window: usize) -> usize {
    (search - 1) / 2 + (window - 1) / 2
}

impl EdgeMask {
    /// Build a mask from an explicit bit map, deriving centers and edge fraction.
    pub fn from_bits(
        height: usize,
        width: usize,
        bits: Vec<u8>,
        threshold: f64,
        search: usize,
        window: usize,
    ) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Dimension(format!(
                "mask of {height}x{width} needs {} bits, got {}",
                height * width,
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Format("mask bits must be 0 or 1".into()));
        }
        if search.is_multiple_of(2) || window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "search {search} and window {window} must be odd"
            )));
        }
        let r = footprint(search, window);
        let mut centers = Vec::new();
        if height > 2 * r && width > 2 * r {
            for row in r..height - r {
                for col in r..width - r {
                    if bits[row * width + col] == 1 {
                        centers.push((row, col));
                    }
                }
            }
        }
        let set = bits.iter().filter(|&&b| b == 1).count();
        let total = height * width;
        Ok(EdgeMask {
            height,
            width,
            bits,
            centers,
            threshold,
            search,
            window,
            edge_fraction: if total == 0 {
                0.0
            } else {
                set as f64 / total as f64
            },
        })
    }

    /// A mask whose only set bits are the given centers; each must be admissible.
    pub fn with_centers(
        height: usize,
        width: usize,
        centers: &[(usize, usize)],
        cfg: &SsgConfig,
    ) -> Result<Self> {
        let r = cfg.footprint_radius();
        let mut bits = vec![0u8; height * width];
        for &(row, col) in centers {
            if row < r || col < r || row + r >= height || col + r >= width {
                return Err(Error::ConfigMismatch(format!(
                    "center ({row}, {col}) footprint of radius {r} leaves the {height}x{width} image"
                )));
            }
            bits[row * width + col] = 1;
        }
        Self::from_bits(height, width, bits, f64::NAN, cfg.search, cfg.window)
    }

    /// Keep only the first `n` centers (bits are left untouched).
    pub fn truncated(mut self, n: usize) -> Self {
        self.centers.truncate(n);
        self
    }

    pub fn is_set(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col] == 1
    }

    pub fn is_center(&self, row: usize, col: usize) -> bool {
        self.centers.binary_search(&(row, col)).is_ok()
    }
}

/// Signed 4-neighbor Laplacian response with replicate padding.
///
/// Color inputs are reduced to BT.601 luma first. Values lie in [-1020, 1020].
pub fn laplacian(img: &ImageU8) -> Result<Vec<i32>> {
    let (h, w) = (img.height, img.width);
    if h < 3 || w < 3 {
        return Err(Error::Dimension(format!(
            "Laplacian needs at least 3x3 pixels, got {h}x{w}"
        )));
    }
    let luma = luminance(img)?;
    let at = |r: usize, c: usize| luma[r * w + c];
    let mut out = vec![0i32; h * w];
    for r in 0..h {
        let up = r.saturating_sub(1);
        let down = (r + 1).min(h - 1);
        for c in 0..w {
            let left = c.saturating_sub(1);
            let right = (c + 1).min(w - 1);
            out[r * w + c] = at(up, c) + at(down, c) + at(r, left) + at(r, right) - 4 * at(r, c);
        }
    }
    Ok(out)
}

fn luminance(img: &ImageU8) -> Result<Vec<i32>> {
    match img.channels {
        1 => Ok(img.data.iter().map(|&v| i32::from(v)).collect()),
        3 => Ok(img
            .data
            .chunks_exact(3)
            .map(|px| {
                let y =
                    0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]);
                y.round() as i32
            })
            .collect()),
        c => Err(Error::Dimension(format!(
            "expected 1 or 3 channels, got {c}"
        ))),
    }
}

/// Threshold `|laplacian| > t` and enumerate admissible centers for `cfg`.
pub fn compute_edge_mask(img: &ImageU8, cfg: &SsgConfig) -> Result<EdgeMask> {
    let response = laplacian(img)?;
    let bits = response
        .iter()
        .map(|&e| u8::from(f64::from(e.abs()) > cfg.threshold))
        .collect();
    EdgeMask::from_bits(
        img.height,
        img.width,
        bits,
        cfg.threshold,
        cfg.search,
        cfg.window,
    )
}

/// Where the precomputed mask of `image_path` is stored.
pub fn mask_path_for(image_path: &Path) -> PathBuf {
    image_path.with_extension("mask.ssgf")
}

pub fn save_mask(path: impl AsRef<Path>, mask: &EdgeMask) -> Result<()> {
    write_field(path, FieldRef::Mask(mask))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<EdgeMask> {
    let path = path.as_ref();
    match read_field(path)? {
        Field::Mask(m) => Ok(m),
        other => Err(Error::Format(format!(
            "{}: expected a mask field, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

/// Outcome of one file in a batch precomputation.
#[derive(Debug)]
pub struct PrecomputeOutcome {
    pub input: PathBuf,
    pub result: Result<(PathBuf, f64)>,
}

/// Compute and store the mask of every image beside it.
///
/// Files are processed independently; a failure is reported and the batch
/// carries on. The returned list keeps the input order.
pub fn precompute_mask_dir(paths: &[PathBuf], cfg: &SsgConfig) -> Vec<PrecomputeOutcome> {
    paths
        .par_iter()
        .map(|input| {
            let result = load_image(input)
                .and_then(|img| compute_edge_mask(&img, cfg))
                .and_then(|mask| {
                    let out = mask_path_for(input);
                    save_mask(&out, &mask)?;
                    Ok((out, mask.edge_fraction))
                });
            PrecomputeOutcome {
                input: input.clone(),
                result,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn luma(h: usize, w: usize, f: impl Fn(usize, usize) -> u8) -> ImageU8 {
        let data = (0..h * w).map(|i| f(i / w, i % w)).collect();
        ImageU8::new(h, w, 1, data).unwrap()
    }

    #[test]
    fn constant_images_have_no_response() {
        for v in [0u8, 77, 255] {
            assert!(laplacian(&ImageU8::filled(5, 6, 1, v))
                .unwrap()
                .iter()
                .all(|&e| e == 0));
            assert!(laplacian(&ImageU8::filled(4, 4, 3, v))
                .unwrap()
                .iter()
                .all(|&e| e == 0));
        }
    }

    #[test]
    fn single_bright_pixel() {
        let img = luma(3, 3, |r, c| if (r, c) == (1, 1) { 255 } else { 0 });
        let e = laplacian(&img).unwrap();
        // replicate padding: corners see the center through no neighbor
        assert_eq!(e, vec![0, 255, 0, 255, -1020, 255, 0, 255, 0]);
    }

    #[test]
    fn vertical_step() {
        let img = luma(4, 6, |_, c| if c < 3 { 0 } else { 255 });
        let e = laplacian(&img).unwrap();
        for r in 0..4 {
            assert_eq!(&e[r * 6..r * 6 + 6], &[0, 0, 255, -255, 0, 0]);
        }
        let cfg = SsgConfig::default();
        let mask = compute_edge_mask(&img, &cfg).unwrap();
        for r in 0..4 {
            assert_eq!(&mask.bits[r * 6..r * 6 + 6], &[0, 0, 1, 1, 0, 0]);
        }
        assert!(mask.centers.is_empty());
        assert!((mask.edge_fraction - 8.0 / 24.0).abs() < 1e-15);

        let high = SsgConfig {
            threshold: 2040.0,
            ..cfg
        };
        let mask = compute_edge_mask(&img, &high).unwrap();
        assert_eq!(mask.edge_fraction, 0.0);
    }

    #[test]
    fn color_is_reduced_to_luma() {
        // (255, 0, 0) -> round(76.245) = 76
        let mut data = vec![0u8; 27];
        data[12] = 255;
        let img = ImageU8::new(3, 3, 3, data).unwrap();
        assert_eq!(laplacian(&img).unwrap()[4], -4 * 76);
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            laplacian(&ImageU8::filled(2, 5, 1, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn centers_respect_footprint() {
        let cfg = SsgConfig::default().with_geometry(5, 3, 1);
        let img = luma(12, 10, |r, c| ((r * 37 + c * 91) % 256) as u8);
        let mask = compute_edge_mask(&img, &cfg).unwrap();
        let r = cfg.footprint_radius();
        assert!(!mask.centers.is_empty());
        for &(row, col) in &mask.centers {
            assert!(mask.is_set(row, col));
            assert!(row >= r && col >= r && row < 12 - r && col < 10 - r);
        }
        let mut sorted = mask.centers.clone();
        sorted.sort();
        assert_eq!(sorted, mask.centers);
    }

    #[test]
    fn forced_centers() {
        let cfg = SsgConfig::default().with_geometry(5, 3, 1);
        let mask = EdgeMask::with_centers(8, 8, &[(3, 4)], &cfg).unwrap();
        assert_eq!(mask.centers, vec![(3, 4)]);
        assert!(EdgeMask::with_centers(8, 8, &[(2, 4)], &cfg).is_err());
        assert!(EdgeMask::with_centers(8, 8, &[(3, 5)], &cfg).is_err());
    }
}
