//! 8-bit and unit-interval image containers plus PNG / PNM codecs.
//!
//! Masking runs on the native 0..=255 scale, graph math on [0, 1].

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// 8-bit image, row-major and channel-interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

/// Unit-interval image, row-major and channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

fn check_shape(height: usize, width: usize, channels: usize, len: usize) -> Result<()> {
    if channels != 1 && channels != 3 {
        return Err(Error::Dimension(format!(
            "expected 1 or 3 channels, got {channels}"
        )));
    }
    if height * width * channels != len {
        return Err(Error::Dimension(format!(
            "{height}x{width}x{channels} needs {} values, got {len}",
            height * width * channels
        )));
    }
    Ok(())
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        Ok(ImageU8 {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Self {
        ImageU8 {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> u8 {
        self.data[(row * self.width + col) * self.channels + ch]
    }
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Image {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.index(row, col, ch)]
    }

    /// Clamp every intensity back into [0, 1].
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Exact `v / 255` conversion.
pub fn to_unit(img: &ImageU8) -> Image {
    Image {
        height: img.height,
        width: img.width,
        channels: img.channels,
        data: img.data.iter().map(|&v| f64::from(v) / 255.0).collect(),
    }
}

/// Scale by 255, round to nearest and saturate.
pub fn from_unit(img: &Image) -> ImageU8 {
    ImageU8 {
        height: img.height,
        width: img.width,
        channels: img.channels,
        data: img
            .data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect(),
    }
}

/// Decode an 8-bit PNG, PGM or PPM file. Alpha channels are dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageU8> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = ImageReader::new(BufReader::new(file))
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(Error::Format(format!(
                "{}: expected PNG or PNM, detected {other:?}",
                path.display()
            )))
        }
    }
    let decoded = reader
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, data) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageLumaA8(_) => (1, decoded.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
        DynamicImage::ImageRgba8(_) => (3, decoded.to_rgb8().into_raw()),
        other => {
            return Err(Error::Format(format!(
                "{}: only 8-bit images are supported, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    ImageU8::new(height, width, channels, data)
}

/// Encode as PGM/PPM when the extension asks for it, PNG otherwise.
pub fn save_image(path: impl AsRef<Path>, img: &ImageU8) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels {
        1 => ColorType::L8,
        3 => ColorType::Rgb8,
        c => return Err(Error::Dimension(format!("cannot encode {c} channels"))),
    };
    let format = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("pgm") | Some("ppm") | Some("pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    let (w, h) = (img.width as u32, img.height as u32);
    image::save_buffer_with_format(path, &img.data, w, h, color, format).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    })
}
