//! Grayscale raster, region geometry and the quality metrics shared by the
//! rest of the crate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Peak value of an 8-bit sample.
pub const MAX_VALUE: f64 = 255.0;

/// An 8-bit grayscale image stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} image needs {expected} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// An image with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        let len = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
        GrayImage::new(width, height, vec![value; len])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Result<u8> {
        let idx = pixel_index(x, y, self.width, self.height)?;
        Ok(self.pixels[idx])
    }

    /// Returns a copy with one pixel replaced.
    pub fn with_pixel(&self, x: usize, y: usize, value: u8) -> Result<GrayImage> {
        let idx = pixel_index(x, y, self.width, self.height)?;
        let mut out = self.clone();
        out.pixels[idx] = value;
        Ok(out)
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn same_dimensions(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_dimensions(&self, other: &GrayImage) -> Result<()> {
        if self.same_dimensions(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                a_w: self.width,
                a_h: self.height,
                b_w: other.width,
                b_h: other.height,
            })
        }
    }

    /// The rectangle covering the whole image.
    pub fn full_rect(&self) -> RoiRect {
        RoiRect {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        }
    }
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("pixels", &format_args!("[{} bytes]", self.pixels.len()))
            .finish()
    }
}

/// Axis-aligned rectangle, `x0..x1` by `y0..y1` (end-exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl RoiRect {
    /// Builds a rectangle, rejecting empty or inverted extents.
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        let rect = RoiRect { x0, y0, x1, y1 };
        rect.check_shape()?;
        Ok(rect)
    }

    fn check_shape(&self) -> Result<()> {
        if self.x0 >= self.x1 || self.y0 >= self.y1 {
            return Err(Error::InvalidRegion(format!(
                "empty or inverted rectangle {self}"
            )));
        }
        Ok(())
    }

    /// Checks the rectangle is non-empty and lies inside a `width`x`height` image.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        self.check_shape()?;
        if self.x1 > width || self.y1 > height {
            return Err(Error::InvalidRegion(format!(
                "{self} exceeds {width}x{height} image"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

impl fmt::Display for RoiRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.x1, self.y1)
    }
}

impl std::str::FromStr for RoiRect {
    type Err = Error;

    /// Parses `x0,y0,x1,y1`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidRegion(format!(
                "expected x0,y0,x1,y1, got {s:?}"
            )));
        }
        let mut v = [0usize; 4];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| Error::InvalidRegion(format!("bad coordinate {part:?}")))?;
        }
        RoiRect::new(v[0], v[1], v[2], v[3])
    }
}

/// Peak signal-to-noise ratio. Identical images have no finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Infinite,
    Db(f64),
}

impl Psnr {
    /// Finite decibel value, `None` for identical images.
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Infinite => None,
            Psnr::Db(v) => Some(v),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl PartialOrd for Psnr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        match (self, other) {
            (Psnr::Infinite, Psnr::Infinite) => Some(Ordering::Equal),
            (Psnr::Infinite, Psnr::Db(_)) => Some(Ordering::Greater),
            (Psnr::Db(_), Psnr::Infinite) => Some(Ordering::Less),
            (Psnr::Db(a), Psnr::Db(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Infinite => f.write_str("inf"),
            Psnr::Db(v) => write!(f, "{v}"),
        }
    }
}

/// Sum of squared pixel differences.
pub fn squared_error(a: &GrayImage, b: &GrayImage) -> Result<u64> {
    a.check_same_dimensions(b)?;
    Ok(a.pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&p, &q)| {
            let d = p.abs_diff(q) as u64;
            d * d
        })
        .sum())
}

/// Mean squared error over the whole image.
pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    Ok(squared_error(a, b)? as f64 / a.len() as f64)
}

/// PSNR over the whole image with a peak of 255.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<Psnr> {
    let sse = squared_error(a, b)?;
    if sse == 0 {
        return Ok(Psnr::Infinite);
    }
    // 10·log10(MAX² / (sse / N)), rearranged to avoid dividing twice
    let ratio = MAX_VALUE * MAX_VALUE * a.len() as f64 / sse as f64;
    Ok(Psnr::Db(10.0 * ratio.log10()))
}

/// Per-value pixel counts.
#[derive(Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; 256],
}

impl Histogram {
    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn count(&self, value: u8) -> u64 {
        self.bins[value as usize]
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

impl fmt::Debug for Histogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero: Vec<(usize, u64)> = self
            .bins
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
            .collect();
        f.debug_struct("Histogram").field("nonzero", &nonzero).finish()
    }
}

pub fn histogram(img: &GrayImage) -> Histogram {
    let mut bins = [0u64; 256];
    for &p in &img.pixels {
        bins[p as usize] += 1;
    }
    Histogram { bins }
}

/// Row-major flat index of `(x, y)`.
pub fn pixel_index(x: usize, y: usize, width: usize, height: usize) -> Result<usize> {
    if x >= width || y >= height {
        return Err(Error::OutOfBounds {
            x,
            y,
            width,
            height,
        });
    }
    Ok(y * width + x)
}

/// Inverse of [`pixel_index`].
pub fn pixel_coords(index: usize, width: usize) -> (usize, usize) {
    (index % width, index / width)
}
