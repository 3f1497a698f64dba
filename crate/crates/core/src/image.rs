//! Dense 2-D pixel grids.
//!
//! Pixels are stored row-major. Pixel `(row, col)` has its center at
//! `x = col - (W-1)/2`, `y = (H-1)/2 - row` in detector units, so the image is
//! centered on the rotation axis.

use crate::error::{Error, Result};

/// Real-valued image, e.g. a CT slice or an attenuation map.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GridImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_len(width, height, values.len())?;
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pixel {p} is not finite ({})",
                values[p]
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Root-mean-square difference between two images of equal size.
    pub fn rmse(&self, other: &GridImage) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!(
                "{:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        if self.is_empty() {
            return Ok(0.0);
        }
        let ss: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((ss / self.len() as f64).sqrt())
    }

    /// Mask of pixels strictly above `threshold`.
    pub fn above(&self, threshold: f64) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            mask: self
                .values
                .iter()
                .map(|&v| u8::from(v > threshold))
                .collect(),
        }
    }
}

/// Segmentation mask with pixel values exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<u8>) -> Result<Self> {
        check_len(width, height, mask.len())?;
        if let Some(p) = mask.iter().position(|&v| v > 1) {
            return Err(Error::InvalidArgument(format!(
                "mask pixel {p} has value {}, expected 0 or 1",
                mask[p]
            )));
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![0; width * height],
        }
    }

    pub(crate) fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut mask = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                mask.push(u8::from(f(row, col)));
            }
        }
        Self {
            width,
            height,
            mask,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 1).count()
    }

    /// Pixels on the outermost rows and columns.
    pub fn border(&self) -> impl Iterator<Item = u8> + '_ {
        let (w, h) = (self.width, self.height);
        (0..h)
            .flat_map(move |r| (0..w).map(move |c| (r, c)))
            .filter(move |&(r, c)| r == 0 || c == 0 || r + 1 == h || c + 1 == w)
            .map(move |(r, c)| self.mask[r * w + c])
    }

    pub fn to_grid(&self) -> GridImage {
        scale_binary(self, 1.0).expect("unit scale is valid")
    }
}

/// Scales a binary mask into an attenuation map: `out[p] = alpha * mask[p]`.
pub fn scale_binary(mask: &BinaryImage, alpha: f64) -> Result<GridImage> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and non-negative, got {alpha}"
        )));
    }
    Ok(GridImage {
        width: mask.width,
        height: mask.height,
        values: mask.mask.iter().map(|&m| alpha * f64::from(m)).collect(),
    })
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width.checked_mul(height) != Some(len) {
        return Err(Error::Dimension(format!(
            "{width}x{height} image needs {} values, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}
