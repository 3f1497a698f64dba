use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::BinaryImage;
use crate::rng;

/// Synthetic test objects standing in for a scanned single-material sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    /// Centered disk of radius `floor(min(W, H) / 3)`.
    Disk,
    /// Two disks side by side, radius `floor(min(W, H) / 5)`.
    TwoDisks,
    /// Union of three seeded random disks.
    RandomBlobs,
    /// Checkerboard with the top-left pixel set.
    Checker,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 4] = [
        PhantomKind::Disk,
        PhantomKind::TwoDisks,
        PhantomKind::RandomBlobs,
        PhantomKind::Checker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::Disk => "disk",
            PhantomKind::TwoDisks => "two_disks",
            PhantomKind::RandomBlobs => "random_blobs",
            PhantomKind::Checker => "checker",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhantomKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown phantom kind '{s}'")))
    }
}

/// Generates a phantom mask. Output depends only on the arguments.
///
/// Disk-based kinds never touch the outermost rows and columns, so every
/// border has background pixels.
pub fn generate_phantom(
    kind: PhantomKind,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<BinaryImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "phantom dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    let min_dim = width.min(height) as f64;
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mask = match kind {
        PhantomKind::Disk => {
            let r = (min_dim / 3.0).floor();
            disks(width, height, &[(cx, cy, r)])
        }
        PhantomKind::TwoDisks => {
            let r = (min_dim / 5.0).floor();
            let dx = width as f64 / 4.0;
            disks(width, height, &[(cx - dx, cy, r), (cx + dx, cy, r)])
        }
        PhantomKind::RandomBlobs => {
            let mut rng = rng::seeded(seed);
            let blobs: Vec<_> = (0..3)
                .map(|_| {
                    let r = rng.random_range(min_dim / 8.0..=min_dim / 4.0);
                    let x = cx + rng.random_range(-0.25..=0.25) * width as f64;
                    let y = cy + rng.random_range(-0.25..=0.25) * height as f64;
                    (x, y, r)
                })
                .collect();
            disks(width, height, &blobs)
        }
        PhantomKind::Checker => BinaryImage::from_fn(width, height, |r, c| (r + c) % 2 == 0),
    };
    Ok(mask)
}

/// Union of disks `(col_center, row_center, radius)`; a pixel is inside when
/// its center lies strictly within the radius.
fn disks(width: usize, height: usize, disks: &[(f64, f64, f64)]) -> BinaryImage {
    BinaryImage::from_fn(width, height, |row, col| {
        if row == 0 || col == 0 || row + 1 == height || col + 1 == width {
            return false;
        }
        disks.iter().any(|&(x, y, r)| {
            let d = (col as f64 - x).hypot(row as f64 - y);
            d < r
        })
    })
}
