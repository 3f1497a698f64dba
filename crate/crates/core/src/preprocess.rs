//! Turning measured projections into a sinogram proportional to attenuation.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::BinaryImage;
use crate::projection::{forward_project, Sinogram, SystemMatrix};
use crate::rng;

/// Beer–Lambert conversion `-ln(I / I0)`.
pub fn intensity_to_attenuation(proj: &Sinogram, i0: f64) -> Result<Sinogram> {
    if !(i0 > 0.0) || !i0.is_finite() {
        return Err(Error::Domain(format!(
            "reference intensity must be > 0, got {i0}"
        )));
    }
    if let Some(v) = proj.values().iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("intensity must be > 0, got {v}")));
    }
    proj.map(|v| -(v / i0).ln())
}

/// Adds i.i.d. Gaussian noise `N(0, sigma²)` plus a constant `shift` to every
/// value. Values are drawn in angle-major order from a generator seeded with
/// `seed`.
pub fn add_noise(sino: &Sinogram, sigma: f64, shift: f64, seed: u64) -> Result<Sinogram> {
    if !shift.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "shift must be finite, got {shift}"
        )));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = rng::seeded(seed);
    sino.map(|v| v + shift + normal.sample(&mut rng))
}

/// Region of the sinogram known to contain only empty space.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundRegion {
    /// The first and last `n` detector bins of every angle.
    BorderColumns(usize),
    /// Angle-major flags, one per sinogram value.
    Mask(Vec<bool>),
}

impl Default for BackgroundRegion {
    fn default() -> Self {
        BackgroundRegion::BorderColumns(2)
    }
}

/// Subtracts the mean of the background region and clamps negatives to zero.
pub fn background_subtract(sino: &Sinogram, region: &BackgroundRegion) -> Result<Sinogram> {
    let nbins = sino.bin_count();
    let in_region: Box<dyn Fn(usize) -> bool> = match region {
        BackgroundRegion::BorderColumns(n) => {
            let n = *n;
            Box::new(move |i| {
                let b = i % nbins;
                b < n || b + n >= nbins
            })
        }
        BackgroundRegion::Mask(mask) => {
            if mask.len() != sino.values().len() {
                return Err(Error::Dimension(format!(
                    "background mask has {} entries, sinogram has {}",
                    mask.len(),
                    sino.values().len()
                )));
            }
            Box::new(move |i| mask[i])
        }
    };
    let (sum, count) = sino
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| in_region(*i))
        .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
    if count == 0 {
        return Err(Error::InvalidArgument("background region is empty".into()));
    }
    let mean = sum / count as f64;
    sino.map(|v| (v - mean).max(0.0))
}

/// Row normalization modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Scale each angle so its sum equals the mean of all angle sums.
    #[default]
    PerAngleSumToMean,
}

pub fn normalize_columns(sino: &Sinogram, mode: Normalization) -> Result<Sinogram> {
    let Normalization::PerAngleSumToMean = mode;
    let sums: Vec<f64> = sino.rows().map(|r| r.iter().sum()).collect();
    if let Some((row, &sum)) = sums.iter().enumerate().find(|(_, &s)| !(s > 0.0)) {
        return Err(Error::DegenerateRow { row, sum });
    }
    let target = sums.iter().sum::<f64>() / sums.len() as f64;
    let mut out = Vec::with_capacity(sino.values().len());
    for (row, sum) in sino.rows().zip(&sums) {
        let scale = target / sum;
        out.extend(row.iter().map(|v| v * scale));
    }
    sino.with_values(out)
}

/// Least-squares scale `α` such that `α · A·ref ≈ sino`.
pub fn estimate_alpha(sino: &Sinogram, sm: &SystemMatrix, reference: &BinaryImage) -> Result<f64> {
    sm.check_sinogram(sino)?;
    let projected = forward_project(sm, &reference.to_grid())?;
    let (num, den) = projected
        .values()
        .iter()
        .zip(sino.values())
        .fold((0.0, 0.0), |(n, d), (a, s)| (n + a * s, d + a * a));
    if den == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(num / den)
}
