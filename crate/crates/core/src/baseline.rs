//! Classical two-step pipeline: filtered back projection followed by
//! histogram thresholding, plus mask comparison metrics.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::{BinaryImage, GridImage};
use crate::projection::{back_project_with, Sinogram, SystemMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Filter {
    #[default]
    Ramp,
    None,
}

pub fn fbp_reconstruct(sino: &Sinogram, sm: &SystemMatrix, filter: Filter) -> Result<GridImage> {
    fbp_reconstruct_with(sino, sm, filter, Execution::default())
}

/// Ramp-filters every detector row in the frequency domain, back projects,
/// and scales by `π / num_angles`.
pub fn fbp_reconstruct_with(
    sino: &Sinogram,
    sm: &SystemMatrix,
    filter: Filter,
    exec: Execution,
) -> Result<GridImage> {
    sm.check_sinogram(sino)?;
    let filtered = match filter {
        Filter::None => sino.clone(),
        Filter::Ramp => ramp_filter(sino, exec)?,
    };
    let bp = back_project_with(sm, &filtered, exec)?;
    let scale = PI / sino.num_angles() as f64;
    let (w, h) = bp.dims();
    GridImage::new(
        w,
        h,
        bp.into_values().into_iter().map(|v| v * scale).collect(),
    )
}

/// Frequency response `|f|` (cycles per unit length, DC = 0) applied to each
/// angle row, zero padded to the next power of two `>= 2 · bins`.
pub fn ramp_filter(sino: &Sinogram, exec: Execution) -> Result<Sinogram> {
    let nbins = sino.bin_count();
    let n = (2 * nbins).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spacing = sino.geometry().bin_width();
    let response: Vec<f64> = (0..n)
        .map(|k| {
            let f = if k <= n / 2 { k } else { n - k };
            f as f64 / (n as f64 * spacing)
        })
        .collect();

    let mut out = sino.values().to_vec();
    exec.for_each_chunk_mut(&mut out, nbins, |_, row| {
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new(if i < nbins { row[i] } else { 0.0 }, 0.0))
            .collect();
        fwd.process(&mut buf);
        for (c, r) in buf.iter_mut().zip(&response) {
            *c *= *r;
        }
        inv.process(&mut buf);
        for (dst, c) in row.iter_mut().zip(&buf) {
            *dst = c.re / n as f64;
        }
    });
    sino.with_values(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMethod {
    Otsu,
    Fixed(f64),
}

/// Number of histogram bins used by Otsu's method.
pub const OTSU_BINS: usize = 256;

/// Otsu threshold over a 256-bin histogram spanning `[min, max]`.
///
/// Returns the threshold value (upper edge of the last background bin) and
/// that bin's index.
pub fn otsu_threshold(img: &GridImage) -> Result<(f64, usize)> {
    if img.is_empty() {
        return Err(Error::InvalidArgument("image is empty".into()));
    }
    let (lo, hi) = (img.min(), img.max());
    if !(hi > lo) {
        return Err(Error::DegenerateHistogram);
    }
    let mut hist = [0u64; OTSU_BINS];
    for &v in img.values() {
        hist[histogram_bin(v, lo, hi)] += 1;
    }
    let total = img.len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        if w0 == 0.0 {
            continue;
        }
        let w1 = total - w0;
        if w1 == 0.0 {
            break;
        }
        let diff = sum0 / w0 - (sum_all - sum0) / w1;
        let between = w0 * w1 * diff * diff;
        if between > best.0 {
            best = (between, t);
        }
    }
    let t = best.1;
    Ok((lo + (t + 1) as f64 * (hi - lo) / OTSU_BINS as f64, t))
}

fn histogram_bin(v: f64, lo: f64, hi: f64) -> usize {
    (((v - lo) / (hi - lo) * OTSU_BINS as f64).floor() as usize).min(OTSU_BINS - 1)
}

pub fn threshold_segment(img: &GridImage, method: ThresholdMethod) -> Result<BinaryImage> {
    if img.is_empty() {
        return Err(Error::InvalidArgument("image is empty".into()));
    }
    match method {
        ThresholdMethod::Fixed(t) => Ok(img.above(t)),
        ThresholdMethod::Otsu => {
            let (_, t) = otsu_threshold(img)?;
            let (lo, hi) = (img.min(), img.max());
            let mask = img
                .values()
                .iter()
                .map(|&v| u8::from(histogram_bin(v, lo, hi) > t))
                .collect();
            BinaryImage::new(img.width(), img.height(), mask)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMetrics {
    pub dice: f64,
    pub pixel_agreement: f64,
    /// 1 where the masks disagree.
    pub diff_mask: BinaryImage,
}

pub fn compare_segmentations(a: &BinaryImage, b: &BinaryImage) -> Result<SegmentationMetrics> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension(format!(
            "{:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let (mut inter, mut agree) = (0usize, 0usize);
    let diff: Vec<u8> = a
        .mask()
        .iter()
        .zip(b.mask())
        .map(|(&x, &y)| {
            inter += usize::from(x == 1 && y == 1);
            agree += usize::from(x == y);
            u8::from(x != y)
        })
        .collect();
    let denom = a.count_ones() + b.count_ones();
    let dice = if denom == 0 {
        1.0
    } else {
        2.0 * inter as f64 / denom as f64
    };
    let pixel_agreement = if a.is_empty() {
        1.0
    } else {
        agree as f64 / a.len() as f64
    };
    Ok(SegmentationMetrics {
        dice,
        pixel_agreement,
        diff_mask: BinaryImage::new(a.width(), a.height(), diff)?,
    })
}
