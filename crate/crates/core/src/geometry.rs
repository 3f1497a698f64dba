use crate::error::{Error, Result};

/// Parallel-beam acquisition geometry.
///
/// Angles are in degrees in `[0, 180)`. The detector axis for angle `θ` is
/// `t = x cos θ + y sin θ`; bin `b` covers
/// `[offset + (b - n/2) w, offset + (b + 1 - n/2) w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGeometry {
    angles: Vec<f64>,
    bin_count: usize,
    bin_width: f64,
    detector_offset: f64,
}

impl ProjectionGeometry {
    pub fn new(
        angles: Vec<f64>,
        bin_count: usize,
        bin_width: f64,
        detector_offset: f64,
    ) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one angle is required".into(),
            ));
        }
        if let Some(a) = angles.iter().find(|a| !(0.0..180.0).contains(*a)) {
            return Err(Error::InvalidArgument(format!(
                "angle {a} outside [0, 180)"
            )));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "angles must be strictly increasing".into(),
            ));
        }
        if bin_count == 0 {
            return Err(Error::InvalidArgument(
                "bin_count must be at least 1".into(),
            ));
        }
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bin_width must be > 0, got {bin_width}"
            )));
        }
        if !detector_offset.is_finite() {
            return Err(Error::InvalidArgument(
                "detector_offset must be finite".into(),
            ));
        }
        Ok(Self {
            angles,
            bin_count,
            bin_width,
            detector_offset,
        })
    }

    /// Angles `0, dθ, 2dθ, …` strictly below 180°.
    pub fn uniform_angles(dtheta: f64) -> Result<Vec<f64>> {
        if !(dtheta > 0.0) || dtheta > 180.0 {
            return Err(Error::InvalidArgument(format!(
                "dtheta must be in (0, 180], got {dtheta}"
            )));
        }
        Ok((0..)
            .map(|k| k as f64 * dtheta)
            .take_while(|&a| a < 180.0 - 1e-9)
            .collect())
    }

    /// Angles spread evenly over `[0, 180)`.
    pub fn evenly_spaced(count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::InvalidArgument(
                "angle count must be at least 1".into(),
            ));
        }
        Ok((0..count)
            .map(|k| 180.0 * k as f64 / count as f64)
            .collect())
    }

    /// Default detector for a `width x height` image: `ceil(hypot(W, H))`
    /// unit bins centered on the rotation axis, which covers the rotated
    /// footprint at every angle.
    pub fn covering(angles: Vec<f64>, width: usize, height: usize) -> Result<Self> {
        Self::new(angles, default_bin_count(width, height), 1.0, 0.0)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn detector_offset(&self) -> f64 {
        self.detector_offset
    }

    pub fn num_rays(&self) -> usize {
        self.angles.len() * self.bin_count
    }

    /// Detector interval `[lo, hi)` of `bin`.
    pub fn bin_interval(&self, bin: usize) -> (f64, f64) {
        let half = self.bin_count as f64 / 2.0;
        let lo = self.detector_offset + (bin as f64 - half) * self.bin_width;
        (lo, lo + self.bin_width)
    }

    /// Unit vector of the detector axis for angle index `a`.
    pub fn direction(&self, a: usize) -> (f64, f64) {
        direction_of(self.angles[a])
    }
}

/// `(cos θ, sin θ)` with the rounding residue at multiples of 90° removed.
pub fn direction_of(angle_deg: f64) -> (f64, f64) {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
    (snap(c), snap(s))
}

pub fn default_bin_count(width: usize, height: usize) -> usize {
    (width as f64).hypot(height as f64).ceil().max(1.0) as usize
}

/// Center of pixel `(row, col)` in detector units.
pub fn pixel_center(row: usize, col: usize, width: usize, height: usize) -> (f64, f64) {
    let x = col as f64 - (width as f64 - 1.0) / 2.0;
    let y = (height as f64 - 1.0) / 2.0 - row as f64;
    (x, y)
}

/// Known attenuation levels of the sample materials.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationSpec {
    levels: Vec<f64>,
    one_hot_penalty: f64,
}

impl AttenuationSpec {
    pub fn new(levels: Vec<f64>, one_hot_penalty: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one attenuation level is required".into(),
            ));
        }
        if levels.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(
                "attenuation levels must be positive and finite".into(),
            ));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "attenuation levels must be strictly increasing".into(),
            ));
        }
        if !(one_hot_penalty >= 0.0) || !one_hot_penalty.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "one-hot penalty must be finite and >= 0, got {one_hot_penalty}"
            )));
        }
        Ok(Self {
            levels,
            one_hot_penalty,
        })
    }

    /// Single material with coefficient `alpha`.
    pub fn single(alpha: f64) -> Result<Self> {
        Self::new(vec![alpha], 0.0)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn one_hot_penalty(&self) -> f64 {
        self.one_hot_penalty
    }

    pub fn max_level(&self) -> f64 {
        *self.levels.last().expect("non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_angles_stop_before_180() {
        let a = ProjectionGeometry::uniform_angles(10.0).unwrap();
        assert_eq!(a.len(), 18);
        assert_eq!(a[17], 170.0);
        assert_eq!(ProjectionGeometry::uniform_angles(0.5).unwrap().len(), 360);
        assert_eq!(
            ProjectionGeometry::uniform_angles(60.0).unwrap(),
            vec![0.0, 60.0, 120.0]
        );
    }

    #[test]
    fn geometry_validation() {
        assert!(ProjectionGeometry::new(vec![], 1, 1.0, 0.0).is_err());
        assert!(ProjectionGeometry::new(vec![180.0], 1, 1.0, 0.0).is_err());
        assert!(ProjectionGeometry::new(vec![10.0, 10.0], 1, 1.0, 0.0).is_err());
        assert!(ProjectionGeometry::new(vec![0.0], 0, 1.0, 0.0).is_err());
        assert!(ProjectionGeometry::new(vec![0.0], 1, 0.0, 0.0).is_err());
    }

    #[test]
    fn default_detector_for_16x16_has_23_bins() {
        assert_eq!(default_bin_count(16, 16), 23);
        let g = ProjectionGeometry::covering(vec![0.0], 2, 2).unwrap();
        assert_eq!(g.bin_count(), 3);
        assert_eq!(g.bin_interval(0), (-1.5, -0.5));
    }

    #[test]
    fn pixel_centers_follow_row_col_convention() {
        assert_eq!(pixel_center(0, 0, 2, 2), (-0.5, 0.5));
        assert_eq!(pixel_center(1, 1, 2, 2), (0.5, -0.5));
        assert_eq!(pixel_center(0, 0, 1, 1), (0.0, 0.0));
    }

    #[test]
    fn attenuation_validation() {
        assert!(AttenuationSpec::new(vec![], 0.0).is_err());
        assert!(AttenuationSpec::new(vec![0.0], 0.0).is_err());
        assert!(AttenuationSpec::new(vec![2.0, 1.0], 0.0).is_err());
        assert!(AttenuationSpec::new(vec![1.0], -1.0).is_err());
        assert_eq!(
            AttenuationSpec::new(vec![1.0, 2.0], 0.5)
                .unwrap()
                .max_level(),
            2.0
        );
    }
}
