//! QUBO models whose energy is the squared sinogram residual.
//!
//! Every pixel is encoded by `m` binary variables. A variable `q` for pixel
//! `p` and level `k` contributes `c · a_k · q` to each ray crossing `p`, where
//! `a_k` is the attenuation level (segmentation) or `2^k` (reconstruction).
//! Expanding `Σ_rays (Σ c a q − P)²` with `q² = q` gives
//!
//! * linear:    `L_v  = Σ_rays (c a)² − 2 P c a`
//! * quadratic: `Q_uv = Σ_rays 2 (c a)_u (c a)_v` for `u < v`
//! * offset:    `Σ_rays P²`, excluded from the model and tracked separately,
//!
//! so `energy(x) + offset` equals the residual of the decoded image, and the
//! lowest conceivable energy is `-offset`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::AttenuationSpec;
use crate::image::GridImage;
use crate::projection::{forward_project, Sinogram, SystemMatrix};

/// Coefficients smaller than this are dropped after assembly.
pub const COEFF_EPS: f64 = 1e-12;

/// Largest bit depth accepted for the reconstruction encoding.
pub const MAX_BITS: usize = 52;

#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    /// Pixel value `Σ_k α_k q_k` over known attenuation levels.
    Segmentation(AttenuationSpec),
    /// Pixel value `Σ_k 2^k q_k` for `k < bits`.
    Reconstruction { bits: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingSpec {
    encoding: Encoding,
    width: usize,
    height: usize,
}

impl EncodingSpec {
    pub fn segmentation(levels: AttenuationSpec, width: usize, height: usize) -> Result<Self> {
        Self::new(Encoding::Segmentation(levels), width, height)
    }

    pub fn reconstruction(bits: usize, width: usize, height: usize) -> Result<Self> {
        Self::new(Encoding::Reconstruction { bits }, width, height)
    }

    pub fn new(encoding: Encoding, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if let Encoding::Reconstruction { bits } = encoding {
            if bits == 0 || bits > MAX_BITS {
                return Err(Error::InvalidArgument(format!(
                    "reconstruction bits must be in 1..={MAX_BITS}, got {bits}"
                )));
            }
        }
        Ok(Self {
            encoding,
            width,
            height,
        })
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn levels_per_pixel(&self) -> usize {
        match &self.encoding {
            Encoding::Segmentation(spec) => spec.levels().len(),
            Encoding::Reconstruction { bits } => *bits,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_pixels() * self.levels_per_pixel()
    }

    pub fn layout(&self) -> VarLayout {
        VarLayout {
            pixels: self.num_pixels(),
            levels: self.levels_per_pixel(),
        }
    }

    /// Pixel value contributed by a set bit at `level`.
    pub fn level_value(&self, level: usize) -> f64 {
        match &self.encoding {
            Encoding::Segmentation(spec) => spec.levels()[level],
            Encoding::Reconstruction { .. } => (1u64 << level) as f64,
        }
    }

    fn penalty(&self) -> f64 {
        match &self.encoding {
            Encoding::Segmentation(spec) => spec.one_hot_penalty(),
            Encoding::Reconstruction { .. } => 0.0,
        }
    }
}

/// Variable numbering: `var = pixel · levels + level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarLayout {
    pub pixels: usize,
    pub levels: usize,
}

impl VarLayout {
    pub fn num_vars(&self) -> usize {
        self.pixels * self.levels
    }

    pub fn var(&self, pixel: usize, level: usize) -> usize {
        pixel * self.levels + level
    }

    /// `(pixel, level)` of a variable.
    pub fn split(&self, var: usize) -> (usize, usize) {
        (var / self.levels, var % self.levels)
    }
}

/// Binary assignment of all model variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<u8>);

impl Assignment {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "bit {i} is {}, expected 0 or 1",
                bits[i]
            )));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub(crate) fn from_bits_unchecked(bits: Vec<u8>) -> Self {
        Self(bits)
    }
}

/// Upper-triangular QUBO with an explicitly tracked constant.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
    offset: f64,
    layout: VarLayout,
    // symmetric adjacency in CSR form, neighbors ascending
    adj_ptr: Vec<usize>,
    adj: Vec<(u32, f64)>,
}

impl QuboModel {
    /// Validated constructor. Quadratic terms must be strictly upper
    /// triangular, sorted, unique and nonzero.
    pub fn from_parts(
        linear: Vec<f64>,
        quadratic: Vec<(usize, usize, f64)>,
        offset: f64,
        layout: VarLayout,
    ) -> Result<Self> {
        let n = linear.len();
        if layout.num_vars() != n {
            return Err(Error::Dimension(format!(
                "layout describes {} variables, model has {n}",
                layout.num_vars()
            )));
        }
        if linear.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "linear coefficients must be finite".into(),
            ));
        }
        for (idx, &(i, j, q)) in quadratic.iter().enumerate() {
            if i >= j || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "quadratic term ({i}, {j}) is not strictly upper triangular within {n} vars"
                )));
            }
            if q == 0.0 || !q.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "quadratic term ({i}, {j}) = {q}"
                )));
            }
            if idx > 0 && (quadratic[idx - 1].0, quadratic[idx - 1].1) >= (i, j) {
                return Err(Error::InvalidArgument(
                    "quadratic terms must be sorted and unique".into(),
                ));
            }
        }
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "offset must be a finite sum of squares, got {offset}"
            )));
        }
        let mut degree = vec![0usize; n + 1];
        for &(i, j, _) in &quadratic {
            degree[i + 1] += 1;
            degree[j + 1] += 1;
        }
        for v in 0..n {
            degree[v + 1] += degree[v];
        }
        let adj_ptr = degree.clone();
        let mut fill = degree;
        let mut adj = vec![(0u32, 0.0); 2 * quadratic.len()];
        // lower neighbors first (visited in row order), then upper
        for &(i, j, q) in &quadratic {
            adj[fill[j]] = (i as u32, q);
            fill[j] += 1;
        }
        for &(i, j, q) in &quadratic {
            adj[fill[i]] = (j as u32, q);
            fill[i] += 1;
        }
        for v in 0..n {
            adj[adj_ptr[v]..adj_ptr[v + 1]].sort_by_key(|e| e.0);
        }
        Ok(Self {
            linear,
            quadratic,
            offset,
            layout,
            adj_ptr,
            adj,
        })
    }

    /// `(j, Q_ij)` for every quadratic term touching `var`, `j` ascending.
    pub fn neighbors(&self, var: usize) -> &[(u32, f64)] {
        &self.adj[self.adj_ptr[var]..self.adj_ptr[var + 1]]
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// `(i, j, Q_ij)` with `i < j`, sorted.
    pub fn quadratic(&self) -> &[(usize, usize, f64)] {
        &self.quadratic
    }

    /// The constant `Σ P²` excluded from the energy.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn layout(&self) -> VarLayout {
        self.layout
    }

    /// Lowest energy any assignment could reach: `-offset`.
    pub fn theoretical_minimum(&self) -> f64 {
        -self.offset
    }

    /// Sum of absolute coefficients, a natural scale for tolerances.
    pub fn coefficient_scale(&self) -> f64 {
        self.linear.iter().map(|v| v.abs()).sum::<f64>()
            + self.quadratic.iter().map(|t| t.2.abs()).sum::<f64>()
    }

    /// True when no pixel has more than one level bit set.
    pub fn one_hot_valid(&self, x: &Assignment) -> bool {
        let m = self.layout.levels;
        m <= 1
            || x.bits()
                .chunks(m)
                .all(|c| c.iter().filter(|&&b| b == 1).count() <= 1)
    }
}

pub fn build_segmentation_qubo(
    sm: &SystemMatrix,
    sino: &Sinogram,
    enc: &EncodingSpec,
) -> Result<QuboModel> {
    if !matches!(enc.encoding(), Encoding::Segmentation(_)) {
        return Err(Error::InvalidArgument(
            "segmentation QUBO needs a segmentation encoding".into(),
        ));
    }
    build_qubo_with(sm, sino, enc, Execution::default())
}

pub fn build_reconstruction_qubo(
    sm: &SystemMatrix,
    sino: &Sinogram,
    enc: &EncodingSpec,
) -> Result<QuboModel> {
    if !matches!(enc.encoding(), Encoding::Reconstruction { .. }) {
        return Err(Error::InvalidArgument(
            "reconstruction QUBO needs a reconstruction encoding".into(),
        ));
    }
    build_qubo_with(sm, sino, enc, Execution::default())
}

/// Builds the residual QUBO for either encoding.
pub fn build_qubo(sm: &SystemMatrix, sino: &Sinogram, enc: &EncodingSpec) -> Result<QuboModel> {
    build_qubo_with(sm, sino, enc, Execution::default())
}

/// Angles processed concurrently before their partial sums are merged.
const ANGLE_BATCH: usize = 32;

struct AnglePartial {
    linear: Vec<f64>,
    quadratic: HashMap<(u32, u32), f64>,
    offset: f64,
}

/// Per-angle partials are computed independently and merged in ascending
/// angle order, so the result is bitwise independent of `exec`.
pub fn build_qubo_with(
    sm: &SystemMatrix,
    sino: &Sinogram,
    enc: &EncodingSpec,
    exec: Execution,
) -> Result<QuboModel> {
    sm.check_sinogram(sino)?;
    if enc.dims() != sm.image_dims() {
        return Err(Error::Dimension(format!(
            "encoding is for {:?}, system matrix for {:?}",
            enc.dims(),
            sm.image_dims()
        )));
    }
    let layout = enc.layout();
    let n = layout.num_vars();
    if u32::try_from(n).is_err() {
        return Err(Error::InvalidArgument(format!(
            "{n} variables exceed the supported range"
        )));
    }
    let coef: Vec<f64> = (0..layout.levels).map(|k| enc.level_value(k)).collect();
    let nangles = sino.num_angles();
    let nbins = sino.bin_count();

    let mut linear = vec![0.0; n];
    let mut quad: HashMap<(u32, u32), f64> = HashMap::new();
    let mut offset = 0.0;

    let mut start = 0;
    while start < nangles {
        let batch = ANGLE_BATCH.min(nangles - start);
        let partials = exec.map_range(batch, |i| {
            angle_partial(sm, sino, start + i, nbins, &coef, layout)
        });
        for part in partials {
            for (l, p) in linear.iter_mut().zip(&part.linear) {
                *l += p;
            }
            for (k, v) in part.quadratic {
                *quad.entry(k).or_insert(0.0) += v;
            }
            offset += part.offset;
        }
        start += batch;
    }

    let penalty = enc.penalty();
    if penalty > 0.0 {
        for p in 0..layout.pixels {
            for k in 0..layout.levels {
                for k2 in k + 1..layout.levels {
                    let key = (layout.var(p, k) as u32, layout.var(p, k2) as u32);
                    *quad.entry(key).or_insert(0.0) += penalty;
                }
            }
        }
    }

    for l in linear.iter_mut() {
        if l.abs() < COEFF_EPS {
            *l = 0.0;
        }
    }
    let mut quadratic: Vec<(usize, usize, f64)> = quad
        .into_iter()
        .filter(|(_, v)| v.abs() >= COEFF_EPS)
        .map(|((i, j), v)| (i as usize, j as usize, v))
        .collect();
    quadratic.sort_unstable_by_key(|t| (t.0, t.1));

    QuboModel::from_parts(linear, quadratic, offset, layout)
}

fn angle_partial(
    sm: &SystemMatrix,
    sino: &Sinogram,
    angle: usize,
    nbins: usize,
    coef: &[f64],
    layout: VarLayout,
) -> AnglePartial {
    let mut linear = vec![0.0; layout.num_vars()];
    let mut quadratic = HashMap::new();
    let mut offset = 0.0;
    let mut terms: Vec<(u32, f64)> = Vec::new();
    for bin in 0..nbins {
        let ray = angle * nbins + bin;
        let target = sino.values()[ray];
        offset += target * target;
        terms.clear();
        // pixels ascending and levels ascending, so vars come out sorted
        for &(p, w) in sm.ray(ray) {
            for (k, a) in coef.iter().enumerate() {
                terms.push((layout.var(p as usize, k) as u32, w * a));
            }
        }
        for (idx, &(u, a)) in terms.iter().enumerate() {
            linear[u as usize] += a * a - 2.0 * target * a;
            for &(v, b) in &terms[idx + 1..] {
                *quadratic.entry((u, v)).or_insert(0.0) += 2.0 * a * b;
            }
        }
    }
    AnglePartial {
        linear,
        quadratic,
        offset,
    }
}

/// Default one-hot penalty: `2 · max(α)² · max_p Σ_rays c_p`.
pub fn default_one_hot_penalty(levels: &[f64], sm: &SystemMatrix) -> f64 {
    let max_level = levels.iter().copied().fold(0.0, f64::max);
    2.0 * max_level * max_level * sm.max_pixel_weight_sum()
}

/// `Σ_i L_i x_i + Σ_{i<j} Q_ij x_i x_j`, offset excluded.
pub fn energy(model: &QuboModel, x: &Assignment) -> Result<f64> {
    if x.len() != model.num_vars() {
        return Err(Error::Dimension(format!(
            "assignment has {} bits, model has {} variables",
            x.len(),
            model.num_vars()
        )));
    }
    let bits = x.bits();
    let mut e = 0.0;
    for (l, &b) in model.linear.iter().zip(bits) {
        if b == 1 {
            e += l;
        }
    }
    for &(i, j, q) in &model.quadratic {
        if bits[i] == 1 && bits[j] == 1 {
            e += q;
        }
    }
    Ok(e)
}

/// Squared sinogram residual `Σ (A·img − sino)²`.
pub fn residual(sm: &SystemMatrix, sino: &Sinogram, img: &GridImage) -> Result<f64> {
    sm.check_sinogram(sino)?;
    let projected = forward_project(sm, img)?;
    Ok(projected
        .values()
        .iter()
        .zip(sino.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Pixel values from an assignment. Multiple set levels add up.
pub fn decode(x: &Assignment, enc: &EncodingSpec) -> Result<GridImage> {
    if x.len() != enc.num_vars() {
        return Err(Error::Dimension(format!(
            "assignment has {} bits, encoding needs {}",
            x.len(),
            enc.num_vars()
        )));
    }
    let m = enc.levels_per_pixel();
    let values = x
        .bits()
        .chunks(m)
        .map(|bits| {
            bits.iter()
                .enumerate()
                .filter(|(_, &b)| b == 1)
                .map(|(k, _)| enc.level_value(k))
                // fold from +0.0: an empty float sum is -0.0
                .fold(0.0, |acc, v| acc + v)
        })
        .collect();
    GridImage::new(enc.width, enc.height, values)
}

/// Inverse of [`decode`] for images whose pixels are exactly representable:
/// zero or a single level for segmentation, an integer in `0..2^bits` for
/// reconstruction.
pub fn encode(img: &GridImage, enc: &EncodingSpec) -> Result<Assignment> {
    if img.dims() != enc.dims() {
        return Err(Error::Dimension(format!(
            "image is {:?}, encoding is for {:?}",
            img.dims(),
            enc.dims()
        )));
    }
    let m = enc.levels_per_pixel();
    let mut bits = vec![0u8; enc.num_vars()];
    for (p, &v) in img.values().iter().enumerate() {
        let slot = &mut bits[p * m..(p + 1) * m];
        if v == 0.0 {
            continue;
        }
        match enc.encoding() {
            Encoding::Segmentation(spec) => {
                let k = spec.levels().iter().position(|&a| a == v).ok_or_else(|| {
                    Error::Encoding(format!("pixel {p} value {v} is not an attenuation level"))
                })?;
                slot[k] = 1;
            }
            Encoding::Reconstruction { bits: nbits } => {
                let max = ((1u64 << nbits) - 1) as f64;
                if v < 0.0 || v > max || v.fract() != 0.0 {
                    return Err(Error::Encoding(format!(
                        "pixel {p} value {v} is not an integer in 0..={max}"
                    )));
                }
                let n = v as u64;
                for (k, b) in slot.iter_mut().enumerate() {
                    *b = ((n >> k) & 1) as u8;
                }
            }
        }
    }
    Ok(Assignment(bits))
}
