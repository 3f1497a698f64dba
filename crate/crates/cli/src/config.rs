//! Pipeline configuration for `qubo-ct run`, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qubo_ct::{PhantomKind, ProjectionGeometry, WeightModel};

use crate::error::{CliError, Result};
use crate::formats;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides the global output directory when set.
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub phantom: PhantomConfig,
    pub geometry: GeometryConfig,
    pub noise: NoiseConfig,
    pub preprocess: PreprocessConfig,
    pub encoding: EncodingConfig,
    pub solver: SolverConfig,
    pub baseline: BaselineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub kind: String,
    pub width: usize,
    pub height: usize,
    /// Attenuation of the foreground.
    pub alpha: f64,
    /// Ground-truth image CSV; replaces the generated phantom.
    pub image: Option<PathBuf>,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            kind: "disk".into(),
            width: 16,
            height: 16,
            alpha: 3.0,
            image: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Number of evenly spaced angles in `[0, 180)`.
    pub angles: Option<usize>,
    /// Angular step in degrees (10 when no angle option is given).
    pub dtheta: Option<f64>,
    /// Explicit angles in degrees.
    pub angle_list: Option<Vec<f64>>,
    /// Defaults to `ceil(hypot(W, H))`.
    pub bins: Option<usize>,
    pub bin_width: f64,
    pub detector_offset: f64,
    /// Sub-pixel grid size; area overlap when unset.
    pub subsample: Option<usize>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            angles: None,
            dtheta: None,
            angle_list: None,
            bins: None,
            bin_width: 1.0,
            detector_offset: 0.0,
            subsample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub seed: u64,
    /// Constant added to every projection value.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Border detector bins used for background subtraction.
    pub background_columns: Option<usize>,
    pub normalize: bool,
    /// Replace the single level with a least-squares estimate fitted to the
    /// baseline mask.
    pub estimate_alpha: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncodingConfig {
    Segmentation {
        /// Defaults to the phantom alpha.
        #[serde(default)]
        levels: Option<Vec<f64>>,
        #[serde(default)]
        penalty: Option<f64>,
    },
    Reconstruction {
        bits: usize,
    },
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig::Segmentation {
            levels: None,
            penalty: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Anneal,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub sweeps: usize,
    pub restarts: usize,
    pub t_initial: Option<f64>,
    pub t_final: Option<f64>,
    /// Defaults to the top-level seed.
    pub seed: Option<u64>,
    pub cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Anneal,
            sweeps: 20_000,
            restarts: 8,
            t_initial: None,
            t_final: None,
            seed: None,
            cap: qubo_ct::solver::DEFAULT_BRUTE_FORCE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Fixed threshold; Otsu when unset.
    pub threshold: Option<f64>,
    pub filter: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            filter: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&formats::read_text(path)?, path)
    }

    /// Checks everything that can be checked without running the pipeline,
    /// including that referenced input files exist.
    pub fn validate(&self) -> Result<()> {
        if self.phantom.image.is_none() {
            self.phantom_kind()?;
        }
        if let Some(p) = &self.phantom.image {
            if !p.is_file() {
                return Err(CliError::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input image not found"),
                ));
            }
        }
        let specified = [
            self.geometry.angles.is_some(),
            self.geometry.dtheta.is_some(),
            self.geometry.angle_list.is_some(),
        ];
        if specified.iter().filter(|&&b| b).count() > 1 {
            return Err(CliError::Usage(
                "geometry: give only one of angles, dtheta, angle_list".into(),
            ));
        }
        if self.preprocess.estimate_alpha {
            match &self.encoding {
                EncodingConfig::Segmentation { levels, .. }
                    if levels.as_ref().is_none_or(|l| l.len() == 1) => {}
                _ => {
                    return Err(CliError::Usage(
                        "estimate_alpha needs a single-level segmentation encoding".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn phantom_kind(&self) -> Result<PhantomKind> {
        self.phantom
            .kind
            .parse()
            .map_err(|e: qubo_ct::Error| CliError::Usage(e.to_string()))
    }

    pub fn angles(&self) -> Result<Vec<f64>> {
        let g = &self.geometry;
        Ok(match (&g.angle_list, g.angles, g.dtheta) {
            (Some(list), _, _) => list.clone(),
            (None, Some(n), _) => ProjectionGeometry::evenly_spaced(n)?,
            (None, None, Some(d)) => ProjectionGeometry::uniform_angles(d)?,
            (None, None, None) => ProjectionGeometry::uniform_angles(10.0)?,
        })
    }

    pub fn projection_geometry(&self, width: usize, height: usize) -> Result<ProjectionGeometry> {
        let g = &self.geometry;
        let bins = g
            .bins
            .unwrap_or_else(|| qubo_ct::geometry::default_bin_count(width, height));
        Ok(ProjectionGeometry::new(
            self.angles()?,
            bins,
            g.bin_width,
            g.detector_offset,
        )?)
    }

    pub fn weight_model(&self) -> WeightModel {
        match self.geometry.subsample {
            Some(k) => WeightModel::Subsample(k),
            None => WeightModel::AreaOverlap,
        }
    }
}
