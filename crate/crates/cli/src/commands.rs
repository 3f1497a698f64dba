//! One function per subcommand. Each returns the paths it wrote.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use qubo_ct::baseline::{fbp_reconstruct_with, threshold_segment};
use qubo_ct::preprocess::{
    add_noise, background_subtract, estimate_alpha, intensity_to_attenuation,
};
use qubo_ct::projection::{build_system_matrix_with, forward_project_with};
use qubo_ct::qubo::{build_qubo_with, decode, default_one_hot_penalty};
use qubo_ct::solver::{brute_force, simulated_anneal_with, DEFAULT_BRUTE_FORCE_CAP};
use qubo_ct::{
    compare_segmentations, generate_phantom, normalize_columns, scale_binary, AnnealSchedule,
    AttenuationSpec, BackgroundRegion, EncodingSpec, Execution, Filter, GridImage, Normalization,
    PhantomKind, ProjectionGeometry, QuboModel, Sinogram, SolveResult, SystemMatrix,
    ThresholdMethod, WeightModel,
};

use crate::error::{CliError, Result};
use crate::formats::{self, QuboFile};

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub out_dir: PathBuf,
    pub exec: Execution,
}

impl Context {
    pub fn new(out_dir: impl Into<PathBuf>, exec: Execution) -> Self {
        Self {
            out_dir: out_dir.into(),
            exec,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub(crate) fn image_pair(
        &self,
        stem: &str,
        img: &GridImage,
        written: &mut Vec<PathBuf>,
    ) -> Result<()> {
        formats::write_image_pair(&self.out_dir, stem, img)?;
        written.push(self.path(&format!("{stem}.csv")));
        written.push(self.path(&format!("{stem}.pgm")));
        Ok(())
    }

    pub(crate) fn json<T: Serialize>(
        &self,
        name: &str,
        value: &T,
        written: &mut Vec<PathBuf>,
    ) -> Result<()> {
        let path = self.path(name);
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        formats::write_text(&path, &text)?;
        written.push(path);
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct GeometryArgs {
    /// Number of evenly spaced angles in [0, 180).
    #[arg(long, conflicts_with_all = ["dtheta", "angle_list"])]
    pub angles: Option<usize>,
    /// Angular step in degrees (default 10).
    #[arg(long, conflicts_with = "angle_list")]
    pub dtheta: Option<f64>,
    /// Comma-separated angles in degrees.
    #[arg(long, value_delimiter = ',')]
    pub angle_list: Option<Vec<f64>>,
    /// Detector bins (default ceil(hypot(W, H))).
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub detector_offset: f64,
    /// Use a k x k sub-pixel weight model instead of exact area overlap.
    #[arg(long)]
    pub subsample: Option<usize>,
}

impl GeometryArgs {
    pub fn geometry(&self, width: usize, height: usize) -> Result<ProjectionGeometry> {
        let angles = match (&self.angle_list, self.angles, self.dtheta) {
            (Some(list), _, _) => list.clone(),
            (None, Some(n), _) => ProjectionGeometry::evenly_spaced(n)?,
            (None, None, d) => ProjectionGeometry::uniform_angles(d.unwrap_or(10.0))?,
        };
        let bins = self
            .bins
            .unwrap_or_else(|| qubo_ct::geometry::default_bin_count(width, height));
        Ok(ProjectionGeometry::new(
            angles,
            bins,
            self.bin_width,
            self.detector_offset,
        )?)
    }

    pub fn weight_model(&self) -> WeightModel {
        self.subsample
            .map_or(WeightModel::AreaOverlap, WeightModel::Subsample)
    }
}

fn system_matrix_for(
    sino: &Sinogram,
    width: usize,
    height: usize,
    model: WeightModel,
    exec: Execution,
) -> Result<SystemMatrix> {
    Ok(build_system_matrix_with(
        sino.geometry(),
        width,
        height,
        model,
        exec,
    )?)
}

// ---- phantom ----

#[derive(Debug, Clone, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value = "disk")]
    pub kind: PhantomKind,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long, default_value_t = 16)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Writes `phantom.csv` and `phantom.pgm`.
pub fn cmd_phantom(ctx: &Context, args: &PhantomArgs) -> Result<Vec<PathBuf>> {
    let mask = generate_phantom(args.kind, args.width, args.height, args.seed)?;
    let mut written = Vec::new();
    ctx.image_pair("phantom", &mask.to_grid(), &mut written)?;
    Ok(written)
}

// ---- project ----

#[derive(Debug, Clone, Args)]
pub struct ProjectArgs {
    /// Image CSV to project; a generated phantom is used otherwise.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[command(flatten)]
    pub phantom: PhantomArgs,
    /// Foreground attenuation of the generated phantom.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    /// Constant added to every projection value.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub shift: f64,
}

/// Writes `sinogram.csv`.
pub fn cmd_project(ctx: &Context, args: &ProjectArgs) -> Result<Vec<PathBuf>> {
    let img = match &args.image {
        Some(p) => formats::read_image(p)?,
        None => {
            let p = &args.phantom;
            scale_binary(
                &generate_phantom(p.kind, p.width, p.height, p.seed)?,
                args.alpha,
            )?
        }
    };
    let (w, h) = img.dims();
    let geom = args.geometry.geometry(w, h)?;
    let sm = build_system_matrix_with(&geom, w, h, args.geometry.weight_model(), ctx.exec)?;
    let mut sino = forward_project_with(&sm, &img, ctx.exec)?;
    if args.noise_sigma != 0.0 || args.shift != 0.0 {
        sino = add_noise(&sino, args.noise_sigma, args.shift, args.noise_seed)?;
    }
    let path = ctx.path("sinogram.csv");
    formats::write_sinogram(&path, &sino)?;
    Ok(vec![path])
}

// ---- build ----

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    /// Treat the input as detector intensities with this unattenuated value.
    #[arg(long)]
    pub i0: Option<f64>,
    /// Subtract the mean of this many border bins on each side.
    #[arg(long)]
    pub background_cols: Option<usize>,
    /// Rescale every angle to the mean angle sum.
    #[arg(long)]
    pub normalize: bool,
}

impl PreprocessArgs {
    pub fn apply(&self, sino: Sinogram) -> Result<Sinogram> {
        preprocess(sino, self.i0, self.background_cols, self.normalize)
    }
}

pub(crate) fn preprocess(
    mut sino: Sinogram,
    i0: Option<f64>,
    background: Option<usize>,
    normalize: bool,
) -> Result<Sinogram> {
    if let Some(i0) = i0 {
        sino = intensity_to_attenuation(&sino, i0)?;
    }
    if let Some(n) = background {
        sino = background_subtract(&sino, &BackgroundRegion::BorderColumns(n))?;
    }
    if normalize {
        sino = normalize_columns(&sino, Normalization::PerAngleSumToMean)?;
    }
    Ok(sino)
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub sinogram: PathBuf,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    /// Comma-separated attenuation levels (segmentation mode).
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "bits",
        default_value = "1.0"
    )]
    pub levels: Vec<f64>,
    /// Bits per pixel (reconstruction mode).
    #[arg(long)]
    pub bits: Option<usize>,
    /// One-hot penalty; derived from the levels and geometry when omitted.
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Fit a single level to the sinogram by least squares using this mask.
    #[arg(long, conflicts_with = "bits")]
    pub estimate_alpha: Option<PathBuf>,
    #[arg(long)]
    pub subsample: Option<usize>,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

/// Writes `qubo.txt`.
pub fn cmd_build(ctx: &Context, args: &BuildArgs) -> Result<Vec<PathBuf>> {
    let sino = args
        .preprocess
        .apply(formats::read_sinogram(&args.sinogram)?)?;
    let model = args
        .subsample
        .map_or(WeightModel::AreaOverlap, WeightModel::Subsample);
    let sm = system_matrix_for(&sino, args.width, args.height, model, ctx.exec)?;
    let encoding = match args.bits {
        Some(bits) => EncodingSpec::reconstruction(bits, args.width, args.height)?,
        None => {
            let levels = match &args.estimate_alpha {
                Some(mask_path) => {
                    let mask = formats::read_mask(mask_path)?;
                    vec![estimate_alpha(&sino, &sm, &mask)?]
                }
                None => args.levels.clone(),
            };
            segmentation_encoding(levels, args.penalty, &sm, args.width, args.height)?
        }
    };
    let model = build_qubo_with(&sm, &sino, &encoding, ctx.exec)?;
    let path = ctx.path("qubo.txt");
    formats::write_qubo(&path, &QuboFile { model, encoding })?;
    Ok(vec![path])
}

pub(crate) fn segmentation_encoding(
    levels: Vec<f64>,
    penalty: Option<f64>,
    sm: &SystemMatrix,
    width: usize,
    height: usize,
) -> Result<EncodingSpec> {
    let penalty = match penalty {
        Some(p) => p,
        None if levels.len() > 1 => default_one_hot_penalty(&levels, sm),
        None => 0.0,
    };
    Ok(EncodingSpec::segmentation(
        AttenuationSpec::new(levels, penalty)?,
        width,
        height,
    )?)
}

// ---- solve ----

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub qubo: PathBuf,
    /// Enumerate all assignments instead of annealing.
    #[arg(long)]
    pub brute_force: bool,
    /// Largest model accepted by --brute-force.
    #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
    pub cap: usize,
    #[arg(long, default_value_t = 2000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub t_initial: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
}

/// Energy report written by `solve` and embedded in the `run` report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub solver: &'static str,
    pub num_vars: usize,
    pub offset: f64,
    pub theoretical_minimum: f64,
    pub achieved_energy: f64,
    pub gap_percent: f64,
    pub one_hot_valid: bool,
    pub restart_energies: Vec<f64>,
    pub t_initial: f64,
    pub t_final: f64,
    /// Brute force only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimizer_count: Option<u64>,
}

impl EnergyReport {
    pub fn new(
        model: &QuboModel,
        solver: &'static str,
        res: &SolveResult,
        minimizer_count: Option<u64>,
    ) -> Self {
        Self {
            solver,
            num_vars: model.num_vars(),
            offset: model.offset(),
            theoretical_minimum: model.theoretical_minimum(),
            achieved_energy: res.best_energy,
            gap_percent: 100.0 * res.gap(model),
            one_hot_valid: res.one_hot_valid,
            restart_energies: res.samples.iter().map(|s| s.1).collect(),
            t_initial: res.t_initial,
            t_final: res.t_final,
            minimizer_count,
        }
    }
}

pub(crate) enum Solver {
    Anneal(AnnealSchedule),
    BruteForce(usize),
}

pub(crate) fn solve_model(
    model: &QuboModel,
    solver: &Solver,
    exec: Execution,
) -> Result<(SolveResult, EnergyReport)> {
    Ok(match solver {
        Solver::BruteForce(cap) => {
            let exact = brute_force(model, *cap)?;
            let report = EnergyReport::new(
                model,
                "brute_force",
                &exact.result,
                Some(exact.minimizer_count),
            );
            (exact.result, report)
        }
        Solver::Anneal(sched) => {
            let res = simulated_anneal_with(model, sched, exec)?;
            let report = EnergyReport::new(model, "simulated_annealing", &res, None);
            (res, report)
        }
    })
}

/// Writes `assignment.txt`, `solution.csv`, `solution.pgm` and `report.json`.
pub fn cmd_solve(ctx: &Context, args: &SolveArgs) -> Result<Vec<PathBuf>> {
    let file = formats::read_qubo(&args.qubo)?;
    let solver = if args.brute_force {
        Solver::BruteForce(args.cap)
    } else {
        Solver::Anneal(AnnealSchedule {
            sweeps: args.sweeps,
            t_initial: args.t_initial,
            t_final: args.t_final,
            restarts: args.restarts,
            seed: args.seed,
        })
    };
    let (res, report) = solve_model(&file.model, &solver, ctx.exec)?;
    let mut written = Vec::new();
    let path = ctx.path("assignment.txt");
    formats::write_assignment(&path, &res.best_assignment)?;
    written.push(path);
    ctx.image_pair(
        "solution",
        &decode(&res.best_assignment, &file.encoding)?,
        &mut written,
    )?;
    ctx.json("report.json", &report, &mut written)?;
    Ok(written)
}

// ---- baseline ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    Ramp,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub sinogram: PathBuf,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[arg(long, value_enum, default_value = "ramp")]
    pub filter: FilterArg,
    /// Fixed threshold; Otsu when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub subsample: Option<usize>,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

pub(crate) fn baseline(
    sino: &Sinogram,
    sm: &SystemMatrix,
    filter: Filter,
    threshold: Option<f64>,
    exec: Execution,
) -> Result<(GridImage, qubo_ct::BinaryImage)> {
    let img = fbp_reconstruct_with(sino, sm, filter, exec)?;
    let method = threshold.map_or(ThresholdMethod::Otsu, ThresholdMethod::Fixed);
    let mask = threshold_segment(&img, method)?;
    Ok((img, mask))
}

/// Writes `fbp.csv/.pgm` and `baseline_mask.csv/.pgm`.
pub fn cmd_baseline(ctx: &Context, args: &BaselineArgs) -> Result<Vec<PathBuf>> {
    let sino = args
        .preprocess
        .apply(formats::read_sinogram(&args.sinogram)?)?;
    let model = args
        .subsample
        .map_or(WeightModel::AreaOverlap, WeightModel::Subsample);
    let sm = system_matrix_for(&sino, args.width, args.height, model, ctx.exec)?;
    let filter = match args.filter {
        FilterArg::Ramp => Filter::Ramp,
        FilterArg::None => Filter::None,
    };
    // the reconstruction is written even when thresholding fails
    let img = fbp_reconstruct_with(&sino, &sm, filter, ctx.exec)?;
    let mut written = Vec::new();
    ctx.image_pair("fbp", &img, &mut written)?;
    let method = args
        .threshold
        .map_or(ThresholdMethod::Otsu, ThresholdMethod::Fixed);
    let mask = threshold_segment(&img, method)?;
    ctx.image_pair("baseline_mask", &mask.to_grid(), &mut written)?;
    Ok(written)
}

// ---- compare ----

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// First mask (CSV or PGM; nonzero pixels are foreground).
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Stem of the output files.
    #[arg(long, default_value = "compare")]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub dice: f64,
    pub pixel_agreement: f64,
    pub differing_pixels: usize,
}

pub(crate) fn compare(
    ctx: &Context,
    a: &qubo_ct::BinaryImage,
    b: &qubo_ct::BinaryImage,
    stem: &str,
    written: &mut Vec<PathBuf>,
) -> Result<CompareReport> {
    let m = compare_segmentations(a, b)?;
    let report = CompareReport {
        dice: m.dice,
        pixel_agreement: m.pixel_agreement,
        differing_pixels: m.diff_mask.count_ones(),
    };
    ctx.image_pair(&format!("{stem}_diff"), &m.diff_mask.to_grid(), written)?;
    ctx.json(&format!("{stem}_metrics.json"), &report, written)?;
    Ok(report)
}

/// Writes `<name>_metrics.json` and the `<name>_diff` image pair.
pub fn cmd_compare(ctx: &Context, args: &CompareArgs) -> Result<Vec<PathBuf>> {
    let a = formats::read_mask(&args.a)?;
    let b = formats::read_mask(&args.b)?;
    let mut written = Vec::new();
    compare(ctx, &a, &b, &args.name, &mut written)?;
    Ok(written)
}
