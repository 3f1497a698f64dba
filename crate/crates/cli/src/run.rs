//! The end-to-end `run` pipeline.

use std::path::PathBuf;

use serde::Serialize;

use qubo_ct::preprocess::{add_noise, estimate_alpha};
use qubo_ct::projection::{build_system_matrix_with, forward_project_with};
use qubo_ct::qubo::{build_qubo_with, decode};
use qubo_ct::{generate_phantom, scale_binary, AnnealSchedule, EncodingSpec, Filter, GridImage};

use crate::commands::{
    baseline, compare, preprocess, segmentation_encoding, solve_model, CompareReport, Context,
    EnergyReport, Solver,
};
use crate::config::{EncodingConfig, PipelineConfig, SolverMethod};
use crate::error::{CliError, Result};
use crate::formats::{self, QuboFile};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub width: usize,
    pub height: usize,
    pub num_angles: usize,
    pub num_bins: usize,
    pub encoding: String,
    /// Levels used by a segmentation model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    pub energy: EnergyReport,
    /// `achieved_energy >= -offset`, up to rounding.
    pub bound_holds: bool,
    pub qubo_vs_truth: CompareReport,
    pub baseline_vs_truth: CompareReport,
    pub qubo_vs_baseline: CompareReport,
    /// RMSE of the decoded image against the ground-truth image.
    pub rmse: f64,
}

/// Outcome of [`cmd_run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub written: Vec<PathBuf>,
}

/// Slack for the lower-bound check, relative to the offset.
const BOUND_TOL: f64 = 1e-9;

pub fn cmd_run(ctx: &Context, cfg: &PipelineConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let ctx = match &cfg.out_dir {
        Some(d) => Context::new(d.clone(), ctx.exec),
        None => ctx.clone(),
    };
    let exec = ctx.exec;
    let mut written = Vec::new();

    let truth: GridImage = match &cfg.phantom.image {
        Some(p) => formats::read_image(p)?,
        None => {
            let p = &cfg.phantom;
            let mask = generate_phantom(cfg.phantom_kind()?, p.width, p.height, cfg.seed)?;
            scale_binary(&mask, p.alpha)?
        }
    };
    let truth_mask = truth.above(0.0);
    let (w, h) = truth.dims();
    ctx.image_pair("truth", &truth, &mut written)?;

    let geom = cfg.projection_geometry(w, h)?;
    let sm = build_system_matrix_with(&geom, w, h, cfg.weight_model(), exec)?;
    let mut sino = forward_project_with(&sm, &truth, exec)?;
    let n = &cfg.noise;
    if n.sigma != 0.0 || n.shift != 0.0 {
        sino = add_noise(&sino, n.sigma, n.shift, n.seed)?;
    }
    let p = &cfg.preprocess;
    let sino = preprocess(sino, None, p.background_columns, p.normalize)?;
    let path = ctx.path("sinogram.csv");
    formats::write_sinogram(&path, &sino)?;
    written.push(path);

    let filter = if cfg.baseline.filter {
        Filter::Ramp
    } else {
        Filter::None
    };
    let (fbp, base_mask) = baseline(&sino, &sm, filter, cfg.baseline.threshold, exec)?;
    ctx.image_pair("fbp", &fbp, &mut written)?;
    ctx.image_pair("baseline_mask", &base_mask.to_grid(), &mut written)?;

    let (encoding, levels) = match &cfg.encoding {
        EncodingConfig::Reconstruction { bits } => {
            (EncodingSpec::reconstruction(*bits, w, h)?, None)
        }
        EncodingConfig::Segmentation { levels, penalty } => {
            let levels = if p.estimate_alpha {
                vec![estimate_alpha(&sino, &sm, &base_mask)?]
            } else {
                levels.clone().unwrap_or_else(|| vec![cfg.phantom.alpha])
            };
            let enc = segmentation_encoding(levels.clone(), *penalty, &sm, w, h)?;
            (enc, Some(levels))
        }
    };
    let model = build_qubo_with(&sm, &sino, &encoding, exec)?;
    let file = QuboFile { model, encoding };
    let path = ctx.path("qubo.txt");
    formats::write_qubo(&path, &file)?;
    written.push(path);

    let s = &cfg.solver;
    let solver = match s.method {
        SolverMethod::BruteForce => Solver::BruteForce(s.cap),
        SolverMethod::Anneal => Solver::Anneal(AnnealSchedule {
            sweeps: s.sweeps,
            t_initial: s.t_initial,
            t_final: s.t_final,
            restarts: s.restarts,
            seed: s.seed.unwrap_or(cfg.seed),
        }),
    };
    let (res, energy) = solve_model(&file.model, &solver, exec)?;
    let path = ctx.path("assignment.txt");
    formats::write_assignment(&path, &res.best_assignment)?;
    written.push(path);
    let solution = decode(&res.best_assignment, &file.encoding)?;
    ctx.image_pair("solution", &solution, &mut written)?;
    let mask = solution.above(0.0);
    ctx.image_pair("solution_mask", &mask.to_grid(), &mut written)?;

    let qubo_vs_truth = compare(&ctx, &mask, &truth_mask, "qubo_vs_truth", &mut written)?;
    let baseline_vs_truth = compare(
        &ctx,
        &base_mask,
        &truth_mask,
        "baseline_vs_truth",
        &mut written,
    )?;
    let qubo_vs_baseline = compare(&ctx, &mask, &base_mask, "qubo_vs_baseline", &mut written)?;

    let offset = file.model.offset();
    let bound_holds = energy.achieved_energy >= -offset - BOUND_TOL * offset.max(1.0);
    let report = RunReport {
        width: w,
        height: h,
        num_angles: geom.num_angles(),
        num_bins: geom.bin_count(),
        encoding: match &cfg.encoding {
            EncodingConfig::Segmentation { .. } => "segmentation".into(),
            EncodingConfig::Reconstruction { bits } => format!("reconstruction ({bits} bits)"),
        },
        levels,
        energy,
        bound_holds,
        qubo_vs_truth,
        baseline_vs_truth,
        qubo_vs_baseline,
        rmse: solution.rmse(&truth)?,
    };
    ctx.json("run_report.json", &report, &mut written)?;
    println!(
        "bound check: achieved {} >= theoretical minimum {}: {}",
        report.energy.achieved_energy,
        report.energy.theoretical_minimum,
        if bound_holds { "ok" } else { "VIOLATED" }
    );
    if !bound_holds {
        return Err(CliError::Data(format!(
            "achieved energy {} is below the theoretical minimum {}",
            report.energy.achieved_energy, report.energy.theoretical_minimum
        )));
    }
    Ok(RunOutcome { report, written })
}
