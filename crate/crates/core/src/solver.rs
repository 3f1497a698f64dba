//! QUBO minimization: exhaustive enumeration for small models and
//! Metropolis simulated annealing for everything else.

use std::collections::BTreeSet;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::qubo::{energy, Assignment, QuboModel};
use crate::rng;

/// Default variable cap for [`brute_force`].
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 24;

/// At most this many minimizers are reported by [`brute_force`].
pub const MAX_REPORTED_MINIMIZERS: usize = 64;

/// Geometric cooling schedule for [`simulated_anneal`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    /// `None` selects the largest possible `|ΔE|` of the model.
    pub t_initial: Option<f64>,
    /// `None` selects `t_initial · 1e-5`.
    pub t_final: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            sweeps: 2000,
            t_initial: None,
            t_final: None,
            restarts: 4,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::InvalidArgument("sweeps must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        for t in [self.t_initial, self.t_final].into_iter().flatten() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "temperatures must be > 0, got {t}"
                )));
            }
        }
        if let (Some(ti), Some(tf)) = (self.t_initial, self.t_final) {
            if ti < tf {
                return Err(Error::InvalidArgument(format!(
                    "t_initial {ti} is below t_final {tf}"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub best_assignment: Assignment,
    pub best_energy: f64,
    /// Best `(assignment, energy)` of each restart, in restart order.
    pub samples: Vec<(Assignment, f64)>,
    /// Best-so-far energy after each sweep (minimum over restarts).
    pub trace: Vec<f64>,
    /// No pixel has more than one level bit set in the best assignment.
    pub one_hot_valid: bool,
    /// Temperatures actually used; zero for exact solvers.
    pub t_initial: f64,
    pub t_final: f64,
    /// Largest `|ΔE|` proposed during the run.
    pub max_observed_delta: f64,
}

impl SolveResult {
    /// Relative gap to the theoretical minimum `-offset`.
    pub fn gap(&self, model: &QuboModel) -> f64 {
        if model.offset() == 0.0 {
            return if self.best_energy == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
        (self.best_energy + model.offset()) / model.offset()
    }
}

/// Exhaustive minimization result.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub result: SolveResult,
    /// Global minimizers in ascending lexicographic order (bit 0 first),
    /// at most [`MAX_REPORTED_MINIMIZERS`].
    pub minimizers: Vec<Assignment>,
    /// Number of minimizers found, including unreported ones.
    pub minimizer_count: u64,
}

/// `energy(flip_i(x)) - energy(x)` in `O(degree(i))`.
pub fn delta_energy(model: &QuboModel, x: &Assignment, i: usize) -> Result<f64> {
    if x.len() != model.num_vars() {
        return Err(Error::Dimension(format!(
            "assignment has {} bits, model has {} variables",
            x.len(),
            model.num_vars()
        )));
    }
    if i >= model.num_vars() {
        return Err(Error::Index {
            index: i,
            len: model.num_vars(),
        });
    }
    let bits = x.bits();
    let field = local_field(model, bits, i);
    Ok(flip_sign(bits[i]) * field)
}

fn local_field(model: &QuboModel, bits: &[u8], i: usize) -> f64 {
    model.linear()[i]
        + model
            .neighbors(i)
            .iter()
            .filter(|(j, _)| bits[*j as usize] == 1)
            .map(|e| e.1)
            .sum::<f64>()
}

#[inline]
fn flip_sign(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Largest possible `|ΔE|` of a single flip: `max_i |L_i| + Σ_j |Q_ij|`.
pub fn max_flip_magnitude(model: &QuboModel) -> f64 {
    (0..model.num_vars())
        .map(|i| {
            model.linear()[i].abs() + model.neighbors(i).iter().map(|e| e.1.abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Enumerates every assignment (Gray-code order) and returns the exact minimum.
pub fn brute_force(model: &QuboModel, cap: usize) -> Result<ExactSolution> {
    let n = model.num_vars();
    if n > cap || n >= 64 {
        return Err(Error::TooLarge { vars: n, cap });
    }
    let tol = 1e-10 * model.coefficient_scale().max(1.0);

    // first pass: minimum incremental energy
    let mut min_e = 0.0;
    gray_walk(model, |_, e| {
        if e < min_e {
            min_e = e;
        }
    });

    // second pass: everything within tolerance, then re-score exactly
    let mut candidates: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut count = 0u64;
    gray_walk(model, |bits, e| {
        if e <= min_e + tol {
            count += 1;
            candidates.insert(bits.to_vec());
            if candidates.len() > MAX_REPORTED_MINIMIZERS {
                candidates.pop_last();
            }
        }
    });
    let scored: Vec<(Assignment, f64)> = candidates
        .into_iter()
        .map(|b| {
            let a = Assignment::from_bits_unchecked(b);
            let e = energy(model, &a).expect("length checked");
            (a, e)
        })
        .collect();
    let exact_min = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let minimizers: Vec<Assignment> = scored
        .iter()
        .filter(|s| s.1 <= exact_min + tol)
        .map(|s| s.0.clone())
        .collect();
    let dropped = (scored.len() - minimizers.len()) as u64;
    let best = minimizers[0].clone();
    let best_energy = energy(model, &best)?;
    Ok(ExactSolution {
        result: SolveResult {
            one_hot_valid: model.one_hot_valid(&best),
            samples: vec![(best.clone(), best_energy)],
            trace: vec![best_energy],
            best_assignment: best,
            best_energy,
            t_initial: 0.0,
            t_final: 0.0,
            max_observed_delta: 0.0,
        },
        minimizers,
        minimizer_count: count - dropped.min(count),
    })
}

/// Visits all `2^n` assignments, calling `f(bits, energy)` with the
/// incrementally maintained energy.
fn gray_walk(model: &QuboModel, mut f: impl FnMut(&[u8], f64)) {
    let n = model.num_vars();
    let mut bits = vec![0u8; n];
    let mut field: Vec<f64> = model.linear().to_vec();
    let mut e = 0.0;
    f(&bits, e);
    for g in 1u64..(1u64 << n) {
        let i = g.trailing_zeros() as usize;
        flip(model, &mut bits, &mut field, &mut e, i);
        f(&bits, e);
    }
}

#[inline]
fn flip(model: &QuboModel, bits: &mut [u8], field: &mut [f64], e: &mut f64, i: usize) -> f64 {
    let s = flip_sign(bits[i]);
    let d = s * field[i];
    *e += d;
    bits[i] ^= 1;
    for &(j, q) in model.neighbors(i) {
        field[j as usize] += s * q;
    }
    d
}

pub fn simulated_anneal(model: &QuboModel, sched: &AnnealSchedule) -> Result<SolveResult> {
    simulated_anneal_with(model, sched, Execution::default())
}

/// Runs `restarts` independent annealing chains (concurrently when requested).
/// Restart `r` uses seed `seed + r`; the merged result does not depend on
/// `exec`.
pub fn simulated_anneal_with(
    model: &QuboModel,
    sched: &AnnealSchedule,
    exec: Execution,
) -> Result<SolveResult> {
    sched.validate()?;
    if model.num_vars() == 0 {
        return Err(Error::InvalidArgument(
            "cannot anneal a model without variables".into(),
        ));
    }
    let t_initial = match sched.t_initial {
        Some(t) => t,
        None => {
            let t = max_flip_magnitude(model);
            if t > 0.0 {
                t
            } else {
                1.0
            }
        }
    };
    let t_final = sched.t_final.unwrap_or(t_initial * 1e-5);
    if t_final > t_initial {
        return Err(Error::InvalidArgument(format!(
            "t_final {t_final} exceeds t_initial {t_initial}"
        )));
    }
    let temps: Vec<f64> = (0..sched.sweeps)
        .map(|k| {
            if sched.sweeps == 1 {
                t_final
            } else {
                t_initial * (t_final / t_initial).powf(k as f64 / (sched.sweeps - 1) as f64)
            }
        })
        .collect();

    let runs = exec.map_range(sched.restarts, |r| {
        anneal_chain(model, &temps, sched.seed.wrapping_add(r as u64))
    });

    let mut best_idx = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.best_energy < runs[best_idx].best_energy {
            best_idx = r;
        }
    }
    let trace = (0..sched.sweeps)
        .map(|k| {
            runs.iter()
                .map(|run| run.trace[k])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let max_observed_delta = runs.iter().map(|r| r.max_delta).fold(0.0, f64::max);
    let best_assignment = runs[best_idx].best.clone();
    let best_energy = runs[best_idx].best_energy;
    Ok(SolveResult {
        one_hot_valid: model.one_hot_valid(&best_assignment),
        samples: runs.into_iter().map(|r| (r.best, r.best_energy)).collect(),
        trace,
        best_assignment,
        best_energy,
        t_initial,
        t_final,
        max_observed_delta,
    })
}

struct Chain {
    best: Assignment,
    best_energy: f64,
    trace: Vec<f64>,
    max_delta: f64,
}

fn anneal_chain(model: &QuboModel, temps: &[f64], seed: u64) -> Chain {
    let n = model.num_vars();
    let mut rng = rng::seeded(seed);
    let mut bits: Vec<u8> = (0..n).map(|_| (rng.next_u64() >> 63) as u8).collect();
    let mut field: Vec<f64> = (0..n).map(|i| local_field(model, &bits, i)).collect();
    let mut best = Assignment::from_bits_unchecked(bits.clone());
    let mut best_energy = energy(model, &best).expect("length matches");
    let mut e = best_energy;
    let mut trace = Vec::with_capacity(temps.len());
    let mut max_delta = 0.0f64;

    for &t in temps {
        for i in 0..n {
            let d = flip_sign(bits[i]) * field[i];
            max_delta = max_delta.max(d.abs());
            if d <= 0.0 || rng.random::<f64>() < (-d / t).exp() {
                flip(model, &mut bits, &mut field, &mut e, i);
            }
        }
        // incremental energy drifts; confirm candidate improvements exactly
        if e < best_energy - 1e-12 * (best_energy.abs() + 1.0) {
            let candidate = Assignment::from_bits_unchecked(bits.clone());
            let exact = energy(model, &candidate).expect("length matches");
            e = exact;
            if exact < best_energy {
                best_energy = exact;
                best = candidate;
            }
        }
        trace.push(best_energy);
    }
    Chain {
        best,
        best_energy,
        trace,
        max_delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AttenuationSpec, ProjectionGeometry};
    use crate::image::GridImage;
    use crate::projection::{build_system_matrix, forward_project, WeightModel};
    use crate::qubo::{build_qubo, decode, encode, EncodingSpec, VarLayout};

    fn model(linear: Vec<f64>, quadratic: Vec<(usize, usize, f64)>) -> QuboModel {
        let n = linear.len();
        QuboModel::from_parts(
            linear,
            quadratic,
            0.0,
            VarLayout {
                pixels: n,
                levels: 1,
            },
        )
        .unwrap()
    }

    fn random_model(seed: u64, n: usize, density: f64) -> QuboModel {
        let mut r = rng::seeded(seed);
        let linear = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let mut quad = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if r.random::<f64>() < density {
                    quad.push((i, j, r.random_range(-4.0..4.0)));
                }
            }
        }
        model(linear, quad)
    }

    #[test]
    fn brute_force_empty_model() {
        let m = model(vec![], vec![]);
        let s = brute_force(&m, 24).unwrap();
        assert_eq!(s.result.best_energy, 0.0);
        assert_eq!(s.minimizers, vec![Assignment::zeros(0)]);
    }

    #[test]
    fn brute_force_single_var() {
        let s = brute_force(&model(vec![-4.0], vec![]), 24).unwrap();
        assert_eq!(s.result.best_energy, -4.0);
        assert_eq!(s.minimizers, vec![Assignment::new(vec![1]).unwrap()]);
    }

    #[test]
    fn brute_force_too_large() {
        let m = model(vec![0.0; 5], vec![]);
        assert_eq!(brute_force(&m, 4), Err(Error::TooLarge { vars: 5, cap: 4 }));
    }

    #[test]
    fn brute_force_reports_ties_in_lexicographic_order() {
        let m = model(vec![0.0; 3], vec![]);
        let s = brute_force(&m, 24).unwrap();
        assert_eq!(s.minimizer_count, 8);
        assert_eq!(s.minimizers.len(), 8);
        assert!(s.minimizers.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.minimizers[0], Assignment::zeros(3));
    }

    #[test]
    fn brute_force_matches_plain_enumeration() {
        for seed in 0..20 {
            let m = random_model(seed, 8, 0.5);
            let mut best = f64::INFINITY;
            for g in 0u32..256 {
                let x = Assignment::new((0..8).map(|i| ((g >> i) & 1) as u8).collect()).unwrap();
                best = best.min(energy(&m, &x).unwrap());
            }
            let s = brute_force(&m, 24).unwrap();
            assert!((s.result.best_energy - best).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_diagonals_are_both_minimal() {
        let g = ProjectionGeometry::new(vec![0.0, 90.0], 2, 1.0, 0.0).unwrap();
        let sm = build_system_matrix(&g, 2, 2, WeightModel::AreaOverlap).unwrap();
        let img = GridImage::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let s = forward_project(&sm, &img).unwrap();
        let enc = EncodingSpec::segmentation(AttenuationSpec::single(1.0).unwrap(), 2, 2).unwrap();
        let m = build_qubo(&sm, &s, &enc).unwrap();
        let sol = brute_force(&m, 24).unwrap();
        assert_eq!(
            sol.minimizers,
            vec![
                Assignment::new(vec![0, 1, 1, 0]).unwrap(),
                Assignment::new(vec![1, 0, 0, 1]).unwrap()
            ]
        );
        assert!((sol.result.best_energy + m.offset()).abs() < 1e-12);
        assert_eq!(encode(&img, &enc).unwrap(), sol.minimizers[1]);
    }

    #[test]
    fn delta_examples() {
        let m = model(vec![5.0, 1.0], vec![]);
        assert_eq!(delta_energy(&m, &Assignment::zeros(2), 0).unwrap(), 5.0);
        assert_eq!(
            delta_energy(&m, &Assignment::new(vec![1, 0]).unwrap(), 0).unwrap(),
            -5.0
        );
        let isolated = model(vec![0.0, 3.0], vec![]);
        assert_eq!(
            delta_energy(&isolated, &Assignment::new(vec![1, 1]).unwrap(), 0).unwrap(),
            0.0
        );
        assert_eq!(
            delta_energy(&m, &Assignment::zeros(2), 2),
            Err(Error::Index { index: 2, len: 2 })
        );
    }

    #[test]
    fn delta_matches_full_recompute() {
        let mut r = rng::seeded(77);
        for t in 0..300 {
            let m = random_model(t, 12, 0.4);
            let x = Assignment::new((0..12).map(|_| r.random_range(0..=1)).collect()).unwrap();
            let i = r.random_range(0..12);
            let mut y = x.bits().to_vec();
            y[i] ^= 1;
            let full = energy(&m, &Assignment::new(y).unwrap()).unwrap() - energy(&m, &x).unwrap();
            assert!((delta_energy(&m, &x, i).unwrap() - full).abs() < 1e-9);
        }
    }

    #[test]
    fn anneal_is_deterministic() {
        let m = random_model(1, 30, 0.3);
        let sched = AnnealSchedule {
            sweeps: 200,
            restarts: 3,
            seed: 42,
            ..Default::default()
        };
        let a = simulated_anneal(&m, &sched).unwrap();
        let b = simulated_anneal(&m, &sched).unwrap();
        assert_eq!(a, b);
        let c = simulated_anneal_with(&m, &sched, Execution::Sequential).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn anneal_positive_model_goes_to_zero() {
        let m = model(vec![1.0, 2.0, 0.5, 3.0], vec![(0, 1, 1.0), (2, 3, 0.25)]);
        let s = simulated_anneal(&m, &AnnealSchedule::default()).unwrap();
        assert_eq!(s.best_assignment, Assignment::zeros(4));
        assert_eq!(s.best_energy, 0.0);
    }

    #[test]
    fn anneal_result_invariants() {
        let m = random_model(5, 40, 0.2);
        let sched = AnnealSchedule {
            sweeps: 300,
            restarts: 4,
            seed: 9,
            ..Default::default()
        };
        let s = simulated_anneal(&m, &sched).unwrap();
        assert!((energy(&m, &s.best_assignment).unwrap() - s.best_energy).abs() <= 1e-12);
        assert!(s.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*s.trace.last().unwrap(), s.best_energy);
        assert_eq!(s.trace.len(), 300);
        assert!(s.t_initial >= s.max_observed_delta);
        assert_eq!(s.t_initial, max_flip_magnitude(&m));
        for (x, e) in &s.samples {
            assert!((energy(&m, x).unwrap() - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn restarts_are_independent() {
        let m = random_model(8, 25, 0.3);
        let base = AnnealSchedule {
            sweeps: 100,
            restarts: 1,
            ..Default::default()
        };
        let together = simulated_anneal(
            &m,
            &AnnealSchedule {
                restarts: 3,
                seed: 10,
                ..base.clone()
            },
        )
        .unwrap();
        for r in 0..3u64 {
            let alone = simulated_anneal(
                &m,
                &AnnealSchedule {
                    seed: 10 + r,
                    ..base.clone()
                },
            )
            .unwrap();
            assert_eq!(alone.samples[0], together.samples[r as usize]);
        }
    }

    #[test]
    fn anneal_finds_small_global_minima() {
        let mut hits = 0;
        for seed in 0..50 {
            let m = random_model(1000 + seed, 20, 0.3);
            let exact = brute_force(&m, 24).unwrap().result.best_energy;
            let sa = simulated_anneal(&m, &AnnealSchedule::default()).unwrap();
            assert!(sa.best_energy >= exact - 1e-9);
            if sa.best_energy <= exact + 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 45, "{hits}/50");
    }

    #[test]
    fn schedule_validation() {
        let m = model(vec![1.0], vec![]);
        let bad = [
            AnnealSchedule {
                sweeps: 0,
                ..Default::default()
            },
            AnnealSchedule {
                restarts: 0,
                ..Default::default()
            },
            AnnealSchedule {
                t_final: Some(0.0),
                ..Default::default()
            },
            AnnealSchedule {
                t_initial: Some(1.0),
                t_final: Some(2.0),
                ..Default::default()
            },
        ];
        for s in bad {
            assert!(simulated_anneal(&m, &s).is_err());
        }
        assert!(simulated_anneal(&model(vec![], vec![]), &AnnealSchedule::default()).is_err());
    }

    #[test]
    fn decoded_minimum_of_one_hot_model_is_valid() {
        let g = ProjectionGeometry::covering(vec![0.0, 90.0], 2, 1).unwrap();
        let sm = build_system_matrix(&g, 2, 1, WeightModel::AreaOverlap).unwrap();
        let img = GridImage::new(2, 1, vec![2.0, 1.0]).unwrap();
        let s = forward_project(&sm, &img).unwrap();
        let levels = vec![1.0, 2.0];
        let lam = crate::qubo::default_one_hot_penalty(&levels, &sm);
        let enc =
            EncodingSpec::segmentation(AttenuationSpec::new(levels, lam).unwrap(), 2, 1).unwrap();
        let m = build_qubo(&sm, &s, &enc).unwrap();
        let sol = brute_force(&m, 24).unwrap();
        assert!(sol.result.one_hot_valid);
        assert_eq!(decode(&sol.result.best_assignment, &enc).unwrap(), img);
    }
}
