//! Reconstruction error versus data-noise level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cg::{add_noise, discrepancy_principle, reconstruct, InverseProblemSpec, Scenario};
use super::map::{check_dim, weighted_norm, LinearMap};
use crate::error::{Error, Result};
use crate::harness::fit::{inversions, loglog_fit, LogLogFit, MIN_FIT_POINTS};

/// Error of a reconstruction: global relative error, plus an optional
/// restricted one (e.g. on `Omega_0`), which is then the fitted quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMeasure {
    pub global: f64,
    pub restricted: Option<f64>,
}

impl ErrorMeasure {
    pub fn fitted(&self) -> f64 {
        self.restricted.unwrap_or(self.global)
    }
}

/// One noise level; for fitted levels the entries are means over the draws
/// (geometric for `alpha`, worst case for `iterations` and `converged`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudyRow {
    pub level: f64,
    pub noise_norm: f64,
    pub alpha: f64,
    pub error: ErrorMeasure,
    pub misfit: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudyReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub replicates: usize,
    pub data_norm: f64,
    /// Noiseless run at the configured `alpha`; reference only, not fitted.
    pub floor: NoiseStudyRow,
    pub rows: Vec<NoiseStudyRow>,
    pub fit: LogLogFit,
    pub inversions: usize,
}

impl NoiseStudyReport {
    /// Nondecreasing error up to one inversion.
    pub fn monotone(&self) -> bool {
        self.inversions <= 1
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,noise_norm,alpha,error,restricted_error,misfit,iterations,converged")?;
        for r in std::iter::once(&self.floor).chain(&self.rows) {
            let restricted = r.error.restricted.map_or(String::new(), |v| format!("{v:.17e}"));
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{},{}",
                r.level, r.noise_norm, r.alpha, r.error.global, restricted, r.misfit, r.iterations, r.converged
            )?;
        }
        Ok(())
    }
}

/// Relative `L^2` error in the map's domain inner product.
pub fn relative_error(map: &dyn LinearMap, rec: &[f64], truth: &[f64]) -> f64 {
    let diff: Vec<f64> = rec.iter().zip(truth).map(|(a, b)| a - b).collect();
    weighted_norm(&diff, map.domain_weights()) / weighted_norm(truth, map.domain_weights()).max(f64::MIN_POSITIVE)
}

/// Relative `L^2` error restricted to the unknowns flagged by `mask`.
pub fn relative_error_masked(map: &dyn LinearMap, rec: &[f64], truth: &[f64], mask: &[bool]) -> f64 {
    let w: Vec<f64> = map
        .domain_weights()
        .iter()
        .zip(mask)
        .map(|(w, m)| if *m { *w } else { 0.0 })
        .collect();
    let diff: Vec<f64> = rec.iter().zip(truth).map(|(a, b)| a - b).collect();
    weighted_norm(&diff, &w) / weighted_norm(truth, &w).max(f64::MIN_POSITIVE)
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < MIN_FIT_POINTS {
        return Err(Error::FitUnderdetermined {
            points: levels.len(),
            required: MIN_FIT_POINTS,
        });
    }
    if levels.iter().any(|l| !(*l > 0.0 && l.is_finite())) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("noise levels must be positive and increasing".into()));
    }
    let span = levels[levels.len() - 1] / levels[0];
    if span < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "noise levels must span at least two decades, got a factor {span}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudyConfig {
    /// Relative noise levels `|eta| / |d|`, increasing.
    pub levels: Vec<f64>,
    /// Independent noise draws per level; errors are averaged.
    pub replicates: usize,
    pub seed: u64,
}

impl NoiseStudyConfig {
    pub fn new(levels: Vec<f64>, seed: u64) -> Self {
        NoiseStudyConfig {
            levels,
            replicates: 8,
            seed,
        }
    }
}

/// Synthesizes data from `truth`, perturbs it at each level, reconstructs with
/// a discrepancy-principle `alpha` and fits the mean error against the level
/// on log-log axes. Draw `r` of level `i` (1-based; 0 is the noiseless floor)
/// uses seed `seed + i * replicates + r`. Draws run in parallel.
pub fn noise_scaling_study(
    map: &dyn LinearMap,
    truth: &[f64],
    spec: &InverseProblemSpec,
    cfg: &NoiseStudyConfig,
    error: &(dyn Fn(&[f64]) -> Result<ErrorMeasure> + Sync),
) -> Result<NoiseStudyReport> {
    spec.validate()?;
    check_dim(truth, map.domain_dim(), "true source")?;
    check_levels(&cfg.levels)?;
    if cfg.replicates == 0 {
        return Err(Error::InvalidInput("replicates must be >= 1".into()));
    }
    let clean = map.apply(truth)?;
    let wd = map.range_weights();
    let run = |level: f64, seed: u64| -> Result<NoiseStudyRow> {
        let (data, eta) = add_noise(&clean, wd, level, seed)?;
        let res = if level == 0.0 {
            reconstruct(map, &data, spec)?
        } else {
            discrepancy_principle(map, &data, eta, spec)?
        };
        Ok(NoiseStudyRow {
            level,
            noise_norm: eta,
            alpha: res.alpha,
            error: error(&res.f)?,
            misfit: res.misfit,
            iterations: res.iterations,
            converged: res.converged,
        })
    };
    let reps = cfg.replicates;
    let mut jobs = vec![(0usize, 0.0, cfg.seed)];
    for (i, &level) in cfg.levels.iter().enumerate() {
        for r in 0..reps {
            let k = ((i + 1) * reps + r) as u64;
            jobs.push((i + 1, level, cfg.seed.wrapping_add(k)));
        }
    }
    let draws: Vec<(usize, NoiseStudyRow)> = jobs
        .into_par_iter()
        .map(|(i, level, seed)| run(level, seed).map(|row| (i, row)))
        .collect::<Result<_>>()?;
    let floor = draws[0].1.clone();
    let rows: Vec<NoiseStudyRow> = (1..=cfg.levels.len())
        .map(|i| {
            let group: Vec<&NoiseStudyRow> = draws.iter().filter(|d| d.0 == i).map(|d| &d.1).collect();
            let m = group.len() as f64;
            let mean = |f: &dyn Fn(&NoiseStudyRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / m;
            let restricted = group[0].error.restricted.map(|_| mean(&|r| r.error.restricted.unwrap_or(0.0)));
            NoiseStudyRow {
                level: group[0].level,
                noise_norm: mean(&|r| r.noise_norm),
                alpha: mean(&|r| r.alpha.ln()).exp(),
                error: ErrorMeasure {
                    global: mean(&|r| r.error.global),
                    restricted,
                },
                misfit: mean(&|r| r.misfit),
                iterations: group.iter().map(|r| r.iterations).max().unwrap_or(0),
                converged: group.iter().all(|r| r.converged),
            }
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.level).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error.fitted()).collect();
    let fit = loglog_fit(&x, &y)?;
    Ok(NoiseStudyReport {
        scenario: spec.scenario,
        seed: cfg.seed,
        replicates: reps,
        data_norm: weighted_norm(&clean, wd),
        floor,
        inversions: inversions(&y),
        rows,
        fit,
    })
}
