//! Per-sample tables and summaries of the stability experiments.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::fit::LogLogFit;
use crate::weights::CarlemanConstants;

/// Split of the Hölder argument: `Case1` when `M^2 > D~^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HolderCase {
    Case1,
    Case2,
}

impl HolderCase {
    pub fn classify(m: f64, data: f64) -> Self {
        if m * m > data * data {
            HolderCase::Case1
        } else {
            HolderCase::Case2
        }
    }
}

/// Label of the identically zero sample.
pub const ZERO_LABEL: &str = "zero";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub nx: usize,
    pub label: String,
    pub scale: f64,
    /// Norm of the source (or initial data, or interior norm for the Cauchy problem).
    pub source_norm: f64,
    pub data_norm: f64,
    /// `None` for consistency rows, which are excluded from summaries.
    pub ratio: Option<f64>,
    pub consistency: bool,
    pub case: Option<HolderCase>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub count: usize,
    pub max: f64,
    pub median: f64,
}

impl RatioSummary {
    pub fn of(ratios: &[f64]) -> Self {
        let mut v: Vec<f64> = ratios.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => v[n / 2],
            _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
        };
        RatioSummary {
            count: n,
            max: v.last().copied().unwrap_or(f64::NAN),
            median,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub nx: usize,
    pub summary: RatioSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub experiment: String,
    /// Set when a sufficient condition was waived; no assertion applies.
    pub exploratory: bool,
    pub seed: u64,
    pub parameters: BTreeMap<String, f64>,
    pub constants: CarlemanConstants,
    pub samples: Vec<SampleRow>,
    pub grids: Vec<GridSummary>,
    /// `max / min - 1` of the per-grid maximal ratios.
    pub refinement_variation: Option<f64>,
    /// Every consistency row has zero source norm, and the zero sample also zero data.
    pub consistency_ok: bool,
    pub fit: Option<LogLogFit>,
    /// `mu / (C_emp + mu)` with `C_emp` the largest measured ratio (derived).
    pub theta_lower_bound: Option<f64>,
}

impl StabilityReport {
    pub fn new(experiment: &str, exploratory: bool, seed: u64) -> Self {
        StabilityReport {
            experiment: experiment.to_string(),
            exploratory,
            seed,
            parameters: BTreeMap::new(),
            constants: CarlemanConstants::default(),
            samples: Vec::new(),
            grids: Vec::new(),
            refinement_variation: None,
            consistency_ok: true,
            fit: None,
            theta_lower_bound: None,
        }
    }

    pub fn ratios(&self, nx: usize) -> Vec<f64> {
        self.samples.iter().filter(|r| r.nx == nx).filter_map(|r| r.ratio).collect()
    }

    /// Fills the per-grid summaries, the refinement variation and the consistency flag.
    pub fn summarize(&mut self) {
        let mut grids: Vec<usize> = self.samples.iter().map(|r| r.nx).collect();
        grids.dedup();
        grids.sort_unstable();
        grids.dedup();
        self.grids = grids
            .iter()
            .map(|&nx| GridSummary {
                nx,
                summary: RatioSummary::of(&self.ratios(nx)),
            })
            .collect();
        let maxima: Vec<f64> = self.grids.iter().map(|g| g.summary.max).filter(|m| m.is_finite()).collect();
        self.refinement_variation = (maxima.len() >= 2).then(|| {
            let hi = maxima.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
            hi / lo - 1.0
        });
        self.consistency_ok = self
            .samples
            .iter()
            .filter(|r| r.consistency)
            .all(|r| r.source_norm == 0.0 && (r.label != ZERO_LABEL || r.data_norm == 0.0));
    }

    /// Summary of the finest grid.
    pub fn summary(&self) -> Option<RatioSummary> {
        self.grids.last().map(|g| g.summary)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nx,label,scale,source_norm,data_norm,ratio,consistency,case")?;
        for r in &self.samples {
            let ratio = r.ratio.map_or(String::new(), |v| format!("{v:.17e}"));
            let case = match r.case {
                Some(HolderCase::Case1) => "case1",
                Some(HolderCase::Case2) => "case2",
                None => "",
            };
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e},{},{},{}",
                r.nx, r.label, r.scale, r.source_norm, r.data_norm, ratio, r.consistency, case
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
