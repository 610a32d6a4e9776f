//! Experiment configuration: TOML sections, dotted-key overrides, and
//! conversion into the library's setups.

use std::path::PathBuf;

use carleman_lab::expr::Expr;
use carleman_lab::geometry::{AxisBox, DomainSpec, FaceLabel, ParabolicOptions, Point};
use carleman_lab::harness::{CoefficientSpec, EnsembleSpec, HyperbolicSetup, ParabolicSetup, SourceFamily};
use carleman_lab::solvers::{cfl_limit, SourceSpec, TimeFactor};
use carleman_lab::weights::geometric_sweep;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Wave equation observed on the illuminated boundary.
    #[default]
    Hyperbolic,
    /// Heat equation observed on one face plus the state at `t0`.
    Parabolic,
    /// Lateral Cauchy problem for the homogeneous heat equation.
    Cauchy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainBlock {
    /// `interval` or `rectangle`.
    pub kind: String,
    /// `[a, b]` or `[a1, b1, a2, b2]`.
    pub bounds: Vec<f64>,
    /// Nodes per axis.
    pub nx: usize,
}

impl Default for DomainBlock {
    fn default() -> Self {
        DomainBlock {
            kind: "interval".into(),
            bounds: vec![0.0, 1.0],
            nx: 101,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBlock {
    /// Source point of the hyperbolic weight, outside the closed domain.
    pub x0: Vec<f64>,
    /// Observation face of the parabolic scenarios.
    pub gamma: String,
    /// `[lo, hi]` or `[lo1, hi1, lo2, hi2]`.
    pub omega0: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub omega: Option<[f64; 2]>,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        GeometryBlock {
            x0: vec![-1.0, 0.0],
            gamma: "right".into(),
            omega0: Some(vec![0.5, 0.9]),
            eta: None,
            omega: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientBlock {
    pub b1: String,
    pub b2: String,
    pub c: String,
}

impl Default for CoefficientBlock {
    fn default() -> Self {
        CoefficientBlock {
            b1: "0".into(),
            b2: "0".into(),
            c: "0".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceBlock {
    /// `R(x, t)`.
    pub r: String,
    pub r0: f64,
    /// Profile `f(x)` (forward runs, absorption, reconstruction truth).
    pub f: String,
    /// Ensemble family: `fourier` or `profile` (every sample equals `f`).
    pub family: String,
    pub modes: usize,
}

impl Default for SourceBlock {
    fn default() -> Self {
        SourceBlock {
            r: "1 + t".into(),
            r0: 1.0,
            f: "sin(pi * x)".into(),
            family: "fourier".into(),
            modes: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightBlock {
    pub lambda: f64,
    /// Lambdas of the manufactured Carleman suite.
    pub lambdas: Vec<f64>,
    /// Overrides the automatic `beta`.
    pub beta: Option<f64>,
    pub s_min: f64,
    pub s_max: f64,
    pub s_steps: usize,
    /// Ratio-curve acceptance: `max ratio <= factor * ratio(s_min)`.
    pub factor: f64,
    /// Largest relative increase between consecutive `s` beyond `s_threshold`.
    pub max_increase: f64,
    pub s_threshold: f64,
}

impl Default for WeightBlock {
    fn default() -> Self {
        WeightBlock {
            lambda: 1.0,
            lambdas: vec![0.5, 1.0, 2.0],
            beta: None,
            s_min: 1.0,
            s_max: 64.0,
            s_steps: 16,
            factor: 10.0,
            max_increase: 0.05,
            s_threshold: 16.0,
        }
    }
}

impl WeightBlock {
    pub fn sweep(&self) -> Vec<f64> {
        geometric_sweep(self.s_min, self.s_max, self.s_steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    /// Final time; defaults per scenario (1.15 times the critical time for the wave runs).
    #[serde(alias = "T")]
    pub t_final: Option<f64>,
    /// Time step; the wave default is the CFL step, the heat default `0.005`.
    pub dt: Option<f64>,
    /// Refinement ladder (nodes per axis); defaults to `[nx]`.
    pub grids: Option<Vec<usize>>,
    /// Time levels of the quadrature in `carleman` and `absorb`.
    pub nt: usize,
    pub samples: usize,
    pub seed: u64,
    pub noise_levels: Vec<f64>,
    pub replicates: usize,
    /// Single noise level of `reconstruct`; zero runs at `alpha`.
    pub noise: f64,
    pub alpha: f64,
    pub max_iterations: usize,
    pub t0: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// A priori bound `M`.
    pub m_cap: f64,
    pub scales: Vec<f64>,
    /// Waives the observation-time conditions; nothing is asserted.
    pub exploratory: bool,
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            t_final: None,
            dt: None,
            grids: None,
            nt: 401,
            samples: 20,
            seed: 0,
            noise_levels: vec![1e-4, 1e-3, 1e-2, 1e-1],
            replicates: 8,
            noise: 0.0,
            alpha: 1e-8,
            max_iterations: 2000,
            t0: 0.5,
            delta: 0.25,
            epsilon: 0.1,
            m_cap: 1.0,
            scales: vec![1.0, 0.5, 0.2, 0.1, 0.05],
            exploratory: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub out: Option<PathBuf>,
    pub domain: DomainBlock,
    pub geometry: GeometryBlock,
    pub coefficients: CoefficientBlock,
    pub source: SourceBlock,
    pub weight: WeightBlock,
    pub run: RunBlock,
}

/// Sets `a.b.c = value` in a TOML table; `value` is read as a TOML value
/// and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form KEY=VALUE")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override key `{key}`: `{part}` is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses `text` after applying the overrides in order.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("config is not valid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("config rejected: {e}")))
    }

    /// Canonical text of the effective configuration; the output directory
    /// is left out so that relocated reruns hash identically.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        toml::to_string(&c).expect("config serializes")
    }

    pub fn domain_at(&self, nx: usize) -> Result<DomainSpec, CliError> {
        let b = &self.domain.bounds;
        let dom = match (self.domain.kind.as_str(), b.len()) {
            ("interval", 2) => DomainSpec::interval(b[0], b[1], nx)?,
            ("rectangle", 4) => DomainSpec::rectangle(b[0], b[1], b[2], b[3], nx)?,
            (kind @ ("interval" | "rectangle"), n) => {
                return Err(CliError::Config(format!("domain kind {kind} takes {} bounds, got {n}", if kind == "interval" { 2 } else { 4 })))
            }
            (kind, _) => return Err(CliError::Config(format!("unknown domain kind `{kind}`"))),
        };
        Ok(dom)
    }

    pub fn domain(&self) -> Result<DomainSpec, CliError> {
        self.domain_at(self.domain.nx)
    }

    pub fn grids(&self) -> Vec<usize> {
        self.run.grids.clone().unwrap_or_else(|| vec![self.domain.nx])
    }

    pub fn x0(&self) -> Result<Point, CliError> {
        match self.geometry.x0.as_slice() {
            [x] => Ok([*x, 0.0]),
            [x, y] => Ok([*x, *y]),
            other => Err(CliError::Config(format!("x0 needs one or two coordinates, got {}", other.len()))),
        }
    }

    pub fn gamma_face(&self) -> Result<FaceLabel, CliError> {
        FaceLabel::parse(&self.geometry.gamma)
            .ok_or_else(|| CliError::Config(format!("unknown observation face `{}`", self.geometry.gamma)))
    }

    pub fn time_factor(&self) -> Result<TimeFactor, CliError> {
        Ok(Expr::parse(&self.source.r)?.time_factor(&self.source.r))
    }

    pub fn profile(&self, domain: &DomainSpec) -> Result<Vec<f64>, CliError> {
        let f = Expr::parse(&self.source.f)?;
        Ok(domain.points().iter().map(|p| f.eval(p, 0.0)).collect())
    }

    pub fn source_on(&self, domain: &DomainSpec) -> Result<SourceSpec, CliError> {
        Ok(SourceSpec::new(self.time_factor()?, self.profile(domain)?, self.source.r0))
    }

    pub fn coefficient_spec(&self) -> Result<CoefficientSpec, CliError> {
        let c = &self.coefficients;
        Ok(CoefficientSpec::parse(&c.b1, &c.b2, &c.c)?)
    }

    pub fn ensemble(&self) -> Result<EnsembleSpec, CliError> {
        let family = match self.source.family.as_str() {
            "fourier" => SourceFamily::FourierSine { modes: self.source.modes },
            "profile" => SourceFamily::Profile {
                expression: self.source.f.clone(),
            },
            other => return Err(CliError::Config(format!("unknown source family `{other}`"))),
        };
        let ens = EnsembleSpec {
            n_samples: self.run.samples,
            family,
            noise_levels: self.run.noise_levels.clone(),
            seed: self.run.seed,
        };
        ens.validate()?;
        Ok(ens)
    }

    pub fn omega0(&self) -> Result<Option<AxisBox>, CliError> {
        Ok(match self.geometry.omega0.as_deref() {
            None => None,
            Some([lo, hi]) => Some(AxisBox::interval(*lo, *hi)),
            Some([lo1, hi1, lo2, hi2]) => Some(AxisBox::rectangle([*lo1, *lo2], [*hi1, *hi2])),
            Some(other) => {
                return Err(CliError::Config(format!(
                    "omega0 needs two or four numbers, got {}",
                    other.len()
                )))
            }
        })
    }

    pub fn parabolic_options(&self) -> Result<ParabolicOptions, CliError> {
        Ok(ParabolicOptions {
            eta: self.geometry.eta,
            omega: self.geometry.omega.map(|[a, b]| (a, b)),
            omega0: self.omega0()?,
            ..Default::default()
        })
    }

    /// Time step of the heat runs.
    pub fn heat_dt(&self) -> f64 {
        self.run.dt.unwrap_or(0.005)
    }

    pub fn hyperbolic_setup(&self, t_final: f64) -> Result<HyperbolicSetup, CliError> {
        Ok(HyperbolicSetup {
            domain: self.domain()?,
            x0: self.x0()?,
            coefficients: self.coefficient_spec()?,
            r: self.time_factor()?,
            r0: self.source.r0,
            t_final,
            grids: self.grids(),
            lambda: self.weight.lambda,
            exploratory: self.run.exploratory,
        })
    }

    pub fn parabolic_setup(&self) -> Result<ParabolicSetup, CliError> {
        let default_t = if self.scenario == ScenarioKind::Cauchy { 0.5 } else { 1.0 };
        Ok(ParabolicSetup {
            domain: self.domain()?,
            gamma: self.gamma_face()?,
            options: self.parabolic_options()?,
            coefficients: self.coefficient_spec()?,
            r: self.time_factor()?,
            r0: self.source.r0,
            t_final: self.run.t_final.unwrap_or(default_t),
            dt: self.heat_dt(),
            t0: self.run.t0,
            delta: self.run.delta,
            epsilon: self.run.epsilon,
            lambda: self.weight.lambda,
            beta: self.weight.beta,
            m_cap: self.run.m_cap,
            scales: self.run.scales.clone(),
        })
    }

    /// Checks that need no solve: expressions, grids, sweep, and the CFL
    /// compatibility of a prescribed wave step on every grid.
    pub fn validate(&self) -> Result<(), CliError> {
        for e in [&self.source.r, &self.source.f, &self.coefficients.b1, &self.coefficients.b2, &self.coefficients.c] {
            Expr::parse(e)?;
        }
        if self.domain.nx < 3 || self.grids().iter().any(|&n| n < 3) {
            return Err(CliError::Config("every grid needs at least 3 nodes per axis".into()));
        }
        self.domain()?;
        self.x0()?;
        let w = &self.weight;
        if !(w.s_min > 0.0 && w.s_max > w.s_min && w.s_steps >= 2) {
            return Err(CliError::Config(format!(
                "s sweep needs 0 < s_min < s_max and at least 2 steps, got [{}, {}] in {} steps",
                w.s_min, w.s_max, w.s_steps
            )));
        }
        if !(w.lambda > 0.0) || w.lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(CliError::Config("lambda must be positive".into()));
        }
        if let Some(t) = self.run.t_final {
            if !(t > 0.0) {
                return Err(CliError::Config(format!("final time T = {t} must be positive")));
            }
        }
        if let (ScenarioKind::Hyperbolic, Some(dt)) = (self.scenario, self.run.dt) {
            for nx in self.grids() {
                let limit = cfl_limit(&self.domain_at(nx)?);
                if dt > limit * (1.0 + 1e-12) {
                    return Err(CliError::Config(format!(
                        "dt = {dt} exceeds the CFL bound {limit} of the leapfrog scheme on the {nx}-node grid"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_keys_and_fall_back_to_strings() {
        let cfg = ExperimentConfig::from_toml(
            "[run]\nseed = 1\n",
            &[
                "run.seed=7".into(),
                "run.grids=[51, 101]".into(),
                "source.r=2 + t".into(),
                "scenario=parabolic".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.grids(), vec![51, 101]);
        assert_eq!(cfg.source.r, "2 + t");
        assert_eq!(cfg.scenario, ScenarioKind::Parabolic);
        assert!(ExperimentConfig::from_toml("", &["run.seed".into()]).is_err());
        assert!(ExperimentConfig::from_toml("", &["run..seed=1".into()]).is_err());
        assert!(ExperimentConfig::from_toml("", &["run.seed.x=1".into()]).is_err());
    }

    #[test]
    fn time_alias_and_canonical_form() {
        let cfg = ExperimentConfig::from_toml("out = \"a\"\n[run]\nT = 2.5\n", &[]).unwrap();
        assert_eq!(cfg.run.t_final, Some(2.5));
        let mut moved = cfg.clone();
        moved.out = Some("b".into());
        assert_eq!(cfg.canonical(), moved.canonical());
        let back = ExperimentConfig::from_toml(&cfg.canonical(), &[]).unwrap();
        assert_eq!(back.run, cfg.run);
    }

    #[test]
    fn validation_rejects_bad_blocks() {
        let bad = |o: &str| ExperimentConfig::from_toml("", &[o.into()]).unwrap().validate().is_err();
        assert!(bad("domain.kind=\"disc\""));
        assert!(bad("domain.bounds=[0.0, 1.0, 2.0]"));
        assert!(bad("source.f=\"sin(\""));
        assert!(bad("weight.s_max=0.5"));
        assert!(bad("domain.nx=2"));
        assert!(!bad("domain.nx=11"));
    }
}
