//! One function per subcommand; each returns the files to write.

use std::collections::BTreeMap;

use carleman_lab::analysis::{boundary_flux_norm, energy_history, sobolev_norm, NormKind};
use carleman_lab::carleman::{
    absorption_diagnostics_hyperbolic, absorption_diagnostics_parabolic, run_manufactured_suite, RatioCriterion,
    SuiteConfig,
};
use carleman_lab::field::SpaceTimeField;
use carleman_lab::geometry::{
    compute_gamma, critical_time_hyperbolic, critical_time_observability, select_beta_hyperbolic, DomainSpec,
    GammaPiece, ParabolicGeometry,
};
use carleman_lab::harness::{
    cauchy_stability_experiment, holder_experiment, lipschitz_experiment, observability_experiment, StabilityReport,
};
use carleman_lab::reconstruction::{
    add_noise, discrepancy_principle, noise_scaling_study, reconstruct, relative_error, relative_error_masked,
    AssembledMap, CauchyMap, ErrorMeasure, InverseProblemSpec, LinearMap, NoiseStudyConfig, ParabolicLocalMap,
    Scenario, WaveBoundaryMap,
};
use carleman_lab::solvers::{solve_heat, solve_wave_ibvp};
use carleman_lab::weights::{default_parabolic_beta, WeightParams, CONSTANT_NAMES};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ScenarioKind};
use crate::error::CliError;

/// Named output files, in write order.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn push(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::io(name, e))?;
        self.push(name, buf);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.push(name, text.into_bytes());
        Ok(())
    }
}

fn hyperbolic_final_time(cfg: &ExperimentConfig, observability: bool) -> Result<f64, CliError> {
    if let Some(t) = cfg.run.t_final {
        return Ok(t);
    }
    let geom = compute_gamma(&cfg.domain()?, cfg.x0()?)?;
    let critical = if observability {
        critical_time_observability(&geom)
    } else {
        critical_time_hyperbolic(&geom)
    };
    Ok(1.15 * critical)
}

fn face_gamma(cfg: &ExperimentConfig, domain: &DomainSpec) -> Result<Vec<GammaPiece>, CliError> {
    let face = cfg.gamma_face()?;
    Ok(vec![GammaPiece {
        face,
        range: domain.face_extent(face),
    }])
}

/// Solves the forward problem of the scenario and dumps the field.
pub fn forward(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let domain = cfg.domain()?;
    let coeffs = cfg.coefficient_spec()?.on(&domain)?;
    let source = cfg.source_on(&domain)?;
    let mut out = Artifacts::default();
    let (field, summary) = match cfg.scenario {
        ScenarioKind::Hyperbolic => {
            source.check_floor(&domain, 0.0)?;
            let geom = compute_gamma(&domain, cfg.x0()?)?;
            let t = hyperbolic_final_time(cfg, false)?;
            let u = solve_wave_ibvp(&domain, &coeffs, &source, t, cfg.run.dt)?;
            let flux = boundary_flux_norm(&u, &geom.gamma, None, true)?;
            let energy = energy_history(&u)?;
            out.csv("energy.csv", |w| {
                use std::io::Write;
                writeln!(w, "t,energy")?;
                for (k, e) in energy.iter().enumerate() {
                    writeln!(w, "{:.17e},{e:.17e}", u.time(k))?;
                }
                Ok(())
            })?;
            (u, json!({ "equation": "wave", "T": t, "boundary_data_norm": flux }))
        }
        ScenarioKind::Parabolic | ScenarioKind::Cauchy => {
            source.check_floor(&domain, cfg.run.t0)?;
            let t = cfg.run.t_final.unwrap_or(1.0);
            let zero = vec![0.0; domain.n_nodes()];
            let sol = solve_heat(&domain, &coeffs, Some(&source), &zero, t, cfg.heat_dt())?;
            let flux = boundary_flux_norm(&sol.z, &face_gamma(cfg, &domain)?, None, false)?;
            (sol.u, json!({ "equation": "heat", "T": t, "boundary_data_norm": flux }))
        }
    };
    let mut bin = Vec::new();
    field.write_binary(&mut bin).map_err(|e| CliError::io("field.bin", e))?;
    out.push("field.bin", bin);
    let mut summary = summary;
    summary["experiment"] = json!("forward");
    summary["nt"] = json!(field.nt());
    summary["dt"] = json!(field.dt);
    summary["n_nodes"] = json!(domain.n_nodes());
    summary["max_abs"] = json!(field.max_abs());
    out.json("forward.json", &summary)?;
    Ok(out)
}

/// Ratio curves of both weighted estimates on the manufactured suite (unit interval).
pub fn carleman(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let bounds = &cfg.domain.bounds;
    if cfg.domain.kind != "interval" || bounds.as_slice() != [0.0, 1.0] {
        return Err(CliError::Config(
            "the manufactured suite is defined on the interval (0, 1)".into(),
        ));
    }
    let suite = SuiteConfig {
        nx: cfg.domain.nx,
        nt: cfg.run.nt,
        lambdas: cfg.weight.lambdas.clone(),
        s_sweep: cfg.weight.sweep(),
        x0: cfg.x0()?[0],
        t0_parabolic: cfg.run.t0,
        delta_parabolic: cfg.run.delta,
        criterion: RatioCriterion {
            factor: cfg.weight.factor,
            max_increase: cfg.weight.max_increase,
            s_threshold: cfg.weight.s_threshold,
        },
        ..SuiteConfig::default()
    };
    let entries = run_manufactured_suite(&suite)?;
    let mut out = Artifacts::default();
    let mut rows = Vec::new();
    for e in &entries {
        let name = format!("carleman_{}_lambda{}.csv", e.field.id(), e.lambda);
        out.csv(&name, |w| e.report.write_csv(w))?;
        rows.push(json!({
            "field": e.field.id(),
            "lemma": e.report.lemma,
            "lambda": e.lambda,
            "passed": e.outcome.passed,
            "first_ratio": e.outcome.first_ratio,
            "max_ratio": e.outcome.max_ratio,
            "worst_increase": e.outcome.worst_increase,
            "residual": e.report.residual,
            "residual_tolerance": e.report.residual_tolerance,
        }));
    }
    out.json(
        "carleman.json",
        &json!({
            "experiment": "carleman",
            "criterion": suite.criterion,
            "all_passed": entries.iter().all(|e| e.outcome.passed),
            "entries": rows,
        }),
    )?;
    Ok(out)
}

/// `J / denominator` against `s` for the configured source.
pub fn absorb(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let domain = cfg.domain()?;
    let source = cfg.source_on(&domain)?;
    let lambda = cfg.weight.lambda;
    let diag = match cfg.scenario {
        ScenarioKind::Hyperbolic => {
            let x0 = cfg.x0()?;
            let geom = compute_gamma(&domain, x0)?;
            let t = hyperbolic_final_time(cfg, false)?;
            let beta = match cfg.weight.beta {
                Some(b) => b,
                None => select_beta_hyperbolic(&geom, t)?,
            };
            let params = WeightParams::hyperbolic(lambda, beta, 0.0, x0)?.with_sweep(cfg.weight.sweep())?;
            absorption_diagnostics_hyperbolic(&domain, &source, &geom, &params, t, cfg.run.nt)?
        }
        ScenarioKind::Parabolic | ScenarioKind::Cauchy => {
            let pgeom = ParabolicGeometry::new(&domain, cfg.gamma_face()?, &cfg.parabolic_options()?)?;
            let delta = cfg.run.delta;
            let beta = cfg.weight.beta.unwrap_or_else(|| default_parabolic_beta(&pgeom, delta));
            let params =
                WeightParams::parabolic(lambda, beta, cfg.run.t0, pgeom.d.clone())?.with_sweep(cfg.weight.sweep())?;
            let window = (cfg.run.t0 - delta, cfg.run.t0 + delta);
            absorption_diagnostics_parabolic(&source, &pgeom, &params, window, cfg.run.nt)?
        }
    };
    let mut out = Artifacts::default();
    out.csv("absorption.csv", |w| diag.write_csv(w))?;
    let ratios = diag.ratios();
    out.json(
        "absorption.json",
        &json!({
            "experiment": "absorption",
            "lemma": diag.lemma,
            "decay_label": diag.decay_label,
            "decay_rate": diag.decay_rate,
            "strictly_decreasing": ratios.windows(2).all(|w| w[1] < w[0]),
            "final_ratio": ratios.last(),
            "rows": diag.rows,
        }),
    )?;
    Ok(out)
}

fn stability_artifacts(name: &str, rep: &StabilityReport) -> Result<Artifacts, CliError> {
    let mut out = Artifacts::default();
    out.csv(&format!("{name}.csv"), |w| rep.write_csv(w))?;
    out.json(&format!("{name}.json"), rep)?;
    Ok(out)
}

/// Lipschitz (wave) or local Hölder (heat) stability ratios.
pub fn stability(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let ens = cfg.ensemble()?;
    match cfg.scenario {
        ScenarioKind::Hyperbolic => {
            let setup = cfg.hyperbolic_setup(hyperbolic_final_time(cfg, false)?)?;
            stability_artifacts("stability", &lipschitz_experiment(&ens, &setup)?)
        }
        ScenarioKind::Parabolic => stability_artifacts("stability", &holder_experiment(&ens, &cfg.parabolic_setup()?)?),
        ScenarioKind::Cauchy => Err(CliError::Config(
            "stability runs the hyperbolic or parabolic scenario; use `cauchy` for the Cauchy problem".into(),
        )),
    }
}

/// Boundary observability of free waves.
pub fn observe(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let ens = cfg.ensemble()?;
    let setup = cfg.hyperbolic_setup(hyperbolic_final_time(cfg, true)?)?;
    stability_artifacts("observability", &observability_experiment(&ens, &setup)?)
}

/// Conditional stability of the lateral Cauchy problem.
pub fn cauchy(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let mut cfg = cfg.clone();
    cfg.scenario = ScenarioKind::Cauchy;
    let ens = cfg.ensemble()?;
    stability_artifacts("cauchy", &cauchy_stability_experiment(&ens, &cfg.parabolic_setup()?)?)
}

/// The forward map of the scenario, its unknown, the true unknown and an
/// error measure for reconstructions.
struct Problem {
    map: Box<dyn LinearMap>,
    scenario: Scenario,
    truth: Vec<f64>,
    /// Coordinates of the unknowns.
    nodes: Vec<Vec<f64>>,
    mask: Option<Vec<bool>>,
    cauchy: Option<CauchyNorm>,
}

struct CauchyNorm {
    map: CauchyMap,
    omega0: carleman_lab::geometry::AxisBox,
    window: (f64, f64),
    base: f64,
}

impl CauchyNorm {
    fn of(&self, u: &SpaceTimeField) -> Result<f64, carleman_lab::Error> {
        Ok(sobolev_norm(u, NormKind::H1tL2x, Some(self.omega0), Some(self.window))?
            + sobolev_norm(u, NormKind::L2tH2x, Some(self.omega0), Some(self.window))?)
    }
}

impl Problem {
    fn build(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let domain = cfg.domain()?;
        let coeffs = cfg.coefficient_spec()?.on(&domain)?;
        let profile = cfg.profile(&domain)?;
        let r = cfg.time_factor()?;
        let omega0 = cfg.omega0()?;
        let restrict_mask = |interior: &[usize]| {
            omega0.map(|bx| {
                interior
                    .iter()
                    .map(|&i| bx.contains(&domain.point(i), domain.dim(), 1e-12))
                    .collect::<Vec<bool>>()
            })
        };
        let coords = |interior: &[usize]| -> Vec<Vec<f64>> {
            interior.iter().map(|&i| domain.point(i)[..domain.dim()].to_vec()).collect()
        };
        let assemble = |map: Box<dyn LinearMap>| -> Result<Box<dyn LinearMap>, CliError> {
            Ok(if domain.dim() == 1 {
                Box::new(AssembledMap::from_map(map.as_ref())?)
            } else {
                map
            })
        };
        match cfg.scenario {
            ScenarioKind::Hyperbolic => {
                cfg.source_on(&domain)?.check_floor(&domain, 0.0)?;
                let geom = compute_gamma(&domain, cfg.x0()?)?;
                let t = hyperbolic_final_time(cfg, false)?;
                let map = WaveBoundaryMap::new(&domain, &coeffs, &r, &geom.gamma, t, cfg.run.dt)?;
                let truth = map.restrict(&profile);
                let nodes = coords(&map.interior);
                Ok(Problem {
                    map: assemble(Box::new(map))?,
                    scenario: Scenario::HyperbolicBoundary,
                    truth,
                    nodes,
                    mask: None,
                    cauchy: None,
                })
            }
            ScenarioKind::Parabolic => {
                cfg.source_on(&domain)?.check_floor(&domain, cfg.run.t0)?;
                let t = cfg.run.t_final.unwrap_or(1.0);
                let gamma = face_gamma(cfg, &domain)?;
                let map = ParabolicLocalMap::new(&domain, &coeffs, &r, &gamma, t, cfg.heat_dt(), cfg.run.t0)?;
                let truth = map.restrict(&profile);
                let nodes = coords(&map.interior);
                let mask = restrict_mask(&map.interior);
                Ok(Problem {
                    map: assemble(Box::new(map))?,
                    scenario: Scenario::ParabolicLocal,
                    truth,
                    nodes,
                    mask,
                    cauchy: None,
                })
            }
            ScenarioKind::Cauchy => {
                let t = cfg.run.t_final.unwrap_or(0.5);
                let eps = cfg.run.epsilon;
                if !(eps > 0.0 && 2.0 * eps < t) {
                    return Err(CliError::Config(format!(
                        "epsilon = {eps} must satisfy 0 < epsilon < T/2 = {}",
                        t / 2.0
                    )));
                }
                let gamma = face_gamma(cfg, &domain)?;
                let map = CauchyMap::new(&domain, &coeffs, &gamma, t, cfg.heat_dt())?;
                let truth = map.restrict(&profile);
                let nodes = coords(&map.interior);
                let cauchy = match omega0 {
                    Some(bx) => {
                        let mut norm = CauchyNorm {
                            map: map.clone(),
                            omega0: bx,
                            window: (eps, t - eps),
                            base: 1.0,
                        };
                        norm.base = norm.of(&map.solution(&truth)?)?;
                        Some(norm)
                    }
                    None => None,
                };
                Ok(Problem {
                    map: assemble(Box::new(map))?,
                    scenario: Scenario::Cauchy,
                    truth,
                    nodes,
                    mask: None,
                    cauchy,
                })
            }
        }
    }

    fn error(&self, f: &[f64]) -> Result<ErrorMeasure, carleman_lab::Error> {
        let map = self.map.as_ref();
        let restricted = if let Some(norm) = &self.cauchy {
            let diff: Vec<f64> = f.iter().zip(&self.truth).map(|(a, b)| a - b).collect();
            Some(norm.of(&norm.map.solution(&diff)?)? / norm.base.max(f64::MIN_POSITIVE))
        } else {
            self.mask.as_ref().map(|m| relative_error_masked(map, f, &self.truth, m))
        };
        Ok(ErrorMeasure {
            global: relative_error(map, f, &self.truth),
            restricted,
        })
    }

    fn spec(&self, cfg: &ExperimentConfig) -> InverseProblemSpec {
        let mut spec = InverseProblemSpec::new(self.scenario, cfg.run.alpha);
        spec.max_iterations = cfg.run.max_iterations;
        spec
    }
}

/// Tikhonov reconstruction of the configured profile from synthetic data.
pub fn reconstruct_cmd(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let problem = Problem::build(cfg)?;
    let map = problem.map.as_ref();
    let spec = problem.spec(cfg);
    let clean = map.apply(&problem.truth)?;
    let res = if cfg.run.noise > 0.0 {
        let (data, eta) = add_noise(&clean, map.range_weights(), cfg.run.noise, cfg.run.seed)?;
        discrepancy_principle(map, &data, eta, &spec)?
    } else {
        reconstruct(map, &clean, &spec)?
    };
    let error = problem.error(&res.f)?;
    let mut out = Artifacts::default();
    out.csv("reconstruction.csv", |w| {
        use std::io::Write;
        writeln!(w, "x,truth,reconstruction")?;
        for ((x, t), f) in problem.nodes.iter().zip(&problem.truth).zip(&res.f) {
            let coords: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{},{t:.17e},{f:.17e}", coords.join(" "))?;
        }
        Ok(())
    })?;
    out.csv("convergence.csv", |w| res.write_csv(w))?;
    out.json(
        "reconstruction.json",
        &json!({
            "experiment": "reconstruction",
            "scenario": problem.scenario,
            "noise_level": cfg.run.noise,
            "alpha": res.alpha,
            "error": error,
            "iterations": res.iterations,
            "converged": res.converged,
            "misfit": res.misfit,
            "energy_increase": res.energy_increase(),
        }),
    )?;
    Ok(out)
}

/// Error against noise level with discrepancy-principle regularization.
pub fn noise_study(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let problem = Problem::build(cfg)?;
    let spec = problem.spec(cfg);
    let study_cfg = NoiseStudyConfig {
        levels: cfg.run.noise_levels.clone(),
        replicates: cfg.run.replicates,
        seed: cfg.run.seed,
    };
    let rep = noise_scaling_study(problem.map.as_ref(), &problem.truth, &spec, &study_cfg, &|f| problem.error(f))?;
    let mut out = Artifacts::default();
    out.csv("noise_study.csv", |w| rep.write_csv(w))?;
    let mut value = serde_json::to_value(&rep)?;
    value["experiment"] = json!("noise-study");
    out.json("noise_study.json", &value)?;
    Ok(out)
}

/// Header of the merged report.
pub fn report_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "file",
        "experiment",
        "exploratory",
        "seed",
        "max_ratio",
        "median_ratio",
        "refinement_variation",
        "fit_slope",
        "fit_r_squared",
        "theta_lower_bound",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(CONSTANT_NAMES.iter().map(|s| s.to_string()));
    h
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.17e}"),
            _ => n.to_string(),
        },
        Some(other) => other.to_string(),
    }
}

/// Merges JSON summaries into one CSV table with one column per named constant.
pub fn report(inputs: &[(String, String)]) -> Result<Artifacts, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config("report needs at least one JSON summary".into()));
    }
    let mut lines = vec![report_header().join(",")];
    let mut merged = BTreeMap::new();
    for (name, text) in inputs {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("{name} is not a JSON summary: {e}")))?;
        let experiment = v.get("experiment").or_else(|| v.get("scenario"));
        let summary = v.get("grids").and_then(|g| g.as_array()).and_then(|g| g.last()).map(|g| &g["summary"]);
        let fit = v.get("fit").filter(|f| !f.is_null());
        let mut row = vec![
            name.clone(),
            cell(experiment),
            cell(v.get("exploratory")),
            cell(v.get("seed")),
            cell(summary.and_then(|s| s.get("max"))),
            cell(summary.and_then(|s| s.get("median"))),
            cell(v.get("refinement_variation")),
            cell(fit.and_then(|f| f.get("slope"))),
            cell(fit.and_then(|f| f.get("r_squared"))),
            cell(v.get("theta_lower_bound")),
        ];
        for c in CONSTANT_NAMES {
            row.push(cell(v.get("constants").and_then(|k| k.get(c))));
        }
        lines.push(row.join(","));
        merged.insert(name.clone(), v);
    }
    let mut out = Artifacts::default();
    let mut table = lines.join("\n");
    table.push('\n');
    out.push("report.csv", table.into_bytes());
    out.json("report.json", &merged)?;
    Ok(out)
}
