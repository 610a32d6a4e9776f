//! Lipschitz stability of the wave source problem and boundary observability.

use rayon::prelude::*;

use super::ensemble::{CoefficientSpec, EnsembleSpec};
use super::report::{SampleRow, StabilityReport, ZERO_LABEL};
use crate::analysis::{boundary_flux_norm, sobolev_norm, NormKind};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::{
    compute_gamma, critical_time_hyperbolic, critical_time_observability, select_beta_hyperbolic,
    select_beta_observability, DomainSpec, Point,
};
use crate::reconstruction::{weighted_norm, LinearMap, WaveBoundaryMap};
use crate::solvers::{solve_wave_free, SourceSpec, TimeFactor};
use crate::weights::{hyperbolic_constants, observability_constants};

/// Physical setup shared by the hyperbolic experiments; `grids` lists the
/// node counts per axis of the refinement ladder.
#[derive(Clone, Debug)]
pub struct HyperbolicSetup {
    pub domain: DomainSpec,
    pub x0: Point,
    pub coefficients: CoefficientSpec,
    pub r: TimeFactor,
    pub r0: f64,
    pub t_final: f64,
    pub grids: Vec<usize>,
    pub lambda: f64,
    /// Waive the observation-time condition; no assertions attach to the run.
    pub exploratory: bool,
}

impl HyperbolicSetup {
    /// `Omega = (0, 1)`, `x0 = -1`, `R = 1 + t`, `dx in {1/100, 1/200, 1/400}`.
    pub fn unit_interval(t_final: f64) -> Self {
        HyperbolicSetup {
            domain: DomainSpec::interval(0.0, 1.0, 101).expect("valid interval"),
            x0: [-1.0, 0.0],
            coefficients: CoefficientSpec::default(),
            r: TimeFactor::affine(1.0, 1.0),
            r0: 1.0,
            t_final,
            grids: vec![101, 201, 401],
            lambda: 1.0,
            exploratory: false,
        }
    }

    fn check_time(&self, critical: f64, what: &str) -> Result<bool> {
        let ok = self.t_final > critical;
        if !ok && !self.exploratory {
            return Err(Error::ConditionViolation(format!(
                "T = {} does not exceed the critical time {critical:.6}: the observation-time hypothesis of the {what} fails",
                self.t_final
            )));
        }
        Ok(ok)
    }
}

fn l2_norm(domain: &DomainSpec, f: &[f64]) -> f64 {
    weighted_norm(f, &domain.quadrature_weights())
}

/// Ratio `|f|_{L^2} / |d_t d_nu u|_{L^2(Gamma x (0,T))}` over an ensemble of
/// sources on every grid of the ladder, plus the zero-source consistency row.
pub fn lipschitz_experiment(ens: &EnsembleSpec, setup: &HyperbolicSetup) -> Result<StabilityReport> {
    ens.validate()?;
    let base = compute_gamma(&setup.domain, setup.x0)?;
    SourceSpec::new(setup.r.clone(), Vec::new(), setup.r0).check_floor(&setup.domain, 0.0)?;
    let critical = critical_time_hyperbolic(&base);
    let above = setup.check_time(critical, "Lipschitz stability theorem")?;
    let mut rep = StabilityReport::new("lipschitz", setup.exploratory, ens.seed);
    rep.parameters.insert("T".into(), setup.t_final);
    rep.parameters.insert("critical_time".into(), critical);
    rep.parameters.insert("d0".into(), base.d0);
    rep.parameters.insert("d1".into(), base.d1);
    rep.parameters.insert("lambda".into(), setup.lambda);
    if above {
        let beta = select_beta_hyperbolic(&base, setup.t_final)?;
        rep.parameters.insert("beta".into(), beta);
        rep.constants = hyperbolic_constants(&base, setup.lambda, beta, setup.t_final)?;
    }
    for &nx in &setup.grids {
        let domain = setup.domain.with_resolution(nx)?;
        SourceSpec::new(setup.r.clone(), Vec::new(), setup.r0).check_floor(&domain, 0.0)?;
        let geom = compute_gamma(&domain, setup.x0)?;
        let coeffs = setup.coefficients.on(&domain)?;
        let map = WaveBoundaryMap::new(&domain, &coeffs, &setup.r, &geom.gamma, setup.t_final, None)?;
        let rows: Vec<SampleRow> = (0..=ens.n_samples)
            .into_par_iter()
            .map(|i| {
                let zero = i == ens.n_samples;
                let f = if zero {
                    vec![0.0; domain.n_nodes()]
                } else {
                    ens.sample_on(&domain, i)?
                };
                let d = map.apply(&map.restrict(&f))?;
                let data_norm = weighted_norm(&d, map.range_weights());
                let source_norm = l2_norm(&domain, &f);
                Ok(SampleRow {
                    nx,
                    label: if zero { ZERO_LABEL.into() } else { format!("sample-{i}") },
                    scale: 1.0,
                    source_norm,
                    data_norm,
                    ratio: (!zero && data_norm > 0.0).then(|| source_norm / data_norm),
                    consistency: zero,
                    case: None,
                })
            })
            .collect::<Result<_>>()?;
        rep.samples.extend(rows);
    }
    rep.summarize();
    Ok(rep)
}

/// `sin(pi (x - a) / L)` (product over axes in 2D): first Dirichlet eigenmode.
pub fn first_eigenmode(domain: &DomainSpec) -> Vec<f64> {
    domain
        .points()
        .iter()
        .map(|p| {
            (0..domain.dim())
                .map(|axis| {
                    let (a, b) = domain.bounds(axis);
                    (std::f64::consts::PI * (p[axis] - a) / (b - a)).sin()
                })
                .product()
        })
        .collect()
}

/// `(|grad u0| + |v0|) / |d_nu u|_{L^2(Gamma x (0,T))}` for free waves; rows
/// are the eigenmode `(sin, 0)`, the ensemble pairs and the zero pair.
/// Also reports `kappa0..2` and requires `kappa2 > kappa1`.
pub fn observability_experiment(ens: &EnsembleSpec, setup: &HyperbolicSetup) -> Result<StabilityReport> {
    ens.validate()?;
    let base = compute_gamma(&setup.domain, setup.x0)?;
    let critical = critical_time_observability(&base);
    let above = setup.check_time(critical, "observability inequality")?;
    let mut rep = StabilityReport::new("observability", setup.exploratory, ens.seed);
    rep.parameters.insert("T".into(), setup.t_final);
    rep.parameters.insert("critical_time".into(), critical);
    rep.parameters.insert("lambda".into(), setup.lambda);
    if above {
        let beta = select_beta_observability(&base, setup.t_final)?;
        rep.parameters.insert("beta".into(), beta);
        let c = observability_constants(&base, setup.lambda, beta, setup.t_final, None)?;
        let (k1, k2) = (c.kappa1.unwrap_or(f64::NAN), c.kappa2.unwrap_or(f64::NAN));
        if !(k2 > k1) {
            return Err(Error::ConditionViolation(format!(
                "kappa2 = {k2} does not exceed kappa1 = {k1}: the weight ordering of the observability argument fails"
            )));
        }
        rep.constants = c;
    }
    for &nx in &setup.grids {
        let domain = setup.domain.with_resolution(nx)?;
        let geom = compute_gamma(&domain, setup.x0)?;
        let coeffs = setup.coefficients.on(&domain)?;
        let n = domain.n_nodes();
        let rows: Vec<SampleRow> = (0..ens.n_samples + 2)
            .into_par_iter()
            .map(|i| {
                let (label, u0, v0) = match i {
                    0 => ("eigenmode".to_string(), first_eigenmode(&domain), vec![0.0; n]),
                    _ if i == ens.n_samples + 1 => (ZERO_LABEL.to_string(), vec![0.0; n], vec![0.0; n]),
                    _ => {
                        let (u0, v0) = ens.sample_pair_on(&domain, i - 1)?;
                        (format!("sample-{}", i - 1), u0, v0)
                    }
                };
                let u = solve_wave_free(&domain, &coeffs, &u0, &v0, setup.t_final, None)?;
                let data_norm = boundary_flux_norm(&u, &geom.gamma, None, false)?;
                let grad = sobolev_norm(&SpaceTimeField::stationary(&domain, 0.0, u0)?, NormKind::H1Semi, None, None)?;
                let source_norm = grad + l2_norm(&domain, &v0);
                let zero = label == ZERO_LABEL;
                Ok(SampleRow {
                    nx,
                    label,
                    scale: 1.0,
                    source_norm,
                    data_norm,
                    ratio: (!zero && data_norm > 0.0).then(|| source_norm / data_norm),
                    consistency: zero,
                    case: None,
                })
            })
            .collect::<Result<_>>()?;
        rep.samples.extend(rows);
    }
    rep.summarize();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipschitz_rejects_short_time_unless_exploratory() {
        let mut setup = HyperbolicSetup::unit_interval(1.0);
        setup.grids = vec![41];
        let ens = EnsembleSpec::fourier(2, 1);
        let err = lipschitz_experiment(&ens, &setup).unwrap_err();
        assert!(matches!(err, Error::ConditionViolation(ref m) if m.contains("critical time")));
        setup.exploratory = true;
        let rep = lipschitz_experiment(&ens, &setup).unwrap();
        assert!(rep.exploratory);
        assert!(rep.constants.c0.is_none());
        assert!(rep.consistency_ok);
    }

    #[test]
    fn lipschitz_rejects_vanishing_time_factor() {
        let mut setup = HyperbolicSetup::unit_interval(2.0);
        setup.r = TimeFactor::affine(0.0, 1.0);
        let err = lipschitz_experiment(&EnsembleSpec::fourier(1, 1), &setup).unwrap_err();
        assert!(matches!(err, Error::ConditionViolation(_)));
    }

    #[test]
    fn eigenmode_observability_matches_oracle() {
        // u = sin(pi x) cos(pi t): |d_nu u|^2 = pi^2 (T/2 + sin(2 pi T) / (4 pi)) at x = 1, |grad u0| = pi / sqrt 2.
        let t = 1.15 * 2.0 * 3f64.sqrt();
        let mut setup = HyperbolicSetup::unit_interval(t);
        setup.grids = vec![401];
        let rep = observability_experiment(&EnsembleSpec::fourier(1, 3), &setup).unwrap();
        let row = rep.samples.iter().find(|r| r.label == "eigenmode").unwrap();
        let pi = std::f64::consts::PI;
        let flux = (pi * pi * (t / 2.0 + (2.0 * pi * t).sin() / (4.0 * pi))).sqrt();
        assert!((row.data_norm / flux - 1.0).abs() < 1e-3, "{} vs {flux}", row.data_norm);
        assert!((row.source_norm / (pi / 2f64.sqrt()) - 1.0).abs() < 1e-4);
        let c = &rep.constants;
        assert!(c.kappa2.unwrap() > c.kappa1.unwrap());
    }
}
