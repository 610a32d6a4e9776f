//! Local Hölder stability of the heat source problem and conditional stability
//! of the lateral Cauchy problem.

use rayon::prelude::*;

use super::ensemble::{CoefficientSpec, EnsembleSpec};
use super::fit::loglog_fit;
use super::report::{HolderCase, SampleRow, StabilityReport, ZERO_LABEL};
use crate::analysis::{integrate, sobolev_norm, Integrand, NormKind, Region};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::{AxisBox, DomainSpec, FaceLabel, ParabolicGeometry, ParabolicOptions};
use crate::reconstruction::CauchyMap;
use crate::solvers::{solve_heat, SourceSpec, TimeFactor};
use crate::weights::{cauchy_constants, default_parabolic_beta, parabolic_constants, select_cauchy_parameters};

#[derive(Clone, Debug)]
pub struct ParabolicSetup {
    /// Domain at the working resolution.
    pub domain: DomainSpec,
    pub gamma: FaceLabel,
    pub options: ParabolicOptions,
    pub coefficients: CoefficientSpec,
    pub r: TimeFactor,
    pub r0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub t0: f64,
    pub delta: f64,
    /// Half-width of the excluded time layers of the Cauchy estimate.
    pub epsilon: f64,
    pub lambda: f64,
    pub beta: Option<f64>,
    /// A priori bound `M`; every sample is rescaled to this norm before scaling.
    pub m_cap: f64,
    pub scales: Vec<f64>,
}

impl ParabolicSetup {
    /// `Omega = (0, 1)`, `Gamma = {1}`, `Omega0 = (0.5, 0.9)`, `R = 1 + t`,
    /// `T = 1`, `t0 = 0.5`, `delta = 0.25`, `eps = 0.1`, 101 nodes, `dt = 0.005`.
    pub fn unit_interval() -> Self {
        ParabolicSetup {
            domain: DomainSpec::interval(0.0, 1.0, 101).expect("valid interval"),
            gamma: FaceLabel::Right,
            options: ParabolicOptions {
                omega0: Some(AxisBox::interval(0.5, 0.9)),
                ..Default::default()
            },
            coefficients: CoefficientSpec::default(),
            r: TimeFactor::affine(1.0, 1.0),
            r0: 1.0,
            t_final: 1.0,
            dt: 0.005,
            t0: 0.5,
            delta: 0.25,
            epsilon: 0.1,
            lambda: 1.0,
            beta: None,
            m_cap: 1.0,
            scales: vec![1.0, 0.5, 0.2, 0.1, 0.05],
        }
    }

    fn check_common(&self) -> Result<()> {
        if !(self.m_cap > 0.0) {
            return Err(Error::InvalidInput(format!("a priori bound M = {} must be positive", self.m_cap)));
        }
        if self.scales.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return Err(Error::InvalidInput(
                "scales must lie in (0, 1] so that every sample respects the a priori bound".into(),
            ));
        }
        Ok(())
    }
}

fn strip(pgeom: &ParabolicGeometry) -> Region {
    Region::BoundaryStrip {
        pieces: vec![pgeom.gamma],
        window: None,
    }
}

/// `|grad_{x,t} w|_{L^2(Gamma x (0,T))} + |w|_{L^2(Gamma x (0,T))}`.
fn lateral_norm(w: &SpaceTimeField, region: &Region) -> Result<f64> {
    Ok(integrate(w, Integrand::GradXT, region)?.max(0.0).sqrt() + integrate(w, Integrand::Value, region)?.max(0.0).sqrt())
}

fn sum_norms(u: &SpaceTimeField, kinds: [NormKind; 2], sub: Option<AxisBox>, window: Option<(f64, f64)>) -> Result<f64> {
    Ok(sobolev_norm(u, kinds[0], sub, window)? + sobolev_norm(u, kinds[1], sub, window)?)
}

struct Measured {
    source: f64,
    data: f64,
    m: f64,
}

fn fit_and_bound(rep: &mut StabilityReport, mu: Option<f64>) -> Result<()> {
    let pts: Vec<(f64, f64)> = rep
        .samples
        .iter()
        .filter(|r| r.ratio.is_some())
        .map(|r| (r.data_norm, r.source_norm))
        .collect();
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    rep.fit = Some(loglog_fit(&x, &y)?);
    let c_emp = rep.samples.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    rep.parameters.insert("C_emp".into(), c_emp);
    rep.theta_lower_bound = mu.map(|mu| mu / (c_emp + mu));
    Ok(())
}

fn scaled_rows(
    ens: &EnsembleSpec,
    setup: &ParabolicSetup,
    measure: &(dyn Fn(&[f64]) -> Result<Measured> + Sync),
) -> Result<Vec<SampleRow>> {
    let n = setup.domain.n_nodes();
    let nx = setup.domain.nx;
    let per_sample: Vec<Vec<SampleRow>> = (0..=ens.n_samples)
        .into_par_iter()
        .map(|i| {
            let zero = i == ens.n_samples;
            if zero {
                let m = measure(&vec![0.0; n])?;
                return Ok(vec![SampleRow {
                    nx,
                    label: ZERO_LABEL.into(),
                    scale: 0.0,
                    source_norm: m.source,
                    data_norm: m.data,
                    ratio: None,
                    consistency: true,
                    case: Some(HolderCase::classify(setup.m_cap, m.data)),
                }]);
            }
            let f = ens.sample_on(&setup.domain, i)?;
            let m0 = measure(&f)?;
            if !(m0.m > 0.0) {
                return Err(Error::InvalidInput(format!("sample {i} has zero a priori norm")));
            }
            let unit = setup.m_cap / m0.m;
            setup
                .scales
                .iter()
                .map(|&eps| {
                    let fe: Vec<f64> = f.iter().map(|v| eps * unit * v).collect();
                    let m = measure(&fe)?;
                    let consistency = m.source == 0.0;
                    Ok(SampleRow {
                        nx,
                        label: format!("sample-{i}"),
                        scale: eps,
                        source_norm: m.source,
                        data_norm: m.data,
                        ratio: (!consistency && m.data > 0.0).then(|| m.source / m.data),
                        consistency,
                        case: Some(HolderCase::classify(setup.m_cap, m.data)),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_sample.into_iter().flatten().collect())
}

/// Per scaled source: `|f|_{L^2(Omega0)}` against
/// `D~ = |grad_{x,t} u_t|_Gamma + |u_t|_Gamma + |u(t0)|_{H^2}`, with samples
/// normalized to `|u|_{H^2(H^1)} + |u|_{H^1(H^2)} = M` before scaling; pooled
/// log-log fit gives the empirical exponent.
pub fn holder_experiment(ens: &EnsembleSpec, setup: &ParabolicSetup) -> Result<StabilityReport> {
    ens.validate()?;
    setup.check_common()?;
    let domain = &setup.domain;
    SourceSpec::new(setup.r.clone(), Vec::new(), setup.r0).check_floor(domain, setup.t0)?;
    if !(setup.t0 - setup.delta > 0.0 && setup.t0 + setup.delta < setup.t_final && setup.delta > 0.0) {
        return Err(Error::ConditionViolation(format!(
            "window (t0 - delta, t0 + delta) = ({}, {}) must lie inside (0, T) = (0, {})",
            setup.t0 - setup.delta,
            setup.t0 + setup.delta,
            setup.t_final
        )));
    }
    let pgeom = ParabolicGeometry::new(domain, setup.gamma, &setup.options)?;
    let beta = setup.beta.unwrap_or_else(|| default_parabolic_beta(&pgeom, setup.delta));
    let constants = parabolic_constants(&pgeom, setup.lambda, beta, setup.delta)?;
    let coeffs = setup.coefficients.on(domain)?;
    let region = strip(&pgeom);
    let omega0 = pgeom.omega0;
    let measure = |f: &[f64]| -> Result<Measured> {
        let src = SourceSpec::new(setup.r.clone(), f.to_vec(), setup.r0);
        let sol = solve_heat(domain, &coeffs, Some(&src), &vec![0.0; f.len()], setup.t_final, setup.dt)?;
        let k0 = sol.u.time_index(setup.t0)?;
        let at_t0 = SpaceTimeField::stationary(domain, setup.t0, sol.u.slice_vec(k0))?;
        let data = lateral_norm(&sol.z, &region)? + sobolev_norm(&at_t0, NormKind::H2, None, None)?;
        let fs = SpaceTimeField::stationary(domain, 0.0, f.to_vec())?;
        Ok(Measured {
            source: sobolev_norm(&fs, NormKind::L2, Some(omega0), None)?,
            data,
            m: sum_norms(&sol.u, [NormKind::H2tH1x, NormKind::H1tH2x], None, None)?,
        })
    };
    let mut rep = StabilityReport::new("holder", false, ens.seed);
    for (k, v) in [
        ("T", setup.t_final),
        ("t0", setup.t0),
        ("delta", setup.delta),
        ("lambda", setup.lambda),
        ("beta", beta),
        ("M", setup.m_cap),
        ("d_min_omega0", pgeom.d_min_omega0()),
        ("d_max", pgeom.d_max_domain()),
    ] {
        rep.parameters.insert(k.into(), v);
    }
    rep.samples = scaled_rows(ens, setup, &measure)?;
    rep.summarize();
    fit_and_bound(&mut rep, constants.mu)?;
    rep.constants = constants;
    Ok(rep)
}

/// Homogeneous heat flows from the ensemble's initial states: interior norm
/// `|u|_{H^1(eps,T-eps;L^2(Omega0))} + |u|_{L^2(eps,T-eps;H^2(Omega0))}`
/// against `|grad_{x,t} u|_Gamma + |u|_Gamma`, after normalizing
/// `|u|_{H^1(L^2)} + |u|_{L^2(H^2)} = M`. Reports the parameter selection
/// (`N`, `beta`) and `mu0, mu1, mu2`.
pub fn cauchy_stability_experiment(ens: &EnsembleSpec, setup: &ParabolicSetup) -> Result<StabilityReport> {
    ens.validate()?;
    setup.check_common()?;
    let domain = &setup.domain;
    let pgeom = ParabolicGeometry::new(domain, setup.gamma, &setup.options)?;
    let sel = select_cauchy_parameters(pgeom.d_min_omega0(), pgeom.d_max_domain(), setup.epsilon, setup.t_final)?;
    let constants = cauchy_constants(&sel, setup.lambda)?;
    let coeffs = setup.coefficients.on(domain)?;
    let map = CauchyMap::new(domain, &coeffs, &[pgeom.gamma], setup.t_final, setup.dt)?;
    let region = strip(&pgeom);
    let omega0 = pgeom.omega0;
    let window = (setup.epsilon, setup.t_final - setup.epsilon);
    let kinds = [NormKind::H1tL2x, NormKind::L2tH2x];
    let measure = |u0: &[f64]| -> Result<Measured> {
        let u = map.solution(&map.restrict(u0))?;
        Ok(Measured {
            source: sum_norms(&u, kinds, Some(omega0), Some(window))?,
            data: lateral_norm(&u, &region)?,
            m: sum_norms(&u, kinds, None, None)?,
        })
    };
    let mut rep = StabilityReport::new("cauchy", false, ens.seed);
    for (k, v) in [
        ("T", setup.t_final),
        ("epsilon", setup.epsilon),
        ("lambda", setup.lambda),
        ("M", setup.m_cap),
        ("d0_tilde", sel.d0_tilde),
        ("d1_tilde", sel.d1_tilde),
        ("N", sel.n as f64),
        ("eps_tilde", sel.eps_tilde),
        ("delta_tilde", sel.delta_tilde),
        ("beta", sel.beta),
        ("beta_lower", sel.beta_interval.0),
        ("beta_upper", sel.beta_interval.1),
    ] {
        rep.parameters.insert(k.into(), v);
    }
    rep.samples = scaled_rows(ens, setup, &measure)?;
    rep.summarize();
    fit_and_bound(&mut rep, None)?;
    rep.constants = constants;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ParabolicSetup {
        let mut s = ParabolicSetup::unit_interval();
        s.domain = DomainSpec::interval(0.0, 1.0, 41).unwrap();
        s.dt = 0.01;
        s
    }

    #[test]
    fn profile_outside_omega0_is_a_consistency_row() {
        // max(0, 0.45 - x): vanishes exactly on Omega0 = [0.5, 0.9], so no fit point survives
        let ens = EnsembleSpec::profile("abs(0.45 - x) + (0.45 - x)");
        let err = holder_experiment(&ens, &small()).unwrap_err();
        assert!(matches!(err, Error::FitUnderdetermined { points: 0, .. }));
    }

    #[test]
    fn scaling_family_gives_unit_local_slope() {
        let rep = holder_experiment(&EnsembleSpec::profile("sin(pi * x)"), &small()).unwrap();
        let fit = rep.fit.unwrap();
        assert_eq!(fit.points, 5);
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!(rep.consistency_ok);
        let ratios: Vec<f64> = rep.samples.iter().filter_map(|r| r.ratio).collect();
        assert!(ratios.iter().all(|r| (r / ratios[0] - 1.0).abs() < 1e-10));
        let th = rep.theta_lower_bound.unwrap();
        assert!(th > 0.0 && th < 1.0);
    }

    #[test]
    fn window_must_fit_inside_horizon() {
        let mut s = small();
        s.delta = 0.6;
        assert!(matches!(
            holder_experiment(&EnsembleSpec::profile("1"), &s),
            Err(Error::ConditionViolation(_))
        ));
    }
}
