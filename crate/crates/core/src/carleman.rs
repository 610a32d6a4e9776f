//! Both sides of the hyperbolic and parabolic Carleman estimates evaluated
//! over an s-sweep, and the absorption diagnostics used to remove the source
//! term from the right-hand side.
//!
//! The unknown constants `C` and `s0` are replaced by the ratio curve
//! `lhs / sum(rhs)`; see [`RatioCriterion`] for the boundedness surrogate.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{log_sum_exp, Integrand, PreparedIntegral, Region, WeightChoice};
use crate::error::{Error, Result};
use crate::field::{gradient, laplacian, SpaceTimeField};
use crate::geometry::{
    compute_gamma, full_boundary, select_beta_hyperbolic, DomainSpec, FaceLabel, GammaPiece, ObservationGeometry,
    ParabolicGeometry, ParabolicOptions,
};
use crate::solvers::{Coefficients, SourceSpec};
use crate::weights::{default_parabolic_beta, hyperbolic_constants, parabolic_constants, WeightParams};

/// Relative residual tolerance at the reference spacing [`RESIDUAL_REFERENCE_H`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-2;
/// Spacing at which the residual tolerance applies unscaled; coarser grids
/// get a tolerance scaled by `(h / h_ref)^2`.
pub const RESIDUAL_REFERENCE_H: f64 = 0.005;
/// `max |v|` on the boundary relative to `max |v|` accepted as a zero trace.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    Hyperbolic,
    Parabolic,
}

/// One row of a check report. Integrals are stored as natural logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanRow {
    pub s: f64,
    pub ln_lhs: f64,
    pub ln_rhs_source: f64,
    pub ln_rhs_boundary: f64,
    pub ln_rhs_timecap: f64,
    /// `lhs / (source + boundary + timecap)`; 0 for the zero field.
    pub ratio: f64,
}

impl CarlemanRow {
    fn new(s: f64, ln_lhs: f64, ln_source: f64, ln_boundary: f64, ln_timecap: f64) -> Self {
        let ln_rhs = log_sum_exp(&[ln_source, ln_boundary, ln_timecap]);
        let ratio = if ln_lhs == f64::NEG_INFINITY {
            0.0
        } else {
            (ln_lhs - ln_rhs).exp()
        };
        CarlemanRow {
            s,
            ln_lhs,
            ln_rhs_source: ln_source,
            ln_rhs_boundary: ln_boundary,
            ln_rhs_timecap: ln_timecap,
            ratio,
        }
    }

    pub fn ln_rhs(&self) -> f64 {
        log_sum_exp(&[self.ln_rhs_source, self.ln_rhs_boundary, self.ln_rhs_timecap])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanCheckReport {
    pub lemma: LemmaKind,
    pub field_id: String,
    pub weight: WeightParams,
    /// Discrete `L^2` norm of the equation residual on interior nodes.
    pub residual: f64,
    pub residual_tolerance: f64,
    pub rows: Vec<CarlemanRow>,
}

impl CarlemanCheckReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ratio).collect()
    }

    /// CSV with one row per `s`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,ln_lhs,ln_rhs_source,ln_rhs_boundary,ln_rhs_timecap,ratio")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.s, r.ln_lhs, r.ln_rhs_source, r.ln_rhs_boundary, r.ln_rhs_timecap, r.ratio
            )?;
        }
        Ok(())
    }
}

/// Empirical stand-in for "there exist `s0` and `C`": the ratio curve may not
/// exceed `factor` times its first value, and beyond `s_threshold` it may not
/// grow by more than `max_increase` between consecutive sweep points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCriterion {
    pub factor: f64,
    pub max_increase: f64,
    pub s_threshold: f64,
}

impl Default for RatioCriterion {
    fn default() -> Self {
        RatioCriterion {
            factor: 10.0,
            max_increase: 0.05,
            s_threshold: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioOutcome {
    pub passed: bool,
    pub max_ratio: f64,
    pub first_ratio: f64,
    /// Largest relative increase `r_{k+1} / r_k - 1` beyond the threshold.
    pub worst_increase: f64,
}

impl RatioCriterion {
    pub fn evaluate(&self, rows: &[CarlemanRow]) -> RatioOutcome {
        let first = rows.first().map_or(0.0, |r| r.ratio);
        let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
        let mut worst = f64::NEG_INFINITY;
        for pair in rows.windows(2) {
            if pair[0].s >= self.s_threshold && pair[0].ratio > 0.0 {
                worst = worst.max(pair[1].ratio / pair[0].ratio - 1.0);
            }
        }
        let finite = rows.iter().all(|r| r.ratio.is_finite());
        let passed = finite && max_ratio <= self.factor * first && worst <= self.max_increase;
        RatioOutcome {
            passed,
            max_ratio,
            first_ratio: first,
            worst_increase: worst,
        }
    }
}

fn sweep_of(params: &WeightParams) -> Result<Vec<f64>> {
    if params.s_sweep.is_empty() {
        return Err(Error::InvalidInput("empty s-sweep".into()));
    }
    Ok(params.s_sweep.clone())
}

/// Grid spacing controlling the residual tolerance: the coarsest of the
/// spatial and temporal steps.
fn residual_tolerance(v: &SpaceTimeField, scale: f64) -> f64 {
    let h = v.domain.min_spacing().max(v.dt);
    RESIDUAL_TOLERANCE * (h / RESIDUAL_REFERENCE_H).powi(2).max(1.0) * scale
}

/// `(||residual||, ||F||, ||principal part||)` on interior space-time nodes,
/// where `residual = D_t v - Laplacian v - b . grad v - c v - F` and `D_t` is
/// `d_t` or `d_t^2`.
fn residual_norms(
    v: &SpaceTimeField,
    rhs: &SpaceTimeField,
    coeffs: &Coefficients,
    second_order: bool,
) -> Result<(f64, f64, f64)> {
    v.check_same_grid(rhs)?;
    coeffs.validate(&v.domain)?;
    if v.nt() < 3 {
        return Err(Error::GridMismatch("residual check needs at least three time levels".into()));
    }
    let dom = &v.domain;
    let interior = dom.interior_nodes();
    let cell = dom.quadrature_weights();
    let dt = v.dt;
    let mut res = 0.0;
    let mut src = 0.0;
    let mut principal = 0.0;
    for k in 1..v.nt() - 1 {
        let u = v.slice(k);
        let lap = laplacian(dom, u);
        let grad = gradient(dom, u);
        for &i in &interior {
            let dtv = if second_order {
                (v.values[[k + 1, i]] - 2.0 * v.values[[k, i]] + v.values[[k - 1, i]]) / (dt * dt)
            } else {
                (v.values[[k + 1, i]] - v.values[[k - 1, i]]) / (2.0 * dt)
            };
            let b = coeffs.b[i];
            let lower = b[0] * grad[i][0] + b[1] * grad[i][1] + coeffs.c[i] * u[i];
            let r = dtv - lap[i] - lower - rhs.values[[k, i]];
            let w = cell[i] * dt;
            res += w * r * r;
            src += w * rhs.values[[k, i]].powi(2);
            principal += w * (dtv * dtv + lap[i] * lap[i]);
        }
    }
    Ok((res.sqrt(), src.sqrt(), principal.sqrt()))
}

fn check_residual(v: &SpaceTimeField, rhs: &SpaceTimeField, coeffs: &Coefficients, second_order: bool) -> Result<(f64, f64)> {
    let (res, src, principal) = residual_norms(v, rhs, coeffs, second_order)?;
    let tolerance = residual_tolerance(v, src.max(principal));
    if res > tolerance {
        return Err(Error::ResidualTooLarge {
            residual: res,
            tolerance,
        });
    }
    Ok((res, tolerance))
}

fn check_zero_trace(v: &SpaceTimeField) -> Result<()> {
    let dom = &v.domain;
    let boundary: Vec<usize> = (0..dom.n_nodes()).filter(|&i| dom.is_boundary_node(i)).collect();
    let mut max_b = 0.0f64;
    for k in 0..v.nt() {
        for &i in &boundary {
            max_b = max_b.max(v.values[[k, i]].abs());
        }
    }
    if max_b > BOUNDARY_TOLERANCE * v.max_abs() {
        return Err(Error::BoundaryViolation { max: max_b });
    }
    Ok(())
}

/// A weighted integral prepared once and evaluated for every `s` with a fixed
/// power of `s`.
struct Term {
    integral: PreparedIntegral,
    s_power: i32,
}

impl Term {
    fn new(
        field: &SpaceTimeField,
        integrand: Integrand,
        region: Region,
        weight: &WeightChoice,
        weight_time: Option<f64>,
        s_power: i32,
    ) -> Result<Self> {
        Ok(Term {
            integral: PreparedIntegral::new(field, integrand, &region, weight, weight_time)?,
            s_power,
        })
    }
}

fn ln_group(terms: &[Term], s: f64) -> f64 {
    let vals: Vec<f64> = terms.iter().map(|t| t.integral.ln_value(s, t.s_power)).collect();
    log_sum_exp(&vals)
}

fn evaluate_rows(sweep: &[f64], lhs: &[Term], source: &[Term], boundary: &[Term], caps: &[Term]) -> Vec<CarlemanRow> {
    sweep
        .par_iter()
        .map(|&s| {
            CarlemanRow::new(
                s,
                ln_group(lhs, s),
                ln_group(source, s),
                ln_group(boundary, s),
                ln_group(caps, s),
            )
        })
        .collect()
}

/// Hyperbolic estimate on `Omega x (-T, T)`:
///
/// lhs = `int (s |grad_{x,t} v|^2 + s^3 |v|^2) e^{2 s phi}`,
/// rhs = source `int |F|^2 e^{2 s phi}` + flux `int_Gamma s |d_nu v|^2 e^{2 s phi}`
/// + caps `int (s |grad_{x,t} v|^2 + s^3 |v|^2)` at `t = T` weighted by
/// `phi(x, T)` and at `t = -T` weighted by `phi(x, 0)`.
///
/// `v` must be given on a symmetric window `(-T, T)`, vanish on the boundary
/// and satisfy the equation with right-hand side `F` up to the residual tolerance.
pub fn check_lemma1(
    v: &SpaceTimeField,
    rhs: &SpaceTimeField,
    coeffs: &Coefficients,
    geom: &ObservationGeometry,
    params: &WeightParams,
    field_id: &str,
) -> Result<CarlemanCheckReport> {
    let sweep = sweep_of(params)?;
    let t_end = v.t_end();
    if (v.t_start + t_end).abs() > 1e-9 * t_end.abs().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "the hyperbolic check needs a symmetric window, got ({}, {t_end})",
            v.t_start
        )));
    }
    if geom.gamma.is_empty() {
        return Err(Error::EmptyGamma);
    }
    check_zero_trace(v)?;
    let (residual, residual_tolerance) = check_residual(v, rhs, coeffs, true)?;
    let w = WeightChoice::Carleman(params.clone());
    let all = Region::space_time();
    let lhs = [
        Term::new(v, Integrand::GradXT, all.clone(), &w, None, 1)?,
        Term::new(v, Integrand::Value, all.clone(), &w, None, 3)?,
    ];
    let source = [Term::new(rhs, Integrand::Value, all, &w, None, 0)?];
    let boundary = [Term::new(
        v,
        Integrand::NormalDeriv,
        Region::BoundaryStrip {
            pieces: geom.gamma.clone(),
            window: None,
        },
        &w,
        None,
        1,
    )?];
    let top = Region::slice(t_end);
    let bottom = Region::slice(v.t_start);
    let caps = [
        Term::new(v, Integrand::GradXT, top.clone(), &w, Some(t_end), 1)?,
        Term::new(v, Integrand::Value, top, &w, Some(t_end), 3)?,
        Term::new(v, Integrand::GradXT, bottom.clone(), &w, Some(0.0), 1)?,
        Term::new(v, Integrand::Value, bottom, &w, Some(0.0), 3)?,
    ];
    Ok(CarlemanCheckReport {
        lemma: LemmaKind::Hyperbolic,
        field_id: field_id.to_string(),
        weight: params.clone(),
        residual,
        residual_tolerance,
        rows: evaluate_rows(&sweep, &lhs, &source, &boundary, &caps),
    })
}

/// Parabolic estimate on `Q_I = Omega x I`:
///
/// lhs = `int ((|v_t|^2 + sum |v_{x_i x_j}|^2) / s + s |grad v|^2 + s^3 |v|^2) e^{2 s phi~}`,
/// rhs = source `int |F|^2 e^{2 s phi~}` + boundary
/// `s^3 int_{dOmega x I} (|grad_{x,t} v|^2 + |v|^2) e^{2 s phi~}` + slices
/// `s^3 int (|grad v|^2 + |v|^2)` at `t0 - delta` and `t0 + delta`, both weighted
/// by `phi~(x, t0 + delta)`.
pub fn check_lemma2(
    v: &SpaceTimeField,
    rhs: &SpaceTimeField,
    coeffs: &Coefficients,
    pgeom: &ParabolicGeometry,
    params: &WeightParams,
    window: (f64, f64),
    field_id: &str,
) -> Result<CarlemanCheckReport> {
    let sweep = sweep_of(params)?;
    if pgeom.domain != v.domain {
        return Err(Error::GridMismatch("parabolic geometry built on a different grid".into()));
    }
    let (a, b) = window;
    if !(a < b) {
        return Err(Error::InvalidInput(format!("empty time interval ({a}, {b})")));
    }
    let (residual, residual_tolerance) = check_residual(v, rhs, coeffs, false)?;
    let w = WeightChoice::Carleman(params.clone());
    let q = Region::SpaceTime {
        window: Some(window),
        subdomain: None,
    };
    let lhs = [
        Term::new(v, Integrand::TimeDeriv, q.clone(), &w, None, -1)?,
        Term::new(v, Integrand::Hessian, q.clone(), &w, None, -1)?,
        Term::new(v, Integrand::GradX, q.clone(), &w, None, 1)?,
        Term::new(v, Integrand::Value, q.clone(), &w, None, 3)?,
    ];
    let source = [Term::new(rhs, Integrand::Value, q, &w, None, 0)?];
    let boundary = [Term::new(
        v,
        Integrand::GradXTPlusValue,
        Region::BoundaryStrip {
            pieces: full_boundary(&v.domain),
            window: Some(window),
        },
        &w,
        None,
        3,
    )?];
    let caps = [
        Term::new(v, Integrand::GradXPlusValue, Region::slice(b), &w, Some(b), 3)?,
        Term::new(v, Integrand::GradXPlusValue, Region::slice(a), &w, Some(b), 3)?,
    ];
    Ok(CarlemanCheckReport {
        lemma: LemmaKind::Parabolic,
        field_id: field_id.to_string(),
        weight: params.clone(),
        residual,
        residual_tolerance,
        rows: evaluate_rows(&sweep, &lhs, &source, &boundary, &caps),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionRow {
    pub s: f64,
    /// `ln J(s)`.
    pub ln_j: f64,
    /// `ln int |f|^2 e^{2 s phi(x, t_center)} dx`.
    pub ln_denominator: f64,
    pub ratio: f64,
    /// Value of the decay curve at `s`.
    pub decay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionDiagnostics {
    pub lemma: LemmaKind,
    pub weight: WeightParams,
    /// `s^3 e^{-c0 s}` (hyperbolic) or `s^2 e^{-2 mu s}` (parabolic).
    pub decay_label: String,
    /// `c0` or `mu`.
    pub decay_rate: f64,
    pub rows: Vec<AbsorptionRow>,
}

impl AbsorptionDiagnostics {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ratio).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,ln_j,ln_denominator,ratio,decay")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.s, r.ln_j, r.ln_denominator, r.ratio, r.decay)?;
        }
        Ok(())
    }
}

/// `(d_t R) f` sampled on `nt` levels of `[t_a, t_b]`, and `f` as a single slice.
fn absorption_fields(
    domain: &DomainSpec,
    source: &SourceSpec,
    t_a: f64,
    t_b: f64,
    nt: usize,
    t_center: f64,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    if source.f.len() != domain.n_nodes() {
        return Err(Error::GridMismatch(format!(
            "source has {} values, grid has {} nodes",
            source.f.len(),
            domain.n_nodes()
        )));
    }
    if nt < 2 {
        return Err(Error::InvalidInput("need at least two time levels".into()));
    }
    let points = domain.points();
    let dt = (t_b - t_a) / (nt - 1) as f64;
    let mut values = ndarray::Array2::zeros((nt, domain.n_nodes()));
    for k in 0..nt {
        let t = t_a + k as f64 * dt;
        for (i, p) in points.iter().enumerate() {
            values[[k, i]] = source.r.eval_t(p, t) * source.f[i];
        }
    }
    let g = SpaceTimeField::new(domain.clone(), t_a, dt, values)?;
    let f = SpaceTimeField::stationary(domain, t_center, source.f.clone())?;
    Ok((g, f))
}

fn absorption_rows(
    g: &SpaceTimeField,
    f: &SpaceTimeField,
    params: &WeightParams,
    t_center: f64,
    decay: impl Fn(f64) -> f64 + Sync,
) -> Result<Vec<AbsorptionRow>> {
    let sweep = sweep_of(params)?;
    let w = WeightChoice::Carleman(params.clone());
    let num = PreparedIntegral::new(g, Integrand::Value, &Region::space_time(), &w, None)?;
    let den = PreparedIntegral::new(f, Integrand::Value, &Region::slice(t_center), &w, Some(t_center))?;
    Ok(sweep
        .par_iter()
        .map(|&s| {
            let ln_j = num.ln_value(s, 0);
            let ln_den = den.ln_value(s, 0);
            let ratio = if ln_j == f64::NEG_INFINITY {
                0.0
            } else {
                (ln_j - ln_den).exp()
            };
            AbsorptionRow {
                s,
                ln_j,
                ln_denominator: ln_den,
                ratio,
                decay: decay(s),
            }
        })
        .collect())
}

/// `J(s) = int_{Omega x (0, T)} |d_t R|^2 |f|^2 e^{2 s phi}` against
/// `int |f|^2 e^{2 s phi(x, 0)}`, with the weight centred at `t0 = 0`.
/// `nt` is the number of time levels used for the quadrature.
pub fn absorption_diagnostics_hyperbolic(
    domain: &DomainSpec,
    source: &SourceSpec,
    geom: &ObservationGeometry,
    params: &WeightParams,
    t_final: f64,
    nt: usize,
) -> Result<AbsorptionDiagnostics> {
    source.check_floor(domain, 0.0)?;
    if params.t0 != 0.0 {
        return Err(Error::InvalidInput(format!(
            "the hyperbolic weight must be centred at t0 = 0, got {}",
            params.t0
        )));
    }
    let c0 = hyperbolic_constants(geom, params.lambda, params.beta, t_final)
        .map_err(|e| Error::ConditionViolation(format!("observation time versus beta: {e}")))?
        .c0
        .unwrap_or(0.0);
    let (g, f) = absorption_fields(domain, source, 0.0, t_final, nt, 0.0)?;
    let rows = absorption_rows(&g, &f, params, 0.0, |s| s.powi(3) * (-c0 * s).exp())?;
    Ok(AbsorptionDiagnostics {
        lemma: LemmaKind::Hyperbolic,
        weight: params.clone(),
        decay_label: "s^3 exp(-c0 s)".into(),
        decay_rate: c0,
        rows,
    })
}

/// `J~(s) = int_{Omega x I} |d_t R|^2 |f|^2 e^{2 s phi~}` against
/// `int |f|^2 e^{2 s phi~(x, t0)}`.
pub fn absorption_diagnostics_parabolic(
    source: &SourceSpec,
    pgeom: &ParabolicGeometry,
    params: &WeightParams,
    window: (f64, f64),
    nt: usize,
) -> Result<AbsorptionDiagnostics> {
    let domain = &pgeom.domain;
    let t0 = params.t0;
    source.check_floor(domain, t0)?;
    let delta = 0.5 * (window.1 - window.0);
    if !(delta > 0.0) || ((window.0 + window.1) / 2.0 - t0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "window ({}, {}) must be centred at t0 = {t0}",
            window.0, window.1
        )));
    }
    let mu = parabolic_constants(pgeom, params.lambda, params.beta, delta)
        .map_err(|e| Error::ConditionViolation(format!("weight separation: {e}")))?
        .mu
        .unwrap_or(0.0);
    let (g, f) = absorption_fields(domain, source, window.0, window.1, nt, t0)?;
    let rows = absorption_rows(&g, &f, params, t0, |s| s * s * (-2.0 * mu * s).exp())?;
    Ok(AbsorptionDiagnostics {
        lemma: LemmaKind::Parabolic,
        weight: params.clone(),
        decay_label: "s^2 exp(-2 mu s)".into(),
        decay_rate: mu,
        rows,
    })
}

/// Analytic test field for the manufactured suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManufacturedField {
    /// `sin(pi x) sin(pi t)`, `b = c = 0`.
    H1,
    /// `x^2 (1 - x) sin(2 t)`, `b = c = 0`.
    H2,
    /// `sin(pi x) sin(2 t)`, `b = 0.5`, `c = -1`.
    H3,
    /// `exp(-pi^2 t) sin(pi x)`, `b = c = 0`.
    P1,
    /// `x (1 - x) (1 + t)`, `b = c = 0`.
    P2,
    /// `cos(2 x) exp(-t)`, `b = 0.5`, `c = -1`.
    P3,
}

impl ManufacturedField {
    pub const ALL: [ManufacturedField; 6] = [
        ManufacturedField::H1,
        ManufacturedField::H2,
        ManufacturedField::H3,
        ManufacturedField::P1,
        ManufacturedField::P2,
        ManufacturedField::P3,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ManufacturedField::H1 => "H1",
            ManufacturedField::H2 => "H2",
            ManufacturedField::H3 => "H3",
            ManufacturedField::P1 => "P1",
            ManufacturedField::P2 => "P2",
            ManufacturedField::P3 => "P3",
        }
    }

    pub fn lemma(self) -> LemmaKind {
        match self {
            ManufacturedField::H1 | ManufacturedField::H2 | ManufacturedField::H3 => LemmaKind::Hyperbolic,
            _ => LemmaKind::Parabolic,
        }
    }

    /// `(b, c)` in one dimension.
    pub fn coefficients(self) -> (f64, f64) {
        match self {
            ManufacturedField::H3 | ManufacturedField::P3 => (0.5, -1.0),
            _ => (0.0, 0.0),
        }
    }

    pub fn value(self, x: f64, t: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            ManufacturedField::H1 => (PI * x).sin() * (PI * t).sin(),
            ManufacturedField::H2 => x * x * (1.0 - x) * (2.0 * t).sin(),
            ManufacturedField::H3 => (PI * x).sin() * (2.0 * t).sin(),
            ManufacturedField::P1 => (-PI * PI * t).exp() * (PI * x).sin(),
            ManufacturedField::P2 => x * (1.0 - x) * (1.0 + t),
            ManufacturedField::P3 => (2.0 * x).cos() * (-t).exp(),
        }
    }

    /// Right-hand side of the corresponding equation, computed analytically.
    pub fn rhs(self, x: f64, t: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            ManufacturedField::H1 | ManufacturedField::P1 => 0.0,
            ManufacturedField::H2 => -4.0 * self.value(x, t) - (2.0 - 6.0 * x) * (2.0 * t).sin(),
            ManufacturedField::H3 => {
                (PI * PI - 3.0) * self.value(x, t) - 0.5 * PI * (PI * x).cos() * (2.0 * t).sin()
            }
            ManufacturedField::P2 => x * (1.0 - x) + 2.0 * (1.0 + t),
            ManufacturedField::P3 => (-t).exp() * (4.0 * (2.0 * x).cos() + (2.0 * x).sin()),
        }
    }
}

/// Setting of the manufactured suite on `Omega = (0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub nx: usize,
    pub nt: usize,
    pub lambdas: Vec<f64>,
    pub s_sweep: Vec<f64>,
    /// Source point of the hyperbolic weight.
    pub x0: f64,
    /// Observation time as a multiple of the critical time.
    pub time_factor: f64,
    pub t0_parabolic: f64,
    pub delta_parabolic: f64,
    pub criterion: RatioCriterion,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            nx: 200,
            nt: 200,
            lambdas: vec![0.5, 1.0, 2.0],
            s_sweep: crate::weights::default_s_sweep(),
            x0: -1.0,
            time_factor: 1.15,
            t0_parabolic: 0.5,
            delta_parabolic: 0.25,
            criterion: RatioCriterion::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub field: ManufacturedField,
    pub lambda: f64,
    pub outcome: RatioOutcome,
    pub report: CarlemanCheckReport,
}

/// Runs the hyperbolic estimate on H1-H3 and the parabolic one on P1-P3 for every `lambda`.
pub fn run_manufactured_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteEntry>> {
    let domain = DomainSpec::interval(0.0, 1.0, cfg.nx)?;
    let geom = compute_gamma(&domain, [cfg.x0, 0.0])?;
    let t_final = cfg.time_factor * crate::geometry::critical_time_hyperbolic(&geom);
    let beta_h = select_beta_hyperbolic(&geom, t_final)?;
    let pgeom = ParabolicGeometry::new(&domain, FaceLabel::Right, &ParabolicOptions::default())?;
    let window = (
        cfg.t0_parabolic - cfg.delta_parabolic,
        cfg.t0_parabolic + cfg.delta_parabolic,
    );
    let beta_p = default_parabolic_beta(&pgeom, cfg.delta_parabolic);

    let mut jobs = Vec::new();
    for &lambda in &cfg.lambdas {
        for field in ManufacturedField::ALL {
            jobs.push((field, lambda));
        }
    }
    jobs.par_iter()
        .map(|&(field, lambda)| {
            let (b, c) = field.coefficients();
            let coeffs = Coefficients::constant(&domain, [b, 0.0], c);
            let report = match field.lemma() {
                LemmaKind::Hyperbolic => {
                    let dt = 2.0 * t_final / (cfg.nt - 1) as f64;
                    let v = SpaceTimeField::from_fn(&domain, -t_final, dt, cfg.nt, |p, t| field.value(p[0], t));
                    let rhs = SpaceTimeField::from_fn(&domain, -t_final, dt, cfg.nt, |p, t| field.rhs(p[0], t));
                    let params = WeightParams::hyperbolic(lambda, beta_h, 0.0, [cfg.x0, 0.0])?.with_sweep(cfg.s_sweep.clone())?;
                    check_lemma1(&v, &rhs, &coeffs, &geom, &params, field.id())?
                }
                LemmaKind::Parabolic => {
                    let dt = (window.1 - window.0) / (cfg.nt - 1) as f64;
                    let v = SpaceTimeField::from_fn(&domain, window.0, dt, cfg.nt, |p, t| field.value(p[0], t));
                    let rhs = SpaceTimeField::from_fn(&domain, window.0, dt, cfg.nt, |p, t| field.rhs(p[0], t));
                    let params = WeightParams::parabolic(lambda, beta_p, cfg.t0_parabolic, pgeom.d.clone())?
                        .with_sweep(cfg.s_sweep.clone())?;
                    check_lemma2(&v, &rhs, &coeffs, &pgeom, &params, window, field.id())?
                }
            };
            Ok(SuiteEntry {
                field,
                lambda,
                outcome: cfg.criterion.evaluate(&report.rows),
                report,
            })
        })
        .collect()
}

/// Boundary pieces used by the hyperbolic suite (the observation boundary of `x0`).
pub fn suite_gamma(cfg: &SuiteConfig) -> Result<Vec<GammaPiece>> {
    let domain = DomainSpec::interval(0.0, 1.0, cfg.nx)?;
    Ok(compute_gamma(&domain, [cfg.x0, 0.0])?.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::TimeFactor;
    use std::f64::consts::PI;

    fn hyperbolic_setup(nx: usize, nt: usize) -> (DomainSpec, ObservationGeometry, WeightParams, f64) {
        let dom = DomainSpec::interval(0.0, 1.0, nx).unwrap();
        let geom = compute_gamma(&dom, [-1.0, 0.0]).unwrap();
        let t = 1.15 * 3f64.sqrt();
        let beta = select_beta_hyperbolic(&geom, t).unwrap();
        let params = WeightParams::hyperbolic(0.5, beta, 0.0, [-1.0, 0.0]).unwrap();
        let _ = nt;
        (dom, geom, params, t)
    }

    fn sample(dom: &DomainSpec, t: f64, nt: usize, f: impl Fn(f64, f64) -> f64) -> SpaceTimeField {
        SpaceTimeField::from_fn(dom, -t, 2.0 * t / (nt - 1) as f64, nt, |p, s| f(p[0], s))
    }

    #[test]
    fn zero_field_gives_zero_rows() {
        let (dom, geom, params, t) = hyperbolic_setup(41, 41);
        let z = sample(&dom, t, 41, |_, _| 0.0);
        let rep = check_lemma1(&z, &z, &Coefficients::zero(&dom), &geom, &params, "zero").unwrap();
        assert!(rep.rows.iter().all(|r| r.ratio == 0.0 && r.ln_lhs == f64::NEG_INFINITY));
    }

    #[test]
    fn ratio_invariant_under_scaling() {
        let (dom, geom, params, t) = hyperbolic_setup(61, 61);
        let f = ManufacturedField::H2;
        let v = sample(&dom, t, 61, |x, s| f.value(x, s));
        let rhs = sample(&dom, t, 61, |x, s| f.rhs(x, s));
        let c = Coefficients::zero(&dom);
        let a = check_lemma1(&v, &rhs, &c, &geom, &params, "a").unwrap();
        let b = check_lemma1(&v.scaled(2.0), &rhs.scaled(2.0), &c, &geom, &params, "b").unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.ratio - rb.ratio).abs() <= 1e-9 * ra.ratio);
        }
    }

    #[test]
    fn residual_and_boundary_checks() {
        let (dom, geom, params, t) = hyperbolic_setup(201, 201);
        let v = sample(&dom, t, 201, |x, s| (PI * x).sin() * (PI * s).sin());
        let wrong = sample(&dom, t, 201, |x, _| 10.0 * (PI * x).sin());
        let c = Coefficients::zero(&dom);
        assert!(matches!(
            check_lemma1(&v, &wrong, &c, &geom, &params, "x"),
            Err(Error::ResidualTooLarge { .. })
        ));
        let lifted = sample(&dom, t, 201, |x, s| 1.0 + x * s);
        assert!(matches!(
            check_lemma1(&lifted, &wrong, &c, &geom, &params, "x"),
            Err(Error::BoundaryViolation { .. })
        ));
    }

    #[test]
    fn lemma1_ratio_converges_under_refinement() {
        // At large s the weight decays on scales below the grid spacing, so
        // grid convergence is only meaningful for moderate s.
        let f = ManufacturedField::H1;
        let run = |n: usize| {
            let (dom, geom, params, t) = hyperbolic_setup(n, n);
            let params = params.with_sweep(vec![1.0, 2.0, 4.0]).unwrap();
            let v = sample(&dom, t, n, |x, s| f.value(x, s));
            let rhs = sample(&dom, t, n, |x, s| f.rhs(x, s));
            check_lemma1(&v, &rhs, &Coefficients::zero(&dom), &geom, &params, "H1").unwrap()
        };
        let coarse = run(101);
        let mid = run(201);
        let fine = run(401);
        for k in 0..3 {
            let e_coarse = (coarse.rows[k].ratio / fine.rows[k].ratio - 1.0).abs();
            let e_mid = (mid.rows[k].ratio / fine.rows[k].ratio - 1.0).abs();
            assert!(e_mid < 0.05 && e_mid < e_coarse, "s = {}: {e_coarse} {e_mid}", mid.rows[k].s);
        }
        assert!(mid.rows[2].ratio <= 10.0 * mid.rows[0].ratio);
    }

    #[test]
    fn lemma2_on_exact_heat_solution() {
        let dom = DomainSpec::interval(0.0, 1.0, 101).unwrap();
        let pgeom = ParabolicGeometry::new(&dom, FaceLabel::Right, &ParabolicOptions::default()).unwrap();
        let beta = default_parabolic_beta(&pgeom, 0.25);
        let params = WeightParams::parabolic(0.5, beta, 0.5, pgeom.d.clone()).unwrap();
        let f = ManufacturedField::P1;
        let dt = 0.5 / 200.0;
        let v = SpaceTimeField::from_fn(&dom, 0.25, dt, 201, |p, t| f.value(p[0], t));
        let rhs = SpaceTimeField::zeros(&dom, 0.25, dt, 201);
        let rep = check_lemma2(&v, &rhs, &Coefficients::zero(&dom), &pgeom, &params, (0.25, 0.75), "P1").unwrap();
        assert!(rep.rows.iter().all(|r| r.ln_rhs_source == f64::NEG_INFINITY));
        assert!(RatioCriterion::default().evaluate(&rep.rows).passed);
        let scaled = check_lemma2(&v.scaled(3.0), &rhs, &Coefficients::zero(&dom), &pgeom, &params, (0.25, 0.75), "P1").unwrap();
        for (a, b) in rep.rows.iter().zip(&scaled.rows) {
            assert!((a.ratio - b.ratio).abs() <= 1e-9 * a.ratio);
        }
    }

    #[test]
    fn absorption_hyperbolic_example() {
        let (dom, geom, params, t) = hyperbolic_setup(201, 0);
        let src = SourceSpec::from_fn(&dom, TimeFactor::affine(1.0, 1.0), |p| (PI * p[0]).sin(), 1.0);
        let diag = absorption_diagnostics_hyperbolic(&dom, &src, &geom, &params, t, 401).unwrap();
        let r = diag.ratios();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!(*r.last().unwrap() < 0.1, "ratio(64) = {}", r.last().unwrap());
        let first8 = diag.rows.iter().find(|row| (row.s - 8.0).abs() < 1e-9).map(|row| row.decay);
        if let Some(d8) = first8 {
            assert!(diag.rows.last().unwrap().decay < d8);
        }
        let constant = SourceSpec::from_fn(&dom, TimeFactor::constant(1.0), |p| (PI * p[0]).sin(), 1.0);
        let zero = absorption_diagnostics_hyperbolic(&dom, &constant, &geom, &params, t, 101).unwrap();
        assert!(zero.rows.iter().all(|row| row.ratio == 0.0));
    }

    #[test]
    fn absorption_parabolic_example() {
        let dom = DomainSpec::interval(0.0, 1.0, 201).unwrap();
        let pgeom = ParabolicGeometry::new(&dom, FaceLabel::Right, &ParabolicOptions::default()).unwrap();
        let beta = default_parabolic_beta(&pgeom, 0.25);
        let params = WeightParams::parabolic(0.5, beta, 0.5, pgeom.d.clone()).unwrap();
        let omega0 = pgeom.omega0;
        let src = SourceSpec::from_fn(
            &dom,
            TimeFactor::affine(1.0, 1.0),
            |p| if omega0.contains(p, 1, 1e-12) { 1.0 } else { 0.0 },
            1.0,
        );
        let diag = absorption_diagnostics_parabolic(&src, &pgeom, &params, (0.25, 0.75), 401).unwrap();
        let r = diag.ratios();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!(*r.last().unwrap() < 0.1, "ratio(64) = {}", r.last().unwrap());
        let doubled = absorption_diagnostics_parabolic(&src.with_f(src.f.iter().map(|v| 2.0 * v).collect()), &pgeom, &params, (0.25, 0.75), 401).unwrap();
        for (a, b) in r.iter().zip(doubled.ratios()) {
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn criterion_logic() {
        let rows = |r: &[f64]| -> Vec<CarlemanRow> {
            r.iter()
                .enumerate()
                .map(|(k, &ratio)| CarlemanRow {
                    s: [1.0, 8.0, 16.0, 32.0, 64.0][k],
                    ln_lhs: 0.0,
                    ln_rhs_source: 0.0,
                    ln_rhs_boundary: 0.0,
                    ln_rhs_timecap: 0.0,
                    ratio,
                })
                .collect()
        };
        let c = RatioCriterion::default();
        assert!(c.evaluate(&rows(&[1.0, 0.5, 0.4, 0.3, 0.2])).passed);
        assert!(!c.evaluate(&rows(&[1.0, 11.0, 0.4, 0.3, 0.2])).passed);
        assert!(!c.evaluate(&rows(&[1.0, 0.5, 0.4, 0.5, 0.2])).passed);
        assert!(c.evaluate(&rows(&[1.0, 2.0, 0.4, 0.41, 0.2])).passed);
    }
}
