//! Weighted space-time integrals, Sobolev-type norms, boundary traces and energies.
//!
//! Carleman integrals carry factors `exp(2 s phi)` whose exponents reach the
//! hundreds of thousands, so every weighted integral is accumulated as a
//! logarithm: each quadrature term is stored as `ln(w g)` and combined with a
//! shifted, compensated log-sum-exp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{apply_stencil, gradient_stencil, hessian_stencil, normal_stencil, SpaceTimeField};
use crate::geometry::{gamma_quadrature, trapezoid_weights, AxisBox, GammaPiece};
use crate::weights::WeightParams;

/// Pointwise integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    /// `|v|^2`
    Value,
    /// `|v_t|^2`
    TimeDeriv,
    /// `|grad_x v|^2`
    GradX,
    /// `|grad_x v|^2 + |v_t|^2`
    GradXT,
    /// `sum_{i,j} |v_{x_i x_j}|^2`
    Hessian,
    /// `|d_nu v|^2`, boundary strips only
    NormalDeriv,
    /// `|grad_{x,t} v|^2 + |v|^2`
    GradXTPlusValue,
    /// `|grad_x v|^2 + |v|^2`
    GradXPlusValue,
}

/// Integration region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    /// Domain (or a box inside it) times a time window.
    SpaceTime {
        window: Option<(f64, f64)>,
        subdomain: Option<AxisBox>,
    },
    /// Domain (or a box inside it) at one grid time.
    TimeSlice { t: f64, subdomain: Option<AxisBox> },
    /// Boundary pieces times a time window.
    BoundaryStrip {
        pieces: Vec<GammaPiece>,
        window: Option<(f64, f64)>,
    },
}

impl Region {
    pub fn space_time() -> Self {
        Region::SpaceTime {
            window: None,
            subdomain: None,
        }
    }

    pub fn slice(t: f64) -> Self {
        Region::TimeSlice { t, subdomain: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WeightChoice {
    /// `phi = 0`, i.e. unit weight.
    Unweighted,
    Carleman(WeightParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedIntegralSpec {
    pub integrand: Integrand,
    pub s: f64,
    pub s_power: i32,
    pub weight: WeightChoice,
    pub region: Region,
    /// Evaluate the weight at this time instead of the integration time.
    pub weight_time: Option<f64>,
}

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// `ln sum exp(x_i)` with a max shift; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + compensated_sum(values.iter().map(|&v| (v - m).exp())).ln()
}

/// One quadrature term: weight times integrand at a space-time node.
#[derive(Clone, Copy, Debug)]
struct Term {
    k: usize,
    node: usize,
    wg: f64,
}

fn window_indices(field: &SpaceTimeField, window: Option<(f64, f64)>) -> Result<(usize, usize)> {
    match window {
        None => Ok((0, field.nt() - 1)),
        Some((a, b)) => {
            let k0 = field.time_index(a)?;
            let k1 = field.time_index(b)?;
            if k1 < k0 {
                return Err(Error::GridMismatch(format!("empty window ({a}, {b})")));
            }
            Ok((k0, k1))
        }
    }
}

fn time_weights(field: &SpaceTimeField, k0: usize, k1: usize) -> Vec<f64> {
    if k1 == k0 {
        vec![1.0]
    } else {
        trapezoid_weights(k1 - k0 + 1, field.dt)
    }
}

fn spatial_weights(field: &SpaceTimeField, subdomain: &Option<AxisBox>) -> Vec<(usize, f64)> {
    let dom = &field.domain;
    let w = dom.quadrature_weights();
    (0..dom.n_nodes())
        .filter(|&i| match subdomain {
            None => true,
            Some(bx) => bx.contains(&dom.point(i), dom.dim(), 1e-12),
        })
        .map(|i| (i, w[i]))
        .collect()
}

/// Lazily computed derivative data for a field.
struct Derivatives<'a> {
    field: &'a SpaceTimeField,
    vt: Option<SpaceTimeField>,
}

impl<'a> Derivatives<'a> {
    fn new(field: &'a SpaceTimeField, integrand: Integrand) -> Result<Self> {
        let needs_t = matches!(
            integrand,
            Integrand::TimeDeriv | Integrand::GradXT | Integrand::GradXTPlusValue
        );
        let vt = if needs_t { Some(field.time_derivative()?) } else { None };
        Ok(Derivatives { field, vt })
    }

    fn grad_sq(&self, k: usize, i: usize) -> f64 {
        let u = self.field.slice(k);
        (0..self.field.domain.dim())
            .map(|a| apply_stencil(&gradient_stencil(&self.field.domain, i, a), u).powi(2))
            .sum()
    }

    fn eval(&self, integrand: Integrand, k: usize, i: usize, face: Option<crate::geometry::FaceLabel>) -> f64 {
        let v = self.field.values[[k, i]];
        let vt = || self.vt.as_ref().map_or(0.0, |f| f.values[[k, i]]);
        match integrand {
            Integrand::Value => v * v,
            Integrand::TimeDeriv => vt().powi(2),
            Integrand::GradX => self.grad_sq(k, i),
            Integrand::GradXT => self.grad_sq(k, i) + vt().powi(2),
            Integrand::GradXTPlusValue => self.grad_sq(k, i) + vt().powi(2) + v * v,
            Integrand::GradXPlusValue => self.grad_sq(k, i) + v * v,
            Integrand::Hessian => {
                let dom = &self.field.domain;
                let u = self.field.slice(k);
                let mut acc = 0.0;
                for a in 0..dom.dim() {
                    for b in 0..dom.dim() {
                        acc += apply_stencil(&hessian_stencil(dom, i, a, b), u).powi(2);
                    }
                }
                acc
            }
            Integrand::NormalDeriv => match face {
                Some(f) => apply_stencil(&normal_stencil(&self.field.domain, i, f), self.field.slice(k)).powi(2),
                None => 0.0,
            },
        }
    }
}

fn terms(field: &SpaceTimeField, integrand: Integrand, region: &Region) -> Result<Vec<Term>> {
    let der = Derivatives::new(field, integrand)?;
    let mut out = Vec::new();
    match region {
        Region::SpaceTime { window, subdomain } => {
            if integrand == Integrand::NormalDeriv {
                return Err(Error::InvalidInput("normal derivative needs a boundary strip".into()));
            }
            let (k0, k1) = window_indices(field, *window)?;
            let tw = time_weights(field, k0, k1);
            let sw = spatial_weights(field, subdomain);
            for (kk, &wt) in tw.iter().enumerate() {
                let k = k0 + kk;
                for &(i, ws) in &sw {
                    out.push(Term {
                        k,
                        node: i,
                        wg: wt * ws * der.eval(integrand, k, i, None),
                    });
                }
            }
        }
        Region::TimeSlice { t, subdomain } => {
            if integrand == Integrand::NormalDeriv {
                return Err(Error::InvalidInput("normal derivative needs a boundary strip".into()));
            }
            let k = field.time_index(*t)?;
            for (i, ws) in spatial_weights(field, subdomain) {
                out.push(Term {
                    k,
                    node: i,
                    wg: ws * der.eval(integrand, k, i, None),
                });
            }
        }
        Region::BoundaryStrip { pieces, window } => {
            let quad = gamma_quadrature(&field.domain, pieces);
            if quad.is_empty() {
                return Err(Error::EmptyGamma);
            }
            let (k0, k1) = window_indices(field, *window)?;
            let tw = time_weights(field, k0, k1);
            for (kk, &wt) in tw.iter().enumerate() {
                let k = k0 + kk;
                for &(face, i, ws) in &quad {
                    out.push(Term {
                        k,
                        node: i,
                        wg: wt * ws * der.eval(integrand, k, i, Some(face)),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Unweighted integral of an integrand over a region.
pub fn integrate(field: &SpaceTimeField, integrand: Integrand, region: &Region) -> Result<f64> {
    Ok(compensated_sum(terms(field, integrand, region)?.into_iter().map(|t| t.wg)))
}

/// Integral prepared for repeated evaluation over many values of `s`:
/// stores `ln(w g)` and `phi` per quadrature node.
#[derive(Clone, Debug)]
pub struct PreparedIntegral {
    ln_wg: Vec<f64>,
    phi: Vec<f64>,
}

impl PreparedIntegral {
    pub fn new(
        field: &SpaceTimeField,
        integrand: Integrand,
        region: &Region,
        weight: &WeightChoice,
        weight_time: Option<f64>,
    ) -> Result<Self> {
        let terms = terms(field, integrand, region)?;
        let points = field.domain.points();
        let mut ln_wg = Vec::with_capacity(terms.len());
        let mut phi = Vec::with_capacity(terms.len());
        for t in terms {
            if !(t.wg > 0.0) {
                continue;
            }
            let p = match weight {
                WeightChoice::Unweighted => 0.0,
                WeightChoice::Carleman(w) => w.eval_phi(&points[t.node], weight_time.unwrap_or_else(|| field.time(t.k)))?,
            };
            ln_wg.push(t.wg.ln());
            phi.push(p);
        }
        Ok(PreparedIntegral { ln_wg, phi })
    }

    pub fn is_zero(&self) -> bool {
        self.ln_wg.is_empty()
    }

    /// `ln(s^power * sum w g exp(2 s phi))`.
    pub fn ln_value(&self, s: f64, s_power: i32) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let exps: Vec<f64> = self
            .ln_wg
            .iter()
            .zip(&self.phi)
            .map(|(l, p)| l + 2.0 * s * p)
            .collect();
        log_sum_exp(&exps) + s_power as f64 * s.ln()
    }
}

/// Logarithm of the weighted integral (`-inf` when the integrand vanishes).
pub fn ln_weighted_integral(field: &SpaceTimeField, spec: &WeightedIntegralSpec) -> Result<f64> {
    if !(spec.s > 0.0) {
        return Err(Error::InvalidInput(format!("s must be positive, got {}", spec.s)));
    }
    let prepared = PreparedIntegral::new(field, spec.integrand, &spec.region, &spec.weight, spec.weight_time)?;
    Ok(prepared.ln_value(spec.s, spec.s_power))
}

/// `s^power * integral of integrand * exp(2 s phi)` by the trapezoidal rule.
pub fn weighted_integral(field: &SpaceTimeField, spec: &WeightedIntegralSpec) -> Result<f64> {
    Ok(ln_weighted_integral(field, spec)?.exp())
}

/// Discrete `L^2(Gamma x window)` norm of `d_nu u`, or of `d_t d_nu u`.
pub fn boundary_flux_norm(
    field: &SpaceTimeField,
    gamma: &[GammaPiece],
    window: Option<(f64, f64)>,
    differentiate_t: bool,
) -> Result<f64> {
    if gamma.is_empty() {
        return Err(Error::EmptyGamma);
    }
    let region = Region::BoundaryStrip {
        pieces: gamma.to_vec(),
        window,
    };
    let val = if differentiate_t {
        integrate(&field.time_derivative()?, Integrand::NormalDeriv, &region)?
    } else {
        integrate(field, Integrand::NormalDeriv, &region)?
    };
    Ok(val.max(0.0).sqrt())
}

/// `E(t) = integral of |grad_{x,t} u|^2` at time level `k`.
pub fn energy(field: &SpaceTimeField, k: usize) -> Result<f64> {
    integrate(field, Integrand::GradXT, &Region::slice(field.time(k)))
}

/// Energy at every time level.
pub fn energy_history(field: &SpaceTimeField) -> Result<Vec<f64>> {
    let ut = field.time_derivative()?;
    let w = field.domain.quadrature_weights();
    let dom = &field.domain;
    Ok((0..field.nt())
        .map(|k| {
            let u = field.slice(k);
            compensated_sum((0..dom.n_nodes()).map(|i| {
                let g: f64 = (0..dom.dim())
                    .map(|a| apply_stencil(&gradient_stencil(dom, i, a), u).powi(2))
                    .sum();
                w[i] * (g + ut.values[[k, i]].powi(2))
            }))
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    H1Semi,
    H1,
    H2,
    /// `H^1` in time with values in `L^2`.
    H1tL2x,
    /// `L^2` in time with values in `H^2`.
    L2tH2x,
    /// `H^2` in time with values in `H^1`.
    H2tH1x,
    /// `H^1` in time with values in `H^2`.
    H1tH2x,
}

/// Finite-difference realization of a norm over `subdomain x window`. For a
/// single-slice field the time integral is omitted. Spatial norms on a
/// multi-level field integrate over time as well (`L^2` in time).
pub fn sobolev_norm(
    field: &SpaceTimeField,
    kind: NormKind,
    subdomain: Option<AxisBox>,
    window: Option<(f64, f64)>,
) -> Result<f64> {
    let region = Region::SpaceTime { window, subdomain };
    let h_parts = |f: &SpaceTimeField, order: usize| -> Result<f64> {
        let mut acc = integrate(f, Integrand::Value, &region)?;
        if order >= 1 {
            acc += integrate(f, Integrand::GradX, &region)?;
        }
        if order >= 2 {
            acc += integrate(f, Integrand::Hessian, &region)?;
        }
        Ok(acc)
    };
    let sq = match kind {
        NormKind::L2 => h_parts(field, 0)?,
        NormKind::H1Semi => integrate(field, Integrand::GradX, &region)?,
        NormKind::H1 => h_parts(field, 1)?,
        NormKind::H2 | NormKind::L2tH2x => h_parts(field, 2)?,
        NormKind::H1tL2x => h_parts(field, 0)? + integrate(field, Integrand::TimeDeriv, &region)?,
        NormKind::H2tH1x => {
            let ut = field.time_derivative()?;
            let utt = ut.time_derivative()?;
            h_parts(field, 1)? + h_parts(&ut, 1)? + h_parts(&utt, 1)?
        }
        NormKind::H1tH2x => {
            let ut = field.time_derivative()?;
            h_parts(field, 2)? + h_parts(&ut, 2)?
        }
    };
    Ok(sq.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, FaceLabel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_field(nx: usize, nt: usize, f: impl Fn(f64, f64) -> f64) -> SpaceTimeField {
        let dom = DomainSpec::interval(0.0, 1.0, nx).unwrap();
        SpaceTimeField::from_fn(&dom, 0.0, 1.0 / (nt - 1) as f64, nt, |p, t| f(p[0], t))
    }

    fn spec(integrand: Integrand, weight: WeightChoice, s: f64) -> WeightedIntegralSpec {
        WeightedIntegralSpec {
            integrand,
            s,
            s_power: 0,
            weight,
            region: Region::space_time(),
            weight_time: None,
        }
    }

    #[test]
    fn basic_values() {
        let zero = unit_field(11, 11, |_, _| 0.0);
        assert_eq!(weighted_integral(&zero, &spec(Integrand::Value, WeightChoice::Unweighted, 1.0)).unwrap(), 0.0);
        let one = unit_field(11, 11, |_, _| 1.0);
        assert_abs_diff_eq!(
            weighted_integral(&one, &spec(Integrand::Value, WeightChoice::Unweighted, 1.0)).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let sine = unit_field(2001, 3, |x, _| (PI * x).sin());
        assert_abs_diff_eq!(
            weighted_integral(&sine, &spec(Integrand::Value, WeightChoice::Unweighted, 1.0)).unwrap(),
            0.5,
            epsilon = 1e-6
        );
    }

    #[test]
    fn flux_norm_oracle() {
        let f = unit_field(801, 801, |x, t| (PI * x).sin() * (PI * t).cos());
        let gamma = vec![GammaPiece {
            face: FaceLabel::Right,
            range: (0.0, 0.0),
        }];
        let n = boundary_flux_norm(&f, &gamma, None, false).unwrap();
        assert_abs_diff_eq!(n, PI / 2f64.sqrt(), epsilon = 1e-3);
        let doubled = boundary_flux_norm(&f.scaled(2.0), &gamma, None, false).unwrap();
        assert_abs_diff_eq!(doubled, 2.0 * n, epsilon = 1e-12);
        assert!(matches!(boundary_flux_norm(&f, &[], None, false), Err(Error::EmptyGamma)));
    }

    #[test]
    fn energy_oracle() {
        let f = unit_field(801, 801, |x, t| (PI * x).sin() * (PI * t).cos());
        assert_abs_diff_eq!(energy(&f, 0).unwrap(), PI * PI / 2.0, epsilon = 1e-3);
        assert_eq!(energy(&unit_field(11, 11, |_, _| 0.0), 3).unwrap(), 0.0);
    }

    #[test]
    fn norm_examples() {
        let sq = DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0, 11).unwrap();
        let one = SpaceTimeField::stationary(&sq, 0.0, vec![1.0; sq.n_nodes()]).unwrap();
        assert_abs_diff_eq!(sobolev_norm(&one, NormKind::L2, None, None).unwrap(), 1.0, epsilon = 1e-14);
        let dom = DomainSpec::interval(0.0, 1.0, 2001).unwrap();
        let sine = SpaceTimeField::stationary(&dom, 0.0, dom.points().iter().map(|p| (PI * p[0]).sin()).collect()).unwrap();
        assert_abs_diff_eq!(
            sobolev_norm(&sine, NormKind::H1Semi, None, None).unwrap(),
            PI / 2f64.sqrt(),
            epsilon = 1e-5
        );
        let sub = sobolev_norm(&sine, NormKind::H2, Some(AxisBox::interval(0.5, 0.9)), None).unwrap();
        assert!(sub <= sobolev_norm(&sine, NormKind::H2, None, None).unwrap());
    }

    #[test]
    fn log_space_matches_direct_for_moderate_exponents() {
        let f = unit_field(41, 41, |x, t| x * (1.0 - x) * (1.0 + t));
        let w = WeightParams::hyperbolic(0.5, 0.8, 0.0, [-1.0, 0.0]).unwrap();
        let s = 2.0;
        let spec = WeightedIntegralSpec {
            s_power: 3,
            ..spec(Integrand::Value, WeightChoice::Carleman(w.clone()), s)
        };
        let got = weighted_integral(&f, &spec).unwrap();
        let dom = &f.domain;
        let qw = dom.quadrature_weights();
        let tw = trapezoid_weights(41, f.dt);
        let mut direct = 0.0;
        for k in 0..41 {
            for i in 0..dom.n_nodes() {
                let p = dom.point(i);
                let phi = w.eval_phi(&p, f.time(k)).unwrap();
                direct += tw[k] * qw[i] * f.values[[k, i]].powi(2) * (2.0 * s * phi).exp();
            }
        }
        assert_abs_diff_eq!(got, s.powi(3) * direct, epsilon = 1e-12 * direct * 8.0);
    }

    #[test]
    fn huge_exponents_stay_finite_in_log_space() {
        let f = unit_field(21, 21, |x, _| x);
        let w = WeightParams::hyperbolic(2.0, 0.5, 0.0, [-1.0, 0.0]).unwrap();
        let spec = spec(Integrand::Value, WeightChoice::Carleman(w), 64.0);
        let ln = ln_weighted_integral(&f, &spec).unwrap();
        assert!(ln.is_finite() && ln > 1e5);
    }

    #[test]
    fn slice_weight_maximal_at_centre() {
        let f = unit_field(21, 21, |x, _| 1.0 + x);
        let w = WeightParams::hyperbolic(0.5, 0.8, 0.5, [-1.0, 0.0]).unwrap();
        let at = |t: f64| {
            ln_weighted_integral(
                &f,
                &WeightedIntegralSpec {
                    region: Region::slice(t),
                    ..spec(Integrand::Value, WeightChoice::Carleman(w.clone()), 3.0)
                },
            )
            .unwrap()
        };
        let centre = at(0.5);
        for k in 0..21 {
            let t = k as f64 / 20.0;
            if (t - 0.5).abs() > 1e-9 {
                assert!(at(t) < centre);
            }
        }
    }

    #[test]
    fn quadrature_order_two() {
        let err = |n: usize| {
            let dom = DomainSpec::interval(0.0, 1.0, n).unwrap();
            let f = SpaceTimeField::stationary(&dom, 0.0, dom.points().iter().map(|p| p[0].exp()).collect()).unwrap();
            (integrate(&f, Integrand::Value, &Region::space_time()).unwrap() - (2f64.exp() - 1.0) / 2.0).abs()
        };
        let order = (err(41) / err(81)).log2();
        assert!(order > 1.9, "order {order}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn homogeneity(alpha in 0.1..10.0f64, s in 0.5..32.0f64) {
            let f = unit_field(21, 21, |x, t| (3.0 * x).sin() * (1.0 + t * t) + x * t);
            let w = WeightParams::hyperbolic(1.0, 0.8, 0.0, [-1.0, 0.0]).unwrap();
            for integrand in [Integrand::Value, Integrand::GradXT, Integrand::Hessian] {
                let sp = spec(integrand, WeightChoice::Carleman(w.clone()), s);
                let a = ln_weighted_integral(&f, &sp).unwrap();
                let b = ln_weighted_integral(&f.scaled(alpha), &sp).unwrap();
                prop_assert!((b - a - 2.0 * alpha.ln()).abs() < 1e-12 * a.abs().max(1.0));
            }
            for kind in [NormKind::L2, NormKind::H1, NormKind::H1tH2x] {
                let a = sobolev_norm(&f, kind, None, None).unwrap();
                let b = sobolev_norm(&f.scaled(alpha), kind, None, None).unwrap();
                prop_assert!((b - alpha * a).abs() <= 1e-12 * alpha * a);
            }
        }
    }
}
