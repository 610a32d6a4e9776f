use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::hessian_stencil;
use crate::field::gradient_stencil;
use crate::geometry::{DomainSpec, Point};

/// Lower-order coefficients `b_j(x)` and `c(x)` sampled at the grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub b: Vec<Point>,
    pub c: Vec<f64>,
}

impl Coefficients {
    pub fn zero(domain: &DomainSpec) -> Self {
        Self::constant(domain, [0.0; 2], 0.0)
    }

    pub fn constant(domain: &DomainSpec, b: Point, c: f64) -> Self {
        let n = domain.n_nodes();
        let mut b = b;
        if domain.dim() == 1 {
            b[1] = 0.0;
        }
        Coefficients {
            b: vec![b; n],
            c: vec![c; n],
        }
    }

    pub fn from_fn(domain: &DomainSpec, f: impl Fn(&Point) -> (Point, f64)) -> Self {
        let (b, c) = domain
            .points()
            .iter()
            .map(|p| {
                let (mut b, c) = f(p);
                if domain.dim() == 1 {
                    b[1] = 0.0;
                }
                (b, c)
            })
            .unzip();
        Coefficients { b, c }
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        let n = domain.n_nodes();
        if self.b.len() != n || self.c.len() != n {
            return Err(Error::GridMismatch(format!(
                "coefficients sampled on {} / {} nodes, grid has {n}",
                self.b.len(),
                self.c.len()
            )));
        }
        let finite = self.b.iter().all(|b| b[0].is_finite() && b[1].is_finite()) && self.c.iter().all(|c| c.is_finite());
        if !finite {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().all(|b| b[0] == 0.0 && b[1] == 0.0) && self.c.iter().all(|&c| c == 0.0)
    }
}

/// Sparse `L = Laplacian + b . grad + c` acting on interior nodes; rows of
/// boundary nodes are empty (homogeneous Dirichlet).
#[derive(Clone, Debug)]
pub struct SpatialOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SpatialOperator {
    pub fn new(domain: &DomainSpec, coeffs: &Coefficients) -> Result<Self> {
        coeffs.validate(domain)?;
        let n = domain.n_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            if !domain.is_boundary_node(i) {
                let mut entries: Vec<(usize, f64)> = vec![(i, coeffs.c[i])];
                for k in 0..domain.dim() {
                    entries.extend(hessian_stencil(domain, i, k, k));
                    let bk = coeffs.b[i][k];
                    if bk != 0.0 {
                        entries.extend(gradient_stencil(domain, i, k).into_iter().map(|(j, c)| (j, bk * c)));
                    }
                }
                entries.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
                for (j, v) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += v,
                        _ => merged.push((j, v)),
                    }
                }
                for (j, v) in merged {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SpatialOperator { n, row_ptr, cols, vals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `out = L u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.row(i).map(|(j, v)| v * u[j]).sum();
        }
    }

    /// `out = L^T w`.
    pub fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &wi) in w.iter().enumerate().take(self.n) {
            if wi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * wi;
                }
            }
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

/// Space-time factor `R(x, t)` together with `dR/dt`.
#[derive(Clone)]
pub struct TimeFactor {
    pub label: String,
    r: ScalarFn,
    r_t: ScalarFn,
}

impl fmt::Debug for TimeFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeFactor").field("label", &self.label).finish()
    }
}

impl TimeFactor {
    pub fn new(label: impl Into<String>, r: ScalarFn, r_t: ScalarFn) -> Self {
        TimeFactor {
            label: label.into(),
            r,
            r_t,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(format!("{value}"), Arc::new(move |_, _| value), Arc::new(|_, _| 0.0))
    }

    /// `a + b t`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self::new(format!("{a} + {b} t"), Arc::new(move |_, t| a + b * t), Arc::new(move |_, _| b))
    }

    pub fn eval(&self, x: &Point, t: f64) -> f64 {
        (self.r)(x, t)
    }

    pub fn eval_t(&self, x: &Point, t: f64) -> f64 {
        (self.r_t)(x, t)
    }

    pub fn sample(&self, domain: &DomainSpec, t: f64) -> Vec<f64> {
        domain.points().iter().map(|p| self.eval(p, t)).collect()
    }

    pub fn sample_t(&self, domain: &DomainSpec, t: f64) -> Vec<f64> {
        domain.points().iter().map(|p| self.eval_t(p, t)).collect()
    }
}

/// Source `R(x, t) f(x)` with the positivity floor `r0` for `|R|` at the
/// reference time.
#[derive(Clone, Debug)]
pub struct SourceSpec {
    pub r: TimeFactor,
    pub f: Vec<f64>,
    pub r0: f64,
}

impl SourceSpec {
    pub fn new(r: TimeFactor, f: Vec<f64>, r0: f64) -> Self {
        SourceSpec { r, f, r0 }
    }

    pub fn from_fn(domain: &DomainSpec, r: TimeFactor, f: impl Fn(&Point) -> f64, r0: f64) -> Self {
        let f = domain.points().iter().map(f).collect();
        SourceSpec { r, f, r0 }
    }

    pub fn with_f(&self, f: Vec<f64>) -> Self {
        SourceSpec {
            r: self.r.clone(),
            f,
            r0: self.r0,
        }
    }

    /// Checks `|R(x, t)| >= r0 > 0` at every node.
    pub fn check_floor(&self, domain: &DomainSpec, t: f64) -> Result<()> {
        if !(self.r0 > 0.0) {
            return Err(Error::ConditionViolation(format!(
                "positivity floor r0 = {} must be positive",
                self.r0
            )));
        }
        for p in domain.points() {
            let v = self.r.eval(&p, t).abs();
            if !(v >= self.r0) {
                return Err(Error::ConditionViolation(format!(
                    "|R(x, {t})| >= r0 > 0 fails: |R| = {v} < r0 = {} at {p:?}",
                    self.r0
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn operator_matches_analytic_on_smooth_function() {
        let dom = DomainSpec::interval(0.0, 1.0, 201).unwrap();
        let coeffs = Coefficients::constant(&dom, [0.5, 0.0], -1.0);
        let op = SpatialOperator::new(&dom, &coeffs).unwrap();
        let u: Vec<f64> = dom.points().iter().map(|p| (2.0 * p[0]).cos()).collect();
        let mut out = vec![0.0; u.len()];
        op.apply(&u, &mut out);
        for i in dom.interior_nodes() {
            let x = dom.point(i)[0];
            let exact = -4.0 * (2.0 * x).cos() - (2.0 * x).sin() - (2.0 * x).cos();
            assert_abs_diff_eq!(out[i], exact, epsilon = 1e-3);
        }
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn transpose_is_adjoint() {
        let dom = DomainSpec::rectangle(0.0, 1.0, 0.0, 1.5, 9).unwrap();
        let coeffs = Coefficients::from_fn(&dom, |p| ([p[1], -p[0]], p[0] * p[1]));
        let op = SpatialOperator::new(&dom, &coeffs).unwrap();
        let n = dom.n_nodes();
        let u: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64).sin()).collect();
        let w: Vec<f64> = (0..n).map(|i| ((i * 3 % 11) as f64).cos()).collect();
        let (mut lu, mut ltw) = (vec![0.0; n], vec![0.0; n]);
        op.apply(&u, &mut lu);
        op.apply_transpose(&w, &mut ltw);
        let lhs: f64 = lu.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&ltw).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn floor_check() {
        let dom = DomainSpec::interval(0.0, 1.0, 11).unwrap();
        let src = SourceSpec::from_fn(&dom, TimeFactor::affine(1.0, 1.0), |_| 1.0, 0.5);
        assert!(src.check_floor(&dom, 0.0).is_ok());
        let weak = SourceSpec::from_fn(&dom, TimeFactor::affine(0.1, 1.0), |_| 1.0, 0.5);
        assert!(matches!(weak.check_floor(&dom, 0.0), Err(Error::ConditionViolation(_))));
    }
}
