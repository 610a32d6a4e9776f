//! Linear forward maps between weighted Euclidean spaces.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analysis::compensated_sum;
use crate::error::{Error, Result};
use crate::field::{d1_stencil, normal_stencil, NodeStencil};
use crate::geometry::{gamma_quadrature, DomainSpec, GammaPiece};

/// `A: R^n -> R^m` with inner products `<x, y>_{W_f}` and `<u, v>_{W_d}`
/// given by diagonal weights. The Hilbert adjoint is `W_f^{-1} A^T W_d`.
pub trait LinearMap: Sync {
    fn domain_dim(&self) -> usize;
    fn range_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Euclidean transpose `A^T`.
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>>;
    fn domain_weights(&self) -> &[f64];
    fn range_weights(&self) -> &[f64];

    /// `A* y = W_f^{-1} A^T W_d y`.
    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        let wd = self.range_weights();
        let weighted: Vec<f64> = y.iter().zip(wd).map(|(a, w)| a * w).collect();
        let mut out = self.apply_transpose(&weighted)?;
        for (o, w) in out.iter_mut().zip(self.domain_weights()) {
            *o /= w;
        }
        Ok(out)
    }
}

pub fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).zip(w).map(|((x, y), w)| w * x * y))
}

pub fn weighted_norm(a: &[f64], w: &[f64]) -> f64 {
    weighted_dot(a, a, w).max(0.0).sqrt()
}

pub(crate) fn check_dim(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::GridMismatch(format!("{what} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

/// Dense matrix realization, built column by column from another map.
#[derive(Clone, Debug)]
pub struct AssembledMap {
    pub matrix: Array2<f64>,
    pub wf: Vec<f64>,
    pub wd: Vec<f64>,
}

impl AssembledMap {
    pub fn from_map(map: &dyn LinearMap) -> Result<Self> {
        let n = map.domain_dim();
        let m = map.range_dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                map.apply(&e)
            })
            .collect::<Result<_>>()?;
        let mut matrix = Array2::zeros((m, n));
        for (j, c) in cols.iter().enumerate() {
            matrix.column_mut(j).assign(&ArrayView1::from(c.as_slice()));
        }
        Ok(AssembledMap {
            matrix,
            wf: map.domain_weights().to_vec(),
            wd: map.range_weights().to_vec(),
        })
    }
}

impl LinearMap for AssembledMap {
    fn domain_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn range_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.domain_dim(), "input")?;
        Ok(self.matrix.dot(&ArrayView1::from(x)).to_vec())
    }

    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(y, self.range_dim(), "data")?;
        Ok(self.matrix.t().dot(&ArrayView1::from(y)).to_vec())
    }

    fn domain_weights(&self) -> &[f64] {
        &self.wf
    }

    fn range_weights(&self) -> &[f64] {
        &self.wd
    }
}

/// Worst relative mismatch `|<A x, y> - <x, A^T y>| / (|A x| |y|)` over
/// `pairs` random Gaussian pairs (Euclidean products).
pub fn dot_product_test(map: &dyn LinearMap, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..map.domain_dim()).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..map.range_dim()).map(|_| rng.sample(StandardNormal)).collect();
        let ax = map.apply(&x)?;
        let aty = map.apply_transpose(&y)?;
        let lhs = compensated_sum(ax.iter().zip(&y).map(|(a, b)| a * b));
        let rhs = compensated_sum(x.iter().zip(&aty).map(|(a, b)| a * b));
        let scale = (ax.iter().map(|v| v * v).sum::<f64>() * y.iter().map(|v| v * v).sum::<f64>())
            .sqrt()
            .max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

/// Normal-derivative trace on observation pieces, with surface weights.
#[derive(Clone, Debug)]
pub struct TraceOperator {
    pub stencils: Vec<NodeStencil>,
    pub weights: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl TraceOperator {
    pub fn new(domain: &DomainSpec, pieces: &[GammaPiece]) -> Result<Self> {
        let quad = gamma_quadrature(domain, pieces);
        if quad.is_empty() {
            return Err(Error::EmptyGamma);
        }
        Ok(TraceOperator {
            stencils: quad.iter().map(|&(f, i, _)| normal_stencil(domain, i, f)).collect(),
            weights: quad.iter().map(|&(_, _, w)| w).collect(),
            nodes: quad.iter().map(|&(_, i, _)| i).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (o, st) in out.iter_mut().zip(&self.stencils) {
            *o = st.iter().map(|&(j, c)| c * u[j]).sum();
        }
    }

    pub fn transpose_add(&self, g: &[f64], out: &mut [f64]) {
        for (gv, st) in g.iter().zip(&self.stencils) {
            for &(j, c) in st {
                out[j] += c * gv;
            }
        }
    }
}

/// `d/dt` applied to a time-major series of `nt` blocks of width `width`.
pub fn time_derivative_series(series: &[f64], nt: usize, width: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; series.len()];
    for k in 0..nt {
        let (idx, c) = d1_stencil(k, nt, dt);
        for (&m, &cm) in idx.iter().zip(&c) {
            for j in 0..width {
                out[k * width + j] += cm * series[m * width + j];
            }
        }
    }
    out
}

/// Transpose of [`time_derivative_series`].
pub fn time_derivative_series_transpose(g: &[f64], nt: usize, width: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for k in 0..nt {
        let (idx, c) = d1_stencil(k, nt, dt);
        for (&m, &cm) in idx.iter().zip(&c) {
            for j in 0..width {
                out[m * width + j] += cm * g[k * width + j];
            }
        }
    }
    out
}

/// Trapezoidal weights in time times surface weights, time-major.
pub fn strip_weights(trace: &TraceOperator, nt: usize, dt: f64) -> Vec<f64> {
    let tw = crate::geometry::trapezoid_weights(nt, dt);
    let mut out = Vec::with_capacity(nt * trace.len());
    for w_t in tw {
        for &w_s in &trace.weights {
            out.push(w_t * w_s);
        }
    }
    out
}

/// Scatter interior values into a full node vector.
pub(crate) fn scatter(interior: &[usize], x: &[f64], n: usize) -> Vec<f64> {
    let mut full = vec![0.0; n];
    for (&i, &v) in interior.iter().zip(x) {
        full[i] = v;
    }
    full
}

pub(crate) fn gather(interior: &[usize], full: &[f64]) -> Vec<f64> {
    interior.iter().map(|&i| full[i]).collect()
}
