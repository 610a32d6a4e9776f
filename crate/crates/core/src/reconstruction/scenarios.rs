//! Discrete forward maps of the three inverse problems and their exact
//! transposes (discrete adjoint recursions of the time-stepping schemes).

use crate::error::{Error, Result};
use crate::field::{gradient_stencil, hessian_stencil, NodeStencil, SpaceTimeField};
use crate::geometry::{DomainSpec, GammaPiece};
use crate::solvers::{wave_time_grid, Coefficients, HeatStepper, TimeFactor, TimeGrid, WaveStepper};

use super::map::{
    check_dim, gather, scatter, strip_weights, time_derivative_series, time_derivative_series_transpose, LinearMap,
    TraceOperator,
};

fn sample_levels(domain: &DomainSpec, r: &TimeFactor, grid: &TimeGrid) -> Vec<Vec<f64>> {
    (0..=grid.n_steps)
        .map(|k| r.sample(domain, k as f64 * grid.dt))
        .collect()
}

fn interior_weights(domain: &DomainSpec, interior: &[usize]) -> Vec<f64> {
    let w = domain.quadrature_weights();
    interior.iter().map(|&i| w[i]).collect()
}

/// `f -> d_t d_nu u` on `Gamma x [0, T]` for the leapfrog discretization of
/// `u_tt = L u + R f`, `u(0) = u_t(0) = 0`. Unknowns are the values of `f` at
/// interior nodes.
#[derive(Clone, Debug)]
pub struct WaveBoundaryMap {
    pub domain: DomainSpec,
    pub stepper: WaveStepper,
    pub interior: Vec<usize>,
    pub trace: TraceOperator,
    r: Vec<Vec<f64>>,
    wf: Vec<f64>,
    wd: Vec<f64>,
}

impl WaveBoundaryMap {
    pub fn new(
        domain: &DomainSpec,
        coeffs: &Coefficients,
        r: &TimeFactor,
        gamma: &[GammaPiece],
        t_final: f64,
        dt: Option<f64>,
    ) -> Result<Self> {
        let grid = wave_time_grid(domain, t_final, dt)?;
        let stepper = WaveStepper::new(domain, coeffs, grid)?;
        let interior = domain.interior_nodes();
        let trace = TraceOperator::new(domain, gamma)?;
        let wd = strip_weights(&trace, grid.n_steps + 1, grid.dt);
        Ok(WaveBoundaryMap {
            domain: domain.clone(),
            wf: interior_weights(domain, &interior),
            r: sample_levels(domain, r, &grid),
            stepper,
            interior,
            trace,
            wd,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.stepper.grid
    }

    pub fn nt(&self) -> usize {
        self.stepper.grid.n_steps + 1
    }

    /// Full-node source vector from interior unknowns.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        scatter(&self.interior, x, self.domain.n_nodes())
    }

    /// Interior unknowns from a full-node vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        gather(&self.interior, full)
    }

    /// Normal-derivative traces (time-major) of the discrete solution.
    fn traces(&self, x: &[f64]) -> Vec<f64> {
        let n = self.domain.n_nodes();
        let ng = self.trace.len();
        let nt = self.nt();
        let dt2 = self.stepper.grid.dt.powi(2);
        let f = self.expand(x);
        let mut traces = vec![0.0; nt * ng];
        let mut prev = vec![0.0; n];
        let mut cur: Vec<f64> = (0..n)
            .map(|i| {
                if self.stepper.interior[i] {
                    0.5 * dt2 * self.r[0][i] * f[i]
                } else {
                    0.0
                }
            })
            .collect();
        self.trace.apply(&cur, &mut traces[ng..2 * ng]);
        let mut next = vec![0.0; n];
        let mut g = vec![0.0; n];
        for step in 1..self.stepper.grid.n_steps {
            for i in 0..n {
                g[i] = self.r[step][i] * f[i];
            }
            self.stepper.step(&prev, &cur, Some(&g), &mut next);
            self.trace.apply(&next, &mut traces[(step + 1) * ng..(step + 2) * ng]);
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        traces
    }
}

impl LinearMap for WaveBoundaryMap {
    fn domain_dim(&self) -> usize {
        self.interior.len()
    }

    fn range_dim(&self) -> usize {
        self.nt() * self.trace.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.domain_dim(), "source")?;
        let traces = self.traces(x);
        Ok(time_derivative_series(&traces, self.nt(), self.trace.len(), self.stepper.grid.dt))
    }

    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(y, self.range_dim(), "data")?;
        let n = self.domain.n_nodes();
        let ng = self.trace.len();
        let nt = self.nt();
        let dt = self.stepper.grid.dt;
        let dt2 = dt * dt;
        let tau = time_derivative_series_transpose(y, nt, ng, dt);
        let interior = &self.stepper.interior;
        let project = |v: &mut [f64]| {
            for (i, x) in v.iter_mut().enumerate() {
                if !interior[i] {
                    *x = 0.0;
                }
            }
        };
        // p1 = P p^{n+1}, p2 = P p^{n+2}
        let mut p1 = vec![0.0; n];
        let mut p2 = vec![0.0; n];
        let mut lt = vec![0.0; n];
        let mut grad = vec![0.0; n];
        for level in (1..nt).rev() {
            let mut p = vec![0.0; n];
            self.trace.transpose_add(&tau[level * ng..(level + 1) * ng], &mut p);
            self.stepper.op.apply_transpose(&p1, &mut lt);
            for i in 0..n {
                p[i] += 2.0 * p1[i] + dt2 * lt[i] - p2[i];
            }
            project(&mut p);
            let (coef, r) = if level == 1 {
                (0.5 * dt2, &self.r[0])
            } else {
                (dt2, &self.r[level - 1])
            };
            for i in 0..n {
                grad[i] += coef * r[i] * p[i];
            }
            p2 = std::mem::replace(&mut p1, p);
        }
        project(&mut grad);
        Ok(self.restrict(&grad))
    }

    fn domain_weights(&self) -> &[f64] {
        &self.wf
    }

    fn range_weights(&self) -> &[f64] {
        &self.wd
    }
}

/// Layout of the parabolic-local data vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalDataLayout {
    /// `d_nu d_t u` on `Gamma x [0, T]`, time-major.
    pub flux: usize,
    /// `u(t0)` at every node.
    pub value: usize,
    /// `d_a u(t0)` for every axis `a`.
    pub gradient: usize,
    /// `d_a d_b u(t0)` for every pair `(a, b)`.
    pub hessian: usize,
}

impl LocalDataLayout {
    pub fn total(&self) -> usize {
        self.flux + self.value + self.gradient + self.hessian
    }
}

/// `f -> (d_nu d_t u on Gamma x [0, T], u(t0), grad u(t0), Hessian u(t0))` for
/// backward Euler applied to `u_t = L u + R f`, `u(0) = 0`. The squared data
/// norm is `|d_nu d_t u|^2_{L^2(Gamma x (0,T))} + |u(t0)|^2_{H^2}`.
#[derive(Clone, Debug)]
pub struct ParabolicLocalMap {
    pub domain: DomainSpec,
    pub stepper: HeatStepper,
    pub interior: Vec<usize>,
    pub trace: TraceOperator,
    pub k0: usize,
    r: Vec<Vec<f64>>,
    grad_st: Vec<Vec<NodeStencil>>,
    hess_st: Vec<Vec<NodeStencil>>,
    layout: LocalDataLayout,
    wf: Vec<f64>,
    wd: Vec<f64>,
}

/// Index of `t` on a uniform grid, or an error if it is not a grid time.
pub(crate) fn grid_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    let k = (t / grid.dt).round();
    if (k * grid.dt - t).abs() > 1e-9 * grid.dt.max(1.0) || k < 0.0 || k as usize > grid.n_steps {
        return Err(Error::GridMismatch(format!(
            "t = {t} is not a level of the time grid with step {}",
            grid.dt
        )));
    }
    Ok(k as usize)
}

impl ParabolicLocalMap {
    pub fn new(
        domain: &DomainSpec,
        coeffs: &Coefficients,
        r: &TimeFactor,
        gamma: &[GammaPiece],
        t_final: f64,
        dt: f64,
        t0: f64,
    ) -> Result<Self> {
        let grid = TimeGrid::covering(t_final, dt)?;
        let k0 = grid_index(&grid, t0)?;
        let stepper = HeatStepper::new(domain, coeffs, grid)?;
        let interior = domain.interior_nodes();
        let trace = TraceOperator::new(domain, gamma)?;
        let n = domain.n_nodes();
        let dim = domain.dim();
        let grad_st: Vec<Vec<NodeStencil>> = (0..dim)
            .map(|a| (0..n).map(|i| gradient_stencil(domain, i, a)).collect())
            .collect();
        let mut hess_st = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                hess_st.push((0..n).map(|i| hessian_stencil(domain, i, a, b)).collect());
            }
        }
        let nt = grid.n_steps + 1;
        let layout = LocalDataLayout {
            flux: nt * trace.len(),
            value: n,
            gradient: dim * n,
            hessian: dim * dim * n,
        };
        let q = domain.quadrature_weights();
        let mut wd = strip_weights(&trace, nt, grid.dt);
        for _ in 0..(1 + dim + dim * dim) {
            wd.extend_from_slice(&q);
        }
        Ok(ParabolicLocalMap {
            domain: domain.clone(),
            wf: interior_weights(domain, &interior),
            r: sample_levels(domain, r, &grid),
            stepper,
            interior,
            trace,
            k0,
            grad_st,
            hess_st,
            layout,
            wd,
        })
    }

    pub fn layout(&self) -> LocalDataLayout {
        self.layout
    }

    pub fn nt(&self) -> usize {
        self.stepper.grid.n_steps + 1
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        scatter(&self.interior, x, self.domain.n_nodes())
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        gather(&self.interior, full)
    }
}

impl LinearMap for ParabolicLocalMap {
    fn domain_dim(&self) -> usize {
        self.interior.len()
    }

    fn range_dim(&self) -> usize {
        self.layout.total()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.domain_dim(), "source")?;
        let n = self.domain.n_nodes();
        let ng = self.trace.len();
        let nt = self.nt();
        let dt = self.stepper.grid.dt;
        let f = self.expand(x);
        let mut traces = vec![0.0; nt * ng];
        let mut u = vec![0.0; n];
        let mut u_t0 = vec![0.0; n];
        for step in 0..self.stepper.grid.n_steps {
            for i in 0..n {
                if self.stepper.interior[i] {
                    u[i] += dt * self.r[step + 1][i] * f[i];
                }
            }
            self.stepper.solve(&mut u)?;
            self.trace.apply(&u, &mut traces[(step + 1) * ng..(step + 2) * ng]);
            if step + 1 == self.k0 {
                u_t0.copy_from_slice(&u);
            }
        }
        let mut out = time_derivative_series(&traces, nt, ng, dt);
        out.extend_from_slice(&u_t0);
        for st in self.grad_st.iter().chain(&self.hess_st) {
            out.extend(st.iter().map(|s| s.iter().map(|&(j, c)| c * u_t0[j]).sum::<f64>()));
        }
        Ok(out)
    }

    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(y, self.range_dim(), "data")?;
        let n = self.domain.n_nodes();
        let ng = self.trace.len();
        let nt = self.nt();
        let dt = self.stepper.grid.dt;
        let l = self.layout;
        let tau = time_derivative_series_transpose(&y[..l.flux], nt, ng, dt);
        let mut q_t0 = y[l.flux..l.flux + n].to_vec();
        let mut offset = l.flux + n;
        for st in self.grad_st.iter().chain(&self.hess_st) {
            for (i, s) in st.iter().enumerate() {
                let g = y[offset + i];
                for &(j, c) in s {
                    q_t0[j] += c * g;
                }
            }
            offset += n;
        }
        let q = |level: usize| {
            let mut v = vec![0.0; n];
            self.trace.transpose_add(&tau[level * ng..(level + 1) * ng], &mut v);
            if level == self.k0 {
                for (a, b) in v.iter_mut().zip(&q_t0) {
                    *a += b;
                }
            }
            v
        };
        let mut a = q(nt - 1);
        let mut grad = vec![0.0; n];
        for level in (0..nt - 1).rev() {
            let mut b = a;
            self.stepper.solve_transpose(&mut b)?;
            for i in 0..n {
                if self.stepper.interior[i] {
                    grad[i] += dt * self.r[level + 1][i] * b[i];
                }
            }
            a = q(level);
            for (x, bv) in a.iter_mut().zip(&b) {
                *x += bv;
            }
        }
        Ok(self.restrict(&grad))
    }

    fn domain_weights(&self) -> &[f64] {
        &self.wf
    }

    fn range_weights(&self) -> &[f64] {
        &self.wd
    }
}

/// `u0 -> d_nu u` on `Gamma x [0, T]` for the homogeneous backward-Euler heat
/// flow with zero Dirichlet data; unknowns are the interior values of `u0`.
#[derive(Clone, Debug)]
pub struct CauchyMap {
    pub domain: DomainSpec,
    pub stepper: HeatStepper,
    pub interior: Vec<usize>,
    pub trace: TraceOperator,
    wf: Vec<f64>,
    wd: Vec<f64>,
}

impl CauchyMap {
    pub fn new(domain: &DomainSpec, coeffs: &Coefficients, gamma: &[GammaPiece], t_final: f64, dt: f64) -> Result<Self> {
        let grid = TimeGrid::covering(t_final, dt)?;
        let stepper = HeatStepper::new(domain, coeffs, grid)?;
        let interior = domain.interior_nodes();
        let trace = TraceOperator::new(domain, gamma)?;
        let wd = strip_weights(&trace, grid.n_steps + 1, grid.dt);
        Ok(CauchyMap {
            domain: domain.clone(),
            wf: interior_weights(domain, &interior),
            stepper,
            interior,
            trace,
            wd,
        })
    }

    pub fn nt(&self) -> usize {
        self.stepper.grid.n_steps + 1
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        scatter(&self.interior, x, self.domain.n_nodes())
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        gather(&self.interior, full)
    }

    /// The discrete heat flow started from the interior values `x`.
    pub fn solution(&self, x: &[f64]) -> Result<SpaceTimeField> {
        check_dim(x, self.domain_dim(), "initial state")?;
        let n = self.domain.n_nodes();
        let mut values = ndarray::Array2::zeros((self.nt(), n));
        let mut u = self.expand(x);
        values.row_mut(0).assign(&ndarray::ArrayView1::from(&u));
        for step in 0..self.stepper.grid.n_steps {
            self.stepper.solve(&mut u)?;
            values.row_mut(step + 1).assign(&ndarray::ArrayView1::from(&u));
        }
        SpaceTimeField::new(self.domain.clone(), 0.0, self.stepper.grid.dt, values)
    }
}

impl LinearMap for CauchyMap {
    fn domain_dim(&self) -> usize {
        self.interior.len()
    }

    fn range_dim(&self) -> usize {
        self.nt() * self.trace.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.domain_dim(), "initial state")?;
        let ng = self.trace.len();
        let mut out = vec![0.0; self.range_dim()];
        let mut u = self.expand(x);
        self.trace.apply(&u, &mut out[..ng]);
        for step in 0..self.stepper.grid.n_steps {
            self.stepper.solve(&mut u)?;
            self.trace.apply(&u, &mut out[(step + 1) * ng..(step + 2) * ng]);
        }
        Ok(out)
    }

    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(y, self.range_dim(), "data")?;
        let n = self.domain.n_nodes();
        let ng = self.trace.len();
        let nt = self.nt();
        let mut a = vec![0.0; n];
        self.trace.transpose_add(&y[(nt - 1) * ng..], &mut a);
        for level in (0..nt - 1).rev() {
            self.stepper.solve_transpose(&mut a)?;
            self.trace.transpose_add(&y[level * ng..(level + 1) * ng], &mut a);
        }
        Ok(self.restrict(&a))
    }

    fn domain_weights(&self) -> &[f64] {
        &self.wf
    }

    fn range_weights(&self) -> &[f64] {
        &self.wd
    }
}
