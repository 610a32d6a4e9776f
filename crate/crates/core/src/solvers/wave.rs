//! Leapfrog scheme for `u_tt - Laplacian u - b . grad u - c u = R f` with
//! homogeneous Dirichlet data.

use ndarray::Array2;

use super::operator::{Coefficients, SourceSpec, SpatialOperator};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::DomainSpec;

/// Fraction of the CFL bound used when no step is prescribed.
pub const CFL_SAFETY: f64 = 0.9;

/// Largest admissible leapfrog step: `0.9 dx` in 1D, `0.9 dx / sqrt(2)` in 2D.
pub fn cfl_limit(domain: &DomainSpec) -> f64 {
    CFL_SAFETY * domain.min_spacing() / (domain.dim() as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// Uniform grid on `[0, T]` with step at most `dt_max`.
    pub fn covering(t_final: f64, dt_max: f64) -> Result<Self> {
        if !(t_final > 0.0 && dt_max > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need T > 0 and dt > 0, got T = {t_final}, dt = {dt_max}"
            )));
        }
        let n_steps = ((t_final / dt_max) - 1e-9).ceil().max(1.0) as usize;
        Ok(TimeGrid {
            dt: t_final / n_steps as f64,
            n_steps,
        })
    }
}

/// Time grid for the leapfrog scheme; a prescribed `dt` must respect the CFL bound.
pub fn wave_time_grid(domain: &DomainSpec, t_final: f64, dt: Option<f64>) -> Result<TimeGrid> {
    let limit = cfl_limit(domain);
    match dt {
        Some(dt) if dt > limit * (1.0 + 1e-12) => Err(Error::CflViolation { dt, limit }),
        Some(dt) => TimeGrid::covering(t_final, dt),
        None => TimeGrid::covering(t_final, limit),
    }
}

/// Leapfrog stepper shared by the forward solvers and the reconstruction operators.
#[derive(Clone, Debug)]
pub struct WaveStepper {
    pub op: SpatialOperator,
    pub interior: Vec<bool>,
    pub grid: TimeGrid,
}

impl WaveStepper {
    pub fn new(domain: &DomainSpec, coeffs: &Coefficients, grid: TimeGrid) -> Result<Self> {
        let op = SpatialOperator::new(domain, coeffs)?;
        let interior = (0..domain.n_nodes()).map(|i| !domain.is_boundary_node(i)).collect();
        Ok(WaveStepper { op, interior, grid })
    }

    /// `next = P(2 cur - prev + dt^2 (L cur + forcing))`.
    pub fn step(&self, prev: &[f64], cur: &[f64], forcing: Option<&[f64]>, next: &mut [f64]) {
        let dt2 = self.grid.dt * self.grid.dt;
        self.op.apply(cur, next);
        for i in 0..next.len() {
            if self.interior[i] {
                let g = forcing.map_or(0.0, |f| f[i]);
                next[i] = 2.0 * cur[i] - prev[i] + dt2 * (next[i] + g);
            } else {
                next[i] = 0.0;
            }
        }
    }

    /// Runs the scheme from `u^0`, `u^1`; `forcing(n, buf)` fills the source at level `n`.
    pub fn run(
        &self,
        domain: &DomainSpec,
        u0: Vec<f64>,
        u1: Vec<f64>,
        mut forcing: impl FnMut(usize, &mut [f64]) -> bool,
    ) -> Result<SpaceTimeField> {
        let n = domain.n_nodes();
        let nt = self.grid.n_steps + 1;
        let mut values = Array2::zeros((nt, n));
        values.row_mut(0).assign(&ndarray::ArrayView1::from(&u0));
        values.row_mut(1).assign(&ndarray::ArrayView1::from(&u1));
        let mut prev = u0;
        let mut cur = u1;
        let mut next = vec![0.0; n];
        let mut g = vec![0.0; n];
        for step in 1..self.grid.n_steps {
            let has_forcing = forcing(step, &mut g);
            self.step(&prev, &cur, has_forcing.then_some(g.as_slice()), &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::UnstableSolution { step: step + 1 });
            }
            values.row_mut(step + 1).assign(&ndarray::ArrayView1::from(&next));
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        SpaceTimeField::new(domain.clone(), 0.0, self.grid.dt, values)
    }
}

/// Zero initial data; the first step is the Taylor value `u^1 = dt^2 / 2 R(x, 0) f`.
pub fn solve_wave_ibvp(
    domain: &DomainSpec,
    coeffs: &Coefficients,
    source: &SourceSpec,
    t_final: f64,
    dt: Option<f64>,
) -> Result<SpaceTimeField> {
    check_len(domain, &source.f, "source")?;
    let grid = wave_time_grid(domain, t_final, dt)?;
    let stepper = WaveStepper::new(domain, coeffs, grid)?;
    let points = domain.points();
    let n = domain.n_nodes();
    let dt2 = grid.dt * grid.dt;
    let u1: Vec<f64> = (0..n)
        .map(|i| {
            if stepper.interior[i] {
                0.5 * dt2 * source.r.eval(&points[i], 0.0) * source.f[i]
            } else {
                0.0
            }
        })
        .collect();
    stepper.run(domain, vec![0.0; n], u1, |step, g| {
        let t = step as f64 * grid.dt;
        for i in 0..n {
            g[i] = source.r.eval(&points[i], t) * source.f[i];
        }
        true
    })
}

/// Homogeneous equation with initial data `(u0, v0)`;
/// `u^1 = u0 + dt v0 + dt^2 / 2 L u0`.
pub fn solve_wave_free(
    domain: &DomainSpec,
    coeffs: &Coefficients,
    u0: &[f64],
    v0: &[f64],
    t_final: f64,
    dt: Option<f64>,
) -> Result<SpaceTimeField> {
    check_len(domain, u0, "u0")?;
    check_len(domain, v0, "v0")?;
    let grid = wave_time_grid(domain, t_final, dt)?;
    let stepper = WaveStepper::new(domain, coeffs, grid)?;
    let n = domain.n_nodes();
    let mut lu0 = vec![0.0; n];
    stepper.op.apply(u0, &mut lu0);
    let mut start = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    for i in 0..n {
        if stepper.interior[i] {
            start[i] = u0[i];
            u1[i] = u0[i] + grid.dt * v0[i] + 0.5 * grid.dt * grid.dt * lu0[i];
        }
    }
    stepper.run(domain, start, u1, |_, _| false)
}

pub(crate) fn check_len(domain: &DomainSpec, v: &[f64], what: &str) -> Result<()> {
    if v.len() != domain.n_nodes() {
        return Err(Error::GridMismatch(format!(
            "{what} has {} values, grid has {} nodes",
            v.len(),
            domain.n_nodes()
        )));
    }
    Ok(())
}
