//! Backward Euler for `u_t - Laplacian u - b . grad u - c u = R f` with
//! homogeneous Dirichlet data.

use ndarray::Array2;

use super::banded::BandMatrix;
use super::operator::{Coefficients, SourceSpec, SpatialOperator};
use super::wave::{check_len, TimeGrid};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::geometry::DomainSpec;

/// Factored `K = I - dt L` (identity rows on the boundary).
#[derive(Clone, Debug)]
pub struct HeatStepper {
    pub interior: Vec<bool>,
    pub grid: TimeGrid,
    lu: BandMatrix,
}

impl HeatStepper {
    pub fn new(domain: &DomainSpec, coeffs: &Coefficients, grid: TimeGrid) -> Result<Self> {
        let op = SpatialOperator::new(domain, coeffs)?;
        let n = domain.n_nodes();
        let bw = if domain.dim() == 1 { 1 } else { domain.nx };
        let mut k = BandMatrix::zeros(n, bw);
        let interior: Vec<bool> = (0..n).map(|i| !domain.is_boundary_node(i)).collect();
        for (i, &inside) in interior.iter().enumerate() {
            k.add(i, i, 1.0)?;
            if inside {
                for (j, v) in op.row(i) {
                    k.add(i, j, -grid.dt * v)?;
                }
            }
        }
        k.factor()?;
        Ok(HeatStepper { interior, grid, lu: k })
    }

    /// Overwrites `rhs` with `K^{-1} rhs`.
    pub fn solve(&self, rhs: &mut [f64]) -> Result<()> {
        self.lu.solve(rhs)
    }

    /// Overwrites `rhs` with `K^{-T} rhs`.
    pub fn solve_transpose(&self, rhs: &mut [f64]) -> Result<()> {
        self.lu.solve_transpose(rhs)
    }
}

/// Solution `u` and its time derivative `z = u_t`.
#[derive(Clone, Debug)]
pub struct HeatSolution {
    pub u: SpaceTimeField,
    pub z: SpaceTimeField,
}

/// Steps `(I - dt L) u^{n+1} = u^n + dt R(t_{n+1}) f`. The step is reduced
/// so that it divides `T`.
pub fn solve_heat(
    domain: &DomainSpec,
    coeffs: &Coefficients,
    source: Option<&SourceSpec>,
    u0: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<HeatSolution> {
    check_len(domain, u0, "u0")?;
    if let Some(src) = source {
        check_len(domain, &src.f, "source")?;
    }
    let grid = TimeGrid::covering(t_final, dt)?;
    let stepper = HeatStepper::new(domain, coeffs, grid)?;
    let n = domain.n_nodes();
    let points = domain.points();
    let nt = grid.n_steps + 1;
    let mut values = Array2::zeros((nt, n));
    let mut cur: Vec<f64> = (0..n).map(|i| if stepper.interior[i] { u0[i] } else { 0.0 }).collect();
    values.row_mut(0).assign(&ndarray::ArrayView1::from(&cur));
    for step in 0..grid.n_steps {
        let t = (step + 1) as f64 * grid.dt;
        if let Some(src) = source {
            for i in 0..n {
                if stepper.interior[i] {
                    cur[i] += grid.dt * src.r.eval(&points[i], t) * src.f[i];
                }
            }
        }
        stepper.solve(&mut cur)?;
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::UnstableSolution { step: step + 1 });
        }
        values.row_mut(step + 1).assign(&ndarray::ArrayView1::from(&cur));
    }
    let u = SpaceTimeField::new(domain.clone(), 0.0, grid.dt, values)?;
    let z = u.time_derivative()?;
    Ok(HeatSolution { u, z })
}
