//! Tikhonov-regularized least squares by conjugate gradients on the normal
//! equations, discrepancy-principle parameter choice and synthetic noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::map::{check_dim, weighted_dot, weighted_norm, LinearMap};
use crate::error::{Error, Result};

/// Which inverse problem a data vector belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// `d_t d_nu u` on `Gamma x (0, T)` for the wave equation.
    HyperbolicBoundary,
    /// Flux of `u_t` on `Gamma` plus the full state at `t0`, heat equation.
    ParabolicLocal,
    /// Initial state from the lateral flux of the homogeneous heat flow.
    Cauchy,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::HyperbolicBoundary => "hyperbolic-boundary",
            Scenario::ParabolicLocal => "parabolic-local",
            Scenario::Cauchy => "cauchy",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseProblemSpec {
    pub scenario: Scenario,
    pub alpha: f64,
    pub max_iterations: usize,
    /// Relative residual `|r|/|A* d|` at which CG stops.
    pub tolerance: f64,
    /// Fail with `MaxIterationsExceeded` instead of returning the flagged best iterate.
    pub strict: bool,
}

impl InverseProblemSpec {
    pub fn new(scenario: Scenario, alpha: f64) -> Self {
        InverseProblemSpec {
            scenario,
            alpha,
            max_iterations: 2000,
            tolerance: 1e-12,
            strict: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("regularization alpha = {} must be >= 0", self.alpha)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance = {} must be > 0", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub f: Vec<f64>,
    pub alpha: f64,
    /// `|A* d - (A*A + alpha) x_k|_{W_f}` for k = 0, 1, ...
    pub residuals: Vec<f64>,
    /// Quadratic functional `1/2 <x, N x> - <b, x>`; nonincreasing for exact CG.
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `|A f - d|_{W_d}`.
    pub misfit: f64,
}

impl ReconstructionResult {
    /// Largest relative increase of the CG energy between consecutive iterates.
    pub fn energy_increase(&self) -> f64 {
        let scale = self.energies.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(f64::MIN_POSITIVE);
        self.energies
            .windows(2)
            .map(|w| (w[1] - w[0]) / scale)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,residual,energy")?;
        for (k, (r, e)) in self.residuals.iter().zip(&self.energies).enumerate() {
            writeln!(w, "{k},{r:.17e},{e:.17e}")?;
        }
        Ok(())
    }
}

/// Solves `(A*A + alpha I) f = A* d` by CG in the `W_f` inner product.
pub fn reconstruct(map: &dyn LinearMap, data: &[f64], spec: &InverseProblemSpec) -> Result<ReconstructionResult> {
    spec.validate()?;
    check_dim(data, map.range_dim(), "data")?;
    let wf = map.domain_weights();
    let n = map.domain_dim();
    let alpha = spec.alpha;
    let normal = |x: &[f64]| -> Result<Vec<f64>> {
        let mut y = map.adjoint(&map.apply(x)?)?;
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
        Ok(y)
    };
    let b = map.adjoint(data)?;
    let b_norm = weighted_norm(&b, wf);
    let mut x = vec![0.0; n];
    let mut result = ReconstructionResult {
        f: x.clone(),
        alpha,
        residuals: vec![b_norm],
        energies: vec![0.0],
        iterations: 0,
        converged: b_norm == 0.0,
        misfit: weighted_norm(data, map.range_weights()),
    };
    if result.converged {
        return Ok(result);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = b_norm * b_norm;
    let mut best = (b_norm, 0usize, x.clone());
    for k in 1..=spec.max_iterations {
        let np = normal(&p)?;
        let curvature = weighted_dot(&p, &np, wf);
        if !(curvature > 0.0) {
            break;
        }
        let step = rr / curvature;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * np[i];
        }
        let rr_new = weighted_dot(&r, &r, wf).max(0.0);
        let res = rr_new.sqrt();
        let b_plus_r: Vec<f64> = b.iter().zip(&r).map(|(a, c)| a + c).collect();
        result.residuals.push(res);
        result.energies.push(-0.5 * weighted_dot(&x, &b_plus_r, wf));
        result.iterations = k;
        if res < best.0 {
            best = (res, k, x.clone());
        }
        if res <= spec.tolerance * b_norm {
            result.converged = true;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if !result.converged && spec.strict {
        return Err(Error::MaxIterationsExceeded {
            iterations: result.iterations,
            residual: best.0 / b_norm,
        });
    }
    result.f = best.2;
    let af = map.apply(&result.f)?;
    let diff: Vec<f64> = af.iter().zip(data).map(|(a, d)| a - d).collect();
    result.misfit = weighted_norm(&diff, map.range_weights());
    Ok(result)
}

/// Power-iteration estimate of `|A|^2` (largest eigenvalue of `A*A`).
pub fn normal_operator_norm(map: &dyn LinearMap, iterations: usize, seed: u64) -> Result<f64> {
    let wf = map.domain_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..map.domain_dim()).map(|_| rng.sample(StandardNormal)).collect();
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let nx = weighted_norm(&x, wf);
        if nx == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = map.adjoint(&map.apply(&x)?)?;
        lambda = weighted_dot(&x, &y, wf);
        x = y;
    }
    Ok(lambda)
}

/// Safety factor of the discrepancy principle.
pub const DISCREPANCY_TAU: f64 = 1.1;

/// Chooses `alpha` with `|A f_alpha - d| ~ tau * noise_norm` by bisection in
/// `log alpha`; the misfit is increasing in `alpha`.
pub fn discrepancy_principle(
    map: &dyn LinearMap,
    data: &[f64],
    noise_norm: f64,
    spec: &InverseProblemSpec,
) -> Result<ReconstructionResult> {
    if !(noise_norm > 0.0) {
        return reconstruct(map, data, spec);
    }
    let target = DISCREPANCY_TAU * noise_norm;
    let solve = |alpha: f64| {
        let mut s = spec.clone();
        s.alpha = alpha;
        reconstruct(map, data, &s)
    };
    let data_norm = weighted_norm(data, map.range_weights());
    if data_norm <= target {
        let mut zero = solve(f64::MAX.sqrt())?;
        zero.f.iter_mut().for_each(|v| *v = 0.0);
        zero.misfit = data_norm;
        return Ok(zero);
    }
    let mut hi = normal_operator_norm(map, 30, 7)?.max(f64::MIN_POSITIVE);
    let mut r_hi = solve(hi)?;
    while r_hi.misfit < target {
        hi *= 10.0;
        r_hi = solve(hi)?;
    }
    let mut lo = hi * 1e-14;
    let r_lo = solve(lo)?;
    if r_lo.misfit >= target {
        return Ok(r_lo);
    }
    let gap = |r: &ReconstructionResult| (r.misfit / target - 1.0).abs();
    let mut best = r_hi;
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        let r = solve(mid)?;
        let rel = r.misfit / target - 1.0;
        if rel >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if gap(&r) < gap(&best) {
            best = r;
        }
        if rel.abs() < 1e-3 || hi / lo < 1.0 + 1e-6 {
            break;
        }
    }
    Ok(best)
}

/// Adds white Gaussian noise (ChaCha8, `seed`) scaled to
/// `|noise|_{W_d} = level * |data|_{W_d}`; returns the noisy data and `|noise|_{W_d}`.
pub fn add_noise(data: &[f64], weights: &[f64], level: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidInput(format!("noise level {level} must be >= 0")));
    }
    check_dim(weights, data.len(), "data weights")?;
    if level == 0.0 {
        return Ok((data.to_vec(), 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta: Vec<f64> = (0..data.len()).map(|_| rng.sample(StandardNormal)).collect();
    let scale = level * weighted_norm(data, weights) / weighted_norm(&eta, weights).max(f64::MIN_POSITIVE);
    let noisy = data.iter().zip(&eta).map(|(d, e)| d + scale * e).collect();
    Ok((noisy, level * weighted_norm(data, weights)))
}
