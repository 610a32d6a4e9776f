//! Carleman weight functions and the scalar constants used by the absorption arguments.
//!
//! All constants here are independent of the large parameter `s`. Weighted
//! integrals never form `exp(2 s phi)` directly; see [`crate::analysis`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObservationGeometry, ParabolicGeometry, Point, PseudoconvexProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WeightKind {
    /// `psi = |x - x0|^2 - beta (t - t0)^2`.
    HyperbolicShifted { x0: Point },
    /// `psi = d(x) - beta (t - t0)^2`.
    ParabolicPseudoconvex { d: PseudoconvexProfile },
    /// `exp((e^{lambda d} - e^{2 lambda |d|_inf}) / (t (T - t)))` on `(0, T)`.
    BlowupBoundary {
        horizon: f64,
        d: PseudoconvexProfile,
        d_sup: f64,
    },
}

impl WeightKind {
    pub fn name(&self) -> &'static str {
        match self {
            WeightKind::HyperbolicShifted { .. } => "hyperbolic_shifted",
            WeightKind::ParabolicPseudoconvex { .. } => "parabolic_pseudoconvex",
            WeightKind::BlowupBoundary { .. } => "blowup_boundary",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub lambda: f64,
    pub beta: f64,
    pub t0: f64,
    pub kind: WeightKind,
    pub s_sweep: Vec<f64>,
}

/// `n` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_sweep(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo * (ratio * k as f64).exp()
            }
        })
        .collect()
}

/// Sixteen geometric values from 1 to 64.
pub fn default_s_sweep() -> Vec<f64> {
    geometric_sweep(1.0, 64.0, 16)
}

pub(crate) fn validate_sweep(sweep: &[f64]) -> Result<()> {
    if sweep.is_empty() {
        return Err(Error::InvalidInput("empty s sweep".into()));
    }
    if sweep[0] <= 0.0 || sweep.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!(
            "s sweep must be positive and strictly increasing: {sweep:?}"
        )));
    }
    Ok(())
}

impl WeightParams {
    pub fn new(lambda: f64, beta: f64, t0: f64, kind: WeightKind) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        if !(beta >= 0.0) {
            return Err(Error::InvalidInput(format!("beta must be non-negative, got {beta}")));
        }
        Ok(WeightParams {
            lambda,
            beta,
            t0,
            kind,
            s_sweep: default_s_sweep(),
        })
    }

    pub fn hyperbolic(lambda: f64, beta: f64, t0: f64, x0: Point) -> Result<Self> {
        Self::new(lambda, beta, t0, WeightKind::HyperbolicShifted { x0 })
    }

    pub fn parabolic(lambda: f64, beta: f64, t0: f64, d: PseudoconvexProfile) -> Result<Self> {
        Self::new(lambda, beta, t0, WeightKind::ParabolicPseudoconvex { d })
    }

    pub fn with_sweep(mut self, sweep: Vec<f64>) -> Result<Self> {
        validate_sweep(&sweep)?;
        self.s_sweep = sweep;
        Ok(self)
    }

    fn mismatch(&self, expected: &'static str) -> Error {
        Error::KindMismatch {
            expected,
            found: self.kind.name(),
        }
    }

    /// Hyperbolic phase `|x - x0|^2 - beta (t - t0)^2`.
    pub fn eval_psi_hyperbolic(&self, x: &Point, t: f64) -> Result<f64> {
        match &self.kind {
            WeightKind::HyperbolicShifted { x0 } => {
                let r2 = (x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2);
                Ok(r2 - self.beta * (t - self.t0).powi(2))
            }
            _ => Err(self.mismatch("hyperbolic_shifted")),
        }
    }

    /// Phase `psi` for the hyperbolic and parabolic kinds.
    pub fn eval_psi(&self, x: &Point, t: f64) -> Result<f64> {
        let time = self.beta * (t - self.t0).powi(2);
        match &self.kind {
            WeightKind::HyperbolicShifted { .. } => self.eval_psi_hyperbolic(x, t),
            WeightKind::ParabolicPseudoconvex { d } => Ok(d.eval(x) - time),
            WeightKind::BlowupBoundary { .. } => Err(self.mismatch("hyperbolic_shifted or parabolic_pseudoconvex")),
        }
    }

    /// `phi = exp(lambda psi)`.
    pub fn eval_phi(&self, x: &Point, t: f64) -> Result<f64> {
        Ok((self.lambda * self.eval_psi(x, t)?).exp())
    }

    /// Blow-up weight; vanishes at both ends of the time interval.
    pub fn eval_blowup_weight(&self, x: &Point, t: f64) -> Result<f64> {
        match &self.kind {
            WeightKind::BlowupBoundary { horizon, d, d_sup } => {
                blowup_weight(self.lambda, d.eval(x), *d_sup, t, *horizon)
            }
            _ => Err(self.mismatch("blowup_boundary")),
        }
    }

    /// Whether the weight is a Carleman phase usable in weighted integrals.
    pub fn is_phase(&self) -> bool {
        !matches!(self.kind, WeightKind::BlowupBoundary { .. })
    }
}

/// Logarithm of the blow-up weight for a given value of `d(x)`.
pub fn ln_blowup_weight(lambda: f64, d_x: f64, d_sup: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(t > 0.0 && t < horizon) {
        return Err(Error::TimeOutOfRange { t, horizon });
    }
    Ok(((lambda * d_x).exp() - (2.0 * lambda * d_sup).exp()) / (t * (horizon - t)))
}

pub fn blowup_weight(lambda: f64, d_x: f64, d_sup: f64, t: f64, horizon: f64) -> Result<f64> {
    Ok(ln_blowup_weight(lambda, d_x, d_sup, t, horizon)?.exp())
}

/// Named constants of the absorption arguments. Constants that do not apply
/// to the requested scenario stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CarlemanConstants {
    pub c0: Option<f64>,
    pub kappa0: Option<f64>,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub sigma0: Option<f64>,
    pub sigma1: Option<f64>,
    pub mu: Option<f64>,
    pub mu0: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
}

pub const CONSTANT_NAMES: [&str; 10] = [
    "c0", "kappa0", "kappa1", "kappa2", "sigma0", "sigma1", "mu", "mu0", "mu1", "mu2",
];

impl CarlemanConstants {
    /// Defining formula for each constant.
    pub fn formula(name: &str) -> &'static str {
        match name {
            "c0" => "2 (exp(lambda d0^2) - exp(lambda d1^2 - lambda beta T^2))",
            "kappa0" => "exp(lambda d0^2)",
            "kappa1" => "exp(lambda (d1^2 - beta T^2 / 4))",
            "kappa2" => "exp(lambda (d0^2 - beta delta^2))",
            "sigma0" => "min over closure(Omega0) of exp(lambda d(x))",
            "sigma1" => "max(max over unobserved boundary of phi~, max over Omega of phi~(x, t0 - delta))",
            "mu" => "sigma0 - sigma1",
            "mu0" => "mu1 - mu2",
            "mu1" => "exp(lambda (d0~^2 - beta eps~^2))",
            "mu2" => "max(1, exp(lambda (d1~^2 - beta delta~^2)))",
            _ => "",
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "c0" => self.c0,
            "kappa0" => self.kappa0,
            "kappa1" => self.kappa1,
            "kappa2" => self.kappa2,
            "sigma0" => self.sigma0,
            "sigma1" => self.sigma1,
            "mu" => self.mu,
            "mu0" => self.mu0,
            "mu1" => self.mu1,
            "mu2" => self.mu2,
            _ => None,
        }
    }

    /// `(name, value, formula)` for every constant that is present.
    pub fn entries(&self) -> Vec<(&'static str, f64, &'static str)> {
        CONSTANT_NAMES
            .iter()
            .filter_map(|&n| self.get(n).map(|v| (n, v, Self::formula(n))))
            .collect()
    }

    /// Field-wise union; values already present in `self` win.
    pub fn merge(&self, other: &CarlemanConstants) -> CarlemanConstants {
        CarlemanConstants {
            c0: self.c0.or(other.c0),
            kappa0: self.kappa0.or(other.kappa0),
            kappa1: self.kappa1.or(other.kappa1),
            kappa2: self.kappa2.or(other.kappa2),
            sigma0: self.sigma0.or(other.sigma0),
            sigma1: self.sigma1.or(other.sigma1),
            mu: self.mu.or(other.mu),
            mu0: self.mu0.or(other.mu0),
            mu1: self.mu1.or(other.mu1),
            mu2: self.mu2.or(other.mu2),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")))
    }
}

/// `c0` for the Lipschitz argument. Requires `0 < beta < 1` and
/// `T sqrt(beta) > sqrt(d1^2 - d0^2)`.
pub fn hyperbolic_constants(geom: &ObservationGeometry, lambda: f64, beta: f64, t: f64) -> Result<CarlemanConstants> {
    check_lambda(lambda)?;
    let gap = geom.d1 * geom.d1 - geom.d0 * geom.d0;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::ParameterConflict(format!(
            "beta = {beta} must lie strictly between 0 and 1"
        )));
    }
    if !(t * t * beta > gap) {
        return Err(Error::ParameterConflict(format!(
            "T sqrt(beta) = {} must exceed sqrt(d1^2 - d0^2) = {}",
            t * beta.sqrt(),
            gap.sqrt()
        )));
    }
    let c0 = 2.0
        * ((lambda * geom.d0 * geom.d0).exp()
            - (lambda * geom.d1 * geom.d1 - lambda * beta * t * t).exp());
    Ok(CarlemanConstants {
        c0: Some(c0),
        ..Default::default()
    })
}

/// Largest admissible `delta` for the observability argument, halved in `delta^2`:
/// `beta delta^2 = (beta T^2 / 4 - (d1^2 - d0^2)) / 2`.
pub fn default_observability_delta(geom: &ObservationGeometry, beta: f64, t: f64) -> f64 {
    let slack = beta * t * t / 4.0 - (geom.d1 * geom.d1 - geom.d0 * geom.d0);
    (0.5 * slack / beta).max(0.0).sqrt()
}

/// `kappa0, kappa1, kappa2` for the observability argument (weight centred at `T/2`).
pub fn observability_constants(
    geom: &ObservationGeometry,
    lambda: f64,
    beta: f64,
    t: f64,
    delta: Option<f64>,
) -> Result<CarlemanConstants> {
    check_lambda(lambda)?;
    let gap = geom.d1 * geom.d1 - geom.d0 * geom.d0;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::ParameterConflict(format!(
            "beta = {beta} must lie strictly between 0 and 1"
        )));
    }
    if !(t * t * beta > 4.0 * gap) {
        return Err(Error::ParameterConflict(format!(
            "T sqrt(beta) = {} must exceed 2 sqrt(d1^2 - d0^2) = {}",
            t * beta.sqrt(),
            2.0 * gap.sqrt()
        )));
    }
    let delta = delta.unwrap_or_else(|| default_observability_delta(geom, beta, t));
    if !(delta > 0.0) || !(t * t * beta > 4.0 * (gap + beta * delta * delta)) {
        return Err(Error::ParameterConflict(format!(
            "delta = {delta} must be positive with T sqrt(beta) > 2 sqrt(d1^2 - d0^2 + beta delta^2)"
        )));
    }
    let d0sq = geom.d0 * geom.d0;
    Ok(CarlemanConstants {
        kappa0: Some((lambda * d0sq).exp()),
        kappa1: Some((lambda * (geom.d1 * geom.d1 - t * t * beta / 4.0)).exp()),
        kappa2: Some((lambda * (d0sq - beta * delta * delta)).exp()),
        ..Default::default()
    })
}

/// Default `beta` for the local parabolic argument: `2 max d / delta^2`, which
/// makes `max d - beta delta^2 = -max d < 0`.
pub fn default_parabolic_beta(pgeom: &ParabolicGeometry, delta: f64) -> f64 {
    2.0 * pgeom.d_max_domain() / (delta * delta)
}

/// `sigma0, sigma1, mu` for the local Hölder argument with window `(t0 - delta, t0 + delta)`.
pub fn parabolic_constants(pgeom: &ParabolicGeometry, lambda: f64, beta: f64, delta: f64) -> Result<CarlemanConstants> {
    check_lambda(lambda)?;
    if !(delta > 0.0 && beta > 0.0) {
        return Err(Error::ParameterConflict(format!(
            "delta = {delta} and beta = {beta} must be positive"
        )));
    }
    let min0 = pgeom.d_min_omega0();
    // The time factor is maximal at t0 on the unobserved boundary.
    let boundary = pgeom.d_max_unobserved();
    let slice = pgeom.d_max_domain() - beta * delta * delta;
    let sigma0 = (lambda * min0).exp();
    let sigma1 = (lambda * boundary.max(slice)).exp();
    if !(sigma0 > sigma1) {
        return Err(Error::ParameterConflict(format!(
            "max(max d on the unobserved boundary, max d - beta delta^2) = {} must stay below min d on omega0 = {min0}",
            boundary.max(slice)
        )));
    }
    Ok(CarlemanConstants {
        sigma0: Some(sigma0),
        sigma1: Some(sigma1),
        mu: Some(sigma0 - sigma1),
        ..Default::default()
    })
}

/// Parameter choice for the parabolic Cauchy argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchySelection {
    pub d0_tilde: f64,
    pub d1_tilde: f64,
    pub n: usize,
    pub eps_tilde: f64,
    pub delta_tilde: f64,
    pub beta_interval: (f64, f64),
    pub beta: f64,
}

/// Smallest integer `N` with `N - 1 > (d1~^2 - d0~^2) / d0~^2`.
pub fn select_cauchy_n(d0_tilde: f64, d1_tilde: f64) -> Result<usize> {
    if !(d0_tilde > 0.0 && d1_tilde >= d0_tilde) {
        return Err(Error::NoAdmissibleBeta(format!(
            "need 0 < d0~ <= d1~, got d0~ = {d0_tilde}, d1~ = {d1_tilde}"
        )));
    }
    let bound = (d1_tilde * d1_tilde - d0_tilde * d0_tilde) / (d0_tilde * d0_tilde);
    let mut n = bound.floor() as usize + 1;
    while !((n as f64 - 1.0) > bound) {
        n += 1;
    }
    Ok(n.max(2))
}

/// Selects `N`, `eps~ = eps / (N - 1)`, `delta~ = N eps~` and `beta` as the
/// midpoint of `((d1~^2 - d0~^2) / (delta~^2 - eps~^2), d0~^2 / eps~^2)`.
pub fn select_cauchy_parameters(d0_tilde: f64, d1_tilde: f64, epsilon: f64, t: f64) -> Result<CauchySelection> {
    if !(epsilon > 0.0 && 2.0 * epsilon < t) {
        return Err(Error::ParameterConflict(format!(
            "epsilon = {epsilon} must satisfy 0 < epsilon < T/2 = {}",
            t / 2.0
        )));
    }
    let n = select_cauchy_n(d0_tilde, d1_tilde)?;
    let eps_tilde = epsilon / (n as f64 - 1.0);
    let delta_tilde = n as f64 * eps_tilde;
    if !(2.0 * delta_tilde < t) {
        return Err(Error::ParameterConflict(format!(
            "delta~ = {delta_tilde} must be below T/2 so that (delta~, T - delta~) is nonempty"
        )));
    }
    let lo = (d1_tilde * d1_tilde - d0_tilde * d0_tilde) / (delta_tilde * delta_tilde - eps_tilde * eps_tilde);
    let hi = d0_tilde * d0_tilde / (eps_tilde * eps_tilde);
    if !(lo < hi) {
        return Err(Error::NoAdmissibleBeta(format!("empty interval ({lo}, {hi})")));
    }
    Ok(CauchySelection {
        d0_tilde,
        d1_tilde,
        n,
        eps_tilde,
        delta_tilde,
        beta_interval: (lo, hi),
        beta: 0.5 * (lo + hi),
    })
}

/// `mu0, mu1, mu2` for a given parameter selection.
pub fn cauchy_constants(sel: &CauchySelection, lambda: f64) -> Result<CarlemanConstants> {
    check_lambda(lambda)?;
    let mu1 = (lambda * (sel.d0_tilde.powi(2) - sel.beta * sel.eps_tilde.powi(2))).exp();
    let mu2 = (lambda * (sel.d1_tilde.powi(2) - sel.beta * sel.delta_tilde.powi(2)))
        .exp()
        .max(1.0);
    if !(mu1 > mu2) {
        return Err(Error::NoAdmissibleBeta(format!("mu1 = {mu1} does not exceed mu2 = {mu2}")));
    }
    Ok(CarlemanConstants {
        mu0: Some(mu1 - mu2),
        mu1: Some(mu1),
        mu2: Some(mu2),
        ..Default::default()
    })
}

/// Scenario selector for [`compute_constants`].
#[derive(Clone, Debug)]
pub enum ConstantsRequest<'a> {
    Hyperbolic {
        geom: &'a ObservationGeometry,
        lambda: f64,
        beta: f64,
        t: f64,
    },
    Observability {
        geom: &'a ObservationGeometry,
        lambda: f64,
        beta: f64,
        t: f64,
        delta: Option<f64>,
    },
    Parabolic {
        pgeom: &'a ParabolicGeometry,
        lambda: f64,
        beta: f64,
        delta: f64,
    },
    Cauchy {
        pgeom: &'a ParabolicGeometry,
        lambda: f64,
        t: f64,
        epsilon: f64,
    },
}

/// Fills every constant applicable to the requested scenarios.
pub fn compute_constants(requests: &[ConstantsRequest<'_>]) -> Result<CarlemanConstants> {
    let mut out = CarlemanConstants::default();
    for req in requests {
        let c = match req {
            ConstantsRequest::Hyperbolic { geom, lambda, beta, t } => hyperbolic_constants(geom, *lambda, *beta, *t)?,
            ConstantsRequest::Observability {
                geom,
                lambda,
                beta,
                t,
                delta,
            } => observability_constants(geom, *lambda, *beta, *t, *delta)?,
            ConstantsRequest::Parabolic {
                pgeom,
                lambda,
                beta,
                delta,
            } => parabolic_constants(pgeom, *lambda, *beta, *delta)?,
            ConstantsRequest::Cauchy {
                pgeom,
                lambda,
                t,
                epsilon,
            } => {
                let sel = select_cauchy_parameters(pgeom.d_min_omega0(), pgeom.d_max_domain(), *epsilon, *t)?;
                cauchy_constants(&sel, *lambda)?
            }
        };
        out = out.merge(&c);
    }
    Ok(out)
}
