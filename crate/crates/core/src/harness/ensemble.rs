//! Random and named source families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{DomainSpec, Point};
use crate::solvers::Coefficients;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SourceFamily {
    /// `sum_k a_k sin(k pi (x - a) / L)` with `a_k ~ N(0, |k|^-2)`; in 2D a
    /// `modes x modes` tensor series with `|k|^2 = k1^2 + k2^2`.
    FourierSine { modes: usize },
    /// One analytic profile in `x1`, `x2`; every sample equals it.
    Profile { expression: String },
}

impl Default for SourceFamily {
    fn default() -> Self {
        SourceFamily::FourierSine { modes: 8 }
    }
}

/// Sample `i` is drawn from a ChaCha8 stream seeded with `seed + i`, so
/// every sample is reproducible on its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_samples: usize,
    pub family: SourceFamily,
    pub noise_levels: Vec<f64>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn fourier(n_samples: usize, seed: u64) -> Self {
        EnsembleSpec {
            n_samples,
            family: SourceFamily::default(),
            noise_levels: Vec::new(),
            seed,
        }
    }

    pub fn profile(expression: &str) -> Self {
        EnsembleSpec {
            n_samples: 1,
            family: SourceFamily::Profile {
                expression: expression.to_string(),
            },
            noise_levels: Vec::new(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("ensemble needs at least one sample".into()));
        }
        match &self.family {
            SourceFamily::FourierSine { modes } if *modes == 0 => {
                Err(Error::InvalidInput("Fourier family needs at least one mode".into()))
            }
            SourceFamily::Profile { expression } => Expr::parse(expression).map(|_| ()),
            _ => Ok(()),
        }
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(index as u64))
    }

    /// Sample `index` at the nodes of `domain`.
    pub fn sample_on(&self, domain: &DomainSpec, index: usize) -> Result<Vec<f64>> {
        self.draw(domain, &mut self.rng(index))
    }

    /// Two independent functions from the stream of sample `index` (initial
    /// position and velocity).
    pub fn sample_pair_on(&self, domain: &DomainSpec, index: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = self.rng(index);
        let a = self.draw(domain, &mut rng)?;
        let b = self.draw(domain, &mut rng)?;
        Ok((a, b))
    }

    fn draw(&self, domain: &DomainSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match &self.family {
            SourceFamily::FourierSine { modes } => {
                let m = *modes;
                let dim = domain.dim();
                let count = if dim == 1 { m } else { m * m };
                let coeffs: Vec<f64> = (0..count)
                    .map(|j| {
                        let (k1, k2) = if dim == 1 { (j + 1, 0) } else { (j / m + 1, j % m + 1) };
                        let k = ((k1 * k1 + k2 * k2) as f64).sqrt();
                        rng.sample::<f64, _>(StandardNormal) / k
                    })
                    .collect();
                Ok(domain
                    .points()
                    .iter()
                    .map(|p| fourier_sum(domain, &coeffs, m, p))
                    .collect())
            }
            SourceFamily::Profile { expression } => {
                let e = Expr::parse(expression)?;
                Ok(domain.points().iter().map(|p| e.eval(p, 0.0)).collect())
            }
        }
    }
}

fn fourier_sum(domain: &DomainSpec, coeffs: &[f64], m: usize, p: &Point) -> f64 {
    let phase = |axis: usize, k: usize| {
        let (a, b) = domain.bounds(axis);
        (k as f64 * std::f64::consts::PI * (p[axis] - a) / (b - a)).sin()
    };
    if domain.dim() == 1 {
        coeffs.iter().enumerate().map(|(j, c)| c * phase(0, j + 1)).sum()
    } else {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * phase(0, j / m + 1) * phase(1, j % m + 1))
            .sum()
    }
}

/// `b1`, `b2`, `c` of the lower-order terms as expressions in `x1`, `x2`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSpec {
    pub b: [Expr; 2],
    pub c: Expr,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec {
            b: [Expr::Num(0.0), Expr::Num(0.0)],
            c: Expr::Num(0.0),
        }
    }
}

impl CoefficientSpec {
    pub fn parse(b1: &str, b2: &str, c: &str) -> Result<Self> {
        Ok(CoefficientSpec {
            b: [Expr::parse(b1)?, Expr::parse(b2)?],
            c: Expr::parse(c)?,
        })
    }

    pub fn on(&self, domain: &DomainSpec) -> Result<Coefficients> {
        let coeffs = Coefficients::from_fn(domain, |p| {
            ([self.b[0].eval(p, 0.0), self.b[1].eval(p, 0.0)], self.c.eval(p, 0.0))
        });
        coeffs.validate(domain)?;
        Ok(coeffs)
    }
}
