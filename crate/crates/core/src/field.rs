//! Space-time grid functions and the finite-difference stencils used on them.

use std::io::{Read, Write};

use ndarray::{s, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, DomainSpec, FaceLabel, Point};

/// Values on `(time grid) x (space grid)`, stored as `nt x n_nodes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub domain: DomainSpec,
    pub t_start: f64,
    pub dt: f64,
    pub values: Array2<f64>,
}

impl SpaceTimeField {
    pub fn new(domain: DomainSpec, t_start: f64, dt: f64, values: Array2<f64>) -> Result<Self> {
        if values.ncols() != domain.n_nodes() {
            return Err(Error::GridMismatch(format!(
                "{} columns for {} nodes",
                values.ncols(),
                domain.n_nodes()
            )));
        }
        if values.nrows() == 0 || (values.nrows() > 1 && !(dt > 0.0)) {
            return Err(Error::GridMismatch(format!(
                "{} time levels with dt = {dt}",
                values.nrows()
            )));
        }
        Ok(SpaceTimeField {
            domain,
            t_start,
            dt,
            values,
        })
    }

    pub fn zeros(domain: &DomainSpec, t_start: f64, dt: f64, nt: usize) -> Self {
        SpaceTimeField {
            domain: domain.clone(),
            t_start,
            dt,
            values: Array2::zeros((nt, domain.n_nodes())),
        }
    }

    /// Samples `f(x, t)` on the grid.
    pub fn from_fn(domain: &DomainSpec, t_start: f64, dt: f64, nt: usize, f: impl Fn(&Point, f64) -> f64) -> Self {
        let points = domain.points();
        let mut out = Self::zeros(domain, t_start, dt, nt);
        for k in 0..nt {
            let t = out.time(k);
            for (j, p) in points.iter().enumerate() {
                out.values[[k, j]] = f(p, t);
            }
        }
        out
    }

    /// A single time slice.
    pub fn stationary(domain: &DomainSpec, t: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let arr = Array2::from_shape_vec((1, n), values).map_err(|e| Error::GridMismatch(e.to_string()))?;
        Self::new(domain.clone(), t, 0.0, arr)
    }

    pub fn nt(&self) -> usize {
        self.values.nrows()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.nt() - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt()).map(|k| self.time(k)).collect()
    }

    pub fn slice(&self, k: usize) -> ArrayView1<'_, f64> {
        self.values.row(k)
    }

    pub fn slice_vec(&self, k: usize) -> Vec<f64> {
        self.values.row(k).to_vec()
    }

    /// Index of a grid time, accepting a rounding tolerance of `1e-6 dt`.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        if self.nt() == 1 {
            return if (t - self.t_start).abs() <= 1e-12 * (1.0 + t.abs()) {
                Ok(0)
            } else {
                Err(Error::GridMismatch(format!("t = {t} is not the stored slice {}", self.t_start)))
            };
        }
        let x = (t - self.t_start) / self.dt;
        let k = x.round();
        if (x - k).abs() > 1e-6 || k < 0.0 || k as usize >= self.nt() {
            return Err(Error::GridMismatch(format!(
                "t = {t} is not on the time grid [{}, {}] with dt = {}",
                self.t_start,
                self.t_end(),
                self.dt
            )));
        }
        Ok(k as usize)
    }

    /// Sub-window `[k0, k1]` of time levels (inclusive).
    pub fn window(&self, k0: usize, k1: usize) -> SpaceTimeField {
        SpaceTimeField {
            domain: self.domain.clone(),
            t_start: self.time(k0),
            dt: self.dt,
            values: self.values.slice(s![k0..=k1, ..]).to_owned(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> SpaceTimeField {
        SpaceTimeField {
            values: &self.values * alpha,
            ..self.clone()
        }
    }

    pub fn check_same_grid(&self, other: &SpaceTimeField) -> Result<()> {
        if self.domain != other.domain || self.values.dim() != other.values.dim() {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        if self.nt() > 1 && ((self.dt - other.dt).abs() > 1e-12 * self.dt || (self.t_start - other.t_start).abs() > 1e-9 * self.dt) {
            return Err(Error::GridMismatch("fields use different time grids".into()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `d/dt`: centred inside, second-order one-sided at both ends.
    pub fn time_derivative(&self) -> Result<SpaceTimeField> {
        let nt = self.nt();
        if nt < 3 {
            return Err(Error::GridMismatch(format!("time derivative needs 3 levels, got {nt}")));
        }
        let h = self.dt;
        let v = &self.values;
        let mut out = Array2::zeros(v.dim());
        for k in 0..nt {
            let (idx, c) = d1_stencil(k, nt, h);
            let mut row = out.row_mut(k);
            for (&i, &ci) in idx.iter().zip(&c) {
                row.scaled_add(ci, &v.row(i));
            }
        }
        Ok(SpaceTimeField {
            values: out,
            ..self.clone()
        })
    }

    /// `d^2/dt^2`: centred inside, second-order one-sided at both ends.
    pub fn second_time_derivative(&self) -> Result<SpaceTimeField> {
        let nt = self.nt();
        if nt < 4 {
            return Err(Error::GridMismatch(format!("second time derivative needs 4 levels, got {nt}")));
        }
        let v = &self.values;
        let mut out = Array2::zeros(v.dim());
        for k in 0..nt {
            let st = d2_stencil(k, nt, self.dt);
            let mut row = out.row_mut(k);
            for &(i, ci) in &st {
                row.scaled_add(ci, &v.row(i));
            }
        }
        Ok(SpaceTimeField {
            values: out,
            ..self.clone()
        })
    }

    /// Flat binary layout: magic, dimension, `nx`, `nt`, `t_start`, `dt`,
    /// four bounds, then row-major little-endian doubles.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.domain.dim() as u32;
        let bounds = match self.domain.kind {
            DomainKind::Interval { a, b } => [a, b, 0.0, 0.0],
            DomainKind::Rectangle { a1, b1, a2, b2 } => [a1, b1, a2, b2],
        };
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&(self.domain.nx as u32).to_le_bytes())?;
        w.write_all(&(self.nt() as u64).to_le_bytes())?;
        w.write_all(&self.t_start.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for b in bounds {
            w.write_all(&b.to_le_bytes())?;
        }
        for v in self.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<SpaceTimeField> {
        let io = |e: std::io::Error| Error::InvalidInput(format!("field read failed: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::InvalidInput("not a field file".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(io)?;
        let dim = u32::from_le_bytes(b4);
        r.read_exact(&mut b4).map_err(io)?;
        let nx = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8).map_err(io)?;
        let nt = u64::from_le_bytes(b8) as usize;
        let mut read_f64 = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut b8).map_err(io)?;
            Ok(f64::from_le_bytes(b8))
        };
        let t_start = read_f64(&mut r)?;
        let dt = read_f64(&mut r)?;
        let mut bounds = [0.0; 4];
        for b in bounds.iter_mut() {
            *b = read_f64(&mut r)?;
        }
        let kind = match dim {
            1 => DomainKind::Interval {
                a: bounds[0],
                b: bounds[1],
            },
            2 => DomainKind::Rectangle {
                a1: bounds[0],
                b1: bounds[1],
                a2: bounds[2],
                b2: bounds[3],
            },
            _ => return Err(Error::InvalidInput(format!("unsupported dimension {dim}"))),
        };
        let domain = DomainSpec::new(kind, nx)?;
        let n = nt * domain.n_nodes();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(read_f64(&mut r)?);
        }
        let values = Array2::from_shape_vec((nt, domain.n_nodes()), data).map_err(|e| Error::GridMismatch(e.to_string()))?;
        SpaceTimeField::new(domain, t_start, dt, values)
    }

    /// CSV with columns `t,node,x1,x2,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,node,x1,x2,value")?;
        let points = self.domain.points();
        for k in 0..self.nt() {
            let t = self.time(k);
            for (j, p) in points.iter().enumerate() {
                writeln!(w, "{t},{j},{},{},{}", p[0], p[1], self.values[[k, j]])?;
            }
        }
        Ok(())
    }
}

const BINARY_MAGIC: &[u8; 4] = b"CLF1";

/// First-derivative stencil at position `i` of an `n`-point line.
pub(crate) fn d1_stencil(i: usize, n: usize, h: f64) -> ([usize; 3], [f64; 3]) {
    let inv = 1.0 / (2.0 * h);
    if i == 0 {
        ([0, 1, 2], [-3.0 * inv, 4.0 * inv, -inv])
    } else if i == n - 1 {
        ([n - 1, n - 2, n - 3], [3.0 * inv, -4.0 * inv, inv])
    } else {
        ([i - 1, i, i + 1], [-inv, 0.0, inv])
    }
}

/// Second-derivative stencil at position `i` of an `n`-point line.
pub(crate) fn d2_stencil(i: usize, n: usize, h: f64) -> Vec<(usize, f64)> {
    let inv = 1.0 / (h * h);
    if n < 4 {
        let c = i.clamp(1, n - 2);
        return vec![(c - 1, inv), (c, -2.0 * inv), (c + 1, inv)];
    }
    if i == 0 {
        vec![(0, 2.0 * inv), (1, -5.0 * inv), (2, 4.0 * inv), (3, -inv)]
    } else if i == n - 1 {
        vec![(n - 1, 2.0 * inv), (n - 2, -5.0 * inv), (n - 3, 4.0 * inv), (n - 4, -inv)]
    } else {
        vec![(i - 1, inv), (i, -2.0 * inv), (i + 1, inv)]
    }
}

/// Sparse linear functional on the nodes of a slice.
pub type NodeStencil = Vec<(usize, f64)>;

/// `d/dx_axis` at a node as a sparse functional.
pub fn gradient_stencil(domain: &DomainSpec, idx: usize, axis: usize) -> NodeStencil {
    let mi = domain.multi_index(idx);
    let (pos, c) = d1_stencil(mi[axis], domain.nx, domain.spacing(axis));
    pos.iter()
        .zip(&c)
        .filter(|(_, &ci)| ci != 0.0)
        .map(|(&p, &ci)| {
            let mut m = mi;
            m[axis] = p;
            (domain.flat_index(m), ci)
        })
        .collect()
}

/// `d^2 / dx_a dx_b` at a node as a sparse functional.
pub fn hessian_stencil(domain: &DomainSpec, idx: usize, a: usize, b: usize) -> NodeStencil {
    let mi = domain.multi_index(idx);
    if a == b {
        return d2_stencil(mi[a], domain.nx, domain.spacing(a))
            .into_iter()
            .map(|(p, c)| {
                let mut m = mi;
                m[a] = p;
                (domain.flat_index(m), c)
            })
            .collect();
    }
    let (pa, ca) = d1_stencil(mi[a], domain.nx, domain.spacing(a));
    let (pb, cb) = d1_stencil(mi[b], domain.nx, domain.spacing(b));
    let mut out = Vec::new();
    for (&ia, &wa) in pa.iter().zip(&ca) {
        for (&ib, &wb) in pb.iter().zip(&cb) {
            if wa * wb != 0.0 {
                let mut m = mi;
                m[a] = ia;
                m[b] = ib;
                out.push((domain.flat_index(m), wa * wb));
            }
        }
    }
    out
}

/// Outward normal derivative at a face node, second-order one-sided.
pub fn normal_stencil(domain: &DomainSpec, idx: usize, face: FaceLabel) -> NodeStencil {
    let sign = if face.is_upper() { 1.0 } else { -1.0 };
    gradient_stencil(domain, idx, face.axis())
        .into_iter()
        .map(|(j, c)| (j, sign * c))
        .collect()
}

pub fn apply_stencil(st: &NodeStencil, u: ArrayView1<'_, f64>) -> f64 {
    st.iter().map(|&(j, c)| c * u[j]).sum()
}

/// Spatial gradient at every node of a slice.
pub fn gradient(domain: &DomainSpec, u: ArrayView1<'_, f64>) -> Vec<Point> {
    (0..domain.n_nodes())
        .map(|i| {
            let mut g = [0.0; 2];
            for (k, gk) in g.iter_mut().enumerate().take(domain.dim()) {
                *gk = apply_stencil(&gradient_stencil(domain, i, k), u);
            }
            g
        })
        .collect()
}

/// `sum_{i,j} |d^2 u / dx_i dx_j|^2` at every node (mixed terms counted twice).
pub fn hessian_sq(domain: &DomainSpec, u: ArrayView1<'_, f64>) -> Vec<f64> {
    let dim = domain.dim();
    (0..domain.n_nodes())
        .map(|i| {
            let mut acc = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    let v = apply_stencil(&hessian_stencil(domain, i, a, b), u);
                    acc += v * v;
                }
            }
            acc
        })
        .collect()
}

/// Laplacian of a slice, one-sided at boundary nodes.
pub fn laplacian(domain: &DomainSpec, u: ArrayView1<'_, f64>) -> Vec<f64> {
    (0..domain.n_nodes())
        .map(|i| {
            (0..domain.dim())
                .map(|k| apply_stencil(&hessian_stencil(domain, i, k, k), u))
                .sum()
        })
        .collect()
}
