//! Spatial domains, observation boundaries and the pseudoconvex function `d`.
//!
//! Domains are intervals or axis-aligned rectangles discretised by a uniform
//! tensor grid with `nx` points per axis (boundary nodes included). Nodes are
//! numbered row-major: in 2D the node `(i, j)` (with `i` along `x1`) has flat
//! index `i * nx + j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in one or two dimensions. In 1D the second coordinate is unused.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainKind {
    Interval { a: f64, b: f64 },
    Rectangle { a1: f64, b1: f64, a2: f64, b2: f64 },
}

/// Boundary faces. `Left`/`Right` are `x1 = a1` / `x1 = b1` (the two endpoints
/// in 1D); `Bottom`/`Top` are `x2 = a2` / `x2 = b2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceLabel {
    Left,
    Right,
    Bottom,
    Top,
}

impl FaceLabel {
    pub fn axis(self) -> usize {
        match self {
            FaceLabel::Left | FaceLabel::Right => 0,
            FaceLabel::Bottom | FaceLabel::Top => 1,
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, FaceLabel::Right | FaceLabel::Top)
    }

    pub fn outward_normal(self) -> Point {
        let sign = if self.is_upper() { 1.0 } else { -1.0 };
        let mut n = [0.0; 2];
        n[self.axis()] = sign;
        n
    }

    pub fn parse(name: &str) -> Option<FaceLabel> {
        match name {
            "left" => Some(FaceLabel::Left),
            "right" => Some(FaceLabel::Right),
            "bottom" => Some(FaceLabel::Bottom),
            "top" => Some(FaceLabel::Top),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub label: FaceLabel,
    pub normal: Point,
}

/// Axis-aligned box given by its lower and upper corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Point,
    pub hi: Point,
}

impl AxisBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        AxisBox {
            lo: [lo, 0.0],
            hi: [hi, 0.0],
        }
    }

    pub fn rectangle(lo: Point, hi: Point) -> Self {
        AxisBox { lo, hi }
    }

    pub fn contains(&self, p: &Point, dim: usize, tol: f64) -> bool {
        (0..dim).all(|k| p[k] >= self.lo[k] - tol && p[k] <= self.hi[k] + tol)
    }

    pub fn contains_open(&self, p: &Point, dim: usize) -> bool {
        (0..dim).all(|k| p[k] > self.lo[k] && p[k] < self.hi[k])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub nx: usize,
    pub faces: Vec<BoundaryFace>,
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64, nx: usize) -> Result<Self> {
        Self::new(DomainKind::Interval { a, b }, nx)
    }

    pub fn rectangle(a1: f64, b1: f64, a2: f64, b2: f64, nx: usize) -> Result<Self> {
        Self::new(DomainKind::Rectangle { a1, b1, a2, b2 }, nx)
    }

    pub fn new(kind: DomainKind, nx: usize) -> Result<Self> {
        if nx < 3 {
            return Err(Error::InvalidInput(format!("nx must be at least 3, got {nx}")));
        }
        let (labels, ok): (&[FaceLabel], bool) = match kind {
            DomainKind::Interval { a, b } => (&[FaceLabel::Left, FaceLabel::Right], b > a),
            DomainKind::Rectangle { a1, b1, a2, b2 } => (
                &[FaceLabel::Left, FaceLabel::Right, FaceLabel::Bottom, FaceLabel::Top],
                b1 > a1 && b2 > a2,
            ),
        };
        if !ok {
            return Err(Error::InvalidInput(format!("degenerate domain {kind:?}")));
        }
        let faces = labels
            .iter()
            .map(|&label| BoundaryFace {
                label,
                normal: label.outward_normal(),
            })
            .collect();
        Ok(DomainSpec { kind, nx, faces })
    }

    pub fn with_resolution(&self, nx: usize) -> Result<Self> {
        Self::new(self.kind, nx)
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval { .. } => 1,
            DomainKind::Rectangle { .. } => 2,
        }
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        match (self.kind, axis) {
            (DomainKind::Interval { a, b }, 0) => (a, b),
            (DomainKind::Rectangle { a1, b1, .. }, 0) => (a1, b1),
            (DomainKind::Rectangle { a2, b2, .. }, 1) => (a2, b2),
            _ => panic!("axis {axis} out of range for {:?}", self.kind),
        }
    }

    pub fn bounding_box(&self) -> AxisBox {
        let mut bx = AxisBox {
            lo: [0.0; 2],
            hi: [0.0; 2],
        };
        for k in 0..self.dim() {
            let (lo, hi) = self.bounds(k);
            bx.lo[k] = lo;
            bx.hi[k] = hi;
        }
        bx
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds(axis);
        (hi - lo) / (self.nx - 1) as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.spacing(k))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|k| {
                let (lo, hi) = self.bounds(k);
                (hi - lo).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn n_nodes(&self) -> usize {
        self.nx.pow(self.dim() as u32)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.bounds(axis);
        if i == self.nx - 1 {
            hi
        } else {
            lo + i as f64 * self.spacing(axis)
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            _ => [idx / self.nx, idx % self.nx],
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        match self.dim() {
            1 => mi[0],
            _ => mi[0] * self.nx + mi[1],
        }
    }

    /// Flat-index offset of a unit step along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        if self.dim() == 2 && axis == 0 {
            self.nx
        } else {
            1
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        let mi = self.multi_index(idx);
        let mut p = [0.0; 2];
        for (k, pk) in p.iter_mut().enumerate().take(self.dim()) {
            *pk = self.coord(k, mi[k]);
        }
        p
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.n_nodes()).map(|i| self.point(i)).collect()
    }

    pub fn is_boundary_node(&self, idx: usize) -> bool {
        let mi = self.multi_index(idx);
        (0..self.dim()).any(|k| mi[k] == 0 || mi[k] == self.nx - 1)
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| !self.is_boundary_node(i))
            .collect()
    }

    /// Composite trapezoidal weights on the tensor grid.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let axis_w: Vec<Vec<f64>> = (0..self.dim())
            .map(|k| trapezoid_weights(self.nx, self.spacing(k)))
            .collect();
        (0..self.n_nodes())
            .map(|idx| {
                let mi = self.multi_index(idx);
                (0..self.dim()).map(|k| axis_w[k][mi[k]]).product()
            })
            .collect()
    }

    /// Nodes on a face, ordered along the tangential axis.
    pub fn face_nodes(&self, label: FaceLabel) -> Vec<usize> {
        let axis = label.axis();
        assert!(axis < self.dim(), "face {label:?} not present in {}D", self.dim());
        let fixed = if label.is_upper() { self.nx - 1 } else { 0 };
        match self.dim() {
            1 => vec![fixed],
            _ => (0..self.nx)
                .map(|k| {
                    let mut mi = [0; 2];
                    mi[axis] = fixed;
                    mi[1 - axis] = k;
                    self.flat_index(mi)
                })
                .collect(),
        }
    }

    /// Tangential coordinate range of a face (`(0, 0)` in 1D).
    pub fn face_extent(&self, label: FaceLabel) -> (f64, f64) {
        match self.dim() {
            1 => (0.0, 0.0),
            _ => self.bounds(1 - label.axis()),
        }
    }

    /// Tangential coordinate of the `k`-th node on a face.
    pub fn face_param(&self, label: FaceLabel, k: usize) -> f64 {
        match self.dim() {
            1 => 0.0,
            _ => self.coord(1 - label.axis(), k),
        }
    }

    /// Trapezoidal surface weights along a face (`[1.0]` in 1D).
    pub fn face_weights(&self, label: FaceLabel) -> Vec<f64> {
        match self.dim() {
            1 => vec![1.0],
            _ => trapezoid_weights(self.nx, self.spacing(1 - label.axis())),
        }
    }

    pub fn contains_closed(&self, p: &Point) -> bool {
        self.bounding_box().contains(p, self.dim(), 0.0)
    }

    /// Minimum and maximum of `|x - x0|` over the closed domain.
    pub fn distance_extremes(&self, x0: &Point) -> (f64, f64) {
        let mut near = 0.0;
        let mut far = 0.0;
        for k in 0..self.dim() {
            let (lo, hi) = self.bounds(k);
            let clamped = x0[k].clamp(lo, hi);
            near += (x0[k] - clamped).powi(2);
            far += (x0[k] - lo).abs().max((x0[k] - hi).abs()).powi(2);
        }
        (near.sqrt(), far.sqrt())
    }
}

pub(crate) fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// A (possibly partial) face of the observation boundary. `range` is the
/// tangential parameter interval; it is `(0, 0)` for 1D endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPiece {
    pub face: FaceLabel,
    pub range: (f64, f64),
}

/// Observation boundary and distance extremes for a source point outside the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationGeometry {
    pub x0: Point,
    pub gamma: Vec<GammaPiece>,
    pub d0: f64,
    pub d1: f64,
}

impl ObservationGeometry {
    pub fn faces(&self) -> Vec<FaceLabel> {
        self.gamma.iter().map(|g| g.face).collect()
    }

    pub fn contains(&self, face: FaceLabel, param: f64) -> bool {
        const TOL: f64 = 1e-12;
        self.gamma
            .iter()
            .any(|g| g.face == face && param >= g.range.0 - TOL && param <= g.range.1 + TOL)
    }
}

/// Every face of the domain with its full tangential extent.
pub fn full_boundary(domain: &DomainSpec) -> Vec<GammaPiece> {
    domain
        .faces
        .iter()
        .map(|f| GammaPiece {
            face: f.label,
            range: domain.face_extent(f.label),
        })
        .collect()
}

/// Quadrature description of an observation boundary on a grid: the nodes of
/// each piece with their surface weights and outward normal face.
pub fn gamma_quadrature(domain: &DomainSpec, pieces: &[GammaPiece]) -> Vec<(FaceLabel, usize, f64)> {
    const TOL: f64 = 1e-12;
    let mut out = Vec::new();
    for piece in pieces {
        let nodes = domain.face_nodes(piece.face);
        let weights = domain.face_weights(piece.face);
        for (k, (&node, &w)) in nodes.iter().zip(&weights).enumerate() {
            let s = domain.face_param(piece.face, k);
            if s >= piece.range.0 - TOL && s <= piece.range.1 + TOL {
                out.push((piece.face, node, w));
            }
        }
    }
    out
}

/// Observation boundary `{x on the boundary : (x - x0) . nu(x) >= 0}` and the
/// distances `d0 = min |x - x0|`, `d1 = max |x - x0|` over the closed domain.
///
/// Along each face the dot product is affine in the tangential parameter, so
/// the admissible part of a face is computed from its endpoint values.
pub fn compute_gamma(domain: &DomainSpec, x0: Point) -> Result<ObservationGeometry> {
    let dim = domain.dim();
    if domain.contains_closed(&x0) {
        return Err(Error::X0InsideDomain {
            x0: x0[..dim].to_vec(),
        });
    }
    let mut gamma = Vec::new();
    for face in &domain.faces {
        let axis = face.label.axis();
        let fixed = if face.label.is_upper() {
            domain.bounds(axis).1
        } else {
            domain.bounds(axis).0
        };
        let (lo, hi) = domain.face_extent(face.label);
        let dot_at = |s: f64| {
            let mut p = [0.0; 2];
            p[axis] = fixed;
            if dim == 2 {
                p[1 - axis] = s;
            }
            (0..dim).map(|k| (p[k] - x0[k]) * face.normal[k]).sum::<f64>()
        };
        let (g_lo, g_hi) = (dot_at(lo), dot_at(hi));
        let range = if g_lo >= 0.0 && g_hi >= 0.0 {
            Some((lo, hi))
        } else if g_lo < 0.0 && g_hi < 0.0 {
            None
        } else {
            let root = lo + (hi - lo) * g_lo / (g_lo - g_hi);
            if g_lo >= 0.0 {
                Some((lo, root))
            } else {
                Some((root, hi))
            }
        };
        if let Some(range) = range {
            gamma.push(GammaPiece {
                face: face.label,
                range,
            });
        }
    }
    let (d0, d1) = domain.distance_extremes(&x0);
    Ok(ObservationGeometry { x0, gamma, d0, d1 })
}

/// `sqrt(d1^2 - d0^2)`: observation times above this give Lipschitz stability.
pub fn critical_time_hyperbolic(geom: &ObservationGeometry) -> f64 {
    (geom.d1 * geom.d1 - geom.d0 * geom.d0).sqrt()
}

/// Twice the hyperbolic critical time; threshold for the observability inequality.
pub fn critical_time_observability(geom: &ObservationGeometry) -> f64 {
    2.0 * critical_time_hyperbolic(geom)
}

fn midpoint_beta(lower: f64, t: f64, critical: f64) -> Result<f64> {
    if t <= critical || lower >= 1.0 {
        return Err(Error::TimeBelowCritical { t, critical });
    }
    Ok(0.5 * (lower + 1.0))
}

/// Midpoint of the admissible interval `((d1^2 - d0^2) / T^2, 1)` for beta.
pub fn select_beta_hyperbolic(geom: &ObservationGeometry, t: f64) -> Result<f64> {
    let lower = (geom.d1 * geom.d1 - geom.d0 * geom.d0) / (t * t);
    midpoint_beta(lower, t, critical_time_hyperbolic(geom))
}

/// Midpoint of `(4 (d1^2 - d0^2) / T^2, 1)`, the beta range for the observability weight.
pub fn select_beta_observability(geom: &ObservationGeometry, t: f64) -> Result<f64> {
    let lower = 4.0 * (geom.d1 * geom.d1 - geom.d0 * geom.d0) / (t * t);
    midpoint_beta(lower, t, critical_time_observability(geom))
}

/// Shape of the normal profile `h(xi)` on `[0, L]`, with `xi` the distance
/// from the face opposite to the observation boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileShape {
    /// `xi^p (L - xi)`, maximal at `p L / (p + 1)`.
    Power { p: f64 },
    /// `xi (L - xi) exp(gamma (xi - xi_peak))`.
    Tilted { gamma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileChoice {
    Tilted,
    Power { p: Option<f64> },
}

impl Default for ProfileChoice {
    fn default() -> Self {
        ProfileChoice::Tilted
    }
}

/// Closed-form positive function on the enlarged domain, vanishing on its
/// boundary with a single critical point inside `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoconvexProfile {
    pub dim: usize,
    pub normal_axis: usize,
    /// Coordinate where `xi = 0`.
    pub origin: f64,
    /// `+1` when `xi = x - origin`, `-1` when `xi = origin - x`.
    pub orientation: f64,
    pub length: f64,
    pub peak: f64,
    pub shape: ProfileShape,
    /// Tangential extent for the 2D quadratic cross profile.
    pub tangential: Option<(f64, f64)>,
}

impl PseudoconvexProfile {
    fn xi(&self, p: &Point) -> f64 {
        self.orientation * (p[self.normal_axis] - self.origin)
    }

    fn normal(&self, xi: f64) -> (f64, f64) {
        let l = self.length;
        match self.shape {
            ProfileShape::Power { p } => {
                let v = xi.powf(p) * (l - xi);
                let dv = p * xi.powf(p - 1.0) * (l - xi) - xi.powf(p);
                (v, dv)
            }
            ProfileShape::Tilted { gamma } => {
                let e = (gamma * (xi - self.peak)).exp();
                let v = xi * (l - xi) * e;
                let dv = e * ((l - 2.0 * xi) + gamma * xi * (l - xi));
                (v, dv)
            }
        }
    }

    fn cross(&self, p: &Point) -> (f64, f64) {
        match self.tangential {
            None => (1.0, 0.0),
            Some((lo, hi)) => {
                let y = p[1 - self.normal_axis];
                let w = (hi - lo) * (hi - lo);
                (4.0 * (y - lo) * (hi - y) / w, 4.0 * (hi + lo - 2.0 * y) / w)
            }
        }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.normal(self.xi(p)).0 * self.cross(p).0
    }

    pub fn grad(&self, p: &Point) -> Point {
        let (h, dh) = self.normal(self.xi(p));
        let (g, dg) = self.cross(p);
        let mut out = [0.0; 2];
        out[self.normal_axis] = self.orientation * dh * g;
        if self.dim == 2 {
            out[1 - self.normal_axis] = h * dg;
        }
        out
    }

    /// Location of the maximiser in physical coordinates.
    pub fn peak_point(&self) -> Point {
        let mut p = [0.0; 2];
        p[self.normal_axis] = self.origin + self.orientation * self.peak;
        if let Some((lo, hi)) = self.tangential {
            p[1 - self.normal_axis] = 0.5 * (lo + hi);
        }
        p
    }

    /// Minimum over a box. Both factors are unimodal, so the minimum sits at a corner.
    pub fn min_on(&self, bx: &AxisBox) -> f64 {
        corners(bx, self.dim)
            .iter()
            .map(|c| self.eval(c))
            .fold(f64::INFINITY, f64::min)
    }

    /// Maximum over a box, attained at the peak clamped into the box.
    pub fn max_on(&self, bx: &AxisBox) -> f64 {
        let peak = self.peak_point();
        let mut p = [0.0; 2];
        for k in 0..self.dim {
            p[k] = peak[k].clamp(bx.lo[k], bx.hi[k]);
        }
        self.eval(&p)
    }
}

fn corners(bx: &AxisBox, dim: usize) -> Vec<Point> {
    match dim {
        1 => vec![[bx.lo[0], 0.0], [bx.hi[0], 0.0]],
        _ => vec![
            [bx.lo[0], bx.lo[1]],
            [bx.lo[0], bx.hi[1]],
            [bx.hi[0], bx.lo[1]],
            [bx.hi[0], bx.hi[1]],
        ],
    }
}

/// Options for building the parabolic geometry. `None` fields take defaults:
/// `eta = diam / 2`, omega the middle third of the extension, omega0 the half
/// of the domain adjacent to the observation face.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParabolicOptions {
    pub eta: Option<f64>,
    pub omega: Option<(f64, f64)>,
    pub omega0: Option<AxisBox>,
    pub profile: ProfileChoice,
}

/// Observation face, enlarged domain, control set and the function `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicGeometry {
    pub domain: DomainSpec,
    pub gamma: GammaPiece,
    pub eta: f64,
    pub omega1: AxisBox,
    pub omega: AxisBox,
    pub omega0: AxisBox,
    pub d: PseudoconvexProfile,
}

/// Builds `d` for a single full observation face. `omega` is given by its
/// range along the face normal and must lie strictly inside the extension.
pub fn construct_d(
    domain: &DomainSpec,
    gamma: FaceLabel,
    eta: f64,
    omega: (f64, f64),
    choice: ProfileChoice,
) -> Result<PseudoconvexProfile> {
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("extension width must be positive, got {eta}")));
    }
    let axis = gamma.axis();
    if axis >= domain.dim() {
        return Err(Error::UnsupportedGamma(format!("{gamma:?} in {}D", domain.dim())));
    }
    let (a, b) = domain.bounds(axis);
    let width = b - a;
    let length = width + eta;
    let (origin, orientation, extension) = if gamma.is_upper() {
        (a, 1.0, (b, b + eta))
    } else {
        (b, -1.0, (a - eta, a))
    };
    if !(omega.0 > extension.0 && omega.1 < extension.1 && omega.0 < omega.1) {
        return Err(Error::OmegaOutsideExtension { omega, extension });
    }
    let to_xi = |x: f64| orientation * (x - origin);
    let (xi_lo, xi_hi) = {
        let (u, v) = (to_xi(omega.0), to_xi(omega.1));
        (u.min(v), u.max(v))
    };
    let centre = 0.5 * (xi_lo + xi_hi);
    let (shape, peak) = match choice {
        ProfileChoice::Tilted => {
            let g = (2.0 * centre - length) / (centre * (length - centre));
            (ProfileShape::Tilted { gamma: g }, centre)
        }
        ProfileChoice::Power { p: None } => {
            let p = centre / (length - centre);
            (ProfileShape::Power { p }, centre)
        }
        ProfileChoice::Power { p: Some(p) } => {
            let peak = p * length / (p + 1.0);
            if !(p > 0.0) || peak <= xi_lo || peak >= xi_hi {
                return Err(Error::NoValidExponent { omega });
            }
            (ProfileShape::Power { p }, peak)
        }
    };
    let tangential = (domain.dim() == 2).then(|| domain.bounds(1 - axis));
    Ok(PseudoconvexProfile {
        dim: domain.dim(),
        normal_axis: axis,
        origin,
        orientation,
        length,
        peak,
        shape,
        tangential,
    })
}

impl ParabolicGeometry {
    pub fn new(domain: &DomainSpec, gamma: FaceLabel, opts: &ParabolicOptions) -> Result<Self> {
        let dim = domain.dim();
        let axis = gamma.axis();
        if axis >= dim {
            return Err(Error::UnsupportedGamma(format!("{gamma:?} in {dim}D")));
        }
        let eta = opts.eta.unwrap_or(0.5 * domain.diameter());
        let (a, b) = domain.bounds(axis);
        let omega_n = opts.omega.unwrap_or(if gamma.is_upper() {
            (b + eta / 3.0, b + 2.0 * eta / 3.0)
        } else {
            (a - 2.0 * eta / 3.0, a - eta / 3.0)
        });
        let d = construct_d(domain, gamma, eta, omega_n, opts.profile)?;

        let mut omega1 = domain.bounding_box();
        if gamma.is_upper() {
            omega1.hi[axis] = b + eta;
        } else {
            omega1.lo[axis] = a - eta;
        }
        let mut omega = omega1;
        omega.lo[axis] = omega_n.0;
        omega.hi[axis] = omega_n.1;
        if dim == 2 {
            let (lo, hi) = domain.bounds(1 - axis);
            omega.lo[1 - axis] = lo + (hi - lo) / 3.0;
            omega.hi[1 - axis] = lo + 2.0 * (hi - lo) / 3.0;
        }

        let omega0 = match opts.omega0 {
            Some(bx) => bx,
            None => {
                let mut bx = domain.bounding_box();
                if gamma.is_upper() {
                    bx.lo[axis] = a + 0.5 * (b - a);
                } else {
                    bx.hi[axis] = a + 0.5 * (b - a);
                }
                if dim == 2 {
                    let (lo, hi) = domain.bounds(1 - axis);
                    bx.lo[1 - axis] = lo + 0.25 * (hi - lo);
                    bx.hi[1 - axis] = hi - 0.25 * (hi - lo);
                }
                bx
            }
        };
        let extent = domain.face_extent(gamma);
        let geom = ParabolicGeometry {
            domain: domain.clone(),
            gamma: GammaPiece {
                face: gamma,
                range: extent,
            },
            eta,
            omega1,
            omega,
            omega0,
            d,
        };
        geom.validate_omega0()?;
        geom.verify_nodewise()?;
        Ok(geom)
    }

    fn validate_omega0(&self) -> Result<()> {
        let dim = self.domain.dim();
        let full = self.domain.bounding_box();
        for k in 0..dim {
            if self.omega0.lo[k] >= self.omega0.hi[k] {
                return Err(Error::InvalidSubdomain(format!("empty omega0 {:?}", self.omega0)));
            }
            if self.omega0.lo[k] < full.lo[k] || self.omega0.hi[k] > full.hi[k] {
                return Err(Error::InvalidSubdomain(format!(
                    "omega0 {:?} leaves the domain",
                    self.omega0
                )));
            }
        }
        // The closure of omega0 may only meet the boundary on the observation face.
        for face in &self.domain.faces {
            if face.label == self.gamma.face {
                continue;
            }
            let k = face.label.axis();
            let touches = if face.label.is_upper() {
                self.omega0.hi[k] >= full.hi[k]
            } else {
                self.omega0.lo[k] <= full.lo[k]
            };
            if touches {
                return Err(Error::InvalidSubdomain(format!(
                    "omega0 {:?} touches {:?}, outside the observation boundary",
                    self.omega0, face.label
                )));
            }
        }
        Ok(())
    }

    /// Nodewise check of positivity, boundary vanishing and non-degenerate
    /// gradient away from omega. Corner nodes of a rectangular enlarged
    /// domain are skipped: every product profile has a zero gradient there.
    pub fn verify_nodewise(&self) -> Result<()> {
        let dim = self.domain.dim();
        let h = self.domain.min_spacing();
        let counts: Vec<usize> = (0..dim)
            .map(|k| ((self.omega1.hi[k] - self.omega1.lo[k]) / h).round() as usize + 1)
            .collect();
        let scale = self.d.max_on(&self.omega1);
        let zero_tol = 1e-12 * scale.max(1.0);
        let total: usize = counts.iter().product();
        for flat in 0..total {
            let mi = if dim == 1 {
                [flat, 0]
            } else {
                [flat / counts[1], flat % counts[1]]
            };
            let mut p = [0.0; 2];
            let mut on_boundary = 0;
            for k in 0..dim {
                let n = counts[k];
                let t = mi[k] as f64 / (n - 1) as f64;
                p[k] = self.omega1.lo[k] + t * (self.omega1.hi[k] - self.omega1.lo[k]);
                if mi[k] == 0 || mi[k] == n - 1 {
                    on_boundary += 1;
                }
            }
            let value = self.d.eval(&p);
            if on_boundary > 0 {
                if value.abs() > zero_tol {
                    return Err(Error::ConditionViolation(format!(
                        "d = {value:e} on the enlarged boundary at {p:?}"
                    )));
                }
            } else if !(value > 0.0) {
                return Err(Error::ConditionViolation(format!(
                    "d = {value:e} is not positive inside the enlarged domain at {p:?}"
                )));
            }
            let corner = dim == 2 && on_boundary == 2;
            if !corner && !self.omega.contains(&p, dim, 0.0) {
                let g = self.d.grad(&p);
                let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if !(norm > 1e-10) {
                    return Err(Error::ConditionViolation(format!(
                        "|grad d| = {norm:e} vanishes outside omega at {p:?}"
                    )));
                }
            }
        }
        for idx in 0..self.domain.n_nodes() {
            let p = self.domain.point(idx);
            let value = self.d.eval(&p);
            if self.omega0.contains(&p, dim, 1e-12) && !(value > 0.0) {
                return Err(Error::ConditionViolation(format!(
                    "d = {value:e} is not positive on the closure of omega0 at {p:?}"
                )));
            }
            if self.domain.is_boundary_node(idx) && !self.on_gamma(&p) && value.abs() > zero_tol {
                return Err(Error::ConditionViolation(format!(
                    "d = {value:e} off the observation boundary at {p:?}"
                )));
            }
        }
        Ok(())
    }

    /// Whether a boundary point belongs to the relatively open observation face.
    pub fn on_gamma(&self, p: &Point) -> bool {
        let axis = self.gamma.face.axis();
        let (a, b) = self.domain.bounds(axis);
        let fixed = if self.gamma.face.is_upper() { b } else { a };
        if (p[axis] - fixed).abs() > 1e-12 {
            return false;
        }
        if self.domain.dim() == 1 {
            return true;
        }
        let (lo, hi) = self.gamma.range;
        let s = p[1 - axis];
        s > lo && s < hi
    }

    /// `min d` over the closure of omega0.
    pub fn d_min_omega0(&self) -> f64 {
        self.d.min_on(&self.omega0)
    }

    /// `max d` over the closure of the domain.
    pub fn d_max_domain(&self) -> f64 {
        self.d.max_on(&self.domain.bounding_box())
    }

    /// `max d` over the closure of the unobserved boundary; zero by construction.
    pub fn d_max_unobserved(&self) -> f64 {
        self.domain
            .faces
            .iter()
            .filter(|f| f.label != self.gamma.face)
            .flat_map(|f| self.domain.face_nodes(f.label))
            .map(|i| self.d.eval(&self.domain.point(i)))
            .fold(0.0, f64::max)
    }
}
