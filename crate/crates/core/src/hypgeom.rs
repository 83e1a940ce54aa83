//! Hyperbolic geometry in the hyperboloid model.
//!
//! Points of `H^d` are stored as vectors `(x_0, x_1, ..., x_d)` on the upper
//! sheet `<x, x>_M = -1`, `x_0 >= 1`, where
//! `<a, b>_M = -a_0 b_0 + sum_{i >= 1} a_i b_i` is the Minkowski form. Tangent
//! vectors at `p` are Minkowski-orthogonal to `p`. The Poincaré ball is used
//! only for drawing.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Tolerance used when validating the hyperboloid and tangent invariants.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Points closer than this have no well defined direction between them.
pub const DEGENERATE_DIST: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("dimension mismatch: {left} vs {right} coordinates")]
    DimensionMismatch { left: usize, right: usize },
    #[error("hyperbolic dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("not a point of the hyperboloid: <x,x> = {norm}, x_0 = {x0}")]
    NotOnHyperboloid { norm: f64, x0: f64 },
    #[error("not a unit tangent vector: <v,v> = {norm}, <p,v> = {ortho}")]
    NotUnitTangent { norm: f64, ortho: f64 },
    #[error("geodesic parameter must be non-negative, got {0}")]
    NegativeParameter(f64),
    #[error("points are {0} apart; direction between them is degenerate")]
    DegenerateDirection(f64),
    #[error("spatial coordinate index {0} out of range")]
    AxisOutOfRange(usize),
}

pub type Result<T> = std::result::Result<T, GeomError>;

/// Minkowski bilinear form `-a_0 b_0 + sum a_i b_i`.
pub fn minkowski_dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GeomError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(mdot(a, b))
}

#[inline]
pub(crate) fn mdot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let spatial: f64 = a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum();
    spatial - a[0] * b[0]
}

/// A point of `H^d` in hyperboloid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct HPoint {
    coords: Vec<f64>,
}

impl HPoint {
    /// The base point `(1, 0, ..., 0)`.
    pub fn origin(d: usize) -> Self {
        let mut coords = vec![0.0; d + 1];
        coords[0] = 1.0;
        Self { coords }
    }

    /// Validates `coords` against the hyperboloid invariant and re-projects.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(GeomError::InvalidDimension(coords.len().saturating_sub(1)));
        }
        let norm = mdot(&coords, &coords);
        if (norm + 1.0).abs() > INVARIANT_TOL * coords[0].abs().max(1.0).powi(2) || coords[0] < 1.0 - INVARIANT_TOL {
            return Err(GeomError::NotOnHyperboloid { norm, x0: coords[0] });
        }
        Ok(Self::project(coords))
    }

    /// The point whose spatial coordinates are `spatial`; `x_0` is solved for.
    pub fn from_spatial(spatial: &[f64]) -> Self {
        let sq: f64 = spatial.iter().map(|x| x * x).sum();
        let mut coords = Vec::with_capacity(spatial.len() + 1);
        coords.push((1.0 + sq).sqrt());
        coords.extend_from_slice(spatial);
        Self { coords }
    }

    /// Rescales an ambient timelike vector back onto the upper sheet.
    pub(crate) fn project(mut coords: Vec<f64>) -> Self {
        let norm = -mdot(&coords, &coords);
        let scale = if norm > 0.0 { norm.sqrt().recip() } else { 1.0 };
        if coords[0] < 0.0 {
            coords.iter_mut().for_each(|x| *x = -*x);
        }
        coords.iter_mut().for_each(|x| *x *= scale);
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn spatial(&self) -> &[f64] {
        &self.coords[1..]
    }

    /// Dimension `d` of the hyperbolic space the point lives in.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn is_origin(&self) -> bool {
        self.spatial().iter().all(|&x| x == 0.0)
    }
}

/// A unit tangent vector `dir` at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTangent {
    base: HPoint,
    dir: Vec<f64>,
}

impl UnitTangent {
    /// Validates the unit-length and orthogonality invariants, then re-projects.
    pub fn new(base: HPoint, dir: Vec<f64>) -> Result<Self> {
        if dir.len() != base.coords.len() {
            return Err(GeomError::DimensionMismatch {
                left: base.coords.len(),
                right: dir.len(),
            });
        }
        let norm = mdot(&dir, &dir);
        let ortho = mdot(&dir, &base.coords);
        let scale = base.coords[0];
        if (norm - 1.0).abs() > INVARIANT_TOL * scale * scale || ortho.abs() > INVARIANT_TOL * scale {
            return Err(GeomError::NotUnitTangent { norm, ortho });
        }
        Ok(Self::project(base, dir))
    }

    /// Removes the component along `base` and normalises.
    pub(crate) fn project(base: HPoint, mut dir: Vec<f64>) -> Self {
        let along = mdot(&dir, &base.coords);
        for (v, p) in dir.iter_mut().zip(&base.coords) {
            *v += along * p;
        }
        let norm = mdot(&dir, &dir).max(f64::MIN_POSITIVE).sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);
        Self { base, dir }
    }

    /// Carries the spatial vector `v` (a tangent vector at the origin) to
    /// `base` with the canonical boost taking the origin to `base`.
    ///
    /// At the origin this is the identity, so `from_spatial(origin, e_i)` is
    /// the i-th coordinate direction.
    pub fn from_spatial(base: &HPoint, v: &[f64]) -> Result<Self> {
        if v.len() != base.dim() {
            return Err(GeomError::DimensionMismatch {
                left: base.dim(),
                right: v.len(),
            });
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len == 0.0 || !len.is_finite() {
            return Err(GeomError::NotUnitTangent { norm: len * len, ortho: 0.0 });
        }
        let mut ambient = Vec::with_capacity(v.len() + 1);
        ambient.push(0.0);
        ambient.extend(v.iter().map(|x| x / len));
        let dir = boost_from_origin(base, &ambient);
        Ok(Self::project(base.clone(), dir))
    }

    /// The i-th coordinate direction (1-based spatial axis) carried to `base`.
    pub fn axis(base: &HPoint, i: usize) -> Result<Self> {
        if i == 0 || i > base.dim() {
            return Err(GeomError::AxisOutOfRange(i));
        }
        let mut v = vec![0.0; base.dim()];
        v[i - 1] = 1.0;
        Self::from_spatial(base, &v)
    }

    pub fn base(&self) -> &HPoint {
        &self.base
    }

    pub fn dir(&self) -> &[f64] {
        &self.dir
    }

    pub fn negated(&self) -> Self {
        Self {
            base: self.base.clone(),
            dir: self.dir.iter().map(|x| -x).collect(),
        }
    }

    /// Velocity of the geodesic `t -> exp(base, self, t)` at time `t`,
    /// `cosh(t) u + sinh(t) p`, based at the point reached.
    pub fn transported(&self, t: f64) -> Result<Self> {
        let base = exp_map(&self.base, self, t)?;
        let (s, c) = (t.sinh(), t.cosh());
        let dir = self
            .dir
            .iter()
            .zip(self.base.coords())
            .map(|(u, p)| c * u + s * p)
            .collect();
        Ok(Self::project(base, dir))
    }
}

/// A geodesic ray; the origin is the base point of its direction.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicRay {
    direction: UnitTangent,
}

impl GeodesicRay {
    pub fn new(direction: UnitTangent) -> Self {
        Self { direction }
    }

    pub fn origin(&self) -> &HPoint {
        self.direction.base()
    }

    pub fn direction(&self) -> &UnitTangent {
        &self.direction
    }

    pub fn point_at(&self, t: f64) -> Result<HPoint> {
        exp_map(self.origin(), &self.direction, t)
    }
}

/// Hyperbolic distance `acosh(-<x, y>)`.
///
/// Near the diagonal acosh amplifies rounding, so short distances use
/// `<x - y, x - y> = 4 sinh^2(d / 2)` instead.
pub fn dist(x: &HPoint, y: &HPoint) -> f64 {
    let c = -mdot(&x.coords, &y.coords);
    if c > 2.0 {
        return c.acosh();
    }
    let chord: f64 = x
        .coords
        .iter()
        .zip(&y.coords)
        .enumerate()
        .map(|(i, (a, b))| if i == 0 { -(a - b) * (a - b) } else { (a - b) * (a - b) })
        .sum();
    2.0 * (0.5 * chord.max(0.0).sqrt()).asinh()
}

/// Point at distance `t` from `p` along the geodesic with initial velocity `u`.
pub fn exp_map(p: &HPoint, u: &UnitTangent, t: f64) -> Result<HPoint> {
    if t < 0.0 || t.is_nan() {
        return Err(GeomError::NegativeParameter(t));
    }
    if t == 0.0 {
        return Ok(p.clone());
    }
    let (s, c) = (t.sinh(), t.cosh());
    let coords = p.coords.iter().zip(&u.dir).map(|(x, v)| c * x + s * v).collect();
    Ok(HPoint::project(coords))
}

/// Unit direction at `p` of the geodesic towards `q` (logarithm map, normalised).
pub fn direction_to(p: &HPoint, q: &HPoint) -> Result<UnitTangent> {
    let d = dist(p, q);
    if d < DEGENERATE_DIST {
        return Err(GeomError::DegenerateDirection(d));
    }
    let pq = mdot(&p.coords, &q.coords);
    let dir = q.coords.iter().zip(&p.coords).map(|(y, x)| y + pq * x).collect();
    Ok(UnitTangent::project(p.clone(), dir))
}

/// Angle in `[0, pi]` between two unit tangents sharing a base point.
pub fn angle(u: &UnitTangent, v: &UnitTangent) -> f64 {
    mdot(&u.dir, &v.dir).clamp(-1.0, 1.0).acos()
}

/// Uniformly distributed unit tangent at `p`.
pub fn random_direction<R: Rng + ?Sized>(p: &HPoint, rng: &mut R) -> UnitTangent {
    let v = random_unit_vector(p.dim(), rng);
    UnitTangent::from_spatial(p, &v).expect("unit vector of matching length")
}

/// Uniform point on the Euclidean unit sphere in `R^n`.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-300 {
            g.iter_mut().for_each(|x| *x /= len);
            return g;
        }
    }
}

/// The point `exp_p(t v)` for the base point `p` and a spatial unit vector `v`.
pub fn polar_point(v: &[f64], t: f64) -> HPoint {
    let (s, c) = (t.sinh(), t.cosh());
    let mut coords = Vec::with_capacity(v.len() + 1);
    coords.push(c);
    coords.extend(v.iter().map(|x| s * x));
    HPoint { coords }
}

/// Image of `x` in the Poincaré ball.
pub fn to_poincare(x: &HPoint) -> Vec<f64> {
    let denom = 1.0 + x.coords[0];
    x.spatial().iter().map(|v| v / denom).collect()
}

/// Inverse of [`to_poincare`]; `z` must lie in the open unit ball.
pub fn from_poincare(z: &[f64]) -> HPoint {
    let sq: f64 = z.iter().map(|v| v * v).sum();
    let denom = 1.0 - sq;
    let mut coords = Vec::with_capacity(z.len() + 1);
    coords.push((1.0 + sq) / denom);
    coords.extend(z.iter().map(|v| 2.0 * v / denom));
    HPoint::project(coords)
}

/// Distance between two points of the Poincaré ball.
pub fn poincare_dist(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    (1.0 + 2.0 * diff / ((1.0 - na) * (1.0 - nb))).max(1.0).acosh()
}

/// Applies the canonical boost sending the origin to `p` to an ambient vector.
pub fn boost_from_origin(p: &HPoint, y: &[f64]) -> Vec<f64> {
    let p0 = p.coords[0];
    let ps = p.spatial();
    let y0 = y[0];
    let ys = &y[1..];
    let dot: f64 = ps.iter().zip(ys).map(|(a, b)| a * b).sum();
    let k = dot / (1.0 + p0) + y0;
    let mut out = Vec::with_capacity(y.len());
    out.push(p0 * y0 + dot);
    out.extend(ys.iter().zip(ps).map(|(yi, pi)| yi + k * pi));
    out
}

/// Rotation by `theta` in the plane of spatial axes `i`, `j` (1-based).
/// Fixes the origin, so it is an isometry of `H^d` fixing the base point.
pub fn rotate_coords(v: &[f64], i: usize, j: usize, theta: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    let (s, c) = theta.sin_cos();
    out[i] = c * v[i] - s * v[j];
    out[j] = s * v[i] + c * v[j];
    out
}

pub fn rotate_point(x: &HPoint, i: usize, j: usize, theta: f64) -> HPoint {
    HPoint::project(rotate_coords(&x.coords, i, j, theta))
}

pub fn rotate_tangent(u: &UnitTangent, i: usize, j: usize, theta: f64) -> UnitTangent {
    let base = rotate_point(&u.base, i, j, theta);
    UnitTangent::project(base, rotate_coords(&u.dir, i, j, theta))
}

/// A unit tangent at `base` orthogonal to `u` (for `d = 2` the unique one up
/// to sign), built by Gram–Schmidt against the coordinate axes.
pub fn orthogonal_tangent(u: &UnitTangent) -> UnitTangent {
    let base = u.base();
    let d = base.dim();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 1..=d {
        let mut e = vec![0.0; d + 1];
        e[i] = 1.0;
        let pe = mdot(&e, base.coords());
        let ue = mdot(&e, u.dir());
        let w: Vec<f64> = e
            .iter()
            .zip(base.coords())
            .zip(u.dir())
            .map(|((ei, pi), ui)| ei + pe * pi - ue * ui)
            .collect();
        let n = mdot(&w, &w);
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, w));
        }
    }
    let (_, w) = best.expect("d >= 2 gives at least one axis");
    UnitTangent::project(base.clone(), w)
}

/// The unit tangent `cos(theta) u + sin(theta) w`.
pub fn rotate_in_plane(u: &UnitTangent, w: &UnitTangent, theta: f64) -> UnitTangent {
    let (s, c) = theta.sin_cos();
    let dir = u.dir.iter().zip(&w.dir).map(|(a, b)| c * a + s * b).collect();
    UnitTangent::project(u.base.clone(), dir)
}
