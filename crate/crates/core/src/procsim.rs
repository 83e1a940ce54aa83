//! Samplers for Poisson points, ball-grain Boolean models and Poisson
//! hyperplane processes in windows around the base point.
//!
//! Grains and hyperplanes are generated in radial shells of width
//! [`SHELL_WIDTH`], innermost first, from a single random stream. A full
//! sample is the union of all shells of its window; ray casting can stop
//! after the first few shells once every ray is resolved (see
//! [`ShellScene`]). Both paths consume the stream identically, so a lazily
//! grown scene is always a prefix of the full sample with the same seed.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::closedform::{self, ClosedFormError, GrainLaw};
use crate::hypgeom::{
    dist, mdot, polar_point, random_unit_vector, rotate_point, GeomError, HPoint, UnitTangent, INVARIANT_TOL,
};
use crate::quadrature::{integrate, QuadratureError, Tolerance};
use crate::stats::{EstimateRecord, StatsError, Summary};

/// Refuse to draw more than this many objects in expectation.
pub const MAX_EXPECTED_COUNT: f64 = 1e8;

/// Radial width of one generation shell.
pub const SHELL_WIDTH: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("expected {expected:.3e} objects, above the limit of {limit:.0e}")]
    ResourceLimit { expected: f64, limit: f64 },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("cutoff {cutoff} exceeds the safe window radius {safe}")]
    WindowTooSmall { cutoff: f64, safe: f64 },
    #[error(
        "visibility rate {rate} is not above d - 1 = {edge}, so the mean visible volume is infinite; \
         use a truncated target instead"
    )]
    BelowThreshold { rate: f64, edge: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SimError::InvalidParameter { name, value })
    }
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(GeomError::InvalidDimension(d).into())
    } else {
        Ok(())
    }
}

/// Poisson draw with the resource guard applied to its mean.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean.is_nan() || mean < 0.0 || !mean.is_finite() {
        return Err(SimError::InvalidParameter { name: "mean", value: mean });
    }
    if mean > MAX_EXPECTED_COUNT {
        return Err(SimError::ResourceLimit {
            expected: mean,
            limit: MAX_EXPECTED_COUNT,
        });
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(mean).map_err(|_| SimError::InvalidParameter { name: "mean", value: mean })?;
    Ok(poisson.sample(rng) as u64)
}

/// A ball grain.
#[derive(Debug, Clone, PartialEq)]
pub struct BallGrain {
    pub center: HPoint,
    pub radius: f64,
}

impl BallGrain {
    pub fn new(center: HPoint, radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        Ok(Self { center, radius })
    }

    pub fn contains(&self, x: &HPoint) -> bool {
        dist(&self.center, x) <= self.radius
    }

    /// Whether the grain contains the base point; cheaper than `contains`.
    pub fn covers_origin(&self) -> bool {
        self.center.coords()[0] <= self.radius.cosh()
    }
}

/// How a Boolean model sample is conditioned on the base point being uncovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    None,
    /// Drop grains that contain the base point.
    #[default]
    Delete,
    /// Redraw the whole realization until the base point is uncovered.
    Reject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BooleanModelSample {
    pub d: usize,
    pub grains: Vec<BallGrain>,
    /// Radius of the ball holding all grain centers.
    pub window_radius: f64,
    /// Radius of the ball in which the sample is complete.
    pub observation_radius: f64,
    pub max_grain_radius: f64,
    pub conditioned: bool,
}

impl BooleanModelSample {
    /// The sample moved by a rotation about the base point.
    pub fn rotated(&self, i: usize, j: usize, theta: f64) -> Self {
        Self {
            grains: self
                .grains
                .iter()
                .map(|g| BallGrain {
                    center: rotate_point(&g.center, i, j, theta),
                    radius: g.radius,
                })
                .collect(),
            ..self.clone()
        }
    }

    /// Distance from the base point to the nearest grain, if any.
    pub fn nearest_grain_distance(&self) -> Option<f64> {
        let origin = HPoint::origin(self.d);
        self.grains
            .iter()
            .map(|g| (dist(&origin, &g.center) - g.radius).max(0.0))
            .min_by(f64::total_cmp)
    }
}

/// A totally geodesic hyperplane `{x : <x, n> = 0}` with unit spacelike normal `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    normal: Vec<f64>,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>) -> Result<Self> {
        if normal.len() < 3 {
            return Err(GeomError::InvalidDimension(normal.len().saturating_sub(1)).into());
        }
        let norm = mdot(&normal, &normal);
        let scale = normal[0].abs().max(1.0);
        if (norm - 1.0).abs() > INVARIANT_TOL * scale * scale {
            return Err(SimError::InvalidParameter { name: "normal norm", value: norm });
        }
        let s = norm.sqrt();
        Ok(Self {
            normal: normal.into_iter().map(|x| x / s).collect(),
        })
    }

    /// The hyperplane orthogonal to the geodesic `exp_p(t u)` at `t = x`.
    pub fn from_offset(u: &UnitTangent, x: f64) -> Self {
        let (s, c) = (x.sinh(), x.cosh());
        let normal = u
            .base()
            .coords()
            .iter()
            .zip(u.dir())
            .map(|(p, v)| s * p + c * v)
            .collect();
        Self { normal }
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn dim(&self) -> usize {
        self.normal.len() - 1
    }

    /// Distance from the base point `(1, 0, ..., 0)`.
    pub fn origin_distance(&self) -> f64 {
        self.normal[0].abs().asinh()
    }

    pub fn rotated(&self, i: usize, j: usize, theta: f64) -> Self {
        Self {
            normal: crate::hypgeom::rotate_coords(&self.normal, i, j, theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneSample {
    pub d: usize,
    pub planes: Vec<Hyperplane>,
    pub window_radius: f64,
}

fn radial_cdf_inverse_2(lo: f64, hi: f64, u: f64) -> f64 {
    // cosh t - 1 = 2 sinh^2(t/2) is uniform between its values at lo and hi.
    let m = |t: f64| 2.0 * (0.5 * t).sinh().powi(2);
    let (a, b) = (m(lo), m(hi));
    let target = a + u * (b - a);
    2.0 * (0.5 * target).sqrt().asinh()
}

/// `(sinh t cosh t - t) / 2`, with a series where the difference cancels.
fn sinh_sq_antiderivative(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        // (sinh 2t - 2t) / 4 expanded
        t * t2 / 3.0 * (1.0 + t2 / 5.0 * (1.0 + 2.0 * t2 / 21.0 * (1.0 + t2 / 18.0)))
    } else {
        0.25 * ((2.0 * t).sinh() - 2.0 * t)
    }
}

fn radial_cdf_inverse_3(lo: f64, hi: f64, u: f64) -> f64 {
    let (fa, fb) = (sinh_sq_antiderivative(lo), sinh_sq_antiderivative(hi));
    let target = fa + u * (fb - fa);
    let (mut a, mut b) = (lo, hi);
    let mut t = lo + u * (hi - lo);
    for _ in 0..200 {
        let f = sinh_sq_antiderivative(t) - target;
        if f > 0.0 {
            b = t;
        } else {
            a = t;
        }
        let slope = t.sinh().powi(2);
        let newton = t - f / slope;
        let next = if slope > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - t).abs() <= 1e-15 * t.abs().max(1e-300) || b - a <= f64::EPSILON * b {
            return next.clamp(lo, hi);
        }
        t = next;
    }
    t.clamp(lo, hi)
}

/// Draw from density `e^(k t)` on `[lo, hi]`.
fn sample_exponential_tilt<R: Rng + ?Sized>(k: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (lo + (u * (k * (hi - lo)).exp_m1()).ln_1p() / k).min(hi)
}

/// Radius in `[lo, hi]` with density proportional to `sinh^(d-1)(t)`.
pub fn sample_radial_between<R: Rng + ?Sized>(d: usize, lo: f64, hi: f64, rng: &mut R) -> f64 {
    match d {
        2 => radial_cdf_inverse_2(lo, hi, rng.random()),
        3 => radial_cdf_inverse_3(lo, hi, rng.random()),
        _ => {
            // envelope (e^t / 2)^(d-1); acceptance (1 - e^(-2t))^(d-1)
            let k = (d - 1) as f64;
            loop {
                let t = sample_exponential_tilt(k, lo, hi, rng);
                let accept = (-(-2.0 * t).exp_m1()).powi(d as i32 - 1);
                if rng.random::<f64>() < accept {
                    return t;
                }
            }
        }
    }
}

/// Distance from the base point of a uniform point of `B(p, r_max)`.
pub fn sample_radial<R: Rng + ?Sized>(d: usize, r_max: f64, rng: &mut R) -> Result<f64> {
    check_dim(d)?;
    check_positive("R_max", r_max)?;
    Ok(sample_radial_between(d, 0.0, r_max, rng))
}

/// Poisson process of intensity `gamma` restricted to `B(p, r_max)`.
pub fn sample_poisson_ball<R: Rng + ?Sized>(d: usize, gamma: f64, r_max: f64, rng: &mut R) -> Result<Vec<HPoint>> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_positive("R_max", r_max)?;
    let n = poisson_count(gamma * closedform::ball_volume(d, r_max)?, rng)?;
    Ok((0..n)
        .map(|_| {
            let t = sample_radial_between(d, 0.0, r_max, rng);
            polar_point(&random_unit_vector(d, rng), t)
        })
        .collect())
}

/// A scene that can be grown shell by shell.
pub trait ShellScene {
    type Obstacle;

    fn obstacles(&self) -> &[Self::Obstacle];

    /// Every obstacle not generated yet is hit, if at all, at ray parameters
    /// beyond this value.
    fn settled(&self) -> f64;

    /// Generates the next shell; `false` once the window is complete.
    fn grow<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool>;
}

/// Ball-grain Boolean model grown shell by shell.
#[derive(Debug, Clone)]
pub struct GrainShells {
    d: usize,
    gamma: f64,
    law: GrainLaw,
    r_obs: f64,
    r_cen: f64,
    conditioning: Conditioning,
    next_shell: usize,
    exhausted: bool,
    origin_covered: bool,
    grains: Vec<BallGrain>,
}

impl GrainShells {
    /// Starts a realization observed in `B(p, r_obs)`. With
    /// [`Conditioning::Reject`] the shells that can cover the base point are
    /// drawn immediately, and redrawn until it is uncovered.
    pub fn new<R: Rng + ?Sized>(
        d: usize,
        gamma: f64,
        law: GrainLaw,
        r_obs: f64,
        conditioning: Conditioning,
        rng: &mut R,
    ) -> Result<Self> {
        check_dim(d)?;
        check_positive("gamma", gamma)?;
        check_positive("R_obs", r_obs)?;
        law.validate()?;
        let mut scene = Self {
            d,
            gamma,
            law,
            r_obs,
            r_cen: r_obs + law.max_radius(),
            conditioning,
            next_shell: 0,
            exhausted: false,
            origin_covered: false,
            grains: Vec::new(),
        };
        if conditioning == Conditioning::Reject {
            let reach = law.max_radius();
            loop {
                while !scene.exhausted && scene.shell_lo(scene.next_shell) < reach {
                    scene.grow(rng)?;
                }
                if !scene.origin_covered {
                    break;
                }
                scene.next_shell = 0;
                scene.exhausted = false;
                scene.origin_covered = false;
                scene.grains.clear();
            }
        }
        Ok(scene)
    }

    fn shell_lo(&self, k: usize) -> f64 {
        k as f64 * SHELL_WIDTH
    }

    pub fn grains(&self) -> &[BallGrain] {
        &self.grains
    }

    pub fn is_complete(&self) -> bool {
        self.exhausted
    }

    /// Grows every remaining shell.
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        while self.grow(rng)? {}
        Ok(())
    }

    pub fn into_sample(self) -> BooleanModelSample {
        BooleanModelSample {
            d: self.d,
            grains: self.grains,
            window_radius: self.r_cen,
            observation_radius: self.r_obs,
            max_grain_radius: self.law.max_radius(),
            conditioned: self.conditioning != Conditioning::None,
        }
    }
}

impl ShellScene for GrainShells {
    type Obstacle = BallGrain;

    fn obstacles(&self) -> &[BallGrain] {
        &self.grains
    }

    fn settled(&self) -> f64 {
        if self.exhausted {
            self.r_obs
        } else {
            self.shell_lo(self.next_shell) - self.law.max_radius()
        }
    }

    fn grow<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        if self.exhausted {
            return Ok(false);
        }
        let lo = self.shell_lo(self.next_shell);
        let mut hi = self.shell_lo(self.next_shell + 1);
        if hi >= self.r_cen {
            hi = self.r_cen;
            self.exhausted = true;
        }
        self.next_shell += 1;
        let mean = self.gamma * closedform::omega(self.d) * closedform::radial_mass(self.d, lo, hi)?;
        let n = poisson_count(mean, rng)?;
        for _ in 0..n {
            let t = sample_radial_between(self.d, lo, hi, rng);
            let v = random_unit_vector(self.d, rng);
            let radius = self.law.sample_radius(rng);
            let grain = BallGrain {
                center: polar_point(&v, t),
                radius,
            };
            if grain.covers_origin() {
                match self.conditioning {
                    Conditioning::Delete => continue,
                    Conditioning::Reject => self.origin_covered = true,
                    Conditioning::None => {}
                }
            }
            self.grains.push(grain);
        }
        Ok(true)
    }
}

/// Boolean model with grain centers in `B(p, r_obs + max radius)`.
pub fn sample_boolean_with<R: Rng + ?Sized>(
    d: usize,
    gamma: f64,
    law: GrainLaw,
    r_obs: f64,
    conditioning: Conditioning,
    rng: &mut R,
) -> Result<BooleanModelSample> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_positive("R_obs", r_obs)?;
    let expected = gamma * closedform::ball_volume(d, r_obs + law.max_radius())?;
    if expected > MAX_EXPECTED_COUNT {
        return Err(SimError::ResourceLimit {
            expected,
            limit: MAX_EXPECTED_COUNT,
        });
    }
    let mut scene = GrainShells::new(d, gamma, law, r_obs, conditioning, rng)?;
    scene.fill(rng)?;
    Ok(scene.into_sample())
}

pub fn sample_boolean<R: Rng + ?Sized>(
    d: usize,
    gamma: f64,
    law: GrainLaw,
    r_obs: f64,
    rng: &mut R,
    condition_origin_free: bool,
) -> Result<BooleanModelSample> {
    let conditioning = if condition_origin_free {
        Conditioning::Delete
    } else {
        Conditioning::None
    };
    sample_boolean_with(d, gamma, law, r_obs, conditioning, rng)
}

/// `integral_lo^hi cosh^(d-1)`.
pub fn cosh_mass(d: usize, lo: f64, hi: f64) -> Result<f64> {
    match d {
        2 => Ok(hi.sinh() - lo.sinh()),
        3 => Ok(0.25 * ((2.0 * hi).sinh() - (2.0 * lo).sinh()) + 0.5 * (hi - lo)),
        _ => {
            let p = d as i32 - 1;
            Ok(integrate(|t: f64| t.cosh().powi(p), lo, hi, Tolerance::default())?.value)
        }
    }
}

/// Offset in `[lo, hi]` with density proportional to `cosh^(d-1)`.
fn sample_offset<R: Rng + ?Sized>(d: usize, lo: f64, hi: f64, rng: &mut R) -> f64 {
    if d == 2 {
        let (a, b) = (lo.sinh(), hi.sinh());
        return (a + rng.random::<f64>() * (b - a)).asinh().clamp(lo, hi);
    }
    let k = (d - 1) as f64;
    loop {
        let x = sample_exponential_tilt(k, lo, hi, rng);
        let accept = (0.5 * (1.0 + (-2.0 * x).exp())).powi(d as i32 - 1);
        if rng.random::<f64>() < accept {
            return x;
        }
    }
}

/// Poisson hyperplane process grown by distance from the base point.
#[derive(Debug, Clone)]
pub struct PlaneShells {
    d: usize,
    gamma: f64,
    r_obs: f64,
    next_shell: usize,
    exhausted: bool,
    planes: Vec<Hyperplane>,
}

impl PlaneShells {
    pub fn new(d: usize, gamma: f64, r_obs: f64) -> Result<Self> {
        check_dim(d)?;
        check_positive("gamma", gamma)?;
        check_positive("R_obs", r_obs)?;
        Ok(Self {
            d,
            gamma,
            r_obs,
            next_shell: 0,
            exhausted: false,
            planes: Vec::new(),
        })
    }

    pub fn planes(&self) -> &[Hyperplane] {
        &self.planes
    }

    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        while self.grow(rng)? {}
        Ok(())
    }

    pub fn into_sample(self) -> HyperplaneSample {
        HyperplaneSample {
            d: self.d,
            planes: self.planes,
            window_radius: self.r_obs,
        }
    }
}

impl ShellScene for PlaneShells {
    type Obstacle = Hyperplane;

    fn obstacles(&self) -> &[Hyperplane] {
        &self.planes
    }

    fn settled(&self) -> f64 {
        if self.exhausted {
            self.r_obs
        } else {
            self.next_shell as f64 * SHELL_WIDTH
        }
    }

    fn grow<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        if self.exhausted {
            return Ok(false);
        }
        let lo = self.next_shell as f64 * SHELL_WIDTH;
        let mut hi = (self.next_shell + 1) as f64 * SHELL_WIDTH;
        if hi >= self.r_obs {
            hi = self.r_obs;
            self.exhausted = true;
        }
        self.next_shell += 1;
        // Each plane has one representation (u, x) with x >= 0.
        let n = poisson_count(2.0 * self.gamma * cosh_mass(self.d, lo, hi)?, rng)?;
        let origin = HPoint::origin(self.d);
        for _ in 0..n {
            let x = sample_offset(self.d, lo, hi, rng);
            let v = random_unit_vector(self.d, rng);
            let u = UnitTangent::from_spatial(&origin, &v)?;
            self.planes.push(Hyperplane::from_offset(&u, x));
        }
        Ok(true)
    }
}

/// Poisson hyperplanes of intensity `gamma` hitting `B(p, r_obs)`.
pub fn sample_hyperplanes<R: Rng + ?Sized>(d: usize, gamma: f64, r_obs: f64, rng: &mut R) -> Result<HyperplaneSample> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_positive("R_obs", r_obs)?;
    let expected = 2.0 * gamma * cosh_mass(d, 0.0, r_obs)?;
    if expected > MAX_EXPECTED_COUNT {
        return Err(SimError::ResourceLimit {
            expected,
            limit: MAX_EXPECTED_COUNT,
        });
    }
    let mut scene = PlaneShells::new(d, gamma, r_obs)?;
    scene.fill(rng)?;
    Ok(scene.into_sample())
}

/// Hit-count estimate of the volume of a ball of radius `radius` whose center
/// sits at distance `offset` from the base point.
///
/// Points are drawn uniformly from the cube `[-1, 1]^d` around the Poincaré
/// ball and weighted by the conformal density `(2 / (1 - |z|^2))^d`.
pub fn estimate_ball_volume<R: Rng + ?Sized>(
    d: usize,
    radius: f64,
    offset: f64,
    n: usize,
    rng: &mut R,
    seed: u64,
) -> Result<EstimateRecord> {
    check_dim(d)?;
    check_positive("radius", radius)?;
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(SimError::InvalidParameter { name: "offset", value: offset });
    }
    if n < 2 {
        return Err(SimError::InvalidParameter { name: "n", value: n as f64 });
    }
    let mut axis = vec![0.0; d];
    axis[0] = 1.0;
    let center = polar_point(&axis, offset);
    let cube = 2f64.powi(d as i32);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        z.iter_mut().for_each(|x| *x = 2.0 * rng.random::<f64>() - 1.0);
        let sq: f64 = z.iter().map(|x| x * x).sum();
        if sq >= 1.0 {
            continue;
        }
        let x = crate::hypgeom::from_poincare(&z);
        if dist(&x, &center) <= radius {
            let w = cube * (2.0 / (1.0 - sq)).powi(d as i32);
            sum += w;
            sum_sq += w * w;
        }
    }
    let nf = n as f64;
    let mean = sum / nf;
    let variance = (sum_sq - nf * mean * mean) / (nf - 1.0);
    let summary = Summary {
        n,
        mean,
        variance,
        stderr: (variance.max(0.0) / nf).sqrt(),
    };
    Ok(EstimateRecord::new("ball_volume", d, 0.0, &summary, seed)
        .with_closed_form(Some(closedform::ball_volume(d, radius)?)))
}
