//! Constants and closed-form expressions for ball-grain Boolean models and
//! Poisson hyperplane processes in `H^d`, together with quadrature routes
//! that cross-check them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::quadrature::{integrate, integrate_to_infinity, QuadratureError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosedFormError {
    #[error("dimension {0} is not supported here")]
    InvalidDimension(usize),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid grain law: {0}")]
    InvalidLaw(String),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub type Result<T> = std::result::Result<T, ClosedFormError>;

/// Rates within this relative distance of `d - 1` count as critical.
/// Absorbs the rounding in `gamma * v*` when `gamma` is itself a computed
/// threshold such as `beta_c`.
pub const CRITICAL_REL_TOL: f64 = 8.0 * f64::EPSILON;

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(ClosedFormError::InvalidDimension(d))
    } else {
        Ok(())
    }
}

fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ClosedFormError::InvalidParameter { name, value })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ClosedFormError::InvalidParameter { name, value })
    }
}

/// Volume of the Euclidean unit ball in `R^n`.
pub fn kappa(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    (half * PI.ln() - ln_gamma(1.0 + half)).exp()
}

/// Surface area of the Euclidean unit sphere in `R^n`, `n * kappa(n)`.
pub fn omega(n: usize) -> f64 {
    n as f64 * kappa(n)
}

/// Per-dimension constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub d: usize,
    pub kappa_d: f64,
    pub omega_d: f64,
}

impl Constants {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            d,
            kappa_d: kappa(d),
            omega_d: omega(d),
        })
    }
}

/// Finite value or divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FiniteOrInfinite {
    Finite(f64),
    Infinite,
}

impl FiniteOrInfinite {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinite)
    }
}

impl fmt::Display for FiniteOrInfinite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

/// Law of the typical grain: a ball of fixed or uniformly random radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GrainLaw {
    Fixed { radius: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl GrainLaw {
    pub fn fixed(radius: f64) -> Result<Self> {
        let law = Self::Fixed { radius };
        law.validate()?;
        Ok(law)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let law = Self::Uniform { lo, hi };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed { radius } if radius > 0.0 && radius.is_finite() => Ok(()),
            Self::Fixed { radius } => Err(ClosedFormError::InvalidLaw(format!(
                "fixed radius must be positive, got {radius}"
            ))),
            Self::Uniform { lo, hi } if lo >= 0.0 && hi > lo && hi.is_finite() => Ok(()),
            Self::Uniform { lo, hi } => Err(ClosedFormError::InvalidLaw(format!(
                "uniform radius law needs 0 <= lo < hi, got [{lo}, {hi}]"
            ))),
        }
    }

    /// Largest radius the law can produce.
    pub fn max_radius(&self) -> f64 {
        match *self {
            Self::Fixed { radius } => radius,
            Self::Uniform { hi, .. } => hi,
        }
    }

    /// Draws a radius; the zero radius of `Uniform { lo: 0, .. }` is redrawn.
    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Fixed { radius } => radius,
            Self::Uniform { lo, hi } => loop {
                let r = lo + (hi - lo) * rng.random::<f64>();
                if r > 0.0 {
                    break r;
                }
            },
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            Self::Fixed { .. } => "fixed",
            Self::Uniform { .. } => "uniform",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Fixed { radius } => vec![radius],
            Self::Uniform { lo, hi } => vec![lo, hi],
        }
    }
}

impl fmt::Display for GrainLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed { radius } => write!(f, "fixed:{radius}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
        }
    }
}

impl FromStr for GrainLaw {
    type Err = ClosedFormError;

    /// Parses `fixed:R` or `uniform:A,B`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || ClosedFormError::InvalidLaw(format!("cannot parse '{s}', expected fixed:R or uniform:A,B"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind.trim(), nums.as_slice()) {
            ("fixed", [r]) => Self::fixed(*r),
            ("uniform", [a, b]) => Self::uniform(*a, *b),
            _ => Err(bad()),
        }
    }
}

/// Mean boundary content and volume of the typical grain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrainMoments {
    pub d: usize,
    pub v_dm1: f64,
    pub v_dm1_star: f64,
    pub mean_volume: f64,
}

/// `integral_lo^hi sinh^(d-1)(t) dt`, exact for `d <= 3`.
pub fn radial_mass(d: usize, lo: f64, hi: f64) -> Result<f64> {
    let anti3 = |t: f64| 0.5 * (t.sinh() * t.cosh() - t);
    match d {
        0 => Err(ClosedFormError::InvalidDimension(0)),
        1 => Ok(hi - lo),
        2 => Ok(hi.cosh() - lo.cosh()),
        3 => Ok(anti3(hi) - anti3(lo)),
        _ => {
            let p = (d - 1) as i32;
            Ok(integrate(|t: f64| t.sinh().powi(p), lo, hi, Tolerance::default())?.value)
        }
    }
}

/// Coefficient function `omega_{d-j} integral_0^r cosh^j sinh^(d-1-j)`.
pub fn ell(d: usize, j: usize, r: f64) -> Result<f64> {
    if d == 0 || j >= d {
        return Err(ClosedFormError::IndexOutOfRange(format!("need 0 <= j <= d-1, got d={d}, j={j}")));
    }
    check_non_negative("r", r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let (jc, js) = (j as i32, (d - 1 - j) as i32);
    let integral = integrate(|t: f64| t.cosh().powi(jc) * t.sinh().powi(js), 0.0, r, Tolerance::default())?;
    Ok(omega(d - j) * integral.value)
}

/// Derivative of [`ell`] in `r`.
pub fn ell_derivative(d: usize, j: usize, r: f64) -> Result<f64> {
    if d == 0 || j >= d {
        return Err(ClosedFormError::IndexOutOfRange(format!("need 0 <= j <= d-1, got d={d}, j={j}")));
    }
    Ok(omega(d - j) * r.cosh().powi(j as i32) * r.sinh().powi((d - 1 - j) as i32))
}

/// Volume of a ball of radius `radius`.
pub fn ball_volume(d: usize, radius: f64) -> Result<f64> {
    check_dim(d)?;
    check_non_negative("radius", radius)?;
    Ok(omega(d) * radial_mass(d, 0.0, radius)?)
}

/// Boundary content `omega_d sinh^(d-1)(R)` of a ball.
pub fn ball_surface(d: usize, radius: f64) -> Result<f64> {
    check_dim(d)?;
    check_non_negative("radius", radius)?;
    Ok(omega(d) * radius.sinh().powi((d - 1) as i32))
}

/// `kappa_{d-1} / (d kappa_d)`, the factor turning `v_{d-1}` into `v*_{d-1}`.
pub fn surface_to_rate_factor(d: usize) -> f64 {
    kappa(d - 1) / omega(d)
}

pub fn grain_moments(d: usize, law: &GrainLaw) -> Result<GrainMoments> {
    check_dim(d)?;
    law.validate()?;
    let (v_dm1, mean_volume) = match *law {
        GrainLaw::Fixed { radius } => (ball_surface(d, radius)?, ball_volume(d, radius)?),
        GrainLaw::Uniform { lo, hi } => {
            let tol = Tolerance::new(1e-12, 1e-13);
            let w = hi - lo;
            let surf = integrate(|r| ball_surface(d, r).unwrap_or(f64::NAN), lo, hi, tol)?;
            let vol = integrate(|r| ball_volume(d, r).unwrap_or(f64::NAN), lo, hi, tol)?;
            (surf.value / w, vol.value / w)
        }
    };
    Ok(GrainMoments {
        d,
        v_dm1,
        v_dm1_star: surface_to_rate_factor(d) * v_dm1,
        mean_volume,
    })
}

/// Rate `gamma * v*_{d-1}` of the exponential visibility law.
pub fn boolean_rate(d: usize, gamma: f64, law: &GrainLaw) -> Result<f64> {
    check_non_negative("gamma", gamma)?;
    Ok(gamma * grain_moments(d, law)?.v_dm1_star)
}

/// Probability that the base point is not covered, `exp(-gamma E[V_d])`.
pub fn origin_free_probability(d: usize, gamma: f64, law: &GrainLaw) -> Result<f64> {
    check_non_negative("gamma", gamma)?;
    Ok((-gamma * grain_moments(d, law)?.mean_volume).exp())
}

fn rate_exceeds(a: f64, d: usize) -> bool {
    let edge = (d - 1) as f64;
    a - edge > CRITICAL_REL_TOL * edge
}

/// `integral_0^inf sinh^(d-1)(s) e^(-a s) ds` through the gamma-function form.
pub fn sinh_exp_integral(d: usize, a: f64) -> FiniteOrInfinite {
    if d < 1 || !rate_exceeds(a, d) {
        return FiniteOrInfinite::Infinite;
    }
    // Gamma(d) / 2^d * Gamma(x) / Gamma(x + d) with x = (a - d + 1) / 2; the
    // ratio is a rising factorial since d is an integer.
    let x = (a - d as f64 + 1.0) / 2.0;
    let value = (0..d).fold(1.0, |acc, k| acc * (k.max(1) as f64) / (2.0 * (x + k as f64)));
    FiniteOrInfinite::Finite(value)
}

/// `e^(-a s) sinh^(d-1)(s)` written so that it never overflows.
fn damped_sinh_power(d: usize, a: f64, s: f64) -> f64 {
    let p = (d - 1) as i32;
    let decay = a - (d - 1) as f64;
    (-decay * s).exp() * (-(-2.0 * s).exp_m1()).powi(p) / 2f64.powi(p)
}

/// Quadrature route for [`sinh_exp_integral`]; requires `a > d - 1`.
pub fn sinh_exp_integral_quadrature(d: usize, a: f64) -> Result<f64> {
    if d < 1 || !rate_exceeds(a, d) {
        return Err(ClosedFormError::InvalidParameter { name: "a", value: a });
    }
    let tol = Tolerance::new(1e-15, 1e-13);
    Ok(integrate_to_infinity(|s| damped_sinh_power(d, a, s), 0.0, tol)?.value)
}

/// Mean visible volume for exponential visibility rate `a`.
pub fn mean_visible_volume_for_rate(d: usize, a: f64) -> Result<FiniteOrInfinite> {
    check_dim(d)?;
    Ok(match sinh_exp_integral(d, a) {
        FiniteOrInfinite::Finite(v) => FiniteOrInfinite::Finite(omega(d) * v),
        FiniteOrInfinite::Infinite => FiniteOrInfinite::Infinite,
    })
}

/// Mean visible volume of the Boolean model, conditioned on the base point
/// being uncovered.
pub fn mean_visible_volume(d: usize, gamma: f64, law: &GrainLaw) -> Result<FiniteOrInfinite> {
    check_positive("gamma", gamma)?;
    mean_visible_volume_for_rate(d, boolean_rate(d, gamma, law)?)
}

/// `omega_d integral_0^R e^(-a s) sinh^(d-1)(s) ds`.
pub fn truncated_visible_volume_for_rate(d: usize, a: f64, radius: f64) -> Result<f64> {
    check_dim(d)?;
    check_non_negative("a", a)?;
    check_non_negative("R", radius)?;
    let tol = Tolerance::new(1e-13, 1e-13);
    Ok(omega(d) * integrate(|s| damped_sinh_power(d, a, s), 0.0, radius, tol)?.value)
}

/// Mean volume of the visible region inside `B(p, R)`.
pub fn truncated_visible_volume(d: usize, gamma: f64, law: &GrainLaw, radius: f64) -> Result<f64> {
    check_positive("gamma", gamma)?;
    truncated_visible_volume_for_rate(d, boolean_rate(d, gamma, law)?, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Large-`R` comparator for the truncated mean visible volume.
///
/// Subcritical and critical: the growth of the truncated volume itself.
/// Supercritical: the decay of the gap to the untruncated value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Asymptote {
    pub regime: Regime,
    pub rate: f64,
    pub value: f64,
}

pub fn truncation_asymptote_for_rate(d: usize, a: f64, radius: f64) -> Result<Asymptote> {
    check_dim(d)?;
    check_non_negative("a", a)?;
    let edge = (d - 1) as f64;
    let lead = omega(d) / 2f64.powi(d as i32 - 1);
    let gap = a - edge;
    let (regime, value) = if gap.abs() <= CRITICAL_REL_TOL * edge {
        (Regime::Critical, lead * radius)
    } else if gap < 0.0 {
        (Regime::Subcritical, lead / -gap * (-gap * radius).exp())
    } else {
        (Regime::Supercritical, lead / gap * (-gap * radius).exp())
    };
    Ok(Asymptote { regime, rate: a, value })
}

pub fn truncation_asymptote(d: usize, gamma: f64, law: &GrainLaw, radius: f64) -> Result<Asymptote> {
    check_positive("gamma", gamma)?;
    truncation_asymptote_for_rate(d, boolean_rate(d, gamma, law)?, radius)
}

/// Leading near-critical behaviour `omega_d / (2^(d-1) delta)`.
pub fn critical_scaling(d: usize, delta: f64) -> Result<f64> {
    check_dim(d)?;
    check_positive("delta", delta)?;
    Ok(omega(d) / (2f64.powi(d as i32 - 1) * delta))
}

/// Mean number of boundary intersection points of `d` distinct grains per
/// unit volume, `kappa_d (gamma v*)^d`.
pub fn intersection_density(d: usize, gamma: f64, law: &GrainLaw) -> Result<f64> {
    check_non_negative("gamma", gamma)?;
    let m = grain_moments(d, law)?;
    Ok(kappa(d) * (gamma * m.v_dm1_star).powi(d as i32))
}

/// Critical intensity `(d-1) / (kappa_{d-1} sinh^(d-1)(R))` for balls of radius `R`.
pub fn visibility_threshold(d: usize, radius: f64) -> Result<f64> {
    check_dim(d)?;
    check_positive("R", radius)?;
    Ok((d - 1) as f64 / (kappa(d - 1) * radius.sinh().powi(d as i32 - 1)))
}

/// Exponential rate `2 kappa_{d-1} gamma / (d kappa_d)` of hyperplane visibility.
pub fn zero_cell_rate(d: usize, gamma: f64) -> Result<f64> {
    check_dim(d)?;
    check_non_negative("gamma", gamma)?;
    Ok(2.0 * surface_to_rate_factor(d) * gamma)
}

/// Mean volume of the zero cell of a Poisson hyperplane tessellation.
pub fn zero_cell_mean_volume(d: usize, gamma: f64) -> Result<FiniteOrInfinite> {
    check_positive("gamma", gamma)?;
    mean_visible_volume_for_rate(d, zero_cell_rate(d, gamma)?)
}

/// Mean number of hyperplanes crossing a geodesic segment of length `len`.
pub fn crofton_crossings(d: usize, gamma: f64, len: f64) -> Result<f64> {
    Ok(zero_cell_rate(d, gamma)? * len)
}

/// Residual of the identity
/// `integral_0^r ell_{d,k}(acosh(cosh r / cosh s)) ell'_{k,j}(s) ds = ell_{d,j}(r)`
/// for `0 <= j < k <= d-1`, both sides by quadrature.
///
/// The left side has a square-root cusp at `s = r`; the substitution
/// `s = r (1 - w^2)` makes the integrand smooth.
pub fn verify_ell_identity(d: usize, k: usize, j: usize, r: f64) -> Result<f64> {
    if !(j < k && k < d) {
        return Err(ClosedFormError::IndexOutOfRange(format!(
            "need 0 <= j < k <= d-1, got d={d}, k={k}, j={j}"
        )));
    }
    check_non_negative("r", r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let integrand = |w: f64| -> f64 {
        let gap = r * w * w;
        let s = r - gap;
        // cosh r / cosh s - 1 without cancellation.
        let eps = 2.0 * (0.5 * (r + s)).sinh() * (0.5 * gap).sinh() / s.cosh();
        let rho = (eps + (eps * (2.0 + eps)).sqrt()).ln_1p();
        let outer = ell(d, k, rho).unwrap_or(f64::NAN);
        let inner = ell_derivative(k, j, s).unwrap_or(f64::NAN);
        outer * inner * 2.0 * r * w
    };
    let lhs = integrate(integrand, 0.0, 1.0, Tolerance::new(1e-13, 1e-13))?.value;
    Ok((lhs - ell(d, j, r)?).abs())
}

/// Steiner coefficients of a ball fitted from parallel volumes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinerFit {
    /// `V_0, ..., V_{d-1}` of the ball in the `ell_{d,j}` normalisation.
    pub coefficients: Vec<f64>,
    /// Prediction error of the fitted expansion at the probe radius.
    pub residual: f64,
}

/// Fits the coefficients of `vol(B(R + r)) - vol(B(R)) = sum_j V_j ell_{d,j}(r)`
/// from `d` fit radii `0.5, 1.0, ...` and reports the prediction error at `probe`.
pub fn steiner_ball_check(d: usize, radius: f64, probe: f64) -> Result<SteinerFit> {
    check_dim(d)?;
    check_positive("R", radius)?;
    check_non_negative("r", probe)?;
    let base = ball_volume(d, radius)?;
    let fit_radii: Vec<f64> = (1..=d).map(|i| 0.5 * i as f64).collect();
    let mut matrix = Vec::with_capacity(d);
    let mut rhs = Vec::with_capacity(d);
    for &r in &fit_radii {
        matrix.push((0..d).map(|j| ell(d, j, r)).collect::<Result<Vec<_>>>()?);
        rhs.push(ball_volume(d, radius + r)? - base);
    }
    let coefficients = solve_dense(matrix, rhs)
        .ok_or(ClosedFormError::InvalidParameter { name: "R", value: radius })?;
    let predicted: f64 = coefficients
        .iter()
        .enumerate()
        .map(|(j, v)| ell(d, j, probe).map(|l| v * l))
        .sum::<Result<f64>>()?;
    let actual = ball_volume(d, radius + probe)? - base;
    Ok(SteinerFit {
        coefficients,
        residual: (predicted - actual).abs(),
    })
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}
