//! Ray casting against grains and hyperplanes, visibility ranges, and Monte
//! Carlo estimators of (truncated) visible volume.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::closedform::{self, FiniteOrInfinite, GrainLaw};
use crate::hypgeom::{mdot, random_direction, GeodesicRay, HPoint, UnitTangent};
use crate::procsim::{
    check_dim, check_positive, poisson_count, sample_hyperplanes, BallGrain, BooleanModelSample, Conditioning,
    GrainShells, Hyperplane, HyperplaneSample, PlaneShells, Result, ShellScene, SimError,
};
use crate::rng::{stream_rng, StreamRole};
use crate::stats::{summarize, EstimateRecord, Summary};

/// First parameter `t >= 0` at which the ray meets the closed ball, if any.
pub fn ray_grain_hit(ray: &GeodesicRay, grain: &BallGrain) -> Option<f64> {
    let c = grain.center.coords();
    // A = cosh D, B = sinh D cos(theta)
    let a = -mdot(ray.origin().coords(), c);
    let b = mdot(ray.direction().dir(), c);
    let cosh_r = grain.radius.cosh();
    if a <= cosh_r {
        return Some(0.0);
    }
    if b <= 0.0 {
        return None;
    }
    let c2 = (a - b) * (a + b);
    let big_c = c2.max(1.0).sqrt();
    if big_c > cosh_r {
        return None;
    }
    let t0 = 0.5 * ((a + b) / (a - b)).ln();
    Some((t0 - (cosh_r / big_c).acosh()).max(0.0))
}

/// Parameter `t >= 0` at which the ray crosses the hyperplane, if it does.
pub fn ray_hyperplane_hit(ray: &GeodesicRay, plane: &Hyperplane) -> Option<f64> {
    let pn = mdot(ray.origin().coords(), plane.normal());
    if pn == 0.0 {
        return Some(0.0);
    }
    let un = mdot(ray.direction().dir(), plane.normal());
    let rho = -pn / un;
    if rho > 0.0 && rho < 1.0 {
        Some(rho.atanh())
    } else {
        None
    }
}

pub trait Obstacle {
    fn hit(&self, ray: &GeodesicRay) -> Option<f64>;
}

impl Obstacle for BallGrain {
    fn hit(&self, ray: &GeodesicRay) -> Option<f64> {
        ray_grain_hit(ray, self)
    }
}

impl Obstacle for Hyperplane {
    fn hit(&self, ray: &GeodesicRay) -> Option<f64> {
        ray_hyperplane_hit(ray, self)
    }
}

/// A complete realization seen from the base point.
pub trait Scene {
    type Obstacle: Obstacle;

    fn dim(&self) -> usize;
    fn obstacles(&self) -> &[Self::Obstacle];
    /// Largest cutoff for which the realization is complete.
    fn safe_radius(&self) -> f64;
}

impl Scene for BooleanModelSample {
    type Obstacle = BallGrain;

    fn dim(&self) -> usize {
        self.d
    }

    fn obstacles(&self) -> &[BallGrain] {
        &self.grains
    }

    fn safe_radius(&self) -> f64 {
        self.observation_radius
    }
}

impl Scene for HyperplaneSample {
    type Obstacle = Hyperplane;

    fn dim(&self) -> usize {
        self.d
    }

    fn obstacles(&self) -> &[Hyperplane] {
        &self.planes
    }

    fn safe_radius(&self) -> f64 {
        self.window_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilitySample {
    pub value: f64,
    /// The ray reached the cutoff unobstructed.
    pub censored: bool,
}

impl VisibilitySample {
    fn from_hit(best: f64, cutoff: f64) -> Self {
        if best > cutoff {
            Self {
                value: cutoff,
                censored: true,
            }
        } else {
            Self {
                value: best,
                censored: false,
            }
        }
    }
}

fn check_cutoff(cutoff: f64, safe: f64) -> Result<()> {
    check_positive("cutoff", cutoff)?;
    if cutoff > safe {
        return Err(SimError::WindowTooSmall { cutoff, safe });
    }
    Ok(())
}

fn first_hit<O: Obstacle>(obstacles: &[O], ray: &GeodesicRay) -> f64 {
    obstacles
        .iter()
        .filter_map(|o| o.hit(ray))
        .fold(f64::INFINITY, f64::min)
}

/// Visibility range from the base point in direction `u`, censored at `cutoff`.
pub fn visibility_range<S: Scene>(model: &S, u: &UnitTangent, cutoff: f64) -> Result<VisibilitySample> {
    check_cutoff(cutoff, model.safe_radius())?;
    if !u.base().is_origin() || u.base().dim() != model.dim() {
        return Err(SimError::Unsupported("rays must start at the base point".into()));
    }
    let ray = GeodesicRay::new(u.clone());
    Ok(VisibilitySample::from_hit(first_hit(model.obstacles(), &ray), cutoff))
}

/// Casts rays from the base point into a scene, growing it only as far as
/// needed to settle every ray up to `horizon`.
///
/// The result equals casting the same rays into the fully grown scene.
pub fn cast_rays_lazy<S, R>(scene: &mut S, rays: &[GeodesicRay], horizon: f64, rng: &mut R) -> Result<Vec<VisibilitySample>>
where
    S: ShellScene,
    S::Obstacle: Obstacle,
    R: Rng + ?Sized,
{
    check_positive("horizon", horizon)?;
    let mut best = vec![f64::INFINITY; rays.len()];
    let mut open: Vec<usize> = (0..rays.len()).collect();
    let mut checked = 0;
    loop {
        let fresh = &scene.obstacles()[checked..];
        for &i in &open {
            for o in fresh {
                if let Some(t) = o.hit(&rays[i]) {
                    best[i] = best[i].min(t);
                }
            }
        }
        checked = scene.obstacles().len();
        let settled = scene.settled();
        if settled >= horizon {
            break;
        }
        open.retain(|&i| best[i] > settled);
        if open.is_empty() {
            break;
        }
        if !scene.grow(rng)? {
            return Err(SimError::WindowTooSmall {
                cutoff: horizon,
                safe: scene.settled(),
            });
        }
    }
    Ok(best.into_iter().map(|b| VisibilitySample::from_hit(b, horizon)).collect())
}

/// `integral_0^s sinh^(d-1)`, the per-direction volume weight.
pub fn ray_volume_weight(d: usize, s: f64) -> Result<f64> {
    Ok(closedform::radial_mass(d, 0.0, s)?)
}

fn volume_from_ranges(d: usize, ranges: &[VisibilitySample], truncate_at: f64) -> Result<f64> {
    let mut total = 0.0;
    for r in ranges {
        total += ray_volume_weight(d, r.value.min(truncate_at))?;
    }
    Ok(closedform::omega(d) * total / ranges.len() as f64)
}

fn random_rays<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Vec<GeodesicRay> {
    let origin = HPoint::origin(d);
    (0..n).map(|_| GeodesicRay::new(random_direction(&origin, rng))).collect()
}

/// Unbiased estimate of the visible volume inside `B(p, truncate_at)` for a
/// single realization, from `n_rays` uniform directions.
pub fn visible_volume_once<S: Scene, R: Rng + ?Sized>(
    model: &S,
    n_rays: usize,
    rng: &mut R,
    truncate_at: f64,
) -> Result<f64> {
    if n_rays == 0 {
        return Err(SimError::InvalidParameter { name: "n_rays", value: 0.0 });
    }
    check_cutoff(truncate_at, model.safe_radius())?;
    let rays = random_rays(model.dim(), n_rays, rng);
    let ranges: Vec<VisibilitySample> = rays
        .iter()
        .map(|ray| VisibilitySample::from_hit(first_hit(model.obstacles(), ray), truncate_at))
        .collect();
    volume_from_ranges(model.dim(), &ranges, truncate_at)
}

struct RepOutcome {
    volume: f64,
    censored: usize,
}

fn check_counts(n_reps: usize, n_rays: usize) -> Result<()> {
    if n_reps == 0 {
        return Err(SimError::InvalidParameter { name: "n_reps", value: 0.0 });
    }
    if n_rays == 0 {
        return Err(SimError::InvalidParameter { name: "n_rays", value: 0.0 });
    }
    Ok(())
}

fn merge(outcomes: &[RepOutcome], n_rays: usize) -> Result<(Summary, f64)> {
    let vols: Vec<f64> = outcomes.iter().map(|o| o.volume).collect();
    let censored: usize = outcomes.iter().map(|o| o.censored).sum();
    Ok((summarize(&vols)?, censored as f64 / (outcomes.len() * n_rays) as f64))
}

/// Mean visible volume of the Boolean model conditioned on the base point
/// being uncovered.
///
/// With `truncate_at = None` the target is the full mean visible volume,
/// which needs `gamma v* > d - 1`; rays are censored at `cutoff`. With
/// `Some(R)` the target is the visible volume inside `B(p, R)`, `R <= cutoff`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_visible_volume(
    d: usize,
    gamma: f64,
    law: GrainLaw,
    n_reps: usize,
    n_rays: usize,
    truncate_at: Option<f64>,
    cutoff: f64,
    seed: u64,
) -> Result<EstimateRecord> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_positive("cutoff", cutoff)?;
    check_counts(n_reps, n_rays)?;
    let (quantity, horizon, closed_form) = match truncate_at {
        None => match closedform::mean_visible_volume(d, gamma, &law)? {
            FiniteOrInfinite::Finite(v) => ("visvol", cutoff, v),
            FiniteOrInfinite::Infinite => {
                return Err(SimError::BelowThreshold {
                    rate: closedform::boolean_rate(d, gamma, &law)?,
                    edge: (d - 1) as f64,
                })
            }
        },
        Some(r) => {
            check_cutoff(r, cutoff)?;
            ("visvol_truncated", r, closedform::truncated_visible_volume(d, gamma, &law, r)?)
        }
    };
    let outcomes = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut grain_rng = stream_rng(seed, rep, StreamRole::Grains);
            let mut ray_rng = stream_rng(seed, rep, StreamRole::Rays);
            let rays = random_rays(d, n_rays, &mut ray_rng);
            let mut scene = GrainShells::new(d, gamma, law, horizon, Conditioning::Delete, &mut grain_rng)?;
            let ranges = cast_rays_lazy(&mut scene, &rays, horizon, &mut grain_rng)?;
            Ok(RepOutcome {
                volume: volume_from_ranges(d, &ranges, horizon)?,
                censored: ranges.iter().filter(|r| r.censored).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (summary, censored_fraction) = merge(&outcomes, n_rays)?;
    Ok(EstimateRecord::new(quantity, d, gamma, &summary, seed)
        .with_grain(law)
        .with_rays(n_rays, censored_fraction)
        .with_closed_form(Some(closed_form)))
}

/// Mean volume of the zero cell of a Poisson hyperplane tessellation.
pub fn estimate_zero_cell_volume(
    d: usize,
    gamma: f64,
    n_reps: usize,
    n_rays: usize,
    cutoff: f64,
    seed: u64,
) -> Result<EstimateRecord> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_positive("cutoff", cutoff)?;
    check_counts(n_reps, n_rays)?;
    let closed_form = match closedform::zero_cell_mean_volume(d, gamma)? {
        FiniteOrInfinite::Finite(v) => v,
        FiniteOrInfinite::Infinite => {
            return Err(SimError::BelowThreshold {
                rate: closedform::zero_cell_rate(d, gamma)?,
                edge: (d - 1) as f64,
            })
        }
    };
    let outcomes = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut plane_rng = stream_rng(seed, rep, StreamRole::Planes);
            let mut ray_rng = stream_rng(seed, rep, StreamRole::Rays);
            let rays = random_rays(d, n_rays, &mut ray_rng);
            let mut scene = PlaneShells::new(d, gamma, cutoff)?;
            let ranges = cast_rays_lazy(&mut scene, &rays, cutoff, &mut plane_rng)?;
            Ok(RepOutcome {
                volume: volume_from_ranges(d, &ranges, cutoff)?,
                censored: ranges.iter().filter(|r| r.censored).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (summary, censored_fraction) = merge(&outcomes, n_rays)?;
    Ok(EstimateRecord::new("zero_cell", d, gamma, &summary, seed)
        .with_rays(n_rays, censored_fraction)
        .with_closed_form(Some(closed_form)))
}

fn ray_for(d: usize, direction: Option<&[f64]>, rep: u64, seed: u64) -> Result<GeodesicRay> {
    let origin = HPoint::origin(d);
    let u = match direction {
        Some(v) => UnitTangent::from_spatial(&origin, v)?,
        None => random_direction(&origin, &mut stream_rng(seed, rep, StreamRole::Rays)),
    };
    Ok(GeodesicRay::new(u))
}

/// One visibility range per independent conditioned realization.
///
/// `direction` fixes the ray (a spatial vector at the base point); `None`
/// draws a fresh uniform direction per realization.
#[allow(clippy::too_many_arguments)]
pub fn boolean_ranges(
    d: usize,
    gamma: f64,
    law: GrainLaw,
    n: usize,
    cutoff: f64,
    seed: u64,
    direction: Option<&[f64]>,
) -> Result<Vec<VisibilitySample>> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_counts(n, 1)?;
    (0..n as u64)
        .into_par_iter()
        .map(|rep| {
            let ray = ray_for(d, direction, rep, seed)?;
            let mut rng = stream_rng(seed, rep, StreamRole::Grains);
            let mut scene = GrainShells::new(d, gamma, law, cutoff, Conditioning::Delete, &mut rng)?;
            Ok(cast_rays_lazy(&mut scene, std::slice::from_ref(&ray), cutoff, &mut rng)?[0])
        })
        .collect()
}

/// One visibility range per independent hyperplane realization.
pub fn hyperplane_ranges(
    d: usize,
    gamma: f64,
    n: usize,
    cutoff: f64,
    seed: u64,
    direction: Option<&[f64]>,
) -> Result<Vec<VisibilitySample>> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_counts(n, 1)?;
    (0..n as u64)
        .into_par_iter()
        .map(|rep| {
            let ray = ray_for(d, direction, rep, seed)?;
            let mut rng = stream_rng(seed, rep, StreamRole::Planes);
            let mut scene = PlaneShells::new(d, gamma, cutoff)?;
            Ok(cast_rays_lazy(&mut scene, std::slice::from_ref(&ray), cutoff, &mut rng)?[0])
        })
        .collect()
}

/// Mean number of hyperplanes crossing the geodesic segment of length `len`
/// from the base point along the first axis.
pub fn estimate_crofton(d: usize, gamma: f64, len: f64, n_reps: usize, seed: u64) -> Result<EstimateRecord> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_positive("len", len)?;
    check_counts(n_reps, 1)?;
    let origin = HPoint::origin(d);
    let ray = GeodesicRay::new(UnitTangent::axis(&origin, 1)?);
    let counts = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let sample = sample_hyperplanes(d, gamma, len, &mut stream_rng(seed, rep, StreamRole::Planes))?;
            Ok(sample
                .planes
                .iter()
                .filter(|p| ray_hyperplane_hit(&ray, p).is_some_and(|t| t <= len))
                .count() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateRecord::new("crofton", d, gamma, &summarize(&counts)?, seed)
        .with_closed_form(Some(closedform::crofton_crossings(d, gamma, len)?)))
}

/// Sufficient statistics of the simulations for one piece of the ray.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PieceTally {
    pub n: usize,
    /// Simulations in which no grain reached the piece.
    pub survived: f64,
    pub sum_g: f64,
    pub sum_g2: f64,
    /// Sum of `g` over surviving simulations.
    pub sum_sg: f64,
}

impl PieceTally {
    fn survival(&self) -> f64 {
        self.survived / self.n as f64
    }

    fn mean_g(&self) -> f64 {
        self.sum_g / self.n as f64
    }

    /// Variance of `c * 1{survived} + e * g` for one simulation.
    fn combined_variance(&self, c: f64, e: f64) -> f64 {
        let n = self.n as f64;
        let p = self.survival();
        let mg = self.mean_g();
        let var_s = p * (1.0 - p) * n / (n - 1.0);
        let var_g = (self.sum_g2 - n * mg * mg) / (n - 1.0);
        let cov = (self.sum_sg - n * p * mg) / (n - 1.0);
        (c * c * var_s + e * e * var_g + 2.0 * c * e * cov).max(0.0)
    }
}

/// Output of [`estimate_truncated_split`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRun {
    pub d: usize,
    pub gamma: f64,
    pub law: GrainLaw,
    pub piece_len: f64,
    pub pieces: Vec<PieceTally>,
    pub seed: u64,
}

impl SplitRun {
    fn piece_index(&self, r: f64) -> Result<usize> {
        let k = (r / self.piece_len).round();
        if (k * self.piece_len - r).abs() > 1e-9 * r.max(1.0) || k < 0.0 || k as usize > self.pieces.len() {
            return Err(SimError::InvalidParameter { name: "R", value: r });
        }
        Ok(k as usize)
    }

    /// `omega_d sum_{k in [from, to)} P_k I_k` and its delta-method stderr,
    /// where `P_k` is the product of survival fractions before piece `k`.
    fn partial_sum(&self, from: usize, to: usize) -> (f64, f64) {
        let omega = closedform::omega(self.d);
        let p: Vec<f64> = self.pieces.iter().map(PieceTally::survival).collect();
        let i: Vec<f64> = self.pieces.iter().map(PieceTally::mean_g).collect();
        let prefix = |k: usize, skip: Option<usize>| -> f64 {
            (0..k).filter(|&j| Some(j) != skip).map(|j| p[j]).product()
        };
        let value = omega * (from..to).map(|k| prefix(k, None) * i[k]).sum::<f64>();
        let variance: f64 = (0..to)
            .map(|j| {
                let c = omega * (from.max(j + 1)..to).map(|k| prefix(k, Some(j)) * i[k]).sum::<f64>();
                let e = if j >= from { omega * prefix(j, None) } else { 0.0 };
                self.pieces[j].combined_variance(c, e) / self.pieces[j].n as f64
            })
            .sum();
        (value, variance.sqrt())
    }

    /// Estimate and stderr of the truncated mean visible volume at `r`.
    pub fn truncated(&self, r: f64) -> Result<(f64, f64)> {
        Ok(self.partial_sum(0, self.piece_index(r)?))
    }

    /// Estimate and stderr of `truncated(r2) - truncated(r1)`.
    pub fn increment(&self, r1: f64, r2: f64) -> Result<(f64, f64)> {
        let (a, b) = (self.piece_index(r1)?, self.piece_index(r2)?);
        if a > b {
            return Err(SimError::InvalidParameter { name: "R", value: r1 });
        }
        Ok(self.partial_sum(a, b))
    }

    pub fn record(&self, r: f64) -> Result<EstimateRecord> {
        let (estimate, stderr) = self.truncated(r)?;
        let n = self.pieces.first().map_or(0, |p| p.n);
        let summary = Summary {
            n,
            mean: estimate,
            variance: stderr * stderr * n as f64,
            stderr,
        };
        let closed = closedform::truncated_visible_volume(self.d, self.gamma, &self.law, r)?;
        Ok(EstimateRecord::new("visvol_truncated", self.d, self.gamma, &summary, self.seed)
            .with_grain(self.law)
            .with_rays(1, self.pieces.last().map_or(0.0, PieceTally::survival))
            .with_closed_form(Some(closed)))
    }
}

/// Fermi coordinates `(s, h)` of a point drawn uniformly from the tube of
/// radius `h_max` around the first axis geodesic: axial position `s` in
/// `[s_lo, s_hi]` and distance `h` to the axis. The volume element is
/// `cosh h sinh^(d-2) h`, so `sinh^(d-1) h` is uniform.
fn tube_coords<R: Rng + ?Sized>(d: usize, s_lo: f64, s_hi: f64, h_max: f64, rng: &mut R) -> (f64, f64) {
    let s = s_lo + (s_hi - s_lo) * rng.random::<f64>();
    let u: f64 = rng.random();
    let h = (h_max.sinh() * u.powf(1.0 / (d - 1) as f64)).asinh();
    (s, h)
}

/// Where the axis enters the ball of radius `r` centered at Fermi
/// coordinates `(s, h)`. Axis points at `sigma` are at distance `rho` with
/// `cosh rho = cosh h cosh(sigma - s)`.
///
/// Far out along the axis the hyperboloid coordinates are of size `e^s`
/// while the quantities that decide a hit are of size `e^-s`, so the hit
/// is computed here without them.
fn axis_entry(s: f64, h: f64, r: f64) -> Option<f64> {
    if h > r {
        return None;
    }
    Some(s - (r.cosh() / h.cosh()).max(1.0).acosh())
}

/// Truncated mean visible volume out to `r_max` by splitting the ray into
/// pieces of length `piece_len`.
///
/// By isotropy one direction suffices. For each piece `(s_{k-1}, s_k]` the
/// grains that reach it without touching `[0, s_{k-1}]` form a Poisson
/// process of their own, which is simulated inside a tube around the ray;
/// conditioning on the earlier pieces being free is then exact. Each piece
/// contributes its survival fraction and the mean volume weight gained
/// inside the piece, and these combine into the estimate.
#[allow(clippy::too_many_arguments)]
pub fn estimate_truncated_split(
    d: usize,
    gamma: f64,
    law: GrainLaw,
    r_max: f64,
    piece_len: f64,
    n_per_piece: usize,
    seed: u64,
) -> Result<SplitRun> {
    check_dim(d)?;
    check_positive("gamma", gamma)?;
    check_positive("R", r_max)?;
    check_positive("piece_len", piece_len)?;
    law.validate()?;
    if n_per_piece < 2 {
        return Err(SimError::InvalidParameter {
            name: "n_per_piece",
            value: n_per_piece as f64,
        });
    }
    let n_pieces = (r_max / piece_len).round();
    if (n_pieces * piece_len - r_max).abs() > 1e-9 * r_max.max(1.0) || n_pieces < 1.0 {
        return Err(SimError::InvalidParameter { name: "R", value: r_max });
    }
    let reach = law.max_radius();
    let tube_section = closedform::omega(d - 1) * reach.sinh().powi(d as i32 - 1) / (d - 1) as f64;
    let pieces = (0..n_pieces as usize)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64, StreamRole::Pieces);
            let (s_lo, s_hi) = (k as f64 * piece_len, (k + 1) as f64 * piece_len);
            let (f_lo, f_hi) = (ray_volume_weight(d, s_lo)?, ray_volume_weight(d, s_hi)?);
            let mean = gamma * tube_section * (s_hi - s_lo + 2.0 * reach);
            let mut tally = PieceTally {
                n: n_per_piece,
                ..PieceTally::default()
            };
            for _ in 0..n_per_piece {
                let mut best = f64::INFINITY;
                for _ in 0..poisson_count(mean, &mut rng)? {
                    let (s, h) = tube_coords(d, s_lo - reach, s_hi + reach, reach, &mut rng);
                    if let Some(t) = axis_entry(s, h, law.sample_radius(&mut rng)) {
                        if t > s_lo && t <= s_hi {
                            best = best.min(t);
                        }
                    }
                }
                let g = if best.is_finite() {
                    ray_volume_weight(d, best)? - f_lo
                } else {
                    tally.survived += 1.0;
                    tally.sum_sg += f_hi - f_lo;
                    f_hi - f_lo
                };
                tally.sum_g += g;
                tally.sum_g2 += g * g;
            }
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitRun {
        d,
        gamma,
        law,
        piece_len,
        pieces,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypgeom::{dist, orthogonal_tangent, polar_point, random_unit_vector, rotate_in_plane};
    use crate::procsim::sample_boolean_with;
    use crate::stats::{ks_exponential, ks_two_sample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn axis_ray(d: usize) -> GeodesicRay {
        GeodesicRay::new(UnitTangent::axis(&HPoint::origin(d), 1).unwrap())
    }

    fn grain_at(d: usize, dir: &[f64], dist: f64, radius: f64) -> BallGrain {
        let mut v = dir.to_vec();
        v.resize(d, 0.0);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        BallGrain::new(polar_point(&v, dist), radius).unwrap()
    }

    #[test]
    fn grain_hit_examples() {
        let ray = axis_ray(2);
        let t = ray_grain_hit(&ray, &grain_at(2, &[1.0, 0.0], 2.0, 0.5)).unwrap();
        assert!((t - 1.5).abs() < 1e-12);
        assert_eq!(ray_grain_hit(&ray, &grain_at(2, &[0.3, 1.0], 0.4, 0.5)), Some(0.0));
        for r in [0.1, 0.5, 0.99] {
            assert_eq!(ray_grain_hit(&ray, &grain_at(2, &[0.0, 1.0], 1.0, r)), None);
        }
        assert_eq!(ray_grain_hit(&ray, &grain_at(2, &[-1.0, 0.2], 3.0, 0.5)), None);
    }

    fn brute_force_hit(ray: &GeodesicRay, grain: &BallGrain, t_max: f64) -> Option<f64> {
        let f = |t: f64| dist(&ray.point_at(t).unwrap(), &grain.center) - grain.radius;
        if f(0.0) <= 0.0 {
            return Some(0.0);
        }
        let steps = 4000;
        let h = t_max / steps as f64;
        for i in 0..steps {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            if f(b) <= 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
        }
        None
    }

    #[test]
    fn grain_hit_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let origin = HPoint::origin(3);
        let mut hits = 0;
        for _ in 0..10_000 {
            let ray = GeodesicRay::new(random_direction(&origin, &mut rng));
            let v = random_unit_vector(3, &mut rng);
            let radius = 0.1 + rng.random::<f64>();
            // aim near the ray so that both outcomes are common
            let mut c = v.clone();
            for (ci, ui) in c.iter_mut().zip(&ray.direction().dir()[1..]) {
                *ci = 0.4 * *ci + *ui;
            }
            let grain = grain_at(3, &c, 0.2 + 3.0 * rng.random::<f64>(), radius);
            let fast = ray_grain_hit(&ray, &grain);
            // the ray meets the grain within 3.2 + 1.1 if at all
            let slow = brute_force_hit(&ray, &grain, 4.5);
            match (fast, slow) {
                (Some(a), Some(b)) => {
                    hits += 1;
                    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
                }
                (None, None) => {}
                // grazing rays can slip between grid points
                (Some(_), None) | (None, Some(_)) => {
                    let x = fast.or(slow).unwrap();
                    let gap = dist(&ray.point_at(x).unwrap(), &grain.center) - grain.radius;
                    assert!(gap.abs() < 1e-6);
                }
            }
        }
        assert!(hits > 1000);
    }

    #[test]
    fn grain_hit_lands_on_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let origin = HPoint::origin(2);
        for _ in 0..2000 {
            let ray = GeodesicRay::new(random_direction(&origin, &mut rng));
            let grain = grain_at(2, &random_unit_vector(2, &mut rng), 0.5 + 4.0 * rng.random::<f64>(), 0.2 + rng.random::<f64>());
            if let Some(t) = ray_grain_hit(&ray, &grain) {
                if t > 0.0 {
                    let gap = dist(&ray.point_at(t).unwrap(), &grain.center) - grain.radius;
                    assert!(gap.abs() < 1e-8, "{gap}");
                }
            }
        }
    }

    #[test]
    fn hyperplane_hit_examples() {
        let origin = HPoint::origin(2);
        let u = UnitTangent::axis(&origin, 1).unwrap();
        let ray = GeodesicRay::new(u.clone());
        let through = Hyperplane::from_offset(&UnitTangent::axis(&origin, 2).unwrap(), 0.0);
        assert_eq!(ray_hyperplane_hit(&ray, &through), Some(0.0));
        let ahead = Hyperplane::from_offset(&u, 1.3);
        assert!((ray_hyperplane_hit(&ray, &ahead).unwrap() - 1.3).abs() < 1e-12);
        let behind = Hyperplane::from_offset(&u.negated(), 1.3);
        assert_eq!(ray_hyperplane_hit(&ray, &behind), None);
        // tilted plane the ray runs alongside forever: rho >= 1
        let w = rotate_in_plane(&u, &orthogonal_tangent(&u), 1.4);
        let side = Hyperplane::from_offset(&w, 1.0);
        assert_eq!(ray_hyperplane_hit(&ray, &side), None);
    }

    #[test]
    fn hyperplane_hit_is_on_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let origin = HPoint::origin(3);
        for _ in 0..2000 {
            let ray = GeodesicRay::new(random_direction(&origin, &mut rng));
            let plane = Hyperplane::from_offset(&random_direction(&origin, &mut rng), 2.0 * rng.random::<f64>());
            if let Some(t) = ray_hyperplane_hit(&ray, &plane) {
                let x = ray.point_at(t).unwrap();
                assert!(mdot(x.coords(), plane.normal()).abs() < 1e-9 * x.coords()[0]);
            }
        }
    }

    fn sample(grains: Vec<BallGrain>, r_obs: f64) -> BooleanModelSample {
        BooleanModelSample {
            d: 2,
            grains,
            window_radius: r_obs + 1.0,
            observation_radius: r_obs,
            max_grain_radius: 1.0,
            conditioned: true,
        }
    }

    #[test]
    fn range_examples() {
        let u = UnitTangent::axis(&HPoint::origin(2), 1).unwrap();
        let empty = sample(vec![], 5.0);
        assert_eq!(
            visibility_range(&empty, &u, 5.0).unwrap(),
            VisibilitySample { value: 5.0, censored: true }
        );
        let one = sample(vec![grain_at(2, &[1.0, 0.0], 2.0, 0.5)], 5.0);
        let r = visibility_range(&one, &u, 5.0).unwrap();
        assert!(!r.censored && (r.value - 1.5).abs() < 1e-12);
        assert!(matches!(
            visibility_range(&one, &u, 6.0),
            Err(SimError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn adding_grains_never_increases_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let law = GrainLaw::fixed(0.5).unwrap();
        let origin = HPoint::origin(2);
        for _ in 0..200 {
            let s = sample_boolean_with(2, 0.5, law, 4.0, Conditioning::Delete, &mut rng).unwrap();
            let u = random_direction(&origin, &mut rng);
            let mut prev = visibility_range(&s, &u, 4.0).unwrap().value;
            let mut grown = s.clone();
            for _ in 0..5 {
                let extra = grain_at(2, &random_unit_vector(2, &mut rng), 0.6 + 3.0 * rng.random::<f64>(), 0.5);
                grown.grains.push(extra);
                let now = visibility_range(&grown, &u, 4.0).unwrap().value;
                assert!(now <= prev);
                prev = now;
            }
        }
    }

    #[test]
    fn lazy_casting_matches_full_sample() {
        let law = GrainLaw::uniform(0.0, 0.8).unwrap();
        for rep in 0..40 {
            for cond in [Conditioning::Delete, Conditioning::Reject] {
                let rays = random_rays(2, 30, &mut stream_rng(1, rep, StreamRole::Rays));
                let mut rng = stream_rng(1, rep, StreamRole::Grains);
                let mut lazy = GrainShells::new(2, 1.2, law, 6.0, cond, &mut rng).unwrap();
                let fast = cast_rays_lazy(&mut lazy, &rays, 6.0, &mut rng).unwrap();
                let full = sample_boolean_with(2, 1.2, law, 6.0, cond, &mut stream_rng(1, rep, StreamRole::Grains)).unwrap();
                assert_eq!(&full.grains[..lazy.grains().len()], lazy.grains());
                for (ray, f) in rays.iter().zip(&fast) {
                    let slow = visibility_range(&full, ray.direction(), 6.0).unwrap();
                    assert_eq!(*f, slow);
                }
            }
            let rays = random_rays(3, 30, &mut stream_rng(2, rep, StreamRole::Rays));
            let mut planes = PlaneShells::new(3, 1.5, 5.0).unwrap();
            let fast = cast_rays_lazy(&mut planes, &rays, 5.0, &mut stream_rng(2, rep, StreamRole::Planes)).unwrap();
            let full = sample_hyperplanes(3, 1.5, 5.0, &mut stream_rng(2, rep, StreamRole::Planes)).unwrap();
            for (ray, f) in rays.iter().zip(&fast) {
                assert_eq!(*f, visibility_range(&full, ray.direction(), 5.0).unwrap());
            }
        }
    }

    #[test]
    fn ranges_are_exponential() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let xs = boolean_ranges(2, 1.5, law, 4000, 12.0, 77, None).unwrap();
        let vals: Vec<f64> = xs.iter().filter(|s| !s.censored).map(|s| s.value).collect();
        let rate = closedform::boolean_rate(2, 1.5, &law).unwrap();
        assert!(ks_exponential(&vals, rate).unwrap().pass);
        let ys = hyperplane_ranges(3, 2.0, 4000, 6.0, 78, None).unwrap();
        let vals: Vec<f64> = ys.iter().filter(|s| !s.censored).map(|s| s.value).collect();
        let rate = closedform::zero_cell_rate(3, 2.0).unwrap();
        assert!(ks_exponential(&vals, rate).unwrap().pass);
    }

    #[test]
    fn direction_invariance() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let a = boolean_ranges(2, 1.2, law, 3000, 10.0, 5, Some(&[1.0, 0.0])).unwrap();
        let b = boolean_ranges(2, 1.2, law, 3000, 10.0, 6, Some(&[-0.6, 0.8])).unwrap();
        let va: Vec<f64> = a.iter().map(|s| s.value).collect();
        let vb: Vec<f64> = b.iter().map(|s| s.value).collect();
        assert!(ks_two_sample(&va, &vb).unwrap().pass);
    }

    #[test]
    fn visible_volume_once_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let empty = sample(vec![], 3.0);
        let v = visible_volume_once(&empty, 50, &mut rng, 3.0).unwrap();
        assert!((v - closedform::ball_volume(2, 3.0).unwrap()).abs() < 1e-9);
        // a huge grain whose boundary passes at distance 1.2 in every direction
        // is impossible with a ball not containing p; instead ring the origin
        // with many small grains at distance t0 so that every ray stops there.
        let t0 = 1.2;
        let ring: Vec<BallGrain> = (0..4000)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 4000.0;
                grain_at(2, &[a.cos(), a.sin()], t0 + 0.3, 0.3)
            })
            .collect();
        let ringed = sample(ring, 3.0);
        let v = visible_volume_once(&ringed, 400, &mut rng, 3.0).unwrap();
        let target = closedform::ball_volume(2, t0).unwrap();
        assert!((v - target).abs() < 1e-3 * target, "{v} vs {target}");
    }

    #[test]
    fn visible_volume_self_consistency() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let s = sample_boolean_with(2, 1.0, law, 5.0, Conditioning::Delete, &mut rng).unwrap();
        let batch = |seed: u64| -> Vec<f64> {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| visible_volume_once(&s, 20, &mut r, 5.0).unwrap()).collect()
        };
        let a = summarize(&batch(1)).unwrap();
        let b = summarize(&batch(2)).unwrap();
        assert!((a.mean - b.mean).abs() < 4.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
    }

    #[test]
    fn truncation_is_monotone() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let s = sample_boolean_with(2, 1.0, law, 6.0, Conditioning::Delete, &mut rng).unwrap();
            let seed: u64 = rng.random();
            let small = visible_volume_once(&s, 50, &mut ChaCha8Rng::seed_from_u64(seed), 2.0).unwrap();
            let big = visible_volume_once(&s, 50, &mut ChaCha8Rng::seed_from_u64(seed), 6.0).unwrap();
            assert!(small <= big);
        }
    }

    #[test]
    fn estimator_refuses_below_threshold() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let err = estimate_visible_volume(2, 0.9, law, 10, 10, None, 12.0, 1).unwrap_err();
        assert!(matches!(err, SimError::BelowThreshold { .. }));
        assert!(err.to_string().contains("d - 1"));
        assert!(estimate_zero_cell_volume(2, 1.5, 10, 10, 12.0, 1).is_err());
        assert!(matches!(
            estimate_visible_volume(2, 1.5, law, 10, 10, Some(13.0), 12.0, 1),
            Err(SimError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn truncated_estimate_below_threshold() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let r = estimate_visible_volume(2, 0.7, law, 400, 50, Some(3.0), 3.0, 3).unwrap();
        assert!(r.z_score.unwrap().abs() < 3.0, "{r:?}");
        assert!(r.censored_fraction > 0.0);
    }

    #[test]
    fn tiny_intensity_sees_the_whole_ball() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let r = estimate_visible_volume(2, 1e-9, law, 20, 20, Some(2.0), 2.0, 3).unwrap();
        let full = closedform::ball_volume(2, 2.0).unwrap();
        assert!((r.estimate - full).abs() < 1e-9 * full);
        assert!(r.censored_fraction > 0.999);
    }

    #[test]
    fn estimates_are_reproducible() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let a = estimate_visible_volume(2, 1.5, law, 30, 20, None, 12.0, 4).unwrap();
        let b = estimate_visible_volume(2, 1.5, law, 30, 20, None, 12.0, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_cell_heavy_intensity() {
        let r = estimate_zero_cell_volume(2, 50.0, 300, 50, 4.0, 8).unwrap();
        assert!(r.estimate < 0.01);
        assert!(r.z_score.unwrap().abs() < 3.0, "{r:?}");
    }

    #[test]
    fn crofton_d3() {
        let r = estimate_crofton(3, 1.0, 1.0, 4000, 9).unwrap();
        assert!(r.z_score.unwrap().abs() < 3.0, "{r:?}");
        assert!((r.closed_form.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tube_points_fill_the_tube() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 20_000;
        let pts: Vec<(f64, f64)> = (0..n).map(|_| tube_coords(2, -1.0, 2.0, 0.5, &mut rng)).collect();
        let inside = pts.iter().filter(|(_, h)| *h <= 0.25).count();
        let expected = 0.25f64.sinh() / 0.5f64.sinh();
        let p = inside as f64 / n as f64;
        assert!((p - expected).abs() < 4.0 * (expected * (1.0 - expected) / n as f64).sqrt());
        assert!(pts.iter().all(|&(s, h)| (-1.0..=2.0).contains(&s) && (0.0..=0.5 + 1e-12).contains(&h)));
        // d = 3: sinh^2 h is uniform
        let inside3 = (0..n).filter(|_| tube_coords(3, 0.0, 1.0, 0.5, &mut rng).1 <= 0.25).count();
        let expected3 = (0.25f64.sinh() / 0.5f64.sinh()).powi(2);
        let p3 = inside3 as f64 / n as f64;
        assert!((p3 - expected3).abs() < 4.0 * (expected3 * (1.0 - expected3) / n as f64).sqrt());
    }

    #[test]
    fn axis_entry_matches_ray_hit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ray = axis_ray(3);
        for _ in 0..2000 {
            let s: f64 = rng.random_range(0.5..8.0);
            let h: f64 = rng.random_range(0.0..1.0);
            let r: f64 = rng.random_range(0.05..1.0);
            let w = random_unit_vector(2, &mut rng);
            let center = HPoint::from_spatial(&[h.cosh() * s.sinh(), h.sinh() * w[0], h.sinh() * w[1]]);
            let grain = BallGrain::new(center, r).unwrap();
            match (axis_entry(s, h, r), ray_grain_hit(&ray, &grain)) {
                (Some(a), Some(b)) if a > 0.0 => assert!((a - b).abs() < 1e-7, "{s} {h} {r}: {a} vs {b}"),
                (None, None) => {}
                (Some(a), _) if a <= 0.0 => {}
                other => panic!("{s} {h} {r}: {other:?}"),
            }
        }
    }

    #[test]
    fn axis_entry_far_out_is_exact() {
        // a grain straddling the axis at distance 25 enters at s - r
        assert!((axis_entry(25.0, 0.0, 0.5).unwrap() - 24.5).abs() < 1e-12);
        assert_eq!(axis_entry(25.0, 0.6, 0.5), None);
    }

    #[test]
    fn split_estimator_tracks_closed_form() {
        let law = GrainLaw::fixed(0.5).unwrap();
        let run = estimate_truncated_split(2, 1.5, law, 4.0, 1.0, 20_000, 12).unwrap();
        for r in [1.0, 2.0, 4.0] {
            let rec = run.record(r).unwrap();
            assert!(rec.z_score.unwrap().abs() < 3.0, "{rec:?}");
        }
        let (inc, se) = run.increment(2.0, 4.0).unwrap();
        let target = closedform::truncated_visible_volume(2, 1.5, &law, 4.0).unwrap()
            - closedform::truncated_visible_volume(2, 1.5, &law, 2.0).unwrap();
        assert!((inc - target).abs() < 3.0 * se);
        // survival per unit piece is exp(-rate)
        let rate = closedform::boolean_rate(2, 1.5, &law).unwrap();
        let p = run.pieces[2].survived / run.pieces[2].n as f64;
        assert!((p - (-rate).exp()).abs() < 4.0 * ((-rate).exp() / 20_000.0).sqrt());
        assert!(run.truncated(2.5).is_err());
    }
}
