//! Boundary intersections of discs in the hyperbolic plane and the
//! intersection density of a planar Boolean model.

use rayon::prelude::*;
use serde::Serialize;

use crate::closedform::{self, GrainLaw};
use crate::hypgeom::{dist, direction_to, exp_map, mdot, orthogonal_tangent, rotate_in_plane, HPoint, DEGENERATE_DIST};
use crate::procsim::{check_positive, sample_boolean, BallGrain, Result, SimError};
use crate::rng::{stream_rng, StreamRole};
use crate::stats::{summarize, EstimateRecord};

/// `|cos(alpha)|` this close to one is treated as tangency.
pub const TANGENCY_TOL: f64 = 1e-12;

fn check_planar(g: &BallGrain) -> Result<()> {
    if g.center.dim() != 2 {
        return Err(SimError::Unsupported(format!(
            "circle intersection needs d = 2, got d = {}",
            g.center.dim()
        )));
    }
    Ok(())
}

/// Points where the boundary circles of two discs meet (0, 1 or 2 points).
pub fn circle_intersection(g1: &BallGrain, g2: &BallGrain) -> Result<Vec<HPoint>> {
    check_planar(g1)?;
    check_planar(g2)?;
    let d = dist(&g1.center, &g2.center);
    if d < DEGENERATE_DIST {
        return Ok(Vec::new());
    }
    let (r1, r2) = (g1.radius, g2.radius);
    let cos_alpha = (r1.cosh() * d.cosh() - r2.cosh()) / (r1.sinh() * d.sinh());
    if cos_alpha.abs() > 1.0 + TANGENCY_TOL || cos_alpha.is_nan() {
        return Ok(Vec::new());
    }
    let u = direction_to(&g1.center, &g2.center)?;
    if cos_alpha.abs() >= 1.0 - TANGENCY_TOL {
        let toward = if cos_alpha > 0.0 { u } else { u.negated() };
        return Ok(vec![exp_map(&g1.center, &toward, r1)?]);
    }
    let alpha = cos_alpha.acos();
    let w = orthogonal_tangent(&u);
    [alpha, -alpha]
        .iter()
        .map(|&a| Ok(exp_map(&g1.center, &rotate_in_plane(&u, &w, a), r1)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntersectionCount {
    pub window_radius: f64,
    pub count: usize,
    pub window_area: f64,
    /// Pairs within `1e-12` of external or internal tangency.
    pub near_tangent_pairs: usize,
}

/// Boundary intersection points of distinct grains inside `B(p, r_win)`.
pub fn count_intersections_in_window(grains: &[BallGrain], r_win: f64) -> Result<IntersectionCount> {
    check_positive("R_win", r_win)?;
    let origin = HPoint::origin(2);
    let mut count = 0;
    let mut near_tangent_pairs = 0;
    for (i, a) in grains.iter().enumerate() {
        check_planar(a)?;
        for b in &grains[i + 1..] {
            let cosh_d = -mdot(a.center.coords(), b.center.coords());
            if cosh_d > (a.radius + b.radius).cosh() || cosh_d < (a.radius - b.radius).cosh() {
                continue;
            }
            let d = cosh_d.max(1.0).acosh();
            if (d - (a.radius + b.radius)).abs() < 1e-12 || (d - (a.radius - b.radius).abs()).abs() < 1e-12 {
                near_tangent_pairs += 1;
            }
            count += circle_intersection(a, b)?
                .iter()
                .filter(|x| dist(&origin, x) < r_win)
                .count();
        }
    }
    Ok(IntersectionCount {
        window_radius: r_win,
        count,
        window_area: closedform::ball_volume(2, r_win)?,
        near_tangent_pairs,
    })
}

/// Intersection points per unit area for a planar Boolean model, counted in
/// `B(p, r_win)` over `n_reps` unconditioned realizations.
pub fn estimate_intersection_density(
    gamma: f64,
    law: GrainLaw,
    r_win: f64,
    n_reps: usize,
    seed: u64,
) -> Result<EstimateRecord> {
    check_positive("gamma", gamma)?;
    check_positive("R_win", r_win)?;
    if n_reps == 0 {
        return Err(SimError::InvalidParameter { name: "n_reps", value: 0.0 });
    }
    let densities = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, rep, StreamRole::Grains);
            let sample = sample_boolean(2, gamma, law, r_win, &mut rng, false)?;
            let c = count_intersections_in_window(&sample.grains, r_win)?;
            Ok(c.count as f64 / c.window_area)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(
        EstimateRecord::new("intersection_density", 2, gamma, &summarize(&densities)?, seed)
            .with_grain(law)
            .with_closed_form(Some(closedform::intersection_density(2, gamma, &law)?)),
    )
}
