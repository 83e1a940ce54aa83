//! Dispatch of an experiment configuration to the estimators.

use std::time::Instant;

use hypervis_core::closedform::{self, FiniteOrInfinite, GrainLaw};
use hypervis_core::stats::{ks_exponential, EstimateRecord, KsResult};
use hypervis_core::visibility::{
    boolean_ranges, estimate_crofton, estimate_truncated_split, estimate_visible_volume, estimate_zero_cell_volume,
    hyperplane_ranges, VisibilitySample,
};
use hypervis_core::intersect::estimate_intersection_density;
use serde::Serialize;

use crate::config::{ExperimentConfig, Method, Quantity};
use crate::HarnessError;

/// Default window for the intersection density.
pub const DEFAULT_R_WIN: f64 = 3.0;
/// Tolerance for every residual in the formula check.
pub const FORMULA_TOL: f64 = 1e-8;

/// Visibility ranges tested against their exponential law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    pub quantity: Quantity,
    pub dim: usize,
    pub gamma: f64,
    pub grain: Option<GrainLaw>,
    pub rate: f64,
    pub ks: KsResult,
    pub censored_fraction: f64,
    pub seed: u64,
}

/// Worst residuals of the closed-form identities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaReport {
    /// Largest absolute residual of the `ell` product identity.
    pub ell_residual: f64,
    /// Largest relative gap between the gamma form and quadrature.
    pub integral_rel_error: f64,
    /// Largest Steiner prediction error for balls.
    pub steiner_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Estimate(EstimateRecord),
    Ks(KsReport),
    Formula(FormulaReport),
}

/// An outcome with its wall-clock cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Timed {
    pub outcome: Outcome,
    pub runtime_ms: u128,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    cfg.validate()?;
    let d = cfg.d;
    let outcome = match cfg.quantity {
        Quantity::Visvol => Outcome::Estimate(estimate_visible_volume(
            d,
            cfg.gamma,
            cfg.require_law()?,
            cfg.n_reps,
            cfg.n_rays,
            None,
            cfg.cutoff,
            cfg.seed,
        )?),
        Quantity::VisvolTruncated => {
            let r = cfg.truncate_at.expect("validated");
            let law = cfg.require_law()?;
            match cfg.method {
                Method::Window => Outcome::Estimate(estimate_visible_volume(
                    d,
                    cfg.gamma,
                    law,
                    cfg.n_reps,
                    cfg.n_rays,
                    Some(r),
                    cfg.cutoff,
                    cfg.seed,
                )?),
                Method::Split => {
                    let pieces = r.ceil().max(1.0);
                    let split = estimate_truncated_split(d, cfg.gamma, law, r, r / pieces, cfg.n_reps.max(2), cfg.seed)?;
                    Outcome::Estimate(split.record(r)?)
                }
            }
        }
        Quantity::CdfBoolean => {
            let law = cfg.require_law()?;
            let ranges = boolean_ranges(d, cfg.gamma, law, cfg.n_reps, cfg.cutoff, cfg.seed, None)?;
            let rate = closedform::boolean_rate(d, cfg.gamma, &law)?;
            Outcome::Ks(ks_report(cfg, Some(law), rate, &ranges)?)
        }
        Quantity::CdfTessellation => {
            let ranges = hyperplane_ranges(d, cfg.gamma, cfg.n_reps, cfg.cutoff, cfg.seed, None)?;
            let rate = closedform::zero_cell_rate(d, cfg.gamma)?;
            Outcome::Ks(ks_report(cfg, None, rate, &ranges)?)
        }
        Quantity::IntersectionDensity => Outcome::Estimate(estimate_intersection_density(
            cfg.gamma,
            cfg.require_law()?,
            cfg.r_win.unwrap_or(DEFAULT_R_WIN),
            cfg.n_reps,
            cfg.seed,
        )?),
        Quantity::ZeroCell => Outcome::Estimate(estimate_zero_cell_volume(
            d,
            cfg.gamma,
            cfg.n_reps,
            cfg.n_rays,
            cfg.cutoff,
            cfg.seed,
        )?),
        Quantity::Crofton => Outcome::Estimate(estimate_crofton(d, cfg.gamma, cfg.length, cfg.n_reps, cfg.seed)?),
        Quantity::FormulaCheck => Outcome::Formula(formula_check()?),
    };
    Ok(outcome)
}

pub fn run_timed(cfg: &ExperimentConfig) -> Result<Timed, HarnessError> {
    let start = Instant::now();
    let outcome = run(cfg)?;
    Ok(Timed {
        outcome,
        runtime_ms: start.elapsed().as_millis(),
    })
}

/// Uncensored ranges and the censored fraction. The cutoff is meant to be
/// far enough out that dropping the censored ones has no visible effect.
pub fn range_values(ranges: &[VisibilitySample]) -> (Vec<f64>, f64) {
    let values = ranges.iter().filter(|r| !r.censored).map(|r| r.value).collect();
    let censored = ranges.iter().filter(|r| r.censored).count() as f64 / ranges.len().max(1) as f64;
    (values, censored)
}

fn ks_report(
    cfg: &ExperimentConfig,
    grain: Option<GrainLaw>,
    rate: f64,
    ranges: &[VisibilitySample],
) -> Result<KsReport, HarnessError> {
    let (values, censored_fraction) = range_values(ranges);
    Ok(KsReport {
        quantity: cfg.quantity,
        dim: cfg.d,
        gamma: cfg.gamma,
        grain,
        rate,
        ks: ks_exponential(&values, rate)?,
        censored_fraction,
        seed: cfg.seed,
    })
}

/// `(d, k, j)` triples and radii on which the `ell` identity is checked.
pub const ELL_GRID: [(usize, usize, usize); 5] = [(3, 1, 0), (3, 2, 0), (3, 2, 1), (4, 2, 1), (4, 3, 1)];
pub const ELL_RADII: [f64; 3] = [0.3, 1.0, 2.0];
/// `(d, a)` pairs for the gamma-form cross-check.
pub const INTEGRAL_GRID: [(usize, f64); 4] = [(2, 1.5), (2, 2.0), (3, 4.0), (4, 6.0)];

pub fn max_ell_residual() -> Result<f64, HarnessError> {
    let mut worst: f64 = 0.0;
    for &(d, k, j) in &ELL_GRID {
        for &r in &ELL_RADII {
            worst = worst.max(closedform::verify_ell_identity(d, k, j, r)?);
        }
    }
    Ok(worst)
}

pub fn max_integral_rel_error() -> Result<f64, HarnessError> {
    let mut worst: f64 = 0.0;
    for &(d, a) in &INTEGRAL_GRID {
        let exact = match closedform::sinh_exp_integral(d, a) {
            FiniteOrInfinite::Finite(v) => v,
            FiniteOrInfinite::Infinite => return Err(HarnessError::Usage(format!("integral diverges at d = {d}, a = {a}"))),
        };
        let quad = closedform::sinh_exp_integral_quadrature(d, a)?;
        worst = worst.max(((quad - exact) / exact).abs());
    }
    Ok(worst)
}

pub fn formula_check() -> Result<FormulaReport, HarnessError> {
    let ell_residual = max_ell_residual()?;
    let integral_rel_error = max_integral_rel_error()?;
    let mut steiner_residual: f64 = 0.0;
    for d in 2..=4 {
        for radius in [0.5, 1.0, 2.0] {
            steiner_residual = steiner_residual.max(closedform::steiner_ball_check(d, radius, 0.7)?.residual);
        }
    }
    Ok(FormulaReport {
        ell_residual,
        integral_rel_error,
        steiner_residual,
        pass: ell_residual < FORMULA_TOL && integral_rel_error < FORMULA_TOL && steiner_residual < FORMULA_TOL,
    })
}
