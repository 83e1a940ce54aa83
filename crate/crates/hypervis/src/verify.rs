//! The acceptance suite: eleven checks of the simulations against the closed
//! forms, each with a pinned seed.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use hypervis_core::closedform::{self, FiniteOrInfinite, GrainLaw};
use hypervis_core::procsim::estimate_ball_volume;
use hypervis_core::rng::{stream_rng, StreamRole};
use hypervis_core::stats::ks_exponential;
use hypervis_core::visibility::{
    boolean_ranges, estimate_crofton, estimate_truncated_split, estimate_visible_volume, estimate_zero_cell_volume,
    hyperplane_ranges,
};
use hypervis_core::intersect::estimate_intersection_density;

use crate::run::{max_ell_residual, range_values, ELL_GRID, ELL_RADII, INTEGRAL_GRID};
use crate::HarnessError;

/// Per-criterion bound on `|z|`.
pub const Z_LIMIT: f64 = 3.0;
/// Bound on the largest `|z|` across the suite.
pub const FAMILY_Z_LIMIT: f64 = 4.0;

pub const CRITERIA: usize = 11;

/// Seeds fixed before the suite was first run; see the README.
pub const PINNED_SEEDS: [u64; CRITERIA] = [42; CRITERIA];

const NAMES: [&str; CRITERIA] = [
    "exponential visibility law",
    "mean visible volume",
    "finiteness threshold",
    "intersection density",
    "zero cell",
    "ell identity",
    "sinh-exp integral",
    "steiner and ball volume",
    "critical truncated growth",
    "near-critical scaling",
    "crofton crossings",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    /// z-scores of the Monte Carlo comparisons made by this criterion.
    pub z_scores: Vec<f64>,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

struct Check {
    pass: bool,
    detail: String,
    z_scores: Vec<f64>,
}

fn within_budget(seconds: f64, limit: f64, check: Check) -> Check {
    if seconds < limit {
        check
    } else {
        Check {
            pass: false,
            detail: format!("{}; over the {limit} s budget", check.detail),
            ..check
        }
    }
}

fn half_disc() -> GrainLaw {
    GrainLaw::Fixed { radius: 0.5 }
}

fn z_check(label: &str, estimate: f64, stderr: f64, target: f64) -> (bool, String, f64) {
    let z = (estimate - target) / stderr;
    (
        z.abs() < Z_LIMIT,
        format!("{label} {estimate:.6} +- {stderr:.6} vs {target:.6}, z = {z:+.2}"),
        z,
    )
}

fn finite(v: FiniteOrInfinite) -> Result<f64, HarnessError> {
    v.finite()
        .ok_or_else(|| HarnessError::Usage("closed form is unexpectedly infinite".into()))
}

/// Ranges of the disc model are exponential with rate `2 gamma sinh(1/2)`.
fn exponential_law(seed: u64) -> Result<Check, HarnessError> {
    let law = half_disc();
    let ranges = boolean_ranges(2, 1.5, law, 10_000, 12.0, seed, None)?;
    let (values, censored) = range_values(&ranges);
    let rate = closedform::boolean_rate(2, 1.5, &law)?;
    let ks = ks_exponential(&values, rate)?;
    Ok(Check {
        pass: ks.pass,
        detail: format!(
            "KS {:.5} vs {:.5} at rate {rate:.6}, n = {}, censored {censored}",
            ks.statistic, ks.critical_1pct, ks.n
        ),
        z_scores: vec![],
    })
}

fn mean_visible_volume(seed: u64) -> Result<Check, HarnessError> {
    let law = half_disc();
    let rec = estimate_visible_volume(2, 1.5, law, 2000, 200, Some(12.0), 12.0, seed)?;
    let target = finite(closedform::mean_visible_volume(2, 1.5, &law)?)?;
    let (pass, detail, z) = z_check("E V", rec.estimate, rec.stderr, target);
    Ok(Check {
        pass,
        detail,
        z_scores: vec![z],
    })
}

fn finiteness_threshold(_seed: u64) -> Result<Check, HarnessError> {
    let beta = closedform::visibility_threshold(2, 0.5)?;
    let expected = 1.0 / (2.0 * 0.5f64.sinh());
    let at = |g: f64| closedform::mean_visible_volume(2, g, &GrainLaw::Fixed { radius: 0.5 });
    let infinite_at = at(beta)?.is_infinite() && at(beta * (1.0 - 1e-9))?.is_infinite() && at(0.5)?.is_infinite();
    let finite_above = !at(beta * (1.0 + 1e-9))?.is_infinite() && !at(1.0)?.is_infinite();
    let rounded = format!("{beta:.4}");
    Ok(Check {
        pass: infinite_at && finite_above && rounded == "0.9595" && (beta - expected).abs() < 1e-14,
        detail: format!("threshold {beta:.6} (rounds to {rounded}), infinite at and below: {infinite_at}, finite above: {finite_above}"),
        z_scores: vec![],
    })
}

fn intersection_density(seed: u64) -> Result<Check, HarnessError> {
    let rec = estimate_intersection_density(1.0, half_disc(), 3.0, 2000, seed)?;
    let target = 4.0 * PI * 0.5f64.sinh().powi(2);
    let (pass, detail, z) = z_check("density", rec.estimate, rec.stderr, target);
    Ok(Check {
        pass,
        detail,
        z_scores: vec![z],
    })
}

fn zero_cell(seed: u64) -> Result<Check, HarnessError> {
    let rec = estimate_zero_cell_volume(2, 2.0, 2000, 200, 12.0, seed)?;
    let target = 2.0 * PI.powi(3) / (16.0 - PI * PI);
    let (z_pass, detail, z) = z_check("E V0", rec.estimate, rec.stderr, target);
    let ranges = hyperplane_ranges(2, 2.0, 10_000, 12.0, seed, None)?;
    let (values, _) = range_values(&ranges);
    let ks = ks_exponential(&values, 4.0 / PI)?;
    Ok(Check {
        pass: z_pass && ks.pass,
        detail: format!("{detail}; ranges KS {:.5} vs {:.5}", ks.statistic, ks.critical_1pct),
        z_scores: vec![z],
    })
}

fn ell_identity(_seed: u64) -> Result<Check, HarnessError> {
    let worst = max_ell_residual()?;
    Ok(Check {
        pass: worst < 1e-8,
        detail: format!("max residual {worst:.2e} over {} cases", ELL_GRID.len() * ELL_RADII.len()),
        z_scores: vec![],
    })
}

fn sinh_exp_integral(_seed: u64) -> Result<Check, HarnessError> {
    let worst = crate::run::max_integral_rel_error()?;
    let spot = finite(closedform::sinh_exp_integral(2, 2.0))?;
    let spot_err = (spot - 1.0 / 3.0).abs();
    Ok(Check {
        pass: worst < 1e-10 && spot_err < 1e-15,
        detail: format!(
            "max relative error {worst:.2e} over {} cases, (2, 2) -> {spot:.16}",
            INTEGRAL_GRID.len()
        ),
        z_scores: vec![],
    })
}

fn steiner_and_ball(seed: u64) -> Result<Check, HarnessError> {
    let fit = closedform::steiner_ball_check(2, 1.0, 0.7)?;
    let v0_err = (fit.coefficients[0] - 1f64.cosh()).abs();
    let mut rng = stream_rng(seed, 0, StreamRole::Points);
    let rec = estimate_ball_volume(2, 1.0, 0.0, 400_000, &mut rng, seed)?;
    let target = 2.0 * PI * (1f64.cosh() - 1.0);
    let (z_pass, detail, z) = z_check("vol B(1)", rec.estimate, rec.stderr, target);
    Ok(Check {
        pass: v0_err < 1e-6 && z_pass,
        detail: format!("V0 {:.10} (error {v0_err:.1e}); {detail}", fit.coefficients[0]),
        z_scores: vec![z],
    })
}

/// At the critical intensity the truncated mean grows like `pi R`. Each
/// ratio is reported; the increment and the `R = 20` ratio are asserted.
/// The closed form itself is `pi (R - 1/2) + O(e^{-2R})`, so the `R = 10`
/// ratio sits on the 5% boundary and cannot be asserted.
fn critical_growth(seed: u64) -> Result<Check, HarnessError> {
    let law = half_disc();
    let beta = closedform::visibility_threshold(2, 0.5)?;
    let run = estimate_truncated_split(2, beta, law, 20.0, 1.0, 500_000, seed)?;
    let (v10, _) = run.truncated(10.0)?;
    let (v20, se20) = run.truncated(20.0)?;
    let (inc, se_inc) = run.increment(10.0, 20.0)?;
    let rel = |x: f64| (x / PI - 1.0).abs();
    let (r10, r20, slope) = (v10 / 10.0, v20 / 20.0, inc / 10.0);
    Ok(Check {
        pass: rel(slope) < 0.05 && rel(r20) < 0.05,
        detail: format!(
            "increment/10 = {slope:.4} (+- {:.4}), V(20)/20 = {r20:.4} (+- {:.4}), V(10)/10 = {r10:.4} [reported], pi = {PI:.4}",
            se_inc / 10.0,
            se20 / 20.0
        ),
        z_scores: vec![],
    })
}

fn near_critical(_seed: u64) -> Result<Check, HarnessError> {
    let delta = 1e-3;
    let mut worst: f64 = 0.0;
    for d in [2usize, 3] {
        let exact = finite(closedform::mean_visible_volume_for_rate(d, (d - 1) as f64 + delta)?)?;
        let approx = closedform::omega(d) / (2f64.powi(d as i32 - 1) * delta);
        worst = worst.max((exact / approx - 1.0).abs());
    }
    Ok(Check {
        pass: worst < 0.01,
        detail: format!("largest relative gap {worst:.2e} for d in {{2, 3}} at delta = {delta}"),
        z_scores: vec![],
    })
}

fn crofton(seed: u64) -> Result<Check, HarnessError> {
    let rec = estimate_crofton(2, 1.0, 1.0, 10_000, seed)?;
    let (pass, detail, z) = z_check("crossings", rec.estimate, rec.stderr, 2.0 / PI);
    Ok(Check {
        pass,
        detail,
        z_scores: vec![z],
    })
}

type Runner = fn(u64) -> Result<Check, HarnessError>;

const RUNNERS: [(Runner, f64); CRITERIA] = [
    (exponential_law, 30.0),
    (mean_visible_volume, 120.0),
    (finiteness_threshold, f64::INFINITY),
    (intersection_density, 120.0),
    (zero_cell, 120.0),
    (ell_identity, 5.0),
    (sinh_exp_integral, f64::INFINITY),
    (steiner_and_ball, f64::INFINITY),
    (critical_growth, 180.0),
    (near_critical, f64::INFINITY),
    (crofton, f64::INFINITY),
];

/// Runs criterion `id` (1-based). Errors count as failures.
pub fn criterion(id: usize, seed: u64) -> CriterionResult {
    assert!((1..=CRITERIA).contains(&id), "criterion {id} does not exist");
    let (runner, budget) = RUNNERS[id - 1];
    let start = Instant::now();
    let outcome = runner(seed);
    let seconds = start.elapsed().as_secs_f64();
    let check = match outcome {
        Ok(c) => within_budget(seconds, budget, c),
        Err(e) => Check {
            pass: false,
            detail: format!("error: {e}"),
            z_scores: vec![],
        },
    };
    CriterionResult {
        id,
        name: NAMES[id - 1],
        pass: check.pass,
        detail: check.detail,
        z_scores: check.z_scores,
        seconds,
    }
}

pub fn pinned(id: usize) -> CriterionResult {
    criterion(id, PINNED_SEEDS[id - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub results: Vec<CriterionResult>,
    pub max_abs_z: f64,
}

impl SuiteReport {
    pub fn family_pass(&self) -> bool {
        self.max_abs_z < FAMILY_Z_LIMIT
    }

    pub fn pass(&self) -> bool {
        self.family_pass() && self.results.iter().all(|r| r.pass)
    }
}

/// Runs every criterion, with the pinned seeds or a single override.
pub fn run_suite(seed: Option<u64>, mut on_result: impl FnMut(&CriterionResult)) -> SuiteReport {
    let results: Vec<CriterionResult> = (1..=CRITERIA)
        .map(|id| {
            let r = criterion(id, seed.unwrap_or(PINNED_SEEDS[id - 1]));
            on_result(&r);
            r
        })
        .collect();
    let max_abs_z = results
        .iter()
        .flat_map(|r| r.z_scores.iter())
        .fold(0.0f64, |m, z| m.max(z.abs()));
    SuiteReport { results, max_abs_z }
}
