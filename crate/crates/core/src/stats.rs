//! Summary statistics, Kolmogorov–Smirnov tests and the estimate record.

use serde::Serialize;
use thiserror::Error;

use crate::closedform::GrainLaw;

/// Asymptotic 1% critical value of the one-sample KS statistic times `sqrt(n)`.
pub const KS_CRIT_1PCT: f64 = 1.628;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    Empty,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("rate must be positive and finite, got {0}")]
    InvalidRate(f64),
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

pub fn summarize(xs: &[f64]) -> Result<Summary, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(Summary {
        n,
        mean,
        variance,
        stderr: (variance / n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    pub critical_1pct: f64,
    pub pass: bool,
}

/// One-sample KS test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let critical_1pct = KS_CRIT_1PCT / nf.sqrt();
    Ok(KsResult {
        statistic,
        n,
        critical_1pct,
        pass: statistic < critical_1pct,
    })
}

pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsResult, StatsError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(StatsError::InvalidRate(rate));
    }
    ks_test(samples, |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSampleKs {
    pub statistic: f64,
    pub n: usize,
    pub m: usize,
    pub critical_1pct: f64,
    pub pass: bool,
}

/// Two-sample KS test; `pass` means no evidence of a difference at 1%.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TwoSampleKs, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut statistic: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        statistic = statistic.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let critical_1pct = KS_CRIT_1PCT * ((n + m) as f64 / (n * m) as f64).sqrt();
    Ok(TwoSampleKs {
        statistic,
        n,
        m,
        critical_1pct,
        pass: statistic < critical_1pct,
    })
}

/// A Monte Carlo estimate with its matching closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub quantity: String,
    pub dim: usize,
    pub gamma: f64,
    pub grain: Option<GrainLaw>,
    pub estimate: f64,
    pub stderr: f64,
    pub n_reps: usize,
    pub n_rays: usize,
    pub censored_fraction: f64,
    pub closed_form: Option<f64>,
    pub z_score: Option<f64>,
    pub seed: u64,
}

impl EstimateRecord {
    /// Record without a closed form; attach one with [`Self::with_closed_form`].
    pub fn new(quantity: impl Into<String>, dim: usize, gamma: f64, summary: &Summary, seed: u64) -> Self {
        Self {
            quantity: quantity.into(),
            dim,
            gamma,
            grain: None,
            estimate: summary.mean,
            stderr: summary.stderr,
            n_reps: summary.n,
            n_rays: 0,
            censored_fraction: 0.0,
            closed_form: None,
            z_score: None,
            seed,
        }
    }

    pub fn with_grain(mut self, law: GrainLaw) -> Self {
        self.grain = Some(law);
        self
    }

    pub fn with_rays(mut self, n_rays: usize, censored_fraction: f64) -> Self {
        self.n_rays = n_rays;
        self.censored_fraction = censored_fraction;
        self
    }

    pub fn with_closed_form(mut self, closed_form: Option<f64>) -> Self {
        self.closed_form = closed_form;
        self.z_score = match closed_form {
            Some(c) if self.stderr > 0.0 => Some((self.estimate - c) / self.stderr),
            _ => None,
        };
        self
    }
}
