//! Experiment configuration and its validation.

use std::fmt;
use std::str::FromStr;

use hypervis_core::closedform::{self, FiniteOrInfinite, GrainLaw};
use serde::Serialize;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Visvol,
    VisvolTruncated,
    CdfBoolean,
    CdfTessellation,
    IntersectionDensity,
    ZeroCell,
    FormulaCheck,
    Crofton,
}

impl Quantity {
    pub const ALL: [Quantity; 8] = [
        Quantity::Visvol,
        Quantity::VisvolTruncated,
        Quantity::CdfBoolean,
        Quantity::CdfTessellation,
        Quantity::IntersectionDensity,
        Quantity::ZeroCell,
        Quantity::FormulaCheck,
        Quantity::Crofton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Visvol => "visvol",
            Quantity::VisvolTruncated => "visvol_truncated",
            Quantity::CdfBoolean => "cdf_boolean",
            Quantity::CdfTessellation => "cdf_tessellation",
            Quantity::IntersectionDensity => "intersection_density",
            Quantity::ZeroCell => "zero_cell",
            Quantity::FormulaCheck => "formula_check",
            Quantity::Crofton => "crofton",
        }
    }

    /// Whether the quantity is defined by a grain law.
    pub fn needs_grain(self) -> bool {
        matches!(
            self,
            Quantity::Visvol | Quantity::VisvolTruncated | Quantity::CdfBoolean | Quantity::IntersectionDensity
        )
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| HarnessError::Usage(format!("unknown quantity '{s}'")))
    }
}

/// How the truncated mean visible volume is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Whole realizations in the ball of radius `cutoff`.
    #[default]
    Window,
    /// Ray split into unit pieces simulated in a tube.
    Split,
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "window" => Ok(Method::Window),
            "split" => Ok(Method::Split),
            _ => Err(HarnessError::Usage(format!("unknown method '{s}', expected window or split"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub quantity: Quantity,
    pub d: usize,
    pub gamma: f64,
    pub law: Option<GrainLaw>,
    pub n_reps: usize,
    pub n_rays: usize,
    pub cutoff: f64,
    pub truncate_at: Option<f64>,
    pub r_win: Option<f64>,
    /// Segment length for crofton.
    pub length: f64,
    pub method: Method,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(quantity: Quantity, d: usize, gamma: f64) -> Self {
        Self {
            quantity,
            d,
            gamma,
            law: None,
            n_reps: 1000,
            n_rays: 100,
            cutoff: 12.0,
            truncate_at: None,
            r_win: None,
            length: 1.0,
            method: Method::Window,
            seed: 42,
        }
    }

    pub fn with_law(mut self, law: GrainLaw) -> Self {
        self.law = Some(law);
        self
    }

    pub fn with_counts(mut self, n_reps: usize, n_rays: usize) -> Self {
        self.n_reps = n_reps;
        self.n_rays = n_rays;
        self
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_truncation(mut self, r: f64) -> Self {
        self.truncate_at = Some(r);
        self
    }

    pub fn with_window(mut self, r_win: f64) -> Self {
        self.r_win = Some(r_win);
        self
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The grain law, or a usage error naming the quantity that needs it.
    pub fn require_law(&self) -> Result<GrainLaw, HarnessError> {
        self.law
            .ok_or_else(|| HarnessError::Usage(format!("{} needs a grain law (--grain fixed:R or uniform:A,B)", self.quantity)))
    }

    /// Checks the preconditions that can be decided without simulating.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let usage = |msg: String| Err(HarnessError::Usage(msg));
        if self.quantity == Quantity::FormulaCheck {
            return Ok(());
        }
        if self.d < 2 {
            return usage(format!("dimension must be at least 2, got {}", self.d));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return usage(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.n_reps == 0 || self.n_rays == 0 {
            return usage("--reps and --rays must be at least 1".into());
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return usage(format!("cutoff must be positive, got {}", self.cutoff));
        }
        if self.quantity.needs_grain() {
            self.require_law()?.validate()?;
        } else if self.law.is_some() {
            return usage(format!("{} takes no grain law", self.quantity));
        }
        if self.quantity == Quantity::IntersectionDensity && self.d != 2 {
            return usage("intersection_density is implemented for d = 2 only".into());
        }
        match (self.quantity, self.truncate_at) {
            (Quantity::VisvolTruncated, None) => return usage("visvol_truncated needs --truncate R".into()),
            (Quantity::VisvolTruncated, Some(r)) if !(r > 0.0 && r.is_finite()) => {
                return usage(format!("truncation radius must be positive, got {r}"))
            }
            (Quantity::VisvolTruncated, Some(r)) if self.method == Method::Window && r > self.cutoff => {
                return usage(format!("truncation radius {r} exceeds the cutoff {}", self.cutoff))
            }
            (Quantity::VisvolTruncated, _) => {}
            (_, Some(_)) => return usage(format!("--truncate only applies to visvol_truncated, not {}", self.quantity)),
            _ => {}
        }
        if let Some(r) = self.r_win {
            if !(r > 0.0 && r.is_finite()) {
                return usage(format!("window radius must be positive, got {r}"));
            }
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return usage(format!("segment length must be positive, got {}", self.length));
        }
        if self.method == Method::Split && self.quantity != Quantity::VisvolTruncated {
            return usage("--method split only applies to visvol_truncated".into());
        }
        if self.quantity == Quantity::Visvol {
            let law = self.require_law()?;
            if let FiniteOrInfinite::Infinite = closedform::mean_visible_volume(self.d, self.gamma, &law)? {
                let rate = closedform::boolean_rate(self.d, self.gamma, &law)?;
                return usage(format!(
                    "gamma v* = {rate} is not above the threshold d - 1 = {}: the mean visible volume is infinite \
                     (threshold gamma = {}); use visvol_truncated",
                    self.d - 1,
                    threshold_gamma(self.d, &law)?
                ));
            }
        }
        if self.quantity == Quantity::ZeroCell {
            if let FiniteOrInfinite::Infinite = closedform::zero_cell_mean_volume(self.d, self.gamma)? {
                return usage(format!(
                    "hyperplane visibility rate {} is not above d - 1 = {}: the zero cell has infinite mean volume",
                    closedform::zero_cell_rate(self.d, self.gamma)?,
                    self.d - 1
                ));
            }
        }
        Ok(())
    }
}

/// Intensity at which the mean visible volume stops being finite.
pub fn threshold_gamma(d: usize, law: &GrainLaw) -> Result<f64, HarnessError> {
    let per_unit = closedform::boolean_rate(d, 1.0, law)?;
    Ok((d - 1) as f64 / per_unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> GrainLaw {
        GrainLaw::fixed(0.5).unwrap()
    }

    #[test]
    fn quantity_names_round_trip() {
        for q in Quantity::ALL {
            assert_eq!(q.name().parse::<Quantity>().unwrap(), q);
        }
        assert!("volume".parse::<Quantity>().is_err());
    }

    #[test]
    fn subcritical_visvol_is_a_usage_error() {
        let cfg = ExperimentConfig::new(Quantity::Visvol, 2, 0.5).with_law(half());
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, HarnessError::Usage(_)));
        assert!(err.to_string().contains("d - 1"), "{err}");
    }

    #[test]
    fn missing_law_is_named() {
        let err = ExperimentConfig::new(Quantity::CdfBoolean, 2, 1.5).validate().unwrap_err();
        assert!(err.to_string().contains("grain law"));
    }

    #[test]
    fn zero_counts_rejected() {
        let cfg = ExperimentConfig::new(Quantity::ZeroCell, 2, 2.0).with_counts(0, 10);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn truncation_beyond_cutoff_rejected() {
        let cfg = ExperimentConfig::new(Quantity::VisvolTruncated, 2, 1.5)
            .with_law(half())
            .with_cutoff(5.0)
            .with_truncation(6.0);
        assert!(cfg.validate().is_err());
        assert!(cfg.clone().with_method(Method::Split).validate().is_ok());
    }

    #[test]
    fn threshold_gamma_matches_closed_form() {
        let t = threshold_gamma(2, &half()).unwrap();
        let beta = closedform::visibility_threshold(2, 0.5).unwrap();
        assert!((t - beta).abs() < 1e-14);
    }
}
