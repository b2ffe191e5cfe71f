//! Data-utility families mapping a training-set size `n` to model quality.
//!
//! Two concave, increasing learning-curve families are supported:
//!
//! * fraction: `phi(n) = 1 - kappa / (1 + g n)`, defined where `kappa / (1 + g n) <= 1`
//! * exponential: `phi(n) = 1 - mu exp(-h n)`
//!
//! Data sizes are continuous reals. A size below the family's feasible minimum
//! is an error, never clamped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when comparing a data size against the feasibility threshold,
/// so that `n_min` itself (computed in floating point) is accepted.
const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Fraction,
    Exponential,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Fraction => "fraction",
            Family::Exponential => "exponential",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fraction" => Ok(Family::Fraction),
            "exponential" => Ok(Family::Exponential),
            other => Err(Error::InvalidParams(format!("unknown utility family `{other}`"))),
        }
    }
}

/// Parameters of one utility family.
///
/// Serializes as `{"family":"fraction","kappa":..,"g":..}` or
/// `{"family":"exponential","mu":..,"h":..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum UtilityParams {
    Fraction { kappa: f64, g: f64 },
    Exponential { mu: f64, h: f64 },
}

impl UtilityParams {
    pub fn fraction(kappa: f64, g: f64) -> Result<Self> {
        let p = UtilityParams::Fraction { kappa, g };
        p.validate()?;
        Ok(p)
    }

    pub fn exponential(mu: f64, h: f64) -> Result<Self> {
        let p = UtilityParams::Exponential { mu, h };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters of `family` from its two coefficients in declaration order.
    pub fn from_pair(family: Family, first: f64, second: f64) -> Self {
        match family {
            Family::Fraction => UtilityParams::Fraction { kappa: first, g: second },
            Family::Exponential => UtilityParams::Exponential { mu: first, h: second },
        }
    }

    /// The two coefficients in declaration order: `(kappa, g)` or `(mu, h)`.
    pub fn pair(&self) -> (f64, f64) {
        match *self {
            UtilityParams::Fraction { kappa, g } => (kappa, g),
            UtilityParams::Exponential { mu, h } => (mu, h),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            UtilityParams::Fraction { .. } => Family::Fraction,
            UtilityParams::Exponential { .. } => Family::Exponential,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilityParams::Fraction { kappa, g } => {
                if !(g.is_finite() && g > 0.0) {
                    return Err(Error::InvalidParams(format!("fraction g must be > 0, got {g}")));
                }
                if !(kappa.is_finite() && kappa >= 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "fraction kappa must be >= 0, got {kappa}"
                    )));
                }
            }
            UtilityParams::Exponential { mu, h } => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::InvalidParams(format!("exponential h must be > 0, got {h}")));
                }
                if !(mu.is_finite() && (0.0..=1.0).contains(&mu)) {
                    return Err(Error::InvalidParams(format!(
                        "exponential mu must lie in [0, 1], got {mu}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Smallest feasible data size; the feasible domain is `[n_min, inf)`.
    pub fn feasible_domain(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.n_min_unchecked())
    }

    pub(crate) fn n_min_unchecked(&self) -> f64 {
        match *self {
            UtilityParams::Fraction { kappa, g } => ((kappa - 1.0) / g).max(0.0),
            UtilityParams::Exponential { .. } => 0.0,
        }
    }

    /// Checks parameters and that `n` lies in the feasible domain.
    pub fn check_feasible(&self, n: f64) -> Result<()> {
        self.validate()?;
        let n_min = self.n_min_unchecked();
        if !n.is_finite() || n < n_min - FEASIBILITY_SLACK * (1.0 + n_min) {
            return Err(Error::Infeasible { n, n_min });
        }
        Ok(())
    }

    /// Utility `phi(n)`.
    pub fn eval(&self, n: f64) -> Result<f64> {
        self.check_feasible(n)?;
        Ok(self.eval_unchecked(n))
    }

    /// Shortfall `1 - phi(n)`, i.e. the predicted classification error,
    /// computed directly so it keeps full precision when `phi` is close to 1.
    pub fn shortfall(&self, n: f64) -> Result<f64> {
        self.check_feasible(n)?;
        Ok(self.shortfall_unchecked(n))
    }

    /// First derivative `phi'(n)`, per data item.
    pub fn deriv1(&self, n: f64) -> Result<f64> {
        self.check_feasible(n)?;
        Ok(self.deriv1_unchecked(n))
    }

    /// Second derivative `phi''(n)`; never positive.
    pub fn deriv2(&self, n: f64) -> Result<f64> {
        self.check_feasible(n)?;
        Ok(self.deriv2_unchecked(n))
    }

    pub(crate) fn eval_unchecked(&self, n: f64) -> f64 {
        1.0 - self.shortfall_unchecked(n)
    }

    pub(crate) fn shortfall_unchecked(&self, n: f64) -> f64 {
        match *self {
            // at most 1 on the domain; the cap only absorbs rounding of n_min
            UtilityParams::Fraction { kappa, g } => (kappa / (1.0 + g * n)).min(1.0),
            UtilityParams::Exponential { mu, h } => mu * (-h * n).exp(),
        }
    }

    pub(crate) fn deriv1_unchecked(&self, n: f64) -> f64 {
        match *self {
            UtilityParams::Fraction { kappa, g } => {
                let x = 1.0 + g * n;
                kappa * g / (x * x)
            }
            UtilityParams::Exponential { mu, h } => mu * h * (-h * n).exp(),
        }
    }

    pub(crate) fn deriv2_unchecked(&self, n: f64) -> f64 {
        match *self {
            UtilityParams::Fraction { kappa, g } => {
                let x = 1.0 + g * n;
                -2.0 * kappa * g * g / (x * x * x)
            }
            UtilityParams::Exponential { mu, h } => -mu * h * h * (-h * n).exp(),
        }
    }

    /// Data size at which the utility reaches `1 - gap`.
    pub fn saturation_size(&self, gap: f64) -> f64 {
        match *self {
            UtilityParams::Fraction { kappa, g } => ((kappa / gap - 1.0) / g).max(0.0),
            UtilityParams::Exponential { mu, h } => {
                if mu <= gap {
                    0.0
                } else {
                    (mu / gap).ln() / h
                }
            }
        }
    }
}

impl std::fmt::Display for UtilityParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            UtilityParams::Fraction { kappa, g } => write!(f, "fraction(kappa={kappa}, g={g})"),
            UtilityParams::Exponential { mu, h } => write!(f, "exponential(mu={mu}, h={h})"),
        }
    }
}
