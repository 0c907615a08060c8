//! Low-pass filters: even, 1 on `[0, 1/2)`, 0 on `[1, inf)`, non-increasing.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest polynomial order accepted; binomial weights stay well inside f64 range.
pub const MAX_POLY_ORDER: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Degree `2S+1` polynomial transition with `S` vanishing derivatives at both ends.
    SmoothedPolynomial,
    /// `exp(-1/t)` bump transition, infinitely differentiable.
    Exponential,
    /// Indicator of `[0, 1)`.
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassFilter {
    order: u32,
    profile: Profile,
}

/// Polynomial filter of smoothness order `S`.
pub fn make_filter(smoothness_order: u32) -> Result<LowPassFilter> {
    if smoothness_order == 0 {
        return Err(Error::InvalidArgument(
            "smoothness order must be >= 1; use make_cutoff_filter for the indicator".into(),
        ));
    }
    if smoothness_order > MAX_POLY_ORDER {
        return Err(Error::InvalidArgument(format!("smoothness order {smoothness_order} exceeds {MAX_POLY_ORDER}")));
    }
    Ok(LowPassFilter { order: smoothness_order, profile: Profile::SmoothedPolynomial })
}

pub fn make_cutoff_filter() -> LowPassFilter {
    LowPassFilter { order: 0, profile: Profile::Cutoff }
}

/// C-infinity filter; reports `u32::MAX` as its smoothness order.
pub fn make_exponential_filter() -> LowPassFilter {
    LowPassFilter { order: u32::MAX, profile: Profile::Exponential }
}

/// Builds a filter from a profile id and order, as found in config files.
pub fn from_profile(profile: Profile, order: u32) -> Result<LowPassFilter> {
    match profile {
        Profile::SmoothedPolynomial => make_filter(order),
        Profile::Exponential => Ok(make_exponential_filter()),
        Profile::Cutoff => Ok(make_cutoff_filter()),
    }
}

impl LowPassFilter {
    pub fn smoothness_order(&self) -> u32 {
        self.order
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn is_smooth(&self) -> bool {
        self.profile != Profile::Cutoff
    }

    /// Checked evaluation; rejects NaN.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if u.is_nan() {
            return Err(Error::InvalidArgument("filter argument is NaN".into()));
        }
        Ok(self.value(u))
    }

    /// Unchecked evaluation for inner loops. NaN propagates.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        if u.is_nan() {
            return f64::NAN;
        }
        let u = u.abs();
        match self.profile {
            Profile::Cutoff => {
                if u < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ if u < 0.5 => 1.0,
            _ if u >= 1.0 => 0.0,
            Profile::SmoothedPolynomial => binomial_lower_tail(self.order, 2.0 * u - 1.0),
            Profile::Exponential => {
                let t = 2.0 * u - 1.0;
                // 1 - g(t) with g(t) = e(t) / (e(t) + e(1-t)), e(s) = exp(-1/s)
                let a = (-1.0 / t).exp();
                let b = (-1.0 / (1.0 - t)).exp();
                b / (a + b)
            }
        }
    }
}

/// `P(Bin(2S+1, t) <= S)`: equals `1 - smoothstep_S(t)` and is a sum of
/// nonnegative terms, so it is stable for every order we accept.
fn binomial_lower_tail(s: u32, t: f64) -> f64 {
    let n = 2 * s + 1;
    let q = 1.0 - t;
    let mut coeff = 1.0_f64;
    let mut sum = 0.0;
    for j in 0..=s {
        if j > 0 {
            coeff = coeff * f64::from(n - j + 1) / f64::from(j);
        }
        sum += coeff * t.powi(j as i32) * q.powi((n - j) as i32);
    }
    sum.clamp(0.0, 1.0)
}
