//! Primitives of the two-state demand model: parameter validation, demand,
//! per-period profit, consumer surplus and the static monopoly price.
//!
//! Demand in each period is an intercept shifter, `d_high` with probability
//! `gammas[t]` and `d_low` otherwise. Quantity at price `p` is
//! `max(d - p, 0)^a` in truncated mode and the raw `d - p` otherwise; the
//! untruncated variant exists for closed-form analysis and is only defined
//! for the linear exponent.

use crate::error::{Error, Result};

/// Demand state realized in a single period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandState {
    High,
    Low,
}

impl DemandState {
    /// Stable index used by tabulated policies: High = 0, Low = 1.
    pub fn index(self) -> usize {
        match self {
            DemandState::High => 0,
            DemandState::Low => 1,
        }
    }
}

/// A realized sequence of demand states, one per period.
pub type DemandPath = Vec<DemandState>;

/// Market primitives for a horizon of `gammas.len()` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    c: f64,
    d_low: f64,
    d_high: f64,
    gammas: Vec<f64>,
    truncated: bool,
    exponent_a: f64,
}

impl MarketParams {
    /// Validates and constructs market parameters.
    ///
    /// Requires `d_high > d_low > c >= 0`, every `gammas[t]` strictly inside
    /// (0, 1), a positive demand exponent, truncation whenever the exponent
    /// differs from 1 (a fractional power of a negative base is undefined),
    /// and zero marginal cost in that nonlinear case.
    pub fn new(
        c: f64,
        d_low: f64,
        d_high: f64,
        gammas: Vec<f64>,
        truncated: bool,
        exponent_a: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("c", c),
            ("d_low", d_low),
            ("d_high", d_high),
            ("exponent_a", exponent_a),
        ] {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be finite, got {v}")));
            }
        }
        if c < 0.0 {
            return Err(Error::Validation(format!("c must be nonnegative, got {c}")));
        }
        if !(d_high > d_low && d_low > c) {
            return Err(Error::Validation(format!(
                "demand intercepts must satisfy d_high > d_low > c, got d_high={d_high}, d_low={d_low}, c={c}"
            )));
        }
        if gammas.is_empty() {
            return Err(Error::Validation(
                "gammas must contain at least one period".into(),
            ));
        }
        if let Some(bad) = gammas
            .iter()
            .find(|g| !(g.is_finite() && **g > 0.0 && **g < 1.0))
        {
            return Err(Error::Validation(format!(
                "every gamma must lie strictly in (0, 1), got {bad}"
            )));
        }
        if exponent_a <= 0.0 {
            return Err(Error::Validation(format!(
                "exponent_a must be positive, got {exponent_a}"
            )));
        }
        if exponent_a != 1.0 {
            if !truncated {
                return Err(Error::Validation(
                    "untruncated demand requires exponent_a = 1".into(),
                ));
            }
            if c != 0.0 {
                return Err(Error::Validation(
                    "exponent_a != 1 requires zero marginal cost".into(),
                ));
            }
        }
        Ok(Self {
            c,
            d_low,
            d_high,
            gammas,
            truncated,
            exponent_a,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d_low(&self) -> f64 {
        self.d_low
    }

    pub fn d_high(&self) -> f64 {
        self.d_high
    }

    /// High-demand probabilities, one per period (1-based period t is `gammas()[t-1]`).
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Number of periods in the day.
    pub fn horizon(&self) -> usize {
        self.gammas.len()
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn exponent_a(&self) -> f64 {
        self.exponent_a
    }

    /// True when every period shares the same high-demand probability.
    pub fn constant_gamma(&self) -> bool {
        self.gammas.iter().all(|g| *g == self.gammas[0])
    }

    /// Demand intercept for a state.
    pub fn intercept(&self, state: DemandState) -> f64 {
        match state {
            DemandState::High => self.d_high,
            DemandState::Low => self.d_low,
        }
    }

    /// Quantity sold at price `p` under intercept `d`.
    pub fn quantity(&self, p: f64, d: f64) -> Result<f64> {
        if p < 0.0 {
            return Err(Error::Validation(format!(
                "price must be nonnegative, got {p}"
            )));
        }
        if self.truncated {
            Ok(f64::max(d - p, 0.0).powf(self.exponent_a))
        } else {
            Ok(d - p)
        }
    }

    /// Per-period profit `(p - c) * quantity(p, d)`.
    pub fn profit(&self, p: f64, d: f64) -> Result<f64> {
        Ok((p - self.c) * self.quantity(p, d)?)
    }

    /// Consumer surplus under linear demand, `0.5 * max(d - p, 0)^2`.
    pub fn cs(&self, p: f64, d: f64) -> Result<f64> {
        if self.exponent_a != 1.0 {
            return Err(Error::Unsupported(
                "consumer surplus is only defined for exponent_a = 1".into(),
            ));
        }
        Ok(0.5 * f64::max(d - p, 0.0).powi(2))
    }

    /// Single-period profit maximizer: `(d + c) / 2` for the linear exponent,
    /// `d / (1 + a)` in the zero-cost nonlinear case.
    pub fn static_monopoly_price(&self, d: f64) -> Result<f64> {
        if d <= self.c {
            return Err(Error::Domain(format!(
                "static price requires d > c, got d={d}, c={}",
                self.c
            )));
        }
        if self.exponent_a == 1.0 {
            Ok((d + self.c) / 2.0)
        } else {
            Ok(d / (1.0 + self.exponent_a))
        }
    }

    /// Static price in the high state, `p_H`.
    pub fn p_high(&self) -> f64 {
        self.static_monopoly_price(self.d_high)
            .expect("d_high > c by construction")
    }

    /// Static price in the low state, `p_L`.
    pub fn p_low(&self) -> f64 {
        self.static_monopoly_price(self.d_low)
            .expect("d_low > c by construction")
    }
}

/// Prices realized along one day, one per period.
pub type PricePath = Vec<f64>;

/// Simulation outcome of a single day.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub prices: PricePath,
    pub avg_price: f64,
    pub total_profit: f64,
    /// Sum of per-period consumer surplus; absent when the exponent is not 1.
    pub total_cs: Option<f64>,
}
