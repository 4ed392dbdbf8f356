//! Analytic pricing policies and expectations: the flexible benchmark, the
//! two-period decrease-only policy with its interior/corner classification,
//! welfare comparisons, and the T-period markdown schedule with geometric-sum
//! targets.
//!
//! The two-period closed forms hold for truncated linear demand. The
//! T-period forms require untruncated linear demand with a constant
//! high-demand probability; everything outside those domains must go through
//! the grid solver in [`crate::dp`].

use crate::error::{Error, Result};
use crate::model::{DemandState, MarketParams};

/// Which branch of the two-period solution applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Period-1 low-state price lies strictly inside (p_L, min{d_L, p_H}).
    Interior,
    /// The firm posts p_H even in the low state to keep future flexibility.
    Corner,
}

/// A pricing rule: the price posted in period `t` (1-based) given the
/// inherited ceiling and the realized demand state.
///
/// Period 1 is unconstrained; callers pass `f64::INFINITY` as its ceiling.
pub trait PricingPolicy {
    fn price(&self, t: usize, ceiling: f64, state: DemandState) -> f64;
}

/// Re-optimizes every period at the static monopoly price, ignoring ceilings.
#[derive(Debug, Clone)]
pub struct FlexiblePolicy {
    p_high: f64,
    p_low: f64,
}

impl FlexiblePolicy {
    pub fn new(params: &MarketParams) -> Self {
        Self {
            p_high: params.p_high(),
            p_low: params.p_low(),
        }
    }
}

impl PricingPolicy for FlexiblePolicy {
    fn price(&self, _t: usize, _ceiling: f64, state: DemandState) -> f64 {
        match state {
            DemandState::High => self.p_high,
            DemandState::Low => self.p_low,
        }
    }
}

/// Closed-form decrease-only policy: high state charges the ceiling capped at
/// p_H, low state marks down to a per-period target capped at the ceiling.
#[derive(Debug, Clone)]
pub struct RegulatedClosedForm {
    p_high: f64,
    low_targets: Vec<f64>,
}

impl RegulatedClosedForm {
    /// Builds a policy directly from per-period low-state targets.
    pub fn from_targets(p_high: f64, low_targets: Vec<f64>) -> Self {
        Self {
            p_high,
            low_targets,
        }
    }

    pub fn low_target(&self, t: usize) -> f64 {
        self.low_targets[t - 1]
    }
}

impl PricingPolicy for RegulatedClosedForm {
    fn price(&self, t: usize, ceiling: f64, state: DemandState) -> f64 {
        match state {
            DemandState::High => f64::min(ceiling, self.p_high),
            DemandState::Low => f64::min(ceiling, self.low_targets[t - 1]),
        }
    }
}

/// Demand-gap ratio (d_high - d_low) / (d_low - c).
pub fn kappa(params: &MarketParams) -> f64 {
    (params.d_high() - params.d_low()) / (params.d_low() - params.c())
}

/// Probability threshold above which the corner regime arises; `None` when
/// its denominator is not strictly positive, in which case the interior
/// branch applies unconditionally.
pub fn gamma_tilde(params: &MarketParams) -> Option<f64> {
    let den = params.c() + params.d_high() - 2.0 * params.d_low();
    (den > 0.0).then(|| (params.d_low() - params.c()) / den)
}

fn require_two_period_linear(params: &MarketParams, what: &str) -> Result<()> {
    if params.horizon() != 2 {
        return Err(Error::Validation(format!(
            "{what} requires a two-period horizon, got {}",
            params.horizon()
        )));
    }
    if params.exponent_a() != 1.0 || !params.truncated() {
        return Err(Error::Validation(format!(
            "{what} requires truncated linear demand"
        )));
    }
    Ok(())
}

/// Classifies the two-period solution: Corner iff kappa > 2 and the period-2
/// high-demand probability reaches the gamma_tilde threshold.
pub fn regime_classify(params: &MarketParams) -> Result<Regime> {
    require_two_period_linear(params, "regime classification")?;
    let corner =
        kappa(params) > 2.0 && gamma_tilde(params).is_some_and(|gt| params.gammas()[1] >= gt);
    Ok(if corner {
        Regime::Corner
    } else {
        Regime::Interior
    })
}

/// Optimal two-period decrease-only policy.
///
/// Period 1: p_H in the high state; in the low state the interior candidate
/// (p_L + g2 p_H) / (1 + g2), or p_H in the corner regime. Period 2: the
/// ceiling in the high state, p_L in the low state.
pub fn two_period_policy(params: &MarketParams) -> Result<RegulatedClosedForm> {
    let regime = regime_classify(params)?;
    let (p_high, p_low) = (params.p_high(), params.p_low());
    let g2 = params.gammas()[1];
    let p1 = match regime {
        Regime::Interior => (p_low + g2 * p_high) / (1.0 + g2),
        Regime::Corner => p_high,
    };
    Ok(RegulatedClosedForm::from_targets(p_high, vec![p1, p_low]))
}

/// Expected average daily price under flexible pricing,
/// `(1/T) * sum_t [gamma_t p_H + (1 - gamma_t) p_L]`.
pub fn expected_avg_price_flexible(params: &MarketParams) -> Result<f64> {
    if params.exponent_a() != 1.0 {
        return Err(Error::Unsupported(
            "flexible price expectation is only defined for exponent_a = 1".into(),
        ));
    }
    let (p_high, p_low) = (params.p_high(), params.p_low());
    let sum: f64 = params
        .gammas()
        .iter()
        .map(|g| g * p_high + (1.0 - g) * p_low)
        .sum();
    Ok(sum / params.horizon() as f64)
}

/// Expected average daily price under the two-period regulated policy.
///
/// Equals the flexible value in the interior regime; in the corner regime it
/// exceeds it by (1 - g1)(p_H - p_L)/2.
pub fn expected_avg_price_regulated_2p(params: &MarketParams) -> Result<f64> {
    match regime_classify(params)? {
        Regime::Interior => expected_avg_price_flexible(params),
        Regime::Corner => {
            let (p_high, p_low) = (params.p_high(), params.p_low());
            let g2 = params.gammas()[1];
            Ok(0.5 * (p_high + g2 * p_high + (1.0 - g2) * p_low))
        }
    }
}

/// Expected consumer surplus, regulated minus flexible, over two periods.
pub fn expected_cs_diff_2p(params: &MarketParams) -> Result<f64> {
    let regime = regime_classify(params)?;
    let g1 = params.gammas()[0];
    let g2 = params.gammas()[1];
    match regime {
        Regime::Interior => {
            let gap = params.d_high() - params.d_low();
            Ok((1.0 - g1) * 3.0 * g2 * gap * gap / (8.0 * (1.0 + g2)))
        }
        // In the corner the low state pays p_H > d_L in period 1 and loses
        // all surplus there: cs(p_H, d_L) - cs(p_L, d_L) = -(d_L - c)^2 / 8.
        Regime::Corner => {
            let slack = params.d_low() - params.c();
            Ok(-(1.0 - g1) * slack * slack / 8.0)
        }
    }
}

/// S_n = 1 + q + q^2 + ... + q^n.
pub fn geometric_sum(n: u32, q: f64) -> f64 {
    (0..=n).map(|k| q.powi(k as i32)).sum()
}

fn require_t_period_domain(params: &MarketParams, what: &str) -> Result<()> {
    if params.truncated() || params.exponent_a() != 1.0 {
        return Err(Error::Validation(format!(
            "{what} requires untruncated linear demand"
        )));
    }
    if !params.constant_gamma() {
        return Err(Error::Validation(format!(
            "{what} requires a constant high-demand probability"
        )));
    }
    Ok(())
}

/// T-period low-state markdown target for period `t` (1-based):
/// `p_H - (p_H - p_L) / S_{T-t}`, so the terminal target is p_L.
pub fn t_period_low_target(t: usize, params: &MarketParams) -> Result<f64> {
    require_t_period_domain(params, "the markdown schedule")?;
    let horizon = params.horizon();
    if t < 1 || t > horizon {
        return Err(Error::Domain(format!("period {t} outside 1..={horizon}")));
    }
    let q = params.gammas()[0];
    let s = geometric_sum((horizon - t) as u32, q);
    Ok(params.p_high() - (params.p_high() - params.p_low()) / s)
}

/// The full T-period closed-form policy.
pub fn t_period_policy(params: &MarketParams) -> Result<RegulatedClosedForm> {
    let targets = (1..=params.horizon())
        .map(|t| t_period_low_target(t, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(RegulatedClosedForm::from_targets(params.p_high(), targets))
}

/// Marginal value of the inherited ceiling, `q S_{T-t} (d_high + c - 2x)`.
///
/// The zero-cost case is the derived form; the c > 0 variant extends the same
/// induction and is exercised by tests only at c = 0. The expression is the
/// derivative of the continuation value only where the ceiling still binds
/// the whole remaining markdown schedule, i.e. for x between the period-t
/// target and p_H.
pub fn marginal_ceiling_value(t: usize, x: f64, params: &MarketParams) -> Result<f64> {
    require_t_period_domain(params, "the marginal ceiling value")?;
    let horizon = params.horizon();
    if t < 1 || t > horizon {
        return Err(Error::Domain(format!("period {t} outside 1..={horizon}")));
    }
    let (p_low, p_high) = (params.p_low(), params.p_high());
    if !(p_low..=p_high).contains(&x) {
        return Err(Error::Domain(format!(
            "ceiling {x} outside [p_L, p_H] = [{p_low}, {p_high}]"
        )));
    }
    let q = params.gammas()[0];
    let s = geometric_sum((horizon - t) as u32, q);
    Ok(q * s * (params.d_high() + params.c() - 2.0 * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn set_a() -> MarketParams {
        MarketParams::new(0.0, 1.0, 2.0, vec![0.3, 0.5], true, 1.0).unwrap()
    }

    fn set_b() -> MarketParams {
        MarketParams::new(0.0, 1.0, 4.0, vec![0.3, 0.6], true, 1.0).unwrap()
    }

    fn t_period(q: f64, horizon: usize) -> MarketParams {
        MarketParams::new(0.0, 1.0, 2.0, vec![q; horizon], false, 1.0).unwrap()
    }

    #[test]
    fn kappa_examples() {
        assert_relative_eq!(kappa(&set_a()), 1.0);
        assert_relative_eq!(kappa(&set_b()), 3.0);
        let boundary = MarketParams::new(0.0, 1.0, 3.0, vec![0.3, 0.5], true, 1.0).unwrap();
        assert_relative_eq!(kappa(&boundary), 2.0);
    }

    #[test]
    fn gamma_tilde_examples() {
        assert_relative_eq!(gamma_tilde(&set_b()).unwrap(), 0.5);
        assert!(gamma_tilde(&set_a()).is_none());
        let boundary = MarketParams::new(0.0, 1.0, 3.0, vec![0.3, 0.5], true, 1.0).unwrap();
        assert_relative_eq!(gamma_tilde(&boundary).unwrap(), 1.0);
    }

    #[test]
    fn regime_examples() {
        assert_eq!(regime_classify(&set_a()).unwrap(), Regime::Interior);
        assert_eq!(regime_classify(&set_b()).unwrap(), Regime::Corner);
        let below = MarketParams::new(0.0, 1.0, 4.0, vec![0.3, 0.4], true, 1.0).unwrap();
        assert_eq!(regime_classify(&below).unwrap(), Regime::Interior);
        // gamma_2 exactly at the threshold classifies as corner.
        let at = MarketParams::new(0.0, 1.0, 4.0, vec![0.3, 0.5], true, 1.0).unwrap();
        assert_eq!(regime_classify(&at).unwrap(), Regime::Corner);
        let three = MarketParams::new(0.0, 1.0, 2.0, vec![0.3; 3], true, 1.0).unwrap();
        assert!(regime_classify(&three).is_err());
    }

    #[test]
    fn two_period_policy_prices() {
        let pol = two_period_policy(&set_a()).unwrap();
        assert_relative_eq!(pol.price(1, f64::INFINITY, DemandState::Low), 2.0 / 3.0);
        assert_relative_eq!(pol.price(1, f64::INFINITY, DemandState::High), 1.0);
        assert_relative_eq!(pol.price(2, 2.0 / 3.0, DemandState::High), 2.0 / 3.0);
        assert_relative_eq!(pol.price(2, 2.0 / 3.0, DemandState::Low), 0.5);

        let corner = two_period_policy(&set_b()).unwrap();
        assert_relative_eq!(corner.price(1, f64::INFINITY, DemandState::Low), 2.0);
    }

    #[test]
    fn interior_candidate_stays_in_bounds() {
        for g2 in [0.05, 0.3, 0.7, 0.95] {
            let m = MarketParams::new(0.2, 1.0, 2.4, vec![0.4, g2], true, 1.0).unwrap();
            if regime_classify(&m).unwrap() == Regime::Interior {
                let p1 = two_period_policy(&m).unwrap().low_target(1);
                assert!(p1 > m.p_low());
                assert!(p1 < f64::min(m.d_low(), m.p_high()));
            }
        }
    }

    #[test]
    fn expected_prices_match_worked_values() {
        assert_relative_eq!(expected_avg_price_flexible(&set_a()).unwrap(), 0.7);
        assert_relative_eq!(expected_avg_price_flexible(&set_b()).unwrap(), 1.175);
        assert_relative_eq!(expected_avg_price_regulated_2p(&set_a()).unwrap(), 0.7);
        assert_relative_eq!(expected_avg_price_regulated_2p(&set_b()).unwrap(), 1.7);
        let corner_gap = expected_avg_price_regulated_2p(&set_b()).unwrap()
            - expected_avg_price_flexible(&set_b()).unwrap();
        assert_relative_eq!(corner_gap, 0.525, epsilon = 1e-15);
    }

    #[test]
    fn cs_diff_matches_worked_values() {
        assert_relative_eq!(expected_cs_diff_2p(&set_a()).unwrap(), 0.0875);
        assert_relative_eq!(expected_cs_diff_2p(&set_b()).unwrap(), -0.0875);
    }

    #[test]
    fn geometric_sum_examples() {
        assert_relative_eq!(geometric_sum(0, 0.5), 1.0);
        assert_relative_eq!(geometric_sum(2, 0.5), 1.75);
        for n in 1..10u32 {
            let q = 0.37;
            assert_relative_eq!(
                geometric_sum(n, q),
                1.0 + q * geometric_sum(n - 1, q),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn markdown_targets() {
        let m = t_period(0.5, 3);
        assert_relative_eq!(t_period_low_target(1, &m).unwrap(), 1.0 - 0.5 / 1.75);
        assert_relative_eq!(t_period_low_target(2, &m).unwrap(), 2.0 / 3.0);
        assert_relative_eq!(t_period_low_target(3, &m).unwrap(), 0.5);
        for horizon in 2..=8 {
            let m = t_period(0.3, horizon);
            let targets: Vec<f64> = (1..=horizon)
                .map(|t| t_period_low_target(t, &m).unwrap())
                .collect();
            for w in targets.windows(2) {
                assert!(w[0] > w[1]);
            }
            assert_relative_eq!(targets[horizon - 1], m.p_low());
        }
        assert!(t_period_low_target(1, &set_a()).is_err());
        let varying = MarketParams::new(0.0, 1.0, 2.0, vec![0.3, 0.5, 0.4], false, 1.0).unwrap();
        assert!(t_period_low_target(1, &varying).is_err());
    }

    #[test]
    fn first_target_approaches_p_high_with_horizon() {
        let m = t_period(0.5, 60);
        let p1 = t_period_low_target(1, &m).unwrap();
        assert!(m.p_high() - p1 < 0.26);
    }

    #[test]
    fn marginal_ceiling_value_examples() {
        let m = t_period(0.5, 3);
        assert_relative_eq!(marginal_ceiling_value(2, 0.8, &m).unwrap(), 0.3);
        assert_relative_eq!(marginal_ceiling_value(3, 1.0, &m).unwrap(), 0.0);
        assert!(marginal_ceiling_value(2, 0.4, &m).is_err());
        assert!(marginal_ceiling_value(2, 1.1, &m).is_err());
    }
}
