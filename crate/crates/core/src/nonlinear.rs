//! Two-period curvature extension: demand `(d - p)^a` at zero cost, the
//! first-order condition for the period-1 low-state price, and the gap
//! between regulated and flexible expected average prices as the exponent
//! moves through the linear benchmark a = 1.

use crate::closed_form::{FlexiblePolicy, RegulatedClosedForm};
use crate::dp::enumerate_expectation;
use crate::error::{Error, Result};
use crate::model::MarketParams;

/// A two-period instance with demand exponent `a` and a common high-demand
/// probability `q` in both periods; marginal cost is pinned to zero.
#[derive(Debug, Clone)]
pub struct NonlinearInstance {
    q: f64,
    a: f64,
    params: MarketParams,
}

impl NonlinearInstance {
    pub fn new(q: f64, a: f64, d_low: f64, d_high: f64) -> Result<Self> {
        let params = MarketParams::new(0.0, d_low, d_high, vec![q, q], true, a)?;
        Ok(Self { q, a, params })
    }

    /// The reference parameterization d_high = 1, d_low = 0.5.
    pub fn canonical(q: f64, a: f64) -> Result<Self> {
        Self::new(q, a, 0.5, 1.0)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn p_high(&self) -> f64 {
        self.params.p_high()
    }

    pub fn p_low(&self) -> f64 {
        self.params.p_low()
    }

    /// Search interval for the period-1 low-state price,
    /// `(p_L, min{d_low, p_H})`.
    pub fn bracket(&self) -> (f64, f64) {
        (self.p_low(), f64::min(self.params.d_low(), self.p_high()))
    }
}

/// First-order condition residual for the period-1 low-state price:
/// `F(p) = q (d_H - p)^(a-1) (p_H - p) - (d_L - p)^(a-1) (p - p_L)`.
pub fn foc_residual(p: f64, inst: &NonlinearInstance) -> Result<f64> {
    let d_low = inst.params.d_low();
    if p >= d_low {
        return Err(Error::Domain(format!(
            "residual needs p < d_low, got p = {p}, d_low = {d_low}"
        )));
    }
    let d_high = inst.params.d_high();
    let e = inst.a - 1.0;
    Ok(inst.q * (d_high - p).powf(e) * (inst.p_high() - p)
        - (d_low - p).powf(e) * (p - inst.p_low()))
}

const BRACKET_EPS: f64 = 1e-9;
const BISECT_TOL: f64 = 1e-12;

/// Period-1 low-state price: the root of [`foc_residual`] by bisection to
/// 1e-12, which at a = 1 reduces to `(p_L + q p_H) / (1 + q)`.
pub fn solve_p1_low(inst: &NonlinearInstance) -> Result<f64> {
    let (b_lo, b_hi) = inst.bracket();
    let mut lo = b_lo + BRACKET_EPS;
    let mut hi = b_hi - BRACKET_EPS;
    if foc_residual(lo, inst)? <= 0.0 {
        return Err(Error::Bracket(format!(
            "residual not positive at the lower endpoint p = {lo} (q = {}, a = {})",
            inst.q, inst.a
        )));
    }
    if foc_residual(hi, inst)? >= 0.0 {
        return Err(Error::Bracket(format!(
            "residual not negative at the upper endpoint p = {hi} (q = {}, a = {})",
            inst.q, inst.a
        )));
    }
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if foc_residual(mid, inst)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expected average price gap, regulated minus flexible:
/// `((1 - q) / 2) [(1 + q) p_1^L - q p_H - p_L]`.
pub fn delta(inst: &NonlinearInstance) -> Result<f64> {
    let p1 = solve_p1_low(inst)?;
    Ok(delta_from_p1(inst, p1))
}

fn delta_from_p1(inst: &NonlinearInstance, p1: f64) -> f64 {
    ((1.0 - inst.q) / 2.0) * ((1.0 + inst.q) * p1 - inst.q * inst.p_high() - inst.p_low())
}

/// The same gap computed by exhaustive path enumeration of the explicit
/// two-period policy, as an independent cross-check on [`delta`].
pub fn delta_enumerated(inst: &NonlinearInstance) -> Result<f64> {
    let p1 = solve_p1_low(inst)?;
    let regulated = RegulatedClosedForm::from_targets(inst.p_high(), vec![p1, inst.p_low()]);
    let flexible = FlexiblePolicy::new(&inst.params);
    let reg = enumerate_expectation(&regulated, &inst.params)?;
    let flex = enumerate_expectation(&flexible, &inst.params)?;
    Ok(reg.expected_avg_price - flex.expected_avg_price)
}

/// Central finite-difference slope of the gap in the exponent at a = 1 on
/// the canonical instance.
pub fn delta_slope_fd(q: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 0.1) {
        return Err(Error::Validation(format!(
            "stencil width must lie in (0, 0.1], got {h}"
        )));
    }
    let up = delta(&NonlinearInstance::canonical(q, 1.0 + h)?)?;
    let down = delta(&NonlinearInstance::canonical(q, 1.0 - h)?)?;
    Ok((up - down) / (2.0 * h))
}

/// Closed-form candidate for the slope of the gap at a = 1,
/// `q (q - 1) ln(2q + 3) / (8 (1 + q))`, strictly negative on (0, 1).
///
/// Kept for comparison only: its sign disagrees with the finite-difference
/// slope of [`delta`], and the verification suite reports both side by side
/// rather than preferring one.
pub fn delta_slope_closed(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Validation(format!("q must lie in (0, 1), got {q}")));
    }
    Ok(q * (q - 1.0) * (2.0 * q + 3.0).ln() / (8.0 * (1.0 + q)))
}

/// One cell of a gap sweep; `delta` is absent when the instance fails the
/// interior bracket and the cell is infeasible.
#[derive(Debug, Clone)]
pub struct DeltaCell {
    pub q: f64,
    pub a: f64,
    pub delta: Option<f64>,
}

/// Evaluates the gap on the product grid, rows ordered lexicographically by
/// (q, a); infeasible cells are kept with an empty value rather than dropped.
pub fn sweep_delta(q_grid: &[f64], a_grid: &[f64], d_low: f64, d_high: f64) -> Vec<DeltaCell> {
    let mut qs = q_grid.to_vec();
    let mut as_ = a_grid.to_vec();
    qs.sort_by(f64::total_cmp);
    as_.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(qs.len() * as_.len());
    for &q in &qs {
        for &a in &as_ {
            let cell = NonlinearInstance::new(q, a, d_low, d_high)
                .and_then(|inst| delta(&inst))
                .ok();
            out.push(DeltaCell { q, a, delta: cell });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn residual_examples() {
        let inst = NonlinearInstance::canonical(0.5, 1.0).unwrap();
        assert!(foc_residual(1.0 / 3.0, &inst).unwrap().abs() < 1e-15);
        assert_relative_eq!(foc_residual(0.25, &inst).unwrap(), 0.125);
        assert!(foc_residual(0.45, &inst).unwrap() < 0.0);
        assert!(foc_residual(0.5, &inst).is_err());
    }

    #[test]
    fn root_matches_linear_closed_form() {
        let inst = NonlinearInstance::canonical(0.5, 1.0).unwrap();
        assert_relative_eq!(solve_p1_low(&inst).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        let inst = NonlinearInstance::canonical(0.25, 1.0).unwrap();
        assert_relative_eq!(solve_p1_low(&inst).unwrap(), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn linear_root_matches_for_random_q() {
        for i in 1..100 {
            let q = i as f64 / 100.0;
            let inst = NonlinearInstance::canonical(q, 1.0).unwrap();
            let analytic = (inst.p_low() + q * inst.p_high()) / (1.0 + q);
            assert_relative_eq!(solve_p1_low(&inst).unwrap(), analytic, epsilon = 1e-12);
        }
    }

    #[test]
    fn root_lands_in_bracket_with_small_residual() {
        let inst = NonlinearInstance::canonical(0.5, 1.2).unwrap();
        let p1 = solve_p1_low(&inst).unwrap();
        let (lo, hi) = inst.bracket();
        assert!(p1 > lo && p1 < hi);
        assert!(foc_residual(p1, &inst).unwrap().abs() < 1e-10);
    }

    #[test]
    fn bisection_residual_small_on_feasible_grid() {
        for q in [0.25, 0.5, 0.75] {
            for a in [0.8, 0.9, 1.0, 1.1, 1.2] {
                let inst = NonlinearInstance::canonical(q, a).unwrap();
                let p1 = solve_p1_low(&inst).unwrap();
                assert!(
                    foc_residual(p1, &inst).unwrap().abs() < 1e-10,
                    "q={q} a={a}"
                );
            }
        }
    }

    #[test]
    fn gap_vanishes_at_linear_exponent() {
        for i in 1..=9 {
            let q = i as f64 / 10.0;
            let inst = NonlinearInstance::canonical(q, 1.0).unwrap();
            assert!(delta(&inst).unwrap().abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn formula_and_enumeration_agree() {
        for q in [0.25, 0.5, 0.75] {
            for a in [0.8, 0.9, 1.0, 1.1, 1.2] {
                let inst = NonlinearInstance::canonical(q, a).unwrap();
                let d1 = delta(&inst).unwrap();
                let d2 = delta_enumerated(&inst).unwrap();
                assert!((d1 - d2).abs() < 1e-10, "q={q} a={a}: {d1} vs {d2}");
            }
        }
    }

    // States the documented local sign claim: the gap is positive for
    // exponents just below 1 and negative just above. The computed gap (by
    // formula, enumeration and brute-force maximization alike) has the
    // opposite sign on every cell of this grid, so this test fails; the
    // "known discrepancies" section of the README records the analysis. It
    // is kept failing deliberately rather than inverted to match the code.
    #[test]
    fn gap_sign_pattern_as_documented() {
        for q in [0.25, 0.5, 0.75] {
            let below = delta(&NonlinearInstance::canonical(q, 0.9).unwrap()).unwrap();
            let above = delta(&NonlinearInstance::canonical(q, 1.1).unwrap()).unwrap();
            assert!(
                below > 0.0,
                "documented claim: gap positive at a=0.9, got {below} (q={q})"
            );
            assert!(
                above < 0.0,
                "documented claim: gap negative at a=1.1, got {above} (q={q})"
            );
        }
    }

    #[test]
    fn fd_slope_is_second_order() {
        let f1 = delta_slope_fd(0.5, 0.02).unwrap();
        let f2 = delta_slope_fd(0.5, 0.01).unwrap();
        let f3 = delta_slope_fd(0.5, 0.005).unwrap();
        let r = (f1 - f2).abs() / (f2 - f3).abs();
        assert!(r > 2.5 && r < 6.0, "refinement ratio {r}");
        assert!(delta_slope_fd(0.5, 0.0).is_err());
        assert!(delta_slope_fd(0.5, 0.2).is_err());
    }

    #[test]
    fn closed_slope_examples() {
        assert_relative_eq!(
            delta_slope_closed(0.5).unwrap(),
            0.5 * (-0.5) * 4.0_f64.ln() / 12.0,
            epsilon = 1e-15
        );
        assert!(delta_slope_closed(0.001).unwrap().abs() < 1e-3);
        assert!(delta_slope_closed(0.999).unwrap().abs() < 1e-3);
        assert!(delta_slope_closed(0.0).is_err());
        assert!(delta_slope_closed(1.0).is_err());
    }

    #[test]
    fn sweep_orders_rows_and_marks_infeasible_cells() {
        let cells = sweep_delta(&[0.75, 0.25], &[1.2, 0.8, 1.0], 0.5, 1.0);
        assert_eq!(cells.len(), 6);
        let order: Vec<(f64, f64)> = cells.iter().map(|c| (c.q, c.a)).collect();
        assert_eq!(
            order,
            vec![
                (0.25, 0.8),
                (0.25, 1.0),
                (0.25, 1.2),
                (0.75, 0.8),
                (0.75, 1.0),
                (0.75, 1.2)
            ]
        );
        assert!(cells.iter().all(|c| c.delta.is_some()));
        // With a wide demand gap the static high price exceeds d_low for
        // a > 1 and the root leaves the bracket: infeasible, kept as a row.
        let wide = sweep_delta(&[0.5], &[0.8, 1.2], 1.0, 4.0);
        assert!(wide[0].delta.is_some());
        assert!(wide[1].delta.is_none());
    }

    #[test]
    fn gap_shrinks_as_q_vanishes() {
        for a in [0.8, 1.2] {
            let tiny = delta(&NonlinearInstance::canonical(1e-6, a).unwrap()).unwrap();
            assert!(tiny.abs() < 1e-5, "a={a}: {tiny}");
        }
    }
}
