//! Brute-force verification engine: backward-induction dynamic programming on
//! a uniform price grid, exact expectations by exhaustive enumeration of all
//! 2^T demand paths, and a golden-section maximizer for polishing optima.
//!
//! Ceilings and prices share one grid, so the state space is exactly the grid
//! and no interpolation is ever needed; accuracy is confined to the grid
//! resolution by design, keeping this solver an assumption-free check on the
//! closed forms.

use crate::closed_form::PricingPolicy;
use crate::error::{Error, Result};
use crate::model::{DemandState, MarketParams, PathOutcome};

/// Uniform price grid with both endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    lo: f64,
    hi: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validation(format!(
                "grid needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        if points < 2 {
            return Err(Error::Validation(format!(
                "grid needs at least 2 points, got {points}"
            )));
        }
        Ok(Self { lo, hi, points })
    }

    /// Default solver grid: `points` prices spanning [c, d_high].
    pub fn covering(params: &MarketParams, points: usize) -> Result<Self> {
        Self::new(params.c(), params.d_high(), points)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
    }
}

/// Grid policy produced by [`solve_dp`]: optimal price index per period,
/// ceiling index and demand state, plus the ex-ante continuation value
/// W_t(x) per period and ceiling index (W_{T+1} is identically zero).
#[derive(Debug, Clone)]
pub struct TabulatedPolicy {
    grid: Vec<f64>,
    step: f64,
    /// price_idx[t-1][ceiling index][state index]
    price_idx: Vec<Vec<[usize; 2]>>,
    /// w[t-1][ceiling index]
    w: Vec<Vec<f64>>,
}

impl TabulatedPolicy {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Nearest grid index for a ceiling; infinity maps to the top of the grid.
    ///
    /// On-path ceilings are previously chosen prices and therefore exact grid
    /// values; the rounding only matters for off-grid probes.
    pub fn ceiling_index(&self, x: f64) -> usize {
        if x.is_infinite() || x >= *self.grid.last().unwrap() {
            return self.grid.len() - 1;
        }
        if x <= self.grid[0] {
            return 0;
        }
        ((x - self.grid[0]) / self.step).round() as usize
    }

    /// Chosen price for period `t` (1-based) at a ceiling grid index.
    pub fn price_at(&self, t: usize, ceiling_idx: usize, state: DemandState) -> f64 {
        self.grid[self.price_idx[t - 1][ceiling_idx][state.index()]]
    }

    /// Ex-ante continuation value W_t at a ceiling grid index.
    pub fn value_at(&self, t: usize, ceiling_idx: usize) -> f64 {
        self.w[t - 1][ceiling_idx]
    }
}

impl PricingPolicy for TabulatedPolicy {
    fn price(&self, t: usize, ceiling: f64, state: DemandState) -> f64 {
        self.price_at(t, self.ceiling_index(ceiling), state)
    }
}

/// Solves the decrease-only pricing problem by backward induction on `grid`.
///
/// For each period and each ceiling grid value x, the chosen price maximizes
/// `profit(p, d) + W_{t+1}(p)` over grid prices p <= x; period 1 is
/// unconstrained, which the table represents through the top ceiling index.
/// Ties resolve to the lowest maximizing price: on stretches where truncated
/// profit is zero and the continuation value has gone flat, every price is a
/// maximizer and the lowest one is the boundary the analysis picks out.
pub fn solve_dp(params: &MarketParams, grid: &GridSpec) -> Result<TabulatedPolicy> {
    if grid.points < 201 {
        return Err(Error::Validation(format!(
            "solver grid needs at least 201 points, got {}",
            grid.points
        )));
    }
    if grid.lo > params.c() || grid.hi < params.d_high() {
        return Err(Error::Validation(format!(
            "grid [{}, {}] must cover [c, d_high] = [{}, {}]",
            grid.lo,
            grid.hi,
            params.c(),
            params.d_high()
        )));
    }
    if grid.lo < 0.0 {
        return Err(Error::Validation(format!(
            "grid extends to negative prices, lo = {}",
            grid.lo
        )));
    }

    let n = grid.points;
    let xs: Vec<f64> = (0..n).map(|i| grid.value(i)).collect();
    let prof_high = xs
        .iter()
        .map(|&p| params.profit(p, params.d_high()))
        .collect::<Result<Vec<_>>>()?;
    let prof_low = xs
        .iter()
        .map(|&p| params.profit(p, params.d_low()))
        .collect::<Result<Vec<_>>>()?;

    let horizon = params.horizon();
    let mut price_idx: Vec<Vec<[usize; 2]>> = Vec::with_capacity(horizon);
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut w_next = vec![0.0; n];

    for t_idx in (0..horizon).rev() {
        let g = params.gammas()[t_idx];
        let mut best = vec![[0usize; 2]; n];
        let mut w_t = vec![0.0; n];
        let (mut bh, mut bl) = (0usize, 0usize);
        let (mut vh, mut vl) = (prof_high[0] + w_next[0], prof_low[0] + w_next[0]);
        for j in 0..n {
            let fh = prof_high[j] + w_next[j];
            if fh > vh {
                bh = j;
                vh = fh;
            }
            let fl = prof_low[j] + w_next[j];
            if fl > vl {
                bl = j;
                vl = fl;
            }
            best[j] = [bh, bl];
            w_t[j] = g * vh + (1.0 - g) * vl;
        }
        price_idx.push(best);
        w.push(w_t);
        w_next = w.last().unwrap().clone();
    }
    price_idx.reverse();
    w.reverse();

    Ok(TabulatedPolicy {
        grid: xs,
        step: grid.step(),
        price_idx,
        w,
    })
}

/// Runs one day of a policy along a realized demand path, threading the
/// ceiling (unconstrained period 1, then each price caps the next).
pub fn simulate_day(
    policy: &impl PricingPolicy,
    params: &MarketParams,
    path: &[DemandState],
) -> Result<PathOutcome> {
    let linear = params.exponent_a() == 1.0;
    let mut prices = Vec::with_capacity(path.len());
    let mut total_profit = 0.0;
    let mut total_cs = 0.0;
    let mut ceiling = f64::INFINITY;
    for (i, &state) in path.iter().enumerate() {
        let p = policy.price(i + 1, ceiling, state);
        let d = params.intercept(state);
        total_profit += params.profit(p, d)?;
        if linear {
            total_cs += params.cs(p, d)?;
        }
        prices.push(p);
        ceiling = p;
    }
    let avg_price = prices.iter().sum::<f64>() / prices.len() as f64;
    Ok(PathOutcome {
        prices,
        avg_price,
        total_profit,
        total_cs: linear.then_some(total_cs),
    })
}

/// Exact expectations over a policy.
#[derive(Debug, Clone)]
pub struct ExpectationReport {
    pub expected_avg_price: f64,
    pub expected_total_profit: f64,
    /// Absent when the demand exponent is not 1.
    pub expected_total_cs: Option<f64>,
    pub per_period_expected_price: Vec<f64>,
    pub path_count: u64,
}

const MAX_EXACT_HORIZON: usize = 20;

/// Exact expectation by exhaustive enumeration of all 2^T demand paths.
pub fn enumerate_expectation(
    policy: &impl PricingPolicy,
    params: &MarketParams,
) -> Result<ExpectationReport> {
    let horizon = params.horizon();
    if horizon > MAX_EXACT_HORIZON {
        return Err(Error::Validation(format!(
            "horizon {horizon} exceeds the exact enumeration limit {MAX_EXACT_HORIZON}, use the Monte Carlo engine"
        )));
    }
    let linear = params.exponent_a() == 1.0;
    let mut e_avg = 0.0;
    let mut e_profit = 0.0;
    let mut e_cs = 0.0;
    let mut per_period = vec![0.0; horizon];
    let mut prob_sum = 0.0;
    let mut path = vec![DemandState::Low; horizon];
    for bits in 0u64..(1u64 << horizon) {
        let mut prob = 1.0;
        for (t, slot) in path.iter_mut().enumerate() {
            let high = (bits >> t) & 1 == 1;
            *slot = if high {
                DemandState::High
            } else {
                DemandState::Low
            };
            let g = params.gammas()[t];
            prob *= if high { g } else { 1.0 - g };
        }
        let outcome = simulate_day(policy, params, &path)?;
        e_avg += prob * outcome.avg_price;
        e_profit += prob * outcome.total_profit;
        if linear {
            e_cs += prob * outcome.total_cs.unwrap();
        }
        for (t, p) in outcome.prices.iter().enumerate() {
            per_period[t] += prob * p;
        }
        prob_sum += prob;
    }
    debug_assert!((prob_sum - 1.0).abs() < 1e-12);
    Ok(ExpectationReport {
        expected_avg_price: e_avg,
        expected_total_profit: e_profit,
        expected_total_cs: linear.then_some(e_cs),
        per_period_expected_price: per_period,
        path_count: 1u64 << horizon,
    })
}

/// Expected sum of prices over periods t0..=T, starting period t0 with
/// ceiling `x0`, under exhaustive enumeration of the remaining demand states.
pub fn expected_price_sum_from(
    policy: &impl PricingPolicy,
    params: &MarketParams,
    t0: usize,
    x0: f64,
) -> Result<f64> {
    let horizon = params.horizon();
    if t0 < 1 || t0 > horizon {
        return Err(Error::Domain(format!("period {t0} outside 1..={horizon}")));
    }
    let rem = horizon - t0 + 1;
    if rem > MAX_EXACT_HORIZON {
        return Err(Error::Validation(format!(
            "enumerating {rem} remaining periods exceeds the exact limit {MAX_EXACT_HORIZON}"
        )));
    }
    let mut total = 0.0;
    for bits in 0u64..(1u64 << rem) {
        let mut prob = 1.0;
        let mut ceiling = x0;
        let mut sum = 0.0;
        for k in 0..rem {
            let t = t0 + k;
            let high = (bits >> k) & 1 == 1;
            let g = params.gammas()[t - 1];
            prob *= if high { g } else { 1.0 - g };
            let state = if high {
                DemandState::High
            } else {
                DemandState::Low
            };
            let p = policy.price(t, ceiling, state);
            sum += p;
            ceiling = p;
        }
        total += prob * sum;
    }
    Ok(total)
}

/// Golden-section search for the maximum of a unimodal objective on [lo, hi].
pub fn golden_section_max(
    objective: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(lo < hi) {
        return Err(Error::Validation(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let invphi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = objective(d);
        }
    }
    let arg = 0.5 * (a + b);
    Ok((arg, objective(arg)))
}
