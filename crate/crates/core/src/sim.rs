//! Seeded Monte Carlo policy evaluation for horizons beyond exact
//! enumeration, and a synthetic intraday price-archive generator that feeds
//! the empirics pipeline.
//!
//! Randomness is counter-based: replication r of seed s reads from ChaCha8
//! stream r of a generator seeded with s, so every replication's draws are a
//! pure function of (seed, replication) and the worker count can never
//! perturb results. Aggregation sums fixed-size chunks in replication order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::closed_form::{
    t_period_policy, two_period_policy, FlexiblePolicy, PricingPolicy, RegulatedClosedForm,
};
use crate::dp::{simulate_day, solve_dp, GridSpec};
use crate::empirics::PriceRecord;
use crate::error::{Error, Result};
use crate::model::{DemandPath, DemandState, MarketParams};

/// Which pricing rule a simulation runs.
#[derive(Debug, Clone)]
pub enum PolicySelector {
    Flexible,
    /// The analytic decrease-only policy, where one exists for the parameters.
    RegulatedClosedForm,
    /// The grid solver's policy.
    RegulatedTabulated {
        grid: GridSpec,
    },
}

/// A Monte Carlo run description.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: MarketParams,
    pub policy: PolicySelector,
    pub replications: u64,
    pub seed: u64,
}

/// Monte Carlo aggregates over replications.
#[derive(Debug, Clone)]
pub struct SimReport {
    pub mean_avg_price: f64,
    /// Sample standard deviation of the daily average price over sqrt(n);
    /// zero when undefined.
    pub stderr_avg_price: f64,
    /// False for a single replication, where the standard error is undefined.
    pub stderr_defined: bool,
    pub mean_total_profit: f64,
    /// Absent when the demand exponent is not 1.
    pub mean_total_cs: Option<f64>,
    pub per_period_mean_price: Vec<f64>,
    pub replications: u64,
}

fn stream_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

fn fill_path(rng: &mut ChaCha8Rng, params: &MarketParams, path: &mut [DemandState]) {
    for (t, slot) in path.iter_mut().enumerate() {
        let u: f64 = rng.random();
        *slot = if u < params.gammas()[t] {
            DemandState::High
        } else {
            DemandState::Low
        };
    }
}

/// The demand path for one replication; a pure function of (seed,
/// replication) independent of call order.
pub fn draw_demand_path(seed: u64, replication: u64, params: &MarketParams) -> DemandPath {
    let mut rng = stream_rng(seed, replication);
    let mut path = vec![DemandState::Low; params.horizon()];
    fill_path(&mut rng, params, &mut path);
    path
}

/// The analytic decrease-only policy for parameters that admit one.
pub fn regulated_closed_form(params: &MarketParams) -> Result<RegulatedClosedForm> {
    if params.horizon() == 2 && params.truncated() && params.exponent_a() == 1.0 {
        two_period_policy(params)
    } else if !params.truncated() && params.exponent_a() == 1.0 && params.constant_gamma() {
        t_period_policy(params)
    } else {
        Err(Error::Unsupported(
            "no analytic decrease-only policy for this configuration, use the grid solver".into(),
        ))
    }
}

// Replications are summed inside fixed chunks and the chunk sums are folded
// in index order, so the reduction tree never depends on scheduling.
const CHUNK: u64 = 4096;

struct Acc {
    n: u64,
    sum_avg: f64,
    sumsq_avg: f64,
    sum_profit: f64,
    sum_cs: f64,
    per_period: Vec<f64>,
}

impl Acc {
    fn new(horizon: usize) -> Self {
        Self {
            n: 0,
            sum_avg: 0.0,
            sumsq_avg: 0.0,
            sum_profit: 0.0,
            sum_cs: 0.0,
            per_period: vec![0.0; horizon],
        }
    }

    fn merge(mut self, other: &Acc) -> Self {
        self.n += other.n;
        self.sum_avg += other.sum_avg;
        self.sumsq_avg += other.sumsq_avg;
        self.sum_profit += other.sum_profit;
        self.sum_cs += other.sum_cs;
        for (a, b) in self.per_period.iter_mut().zip(&other.per_period) {
            *a += b;
        }
        self
    }
}

/// Runs the configured policy over seeded replications; output is
/// bit-identical for a fixed (config, seed) regardless of worker count.
pub fn run_mc(config: &SimConfig) -> Result<SimReport> {
    match &config.policy {
        PolicySelector::Flexible => run_mc_with(
            &FlexiblePolicy::new(&config.params),
            &config.params,
            config.replications,
            config.seed,
        ),
        PolicySelector::RegulatedClosedForm => run_mc_with(
            &regulated_closed_form(&config.params)?,
            &config.params,
            config.replications,
            config.seed,
        ),
        PolicySelector::RegulatedTabulated { grid } => run_mc_with(
            &solve_dp(&config.params, grid)?,
            &config.params,
            config.replications,
            config.seed,
        ),
    }
}

/// [`run_mc`] with an explicit policy.
pub fn run_mc_with(
    policy: &(impl PricingPolicy + Sync),
    params: &MarketParams,
    replications: u64,
    seed: u64,
) -> Result<SimReport> {
    if replications < 1 {
        return Err(Error::Validation("replications must be at least 1".into()));
    }
    let horizon = params.horizon();
    let linear = params.exponent_a() == 1.0;
    let chunk_bounds: Vec<(u64, u64)> = (0..replications)
        .step_by(CHUNK as usize)
        .map(|s| (s, u64::min(s + CHUNK, replications)))
        .collect();
    let chunk_accs: Vec<Result<Acc>> = chunk_bounds
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = Acc::new(horizon);
            let mut path = vec![DemandState::Low; horizon];
            for rep in start..end {
                let mut rng = stream_rng(seed, rep);
                fill_path(&mut rng, params, &mut path);
                let outcome = simulate_day(policy, params, &path)?;
                acc.n += 1;
                acc.sum_avg += outcome.avg_price;
                acc.sumsq_avg += outcome.avg_price * outcome.avg_price;
                acc.sum_profit += outcome.total_profit;
                if linear {
                    acc.sum_cs += outcome.total_cs.unwrap();
                }
                for (slot, p) in acc.per_period.iter_mut().zip(&outcome.prices) {
                    *slot += p;
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = Acc::new(horizon);
    for acc in &chunk_accs {
        total = total.merge(acc.as_ref().map_err(Clone::clone)?);
    }
    let n = total.n as f64;
    let mean = total.sum_avg / n;
    let stderr_defined = total.n > 1;
    let stderr = if stderr_defined {
        let var = f64::max(total.sumsq_avg - n * mean * mean, 0.0) / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(SimReport {
        mean_avg_price: mean,
        stderr_avg_price: stderr,
        stderr_defined,
        mean_total_profit: total.sum_profit / n,
        mean_total_cs: linear.then(|| total.sum_cs / n),
        per_period_mean_price: total.per_period.iter().map(|s| s / n).collect(),
        replications: total.n,
    })
}

fn truncated_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 4.0 {
            return z;
        }
    }
}

/// Generates a synthetic station-level hourly price archive.
///
/// Station s on day d (both 0-based) consumes replication stream
/// `s * days + d`: first the day's demand path, then one noise draw per
/// hour. Days before `reform_day` (1-based) price flexibly; from that day on
/// the configured policy applies. Each model period spans 24/T consecutive
/// hours and every hourly quote is the period price plus Gaussian noise
/// truncated at four standard deviations, keeping quotes positive for any
/// reasonable noise scale.
pub fn synthesize_archive(
    config: &SimConfig,
    stations: u32,
    days: u32,
    reform_day: u32,
    noise_sd: f64,
    start_date: chrono::NaiveDate,
) -> Result<Vec<PriceRecord>> {
    let params = &config.params;
    let horizon = params.horizon();
    if stations < 1 || days < 1 {
        return Err(Error::Validation(
            "need at least one station and one day".into(),
        ));
    }
    if reform_day < 1 || reform_day > days {
        return Err(Error::Validation(format!(
            "reform_day must lie in 1..={days}, got {reform_day}"
        )));
    }
    if 24 % horizon != 0 {
        return Err(Error::Validation(format!(
            "horizon must divide 24 to map periods onto hours, got {horizon}"
        )));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::Validation(format!(
            "noise_sd must be nonnegative, got {noise_sd}"
        )));
    }
    let flexible = FlexiblePolicy::new(params);
    let post: Box<dyn PricingPolicy> = match &config.policy {
        PolicySelector::Flexible => Box::new(FlexiblePolicy::new(params)),
        PolicySelector::RegulatedClosedForm => Box::new(regulated_closed_form(params)?),
        PolicySelector::RegulatedTabulated { grid } => Box::new(solve_dp(params, grid)?),
    };
    let hours_per_period = 24 / horizon;
    let mut records = Vec::with_capacity(stations as usize * days as usize * 24);
    let mut path = vec![DemandState::Low; horizon];
    for s in 0..stations {
        for d in 0..days {
            let rep = s as u64 * days as u64 + d as u64;
            let mut rng = stream_rng(config.seed, rep);
            fill_path(&mut rng, params, &mut path);
            let regulated = d + 1 >= reform_day;
            let policy: &dyn PricingPolicy = if regulated { post.as_ref() } else { &flexible };
            let outcome = simulate_day(&policy, params, &path)?;
            let date = start_date + chrono::Duration::days(d as i64);
            for h in 0..24usize {
                let base = outcome.prices[h / hours_per_period];
                let noise = if noise_sd > 0.0 {
                    noise_sd * truncated_standard_normal(&mut rng)
                } else {
                    0.0
                };
                let price = base + noise;
                if price <= 0.0 {
                    return Err(Error::Validation(format!(
                        "noise_sd {noise_sd} produced a nonpositive quote {price}"
                    )));
                }
                records.push(PriceRecord {
                    station_id: format!("s{}", s + 1),
                    timestamp: date.and_hms_opt(h as u32, 0, 0).unwrap(),
                    price,
                });
            }
        }
    }
    Ok(records)
}

impl PricingPolicy for &dyn PricingPolicy {
    fn price(&self, t: usize, ceiling: f64, state: DemandState) -> f64 {
        (**self).price(t, ceiling, state)
    }
}
