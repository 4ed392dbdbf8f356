//! The solve, sweep, simulate, synth and empirics subcommands.

use chrono::{NaiveDate, NaiveDateTime};
use serde_json::json;

use ratchet_core::empirics::{box_whisker, hourly_diff, parse_archive, Window};
use ratchet_core::sim::run_mc;
use ratchet_core::{
    enumerate_expectation, expected_avg_price_flexible, expected_avg_price_regulated_2p,
    expected_cs_diff_2p, gamma_tilde, kappa, regime_classify, solve_dp, synthesize_archive,
    t_period_policy, two_period_policy, DemandState, GridSpec, MarketParams, PolicySelector,
    Regime, SimConfig,
};

use crate::config::{PolicyCfg, ReportKind, RunConfig, SweepCfg};
use crate::report::{fmt_opt, fmt_sig12, meta_line, meta_value, sig12, write_out};
use crate::{config, Failure};

const DATE_FMT: &str = "%Y-%m-%d";
const DATETIME_FMT: &str = "%Y-%m-%dT%H:%M:%S";

/// The horizon enumerate_expectation can afford (2^T paths).
const MAX_EXACT: usize = 20;

fn policy_selector(
    p: PolicyCfg,
    params: &MarketParams,
    grid_points: usize,
) -> Result<PolicySelector, Failure> {
    Ok(match p {
        PolicyCfg::Flexible => PolicySelector::Flexible,
        PolicyCfg::RegulatedClosedForm => PolicySelector::RegulatedClosedForm,
        PolicyCfg::RegulatedTabulated => PolicySelector::RegulatedTabulated {
            grid: GridSpec::covering(params, grid_points)?,
        },
    })
}

pub fn solve(cfg: &RunConfig, hash: &str, out: &str) -> Result<i32, Failure> {
    let params = config::require_params(cfg)?;
    let mut doc = serde_json::Map::new();
    doc.insert("_meta".into(), meta_value(cfg.seed, hash));
    doc.insert("p_high".into(), json!(sig12(params.p_high())));
    doc.insert("p_low".into(), json!(sig12(params.p_low())));
    doc.insert(
        "e_avg_flex".into(),
        json!(sig12(expected_avg_price_flexible(&params)?)),
    );

    let linear = params.exponent_a() == 1.0;
    if params.horizon() == 2 && params.truncated() && linear {
        let regime = match regime_classify(&params)? {
            Regime::Interior => "interior",
            Regime::Corner => "corner",
        };
        let policy = two_period_policy(&params)?;
        doc.insert("regime".into(), json!(regime));
        doc.insert("kappa".into(), json!(sig12(kappa(&params))));
        doc.insert("gamma_tilde".into(), json!(gamma_tilde(&params).map(sig12)));
        doc.insert("p1_low".into(), json!(sig12(policy.low_target(1))));
        doc.insert(
            "low_targets".into(),
            json!([sig12(policy.low_target(1)), sig12(policy.low_target(2))]),
        );
        doc.insert(
            "e_avg_reg".into(),
            json!(sig12(expected_avg_price_regulated_2p(&params)?)),
        );
        doc.insert(
            "cs_diff".into(),
            json!(sig12(expected_cs_diff_2p(&params)?)),
        );
    } else if !params.truncated() && linear && params.constant_gamma() {
        let policy = t_period_policy(&params)?;
        let p_bar: Vec<f64> = (1..=params.horizon())
            .map(|t| sig12(policy.low_target(t)))
            .collect();
        doc.insert("p_bar".into(), json!(p_bar));
        if params.horizon() <= MAX_EXACT {
            let report = enumerate_expectation(&policy, &params)?;
            doc.insert("e_avg_reg".into(), json!(sig12(report.expected_avg_price)));
        }
    } else {
        return Err(Failure::Config(format!(
            "params: no closed form for truncated={}, exponent_a={}, horizon={}; solve covers \
             the two-period truncated linear family and the constant-probability untruncated \
             linear family",
            params.truncated(),
            params.exponent_a(),
            params.horizon()
        )));
    }

    if cfg.solve.oracle {
        let grid = GridSpec::covering(&params, cfg.solve.grid_points)?;
        let dp = solve_dp(&params, &grid)?;
        let top = dp.ceiling_index(f64::INFINITY);
        let mut oracle = serde_json::Map::new();
        oracle.insert("grid_points".into(), json!(cfg.solve.grid_points));
        oracle.insert(
            "p1_high".into(),
            json!(sig12(dp.price_at(1, top, DemandState::High))),
        );
        oracle.insert(
            "p1_low".into(),
            json!(sig12(dp.price_at(1, top, DemandState::Low))),
        );
        if params.horizon() <= MAX_EXACT {
            let report = enumerate_expectation(&dp, &params)?;
            oracle.insert("e_avg_reg".into(), json!(sig12(report.expected_avg_price)));
        }
        doc.insert("oracle".into(), serde_json::Value::Object(oracle));
    }

    let mut body = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).unwrap();
    body.push('\n');
    write_out(out, &body)?;
    Ok(0)
}

fn sorted(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g
}

fn need<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    field
        .as_ref()
        .ok_or_else(|| Failure::Config(format!("missing required config field: {name}")))
}

fn refuse<T>(field: &Option<T>, name: &str, kind: &str) -> Result<(), Failure> {
    if field.is_some() {
        return Err(Failure::Config(format!(
            "config field {name} is not used by sweep kind {kind}"
        )));
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig, hash: &str, out: &str) -> Result<i32, Failure> {
    let sw: &SweepCfg = need(&cfg.sweep, "sweep")?;
    let mut body = meta_line(cfg.seed, hash);
    body.push('\n');
    match sw.kind.as_str() {
        "delta" => {
            refuse(&sw.gamma2_grid, "sweep.gamma2_grid", "delta")?;
            refuse(&sw.replications, "sweep.replications", "delta")?;
            refuse(&sw.grid_points, "sweep.grid_points", "delta")?;
            let q_grid = need(&sw.q_grid, "sweep.q_grid")?;
            let a_grid = need(&sw.a_grid, "sweep.a_grid")?;
            let d_low = sw.d_low.unwrap_or(0.5);
            let d_high = sw.d_high.unwrap_or(1.0);
            body.push_str("q,a,delta,status\n");
            for cell in ratchet_core::nonlinear::sweep_delta(q_grid, a_grid, d_low, d_high) {
                let (value, status) = match cell.delta {
                    Some(v) => (fmt_sig12(v), "ok"),
                    None => (String::new(), "infeasible"),
                };
                body.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_sig12(cell.q),
                    fmt_sig12(cell.a),
                    value,
                    status
                ));
            }
        }
        "delta_t5" => {
            refuse(&sw.gamma2_grid, "sweep.gamma2_grid", "delta_t5")?;
            refuse(&sw.d_low, "sweep.d_low", "delta_t5")?;
            refuse(&sw.d_high, "sweep.d_high", "delta_t5")?;
            let q_grid = sorted(need(&sw.q_grid, "sweep.q_grid")?);
            let a_grid = sorted(need(&sw.a_grid, "sweep.a_grid")?);
            let replications = sw.replications.unwrap_or(100_000);
            let grid_points = sw.grid_points.unwrap_or(2001);
            let seed = config::require_seed(cfg)?;
            body.push_str("q,a,delta,status\n");
            for &q in &q_grid {
                for &a in &a_grid {
                    let (value, status) = match delta_t5(q, a, replications, grid_points, seed) {
                        Ok(v) => (fmt_sig12(v), "ok"),
                        Err(_) => (String::new(), "infeasible"),
                    };
                    body.push_str(&format!(
                        "{},{},{},{}\n",
                        fmt_sig12(q),
                        fmt_sig12(a),
                        value,
                        status
                    ));
                }
            }
        }
        "price_diff" => {
            refuse(&sw.q_grid, "sweep.q_grid", "price_diff")?;
            refuse(&sw.a_grid, "sweep.a_grid", "price_diff")?;
            refuse(&sw.d_low, "sweep.d_low", "price_diff")?;
            refuse(&sw.d_high, "sweep.d_high", "price_diff")?;
            refuse(&sw.replications, "sweep.replications", "price_diff")?;
            refuse(&sw.grid_points, "sweep.grid_points", "price_diff")?;
            let g2_grid = sorted(need(&sw.gamma2_grid, "sweep.gamma2_grid")?);
            let params = config::require_params(cfg)?;
            if params.horizon() != 2 || !params.truncated() || params.exponent_a() != 1.0 {
                return Err(Failure::Config(
                    "sweep kind price_diff needs two-period truncated params with exponent_a = 1"
                        .into(),
                ));
            }
            body.push_str("gamma2,e_avg_flex,e_avg_reg,diff,status\n");
            for &g2 in &g2_grid {
                let row = MarketParams::new(
                    params.c(),
                    params.d_low(),
                    params.d_high(),
                    vec![params.gammas()[0], g2],
                    true,
                    1.0,
                )
                .and_then(|m| {
                    let flex = expected_avg_price_flexible(&m)?;
                    let reg = expected_avg_price_regulated_2p(&m)?;
                    Ok((flex, reg))
                });
                match row {
                    Ok((flex, reg)) => body.push_str(&format!(
                        "{},{},{},{},ok\n",
                        fmt_sig12(g2),
                        fmt_sig12(flex),
                        fmt_sig12(reg),
                        fmt_sig12(reg - flex)
                    )),
                    Err(_) => body.push_str(&format!("{},,,,infeasible\n", fmt_sig12(g2))),
                }
            }
        }
        other => {
            return Err(Failure::Config(format!(
                "sweep.kind: unknown kind {other:?} (expected delta, delta_t5 or price_diff)"
            )))
        }
    }
    write_out(out, &body)?;
    Ok(0)
}

/// Monte Carlo estimate of the five-period gap: regulated minus flexible
/// expected average price on common demand paths. The regulated side prices
/// by the grid solver because no closed form covers the curved demand, so
/// the cell carries both sampling and discretization error.
fn delta_t5(
    q: f64,
    a: f64,
    replications: u64,
    grid_points: usize,
    seed: u64,
) -> Result<f64, Failure> {
    let params = MarketParams::new(0.0, 0.5, 1.0, vec![q; 5], true, a)?;
    let grid = GridSpec::covering(&params, grid_points)?;
    let regulated = run_mc(&SimConfig {
        params: params.clone(),
        policy: PolicySelector::RegulatedTabulated { grid },
        replications,
        seed,
    })?;
    let flexible = run_mc(&SimConfig {
        params,
        policy: PolicySelector::Flexible,
        replications,
        seed,
    })?;
    Ok(regulated.mean_avg_price - flexible.mean_avg_price)
}

pub fn simulate(cfg: &RunConfig, hash: &str, out: &str) -> Result<i32, Failure> {
    let params = config::require_params(cfg)?;
    let sim = need(&cfg.simulate, "simulate")?;
    let seed = config::require_seed(cfg)?;
    let policy = policy_selector(sim.policy, &params, sim.grid_points)?;
    let report = run_mc(&SimConfig {
        params,
        policy,
        replications: sim.replications,
        seed,
    })?;

    let mut body = meta_line(cfg.seed, hash);
    body.push_str("\nmetric,value\n");
    body.push_str(&format!(
        "mean_avg_price,{}\n",
        fmt_sig12(report.mean_avg_price)
    ));
    body.push_str(&format!(
        "stderr_avg_price,{}\n",
        fmt_sig12(report.stderr_avg_price)
    ));
    body.push_str(&format!("stderr_defined,{}\n", report.stderr_defined));
    body.push_str(&format!(
        "mean_total_profit,{}\n",
        fmt_sig12(report.mean_total_profit)
    ));
    body.push_str(&format!(
        "mean_total_cs,{}\n",
        fmt_opt(report.mean_total_cs)
    ));
    body.push_str(&format!("replications,{}\n", report.replications));
    for (i, v) in report.per_period_mean_price.iter().enumerate() {
        body.push_str(&format!(
            "per_period_mean_price_{},{}\n",
            i + 1,
            fmt_sig12(*v)
        ));
    }
    write_out(out, &body)?;
    Ok(0)
}

pub fn synth(cfg: &RunConfig, hash: &str, out: &str) -> Result<i32, Failure> {
    let params = config::require_params(cfg)?;
    let sy = need(&cfg.synth, "synth")?;
    let seed = config::require_seed(cfg)?;
    let start = NaiveDate::parse_from_str(&sy.start_date, DATE_FMT)
        .map_err(|e| Failure::Config(format!("synth.start_date: {e}")))?;
    let policy = policy_selector(sy.policy, &params, sy.grid_points)?;
    let sim = SimConfig {
        params,
        policy,
        replications: 1,
        seed,
    };
    let records = synthesize_archive(
        &sim,
        sy.stations,
        sy.days,
        sy.reform_day,
        sy.noise_sd,
        start,
    )?;

    let mut body = meta_line(cfg.seed, hash);
    body.push_str("\nstation_id,timestamp,price\n");
    for r in &records {
        body.push_str(&format!(
            "{},{},{:.4}\n",
            r.station_id,
            r.timestamp.format(DATETIME_FMT),
            r.price
        ));
    }
    write_out(out, &body)?;
    Ok(0)
}

pub fn empirics(cfg: &RunConfig, hash: &str, out: &str) -> Result<i32, Failure> {
    let em = need(&cfg.empirics, "empirics")?;
    let reform = NaiveDateTime::parse_from_str(&em.reform_instant, DATETIME_FMT)
        .map_err(|e| Failure::Config(format!("empirics.reform_instant: {e}")))?;
    let file =
        std::fs::File::open(&em.input).map_err(|e| Failure::Io(format!("{}: {e}", em.input)))?;
    let (records, diagnostics) = parse_archive(std::io::BufReader::new(file))?;
    for d in &diagnostics {
        eprintln!("warning: {d}");
    }

    let mut body = meta_line(cfg.seed, hash);
    match em.report {
        ReportKind::HourlyDiff => {
            body.push_str("\nhour,mean_before,mean_after,diff,ci90_lo,ci90_hi,n_before,n_after\n");
            for r in hourly_diff(&records, reform) {
                body.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.hour,
                    fmt_opt(r.mean_before),
                    fmt_opt(r.mean_after),
                    fmt_opt(r.diff),
                    fmt_opt(r.ci90_lo),
                    fmt_opt(r.ci90_hi),
                    r.n_before,
                    r.n_after
                ));
            }
        }
        ReportKind::BoxWhisker => {
            body.push_str("\nhour,regime,min,q1,median,q3,max,n\n");
            for window in [Window::Before, Window::After] {
                let (rows, diags) = box_whisker(&records, window, reform);
                for d in &diags {
                    eprintln!("warning: {d}");
                }
                for r in rows {
                    body.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        r.hour,
                        r.regime.as_str(),
                        fmt_sig12(r.min),
                        fmt_sig12(r.q1),
                        fmt_sig12(r.median),
                        fmt_sig12(r.q3),
                        fmt_sig12(r.max),
                        r.n
                    ));
                }
            }
        }
    }
    write_out(out, &body)?;
    Ok(0)
}
