//! Station-level intraday price archives: CSV ingestion with per-line
//! diagnostics, per-hour mean differences around a reform instant with 90%
//! confidence intervals, and per-hour five-number summaries.
//!
//! Conventions, pinned because golden outputs depend on them: timestamps are
//! local wall clock (no timezone conversion), prices are held to 4 fractional
//! digits, quartiles use the median-of-halves rule excluding the overall
//! median, and the 90% interval uses the two-sample normal approximation
//! with z = 1.6449 and no small-sample correction.

use std::io::Read;

use chrono::{NaiveDateTime, Timelike};

use crate::error::{Error, Result};

/// One posted price quote.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub station_id: String,
    pub timestamp: NaiveDateTime,
    pub price: f64,
}

/// z for a two-sided 90% normal interval.
pub const Z90: f64 = 1.6449;

const TIMESTAMP_FMT: &str = "%Y-%m-%dT%H:%M:%S";

/// Rounds a price to 4 fractional digits (tenths of a cent).
pub fn quantize_price(p: f64) -> f64 {
    (p * 1e4).round() / 1e4
}

/// Parses a price archive CSV with header `station_id,timestamp,price`.
///
/// Returns the valid records plus one diagnostic per skipped row. A missing
/// or wrong header is fatal, as is skipping more than 10% of the data rows.
/// Lines starting with `#` are comments.
pub fn parse_archive(input: impl Read) -> Result<(Vec<PriceRecord>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Archive(format!("unreadable header: {e}")))?;
    let expected = ["station_id", "timestamp", "price"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Archive(format!(
            "missing or wrong header, expected station_id,timestamp,price, got {:?}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                diagnostics.push(format!("line {line}: unreadable row ({e})"));
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            diagnostics.push(format!("line {line}: expected 3 fields, got {}", row.len()));
            continue;
        }
        let timestamp = match NaiveDateTime::parse_from_str(&row[1], TIMESTAMP_FMT) {
            Ok(t) => t,
            Err(_) => {
                diagnostics.push(format!("line {line}: unparseable timestamp"));
                continue;
            }
        };
        let price = match row[2].parse::<f64>() {
            Ok(p) if p.is_finite() => p,
            _ => {
                diagnostics.push(format!("line {line}: unparseable price"));
                continue;
            }
        };
        if price <= 0.0 {
            diagnostics.push(format!("line {line}: nonpositive price"));
            continue;
        }
        records.push(PriceRecord {
            station_id: row[0].to_string(),
            timestamp,
            price: quantize_price(price),
        });
    }
    let skipped = diagnostics.len();
    let total = records.len() + skipped;
    if total > 0 && skipped * 10 > total {
        let preview = diagnostics
            .iter()
            .take(3)
            .cloned()
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Archive(format!(
            "{skipped} of {total} rows skipped: {preview}"
        )));
    }
    Ok((records, diagnostics))
}

/// Per-hour mean price difference after minus before a reform instant.
///
/// Cells are absent when an hour lacks data on a side; the interval is
/// absent unless both sides have at least two observations.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyDiffRow {
    pub hour: u8,
    pub mean_before: Option<f64>,
    pub mean_after: Option<f64>,
    pub diff: Option<f64>,
    pub ci90_lo: Option<f64>,
    pub ci90_hi: Option<f64>,
    pub n_before: u64,
    pub n_after: u64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_var(values: &[f64], m: f64) -> f64 {
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Hour-of-day mean differences around `reform_instant` (before: strictly
/// earlier timestamps), always 24 rows. Buckets are sorted before they are
/// aggregated, so the result is bit-identical under record reordering.
pub fn hourly_diff(records: &[PriceRecord], reform_instant: NaiveDateTime) -> Vec<HourlyDiffRow> {
    let mut before: Vec<Vec<f64>> = vec![Vec::new(); 24];
    let mut after: Vec<Vec<f64>> = vec![Vec::new(); 24];
    for r in records {
        let h = r.timestamp.hour() as usize;
        if r.timestamp < reform_instant {
            before[h].push(r.price);
        } else {
            after[h].push(r.price);
        }
    }
    for bucket in before.iter_mut().chain(after.iter_mut()) {
        bucket.sort_by(f64::total_cmp);
    }
    (0..24)
        .map(|h| {
            let (b, a) = (&before[h], &after[h]);
            let mean_before = (!b.is_empty()).then(|| mean(b));
            let mean_after = (!a.is_empty()).then(|| mean(a));
            let diff = mean_before.zip(mean_after).map(|(mb, ma)| ma - mb);
            let ci = diff.and_then(|d| {
                (b.len() >= 2 && a.len() >= 2).then(|| {
                    let half = Z90
                        * (sample_var(b, mean_before.unwrap()) / b.len() as f64
                            + sample_var(a, mean_after.unwrap()) / a.len() as f64)
                            .sqrt();
                    (d - half, d + half)
                })
            });
            HourlyDiffRow {
                hour: h as u8,
                mean_before,
                mean_after,
                diff,
                ci90_lo: ci.map(|c| c.0),
                ci90_hi: ci.map(|c| c.1),
                n_before: b.len() as u64,
                n_after: a.len() as u64,
            }
        })
        .collect()
}

/// Which side of the reform instant a summary covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Before,
    After,
}

impl Window {
    pub fn as_str(self) -> &'static str {
        match self {
            Window::Before => "Before",
            Window::After => "After",
        }
    }
}

/// Five-number summary of one hour of day within one window.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxWhiskerRow {
    pub hour: u8,
    pub regime: Window,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: u64,
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn five_numbers(sorted: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = sorted.len();
    if n == 1 {
        let x = sorted[0];
        return (x, x, x, x, x);
    }
    // median-of-halves with the overall median excluded on odd counts
    let lower = &sorted[..n / 2];
    let upper = &sorted[n.div_ceil(2)..];
    (
        sorted[0],
        median_of_sorted(lower),
        median_of_sorted(sorted),
        median_of_sorted(upper),
        sorted[n - 1],
    )
}

/// Per-hour five-number summaries for one window; hours without data are
/// omitted and noted in the returned diagnostics.
pub fn box_whisker(
    records: &[PriceRecord],
    window: Window,
    reform_instant: NaiveDateTime,
) -> (Vec<BoxWhiskerRow>, Vec<String>) {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); 24];
    for r in records {
        let in_window = match window {
            Window::Before => r.timestamp < reform_instant,
            Window::After => r.timestamp >= reform_instant,
        };
        if in_window {
            buckets[r.timestamp.hour() as usize].push(r.price);
        }
    }
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for (h, bucket) in buckets.iter_mut().enumerate() {
        if bucket.is_empty() {
            diagnostics.push(format!(
                "hour {h}: no {} records, row omitted",
                window.as_str()
            ));
            continue;
        }
        bucket.sort_by(f64::total_cmp);
        let (min, q1, median, q3, max) = five_numbers(bucket);
        rows.push(BoxWhiskerRow {
            hour: h as u8,
            regime: window,
            min,
            q1,
            median,
            q3,
            max,
            n: bucket.len() as u64,
        });
    }
    (rows, diagnostics)
}
