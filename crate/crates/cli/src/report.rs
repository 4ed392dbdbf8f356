//! Output plumbing shared by the subcommands: deterministic number
//! formatting, the metadata header every artifact carries, and the `--out`
//! sink.

use crate::Failure;

/// Rounds to 12 significant digits, then prints the shortest decimal string
/// that reads back to that rounded value. Plain Display would leak digits
/// beyond what the outputs promise; fixed-width scientific would bloat round
/// values like 0.7.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    sig12(x).to_string()
}

/// The nearest f64 with 12 significant decimal digits; JSON reports pass
/// through this so a value prints the same there as in the CSVs.
pub fn sig12(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap()
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig12).unwrap_or_default()
}

/// First line of every output: tool version, seed and config digest.
pub fn meta_line(seed: Option<u64>, config_sha256: &str) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "# ratchet {} seed={seed} config_sha256={config_sha256}",
        env!("CARGO_PKG_VERSION")
    )
}

pub fn meta_value(seed: Option<u64>, config_sha256: &str) -> serde_json::Value {
    serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config_sha256": config_sha256,
    })
}

pub fn write_out(out: &str, content: &str) -> Result<(), Failure> {
    if out == "-" {
        use std::io::Write;
        std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| Failure::Io(format!("stdout: {e}")))
    } else {
        std::fs::write(out, content).map_err(|e| Failure::Io(format!("{out}: {e}")))
    }
}
