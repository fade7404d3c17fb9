//! Trace CSV and structured-text record output.
//!
//! The trace schema is fixed: a `# config_hash=<hex>` comment line, the header
//! `t,v,beta,x,f,c,g,h,lambda,mu,budget_remaining,depleted`, then one row per
//! round with floats printed to 17 significant digits so values round-trip
//! exactly. All files are written atomically (temp file, then rename).

use std::path::Path;

use crate::engine::{RoundRecord, Trace};
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "t,v,beta,x,f,c,g,h,lambda,mu,budget_remaining,depleted";

/// 17-significant-digit scientific notation; round-trips any finite f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_to_csv(trace: &Trace, config_hash: &str) -> String {
    let mut out = String::with_capacity(trace.records.len() * 160 + 128);
    out.push_str(&format!("# config_hash={config_hash}\n"));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            fmt_float(r.valuation),
            fmt_float(r.competing_bid),
            fmt_float(r.bid),
            fmt_float(r.reward),
            fmt_float(r.cost),
            fmt_float(r.budget_gap),
            fmt_float(r.roi_gap),
            fmt_float(r.lambda),
            fmt_float(r.mu),
            fmt_float(r.budget_remaining),
            u8::from(r.depleted),
        ));
    }
    out
}

/// Parses a trace CSV back into a [`Trace`] plus the embedded config hash.
/// `tau` is recomputed from the depleted flags.
pub fn trace_from_csv(text: &str) -> Result<(Trace, String)> {
    let mut lines = text.lines();
    let hash_line = lines
        .next()
        .ok_or_else(|| Error::MalformedTrace("empty file".into()))?;
    let config_hash = hash_line
        .strip_prefix("# config_hash=")
        .ok_or_else(|| Error::MalformedTrace("missing config_hash comment line".into()))?
        .to_string();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedTrace("missing header".into()))?;
    if header != TRACE_HEADER {
        return Err(Error::MalformedTrace(format!("unexpected header {header:?}")));
    }
    let mut records = Vec::new();
    let mut tau = usize::MAX;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(Error::MalformedTrace(format!(
                "row {} has {} columns, expected 12",
                i + 1,
                cols.len()
            )));
        }
        let t: usize = cols[0]
            .parse()
            .map_err(|e| Error::MalformedTrace(format!("row {}: bad t: {e}", i + 1)))?;
        let f = |j: usize| -> Result<f64> {
            cols[j]
                .parse::<f64>()
                .map_err(|e| Error::MalformedTrace(format!("row {}: column {j}: {e}", i + 1)))
        };
        let depleted = match cols[11] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => {
                return Err(Error::MalformedTrace(format!(
                    "row {}: bad depleted flag {other:?}",
                    i + 1
                )))
            }
        };
        let record = RoundRecord {
            t,
            valuation: f(1)?,
            competing_bid: f(2)?,
            bid: f(3)?,
            bid_index: None,
            reward: f(4)?,
            cost: f(5)?,
            budget_gap: f(6)?,
            roi_gap: f(7)?,
            lambda: f(8)?,
            mu: f(9)?,
            budget_remaining: f(10)?,
            depleted,
        };
        if depleted && tau == usize::MAX {
            tau = t;
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::MalformedTrace("trace has no rounds".into()));
    }
    let horizon = records.len();
    let tau = if tau == usize::MAX { horizon + 1 } else { tau };
    Ok((Trace { records, tau, eta_bound_ok: true }, config_hash))
}

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}
