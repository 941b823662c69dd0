//! CSV and plain-text output of sweep records.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::SweepRecord;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "profile,doppler_hz,model,D,P,t_csi,nmse_db,flops,throughput_mbps,baseline_mbps,seed";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn fixed(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.profile.label(),
            r.doppler_hz,
            r.model,
            opt(r.hidden),
            r.history,
            r.t_csi,
            fixed(r.nmse_db),
            opt(r.flops),
            fixed(r.throughput_mbps),
            fixed(r.baseline_mbps),
            r.seed
        );
    }
    s
}

/// Aligned table including the raw-dB NMSE that the CSV omits.
pub fn records_to_summary(records: &[SweepRecord]) -> String {
    let cols = ["profile", "doppler", "model", "D", "nmse_db", "nmse_raw_db", "flops", "mbps", "stale_mbps", "seed"];
    let rows: Vec<[String; 10]> = records
        .iter()
        .map(|r| {
            [
                r.profile.label().to_string(),
                r.doppler_hz.to_string(),
                r.model.clone(),
                opt(r.hidden),
                fixed(r.nmse_db),
                fixed(r.nmse_raw_db),
                opt(r.flops),
                fixed(r.throughput_mbps),
                fixed(r.baseline_mbps),
                r.seed.to_string(),
            ]
        })
        .collect();
    let width: Vec<usize> = (0..cols.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([cols[i].len()]).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    let line = |cells: Vec<&str>, s: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(s, "{}", parts.join("  ").trim_end());
    };
    line(cols.to_vec(), &mut s);
    for r in &rows {
        line(r.iter().map(String::as_str).collect(), &mut s);
    }
    s
}

/// Writes `<stem>.csv` and `<stem>_summary.txt` into `dir` and returns the
/// CSV path.
pub fn emit_report(records: &[SweepRecord], dir: &Path, stem: &str) -> Result<PathBuf> {
    if records.is_empty() {
        return Err(Error::EmptyData("no records to report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&csv, records_to_csv(records)).map_err(|e| Error::io(&csv, e))?;
    let summary = dir.join(format!("{stem}_summary.txt"));
    fs::write(&summary, records_to_summary(records)).map_err(|e| Error::io(&summary, e))?;
    Ok(csv)
}
