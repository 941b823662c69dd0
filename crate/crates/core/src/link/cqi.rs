//! CQI table: spectral efficiency, EESM calibration and BLER curves.

use std::fmt::Write as _;

use crate::{Error, Result};

pub const NUM_CQI: usize = 15;

/// Spectral efficiency (bits per RE) of CQI 1..=15, TS 38.214 Table 5.2.2.1-2.
pub const SPECTRAL_EFFICIENCY: [f64; NUM_CQI] = [
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223,
    3.9023, 4.5234, 5.1152, 5.5547,
];

pub const DEFAULT_BLER_TARGET: f64 = 0.1;
const DEFAULT_MID_START_DB: f64 = -6.0;
const DEFAULT_MID_STEP_DB: f64 = 1.9;
const DEFAULT_SLOPE_DB: f64 = 0.5;
const MIN_BETA: f64 = 0.25;

/// Spectral efficiency of `cqi`; zero for CQI 0 (no transmission).
pub fn spectral_efficiency(cqi: u8) -> Result<f64> {
    match cqi {
        0 => Ok(0.0),
        1..=15 => Ok(SPECTRAL_EFFICIENCY[cqi as usize - 1]),
        _ => Err(Error::InvalidParameter(format!("CQI {cqi} outside 0..=15"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqiEntry {
    pub index: u8,
    pub beta: f64,
    pub spectral_efficiency: f64,
    /// Effective SINR (dB) at 50% BLER.
    pub bler_mid_db: f64,
    /// Logistic width (dB).
    pub bler_slope_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqiTable {
    entries: Vec<CqiEntry>,
    pub bler_target: f64,
}

impl Default for CqiTable {
    fn default() -> Self {
        let entries = SPECTRAL_EFFICIENCY
            .iter()
            .enumerate()
            .map(|(i, &se)| CqiEntry {
                index: i as u8 + 1,
                beta: se.max(MIN_BETA),
                spectral_efficiency: se,
                bler_mid_db: DEFAULT_MID_START_DB + DEFAULT_MID_STEP_DB * i as f64,
                bler_slope_db: DEFAULT_SLOPE_DB,
            })
            .collect();
        CqiTable {
            entries,
            bler_target: DEFAULT_BLER_TARGET,
        }
    }
}

impl CqiTable {
    pub fn new(mut entries: Vec<CqiEntry>, bler_target: f64) -> Result<Self> {
        entries.sort_by_key(|e| e.index);
        let bad = |m: String| Err(Error::Config(m));
        if entries.len() != NUM_CQI {
            return bad(format!("CQI table needs {NUM_CQI} entries, got {}", entries.len()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.index as usize != i + 1 {
                return bad(format!("CQI indices must be 1..=15, found {}", e.index));
            }
            if !(e.beta > 0.0 && e.bler_slope_db > 0.0 && e.spectral_efficiency > 0.0) {
                return bad(format!("CQI {}: beta, slope and SE must be positive", e.index));
            }
        }
        for w in entries.windows(2) {
            if w[1].spectral_efficiency <= w[0].spectral_efficiency || w[1].bler_mid_db <= w[0].bler_mid_db {
                return bad(format!(
                    "CQI {}: SE and BLER midpoint must increase with index",
                    w[1].index
                ));
            }
        }
        if !(bler_target > 0.0 && bler_target < 1.0) {
            return bad(format!("BLER target {bler_target} outside (0, 1)"));
        }
        Ok(CqiTable { entries, bler_target })
    }

    pub fn entries(&self) -> &[CqiEntry] {
        &self.entries
    }

    /// Entry for `cqi` in 1..=15.
    pub fn entry(&self, cqi: u8) -> &CqiEntry {
        &self.entries[cqi as usize - 1]
    }

    pub fn max_spectral_efficiency(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.spectral_efficiency)
    }

    /// Parses the text form: `#` comments, optional `bler_target = x`, and one
    /// line per CQI holding `index, beta, se, mid_db, slope_db` (optionally
    /// prefixed by `cqi =`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut target = DEFAULT_BLER_TARGET;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let line_err = |m: &str| Error::Config(format!("CQI table line {}: {m}", ln + 1));
            let body = match line.split_once('=') {
                Some((k, v)) if k.trim() == "bler_target" => {
                    target = v.trim().parse().map_err(|_| line_err("bad bler_target"))?;
                    continue;
                }
                Some((k, v)) if k.trim() == "cqi" => v,
                Some((k, _)) => return Err(line_err(&format!("unknown key `{}`", k.trim()))),
                None => line,
            };
            let f: Vec<f64> = body
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| line_err("expected numbers"))?;
            if f.len() != 5 || f[0].fract() != 0.0 || !(1.0..=15.0).contains(&f[0]) {
                return Err(line_err("expected `index, beta, se, mid_db, slope_db`"));
            }
            entries.push(CqiEntry {
                index: f[0] as u8,
                beta: f[1],
                spectral_efficiency: f[2],
                bler_mid_db: f[3],
                bler_slope_db: f[4],
            });
        }
        Self::new(entries, target)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::from("# index, beta, se, mid_db, slope_db\n");
        let _ = writeln!(s, "bler_target = {}", self.bler_target);
        for e in &self.entries {
            let _ = writeln!(
                s,
                "cqi = {}, {}, {}, {}, {}",
                e.index, e.beta, e.spectral_efficiency, e.bler_mid_db, e.bler_slope_db
            );
        }
        s
    }
}
