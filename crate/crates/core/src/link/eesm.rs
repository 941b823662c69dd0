//! Exponential effective SINR mapping and CQI selection.

use super::cqi::{CqiEntry, CqiTable};
use crate::channel::SinrGrid;

// Exponent arguments below this clamp the exponential to zero.
const EXP_FLOOR: f64 = -700.0;

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn db_to_lin(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// EESM of a set of linear SINRs: `−β ln(mean(exp(−γ/β)))`.
///
/// Evaluated relative to the smallest SINR, which keeps the sum away from
/// underflow, and via `exp_m1`/`ln_1p` so very large `beta` still resolves the
/// arithmetic mean.
pub fn eesm_values(gamma: &[f64], beta: f64) -> f64 {
    assert!(beta > 0.0, "EESM beta must be positive");
    assert!(!gamma.is_empty(), "EESM of an empty grid");
    let lo = gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_m1 = gamma
        .iter()
        .map(|&g| {
            let arg = -(g - lo) / beta;
            if arg < EXP_FLOOR {
                -1.0
            } else {
                arg.exp_m1()
            }
        })
        .sum::<f64>()
        / gamma.len() as f64;
    (lo - beta * mean_m1.ln_1p()).clamp(lo, hi)
}

/// Linear effective SINR of `grid` for calibration `beta`.
pub fn eesm(grid: &SinrGrid, beta: f64) -> f64 {
    eesm_values(&grid.gamma, beta)
}

/// Logistic BLER curve, decreasing in SINR.
pub fn bler(gamma_eff_db: f64, entry: &CqiEntry) -> f64 {
    1.0 / (1.0 + ((gamma_eff_db - entry.bler_mid_db) / entry.bler_slope_db).exp())
}

/// Outcome of CQI selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveSinr {
    /// Effective SINR at the selected CQI's calibration (dB).
    pub value_db: f64,
    /// Selected CQI; 0 when no entry meets the BLER target.
    pub cqi: u8,
}

/// Highest CQI whose own-β effective SINR meets the BLER target. With no
/// feasible entry, returns CQI 0 and the effective SINR under β of CQI 1.
pub fn select_cqi(grid: &SinrGrid, table: &CqiTable) -> EffectiveSinr {
    // EESM never exceeds the arithmetic mean, so entries already infeasible
    // at the mean are skipped without evaluating the exponential average.
    let mean_db = lin_to_db(grid.gamma.iter().sum::<f64>() / grid.gamma.len() as f64);
    for e in table.entries().iter().rev() {
        if bler(mean_db + 1e-9, e) > table.bler_target {
            continue;
        }
        let db = lin_to_db(eesm(grid, e.beta));
        if bler(db, e) <= table.bler_target {
            return EffectiveSinr {
                value_db: db,
                cqi: e.index,
            };
        }
    }
    EffectiveSinr {
        value_db: lin_to_db(eesm(grid, table.entry(1).beta)),
        cqi: 0,
    }
}

/// Highest CQI whose BLER at a given effective SINR meets the target; used
/// when the decision is a single (for example predicted) SINR value.
pub fn select_cqi_for_value(gamma_eff_db: f64, table: &CqiTable) -> u8 {
    table
        .entries()
        .iter()
        .rev()
        .find(|e| bler(gamma_eff_db, e) <= table.bler_target)
        .map_or(0, |e| e.index)
}
