//! Tapped-delay-line power-delay profiles (3GPP TR 38.901, Tables 7.7.2-1
//! and 7.7.2-4).

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Supported TDL variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TdlModel {
    /// NLOS, 23 Rayleigh taps.
    A,
    /// LOS, Rician first tap followed by 12 Rayleigh taps.
    D,
}

impl TdlModel {
    pub fn label(self) -> &'static str {
        match self {
            TdlModel::A => "TDL-A",
            TdlModel::D => "TDL-D",
        }
    }
}

impl fmt::Display for TdlModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TdlModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('_', "-").as_str() {
            "TDL-A" | "TDLA" | "A" => Ok(TdlModel::A),
            "TDL-D" | "TDLD" | "D" => Ok(TdlModel::D),
            _ => Err(Error::UnsupportedProfile(s.to_string())),
        }
    }
}

/// One channel tap after normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    /// Delay in units of the RMS delay spread.
    pub normalized_delay: f64,
    /// Normalized tap power in dB (all taps sum to unit linear power).
    pub power_db: f64,
    pub is_los: bool,
}

impl Tap {
    pub fn linear_power(&self) -> f64 {
        10f64.powf(self.power_db / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapProfile {
    pub model: TdlModel,
    /// Taps sorted by strictly increasing delay.
    pub taps: Vec<Tap>,
    /// Rician K-factor of the LOS tap, if any.
    pub k_factor_db: Option<f64>,
    pub delay_spread_ns: f64,
}

// (normalized delay, power dB) in table order.
const TDL_A: [(f64, f64); 23] = [
    (0.0000, -13.4),
    (0.3819, 0.0),
    (0.4025, -2.2),
    (0.5868, -4.0),
    (0.4610, -6.0),
    (0.5375, -8.2),
    (0.6708, -9.9),
    (0.5750, -10.5),
    (0.7618, -7.5),
    (1.5375, -15.9),
    (1.8978, -6.6),
    (2.2242, -16.7),
    (2.1718, -12.4),
    (2.4942, -15.2),
    (2.5119, -10.8),
    (3.0582, -11.3),
    (4.0810, -12.7),
    (4.4579, -16.2),
    (4.5695, -18.3),
    (4.7966, -18.9),
    (5.0066, -16.6),
    (5.3043, -19.9),
    (9.6586, -29.7),
];

// First tap of TDL-D is split into a specular LOS part and a Laplacian
// (Rayleigh-faded) part at the same delay.
const TDL_D_LOS_DB: f64 = -0.2;
const TDL_D_FIRST_NLOS_DB: f64 = -13.5;
const TDL_D_K_DB: f64 = 13.3;
const TDL_D_REST: [(f64, f64); 12] = [
    (0.035, -18.8),
    (0.612, -21.0),
    (1.363, -22.8),
    (1.405, -17.9),
    (1.804, -20.1),
    (2.596, -21.9),
    (1.775, -22.9),
    (4.042, -27.8),
    (7.937, -23.6),
    (9.424, -24.8),
    (9.708, -30.0),
    (12.525, -27.7),
];

impl TapProfile {
    /// Loads the tap table for `model`, normalizes it to unit power and sorts
    /// taps by delay.
    pub fn load(model: TdlModel, delay_spread_ns: f64) -> Result<Self> {
        if !(delay_spread_ns > 0.0 && delay_spread_ns.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delay spread must be positive, got {delay_spread_ns} ns"
            )));
        }
        let (mut raw, k_factor_db): (Vec<(f64, f64, bool)>, _) = match model {
            TdlModel::A => (TDL_A.iter().map(|&(d, p)| (d, p, false)).collect(), None),
            TdlModel::D => {
                let first = 10.0
                    * (10f64.powf(TDL_D_LOS_DB / 10.0) + 10f64.powf(TDL_D_FIRST_NLOS_DB / 10.0))
                        .log10();
                let mut taps = vec![(0.0, first, true)];
                taps.extend(TDL_D_REST.iter().map(|&(d, p)| (d, p, false)));
                (taps, Some(TDL_D_K_DB))
            }
        };
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = raw.iter().map(|&(_, p, _)| 10f64.powf(p / 10.0)).sum();
        let offset = 10.0 * total.log10();
        let taps = raw
            .into_iter()
            .map(|(normalized_delay, p, is_los)| Tap {
                normalized_delay,
                power_db: p - offset,
                is_los,
            })
            .collect();
        Ok(TapProfile {
            model,
            taps,
            k_factor_db,
            delay_spread_ns,
        })
    }

    /// Absolute delay of each tap in seconds.
    pub fn delays_s(&self) -> impl Iterator<Item = f64> + '_ {
        self.taps
            .iter()
            .map(move |t| t.normalized_delay * self.delay_spread_ns * 1e-9)
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(Tap::linear_power).sum()
    }

    /// Linear Rician K-factor, zero for pure Rayleigh profiles.
    pub fn k_factor_linear(&self) -> f64 {
        self.k_factor_db.map_or(0.0, |k| 10f64.powf(k / 10.0))
    }
}

/// Parses a profile name and loads it.
pub fn load_tdl_profile(name: &str, delay_spread_ns: f64) -> Result<TapProfile> {
    TapProfile::load(name.parse()?, delay_spread_ns)
}
