//! Experiment configuration as plain `key = value` text.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::channel::{FadingConfig, TdlModel};
use crate::link::{db_to_lin, CqiTable};
use crate::neural::{ModelKind, TrainConfig};
use crate::{Error, Result};

/// Slot-level link policies known to the throughput simulation.
pub const POLICY_NAMES: [&str; 4] = ["stale", "dnn", "lstm", "oracle"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub snr_db: f64,
    pub n_rb: usize,
    pub scs_hz: f64,
    pub bandwidth_mhz: f64,
    pub doppler_list_hz: Vec<f64>,
    pub delay_spread_ns: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_layers: usize,
    pub profiles: Vec<TdlModel>,
    pub t_csi: usize,
    pub slot_ms: f64,
    /// Past reports in a window (`P`).
    pub history: usize,
    /// Hidden width `D` for the Doppler sweeps.
    pub hidden: usize,
    pub hidden_list: Vec<usize>,
    pub models: Vec<ModelKind>,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    /// Slots per independent channel realization.
    pub realization_slots: usize,
    pub max_realizations: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Training seeds per sweep point; seed `k` is `seed + k`.
    pub n_seeds: usize,
    pub throughput_slots: usize,
    pub policies: Vec<String>,
    pub bler_target: f64,
    pub cqi_table: Option<String>,
    /// Permits Doppler values outside 1..=30 Hz, including 0.
    pub allow_any_doppler: bool,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        ExperimentConfig {
            snr_db: 12.5,
            n_rb: 52,
            scs_hz: 15e3,
            bandwidth_mhz: 10.0,
            doppler_list_hz: vec![1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            delay_spread_ns: 300.0,
            n_tx: 4,
            n_rx: 4,
            n_layers: 4,
            profiles: vec![TdlModel::A, TdlModel::D],
            t_csi: 4,
            slot_ms: 1.0,
            history: 8,
            hidden: 16,
            hidden_list: vec![2, 4, 8, 16, 32],
            models: vec![ModelKind::Dnn, ModelKind::Lstm],
            train_size: 40_000,
            val_size: 10_000,
            test_size: 2_000,
            realization_slots: 2_000,
            max_realizations: 100_000,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            adam_beta1: train.beta1,
            adam_beta2: train.beta2,
            adam_eps: train.eps,
            seed: 1,
            n_seeds: 1,
            throughput_slots: 200_000,
            policies: POLICY_NAMES.iter().map(|s| s.to_string()).collect(),
            bler_target: 0.1,
            cqi_table: None,
            allow_any_doppler: false,
            jobs: 1,
        }
    }
}

fn cfg_err(m: impl Into<String>) -> Error {
    Error::Config(m.into())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| cfg_err(format!("`{key}`: cannot parse `{}`", v.trim())))
}

fn list<T, F: Fn(&str) -> Result<T>>(v: &str, f: F) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(cfg_err(format!("`{key}`: expected a boolean, got `{other}`"))),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults overridden by the `key = value` lines of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.set_line(line).map_err(|e| match e {
                Error::Config(m) => cfg_err(format!("line {}: {m}", no + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies one `key=value` assignment.
    pub fn set_line(&mut self, line: &str) -> Result<()> {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("expected `key = value`, got `{line}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "snr_db" => self.snr_db = num(key, v)?,
            "n_rb" => self.n_rb = num(key, v)?,
            "scs_hz" => self.scs_hz = num(key, v)?,
            "bandwidth_mhz" => self.bandwidth_mhz = num(key, v)?,
            "doppler_list_hz" | "doppler_hz" => self.doppler_list_hz = list(v, |s| num(key, s))?,
            "delay_spread_ns" => self.delay_spread_ns = num(key, v)?,
            "mimo" => {
                let (tx, rx) = v
                    .split_once('x')
                    .ok_or_else(|| cfg_err(format!("`mimo`: expected `TXxRX`, got `{v}`")))?;
                self.n_tx = num(key, tx)?;
                self.n_rx = num(key, rx)?;
            }
            "n_tx" => self.n_tx = num(key, v)?,
            "n_rx" => self.n_rx = num(key, v)?,
            "n_layers" => self.n_layers = num(key, v)?,
            "profiles" | "profile" => self.profiles = list(v, str::parse)?,
            "t_csi" => self.t_csi = num(key, v)?,
            "slot_ms" => self.slot_ms = num(key, v)?,
            "history" | "p" => self.history = num(key, v)?,
            "hidden" | "d" => self.hidden = num(key, v)?,
            "hidden_list" => self.hidden_list = list(v, |s| num(key, s))?,
            "models" | "model" => self.models = list(v, str::parse)?,
            "train_size" => self.train_size = num(key, v)?,
            "val_size" => self.val_size = num(key, v)?,
            "test_size" => self.test_size = num(key, v)?,
            "realization_slots" => self.realization_slots = num(key, v)?,
            "max_realizations" => self.max_realizations = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "adam_beta1" => self.adam_beta1 = num(key, v)?,
            "adam_beta2" => self.adam_beta2 = num(key, v)?,
            "adam_eps" => self.adam_eps = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "n_seeds" => self.n_seeds = num(key, v)?,
            "throughput_slots" => self.throughput_slots = num(key, v)?,
            "policies" | "policy" => {
                self.policies = list(v, |s| {
                    let s = s.to_ascii_lowercase();
                    if POLICY_NAMES.contains(&s.as_str()) {
                        Ok(s)
                    } else {
                        Err(cfg_err(format!("unknown policy `{s}`")))
                    }
                })?
            }
            "bler_target" => self.bler_target = num(key, v)?,
            "cqi_table" => self.cqi_table = Some(v.to_string()).filter(|s| !s.is_empty()),
            "allow_any_doppler" => self.allow_any_doppler = flag(key, v)?,
            "jobs" => self.jobs = num(key, v)?,
            other => return Err(cfg_err(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(cfg_err(m));
        if !self.snr_db.is_finite() {
            return fail("snr_db must be finite".into());
        }
        if self.n_rb == 0 || self.n_tx == 0 || self.n_rx == 0 {
            return fail("n_rb, n_tx and n_rx must be positive".into());
        }
        if self.n_layers == 0 || self.n_layers > self.n_tx.min(self.n_rx) {
            return fail(format!("n_layers = {} must lie in 1..={}", self.n_layers, self.n_tx.min(self.n_rx)));
        }
        let occupied_mhz = self.n_rb as f64 * 12.0 * self.scs_hz / 1e6;
        if !(self.scs_hz > 0.0) || occupied_mhz > self.bandwidth_mhz + 1e-9 {
            return fail(format!(
                "{} RBs at {} Hz occupy {occupied_mhz} MHz, more than bandwidth_mhz = {}",
                self.n_rb, self.scs_hz, self.bandwidth_mhz
            ));
        }
        if !(self.delay_spread_ns > 0.0) || !(self.slot_ms > 0.0) {
            return fail("delay_spread_ns and slot_ms must be positive".into());
        }
        if self.doppler_list_hz.is_empty() {
            return fail("doppler_list_hz is empty".into());
        }
        for &f in &self.doppler_list_hz {
            let in_table = (1.0..=30.0).contains(&f);
            if !(f >= 0.0 && f.is_finite()) || (!in_table && !self.allow_any_doppler) {
                return fail(format!(
                    "doppler {f} Hz outside 1..=30 Hz (set allow_any_doppler = true to permit it)"
                ));
            }
        }
        if self.profiles.is_empty() || self.models.is_empty() || self.policies.is_empty() {
            return fail("profiles, models and policies must be non-empty".into());
        }
        if self.t_csi < 2 {
            return fail(format!("t_csi = {} leaves no intermediate slots to predict", self.t_csi));
        }
        if self.hidden == 0 || self.hidden_list.is_empty() || self.hidden_list.contains(&0) {
            return fail("hidden sizes must be positive".into());
        }
        if self.train_size == 0 || self.val_size == 0 || self.test_size == 0 {
            return fail("dataset sizes must be positive".into());
        }
        if self.n_seeds == 0 || self.jobs == 0 || self.throughput_slots == 0 || self.max_realizations == 0 {
            return fail("n_seeds, jobs, throughput_slots and max_realizations must be positive".into());
        }
        if !(self.bler_target > 0.0 && self.bler_target < 1.0) {
            return fail(format!("bler_target = {} must lie in (0, 1)", self.bler_target));
        }
        self.train_config(self.seed).validate()
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            jobs: 1,
        }
    }

    /// Training seeds of a sweep point.
    pub fn train_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(|k| self.seed.wrapping_add(k))
    }

    pub fn snr_linear(&self) -> f64 {
        db_to_lin(self.snr_db)
    }

    pub fn slot_s(&self) -> f64 {
        self.slot_ms * 1e-3
    }

    pub fn fading(&self, doppler_hz: f64, n_slots: usize, seed: u64) -> FadingConfig {
        FadingConfig {
            doppler_hz,
            n_slots,
            slot_duration_s: self.slot_s(),
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            n_rb: self.n_rb,
            scs_hz: self.scs_hz,
            seed,
        }
    }

    pub fn cqi_table(&self) -> Result<CqiTable> {
        let mut table = match &self.cqi_table {
            None => CqiTable::default(),
            Some(path) => {
                let p = Path::new(path);
                CqiTable::parse(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?
            }
        };
        table.bler_target = self.bler_target;
        Ok(table)
    }

    /// Every key with its current value, one per line in a fixed order.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("snr_db", self.snr_db.to_string());
        kv("n_rb", self.n_rb.to_string());
        kv("scs_hz", self.scs_hz.to_string());
        kv("bandwidth_mhz", self.bandwidth_mhz.to_string());
        kv("doppler_list_hz", join(&self.doppler_list_hz));
        kv("delay_spread_ns", self.delay_spread_ns.to_string());
        kv("n_tx", self.n_tx.to_string());
        kv("n_rx", self.n_rx.to_string());
        kv("n_layers", self.n_layers.to_string());
        kv("profiles", join(&self.profiles.iter().map(|p| p.label()).collect::<Vec<_>>()));
        kv("t_csi", self.t_csi.to_string());
        kv("slot_ms", self.slot_ms.to_string());
        kv("history", self.history.to_string());
        kv("hidden", self.hidden.to_string());
        kv("hidden_list", join(&self.hidden_list));
        kv("models", join(&self.models.iter().map(|m| m.name()).collect::<Vec<_>>()));
        kv("train_size", self.train_size.to_string());
        kv("val_size", self.val_size.to_string());
        kv("test_size", self.test_size.to_string());
        kv("realization_slots", self.realization_slots.to_string());
        kv("max_realizations", self.max_realizations.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("seed", self.seed.to_string());
        kv("n_seeds", self.n_seeds.to_string());
        kv("throughput_slots", self.throughput_slots.to_string());
        kv("policies", self.policies.join(","));
        kv("bler_target", self.bler_target.to_string());
        kv("cqi_table", self.cqi_table.clone().unwrap_or_default());
        kv("allow_any_doppler", self.allow_any_doppler.to_string());
        kv("jobs", self.jobs.to_string());
        s
    }

    /// SHA-256 of the settings that shape generated data, excluding
    /// execution-only keys such as `jobs`.
    pub fn hash(&self) -> String {
        let canon = ExperimentConfig {
            jobs: 1,
            ..self.clone()
        };
        hex(&Sha256::digest(canon.to_config_string().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
