//! Channel realizations turned into effective-SINR traces and window
//! datasets.

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{hex, ExperimentConfig};
use crate::channel::{per_rb_sinr, FadingChannel, SinrGrid, TapProfile, TdlModel};
use crate::link::{select_cqi, CqiTable, EffectiveSinr};
use crate::predictor::{build_windows, window_count, EffSinrTrace, WindowSample};
use crate::seed::{self, purpose};
use crate::{Error, Result};

/// Per-slot SINR grids of one channel realization.
pub struct LinkChain {
    channel: FadingChannel,
    next: u64,
    buf: Vec<Complex64>,
    snr_linear: f64,
    n_layers: usize,
}

impl LinkChain {
    pub fn new(cfg: &ExperimentConfig, profile: TdlModel, doppler_hz: f64, n_slots: usize, seed: u64) -> Result<Self> {
        let taps = TapProfile::load(profile, cfg.delay_spread_ns)?;
        let channel = FadingChannel::new(&taps, &cfg.fading(doppler_hz, n_slots, seed))?;
        let buf = vec![Complex64::new(0.0, 0.0); channel.slot_len()];
        Ok(LinkChain {
            channel,
            next: 0,
            buf,
            snr_linear: cfg.snr_linear(),
            n_layers: cfg.n_layers,
        })
    }

    /// Feeds the grids of the next `n_slots` slots to `f`.
    pub fn grids(&mut self, n_slots: usize, mut f: impl FnMut(u64, SinrGrid) -> Result<()>) -> Result<()> {
        let mut stream = self.channel.stream(self.next);
        for _ in 0..n_slots {
            let q = stream.fill_next(&mut self.buf);
            f(q, grid_of(&self.buf, &self.channel, self.snr_linear, self.n_layers)?)?;
        }
        self.next = stream.next_slot();
        Ok(())
    }
}

fn grid_of(slot: &[Complex64], ch: &FadingChannel, snr: f64, n_layers: usize) -> Result<SinrGrid> {
    let (n_rb, m) = (ch.n_rb(), ch.n_rx() * ch.n_tx());
    let mut gamma = vec![0.0; n_layers * n_rb];
    for rb in 0..n_rb {
        let layer = per_rb_sinr(&slot[rb * m..(rb + 1) * m], ch.n_rx(), ch.n_tx(), snr, n_layers)?;
        for (l, v) in layer.into_iter().enumerate() {
            gamma[l * n_rb + rb] = v;
        }
    }
    SinrGrid::new(gamma, n_layers, n_rb)
}

/// Per-slot effective SINR and selected CQI of one realization.
pub fn link_trace(
    cfg: &ExperimentConfig,
    table: &CqiTable,
    profile: TdlModel,
    doppler_hz: f64,
    n_slots: usize,
    seed: u64,
) -> Result<Vec<EffectiveSinr>> {
    let mut chain = LinkChain::new(cfg, profile, doppler_hz, n_slots, seed)?;
    let mut out = Vec::with_capacity(n_slots);
    chain.grids(n_slots, |_, g| {
        out.push(select_cqi(&g, table));
        Ok(())
    })?;
    Ok(out)
}

pub fn effective_sinr_trace(
    cfg: &ExperimentConfig,
    table: &CqiTable,
    profile: TdlModel,
    doppler_hz: f64,
    seed: u64,
) -> Result<EffSinrTrace> {
    let values = link_trace(cfg, table, profile, doppler_hz, cfg.realization_slots, seed)?
        .into_iter()
        .map(|e| e.value_db)
        .collect();
    EffSinrTrace::new(values, cfg.t_csi, doppler_hz, profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn purpose(self) -> u64 {
        match self {
            Split::Train => purpose::TRAIN,
            Split::Val => purpose::VAL,
            Split::Test => purpose::TEST,
        }
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub profile: TdlModel,
    pub doppler_hz: f64,
    pub base_seed: u64,
    /// Channel seed of every realization, per split.
    pub realization_seeds: [Vec<u64>; 3],
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub provenance: Provenance,
}

impl DatasetSplit {
    pub fn split(&self, s: Split) -> &[WindowSample] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// SHA-256 over every split's anchors and values.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for s in Split::ALL {
            h.update((self.split(s).len() as u64).to_le_bytes());
            for w in self.split(s) {
                h.update((w.anchor_slot as u64).to_le_bytes());
                for v in w.x.iter().chain(&w.y) {
                    h.update(v.to_le_bytes());
                }
            }
        }
        hex(&h.finalize())
    }
}

/// Seed of stream `r` for `purpose` at a sweep point. Doppler enters
/// through its bit pattern so nearby values never share streams.
pub fn point_seed(base: u64, purpose: u64, profile: TdlModel, doppler_hz: f64, r: usize) -> u64 {
    let profile_tag = match profile {
        TdlModel::A => 1,
        TdlModel::D => 2,
    };
    seed::derive(base, &[purpose, profile_tag, doppler_hz.to_bits(), r as u64])
}

/// Channel seed of realization `r` of `split`.
pub fn realization_seed(base: u64, split: Split, profile: TdlModel, doppler_hz: f64, r: usize) -> u64 {
    point_seed(base, split.purpose(), profile, doppler_hz, r)
}

fn split_windows(
    cfg: &ExperimentConfig,
    table: &CqiTable,
    profile: TdlModel,
    doppler_hz: f64,
    split: Split,
    size: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(Vec<WindowSample>, Vec<u64>)> {
    let per = window_count(cfg.realization_slots, cfg.history, cfg.t_csi);
    if per == 0 {
        return Err(Error::InfeasibleDataset(format!(
            "realization_slots = {} yields no windows for P = {} and T_CSI = {}; use at least {} slots",
            cfg.realization_slots,
            cfg.history,
            cfg.t_csi,
            crate::predictor::min_trace_len(cfg.history, cfg.t_csi)
        )));
    }
    let needed = size.div_ceil(per);
    if needed > cfg.max_realizations {
        return Err(Error::InfeasibleDataset(format!(
            "{} {} windows need {needed} realizations of {} slots but max_realizations = {}; \
             raise max_realizations or realization_slots",
            size,
            split.name(),
            cfg.realization_slots,
            cfg.max_realizations
        )));
    }
    let seeds: Vec<u64> = (0..needed).map(|r| realization_seed(cfg.seed, split, profile, doppler_hz, r)).collect();
    let one = |&s: &u64| -> Result<Vec<WindowSample>> {
        build_windows(&effective_sinr_trace(cfg, table, profile, doppler_hz, s)?, cfg.history)
    };
    let parts: Vec<Result<Vec<WindowSample>>> = match pool {
        Some(pool) => pool.install(|| seeds.par_iter().map(one).collect()),
        None => seeds.iter().map(one).collect(),
    };
    let mut out = Vec::with_capacity(needed * per);
    for p in parts {
        out.extend(p?);
    }
    out.truncate(size);
    Ok((out, seeds))
}

pub(crate) fn thread_pool(jobs: usize) -> Result<Option<rayon::ThreadPool>> {
    if jobs <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Train, validation and test windows for one `(profile, Doppler)` point,
/// each split from its own channel realizations.
pub fn generate_dataset(cfg: &ExperimentConfig, profile: TdlModel, doppler_hz: f64) -> Result<DatasetSplit> {
    cfg.validate()?;
    let table = cfg.cqi_table()?;
    let pool = thread_pool(cfg.jobs)?;
    let sizes = [cfg.train_size, cfg.val_size, cfg.test_size];
    let mut samples = Vec::new();
    let mut seeds = Vec::new();
    for (split, size) in Split::ALL.into_iter().zip(sizes) {
        let (w, s) = split_windows(cfg, &table, profile, doppler_hz, split, size, pool.as_ref())?;
        samples.push(w);
        seeds.push(s);
    }
    let [train, val, test]: [Vec<WindowSample>; 3] = samples.try_into().expect("three splits");
    let realization_seeds: [Vec<u64>; 3] = seeds.try_into().expect("three splits");
    Ok(DatasetSplit {
        train,
        val,
        test,
        provenance: Provenance {
            profile,
            doppler_hz,
            base_seed: cfg.seed,
            realization_seeds,
            config_hash: cfg.hash(),
        },
    })
}
