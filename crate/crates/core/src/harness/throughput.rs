//! Slot-level link simulation comparing CQI policies under channel aging.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::dataset::{generate_dataset, point_seed, LinkChain};
use super::sweep::{train_and_evaluate, SweepRecord};
use crate::channel::{SinrGrid, TdlModel};
use crate::link::{bler, eesm, lin_to_db, select_cqi, select_cqi_for_value, CqiTable, EffectiveSinr};
use crate::neural::ModelKind;
use crate::predictor::PredictorModel;
use crate::seed::purpose;
use crate::{Error, Result};

/// Resource elements per RB and slot: 12 subcarriers × 14 symbols.
pub const RE_PER_RB: f64 = 12.0 * 14.0;

/// What a policy may look at when choosing the CQI of a slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotView<'a> {
    /// Slots since the last report; 0 on report slots.
    pub offset: usize,
    /// The last report, taken at slot `q − offset`.
    pub report: EffectiveSinr,
    /// Selection on the true channel of this slot.
    pub truth: EffectiveSinr,
    pub table: &'a CqiTable,
}

/// Chooses a CQI every slot.
pub trait LinkPolicy: Send {
    fn name(&self) -> &str;
    /// Called on every report slot with the last `P+1` reported effective
    /// SINRs, newest first.
    fn on_report(&mut self, _history: &[f64]) -> Result<()> {
        Ok(())
    }
    fn decide(&self, view: &SlotView<'_>) -> u8;
}

/// Reuses the CQI of the last report.
pub struct StalePolicy;

impl LinkPolicy for StalePolicy {
    fn name(&self) -> &str {
        "stale"
    }
    fn decide(&self, v: &SlotView<'_>) -> u8 {
        v.report.cqi
    }
}

/// Genie selection on the current channel.
pub struct OraclePolicy;

impl LinkPolicy for OraclePolicy {
    fn name(&self) -> &str {
        "oracle"
    }
    fn decide(&self, v: &SlotView<'_>) -> u8 {
        v.truth.cqi
    }
}

/// Forecasts the intermediate slots at each report and selects the CQI
/// from the forecast; report slots use the fresh report.
pub struct PredictivePolicy {
    name: String,
    model: Arc<PredictorModel>,
    forecast: Vec<f64>,
}

impl PredictivePolicy {
    pub fn new(model: Arc<PredictorModel>) -> Self {
        PredictivePolicy {
            name: model.kind().name().to_string(),
            model,
            forecast: Vec::new(),
        }
    }
}

impl LinkPolicy for PredictivePolicy {
    fn name(&self) -> &str {
        &self.name
    }
    fn on_report(&mut self, history: &[f64]) -> Result<()> {
        self.forecast = self.model.predict(history)?;
        Ok(())
    }
    fn decide(&self, v: &SlotView<'_>) -> u8 {
        match v.offset {
            0 => v.report.cqi,
            k => select_cqi_for_value(self.forecast[k - 1], v.table),
        }
    }
}

/// Trained models available to policies that need them.
#[derive(Default, Clone)]
pub struct PolicyContext {
    pub models: BTreeMap<ModelKind, Arc<PredictorModel>>,
}

type PolicyCtor = Box<dyn Fn(&PolicyContext) -> Result<Box<dyn LinkPolicy>> + Send + Sync>;

/// Name-keyed link policies.
pub struct PolicyRegistry {
    ctors: BTreeMap<&'static str, PolicyCtor>,
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        PolicyRegistry { ctors: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &'static str, ctor: PolicyCtor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.ctors.keys().copied()
    }

    pub fn build(&self, name: &str, ctx: &PolicyContext) -> Result<Box<dyn LinkPolicy>> {
        let ctor = self
            .ctors
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown policy `{name}`")))?;
        ctor(ctx)
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("stale", Box::new(|_| Ok(Box::new(StalePolicy))));
        r.register("oracle", Box::new(|_| Ok(Box::new(OraclePolicy))));
        for kind in [ModelKind::Dnn, ModelKind::Lstm] {
            r.register(
                kind.name(),
                Box::new(move |ctx| {
                    let m = ctx
                        .models
                        .get(&kind)
                        .ok_or_else(|| Error::Config(format!("policy `{kind}` needs a trained {kind} model")))?;
                    Ok(Box::new(PredictivePolicy::new(m.clone())))
                }),
            );
        }
        r
    }
}

/// Delivered bits of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyThroughput {
    pub policy: String,
    pub bits: f64,
    pub slots: usize,
    pub mbps: f64,
    /// Slots whose transport block was received.
    pub successes: usize,
}

/// Simulates `n_slots` counted slots for all `policies` on common channel
/// realizations and common success draws.
///
/// Each realization first runs `P·T_CSI` warm-up slots so that a full
/// report history exists; warm-up slots are not counted.
pub fn run_throughput_sim(
    cfg: &ExperimentConfig,
    profile: TdlModel,
    doppler_hz: f64,
    policies: &mut [Box<dyn LinkPolicy>],
    n_slots: usize,
) -> Result<Vec<PolicyThroughput>> {
    let table = cfg.cqi_table()?;
    let t = cfg.t_csi;
    let warmup = cfg.history * t;
    if cfg.realization_slots <= warmup {
        return Err(Error::Config(format!(
            "realization_slots = {} must exceed the {warmup}-slot warm-up",
            cfg.realization_slots
        )));
    }
    let per = cfg.realization_slots - warmup;
    let layers_rb = (cfg.n_layers * cfg.n_rb) as f64;
    let mut bits = vec![0.0; policies.len()];
    let mut successes = vec![0usize; policies.len()];
    let mut history: Vec<f64> = Vec::with_capacity(cfg.history + 1);
    let mut counted = 0;
    let mut r = 0;
    while counted < n_slots {
        let take = per.min(n_slots - counted);
        let ch_seed = point_seed(cfg.seed, purpose::THROUGHPUT, profile, doppler_hz, r);
        let mut chain = LinkChain::new(cfg, profile, doppler_hz, warmup + take, ch_seed)?;
        let mut draws = ChaCha8Rng::seed_from_u64(point_seed(cfg.seed, purpose::BLER_DRAWS, profile, doppler_hz, r));
        history.clear();
        let mut report = None;
        chain.grids(warmup + take, |q, grid| {
            let q = q as usize;
            let truth = select_cqi(&grid, &table);
            if q % t == 0 {
                report = Some(truth);
                history.insert(0, truth.value_db);
                history.truncate(cfg.history + 1);
                if history.len() == cfg.history + 1 {
                    for p in policies.iter_mut() {
                        p.on_report(&history)?;
                    }
                }
            }
            if q < warmup {
                return Ok(());
            }
            let view = SlotView {
                offset: q % t,
                report: report.expect("slot 0 is a report slot"),
                truth,
                table: &table,
            };
            let u: f64 = draws.gen();
            let mut cache = [None; 16];
            for (i, p) in policies.iter().enumerate() {
                let cqi = p.decide(&view);
                if cqi == 0 {
                    continue;
                }
                let p_ok = *cache[cqi as usize].get_or_insert_with(|| success_probability(&grid, &table, cqi));
                if u < p_ok {
                    bits[i] += table.entry(cqi).spectral_efficiency * layers_rb * RE_PER_RB;
                    successes[i] += 1;
                }
            }
            Ok(())
        })?;
        counted += take;
        r += 1;
    }
    let seconds = n_slots as f64 * cfg.slot_s();
    Ok(policies
        .iter()
        .zip(bits.iter().zip(&successes))
        .map(|(p, (&b, &s))| PolicyThroughput {
            policy: p.name().to_string(),
            bits: b,
            slots: n_slots,
            mbps: b / seconds / 1e6,
            successes: s,
        })
        .collect())
}

/// `1 − BLER` of `cqi` at the true effective SINR under its own β.
pub fn success_probability(grid: &SinrGrid, table: &CqiTable, cqi: u8) -> f64 {
    let e = table.entry(cqi);
    1.0 - bler(lin_to_db(eesm(grid, e.beta)), e)
}

/// For each profile and Doppler value: trains the models the configured
/// policies need, then simulates all policies together. One row per
/// policy; `baseline_mbps` is the stale policy of the same run.
pub fn run_throughput_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let registry = PolicyRegistry::default();
    let mut rows = Vec::new();
    for &profile in &cfg.profiles {
        for &doppler in &cfg.doppler_list_hz {
            let mut ctx = PolicyContext::default();
            let mut nmse = BTreeMap::new();
            let kinds: Vec<ModelKind> = cfg.policies.iter().filter_map(|p| p.parse().ok()).collect();
            if !kinds.is_empty() {
                let data = generate_dataset(cfg, profile, doppler)?;
                for kind in kinds {
                    let t = train_and_evaluate(cfg, &data, kind, cfg.hidden, cfg.seed)?;
                    nmse.insert(kind, t.evaluation);
                    ctx.models.insert(kind, Arc::new(t.model));
                }
            }
            let mut names: Vec<&str> = vec!["stale"];
            names.extend(cfg.policies.iter().map(String::as_str).filter(|&n| n != "stale"));
            let mut policies = names
                .iter()
                .map(|n| registry.build(n, &ctx))
                .collect::<Result<Vec<_>>>()?;
            let res = run_throughput_sim(cfg, profile, doppler, &mut policies, cfg.throughput_slots)?;
            let baseline = res[0].mbps;
            for r in res.iter().filter(|r| cfg.policies.contains(&r.policy)) {
                let kind: Option<ModelKind> = r.policy.parse().ok();
                let model = kind.and_then(|k| ctx.models.get(&k));
                let eval = kind.and_then(|k| nmse.get(&k));
                rows.push(SweepRecord {
                    profile,
                    doppler_hz: doppler,
                    model: r.policy.clone(),
                    hidden: model.map(|m| m.hidden()),
                    history: cfg.history,
                    t_csi: cfg.t_csi,
                    nmse_db: eval.map(|e| e.nmse_db),
                    nmse_raw_db: eval.map(|e| e.nmse_raw_db),
                    flops: model.map(|m| m.flops()),
                    throughput_mbps: Some(r.mbps),
                    baseline_mbps: Some(baseline),
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{registry, NetDims, Normalization};

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n_rb: 4,
            n_tx: 2,
            n_rx: 2,
            n_layers: 2,
            realization_slots: 300,
            history: 3,
            profiles: vec![TdlModel::A],
            doppler_list_hz: vec![10.0],
            ..Default::default()
        }
    }

    /// A dense model that reproduces the newest report exactly.
    fn hold_model(cfg: &ExperimentConfig) -> Arc<PredictorModel> {
        let dims = NetDims::new(cfg.history + 1, 2, cfg.t_csi - 1).unwrap();
        let f = registry().for_kind(ModelKind::Dnn);
        let mut net = f.zeros(dims);
        let p = net.params_mut();
        // w1 rows: +x0 and −x0; w2: h0 − h1.
        let (pin, d) = (dims.input, 2);
        p[0] = 1.0;
        p[pin] = -1.0;
        let w2 = d * pin + d;
        for k in 0..dims.output {
            p[w2 + k * d] = 1.0;
            p[w2 + k * d + 1] = -1.0;
        }
        Arc::new(PredictorModel::new(net, Normalization { mean: 0.0, std: 1.0 }).unwrap())
    }

    struct Recorder {
        inner: Box<dyn LinkPolicy>,
        log: std::sync::Arc<std::sync::Mutex<Vec<(usize, u8)>>>,
    }

    impl LinkPolicy for Recorder {
        fn name(&self) -> &str {
            self.inner.name()
        }
        fn on_report(&mut self, h: &[f64]) -> Result<()> {
            self.inner.on_report(h)
        }
        fn decide(&self, v: &SlotView<'_>) -> u8 {
            let c = self.inner.decide(v);
            self.log.lock().unwrap().push((v.offset, c));
            c
        }
    }

    #[test]
    fn held_forecast_equals_stale_and_bits_are_bounded() {
        let cfg = tiny();
        let mut ctx = PolicyContext::default();
        ctx.models.insert(ModelKind::Dnn, hold_model(&cfg));
        let reg = PolicyRegistry::default();
        let mut pols: Vec<Box<dyn LinkPolicy>> =
            ["stale", "dnn", "oracle"].iter().map(|n| reg.build(n, &ctx).unwrap()).collect();
        let n = 1000;
        let res = run_throughput_sim(&cfg, TdlModel::A, 10.0, &mut pols, n).unwrap();
        assert_eq!(res[0].bits, res[1].bits);
        let cap = n as f64 * CqiTable::default().max_spectral_efficiency() * 2.0 * 4.0 * RE_PER_RB;
        assert!(res.iter().all(|r| r.bits <= cap && r.bits > 0.0));
        let again = run_throughput_sim(&cfg, TdlModel::A, 10.0, &mut pols, n).unwrap();
        assert_eq!(res, again);
    }

    #[test]
    fn report_slots_agree() {
        let cfg = tiny();
        let mut ctx = PolicyContext::default();
        // Any forecast: a zero network predicts the normalization mean.
        let net = registry().for_kind(ModelKind::Lstm).zeros(NetDims::new(4, 2, 3).unwrap());
        ctx.models.insert(ModelKind::Lstm, Arc::new(PredictorModel::new(net, Normalization { mean: -3.0, std: 1.0 }).unwrap()));
        let reg = PolicyRegistry::default();
        let logs: Vec<_> = (0..2).map(|_| Arc::new(std::sync::Mutex::new(Vec::new()))).collect();
        let mut pols: Vec<Box<dyn LinkPolicy>> = ["stale", "lstm"]
            .iter()
            .zip(&logs)
            .map(|(n, log)| Box::new(Recorder { inner: reg.build(n, &ctx).unwrap(), log: log.clone() }) as Box<dyn LinkPolicy>)
            .collect();
        run_throughput_sim(&cfg, TdlModel::A, 20.0, &mut pols, 400).unwrap();
        let (a, b) = (logs[0].lock().unwrap(), logs[1].lock().unwrap());
        assert_eq!(a.len(), 400);
        let mut differs = false;
        for (x, y) in a.iter().zip(b.iter()) {
            if x.0 == 0 {
                assert_eq!(x.1, y.1);
            } else {
                differs |= x.1 != y.1;
            }
        }
        assert!(differs, "a −3 dB forecast should change some intermediate CQIs");
    }

    #[test]
    fn frozen_channel_policies_coincide() {
        let cfg = ExperimentConfig {
            allow_any_doppler: true,
            ..tiny()
        };
        let reg = PolicyRegistry::default();
        let mut ctx = PolicyContext::default();
        ctx.models.insert(ModelKind::Dnn, hold_model(&cfg));
        let mut pols: Vec<Box<dyn LinkPolicy>> =
            ["stale", "dnn", "oracle"].iter().map(|n| reg.build(n, &ctx).unwrap()).collect();
        let res = run_throughput_sim(&cfg, TdlModel::A, 0.0, &mut pols, 800).unwrap();
        assert_eq!(res[0].bits, res[2].bits);
        assert_eq!(res[0].bits, res[1].bits);
    }

    #[test]
    fn registry_names_and_missing_models() {
        let reg = PolicyRegistry::default();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["dnn", "lstm", "oracle", "stale"]);
        assert!(matches!(reg.build("lstm", &PolicyContext::default()), Err(Error::Config(_))));
        assert!(reg.build("genie", &PolicyContext::default()).is_err());
    }

    #[test]
    fn sweep_emits_requested_policies() {
        let cfg = ExperimentConfig {
            policies: vec!["oracle".into()],
            throughput_slots: 500,
            ..tiny()
        };
        let rows = run_throughput_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].model, "oracle");
        assert!(rows[0].throughput_mbps.unwrap() >= rows[0].baseline_mbps.unwrap() * 0.9);
    }
}
