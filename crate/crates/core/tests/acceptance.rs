//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 2 4`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csipred_core::channel::{per_rb_sinr, FadingChannel, FadingConfig, TapProfile, TdlModel};
use csipred_core::harness::{
    evaluate_hold, generate_dataset, records_to_csv, run_complexity_sweep, run_nmse_sweep, run_throughput_sim,
    run_throughput_sweep, train_and_evaluate, DatasetSplit, Evaluation, ExperimentConfig, PolicyContext,
    PolicyRegistry, TrainedPoint,
};
use csipred_core::link::eesm::eesm_values;
use csipred_core::neural::{gradients, mse_loss, registry, ModelKind, NetDims, Network};

// Criterion 1.
const EESM_GRIDS: usize = 1000;
const EESM_IDENTITY_REL: f64 = 1e-9;
const EESM_MEAN_LIMIT_BETA: f64 = 1e8;
const EESM_MEAN_LIMIT_REL: f64 = 1e-4;
const EESM_ORDER_SLACK: f64 = 1e-12;
const EESM_BUDGET: Duration = Duration::from_secs(10);
// Criterion 2.
const MMSE_REL: f64 = 1e-12;
// Criterion 3.
const ACF_SLOTS: usize = 100_000;
const ACF_MAX_LAG_SLOTS: usize = 50;
const ACF_TOL: f64 = 0.05;
const ACF_DOPPLERS: [f64; 3] = [5.0, 10.0, 30.0];
const ACF_BUDGET: Duration = Duration::from_secs(120);
// Criterion 4.
const GRAD_SEEDS: u64 = 20;
const GRAD_STEP: f64 = 1e-5;
const GRAD_REL: f64 = 1e-4;
// Relative error denominators never drop below this.
const GRAD_FLOOR: f64 = 1e-6;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
// Criteria 5-9.
const HIDDEN: usize = 16;
const SEEDS: [u64; 3] = [1, 2, 3];
const LSTM_GAP_DB: f64 = 0.3;
const HOLD_GAP_DB: f64 = 1.0;
const DIRECTION_BUDGET: Duration = Duration::from_secs(30 * 60);
const HIGH_DOPPLER: f64 = 30.0;
const HIGH_DOPPLER_BAND: (f64, f64) = (-3.0, 0.5);
const TREND_HIDDEN: [usize; 3] = [2, 8, 32];
const TREND_MARGIN_DB: f64 = 0.2;
const TPUT_SLOTS: usize = 200_000;
const TPUT_DOPPLERS: [f64; 2] = [10.0, 20.0];
const TPUT_STATIC_REL: f64 = 0.02;
const TPUT_BUDGET: Duration = Duration::from_secs(20 * 60);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(v: Verdict, took: Duration, budget: Duration) -> Verdict {
    if took <= budget {
        v
    } else {
        verdict(false, format!("{}; took {:.0}s, budget {}s", v.detail, took.as_secs_f64(), budget.as_secs()))
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn crit_eesm() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [0.0f64; 2];
    let mut failures = Vec::new();
    for g in 0..EESM_GRIDS {
        let n = rng.gen_range(1..=4) * rng.gen_range(1..=52);
        let gamma: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-1.0..3.0))).collect();
        let beta = 10f64.powf(rng.gen_range(-1.0..2.0));
        let (lo, hi) = gamma.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));

        let c = gamma[0];
        let e_const = rel(eesm_values(&vec![c; n], beta), c);
        worst[0] = worst[0].max(e_const);
        if e_const > EESM_IDENTITY_REL {
            failures.push(format!("grid {g}: constant identity off by {e_const:.2e}"));
        }

        let e = eesm_values(&gamma, beta);
        if e < lo * (1.0 - EESM_ORDER_SLACK) || e > hi * (1.0 + EESM_ORDER_SLACK) {
            failures.push(format!("grid {g}: {e} outside [{lo}, {hi}]"));
        }

        let beta_up = beta * rng.gen_range(1.01..10.0);
        if eesm_values(&gamma, beta_up) < e * (1.0 - EESM_ORDER_SLACK) {
            failures.push(format!("grid {g}: decreasing in beta"));
        }
        let mut raised = gamma.clone();
        let k = rng.gen_range(0..n);
        raised[k] *= rng.gen_range(1.01..4.0);
        if eesm_values(&raised, beta) < e * (1.0 - EESM_ORDER_SLACK) {
            failures.push(format!("grid {g}: decreasing in entry {k}"));
        }

        let mean = gamma.iter().sum::<f64>() / n as f64;
        let e_mean = rel(eesm_values(&gamma, EESM_MEAN_LIMIT_BETA), mean);
        worst[1] = worst[1].max(e_mean);
        if e_mean > EESM_MEAN_LIMIT_REL {
            failures.push(format!("grid {g}: mean limit off by {e_mean:.2e}"));
        }
    }
    let took = start.elapsed();
    let detail = format!(
        "{EESM_GRIDS} grids, worst identity rel {:.1e}, worst mean-limit rel {:.1e}{}",
        worst[0],
        worst[1],
        failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()
    );
    within_budget(verdict(failures.is_empty(), detail), took, EESM_BUDGET)
}

fn crit_mmse() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let zero = Complex64::new(0.0, 0.0);
    for _ in 0..200 {
        let n = rng.gen_range(1..=4);
        let rho = 10f64.powf(rng.gen_range(-2.0..4.0));

        let mut eye = vec![zero; n * n];
        for i in 0..n {
            eye[i * n + i] = Complex64::new(1.0, 0.0);
        }
        for s in per_rb_sinr(&eye, n, n, rho, n).unwrap() {
            worst = worst.max(rel(s, rho));
        }

        let d: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.gen_range(0.3..3.0), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let mut diag = vec![zero; n * n];
        for i in 0..n {
            diag[i * n + i] = d[i];
        }
        for (s, di) in per_rb_sinr(&diag, n, n, rho, n).unwrap().iter().zip(&d) {
            worst = worst.max(rel(*s, rho * di.norm_sqr()));
        }
    }
    verdict(worst < MMSE_REL, format!("identity and diagonal channels, worst rel {worst:.1e}"))
}

/// Bessel J0 by Simpson quadrature of `(1/π) ∫₀^π cos(x sin t) dt`.
fn bessel_j0(x: f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let f = |t: f64| (x * t.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0 / PI
}

fn crit_fading() -> Verdict {
    let start = Instant::now();
    let profile = TapProfile::load(TdlModel::A, 300.0).unwrap();
    let n_taps = profile.taps.len();
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, &fd) in ACF_DOPPLERS.iter().enumerate() {
        let cfg = FadingConfig {
            doppler_hz: fd,
            n_slots: ACF_SLOTS,
            n_tx: 1,
            n_rx: 1,
            n_rb: 1,
            seed: 300 + i as u64,
            ..Default::default()
        };
        let ch = FadingChannel::new(&profile, &cfg).unwrap();
        let mut acf = vec![0.0; ACF_MAX_LAG_SLOTS + 1];
        for tap in 0..n_taps {
            let g: Vec<Complex64> = (0..ACF_SLOTS as u64).map(|q| ch.tap_gain(0, 0, tap, q)).collect();
            let lag = |k: usize| {
                let m = ACF_SLOTS - k;
                (0..m).map(|q| (g[q + k] * g[q].conj()).re).sum::<f64>() / m as f64
            };
            let r0 = lag(0);
            for (k, a) in acf.iter_mut().enumerate() {
                *a += lag(k) / r0 / n_taps as f64;
            }
        }
        let dev = acf
            .iter()
            .enumerate()
            .map(|(k, a)| (a - bessel_j0(2.0 * PI * fd * k as f64 * cfg.slot_duration_s)).abs())
            .fold(0.0, f64::max);
        pass &= dev < ACF_TOL;
        parts.push(format!("{fd} Hz {dev:.3}"));
    }
    let detail = format!("max |acf - J0| over {ACF_MAX_LAG_SLOTS} ms lags: {}", parts.join(", "));
    within_budget(verdict(pass, detail), start.elapsed(), ACF_BUDGET)
}

fn batch_loss(net: &dyn Network, batch: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    batch
        .iter()
        .map(|(x, y)| mse_loss(&net.forward(x).unwrap(), y).unwrap())
        .sum::<f64>()
        / batch.len() as f64
}

fn crit_gradients() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..GRAD_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        for kind in [ModelKind::Dnn, ModelKind::Lstm] {
            let dims = NetDims::new(rng.gen_range(2..=5), rng.gen_range(1..=4), rng.gen_range(1..=3)).unwrap();
            let net = registry().for_kind(kind).init(dims, &mut rng);
            let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..4)
                .map(|_| {
                    let x = (0..dims.input).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    let y = (0..dims.output).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    (x, y)
                })
                .collect();
            let g = gradients(net.as_ref(), &batch).unwrap();
            for k in 0..net.params().len() {
                let mut plus = net.clone();
                plus.params_mut()[k] += GRAD_STEP;
                let mut minus = net.clone();
                minus.params_mut()[k] -= GRAD_STEP;
                let fd = (batch_loss(plus.as_ref(), &batch) - batch_loss(minus.as_ref(), &batch)) / (2.0 * GRAD_STEP);
                let an = g.params()[k];
                worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(GRAD_FLOOR));
                checked += 1;
            }
        }
    }
    let detail = format!("{checked} parameters over {GRAD_SEEDS} seeds x 2 architectures, worst rel {worst:.1e}");
    within_budget(verdict(worst < GRAD_REL, detail), start.elapsed(), GRAD_BUDGET)
}

/// Datasets and trained models shared across the statistical criteria.
struct Lab {
    cfg: ExperimentConfig,
    data: HashMap<(TdlModel, u64), Rc<DatasetSplit>>,
    points: HashMap<(TdlModel, u64, ModelKind, usize, u64), Rc<TrainedPoint>>,
    holds: HashMap<(TdlModel, u64), Evaluation>,
}

impl Lab {
    fn new() -> Self {
        let cfg = ExperimentConfig {
            allow_any_doppler: true,
            throughput_slots: TPUT_SLOTS,
            ..Default::default()
        };
        cfg.validate().unwrap();
        Lab {
            cfg,
            data: HashMap::new(),
            points: HashMap::new(),
            holds: HashMap::new(),
        }
    }

    fn data(&mut self, profile: TdlModel, doppler: f64) -> Rc<DatasetSplit> {
        let cfg = &self.cfg;
        self.data
            .entry((profile, doppler.to_bits()))
            .or_insert_with(|| {
                let t = Instant::now();
                let d = generate_dataset(cfg, profile, doppler).unwrap();
                eprintln!("    dataset {} {doppler} Hz ({:.0}s)", profile.label(), t.elapsed().as_secs_f64());
                Rc::new(d)
            })
            .clone()
    }

    fn hold(&mut self, profile: TdlModel, doppler: f64) -> f64 {
        let data = self.data(profile, doppler);
        let cfg = &self.cfg;
        self.holds
            .entry((profile, doppler.to_bits()))
            .or_insert_with(|| evaluate_hold(cfg, &data).unwrap())
            .nmse_db
    }

    fn point(&mut self, profile: TdlModel, doppler: f64, kind: ModelKind, hidden: usize, seed: u64) -> Rc<TrainedPoint> {
        let key = (profile, doppler.to_bits(), kind, hidden, seed);
        if let Some(p) = self.points.get(&key) {
            return p.clone();
        }
        let data = self.data(profile, doppler);
        let t = Instant::now();
        let p = Rc::new(train_and_evaluate(&self.cfg, &data, kind, hidden, seed).unwrap());
        eprintln!(
            "    {kind} D={hidden} seed {seed} at {} {doppler} Hz: {:.3} dB ({:.0}s)",
            profile.label(),
            p.evaluation.nmse_db,
            t.elapsed().as_secs_f64()
        );
        self.points.insert(key, p.clone());
        p
    }

    fn nmse(&mut self, profile: TdlModel, doppler: f64, kind: ModelKind, hidden: usize, seed: u64) -> f64 {
        self.point(profile, doppler, kind, hidden, seed).evaluation.nmse_db
    }

    fn median_nmse(&mut self, profile: TdlModel, doppler: f64, kind: ModelKind, hidden: usize) -> f64 {
        median(SEEDS.iter().map(|&s| self.nmse(profile, doppler, kind, hidden, s)).collect())
    }
}

fn crit_direction(lab: &mut Lab) -> Verdict {
    let start = Instant::now();
    let hold = lab.hold(TdlModel::A, 10.0);
    let dnn = lab.median_nmse(TdlModel::A, 10.0, ModelKind::Dnn, HIDDEN);
    let lstm = lab.median_nmse(TdlModel::A, 10.0, ModelKind::Lstm, HIDDEN);
    let pass = lstm <= dnn - LSTM_GAP_DB && dnn <= hold - HOLD_GAP_DB && lstm <= hold - HOLD_GAP_DB;
    let detail = format!("TDL-A 10 Hz medians: hold {hold:.3}, dnn {dnn:.3}, lstm {lstm:.3} dB (lstm-dnn {:.3})", lstm - dnn);
    within_budget(verdict(pass, detail), start.elapsed(), DIRECTION_BUDGET)
}

fn crit_high_doppler(lab: &mut Lab) -> Verdict {
    let seed = SEEDS[0];
    let hold = lab.hold(TdlModel::A, HIGH_DOPPLER);
    let dnn = lab.nmse(TdlModel::A, HIGH_DOPPLER, ModelKind::Dnn, HIDDEN, seed);
    let lstm = lab.nmse(TdlModel::A, HIGH_DOPPLER, ModelKind::Lstm, HIDDEN, seed);
    let (lo, hi) = HIGH_DOPPLER_BAND;
    let inside = |v: f64| (lo..=hi).contains(&v);
    verdict(
        inside(dnn) && inside(lstm),
        format!("TDL-A {HIGH_DOPPLER} Hz: dnn {dnn:.3}, lstm {lstm:.3} dB, band [{lo}, {hi}] (hold {hold:.3})"),
    )
}

fn crit_los(lab: &mut Lab) -> Verdict {
    let seed = SEEDS[0];
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [ModelKind::Dnn, ModelKind::Lstm] {
        let a = lab.nmse(TdlModel::A, 10.0, kind, HIDDEN, seed);
        let d = lab.nmse(TdlModel::D, 10.0, kind, HIDDEN, seed);
        pass &= d < a;
        parts.push(format!("{kind} A {a:.3} / D {d:.3}"));
    }
    verdict(pass, format!("10 Hz, seed {seed}: {} dB", parts.join(", ")))
}

fn crit_trend(lab: &mut Lab) -> Verdict {
    let mut nmse = Vec::new();
    let mut flops = Vec::new();
    let mut exact = true;
    for &d in &TREND_HIDDEN {
        nmse.push(lab.median_nmse(TdlModel::A, 10.0, ModelKind::Lstm, d));
        let model = &lab.point(TdlModel::A, 10.0, ModelKind::Lstm, d, SEEDS[0]).model;
        // Per step: four gate maps over input and state plus 9D elementwise.
        let (p, dd, t) = (model.history() as u64 + 1, d as u64, lab.cfg.t_csi as u64 - 1);
        let oracle = p * (4 * (2 * dd + 2 * dd * dd + dd) + 9 * dd) + 2 * dd * t + t;
        exact &= model.flops() == oracle;
        flops.push(model.flops());
    }
    let monotone = nmse.windows(2).all(|w| w[1] <= w[0] + TREND_MARGIN_DB);
    let growing = flops.windows(2).all(|w| w[1] > w[0]);
    let rows: Vec<String> = TREND_HIDDEN
        .iter()
        .zip(nmse.iter().zip(&flops))
        .map(|(d, (n, f))| format!("D={d} {n:.3} dB {f} FLOPs"))
        .collect();
    verdict(
        monotone && growing && exact,
        format!("lstm medians {}{}", rows.join(", "), if exact { "" } else { "; FLOPs formula mismatch" }),
    )
}

fn crit_throughput(lab: &mut Lab) -> Verdict {
    let start = Instant::now();
    let registry = PolicyRegistry::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for doppler in [0.0, TPUT_DOPPLERS[0], TPUT_DOPPLERS[1]] {
        let mut ctx = PolicyContext::default();
        for kind in [ModelKind::Dnn, ModelKind::Lstm] {
            let p = lab.point(TdlModel::A, doppler, kind, HIDDEN, SEEDS[0]);
            ctx.models.insert(kind, Arc::new(p.model.clone()));
        }
        let mut policies: Vec<_> = ["stale", "dnn", "lstm", "oracle"]
            .iter()
            .map(|n| registry.build(n, &ctx).unwrap())
            .collect();
        let res = run_throughput_sim(&lab.cfg, TdlModel::A, doppler, &mut policies, TPUT_SLOTS).unwrap();
        let mbps = |name: &str| res.iter().find(|r| r.policy == name).unwrap().mbps;
        let (stale, lstm, oracle) = (mbps("stale"), mbps("lstm"), mbps("oracle"));
        if doppler == 0.0 {
            let lo = res.iter().map(|r| r.mbps).fold(f64::INFINITY, f64::min);
            let hi = res.iter().map(|r| r.mbps).fold(0.0, f64::max);
            pass &= hi <= lo * (1.0 + TPUT_STATIC_REL);
        } else {
            pass &= lstm > stale && oracle >= lstm;
        }
        parts.push(format!(
            "{doppler} Hz stale {stale:.2} dnn {:.2} lstm {lstm:.2} oracle {oracle:.2}",
            mbps("dnn")
        ));
    }
    let detail = format!("Mbps over {TPUT_SLOTS} slots: {}", parts.join("; "));
    within_budget(verdict(pass, detail), start.elapsed(), TPUT_BUDGET)
}

fn small_config(jobs: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_rb: 6,
        n_tx: 2,
        n_rx: 2,
        n_layers: 2,
        profiles: vec![TdlModel::A, TdlModel::D],
        doppler_list_hz: vec![5.0, 20.0],
        history: 4,
        realization_slots: 400,
        train_size: 300,
        val_size: 60,
        test_size: 60,
        epochs: 3,
        batch_size: 32,
        n_seeds: 2,
        throughput_slots: 1500,
        jobs,
        ..Default::default()
    }
}

fn sweep_csvs(cfg: &ExperimentConfig) -> [String; 3] {
    let kinds = [ModelKind::Dnn, ModelKind::Lstm];
    [
        records_to_csv(&run_nmse_sweep(cfg, &kinds, 4).unwrap()),
        records_to_csv(&run_complexity_sweep(cfg, TdlModel::A, 5.0, &kinds, &[2, 4]).unwrap()),
        records_to_csv(&run_throughput_sweep(cfg).unwrap()),
    ]
}

fn crit_reproducible() -> Verdict {
    let first = sweep_csvs(&small_config(1));
    let again = sweep_csvs(&small_config(1));
    let threaded = sweep_csvs(&small_config(2));
    let names = ["nmse", "complexity", "throughput"];
    let differing: Vec<&str> = (0..3)
        .filter(|&i| first[i] != again[i] || first[i] != threaded[i])
        .map(|i| names[i])
        .collect();
    let bytes: usize = first.iter().map(String::len).sum();
    if differing.is_empty() {
        verdict(true, format!("nmse, complexity and throughput sweeps byte-identical across reruns and jobs=1/2 ({bytes} bytes)"))
    } else {
        verdict(false, format!("differing CSV: {}", differing.join(", ")))
    }
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut lab = Lab::new();
    let criteria: [(&str, &mut dyn FnMut(&mut Lab) -> Verdict); 10] = [
        ("EESM properties", &mut |_| crit_eesm()),
        ("MMSE analytic cases", &mut |_| crit_mmse()),
        ("fading autocorrelation", &mut |_| crit_fading()),
        ("gradient checks", &mut |_| crit_gradients()),
        ("10 Hz NMSE ordering", &mut crit_direction),
        ("30 Hz NMSE convergence", &mut crit_high_doppler),
        ("LOS robustness", &mut crit_los),
        ("hidden-width trend", &mut crit_trend),
        ("throughput ordering", &mut crit_throughput),
        ("reproducible sweeps", &mut |_| crit_reproducible()),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let n = i + 1;
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let v = run(&mut lab);
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {status} {name}: {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
