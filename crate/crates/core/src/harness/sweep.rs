//! NMSE sweeps over Doppler and hidden width.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::dataset::{generate_dataset, thread_pool, DatasetSplit};
use crate::channel::TdlModel;
use crate::neural::{train, ModelKind, Normalization};
use crate::predictor::{nmse_db, predict_all, HoldBaseline, Predictor, PredictorModel, WindowSample};
use crate::Result;

/// One row of a sweep report. Fields that do not apply to a row are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub profile: TdlModel,
    pub doppler_hz: f64,
    /// `hold`, `dnn`, `lstm`, or a link policy name.
    pub model: String,
    pub hidden: Option<usize>,
    pub history: usize,
    pub t_csi: usize,
    /// NMSE in the model's standardized domain.
    pub nmse_db: Option<f64>,
    /// NMSE of the raw dB values.
    pub nmse_raw_db: Option<f64>,
    pub flops: Option<u64>,
    pub throughput_mbps: Option<f64>,
    pub baseline_mbps: Option<f64>,
    pub seed: u64,
}

/// NMSE of one forecaster on a test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Predictions and targets standardized with the training statistics.
    pub nmse_db: f64,
    /// Predictions and targets in dB as produced.
    pub nmse_raw_db: f64,
}

/// Scores `predictor` on `test`. The headline figure standardizes
/// predictions and targets with `norm`, the z-score fitted on the training
/// split, so the error is measured against the fluctuation of the effective
/// SINR rather than against its absolute level.
pub fn evaluate(predictor: &dyn Predictor, test: &[WindowSample], norm: Normalization) -> Result<Evaluation> {
    let preds = predict_all(predictor, test)?;
    let targets: Vec<&[f64]> = test.iter().map(|s| s.y.as_slice()).collect();
    let raw = nmse_db(&preds, &targets)?;
    let z = |v: &[f64]| v.iter().map(|&x| norm.apply(x)).collect::<Vec<_>>();
    let zp: Vec<Vec<f64>> = preds.iter().map(|p| z(p)).collect();
    let zt: Vec<Vec<f64>> = targets.iter().map(|t| z(t)).collect();
    Ok(Evaluation {
        nmse_db: nmse_db(&zp, &zt)?,
        nmse_raw_db: raw,
    })
}

/// A trained model and its scores at one sweep point.
#[derive(Debug, Clone)]
pub struct TrainedPoint {
    pub model: PredictorModel,
    pub seed: u64,
    pub evaluation: Evaluation,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

pub fn train_and_evaluate(
    cfg: &ExperimentConfig,
    data: &DatasetSplit,
    kind: ModelKind,
    hidden: usize,
    seed: u64,
) -> Result<TrainedPoint> {
    let report = train(kind, hidden, &data.train, &data.val, &cfg.train_config(seed))?;
    let (train_loss, val_loss) = (report.train_loss.clone(), report.val_loss.clone());
    let model = PredictorModel::from_report(report);
    let evaluation = evaluate(&model, &data.test, model.normalization())?;
    Ok(TrainedPoint {
        model,
        seed,
        evaluation,
        train_loss,
        val_loss,
    })
}

/// Scores of the hold baseline under the training-split normalization.
pub fn evaluate_hold(cfg: &ExperimentConfig, data: &DatasetSplit) -> Result<Evaluation> {
    let norm = Normalization::fit(&data.train)?;
    evaluate(&HoldBaseline { out_len: cfg.t_csi - 1 }, &data.test, norm)
}

fn record(cfg: &ExperimentConfig, data: &DatasetSplit, model: &str, hidden: Option<usize>, eval: Evaluation, flops: Option<u64>, seed: u64) -> SweepRecord {
    SweepRecord {
        profile: data.provenance.profile,
        doppler_hz: data.provenance.doppler_hz,
        model: model.to_string(),
        hidden,
        history: cfg.history,
        t_csi: cfg.t_csi,
        nmse_db: Some(eval.nmse_db),
        nmse_raw_db: Some(eval.nmse_raw_db),
        flops,
        throughput_mbps: None,
        baseline_mbps: None,
        seed,
    }
}

/// Hold baseline plus every `(kind, D, seed)` model at one condition.
fn sweep_point(cfg: &ExperimentConfig, profile: TdlModel, doppler: f64, kinds: &[ModelKind], hidden: &[usize]) -> Result<Vec<SweepRecord>> {
    let data = generate_dataset(cfg, profile, doppler)?;
    let mut out = vec![record(cfg, &data, "hold", None, evaluate_hold(cfg, &data)?, Some(0), cfg.seed)];
    for &kind in kinds {
        for &d in hidden {
            for seed in cfg.train_seeds() {
                let t = train_and_evaluate(cfg, &data, kind, d, seed)?;
                out.push(record(cfg, &data, kind.name(), Some(d), t.evaluation, Some(t.model.flops()), seed));
            }
        }
    }
    Ok(out)
}

/// Runs `points` one after another, or across `cfg.jobs` threads with
/// single-threaded work inside each point. Results keep point order.
fn run_points(
    cfg: &ExperimentConfig,
    points: Vec<(TdlModel, f64)>,
    f: impl Fn(&ExperimentConfig, TdlModel, f64) -> Result<Vec<SweepRecord>> + Sync,
) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let inner = ExperimentConfig { jobs: 1, ..cfg.clone() };
    let parts: Vec<Result<Vec<SweepRecord>>> = match thread_pool(cfg.jobs.min(points.len()))? {
        Some(pool) => pool.install(|| points.par_iter().map(|&(p, d)| f(&inner, p, d)).collect()),
        None => points.iter().map(|&(p, d)| f(cfg, p, d)).collect(),
    };
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// For every configured profile and Doppler value: the hold baseline and
/// each model kind at hidden width `hidden`, one row per training seed.
pub fn run_nmse_sweep(cfg: &ExperimentConfig, kinds: &[ModelKind], hidden: usize) -> Result<Vec<SweepRecord>> {
    let points = cfg
        .profiles
        .iter()
        .flat_map(|&p| cfg.doppler_list_hz.iter().map(move |&d| (p, d)))
        .collect();
    run_points(cfg, points, |c, p, d| sweep_point(c, p, d, kinds, &[hidden]))
}

/// NMSE and FLOPs per `(kind, D)` at one condition.
pub fn run_complexity_sweep(
    cfg: &ExperimentConfig,
    profile: TdlModel,
    doppler_hz: f64,
    kinds: &[ModelKind],
    hidden_list: &[usize],
) -> Result<Vec<SweepRecord>> {
    let rows = run_points(cfg, vec![(profile, doppler_hz)], |c, p, d| sweep_point(c, p, d, kinds, hidden_list))?;
    Ok(rows.into_iter().filter(|r| r.model != "hold").collect())
}
