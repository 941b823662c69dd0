//! Report-instant windows over effective-SINR traces, forecasters that map
//! a window to the intermediate slots, and the NMSE metric.

mod dataset_io;
mod model;

use crate::channel::TdlModel;
use crate::neural::Sample;
use crate::{Error, Result};

pub use dataset_io::{read_windows, write_windows, write_windows_csv, WSMP_MAGIC, WSMP_VERSION};
pub use model::{read_model, write_model, ModelMetadata, PredictorModel, CSIP_MAGIC, CSIP_VERSION};

/// Lowest value `nmse_db` reports; a perfect forecast lands here.
pub const NMSE_FLOOR_DB: f64 = -100.0;

/// Effective SINR (dB) of every slot of one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct EffSinrTrace {
    pub values_db: Vec<f64>,
    pub t_csi: usize,
    pub doppler_hz: f64,
    pub profile: TdlModel,
}

impl EffSinrTrace {
    pub fn new(values_db: Vec<f64>, t_csi: usize, doppler_hz: f64, profile: TdlModel) -> Result<Self> {
        if let Some(i) = values_db.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite SINR at slot {i}")));
        }
        if t_csi == 0 {
            return Err(Error::Config("t_csi must be at least 1".into()));
        }
        Ok(EffSinrTrace {
            values_db,
            t_csi,
            doppler_hz,
            profile,
        })
    }

    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }
}

/// Input window at a report instant and the values of the slots before the
/// next report.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    /// `γ(n), γ(n−T), …, γ(n−P·T)`, newest first.
    pub x: Vec<f64>,
    /// `γ(n+1), …, γ(n+T−1)`.
    pub y: Vec<f64>,
    pub anchor_slot: usize,
}

impl Sample for WindowSample {
    fn input(&self) -> &[f64] {
        &self.x
    }
    fn target(&self) -> &[f64] {
        &self.y
    }
}

/// Shortest trace that yields one window with `p` past reports.
pub fn min_trace_len(p: usize, t_csi: usize) -> usize {
    p * t_csi + t_csi
}

/// Number of windows `build_windows` produces.
pub fn window_count(len: usize, p: usize, t_csi: usize) -> usize {
    if len < min_trace_len(p, t_csi) {
        0
    } else {
        (len - 1 - p * t_csi - (t_csi - 1)) / t_csi + 1
    }
}

/// One sample per report instant `n = p·T, (p+1)·T, …` whose targets fit in
/// the trace.
pub fn build_windows(trace: &EffSinrTrace, p: usize) -> Result<Vec<WindowSample>> {
    let t = trace.t_csi;
    if t < 2 {
        return Err(Error::Config(
            "t_csi = 1 leaves no intermediate slots to predict".into(),
        ));
    }
    let len = trace.len();
    let min = min_trace_len(p, t);
    if len < min {
        return Err(Error::TraceTooShort { len, min });
    }
    let v = &trace.values_db;
    Ok((0..window_count(len, p, t))
        .map(|k| {
            let n = (p + k) * t;
            WindowSample {
                x: (0..=p).map(|j| v[n - j * t]).collect(),
                y: v[n + 1..n + t].to_vec(),
                anchor_slot: n,
            }
        })
        .collect())
}

/// Repeats the newest reported value over `out_len` slots.
pub fn hold_baseline(x: &[f64], out_len: usize) -> Result<Vec<f64>> {
    match x.first() {
        Some(&newest) => Ok(vec![newest; out_len]),
        None => Err(Error::EmptyData("hold baseline input".into())),
    }
}

/// `10·log10(Σ‖y − ŷ‖² / Σ‖y‖²)` pooled over every entry, floored at
/// [`NMSE_FLOOR_DB`].
pub fn nmse_db<A: AsRef<[f64]>, B: AsRef<[f64]>>(preds: &[A], targets: &[B]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::dims(format!("{} predictions", targets.len()), format!("{}", preds.len())));
    }
    let (mut err, mut pow) = (0.0, 0.0);
    for (p, t) in preds.iter().zip(targets) {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != t.len() {
            return Err(Error::dims(format!("prediction of length {}", t.len()), p.len()));
        }
        for (a, b) in p.iter().zip(t) {
            err += (b - a) * (b - a);
            pow += b * b;
        }
    }
    if pow == 0.0 {
        return Err(Error::UndefinedNormalization);
    }
    if err == 0.0 {
        return Ok(NMSE_FLOOR_DB);
    }
    Ok((10.0 * (err / pow).log10()).max(NMSE_FLOOR_DB))
}

/// Maps a report window (newest first) to forecasts for the intermediate
/// slots, in dB.
pub trait Predictor: Send + Sync {
    fn name(&self) -> &str;
    fn output_len(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// No-prediction reference: the last report is held until the next.
#[derive(Debug, Clone, Copy)]
pub struct HoldBaseline {
    pub out_len: usize,
}

impl Predictor for HoldBaseline {
    fn name(&self) -> &str {
        "hold"
    }
    fn output_len(&self) -> usize {
        self.out_len
    }
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        hold_baseline(x, self.out_len)
    }
}

/// Forecasts of `predictor` for every sample.
pub fn predict_all(predictor: &dyn Predictor, samples: &[WindowSample]) -> Result<Vec<Vec<f64>>> {
    samples.iter().map(|s| predictor.predict(&s.x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(v: Vec<f64>, t: usize) -> EffSinrTrace {
        EffSinrTrace::new(v, t, 10.0, TdlModel::A).unwrap()
    }

    #[test]
    fn worked_window_example() {
        let tr = trace((0..17).map(|i| i as f64 * 10.0).collect(), 4);
        let w = build_windows(&tr, 2).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].anchor_slot, 8);
        assert_eq!(w[1].anchor_slot, 12);
        assert_eq!(w[0].x, vec![80.0, 40.0, 0.0]);
        assert_eq!(w[0].y, vec![90.0, 100.0, 110.0]);
    }

    #[test]
    fn window_errors() {
        let tr = trace(vec![1.0; 11], 4);
        assert!(matches!(build_windows(&tr, 2), Err(Error::TraceTooShort { len: 11, min: 12 })));
        assert_eq!(build_windows(&trace(vec![1.0; 12], 4), 2).unwrap().len(), 1);
        assert!(matches!(build_windows(&trace(vec![1.0; 40], 1), 2), Err(Error::Config(_))));
    }

    #[test]
    fn constant_trace_gives_constant_windows() {
        let w = build_windows(&trace(vec![3.5; 100], 4), 8).unwrap();
        assert!(w.iter().all(|s| s.x.iter().chain(&s.y).all(|&v| v == 3.5)));
        let holds: Vec<_> = w.iter().map(|s| hold_baseline(&s.x, 3).unwrap()).collect();
        let ys: Vec<_> = w.iter().map(|s| s.y.clone()).collect();
        assert_eq!(nmse_db(&holds, &ys).unwrap(), NMSE_FLOOR_DB);
    }

    #[test]
    fn hold_examples() {
        assert_eq!(hold_baseline(&[5.0, 3.0, 1.0], 3).unwrap(), vec![5.0; 3]);
        assert!(hold_baseline(&[], 3).is_err());
        let h = HoldBaseline { out_len: 2 };
        assert_eq!(h.predict(&[1.5, 0.0]).unwrap(), vec![1.5, 1.5]);
    }

    #[test]
    fn nmse_examples() {
        let y = vec![vec![1.0, -2.0], vec![3.0, 0.5]];
        assert_eq!(nmse_db(&y, &y).unwrap(), NMSE_FLOOR_DB);
        let zero = vec![vec![0.0; 2]; 2];
        assert!(nmse_db(&zero, &y).unwrap().abs() < 1e-12);
        let double: Vec<Vec<f64>> = y.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
        assert!(nmse_db(&double, &y).unwrap().abs() < 1e-12);
        assert!(matches!(nmse_db(&y, &zero), Err(Error::UndefinedNormalization)));
        assert!(nmse_db(&y[..1], &y).is_err());
    }

    proptest! {
        #[test]
        fn windows_sit_on_report_grid(len in 1usize..300, t in 2usize..8, p in 0usize..10, seed in any::<u64>()) {
            let v: Vec<f64> = (0..len).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64).collect();
            let tr = trace(v.clone(), t);
            match build_windows(&tr, p) {
                Err(Error::TraceTooShort { min, .. }) => prop_assert!(len < min),
                Err(e) => prop_assert!(false, "{e}"),
                Ok(w) => {
                    prop_assert_eq!(w.len(), window_count(len, p, t));
                    prop_assert!(w.len() >= 1);
                    for (k, s) in w.iter().enumerate() {
                        let n = s.anchor_slot;
                        prop_assert_eq!(n, (p + k) * t);
                        prop_assert_eq!(s.x.len(), p + 1);
                        prop_assert_eq!(s.y.len(), t - 1);
                        for j in 0..=p {
                            prop_assert_eq!((n - j * t) % t, 0);
                            prop_assert_eq!(s.x[j], v[n - j * t]);
                        }
                        for (i, &yv) in s.y.iter().enumerate() {
                            prop_assert_eq!(yv, v[n + 1 + i]);
                        }
                    }
                    // No further anchor would have complete targets.
                    let next = (p + w.len()) * t;
                    prop_assert!(next + t - 1 >= len);
                }
            }
        }

        #[test]
        fn nmse_is_scale_invariant(
            rows in prop::collection::vec(prop::collection::vec(-30.0f64..30.0, 3), 1..20),
            noise in prop::collection::vec(-1.0f64..1.0, 60),
            c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        ) {
            prop_assume!(rows.iter().flatten().any(|v| v.abs() > 1e-3));
            let preds: Vec<Vec<f64>> = rows.iter().enumerate()
                .map(|(i, r)| r.iter().enumerate().map(|(j, v)| v + noise[(3 * i + j) % 60]).collect())
                .collect();
            let scale = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> { m.iter().map(|r| r.iter().map(|v| v * c).collect()).collect() };
            let a = nmse_db(&preds, &rows).unwrap();
            let b = nmse_db(&scale(&preds), &scale(&rows)).unwrap();
            prop_assert!((a - b).abs() < 1e-8 || (a == NMSE_FLOOR_DB && b == NMSE_FLOOR_DB));
        }
    }
}
