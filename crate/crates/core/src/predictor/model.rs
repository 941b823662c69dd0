//! Trained forecaster plus its normalization, and the `CSIP` model file.
//!
//! Layout (little endian): magic `CSIP`, `u32` version, `u32` model kind
//! (1 dense, 2 LSTM), `u32` P, `u32` D, `u32` T_CSI, `f64` mean, `f64` std,
//! `u64` parameter count, then the parameters as `f64` in the network's
//! flat order.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::neural::{registry, ModelKind, NetDims, Network, Normalization, TrainConfig, TrainReport};
use crate::{Error, Result};

pub const CSIP_MAGIC: &[u8; 4] = b"CSIP";
pub const CSIP_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 5 * 4 + 2 * 8 + 8;

/// A network together with the z-score it was trained under.
#[derive(Debug, Clone)]
pub struct PredictorModel {
    network: Box<dyn Network>,
    normalization: Normalization,
}

impl PredictorModel {
    /// Wraps a network whose input is `P+1` reports and output `T_CSI−1`
    /// slots.
    pub fn new(network: Box<dyn Network>, normalization: Normalization) -> Result<Self> {
        if !(normalization.std > 0.0 && normalization.std.is_finite() && normalization.mean.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad normalization {normalization:?}")));
        }
        Ok(PredictorModel {
            network,
            normalization,
        })
    }

    pub fn from_report(report: TrainReport) -> Self {
        PredictorModel {
            network: report.network,
            normalization: report.normalization,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.network.kind()
    }

    pub fn network(&self) -> &dyn Network {
        self.network.as_ref()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Past reports in the window (`P`).
    pub fn history(&self) -> usize {
        self.network.dims().input - 1
    }

    pub fn hidden(&self) -> usize {
        self.network.dims().hidden
    }

    pub fn t_csi(&self) -> usize {
        self.network.dims().output + 1
    }

    pub fn flops(&self) -> u64 {
        registry().for_kind(self.kind()).flops(self.network.dims())
    }

    /// Forecast in dB for a window given in dB, newest first.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dims = self.network.dims();
        if x.len() != dims.input {
            return Err(Error::dims(
                format!("window of {} reports (P={})", dims.input, dims.input - 1),
                format!("{} reports", x.len()),
            ));
        }
        let n = self.normalization;
        let z: Vec<f64> = x.iter().map(|&v| n.apply(v)).collect();
        Ok(self.network.forward(&z)?.into_iter().map(|v| n.invert(v)).collect())
    }

    /// Writes the model file and a JSON sidecar next to it.
    pub fn save(&self, path: &Path, meta: &ModelMetadata) -> Result<()> {
        let mut bytes = Vec::new();
        write_model(self, &mut bytes).map_err(|e| Error::io(path, e))?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(meta).expect("metadata is always serializable");
        fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        read_model(&bytes[..])
    }
}

impl Predictor for PredictorModel {
    fn name(&self) -> &str {
        self.kind().name()
    }
    fn output_len(&self) -> usize {
        self.network.dims().output
    }
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        PredictorModel::predict(self, x)
    }
}

/// Provenance written next to a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub model: String,
    pub hidden: usize,
    pub history: usize,
    pub t_csi: usize,
    pub profile: String,
    pub doppler_hz: f64,
    pub train: TrainConfig,
    pub dataset_hash: String,
    pub overrides: Vec<String>,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
}

pub fn sidecar_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn fmt_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "CSIP",
        reason: reason.into(),
    }
}

pub fn write_model<W: Write>(model: &PredictorModel, mut w: W) -> std::io::Result<()> {
    let dims = model.network.dims();
    w.write_all(CSIP_MAGIC)?;
    for v in [CSIP_VERSION, model.kind().code(), (dims.input - 1) as u32, dims.hidden as u32, (dims.output + 1) as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&model.normalization.mean.to_le_bytes())?;
    w.write_all(&model.normalization.std.to_le_bytes())?;
    let params = model.network.params();
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_model<R: Read>(mut r: R) -> Result<PredictorModel> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| fmt_err(e.to_string()))?;
    if buf.len() < HEADER_LEN || &buf[..4] != CSIP_MAGIC {
        return Err(fmt_err("missing CSIP header"));
    }
    let word = |i: usize| u32::from_le_bytes(buf[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    if word(0) != CSIP_VERSION {
        return Err(fmt_err(format!("unsupported version {}", word(0))));
    }
    let kind = ModelKind::from_code(word(1)).ok_or_else(|| fmt_err(format!("unknown model kind {}", word(1))))?;
    let (p, d, t) = (word(2) as usize, word(3) as usize, word(4) as usize);
    if t < 2 {
        return Err(fmt_err(format!("t_csi {t} leaves no outputs")));
    }
    let dims = NetDims::new(p + 1, d, t - 1)?;
    let norm = Normalization {
        mean: f64_at(24),
        std: f64_at(32),
    };
    let n = u64::from_le_bytes(buf[40..48].try_into().unwrap()) as usize;
    let factory = registry().for_kind(kind);
    if n != factory.param_count(dims) {
        return Err(fmt_err(format!("{n} parameters stored, {kind} {dims} needs {}", factory.param_count(dims))));
    }
    let body = &buf[HEADER_LEN..];
    if body.len() != n * 8 {
        return Err(fmt_err(format!("expected {} payload bytes, found {}", n * 8, body.len())));
    }
    let params = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    PredictorModel::new(factory.from_params(dims, params)?, norm)
}
