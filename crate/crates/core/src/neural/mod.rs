//! Small forecasting networks: a one-hidden-layer ReLU network and a
//! single-layer LSTM with a linear head, plus Adam training.
//!
//! Architectures implement [`Network`] and are looked up by name through
//! [`NetworkRegistry`], so the trainer, serializer and FLOP counter never
//! branch on a concrete type.

pub mod adam;
pub mod dense;
pub mod lstm;
pub mod train;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;

use crate::{Error, Result};

pub use adam::{Adam, AdamConfig};
pub use dense::{dense_forward, DenseParams};
pub use lstm::{lstm_forward, lstm_step, LstmParams};
pub use train::{train, Normalization, Sample, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Dnn,
    Lstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dnn => "dnn",
            ModelKind::Lstm => "lstm",
        }
    }

    /// Stable integer tag used in model files.
    pub fn code(self) -> u32 {
        match self {
            ModelKind::Dnn => 1,
            ModelKind::Lstm => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(ModelKind::Dnn),
            2 => Some(ModelKind::Lstm),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dnn" | "dense" => Ok(ModelKind::Dnn),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Input window length, hidden width and output length of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl NetDims {
    pub fn new(input: usize, hidden: usize, output: usize) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::InvalidParameter(format!(
                "network dimensions must be positive, got P={input} D={hidden} T={output}"
            )));
        }
        Ok(NetDims { input, hidden, output })
    }
}

impl fmt::Display for NetDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P={} D={} T={}", self.input, self.hidden, self.output)
    }
}

/// A trainable forecaster with all parameters in one flat buffer.
///
/// `window` is always given newest sample first; recurrent implementations
/// consume it in time order.
pub trait Network: fmt::Debug + Send + Sync {
    fn kind(&self) -> ModelKind;
    fn dims(&self) -> NetDims;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn forward(&self, window: &[f64]) -> Result<Vec<f64>>;
    /// Adds the gradient of the per-sample MSE to `grad` (same layout as
    /// [`Network::params`]) and returns the loss.
    fn backprop(&self, window: &[f64], target: &[f64], grad: &mut [f64]) -> Result<f64>;
    fn boxed_clone(&self) -> Box<dyn Network>;
}

impl Clone for Box<dyn Network> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

/// Constructs one architecture.
pub trait NetworkFactory: Send + Sync {
    fn kind(&self) -> ModelKind;
    fn param_count(&self, dims: NetDims) -> usize;
    /// Network with every parameter zero.
    fn zeros(&self, dims: NetDims) -> Box<dyn Network>;
    /// Network built from a flat parameter buffer.
    fn from_params(&self, dims: NetDims, params: Vec<f64>) -> Result<Box<dyn Network>>;
    fn init(&self, dims: NetDims, rng: &mut dyn rand::RngCore) -> Box<dyn Network>;
    fn flops(&self, dims: NetDims) -> u64;
}

struct DenseFactory;
struct LstmFactory;

impl NetworkFactory for DenseFactory {
    fn kind(&self) -> ModelKind {
        ModelKind::Dnn
    }
    fn param_count(&self, d: NetDims) -> usize {
        DenseParams::param_count(d)
    }
    fn zeros(&self, d: NetDims) -> Box<dyn Network> {
        Box::new(DenseParams::zeros(d))
    }
    fn from_params(&self, d: NetDims, p: Vec<f64>) -> Result<Box<dyn Network>> {
        Ok(Box::new(DenseParams::from_flat(d, p)?))
    }
    fn init(&self, d: NetDims, rng: &mut dyn rand::RngCore) -> Box<dyn Network> {
        Box::new(DenseParams::init(d, rng))
    }
    fn flops(&self, d: NetDims) -> u64 {
        count_flops(ModelKind::Dnn, d.input, d.hidden, d.output)
    }
}

impl NetworkFactory for LstmFactory {
    fn kind(&self) -> ModelKind {
        ModelKind::Lstm
    }
    fn param_count(&self, d: NetDims) -> usize {
        LstmParams::param_count(d)
    }
    fn zeros(&self, d: NetDims) -> Box<dyn Network> {
        Box::new(LstmParams::zeros(d))
    }
    fn from_params(&self, d: NetDims, p: Vec<f64>) -> Result<Box<dyn Network>> {
        Ok(Box::new(LstmParams::from_flat(d, p)?))
    }
    fn init(&self, d: NetDims, rng: &mut dyn rand::RngCore) -> Box<dyn Network> {
        Box::new(LstmParams::init(d, rng))
    }
    fn flops(&self, d: NetDims) -> u64 {
        count_flops(ModelKind::Lstm, d.input, d.hidden, d.output)
    }
}

/// Name-keyed set of architectures.
pub struct NetworkRegistry {
    factories: BTreeMap<&'static str, Box<dyn NetworkFactory>>,
}

impl NetworkRegistry {
    pub fn empty() -> Self {
        NetworkRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, factory: Box<dyn NetworkFactory>) {
        self.factories.insert(factory.kind().name(), factory);
    }

    pub fn get(&self, name: &str) -> Result<&dyn NetworkFactory> {
        self.factories
            .get(name.trim().to_ascii_lowercase().as_str())
            .map(|f| f.as_ref())
            .ok_or_else(|| Error::Config(format!("unknown model kind `{name}`")))
    }

    pub fn for_kind(&self, kind: ModelKind) -> &dyn NetworkFactory {
        self.get(kind.name()).expect("built-in kinds are always registered")
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }
}

impl Default for NetworkRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(DenseFactory));
        r.register(Box::new(LstmFactory));
        r
    }
}

/// Process-wide registry of the built-in architectures.
pub fn registry() -> &'static NetworkRegistry {
    static REGISTRY: OnceLock<NetworkRegistry> = OnceLock::new();
    REGISTRY.get_or_init(NetworkRegistry::default)
}

/// Mean MSE gradient of `model` over `batch`, returned as a network of the
/// same architecture whose parameters hold the gradient.
pub fn gradients<S: Sample>(model: &dyn Network, batch: &[S]) -> Result<Box<dyn Network>> {
    if batch.is_empty() {
        return Err(Error::EmptyData("gradient batch".into()));
    }
    let mut grad = vec![0.0; model.params().len()];
    for s in batch {
        model.backprop(s.input(), s.target(), &mut grad)?;
    }
    let inv = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    registry().for_kind(model.kind()).from_params(model.dims(), grad)
}

/// `(1/T) Σ (target − pred)²`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::dims(
            format!("{} non-empty targets", pred.len()),
            format!("{} targets", target.len()),
        ));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (t - p) * (t - p)).sum::<f64>() / pred.len() as f64)
}

/// Floating-point operations of one forward pass.
///
/// Dense: `2PD + D + 2DT + T`. LSTM: `P(4(2D + 2D² + D) + 9D) + 2DT + T`,
/// counting per step the four gate affine maps, the elementwise gate and
/// state arithmetic, then the linear head.
pub fn count_flops(kind: ModelKind, p: usize, d: usize, t: usize) -> u64 {
    let (p, d, t) = (p as u64, d as u64, t as u64);
    let head = 2 * d * t + t;
    match kind {
        ModelKind::Dnn => 2 * p * d + d + head,
        ModelKind::Lstm => p * (4 * (2 * d + 2 * d * d + d) + 9 * d) + head,
    }
}

pub(crate) fn uniform_fill(buf: &mut [f64], bound: f64, rng: &mut dyn rand::RngCore) {
    for v in buf {
        *v = rng.gen_range(-bound..=bound);
    }
}

pub(crate) fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::dims(format!("{what} of length {expected}"), format!("length {found}")))
    }
}
