use super::{check_len, uniform_fill, ModelKind, NetDims, Network};
use crate::{Error, Result};

/// One hidden ReLU layer and a linear output layer.
///
/// Flat layout: `w1` (`D×P`, row major), `b1` (`D`), `w2` (`T×D`), `b2` (`T`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    dims: NetDims,
    data: Vec<f64>,
}

impl DenseParams {
    pub fn param_count(d: NetDims) -> usize {
        d.hidden * d.input + d.hidden + d.output * d.hidden + d.output
    }

    pub fn zeros(dims: NetDims) -> Self {
        DenseParams {
            dims,
            data: vec![0.0; Self::param_count(dims)],
        }
    }

    pub fn from_flat(dims: NetDims, data: Vec<f64>) -> Result<Self> {
        check_len("dense parameter buffer", Self::param_count(dims), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite dense parameter".into()));
        }
        Ok(DenseParams { dims, data })
    }

    /// Uniform(±1/√fan_in) weights, zero biases.
    pub fn init(dims: NetDims, rng: &mut dyn rand::RngCore) -> Self {
        let mut p = Self::zeros(dims);
        let (o1, _, o2, _) = p.offsets();
        let (w1_len, w2_len) = (dims.hidden * dims.input, dims.output * dims.hidden);
        uniform_fill(&mut p.data[o1..o1 + w1_len], 1.0 / (dims.input as f64).sqrt(), rng);
        uniform_fill(&mut p.data[o2..o2 + w2_len], 1.0 / (dims.hidden as f64).sqrt(), rng);
        p
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let d = self.dims;
        let w1 = 0;
        let b1 = w1 + d.hidden * d.input;
        let w2 = b1 + d.hidden;
        let b2 = w2 + d.output * d.hidden;
        (w1, b1, w2, b2)
    }

    pub fn w1(&self) -> &[f64] {
        let (o, e, _, _) = self.offsets();
        &self.data[o..e]
    }

    pub fn b1(&self) -> &[f64] {
        let (_, o, e, _) = self.offsets();
        &self.data[o..e]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, _, o, e) = self.offsets();
        &self.data[o..e]
    }

    pub fn b2(&self) -> &[f64] {
        let (_, _, _, o) = self.offsets();
        &self.data[o..]
    }

    /// Mutable views of `(w1, b1, w2, b2)`.
    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
        let (_, b1, w2, b2) = self.offsets();
        let (w1s, rest) = self.data.split_at_mut(b1);
        let (b1s, rest) = rest.split_at_mut(w2 - b1);
        let (w2s, b2s) = rest.split_at_mut(b2 - w2);
        (w1s, b1s, w2s, b2s)
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let (p, w1, b1) = (self.dims.input, self.w1(), self.b1());
        b1.iter()
            .enumerate()
            .map(|(j, b)| b + w1[j * p..(j + 1) * p].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    fn head(&self, h: &[f64]) -> Vec<f64> {
        let (d, w2) = (self.dims.hidden, self.w2());
        self.b2()
            .iter()
            .enumerate()
            .map(|(k, b)| b + w2[k * d..(k + 1) * d].iter().zip(h).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

/// `W2 · ReLU(W1 x + b1) + b2`.
pub fn dense_forward(params: &DenseParams, x: &[f64]) -> Result<Vec<f64>> {
    check_len("dense input", params.dims.input, x.len())?;
    let h: Vec<f64> = params.hidden_pre(x).into_iter().map(|z| z.max(0.0)).collect();
    Ok(params.head(&h))
}

impl Network for DenseParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Dnn
    }

    fn dims(&self) -> NetDims {
        self.dims
    }

    fn params(&self) -> &[f64] {
        &self.data
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn forward(&self, window: &[f64]) -> Result<Vec<f64>> {
        dense_forward(self, window)
    }

    fn backprop(&self, x: &[f64], target: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_len("dense input", self.dims.input, x.len())?;
        check_len("dense target", self.dims.output, target.len())?;
        check_len("dense gradient buffer", self.data.len(), grad.len())?;
        let NetDims {
            input: p,
            hidden: d,
            output: t,
        } = self.dims;
        let z = self.hidden_pre(x);
        let h: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        let y = self.head(&h);

        let scale = 2.0 / t as f64;
        let dy: Vec<f64> = y.iter().zip(target).map(|(y, t)| scale * (y - t)).collect();
        let loss = y.iter().zip(target).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() / t as f64;

        let (_, o_b1, o_w2, o_b2) = self.offsets();
        let w2 = self.w2();
        let mut dz = vec![0.0; d];
        for k in 0..t {
            grad[o_b2 + k] += dy[k];
            let row = o_w2 + k * d;
            for j in 0..d {
                grad[row + j] += dy[k] * h[j];
                dz[j] += dy[k] * w2[k * d + j];
            }
        }
        for j in 0..d {
            if z[j] <= 0.0 {
                continue;
            }
            grad[o_b1 + j] += dz[j];
            for i in 0..p {
                grad[j * p + i] += dz[j] * x[i];
            }
        }
        Ok(loss)
    }

    fn boxed_clone(&self) -> Box<dyn Network> {
        Box::new(self.clone())
    }
}
