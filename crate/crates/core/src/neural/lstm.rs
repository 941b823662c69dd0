use super::{check_len, uniform_fill, ModelKind, NetDims, Network};
use crate::{Error, Result};

/// Gate blocks in the order they appear in every gate-shaped buffer.
const GATES: usize = 4;
const I: usize = 0;
const F: usize = 1;
const O: usize = 2;
const G: usize = 3;

/// Single-layer LSTM over a scalar sequence with a linear head on the last
/// hidden state.
///
/// Flat layout, gate order `i, f, o, g` inside each `4D` block:
/// `w_x` (`4D`), `w_h` (`D × 4D`, row `j` holds the weights from `h_j`),
/// `b` (`4D`), `head_w` (`T × D`), `head_b` (`T`).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    dims: NetDims,
    data: Vec<f64>,
}

struct Offsets {
    wh: usize,
    b: usize,
    head_w: usize,
    head_b: usize,
}

/// Activations of a whole unroll, kept for backpropagation. Row `s` of
/// `h`/`c` is the state before step `s`; row `len` is the final state.
struct Trace {
    len: usize,
    h: Vec<f64>,
    c: Vec<f64>,
    /// Post-activation gates, `4D` per step.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl LstmParams {
    pub fn param_count(d: NetDims) -> usize {
        let h = d.hidden;
        GATES * h + h * GATES * h + GATES * h + d.output * h + d.output
    }

    pub fn zeros(dims: NetDims) -> Self {
        LstmParams {
            dims,
            data: vec![0.0; Self::param_count(dims)],
        }
    }

    pub fn from_flat(dims: NetDims, data: Vec<f64>) -> Result<Self> {
        check_len("lstm parameter buffer", Self::param_count(dims), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite lstm parameter".into()));
        }
        Ok(LstmParams { dims, data })
    }

    /// Gate weights uniform(±1/√(1+D)), head uniform(±1/√D), zero biases
    /// except the forget gate at +1.
    pub fn init(dims: NetDims, rng: &mut dyn rand::RngCore) -> Self {
        let mut p = Self::zeros(dims);
        let d = dims.hidden;
        let o = p.offsets();
        let gate_bound = 1.0 / ((1 + d) as f64).sqrt();
        uniform_fill(&mut p.data[..o.b], gate_bound, rng);
        p.data[o.b + F * d..o.b + (F + 1) * d].fill(1.0);
        uniform_fill(&mut p.data[o.head_w..o.head_b], 1.0 / (d as f64).sqrt(), rng);
        p
    }

    fn offsets(&self) -> Offsets {
        let h = self.dims.hidden;
        let wh = GATES * h;
        let b = wh + h * GATES * h;
        let head_w = b + GATES * h;
        let head_b = head_w + self.dims.output * h;
        Offsets { wh, b, head_w, head_b }
    }

    pub fn w_x(&self) -> &[f64] {
        &self.data[..self.offsets().wh]
    }

    pub fn w_h(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o.wh..o.b]
    }

    pub fn bias(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o.b..o.head_w]
    }

    pub fn head_w(&self) -> &[f64] {
        let o = self.offsets();
        &self.data[o.head_w..o.head_b]
    }

    pub fn head_b(&self) -> &[f64] {
        &self.data[self.offsets().head_b..]
    }

    /// Mutable views of `(w_x, w_h, b, head_w, head_b)`.
    #[allow(clippy::type_complexity)]
    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
        let o = self.offsets();
        let (wx, rest) = self.data.split_at_mut(o.wh);
        let (wh, rest) = rest.split_at_mut(o.b - o.wh);
        let (b, rest) = rest.split_at_mut(o.head_w - o.b);
        let (hw, hb) = rest.split_at_mut(o.head_b - o.head_w);
        (wx, wh, b, hw, hb)
    }

    /// Post-activation gates for one step, written into `a` (`4D`).
    fn gates_into(&self, x: f64, h_prev: &[f64], a: &mut [f64]) {
        let d = self.dims.hidden;
        let (wx, wh, b) = (self.w_x(), self.w_h(), self.bias());
        for ((ak, bk), wk) in a.iter_mut().zip(b).zip(wx) {
            *ak = bk + wk * x;
        }
        for (&hj, row) in h_prev.iter().zip(wh.chunks_exact(GATES * d)) {
            for (ak, w) in a.iter_mut().zip(row) {
                *ak += w * hj;
            }
        }
        for ak in &mut a[..G * d] {
            *ak = sigmoid(*ak);
        }
        for ak in &mut a[G * d..] {
            *ak = ak.tanh();
        }
    }

    fn head(&self, h: &[f64]) -> Vec<f64> {
        let d = self.dims.hidden;
        let hw = self.head_w();
        self.head_b()
            .iter()
            .enumerate()
            .map(|(k, b)| b + hw[k * d..(k + 1) * d].iter().zip(h).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    fn run(&self, window: &[f64]) -> Trace {
        let d = self.dims.hidden;
        let len = window.len();
        let mut t = Trace {
            len,
            h: vec![0.0; (len + 1) * d],
            c: vec![0.0; (len + 1) * d],
            gates: vec![0.0; len * GATES * d],
            tanh_c: vec![0.0; len * d],
        };
        // `window` is newest first.
        for (s, &x) in window.iter().rev().enumerate() {
            let (h_done, h_next) = t.h.split_at_mut((s + 1) * d);
            let (c_done, c_next) = t.c.split_at_mut((s + 1) * d);
            let (h_prev, c_prev) = (&h_done[s * d..], &c_done[s * d..]);
            let g = &mut t.gates[s * GATES * d..(s + 1) * GATES * d];
            self.gates_into(x, h_prev, g);
            let tc = &mut t.tanh_c[s * d..(s + 1) * d];
            for k in 0..d {
                let c = g[F * d + k] * c_prev[k] + g[I * d + k] * g[G * d + k];
                c_next[k] = c;
                tc[k] = c.tanh();
                h_next[k] = g[O * d + k] * tc[k];
            }
        }
        t
    }
}

/// One cell update from `(h_prev, c_prev)` with scalar input `x_t`.
pub fn lstm_step(params: &LstmParams, x_t: f64, h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = params.dims.hidden;
    check_len("lstm hidden state", d, h_prev.len())?;
    check_len("lstm cell state", d, c_prev.len())?;
    let mut g = vec![0.0; GATES * d];
    params.gates_into(x_t, h_prev, &mut g);
    let c: Vec<f64> = (0..d).map(|k| g[F * d + k] * c_prev[k] + g[I * d + k] * g[G * d + k]).collect();
    let h = (0..d).map(|k| g[O * d + k] * c[k].tanh()).collect();
    Ok((h, c))
}

/// Runs the cell over `window` (given newest first, consumed oldest first)
/// from zero states and applies the head to the final hidden state.
pub fn lstm_forward(params: &LstmParams, window: &[f64]) -> Result<Vec<f64>> {
    check_len("lstm input window", params.dims.input, window.len())?;
    let t = params.run(window);
    let d = params.dims.hidden;
    Ok(params.head(&t.h[t.len * d..]))
}

impl Network for LstmParams {
    fn kind(&self) -> ModelKind {
        ModelKind::Lstm
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
        lstm_forward(self, window)
    }

    fn backprop(&self, window: &[f64], target: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_len("lstm input window", self.dims.input, window.len())?;
        check_len("lstm target", self.dims.output, target.len())?;
        check_len("lstm gradient buffer", self.data.len(), grad.len())?;
        let d = self.dims.hidden;
        let t = self.dims.output;
        let o = self.offsets();

        let tr = self.run(window);
        let h = &tr.h[tr.len * d..];
        let y = self.head(h);
        let scale = 2.0 / t as f64;
        let loss = y.iter().zip(target).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() / t as f64;

        let hw = self.head_w();
        let mut dh = vec![0.0; d];
        for k in 0..t {
            let dy = scale * (y[k] - target[k]);
            grad[o.head_b + k] += dy;
            let row = &hw[k * d..(k + 1) * d];
            let grow = &mut grad[o.head_w + k * d..o.head_w + (k + 1) * d];
            for j in 0..d {
                grow[j] += dy * h[j];
                dh[j] += dy * row[j];
            }
        }

        let wh = self.w_h();
        let mut dc = vec![0.0; d];
        let mut da = vec![0.0; GATES * d];
        let (g_wx, rest) = grad.split_at_mut(o.wh);
        let (g_wh, rest) = rest.split_at_mut(o.b - o.wh);
        let g_b = &mut rest[..GATES * d];
        for (s, &x) in window.iter().enumerate() {
            // Step index in time order; `window` is newest first.
            let step = tr.len - 1 - s;
            let gt = &tr.gates[step * GATES * d..(step + 1) * GATES * d];
            let tcs = &tr.tanh_c[step * d..(step + 1) * d];
            let c_prev = &tr.c[step * d..(step + 1) * d];
            let h_prev = &tr.h[step * d..(step + 1) * d];
            for k in 0..d {
                let (i, f, og, g) = (gt[I * d + k], gt[F * d + k], gt[O * d + k], gt[G * d + k]);
                let tc = tcs[k];
                let dct = dc[k] + dh[k] * og * (1.0 - tc * tc);
                da[I * d + k] = dct * g * i * (1.0 - i);
                da[F * d + k] = dct * c_prev[k] * f * (1.0 - f);
                da[O * d + k] = dh[k] * tc * og * (1.0 - og);
                da[G * d + k] = dct * i * (1.0 - g * g);
                dc[k] = dct * f;
            }
            for ((gx, gb), &a) in g_wx.iter_mut().zip(g_b.iter_mut()).zip(&da) {
                *gx += a * x;
                *gb += a;
            }
            for ((dhj, &hp), (grow, wrow)) in dh
                .iter_mut()
                .zip(h_prev)
                .zip(g_wh.chunks_exact_mut(GATES * d).zip(wh.chunks_exact(GATES * d)))
            {
                for (gw, &a) in grow.iter_mut().zip(&da) {
                    *gw += a * hp;
                }
                *dhj = dot(wrow, &da);
            }
        }
        Ok(loss)
    }

    fn boxed_clone(&self) -> Box<dyn Network> {
        Box::new(self.clone())
    }
}
