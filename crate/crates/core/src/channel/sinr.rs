//! Linear MMSE post-equalization SINR per layer and RB.

use num_complex::Complex64;

use crate::{Error, Result};

/// Maximum tolerated condition number of the layer Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Linear SINR per `[layer][rb]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrGrid {
    pub gamma: Vec<f64>,
    pub n_layers: usize,
    pub n_rb: usize,
}

impl SinrGrid {
    pub fn new(gamma: Vec<f64>, n_layers: usize, n_rb: usize) -> Result<Self> {
        if gamma.len() != n_layers * n_rb || gamma.is_empty() {
            return Err(Error::dims(
                format!("{n_layers}x{n_rb} non-empty grid"),
                format!("{} values", gamma.len()),
            ));
        }
        if let Some(bad) = gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidParameter(format!("SINR {bad} is not finite and positive")));
        }
        Ok(SinrGrid { gamma, n_layers, n_rb })
    }

    /// Grid with every entry equal to `value`.
    pub fn constant(value: f64, n_layers: usize, n_rb: usize) -> Result<Self> {
        Self::new(vec![value; n_layers * n_rb], n_layers, n_rb)
    }

    pub fn at(&self, layer: usize, rb: usize) -> f64 {
        self.gamma[layer * self.n_rb + rb]
    }

    pub fn min(&self) -> f64 {
        self.gamma.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-layer MMSE SINR `1/[(I + ρ HᴴH)⁻¹]_ll − 1` for the `[rx][tx]` matrix
/// `h`. Layer `l` is carried by transmit antenna `l`; only the first
/// `n_layers` columns take part.
pub fn per_rb_sinr(
    h: &[Complex64],
    n_rx: usize,
    n_tx: usize,
    snr_linear: f64,
    n_layers: usize,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n_layers];
    per_rb_sinr_into(h, n_rx, n_tx, snr_linear, &mut out)?;
    Ok(out)
}

/// [`per_rb_sinr`] writing one SINR per element of `out`.
pub fn per_rb_sinr_into(
    h: &[Complex64],
    n_rx: usize,
    n_tx: usize,
    snr_linear: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = out.len();
    if h.len() != n_rx * n_tx {
        return Err(Error::dims(format!("{n_rx}x{n_tx} matrix"), format!("{} entries", h.len())));
    }
    if n == 0 || n > n_rx.min(n_tx) {
        return Err(Error::InvalidParameter(format!(
            "{n} layers do not fit a {n_rx}x{n_tx} channel"
        )));
    }
    if !(snr_linear > 0.0 && snr_linear.is_finite()) {
        return Err(Error::InvalidParameter(format!("SNR must be positive, got {snr_linear}")));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut stack = [zero; 3 * STACK_DIM * STACK_DIM];
    let mut heap = Vec::new();
    let buf: &mut [Complex64] = if n <= STACK_DIM {
        &mut stack[..3 * n * n]
    } else {
        heap.resize(3 * n * n, zero);
        &mut heap
    };
    let (gram, rest) = buf.split_at_mut(n * n);
    let (work, inv) = rest.split_at_mut(n * n);

    for i in 0..n {
        for j in i..n {
            let mut acc = zero;
            for r in 0..n_rx {
                acc += h[r * n_tx + i].conj() * h[r * n_tx + j];
            }
            gram[i * n + j] = acc;
            gram[j * n + i] = acc.conj();
        }
    }

    work.copy_from_slice(gram);
    let cond = if hpd_inverse(work, inv, n) {
        norm1(gram, n) * norm1(inv, n)
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::DegenerateChannel(cond));
    }

    for (w, g) in work.iter_mut().zip(gram.iter()) {
        *w = g * snr_linear;
    }
    for i in 0..n {
        work[i * n + i] += 1.0;
    }
    if !hpd_inverse(work, inv, n) {
        return Err(Error::DegenerateChannel(f64::INFINITY));
    }
    for (l, o) in out.iter_mut().enumerate() {
        *o = (1.0 / inv[l * n + l].re - 1.0).max(f64::MIN_POSITIVE);
    }
    Ok(())
}

/// SINR grid of a whole slot response laid out `[rb][rx][tx]`.
pub fn slot_sinr_grid(
    slot: &[Complex64],
    n_rb: usize,
    n_rx: usize,
    n_tx: usize,
    snr_linear: f64,
    n_layers: usize,
) -> Result<SinrGrid> {
    let m = n_rx * n_tx;
    if slot.len() != n_rb * m {
        return Err(Error::dims(format!("{n_rb} RBs of {n_rx}x{n_tx}"), format!("{} entries", slot.len())));
    }
    let mut gamma = vec![0.0; n_layers * n_rb];
    let mut layer = vec![0.0; n_layers];
    for rb in 0..n_rb {
        per_rb_sinr_into(&slot[rb * m..(rb + 1) * m], n_rx, n_tx, snr_linear, &mut layer)?;
        for (l, v) in layer.iter().enumerate() {
            gamma[l * n_rb + rb] = *v;
        }
    }
    SinrGrid::new(gamma, n_layers, n_rb)
}

const STACK_DIM: usize = 8;

fn norm1(a: &[Complex64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a Hermitian positive-definite matrix through its Cholesky
/// factor. `a` is overwritten with L⁻¹ (lower triangle). Returns `false` if
/// the matrix is not numerically positive definite.
fn hpd_inverse(a: &mut [Complex64], inv: &mut [Complex64], n: usize) -> bool {
    let zero = Complex64::new(0.0, 0.0);
    // In-place Cholesky, lower triangle.
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / d;
        }
    }
    // L⁻¹ in place by forward substitution.
    for j in 0..n {
        a[j * n + j] = a[j * n + j].inv();
        for i in j + 1..n {
            let mut s = zero;
            for k in j..i {
                s -= a[i * n + k] * a[k * n + j];
            }
            a[i * n + j] = s * a[i * n + i].inv();
        }
    }
    // A⁻¹ = L⁻ᴴ L⁻¹.
    for i in 0..n {
        for j in 0..=i {
            let mut s = zero;
            for k in i..n {
                s += a[k * n + i].conj() * a[k * n + j];
            }
            inv[i * n + j] = s;
            inv[j * n + i] = s.conj();
        }
    }
    true
}
