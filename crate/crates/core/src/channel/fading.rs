//! Sum-of-sinusoids Clarke fading applied to a TDL profile.
//!
//! Every (rx, tx, tap) triple carries an independent unit-power process
//!
//! ```text
//! g(t) = N^{-1/2} Σ_n exp(j(2π f_D cos α_n t + φ_n)),   α_n = π(n + θ)/N
//! ```
//!
//! with one random rotation θ ∈ [0, 1) and N random phases per process. The
//! arrival angles cover the half circle evenly, which keeps every sinusoid on
//! a distinct Doppler frequency and makes the time-averaged autocorrelation of
//! a single realization converge to J₀(2π f_D τ). The LOS tap of a Rician
//! profile adds a specular component at f_D cos(π/4).
//!
//! The per-RB response at slot q is `H[n] = Σ_l √p_l g_l(q T) exp(-j2π f_n τ_l)`
//! evaluated at the centre subcarrier of each 12-subcarrier RB.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::profile::TapProfile;
use crate::{Error, Result};

pub const SINUSOIDS_PER_TAP: usize = 32;
pub const SUBCARRIERS_PER_RB: usize = 12;
/// Arrival angle of the specular LOS component.
pub const LOS_ANGLE: f64 = FRAC_PI_4;

// Phasor recursion is re-anchored to exact phases this often.
const REANCHOR_SLOTS: u64 = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct FadingConfig {
    pub doppler_hz: f64,
    pub n_slots: usize,
    pub slot_duration_s: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_rb: usize,
    pub scs_hz: f64,
    pub seed: u64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        FadingConfig {
            doppler_hz: 10.0,
            n_slots: 1000,
            slot_duration_s: 1e-3,
            n_tx: 4,
            n_rx: 4,
            n_rb: 52,
            scs_hz: 15e3,
            seed: 0,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.doppler_hz >= 0.0 && self.doppler_hz.is_finite()) {
            return bad(format!("doppler must be >= 0, got {}", self.doppler_hz));
        }
        if self.n_slots == 0 || self.n_tx == 0 || self.n_rx == 0 || self.n_rb == 0 {
            return bad("slot, antenna and RB counts must be >= 1".into());
        }
        if !(self.slot_duration_s > 0.0 && self.scs_hz > 0.0) {
            return bad("slot duration and subcarrier spacing must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct TapProcess {
    // Phase advance per slot (rad) and initial phase of each sinusoid.
    step: [f64; SINUSOIDS_PER_TAP],
    phase: [f64; SINUSOIDS_PER_TAP],
    los: Option<Specular>,
}

#[derive(Debug, Clone, Copy)]
struct Specular {
    los_amp: f64,
    diffuse_amp: f64,
    step: f64,
    phase: f64,
}

/// Streaming TDL MIMO channel. Slot responses are generated on demand so
/// arbitrarily long realizations never need to be held in memory.
#[derive(Debug, Clone)]
pub struct FadingChannel {
    n_rx: usize,
    n_tx: usize,
    n_rb: usize,
    n_taps: usize,
    processes: Vec<TapProcess>,
    // [rb][tap], includes the tap amplitude √p_l.
    steering: Vec<Complex64>,
}

impl FadingChannel {
    pub fn new(profile: &TapProfile, cfg: &FadingConfig) -> Result<Self> {
        cfg.validate()?;
        let n_taps = profile.taps.len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let w_max = TAU * cfg.doppler_hz * cfg.slot_duration_s;
        let k = profile.k_factor_linear();

        let mut processes = Vec::with_capacity(cfg.n_rx * cfg.n_tx * n_taps);
        for _ in 0..cfg.n_rx * cfg.n_tx {
            for tap in &profile.taps {
                let theta: f64 = rng.gen();
                let mut step = [0.0; SINUSOIDS_PER_TAP];
                let mut phase = [0.0; SINUSOIDS_PER_TAP];
                for n in 0..SINUSOIDS_PER_TAP {
                    let alpha = PI * (n as f64 + theta) / SINUSOIDS_PER_TAP as f64;
                    step[n] = w_max * alpha.cos();
                    phase[n] = rng.gen::<f64>() * TAU;
                }
                let los_phase = rng.gen::<f64>() * TAU;
                let los = (tap.is_los && k > 0.0).then(|| Specular {
                    los_amp: (k / (k + 1.0)).sqrt(),
                    diffuse_amp: (1.0 / (k + 1.0)).sqrt(),
                    step: w_max * LOS_ANGLE.cos(),
                    phase: los_phase,
                });
                processes.push(TapProcess { step, phase, los });
            }
        }

        let delays: Vec<f64> = profile.delays_s().collect();
        let mut steering = Vec::with_capacity(cfg.n_rb * n_taps);
        for rb in 0..cfg.n_rb {
            let f = rb_center_offset_hz(rb, cfg.n_rb, cfg.scs_hz);
            for (tap, tau) in profile.taps.iter().zip(&delays) {
                steering.push(Complex64::from_polar(
                    tap.linear_power().sqrt(),
                    -TAU * f * tau,
                ));
            }
        }

        Ok(FadingChannel {
            n_rx: cfg.n_rx,
            n_tx: cfg.n_tx,
            n_rb: cfg.n_rb,
            n_taps,
            processes,
            steering,
        })
    }

    pub fn n_rb(&self) -> usize {
        self.n_rb
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    /// Number of complex entries in one slot response.
    pub fn slot_len(&self) -> usize {
        self.n_rb * self.n_rx * self.n_tx
    }

    /// Exact unit-power gain of one tap process at slot `q`.
    pub fn tap_gain(&self, rx: usize, tx: usize, tap: usize, q: u64) -> Complex64 {
        let p = &self.processes[(rx * self.n_tx + tx) * self.n_taps + tap];
        exact_gain(p, q as f64)
    }

    /// Exact per-RB response at slot `q`, laid out `[rb][rx][tx]`.
    pub fn slot(&self, q: u64) -> Vec<Complex64> {
        let gains: Vec<Complex64> = self.processes.iter().map(|p| exact_gain(p, q as f64)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.slot_len()];
        self.frequency_response(&gains, &mut out);
        out
    }

    /// Sequential generator starting at slot `start`; cheaper than repeated
    /// [`FadingChannel::slot`] calls.
    pub fn stream(&self, start: u64) -> SlotStream<'_> {
        let n_proc = self.processes.len();
        let total = n_proc * SINUSOIDS_PER_TAP;
        let mut s = SlotStream {
            chan: self,
            next_q: start,
            rot_re: vec![0.0; total],
            rot_im: vec![0.0; total],
            ph_re: vec![0.0; total],
            ph_im: vec![0.0; total],
            sum_re: vec![0.0; n_proc],
            sum_im: vec![0.0; n_proc],
            los_rot: Vec::new(),
            los_ph: Vec::new(),
            gains: vec![Complex64::new(0.0, 0.0); n_proc],
        };
        for (i, p) in self.processes.iter().enumerate() {
            for (n, w) in p.step.iter().enumerate() {
                s.rot_re[n * n_proc + i] = w.cos();
                s.rot_im[n * n_proc + i] = w.sin();
            }
            if let Some(l) = p.los {
                s.los_rot.push(Complex64::from_polar(1.0, l.step));
            }
        }
        s.anchor();
        s
    }

    fn frequency_response(&self, gains: &[Complex64], out: &mut [Complex64]) {
        let pairs = self.n_rx * self.n_tx;
        let mut g_re = vec![0.0; self.n_taps * pairs];
        let mut g_im = vec![0.0; self.n_taps * pairs];
        for (p, g) in gains.iter().enumerate() {
            let (pair, tap) = (p / self.n_taps, p % self.n_taps);
            g_re[tap * pairs + pair] = g.re;
            g_im[tap * pairs + pair] = g.im;
        }
        let mut acc_re = vec![0.0; pairs];
        let mut acc_im = vec![0.0; pairs];
        for (rb, row) in out.chunks_exact_mut(pairs).enumerate() {
            acc_re.fill(0.0);
            acc_im.fill(0.0);
            for tap in 0..self.n_taps {
                let s = self.steering[rb * self.n_taps + tap];
                let gr = &g_re[tap * pairs..(tap + 1) * pairs];
                let gi = &g_im[tap * pairs..(tap + 1) * pairs];
                for k in 0..pairs {
                    acc_re[k] += gr[k] * s.re - gi[k] * s.im;
                    acc_im[k] += gr[k] * s.im + gi[k] * s.re;
                }
            }
            for (o, (r, i)) in row.iter_mut().zip(acc_re.iter().zip(&acc_im)) {
                *o = Complex64::new(*r, *i);
            }
        }
    }
}

fn exact_gain(p: &TapProcess, q: f64) -> Complex64 {
    let scale = (SINUSOIDS_PER_TAP as f64).sqrt().recip();
    let diffuse: Complex64 = p
        .step
        .iter()
        .zip(&p.phase)
        .map(|(&w, &phi)| Complex64::from_polar(1.0, w * q + phi))
        .sum::<Complex64>()
        * scale;
    match p.los {
        None => diffuse,
        Some(l) => Complex64::from_polar(l.los_amp, l.step * q + l.phase) + diffuse * l.diffuse_amp,
    }
}

/// Centre frequency of RB `rb` relative to the carrier.
pub fn rb_center_offset_hz(rb: usize, n_rb: usize, scs_hz: f64) -> f64 {
    let half = (n_rb * SUBCARRIERS_PER_RB) as f64 / 2.0;
    ((rb * SUBCARRIERS_PER_RB) as f64 + SUBCARRIERS_PER_RB as f64 / 2.0 - half) * scs_hz
}

/// Sequential slot generator returned by [`FadingChannel::stream`].
///
/// Sinusoid phasors are advanced by complex rotation each slot and reset to
/// exactly evaluated phases every few hundred slots.
pub struct SlotStream<'a> {
    chan: &'a FadingChannel,
    next_q: u64,
    rot_re: Vec<f64>,
    rot_im: Vec<f64>,
    ph_re: Vec<f64>,
    ph_im: Vec<f64>,
    sum_re: Vec<f64>,
    sum_im: Vec<f64>,
    los_rot: Vec<Complex64>,
    los_ph: Vec<Complex64>,
    gains: Vec<Complex64>,
}

impl SlotStream<'_> {
    // Phasor buffers are laid out [sinusoid][process].
    fn anchor(&mut self) {
        let q = self.next_q as f64;
        let n_proc = self.chan.processes.len();
        for (i, p) in self.chan.processes.iter().enumerate() {
            for (n, (&w, &phi)) in p.step.iter().zip(&p.phase).enumerate() {
                let (s, c) = (w * q + phi).sin_cos();
                self.ph_re[n * n_proc + i] = c;
                self.ph_im[n * n_proc + i] = s;
            }
        }
        self.los_ph.clear();
        for l in self.chan.processes.iter().filter_map(|p| p.los) {
            self.los_ph.push(Complex64::from_polar(1.0, l.step * q + l.phase));
        }
    }

    pub fn next_slot(&self) -> u64 {
        self.next_q
    }

    /// Writes the response of the next slot into `out` (`[rb][rx][tx]`) and
    /// returns its index.
    pub fn fill_next(&mut self, out: &mut [Complex64]) -> u64 {
        debug_assert_eq!(out.len(), self.chan.slot_len());
        let q = self.next_q;
        if q % REANCHOR_SLOTS == 0 {
            self.anchor();
        }
        let n_proc = self.chan.processes.len();
        self.sum_re.fill(0.0);
        self.sum_im.fill(0.0);
        for (re, im) in self
            .ph_re
            .chunks_exact(n_proc)
            .zip(self.ph_im.chunks_exact(n_proc))
        {
            for k in 0..n_proc {
                self.sum_re[k] += re[k];
                self.sum_im[k] += im[k];
            }
        }
        let scale = (SINUSOIDS_PER_TAP as f64).sqrt().recip();
        let mut los_idx = 0;
        for (i, p) in self.chan.processes.iter().enumerate() {
            let diffuse = Complex64::new(self.sum_re[i], self.sum_im[i]) * scale;
            self.gains[i] = match p.los {
                None => diffuse,
                Some(l) => {
                    let v = self.los_ph[los_idx] * l.los_amp + diffuse * l.diffuse_amp;
                    los_idx += 1;
                    v
                }
            };
        }
        for (((re, im), cr), ci) in self
            .ph_re
            .iter_mut()
            .zip(self.ph_im.iter_mut())
            .zip(&self.rot_re)
            .zip(&self.rot_im)
        {
            let (a, b) = (*re, *im);
            *re = a * cr - b * ci;
            *im = a * ci + b * cr;
        }
        for (z, r) in self.los_ph.iter_mut().zip(&self.los_rot) {
            *z *= r;
        }
        self.chan.frequency_response(&self.gains, out);
        self.next_q += 1;
        q
    }
}

/// Fully materialized channel realization, indexed `[slot][rb][rx][tx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSlotSeries {
    pub h: Vec<Complex64>,
    pub n_slots: usize,
    pub n_rb: usize,
    pub n_rx: usize,
    pub n_tx: usize,
    pub scs_hz: f64,
}

impl ChannelSlotSeries {
    pub fn get(&self, q: usize, rb: usize, rx: usize, tx: usize) -> Complex64 {
        self.h[((q * self.n_rb + rb) * self.n_rx + rx) * self.n_tx + tx]
    }

    /// The `[rx][tx]` matrix of one RB at one slot.
    pub fn rb_matrix(&self, q: usize, rb: usize) -> &[Complex64] {
        let m = self.n_rx * self.n_tx;
        let start = (q * self.n_rb + rb) * m;
        &self.h[start..start + m]
    }

    pub fn slot(&self, q: usize) -> &[Complex64] {
        let len = self.n_rb * self.n_rx * self.n_tx;
        &self.h[q * len..(q + 1) * len]
    }
}

/// Generates `cfg.n_slots` slots of `profile` fading.
pub fn generate_fading(profile: &TapProfile, cfg: &FadingConfig) -> Result<ChannelSlotSeries> {
    let chan = FadingChannel::new(profile, cfg)?;
    let len = chan.slot_len();
    let mut h = vec![Complex64::new(0.0, 0.0); len * cfg.n_slots];
    let mut stream = chan.stream(0);
    for chunk in h.chunks_exact_mut(len) {
        stream.fill_next(chunk);
    }
    Ok(ChannelSlotSeries {
        h,
        n_slots: cfg.n_slots,
        n_rb: cfg.n_rb,
        n_rx: cfg.n_rx,
        n_tx: cfg.n_tx,
        scs_hz: cfg.scs_hz,
    })
}
