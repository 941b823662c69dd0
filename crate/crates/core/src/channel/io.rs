//! Binary export of channel realizations.
//!
//! Layout (little endian): magic `CHSS`, `u32` version, `u32` n_slots,
//! n_rb, n_rx, n_tx, then `(re, im)` f64 pairs in `[slot][rb][rx][tx]`
//! order. Subcarrier spacing is not stored and is restored as 15 kHz.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::fading::ChannelSlotSeries;
use crate::{Error, Result};

pub const CHSS_MAGIC: &[u8; 4] = b"CHSS";
pub const CHSS_VERSION: u32 = 1;

fn fmt_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "CHSS",
        reason: reason.into(),
    }
}

pub fn write_chss<W: Write>(series: &ChannelSlotSeries, mut w: W) -> std::io::Result<()> {
    w.write_all(CHSS_MAGIC)?;
    w.write_all(&CHSS_VERSION.to_le_bytes())?;
    for d in [series.n_slots, series.n_rb, series.n_rx, series.n_tx] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for z in &series.h {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_chss<R: Read>(mut r: R) -> Result<ChannelSlotSeries> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| fmt_err(e.to_string()))?;
    if buf.len() < 24 || &buf[..4] != CHSS_MAGIC {
        return Err(fmt_err("missing CHSS header"));
    }
    let word = |i: usize| u32::from_le_bytes(buf[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    if word(0) != CHSS_VERSION {
        return Err(fmt_err(format!("unsupported version {}", word(0))));
    }
    let (n_slots, n_rb, n_rx, n_tx) = (word(1) as usize, word(2) as usize, word(3) as usize, word(4) as usize);
    let count = n_slots * n_rb * n_rx * n_tx;
    let body = &buf[24..];
    if body.len() != count * 16 {
        return Err(fmt_err(format!("expected {} payload bytes, found {}", count * 16, body.len())));
    }
    let h = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(ChannelSlotSeries {
        h,
        n_slots,
        n_rb,
        n_rx,
        n_tx,
        scs_hz: 15e3,
    })
}
