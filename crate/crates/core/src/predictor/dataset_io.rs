//! Window datasets on disk.
//!
//! `WSMP` layout (little endian): magic, `u32` version, `u64` n_samples,
//! `u32` P, `u32` T_CSI, then per sample `u64` anchor slot, `P+1` f64
//! inputs and `T_CSI−1` f64 targets.

use std::io::{Read, Write};

use super::WindowSample;
use crate::{Error, Result};

pub const WSMP_MAGIC: &[u8; 4] = b"WSMP";
pub const WSMP_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4;

fn fmt_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "WSMP",
        reason: reason.into(),
    }
}

fn shape(samples: &[WindowSample], p: usize, t_csi: usize) -> std::io::Result<()> {
    for s in samples {
        if s.x.len() != p + 1 || s.y.len() + 1 != t_csi {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("sample at slot {} does not match P={p} T_CSI={t_csi}", s.anchor_slot),
            ));
        }
    }
    Ok(())
}

pub fn write_windows<W: Write>(samples: &[WindowSample], p: usize, t_csi: usize, mut w: W) -> std::io::Result<()> {
    shape(samples, p, t_csi)?;
    w.write_all(WSMP_MAGIC)?;
    w.write_all(&WSMP_VERSION.to_le_bytes())?;
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    w.write_all(&(p as u32).to_le_bytes())?;
    w.write_all(&(t_csi as u32).to_le_bytes())?;
    for s in samples {
        w.write_all(&(s.anchor_slot as u64).to_le_bytes())?;
        for v in s.x.iter().chain(&s.y) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

/// Returns the samples with their `(P, T_CSI)`.
pub fn read_windows<R: Read>(mut r: R) -> Result<(Vec<WindowSample>, usize, usize)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| fmt_err(e.to_string()))?;
    if buf.len() < HEADER_LEN || &buf[..4] != WSMP_MAGIC {
        return Err(fmt_err("missing WSMP header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    if u32_at(4) != WSMP_VERSION {
        return Err(fmt_err(format!("unsupported version {}", u32_at(4))));
    }
    let n = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let (p, t) = (u32_at(16) as usize, u32_at(20) as usize);
    if t < 2 {
        return Err(fmt_err(format!("t_csi {t} leaves no targets")));
    }
    let per = 8 * (1 + p + 1 + t - 1);
    let body = &buf[HEADER_LEN..];
    if body.len() != n * per {
        return Err(fmt_err(format!("expected {} payload bytes, found {}", n * per, body.len())));
    }
    let samples = body
        .chunks_exact(per)
        .map(|c| {
            let anchor = u64::from_le_bytes(c[..8].try_into().unwrap()) as usize;
            let vals: Vec<f64> = c[8..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
            WindowSample {
                x: vals[..=p].to_vec(),
                y: vals[p + 1..].to_vec(),
                anchor_slot: anchor,
            }
        })
        .collect();
    Ok((samples, p, t))
}

/// One row per sample: `anchor_slot,x0..xP,y1..y(T−1)`.
pub fn write_windows_csv<W: Write>(samples: &[WindowSample], p: usize, t_csi: usize, mut w: W) -> std::io::Result<()> {
    shape(samples, p, t_csi)?;
    let mut header = vec!["anchor_slot".to_string()];
    header.extend((0..=p).map(|k| format!("x{k}")));
    header.extend((1..t_csi).map(|k| format!("y{k}")));
    writeln!(w, "{}", header.join(","))?;
    for s in samples {
        write!(w, "{}", s.anchor_slot)?;
        for v in s.x.iter().chain(&s.y) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<WindowSample> {
        (0..3)
            .map(|k| WindowSample {
                x: vec![k as f64, 0.5, -1.25],
                y: vec![7.0, k as f64 / 3.0],
                anchor_slot: 6 + 3 * k,
            })
            .collect()
    }

    #[test]
    fn binary_round_trip() {
        let s = samples();
        let mut bytes = Vec::new();
        write_windows(&s, 2, 3, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"WSMP");
        assert_eq!(bytes.len(), HEADER_LEN + 3 * 8 * 6);
        let (back, p, t) = read_windows(&bytes[..]).unwrap();
        assert_eq!((p, t), (2, 3));
        assert_eq!(back, s);
        assert!(read_windows(&bytes[..bytes.len() - 1]).is_err());
        assert!(write_windows(&s, 3, 3, Vec::new()).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut out = Vec::new();
        write_windows_csv(&samples(), 2, 3, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "anchor_slot,x0,x1,x2,y1,y2");
        assert_eq!(lines[1], "6,0,0.5,-1.25,7,0");
        assert_eq!(lines.len(), 4);
    }
}
