//! Binary model layout, all integers and floats little-endian:
//!
//! ```text
//! magic "ASFN" | version u32 | frequency f64 | n_points u32
//! | encoder layers u32 | head layers u32 | widths u32 ...
//! | per layer: weights (fan_in × fan_out, row-major) f64, biases f64
//! ```

use alloc::format;
use alloc::vec::Vec;

use super::{NetworkConfig, NetworkParams};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"ASFN";
pub const MODEL_VERSION: u32 = 1;

/// Serializes a band model.
pub fn encode(params: &NetworkParams, frequency: f64) -> Vec<u8> {
    let cfg = params.config();
    let mut out = Vec::with_capacity(32 + 8 * params.param_count());
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&frequency.to_le_bytes());
    out.extend_from_slice(&(cfg.n_points as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.encoder.len() as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.head.len() as u32).to_le_bytes());
    for &w in cfg.encoder.iter().chain(&cfg.head) {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::InvalidInput("model file is truncated".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Parses a band model, returning its parameters and frequency.
pub fn decode(bytes: &[u8]) -> Result<(NetworkParams, f64)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take::<4>()? != MODEL_MAGIC {
        return Err(Error::InvalidInput("not a model file (bad magic)".into()));
    }
    let version = r.u32()? as u32;
    if version != MODEL_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported model version {version}"
        )));
    }
    let frequency = r.f64()?;
    let n_points = r.u32()?;
    let n_enc = r.u32()?;
    let n_head = r.u32()?;
    if n_enc + n_head > 64 {
        return Err(Error::InvalidInput("implausible layer count".into()));
    }
    let encoder = (0..n_enc).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let head = (0..n_head).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let cfg = NetworkConfig {
        n_points,
        encoder,
        head,
    };
    cfg.validate()
        .map_err(|e| Error::InvalidInput(format!("bad model header: {e}")))?;
    let n = cfg.param_count();
    if bytes.len() - r.pos != 8 * n {
        return Err(Error::InvalidInput(format!(
            "model body has {} bytes, expected {}",
            bytes.len() - r.pos,
            8 * n
        )));
    }
    let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let params = NetworkParams::from_values(cfg, values)
        .map_err(|e| Error::InvalidInput(format!("bad model body: {e}")))?;
    Ok((params, frequency))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = NetworkConfig {
            n_points: 8,
            encoder: alloc::vec![4, 5],
            head: alloc::vec![3, 16],
        };
        let p = NetworkParams::init(cfg, 3).unwrap();
        let bytes = encode(&p, 500.0);
        let (q, f) = decode(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(f, 500.0);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
    }
}
