//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! offset  size      field
//! 0       7         magic "SUFTNN1" (the trailing '1' is the format version)
//! 7       1         activation code (0 = relu, 1 = tanh)
//! 8       4         layer count L (u32)
//! 12      4*L       layer sizes (u32 each)
//! 12+4L   8*P       weights (f64 each), P = sum n_l*n_{l+1} + n_{l+1}
//! ```

use std::fs;
use std::io;
use std::path::Path;

use super::{Activation, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"SUFTNN1";
const MAGIC_PREFIX: &[u8] = b"SUFTNN";
const VERSION: u8 = b'1';

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("unsupported checkpoint version {found:?} (expected {expected:?})")]
    Version { found: char, expected: char },
}

fn parse_err(offset: usize, reason: impl Into<String>) -> CheckpointError {
    CheckpointError::Parse {
        offset,
        reason: reason.into(),
    }
}

impl Mlp {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.layer_sizes().len() + 8 * self.weights().len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(self.activation().code());
        out.extend_from_slice(&(self.layer_sizes().len() as u32).to_le_bytes());
        for &n in self.layer_sizes() {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for w in self.weights() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(7, "magic")?;
        if &magic[..6] != MAGIC_PREFIX {
            return Err(parse_err(0, "bad magic"));
        }
        if magic[6] != VERSION {
            return Err(CheckpointError::Version {
                found: magic[6] as char,
                expected: VERSION as char,
            });
        }
        let code_at = r.pos;
        let code = r.take(1, "activation code")?[0];
        let activation = Activation::from_code(code)
            .ok_or_else(|| parse_err(code_at, format!("unknown activation code {code}")))?;
        let count_at = r.pos;
        let count = r.u32("layer count")? as usize;
        if count < 2 {
            return Err(parse_err(count_at, format!("layer count {count} < 2")));
        }
        let mut sizes = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let at = r.pos;
            let n = r.u32("layer size")? as usize;
            if n == 0 {
                return Err(parse_err(at, "zero layer size"));
            }
            sizes.push(n);
        }
        let n_params = Mlp::param_count(&sizes);
        let mut weights = Vec::with_capacity(n_params.min(bytes.len() / 8));
        for _ in 0..n_params {
            let b = r.take(8, "weight")?;
            weights.push(f64::from_le_bytes(b.try_into().unwrap()));
        }
        if r.pos != bytes.len() {
            return Err(parse_err(r.pos, "trailing bytes after weights"));
        }
        Mlp::from_weights(&sizes, activation, weights).map_err(|e| parse_err(0, e.to_string()))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(parse_err(
                self.pos,
                format!("truncated while reading {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn save_weights(net: &Mlp, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    fs::write(path, net.to_bytes())?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Mlp, CheckpointError> {
    Mlp::from_bytes(&fs::read(path)?)
}
