//! Binary checkpoint format.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "LOCFAIR\0" | u32 version | u64 input_dim
//! u32 len | metadata TOML (fold, effective config, encoder)
//! u32 count | per network:
//!     u8 len | name | u32 params | per param: u32 rows | u32 cols | f64 data
//!     u64 adam_t | f64 beta1 | f64 beta2 | f64 eps | m matrices | v matrices
//! u32 crc32 of everything above
//! ```

use std::path::Path;

use locfair_core::autodiff::AdamState;
use locfair_core::data::EncoderMeta;
use locfair_core::nn::{Mlp, MlpSpec, ModelBundle, NetId, Network};
use locfair_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io_err, CheckpointError, Error, Result};

pub const MAGIC: &[u8; 8] = b"LOCFAIR\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub run_id: String,
    pub fold: usize,
    pub config: RunConfig,
    pub encoder: Option<EncoderMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub bundle: ModelBundle,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &Matrix) {
    put_u32(out, m.rows() as u32);
    put_u32(out, m.cols() as u32);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_matrices(out: &mut Vec<u8>, ms: &[Matrix]) {
    put_u32(out, ms.len() as u32);
    for m in ms {
        put_matrix(out, m);
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = toml::to_string(&self.meta).map_err(|source| Error::TomlWrite {
            what: "checkpoint metadata",
            source,
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        out.extend_from_slice(&(self.bundle.input_dim as u64).to_le_bytes());
        put_u32(&mut out, meta.len() as u32);
        out.extend_from_slice(meta.as_bytes());
        put_u32(&mut out, NetId::ALL.len() as u32);
        for id in NetId::ALL {
            let net = self.bundle.net(id);
            let name = id.name().as_bytes();
            out.push(name.len() as u8);
            out.extend_from_slice(name);
            put_matrices(&mut out, &net.mlp.params);
            out.extend_from_slice(&net.adam.t.to_le_bytes());
            for v in [net.adam.beta1, net.adam.beta2, net.adam.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            put_matrices(&mut out, &net.adam.m);
            put_matrices(&mut out, &net.adam.v);
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::BadMagic.into());
        }
        let mut r = Reader {
            bytes,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version).into());
        }
        if bytes.len() < r.pos + 4 {
            return Err(CheckpointError::Truncated.into());
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            // A short file almost always fails the checksum; say so when
            // the declared sections cannot fit.
            if r.declared_sections_overrun() {
                return Err(CheckpointError::Truncated.into());
            }
            return Err(CheckpointError::Checksum { stored, computed }.into());
        }
        let mut r = Reader {
            bytes: body,
            pos: r.pos,
        };
        let input_dim = r.u64()? as usize;
        let meta_len = r.u32()? as usize;
        let meta_text = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| CheckpointError::Malformed("metadata is not UTF-8".into()))?;
        let meta: CheckpointMeta = toml::from_str(meta_text).map_err(|source| Error::TomlRead {
            what: "checkpoint metadata".into(),
            source,
        })?;
        let count = r.u32()? as usize;
        if count != NetId::ALL.len() {
            return Err(CheckpointError::Malformed(format!("expected 6 networks, found {count}")).into());
        }
        let mut nets = Vec::with_capacity(count);
        for id in NetId::ALL {
            let len = r.u8()? as usize;
            let name = r.take(len)?;
            if name != id.name().as_bytes() {
                return Err(CheckpointError::Malformed(format!(
                    "expected network {}, found {}",
                    id.name(),
                    String::from_utf8_lossy(name)
                ))
                .into());
            }
            let params = r.matrices()?;
            let t = r.u64()?;
            let (beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?);
            let m = r.matrices()?;
            let v = r.matrices()?;
            let spec = match id {
                NetId::Fa | NetId::Fz => MlpSpec::encoder(input_dim),
                NetId::G => MlpSpec::decoder(input_dim),
                NetId::Ma | NetId::D | NetId::My => MlpSpec::head(),
            };
            nets.push(Network {
                mlp: Mlp { spec, params },
                adam: AdamState {
                    m,
                    v,
                    t,
                    beta1,
                    beta2,
                    eps,
                },
            });
        }
        if r.pos != body.len() {
            return Err(CheckpointError::Malformed("trailing bytes".into()).into());
        }
        let mut it = nets.into_iter();
        let mut next = || it.next().expect("six networks");
        let bundle = ModelBundle {
            input_dim,
            f_a: next(),
            m_a: next(),
            f_z: next(),
            g: next(),
            d: next(),
            m_y: next(),
        };
        bundle.validate()?;
        Ok(Checkpoint { meta, bundle })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(io_err(path))?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn matrix(&mut self) -> Result<Matrix, CheckpointError> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let n = rows.checked_mul(cols).ok_or(CheckpointError::Truncated)?;
        let raw = self.take(n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Matrix::from_vec(rows, cols, data).map_err(|e| CheckpointError::Malformed(e.to_string()))
    }

    fn matrices(&mut self) -> Result<Vec<Matrix>, CheckpointError> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.matrix()).collect()
    }

    /// Whether the header and metadata lengths point past the end of the
    /// buffer, i.e. the file was cut short.
    fn declared_sections_overrun(&self) -> bool {
        let mut probe = Reader {
            bytes: self.bytes,
            pos: self.pos,
        };
        let Ok(_) = probe.u64() else { return true };
        let Ok(len) = probe.u32() else { return true };
        probe.take(len as usize).is_err() || self.bytes.len() < probe.pos + 4 + 4
    }
}
