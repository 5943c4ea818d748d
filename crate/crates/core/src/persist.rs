//! Model persistence: the `M01V` ensemble blob.
//!
//! Every trained artifact is stored as a vote ensemble (a single model is an
//! ensemble of one). The format keeps attacks exactly reproducible from a
//! file: magic, a kind tag, the member count and input dimension, then per
//! member its seed and little-endian 32-bit parameter arrays.
//!
//! ```text
//! bytes 0-3:  "M01V"
//! byte  4:    kind (0 = scd01, 1 = mlp01, 2 = svm, 3 = mlp)
//! bytes 5-8:  n_members (LE u32)
//! bytes 9-12: d          (LE u32)
//! then per member:
//!   seed (LE u64), then parameters as LE f32:
//!     linear (scd01/svm): d weights, then the threshold
//!     mlp01: k (LE u32); k hidden columns of d weights; k hidden biases;
//!            k output weights; output bias
//!     mlp:   n_layers (LE u32); per layer: in_dim, out_dim (LE u32),
//!            out_dim x in_dim weights row-major, out_dim biases
//! ```

use std::fs;
use std::path::Path;

use crate::convex::{DenseLayer, SigmoidMlpModel};
use crate::error::{Error, Result};
use crate::loss::LinearModel;
use crate::mlp01::Mlp01Model;
use crate::vote::{Classifier, VoteEnsemble};

const BLOB_MAGIC: &[u8; 4] = b"M01V";

/// Which trainer produced a stored ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Scd01,
    Mlp01,
    Svm,
    Mlp,
}

impl ModelKind {
    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Scd01 => 0,
            ModelKind::Mlp01 => 1,
            ModelKind::Svm => 2,
            ModelKind::Mlp => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelKind::Scd01),
            1 => Ok(ModelKind::Mlp01),
            2 => Ok(ModelKind::Svm),
            3 => Ok(ModelKind::Mlp),
            other => Err(Error::format(format!("unknown model kind tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Scd01 => "scd01",
            ModelKind::Mlp01 => "mlp01",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }
}

/// A stored ensemble of any supported kind.
#[derive(Debug, Clone)]
pub enum EnsembleBlob {
    Scd01(VoteEnsemble<LinearModel>),
    Mlp01(VoteEnsemble<Mlp01Model>),
    Svm(VoteEnsemble<LinearModel>),
    Mlp(VoteEnsemble<SigmoidMlpModel>),
}

impl EnsembleBlob {
    pub fn kind(&self) -> ModelKind {
        match self {
            EnsembleBlob::Scd01(_) => ModelKind::Scd01,
            EnsembleBlob::Mlp01(_) => ModelKind::Mlp01,
            EnsembleBlob::Svm(_) => ModelKind::Svm,
            EnsembleBlob::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EnsembleBlob::Scd01(e) | EnsembleBlob::Svm(e) => e.dim(),
            EnsembleBlob::Mlp01(e) => e.dim(),
            EnsembleBlob::Mlp(e) => e.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EnsembleBlob::Scd01(e) | EnsembleBlob::Svm(e) => e.len(),
            EnsembleBlob::Mlp01(e) => e.len(),
            EnsembleBlob::Mlp(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn member_seeds(&self) -> &[u64] {
        match self {
            EnsembleBlob::Scd01(e) | EnsembleBlob::Svm(e) => &e.member_seeds,
            EnsembleBlob::Mlp01(e) => &e.member_seeds,
            EnsembleBlob::Mlp(e) => &e.member_seeds,
        }
    }

    pub fn predict(&self, x: &[f32]) -> i8 {
        match self {
            EnsembleBlob::Scd01(e) | EnsembleBlob::Svm(e) => e.predict(x),
            EnsembleBlob::Mlp01(e) => e.predict(x),
            EnsembleBlob::Mlp(e) => e.predict(x),
        }
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32_slice(&mut self, values: &[f64]) {
        for &v in values {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

/// Serializes an ensemble to blob bytes. Parameters are rounded to f32.
pub fn blob_bytes(blob: &EnsembleBlob) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(BLOB_MAGIC);
    w.buf.push(blob.kind().tag());
    w.u32(blob.len() as u32);
    w.u32(blob.dim() as u32);
    match blob {
        EnsembleBlob::Scd01(e) | EnsembleBlob::Svm(e) => {
            for (m, &seed) in e.members.iter().zip(&e.member_seeds) {
                w.u64(seed);
                w.f32_slice(&m.w);
                w.f32_slice(&[m.w0]);
            }
        }
        EnsembleBlob::Mlp01(e) => {
            for (m, &seed) in e.members.iter().zip(&e.member_seeds) {
                w.u64(seed);
                w.u32(m.k as u32);
                w.f32_slice(&m.hidden_w);
                w.f32_slice(&m.hidden_b);
                w.f32_slice(&m.out_w);
                w.f32_slice(&[m.out_b]);
            }
        }
        EnsembleBlob::Mlp(e) => {
            for (m, &seed) in e.members.iter().zip(&e.member_seeds) {
                w.u64(seed);
                w.u32(m.layers.len() as u32);
                for layer in &m.layers {
                    w.u32(layer.in_dim as u32);
                    w.u32(layer.out_dim as u32);
                    w.f32_slice(&layer.weights);
                    w.f32_slice(&layer.biases);
                }
            }
        }
    }
    w.buf
}

pub fn save_model(blob: &EnsembleBlob, path: &Path) -> Result<()> {
    Ok(fs::write(path, blob_bytes(blob))?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::length(format!(
                "model blob truncated reading {what} at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64_vec(&mut self, len: usize, what: &str) -> Result<Vec<f64>> {
        let b = self.take(len * 4, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect())
    }
}

/// Parses a model blob.
pub fn parse_model(bytes: &[u8]) -> Result<EnsembleBlob> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != BLOB_MAGIC {
        return Err(Error::format(format!(
            "model blob magic {magic:02x?}, expected {BLOB_MAGIC:02x?}"
        )));
    }
    let kind = ModelKind::from_tag(r.take(1, "kind")?[0])?;
    let n_members = r.u32("member count")? as usize;
    let d = r.u32("dimension")? as usize;
    if n_members == 0 || d == 0 {
        return Err(Error::format(format!(
            "model blob claims {n_members} members, dimension {d}"
        )));
    }

    let mut seeds = Vec::with_capacity(n_members);
    match kind {
        ModelKind::Scd01 | ModelKind::Svm => {
            let mut members = Vec::with_capacity(n_members);
            for _ in 0..n_members {
                seeds.push(r.u64("member seed")?);
                let w = r.f64_vec(d, "linear weights")?;
                let w0 = r.f64_vec(1, "linear threshold")?[0];
                members.push(LinearModel::new(w, w0));
            }
            let e = VoteEnsemble::new(members, seeds)?;
            Ok(match kind {
                ModelKind::Scd01 => EnsembleBlob::Scd01(e),
                _ => EnsembleBlob::Svm(e),
            })
        }
        ModelKind::Mlp01 => {
            let mut members = Vec::with_capacity(n_members);
            for _ in 0..n_members {
                seeds.push(r.u64("member seed")?);
                let k = r.u32("hidden count")? as usize;
                if k == 0 {
                    return Err(Error::format("mlp01 member with zero hidden nodes"));
                }
                members.push(Mlp01Model {
                    hidden_w: r.f64_vec(d * k, "hidden weights")?,
                    hidden_b: r.f64_vec(k, "hidden biases")?,
                    out_w: r.f64_vec(k, "output weights")?,
                    out_b: r.f64_vec(1, "output bias")?[0],
                    d,
                    k,
                });
            }
            Ok(EnsembleBlob::Mlp01(VoteEnsemble::new(members, seeds)?))
        }
        ModelKind::Mlp => {
            let mut members = Vec::with_capacity(n_members);
            for _ in 0..n_members {
                seeds.push(r.u64("member seed")?);
                let n_layers = r.u32("layer count")? as usize;
                if n_layers == 0 {
                    return Err(Error::format("mlp member with zero layers"));
                }
                let mut layers = Vec::with_capacity(n_layers);
                let mut expect_in = d;
                for _ in 0..n_layers {
                    let in_dim = r.u32("layer in_dim")? as usize;
                    let out_dim = r.u32("layer out_dim")? as usize;
                    if in_dim != expect_in {
                        return Err(Error::Consistency(format!(
                            "layer expects {in_dim} inputs, previous layer provides {expect_in}"
                        )));
                    }
                    layers.push(DenseLayer {
                        weights: r.f64_vec(in_dim * out_dim, "layer weights")?,
                        biases: r.f64_vec(out_dim, "layer biases")?,
                        in_dim,
                        out_dim,
                    });
                    expect_in = out_dim;
                }
                if expect_in != 1 {
                    return Err(Error::Consistency(format!(
                        "final layer emits {expect_in} outputs, expected 1"
                    )));
                }
                members.push(SigmoidMlpModel { layers });
            }
            Ok(EnsembleBlob::Mlp(VoteEnsemble::new(members, seeds)?))
        }
    }
}

pub fn load_model(path: &Path) -> Result<EnsembleBlob> {
    parse_model(&fs::read(path)?)
}
