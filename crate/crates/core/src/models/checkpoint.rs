//! Checkpoint files: `SCK1` magic line, one JSON header line (model spec, training config,
//! loss traces, tensor table), then the named tensors as little-endian `f32`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sarcolor_autodiff::{AdamConfig, AdamState, ParamSet, RunningStats, Shape, Tensor};

use super::cnn::{cnn_layout, CnnSpec};
use super::config::TrainConfig;
use super::gan::{discriminator_layout, generator_layout, GanSpec};
use super::net::{Layout, Network};
use super::train::TrainTrace;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "SCK1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn(CnnSpec),
    Cgan(GanSpec),
}

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub config: TrainConfig,
    /// The CNN itself, or the GAN generator.
    pub generator: Network,
    pub discriminator: Option<Network>,
    pub adam_g: Option<AdamState<f32>>,
    pub adam_d: Option<AdamState<f32>>,
    pub trace: TrainTrace,
}

impl Checkpoint {
    pub fn method_name(&self) -> &'static str {
        match self.kind {
            ModelKind::Cnn(_) => "cnn",
            ModelKind::Cgan(_) => "cgan",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: [usize; 4],
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamHeader {
    config_lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BnHeader {
    momentum: f32,
    eps: f32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: ModelKind,
    config: TrainConfig,
    seed: u64,
    bit_depth: u32,
    batch_norm: Vec<BnHeader>,
    adam_g: Option<AdamHeader>,
    adam_d: Option<AdamHeader>,
    trace: TrainTrace,
    tensors: Vec<TensorEntry>,
}

struct Writer {
    entries: Vec<TensorEntry>,
    payload: Vec<u8>,
}

impl Writer {
    fn push(&mut self, name: String, shape: Shape, data: &[f32]) {
        self.entries.push(TensorEntry {
            name,
            shape: shape.dims(),
            offset: self.payload.len(),
        });
        for v in data {
            self.payload.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn network(&mut self, prefix: &str, net: &Network, bn: &mut Vec<BnHeader>) {
        for (name, t) in net.params.iter() {
            self.push(format!("{prefix}/{name}"), t.shape(), t.data());
        }
        for (name, s) in net.bn_names.iter().zip(&net.bn_stats) {
            let shape = Shape::new(1, s.mean.len(), 1, 1);
            self.push(format!("{prefix}/{name}.running_mean"), shape, &s.mean);
            self.push(format!("{prefix}/{name}.running_var"), shape, &s.var);
            bn.push(BnHeader {
                momentum: s.momentum,
                eps: s.eps,
            });
        }
    }

    fn adam(&mut self, prefix: &str, net: &Network, adam: &AdamState<f32>) -> AdamHeader {
        for (i, (name, t)) in net.params.iter().enumerate() {
            if !adam.m[i].is_empty() {
                self.push(format!("{prefix}/m/{name}"), t.shape(), &adam.m[i]);
                self.push(format!("{prefix}/v/{name}"), t.shape(), &adam.v[i]);
            }
        }
        AdamHeader {
            config_lr: adam.config.lr,
            beta1: adam.config.beta1,
            beta2: adam.config.beta2,
            eps: adam.config.eps,
            step: adam.step,
        }
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut w = Writer {
        entries: Vec::new(),
        payload: Vec::new(),
    };
    let mut bn = Vec::new();
    w.network("generator", &ckpt.generator, &mut bn);
    if let Some(d) = &ckpt.discriminator {
        w.network("discriminator", d, &mut bn);
    }
    let adam_g = ckpt.adam_g.as_ref().map(|a| w.adam("adam_g", &ckpt.generator, a));
    let adam_d = match (&ckpt.adam_d, &ckpt.discriminator) {
        (Some(a), Some(d)) => Some(w.adam("adam_d", d, a)),
        _ => None,
    };
    let header = Header {
        kind: ckpt.kind.clone(),
        config: ckpt.config.clone(),
        seed: ckpt.config.seed,
        bit_depth: ckpt.config.bit_depth,
        batch_norm: bn,
        adam_g,
        adam_d,
        trace: ckpt.trace.clone(),
        tensors: w.entries,
    };
    let mut out = format!("{CHECKPOINT_MAGIC}\n{}\n", serde_json::to_string(&header).expect("header serializes")).into_bytes();
    out.extend_from_slice(&w.payload);
    out
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}

struct Reader<'a> {
    tensors: HashMap<&'a str, (Shape, &'a [u8])>,
    bn: std::slice::Iter<'a, BnHeader>,
}

impl Reader<'_> {
    fn take(&mut self, name: &str, shape: Shape) -> Result<Vec<f32>> {
        let (s, bytes) = self
            .tensors
            .remove(name)
            .ok_or_else(|| invalid(format!("missing tensor {name}")))?;
        if s != shape {
            return Err(invalid(format!("tensor {name} has shape {s}, expected {shape}")));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value in {name}")));
        }
        Ok(data)
    }

    fn network(&mut self, prefix: &str, layout: &Layout) -> Result<Network> {
        let mut params = ParamSet::new();
        for (name, shape, _) in &layout.params {
            let data = self.take(&format!("{prefix}/{name}"), *shape)?;
            params.add(name.clone(), Tensor::from_vec(*shape, data)?);
        }
        let mut bn_stats = Vec::new();
        for (name, c) in &layout.bns {
            let shape = Shape::new(1, *c, 1, 1);
            let mean = self.take(&format!("{prefix}/{name}.running_mean"), shape)?;
            let var = self.take(&format!("{prefix}/{name}.running_var"), shape)?;
            let h = self.bn.next().ok_or_else(|| invalid("missing batch-norm settings"))?;
            bn_stats.push(RunningStats {
                mean,
                var,
                momentum: h.momentum,
                eps: h.eps,
            });
        }
        Ok(Network {
            params,
            bn_names: layout.bns.iter().map(|(n, _)| n.clone()).collect(),
            bn_stats,
        })
    }

    fn adam(&mut self, prefix: &str, net: &Network, h: &AdamHeader) -> Result<AdamState<f32>> {
        let config = AdamConfig {
            lr: h.config_lr,
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.eps,
        };
        let mut state = AdamState::new(config, &net.params);
        state.step = h.step;
        for (i, (name, t)) in net.params.iter().enumerate() {
            let m_name = format!("{prefix}/m/{name}");
            if self.tensors.contains_key(m_name.as_str()) {
                state.m[i] = self.take(&m_name, t.shape())?;
                state.v[i] = self.take(&format!("{prefix}/v/{name}"), t.shape())?;
            }
        }
        Ok(state)
    }
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let at = bytes.iter().position(|&b| b == b'\n')?;
    Some((&bytes[..at], &bytes[at + 1..]))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let (magic, rest) = split_line(bytes).ok_or_else(|| invalid("missing magic line"))?;
    if magic != CHECKPOINT_MAGIC.as_bytes() {
        return Err(Error::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: String::from_utf8_lossy(&magic[..magic.len().min(16)]).into_owned(),
        });
    }
    let (head, payload) = split_line(rest).ok_or_else(|| invalid("missing header line"))?;
    let header: Header = serde_json::from_slice(head).map_err(|e| invalid(format!("header: {e}")))?;
    header.config.validate()?;

    let (gen_layout, disc_layout) = match &header.kind {
        ModelKind::Cnn(spec) => {
            spec.validate()?;
            (cnn_layout(spec), None)
        }
        ModelKind::Cgan(spec) => {
            spec.validate()?;
            (generator_layout(spec), Some(discriminator_layout(spec)))
        }
    };

    // The tensor table must tile the payload exactly, in order.
    let mut tensors = HashMap::new();
    let mut at = 0usize;
    for e in &header.tensors {
        let shape = Shape::new(e.shape[0], e.shape[1], e.shape[2], e.shape[3]);
        let len = e
            .shape
            .iter()
            .try_fold(4usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| invalid("tensor size overflows"))?;
        if e.offset != at {
            return Err(invalid(format!("tensor {} is not contiguous", e.name)));
        }
        let end = at.checked_add(len).filter(|&end| end <= payload.len()).ok_or(Error::TruncatedPayload {
            expected: at.saturating_add(len),
            found: payload.len(),
        })?;
        if tensors.insert(e.name.as_str(), (shape, &payload[at..end])).is_some() {
            return Err(Error::DuplicateId(e.name.clone()));
        }
        at = end;
    }
    if at != payload.len() {
        return Err(Error::TrailingBytes(payload.len() - at));
    }

    let mut r = Reader {
        tensors,
        bn: header.batch_norm.iter(),
    };
    let generator = r.network("generator", &gen_layout)?;
    let discriminator = disc_layout.as_ref().map(|l| r.network("discriminator", l)).transpose()?;
    let adam_g = header.adam_g.as_ref().map(|h| r.adam("adam_g", &generator, h)).transpose()?;
    let adam_d = match (&header.adam_d, &discriminator) {
        (Some(h), Some(d)) => Some(r.adam("adam_d", d, h)?),
        (None, _) => None,
        (Some(_), None) => return Err(invalid("optimizer state for a missing discriminator")),
    };
    if let Some(name) = r.tensors.keys().next() {
        return Err(invalid(format!("unexpected tensor {name}")));
    }
    if r.bn.next().is_some() {
        return Err(invalid("extra batch-norm settings"));
    }
    Ok(Checkpoint {
        kind: header.kind,
        config: header.config,
        generator,
        discriminator,
        adam_g,
        adam_d,
        trace: header.trace,
    })
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(ckpt)).map_err(|e| Error::io(path, e))
}
