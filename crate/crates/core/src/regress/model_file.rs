//! `.scm` model files: a magic line, one JSON header line, then little-endian `f64`
//! coefficients.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{param_count, Dense, MlpModel, Standardizer};
use super::{LinearModel, SpectralModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "SCM1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    method: String,
    dtype: String,
    count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    with_bias: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layer_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden_activation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_activation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Header {
    fn new(method: &str, count: usize) -> Self {
        Header {
            method: method.into(),
            dtype: "f64".into(),
            count,
            with_bias: None,
            layer_sizes: None,
            hidden_activation: None,
            output_activation: None,
            seed: None,
        }
    }
}

pub fn encode_model(model: &SpectralModel) -> Vec<u8> {
    let (header, values) = match model {
        SpectralModel::NoCol => (Header::new("nocol", 0), Vec::new()),
        SpectralModel::Linear(m) => {
            let mut h = Header::new("lr", 6);
            h.with_bias = Some(m.with_bias);
            (h, m.weights.iter().chain(&m.biases).copied().collect())
        }
        SpectralModel::Mlp(m) => {
            let mut values = vec![m.input.mean, m.input.std];
            for s in &m.output {
                values.extend([s.mean, s.std]);
            }
            values.extend(m.parameters());
            let mut h = Header::new("nl", values.len());
            h.layer_sizes = Some(m.layer_sizes().to_vec());
            h.hidden_activation = Some("tansig".into());
            h.output_activation = Some("identity".into());
            h.seed = Some(m.seed);
            (h, values)
        }
    };
    let mut out = format!("{MODEL_MAGIC}\n{}\n", serde_json::to_string(&header).expect("header serializes")).into_bytes();
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let at = bytes.iter().position(|&b| b == b'\n')?;
    Some((&bytes[..at], &bytes[at + 1..]))
}

pub fn decode_model(bytes: &[u8]) -> Result<SpectralModel> {
    let (magic, rest) = split_line(bytes).ok_or_else(|| invalid("missing magic line"))?;
    if magic != MODEL_MAGIC.as_bytes() {
        return Err(Error::BadMagic {
            expected: MODEL_MAGIC,
            found: String::from_utf8_lossy(&magic[..magic.len().min(16)]).into_owned(),
        });
    }
    let (head, payload) = split_line(rest).ok_or_else(|| invalid("missing header line"))?;
    let header: Header = serde_json::from_slice(head).map_err(|e| invalid(format!("header: {e}")))?;
    if header.dtype != "f64" {
        return Err(invalid(format!("unsupported dtype {:?}", header.dtype)));
    }
    let expected = header.count.checked_mul(8).ok_or_else(|| invalid("coefficient count overflows"))?;
    if payload.len() != expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    match header.method.as_str() {
        "nocol" if header.count == 0 => Ok(SpectralModel::NoCol),
        "lr" if header.count == 6 => {
            let with_bias = header.with_bias.ok_or_else(|| invalid("linear model without bias flag"))?;
            let (w, b) = values.split_at(3);
            if !with_bias && b.iter().any(|&v| v != 0.0) {
                return Err(invalid("nonzero bias in a no-bias model"));
            }
            Ok(SpectralModel::Linear(LinearModel {
                weights: [w[0], w[1], w[2]],
                biases: [b[0], b[1], b[2]],
                with_bias,
            }))
        }
        "nl" => decode_mlp(&header, &values),
        m => Err(invalid(format!("unknown method {m:?} with {} coefficients", header.count))),
    }
}

fn decode_mlp(header: &Header, values: &[f64]) -> Result<SpectralModel> {
    if header.hidden_activation.as_deref() != Some("tansig") || header.output_activation.as_deref() != Some("identity") {
        return Err(invalid("only tansig hidden and identity output layers are supported"));
    }
    let sizes = header.layer_sizes.as_deref().ok_or_else(|| invalid("missing layer sizes"))?;
    if sizes.len() < 3 || sizes[0] != 1 || sizes[sizes.len() - 1] != 3 {
        return Err(invalid("layer sizes must run from 1 input to 3 outputs"));
    }
    let hidden = &sizes[1..sizes.len() - 1];
    super::mlp::validate_hidden(hidden)?;
    if hidden.iter().any(|&h| h > 4096) {
        return Err(invalid("hidden layer too wide"));
    }
    if values.len() != 8 + param_count(sizes) {
        return Err(invalid("coefficient count does not match layer sizes"));
    }
    let st = |i: usize| Standardizer {
        mean: values[2 * i],
        std: values[2 * i + 1],
    };
    let mut at = 8;
    let layers = sizes
        .windows(2)
        .map(|w| {
            let nw = w[0] * w[1];
            let d = Dense {
                weights: values[at..at + nw].to_vec(),
                biases: values[at + nw..at + nw + w[1]].to_vec(),
            };
            at += nw + w[1];
            d
        })
        .collect();
    let model = MlpModel::new(hidden, layers, st(0), [st(1), st(2), st(3)], header.seed.unwrap_or(0))?;
    Ok(SpectralModel::Mlp(model))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SpectralModel> {
    let path = path.as_ref();
    decode_model(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_model(model: &SpectralModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let lr = SpectralModel::Linear(LinearModel {
            weights: [1.5, -0.25, 3.0],
            biases: [10.0, 0.1, -7.0],
            with_bias: true,
        });
        let nl = SpectralModel::Mlp(MlpModel::random(&[1, 3, 1], 9).unwrap());
        for m in [SpectralModel::NoCol, lr, nl] {
            assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
        }
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_model(&SpectralModel::Mlp(MlpModel::random(&[2], 1).unwrap()));
        assert!(matches!(decode_model(b"XXXX\n{}\n"), Err(Error::BadMagic { .. })));
        assert!(matches!(decode_model(&bytes[..bytes.len() - 3]), Err(Error::TruncatedPayload { .. })));
        let text = String::from_utf8_lossy(&bytes).replace("[1,2,3]", "[1,2,2,2,2,3]");
        assert!(decode_model(text.as_bytes()).is_err());
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_model(&nan), Err(Error::NonFinite(_))));
    }
}
