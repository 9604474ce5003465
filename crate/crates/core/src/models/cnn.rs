use serde::{Deserialize, Serialize};
use sarcolor_autodiff::{BatchNormMode, Graph, Scalar, Var};

use super::net::{Bound, Init, Layout, Network};
use crate::error::{Error, Result};

/// Stack of stride-1, same-padded convolutions with ReLU between layers and a linear last
/// layer producing the three color bands.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnSpec {
    pub kernels: Vec<usize>,
    pub filters: Vec<usize>,
}

impl CnnSpec {
    pub fn new(kernels: &[usize], filters: &[usize]) -> Result<Self> {
        let spec = CnnSpec {
            kernels: kernels.to_vec(),
            filters: filters.to_vec(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("cnn spec: {m}")));
        if self.kernels.is_empty() || self.kernels.len() != self.filters.len() {
            return bad("kernel and filter lists must be non-empty and of equal length".into());
        }
        if let Some(k) = self.kernels.iter().find(|&&k| k % 2 == 0) {
            return bad(format!("kernel size {k} is even; same padding needs odd kernels"));
        }
        if self.filters.contains(&0) {
            return bad("zero filters in a layer".into());
        }
        if self.kernels.len() > 32 || self.kernels.iter().any(|&k| k > 63) || self.filters.iter().any(|&f| f > 4096) {
            return bad("layer count, kernel size or width beyond supported limits".into());
        }
        if self.filters.last() != Some(&3) {
            return bad(format!("last layer must have 3 filters, got {}", self.filters.last().unwrap()));
        }
        Ok(())
    }

    /// `k9-5-1-5_n64-32-32-3` style label.
    pub fn label(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
        format!("k{}_n{}", join(&self.kernels), join(&self.filters))
    }
}

impl Default for CnnSpec {
    fn default() -> Self {
        CnnSpec {
            kernels: vec![9, 5, 1, 5],
            filters: vec![64, 32, 32, 3],
        }
    }
}

pub fn build_cnn(spec: &CnnSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    Ok(cnn_layout(spec).materialize(seed, Init::FanIn))
}

pub(crate) fn cnn_layout(spec: &CnnSpec) -> Layout {
    let mut b = Layout::default();
    let mut c_in = 1;
    for (i, (&k, &f)) in spec.kernels.iter().zip(&spec.filters).enumerate() {
        b.conv(&format!("conv{}", i + 1), c_in, f, k, true, false);
        c_in = f;
    }
    b
}

/// `x` is `(n, 1, h, w)`; the result is `(n, 3, h, w)`.
pub fn cnn_forward<T: Scalar>(spec: &CnnSpec, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
    let mut bound = Bound::new(vars, &mut [], BatchNormMode::Eval);
    let mut h = x;
    let last = spec.kernels.len() - 1;
    for (i, &k) in spec.kernels.iter().enumerate() {
        h = bound.conv(g, h, true, 1, (k - 1) / 2)?;
        if i != last {
            h = g.relu(h);
        }
    }
    bound.finish();
    Ok(h)
}
