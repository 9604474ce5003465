use crate::error::{AutodiffError, Result};
use crate::params::ParamSet;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    /// `beta1 = 0.5` as in adversarial image-to-image training.
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers for every tensor of one [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<P: Scalar>(config: AdamConfig, params: &ParamSet<P>) -> Self {
        let zeros = |_| Vec::new();
        AdamState {
            config,
            step: 0,
            m: (0..params.len()).map(zeros).collect(),
            v: (0..params.len()).map(zeros).collect(),
        }
    }

    /// One bias-corrected Adam update. Parameters whose gradient is `None` are untouched,
    /// moments included.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Option<&[T]>]) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(AutodiffError::ParamCount {
                expected: params.len(),
                got: grads.len(),
            });
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let bc1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
        let bc2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.eps);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let id = crate::params::ParamId(i);
            let p = params.get_mut(id);
            let n = p.len();
            if g.len() != n {
                return Err(AutodiffError::ParamCount {
                    expected: n,
                    got: g.len(),
                });
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            if m.is_empty() {
                *m = vec![T::zero(); n];
                *v = vec![T::zero(); n];
            }
            for (((pj, &gj), mj), vj) in p.data_mut().iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mj = b1 * *mj + (one - b1) * gj;
                *vj = b2 * *vj + (one - b2) * gj * gj;
                let mhat = *mj / bc1;
                let vhat = *vj / bc2;
                *pj -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
