use std::sync::Arc;

use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Ordered, named parameter tensors of one model.
///
/// Tensors are shared with the graphs they are attached to, so attaching is free and
/// updating after the graph is dropped does not copy.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Arc<Tensor<T>>>,
}

impl<T: Scalar> PartialEq for ParamSet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a == b)
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(Arc::new(tensor));
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.tensors.iter().map(|t| t.as_ref()))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Mutable access; clones the tensor only if a graph still holds it.
    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        Arc::make_mut(&mut self.tensors[id.0])
    }

    /// Replace a tensor by name, keeping the shape contract.
    pub fn replace(&mut self, id: ParamId, tensor: Tensor<T>) -> Result<()> {
        let old = self.tensors[id.0].shape();
        if old != tensor.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "replace",
                left: old,
                right: tensor.shape(),
            });
        }
        self.tensors[id.0] = Arc::new(tensor);
        Ok(())
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Insert every parameter into `graph` as a leaf.
    pub fn attach(&self, graph: &mut Graph<T>, requires_grad: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| graph.leaf_shared(Arc::clone(t), requires_grad))
            .collect()
    }

    /// Gradients of attached parameters after `graph.backward`; `None` where nothing flowed.
    pub fn grads<'g>(&self, graph: &'g Graph<T>, vars: &[Var]) -> Result<Vec<Option<&'g [T]>>> {
        if vars.len() != self.len() {
            return Err(AutodiffError::ParamCount {
                expected: self.len(),
                got: vars.len(),
            });
        }
        Ok(vars.iter().map(|&v| graph.grad(v)).collect())
    }

    /// Owned gradients; consuming the graph releases its references to the parameters, so a
    /// following optimizer step updates them in place instead of copying.
    pub fn take_grads(&self, mut graph: Graph<T>, vars: &[Var]) -> Result<Vec<Option<Vec<T>>>> {
        if vars.len() != self.len() {
            return Err(AutodiffError::ParamCount {
                expected: self.len(),
                got: vars.len(),
            });
        }
        Ok(vars.iter().map(|&v| graph.take_grad(v)).collect())
    }
}
