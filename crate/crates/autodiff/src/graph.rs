use std::sync::Arc;

use crate::conv::{self, ConvGeom};
use crate::error::{AutodiffError, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchNormMode {
    Train,
    Eval,
}

/// Per-channel running mean and variance of a batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Scalar> RunningStats<T> {
    /// Zero mean, unit variance, momentum 0.1, eps 1e-5.
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
            momentum: T::from_f64_lossy(0.1),
            eps: T::from_f64_lossy(1e-5),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Unary {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    BatchNormTrain {
        x: Var,
        gamma: Var,
        beta: Var,
        inv_std: Vec<T>,
        xhat: Vec<T>,
    },
    BatchNormEval {
        x: Var,
        gamma: Var,
        beta: Var,
        inv_std: Vec<T>,
        xhat: Vec<T>,
    },
    Unary {
        x: Var,
        kind: Unary,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        s: T,
    },
    Sum {
        x: Var,
    },
    L1 {
        pred: Var,
        target: Var,
    },
    Mse {
        pred: Var,
        target: Var,
    },
    BceWithLogits {
        logits: Var,
        label: T,
    },
}

struct Node<T> {
    value: Arc<Tensor<T>>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
    op: Op<T>,
}

/// Tape of operations, recorded in execution (hence topological) order.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    backward_done: bool,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.leaf_shared(Arc::new(value), requires_grad)
    }

    pub fn leaf_shared(&mut self, value: Arc<Tensor<T>>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf after [`Graph::backward`].
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Moves a leaf's gradient out of the graph.
    pub fn take_grad(&mut self, v: Var) -> Option<Vec<T>> {
        self.nodes[v.0].grad.take()
    }

    /// Copy of a node's value as a new non-tracked leaf.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = Arc::clone(&self.nodes[v.0].value);
        self.leaf_shared(value, false)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Arc::new(value),
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Shape> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(AutodiffError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(sa)
    }

    fn bias_shape_ok(&self, op: &'static str, b: Option<Var>, channels: usize) -> Result<()> {
        if let Some(b) = b {
            let s = self.shape(b);
            if s.numel() != channels {
                return Err(AutodiffError::ShapeMismatch {
                    op,
                    left: s,
                    right: Shape::new(1, channels, 1, 1),
                });
            }
        }
        Ok(())
    }

    /// Strided, zero-padded 2-D correlation with `(out_c, in_c, k, k)` kernels.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.shape(x);
        let ws = self.shape(w);
        if ws.h != ws.w {
            return Err(AutodiffError::InvalidGeometry {
                op: "conv2d",
                reason: format!("kernel must be square, got {ws}"),
            });
        }
        if ws.c != xs.c {
            return Err(AutodiffError::ChannelMismatch {
                op: "conv2d",
                expected: ws.c,
                got: xs.c,
            });
        }
        self.bias_shape_ok("conv2d", b, ws.n)?;
        let geom = ConvGeom::forward("conv2d", xs.n, xs.c, xs.h, xs.w, ws.h, stride, pad)?;
        let out = conv::conv2d_forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            ws.n,
        );
        let value = Tensor::from_vec(Shape::new(xs.n, ws.n, geom.oh, geom.ow), out)?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(value, Op::Conv2d { x, w, b, geom }, &inputs))
    }

    /// Transposed convolution with `(in_c, out_c, k, k)` kernels: the adjoint of
    /// [`Graph::conv2d`] for the same kernel tensor. Output size is `(h - 1) * stride - 2 * pad + k`.
    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.shape(x);
        let ws = self.shape(w);
        if ws.h != ws.w || stride == 0 {
            return Err(AutodiffError::InvalidGeometry {
                op: "conv_transpose2d",
                reason: format!("square kernel and positive stride required, got {ws}, stride {stride}"),
            });
        }
        if ws.n != xs.c {
            return Err(AutodiffError::ChannelMismatch {
                op: "conv_transpose2d",
                expected: ws.n,
                got: xs.c,
            });
        }
        self.bias_shape_ok("conv_transpose2d", b, ws.c)?;
        let k = ws.h;
        let out_size = |size: usize| -> Result<usize> {
            let full = (size - 1) * stride + k;
            if full <= 2 * pad {
                return Err(AutodiffError::InvalidGeometry {
                    op: "conv_transpose2d",
                    reason: format!("padding {pad} consumes the whole output"),
                });
            }
            Ok(full - 2 * pad)
        };
        let (oh, ow) = (out_size(xs.h)?, out_size(xs.w)?);
        let geom = ConvGeom {
            n: xs.n,
            ch: ws.c,
            ih: oh,
            iw: ow,
            k,
            stride,
            pad,
            oh: xs.h,
            ow: xs.w,
        };
        let out = conv::conv_transpose2d_forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            xs.c,
        );
        let value = Tensor::from_vec(Shape::new(xs.n, ws.c, oh, ow), out)?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(value, Op::ConvTranspose2d { x, w, b, geom }, &inputs))
    }

    /// Per-channel batch normalization. Train mode normalizes with batch statistics and
    /// updates `stats`; eval mode applies the running statistics as a fixed affine map.
    pub fn batch_norm2d(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: &mut RunningStats<T>,
        mode: BatchNormMode,
    ) -> Result<Var> {
        let xs = self.shape(x);
        let c = xs.c;
        for p in [gamma, beta] {
            if self.shape(p).numel() != c {
                return Err(AutodiffError::ShapeMismatch {
                    op: "batch_norm2d",
                    left: self.shape(p),
                    right: Shape::new(1, c, 1, 1),
                });
            }
        }
        if stats.mean.len() != c || stats.var.len() != c {
            return Err(AutodiffError::ShapeMismatch {
                op: "batch_norm2d",
                left: Shape::new(1, stats.mean.len(), 1, 1),
                right: Shape::new(1, c, 1, 1),
            });
        }
        let plane = xs.plane();
        let count = xs.n * plane;
        let xd = self.value(x).data();
        let (mean, var) = match mode {
            BatchNormMode::Train => {
                if count < 2 {
                    return Err(AutodiffError::DegenerateBatchNorm);
                }
                let cnt = T::from_usize(count).unwrap();
                let mean: Vec<T> = conv::channel_sums(xd, xs.n, c, plane)
                    .into_iter()
                    .map(|s| s / cnt)
                    .collect();
                let mut var = vec![T::zero(); c];
                for b in 0..xs.n {
                    for ch in 0..c {
                        let m = mean[ch];
                        var[ch] += xd[(b * c + ch) * plane..(b * c + ch + 1) * plane]
                            .iter()
                            .map(|&v| (v - m) * (v - m))
                            .sum::<T>();
                    }
                }
                var.iter_mut().for_each(|v| *v = *v / cnt);
                let unbias = cnt / (cnt - T::one());
                let mom = stats.momentum;
                for ch in 0..c {
                    stats.mean[ch] = (T::one() - mom) * stats.mean[ch] + mom * mean[ch];
                    stats.var[ch] = (T::one() - mom) * stats.var[ch] + mom * var[ch] * unbias;
                }
                (mean, var)
            }
            BatchNormMode::Eval => (stats.mean.clone(), stats.var.clone()),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + stats.eps).sqrt()).collect();
        let g = self.value(gamma).data();
        let bt = self.value(beta).data();
        let mut xhat = vec![T::zero(); xd.len()];
        let mut out = vec![T::zero(); xd.len()];
        for b in 0..xs.n {
            for ch in 0..c {
                let range = (b * c + ch) * plane..(b * c + ch + 1) * plane;
                for i in range {
                    let h = (xd[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = h;
                    out[i] = g[ch] * h + bt[ch];
                }
            }
        }
        let value = Tensor::from_vec(xs, out)?;
        let op = match mode {
            BatchNormMode::Train => Op::BatchNormTrain {
                x,
                gamma,
                beta,
                inv_std,
                xhat,
            },
            BatchNormMode::Eval => Op::BatchNormEval {
                x,
                gamma,
                beta,
                inv_std,
                xhat,
            },
        };
        Ok(self.push(value, op, &[x, gamma, beta]))
    }

    fn unary(&mut self, x: Var, kind: Unary) -> Var {
        let value = self.value(x).map(|v| apply_unary(kind, v));
        self.push(value, Op::Unary { x, kind }, &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Relu)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, Unary::LeakyRelu(slope))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Sigmoid)
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
            return Err(AutodiffError::ShapeMismatch {
                op: "concat_channels",
                left: sa,
                right: sb,
            });
        }
        let out_shape = Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w);
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(out_shape.numel());
        for i in 0..sa.n {
            out.extend_from_slice(av.sample(i));
            out.extend_from_slice(bv.sample(i));
        }
        let value = Tensor::from_vec(out_shape, out)?;
        Ok(self.push(value, Op::Concat { a, b }, &[a, b]))
    }

    fn zip_with(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let shape = self.same_shape(op, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::from_vec(shape, data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with("add", a, b, |x, y| x + y)?;
        Ok(self.push(v, Op::Add { a, b }, &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with("sub", a, b, |x, y| x - y)?;
        Ok(self.push(v, Op::Sub { a, b }, &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_with("mul", a, b, |x, y| x * y)?;
        Ok(self.push(v, Op::Mul { a, b }, &[a, b]))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let v = self.value(x).map(|e| e * s);
        self.push(v, Op::Scale { x, s }, &[x])
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().copied().sum::<T>();
        self.push(Tensor::scalar(total), Op::Sum { x }, &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = T::from_usize(self.value(x).len()).unwrap();
        let s = self.sum(x);
        self.scale(s, T::one() / n)
    }

    /// Mean absolute difference.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let shape = self.same_shape("l1_loss", pred, target)?;
        let n = T::from_usize(shape.numel()).unwrap();
        let total = self
            .value(pred)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(&p, &t)| (p - t).abs())
            .sum::<T>();
        Ok(self.push(Tensor::scalar(total / n), Op::L1 { pred, target }, &[pred, target]))
    }

    /// Mean squared difference.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let shape = self.same_shape("mse_loss", pred, target)?;
        let n = T::from_usize(shape.numel()).unwrap();
        let total = self
            .value(pred)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum::<T>();
        Ok(self.push(Tensor::scalar(total / n), Op::Mse { pred, target }, &[pred, target]))
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against a constant label, in the
    /// overflow-free form `max(z, 0) - z * y + ln(1 + exp(-|z|))`.
    pub fn bce_with_logits(&mut self, logits: Var, label: T) -> Var {
        let n = T::from_usize(self.value(logits).len()).unwrap();
        let total = self
            .value(logits)
            .data()
            .iter()
            .map(|&z| z.max(T::zero()) - z * label + (-z.abs()).exp().ln_1p())
            .sum::<T>();
        self.push(Tensor::scalar(total / n), Op::BceWithLogits { logits, label }, &[logits])
    }

    /// Reverse pass from a scalar `loss`; leaf gradients accumulate across uses.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(AutodiffError::BackwardTwice);
        }
        let ls = self.shape(loss);
        if ls.numel() != 1 {
            return Err(AutodiffError::NotScalar(ls));
        }
        self.backward_done = true;
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            if matches!(self.nodes[idx].op, Op::Leaf) {
                continue;
            }
            let Some(grad) = self.nodes[idx].grad.take() else {
                continue;
            };
            for (v, g) in self.input_grads(idx, &grad) {
                self.accumulate(v, g);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Vec<T>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => node.grad = Some(g),
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn input_grads(&self, idx: usize, grad: &[T]) -> Vec<(Var, Vec<T>)> {
        let node = &self.nodes[idx];
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                let ws = self.shape(*w);
                let (dx, dw) = conv::conv2d_backward(
                    geom,
                    self.value(*x).data(),
                    self.value(*w).data(),
                    ws.n,
                    grad,
                    self.needs(*x),
                    self.needs(*w),
                );
                out.extend(dx.map(|g| (*x, g)));
                out.extend(dw.map(|g| (*w, g)));
                if let Some(b) = b.filter(|b| self.needs(*b)) {
                    out.push((b, conv::channel_sums(grad, geom.n, ws.n, geom.oh * geom.ow)));
                }
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                let xs = self.shape(*x);
                let (dx, dw) = conv::conv_transpose2d_backward(
                    geom,
                    self.value(*x).data(),
                    self.value(*w).data(),
                    xs.c,
                    grad,
                    self.needs(*x),
                    self.needs(*w),
                );
                out.extend(dx.map(|g| (*x, g)));
                out.extend(dw.map(|g| (*w, g)));
                if let Some(b) = b.filter(|b| self.needs(*b)) {
                    out.push((b, conv::channel_sums(grad, geom.n, geom.ch, geom.ih * geom.iw)));
                }
            }
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                inv_std,
                xhat,
            }
            | Op::BatchNormEval {
                x,
                gamma,
                beta,
                inv_std,
                xhat,
            } => {
                let train = matches!(node.op, Op::BatchNormTrain { .. });
                let s = self.shape(*x);
                let (c, plane) = (s.c, s.plane());
                let g = self.value(*gamma).data();
                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                for b in 0..s.n {
                    for ch in 0..c {
                        for i in (b * c + ch) * plane..(b * c + ch + 1) * plane {
                            dgamma[ch] += grad[i] * xhat[i];
                            dbeta[ch] += grad[i];
                        }
                    }
                }
                if self.needs(*x) {
                    let mut dx = vec![T::zero(); grad.len()];
                    let cnt = T::from_usize(s.n * plane).unwrap();
                    for b in 0..s.n {
                        for ch in 0..c {
                            for i in (b * c + ch) * plane..(b * c + ch + 1) * plane {
                                dx[i] = if train {
                                    g[ch] * inv_std[ch] / cnt
                                        * (cnt * grad[i] - dbeta[ch] - xhat[i] * dgamma[ch])
                                } else {
                                    g[ch] * inv_std[ch] * grad[i]
                                };
                            }
                        }
                    }
                    out.push((*x, dx));
                }
                if self.needs(*gamma) {
                    out.push((*gamma, dgamma));
                }
                if self.needs(*beta) {
                    out.push((*beta, dbeta));
                }
            }
            Op::Unary { x, kind } => {
                if self.needs(*x) {
                    let xv = self.value(*x).data();
                    let yv = node.value.data();
                    let dx = grad
                        .iter()
                        .zip(xv.iter().zip(yv))
                        .map(|(&g, (&xi, &yi))| g * unary_derivative(*kind, xi, yi))
                        .collect();
                    out.push((*x, dx));
                }
            }
            Op::Concat { a, b } => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (la, lb) = (sa.c * sa.plane(), sb.c * sb.plane());
                if self.needs(*a) {
                    let mut da = Vec::with_capacity(sa.numel());
                    for i in 0..sa.n {
                        da.extend_from_slice(&grad[i * (la + lb)..i * (la + lb) + la]);
                    }
                    out.push((*a, da));
                }
                if self.needs(*b) {
                    let mut db = Vec::with_capacity(sb.numel());
                    for i in 0..sa.n {
                        db.extend_from_slice(&grad[i * (la + lb) + la..(i + 1) * (la + lb)]);
                    }
                    out.push((*b, db));
                }
            }
            Op::Add { a, b } => {
                if self.needs(*a) {
                    out.push((*a, grad.to_vec()));
                }
                if self.needs(*b) {
                    out.push((*b, grad.to_vec()));
                }
            }
            Op::Sub { a, b } => {
                if self.needs(*a) {
                    out.push((*a, grad.to_vec()));
                }
                if self.needs(*b) {
                    out.push((*b, grad.iter().map(|&g| -g).collect()));
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if self.needs(*a) {
                    out.push((*a, grad.iter().zip(bv).map(|(&g, &y)| g * y).collect()));
                }
                if self.needs(*b) {
                    out.push((*b, grad.iter().zip(av).map(|(&g, &x)| g * x).collect()));
                }
            }
            Op::Scale { x, s } => {
                if self.needs(*x) {
                    out.push((*x, grad.iter().map(|&g| g * *s).collect()));
                }
            }
            Op::Sum { x } => {
                if self.needs(*x) {
                    out.push((*x, vec![grad[0]; self.value(*x).len()]));
                }
            }
            Op::L1 { pred, target } | Op::Mse { pred, target } => {
                let l1 = matches!(node.op, Op::L1 { .. });
                let pv = self.value(*pred).data();
                let tv = self.value(*target).data();
                let scale = grad[0] / T::from_usize(pv.len()).unwrap();
                let two = T::from_f64_lossy(2.0);
                let dp: Vec<T> = pv
                    .iter()
                    .zip(tv)
                    .map(|(&p, &t)| {
                        let d = p - t;
                        let local = if l1 {
                            if d > T::zero() {
                                T::one()
                            } else if d < T::zero() {
                                -T::one()
                            } else {
                                T::zero()
                            }
                        } else {
                            two * d
                        };
                        local * scale
                    })
                    .collect();
                if self.needs(*target) {
                    out.push((*target, dp.iter().map(|&g| -g).collect()));
                }
                if self.needs(*pred) {
                    out.push((*pred, dp));
                }
            }
            Op::BceWithLogits { logits, label } => {
                if self.needs(*logits) {
                    let zv = self.value(*logits).data();
                    let scale = grad[0] / T::from_usize(zv.len()).unwrap();
                    let d = zv.iter().map(|&z| (sigmoid(z) - *label) * scale).collect();
                    out.push((*logits, d));
                }
            }
        }
        out
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn apply_unary<T: Scalar>(kind: Unary, v: T) -> T {
    match kind {
        Unary::Relu => v.max(T::zero()),
        Unary::LeakyRelu(slope) => {
            if v > T::zero() {
                v
            } else {
                v * T::from_f64_lossy(slope)
            }
        }
        Unary::Tanh => v.tanh(),
        Unary::Sigmoid => sigmoid(v),
    }
}

fn unary_derivative<T: Scalar>(kind: Unary, x: T, y: T) -> T {
    match kind {
        Unary::Relu => {
            if x > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        Unary::LeakyRelu(slope) => {
            if x > T::zero() {
                T::one()
            } else {
                T::from_f64_lossy(slope)
            }
        }
        Unary::Tanh => T::one() - y * y,
        Unary::Sigmoid => y * (T::one() - y),
    }
}
