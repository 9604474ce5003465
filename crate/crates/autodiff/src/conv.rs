//! im2col lowering shared by `conv2d` and `conv_transpose2d`.
//!
//! Columns span the whole batch: the column matrix is `(ch * k * k) x (n * oh * ow)`, so
//! deep layers with 1x1 or 2x2 feature maps still give the GEMM a wide right-hand side.

use crate::error::{AutodiffError, Result};
use crate::gemm::{gemm, Mat};
use crate::scalar::Scalar;

/// Geometry of a strided, zero-padded square-kernel correlation: an `(n, ch, ih, iw)`
/// "image" side and an `(oh, ow)` "column" side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub ch: usize,
    pub ih: usize,
    pub iw: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    /// Geometry for a forward convolution; the output size must divide exactly.
    pub fn forward(
        op: &'static str,
        n: usize,
        ch: usize,
        ih: usize,
        iw: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self> {
        if k == 0 || stride == 0 {
            return Err(AutodiffError::InvalidGeometry {
                op,
                reason: format!("kernel {k} and stride {stride} must be positive"),
            });
        }
        let out = |size: usize| -> Result<usize> {
            let padded = size + 2 * pad;
            if padded < k || (padded - k) % stride != 0 {
                return Err(AutodiffError::NonIntegralOutput {
                    op,
                    input: size,
                    kernel: k,
                    stride,
                    pad,
                });
            }
            Ok((padded - k) / stride + 1)
        };
        Ok(ConvGeom {
            n,
            ch,
            ih,
            iw,
            k,
            stride,
            pad,
            oh: out(ih)?,
            ow: out(iw)?,
        })
    }

    pub fn rows(&self) -> usize {
        self.ch * self.k * self.k
    }

    /// Splits the columns into blocks of whole output rows whose column buffer stays near
    /// [`CHUNK_ELEMS`], so buffers are reused instead of allocating one matrix for the batch.
    pub fn chunks(&self) -> Vec<Chunk> {
        let rows = self.rows().max(1);
        let plane = self.oh * self.ow;
        let mut out = Vec::new();
        if rows * plane >= CHUNK_ELEMS {
            let per = (CHUNK_ELEMS / (rows * self.ow)).max(1);
            for b in 0..self.n {
                for oy0 in (0..self.oh).step_by(per) {
                    out.push(Chunk {
                        b0: b,
                        b1: b + 1,
                        oy0,
                        oy1: (oy0 + per).min(self.oh),
                    });
                }
            }
        } else {
            let per = (CHUNK_ELEMS / (rows * plane).max(1)).max(1);
            for b0 in (0..self.n).step_by(per) {
                out.push(Chunk {
                    b0,
                    b1: (b0 + per).min(self.n),
                    oy0: 0,
                    oy1: self.oh,
                });
            }
        }
        out
    }

    fn max_chunk_cols(&self, chunks: &[Chunk]) -> usize {
        chunks.iter().map(|c| c.cols(self.ow)).max().unwrap_or(0)
    }

    /// Calls `f(col_start, image_start, len)` for every maximal run of in-bounds taps of
    /// one kernel row inside `chunk`; within a run the image index advances by `stride`.
    #[inline]
    fn for_each_run(&self, row: usize, chunk: &Chunk, mut f: impl FnMut(usize, usize, usize)) {
        let k2 = self.k * self.k;
        let c = row / k2;
        let ki = (row % k2) / self.k;
        let kj = row % self.k;
        let (s, pad) = (self.stride, self.pad);
        // ix = ox * s + kj - pad must lie in [0, iw).
        let lo = if pad > kj { (pad - kj).div_ceil(s) } else { 0 };
        let hi = if self.iw + pad > kj {
            ((self.iw + pad - kj - 1) / s + 1).min(self.ow)
        } else {
            0
        };
        if lo >= hi {
            return;
        }
        let rows_per_sample = (chunk.oy1 - chunk.oy0) * self.ow;
        for b in chunk.b0..chunk.b1 {
            let img_base = (b * self.ch + c) * self.ih * self.iw;
            let col_base = (b - chunk.b0) * rows_per_sample;
            for oy in chunk.oy0..chunk.oy1 {
                let iy = (oy * s + ki) as isize - pad as isize;
                if iy < 0 || iy as usize >= self.ih {
                    continue;
                }
                let img = img_base + iy as usize * self.iw + lo * s + kj - pad;
                f(col_base + (oy - chunk.oy0) * self.ow + lo, img, hi - lo);
            }
        }
    }

    /// Column block of `chunk` into `buf` (`rows x chunk cols`), zero where padded.
    pub fn im2col<T: Scalar>(&self, image: &[T], chunk: &Chunk, buf: &mut [T]) {
        debug_assert_eq!(image.len(), self.n * self.ch * self.ih * self.iw);
        let cols = chunk.cols(self.ow);
        let s = self.stride;
        let buf = &mut buf[..self.rows() * cols];
        buf.fill(T::zero());
        for row in 0..self.rows() {
            let dst = &mut buf[row * cols..(row + 1) * cols];
            self.for_each_run(row, chunk, |ci, ii, len| {
                let d = &mut dst[ci..ci + len];
                if s == 1 {
                    d.copy_from_slice(&image[ii..ii + len]);
                } else {
                    for (o, v) in d.iter_mut().zip(image[ii..].iter().step_by(s)) {
                        *o = *v;
                    }
                }
            });
        }
    }

    /// Scatter-add a column block back onto an image buffer.
    pub fn col2im<T: Scalar>(&self, columns: &[T], chunk: &Chunk, image: &mut [T]) {
        debug_assert_eq!(image.len(), self.n * self.ch * self.ih * self.iw);
        let cols = chunk.cols(self.ow);
        let s = self.stride;
        for row in 0..self.rows() {
            let src = &columns[row * cols..(row + 1) * cols];
            self.for_each_run(row, chunk, |ci, ii, len| {
                let src = &src[ci..ci + len];
                if s == 1 {
                    for (o, v) in image[ii..ii + len].iter_mut().zip(src) {
                        *o += *v;
                    }
                } else {
                    for (o, v) in image[ii..].iter_mut().step_by(s).zip(src) {
                        *o += *v;
                    }
                }
            });
        }
    }

    /// Channel-major `(c x chunk cols)` copy of a column-side `(n, c, oh, ow)` tensor.
    fn gather<T: Scalar>(&self, data: &[T], c: usize, chunk: &Chunk, buf: &mut [T]) {
        let cols = chunk.cols(self.ow);
        let plane = self.oh * self.ow;
        let span = (chunk.oy0 * self.ow, chunk.oy1 * self.ow);
        let per = span.1 - span.0;
        for ch in 0..c {
            for b in chunk.b0..chunk.b1 {
                let src = (b * c + ch) * plane;
                let dst = ch * cols + (b - chunk.b0) * per;
                buf[dst..dst + per].copy_from_slice(&data[src + span.0..src + span.1]);
            }
        }
    }

    /// Inverse of [`Self::gather`].
    fn scatter<T: Scalar>(&self, buf: &[T], c: usize, chunk: &Chunk, data: &mut [T]) {
        let cols = chunk.cols(self.ow);
        let plane = self.oh * self.ow;
        let span = (chunk.oy0 * self.ow, chunk.oy1 * self.ow);
        let per = span.1 - span.0;
        for ch in 0..c {
            for b in chunk.b0..chunk.b1 {
                let dst = (b * c + ch) * plane;
                let src = ch * cols + (b - chunk.b0) * per;
                data[dst + span.0..dst + span.1].copy_from_slice(&buf[src..src + per]);
            }
        }
    }
}

/// Target size of one column buffer, in elements.
const CHUNK_ELEMS: usize = 1 << 18;

/// Samples `b0..b1`, output rows `oy0..oy1` of each.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Chunk {
    pub b0: usize,
    pub b1: usize,
    pub oy0: usize,
    pub oy1: usize,
}

impl Chunk {
    pub fn cols(&self, ow: usize) -> usize {
        (self.b1 - self.b0) * (self.oy1 - self.oy0) * ow
    }
}

/// Forward correlation. `x`: `(n, ic, h, w)`, `weight`: `(oc, ic, k, k)`.
pub(crate) fn conv2d_forward<T: Scalar>(
    geom: &ConvGeom,
    x: &[T],
    weight: &[T],
    bias: Option<&[T]>,
    oc: usize,
) -> Vec<T> {
    let chunks = geom.chunks();
    let max = geom.max_chunk_cols(&chunks);
    let rows = geom.rows();
    let mut cols = vec![T::zero(); rows * max];
    let mut out_c = vec![T::zero(); oc * max];
    let plane = geom.oh * geom.ow;
    let mut out = vec![T::zero(); geom.n * oc * plane];
    for ch in &chunks {
        let nc = ch.cols(geom.ow);
        geom.im2col(x, ch, &mut cols);
        gemm(
            Mat::new(weight, oc, rows),
            false,
            Mat::new(&cols[..rows * nc], rows, nc),
            false,
            T::zero(),
            &mut out_c[..oc * nc],
        );
        geom.scatter(&out_c[..oc * nc], oc, ch, &mut out);
    }
    if let Some(b) = bias {
        add_channel_bias(&mut out, b, geom.n, oc, plane);
    }
    out
}

/// Gradients of `conv2d_forward` w.r.t. input and weight given `grad_out` `(n, oc, oh, ow)`.
pub(crate) fn conv2d_backward<T: Scalar>(
    geom: &ConvGeom,
    x: &[T],
    weight: &[T],
    oc: usize,
    grad_out: &[T],
    need_x: bool,
    need_w: bool,
) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let chunks = geom.chunks();
    let max = geom.max_chunk_cols(&chunks);
    let rows = geom.rows();
    let mut cols = vec![T::zero(); rows * max];
    let mut g_c = vec![T::zero(); oc * max];
    let mut dw = need_w.then(|| vec![T::zero(); oc * rows]);
    let mut dx = need_x.then(|| vec![T::zero(); x.len()]);
    for ch in &chunks {
        let nc = ch.cols(geom.ow);
        geom.gather(grad_out, oc, ch, &mut g_c);
        let g = Mat::new(&g_c[..oc * nc], oc, nc);
        if let Some(dw) = dw.as_mut() {
            geom.im2col(x, ch, &mut cols);
            gemm(g, false, Mat::new(&cols[..rows * nc], rows, nc), true, T::one(), dw);
        }
        if let Some(dx) = dx.as_mut() {
            gemm(Mat::new(weight, oc, rows), true, g, false, T::zero(), &mut cols[..rows * nc]);
            geom.col2im(&cols[..rows * nc], ch, dx);
        }
    }
    (dx, dw)
}

/// Transposed convolution. `x`: `(n, ic, h, w)`, `weight`: `(ic, oc, k, k)`; `geom` describes
/// the equivalent forward convolution from the `(n, oc, oh, ow)` output back to `x`.
pub(crate) fn conv_transpose2d_forward<T: Scalar>(
    geom: &ConvGeom,
    x: &[T],
    weight: &[T],
    bias: Option<&[T]>,
    ic: usize,
) -> Vec<T> {
    let chunks = geom.chunks();
    let max = geom.max_chunk_cols(&chunks);
    let rows = geom.rows();
    let mut cols = vec![T::zero(); rows * max];
    let mut x_c = vec![T::zero(); ic * max];
    let mut out = vec![T::zero(); geom.n * geom.ch * geom.ih * geom.iw];
    for ch in &chunks {
        let nc = ch.cols(geom.ow);
        geom.gather(x, ic, ch, &mut x_c);
        gemm(
            Mat::new(weight, ic, rows),
            true,
            Mat::new(&x_c[..ic * nc], ic, nc),
            false,
            T::zero(),
            &mut cols[..rows * nc],
        );
        geom.col2im(&cols[..rows * nc], ch, &mut out);
    }
    if let Some(b) = bias {
        add_channel_bias(&mut out, b, geom.n, geom.ch, geom.ih * geom.iw);
    }
    out
}

pub(crate) fn conv_transpose2d_backward<T: Scalar>(
    geom: &ConvGeom,
    x: &[T],
    weight: &[T],
    ic: usize,
    grad_out: &[T],
    need_x: bool,
    need_w: bool,
) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let chunks = geom.chunks();
    let max = geom.max_chunk_cols(&chunks);
    let rows = geom.rows();
    let mut cols = vec![T::zero(); rows * max];
    let mut x_c = vec![T::zero(); ic * max];
    let mut dw = need_w.then(|| vec![T::zero(); ic * rows]);
    let mut dx = need_x.then(|| vec![T::zero(); x.len()]);
    for ch in &chunks {
        let nc = ch.cols(geom.ow);
        geom.im2col(grad_out, ch, &mut cols);
        let c = Mat::new(&cols[..rows * nc], rows, nc);
        if let Some(dx) = dx.as_mut() {
            gemm(Mat::new(weight, ic, rows), false, c, false, T::zero(), &mut x_c[..ic * nc]);
            geom.scatter(&x_c[..ic * nc], ic, ch, dx);
        }
        if let Some(dw) = dw.as_mut() {
            geom.gather(x, ic, ch, &mut x_c);
            gemm(Mat::new(&x_c[..ic * nc], ic, nc), false, c, true, T::one(), dw);
        }
    }
    (dx, dw)
}

fn add_channel_bias<T: Scalar>(out: &mut [T], bias: &[T], n: usize, c: usize, plane: usize) {
    for b in 0..n {
        for ch in 0..c {
            let v = bias[ch];
            out[(b * c + ch) * plane..(b * c + ch + 1) * plane]
                .iter_mut()
                .for_each(|o| *o += v);
        }
    }
}

/// Per-channel sum over batch and plane.
pub(crate) fn channel_sums<T: Scalar>(data: &[T], n: usize, c: usize, plane: usize) -> Vec<T> {
    let mut sums = vec![T::zero(); c];
    for b in 0..n {
        for (ch, s) in sums.iter_mut().enumerate() {
            *s += data[(b * c + ch) * plane..(b * c + ch + 1) * plane]
                .iter()
                .copied()
                .sum::<T>();
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop correlation, the reference for the im2col path.
    fn direct_conv(
        x: &[f64],
        w: &[f64],
        n: usize,
        ic: usize,
        ih: usize,
        iw: usize,
        oc: usize,
        k: usize,
        s: usize,
        p: usize,
    ) -> (Vec<f64>, usize, usize) {
        let oh = (ih + 2 * p - k) / s + 1;
        let ow = (iw + 2 * p - k) / s + 1;
        let mut out = vec![0.0; n * oc * oh * ow];
        for b in 0..n {
            for o in 0..oc {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut acc = 0.0;
                        for c in 0..ic {
                            for i in 0..k {
                                for j in 0..k {
                                    let iy = (y * s + i) as isize - p as isize;
                                    let ix = (xx * s + j) as isize - p as isize;
                                    if iy < 0 || ix < 0 || iy as usize >= ih || ix as usize >= iw {
                                        continue;
                                    }
                                    acc += x[((b * ic + c) * ih + iy as usize) * iw + ix as usize]
                                        * w[((o * ic + c) * k + i) * k + j];
                                }
                            }
                        }
                        out[((b * oc + o) * oh + y) * ow + xx] = acc;
                    }
                }
            }
        }
        (out, oh, ow)
    }

    #[test]
    fn im2col_conv_matches_direct_loops() {
        let (n, ic, ih, iw, oc, k, s, p) = (2, 3, 7, 9, 4, 3, 2, 1);
        let x: Vec<f64> = (0..n * ic * ih * iw).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let w: Vec<f64> = (0..oc * ic * k * k).map(|i| ((i * 13 % 7) as f64) * 0.1).collect();
        let geom = ConvGeom::forward("t", n, ic, ih, iw, k, s, p).unwrap();
        let got = conv2d_forward(&geom, &x, &w, None, oc);
        let (want, oh, ow) = direct_conv(&x, &w, n, ic, ih, iw, oc, k, s, p);
        assert_eq!((geom.oh, geom.ow), (oh, ow));
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gather_scatter_round_trip() {
        let geom = ConvGeom::forward("t", 3, 2, 8, 8, 3, 1, 1).unwrap();
        let data: Vec<f32> = (0..3 * 5 * 64).map(|v| v as f32).collect();
        let chunk = Chunk { b0: 1, b1: 2, oy0: 2, oy1: 5 };
        let mut buf = vec![0.0; 5 * chunk.cols(8)];
        geom.gather(&data, 5, &chunk, &mut buf);
        let mut back = vec![-1.0; data.len()];
        geom.scatter(&buf, 5, &chunk, &mut back);
        for (i, (&a, &b)) in data.iter().zip(&back).enumerate() {
            let (bb, y) = (i / (5 * 64), (i % 64) / 8);
            if bb == 1 && (2..5).contains(&y) {
                assert_eq!(a, b);
            } else {
                assert_eq!(b, -1.0);
            }
        }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn row_chunked_conv_matches_direct_and_adjoints() {
        // rows * plane exceeds one chunk, so samples are split into row blocks.
        let (n, ic, ih, iw, oc, k, s, p) = (2, 64, 16, 16, 3, 5, 1, 2);
        let geom = ConvGeom::forward("t", n, ic, ih, iw, k, s, p).unwrap();
        assert!(geom.chunks().len() > n);
        let x: Vec<f64> = (0..n * ic * ih * iw).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let w: Vec<f64> = (0..oc * ic * k * k).map(|i| ((i * 13 % 7) as f64) * 0.1 - 0.3).collect();
        let y = conv2d_forward(&geom, &x, &w, None, oc);
        let (want, _, _) = direct_conv(&x, &w, n, ic, ih, iw, oc, k, s, p);
        for (a, b) in y.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
        let g: Vec<f64> = (0..y.len()).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let (dx, dw) = conv2d_backward(&geom, &x, &w, oc, &g, true, true);
        let lhs = dot(&y, &g);
        assert!((lhs - dot(&x, &dx.unwrap())).abs() < 1e-6 * lhs.abs().max(1.0));
        assert!((lhs - dot(&w, &dw.unwrap())).abs() < 1e-6 * lhs.abs().max(1.0));
    }

    #[test]
    fn transposed_conv_is_adjoint_of_conv() {
        // Transposed forward is the input-gradient of the forward correlation.
        let (n, c_big, c_small, side, k, s, p) = (2, 3, 40, 16, 4, 2, 1);
        let geom = ConvGeom::forward("t", n, c_big, side, side, k, s, p).unwrap();
        let plane = geom.oh * geom.ow;
        let w: Vec<f64> = (0..c_small * c_big * k * k).map(|i| ((i * 13 % 7) as f64) * 0.1 - 0.3).collect();
        let xs: Vec<f64> = (0..n * c_small * plane).map(|i| ((i * 5 % 9) as f64) - 4.0).collect();
        let up = conv_transpose2d_forward(&geom, &xs, &w, None, c_small);
        let (want, _) = conv2d_backward(&geom, &vec![0.0; n * c_big * side * side], &w, c_small, &xs, true, false);
        for (a, b) in up.iter().zip(&want.unwrap()) {
            assert!((a - b).abs() < 1e-9);
        }
        let g: Vec<f64> = (0..up.len()).map(|i| ((i * 3 % 7) as f64) - 3.0).collect();
        let (dx, dw) = conv_transpose2d_backward(&geom, &xs, &w, c_small, &g, true, true);
        let lhs = dot(&up, &g);
        assert!((lhs - dot(&xs, &dx.unwrap())).abs() < 1e-6 * lhs.abs().max(1.0));
        assert!((lhs - dot(&w, &dw.unwrap())).abs() < 1e-6 * lhs.abs().max(1.0));
    }

    #[test]
    fn non_integral_geometry_rejected() {
        let err = ConvGeom::forward("conv2d", 1, 1, 63, 63, 4, 2, 1).unwrap_err();
        assert!(matches!(err, AutodiffError::NonIntegralOutput { input: 63, .. }));
    }
}
