//! Dense row-major `f64` tensors and the neural primitives built on them.
//!
//! Shapes are lists of positive extents. Every buffer is registered with
//! [`memtrack`](crate::memtrack) so working-set measurements see it.

use crate::error::{Error, Result};
use crate::memtrack;

pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn validate_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Shape {
            shape: shape.to_vec(),
            reason: "rank must be >= 1 and every extent >= 1".into(),
        });
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let numel = validate_shape(shape)?;
        if data.len() != numel {
            return Err(Error::Shape {
                shape: shape.to_vec(),
                reason: format!("buffer holds {} values, shape needs {numel}", data.len()),
            });
        }
        Ok(Self::from_parts(shape.to_vec(), data))
    }

    fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        memtrack::on_alloc(8 * data.len() as u64);
        Self { shape, data }
    }

    /// Panics on an invalid shape; use [`Tensor::new`] for untrusted input.
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let numel = validate_shape(shape).expect("invalid tensor shape");
        Self::from_parts(shape.to_vec(), vec![value; numel])
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let numel = validate_shape(shape).expect("invalid tensor shape");
        Self::from_parts(shape.to_vec(), (0..numel).map(&mut f).collect())
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(&[1], value)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Size of the trailing axis.
    pub fn last_dim(&self) -> usize {
        *self.shape.last().expect("rank >= 1")
    }

    pub fn into_vec(mut self) -> Vec<f64> {
        memtrack::on_free(8 * self.data.len() as u64);
        let data = std::mem::take(&mut self.data);
        // Buffer is already released from the tracker; the empty Vec left
        // behind frees nothing on drop.
        data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let numel = validate_shape(shape)?;
        if numel != self.data.len() {
            return Err(Error::dim("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        let mut off = 0;
        for (&i, &n) in index.iter().zip(&self.shape) {
            assert!(i < n, "index {index:?} out of bounds for {:?}", self.shape);
            off = off * n + i;
        }
        off
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|x| x * s)
    }

    pub fn zip_with(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::dim("zip_with", &self.shape, &other.shape));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts(self.shape.clone(), data))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Largest absolute elementwise difference; `inf` if shapes differ.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Contiguous slice along the leading axis.
    pub fn outer(&self, i: usize) -> &[f64] {
        let stride = self.data.len() / self.shape[0];
        &self.data[i * stride..(i + 1) * stride]
    }

    pub fn outer_mut(&mut self, i: usize) -> &mut [f64] {
        let stride = self.data.len() / self.shape[0];
        &mut self.data[i * stride..(i + 1) * stride]
    }
}

impl Clone for Tensor {
    fn clone(&self) -> Self {
        Self::from_parts(self.shape.clone(), self.data.clone())
    }
}

impl Drop for Tensor {
    fn drop(&mut self) {
        memtrack::on_free(8 * self.data.len() as u64);
    }
}

impl PartialEq for Tensor {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.data == other.data
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

/// `out[i, j] += a[i, k] * b[k, j]` over row slices, accumulating in
/// ascending `k` so every output element has a fixed summation order.
pub(crate) fn gemm_rows(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    gemm_strided(a, k, b, n, out, n, m, k, n);
}

const TILE: usize = 4;

/// Strided form of [`gemm_rows`]: row `i` of `a`, `b`, `out` starts at
/// `i·lda`, `i·ldb`, `i·ldo`. Interior `4×4` output tiles accumulate in
/// registers; the per-element summation order is unchanged.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_strided(
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    out: &mut [f64],
    ldo: usize,
    m: usize,
    k: usize,
    n: usize,
) {
    let m_tiled = m - m % TILE;
    let n_tiled = n - n % TILE;
    for i0 in (0..m_tiled).step_by(TILE) {
        for j0 in (0..n_tiled).step_by(TILE) {
            let mut acc = [[0.0f64; TILE]; TILE];
            for (r, acc_row) in acc.iter_mut().enumerate() {
                acc_row.copy_from_slice(&out[(i0 + r) * ldo + j0..(i0 + r) * ldo + j0 + TILE]);
            }
            for kk in 0..k {
                let bv: [f64; TILE] = b[kk * ldb + j0..kk * ldb + j0 + TILE].try_into().unwrap();
                for (r, acc_row) in acc.iter_mut().enumerate() {
                    let av = a[(i0 + r) * lda + kk];
                    for c in 0..TILE {
                        acc_row[c] += av * bv[c];
                    }
                }
            }
            for (r, acc_row) in acc.iter().enumerate() {
                out[(i0 + r) * ldo + j0..(i0 + r) * ldo + j0 + TILE].copy_from_slice(acc_row);
            }
        }
        if n_tiled < n {
            gemm_naive_block(a, lda, b, ldb, out, ldo, i0..i0 + TILE, k, n_tiled..n);
        }
    }
    gemm_naive_block(a, lda, b, ldb, out, ldo, m_tiled..m, k, 0..n);
}

#[allow(clippy::too_many_arguments)]
fn gemm_naive_block(
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    out: &mut [f64],
    ldo: usize,
    rows: std::ops::Range<usize>,
    k: usize,
    cols: std::ops::Range<usize>,
) {
    for i in rows {
        let o_row = &mut out[i * ldo + cols.start..i * ldo + cols.end];
        for kk in 0..k {
            let aik = a[i * lda + kk];
            let b_row = &b[kk * ldb + cols.start..kk * ldb + cols.end];
            for (o, &bkj) in o_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
        return Err(Error::dim("matmul", &a.shape, &b.shape));
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = Tensor::zeros(&[m, n]);
    gemm_rows(&a.data, &b.data, &mut out.data, m, k, n);
    Ok(out)
}

/// Applies `x · w (+ bias)` over the trailing axis of `x`, any leading shape.
pub fn linear(x: &Tensor, w: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let k = x.last_dim();
    if w.rank() != 2 || w.shape[0] != k {
        return Err(Error::dim("linear", &x.shape, &w.shape));
    }
    let n = w.shape[1];
    if let Some(b) = bias {
        if b.shape != [n] {
            return Err(Error::dim("linear bias", &w.shape, &b.shape));
        }
    }
    let m = x.numel() / k;
    let mut shape = x.shape.clone();
    *shape.last_mut().unwrap() = n;
    let mut out = match bias {
        Some(b) => {
            let mut t = Tensor::zeros(&shape);
            for row in t.data.chunks_exact_mut(n) {
                row.copy_from_slice(&b.data);
            }
            t
        }
        None => Tensor::zeros(&shape),
    };
    gemm_rows(&x.data, &w.data, &mut out.data, m, k, n);
    Ok(out)
}

/// Normalizes each trailing-axis vector to zero mean / unit variance, then
/// applies `gamma`, `beta`.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    let c = x.last_dim();
    if gamma.shape != [c] {
        return Err(Error::dim("layer_norm gamma", &x.shape, &gamma.shape));
    }
    if beta.shape != [c] {
        return Err(Error::dim("layer_norm beta", &x.shape, &beta.shape));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("layer_norm eps must be > 0, got {eps}")));
    }
    let mut out = Tensor::zeros(&x.shape);
    for (src, dst) in x.data.chunks_exact(c).zip(out.data.chunks_exact_mut(c)) {
        let mean = src.iter().sum::<f64>() / c as f64;
        let var = src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for j in 0..c {
            dst[j] = (src[j] - mean) * inv * gamma.data[j] + beta.data[j];
        }
    }
    Ok(out)
}

/// Per-channel 3×3 convolution with one cell of zero padding on every side,
/// applied to each leading slice of a `K×H×W×C` stack independently.
pub fn depthwise_conv2d_3x3(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if x.rank() != 4 {
        return Err(Error::Shape {
            shape: x.shape.clone(),
            reason: "depthwise conv expects K×H×W×C".into(),
        });
    }
    let [k, h, w, c] = [x.shape[0], x.shape[1], x.shape[2], x.shape[3]];
    if kernel.shape != [3, 3, c] {
        return Err(Error::dim("depthwise_conv2d_3x3 kernel", &x.shape, &kernel.shape));
    }
    if bias.shape != [c] {
        return Err(Error::dim("depthwise_conv2d_3x3 bias", &x.shape, &bias.shape));
    }
    let mut out = Tensor::zeros(&x.shape);
    for a in 0..k {
        let base = a * h * w * c;
        for i in 0..h {
            for j in 0..w {
                let dst = base + (i * w + j) * c;
                out.data[dst..dst + c].copy_from_slice(&bias.data);
                for di in 0..3 {
                    let Some(si) = (i + di).checked_sub(1).filter(|&s| s < h) else {
                        continue;
                    };
                    for dj in 0..3 {
                        let Some(sj) = (j + dj).checked_sub(1).filter(|&s| s < w) else {
                            continue;
                        };
                        let src = base + (si * w + sj) * c;
                        let kern = (di * 3 + dj) * c;
                        for ch in 0..c {
                            out.data[dst + ch] += kernel.data[kern + ch] * x.data[src + ch];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Silu,
    Softplus,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inverse(y: f64) -> f64 {
    // log(exp(y) - 1), rearranged to stay finite for large y
    y + (-(-y).exp_m1()).ln()
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    match kind {
        Activation::Silu => x.map(silu),
        Activation::Softplus => x.map(softplus),
    }
}
