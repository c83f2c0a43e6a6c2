//! Global single-head self-attention over every `K·H·W` token: the
//! quadratic-cost fusion baseline.
//!
//! The score matrix is evaluated as `S = (X·W_q·W_kᵀ)·Xᵀ / √C` and the mix
//! as `(softmax(S)·X)·W_v·W_o`, which is the standard `softmax(QKᵀ/√C)·V`
//! regrouped so that only one `T×C` temporary coexists with the `T×T`
//! scores.

use crate::error::{Error, Result};
use crate::fusion::FeatureStack;
use crate::random::{seeded, uniform_tensor};
use crate::tensor::{gemm_rows, gemm_strided, matmul};
use crate::Tensor;

/// 4 GiB
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

const SCORE_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct AttnWeights {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_o: Tensor,
}

impl AttnWeights {
    pub fn new(w_q: Tensor, w_k: Tensor, w_v: Tensor, w_o: Tensor) -> Result<Self> {
        let c = w_q.shape()[0];
        for t in [&w_q, &w_k, &w_v, &w_o] {
            if t.shape() != [c, c] {
                return Err(Error::Validation(format!(
                    "attention projections must be square C×C, got {:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self { w_q, w_k, w_v, w_o })
    }

    pub fn init(c: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let s = 1.0 / (c as f64).sqrt();
        let mut m = || uniform_tensor(&[c, c], -s, s, &mut rng);
        Self::new(m(), m(), m(), m())
    }

    pub fn channels(&self) -> usize {
        self.w_q.shape()[0]
    }
}

/// Bytes of tensor storage the forward pass allocates at its high-water mark.
pub fn estimated_peak_bytes(tokens: u64, c: u64) -> u64 {
    let projection = 2 * c * c + tokens * c;
    let scoring = tokens * tokens + tokens * c + c * SCORE_BLOCK as u64;
    8 * projection.max(scoring)
}

pub fn attention_fuse_forward(
    f: &FeatureStack,
    w: &AttnWeights,
    memory_cap: u64,
) -> Result<FeatureStack> {
    let c = f.channels();
    if w.channels() != c {
        return Err(Error::dim("attention_fuse_forward", f.tensor().shape(), w.w_q.shape()));
    }
    let t = f.tokens();
    let estimated = estimated_peak_bytes(t as u64, c as u64);
    if estimated > memory_cap {
        return Err(Error::Resource {
            what: "attention score matrix",
            estimated_bytes: estimated,
            cap_bytes: memory_cap,
        });
    }
    let x = f.tensor().data();

    // M = W_q · W_kᵀ
    let mut w_k_t = Tensor::zeros(&[c, c]);
    for i in 0..c {
        for j in 0..c {
            w_k_t.data_mut()[j * c + i] = w.w_k.data()[i * c + j];
        }
    }
    let m = matmul(&w.w_q, &w_k_t)?;
    drop(w_k_t);
    let mut qm = Tensor::zeros(&[t, c]);
    gemm_rows(x, m.data(), qm.data_mut(), t, c, c);
    drop(m);

    let mut scores = Tensor::zeros(&[t, t]);
    {
        let mut x_t = Tensor::zeros(&[c, SCORE_BLOCK]);
        for j0 in (0..t).step_by(SCORE_BLOCK) {
            let width = SCORE_BLOCK.min(t - j0);
            for p in 0..c {
                for jj in 0..width {
                    x_t.data_mut()[p * SCORE_BLOCK + jj] = x[(j0 + jj) * c + p];
                }
            }
            gemm_strided(qm.data(), c, x_t.data(), SCORE_BLOCK, &mut scores.data_mut()[j0..], t, t, c, width);
        }
    }
    drop(qm);

    let scale = 1.0 / (c as f64).sqrt();
    for row in scores.data_mut().chunks_exact_mut(t) {
        let mut max = f64::NEG_INFINITY;
        for v in row.iter_mut() {
            *v *= scale;
            max = max.max(*v);
        }
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }

    let mut out = Tensor::zeros(&[t, c]);
    gemm_rows(scores.data(), x, out.data_mut(), t, t, c);
    drop(scores);

    let mut v = vec![0.0; c];
    for (i, row) in out.data_mut().chunks_exact_mut(c).enumerate() {
        v.fill(0.0);
        gemm_rows(row, w.w_v.data(), &mut v, 1, c, c);
        row.fill(0.0);
        gemm_rows(&v, w.w_o.data(), row, 1, c, c);
        for (o, xv) in row.iter_mut().zip(&x[i * c..(i + 1) * c]) {
            *o += xv;
        }
    }
    FeatureStack::new(out.reshape(f.tensor().shape())?)
}

/// Row-stochastic attention weights for a `T×C` token matrix; exposed for
/// the row-sum property checks.
pub fn attention_probabilities(x: &Tensor, w: &AttnWeights) -> Result<Tensor> {
    let c = x.shape()[1];
    let q = matmul(x, &w.w_q)?;
    let k = matmul(x, &w.w_k)?;
    let t = x.shape()[0];
    let scale = 1.0 / (c as f64).sqrt();
    let mut p = Tensor::zeros(&[t, t]);
    for i in 0..t {
        let row = p.outer_mut(i);
        for j in 0..t {
            row[j] = (0..c).map(|d| q.at(&[i, d]) * k.at(&[j, d])).sum::<f64>() * scale;
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(p)
}
