//! One gated selective-SSM block with pre-norm and a residual connection:
//!
//! ```text
//! x, z = LN(seq)·W_in_x, LN(seq)·W_in_z
//! x    = SiLU(causal_dwconv(x))
//! y    = SelectiveScan(x; Δ, B, C from x) ⊙ SiLU(z)
//! out  = seq + y·W_out
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::random::{seeded, uniform_tensor};
use crate::ssm::{selective_parameterize, selective_scan};
use crate::tensor::{activation, layer_norm, linear, silu, softplus_inverse, Activation};
use crate::{Tensor, LN_EPS};

pub const CONV_WIDTH: usize = 4;
pub const EXPANSION: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct MambaBlockWeights {
    pub norm_gamma: Tensor,
    pub norm_beta: Tensor,
    /// `C×E`
    pub w_in_x: Tensor,
    /// `C×E`
    pub w_in_z: Tensor,
    /// `k_conv×E`, last row multiplies the current step
    pub conv1d_k: Tensor,
    /// `E×E`
    pub w_delta: Tensor,
    pub delta_bias: Tensor,
    /// `E×N`
    pub w_b: Tensor,
    /// `E×N`
    pub w_c: Tensor,
    /// `E×N`, `log(-A)`
    pub a_log: Tensor,
    pub d_skip: Tensor,
    /// `E×C`
    pub w_out: Tensor,
}

impl MambaBlockWeights {
    pub fn model_dim(&self) -> usize {
        self.w_in_x.shape()[0]
    }

    pub fn inner_dim(&self) -> usize {
        self.w_in_x.shape()[1]
    }

    pub fn state_size(&self) -> usize {
        self.a_log.shape()[1]
    }

    pub fn conv_width(&self) -> usize {
        self.conv1d_k.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let (c, e, n) = (self.model_dim(), self.inner_dim(), self.state_size());
        let expect: [(&str, &Tensor, Vec<usize>); 12] = [
            ("norm_gamma", &self.norm_gamma, vec![c]),
            ("norm_beta", &self.norm_beta, vec![c]),
            ("w_in_x", &self.w_in_x, vec![c, e]),
            ("w_in_z", &self.w_in_z, vec![c, e]),
            ("conv1d_k", &self.conv1d_k, vec![self.conv_width(), e]),
            ("w_delta", &self.w_delta, vec![e, e]),
            ("delta_bias", &self.delta_bias, vec![e]),
            ("w_b", &self.w_b, vec![e, n]),
            ("w_c", &self.w_c, vec![e, n]),
            ("a_log", &self.a_log, vec![e, n]),
            ("d_skip", &self.d_skip, vec![e]),
            ("w_out", &self.w_out, vec![e, c]),
        ];
        for (name, t, shape) in expect {
            if t.shape() != shape.as_slice() {
                return Err(Error::Validation(format!(
                    "mamba weight {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        if e < c {
            return Err(Error::Validation(format!("inner dim {e} below model dim {c}")));
        }
        if !self.a_log.all_finite() {
            return Err(Error::Validation("a_log must be finite".into()));
        }
        Ok(())
    }

    /// Zeroes the output projection so the block is the identity map.
    pub fn zero_branch(&mut self) {
        self.w_out.data_mut().fill(0.0);
    }
}

/// Seeded initialization. `-A` spans `[1, N]` geometrically along the state
/// axis and the initial step size `softplus(delta_bias)` lies in
/// `[1e-3, 1e-1]`.
pub fn init_block_weights(c: usize, e: usize, n: usize, seed: u64) -> Result<MambaBlockWeights> {
    if c == 0 || e == 0 || n == 0 {
        return Err(Error::Domain(format!("block dims must be >= 1, got C={c} E={e} N={n}")));
    }
    let mut rng = seeded(seed);
    let s_c = 1.0 / (c as f64).sqrt();
    let s_e = 1.0 / (e as f64).sqrt();
    let s_k = 1.0 / (CONV_WIDTH as f64).sqrt();
    let w_in_x = uniform_tensor(&[c, e], -s_c, s_c, &mut rng);
    let w_in_z = uniform_tensor(&[c, e], -s_c, s_c, &mut rng);
    let conv1d_k = uniform_tensor(&[CONV_WIDTH, e], -s_k, s_k, &mut rng);
    let w_delta = uniform_tensor(&[e, e], -s_e, s_e, &mut rng);
    let (lo, hi) = ((1e-3f64).ln(), (1e-1f64).ln());
    let margin = 1e-9;
    let delta_bias = Tensor::from_fn(&[e], |_| {
        softplus_inverse(rng.gen_range(lo + margin..hi - margin).exp())
    });
    let w_b = uniform_tensor(&[e, n], -s_e, s_e, &mut rng);
    let w_c = uniform_tensor(&[e, n], -s_e, s_e, &mut rng);
    let span = if n > 1 { (n as f64).ln() / (n - 1) as f64 } else { 0.0 };
    let a_log = Tensor::from_fn(&[e, n], |i| (i % n) as f64 * span);
    let w_out = uniform_tensor(&[e, c], -s_e, s_e, &mut rng);
    let w = MambaBlockWeights {
        norm_gamma: Tensor::filled(&[c], 1.0),
        norm_beta: Tensor::zeros(&[c]),
        w_in_x,
        w_in_z,
        conv1d_k,
        w_delta,
        delta_bias,
        w_b,
        w_c,
        a_log,
        d_skip: Tensor::filled(&[e], 1.0),
        w_out,
    };
    w.validate()?;
    Ok(w)
}

/// `y[t, e] = Σ_j k[j, e] · x[t - (width-1) + j, e]`, zero before the start.
pub fn causal_depthwise_conv1d(x: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    if x.rank() != 2 || kernel.rank() != 2 || x.shape()[1] != kernel.shape()[1] {
        return Err(Error::dim("causal_depthwise_conv1d", x.shape(), kernel.shape()));
    }
    let (len, e) = (x.shape()[0], x.shape()[1]);
    let width = kernel.shape()[0];
    let mut y = Tensor::zeros(&[len, e]);
    for t in 0..len {
        let out = &mut y.data_mut()[t * e..(t + 1) * e];
        for j in 0..width {
            let Some(src) = (t + j + 1).checked_sub(width) else {
                continue;
            };
            let k = kernel.outer(j);
            let xs = x.outer(src);
            for ch in 0..e {
                out[ch] += k[ch] * xs[ch];
            }
        }
    }
    Ok(y)
}

pub fn mamba_block_forward(seq: &Tensor, w: &MambaBlockWeights) -> Result<Tensor> {
    if seq.rank() != 2 || seq.shape()[1] != w.model_dim() {
        return Err(Error::dim("mamba_block_forward", seq.shape(), w.w_in_x.shape()));
    }
    let normed = layer_norm(seq, &w.norm_gamma, &w.norm_beta, LN_EPS)?;
    let x = linear(&normed, &w.w_in_x, None)?;
    let z = linear(&normed, &w.w_in_z, None)?;
    drop(normed);
    let x = activation(&causal_depthwise_conv1d(&x, &w.conv1d_k)?, Activation::Silu);
    let sel = selective_parameterize(&x, &w.w_delta, &w.w_b, &w.w_c, &w.delta_bias)?;
    let mut y = selective_scan(&x, &sel, &w.a_log, &w.d_skip)?;
    drop(sel);
    drop(x);
    for (yv, zv) in y.data_mut().iter_mut().zip(z.data()) {
        *yv *= silu(*zv);
    }
    drop(z);
    let mut out = linear(&y, &w.w_out, None)?;
    for (o, s) in out.data_mut().iter_mut().zip(seq.data()) {
        *o += s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_tensor;
    use crate::tensor::softplus;

    #[test]
    fn zero_output_projection_is_identity() {
        let mut w = init_block_weights(6, 12, 4, 1).unwrap();
        w.zero_branch();
        let seq = random_tensor(&[9, 6], 2);
        assert_eq!(mamba_block_forward(&seq, &w).unwrap(), seq);
    }

    #[test]
    fn length_one_sequence() {
        let w = init_block_weights(4, 8, 3, 3).unwrap();
        let seq = random_tensor(&[1, 4], 4);
        let a = mamba_block_forward(&seq, &w).unwrap();
        let b = mamba_block_forward(&seq, &w).unwrap();
        assert!(a.all_finite());
        assert_eq!(a, b);
    }

    #[test]
    fn causal_conv_length_one_is_pointwise() {
        let x = random_tensor(&[1, 3], 1);
        let k = random_tensor(&[CONV_WIDTH, 3], 2);
        let y = causal_depthwise_conv1d(&x, &k).unwrap();
        for ch in 0..3 {
            assert_eq!(y.data()[ch], k.at(&[CONV_WIDTH - 1, ch]) * x.data()[ch]);
        }
    }

    #[test]
    fn init_is_seeded() {
        let a = init_block_weights(4, 8, 16, 7).unwrap();
        assert_eq!(a, init_block_weights(4, 8, 16, 7).unwrap());
        assert_ne!(a, init_block_weights(4, 8, 16, 8).unwrap());
        for b in a.delta_bias.data() {
            let d = softplus(*b);
            assert!((1e-3..=1e-1).contains(&d), "{d}");
        }
        let neg_a: Vec<f64> = (0..16).map(|s| a.a_log.at(&[0, s]).exp()).collect();
        assert!((neg_a[0] - 1.0).abs() < 1e-12 && (neg_a[15] - 16.0).abs() < 1e-12);
        let ratio = neg_a[1] / neg_a[0];
        assert!(neg_a.windows(2).all(|p| (p[1] / p[0] - ratio).abs() < 1e-12));
        assert!(init_block_weights(0, 8, 2, 1).is_err());
    }

    #[test]
    fn causal_in_time() {
        let w = init_block_weights(4, 8, 4, 5).unwrap();
        let seq = random_tensor(&[20, 4], 6);
        let base = mamba_block_forward(&seq, &w).unwrap();
        let mut perturbed = seq.clone();
        for v in &mut perturbed.data_mut()[12 * 4..] {
            *v += 0.7;
        }
        let out = mamba_block_forward(&perturbed, &w).unwrap();
        assert_eq!(&out.data()[..12 * 4], &base.data()[..12 * 4]);
        assert_ne!(&out.data()[12 * 4..], &base.data()[12 * 4..]);
    }

    #[test]
    fn bounded_inputs_stay_finite() {
        let w = init_block_weights(4, 8, 8, 9).unwrap();
        let seq = random_tensor(&[64, 4], 10).scale(1e3);
        assert!(mamba_block_forward(&seq, &w).unwrap().all_finite());
    }
}
