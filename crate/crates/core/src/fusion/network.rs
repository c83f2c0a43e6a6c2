use super::cross_scan::{css2d_forward_with, Branches};
use super::gpm::gpm_forward;
use super::FeatureStack;
use crate::error::{Error, Result};
use crate::mamba::{init_block_weights, MambaBlockWeights, EXPANSION};
use crate::random::{seeded, uniform_tensor};
use crate::tensor::{depthwise_conv2d_3x3, layer_norm, linear};
use crate::{Tensor, LN_EPS};

/// Parameters of the whole fusion network for `C` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub ln_in_gamma: Tensor,
    pub ln_in_beta: Tensor,
    /// `3×3×C`
    pub dw_kernel: Tensor,
    pub dw_bias: Tensor,
    /// `C×C`
    pub proj_in: Tensor,
    pub proj_in_bias: Tensor,
    /// One block per scan direction, in [`DirectionCode::ALL`](super::DirectionCode::ALL) order.
    pub blocks: [MambaBlockWeights; 4],
    pub ln_mid_gamma: Tensor,
    pub ln_mid_beta: Tensor,
    /// `C×C`
    pub proj_out: Tensor,
    pub proj_out_bias: Tensor,
    pub gpm_gamma: Tensor,
    pub gpm_beta: Tensor,
    /// `C×C`
    pub gpm_w: Tensor,
    pub gpm_bias: Tensor,
}

impl FusionWeights {
    pub fn init(channels: usize, state_size: usize, seed: u64) -> Result<Self> {
        let c = channels;
        if c == 0 || state_size == 0 {
            return Err(Error::Domain("channels and state size must be >= 1".into()));
        }
        let mut rng = seeded(seed);
        let s = 1.0 / (c as f64).sqrt();
        let mut dense = |shape: &[usize], scale: f64| uniform_tensor(shape, -scale, scale, &mut rng);
        let dw_kernel = dense(&[3, 3, c], 1.0 / 3.0);
        let dw_bias = dense(&[c], 0.1);
        let proj_in = dense(&[c, c], s);
        let proj_in_bias = dense(&[c], 0.1);
        let proj_out = dense(&[c, c], s);
        let proj_out_bias = dense(&[c], 0.1);
        let gpm_w = dense(&[c, c], s);
        let gpm_bias = dense(&[c], 0.1);
        let blocks = [0u64, 1, 2, 3].map(|i| {
            init_block_weights(c, EXPANSION * c, state_size, seed.wrapping_mul(31).wrapping_add(1 + i))
        });
        let [b0, b1, b2, b3] = blocks;
        Ok(Self {
            ln_in_gamma: Tensor::filled(&[c], 1.0),
            ln_in_beta: Tensor::zeros(&[c]),
            dw_kernel,
            dw_bias,
            proj_in,
            proj_in_bias,
            blocks: [b0?, b1?, b2?, b3?],
            ln_mid_gamma: Tensor::filled(&[c], 1.0),
            ln_mid_beta: Tensor::zeros(&[c]),
            proj_out,
            proj_out_bias,
            gpm_gamma: Tensor::filled(&[c], 1.0),
            gpm_beta: Tensor::zeros(&[c]),
            gpm_w,
            gpm_bias,
        })
    }

    pub fn channels(&self) -> usize {
        self.proj_in.shape()[0]
    }

    pub fn state_size(&self) -> usize {
        self.blocks[0].state_size()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        for b in &self.blocks {
            b.validate()?;
            if b.model_dim() != c {
                return Err(Error::Validation(format!(
                    "mamba block width {} differs from fusion width {c}",
                    b.model_dim()
                )));
            }
        }
        let vecs = [
            &self.ln_in_gamma,
            &self.ln_in_beta,
            &self.dw_bias,
            &self.proj_in_bias,
            &self.ln_mid_gamma,
            &self.ln_mid_beta,
            &self.proj_out_bias,
            &self.gpm_gamma,
            &self.gpm_beta,
            &self.gpm_bias,
        ];
        let mats = [&self.proj_in, &self.proj_out, &self.gpm_w];
        if vecs.iter().any(|t| t.shape() != [c])
            || mats.iter().any(|t| t.shape() != [c, c])
            || self.dw_kernel.shape() != [3, 3, c]
        {
            return Err(Error::Validation(format!("fusion weights inconsistent with C={c}")));
        }
        Ok(())
    }
}

pub fn comamba_fusion_forward(
    f_ego: &Tensor,
    f_cav: Option<&Tensor>,
    w: &FusionWeights,
) -> Result<Tensor> {
    comamba_fusion_forward_with(f_ego, f_cav, w, Branches::Sequential)
}

/// `stack → LN → dwconv3×3 → Linear → CSS2D → LN → Linear (+ skip from the
/// first LN) → GPM`, producing the fused `1×H×W×C` map.
pub fn comamba_fusion_forward_with(
    f_ego: &Tensor,
    f_cav: Option<&Tensor>,
    w: &FusionWeights,
    branches: Branches,
) -> Result<Tensor> {
    let stack = FeatureStack::from_agents(f_ego, f_cav)?;
    if stack.channels() != w.channels() {
        return Err(Error::dim("comamba_fusion_forward", stack.tensor().shape(), w.proj_in.shape()));
    }
    let skip = layer_norm(stack.tensor(), &w.ln_in_gamma, &w.ln_in_beta, LN_EPS)?;
    drop(stack);
    let conv = depthwise_conv2d_3x3(&skip, &w.dw_kernel, &w.dw_bias)?;
    let embedded = FeatureStack::new(linear(&conv, &w.proj_in, Some(&w.proj_in_bias))?)?;
    drop(conv);
    let mixed = css2d_forward_with(&embedded, &w.blocks, branches)?;
    drop(embedded);
    let normed = layer_norm(mixed.tensor(), &w.ln_mid_gamma, &w.ln_mid_beta, LN_EPS)?;
    drop(mixed);
    let mut out = linear(&normed, &w.proj_out, Some(&w.proj_out_bias))?;
    drop(normed);
    for (o, s) in out.data_mut().iter_mut().zip(skip.data()) {
        *o += s;
    }
    drop(skip);
    gpm_forward(&FeatureStack::new(out)?, &w.gpm_gamma, &w.gpm_beta, &w.gpm_w, &w.gpm_bias)
}
