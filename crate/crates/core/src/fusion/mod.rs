//! Multi-agent fusion: the four-direction cooperative scan over a stack of
//! agent BEV maps, agent-axis pooling, and the network that joins them.

mod cross_scan;
mod gpm;
mod network;

pub use cross_scan::{
    cross_merge, cross_scan, css2d_forward, css2d_forward_with, scan_position, Branches,
    DirectionCode,
};
pub use gpm::{agent_pool, gpm_forward};
pub use network::{comamba_fusion_forward, comamba_fusion_forward_with, FusionWeights};

use crate::error::{Error, Result};
use crate::Tensor;

/// `K×H×W×C` stack of agent feature maps; agent 0 is the ego vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack(Tensor);

impl FeatureStack {
    pub fn new(t: Tensor) -> Result<Self> {
        if t.rank() != 4 {
            return Err(Error::Shape {
                shape: t.shape().to_vec(),
                reason: "feature stack must be K×H×W×C".into(),
            });
        }
        if !t.all_finite() {
            return Err(Error::Validation("feature stack contains non-finite values".into()));
        }
        Ok(Self(t))
    }

    /// Stacks the ego map (`1×H×W×C`) in front of the received maps
    /// (`N×H×W×C`, absent when no other agent is connected).
    pub fn from_agents(ego: &Tensor, cavs: Option<&Tensor>) -> Result<Self> {
        if ego.rank() != 4 || ego.shape()[0] != 1 {
            return Err(Error::Shape {
                shape: ego.shape().to_vec(),
                reason: "ego features must be 1×H×W×C".into(),
            });
        }
        let Some(cavs) = cavs else {
            return Self::new(ego.clone());
        };
        if cavs.rank() != 4 || cavs.shape()[1..] != ego.shape()[1..] {
            return Err(Error::dim("stack ego/cav features", ego.shape(), cavs.shape()));
        }
        let mut shape = ego.shape().to_vec();
        shape[0] += cavs.shape()[0];
        let mut data = Vec::with_capacity(ego.numel() + cavs.numel());
        data.extend_from_slice(ego.data());
        data.extend_from_slice(cavs.data());
        Self::new(Tensor::new(&shape, data)?)
    }

    pub fn agents(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[3]
    }

    /// Number of scan tokens, `K·H·W`.
    pub fn tokens(&self) -> usize {
        self.agents() * self.height() * self.width()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Reorders agent slices: slice `i` of the result is slice `perm[i]`.
    pub fn permute_agents(&self, perm: &[usize]) -> Result<Self> {
        let k = self.agents();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Contract(format!("{perm:?} is not a permutation of 0..{k}")));
        }
        let mut out = Tensor::zeros(self.0.shape());
        for (dst, &src) in perm.iter().enumerate() {
            out.outer_mut(dst).copy_from_slice(self.0.outer(src));
        }
        Ok(Self(out))
    }
}
