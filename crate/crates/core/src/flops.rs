//! Analytic operation counts for the fusion network and the attention
//! baseline.
//!
//! Counting convention: one unit per multiply-add in dense products and
//! convolutions, one unit per element for elementwise arithmetic and
//! nonlinearities. Each primitive has its own counter in [`op`]; network
//! totals are plain sums of those.

use crate::mamba::{CONV_WIDTH, EXPANSION};

pub mod op {
    pub fn linear(rows: u64, k: u64, n: u64, bias: bool) -> u64 {
        rows * k * n + if bias { rows * n } else { 0 }
    }

    /// Mean, variance, normalize, affine.
    pub fn layer_norm(rows: u64, c: u64) -> u64 {
        4 * rows * c
    }

    pub fn depthwise_conv3x3(k: u64, h: u64, w: u64, c: u64) -> u64 {
        9 * k * h * w * c
    }

    pub fn causal_conv1d(len: u64, e: u64, width: u64) -> u64 {
        width * len * e
    }

    pub fn elementwise(n: u64) -> u64 {
        n
    }

    /// `ā` and the input coefficient per (step, channel, state).
    pub fn zoh(len: u64, e: u64, n: u64) -> u64 {
        2 * len * e * n
    }

    /// `ā·h + b̄·u`, `c·h` per state, plus the `D·u` skip.
    pub fn scan(len: u64, e: u64, n: u64) -> u64 {
        3 * len * e * n + len * e
    }

    /// Max and sum over agents, then `max + sum/K`.
    pub fn agent_pool(k: u64, h: u64, w: u64, c: u64) -> u64 {
        2 * k * h * w * c + 2 * h * w * c
    }

    /// Row max, `exp`, normalize.
    pub fn softmax(rows: u64, cols: u64) -> u64 {
        3 * rows * cols
    }
}

/// One gated selective-SSM block over `len` tokens.
pub fn mamba_block(len: u64, c: u64, e: u64, n: u64) -> u64 {
    op::layer_norm(len, c)
        + 2 * op::linear(len, c, e, false)
        + op::causal_conv1d(len, e, CONV_WIDTH as u64)
        + op::elementwise(len * e) // SiLU
        + op::linear(len, e, e, true)
        + op::elementwise(len * e) // softplus
        + 2 * op::linear(len, e, n, false)
        + op::zoh(len, e, n)
        + op::scan(len, e, n)
        + 2 * op::elementwise(len * e) // SiLU(z), gate
        + op::linear(len, e, c, false)
        + op::elementwise(len * c) // residual
}

/// Whole fusion forward for `k` agents. Affine in `k`.
pub fn analytic_flops_comamba(k: u64, h: u64, w: u64, c: u64, n_state: u64) -> u64 {
    let t = k * h * w;
    let e = EXPANSION as u64 * c;
    op::layer_norm(t, c)
        + op::depthwise_conv3x3(k, h, w, c)
        + op::linear(t, c, c, true)
        + 4 * mamba_block(t, c, e, n_state)
        + 4 * op::elementwise(t * c) // scatter-add of four directions
        + op::layer_norm(t, c)
        + op::linear(t, c, c, true)
        + op::elementwise(t * c) // skip
        + op::layer_norm(t, c)
        + op::linear(t, c, c, true)
        + op::agent_pool(k, h, w, c)
}

/// Single-head global attention over `T = k·h·w` tokens, as evaluated by
/// [`attention_fuse_forward`](crate::attention::attention_fuse_forward):
/// `W_q·W_kᵀ`, `X·M`, the `T×T` score matrix, softmax, the `T×T` mix, value
/// and output projections, residual.
pub fn analytic_flops_attention(k: u64, h: u64, w: u64, c: u64) -> u64 {
    let t = k * h * w;
    op::linear(c, c, c, false)
        + op::linear(t, c, c, false)
        + op::linear(t, c, t, false)
        + op::elementwise(t * t) // 1/sqrt(C) scaling
        + op::softmax(t, t)
        + op::linear(t, t, c, false)
        + 2 * op::linear(t, c, c, false)
        + op::elementwise(t * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comamba_is_affine_in_agents() {
        let f = |k| analytic_flops_comamba(k, 32, 32, 64, 16);
        assert_eq!(f(2) - f(1), f(3) - f(2));
        assert_eq!(f(8) - f(4), 4 * (f(2) - f(1)));
    }

    #[test]
    fn comamba_single_agent_component_sum() {
        let (h, w, c, n) = (3u64, 5, 4, 2);
        let t = h * w;
        let e = 2 * c;
        let block = t * c * 4 // LN
            + 2 * t * c * e
            + 4 * t * e // conv width 4
            + t * e
            + (t * e * e + t * e)
            + t * e
            + 2 * t * e * n
            + 2 * t * e * n
            + (3 * t * e * n + t * e)
            + 2 * t * e
            + t * e * c
            + t * c;
        let total = 4 * t * c
            + 9 * t * c
            + (t * c * c + t * c)
            + 4 * block
            + 4 * t * c
            + 4 * t * c
            + (t * c * c + t * c)
            + t * c
            + 4 * t * c
            + (t * c * c + t * c)
            + (2 * t * c + 2 * t * c);
        assert_eq!(analytic_flops_comamba(1, h, w, c, n), total);
    }

    #[test]
    fn doubling_channels_quadruples_linear_terms() {
        let (t, c) = (100u64, 8u64);
        assert_eq!(op::linear(t, 2 * c, 2 * c, false), 4 * op::linear(t, c, c, false));
    }

    #[test]
    fn attention_is_quadratic_in_agents() {
        let f = |k| analytic_flops_attention(k, 32, 32, 64) as i128;
        let d2 = |k: i128| f(k as u64 + 2) - 2 * f(k as u64 + 1) + f(k as u64);
        assert!(d2(1) > 0);
        assert_eq!(d2(1), d2(5));
        let ratio = f(64) as f64 / f(32) as f64;
        assert!((ratio - 4.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn attention_single_token_hand_count() {
        let c = 3u64;
        let projections = c * c * c + c * c + 2 * c * c; // M, X·M, W_v, W_o
        let one_by_one = c + 1 + 3 + c; // score, scale, softmax, mix
        let residual = c;
        assert_eq!(analytic_flops_attention(1, 1, 1, c), projections + one_by_one + residual);
    }
}
