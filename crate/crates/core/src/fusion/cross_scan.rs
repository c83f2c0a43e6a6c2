use rayon::prelude::*;

use super::FeatureStack;
use crate::error::{Error, Result};
use crate::mamba::{mamba_block_forward, MambaBlockWeights};
use crate::Tensor;

/// Traversal order of one agent's `H×W` grid. Agents are always visited in
/// index order, ego first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionCode {
    /// Row-major, rows then columns ascending.
    RowFwd,
    /// Reverse of `RowFwd`.
    RowBwd,
    /// Column-major, columns then rows ascending.
    ColFwd,
    /// Reverse of `ColFwd`.
    ColBwd,
}

impl DirectionCode {
    pub const ALL: [DirectionCode; 4] = [
        DirectionCode::RowFwd,
        DirectionCode::RowBwd,
        DirectionCode::ColFwd,
        DirectionCode::ColBwd,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Flat cell index (`k·H·W + h·W + w`) visited at sequence position `pos`.
#[inline]
pub fn scan_position(dir: DirectionCode, h: usize, w: usize, pos: usize) -> usize {
    let hw = h * w;
    let (agent, q) = (pos / hw, pos % hw);
    let cell = match dir {
        DirectionCode::RowFwd => q,
        DirectionCode::RowBwd => hw - 1 - q,
        DirectionCode::ColFwd => (q % h) * w + q / h,
        DirectionCode::ColBwd => {
            let r = hw - 1 - q;
            (r % h) * w + r / h
        }
    };
    agent * hw + cell
}

/// Flattens the stack into a `(K·H·W)×C` sequence along `dir`.
pub fn cross_scan(f: &FeatureStack, dir: DirectionCode) -> Tensor {
    let (h, w, c) = (f.height(), f.width(), f.channels());
    let src = f.tensor().data();
    let mut out = Tensor::zeros(&[f.tokens(), c]);
    for (pos, row) in out.data_mut().chunks_exact_mut(c).enumerate() {
        let cell = scan_position(dir, h, w, pos);
        row.copy_from_slice(&src[cell * c..(cell + 1) * c]);
    }
    out
}

fn scatter_add(out: &mut Tensor, seq: &Tensor, dir: DirectionCode, h: usize, w: usize) {
    let c = out.last_dim();
    let dst = out.data_mut();
    for (pos, row) in seq.data().chunks_exact(c).enumerate() {
        let cell = scan_position(dir, h, w, pos);
        for (o, v) in dst[cell * c..(cell + 1) * c].iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// Restores each direction's sequence to grid order and sums the four grids,
/// in direction order.
pub fn cross_merge(seqs: &[Tensor], agents: usize, h: usize, w: usize) -> Result<FeatureStack> {
    if seqs.len() != DirectionCode::ALL.len() {
        return Err(Error::Contract(format!(
            "cross_merge needs exactly 4 sequences, got {}",
            seqs.len()
        )));
    }
    let c = seqs[0].last_dim();
    for s in seqs {
        if s.shape() != [agents * h * w, c] {
            return Err(Error::dim("cross_merge", s.shape(), &[agents * h * w, c]));
        }
    }
    let mut out = Tensor::zeros(&[agents, h, w, c]);
    for (seq, dir) in seqs.iter().zip(DirectionCode::ALL) {
        scatter_add(&mut out, seq, dir, h, w);
    }
    FeatureStack::new(out)
}

/// Execution of the four independent directional branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branches {
    #[default]
    Sequential,
    /// One rayon task per direction. Results are merged in direction order,
    /// so the output is bit-identical to `Sequential`.
    Parallel,
}

pub fn css2d_forward(f: &FeatureStack, blocks: &[MambaBlockWeights; 4]) -> Result<FeatureStack> {
    css2d_forward_with(f, blocks, Branches::Sequential)
}

/// Scan, process each direction with its own block, restore and sum.
pub fn css2d_forward_with(
    f: &FeatureStack,
    blocks: &[MambaBlockWeights; 4],
    branches: Branches,
) -> Result<FeatureStack> {
    let (k, h, w) = (f.agents(), f.height(), f.width());
    match branches {
        Branches::Sequential => {
            let mut out = Tensor::zeros(f.tensor().shape());
            for (dir, block) in DirectionCode::ALL.into_iter().zip(blocks) {
                let seq = cross_scan(f, dir);
                let processed = mamba_block_forward(&seq, block)?;
                drop(seq);
                scatter_add(&mut out, &processed, dir, h, w);
            }
            FeatureStack::new(out)
        }
        Branches::Parallel => {
            let seqs = DirectionCode::ALL
                .par_iter()
                .zip(blocks.par_iter())
                .map(|(&dir, block)| mamba_block_forward(&cross_scan(f, dir), block))
                .collect::<Result<Vec<_>>>()?;
            cross_merge(&seqs, k, h, w)
        }
    }
}
