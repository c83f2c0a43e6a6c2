//! Evaluators for `h_t = ā_t·h_{t-1} + b̄_t·u_t`, `y_t = Σ c_t·h_t + D·u_t`
//! with `h_0 = 0`.

use rayon::prelude::*;

use super::discretize::{zoh_discretize, DiagSsmParams, DiscreteParams, SsmParams};
use crate::error::{Error, Result};
use crate::Tensor;

/// Associative combine for the linear recurrence; `first` precedes `second`.
#[inline]
pub fn combine(first: (f64, f64), second: (f64, f64)) -> (f64, f64) {
    (first.0 * second.0, second.0 * first.1 + second.1)
}

const IDENTITY: (f64, f64) = (1.0, 0.0);

struct ScanShape {
    len: usize,
    channels: usize,
    state: usize,
    per_step_c: bool,
}

fn check(dp: &DiscreteParams, c: &Tensor, u: &Tensor, d_skip: &Tensor) -> Result<ScanShape> {
    if u.rank() != 2 {
        return Err(Error::Shape {
            shape: u.shape().to_vec(),
            reason: "input sequence must be L×D".into(),
        });
    }
    let (len, channels, state) = (u.shape()[0], dp.channels(), dp.state_size());
    if u.shape()[1] != channels {
        return Err(Error::dim("scan input", u.shape(), dp.a_bar.shape()));
    }
    if let Some(steps) = dp.steps() {
        if steps != len {
            return Err(Error::dim("scan length", u.shape(), dp.a_bar.shape()));
        }
    }
    let per_step_c = match c.shape() {
        [n] if *n == state => false,
        [l, n] if *l == len && *n == state => true,
        _ => return Err(Error::dim("scan readout", c.shape(), dp.a_bar.shape())),
    };
    if d_skip.shape() != [channels] {
        return Err(Error::dim("scan d_skip", d_skip.shape(), u.shape()));
    }
    Ok(ScanShape {
        len,
        channels,
        state,
        per_step_c,
    })
}

fn readout_at(c: &Tensor, per_step: bool, t: usize) -> &[f64] {
    if per_step {
        c.outer(t)
    } else {
        c.data()
    }
}

/// Reference evaluator: one step at a time.
pub fn scan_sequential(
    dp: &DiscreteParams,
    c: &Tensor,
    u: &Tensor,
    d_skip: &Tensor,
) -> Result<Tensor> {
    let sh = check(dp, c, u, d_skip)?;
    let n = sh.state;
    let mut h = Tensor::zeros(&[sh.channels, n]);
    let mut y = Tensor::zeros(&[sh.len, sh.channels]);
    for t in 0..sh.len {
        let (a, b) = (dp.a_at(t), dp.b_at(t));
        let ct = readout_at(c, sh.per_step_c, t);
        let ut = u.outer(t);
        let hs = h.data_mut();
        let yt = &mut y.data_mut()[t * sh.channels..(t + 1) * sh.channels];
        for d in 0..sh.channels {
            let ud = ut[d];
            let mut acc = 0.0;
            for s in d * n..(d + 1) * n {
                hs[s] = a[s] * hs[s] + b[s] * ud;
                acc += ct[s - d * n] * hs[s];
            }
            yt[d] = acc + d_skip.data()[d] * ud;
        }
    }
    Ok(y)
}

/// Work-efficient exclusive scan over rows of `lanes` independent pairs.
/// `rows.len()` must be a power of two.
fn blelloch_exclusive(rows: &mut [Vec<(f64, f64)>]) {
    let n = rows.len();
    debug_assert!(n.is_power_of_two());
    let mut stride = 1;
    while stride < n {
        let mut i = 2 * stride - 1;
        while i < n {
            let (lo, hi) = rows.split_at_mut(i);
            for (r, l) in hi[0].iter_mut().zip(&lo[i - stride]) {
                *r = combine(*l, *r);
            }
            i += 2 * stride;
        }
        stride *= 2;
    }
    for v in rows[n - 1].iter_mut() {
        *v = IDENTITY;
    }
    stride = n / 2;
    while stride >= 1 {
        let mut i = 2 * stride - 1;
        while i < n {
            let (lo, hi) = rows.split_at_mut(i);
            let left = &mut lo[i - stride];
            for (r, l) in hi[0].iter_mut().zip(left.iter_mut()) {
                let left_sum = *l;
                *l = *r;
                *r = combine(*r, left_sum);
            }
            i += 2 * stride;
        }
        stride /= 2;
    }
}

/// Blocked parallel scan. Each block of `chunk` steps is scanned locally from
/// a zero state; block aggregates are combined with an exclusive Blelloch
/// scan; each block is then corrected by its incoming carry. Blocks run on
/// the rayon pool.
pub fn scan_parallel(
    dp: &DiscreteParams,
    c: &Tensor,
    u: &Tensor,
    d_skip: &Tensor,
    chunk: usize,
) -> Result<Tensor> {
    if chunk == 0 {
        return Err(Error::Domain("chunk must be >= 1".into()));
    }
    let sh = check(dp, c, u, d_skip)?;
    let (len, dch, n) = (sh.len, sh.channels, sh.state);
    let lanes = dch * n;
    let blocks = len.div_ceil(chunk);

    // Local states and running transition products, L×D×N each.
    let mut local_h = Tensor::zeros(&[len, dch, n]);
    let mut local_a = Tensor::zeros(&[len, dch, n]);
    local_h
        .data_mut()
        .par_chunks_mut(chunk * lanes)
        .zip(local_a.data_mut().par_chunks_mut(chunk * lanes))
        .enumerate()
        .for_each(|(blk, (hb, ab))| {
            let start = blk * chunk;
            let steps = hb.len() / lanes;
            for k in 0..steps {
                let t = start + k;
                let (a, b) = (dp.a_at(t), dp.b_at(t));
                let ut = u.outer(t);
                for d in 0..dch {
                    let ud = ut[d];
                    for s in d * n..(d + 1) * n {
                        let (prev_h, prev_a) = if k == 0 {
                            (0.0, 1.0)
                        } else {
                            (hb[(k - 1) * lanes + s], ab[(k - 1) * lanes + s])
                        };
                        hb[k * lanes + s] = a[s] * prev_h + b[s] * ud;
                        ab[k * lanes + s] = prev_a * a[s];
                    }
                }
            }
        });

    let mut carries: Vec<Vec<(f64, f64)>> = (0..blocks.next_power_of_two())
        .map(|blk| {
            if blk < blocks {
                let last = ((blk + 1) * chunk).min(len) - 1;
                (0..lanes)
                    .map(|s| {
                        (
                            local_a.data()[last * lanes + s],
                            local_h.data()[last * lanes + s],
                        )
                    })
                    .collect()
            } else {
                vec![IDENTITY; lanes]
            }
        })
        .collect();
    blelloch_exclusive(&mut carries);

    let mut y = Tensor::zeros(&[len, dch]);
    y.data_mut()
        .par_chunks_mut(chunk * dch)
        .zip(local_h.data_mut().par_chunks_mut(chunk * lanes))
        .enumerate()
        .for_each(|(blk, (yb, hb))| {
            let start = blk * chunk;
            let carry = &carries[blk];
            for k in 0..yb.len() / dch {
                let t = start + k;
                let ct = readout_at(c, sh.per_step_c, t);
                let ut = u.outer(t);
                for d in 0..dch {
                    let mut acc = 0.0;
                    for s in d * n..(d + 1) * n {
                        let mut h = hb[k * lanes + s];
                        if blk > 0 {
                            h += local_a.data()[t * lanes + s] * carry[s].1;
                        }
                        acc += ct[s - d * n] * h;
                    }
                    yb[k * dch + d] = acc + d_skip.data()[d] * ut[d];
                }
            }
        });
    Ok(y)
}

/// Convolution kernel `k[x, d] = Σ_n c_n · ā_{d,n}^x · b̄_{d,n}` of a
/// time-invariant model. Time-varying parameters have no such kernel.
pub fn lti_kernel_materialize(params: SsmParams<'_>, len: usize) -> Result<Tensor> {
    let p: &DiagSsmParams = match params {
        SsmParams::Lti(p) => p,
        SsmParams::Selective { .. } => {
            return Err(Error::Mode(
                "selective (time-varying) parameters have no convolution kernel".into(),
            ))
        }
    };
    if len == 0 {
        return Err(Error::Domain("kernel length must be >= 1".into()));
    }
    let dp = zoh_discretize(params)?;
    let (dch, n) = (p.channels(), p.state_size());
    let mut power = Tensor::filled(&[dch, n], 1.0);
    let mut kernel = Tensor::zeros(&[len, dch]);
    for x in 0..len {
        let row = kernel.outer_mut(x);
        for d in 0..dch {
            let mut acc = 0.0;
            for s in 0..n {
                let i = d * n + s;
                acc += p.c.data()[s] * power.data()[i] * dp.b_bar.data()[i];
            }
            row[d] = acc;
        }
        for (pw, a) in power.data_mut().iter_mut().zip(dp.a_bar.data()) {
            *pw *= a;
        }
    }
    Ok(kernel)
}

/// Causal convolution `y[t] = Σ_{j≤t} k[t-j]·u[j] + D·u[t]`, per channel.
pub fn lti_convolve(u: &Tensor, kernel: &Tensor, d_skip: &Tensor) -> Result<Tensor> {
    if u.rank() != 2 || kernel.rank() != 2 || u.shape()[1] != kernel.shape()[1] {
        return Err(Error::dim("lti_convolve", u.shape(), kernel.shape()));
    }
    let (len, dch) = (u.shape()[0], u.shape()[1]);
    if kernel.shape()[0] < len {
        return Err(Error::dim("lti_convolve kernel length", u.shape(), kernel.shape()));
    }
    if d_skip.shape() != [dch] {
        return Err(Error::dim("lti_convolve d_skip", u.shape(), d_skip.shape()));
    }
    let mut y = Tensor::zeros(&[len, dch]);
    for t in 0..len {
        for d in 0..dch {
            let mut acc = 0.0;
            for j in 0..=t {
                acc += kernel.at(&[t - j, d]) * u.at(&[j, d]);
            }
            y.set(&[t, d], acc + d_skip.data()[d] * u.at(&[t, d]));
        }
    }
    Ok(y)
}
