//! Slow, direct reference implementations used as independent oracles by
//! the test suites and `verify`. None of these share code paths with the
//! kernels they check.

use crate::pipeline::GridConfig;
use crate::ssm::DiscreteParams;
use crate::Tensor;

pub fn matmul_naive(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    assert_eq!(b.shape()[0], k);
    let mut out = Tensor::zeros(&[m, n]);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a.at(&[i, p]) * b.at(&[p, j]);
            }
            out.set(&[i, j], acc);
        }
    }
    out
}

pub fn depthwise_conv_naive(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Tensor {
    let s = x.shape();
    let (k, h, w, c) = (s[0], s[1], s[2], s[3]);
    let mut out = Tensor::zeros(s);
    for a in 0..k {
        for i in 0..h as isize {
            for j in 0..w as isize {
                for ch in 0..c {
                    let mut acc = bias.data()[ch];
                    for di in -1isize..=1 {
                        for dj in -1isize..=1 {
                            let (si, sj) = (i + di, j + dj);
                            if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                                continue;
                            }
                            acc += kernel.at(&[(di + 1) as usize, (dj + 1) as usize, ch])
                                * x.at(&[a, si as usize, sj as usize, ch]);
                        }
                    }
                    out.set(&[a, i as usize, j as usize, ch], acc);
                }
            }
        }
    }
    out
}

/// Zero-order hold by truncated power series:
/// `ā = Σ x^k/k!`, `b̄ = Δ·b·Σ x^k/(k+1)!` with `x = Δ·a`.
pub fn zoh_series(a: f64, delta: f64, b: f64, terms: usize) -> (f64, f64) {
    let x = delta * a;
    let mut a_bar = 0.0;
    let mut phi = 0.0;
    let mut term = 1.0; // x^k / k!
    for k in 0..terms {
        a_bar += term;
        phi += term / (k as f64 + 1.0);
        term *= x / (k as f64 + 1.0);
    }
    (a_bar, delta * b * phi)
}

/// `y_x = Σ_{j≤x} Σ_n c_x[n]·(Π_{j<i≤x} ā_i[n])·b̄_j[n]·u_j + D·u_x`.
pub fn scan_unrolled(dp: &DiscreteParams, c: &Tensor, u: &Tensor, d_skip: &Tensor) -> Tensor {
    let (len, dch) = (u.shape()[0], u.shape()[1]);
    let n = dp.state_size();
    let per_step = |t: &Tensor, step: usize, idx: usize| -> f64 {
        if t.rank() == 3 {
            t.outer(step)[idx]
        } else {
            t.data()[idx]
        }
    };
    let mut y = Tensor::zeros(&[len, dch]);
    for x in 0..len {
        let cx = if c.rank() == 2 { c.outer(x) } else { c.data() };
        for d in 0..dch {
            let mut acc = d_skip.data()[d] * u.at(&[x, d]);
            for s in 0..n {
                let i = d * n + s;
                for j in 0..=x {
                    let mut decay = 1.0;
                    for k in j + 1..=x {
                        decay *= per_step(&dp.a_bar, k, i);
                    }
                    acc += cx[s] * decay * per_step(&dp.b_bar, j, i) * u.at(&[j, d]);
                }
            }
            y.set(&[x, d], acc);
        }
    }
    y
}

/// Textbook single-head attention over `T×C` tokens with separate Q, K, V
/// projections and an explicit softmax per row, plus the residual.
pub fn attention_double_loop(
    x: &Tensor,
    w_q: &Tensor,
    w_k: &Tensor,
    w_v: &Tensor,
    w_o: &Tensor,
) -> Tensor {
    let (t, c) = (x.shape()[0], x.shape()[1]);
    let q = matmul_naive(x, w_q);
    let k = matmul_naive(x, w_k);
    let v = matmul_naive(x, w_v);
    let scale = 1.0 / (c as f64).sqrt();
    let mut mixed = Tensor::zeros(&[t, c]);
    for i in 0..t {
        let scores: Vec<f64> = (0..t)
            .map(|j| (0..c).map(|p| q.at(&[i, p]) * k.at(&[j, p])).sum::<f64>() * scale)
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for p in 0..c {
            let v_mix: f64 = (0..t).map(|j| exps[j] / total * v.at(&[j, p])).sum();
            mixed.set(&[i, p], v_mix);
        }
    }
    let projected = matmul_naive(&mixed, w_o);
    x.add(&projected).unwrap()
}

/// Per-cell loop over every point with explicit edge comparisons.
pub fn pillar_encode_brute_force(points: &[[f64; 4]], g: &GridConfig, w_embed: &Tensor) -> Tensor {
    let (h, w, c) = (g.height(), g.width(), g.channels);
    let mut out = Tensor::zeros(&[1, h, w, c]);
    for row in 0..h {
        for col in 0..w {
            let x_lo = g.x_range.0 + col as f64 * g.cell;
            let y_lo = g.y_range.0 + row as f64 * g.cell;
            let mut stats = [0.0f64; 5];
            for &[x, y, z, i] in points {
                let in_range = x >= g.x_range.0 && x < g.x_range.1 && y >= g.y_range.0 && y < g.y_range.1;
                let in_cell = (x - g.x_range.0) / g.cell >= col as f64
                    && (x - g.x_range.0) / g.cell < (col + 1) as f64
                    && (y - g.y_range.0) / g.cell >= row as f64
                    && (y - g.y_range.0) / g.cell < (row + 1) as f64;
                if in_range && in_cell {
                    stats[0] += 1.0;
                    stats[1] += z;
                    stats[2] += i;
                    stats[3] += x - (x_lo + 0.5 * g.cell);
                    stats[4] += y - (y_lo + 0.5 * g.cell);
                }
            }
            if stats[0] == 0.0 {
                continue;
            }
            for k in 1..5 {
                stats[k] /= stats[0];
            }
            for ch in 0..c {
                let v: f64 = (0..5).map(|k| stats[k] * w_embed.at(&[k, ch])).sum();
                out.set(&[0, row, col, ch], v);
            }
        }
    }
    out
}

/// Bird's-eye IoU of two `(x, y, z, l, w, h, yaw)` boxes by point sampling
/// on an `n×n` lattice over the union's bounding square.
pub fn bev_iou_sampled(a: &[f64; 7], b: &[f64; 7], n: usize) -> f64 {
    let inside = |bx: &[f64; 7], x: f64, y: f64| {
        let (s, c) = bx[6].sin_cos();
        let (dx, dy) = (x - bx[0], y - bx[1]);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= bx[3] / 2.0 && v.abs() <= bx[4] / 2.0
    };
    let ra = 0.5 * a[3].hypot(a[4]);
    let rb = 0.5 * b[3].hypot(b[4]);
    let x0 = (a[0] - ra).min(b[0] - rb);
    let x1 = (a[0] + ra).max(b[0] + rb);
    let y0 = (a[1] - ra).min(b[1] - rb);
    let y1 = (a[1] + ra).max(b[1] + rb);
    let (mut both, mut either) = (0usize, 0usize);
    for i in 0..n {
        let x = x0 + (i as f64 + 0.5) / n as f64 * (x1 - x0);
        for j in 0..n {
            let y = y0 + (j as f64 + 0.5) / n as f64 * (y1 - y0);
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            both += (ia && ib) as usize;
            either += (ia || ib) as usize;
        }
    }
    if either == 0 { 0.0 } else { both as f64 / either as f64 }
}
