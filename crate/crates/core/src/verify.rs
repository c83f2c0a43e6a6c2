//! Self-check suite: every oracle comparison, gradient check, shape contract
//! and invariance property, runnable from the CLI with a machine-readable
//! report.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::attention::{attention_fuse_forward, attention_probabilities, AttnWeights, DEFAULT_MEMORY_CAP};
use crate::bench::exact_degree;
use crate::flops::{analytic_flops_attention, analytic_flops_comamba};
use crate::fusion::{
    agent_pool, comamba_fusion_forward_with, cross_merge, cross_scan, css2d_forward, gpm_forward, Branches,
    DirectionCode, FeatureStack, FusionWeights,
};
use crate::io::{decode_feature_stack, encode_feature_stack};
use crate::mamba::{init_block_weights, mamba_block_forward, EXPANSION};
use crate::oracle;
use crate::pipeline::{
    bev_iou, detect, focal_loss, pillar_encode_toy, pillar_statistics, smooth_l1, transform_points, DetectorWeights,
    GridConfig, PointCloud, Pose, STATS,
};
use crate::random::{random_tensor, seeded, uniform_tensor, SeededRng};
use crate::ssm::{
    lti_convolve, lti_kernel_materialize, scan_parallel, scan_sequential, selective_gradient_errors,
    selective_scan, selective_scan_forward, zoh, zoh_discretize, DiagSsmParams, DiscreteParams, SelectiveInputs,
    SsmParams,
};
use crate::tensor::{depthwise_conv2d_3x3, layer_norm, matmul};
use crate::{Tensor, LN_EPS};

/// Entry points the suite exercises through function pointers, so a faulty
/// implementation can be swapped in and shown to be caught.
#[derive(Clone, Copy)]
pub struct VerifyTargets {
    /// `(A, Δ, B) → (ā, b̄)`
    pub zoh: fn(f64, f64, f64) -> (f64, f64),
}

impl Default for VerifyTargets {
    fn default() -> Self {
        Self { zoh }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("{:<4} {:<36} max_error={:.3e} tol={:.1e}", c.status, c.name, c.max_error, c.tolerance));
            if let Some(d) = &c.detail {
                s.push_str(&format!("  ({d})"));
            }
            s.push('\n');
        }
        s.push_str(&format!("{} passed, {} failed\n", self.passed, self.failed));
        s
    }
}

type Outcome = std::result::Result<f64, String>;

struct Check {
    name: &'static str,
    tolerance: f64,
    run: fn(&VerifyTargets) -> Outcome,
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn rel(a: &Tensor, b: &Tensor) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(1e-300)
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

// ---- discretization ----

fn zoh_series_oracle(t: &VerifyTargets) -> Outcome {
    let mut rng = seeded(101);
    let mut worst = 0.0f64;
    for i in 0..400 {
        let a = -(10f64).powf(rng.gen_range(-9.0..0.6));
        let delta = if i % 8 == 0 { rng.gen_range(1e-6..1e-3) } else { rng.gen_range(1e-6..2.0) };
        let b = rng.gen_range(-2.0..2.0);
        let (ab, bb) = (t.zoh)(a, delta, b);
        let (ra, rb) = oracle::zoh_series(a, delta, b, 50);
        worst = worst.max((ab - ra).abs() / ra.abs().max(1.0)).max((bb - rb).abs() / rb.abs().max(1.0));
    }
    Ok(worst)
}

fn zoh_small_step_limit(t: &VerifyTargets) -> Outcome {
    let mut worst = 0.0f64;
    for &a in &[-0.5, -1.0, -3.0] {
        let delta = 1e-9;
        let (ab, bb) = (t.zoh)(a, delta, 2.0);
        let x = a * delta;
        worst = worst.max((ab - (1.0 + x)).abs()).max((bb / delta - 2.0 * (1.0 + x / 2.0)).abs());
    }
    Ok(worst)
}

fn zoh_contraction(t: &VerifyTargets) -> Outcome {
    let mut rng = seeded(103);
    for _ in 0..200 {
        let a = -rng.gen_range(1e-3..5.0);
        let (ab, _) = (t.zoh)(a, rng.gen_range(1e-3..2.0), 1.0);
        if !(ab > 0.0 && ab < 1.0) {
            return Ok(1.0 + (ab - 0.5).abs());
        }
    }
    Ok(0.0)
}

fn zoh_tensor_matches_scalar(t: &VerifyTargets) -> Outcome {
    let p = random_lti(3, 5, 104);
    let dp = zoh_discretize(SsmParams::Lti(&p)).map_err(e)?;
    let mut worst = 0.0f64;
    for i in 0..15 {
        let (ab, bb) = (t.zoh)(-p.a_log.data()[i].exp(), p.delta, p.b.data()[i % 5]);
        worst = worst.max((ab - dp.a_bar.data()[i]).abs()).max((bb - dp.b_bar.data()[i]).abs());
    }
    Ok(worst)
}

// ---- scans ----

fn random_lti(d: usize, n: usize, seed: u64) -> DiagSsmParams {
    let mut rng = seeded(seed);
    DiagSsmParams::new(
        uniform_tensor(&[d, n], -2.0, 1.5, &mut rng),
        uniform_tensor(&[n], -1.0, 1.0, &mut rng),
        uniform_tensor(&[n], -1.0, 1.0, &mut rng),
        uniform_tensor(&[d], -1.0, 1.0, &mut rng),
        rng.gen_range(0.01..1.0),
    )
    .expect("valid by construction")
}

fn random_selective(len: usize, d: usize, n: usize, rng: &mut SeededRng) -> (Tensor, SelectiveInputs, Tensor, Tensor) {
    let u = uniform_tensor(&[len, d], -1.0, 1.0, rng);
    let sel = SelectiveInputs::new(
        uniform_tensor(&[len, d], 0.01, 0.5, rng),
        uniform_tensor(&[len, n], -1.0, 1.0, rng),
        uniform_tensor(&[len, n], -1.0, 1.0, rng),
    )
    .expect("valid by construction");
    let a_log = uniform_tensor(&[d, n], -1.0, 1.5, rng);
    let d_skip = uniform_tensor(&[d], -1.0, 1.0, rng);
    (u, sel, a_log, d_skip)
}

fn scan_parallel_vs_sequential(_: &VerifyTargets) -> Outcome {
    let mut worst = 0.0f64;
    for (i, (len, chunk)) in [(1usize, 4usize), (37, 8), (256, 32), (1000, 64)].into_iter().enumerate() {
        let mut rng = seeded(200 + i as u64);
        let (u, sel, a_log, d_skip) = random_selective(len, 3, 4, &mut rng);
        let dp = zoh_discretize(SsmParams::Selective { inputs: &sel, a_log: &a_log }).map_err(e)?;
        let seq = scan_sequential(&dp, &sel.c_t, &u, &d_skip).map_err(e)?;
        let par = scan_parallel(&dp, &sel.c_t, &u, &d_skip, chunk).map_err(e)?;
        worst = worst.max(rel(&par, &seq));
    }
    Ok(worst)
}

fn scan_convolution_vs_sequential(_: &VerifyTargets) -> Outcome {
    let mut worst = 0.0f64;
    for (i, len) in [1usize, 17, 300].into_iter().enumerate() {
        let p = random_lti(4, 6, 210 + i as u64);
        let u = random_tensor(&[len, 4], 220 + i as u64);
        let dp = zoh_discretize(SsmParams::Lti(&p)).map_err(e)?;
        let seq = scan_sequential(&dp, &p.c, &u, &p.d_skip).map_err(e)?;
        let kernel = lti_kernel_materialize(SsmParams::Lti(&p), len).map_err(e)?;
        let conv = lti_convolve(&u, &kernel, &p.d_skip).map_err(e)?;
        worst = worst.max(rel(&conv, &seq));
    }
    Ok(worst)
}

fn scan_vs_unrolled_oracle(_: &VerifyTargets) -> Outcome {
    let mut rng = seeded(230);
    let (u, sel, a_log, d_skip) = random_selective(24, 2, 3, &mut rng);
    let dp = zoh_discretize(SsmParams::Selective { inputs: &sel, a_log: &a_log }).map_err(e)?;
    let seq = scan_sequential(&dp, &sel.c_t, &u, &d_skip).map_err(e)?;
    Ok(rel(&seq, &oracle::scan_unrolled(&dp, &sel.c_t, &u, &d_skip)))
}

fn scan_memoryless_identity(_: &VerifyTargets) -> Outcome {
    let dp = DiscreteParams::new(Tensor::zeros(&[2, 1]), Tensor::filled(&[2, 1], 1.0)).map_err(e)?;
    let u = random_tensor(&[9, 2], 231);
    let y = scan_sequential(&dp, &Tensor::filled(&[1], 1.0), &u, &Tensor::zeros(&[2])).map_err(e)?;
    Ok(y.max_abs_diff(&u))
}

fn selective_stream_vs_cached(_: &VerifyTargets) -> Outcome {
    let mut rng = seeded(240);
    let (u, sel, a_log, d_skip) = random_selective(50, 4, 5, &mut rng);
    let stream = selective_scan(&u, &sel, &a_log, &d_skip).map_err(e)?;
    let (cached, _) = selective_scan_forward(&u, &sel, &a_log, &d_skip).map_err(e)?;
    Ok(flag(stream == cached))
}

fn selective_gradient_fd(_: &VerifyTargets) -> Outcome {
    let mut rng = seeded(250);
    let (u, sel, a_log, d_skip) = random_selective(32, 3, 4, &mut rng);
    let dy = uniform_tensor(&[32, 3], -1.0, 1.0, &mut rng);
    let errs = selective_gradient_errors(&u, &sel, &a_log, &d_skip, &dy, 1e-5).map_err(e)?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

// ---- tensor core and blocks ----

fn matmul_vs_naive(_: &VerifyTargets) -> Outcome {
    let a = random_tensor(&[13, 7], 300);
    let b = random_tensor(&[7, 9], 301);
    Ok(matmul(&a, &b).map_err(e)?.max_abs_diff(&oracle::matmul_naive(&a, &b)))
}

fn dwconv_vs_naive(_: &VerifyTargets) -> Outcome {
    let x = random_tensor(&[3, 5, 6, 4], 310);
    let k = random_tensor(&[3, 3, 4], 311);
    let b = random_tensor(&[4], 312);
    Ok(depthwise_conv2d_3x3(&x, &k, &b).map_err(e)?.max_abs_diff(&oracle::depthwise_conv_naive(&x, &k, &b)))
}

fn layer_norm_shift_invariance(_: &VerifyTargets) -> Outcome {
    let x = random_tensor(&[6, 8], 320);
    let g = random_tensor(&[8], 321);
    let b = random_tensor(&[8], 322);
    let base = layer_norm(&x, &g, &b, LN_EPS).map_err(e)?;
    let shifted = layer_norm(&x.map(|v| v + 7.5), &g, &b, LN_EPS).map_err(e)?;
    Ok(base.max_abs_diff(&shifted))
}

fn mamba_block_causality(_: &VerifyTargets) -> Outcome {
    let w = init_block_weights(6, EXPANSION * 6, 4, 330).map_err(e)?;
    let seq = random_tensor(&[20, 6], 331);
    let base = mamba_block_forward(&seq, &w).map_err(e)?;
    let mut poked = seq.clone();
    for v in poked.outer_mut(12) {
        *v += 3.0;
    }
    let moved = mamba_block_forward(&poked, &w).map_err(e)?;
    let prefix = |t: &Tensor| Tensor::new(&[12, 6], t.data()[..72].to_vec()).expect("prefix");
    let changed_after = moved.outer(12).iter().zip(base.outer(12)).any(|(a, b)| a != b);
    Ok(prefix(&moved).max_abs_diff(&prefix(&base)) + flag(changed_after))
}

// ---- fusion ----

fn css2d_shape_preservation(_: &VerifyTargets) -> Outcome {
    let mut rng = seeded(400);
    for _ in 0..6 {
        let (k, h, w, c) = (rng.gen_range(1..=4), rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=8));
        let blocks = [0, 1, 2, 3].map(|i| init_block_weights(c, EXPANSION * c, 3, 410 + i).expect("valid"));
        let f = FeatureStack::new(random_tensor(&[k, h, w, c], rng.gen())).map_err(e)?;
        let out = css2d_forward(&f, &blocks).map_err(e)?;
        if out.tensor().shape() != f.tensor().shape() {
            return Err(format!("{:?} -> {:?}", f.tensor().shape(), out.tensor().shape()));
        }
    }
    Ok(0.0)
}

fn cross_merge_identity(_: &VerifyTargets) -> Outcome {
    let f = FeatureStack::new(random_tensor(&[3, 4, 5, 2], 420)).map_err(e)?;
    let seqs: Vec<Tensor> = DirectionCode::ALL.iter().map(|&d| cross_scan(&f, d)).collect();
    let merged = cross_merge(&seqs, 3, 4, 5).map_err(e)?;
    Ok(merged.tensor().max_abs_diff(&f.tensor().scale(4.0)))
}

fn gpm_permutation_invariance(_: &VerifyTargets) -> Outcome {
    let mut rng = seeded(430);
    let c = 5;
    let (g, b, w, bias) = (random_tensor(&[c], 431), random_tensor(&[c], 432), random_tensor(&[c, c], 433), random_tensor(&[c], 434));
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let k = rng.gen_range(1..=6);
        let f = FeatureStack::new(random_tensor(&[k, 3, 4, c], rng.gen())).map_err(e)?;
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let a = gpm_forward(&f, &g, &b, &w, &bias).map_err(e)?;
        let p = gpm_forward(&f.permute_agents(&perm).map_err(e)?, &g, &b, &w, &bias).map_err(e)?;
        worst = worst.max(a.max_abs_diff(&p));
    }
    Ok(worst)
}

fn agent_pool_singleton(_: &VerifyTargets) -> Outcome {
    let x = random_tensor(&[1, 3, 3, 2], 440);
    Ok(agent_pool(&x).map_err(e)?.max_abs_diff(&x.scale(2.0)))
}

fn fusion_branches_agree(_: &VerifyTargets) -> Outcome {
    let w = FusionWeights::init(4, 3, 450).map_err(e)?;
    let ego = random_tensor(&[1, 4, 5, 4], 451);
    let cav = random_tensor(&[2, 4, 5, 4], 452);
    let a = comamba_fusion_forward_with(&ego, Some(&cav), &w, Branches::Sequential).map_err(e)?;
    let b = comamba_fusion_forward_with(&ego, Some(&cav), &w, Branches::Parallel).map_err(e)?;
    Ok(flag(a == b))
}

// ---- attention baseline ----

fn attention_vs_double_loop(_: &VerifyTargets) -> Outcome {
    let w = AttnWeights::init(6, 500).map_err(e)?;
    let x = random_tensor(&[2, 3, 2, 6], 501);
    let out = attention_fuse_forward(&FeatureStack::new(x.clone()).map_err(e)?, &w, DEFAULT_MEMORY_CAP).map_err(e)?;
    let flat = x.reshape(&[12, 6]).map_err(e)?;
    let reference = oracle::attention_double_loop(&flat, &w.w_q, &w.w_k, &w.w_v, &w.w_o);
    Ok(out.into_tensor().reshape(&[12, 6]).map_err(e)?.max_abs_diff(&reference))
}

fn attention_rows_stochastic(_: &VerifyTargets) -> Outcome {
    let w = AttnWeights::init(4, 510).map_err(e)?;
    let p = attention_probabilities(&random_tensor(&[10, 4], 511).scale(4.0), &w).map_err(e)?;
    Ok(p.data().chunks(10).map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max))
}

// ---- pipeline ----

fn small_grid() -> GridConfig {
    GridConfig { x_range: (-6.0, 6.0), y_range: (-3.0, 3.0), cell: 0.5, channels: 6 }
}

fn random_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = seeded(seed);
    PointCloud::new(
        (0..n)
            .map(|_| [rng.gen_range(-7.0..7.0), rng.gen_range(-4.0..4.0), rng.gen_range(-2.0..2.0), rng.gen()])
            .collect(),
    )
    .expect("finite")
}

fn pillar_encoder_vs_brute_force(_: &VerifyTargets) -> Outcome {
    let g = small_grid();
    let w = random_tensor(&[STATS, 6], 600);
    let p = random_cloud(601, 400);
    let fast = pillar_encode_toy(&p, &g, &w).map_err(e)?;
    Ok(fast.max_abs_diff(&oracle::pillar_encode_brute_force(p.points(), &g, &w)))
}

fn pillar_count_conservation(_: &VerifyTargets) -> Outcome {
    let g = small_grid();
    let p = random_cloud(610, 500);
    let stats = pillar_statistics(&p, &g).map_err(e)?;
    let total: f64 = stats.data().chunks(STATS).map(|s| s[0]).sum();
    Ok((total - g.in_range_count(&p) as f64).abs())
}

fn transform_inverse_roundtrip(_: &VerifyTargets) -> Outcome {
    let pose = Pose::from_yaw_translation(2.1, [40.0, -13.0, 1.5]);
    let p = random_cloud(620, 50);
    let back = transform_points(&transform_points(&p, &pose), &pose.inverse());
    Ok(p.points().iter().zip(back.points()).flat_map(|(a, b)| (0..4).map(move |i| (a[i] - b[i]).abs())).fold(0.0, f64::max))
}

fn transform_preserves_distances(_: &VerifyTargets) -> Outcome {
    let pose = Pose::from_yaw_translation(-0.8, [5.0, 9.0, -1.0]);
    let p = random_cloud(630, 12);
    let q = transform_points(&p, &pose);
    let d = |a: &[f64; 4], b: &[f64; 4]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let mut worst = 0.0f64;
    for i in 0..12 {
        for j in 0..12 {
            worst = worst.max((d(&p.points()[i], &p.points()[j]) - d(&q.points()[i], &q.points()[j])).abs());
        }
    }
    Ok(worst)
}

fn bev_iou_vs_sampling(_: &VerifyTargets) -> Outcome {
    let mut rng = seeded(640);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mut bx = || [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0, 4.5, 1.8, 1.5, rng.gen_range(-3.0..3.0)];
        let (a, b) = (bx(), bx());
        worst = worst.max((bev_iou(&a, &b) - oracle::bev_iou_sampled(&a, &b, 300)).abs());
    }
    Ok(worst)
}

fn detect_occupancy_oracle(_: &VerifyTargets) -> Outcome {
    let g = GridConfig { x_range: (-8.0, 8.0), y_range: (-4.0, 4.0), cell: 0.8, channels: 8 };
    let w = DetectorWeights::occupancy(g, 4, 650, 0.0).map_err(e)?;
    let (cx, cy) = g.cell_center(4, 7);
    let mut rng = seeded(651);
    let pts = (0..30).map(|_| [cx + rng.gen_range(-0.3..0.3), cy + rng.gen_range(-0.3..0.3), 1.0, 0.5]).collect();
    let dets = detect(&PointCloud::new(pts).map_err(e)?, &[], &w).map_err(e)?;
    if dets.len() != 1 {
        return Err(format!("expected one detection, got {}", dets.len()));
    }
    Ok(flag(g.cell_of(dets[0].bbox[0], dets[0].bbox[1]) == Some((4, 7))))
}

fn smooth_l1_unit_values(_: &VerifyTargets) -> Outcome {
    let s = Tensor::scalar;
    let f = |d: f64| smooth_l1(&s(d), &s(0.0), 1.0).map_err(e);
    Ok((f(0.5)? - 0.125).abs() + (f(2.0)? - 1.5).abs() + (f(1.0)? - 0.5).abs())
}

fn focal_loss_unit_values(_: &VerifyTargets) -> Outcome {
    let s = Tensor::scalar;
    let closed = (focal_loss(&s(0.5), &s(1.0), 0.5, 2.0).map_err(e)? - 0.086643).abs();
    let p = 0.3f64;
    let bce = -(p.ln());
    let reduced = (focal_loss(&s(p), &s(1.0), 0.5, 0.0).map_err(e)? - 0.5 * bce).abs();
    Ok(closed.max(reduced))
}

// ---- cost model and persistence ----

fn flops_comamba_affine(_: &VerifyTargets) -> Outcome {
    let pts: Vec<(u64, u64)> = [1u64, 2, 4, 6, 8, 12, 16].iter().map(|&k| (k, analytic_flops_comamba(k, 32, 32, 64, 16))).collect();
    Ok(flag(exact_degree(&pts) == Some(1)))
}

fn flops_attention_quadratic(_: &VerifyTargets) -> Outcome {
    let pts: Vec<(u64, u64)> = [1u64, 2, 4, 6, 8, 12, 16].iter().map(|&k| (k, analytic_flops_attention(k, 32, 32, 64))).collect();
    Ok(flag(exact_degree(&pts) == Some(2)))
}

fn feature_file_roundtrip(_: &VerifyTargets) -> Outcome {
    let f = FeatureStack::new(random_tensor(&[2, 3, 4, 5], 700)).map_err(e)?;
    let g = decode_feature_stack(&encode_feature_stack(&f).map_err(e)?).map_err(e)?;
    Ok(f.tensor().data().iter().zip(g.tensor().data()).map(|(a, b)| (*a as f32 as f64 - b).abs()).fold(0.0, f64::max))
}

const CHECKS: &[Check] = &[
    Check { name: "zoh_series_oracle", tolerance: 1e-12, run: zoh_series_oracle },
    Check { name: "zoh_small_step_limit", tolerance: 1e-12, run: zoh_small_step_limit },
    Check { name: "zoh_contraction", tolerance: 0.0, run: zoh_contraction },
    Check { name: "zoh_tensor_matches_scalar", tolerance: 0.0, run: zoh_tensor_matches_scalar },
    Check { name: "scan_parallel_vs_sequential", tolerance: 1e-10, run: scan_parallel_vs_sequential },
    Check { name: "scan_convolution_vs_sequential", tolerance: 1e-10, run: scan_convolution_vs_sequential },
    Check { name: "scan_vs_unrolled_oracle", tolerance: 1e-12, run: scan_vs_unrolled_oracle },
    Check { name: "scan_memoryless_identity", tolerance: 0.0, run: scan_memoryless_identity },
    Check { name: "selective_stream_vs_cached", tolerance: 0.0, run: selective_stream_vs_cached },
    Check { name: "selective_gradient_fd", tolerance: 1e-5, run: selective_gradient_fd },
    Check { name: "matmul_vs_naive", tolerance: 1e-12, run: matmul_vs_naive },
    Check { name: "dwconv_vs_naive", tolerance: 1e-12, run: dwconv_vs_naive },
    Check { name: "layer_norm_shift_invariance", tolerance: 1e-9, run: layer_norm_shift_invariance },
    Check { name: "mamba_block_causality", tolerance: 0.0, run: mamba_block_causality },
    Check { name: "css2d_shape_preservation", tolerance: 0.0, run: css2d_shape_preservation },
    Check { name: "cross_merge_identity", tolerance: 1e-12, run: cross_merge_identity },
    Check { name: "gpm_permutation_invariance", tolerance: 1e-12, run: gpm_permutation_invariance },
    Check { name: "agent_pool_singleton", tolerance: 0.0, run: agent_pool_singleton },
    Check { name: "fusion_branches_agree", tolerance: 0.0, run: fusion_branches_agree },
    Check { name: "attention_vs_double_loop", tolerance: 1e-12, run: attention_vs_double_loop },
    Check { name: "attention_rows_stochastic", tolerance: 1e-12, run: attention_rows_stochastic },
    Check { name: "pillar_encoder_vs_brute_force", tolerance: 1e-12, run: pillar_encoder_vs_brute_force },
    Check { name: "pillar_count_conservation", tolerance: 0.0, run: pillar_count_conservation },
    Check { name: "transform_inverse_roundtrip", tolerance: 1e-9, run: transform_inverse_roundtrip },
    Check { name: "transform_preserves_distances", tolerance: 1e-9, run: transform_preserves_distances },
    Check { name: "bev_iou_vs_sampling", tolerance: 1e-2, run: bev_iou_vs_sampling },
    Check { name: "detect_occupancy_oracle", tolerance: 0.0, run: detect_occupancy_oracle },
    Check { name: "smooth_l1_unit_values", tolerance: 1e-15, run: smooth_l1_unit_values },
    Check { name: "focal_loss_unit_values", tolerance: 1e-6, run: focal_loss_unit_values },
    Check { name: "flops_comamba_affine", tolerance: 0.0, run: flops_comamba_affine },
    Check { name: "flops_attention_quadratic", tolerance: 0.0, run: flops_attention_quadratic },
    Check { name: "feature_file_roundtrip", tolerance: 0.0, run: feature_file_roundtrip },
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

pub fn verify_suite() -> VerifyReport {
    verify_suite_with(&VerifyTargets::default())
}

pub fn verify_suite_with(targets: &VerifyTargets) -> VerifyReport {
    let checks: Vec<CheckResult> = CHECKS
        .iter()
        .map(|c| {
            let outcome = std::panic::catch_unwind(|| (c.run)(targets))
                .unwrap_or_else(|_| Err("check panicked".to_string()));
            let (max_error, detail) = match outcome {
                Ok(err) => (err, None),
                Err(msg) => (f64::INFINITY, Some(msg)),
            };
            let ok = max_error.is_finite() && max_error <= c.tolerance;
            CheckResult { name: c.name, status: if ok { "pass" } else { "fail" }, max_error, tolerance: c.tolerance, detail }
        })
        .collect();
    let passed = checks.iter().filter(|c| c.passed()).count();
    VerifyReport { passed, failed: checks.len() - passed, checks }
}
