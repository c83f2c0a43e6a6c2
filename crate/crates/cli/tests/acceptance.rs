//! Acceptance criteria, run in order as a plain binary so timing-sensitive
//! measurements never share the CPU with other tests. Prints one PASS/FAIL
//! line per criterion and exits nonzero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use comamba_core::bench::{bench_scaling, exact_degree, fit_complexity, to_csv, BenchOptions, Method};
use comamba_core::demo::run_demo;
use comamba_core::fusion::{
    comamba_fusion_forward, cross_merge, cross_scan, css2d_forward, gpm_forward, scan_position, DirectionCode,
    FeatureStack, FusionWeights,
};
use comamba_core::mamba::{init_block_weights, EXPANSION};
use comamba_core::oracle::zoh_series;
use comamba_core::pipeline::{detect, focal_loss, smooth_l1, DetectorWeights, GridConfig, PointCloud};
use comamba_core::random::{random_tensor, seeded, uniform_tensor};
use comamba_core::ssm::{
    lti_convolve, lti_kernel_materialize, scan_parallel, scan_sequential, selective_gradient_errors,
    zoh_discretize, DiagSsmParams, SelectiveInputs, SsmParams, SELECTIVE_GROUPS, ZOH_SERIES_THRESHOLD,
};
use comamba_core::verify::{verify_suite, verify_suite_with, VerifyTargets};
use comamba_core::{ssm, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rel(a: &Tensor, reference: &Tensor) -> f64 {
    a.max_abs_diff(reference) / reference.max_abs().max(f64::MIN_POSITIVE)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn scan_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(1);
    let (mut worst_par, mut worst_conv) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let len = rng.gen_range(1..=1024);
        let n = rng.gen_range(1..=16);
        let d = rng.gen_range(1..=8);
        let chunk = rng.gen_range(1..=256);

        let lti = DiagSsmParams::new(
            uniform_tensor(&[d, n], -3.0, 1.5, &mut rng),
            uniform_tensor(&[n], -1.0, 1.0, &mut rng),
            uniform_tensor(&[n], -1.0, 1.0, &mut rng),
            uniform_tensor(&[d], -1.0, 1.0, &mut rng),
            rng.gen_range(1e-3..1.0),
        )
        .map_err(e)?;
        let u = uniform_tensor(&[len, d], -1.0, 1.0, &mut rng);
        let dp = zoh_discretize(SsmParams::Lti(&lti)).map_err(e)?;
        let seq = scan_sequential(&dp, &lti.c, &u, &lti.d_skip).map_err(e)?;
        let par = scan_parallel(&dp, &lti.c, &u, &lti.d_skip, chunk).map_err(e)?;
        let kernel = lti_kernel_materialize(SsmParams::Lti(&lti), len).map_err(e)?;
        let conv = lti_convolve(&u, &kernel, &lti.d_skip).map_err(e)?;
        worst_par = worst_par.max(rel(&par, &seq));
        worst_conv = worst_conv.max(rel(&conv, &seq));

        let sel = SelectiveInputs::new(
            uniform_tensor(&[len, d], 1e-3, 1.0, &mut rng),
            uniform_tensor(&[len, n], -1.0, 1.0, &mut rng),
            uniform_tensor(&[len, n], -1.0, 1.0, &mut rng),
        )
        .map_err(e)?;
        let a_log = uniform_tensor(&[d, n], -3.0, 1.5, &mut rng);
        let dp = zoh_discretize(SsmParams::Selective { inputs: &sel, a_log: &a_log }).map_err(e)?;
        let seq = scan_sequential(&dp, &sel.c_t, &u, &lti.d_skip).map_err(e)?;
        let par = scan_parallel(&dp, &sel.c_t, &u, &lti.d_skip, chunk).map_err(e)?;
        worst_par = worst_par.max(rel(&par, &seq));
    }
    let elapsed = start.elapsed();
    let msg = format!("parallel rel err {worst_par:.2e}, convolution rel err {worst_conv:.2e}, {:.1} s", elapsed.as_secs_f64());
    ensure(worst_par <= 1e-10 && worst_conv <= 1e-10 && elapsed < Duration::from_secs(60), msg.clone())?;
    Ok(msg)
}

fn zoh_correctness() -> Outcome {
    let mut rng = seeded(2);
    let (mut worst, mut singular) = (0.0f64, 0usize);
    for i in 0..1000 {
        let magnitude = 10f64.powf(rng.gen_range(-9.0..0.6));
        let delta = if i % 10 == 0 { rng.gen_range(1e-6..1e-3) } else { rng.gen_range(1e-6..=2.0) };
        let b = rng.gen_range(-2.0..2.0);
        let p = DiagSsmParams::new(
            Tensor::filled(&[1, 1], magnitude.ln()),
            Tensor::filled(&[1], b),
            Tensor::filled(&[1], 1.0),
            Tensor::zeros(&[1]),
            delta,
        )
        .map_err(e)?;
        let a = -p.a_log.data()[0].exp();
        if (a * delta).abs() < ZOH_SERIES_THRESHOLD {
            singular += 1;
        }
        let dp = zoh_discretize(SsmParams::Lti(&p)).map_err(e)?;
        let (ra, rb) = zoh_series(a, delta, b, 50);
        worst = worst
            .max((dp.a_bar.data()[0] - ra).abs() / ra.abs().max(1.0))
            .max((dp.b_bar.data()[0] - rb).abs() / rb.abs().max(1.0));
    }
    let msg = format!("1000 samples ({singular} with |ΔA| < 1e-8), max error {worst:.2e}");
    ensure(worst <= 1e-12 && singular > 0, msg.clone())?;
    Ok(msg)
}

fn gradient_check() -> Outcome {
    let mut rng = seeded(3);
    let mut worst = [0.0f64; 6];
    for _ in 0..20 {
        let (len, d, n) = (32, 3, 4);
        let u = uniform_tensor(&[len, d], -1.0, 1.0, &mut rng);
        let sel = SelectiveInputs::new(
            uniform_tensor(&[len, d], 0.01, 0.5, &mut rng),
            uniform_tensor(&[len, n], -1.0, 1.0, &mut rng),
            uniform_tensor(&[len, n], -1.0, 1.0, &mut rng),
        )
        .map_err(e)?;
        let a_log = uniform_tensor(&[d, n], -1.0, 1.5, &mut rng);
        let d_skip = uniform_tensor(&[d], -1.0, 1.0, &mut rng);
        let dy = uniform_tensor(&[len, d], -1.0, 1.0, &mut rng);
        let errs = selective_gradient_errors(&u, &sel, &a_log, &d_skip, &dy, 1e-5).map_err(e)?;
        for (w, err) in worst.iter_mut().zip(errs) {
            *w = w.max(err);
        }
    }
    let msg = SELECTIVE_GROUPS.iter().zip(worst).map(|(g, w)| format!("{g} {w:.1e}")).collect::<Vec<_>>().join(", ");
    ensure(worst.iter().all(|&w| w <= 1e-5), msg.clone())?;
    Ok(msg)
}

fn css2d_shapes() -> Outcome {
    let mut rng = seeded(4);
    let mut shapes: Vec<[usize; 4]> = vec![[1, 1, 1, 1], [8, 16, 16, 32], [8, 1, 16, 1], [1, 16, 1, 32]];
    for _ in 0..36 {
        shapes.push([rng.gen_range(1..=8), rng.gen_range(1..=16), rng.gen_range(1..=16), rng.gen_range(1..=32)]);
    }
    for s in &shapes {
        let c = s[3];
        let blocks = [0u64, 1, 2, 3].map(|i| init_block_weights(c, EXPANSION * c, 4, 40 + i).expect("valid"));
        let f = FeatureStack::new(random_tensor(s, rng.gen())).map_err(e)?;
        let out = css2d_forward(&f, &blocks).map_err(e)?;
        ensure(out.tensor().shape() == s, format!("{s:?} -> {:?}", out.tensor().shape()))?;
    }
    Ok(format!("{} shapes preserved exactly", shapes.len()))
}

fn identity_merge() -> Outcome {
    let mut rng = seeded(5);
    let mut worst_sum = 0.0f64;
    for _ in 0..20 {
        let (k, h, w, c) = (rng.gen_range(1..=5), rng.gen_range(1..=9), rng.gen_range(1..=9), rng.gen_range(1..=4));
        let f = FeatureStack::new(random_tensor(&[k, h, w, c], rng.gen())).map_err(e)?;
        let seqs: Vec<Tensor> = DirectionCode::ALL.iter().map(|&d| cross_scan(&f, d)).collect();
        for (i, &dir) in DirectionCode::ALL.iter().enumerate() {
            let mut seen = vec![false; k * h * w];
            for pos in 0..k * h * w {
                seen[scan_position(dir, h, w, pos)] = true;
            }
            ensure(seen.iter().all(|&s| s), format!("{dir:?} is not a permutation"))?;
            let only: Vec<Tensor> =
                (0..4).map(|j| if j == i { seqs[j].clone() } else { Tensor::zeros(seqs[j].shape()) }).collect();
            let back = cross_merge(&only, k, h, w).map_err(e)?;
            let bitwise = back.tensor().data().iter().zip(f.tensor().data()).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(bitwise, format!("{dir:?} scan/merge is not bit-exact for {:?}", f.tensor().shape()))?;
        }
        let merged = cross_merge(&seqs, k, h, w).map_err(e)?;
        worst_sum = worst_sum.max(merged.tensor().max_abs_diff(&f.tensor().scale(4.0)));
    }
    let msg = format!("permutations bit-exact, 4x sum error {worst_sum:.1e}");
    ensure(worst_sum <= 1e-12, msg.clone())?;
    Ok(msg)
}

fn gpm_invariance() -> Outcome {
    let mut rng = seeded(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (k, h, w, c) = (rng.gen_range(1..=8), rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=16));
        let f = FeatureStack::new(random_tensor(&[k, h, w, c], rng.gen())).map_err(e)?;
        let gamma = uniform_tensor(&[c], 0.5, 1.5, &mut rng);
        let beta = uniform_tensor(&[c], -0.5, 0.5, &mut rng);
        let wt = uniform_tensor(&[c, c], -1.0, 1.0, &mut rng);
        let bias = uniform_tensor(&[c], -0.5, 0.5, &mut rng);
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let a = gpm_forward(&f, &gamma, &beta, &wt, &bias).map_err(e)?;
        let b = gpm_forward(&f.permute_agents(&perm).map_err(e)?, &gamma, &beta, &wt, &bias).map_err(e)?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    let msg = format!("100 stacks, max diff {worst:.1e}");
    ensure(worst <= 1e-12, msg.clone())?;
    Ok(msg)
}

fn scaling() -> Outcome {
    let start = Instant::now();
    let ks = [1usize, 2, 4, 6, 8, 12, 16];
    let opts = BenchOptions::new(32, 32, 64, 5);
    let comamba = bench_scaling(Method::Comamba, &ks, &opts).map_err(e)?;
    let attention = bench_scaling(Method::Attention, &ks, &opts).map_err(e)?;
    let elapsed = start.elapsed();
    print!("{}", to_csv(&comamba));
    print!("{}", to_csv(&attention).split_once('\n').unwrap().1);

    let col = |r: &[comamba_core::BenchRecord], f: fn(&comamba_core::BenchRecord) -> u64| -> Vec<(u64, u64)> {
        r.iter().map(|x| (x.k as u64, f(x))).collect()
    };
    let fpts = |r: &[comamba_core::BenchRecord]| -> Vec<(f64, f64)> {
        r.iter().map(|x| (x.k as f64, x.latency_ns as f64)).collect()
    };
    let mut failures = Vec::new();
    let flops_c = exact_degree(&col(&comamba, |x| x.flops));
    let flops_a = exact_degree(&col(&attention, |x| x.flops));
    if flops_c != Some(1) || flops_a != Some(2) {
        failures.push(format!("flops degrees {flops_c:?}/{flops_a:?}"));
    }
    let fit_c = fit_complexity(&fpts(&comamba)).map_err(e)?;
    let fit_a = fit_complexity(&fpts(&attention)).map_err(e)?;
    if fit_c.linear_r2 < 0.98 {
        failures.push(format!("comamba latency linear R² {:.4}", fit_c.linear_r2));
    }
    if fit_a.quadratic_rss.partial_cmp(&fit_a.linear_rss) != Some(std::cmp::Ordering::Less) {
        failures.push("attention latency: quadratic fit does not beat linear".into());
    }
    let peak_c = exact_degree(&col(&comamba, |x| x.peak_bytes));
    if !matches!(peak_c, Some(0 | 1)) {
        failures.push(format!("comamba peak bytes not affine in K ({peak_c:?})"));
    }
    let mut worst_peak = 0.0f64;
    for r in &attention {
        if r.estimated {
            failures.push(format!("attention K={} was not measured", r.k));
        }
        let t = (r.k * 32 * 32) as f64;
        worst_peak = worst_peak.max((r.peak_bytes as f64 - 8.0 * t * t).abs() / (8.0 * t * t));
    }
    if worst_peak > 0.10 {
        failures.push(format!("attention peak off the score-matrix prediction by {:.1}%", 100.0 * worst_peak));
    }
    if elapsed >= Duration::from_secs(600) {
        failures.push(format!("took {:.0} s", elapsed.as_secs_f64()));
    }
    let msg = format!(
        "flops degree 1/2; comamba latency R² lin {:.4}; attention RSS quad/lin {:.2e}; comamba peak affine; attention peak within {:.1}% of 8·T²; {:.0} s",
        fit_c.linear_r2,
        fit_a.quadratic_rss / fit_a.linear_rss,
        100.0 * worst_peak,
        elapsed.as_secs_f64()
    );
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{}; {msg}", failures.join("; ")))
    }
}

fn loss_values() -> Outcome {
    let s = Tensor::scalar;
    let sl = |d: f64, beta: f64| smooth_l1(&s(d), &s(0.0), beta).map_err(e);
    ensure(sl(0.5, 1.0)? == 0.125, "smooth_l1(0.5)")?;
    ensure(sl(2.0, 1.0)? == 1.5, "smooth_l1(2)")?;
    for beta in [0.25, 1.0, 4.0] {
        let h = 1e-8 * beta;
        let at = sl(beta, beta)?;
        ensure(at == 0.5 * beta, format!("smooth_l1 at β={beta} is {at}"))?;
        let jump = (sl(beta - h, beta)? - sl(beta + h, beta)?).abs();
        ensure(jump <= 4.0 * h, format!("smooth_l1 jump {jump} at β={beta}"))?;
        let left = (at - sl(beta - h, beta)?) / h;
        let right = (sl(beta + h, beta)? - at) / h;
        ensure((left - right).abs() < 1e-6, format!("smooth_l1 slope {left} vs {right} at β={beta}"))?;
    }
    let focal = focal_loss(&s(0.5), &s(1.0), 0.5, 2.0).map_err(e)?;
    ensure((focal - 0.086643).abs() <= 1e-6, format!("focal {focal}"))?;
    let mut rng = seeded(8);
    let p = uniform_tensor(&[64], 0.01, 0.99, &mut rng);
    let y = Tensor::from_fn(&[64], |i| (i % 3 == 0) as u8 as f64);
    let bce = p.data().iter().zip(y.data()).map(|(p, y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())).sum::<f64>() / 64.0;
    let reduced = focal_loss(&p, &y, 0.5, 0.0).map_err(e)?;
    ensure((reduced - 0.5 * bce).abs() <= 1e-12, format!("γ=0 reduction off by {:.1e}", (reduced - 0.5 * bce).abs()))?;
    Ok(format!("smooth_l1 0.125/1.5/continuous; focal {focal:.6}; γ=0 reduction {:.1e}", (reduced - 0.5 * bce).abs()))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_comamba");
    let run = |args: &[&str]| Command::new(bin).args(args).env_remove("COMAMBA_THREADS").output().map_err(e);
    let a = run(&["demo", "--seed", "7"])?;
    let b = run(&["demo", "--seed", "7"])?;
    ensure(a.status.success() && b.status.success(), "demo failed")?;
    ensure(a.stdout == b.stdout, "demo output differs between runs")?;
    ensure(run_demo(7, 2).map_err(e)? == run_demo(7, 2).map_err(e)?, "in-process demo differs")?;

    let solo = run(&["demo", "--seed", "7", "--cavs", "0"])?;
    ensure(solo.status.success(), "ego-only demo failed")?;
    let w = FusionWeights::init(8, 4, 9).map_err(e)?;
    let fused = comamba_fusion_forward(&random_tensor(&[1, 6, 7, 8], 10), None, &w).map_err(e)?;
    ensure(fused.shape() == [1, 6, 7, 8] && fused.all_finite(), "ego-only fusion")?;
    let grid = GridConfig { x_range: (-10.0, 10.0), y_range: (-5.0, 5.0), cell: 0.5, channels: 8 };
    let dw = DetectorWeights::init(grid, 4, 11).map_err(e)?;
    let ego = PointCloud::new(vec![[1.0, 1.0, 0.5, 0.2], [1.1, 0.9, 0.7, 0.4]]).map_err(e)?;
    detect(&ego, &[], &dw).map_err(e)?;
    detect(&PointCloud::empty(), &[], &dw).map_err(e)?;
    Ok(format!("demo stdout identical across runs ({} bytes); N=0 pipeline runs", a.stdout.len()))
}

fn mutation_smoke() -> Outcome {
    let clean = verify_suite();
    ensure(clean.all_passed(), format!("clean suite fails:\n{}", clean.to_text()))?;
    ensure(clean.checks.len() >= 15, format!("only {} checks", clean.checks.len()))?;
    let mutant = verify_suite_with(&VerifyTargets { zoh: |a, d, b| ssm::zoh(-a, d, b) });
    let caught: Vec<&str> = mutant.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    ensure(caught.iter().any(|n| n.starts_with("zoh_")), format!("sign-flipped ZOH not caught: {caught:?}"))?;
    Ok(format!("{} checks green; sign-flipped ZOH fails {caught:?}", clean.checks.len()))
}

fn main() {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    let criteria: [Criterion; 10] = [
        ("scan oracle equivalence", scan_equivalence),
        ("ZOH correctness", zoh_correctness),
        ("gradient check", gradient_check),
        ("CSS2D shape preservation", css2d_shapes),
        ("identity merge", identity_merge),
        ("GPM agent-permutation invariance", gpm_invariance),
        ("scaling with agent count", scaling),
        ("loss unit values", loss_values),
        ("end-to-end determinism and N=0", determinism),
        ("property suite and mutation smoke test", mutation_smoke),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
