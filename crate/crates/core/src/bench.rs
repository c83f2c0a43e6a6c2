//! Agent-count scaling runs: analytic cost, median latency and peak tensor
//! working set per `K`, CSV emission, and polynomial growth fits.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::attention::{attention_fuse_forward, estimated_peak_bytes, AttnWeights, DEFAULT_MEMORY_CAP};
use crate::error::{Error, Result};
use crate::flops::{analytic_flops_attention, analytic_flops_comamba};
use crate::fusion::{comamba_fusion_forward_with, Branches, FeatureStack, FusionWeights};
use crate::memtrack::measure_peak;
use crate::random::random_tensor;
use crate::Tensor;

pub const CSV_HEADER: &str = "method,K,flops,latency_ns,peak_bytes";
/// Prefix on CSV values that were extrapolated rather than measured.
pub const ESTIMATE_MARK: char = '~';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Comamba,
    Attention,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Comamba => "comamba",
            Method::Attention => "attention",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comamba" => Ok(Method::Comamba),
            "attention" => Ok(Method::Attention),
            other => Err(Error::Validation(format!("unknown method {other:?}, expected comamba or attention"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchRecord {
    pub method: Method,
    pub k: usize,
    pub flops: u64,
    pub latency_ns: u64,
    pub peak_bytes: u64,
    /// Latency and peak bytes were extrapolated because the run would exceed
    /// the memory cap.
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub state_size: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    pub memory_cap: u64,
    pub branches: Branches,
}

impl BenchOptions {
    pub fn new(h: usize, w: usize, c: usize, repeats: usize) -> Self {
        Self {
            h,
            w,
            c,
            state_size: 16,
            repeats,
            warmup: 1,
            seed: 0,
            memory_cap: DEFAULT_MEMORY_CAP,
            branches: Branches::Sequential,
        }
    }
}

fn median(mut v: Vec<u64>) -> u64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

type Job<'a> = Box<dyn FnMut() -> Result<()> + 'a>;

/// Warms each job up, then times the jobs round-robin `repeats` times so a
/// slow stretch of the machine lands on one sample of several jobs instead of
/// every sample of one. Returns per job the median time and the peak bytes of
/// its first timed run.
fn time_rounds(warmup: usize, repeats: usize, jobs: &mut [Job<'_>]) -> Result<Vec<(u64, u64)>> {
    for job in jobs.iter_mut() {
        for _ in 0..warmup {
            job()?;
        }
    }
    let mut times = vec![Vec::with_capacity(repeats); jobs.len()];
    let mut peaks = vec![0; jobs.len()];
    for round in 0..repeats {
        for (j, job) in jobs.iter_mut().enumerate() {
            let start = Instant::now();
            let (r, p) = measure_peak(&mut *job);
            let ns = start.elapsed().as_nanos().max(1) as u64;
            r?;
            if round == 0 {
                peaks[j] = p;
            }
            times[j].push(ns);
        }
    }
    Ok(times.into_iter().map(median).zip(peaks).collect())
}

/// One record per entry of `k_list`, in order. Inputs and weights are seeded
/// so analytic cost and peak bytes repeat exactly across runs.
pub fn bench_scaling(method: Method, k_list: &[usize], opts: &BenchOptions) -> Result<Vec<BenchRecord>> {
    if k_list.is_empty() || k_list.contains(&0) {
        return Err(Error::Validation("k_list must be nonempty with every K >= 1".into()));
    }
    if opts.repeats == 0 || opts.h == 0 || opts.w == 0 || opts.c == 0 {
        return Err(Error::Validation("repeats, h, w and c must be >= 1".into()));
    }
    let (h, w, c) = (opts.h, opts.w, opts.c);
    let mut records = Vec::with_capacity(k_list.len());
    match method {
        Method::Comamba => {
            let weights = FusionWeights::init(c, opts.state_size, opts.seed)?;
            let inputs: Vec<(Tensor, Option<Tensor>)> = k_list
                .iter()
                .map(|&k| {
                    let ego = random_tensor(&[1, h, w, c], opts.seed.wrapping_add(k as u64));
                    let cavs = (k > 1).then(|| random_tensor(&[k - 1, h, w, c], opts.seed.wrapping_add(1000 + k as u64)));
                    (ego, cavs)
                })
                .collect();
            let weights = &weights;
            let mut jobs: Vec<Job<'_>> = inputs
                .iter()
                .map(|(ego, cavs)| -> Job<'_> {
                    Box::new(move || comamba_fusion_forward_with(ego, cavs.as_ref(), weights, opts.branches).map(drop))
                })
                .collect();
            let timed = time_rounds(opts.warmup, opts.repeats, &mut jobs)?;
            for (&k, (latency_ns, peak_bytes)) in k_list.iter().zip(timed) {
                records.push(BenchRecord {
                    method,
                    k,
                    flops: analytic_flops_comamba(k as u64, h as u64, w as u64, c as u64, opts.state_size as u64),
                    latency_ns,
                    peak_bytes,
                    estimated: false,
                });
            }
        }
        Method::Attention => {
            let weights = AttnWeights::init(c, opts.seed)?;
            let mut pending = Vec::new();
            let mut stacks = Vec::new();
            for (slot, &k) in k_list.iter().enumerate() {
                let flops = analytic_flops_attention(k as u64, h as u64, w as u64, c as u64);
                let tokens = (k * h * w) as u64;
                let predicted = estimated_peak_bytes(tokens, c as u64);
                records.push(BenchRecord { method, k, flops, latency_ns: 0, peak_bytes: predicted, estimated: true });
                if predicted > opts.memory_cap {
                    pending.push(slot);
                } else {
                    stacks.push((slot, FeatureStack::new(random_tensor(&[k, h, w, c], opts.seed.wrapping_add(k as u64)))?));
                }
            }
            let weights = &weights;
            let mut jobs: Vec<Job<'_>> = stacks
                .iter()
                .map(|(_, stack)| -> Job<'_> {
                    Box::new(move || attention_fuse_forward(stack, weights, opts.memory_cap).map(drop))
                })
                .collect();
            let timed = time_rounds(opts.warmup, opts.repeats, &mut jobs)?;
            for ((slot, _), (latency_ns, peak_bytes)) in stacks.iter().zip(timed) {
                let r = &mut records[*slot];
                (r.latency_ns, r.peak_bytes, r.estimated) = (latency_ns, peak_bytes, false);
            }
            if !pending.is_empty() {
                let measured: Vec<(f64, f64)> =
                    records.iter().filter(|r| !r.estimated).map(|r| (r.k as f64, r.latency_ns as f64)).collect();
                for slot in pending {
                    let k = records[slot].k as f64;
                    records[slot].latency_ns = extrapolate_quadratic(&measured, k, opts.memory_cap)?;
                }
            }
        }
    }
    Ok(records)
}

/// Quadratic least-squares extrapolation; with fewer than three measured
/// points, scales the largest measurement by `(k / k_max)²`.
fn extrapolate_quadratic(measured: &[(f64, f64)], k: f64, cap: u64) -> Result<u64> {
    let estimate = if distinct_xs(measured) >= 3 {
        let coef = least_squares(measured, 2)?;
        coef[0] + coef[1] * k + coef[2] * k * k
    } else if let Some(&(k0, y0)) = measured.iter().max_by(|a, b| a.0.total_cmp(&b.0)) {
        y0 * (k / k0).powi(2)
    } else {
        return Err(Error::Resource { what: "attention scaling run (nothing fits to extrapolate from)", estimated_bytes: 0, cap_bytes: cap });
    };
    Ok(estimate.max(1.0).round() as u64)
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let mark = if r.estimated { "~" } else { "" };
        s.push_str(&format!("{},{},{},{mark}{},{mark}{}\n", r.method, r.k, r.flops, r.latency_ns, r.peak_bytes));
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, reason: format!("expected header {CSV_HEADER:?}") }),
    }
    let mut out = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.trim_end().split(',').collect();
        if f.len() != 5 {
            return Err(Error::Parse { line, reason: format!("expected 5 fields, got {}", f.len()) });
        }
        let bad = |what: &str| Error::Parse { line, reason: format!("bad {what}") };
        let method: Method = f[0].parse().map_err(|_| bad("method"))?;
        let k: usize = f[1].parse().map_err(|_| bad("K"))?;
        let flops: u64 = f[2].parse().map_err(|_| bad("flops"))?;
        let (lat, lat_est) = strip_mark(f[3]);
        let (peak, peak_est) = strip_mark(f[4]);
        if lat_est != peak_est {
            return Err(bad("estimate markers (latency and peak must agree)"));
        }
        out.push(BenchRecord {
            method,
            k,
            flops,
            latency_ns: lat.parse().map_err(|_| bad("latency_ns"))?,
            peak_bytes: peak.parse().map_err(|_| bad("peak_bytes"))?,
            estimated: lat_est,
        });
    }
    Ok(out)
}

fn strip_mark(s: &str) -> (&str, bool) {
    match s.strip_prefix(ESTIMATE_MARK) {
        Some(rest) => (rest, true),
        None => (s, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    Linear,
    Quadratic,
}

impl fmt::Display for Growth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Growth::Linear => "linear",
            Growth::Quadratic => "quadratic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityFit {
    pub linear_r2: f64,
    pub quadratic_r2: f64,
    pub linear_rss: f64,
    pub quadratic_rss: f64,
    /// Chosen by residual per remaining degree of freedom; the linear model
    /// wins ties.
    pub best: Growth,
}

fn distinct_xs(points: &[(f64, f64)]) -> usize {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.len()
}

/// Coefficients `c0 + c1·x + … + c_d·x^d`, fitted on a centered and scaled
/// abscissa for conditioning.
fn least_squares(points: &[(f64, f64)], degree: usize) -> Result<Vec<f64>> {
    let n = points.len();
    let mean = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let scale = points.iter().map(|p| (p.0 - mean).abs()).fold(0.0, f64::max).max(1.0);
    let a = DMatrix::from_fn(n, degree + 1, |i, j| ((points[i].0 - mean) / scale).powi(j as i32));
    let b = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let z = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::InsufficientData(format!("least squares failed: {e}")))?;
    // expand p(t) with t = (x − mean)/scale back to powers of x
    let mut coef = vec![0.0; degree + 1];
    for (j, zj) in z.iter().enumerate() {
        for m in 0..=j {
            let binom = (1..=m).fold(1.0, |acc, i| acc * (j + 1 - i) as f64 / i as f64);
            coef[m] += zj * binom * (-mean).powi((j - m) as i32) / scale.powi(j as i32);
        }
    }
    Ok(coef)
}

fn rss(points: &[(f64, f64)], coef: &[f64]) -> f64 {
    points
        .iter()
        .map(|&(x, y)| {
            let fit: f64 = coef.iter().rev().fold(0.0, |acc, c| acc * x + c);
            (y - fit).powi(2)
        })
        .sum()
}

/// Least-squares linear and quadratic fits of `y` against `K`.
pub fn fit_complexity(points: &[(f64, f64)]) -> Result<ComplexityFit> {
    if distinct_xs(points) < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 distinct K values, got {}",
            distinct_xs(points)
        )));
    }
    let n = points.len() as f64;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let tss: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let linear_rss = rss(points, &least_squares(points, 1)?);
    let quadratic_rss = rss(points, &least_squares(points, 2)?);
    // treat round-off residuals as exact fits
    let floor = 1e-20 * points.iter().map(|p| p.1 * p.1).sum::<f64>();
    let clean = |r: f64| if r <= floor { 0.0 } else { r };
    let (lr, qr) = (clean(linear_rss), clean(quadratic_rss));
    let r2 = |r: f64| if tss > 0.0 { 1.0 - r / tss } else if r == 0.0 { 1.0 } else { 0.0 };
    let best = if lr == 0.0 {
        Growth::Linear
    } else if n <= 3.0 || qr / (n - 3.0) < lr / (n - 2.0) {
        Growth::Quadratic
    } else {
        Growth::Linear
    };
    Ok(ComplexityFit { linear_r2: r2(lr), quadratic_r2: r2(qr), linear_rss: lr, quadratic_rss: qr, best })
}

/// Lowest polynomial degree (0, 1 or 2) that passes exactly through every
/// integer point, checked with exact divided differences; `None` when no
/// such degree exists.
pub fn exact_degree(points: &[(u64, u64)]) -> Option<u32> {
    let p: Vec<(i128, i128)> = points.iter().map(|&(x, y)| (x as i128, y as i128)).collect();
    if p.len() < 2 || p.iter().all(|q| q.1 == p[0].1) {
        return Some(0);
    }
    let (x0, y0) = p[0];
    let (x1, y1) = p[1];
    if x0 == x1 {
        return None;
    }
    let affine = p.iter().all(|&(x, y)| (y - y0) * (x1 - x0) == (y1 - y0) * (x - x0));
    if affine {
        return Some(1);
    }
    // second divided difference through (x0, x1, x) as num/den
    let dd2 = |x: i128, y: i128| {
        let (n1, d1) = (y1 - y0, x1 - x0);
        let (n2, d2) = (y - y1, x - x1);
        (n2 * d1 - n1 * d2, d1 * d2 * (x - x0))
    };
    let (n_ref, d_ref) = dd2(p[2].0, p[2].1);
    if d_ref == 0 {
        return None;
    }
    p[2..]
        .iter()
        .all(|&(x, y)| {
            let (n, d) = dd2(x, y);
            d != 0 && n * d_ref == n_ref * d
        })
        .then_some(2)
}
