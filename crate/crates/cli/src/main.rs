use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use comamba_core::bench::{bench_scaling, fit_complexity, to_csv, BenchOptions};
use comamba_core::config::Config;
use comamba_core::demo::{demo_weights, render_scene, run_demo};
use comamba_core::fusion::{comamba_fusion_forward_with, Branches};
use comamba_core::io::{load_feature_stack, save_feature_stack};
use comamba_core::pipeline::load_scene;
use comamba_core::verify::verify_suite;
use comamba_core::{Error, FeatureStack, FusionWeights, Method, Tensor};

/// Cooperative BEV feature fusion with selective state-space scans.
#[derive(Parser, Debug)]
#[command(name = "comamba", version)]
struct Cli {
    /// `key = value` file with grid and benchmark defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the self-check suite; exits 1 if any check fails.
    Verify {
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Time fusion against the number of agents and write CSV.
    Bench {
        #[arg(long, value_parser = ["comamba", "attention"])]
        method: String,
        #[arg(long, value_delimiter = ',', value_parser = agent_count)]
        k_list: Option<Vec<usize>>,
        #[arg(long)]
        h: Option<usize>,
        #[arg(long)]
        w: Option<usize>,
        #[arg(long)]
        c: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        state_size: Option<usize>,
        /// Bytes; attention runs predicted above this are extrapolated.
        #[arg(long)]
        memory_cap: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse ego and received feature files into one map.
    Fuse {
        #[arg(long)]
        ego: PathBuf,
        /// Repeatable; each file may hold several agents.
        #[arg(long)]
        cav: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        state_size: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Detect objects in a synthetic or loaded scene and print them.
    Demo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Connected vehicles in the synthetic scene.
        #[arg(long, default_value_t = 2)]
        cavs: usize,
        /// Scene file to run instead of the synthetic one.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
}

fn agent_count(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(format!("{s:?} is not an agent count >= 1")),
    }
}

fn setup_threads(threads: usize) -> Result<Branches, Error> {
    // ignore a pool that already exists; only the first call can size it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(if threads > 1 { Branches::Parallel } else { Branches::Sequential })
}

fn concat_agents(stacks: &[FeatureStack]) -> Result<Tensor, Error> {
    let first = stacks[0].tensor().shape();
    let mut shape = first.to_vec();
    shape[0] = 0;
    let mut data = Vec::new();
    for s in stacks {
        if s.tensor().shape()[1..] != first[1..] {
            return Err(Error::Dimension {
                op: "fuse cav files",
                lhs: first.to_vec(),
                rhs: s.tensor().shape().to_vec(),
            });
        }
        shape[0] += s.agents();
        data.extend_from_slice(s.tensor().data());
    }
    Tensor::new(&shape, data)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply_env()?;
    match cli.command {
        Command::Verify { json } => {
            let report = verify_suite();
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Bench { method, k_list, h, w, c, repeats, warmup, state_size, memory_cap, threads, seed, out } => {
            let method: Method = method.parse()?;
            let threads = threads.unwrap_or(cfg.threads);
            let opts = BenchOptions {
                h: h.unwrap_or(cfg.h),
                w: w.unwrap_or(cfg.w),
                c: c.unwrap_or(cfg.c),
                state_size: state_size.unwrap_or(cfg.state_size),
                repeats: repeats.unwrap_or(cfg.repeats),
                warmup: warmup.unwrap_or(cfg.warmup),
                seed: seed.unwrap_or(cfg.seed),
                memory_cap: memory_cap.unwrap_or(cfg.memory_cap),
                branches: setup_threads(threads)?,
            };
            let ks = k_list.unwrap_or(cfg.k_list.clone());
            let records = bench_scaling(method, &ks, &opts)?;
            let csv = to_csv(&records);
            let mut summary = format!(
                "# method={method} H={} W={} C={} state={} repeats={} warmup={} threads={threads}\n",
                opts.h, opts.w, opts.c, opts.state_size, opts.repeats, opts.warmup
            );
            let points: Vec<(f64, f64)> =
                records.iter().filter(|r| !r.estimated).map(|r| (r.k as f64, r.latency_ns as f64)).collect();
            if let Ok(fit) = fit_complexity(&points) {
                summary.push_str(&format!(
                    "# latency fit: linear_r2={:.4} quadratic_r2={:.4} best={}\n",
                    fit.linear_r2, fit.quadratic_r2, fit.best
                ));
            }
            match out {
                Some(path) => {
                    std::fs::write(&path, csv)?;
                    print!("{summary}");
                    println!("# wrote {} rows to {}", records.len(), path.display());
                }
                None => {
                    print!("{csv}");
                    eprint!("{summary}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Fuse { ego, cav, out, seed, state_size, threads } => {
            let branches = setup_threads(threads.unwrap_or(cfg.threads))?;
            let ego = load_feature_stack(&ego)?;
            let cavs: Vec<FeatureStack> = cav.iter().map(load_feature_stack).collect::<Result<_, _>>()?;
            let cav_tensor = if cavs.is_empty() { None } else { Some(concat_agents(&cavs)?) };
            let weights = FusionWeights::init(ego.channels(), state_size.unwrap_or(cfg.state_size), seed.unwrap_or(cfg.seed))?;
            let fused = comamba_fusion_forward_with(ego.tensor(), cav_tensor.as_ref(), &weights, branches)?;
            let fused = FeatureStack::new(fused)?;
            save_feature_stack(&fused, &out)?;
            let t = fused.tensor().shape();
            println!("fused {} agents into {}x{}x{}x{} -> {}", ego.agents() + cavs.iter().map(|s| s.agents()).sum::<usize>(), t[0], t[1], t[2], t[3], out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Demo { seed, cavs, scene } => {
            setup_threads(cfg.threads)?;
            let text = match scene {
                Some(path) => {
                    let scene = load_scene(path)?;
                    format!("scene seed={seed}\n{}", render_scene(&scene, None, &demo_weights(seed)?)?)
                }
                None => run_demo(seed, cavs)?,
            };
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
