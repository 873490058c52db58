//! `grainmem` command-line front end.
//!
//! Settings resolve in order: built-in defaults, the `--config` file, named
//! flags, then `--set key=value` pairs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grainmem_core::engine::{audit, bootstrap, load_state, save_state};
use grainmem_core::fgn::gradcheck::random_instance;
use grainmem_core::fgn::gradient_check;
use grainmem_core::harness::{load_graph, run, sweep, RunConfig};
use grainmem_core::io::convert_content_cites;
use grainmem_core::partition::{build_hierarchy, embed_nodes};
use grainmem_core::split::split;
use grainmem_core::{rng, Error, Result};

#[derive(Parser)]
#[command(name = "grainmem", version, about = "Sharded graph memory learning with exact unlearning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the two-level partition and write it as JSON.
    Partition {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition, train every sub-model and save the engine state.
    Bootstrap {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        state: PathBuf,
    },
    /// Run one task regime and write its metrics.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for metrics.csv, class_accuracy.csv, report.json and events.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Persist the final engine state here.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Run the task once per value of one hyperparameter.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// One of k, l, tau, mu, fr, ir.
        #[arg(long)]
        axis: String,
        /// Comma-separated values or an inclusive range `a..b`.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients on random instances.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Scan a saved state for traces of forgotten nodes.
    Audit {
        #[arg(long)]
        state: PathBuf,
    },
    /// Convert a `content`/`cites` citation dataset to nodes/edges TSV.
    Convert {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        /// Output directory (nodes.tsv, edges.tsv).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML-style `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// `sbm` or a directory holding nodes.tsv and edges.tsv.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    edges: Option<String>,
    /// blpa or bekm.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    delta1: Option<String>,
    #[arg(long)]
    delta2: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    ir_lr: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    feat_cap: Option<String>,
    #[arg(long)]
    embed_dim: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    /// Sets the partition, model, split and event seeds together.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    partition_seed: Option<String>,
    #[arg(long)]
    model_seed: Option<String>,
    #[arg(long)]
    split_seed: Option<String>,
    #[arg(long)]
    event_seed: Option<String>,
    /// mean or majority.
    #[arg(long)]
    aggregation: Option<String>,
    /// always, on_retrain or never.
    #[arg(long)]
    reaware: Option<String>,
    #[arg(long)]
    freeze_attention: Option<String>,
    /// regular, memory, unlearning, data_incremental or class_incremental.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    train_frac: Option<String>,
    #[arg(long)]
    valid_frac: Option<String>,
    #[arg(long)]
    timestamps: Option<String>,
    /// FR requests per timestamp.
    #[arg(long)]
    fr: Option<String>,
    /// IR requests per timestamp.
    #[arg(long)]
    ir: Option<String>,
    /// Comma-separated classes held out of t0.
    #[arg(long)]
    withheld: Option<String>,
    /// Explicit events file (JSON lines).
    #[arg(long)]
    events: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        // seed first so explicit per-stream seeds win over it
        let flags = [
            ("seed", &self.seed),
            ("dataset", &self.dataset),
            ("nodes", &self.nodes),
            ("edges", &self.edges),
            ("method", &self.method),
            ("k", &self.k),
            ("l", &self.l),
            ("delta1", &self.delta1),
            ("delta2", &self.delta2),
            ("tau", &self.tau),
            ("mu", &self.mu),
            ("lambda", &self.lambda),
            ("hidden", &self.hidden),
            ("lr", &self.lr),
            ("ir_lr", &self.ir_lr),
            ("epochs", &self.epochs),
            ("feat_cap", &self.feat_cap),
            ("embed_dim", &self.embed_dim),
            ("max_iters", &self.max_iters),
            ("partition_seed", &self.partition_seed),
            ("model_seed", &self.model_seed),
            ("split_seed", &self.split_seed),
            ("event_seed", &self.event_seed),
            ("aggregation", &self.aggregation),
            ("reaware", &self.reaware),
            ("freeze_attention", &self.freeze_attention),
            ("regime", &self.regime),
            ("train_frac", &self.train_frac),
            ("valid_frac", &self.valid_frac),
            ("timestamps", &self.timestamps),
            ("fr", &self.fr),
            ("ir", &self.ir),
            ("withheld", &self.withheld),
            ("events", &self.events),
            ("checkpoint_every", &self.checkpoint_every),
        ];
        for (key, val) in flags {
            if let Some(v) = val {
                cfg.set(key, v)?;
            }
        }
        for pair in &self.set {
            cfg.apply_pair(pair)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_values(s: &str) -> Result<Vec<String>> {
    if let Some((a, b)) = s.split_once("..") {
        let parse = |x: &str| {
            x.trim()
                .parse::<i64>()
                .map_err(|_| Error::Config(format!("bad range bound {x:?}")))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if a > b {
            return Err(Error::Config(format!("empty range {s}")));
        }
        return Ok((a..=b).map(|v| v.to_string()).collect());
    }
    let v: Vec<String> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect();
    if v.is_empty() {
        return Err(Error::Config("no sweep values given".into()));
    }
    Ok(v)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_or_print(out: Option<&Path>, json: String) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, json + "\n")?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

/// Returns the process exit code for commands that can fail a check.
fn execute(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Partition { cfg, out } => {
            let cfg = cfg.resolve()?;
            let graph = load_graph(&cfg.dataset)?;
            let e = &cfg.engine;
            let emb = embed_nodes(&graph, e.embed_dim, rng::derive(e.partition_seed, "embed"))?;
            let h = build_hierarchy(&graph, &emb, &e.partition_params())?;
            h.check_invariants(&emb)?;
            let sizes: Vec<usize> = h.first.iter().map(|s| s.len()).collect();
            log::info!("{} nodes in {} shards, sizes {sizes:?}", graph.len(), sizes.len());
            write_or_print(out.as_deref(), serde_json::to_string_pretty(&h)?)?;
            Ok(0)
        }
        Command::Bootstrap { cfg, state } => {
            let cfg = cfg.resolve()?;
            let graph = load_graph(&cfg.dataset)?;
            let s = split(&graph, cfg.train_frac, cfg.valid_frac, cfg.split_seed)?;
            let (st, report) = bootstrap(graph, s, cfg.engine)?;
            save_state(&st, &state)?;
            print_json(&report)?;
            Ok(0)
        }
        Command::Run { cfg, out, state } => {
            let mut cfg = cfg.resolve()?;
            if out.is_some() {
                cfg.out_dir = out;
            }
            if state.is_some() {
                cfg.state_dir = state;
            }
            let (report, _) = run(&cfg)?;
            print!("{}", report.metrics_csv());
            if !report.audit.passed() {
                for v in &report.audit.violations {
                    eprintln!("audit: {v}");
                }
                return Ok(4);
            }
            Ok(0)
        }
        Command::Sweep { cfg, axis, values, out } => {
            let mut cfg = cfg.resolve()?;
            if out.is_some() {
                cfg.out_dir = out;
            }
            let table = sweep(&cfg, &axis, &parse_values(&values)?)?;
            print!("{}", table.to_csv());
            Ok(0)
        }
        Command::Gradcheck { seeds, h, tol } => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("step h must be positive, got {h}")));
            }
            let mut worst = (0.0f64, 0u64);
            for seed in 0..seeds {
                let (m, g) = random_instance(seed);
                let r = gradient_check(&m, &g, h)?;
                if r.max_rel_error > worst.0 {
                    worst = (r.max_rel_error, seed);
                }
            }
            println!("max relative error {:.3e} (seed {}) over {seeds} instances", worst.0, worst.1);
            Ok(if worst.0 <= tol { 0 } else { 4 })
        }
        Command::Audit { state } => {
            let st = load_state(&state)?;
            let report = audit(&st);
            print_json(&report)?;
            Ok(if report.passed() { 0 } else { 4 })
        }
        Command::Convert { content, cites, out } => {
            std::fs::create_dir_all(&out)?;
            let (nodes, edges) = grainmem_core::io::dataset_paths(&out);
            let report = convert_content_cites(&content, &cites, &nodes, &edges)?;
            print_json(&report)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
