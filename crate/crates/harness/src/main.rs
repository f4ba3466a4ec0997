use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use facloc_core::frt::{sample_hst, stretch_stats};
use facloc_core::hst::{Hst, TreeFile};
use facloc_core::incremental::IncrementalConfig;
use facloc_core::io::{parse, read_stream, write_stream, Event, EventStream, Header};
use facloc_core::oracle::brute_force_opt;
use facloc_harness::bench::{run_bench, summary_table, BenchConfig};
use facloc_harness::gen::{line, random_metric, random_tree_stream, MetricParams, TreeParams};
use facloc_harness::ledger::write_ledger;
use facloc_harness::runner::{
    run_general_verified, run_hst_verified, run_incremental_verified, run_online_verified, RunReport, Verify,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "facloc", version, about = "Online, incremental and fully dynamic facility location")]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the per-step ledger (JSON lines) here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Run the oracle every K steps; 0 disables it.
    #[arg(long, global = true, default_value_t = 10)]
    verify_every: usize,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    /// Exit with a nonzero status if any checked property is violated.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance stream.
    #[command(subcommand)]
    Gen(GenKind),
    /// Exact optimum for the clients present at the end of a stream.
    Oracle {
        #[arg(long)]
        input: PathBuf,
    },
    /// Online local search with recourse (arrivals only).
    RunOnline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        epsilon: f64,
    },
    /// Incremental randomized algorithm (arrivals only).
    RunIncremental {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        epsilon: f64,
        /// Aspect-ratio bound; defaults to n³.
        #[arg(long)]
        gamma: Option<f64>,
        /// Multiplier of the fl-iterate budget.
        #[arg(long, default_value_t = 3.0)]
        multiplier: f64,
    },
    /// Fully dynamic algorithm on a tree. Without --tree, one tree is
    /// sampled over the stream's facility metric.
    RunHst {
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
    },
    /// Sample tree embeddings of the facility metric.
    Embed {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        samples: usize,
        /// Write the first sampled tree here.
        #[arg(long)]
        emit_tree: Option<PathBuf>,
        /// Print distortion statistics over all samples.
        #[arg(long)]
        stats: bool,
    },
    /// Run a benchmark matrix described by a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Facilities and clients on a line.
    Line {
        #[arg(long, value_delimiter = ',', required = true)]
        positions: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        costs: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        arrivals: Vec<u64>,
        #[command(flatten)]
        out: Out,
    },
    /// Random points on a grid with L1 distances.
    RandomMetric {
        #[arg(long, default_value_t = 10)]
        facilities: usize,
        #[arg(long, default_value_t = 100)]
        clients: usize,
        #[arg(long, default_value_t = 100)]
        grid: u64,
        #[arg(long, default_value_t = 1)]
        min_cost: u32,
        #[arg(long, default_value_t = 100)]
        max_cost: u32,
        #[command(flatten)]
        out: Out,
    },
    /// Random tree plus a stream of arrivals and departures at its leaves.
    Hst {
        #[arg(long, default_value_t = 8)]
        leaves: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        max_cost: u32,
        #[arg(long, default_value_t = 100)]
        events: usize,
        #[arg(long, default_value_t = 0.3)]
        depart_prob: f64,
        /// Tree file destination.
        #[arg(long)]
        tree_out: PathBuf,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Args)]
struct Out {
    /// Stream destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn emit_stream(out: &Out, header: &Header, events: &[Event]) -> Result<()> {
    let mut w = writer(out.out.as_deref())?;
    write_stream(&mut w, header, events)?;
    w.flush()?;
    Ok(())
}

fn finish(cli: &Cli, mut report: RunReport, input: &Path) -> Result<bool> {
    report.summary.input = Some(input.display().to_string());
    if let Some(p) = &cli.report {
        let mut w = writer(Some(p))?;
        write_ledger(&mut w, &report.lines)?;
        w.flush()?;
    }
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    if !cli.quiet {
        println!("{}", serde_json::to_string_pretty(&report.summary)?);
    }
    Ok(report.violations.is_empty())
}

fn run(cli: &Cli) -> Result<bool> {
    let verify = Verify { every: cli.verify_every };
    match &cli.cmd {
        Cmd::Gen(kind) => {
            match kind {
                GenKind::Line { positions, costs, arrivals, out } => {
                    let (h, e) = line(positions, costs, arrivals)?;
                    emit_stream(out, &h, &e)?;
                }
                GenKind::RandomMetric { facilities, clients, grid, min_cost, max_cost, out } => {
                    let p = MetricParams {
                        facilities: *facilities,
                        clients: *clients,
                        grid: *grid,
                        min_cost: *min_cost,
                        max_cost: *max_cost,
                    };
                    let (h, e) = random_metric(&p, cli.seed)?;
                    emit_stream(out, &h, &e)?;
                }
                GenKind::Hst { leaves, depth, max_cost, events, depart_prob, tree_out, out } => {
                    let p = TreeParams {
                        leaves: *leaves,
                        depth: *depth,
                        max_cost: *max_cost,
                        events: *events,
                        depart_prob: *depart_prob,
                    };
                    let (tree, h, e) = random_tree_stream(&p, cli.seed)?;
                    let mut w = writer(Some(tree_out))?;
                    serde_json::to_writer(&mut w, &tree)?;
                    w.flush()?;
                    emit_stream(out, &h, &e)?;
                }
            }
            Ok(true)
        }
        Cmd::Oracle { input } => {
            let (mut inst, stream) = parse(reader(input)?)?;
            let mut live = Vec::new();
            for e in stream.events() {
                match e {
                    Event::Arrive { client, location } => {
                        let d = EventStream::distances(&inst, location)?;
                        live.push(inst.add_client(client.clone(), d)?);
                    }
                    Event::Depart { client } => {
                        let j = inst.client_id(client).expect("validated stream");
                        live.retain(|&k| k != j);
                    }
                }
            }
            let opt = brute_force_opt(&inst, &live);
            if !cli.quiet {
                let assignment: Vec<_> =
                    opt.assignment.iter().map(|&(j, i)| (inst.client(j).name.clone(), i)).collect();
                let out = serde_json::json!({
                    "cost": opt.cost,
                    "open": opt.open,
                    "assignment": assignment,
                    "method": "exhaustive-subsets",
                });
                println!("{}", serde_json::to_string_pretty(&out)?);
            }
            Ok(true)
        }
        Cmd::RunOnline { input, epsilon } => {
            let (inst, stream) = parse(reader(input)?)?;
            let mut r = run_online_verified(&inst, &stream, *epsilon, verify)?;
            r.summary.seed = cli.seed;
            finish(cli, r, input)
        }
        Cmd::RunIncremental { input, epsilon, gamma, multiplier } => {
            let (inst, stream) = parse(reader(input)?)?;
            let cfg = IncrementalConfig { epsilon: *epsilon, gamma: *gamma, multiplier: *multiplier, seed: cli.seed };
            finish(cli, run_incremental_verified(&inst, &stream, &cfg, verify)?, input)
        }
        Cmd::RunHst { tree, input } => {
            let report = match tree {
                Some(t) => {
                    let file: TreeFile = serde_json::from_reader(reader(t)?)?;
                    let hst = Hst::from_file(&file)?;
                    let (header, events) = read_stream(reader(input)?)?;
                    if header.costs.len() != hst.num_facilities() {
                        bail!("stream has {} facilities, tree has {}", header.costs.len(), hst.num_facilities());
                    }
                    run_hst_verified(&hst, &events, None, verify)?
                }
                None => {
                    let (inst, stream) = parse(reader(input)?)?;
                    run_general_verified(&inst, &stream, cli.seed, verify)?
                }
            };
            finish(cli, report, input)
        }
        Cmd::Embed { input, samples, emit_tree, stats } => {
            let (inst, _) = parse(reader(input)?)?;
            if let Some(p) = emit_tree {
                let s = sample_hst(&inst, &mut ChaCha8Rng::seed_from_u64(cli.seed));
                let mut w = writer(Some(p))?;
                serde_json::to_writer(&mut w, &s.hst.to_file())?;
                w.flush()?;
            }
            let mut ok = true;
            if *stats {
                let st = stretch_stats(&inst, (*samples).max(1), cli.seed);
                ok = st.dominance_violations == 0;
                if !cli.quiet {
                    println!("{}", serde_json::to_string_pretty(&st)?);
                }
            }
            Ok(ok)
        }
        Cmd::Bench { config } => {
            let mut cfg = BenchConfig::load(config)?;
            if cfg.verify_every.is_none() {
                cfg.verify_every = Some(cli.verify_every);
            }
            let rows = run_bench(&cfg)?;
            if let Some(p) = &cli.report {
                let mut w = writer(Some(p))?;
                for r in &rows {
                    serde_json::to_writer(&mut w, r)?;
                    writeln!(w)?;
                }
                w.flush()?;
            }
            if !cli.quiet {
                print!("{}", summary_table(&rows));
            }
            Ok(rows.iter().all(|r| r.violations == 0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if cli.check => ExitCode::from(1),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
