//! Benchmark matrix: algorithm × input × seed, run in parallel.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use facloc_core::hst::{Hst, TreeFile};
use facloc_core::incremental::IncrementalConfig;
use facloc_core::io::{parse, read_stream};
use facloc_core::randomized::HeapSearch;
use facloc_core::{Instance, Solution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ledger::write_ledger;
use crate::runner::{
    run_general_verified, run_hst_verified, run_incremental_verified, run_online_verified, RunReport, Summary, Verify,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Online,
    Incremental,
    Hst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub input: PathBuf,
    /// Tree file for `hst`; without one a tree is sampled per seed.
    #[serde(default)]
    pub tree: Option<PathBuf>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_epsilon() -> f64 {
    0.3
}

fn default_multiplier() -> f64 {
    3.0
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchConfig {
    #[serde(default)]
    pub cells: Vec<Cell>,
    #[serde(default)]
    pub verify_every: Option<usize>,
    /// Where per-run ledgers are written; nothing is written when absent.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut cfg: BenchConfig = serde_json::from_reader(BufReader::new(f))?;
        // Relative inputs resolve against the config's directory.
        if let Some(dir) = path.parent() {
            for c in &mut cfg.cells {
                c.input = dir.join(&c.input);
                c.tree = c.tree.as_ref().map(|t| dir.join(t));
            }
            cfg.out_dir = cfg.out_dir.map(|o| dir.join(o));
        }
        Ok(cfg)
    }
}

fn run_cell(cell: &Cell, seed: u64, verify: Verify) -> Result<RunReport> {
    let open = || File::open(&cell.input).with_context(|| format!("opening {}", cell.input.display()));
    let mut report = match cell.algorithm {
        Algorithm::Online => {
            let (inst, stream) = parse(BufReader::new(open()?))?;
            run_online_verified(&inst, &stream, cell.epsilon, verify)?
        }
        Algorithm::Incremental => {
            let (inst, stream) = parse(BufReader::new(open()?))?;
            let cfg = IncrementalConfig { epsilon: cell.epsilon, gamma: cell.gamma, multiplier: cell.multiplier, seed };
            run_incremental_verified(&inst, &stream, &cfg, verify)?
        }
        Algorithm::Hst => match &cell.tree {
            Some(t) => {
                let file: TreeFile = serde_json::from_reader(BufReader::new(File::open(t)?))?;
                let hst = Hst::from_file(&file)?;
                let (_, events) = read_stream(BufReader::new(open()?))?;
                run_hst_verified(&hst, &events, None, verify)?
            }
            None => {
                let (inst, stream) = parse(BufReader::new(open()?))?;
                run_general_verified(&inst, &stream, seed, verify)?
            }
        },
    };
    report.summary.input = Some(cell.input.display().to_string());
    report.summary.seed = seed;
    Ok(report)
}

/// Runs every (cell, seed) pair and returns one summary per run in matrix
/// order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<Summary>> {
    let verify = Verify { every: cfg.verify_every.unwrap_or(10) };
    let jobs: Vec<(usize, &Cell, u64)> =
        cfg.cells.iter().enumerate().flat_map(|(k, c)| c.seeds.iter().map(move |&s| (k, c, s))).collect();
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    jobs.par_iter()
        .map(|&(k, cell, seed)| {
            let report = run_cell(cell, seed, verify)?;
            if let Some(dir) = &cfg.out_dir {
                let name = format!("cell{k}-{:?}-seed{seed}.jsonl", cell.algorithm).to_lowercase();
                write_ledger(BufWriter::new(File::create(dir.join(name))?), &report.lines)?;
            }
            Ok(report.summary)
        })
        .collect()
}

pub fn summary_table(rows: &[Summary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>7} {:>9} {:>9} {:>12} {:>10} {:>5}  input",
        "algorithm", "seed", "events", "max_ratio", "cost", "recourse/ev", "ms/event", "viol"
    );
    for r in rows {
        let ratio = r.max_ratio.map_or("-".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>7} {:>9} {:>9.2} {:>12.4} {:>10.4} {:>5}  {}",
            r.algorithm,
            r.seed,
            r.events,
            ratio,
            r.final_cost,
            r.amortized_recourse,
            r.ms_per_event,
            r.violations,
            r.input.as_deref().unwrap_or("-")
        );
    }
    s
}

/// Wall time of `fl_iterate(m)` from the all-nearest single-facility start,
/// best of `repeats`.
pub fn time_fl_iterate(instance: &Instance, m: usize, seed: u64, repeats: usize) -> Result<f64> {
    if instance.num_clients() == 0 {
        bail!("timing needs clients");
    }
    let mut sol = Solution::new(instance.num_facilities());
    sol.open(0);
    for j in 0..instance.num_clients() {
        sol.assign(j, 0);
    }
    let mut best = f64::INFINITY;
    for r in 0..repeats.max(1) {
        let mut hs = HeapSearch::new(instance, sol.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let t = Instant::now();
        hs.fl_iterate(instance, m, &mut rng);
        best = best.min(t.elapsed().as_secs_f64());
        std::hint::black_box(&hs);
    }
    Ok(best)
}
