//! Per-step run records and their JSON-lines serialization.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRecord {
    pub t: usize,
    pub cost: f64,
    pub frozen_cost: f64,
    pub grand_total: f64,
    pub physical_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub delta_t: f64,
    pub client_recourse_cum: usize,
    pub facility_recourse_cum: usize,
    pub stage: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalRecord {
    pub t: usize,
    pub cost: f64,
    pub frozen_cost: f64,
    pub grand_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub delta_t: f64,
    pub connect_bound: f64,
    pub last: f64,
    pub fl_iterate_calls: usize,
    pub sampled_iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HstRecord {
    pub event: usize,
    pub kind: String,
    pub reconnections_cum: usize,
    pub cost: f64,
    pub leaf_cost: f64,
    pub lb_certificate: f64,
    pub marked_count: usize,
    pub open_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_cost: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LedgerLine {
    Meta(RunMeta),
    Online(OnlineRecord),
    Incremental(IncrementalRecord),
    Hst(HstRecord),
}

pub fn write_ledger<W: Write>(mut w: W, lines: &[LedgerLine]) -> std::io::Result<()> {
    for l in lines {
        serde_json::to_writer(&mut w, l)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_ledger<R: BufRead>(r: R) -> std::io::Result<Vec<LedgerLine>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}
