//! Versioned scenario reports: JSON lines plus a summary document.

use std::collections::{BTreeMap, BTreeSet};

use ccrelay_core::crypto::Hash32;
use ccrelay_core::testbed::{Outcome, SimulationResult, TxTimeline};
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA: &str = "ccrelay.scenario-report/1";
pub const SUMMARY_SCHEMA: &str = "ccrelay.scenario-summary/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    pub height: u64,
    pub timestamp: u64,
    pub producer: u32,
    pub hash: Hash32,
    pub batch_size: usize,
    pub verdicts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Tx(TxTimeline),
    Block(BlockRecord),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Percentiles {
    pub count: usize,
    pub min: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
    pub mean: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| v[((p / 100.0 * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self {
            count: v.len(),
            min: v[0],
            p50: rank(50.0),
            p90: rank(90.0),
            p99: rank(99.0),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub end_time_ms: u64,
    pub workload: usize,
    pub outcomes: BTreeMap<String, usize>,
    pub all_completed: bool,
    pub latency_ms: Percentiles,
    pub blocks: usize,
    pub batch_sizes: Vec<usize>,
    pub converged: bool,
    pub submit_rejections: BTreeMap<String, usize>,
    pub router_incidents: BTreeMap<String, usize>,
    pub adversary_events: usize,
    pub leaked_payloads: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub records: Vec<Record>,
    pub summary: Summary,
}

fn outcome_name(o: Option<Outcome>) -> String {
    o.map_or("unfinished".into(), |o| serde_json::to_value(o).expect("enum").as_str().expect("string").to_string())
}

impl ScenarioReport {
    pub fn from_result(r: &SimulationResult) -> Self {
        let name = r.scenario.name.clone();
        let mut records = vec![Record::Header(Header { schema: REPORT_SCHEMA.into(), scenario: name.clone(), seed: r.scenario.seed })];
        records.extend(r.timelines.iter().cloned().map(Record::Tx));
        for b in &r.blocks {
            let mut verdicts = BTreeMap::new();
            for e in &b.entries {
                *verdicts.entry(e.verdict.code().to_string()).or_insert(0) += 1;
            }
            records.push(Record::Block(BlockRecord {
                height: b.height,
                timestamp: b.timestamp,
                producer: b.producer,
                hash: b.hash(),
                batch_size: b.entries.len(),
                verdicts,
            }));
        }

        let mut outcomes = BTreeMap::new();
        for t in r.workload() {
            *outcomes.entry(outcome_name(t.outcome)).or_insert(0) += 1;
        }
        let latencies: Vec<f64> = r.workload().filter_map(TxTimeline::latency).map(|l| l as f64).collect();
        let mut submit_rejections = BTreeMap::new();
        for s in r.submissions.iter().filter(|s| s.result != "accepted") {
            *submit_rejections.entry(s.result.clone()).or_insert(0) += 1;
        }
        let mut router_incidents = BTreeMap::new();
        for i in &r.router_incidents {
            *router_incidents.entry(i.code.to_string()).or_insert(0) += 1;
        }
        let summary = Summary {
            schema: SUMMARY_SCHEMA.into(),
            scenario: name,
            seed: r.scenario.seed,
            end_time_ms: r.end_time,
            workload: r.workload().count(),
            outcomes,
            all_completed: r.all_completed(),
            latency_ms: Percentiles::of(&latencies),
            blocks: r.blocks.len(),
            batch_sizes: r.batch_sizes(),
            converged: r.converged,
            submit_rejections,
            router_incidents,
            adversary_events: r.adversary_log.len(),
            leaked_payloads: r.leaked.len(),
        };
        Self { records, summary }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes") + "\n"
    }
}

/// Checks a JSON-lines report against the current schema: a header first,
/// known record shapes only, unique transaction indices, and a terminal
/// outcome for every workload transaction. Returns the number of records.
pub fn validate_jsonl(text: &str) -> Result<usize, String> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or("empty report")?;
    match serde_json::from_str::<Record>(first).map_err(|e| format!("line 1: {e}"))? {
        Record::Header(h) if h.schema == REPORT_SCHEMA => {}
        Record::Header(h) => return Err(format!("unsupported schema {:?}", h.schema)),
        _ => return Err("line 1: expected header".into()),
    }
    let mut seen = BTreeSet::new();
    let mut count = 1;
    for (i, line) in lines {
        let rec: Record = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        match rec {
            Record::Header(_) => return Err(format!("line {}: second header", i + 1)),
            Record::Tx(t) => {
                if !seen.insert(t.index) {
                    return Err(format!("line {}: transaction {} repeated", i + 1, t.index));
                }
                if t.workload.is_some() && t.outcome.is_none() {
                    return Err(format!("line {}: transaction {} has no outcome", i + 1, t.index));
                }
            }
            Record::Block(_) => {}
        }
        count += 1;
    }
    Ok(count)
}

pub fn validate_summary(text: &str) -> Result<Summary, String> {
    let s: Summary = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if s.schema != SUMMARY_SCHEMA {
        return Err(format!("unsupported schema {:?}", s.schema));
    }
    Ok(s)
}
