//! CSV and JSON emission.
//!
//! CSV files start with `#` comment lines: the schema name and version, the
//! master seed, and the fully resolved experiment file, one TOML line per
//! comment line. A fixed header row follows.

use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use crate::arq::{BlerPoint, ThroughputPoint};
use crate::outage::OutageResult;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A named table with string cells in fixed column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub schema: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    format!("{x}")
}

impl Table {
    pub fn outage(r: &OutageResult) -> Self {
        Table {
            schema: "outage",
            columns: vec!["snr_db", "K", "p_out", "std_err", "expected_rounds", "power_loss_db"],
            rows: r
                .rows
                .iter()
                .map(|x| {
                    vec![
                        num(x.snr_db),
                        x.k.to_string(),
                        num(x.p_out),
                        num(x.std_err),
                        num(x.expected_rounds),
                        num(x.power_loss_db),
                    ]
                })
                .collect(),
        }
    }

    pub fn bler(schema: &'static str, points: &[BlerPoint]) -> Self {
        Table {
            schema,
            columns: vec!["snr_db", "round", "receiver", "bler", "std_err", "frames", "failures"],
            rows: points
                .iter()
                .map(|p| {
                    vec![
                        num(p.snr_db),
                        p.round.to_string(),
                        p.receiver.clone(),
                        num(p.bler),
                        num(p.std_err),
                        p.frames.to_string(),
                        p.failures.to_string(),
                    ]
                })
                .collect(),
        }
    }

    pub fn throughput(points: &[ThroughputPoint]) -> Self {
        Table {
            schema: "throughput",
            columns: vec!["snr_db", "receiver", "throughput", "frames", "delivered", "rounds"],
            rows: points
                .iter()
                .map(|p| {
                    vec![
                        num(p.snr_db),
                        p.receiver.clone(),
                        num(p.throughput),
                        p.frames.to_string(),
                        p.delivered.to_string(),
                        p.rounds.to_string(),
                    ]
                })
                .collect(),
        }
    }

    pub fn to_csv(&self, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<u8>> {
        let mut out = format!(
            "# mimo-arq {} schema v{SCHEMA_VERSION}\n# seed = {seed}\n",
            self.schema
        );
        for line in cfg.to_toml().lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(out.into_bytes());
        let fail = |e: csv::Error| Error::Config(format!("CSV encoding failed: {e}"));
        w.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row).map_err(fail)?;
        }
        w.into_inner()
            .map_err(|e| Error::Config(format!("CSV encoding failed: {e}")))
    }

    pub fn to_json(&self, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<u8>> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.to_string(), serde_json::Value::String(v.clone())))
                    .collect()
            })
            .collect();
        let doc = json!({
            "schema": self.schema,
            "version": SCHEMA_VERSION,
            "seed": seed,
            "config": cfg,
            "columns": self.columns,
            "rows": rows,
        });
        let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Config(format!("JSON encoding failed: {e}")))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}
