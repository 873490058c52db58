//! One-axis hyperparameter sweeps.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::task::run_task;
use crate::error::{Error, Result};

pub const AXES: [&str; 6] = ["k", "l", "tau", "mu", "fr", "ir"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    /// Final-timestamp micro-F1; `None` when the run failed.
    pub micro_f1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},micro_f1,status\n", self.axis);
        for r in &self.rows {
            match (&r.micro_f1, &r.error) {
                (Some(f), _) => {
                    let _ = writeln!(s, "{},{f:.6},ok", r.value);
                }
                (None, e) => {
                    let msg = e.as_deref().unwrap_or("failed").replace([',', '\n'], ";");
                    let _ = writeln!(s, "{},,failed: {msg}", r.value);
                }
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("sweep_{}.csv", self.axis)), self.to_csv())?;
        Ok(())
    }

    /// Scores of the successful rows, in value order.
    pub fn curve(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.micro_f1).collect()
    }
}

/// Runs the task once per value of `axis`; failures become marked rows.
pub fn sweep(base: &RunConfig, axis: &str, values: &[String]) -> Result<SweepTable> {
    if !AXES.contains(&axis) {
        return Err(Error::Config(format!("cannot sweep {axis:?}; axes are {}", AXES.join(", "))));
    }
    // bad values are config errors up front, not failed rows
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            c.set(axis, v)?;
            c.out_dir = base.out_dir.as_ref().map(|d| d.join(format!("{axis}={v}")));
            c.state_dir = None;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let rows = configs
        .par_iter()
        .zip(values)
        .map(|(c, v)| match run_task(c) {
            Ok(r) => SweepRow {
                value: v.clone(),
                micro_f1: Some(r.final_f1()),
                error: None,
            },
            Err(e) => {
                log::warn!("{axis}={v}: {e}");
                SweepRow {
                    value: v.clone(),
                    micro_f1: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let table = SweepTable {
        axis: axis.to_string(),
        rows,
    };
    if let Some(dir) = &base.out_dir {
        table.write(dir)?;
    }
    Ok(table)
}
