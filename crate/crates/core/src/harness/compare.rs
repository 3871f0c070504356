//! Long-format merge of run logs for external plotting.

use std::fmt::Write as _;

use super::run::{RunLog, LOG_COLUMNS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub step: u64,
    pub run_id: String,
    pub metric: String,
    pub value: f64,
}

/// One row per present metric value, logs in the given order.
pub fn compare(logs: &[RunLog]) -> Result<Vec<CompareRow>> {
    let first = logs
        .first()
        .ok_or_else(|| Error::invalid("compare needs at least one log"))?;
    let cadence = first.steps();
    for log in &logs[1..] {
        if log.steps() != cadence {
            return Err(Error::invalid(format!(
                "eval cadence of {} differs from {}",
                log.run_id, first.run_id
            )));
        }
    }
    let mut rows = Vec::new();
    for log in logs {
        for rec in &log.records {
            for (name, value) in LOG_COLUMNS[1..].iter().zip(rec.values()) {
                if let Some(value) = value {
                    rows.push(CompareRow {
                        step: rec.step,
                        run_id: log.run_id.clone(),
                        metric: name.to_string(),
                        value,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("step,run_id,metric,value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.step, r.run_id, r.metric, r.value);
    }
    out
}

pub fn parse_compare_csv(text: &str) -> Result<Vec<CompareRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("step,run_id,metric,value") {
        return Err(Error::invalid("missing compare header"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let bad = || Error::invalid(format!("bad compare row {l:?}"));
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != 4 {
                return Err(bad());
            }
            Ok(CompareRow {
                step: cells[0].parse().map_err(|_| bad())?,
                run_id: cells[1].to_string(),
                metric: cells[2].to_string(),
                value: cells[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
