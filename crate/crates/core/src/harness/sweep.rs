//! Multi-seed sweeps and their summary table.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::config::RunConfig;
use super::run::{persist, run, EvalRecord, RunLog};
use crate::error::Result;

pub const DEFAULT_WINDOWS: usize = 3;

/// Final-record metrics summarised by a sweep.
pub const SUMMARY_METRICS: [&str; 4] = ["train_loss", "heldout_loss", "heldout_acc", "grad_norm_sq"];

/// Mean and sample standard deviation; the deviation is 0 for one value.
///
/// Values are sorted before reduction so the result does not depend on
/// their order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / (n - 1) as f64).sqrt())
}

/// Best value in each of `windows` equal step windows over `[0, total]`.
///
/// Window `w` holds steps in `[w·total/W, (w+1)·total/W)`; the last window
/// also takes `total`. Empty windows yield `None`.
pub fn window_best(points: &[(u64, f64)], total: u64, windows: usize, maximize: bool) -> Vec<Option<f64>> {
    let mut best = vec![None; windows];
    if windows == 0 {
        return best;
    }
    for &(step, value) in points {
        let w = if total == 0 {
            0
        } else {
            ((step as u128 * windows as u128 / total as u128) as usize).min(windows - 1)
        };
        let better = |cur: f64| if maximize { value > cur } else { value < cur };
        match best[w] {
            Some(cur) if !better(cur) => {}
            _ => best[w] = Some(value),
        }
    }
    best
}

/// Metric used for window-best columns: heldout accuracy (maximized) when
/// available, otherwise training loss (minimized).
fn window_metric(records: &[EvalRecord]) -> (&'static str, bool, Vec<(u64, f64)>) {
    if records.iter().all(|r| r.heldout_acc.is_some()) {
        (
            "heldout_acc",
            true,
            records.iter().map(|r| (r.step, r.heldout_acc.unwrap())).collect(),
        )
    } else {
        (
            "train_loss",
            false,
            records.iter().map(|r| (r.step, r.train_loss)).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub config: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// Replicas contributing a value.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigSummary {
    pub name: String,
    pub rows: Vec<SummaryRow>,
    /// `(replica, error message)` for replicas that failed.
    pub failures: Vec<(usize, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub replicas: usize,
    pub configs: Vec<ConfigSummary>,
}

impl SweepSummary {
    /// `config,metric,mean,std,count` rows, then one `# failed` comment per
    /// failed replica.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,metric,mean,std,count\n");
        for c in &self.configs {
            for r in &c.rows {
                let _ = writeln!(out, "{},{},{},{},{}", r.config, r.metric, r.mean, r.std, r.count);
            }
        }
        for c in &self.configs {
            for (rep, msg) in &c.failures {
                let _ = writeln!(out, "# failed {} replica {rep}: {msg}", c.name);
            }
        }
        out
    }

    pub fn has_failures(&self) -> bool {
        self.configs.iter().any(|c| !c.failures.is_empty())
    }
}

/// Summarises the successful replica logs of one config.
pub fn summarize(name: &str, logs: &[RunLog], windows: usize) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let mut push = |metric: String, values: Vec<f64>| {
        let (mean, std) = mean_std(&values);
        rows.push(SummaryRow {
            config: name.to_string(),
            metric,
            mean,
            std,
            count: values.len(),
        });
    };
    if logs.is_empty() {
        return rows;
    }
    for metric in SUMMARY_METRICS {
        let values: Vec<f64> = logs.iter().filter_map(|l| l.last().metric(metric)).collect();
        if !values.is_empty() {
            push(format!("final_{metric}"), values);
        }
    }
    let total = logs[0].last().step;
    let (metric, maximize, _) = window_metric(&logs[0].records);
    let per_log: Vec<Vec<Option<f64>>> = logs
        .iter()
        .map(|l| {
            let (_, _, points) = window_metric(&l.records);
            window_best(&points, total, windows, maximize)
        })
        .collect();
    for w in 0..windows {
        let values: Vec<f64> = per_log.iter().filter_map(|b| b[w]).collect();
        if !values.is_empty() {
            push(format!("best_{metric}_w{w}"), values);
        }
    }
    rows
}

/// Runs every config `replicas` times (seeds `seed + r`) in parallel.
///
/// Logs go to `root/<name>-r<k>/` when `root` is given. A failing replica is
/// reported in its config's summary without stopping the others.
pub fn sweep(configs: &[RunConfig], replicas: usize, windows: usize, root: Option<&Path>) -> Result<SweepSummary> {
    if replicas == 0 {
        return Err(crate::Error::invalid("replicas must be at least 1"));
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..replicas).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<std::result::Result<RunLog, String>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cfg = configs[c].replica(r);
            let log = run(&cfg).map_err(|e| e.to_string())?;
            if let Some(root) = root {
                persist(&log, root).map_err(|e| e.to_string())?;
            }
            Ok(log)
        })
        .collect();

    let mut summaries = Vec::with_capacity(configs.len());
    for (c, cfg) in configs.iter().enumerate() {
        let mut logs = Vec::new();
        let mut failures = Vec::new();
        for r in 0..replicas {
            match &outcomes[c * replicas + r] {
                Ok(log) => logs.push(log.clone()),
                Err(msg) => failures.push((r, msg.clone())),
            }
        }
        summaries.push(ConfigSummary {
            name: cfg.name.clone(),
            rows: summarize(&cfg.name, &logs, windows),
            failures,
        });
    }
    Ok(SweepSummary {
        replicas,
        configs: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_conventions() {
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[0.1, 0.7, 0.3]), mean_std(&[0.7, 0.3, 0.1]));
    }

    #[test]
    fn planted_window_maxima() {
        let mut points: Vec<(u64, f64)> = (0..=30).map(|t| (t, 0.1)).collect();
        points[4].1 = 0.9;
        points[17].1 = 0.8;
        points[30].1 = 0.7;
        let best = window_best(&points, 30, 3, true);
        assert_eq!(best, vec![Some(0.9), Some(0.8), Some(0.7)]);
        let best = window_best(&points, 30, 3, false);
        assert_eq!(best, vec![Some(0.1); 3]);
        assert_eq!(window_best(&[(0, 1.0)], 30, 3, true), vec![Some(1.0), None, None]);
    }
}
