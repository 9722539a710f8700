//! Paired nonparametric statistics over per-instance noise scores and the
//! results-table export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, ReportError, StatsError};
use crate::harness::ScoreRow;
use crate::model::Task;

/// Largest number of non-zero differences handled by the exact distribution.
pub const EXACT_WILCOXON_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
}

fn check_pairs(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(())
}

/// Non-zero differences `a - b` with their mid-ranks by absolute value.
fn signed_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; diffs.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && diffs[order[end]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        let mid = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mid;
        }
        ties.push(end - start);
        start = end;
    }
    (diffs, ranks, ties)
}

/// Two-sided exact p-value from the sign-flip distribution of the
/// positive-rank sum. Mid-ranks are doubled so every rank is an integer.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w = (w_plus * 2.0).round() as usize;
    let total = (1u64 << ranks.len()) as f64;
    let le: u64 = counts[..=w].iter().sum();
    let ge: u64 = counts[w..].iter().sum();
    (2.0 * le.min(ge) as f64 / total).min(1.0)
}

fn normal_p(n: usize, ties: &[usize], w_plus: f64) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::standard();
    (2.0 * std.sf(z)).min(1.0)
}

/// Wilcoxon signed-rank test of `a` against `b`, choosing the exact
/// distribution for up to [`EXACT_WILCOXON_MAX`] non-zero differences.
pub fn wilcoxon(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, StatsError> {
    wilcoxon_with(a, b, None)
}

/// As [`wilcoxon`], optionally forcing the method.
pub fn wilcoxon_with(a: &[f64], b: &[f64], method: Option<WilcoxonMethod>) -> Result<WilcoxonResult, StatsError> {
    check_pairs(a, b)?;
    let (diffs, ranks, ties) = signed_ranks(a, b);
    let n = diffs.len();
    if n == 0 {
        return Err(StatsError::DegenerateTest);
    }
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let method = match method {
        // Sign-flip counts no longer fit in 64 bits past this size.
        Some(WilcoxonMethod::Exact) if n < 63 => WilcoxonMethod::Exact,
        Some(_) => WilcoxonMethod::Normal,
        None if n <= EXACT_WILCOXON_MAX => WilcoxonMethod::Exact,
        None => WilcoxonMethod::Normal,
    };
    let p_value = match method {
        WilcoxonMethod::Exact => exact_p(&ranks, w_plus),
        WilcoxonMethod::Normal => normal_p(n, &ties, w_plus),
    };
    Ok(WilcoxonResult {
        p_value,
        statistic: w_plus,
        n_effective: n,
        method,
    })
}

/// Two-sided p-value only.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    wilcoxon(a, b).map(|r| r.p_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Magnitude {
    N,
    S,
    M,
    L,
}

impl Magnitude {
    pub fn of(delta: f64) -> Self {
        let d = delta.abs();
        if d < 0.147 {
            Magnitude::N
        } else if d < 0.33 {
            Magnitude::S
        } else if d < 0.474 {
            Magnitude::M
        } else {
            Magnitude::L
        }
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Magnitude::N => "N",
            Magnitude::S => "S",
            Magnitude::M => "M",
            Magnitude::L => "L",
        })
    }
}

/// Cliff's delta `(#{a_i > b_j} - #{a_i < b_j}) / (|a| |b|)`.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<(f64, Magnitude), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut gt, mut lt) = (0i64, 0i64);
    for x in a {
        let below = sorted.partition_point(|y| y < x);
        let not_above = sorted.partition_point(|y| y <= x);
        gt += below as i64;
        lt += (sorted.len() - not_above) as i64;
    }
    let delta = (gt - lt) as f64 / (a.len() * b.len()) as f64;
    Ok((delta, Magnitude::of(delta)))
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_correction(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (k, &i) in order.iter().enumerate() {
        running = running.max(((m - k) as f64 * p[i]).min(1.0));
        adjusted[i] = running;
    }
    adjusted
}

/// Arithmetic mean and median (midpoint of the two central values for even n).
pub fn summarize(scores: &[f64]) -> Result<(f64, f64), StatsError> {
    if scores.is_empty() {
        return Err(StatsError::Empty);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok((mean, median))
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: Task,
    pub model: String,
    pub attributor: String,
    pub mean: f64,
    pub median: f64,
    pub n: usize,
    /// Holm-adjusted p of the reference attributor against this one.
    pub p_adjusted: Option<f64>,
    pub delta: Option<f64>,
    pub magnitude: Option<Magnitude>,
}

/// Test details for one reference-versus-baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub task: Task,
    pub model: String,
    pub reference: String,
    pub baseline: String,
    pub n: usize,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub method: Option<WilcoxonMethod>,
    pub statistic: Option<f64>,
    pub n_effective: usize,
    /// All paired differences were zero; `p_value` is set to 1.
    pub degenerate: bool,
    pub delta: f64,
    pub magnitude: Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub reference: String,
    pub rows: Vec<ResultRow>,
    pub comparisons: Vec<Comparison>,
}

/// Summaries per (task, model, attributor) and paired comparisons of
/// `reference` against every other attributor, Holm-corrected over the
/// whole table.
pub fn build_results(scores: &[ScoreRow], reference: &str) -> Result<ResultsTable, StatsError> {
    let mut groups: BTreeMap<(Task, String), Vec<&ScoreRow>> = BTreeMap::new();
    for row in scores {
        groups.entry((row.task, row.model.clone())).or_default().push(row);
    }
    let keys: Vec<(Task, String)> = groups.keys().cloned().collect();

    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    let mut row_of_comparison = Vec::new();
    for key in keys {
        let group = &groups[&key];
        let names: BTreeSet<&str> = group.iter().flat_map(|r| r.scores.keys().map(String::as_str)).collect();
        let mut ordered: Vec<&str> = names.iter().copied().filter(|n| *n != reference).collect();
        if names.contains(reference) {
            ordered.insert(0, reference);
        }
        for name in ordered {
            let values: Vec<f64> = group.iter().filter_map(|r| r.scores.get(name).copied()).collect();
            let (mean, median) = summarize(&values)?;
            rows.push(ResultRow {
                task: key.0,
                model: key.1.clone(),
                attributor: name.to_string(),
                mean,
                median,
                n: values.len(),
                p_adjusted: None,
                delta: None,
                magnitude: None,
            });
            if name == reference {
                continue;
            }
            let (r, b): (Vec<f64>, Vec<f64>) = group
                .iter()
                .filter_map(|row| Some((*row.scores.get(reference)?, *row.scores.get(name)?)))
                .unzip();
            if r.is_empty() {
                continue;
            }
            let (delta, magnitude) = cliffs_delta(&r, &b)?;
            let (p_value, method, statistic, n_effective, degenerate) = match wilcoxon(&r, &b) {
                Ok(w) => (w.p_value, Some(w.method), Some(w.statistic), w.n_effective, false),
                Err(StatsError::DegenerateTest) => (1.0, None, None, 0, true),
                Err(e) => return Err(e),
            };
            comparisons.push(Comparison {
                task: key.0,
                model: key.1.clone(),
                reference: reference.to_string(),
                baseline: name.to_string(),
                n: r.len(),
                p_value,
                p_adjusted: p_value,
                method,
                statistic,
                n_effective,
                degenerate,
                delta,
                magnitude,
            });
            row_of_comparison.push(rows.len() - 1);
        }
    }
    let raw: Vec<f64> = comparisons.iter().map(|c| c.p_value).collect();
    for ((c, adj), &row) in comparisons.iter_mut().zip(holm_correction(&raw)).zip(&row_of_comparison) {
        c.p_adjusted = adj;
        rows[row].p_adjusted = Some(adj);
        rows[row].delta = Some(c.delta);
        rows[row].magnitude = Some(c.magnitude);
    }
    Ok(ResultsTable {
        reference: reference.to_string(),
        rows,
        comparisons,
    })
}

/// Sidecar path holding the full comparison details: `results.csv` ->
/// `results.details.json`.
pub fn details_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("details.json")
}

/// Writes the CSV table and its JSON details sidecar.
pub fn write_results(table: &ResultsTable, csv_path: &Path) -> Result<(), Error> {
    let io = |e: csv::Error| Error::Report(ReportError::Invalid(e.to_string()));
    let mut w = csv::Writer::from_path(csv_path).map_err(io)?;
    w.write_record(["task", "model", "attributor", "mean", "median", "n", "p_adjusted", "delta", "magnitude"])
        .map_err(io)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &table.rows {
        w.write_record([
            r.task.as_str().to_string(),
            r.model.clone(),
            r.attributor.clone(),
            r.mean.to_string(),
            r.median.to_string(),
            r.n.to_string(),
            opt(r.p_adjusted),
            opt(r.delta),
            r.magnitude.map(|m| m.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(table).map_err(ReportError::from)?;
    std::fs::write(details_path(csv_path), json + "\n")?;
    Ok(())
}
