//! Means and normal-approximation confidence intervals over run records.

use crate::experiment::RunRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    /// Half-width `1.96 * sd / sqrt(n)` with the unbiased standard deviation.
    pub ci95: f64,
}

/// Mean and 95% half-width of `values`; the half-width is 0 for a single value.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

fn row(metric: impl Into<String>, values: &[f64]) -> SummaryRow {
    let (mean, ci95) = mean_ci(values);
    SummaryRow {
        metric: metric.into(),
        mean,
        ci95,
    }
}

/// Summary over successful records, plus the failure rate over all of them.
///
/// Per-goal hitting times `v_goal_<i>` average over the runs whose `K` contains `i`.
pub fn aggregate(records: &[RunRecord]) -> Vec<SummaryRow> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed()).collect();
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut rows = Vec::new();
    if !ok.is_empty() {
        let take = |f: &dyn Fn(&RunRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
        rows.push(row("sample_complexity", &take(&|r| r.sample_complexity as f64)));
        rows.push(row("num_controlled", &take(&|r| r.controlled().len() as f64)));
        rows.push(row("ax_l", &take(&|r| flag(r.ax.ax_l))));
        rows.push(row("ax_prime", &take(&|r| flag(r.ax.ax_prime))));
        rows.push(row("ax_star", &take(&|r| flag(r.ax.ax_star))));
        let num_states = ok[0].hitting.len();
        for s in 0..num_states {
            let values: Vec<f64> = ok.iter().filter_map(|r| r.hitting[s]).collect();
            if !values.is_empty() {
                rows.push(row(format!("v_goal_{s}"), &values));
            }
        }
    }
    let failed: Vec<f64> = records.iter().map(|r| flag(r.failed())).collect();
    if !failed.is_empty() {
        rows.push(row("failed", &failed));
    }
    rows
}
