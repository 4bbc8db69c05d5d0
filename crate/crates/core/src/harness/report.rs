//! Comparison tables over evaluation reports: per-configuration stability
//! aggregates with best-cell flags, and failure-mode breakdowns.

use crate::env::Outcome;
use crate::error::{Error, Result};
use crate::harness::evaluate::EvalReport;
use crate::scalar::Real;
use crate::stability::{Stat, TrialSummary};

/// One labeled evaluation, e.g. a trained configuration on the shared test
/// set.
#[derive(Debug, Clone)]
pub struct LabeledReport<R: Real> {
    pub label: String,
    pub report: EvalReport<R>,
}

impl<R: Real> LabeledReport<R> {
    pub fn new(label: impl Into<String>, report: EvalReport<R>) -> Self {
        LabeledReport { label: label.into(), report }
    }
}

/// Whether larger or smaller column values win the best-cell flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Polarity {
    HigherBetter,
    LowerBetter,
}

/// Mean/std across trials of one per-trial quantity; `None` when no trial
/// provides it.
fn across_trials<R: Real>(
    summaries: &[TrialSummary<R>],
    pick: impl Fn(&TrialSummary<R>) -> Option<R>,
) -> Option<Stat<f64>> {
    let values: Vec<f64> =
        summaries.iter().filter_map(&pick).map(|v| v.to_f64_lossy()).collect();
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(Stat { mean, std: var.sqrt() })
}

/// The numeric cells of one ablation row, prior to formatting.
struct RowStats {
    success_rate: f64,
    total_contact: Stat<f64>,
    q_msv: Option<Stat<f64>>,
    q_vew: Option<Stat<f64>>,
    q_msv_deriv: Option<Stat<f64>>,
    q_vew_deriv: Option<Stat<f64>>,
    q_dcc: Option<Stat<f64>>,
}

fn row_stats<R: Real>(report: &EvalReport<R>) -> Result<RowStats> {
    let summaries = &report.summaries;
    let total_contact = across_trials(summaries, |s| {
        Some(R::from_f64_lossy(s.total_contact as f64))
    })
    .ok_or_else(|| Error::contract("evaluation report holds no trials"))?;
    Ok(RowStats {
        success_rate: report.success_rate(),
        total_contact,
        q_msv: across_trials(summaries, |s| s.q_msv.map(|st| st.mean)),
        q_vew: across_trials(summaries, |s| s.q_vew.map(|st| st.mean)),
        q_msv_deriv: across_trials(summaries, |s| s.q_msv_deriv.map(|st| st.mean)),
        q_vew_deriv: across_trials(summaries, |s| s.q_vew_deriv.map(|st| st.mean)),
        q_dcc: across_trials(summaries, |s| s.q_dcc.map(|st| st.mean)),
    })
}

/// Appends `*` to the winning mean cell of each column; ties flag every
/// winner.
fn flag_best(cells: &mut [Vec<String>], column: usize, values: &[Option<f64>], polarity: Polarity) {
    let best = values
        .iter()
        .flatten()
        .copied()
        .reduce(|a, b| match polarity {
            Polarity::HigherBetter => a.max(b),
            Polarity::LowerBetter => a.min(b),
        });
    let Some(best) = best else { return };
    for (row, value) in cells.iter_mut().zip(values) {
        if *value == Some(best) {
            row[column].push('*');
        }
    }
}

fn push_stat(row: &mut Vec<String>, stat: &Option<Stat<f64>>) {
    match stat {
        Some(s) => {
            row.push(format!("{}", s.mean));
            row.push(format!("{}", s.std));
        }
        None => {
            row.push(String::new());
            row.push(String::new());
        }
    }
}

pub const ABLATION_HEADER: &str = "config,success_rate,total_contact_mean,total_contact_std,\
q_msv_mean,q_msv_std,q_vew_mean,q_vew_std,q_msv_deriv_mean,q_msv_deriv_std,\
q_vew_deriv_mean,q_vew_deriv_std,q_dcc_mean,q_dcc_std";

/// Renders the cross-configuration comparison CSV. All reports must come
/// from the same test set; the best mean in each column is flagged with `*`.
pub fn ablation_report<R: Real>(rows: &[LabeledReport<R>]) -> Result<String> {
    if rows.len() < 2 {
        return Err(Error::contract("an ablation comparison needs at least two configurations"));
    }
    let reference = &rows[0].report.test_set;
    for row in &rows[1..] {
        if row.report.test_set != *reference {
            return Err(Error::contract(format!(
                "evaluations disagree on the test set: {} vs {}",
                reference, row.report.test_set
            )));
        }
    }
    let stats: Vec<RowStats> = rows.iter().map(|r| row_stats(&r.report)).collect::<Result<_>>()?;

    let mut cells: Vec<Vec<String>> = Vec::with_capacity(rows.len());
    for (row, stat) in rows.iter().zip(&stats) {
        let mut line = vec![row.label.clone(), format!("{}", stat.success_rate)];
        push_stat(&mut line, &Some(stat.total_contact));
        push_stat(&mut line, &stat.q_msv);
        push_stat(&mut line, &stat.q_vew);
        push_stat(&mut line, &stat.q_msv_deriv);
        push_stat(&mut line, &stat.q_vew_deriv);
        push_stat(&mut line, &stat.q_dcc);
        cells.push(line);
    }

    // Column indices of the flagged mean cells.
    let columns: [(usize, Polarity, fn(&RowStats) -> Option<f64>); 7] = [
        (1, Polarity::HigherBetter, |s| Some(s.success_rate)),
        (2, Polarity::HigherBetter, |s| Some(s.total_contact.mean)),
        (4, Polarity::HigherBetter, |s| s.q_msv.map(|x| x.mean)),
        (6, Polarity::HigherBetter, |s| s.q_vew.map(|x| x.mean)),
        (8, Polarity::HigherBetter, |s| s.q_msv_deriv.map(|x| x.mean)),
        (10, Polarity::HigherBetter, |s| s.q_vew_deriv.map(|x| x.mean)),
        (12, Polarity::LowerBetter, |s| s.q_dcc.map(|x| x.mean)),
    ];
    for (column, polarity, pick) in columns {
        let values: Vec<Option<f64>> = stats.iter().map(pick).collect();
        flag_best(&mut cells, column, &values, polarity);
    }

    let mut out = String::from(ABLATION_HEADER);
    out.push('\n');
    for line in cells {
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub const PER_TRIAL_HEADER: &str = "trial,outcome,success,total_contact,\
q_msv_mean,q_msv_std,q_vew_mean,q_vew_std,q_msv_deriv_mean,q_msv_deriv_std,\
q_vew_deriv_mean,q_vew_deriv_std,q_dcc_mean,q_dcc_std";

/// Renders the raw per-trial rows behind an evaluation, one line per trial.
pub fn per_trial_csv<R: Real>(report: &EvalReport<R>) -> String {
    let mut out = String::from(PER_TRIAL_HEADER);
    out.push('\n');
    for (k, (outcome, summary)) in report.outcomes.iter().zip(&report.summaries).enumerate() {
        let mut row = vec![
            format!("{k}"),
            format!("{outcome:?}"),
            format!("{}", summary.success),
            format!("{}", summary.total_contact),
        ];
        let stat = |s: &Option<Stat<R>>| {
            s.map(|st| Stat { mean: st.mean.to_f64_lossy(), std: st.std.to_f64_lossy() })
        };
        push_stat(&mut row, &stat(&summary.q_msv));
        push_stat(&mut row, &stat(&summary.q_vew));
        push_stat(&mut row, &stat(&summary.q_msv_deriv));
        push_stat(&mut row, &stat(&summary.q_vew_deriv));
        push_stat(&mut row, &stat(&summary.q_dcc));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Outcome tallies of one evaluation. Failures split exhaustively into
/// incomplete rotations and drops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailureCounts {
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    pub incomplete: usize,
    pub drops: usize,
}

impl FailureCounts {
    pub fn from_outcomes(outcomes: &[Outcome]) -> Self {
        let successes = outcomes.iter().filter(|o| **o == Outcome::Success).count();
        let incomplete = outcomes.iter().filter(|o| **o == Outcome::Incomplete).count();
        let drops = outcomes.iter().filter(|o| **o == Outcome::Drop).count();
        FailureCounts {
            trials: outcomes.len(),
            successes,
            failures: incomplete + drops,
            incomplete,
            drops,
        }
    }

    /// Percentage of failures that were incomplete / drops; `None` without
    /// failures.
    pub fn failure_percentages(&self) -> Option<(f64, f64)> {
        if self.failures == 0 {
            return None;
        }
        let f = self.failures as f64;
        Some((100.0 * self.incomplete as f64 / f, 100.0 * self.drops as f64 / f))
    }
}

pub const FAILURE_HEADER: &str =
    "policy,trials,successes,failures,incomplete,incomplete_pct,drop,drop_pct";

/// Renders the failure-mode CSV for two or more policies evaluated on the
/// same test set.
pub fn failure_report<R: Real>(rows: &[LabeledReport<R>]) -> Result<String> {
    if rows.len() < 2 {
        return Err(Error::contract("a failure comparison needs at least two policies"));
    }
    let reference = &rows[0].report.test_set;
    for row in &rows[1..] {
        if row.report.test_set != *reference {
            return Err(Error::contract(format!(
                "evaluations disagree on the test set: {} vs {}",
                reference, row.report.test_set
            )));
        }
    }
    let mut out = String::from(FAILURE_HEADER);
    out.push('\n');
    for row in rows {
        let counts = FailureCounts::from_outcomes(&row.report.outcomes);
        let (inc_pct, drop_pct) = match counts.failure_percentages() {
            Some((i, d)) => (format!("{i:.1}"), format!("{d:.1}")),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.label,
            counts.trials,
            counts.successes,
            counts.failures,
            counts.incomplete,
            inc_pct,
            counts.drops,
            drop_pct,
        ));
    }
    Ok(out)
}
