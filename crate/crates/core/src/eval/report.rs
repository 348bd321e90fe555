//! Condition-bucketed report generation: one column per overlap condition,
//! emitted both as a human-readable table and as JSON built from the same
//! fields.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{median, UtteranceSiSnr, WerReport};
use crate::sim::Condition;

/// Per-utterance SI-SNR rows for one condition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SiSnrTable {
    pub rows: Vec<UtteranceSiSnr>,
}

impl SiSnrTable {
    pub fn median_best_db(&self) -> f64 {
        median(&self.rows.iter().map(|r| r.best_db).collect::<Vec<_>>())
    }
}

/// What one condition contributed to the report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionResult {
    pub wer: Option<WerReport>,
    pub si_snr: Option<SiSnrTable>,
}

impl ConditionResult {
    pub fn is_empty(&self) -> bool {
        self.wer.is_none() && self.si_snr.as_ref().map_or(true, |t| t.rows.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    /// One value per column; `None` renders as a dash.
    pub values: Vec<Option<f64>>,
}

/// The report document: columns follow the canonical condition order
/// (0S, 0L, 10, 20, 30, 40), restricted to conditions that contributed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub notices: Vec<String>,
}

/// Build the report from per-condition results. Conditions with no data are
/// omitted from the columns, with a notice.
pub fn report(results: &BTreeMap<Condition, ConditionResult>) -> BenchReport {
    let mut columns = Vec::new();
    let mut kept: Vec<(Condition, &ConditionResult)> = Vec::new();
    let mut notices = Vec::new();
    let all = Condition::all();
    for cond in all.iter() {
        match results.get(cond) {
            Some(r) if !r.is_empty() => {
                columns.push(cond.label().to_string());
                kept.push((*cond, r));
            }
            Some(_) | None => {
                if results.contains_key(cond) {
                    notices.push(format!("condition {} omitted: no data", cond.label()));
                }
            }
        }
    }

    let mut rows = Vec::new();
    if kept.iter().any(|(_, r)| r.wer.is_some()) {
        let pct = |f: &dyn Fn(&WerReport) -> f64| -> Vec<Option<f64>> {
            kept.iter().map(|(_, r)| r.wer.as_ref().map(f)).collect()
        };
        rows.push(ReportRow {
            metric: "wer_percent".into(),
            values: pct(&|w| 100.0 * w.wer()),
        });
        rows.push(ReportRow {
            metric: "substitutions".into(),
            values: pct(&|w| w.substitutions as f64),
        });
        rows.push(ReportRow { metric: "deletions".into(), values: pct(&|w| w.deletions as f64) });
        rows.push(ReportRow { metric: "insertions".into(), values: pct(&|w| w.insertions as f64) });
        rows.push(ReportRow { metric: "ref_words".into(), values: pct(&|w| w.ref_words as f64) });
    }
    if kept.iter().any(|(_, r)| r.si_snr.is_some()) {
        rows.push(ReportRow {
            metric: "si_snr_median_best_db".into(),
            values: kept
                .iter()
                .map(|(_, r)| r.si_snr.as_ref().map(|t| t.median_best_db()))
                .collect(),
        });
        rows.push(ReportRow {
            metric: "si_snr_utterances".into(),
            values: kept
                .iter()
                .map(|(_, r)| r.si_snr.as_ref().map(|t| t.rows.len() as f64))
                .collect(),
        });
    }
    BenchReport { columns, rows, notices }
}

impl BenchReport {
    /// Tab-separated rendering of exactly the same fields as the JSON form.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric");
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.metric);
            for v in &row.values {
                out.push('\t');
                match v {
                    Some(x) => out.push_str(&format!("{x:.3}")),
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
        for n in &self.notices {
            out.push_str(&format!("# {n}\n"));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
