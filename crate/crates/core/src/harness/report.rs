//! Results CSV and the method × target summary table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::protocol::{EvalResult, ENSEMBLE, EXPERT, ZERO_SHOT};

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub target_domain: String,
    pub method: String,
    pub variant: Option<String>,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    /// Left empty unless timings were requested, so reruns stay byte-identical.
    pub wall_time_ms: Option<f64>,
}

impl ResultRow {
    pub fn from_eval(seed: u64, r: &EvalResult, with_timings: bool) -> Self {
        Self {
            seed,
            target_domain: r.target_domain.clone(),
            method: r.method.clone(),
            variant: r.variant.clone(),
            accuracy: r.accuracy,
            balanced_accuracy: r.balanced_accuracy,
            wall_time_ms: with_timings.then_some(r.wall_time_ms),
        }
    }

    pub fn label(&self) -> String {
        match &self.variant {
            Some(v) => format!("{}/{v}", self.method),
            None => self.method.clone(),
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Container(format!("results csv: {e}"))
}

pub fn results_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    if rows.is_empty() {
        w.write_record(["seed", "target_domain", "method", "variant", "accuracy", "balanced_accuracy", "wall_time_ms"])
            .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Container(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

pub fn read_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_error)
}

/// Mean accuracy (×100) per method and target, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub targets: Vec<String>,
    /// `(label, per-target means, mean over targets)`.
    pub rows: Vec<(String, Vec<f64>, f64)>,
}

fn first_seen(values: impl Iterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Zero-shot first, merge methods in order of appearance, then ensemble and expert.
pub fn summary_table(rows: &[ResultRow]) -> SummaryTable {
    let targets = first_seen(rows.iter().map(|r| r.target_domain.clone()));
    let labels = first_seen(rows.iter().map(ResultRow::label));
    let rank = |l: &str| match l {
        ZERO_SHOT => 0,
        ENSEMBLE => 2,
        EXPERT => 3,
        _ => 1,
    };
    let mut ordered = labels;
    ordered.sort_by_key(|l| rank(l));

    let table_rows = ordered
        .into_iter()
        .map(|label| {
            let per_target: Vec<f64> = targets
                .iter()
                .map(|t| {
                    let hits: Vec<f64> = rows
                        .iter()
                        .filter(|r| &r.target_domain == t && r.label() == label)
                        .map(|r| 100.0 * r.accuracy)
                        .collect();
                    if hits.is_empty() {
                        f64::NAN
                    } else {
                        hits.iter().sum::<f64>() / hits.len() as f64
                    }
                })
                .collect();
            let avg = per_target.iter().sum::<f64>() / per_target.len() as f64;
            (label, per_target, avg)
        })
        .collect();
    SummaryTable { targets, rows: table_rows }
}

impl SummaryTable {
    pub fn mean_of(&self, label: &str) -> Option<f64> {
        self.rows.iter().find(|(l, _, _)| l == label).map(|(_, _, avg)| *avg)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("method,{},avg\n", self.targets.join(","));
        for (label, values, avg) in &self.rows {
            let cells: Vec<String> = values.iter().map(|v| format!("{v:.2}")).collect();
            out.push_str(&format!("{label},{},{avg:.2}\n", cells.join(",")));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("| method | {} | avg |\n", self.targets.join(" | "));
        out.push_str(&format!("|---|{}---|\n", "---|".repeat(self.targets.len())));
        for (label, values, avg) in &self.rows {
            let cells: Vec<String> = values.iter().map(|v| format!("{v:.2}")).collect();
            out.push_str(&format!("| {label} | {} | {avg:.2} |\n", cells.join(" | ")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, target: &str, method: &str, variant: Option<&str>, acc: f64) -> ResultRow {
        ResultRow {
            seed,
            target_domain: target.into(),
            method: method.into(),
            variant: variant.map(Into::into),
            accuracy: acc,
            balanced_accuracy: acc,
            wall_time_ms: None,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(0, "domain0", "score", Some("trimmed"), 0.8125),
            row(0, "domain0", "zero_shot", None, 0.1),
        ];
        let text = results_to_csv(&rows).unwrap();
        assert!(text.starts_with("seed,target_domain,method,variant,accuracy,balanced_accuracy,wall_time_ms\n"));
        assert!(text.contains("0,domain0,zero_shot,,0.1,0.1,\n"));
        assert_eq!(read_results_csv(&text).unwrap(), rows);
        assert_eq!(results_to_csv(&[]).unwrap().lines().count(), 1);
    }

    #[test]
    fn summary_orders_and_averages() {
        let rows = vec![
            row(0, "a", "expert", None, 1.0),
            row(0, "a", "ties", None, 0.5),
            row(1, "a", "ties", None, 0.7),
            row(0, "a", "zero_shot", None, 0.2),
            row(0, "b", "ties", None, 0.1),
            row(0, "b", "expert", None, 0.9),
            row(0, "b", "zero_shot", None, 0.0),
        ];
        let t = summary_table(&rows);
        let labels: Vec<_> = t.rows.iter().map(|r| r.0.as_str()).collect();
        assert_eq!(labels, ["zero_shot", "ties", "expert"]);
        assert!((t.rows[1].1[0] - 60.0).abs() < 1e-12);
        assert!((t.mean_of("ties").unwrap() - 35.0).abs() < 1e-12);
        assert!(t.to_csv().starts_with("method,a,b,avg\nzero_shot,20.00,0.00,10.00\n"));
        assert!(t.to_markdown().contains("| expert | 100.00 | 90.00 | 95.00 |"));
    }
}
