use std::fmt;

use serde::{Deserialize, Serialize};

pub const METRICS_FORMAT: &str = "rlid-metrics";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of examples whose true label is this class.
    pub support: u64,
    /// Nothing was predicted as this class, so precision is reported as 0.
    pub precision_undefined: bool,
    /// The class never occurs in the data, so recall is reported as 0.
    pub recall_undefined: bool,
    /// Both of the above.
    pub f1_undefined: bool,
}

/// Confusion matrix (rows = true, columns = predicted) and derived scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub labels: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
}

#[derive(Serialize)]
struct Report<'a> {
    format: &'a str,
    version: u32,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

impl Metrics {
    /// Derive every score from a square confusion matrix.
    ///
    /// Panics if the matrix is not `labels.len()` square.
    pub fn from_confusion(labels: Vec<String>, confusion: Vec<Vec<u64>>) -> Self {
        let n = labels.len();
        assert!(
            confusion.len() == n && confusion.iter().all(|r| r.len() == n),
            "confusion must be {n}x{n}"
        );
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();
        let accuracy = if total == 0 { 0.0 } else { trace as f64 / total as f64 };
        let per_class = (0..n)
            .map(|c| {
                let hit = confusion[c][c] as f64;
                let row: u64 = confusion[c].iter().sum();
                let col: u64 = confusion.iter().map(|r| r[c]).sum();
                let precision = if col == 0 { 0.0 } else { hit / col as f64 };
                let recall = if row == 0 { 0.0 } else { hit / row as f64 };
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    label: labels[c].clone(),
                    precision,
                    recall,
                    f1,
                    support: row,
                    precision_undefined: col == 0,
                    recall_undefined: row == 0,
                    f1_undefined: col == 0 && row == 0,
                }
            })
            .collect();
        Metrics {
            labels,
            confusion,
            total,
            accuracy,
            per_class,
        }
    }

    /// Tally (true, predicted) class-id pairs.
    pub fn from_pairs(labels: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let n = labels.len();
        let mut confusion = vec![vec![0u64; n]; n];
        for (t, p) in pairs {
            confusion[t][p] += 1;
        }
        Self::from_confusion(labels, confusion)
    }

    pub fn macro_f1(&self) -> f64 {
        self.per_class.iter().map(|c| c.f1).sum::<f64>() / self.per_class.len() as f64
    }

    /// Pretty JSON report with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&Report {
            format: METRICS_FORMAT,
            version: 1,
            metrics: self,
        })
        .expect("metrics serialize");
        s.push('\n');
        s
    }
}

impl fmt::Display for Metrics {
    /// Aligned confusion matrix followed by per-class scores.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name_w = self
            .labels
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("true\\pred".len());
        let cell_w = self
            .labels
            .iter()
            .map(String::len)
            .chain(self.confusion.iter().flatten().map(|v| v.to_string().len()))
            .max()
            .unwrap_or(1);
        writeln!(f, "accuracy: {:.4} ({} examples)", self.accuracy, self.total)?;
        writeln!(f)?;
        write!(f, "{:<name_w$}", "true\\pred")?;
        for l in &self.labels {
            write!(f, "  {l:>cell_w$}")?;
        }
        writeln!(f)?;
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            write!(f, "{l:<name_w$}")?;
            for v in row {
                write!(f, "  {v:>cell_w$}")?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "{:<name_w$}  precision     recall         f1  support", "label")?;
        for c in &self.per_class {
            let mark = |undefined: bool| if undefined { "*" } else { " " };
            writeln!(
                f,
                "{:<name_w$}  {:>9.4}{} {:>9.4}{} {:>9.4}{} {:>8}",
                c.label,
                c.precision,
                mark(c.precision_undefined),
                c.recall,
                mark(c.recall_undefined),
                c.f1,
                mark(c.f1_undefined),
                c.support
            )?;
        }
        if self
            .per_class
            .iter()
            .any(|c| c.precision_undefined || c.recall_undefined)
        {
            writeln!(f, "* undefined, reported as 0")?;
        }
        Ok(())
    }
}
