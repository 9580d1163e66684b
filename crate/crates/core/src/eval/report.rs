//! Per-run metric tables with pairwise significance marks.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{bonferroni, ndcg_at, paired_ttest, recall_at, EvalError, Gain, Qrels};
use crate::text::RankedList;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub run_tag: String,
    /// `ndcg` or `recall`.
    pub metric: String,
    pub cutoff: usize,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
    /// Queries without relevant documents.
    pub skipped: Vec<String>,
}

impl MetricReport {
    pub fn column(&self) -> String {
        column_name(&self.metric, self.cutoff)
    }
}

fn column_name(metric: &str, cutoff: usize) -> String {
    match metric {
        "ndcg" => format!("nDCG@{cutoff}"),
        "recall" => format!("Recall@{cutoff}"),
        other => format!("{other}@{cutoff}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub metric: String,
    pub cutoff: usize,
    pub run: String,
    pub baseline: String,
    pub t: f64,
    pub p: f64,
    pub p_adjusted: f64,
    /// `run` beats `baseline` at p < alpha after correction.
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub cutoffs: Vec<usize>,
    pub threshold: u32,
    pub gain: Gain,
    pub alpha: f64,
    /// Where per-query weight dumps live, if any.
    pub weights_path: Option<String>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            cutoffs: vec![100],
            threshold: 1,
            gain: Gain::Linear,
            alpha: 0.05,
            weights_path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub runs: Vec<String>,
    /// One column per (metric, cutoff): nDCG first, then Recall, per cutoff.
    pub columns: Vec<String>,
    /// `cells[run][column]`.
    pub cells: Vec<Vec<MetricReport>>,
    pub significance: Vec<Significance>,
    pub weights_path: Option<String>,
}

impl ReportTable {
    pub fn mean(&self, run: &str, column: &str) -> Option<f64> {
        let r = self.runs.iter().position(|x| x == run)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.cells[r][c].mean)
    }

    fn marks(&self, run: &str, column: &str) -> String {
        self.significance
            .iter()
            .filter(|s| s.significant && s.run == run && column_name(&s.metric, s.cutoff) == column)
            .map(|s| {
                let i = self.runs.iter().position(|r| *r == s.baseline).unwrap_or(0);
                format!("^{i}")
            })
            .collect()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "run\t{}", self.columns.join("\t"))?;
        for (run, row) in self.runs.iter().zip(&self.cells) {
            write!(w, "{run}")?;
            for cell in row {
                write!(w, "\t{:.4}{}", cell.mean, self.marks(run, &cell.column()))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Aligned table; `^i` marks a significant win over run number `i`.
    pub fn render_text(&self) -> String {
        let mut rows = vec![std::iter::once("#  run".to_string()).chain(self.columns.iter().cloned()).collect::<Vec<_>>()];
        for (i, (run, row)) in self.runs.iter().zip(&self.cells).enumerate() {
            let mut r = vec![format!("{i}  {run}")];
            for cell in row {
                r.push(format!("{:.4}{}", cell.mean, self.marks(run, &cell.column())));
            }
            rows.push(r);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            let line: Vec<String> = r.iter().zip(&widths).map(|(s, &w)| format!("{s:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        if let Some(p) = &self.weights_path {
            out.push_str(&format!("weights: {p}\n"));
        }
        out
    }
}

/// Evaluates every run at every cutoff. `comparisons` are (run, baseline)
/// index pairs tested with a paired t-test, Bonferroni-corrected by the
/// number of comparisons.
pub fn report(
    runs: &[(String, BTreeMap<String, RankedList>)],
    qrels: &Qrels,
    comparisons: &[(usize, usize)],
    options: &ReportOptions,
) -> Result<ReportTable, EvalError> {
    if let Some((_, first)) = runs.first() {
        let base: BTreeSet<&String> = first.keys().collect();
        for (tag, run) in &runs[1..] {
            let other: BTreeSet<&String> = run.keys().collect();
            if other != base {
                let only_first: Vec<&str> = base.difference(&other).map(|s| s.as_str()).collect();
                let only_other: Vec<&str> = other.difference(&base).map(|s| s.as_str()).collect();
                return Err(EvalError::QueryMismatch(format!(
                    "`{tag}` lacks [{}] and adds [{}] relative to `{}`",
                    only_first.join(", "),
                    only_other.join(", "),
                    runs[0].0
                )));
            }
        }
    }
    let mut columns = Vec::new();
    for &c in &options.cutoffs {
        columns.push(("ndcg", c));
        columns.push(("recall", c));
    }
    let cells: Vec<Vec<MetricReport>> = runs
        .iter()
        .map(|(tag, run)| {
            columns
                .iter()
                .map(|&(metric, cutoff)| {
                    let mut per_query = BTreeMap::new();
                    let mut skipped = Vec::new();
                    for (qid, list) in run {
                        let v = match metric {
                            "ndcg" => ndcg_at(list, qrels, cutoff, options.gain),
                            _ => recall_at(list, qrels, cutoff, options.threshold),
                        };
                        match v {
                            Some(v) => {
                                per_query.insert(qid.clone(), v);
                            }
                            None => skipped.push(qid.clone()),
                        }
                    }
                    let mean = if per_query.is_empty() {
                        0.0
                    } else {
                        per_query.values().sum::<f64>() / per_query.len() as f64
                    };
                    MetricReport {
                        run_tag: tag.clone(),
                        metric: metric.to_string(),
                        cutoff,
                        per_query,
                        mean,
                        skipped,
                    }
                })
                .collect()
        })
        .collect();

    let mut significance = Vec::new();
    for &(a, b) in comparisons {
        for (col, &(metric, cutoff)) in columns.iter().enumerate() {
            let (ra, rb) = (&cells[a][col], &cells[b][col]);
            let (xs, ys): (Vec<f64>, Vec<f64>) = ra
                .per_query
                .iter()
                .filter_map(|(q, &x)| rb.per_query.get(q).map(|&y| (x, y)))
                .unzip();
            let Ok(test) = paired_ttest(&xs, &ys) else {
                continue;
            };
            let p_adjusted = bonferroni(test.p, comparisons.len());
            significance.push(Significance {
                metric: metric.to_string(),
                cutoff,
                run: runs[a].0.clone(),
                baseline: runs[b].0.clone(),
                t: test.t,
                p: test.p,
                p_adjusted,
                significant: p_adjusted < options.alpha && test.t > 0.0,
            });
        }
    }
    Ok(ReportTable {
        runs: runs.iter().map(|(t, _)| t.clone()).collect(),
        columns: columns.iter().map(|&(m, c)| column_name(m, c)).collect(),
        cells,
        significance,
        weights_path: options.weights_path.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(lists: &[(&str, &[&str])]) -> BTreeMap<String, RankedList> {
        lists
            .iter()
            .map(|(q, docs)| {
                let n = docs.len();
                let scored = docs.iter().enumerate().map(|(i, d)| (d.to_string(), (n - i) as f64)).collect();
                (q.to_string(), RankedList::from_scores(*q, scored))
            })
            .collect()
    }

    fn qrels() -> Qrels {
        let mut q = Qrels::new();
        for qid in ["q1", "q2", "q3"] {
            q.insert(qid, "a", 1).unwrap();
            q.insert(qid, "b", 1).unwrap();
        }
        q
    }

    #[test]
    fn structure_and_marks() {
        let good = run(&[("q1", &["a", "b"]), ("q2", &["a", "b"]), ("q3", &["a", "b"])]);
        let bad = run(&[("q1", &["x", "a"]), ("q2", &["x", "y", "b"]), ("q3", &["x", "y"])]);
        let runs = vec![("bad".to_string(), bad), ("good".to_string(), good.clone())];
        let opts = ReportOptions {
            cutoffs: vec![50, 100],
            ..ReportOptions::default()
        };
        let t = report(&runs, &qrels(), &[(1, 0)], &opts).unwrap();
        assert_eq!(t.columns, ["nDCG@50", "Recall@50", "nDCG@100", "Recall@100"]);
        assert_eq!(t.mean("good", "Recall@100"), Some(1.0));

        let same = vec![("a".to_string(), good.clone()), ("b".to_string(), good)];
        let t = report(&same, &qrels(), &[(1, 0)], &opts).unwrap();
        assert!(t.significance.iter().all(|s| !s.significant && s.p == 1.0));
        assert!(!t.render_text().contains('^'));
    }

    #[test]
    fn disjoint_queries_rejected() {
        let a = run(&[("q1", &["a"])]);
        let b = run(&[("q2", &["a"])]);
        let err = report(&[("a".into(), a), ("b".into(), b)], &qrels(), &[], &ReportOptions::default()).unwrap_err();
        assert!(err.to_string().contains("q1") && err.to_string().contains("q2"));
    }
}
