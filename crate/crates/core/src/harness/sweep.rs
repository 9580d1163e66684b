//! Scaling the number of reformulations: every pipeline at every m.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::Experiment;
use super::ExperimentError;
use crate::eval::{report, ReportTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub pipeline: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// (m, pipeline, report) per evaluated cell.
    pub reports: Vec<(usize, String, ReportTable)>,
    pub skipped: Vec<usize>,
    pub dir: Option<PathBuf>,
}

impl SweepOutcome {
    pub fn value(&self, m: usize, pipeline: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.m == m && r.pipeline == pipeline && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: Option<&str>) -> std::io::Result<()> {
        if let Some(h) = header {
            writeln!(w, "{h}")?;
        }
        writeln!(w, "m,pipeline,metric,value")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.m, r.pipeline, r.metric, r.value)?;
        }
        Ok(())
    }
}

impl Experiment {
    /// Evaluates the main pipeline and `config.sweep.compare` at every m,
    /// in memory. An m larger than some query's reformulation count is
    /// skipped with a warning.
    pub fn sweep(&self) -> Result<SweepOutcome, ExperimentError> {
        let qrels = self
            .qrels
            .as_ref()
            .ok_or_else(|| ExperimentError::Config("a sweep needs qrels".into()))?;
        let mut pipelines = vec![self.config.pipeline.kind];
        for &p in &self.config.sweep.compare {
            if !pipelines.contains(&p) {
                pipelines.push(p);
            }
        }
        let available = self.reforms.iter().flatten().map(|r| r.len()).min().unwrap_or(0);
        let ms: BTreeSet<usize> = self.config.sweep.m.iter().copied().collect();
        let opts = self.config.eval.report_options();
        let mut out = SweepOutcome {
            rows: Vec::new(),
            reports: Vec::new(),
            skipped: Vec::new(),
            dir: None,
        };
        for m in ms {
            if m > available {
                log::warn!("skipping m = {m}: only {available} reformulations available for some query");
                out.skipped.push(m);
                continue;
            }
            for &p in &pipelines {
                let results = self.run_pipeline(p, Some(m));
                let table = report(&[(p.name().to_string(), Experiment::ranked_lists(&results))], qrels, &[], &opts)
                    .map_err(|e| ExperimentError::Io(e.to_string()))?;
                for (col, cell) in table.columns.iter().zip(&table.cells[0]) {
                    out.rows.push(SweepRow {
                        m,
                        pipeline: p.name().to_string(),
                        metric: col.clone(),
                        value: cell.mean,
                    });
                }
                out.reports.push((m, p.name().to_string(), table));
            }
        }
        Ok(out)
    }
}

/// Runs the sweep and writes `sweep.csv` into the artifact directory.
pub fn sweep_reformulations(config: ExperimentConfig) -> Result<SweepOutcome, ExperimentError> {
    let exp = Experiment::prepare(config)?;
    let mut outcome = exp.sweep()?;
    let dir = exp.artifact_dir()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.csv"))?);
    outcome.write_csv(&mut f, Some(&exp.header()))?;
    f.flush()?;
    std::fs::write(dir.join("config.toml"), format!("{}\n{}", exp.header(), exp.config.to_toml()))?;
    outcome.dir = Some(dir);
    Ok(outcome)
}

