//! Experiment configuration: one TOML file, every key overridable from the
//! command line by its dotted name (`--loop.budget 50`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::baselines::{BaselineKind, BaselineSpec};
use crate::eval::{Gain, ReportOptions};
use crate::reform::GeneratorConfig;
use crate::reformir::LoopConfig;
use crate::sim::TopicWorld;
use crate::text::{english_stopwords, load_stopwords, AnalyzerConfig, Bm25Params};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for query-level parallelism; 0 uses every core.
    pub parallelism: usize,
    pub corpus: CorpusSection,
    pub analyzer: AnalyzerSection,
    pub bm25: Bm25Params,
    /// TSV `qid<TAB>text`.
    pub queries: Option<PathBuf>,
    /// TREC qrels.
    pub qrels: Option<PathBuf>,
    pub reformulations: ReformulationSection,
    pub teacher: TeacherSection,
    pub pipeline: PipelineSection,
    #[serde(rename = "loop")]
    pub loop_: LoopConfig,
    pub sweep: SweepSection,
    pub eval: EvalSection,
    /// Replaces corpus, queries and qrels with a generated world.
    pub world: Option<TopicWorld>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs"),
            parallelism: 0,
            corpus: CorpusSection::default(),
            analyzer: AnalyzerSection::default(),
            bm25: Bm25Params::default(),
            queries: None,
            qrels: None,
            reformulations: ReformulationSection::default(),
            teacher: TeacherSection::default(),
            pipeline: PipelineSection::default(),
            loop_: LoopConfig::default(),
            sweep: SweepSection::default(),
            eval: EvalSection::default(),
            world: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub path: Option<PathBuf>,
    /// `tsv` or `jsonl`.
    pub format: String,
    /// A saved index to load instead of indexing `path`.
    pub index: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerSection {
    pub lowercase: bool,
    pub stemming: bool,
    /// `english`, `none`, or a path to a one-word-per-line file.
    pub stopwords: String,
}

impl Default for AnalyzerSection {
    fn default() -> Self {
        Self {
            lowercase: true,
            stemming: true,
            stopwords: "english".into(),
        }
    }
}

impl AnalyzerSection {
    pub fn build(&self) -> Result<AnalyzerConfig, ExperimentError> {
        let stopwords = match self.stopwords.as_str() {
            "english" => english_stopwords(),
            "none" | "" => Default::default(),
            path => load_stopwords(Path::new(path)).map_err(|e| ExperimentError::Io(format!("stopwords {path}: {e}")))?,
        };
        Ok(AnalyzerConfig {
            lowercase: self.lowercase,
            stopwords,
            stemming: self.stemming,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReformulationSource {
    #[default]
    None,
    File,
    Http,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReformulationSection {
    pub source: ReformulationSource,
    /// JSONL file for the `file` source.
    pub path: Option<PathBuf>,
    /// Keep only the first `m` reformulations.
    pub m: Option<usize>,
    /// Synthetic source: how many to generate and the drifted fraction.
    pub count: usize,
    pub drift: f64,
    pub generator: GeneratorConfig,
}

impl Default for ReformulationSection {
    fn default() -> Self {
        Self {
            source: ReformulationSource::None,
            path: None,
            m: None,
            count: 5,
            drift: 0.0,
            generator: GeneratorConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeacherKind {
    #[default]
    Qrels,
    Http,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherSection {
    pub kind: TeacherKind,
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Qrels teacher: grade that maps to 1.0; 0 uses the largest grade seen.
    pub max_grade: u32,
    /// Qrels teacher: Gaussian noise added to the normalized grade.
    pub noise: f64,
    /// File teacher: `qid docid score` lines.
    pub path: Option<PathBuf>,
}

impl Default for TeacherSection {
    fn default() -> Self {
        Self {
            kind: TeacherKind::Qrels,
            endpoint: String::new(),
            timeout_ms: 60_000,
            max_grade: 0,
            noise: 0.0,
            path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    #[default]
    Reformir,
    BaseRerank,
    Rm3Rerank,
    RrfRerank,
    ConcatRerank,
}

impl PipelineKind {
    pub fn name(self) -> &'static str {
        match self.baseline() {
            Some(b) => b.name(),
            None => "reformir",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            PipelineKind::Reformir => None,
            PipelineKind::BaseRerank => Some(BaselineKind::BaseRerank),
            PipelineKind::Rm3Rerank => Some(BaselineKind::Rm3Rerank),
            PipelineKind::RrfRerank => Some(BaselineKind::RrfRerank),
            PipelineKind::ConcatRerank => Some(BaselineKind::ConcatRerank),
        }
    }
}

impl std::str::FromStr for PipelineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "reformir" {
            return Ok(PipelineKind::Reformir);
        }
        Ok(match s.parse::<BaselineKind>()? {
            BaselineKind::BaseRerank => PipelineKind::BaseRerank,
            BaselineKind::Rm3Rerank => PipelineKind::Rm3Rerank,
            BaselineKind::RrfRerank => PipelineKind::RrfRerank,
            BaselineKind::ConcatRerank => PipelineKind::ConcatRerank,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub kind: PipelineKind,
    pub k_rrf: f64,
    pub query_repetitions: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            kind: PipelineKind::Reformir,
            k_rrf: 60.0,
            query_repetitions: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub m: Vec<usize>,
    /// Pipelines run next to `pipeline.kind` at every m.
    pub compare: Vec<PipelineKind>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            m: vec![0, 1, 2, 3, 5],
            compare: vec![PipelineKind::RrfRerank],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub cutoffs: Vec<usize>,
    /// Minimum grade counted as relevant for recall.
    pub threshold: u32,
    pub gain: Gain,
    pub alpha: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            cutoffs: vec![100],
            threshold: 1,
            gain: Gain::Linear,
            alpha: 0.05,
        }
    }
}

impl EvalSection {
    pub fn report_options(&self) -> ReportOptions {
        ReportOptions {
            cutoffs: self.cutoffs.clone(),
            threshold: self.threshold,
            gain: self.gain,
            alpha: self.alpha,
            weights_path: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file, applies `key=value` overrides, and resolves
    /// relative paths against the file's directory.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ExperimentError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, overrides)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, ExperimentError> {
        let mut table: toml::Table = text.parse().map_err(|e| ExperimentError::Config(format!("{e}")))?;
        for (key, value) in overrides {
            apply_override(&mut table, key, value)?;
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.corpus.path);
        fix(&mut self.corpus.index);
        fix(&mut self.queries);
        fix(&mut self.qrels);
        fix(&mut self.reformulations.path);
        fix(&mut self.teacher.path);
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        let sw = &self.analyzer.stopwords;
        if !matches!(sw.as_str(), "english" | "none" | "") && Path::new(sw).is_relative() {
            self.analyzer.stopwords = base.join(sw).to_string_lossy().into_owned();
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Config(m));
        self.loop_.validate().map_err(ExperimentError::Config)?;
        self.baseline_spec(BaselineKind::BaseRerank)
            .validate()
            .map_err(ExperimentError::Config)?;
        if self.eval.cutoffs.is_empty() || self.eval.cutoffs.contains(&0) {
            return err("eval.cutoffs must be non-empty and positive".into());
        }
        match &self.world {
            Some(w) => w.validate().map_err(|e| ExperimentError::Config(e.to_string()))?,
            None => {
                if self.corpus.path.is_none() && self.corpus.index.is_none() {
                    return err("corpus.path or corpus.index is required without a world".into());
                }
                if self.queries.is_none() {
                    return err("queries is required without a world".into());
                }
            }
        }
        let must_exist = [
            ("corpus.path", &self.corpus.path),
            ("corpus.index", &self.corpus.index),
            ("queries", &self.queries),
            ("qrels", &self.qrels),
            ("reformulations.path", &self.reformulations.path),
            ("teacher.path", &self.teacher.path),
        ];
        for (name, p) in must_exist {
            let checked = self.world.is_none() || name.starts_with("reform") || name.starts_with("teacher");
            if let Some(p) = p.as_ref().filter(|p| checked && !p.exists()) {
                return err(format!("{name}: {} does not exist", p.display()));
            }
        }
        match self.reformulations.source {
            ReformulationSource::File if self.reformulations.path.is_none() => {
                return err("reformulations.source = file needs reformulations.path".into())
            }
            ReformulationSource::Synthetic if self.world.is_none() => {
                return err("synthetic reformulations need a [world] section".into())
            }
            ReformulationSource::Http => self
                .reformulations
                .generator
                .validate()
                .map_err(|e| ExperimentError::Config(e.to_string()))?,
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.reformulations.drift) {
            return err("reformulations.drift must lie in [0, 1]".into());
        }
        match self.teacher.kind {
            TeacherKind::Qrels if self.qrels.is_none() && self.world.is_none() => {
                return err("the qrels teacher needs qrels".into())
            }
            TeacherKind::Http if self.teacher.endpoint.is_empty() => return err("teacher.endpoint is empty".into()),
            TeacherKind::File if self.teacher.path.is_none() => return err("teacher.path is required".into()),
            _ => {}
        }
        if !self.corpus.format.is_empty() {
            self.corpus
                .format
                .parse::<crate::text::CorpusFormat>()
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn baseline_spec(&self, kind: BaselineKind) -> BaselineSpec {
        BaselineSpec {
            kind,
            budget: self.loop_.budget,
            k_rrf: self.pipeline.k_rrf,
            depth: self.loop_.depth,
            batch_size: self.loop_.batch_size,
            rm3: self.loop_.rm3,
            query_repetitions: self.pipeline.query_repetitions,
        }
    }

    /// Hex SHA-256 of the canonical config, ignoring where outputs go and
    /// how many threads run.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.parallelism = 0;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as a TOML
/// literal when possible and kept as a string otherwise.
pub fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<(), ExperimentError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ExperimentError::Config(format!("bad override key `{key}`")));
    }
    let parsed: toml::Value = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ExperimentError::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

/// Splits `--a.b value` / `--a.b=value` pairs.
pub fn parse_override_args(args: &[String]) -> Result<Vec<(String, String)>, ExperimentError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(key) = a.strip_prefix("--") else {
            return Err(ExperimentError::Config(format!("expected `--key value`, got `{a}`")));
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| ExperimentError::Config(format!("`--{key}` needs a value")))?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}
