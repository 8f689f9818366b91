use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::clean::{filter_min_avg_len_corpus, run_pipeline_shard};
use crate::corpus::{
    compute_stats, concat_shards, filter_shard, load_shard_named, map_shard, parallel_paths, read_sides,
    CorpusShard, Record, ShardKind, ShardWriter,
};
use crate::select::build_blend;
use crate::subword::{bpe_learn, sample_for_training, sample_indices, vocab_build_and_prune, BpeModel};
use crate::translit::{build_table, transliterate, TransliterationTable};
use crate::xent::{apply_cut, fallback_lm_score, ingest_scores};

use super::config::{plan, ConfigError, PipelineConfig, Plan, ScoreSource, StageOp, StagePlan};
use super::StageError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config:{}", .0.iter().map(|e| format!("\n  {e}")).collect::<String>())]
    Config(Vec<ConfigError>),
    #[error("stage {index} ({stage}): {source}")]
    Stage {
        index: usize,
        stage: &'static str,
        #[source]
        source: StageError,
    },
    #[error(transparent)]
    Setup(StageError),
}

impl PipelineError {
    pub fn is_config(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker cap; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub index: usize,
    pub stage: String,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub files: Vec<String>,
    pub seed: u64,
    pub input_lines: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_lines: Option<u64>,
    pub report: Value,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    /// Copy with wall times zeroed, for run-to-run comparison.
    pub fn without_timing(&self) -> RunManifest {
        let mut m = self.clone();
        for s in &mut m.stages {
            s.wall_ms = 0;
        }
        m
    }
}

pub fn config_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

enum Artifact {
    Shard(CorpusShard),
    Model(BpeModel),
}

struct Runner<'p> {
    plan: &'p Plan,
    artifacts: HashMap<String, Artifact>,
    created: Vec<PathBuf>,
}

/// Runs every stage in order and writes the manifest to the plan's report
/// path. On failure all files written by this run are removed.
pub fn run(config: &PipelineConfig, options: &RunOptions) -> Result<RunManifest, PipelineError> {
    let plan = plan(config).map_err(PipelineError::Config)?;
    let hash = config_hash(&config.text);
    match options.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| PipelineError::Setup(StageError::Other(e.to_string())))?;
            pool.install(|| run_plan(&plan, hash))
        }
        None => run_plan(&plan, hash),
    }
}

fn run_plan(plan: &Plan, config_sha256: String) -> Result<RunManifest, PipelineError> {
    let mut runner = Runner {
        plan,
        artifacts: HashMap::new(),
        created: Vec::new(),
    };
    let result = runner.run_all(config_sha256);
    if result.is_err() {
        for path in &runner.created {
            if path.exists() {
                if let Err(e) = std::fs::remove_file(path) {
                    log::warn!("could not remove {}: {e}", path.display());
                }
            }
        }
    }
    result
}

impl Runner<'_> {
    fn run_all(&mut self, config_sha256: String) -> Result<RunManifest, PipelineError> {
        let plan = self.plan;
        std::fs::create_dir_all(&plan.work_dir)
            .map_err(|e| PipelineError::Setup(StageError::io(&plan.work_dir, e)))?;
        for src in &plan.sources {
            let paths = match src.kind {
                ShardKind::Parallel => {
                    let (s, t) = plan.langs.as_ref().expect("checked by plan");
                    parallel_paths(&src.path, s, t)
                }
                ShardKind::Mono => vec![src.path.clone()],
            };
            let shard = load_shard_named(&src.name, &paths, src.kind)
                .map_err(|e| PipelineError::Setup(e.into()))?;
            log::info!("source {}: {} lines", src.name, shard.line_count);
            self.artifacts.insert(src.name.clone(), Artifact::Shard(shard));
        }

        let mut records = Vec::with_capacity(plan.stages.len());
        for stage in &plan.stages {
            let start = Instant::now();
            log::info!("stage {} ({}) starting", stage.index, stage.name);
            let record = self.run_stage(stage).map_err(|source| PipelineError::Stage {
                index: stage.index,
                stage: stage.name,
                source,
            })?;
            let record = StageRecord {
                wall_ms: start.elapsed().as_millis() as u64,
                ..record
            };
            log::info!(
                "stage {} ({}) done: {} -> {:?} lines in {} ms",
                stage.index,
                stage.name,
                record.input_lines,
                record.output_lines,
                record.wall_ms
            );
            records.push(record);
        }
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            seed: plan.seed,
            stages: records,
        };
        if let Some(dir) = plan.report.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::Setup(StageError::io(dir, e)))?;
        }
        self.created.push(plan.report.clone());
        std::fs::write(&plan.report, manifest.to_json())
            .map_err(|e| PipelineError::Setup(StageError::io(&plan.report, e)))?;
        Ok(manifest)
    }

    fn shard(&self, name: &str) -> &CorpusShard {
        match self.artifacts.get(name) {
            Some(Artifact::Shard(s)) => s,
            _ => panic!("plan guarantees shard {name} exists"),
        }
    }

    fn output_paths(&mut self, name: &str, kind: ShardKind) -> Vec<PathBuf> {
        let base = self.plan.work_dir.join(name);
        let paths = match kind {
            ShardKind::Parallel => {
                let (s, t) = self.plan.langs.as_ref().expect("checked by plan");
                parallel_paths(&base, s, t)
            }
            ShardKind::Mono => vec![base],
        };
        self.created.extend(paths.iter().cloned());
        paths
    }

    fn run_stage(&mut self, stage: &StagePlan) -> Result<StageRecord, StageError> {
        let inputs: Vec<CorpusShard> = stage.inputs.iter().map(|n| self.shard(n).clone()).collect();
        let input_lines = inputs.iter().map(|s| s.line_count).sum();
        let kind = inputs[0].kind;
        let out_name = stage.output.clone().unwrap_or_default();

        let (produced, report): (Option<Artifact>, Value) = match &stage.op {
            StageOp::Clean { rules } => {
                let paths = self.output_paths(&out_name, kind);
                let (shard, report) = run_pipeline_shard(&inputs[0], rules, &out_name, &paths, None)?;
                (Some(Artifact::Shard(shard)), json!(report))
            }
            StageOp::Concat => {
                let paths = self.output_paths(&out_name, kind);
                let shard = concat_shards(&out_name, &inputs, &paths)?;
                (Some(Artifact::Shard(shard)), Value::Null)
            }
            StageOp::AvgLenGate { min_avg } => {
                let mut kept = Vec::new();
                let mut decisions = Vec::new();
                for s in &inputs {
                    let stats = compute_stats(s)?;
                    let d = filter_min_avg_len_corpus(&stats, *min_avg);
                    decisions.push(json!({"shard": s.name, "avg_len_src": stats.avg_len_src, "decision": d}));
                    if d == crate::clean::CorpusDecision::Include {
                        kept.push(s.clone());
                    }
                }
                let paths = self.output_paths(&out_name, kind);
                let shard = concat_shards(&out_name, &kept, &paths)?;
                (Some(Artifact::Shard(shard)), json!({ "decisions": decisions }))
            }
            StageOp::Translit { side, table } => {
                let table = match table {
                    Some(p) => TransliterationTable::load(p)?,
                    None => build_table(),
                };
                let paths = self.output_paths(&out_name, kind);
                let shard = map_shard(&inputs[0], &out_name, &paths, *side, |s| transliterate(s, &table))?;
                (Some(Artifact::Shard(shard)), Value::Null)
            }
            StageOp::ZhSeg { side, segmenter } => {
                let paths = self.output_paths(&out_name, kind);
                let shard = map_shard(&inputs[0], &out_name, &paths, *side, |s| segmenter.apply(s))?;
                (Some(Artifact::Shard(shard)), Value::Null)
            }
            StageOp::BpeLearn { num_merges, side, sample } => {
                let mut corpora: Vec<Vec<String>> = Vec::new();
                for s in &inputs {
                    let (src, tgt) = read_sides(s, *side)?;
                    corpora.extend(src);
                    corpora.extend(tgt);
                }
                let refs: Vec<&[String]> = corpora.iter().map(Vec::as_slice).collect();
                let training = match sample {
                    Some(n) => sample_for_training(&refs, *n, stage.seed),
                    None => corpora.concat(),
                };
                let model = bpe_learn(&[&training[..]], *num_merges, true)?
                    .pop()
                    .expect("joint learning yields one model");
                let path = self.plan.work_dir.join(format!("{out_name}.bpe"));
                self.created.push(path.clone());
                model.save(&path)?;
                let report = json!({
                    "training_sentences": training.len(),
                    "merges_requested": num_merges,
                    "merges_learned": model.merges().len(),
                });
                (Some(Artifact::Model(model)), report)
            }
            StageOp::BpeApply { model, side, vocab_min_count } => {
                let model = match self.artifacts.get(model) {
                    Some(Artifact::Model(m)) => m.clone(),
                    _ => panic!("plan guarantees model {model} exists"),
                };
                let paths = self.output_paths(&out_name, kind);
                let (shard, report) = match vocab_min_count {
                    None => (
                        map_shard(&inputs[0], &out_name, &paths, *side, |s| model.apply(s, None))?,
                        Value::Null,
                    ),
                    Some(min) => {
                        let (src, tgt) = read_sides(&inputs[0], *side)?;
                        let lines: Vec<String> = src.into_iter().chain(tgt).flatten().collect();
                        let segmented: Vec<String> = lines.par_iter().map(|s| model.apply(s, None)).collect();
                        let vocab = vocab_build_and_prune(&segmented, *min);
                        let vpath = self.plan.work_dir.join(format!("{out_name}.vocab"));
                        self.created.push(vpath.clone());
                        vocab.save(&vpath)?;
                        let shard = map_shard(&inputs[0], &out_name, &paths, *side, |s| {
                            model.apply(s, Some(&vocab))
                        })?;
                        (shard, json!({ "vocab_size": vocab.len(), "vocab_min_count": min }))
                    }
                };
                (Some(Artifact::Shard(shard)), report)
            }
            StageOp::Sample { n } => {
                let picked: HashSet<usize> =
                    sample_indices(inputs[0].line_count as usize, *n, stage.seed).into_iter().collect();
                let paths = self.output_paths(&out_name, kind);
                let shard = filter_shard(&inputs[0], &out_name, &paths, |id| picked.contains(&(id as usize)))?;
                let report = json!({ "sampled": shard.line_count });
                (Some(Artifact::Shard(shard)), report)
            }
            StageOp::Blend { spec } => {
                let pools: Vec<Vec<Record>> = inputs
                    .iter()
                    .map(|s| s.read_all())
                    .collect::<Result<_, _>>()?;
                let sizes: Vec<usize> = pools.iter().map(Vec::len).collect();
                let items = build_blend(spec, &sizes)?;
                let paths = self.output_paths(&out_name, kind);
                let mut writer = ShardWriter::create(&paths, kind)?;
                for it in &items {
                    writer.write(&pools[it.component][it.index])?;
                }
                let line_count = writer.finish()?;
                let report = json!({ "component_counts": spec.component_counts()? });
                let shard = CorpusShard {
                    name: out_name.clone(),
                    kind,
                    paths,
                    line_count,
                };
                (Some(Artifact::Shard(shard)), report)
            }
            StageOp::XentFilter { scores, cut } => {
                let n = inputs[0].line_count;
                let records = match scores {
                    ScoreSource::File(p) => {
                        let text = std::fs::read_to_string(p).map_err(|e| StageError::io(p, e))?;
                        ingest_scores(&text, n)?
                    }
                    ScoreSource::Lm { order, side } => {
                        let (src, tgt) = read_sides(&inputs[0], *side)?;
                        let lines = src.or(tgt).unwrap_or_default();
                        fallback_lm_score(&lines, *order)?
                    }
                };
                let result = apply_cut(&records, cut)?;
                let rejected: HashSet<u64> = result.rejected.iter().copied().collect();
                let paths = self.output_paths(&out_name, kind);
                let shard = filter_shard(&inputs[0], &out_name, &paths, |id| !rejected.contains(&id))?;
                let report = json!({
                    "cut": cut,
                    "kept": result.kept.len(),
                    "rejected": result.rejected.len(),
                });
                (Some(Artifact::Shard(shard)), report)
            }
            StageOp::Stats => {
                let stats = compute_stats(&inputs[0])?;
                (None, json!(stats))
            }
        };

        let (output_lines, files) = match &produced {
            Some(Artifact::Shard(s)) => (Some(s.line_count), file_names(&s.paths)),
            Some(Artifact::Model(_)) => (None, vec![format!("{out_name}.bpe")]),
            None => (None, Vec::new()),
        };
        let mut files = files;
        if matches!(stage.op, StageOp::BpeApply { vocab_min_count: Some(_), .. }) {
            files.push(format!("{out_name}.vocab"));
        }
        if let Some(a) = produced {
            self.artifacts.insert(out_name, a);
        }
        Ok(StageRecord {
            index: stage.index,
            stage: stage.name.to_string(),
            inputs: stage.inputs.clone(),
            output: stage.output.clone(),
            files,
            seed: stage.seed,
            input_lines,
            output_lines,
            report,
            wall_ms: 0,
        })
    }
}

fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect()
}
