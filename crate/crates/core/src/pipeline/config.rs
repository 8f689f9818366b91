//! Pipeline config text format and static planning.
//!
//! ```text
//! seed = 42
//! work_dir = build
//! langs = en,gu
//!
//! [source]
//! name = parallel
//! path = data/parallel
//! kind = parallel
//!
//! [clean]
//! input = parallel
//! output = parallel.clean
//! rule = len_bounds min=3 max=200
//! rule = len_ratio max=1.3
//! ```
//! Lines starting with `#` are comments. Relative paths are resolved
//! against the directory holding the config file.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cjk::{ZhMode, ZhSegmenter};
use crate::clean::{parse_rule, validate_rules, CleanRule};
use crate::clean::rules::disambiguate_ids;
use crate::corpus::{ShardKind, SideSel};
use crate::select::{BlendComponent, BlendSpec, Sampling};
use crate::xent::{CutMode, Direction, FilterCut};

pub const STAGE_NAMES: &[&str] = &[
    "clean",
    "concat",
    "avg-len-gate",
    "translit",
    "zh-seg",
    "bpe-learn",
    "bpe-apply",
    "sample",
    "blend",
    "xent-filter",
    "stats",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    /// `stage 3 (clean)`, `source parallel`, or empty for global keys.
    pub context: String,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if !self.context.is_empty() {
            write!(f, "{}: ", self.context)?;
        }
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub header: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

/// Syntactic form of a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub text: String,
    pub base_dir: PathBuf,
    pub globals: Vec<Entry>,
    pub sections: Vec<Section>,
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, Vec<ConfigError>> {
        let mut errors = Vec::new();
        let mut globals = Vec::new();
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(h) if !h.trim().is_empty() => sections.push(Section {
                        header: h.trim().to_string(),
                        line,
                        entries: Vec::new(),
                    }),
                    _ => errors.push(syntax(line, "malformed section header")),
                }
                continue;
            }
            let Some((k, v)) = trimmed.split_once('=') else {
                errors.push(syntax(line, "expected key = value"));
                continue;
            };
            let entry = Entry {
                key: k.trim().to_string(),
                value: v.trim().to_string(),
                line,
            };
            if entry.key.is_empty() {
                errors.push(syntax(line, "empty key"));
                continue;
            }
            match sections.last_mut() {
                Some(s) => s.entries.push(entry),
                None => globals.push(entry),
            }
        }
        if errors.is_empty() {
            Ok(PipelineConfig {
                text: text.to_string(),
                base_dir: base_dir.to_path_buf(),
                globals,
                sections,
            })
        } else {
            Err(errors)
        }
    }

    pub fn load(path: &Path) -> Result<Self, Vec<ConfigError>> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            vec![ConfigError {
                line: None,
                context: String::new(),
                field: None,
                message: format!("cannot read {}: {e}", path.display()),
            }]
        })?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::parse(&text, &base)
    }
}

fn syntax(line: usize, message: &str) -> ConfigError {
    ConfigError {
        line: Some(line),
        context: String::new(),
        field: None,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreSource {
    File(PathBuf),
    /// Fallback n-gram model trained on one side of the input shard.
    Lm { order: usize, side: SideSel },
}

#[derive(Debug, Clone)]
pub enum StageOp {
    Clean { rules: Vec<CleanRule> },
    Concat,
    AvgLenGate { min_avg: f64 },
    Translit { side: SideSel, table: Option<PathBuf> },
    ZhSeg { side: SideSel, segmenter: ZhSegmenter },
    BpeLearn { num_merges: usize, side: SideSel, sample: Option<usize> },
    BpeApply { model: String, side: SideSel, vocab_min_count: Option<u64> },
    Sample { n: usize },
    Blend { spec: BlendSpec },
    XentFilter { scores: ScoreSource, cut: FilterCut },
    Stats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Shard(ShardKind),
    Model,
}

#[derive(Debug, Clone)]
pub struct StagePlan {
    pub index: usize,
    pub name: &'static str,
    pub line: usize,
    pub inputs: Vec<String>,
    pub output: Option<String>,
    pub seed: u64,
    pub op: StageOp,
}

#[derive(Debug, Clone)]
pub struct SourcePlan {
    pub name: String,
    pub path: PathBuf,
    pub kind: ShardKind,
}

/// A fully checked pipeline, ready to run.
#[derive(Debug, Clone)]
pub struct Plan {
    pub seed: u64,
    pub work_dir: PathBuf,
    pub langs: Option<(String, String)>,
    pub report: PathBuf,
    pub sources: Vec<SourcePlan>,
    pub stages: Vec<StagePlan>,
}

/// Static validation: every error `plan` would report, without reading data.
pub fn validate(config: &PipelineConfig) -> Vec<ConfigError> {
    plan(config).err().unwrap_or_default()
}

struct Fields<'a> {
    entries: &'a [Entry],
    used: HashSet<usize>,
    context: String,
    header_line: usize,
    errors: Vec<ConfigError>,
}

impl<'a> Fields<'a> {
    fn new(entries: &'a [Entry], context: String, header_line: usize) -> Self {
        Fields {
            entries,
            used: HashSet::new(),
            context,
            header_line,
            errors: Vec::new(),
        }
    }

    fn error(&mut self, line: Option<usize>, field: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line: line.or(Some(self.header_line)),
            context: self.context.clone(),
            field: (!field.is_empty()).then(|| field.to_string()),
            message: message.into(),
        });
    }

    fn all(&mut self, key: &str) -> Vec<&'a Entry> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.key == key {
                self.used.insert(i);
                out.push(e);
            }
        }
        out
    }

    fn get(&mut self, key: &str) -> Option<&'a Entry> {
        let found = self.all(key);
        if found.len() > 1 {
            self.error(Some(found[1].line), key, "given more than once");
        }
        found.first().copied()
    }

    fn required(&mut self, key: &str) -> Option<&'a Entry> {
        let e = self.get(key);
        if e.is_none() {
            self.error(None, key, "missing");
        }
        e
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let e = self.get(key)?;
        match e.value.parse() {
            Ok(v) => Some(v),
            Err(err) => {
                self.error(Some(e.line), key, format!("invalid value {:?}: {err}", e.value));
                None
            }
        }
    }

    fn parse_required<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        if self.get(key).is_none() {
            self.error(None, key, "missing");
            return None;
        }
        self.parse(key)
    }

    fn list(&mut self, key: &str) -> Option<(Vec<String>, usize)> {
        self.get(key).map(|e| {
            (
                e.value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect(),
                e.line,
            )
        })
    }

    fn finish(mut self) -> Vec<ConfigError> {
        for (i, e) in self.entries.iter().enumerate() {
            if !self.used.contains(&i) {
                self.errors.push(ConfigError {
                    line: Some(e.line),
                    context: self.context.clone(),
                    field: Some(e.key.clone()),
                    message: "unknown key".into(),
                });
            }
        }
        self.errors
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_relative() {
        base.join(p)
    } else {
        p
    }
}

pub fn plan(config: &PipelineConfig) -> Result<Plan, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let base = &config.base_dir;

    let mut g = Fields::new(&config.globals, String::new(), 0);
    let seed = g.parse::<u64>("seed").unwrap_or(0);
    let work_dir = resolve(base, g.get("work_dir").map_or("work", |e| e.value.as_str()));
    let langs = match g.list("langs") {
        Some((l, _)) if l.len() == 2 && l.iter().all(|x| valid_name(x)) && l[0] != l[1] => {
            Some((l[0].clone(), l[1].clone()))
        }
        Some((_, line)) => {
            g.error(Some(line), "langs", "expected two distinct language codes, e.g. en,gu");
            None
        }
        None => None,
    };
    let report = match g.get("report") {
        Some(e) => resolve(base, &e.value),
        None => work_dir.join("manifest.json"),
    };
    errors.extend(g.finish().into_iter().map(|mut e| {
        if e.line == Some(0) {
            e.line = None;
        }
        e
    }));

    // None marks an output whose kind is unknown because its stage has errors
    let mut known: HashMap<String, Option<ArtifactKind>> = HashMap::new();
    let mut sources = Vec::new();
    let mut stage_sections = Vec::new();
    for section in &config.sections {
        if section.header != "source" {
            stage_sections.push(section);
            continue;
        }
        let mut f = Fields::new(&section.entries, "source".into(), section.line);
        let name = f.required("name").map(|e| e.value.clone());
        if let Some(n) = &name {
            f.context = format!("source {n}");
        }
        let path = f.required("path").map(|e| resolve(base, &e.value));
        let kind = match f.get("kind").map(|e| (e.value.as_str(), e.line)) {
            None | Some(("parallel", _)) => Some(ShardKind::Parallel),
            Some(("mono", _)) => Some(ShardKind::Mono),
            Some((other, line)) => {
                f.error(Some(line), "kind", format!("unknown kind {other:?}, expected parallel or mono"));
                None
            }
        };
        if kind == Some(ShardKind::Parallel) && langs.is_none() {
            f.error(None, "kind", "parallel sources need a global langs = src,tgt");
        }
        if let (Some(name), Some(path), Some(kind)) = (name, path, kind) {
            if !valid_name(&name) {
                f.error(None, "name", format!("{name:?} is not a valid shard name"));
            } else if known.insert(name.clone(), Some(ArtifactKind::Shard(kind))).is_some() {
                f.error(None, "name", format!("shard {name} declared twice"));
            } else {
                sources.push(SourcePlan { name, path, kind });
            }
        }
        errors.extend(f.finish());
    }

    // every output name, so a premature reference can be reported as such
    let mut producers: HashMap<String, usize> = HashMap::new();
    for (index, section) in stage_sections.iter().enumerate() {
        if let Some(e) = section.entries.iter().find(|e| e.key == "output") {
            producers.entry(e.value.clone()).or_insert(index);
        }
    }

    let mut stages = Vec::new();
    for (index, section) in stage_sections.iter().enumerate() {
        let Some(&name) = STAGE_NAMES.iter().find(|n| **n == section.header) else {
            errors.push(ConfigError {
                line: Some(section.line),
                context: format!("stage {index}"),
                field: None,
                message: format!("unknown stage {:?}", section.header),
            });
            continue;
        };
        let mut f = Fields::new(&section.entries, format!("stage {index} ({name})"), section.line);
        let stage_seed = f
            .parse::<u64>("seed")
            .unwrap_or_else(|| seed.wrapping_add(index as u64));

        let multi = matches!(name, "concat" | "avg-len-gate" | "blend" | "bpe-learn");
        let inputs: Vec<(String, usize)> = if multi {
            match f.list("inputs") {
                Some((l, line)) if !l.is_empty() => l.into_iter().map(|n| (n, line)).collect(),
                _ => {
                    f.error(None, "inputs", "missing");
                    Vec::new()
                }
            }
        } else {
            f.required("input").map(|e| vec![(e.value.clone(), e.line)]).unwrap_or_default()
        };
        let mut input_kinds = Vec::new();
        let mut unresolved = false;
        for (n, line) in &inputs {
            match known.get(n) {
                Some(Some(ArtifactKind::Shard(k))) => input_kinds.push(*k),
                Some(None) => unresolved = true,
                Some(Some(ArtifactKind::Model)) => {
                    f.error(Some(*line), "input", format!("{n} is a BPE model, not a shard"))
                }
                None => match producers.get(n) {
                    Some(&p) => f.error(
                        Some(*line),
                        "input",
                        format!("forward or cyclic reference: {n} is produced by stage {p}"),
                    ),
                    None => f.error(Some(*line), "input", format!("unknown shard {n}")),
                },
            }
        }
        let kind = if !unresolved && input_kinds.len() == inputs.len() && !inputs.is_empty() {
            let k = input_kinds[0];
            if input_kinds.iter().any(|&x| x != k) {
                f.error(None, "inputs", "inputs mix parallel and mono shards");
                None
            } else {
                Some(k)
            }
        } else {
            None
        };

        let output = if name == "stats" {
            None
        } else {
            match f.required("output") {
                Some(e) if !valid_name(&e.value) => {
                    f.error(Some(e.line), "output", format!("{:?} is not a valid name", e.value));
                    None
                }
                Some(e) if known.contains_key(&e.value) || producers.get(&e.value) != Some(&index) => {
                    f.error(Some(e.line), "output", format!("{} is already defined", e.value));
                    None
                }
                Some(e) => Some(e.value.clone()),
                None => None,
            }
        };

        let side = |f: &mut Fields, default: Option<SideSel>| -> Option<SideSel> {
            let s = match f.parse::<SideSel>("side") {
                Some(s) => Some(s),
                None if f.get("side").is_some() => return None,
                None => default,
            };
            match (kind, s) {
                (Some(ShardKind::Mono), Some(SideSel::Tgt)) => {
                    f.error(None, "side", "mono shards have no tgt side");
                    None
                }
                (Some(ShardKind::Mono), _) => Some(SideSel::Src),
                (_, None) => {
                    f.error(None, "side", "missing (src, tgt or both)");
                    None
                }
                (_, s) => s,
            }
        };

        let op: Option<StageOp> = match name {
            "clean" => {
                let mut rules: Vec<CleanRule> = Vec::new();
                for e in f.all("rule") {
                    match parse_rule(&e.value) {
                        Ok(r) => rules.push(r),
                        Err(m) => f.error(Some(e.line), "rule", m),
                    }
                }
                if let Some(e) = f.get("rules_file") {
                    let path = resolve(base, &e.value);
                    match std::fs::read_to_string(&path) {
                        Ok(text) => match crate::clean::parse_rules(&text) {
                            Ok(r) => rules.extend(r),
                            Err(err) => f.error(Some(e.line), "rules_file", err.to_string()),
                        },
                        Err(err) => f.error(Some(e.line), "rules_file", format!("{}: {err}", path.display())),
                    }
                }
                if rules.is_empty() {
                    f.error(None, "rule", "clean stage needs at least one rule");
                }
                disambiguate_ids(&mut rules);
                if let Some(k) = kind {
                    for err in validate_rules(&rules, k) {
                        f.error(None, "rule", err.to_string());
                    }
                }
                Some(StageOp::Clean { rules })
            }
            "concat" => Some(StageOp::Concat),
            "avg-len-gate" => f
                .parse_required::<f64>("min_avg")
                .filter(|v| {
                    let ok = v.is_finite() && *v >= 0.0;
                    if !ok {
                        f.error(None, "min_avg", "must be a non-negative number");
                    }
                    ok
                })
                .map(|min_avg| StageOp::AvgLenGate { min_avg }),
            "translit" => {
                let s = side(&mut f, None);
                let table = f.get("table").map(|e| resolve(base, &e.value));
                s.map(|side| StageOp::Translit { side, table })
            }
            "zh-seg" => {
                let mode = f.parse_required::<ZhMode>("mode");
                let split_punct = f.parse::<bool>("split_punct").unwrap_or(false);
                let s = side(&mut f, None);
                match (mode, s) {
                    (Some(mode), Some(side)) => Some(StageOp::ZhSeg {
                        side,
                        segmenter: ZhSegmenter::new(mode, split_punct),
                    }),
                    _ => None,
                }
            }
            "bpe-learn" => {
                let num_merges = f.parse_required::<usize>("num_merges");
                let sample = f.parse::<usize>("sample");
                if sample == Some(0) {
                    f.error(None, "sample", "must be at least 1");
                }
                let s = side(&mut f, Some(SideSel::Both));
                match (num_merges, s) {
                    (Some(num_merges), Some(side)) => Some(StageOp::BpeLearn { num_merges, side, sample }),
                    _ => None,
                }
            }
            "bpe-apply" => {
                let model = f.required("model").map(|e| (e.value.clone(), e.line));
                if let Some((m, line)) = &model {
                    match known.get(m) {
                        Some(Some(ArtifactKind::Model)) | Some(None) => {}
                        Some(Some(_)) => f.error(Some(*line), "model", format!("{m} is a shard, not a BPE model")),
                        None => f.error(Some(*line), "model", format!("unknown or later model {m}")),
                    }
                }
                let vocab_min_count = f.parse::<u64>("vocab_min_count");
                let s = side(&mut f, Some(SideSel::Both));
                match (model, s) {
                    (Some((model, _)), Some(side)) => Some(StageOp::BpeApply { model, side, vocab_min_count }),
                    _ => None,
                }
            }
            "sample" => f.parse_required::<usize>("n").map(|n| StageOp::Sample { n }),
            "blend" => {
                let weights: Option<Vec<f64>> = f.list("weights").and_then(|(w, line)| {
                    let parsed: Result<Vec<f64>, _> = w.iter().map(|x| x.parse::<f64>()).collect();
                    match parsed {
                        Ok(p) => Some(p),
                        Err(_) => {
                            f.error(Some(line), "weights", "weights must be numbers");
                            None
                        }
                    }
                });
                if weights.is_none() && f.get("weights").is_none() {
                    f.error(None, "weights", "missing");
                }
                let epoch_size = f.parse_required::<usize>("epoch_size");
                let sampling = f.parse::<Sampling>("sampling").unwrap_or(Sampling::UpsampleCycle);
                match (weights, epoch_size) {
                    (Some(w), Some(epoch_size)) if w.len() == inputs.len() => {
                        let spec = BlendSpec {
                            components: inputs
                                .iter()
                                .zip(w)
                                .map(|((shard, _), weight)| BlendComponent { shard: shard.clone(), weight })
                                .collect(),
                            epoch_size,
                            sampling,
                            seed: stage_seed,
                        };
                        match spec.validate() {
                            Ok(()) => Some(StageOp::Blend { spec }),
                            Err(e) => {
                                f.error(None, "weights", e.to_string());
                                None
                            }
                        }
                    }
                    (Some(w), Some(_)) => {
                        f.error(None, "weights", format!("{} weights for {} inputs", w.len(), inputs.len()));
                        None
                    }
                    _ => None,
                }
            }
            "xent-filter" => {
                let mode = f.parse_required::<CutMode>("mode");
                let direction = f.parse::<Direction>("direction").unwrap_or(Direction::OneDirectional);
                let file = f.get("scores").map(|e| resolve(base, &e.value));
                let order = f.parse::<usize>("lm_order");
                let scores = match (file, order) {
                    (Some(_), Some(_)) => {
                        f.error(None, "scores", "give either scores or lm_order, not both");
                        None
                    }
                    (Some(p), None) => Some(ScoreSource::File(p)),
                    (None, Some(o)) if (1..=5).contains(&o) => {
                        if direction == Direction::Dual {
                            f.error(None, "direction", "the fallback model only gives forward scores");
                        }
                        side(&mut f, Some(SideSel::Tgt)).and_then(|s| {
                            if s == SideSel::Both {
                                f.error(None, "side", "the fallback model scores one side");
                                None
                            } else {
                                Some(ScoreSource::Lm { order: o, side: s })
                            }
                        })
                    }
                    (None, Some(o)) => {
                        f.error(None, "lm_order", format!("must be 1..=5, got {o}"));
                        None
                    }
                    (None, None) => {
                        f.error(None, "scores", "missing scores file or lm_order");
                        None
                    }
                };
                match (mode, scores) {
                    (Some(mode), Some(scores)) => Some(StageOp::XentFilter {
                        scores,
                        cut: FilterCut { mode, direction },
                    }),
                    _ => None,
                }
            }
            "stats" => Some(StageOp::Stats),
            _ => unreachable!("stage names are checked above"),
        };

        if let Some(out) = &output {
            let produced = match name {
                "bpe-learn" => Some(ArtifactKind::Model),
                _ => kind.map(ArtifactKind::Shard),
            };
            known.insert(out.clone(), produced);
        }
        let stage_errors = f.finish();
        let clean = stage_errors.is_empty();
        errors.extend(stage_errors);
        if let (true, Some(op)) = (clean, op) {
            stages.push(StagePlan {
                index,
                name,
                line: section.line,
                inputs: inputs.into_iter().map(|(n, _)| n).collect(),
                output,
                seed: stage_seed,
                op,
            });
        }
    }

    if errors.is_empty() {
        Ok(Plan {
            seed,
            work_dir,
            langs,
            report,
            sources,
            stages,
        })
    } else {
        errors.sort_by_key(|e| e.line.unwrap_or(0));
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(text: &str) -> Vec<ConfigError> {
        match PipelineConfig::parse(text, Path::new("/cfg")) {
            Ok(c) => validate(&c),
            Err(e) => e,
        }
    }

    const HEAD: &str = "seed = 1\nlangs = en,gu\n[source]\nname = p\npath = data/p\n";

    #[test]
    fn valid_config() {
        let text = format!(
            "{HEAD}[clean]\ninput = p\noutput = p2\nrule = max_len limit=80\nrule = max_len limit=50\n\
             [concat]\ninputs = p, p2\noutput = all\n[stats]\ninput = all\n"
        );
        let cfg = PipelineConfig::parse(&text, Path::new("/cfg")).unwrap();
        let plan = plan(&cfg).unwrap();
        assert_eq!(plan.stages.len(), 3);
        assert_eq!(plan.sources[0].path, Path::new("/cfg/data/p"));
        assert_eq!(plan.stages[1].seed, 2);
        assert_eq!(plan.report, Path::new("/cfg/work/manifest.json"));
        match &plan.stages[0].op {
            StageOp::Clean { rules } => assert_eq!(rules[1].id, "max_len.2"),
            _ => panic!(),
        }
    }

    #[test]
    fn empty_stage_list() {
        assert!(check("seed = 3\n").is_empty());
    }

    #[test]
    fn unknown_stage_is_named() {
        let errs = check(&format!("{HEAD}[frobnicate]\ninput = p\n"));
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("frobnicate"));
    }

    #[test]
    fn ratio_below_one() {
        let errs = check(&format!("{HEAD}[clean]\ninput = p\noutput = q\nrule = len_ratio max=0.9\n"));
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert_eq!(errs[0].field.as_deref(), Some("rule"));
    }

    #[test]
    fn cyclic_reference() {
        let errs = check(&format!(
            "{HEAD}[concat]\ninputs = p, b\noutput = a\n[concat]\ninputs = a\noutput = b\n"
        ));
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert!(errs[0].message.contains("cyclic"));
        assert!(check(&format!("{HEAD}[concat]\ninputs = a\noutput = a\n"))[0].message.contains("cyclic"));
    }

    #[test]
    fn misc_errors() {
        assert!(!check(&format!("{HEAD}[clean]\ninput = p\noutput = p\nrule = dedup\n")).is_empty());
        assert!(!check(&format!("{HEAD}[clean]\ninput = nope\noutput = q\nrule = dedup\n")).is_empty());
        assert!(!check(&format!("{HEAD}[clean]\ninput = p\noutput = q\nrule = dedup\ncolour = red\n")).is_empty());
        assert!(!check("[source]\nname = p\npath = x\n").is_empty());
        assert!(!check("seed = x\n").is_empty());
        assert!(!check("just text\n").is_empty());
        assert!(!check(&format!("{HEAD}[blend]\ninputs = p\nweights = 0.5\nepoch_size = 3\noutput = b\n")).is_empty());
        assert!(!check(&format!("{HEAD}[translit]\ninput = p\noutput = h\n")).is_empty());
        assert!(!check(&format!("{HEAD}[xent-filter]\ninput = p\noutput = h\nmode = percentile:0.05\nlm_order = 2\ndirection = dual\n")).is_empty());
        assert!(!check(&format!("{HEAD}[bpe-learn]\ninputs = p\nnum_merges = 10\noutput = m\n[bpe-apply]\ninput = m\nmodel = p\noutput = z\n")).is_empty());
    }

    #[test]
    fn model_flow() {
        let text = format!(
            "{HEAD}[bpe-learn]\ninputs = p\nnum_merges = 10\noutput = m\n\
             [bpe-apply]\ninput = p\nmodel = m\noutput = p.bpe\n"
        );
        assert!(check(&text).is_empty());
    }
}
