use std::collections::HashMap;
use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use mtforge::cjk::{ZhMode, ZhSegmenter};
use mtforge::clean::{parse_rule, parse_rules, run_pipeline_shard, validate_rules, CleanRule};
use mtforge::clean::rules::disambiguate_ids;
use mtforge::corpus::{
    compute_stats, filter_shard, load_shard, map_shard, parallel_paths, read_lines, read_sides, CorpusShard,
    Record, ShardKind, ShardWriter, SideSel,
};
use mtforge::pipeline::{self, PipelineConfig, PipelineError, RunOptions};
use mtforge::select::{
    build_blend, build_ngram_index, select_finetune_data, BlendSpec, CandidatePool, NRange, NgramIndex,
    SelectionConfig,
};
use mtforge::subword::{bpe_learn, sample_for_training, vocab_build_and_prune, BpeModel, Vocabulary};
use mtforge::translit::{build_table, overlap_stats, transliterate, TransliterationTable};
use mtforge::xent::{apply_cut, fallback_lm_score, ingest_scores, CutMode, Direction, FilterCut};

const INDEX_EXT: &str = "ngi";

#[derive(Parser)]
#[command(name = "mtforge", version, about = "Corpus engineering for MT training data")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MTFORGE_THREADS")]
    threads: Option<usize>,
    /// Only log errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Log debug detail.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

/// A shard on disk: `--in FILE` for mono text, or `--in PREFIX --langs
/// src,tgt` for the pair PREFIX.src / PREFIX.tgt.
#[derive(Args, Clone)]
struct ShardIn {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    langs: Option<Langs>,
}

/// `src,tgt` language codes.
#[derive(Clone)]
struct Langs(String, String);

impl std::str::FromStr for Langs {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(',') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() && a != b && !b.contains(',') => {
                Ok(Langs(a.to_string(), b.to_string()))
            }
            _ => Err(format!("expected two distinct codes like en,gu, got {s:?}")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Filter a shard through cleaning rules.
    Clean {
        #[command(flatten)]
        shard: ShardIn,
        #[arg(long)]
        out: PathBuf,
        /// Rules file, one rule per line.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Inline rule, e.g. "len_ratio max=1.3"; repeatable, applied after --rules.
        #[arg(long = "rule")]
        rule: Vec<String>,
        /// Write `id<TAB>rule` for every rejected record.
        #[arg(long)]
        reject_log: Option<PathBuf>,
        /// JSON report path (default: stdout).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Learn a BPE model from text files.
    BpeLearn {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        merges: usize,
        /// Pool all inputs into one frequency table; required with several --in files.
        #[arg(long)]
        joint: bool,
        #[arg(long, visible_alias = "out")]
        model: PathBuf,
        /// Train on a uniform sample of N sentences.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the vocabulary of the segmented training text.
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Segment text with a BPE model.
    BpeApply {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        shard: ShardIn,
        #[arg(long)]
        out: PathBuf,
        /// Vocabulary file; units rarer than --min-count are split further.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 1, requires = "vocab")]
        min_count: u64,
        /// Undo segmentation instead.
        #[arg(long, conflicts_with = "vocab")]
        desegment: bool,
        #[arg(long, default_value = "both")]
        side: SideSel,
    },
    /// Chinese character segmentation or desegmentation.
    ZhSeg {
        #[command(flatten)]
        shard: ShardIn,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: ZhMode,
        /// Also split around CJK punctuation in char mode.
        #[arg(long)]
        split_punct: bool,
        #[arg(long, default_value = "both")]
        side: SideSel,
    },
    /// Devanagari to Gujarati transliteration.
    Translit {
        /// Mapping table (default: built-in).
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        shard: ShardIn,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "both")]
        side: SideSel,
    },
    /// Token overlap between transliterated text and a reference.
    TranslitStats {
        #[arg(long)]
        hg: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Print JSON instead of a summary line.
        #[arg(long)]
        json: bool,
    },
    /// Build an n-gram index for a text file.
    Index {
        #[arg(long = "in")]
        input: PathBuf,
        /// Index file, or a directory to write `<shard>.ngi` into.
        #[arg(long)]
        out: PathBuf,
        /// Shard name (default: input file name).
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 2)]
        nmin: usize,
        #[arg(long, default_value_t = 4)]
        nmax: usize,
    },
    /// Select pool sentences containing rare test-set n-grams.
    Select {
        #[arg(long)]
        test: PathBuf,
        /// Directory of `.ngi` index files.
        #[arg(long)]
        indices: PathBuf,
        /// Candidate text files; each needs an index named after the file.
        #[arg(long = "pool", required = true, num_args = 1..)]
        pools: Vec<PathBuf>,
        #[arg(long, default_value_t = 50)]
        threshold: u64,
        #[arg(long, default_value_t = 2)]
        nmin: usize,
        #[arg(long, default_value_t = 4)]
        nmax: usize,
        #[arg(long)]
        budget: Option<usize>,
        /// Apply the budget to each pool separately.
        #[arg(long)]
        per_shard: bool,
        /// Output TSV `shard<TAB>id<TAB>score<TAB>sentence` (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble a training blend from weighted shards.
    Blend {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Components are PREFIX.src/PREFIX.tgt pairs.
        #[arg(long)]
        langs: Option<Langs>,
    },
    /// Cut a shard by cross-entropy scores.
    XentFilter {
        #[command(flatten)]
        shard: ShardIn,
        #[arg(long)]
        out: PathBuf,
        /// Score TSV `pair_id<TAB>h_fwd[<TAB>h_bwd]`.
        #[arg(long, conflicts_with = "lm_order")]
        scores: Option<PathBuf>,
        /// Score with a smoothed n-gram model of this order instead.
        #[arg(long)]
        lm_order: Option<usize>,
        /// Side scored by the n-gram model.
        #[arg(long, default_value = "tgt")]
        side: SideSel,
        /// `percentile:P` or `absolute:T`.
        #[arg(long)]
        mode: CutMode,
        #[arg(long, default_value = "one_directional")]
        direction: Direction,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sentence and token counts.
    Stats {
        #[command(flatten)]
        shard: ShardIn,
    },
    /// Run a pipeline config.
    Run {
        config: PathBuf,
    },
    /// Check a pipeline config without reading any corpus data.
    Validate {
        config: PathBuf,
    },
}

enum CliError {
    /// Bad arguments, config or rules: exit 2.
    Config(String),
    /// Unreadable or inconsistent data: exit 1.
    Data(String),
}

fn data<E: Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn config<E: Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();

    let threads = cli.threads.filter(|&n| n > 0);
    if let Command::Run { .. } = cli.command {
        // the pipeline installs its own pool
    } else if let Some(n) = threads {
        if let Err(e) = rayon_global(n) {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    }

    match dispatch(cli.command, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Data(m)) => {
            log::error!("{m}");
            ExitCode::from(1)
        }
        Err(CliError::Config(m)) => {
            log::error!("{m}");
            ExitCode::from(2)
        }
    }
}

fn rayon_global(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn shard_paths(path: &Path, langs: &Option<Langs>) -> (Vec<PathBuf>, ShardKind) {
    match langs {
        Some(Langs(s, t)) => (parallel_paths(path, s, t), ShardKind::Parallel),
        None => (vec![path.to_path_buf()], ShardKind::Mono),
    }
}

fn open_shard(s: &ShardIn) -> CliResult<CorpusShard> {
    let (paths, kind) = shard_paths(&s.input, &s.langs);
    load_shard(&paths, kind).map_err(data)
}

fn out_paths(out: &Path, s: &ShardIn) -> Vec<PathBuf> {
    shard_paths(out, &s.langs).0
}

fn emit_json(value: &Value, path: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(value).expect("json value serialises") + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(command: Command, threads: Option<usize>) -> CliResult {
    match command {
        Command::Clean {
            shard,
            out,
            rules,
            rule,
            reject_log,
            report,
        } => {
            let mut list: Vec<CleanRule> = match &rules {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| config(format!("{}: {e}", p.display())))?;
                    parse_rules(&text).map_err(config)?
                }
                None => Vec::new(),
            };
            for r in &rule {
                list.push(parse_rule(r).map_err(|m| config(format!("rule {r:?}: {m}")))?);
            }
            if list.is_empty() {
                return Err(config("no rules given (use --rules or --rule)"));
            }
            disambiguate_ids(&mut list);
            let kind = if shard.langs.is_some() { ShardKind::Parallel } else { ShardKind::Mono };
            let errors = validate_rules(&list, kind);
            if !errors.is_empty() {
                let msg: Vec<String> = errors.iter().map(ToString::to_string).collect();
                return Err(config(msg.join("\n")));
            }
            let input = open_shard(&shard)?;
            let mut log_file = match &reject_log {
                Some(p) => Some(BufWriter::new(
                    File::create(p).map_err(|e| data(format!("{}: {e}", p.display())))?,
                )),
                None => None,
            };
            let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let (_, rep) = run_pipeline_shard(
                &input,
                &list,
                name,
                &out_paths(&out, &shard),
                log_file.as_mut().map(|w| w as &mut dyn Write),
            )
            .map_err(data)?;
            if let Some(mut w) = log_file {
                w.flush().map_err(data)?;
            }
            log::info!("kept {} of {} records", rep.total_out, rep.total_in);
            emit_json(&json!(rep), report.as_deref())
        }

        Command::BpeLearn {
            inputs,
            merges,
            joint,
            model: out,
            sample,
            seed,
            vocab_out,
        } => {
            if inputs.len() > 1 && !joint {
                return Err(CliError::Config(
                    "several --in files give one model only with --joint".into(),
                ));
            }
            let corpora: Vec<Vec<String>> = inputs.iter().map(|p| read_lines(p)).collect::<Result<_, _>>().map_err(data)?;
            let refs: Vec<&[String]> = corpora.iter().map(Vec::as_slice).collect();
            let training = match sample {
                Some(n) => sample_for_training(&refs, n, seed),
                None => corpora.concat(),
            };
            let model = bpe_learn(&[&training[..]], merges, true)
                .map_err(data)?
                .pop()
                .expect("joint learning yields one model");
            model.save(&out).map_err(data)?;
            log::info!("learned {} of {} merges from {} sentences", model.merges().len(), merges, training.len());
            if let Some(v) = vocab_out {
                let segmented: Vec<String> = training.iter().map(|s| model.apply(s, None)).collect();
                vocab_build_and_prune(&segmented, 1).save(&v).map_err(data)?;
            }
            Ok(())
        }

        Command::BpeApply {
            model,
            shard,
            out,
            vocab,
            min_count,
            desegment,
            side,
        } => {
            let model = BpeModel::load(&model).map_err(config)?;
            let vocab: Option<Vocabulary> = vocab
                .map(|p| Vocabulary::load(&p, min_count))
                .transpose()
                .map_err(config)?;
            let input = open_shard(&shard)?;
            let paths = out_paths(&out, &shard);
            if desegment {
                map_shard(&input, "", &paths, side, |s| model.desegment(s)).map_err(data)?;
            } else {
                map_shard(&input, "", &paths, side, |s| model.apply(s, vocab.as_ref())).map_err(data)?;
            }
            Ok(())
        }

        Command::ZhSeg {
            shard,
            out,
            mode,
            split_punct,
            side,
        } => {
            let seg = ZhSegmenter::new(mode, split_punct);
            let input = open_shard(&shard)?;
            map_shard(&input, "", &out_paths(&out, &shard), side, |s| seg.apply(s)).map_err(data)?;
            Ok(())
        }

        Command::Translit {
            table,
            shard,
            out,
            side,
        } => {
            let table = match table {
                Some(p) => TransliterationTable::load(&p).map_err(config)?,
                None => build_table(),
            };
            let input = open_shard(&shard)?;
            map_shard(&input, "", &out_paths(&out, &shard), side, |s| transliterate(s, &table)).map_err(data)?;
            Ok(())
        }

        Command::TranslitStats { hg, reference, json } => {
            let hg = read_lines(&hg).map_err(data)?;
            let reference = read_lines(&reference).map_err(data)?;
            let stats = overlap_stats(&hg, &reference).map_err(data)?;
            if json {
                emit_json(&json!(stats), None)
            } else {
                println!(
                    "{} of {} tokens match ({:.2}%), excluded {} punctuation and {} Latin",
                    stats.exact_matches,
                    stats.total_tokens,
                    100.0 * stats.match_fraction,
                    stats.excluded_punctuation,
                    stats.excluded_latin
                );
                Ok(())
            }
        }

        Command::Index {
            input,
            out,
            name,
            nmin,
            nmax,
        } => {
            let range = NRange::new(nmin, nmax).map_err(config)?;
            let name = name.unwrap_or_else(|| file_name(&input));
            if name.chars().any(char::is_whitespace) || name.is_empty() {
                return Err(config(format!("shard name {name:?} must be non-empty without whitespace")));
            }
            let lines = read_lines(&input).map_err(data)?;
            let index = build_ngram_index(name.clone(), &lines, range);
            let path = if out.is_dir() { out.join(format!("{name}.{INDEX_EXT}")) } else { out };
            index.save(&path).map_err(data)?;
            log::info!("{}: {} distinct n-grams", path.display(), index.len());
            Ok(())
        }

        Command::Select {
            test,
            indices,
            pools,
            threshold,
            nmin,
            nmax,
            budget,
            per_shard,
            out,
        } => {
            let cfg = SelectionConfig {
                rare_threshold: threshold,
                n_range: NRange::new(nmin, nmax).map_err(config)?,
                per_shard,
                budget: budget.unwrap_or(usize::MAX),
            };
            cfg.validate().map_err(config)?;
            let test = read_lines(&test).map_err(data)?;
            let index_map = load_indices(&indices)?;
            let names: Vec<String> = pools.iter().map(|p| file_name(p)).collect();
            let texts: Vec<Vec<String>> = pools.iter().map(|p| read_lines(p)).collect::<Result<_, _>>().map_err(data)?;
            let candidates: Vec<CandidatePool<'_, String>> = names
                .iter()
                .zip(&texts)
                .map(|(name, sentences)| CandidatePool { name, sentences })
                .collect();
            let selected = select_finetune_data(&test, &candidates, &index_map, &cfg).map_err(data)?;
            let by_name: HashMap<&str, &Vec<String>> = names.iter().map(String::as_str).zip(&texts).collect();
            let mut w: Box<dyn Write> = match &out {
                Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| data(format!("{}: {e}", p.display())))?)),
                None => Box::new(BufWriter::new(std::io::stdout().lock())),
            };
            for s in &selected {
                let sentence = &by_name[s.shard.as_str()][s.id as usize];
                writeln!(w, "{}\t{}\t{}\t{}", s.shard, s.id, s.score, sentence).map_err(data)?;
            }
            w.flush().map_err(data)?;
            log::info!("selected {} sentences", selected.len());
            Ok(())
        }

        Command::Blend { spec, out, langs } => {
            let spec = BlendSpec::load(&spec).map_err(config)?;
            let mut pools: Vec<Vec<Record>> = Vec::new();
            let mut kind = ShardKind::Mono;
            for c in &spec.components {
                let (paths, k) = shard_paths(Path::new(&c.shard), &langs);
                kind = k;
                pools.push(load_shard(&paths, k).and_then(|s| s.read_all()).map_err(data)?);
            }
            let sizes: Vec<usize> = pools.iter().map(Vec::len).collect();
            let items = build_blend(&spec, &sizes).map_err(data)?;
            let mut writer = ShardWriter::create(&shard_paths(&out, &langs).0, kind).map_err(data)?;
            for it in &items {
                writer.write(&pools[it.component][it.index]).map_err(data)?;
            }
            writer.finish().map_err(data)?;
            emit_json(&json!({ "component_counts": spec.component_counts().map_err(config)? }), None)
        }

        Command::XentFilter {
            shard,
            out,
            scores,
            lm_order,
            side,
            mode,
            direction,
            report,
        } => {
            let input = open_shard(&shard)?;
            let records = match (scores, lm_order) {
                (Some(p), None) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| data(format!("{}: {e}", p.display())))?;
                    ingest_scores(&text, input.line_count).map_err(data)?
                }
                (None, Some(order)) => {
                    if direction == Direction::Dual {
                        return Err(config("the n-gram fallback gives forward scores only; use --direction one_directional"));
                    }
                    if side == SideSel::Both {
                        return Err(config("--side must be src or tgt for n-gram scoring"));
                    }
                    let (src, tgt) = read_sides(&input, side).map_err(data)?;
                    fallback_lm_score(&src.or(tgt).unwrap_or_default(), order).map_err(data)?
                }
                _ => return Err(config("give --scores or --lm-order")),
            };
            let cut = FilterCut { mode, direction };
            let result = apply_cut(&records, &cut).map_err(data)?;
            let rejected: std::collections::HashSet<u64> = result.rejected.iter().copied().collect();
            filter_shard(&input, "", &out_paths(&out, &shard), |id| !rejected.contains(&id)).map_err(data)?;
            emit_json(
                &json!({ "cut": cut, "kept": result.kept.len(), "rejected": result.rejected }),
                report.as_deref(),
            )
        }

        Command::Stats { shard } => {
            let input = open_shard(&shard)?;
            emit_json(&json!(compute_stats(&input).map_err(data)?), None)
        }

        Command::Run { config: path } => {
            let cfg = PipelineConfig::load(&path).map_err(config_errors)?;
            match pipeline::run(&cfg, &RunOptions { threads }) {
                Ok(manifest) => {
                    let total: u64 = manifest.stages.iter().map(|s| s.wall_ms).sum();
                    log::info!("{} stages in {total} ms", manifest.stages.len());
                    Ok(())
                }
                Err(PipelineError::Config(errors)) => Err(config_errors(errors)),
                Err(e) => Err(data(e)),
            }
        }

        Command::Validate { config: path } => {
            let cfg = PipelineConfig::load(&path).map_err(config_errors)?;
            let errors = pipeline::validate(&cfg);
            if errors.is_empty() {
                println!("ok");
                Ok(())
            } else {
                for e in &errors {
                    println!("{e}");
                }
                Err(config(format!("{} error(s) in {}", errors.len(), path.display())))
            }
        }
    }
}

fn config_errors(errors: Vec<pipeline::ConfigError>) -> CliError {
    let lines: Vec<String> = errors.iter().map(ToString::to_string).collect();
    CliError::Config(lines.join("\n"))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_indices(dir: &Path) -> CliResult<HashMap<String, NgramIndex>> {
    let mut map = HashMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(data)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(INDEX_EXT) {
            continue;
        }
        let index = NgramIndex::load(&path).map_err(data)?;
        map.insert(index.shard_name.clone(), index);
    }
    Ok(map)
}
