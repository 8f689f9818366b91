//! Plain-text corpus shards.
//!
//! A shard is either a single monolingual file or a pair of line-aligned
//! files (`<name>.<src>` / `<name>.<tgt>`). Files are UTF-8, one sentence
//! per line. On read, `\n` and `\r\n` terminators are stripped; on write,
//! every line is terminated with a single `\n`, which is the canonical form
//! a loaded shard round-trips to.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(
        "line count mismatch: {} has {src_lines} lines but {} has {tgt_lines}",
        src_path.display(),
        tgt_path.display()
    )]
    LineCountMismatch {
        src_path: PathBuf,
        src_lines: u64,
        tgt_path: PathBuf,
        tgt_lines: u64,
    },
    #[error("{}:{line}: invalid UTF-8", path.display())]
    InvalidUtf8 { path: PathBuf, line: u64 },
    #[error("cannot combine a {found} shard with {expected} shards")]
    KindMismatch { expected: ShardKind, found: ShardKind },
    #[error("a {kind} shard needs {expected} file(s), got {found}")]
    WrongFileCount {
        kind: ShardKind,
        expected: usize,
        found: usize,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShardKind {
    Parallel,
    Mono,
}

impl ShardKind {
    pub fn file_count(self) -> usize {
        match self {
            ShardKind::Parallel => 2,
            ShardKind::Mono => 1,
        }
    }
}

impl fmt::Display for ShardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShardKind::Parallel => f.write_str("parallel"),
            ShardKind::Mono => f.write_str("mono"),
        }
    }
}

/// Token separators. Tokens are maximal runs of anything else.
#[inline]
pub fn is_token_separator(c: char) -> bool {
    c == ' ' || c == '\t'
}

/// Whitespace-separated tokens of a sentence.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(is_token_separator).filter(|t| !t.is_empty())
}

pub fn token_count(text: &str) -> usize {
    // a token starts at every non-separator byte preceded by a separator or
    // the start of the text; u8 partial sums over 255-byte blocks vectorise
    let b = text.as_bytes();
    let sep = |x: u8| x == b' ' || x == b'\t';
    let Some(&first) = b.first() else { return 0 };
    let mut count = usize::from(!sep(first));
    for (prev, cur) in b[..b.len() - 1].chunks(255).zip(b[1..].chunks(255)) {
        let starts: u8 = prev.iter().zip(cur).map(|(&p, &c)| u8::from(sep(p) & !sep(c))).sum();
        count += usize::from(starts);
    }
    count
}

/// One line of a shard. For parallel shards `tgt` is always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// 0-based line number within the shard.
    pub id: u64,
    pub src: String,
    pub tgt: Option<String>,
}

impl Record {
    pub fn mono(id: u64, text: impl Into<String>) -> Self {
        Record {
            id,
            src: text.into(),
            tgt: None,
        }
    }

    pub fn pair(id: u64, src: impl Into<String>, tgt: impl Into<String>) -> Self {
        Record {
            id,
            src: src.into(),
            tgt: Some(tgt.into()),
        }
    }

    pub fn tgt_str(&self) -> Option<&str> {
        self.tgt.as_deref()
    }
}

/// A loaded shard handle. Loading verifies UTF-8 and line counts; the
/// contents are streamed again on every call to [`CorpusShard::records`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusShard {
    pub name: String,
    pub kind: ShardKind,
    pub paths: Vec<PathBuf>,
    pub line_count: u64,
}

/// `<prefix>.<src>` and `<prefix>.<tgt>`.
pub fn parallel_paths(prefix: &Path, src_lang: &str, tgt_lang: &str) -> Vec<PathBuf> {
    [src_lang, tgt_lang]
        .iter()
        .map(|lang| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(".");
            s.push(lang);
            PathBuf::from(s)
        })
        .collect()
}

fn shard_name_from(path: &Path, kind: ShardKind) -> String {
    let name = match kind {
        ShardKind::Parallel => path.file_stem(),
        ShardKind::Mono => path.file_name(),
    };
    name.map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_shard(paths: &[PathBuf], kind: ShardKind) -> Result<CorpusShard, CorpusError> {
    let name = paths
        .first()
        .map(|p| shard_name_from(p, kind))
        .unwrap_or_default();
    load_shard_named(name, paths, kind)
}

pub fn load_shard_named(
    name: impl Into<String>,
    paths: &[PathBuf],
    kind: ShardKind,
) -> Result<CorpusShard, CorpusError> {
    if paths.len() != kind.file_count() {
        return Err(CorpusError::WrongFileCount {
            kind,
            expected: kind.file_count(),
            found: paths.len(),
        });
    }
    let counts = paths
        .iter()
        .map(|p| verify_file(p))
        .collect::<Result<Vec<_>, _>>()?;
    if kind == ShardKind::Parallel && counts[0] != counts[1] {
        return Err(CorpusError::LineCountMismatch {
            src_path: paths[0].clone(),
            src_lines: counts[0],
            tgt_path: paths[1].clone(),
            tgt_lines: counts[1],
        });
    }
    Ok(CorpusShard {
        name: name.into(),
        kind,
        paths: paths.to_vec(),
        line_count: counts[0],
    })
}

/// Counts lines and checks every line decodes as UTF-8.
fn verify_file(path: &Path) -> Result<u64, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let mut buf = Vec::with_capacity(256);
    let mut lines = 0u64;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| CorpusError::io(path, e))?;
        if n == 0 {
            break;
        }
        lines += 1;
        if std::str::from_utf8(&buf).is_err() {
            return Err(CorpusError::InvalidUtf8 {
                path: path.to_path_buf(),
                line: lines,
            });
        }
    }
    Ok(lines)
}

struct LineReader {
    path: PathBuf,
    reader: BufReader<File>,
    buf: Vec<u8>,
    line: u64,
}

impl LineReader {
    fn open(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        Ok(LineReader {
            path: path.to_path_buf(),
            reader: BufReader::with_capacity(1 << 16, file),
            buf: Vec::with_capacity(256),
            line: 0,
        })
    }

    fn next_line(&mut self) -> Result<Option<String>, CorpusError> {
        self.buf.clear();
        let n = self
            .reader
            .read_until(b'\n', &mut self.buf)
            .map_err(|e| CorpusError::io(&self.path, e))?;
        if n == 0 {
            return Ok(None);
        }
        self.line += 1;
        if self.buf.last() == Some(&b'\n') {
            self.buf.pop();
            if self.buf.last() == Some(&b'\r') {
                self.buf.pop();
            }
        }
        let bytes = std::mem::take(&mut self.buf);
        match String::from_utf8(bytes) {
            Ok(s) => Ok(Some(s)),
            Err(_) => Err(CorpusError::InvalidUtf8 {
                path: self.path.clone(),
                line: self.line,
            }),
        }
    }
}

/// Streaming iterator over the records of a shard, in file order.
pub struct Records {
    src: LineReader,
    tgt: Option<LineReader>,
    next_id: u64,
    done: bool,
}

impl Iterator for Records {
    type Item = Result<Record, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let result = self.read_one();
        match &result {
            Ok(None) | Err(_) => self.done = true,
            Ok(Some(_)) => {}
        }
        result.transpose()
    }
}

impl Records {
    fn read_one(&mut self) -> Result<Option<Record>, CorpusError> {
        let src = self.src.next_line()?;
        let tgt = match &mut self.tgt {
            Some(reader) => Some(reader.next_line()?),
            None => None,
        };
        let id = self.next_id;
        match (src, tgt) {
            (None, None) | (None, Some(None)) => Ok(None),
            (Some(src), None) => {
                self.next_id += 1;
                Ok(Some(Record::mono(id, src)))
            }
            (Some(src), Some(Some(tgt))) => {
                self.next_id += 1;
                Ok(Some(Record::pair(id, src, tgt)))
            }
            (Some(_), Some(None)) | (None, Some(Some(_))) => {
                // the files changed since the shard was loaded
                let tgt = self.tgt.as_ref().expect("parallel reader");
                Err(CorpusError::LineCountMismatch {
                    src_path: self.src.path.clone(),
                    src_lines: self.src.line,
                    tgt_path: tgt.path.clone(),
                    tgt_lines: tgt.line,
                })
            }
        }
    }
}

impl CorpusShard {
    pub fn records(&self) -> Result<Records, CorpusError> {
        let src = LineReader::open(&self.paths[0])?;
        let tgt = match self.kind {
            ShardKind::Parallel => Some(LineReader::open(&self.paths[1])?),
            ShardKind::Mono => None,
        };
        Ok(Records {
            src,
            tgt,
            next_id: 0,
            done: false,
        })
    }

    pub fn read_all(&self) -> Result<Vec<Record>, CorpusError> {
        self.records()?.collect()
    }

    /// Source-side lines only (the whole file for mono shards).
    pub fn read_src_lines(&self) -> Result<Vec<String>, CorpusError> {
        self.records()?.map(|r| r.map(|r| r.src)).collect()
    }
}

/// Exclusive writer for a shard's file(s).
pub struct ShardWriter {
    kind: ShardKind,
    paths: Vec<PathBuf>,
    outs: Vec<BufWriter<File>>,
    lines: u64,
}

impl ShardWriter {
    pub fn create(paths: &[PathBuf], kind: ShardKind) -> Result<Self, CorpusError> {
        if paths.len() != kind.file_count() {
            return Err(CorpusError::WrongFileCount {
                kind,
                expected: kind.file_count(),
                found: paths.len(),
            });
        }
        let mut outs = Vec::with_capacity(paths.len());
        for path in paths {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
            }
            let f = File::create(path).map_err(|e| CorpusError::io(path, e))?;
            outs.push(BufWriter::with_capacity(1 << 16, f));
        }
        Ok(ShardWriter {
            kind,
            paths: paths.to_vec(),
            outs,
            lines: 0,
        })
    }

    pub fn kind(&self) -> ShardKind {
        self.kind
    }

    pub fn write(&mut self, record: &Record) -> Result<(), CorpusError> {
        self.write_sides(&record.src, record.tgt_str())
    }

    pub fn write_sides(&mut self, src: &str, tgt: Option<&str>) -> Result<(), CorpusError> {
        write_line(&mut self.outs[0], &self.paths[0], src)?;
        if self.kind == ShardKind::Parallel {
            let tgt = tgt.unwrap_or_default();
            write_line(&mut self.outs[1], &self.paths[1], tgt)?;
        }
        self.lines += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64, CorpusError> {
        for (out, path) in self.outs.iter_mut().zip(&self.paths) {
            out.flush().map_err(|e| CorpusError::io(path, e))?;
        }
        Ok(self.lines)
    }
}

fn write_line(out: &mut BufWriter<File>, path: &Path, line: &str) -> Result<(), CorpusError> {
    out.write_all(line.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| CorpusError::io(path, e))
}

/// Writes a whole in-memory shard and returns the loaded handle.
pub fn write_shard<'a, I>(
    name: impl Into<String>,
    paths: &[PathBuf],
    kind: ShardKind,
    records: I,
) -> Result<CorpusShard, CorpusError>
where
    I: IntoIterator<Item = &'a Record>,
{
    let mut writer = ShardWriter::create(paths, kind)?;
    for r in records {
        writer.write(r)?;
    }
    let line_count = writer.finish()?;
    Ok(CorpusShard {
        name: name.into(),
        kind,
        paths: paths.to_vec(),
        line_count,
    })
}

/// Reads all lines of a plain UTF-8 text file.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let mut reader = LineReader::open(path)?;
    let mut out = Vec::new();
    while let Some(line) = reader.next_line()? {
        out.push(line);
    }
    Ok(out)
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<(), CorpusError> {
    let mut writer = ShardWriter::create(&[path.to_path_buf()], ShardKind::Mono)?;
    for l in lines {
        writer.write_sides(l.as_ref(), None)?;
    }
    writer.finish().map(|_| ())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub sentence_count: u64,
    pub token_count_src: u64,
    pub token_count_tgt: u64,
    pub avg_len_src: f64,
    pub avg_len_tgt: f64,
}

impl CorpusStats {
    pub fn from_counts(sentence_count: u64, token_count_src: u64, token_count_tgt: u64) -> Self {
        let avg = |tokens: u64| {
            if sentence_count == 0 {
                0.0
            } else {
                tokens as f64 / sentence_count as f64
            }
        };
        CorpusStats {
            sentence_count,
            token_count_src,
            token_count_tgt,
            avg_len_src: avg(token_count_src),
            avg_len_tgt: avg(token_count_tgt),
        }
    }

    pub fn from_records<'a, I: IntoIterator<Item = &'a Record>>(records: I) -> Self {
        let (mut n, mut s, mut t) = (0u64, 0u64, 0u64);
        for r in records {
            n += 1;
            s += token_count(&r.src) as u64;
            t += r.tgt_str().map_or(0, token_count) as u64;
        }
        Self::from_counts(n, s, t)
    }
}

pub fn compute_stats(shard: &CorpusShard) -> Result<CorpusStats, CorpusError> {
    let (mut n, mut s, mut t) = (0u64, 0u64, 0u64);
    for r in shard.records()? {
        let r = r?;
        n += 1;
        s += token_count(&r.src) as u64;
        t += r.tgt_str().map_or(0, token_count) as u64;
    }
    Ok(CorpusStats::from_counts(n, s, t))
}

/// Concatenates shards in order into `output`.
pub fn concat_shards(
    name: impl Into<String>,
    shards: &[CorpusShard],
    output: &[PathBuf],
) -> Result<CorpusShard, CorpusError> {
    let kind = shards.first().map_or(ShardKind::Parallel, |s| s.kind);
    if output.len() != kind.file_count() {
        return Err(CorpusError::WrongFileCount {
            kind,
            expected: kind.file_count(),
            found: output.len(),
        });
    }
    if let Some(bad) = shards.iter().find(|s| s.kind != kind) {
        return Err(CorpusError::KindMismatch {
            expected: kind,
            found: bad.kind,
        });
    }
    let mut writer = ShardWriter::create(output, kind)?;
    for shard in shards {
        for r in shard.records()? {
            writer.write(&r?)?;
        }
    }
    let line_count = writer.finish()?;
    Ok(CorpusShard {
        name: name.into(),
        kind,
        paths: output.to_vec(),
        line_count,
    })
}

/// Which side(s) of a parallel shard a transform touches. Mono shards only
/// have a source side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideSel {
    Src,
    Tgt,
    Both,
}

impl SideSel {
    pub fn src(self) -> bool {
        self != SideSel::Tgt
    }

    pub fn tgt(self) -> bool {
        self != SideSel::Src
    }
}

impl std::str::FromStr for SideSel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "src" => Ok(SideSel::Src),
            "tgt" => Ok(SideSel::Tgt),
            "both" => Ok(SideSel::Both),
            other => Err(format!("unknown side {other:?}, expected src, tgt or both")),
        }
    }
}

const MAP_CHUNK: usize = 1 << 14;

/// Rewrites the selected sides of every record with `f` into `out`. Chunks
/// are transformed in parallel and written in input order.
pub fn map_shard<F>(
    shard: &CorpusShard,
    name: impl Into<String>,
    out: &[PathBuf],
    side: SideSel,
    f: F,
) -> Result<CorpusShard, CorpusError>
where
    F: Fn(&str) -> String + Sync,
{
    let mono = shard.kind == ShardKind::Mono;
    let mut writer = ShardWriter::create(out, shard.kind)?;
    let mut records = shard.records()?;
    loop {
        let chunk: Vec<Record> = records.by_ref().take(MAP_CHUNK).collect::<Result<_, _>>()?;
        if chunk.is_empty() {
            break;
        }
        let mapped: Vec<Record> = chunk
            .into_par_iter()
            .map(|mut r| {
                if side.src() || mono {
                    r.src = f(&r.src);
                }
                if side.tgt() {
                    if let Some(t) = r.tgt.as_mut() {
                        *t = f(t);
                    }
                }
                r
            })
            .collect();
        for r in &mapped {
            writer.write(r)?;
        }
    }
    let line_count = writer.finish()?;
    Ok(CorpusShard {
        name: name.into(),
        kind: shard.kind,
        paths: out.to_vec(),
        line_count,
    })
}

/// Copies the records whose id passes `keep`, in order.
pub fn filter_shard(
    shard: &CorpusShard,
    name: impl Into<String>,
    out: &[PathBuf],
    keep: impl Fn(u64) -> bool,
) -> Result<CorpusShard, CorpusError> {
    let mut writer = ShardWriter::create(out, shard.kind)?;
    for r in shard.records()? {
        let r = r?;
        if keep(r.id) {
            writer.write(&r)?;
        }
    }
    let line_count = writer.finish()?;
    Ok(CorpusShard {
        name: name.into(),
        kind: shard.kind,
        paths: out.to_vec(),
        line_count,
    })
}

/// Selected sides of a shard as line vectors; `None` for sides not asked
/// for or absent.
pub fn read_sides(
    shard: &CorpusShard,
    side: SideSel,
) -> Result<(Option<Vec<String>>, Option<Vec<String>>), CorpusError> {
    let want_tgt = side.tgt() && shard.kind == ShardKind::Parallel;
    let want_src = side.src() || shard.kind == ShardKind::Mono;
    let mut src = want_src.then(Vec::new);
    let mut tgt = want_tgt.then(Vec::new);
    for r in shard.records()? {
        let r = r?;
        if let (Some(t), Some(line)) = (tgt.as_mut(), r.tgt) {
            t.push(line);
        }
        if let Some(s) = src.as_mut() {
            s.push(r.src);
        }
    }
    Ok((src, tgt))
}

/// Reads a whole file into memory.
pub fn file_bytes(path: &Path) -> Result<Vec<u8>, CorpusError> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| CorpusError::io(path, e))?;
    Ok(buf)
}
