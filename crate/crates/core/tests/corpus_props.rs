use std::fs;

use mtforge::corpus::{
    compute_stats, concat_shards, load_shard, parallel_paths, token_count, write_shard, CorpusStats, Record, ShardKind,
};
use proptest::prelude::*;

fn line() -> impl Strategy<Value = String> {
    "[a-zčř我 \t]{0,12}"
}

fn lines() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(line(), 0..20)
}

fn as_file(lines: &[String], eol: &str) -> String {
    lines.iter().map(|l| format!("{l}{eol}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn load_then_write_is_byte_identical(src in lines(), tgt_seed in lines()) {
        let n = src.len();
        let tgt: Vec<String> = (0..n).map(|i| tgt_seed.get(i).cloned().unwrap_or_default()).collect();
        let dir = tempfile::tempdir().unwrap();
        let inp = parallel_paths(&dir.path().join("in"), "cs", "en");
        fs::write(&inp[0], as_file(&src, "\n")).unwrap();
        fs::write(&inp[1], as_file(&tgt, "\n")).unwrap();
        let shard = load_shard(&inp, ShardKind::Parallel).unwrap();
        prop_assert_eq!(shard.line_count, n as u64);
        let recs: Vec<Record> = shard.records().unwrap().collect::<Result<_, _>>().unwrap();
        let out = parallel_paths(&dir.path().join("out"), "cs", "en");
        write_shard("out", &out, ShardKind::Parallel, &recs).unwrap();
        for (a, b) in inp.iter().zip(&out) {
            prop_assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
    }

    #[test]
    fn crlf_is_read_as_lf(text in lines()) {
        let dir = tempfile::tempdir().unwrap();
        let crlf = dir.path().join("crlf");
        let lf = dir.path().join("lf");
        fs::write(&crlf, as_file(&text, "\r\n")).unwrap();
        fs::write(&lf, as_file(&text, "\n")).unwrap();
        let a: Vec<Record> = load_shard(&[crlf], ShardKind::Mono).unwrap().records().unwrap().collect::<Result<_, _>>().unwrap();
        let b: Vec<Record> = load_shard(&[lf], ShardKind::Mono).unwrap().records().unwrap().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn concat_stats_add_up(parts in prop::collection::vec(lines(), 1..4)) {
        let dir = tempfile::tempdir().unwrap();
        let shards: Vec<_> = parts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let path = dir.path().join(format!("m{i}"));
                fs::write(&path, as_file(p, "\n")).unwrap();
                load_shard(&[path], ShardKind::Mono).unwrap()
            })
            .collect();
        let joined = concat_shards("all", &shards, &[dir.path().join("all")]).unwrap();
        let total = compute_stats(&joined).unwrap();
        let mut n = 0;
        let mut toks = 0;
        for s in &shards {
            let st = compute_stats(s).unwrap();
            n += st.sentence_count;
            toks += st.token_count_src;
        }
        prop_assert_eq!(total.sentence_count, n);
        prop_assert_eq!(total.token_count_src, toks);
        let recount: u64 = parts.iter().flatten().map(|l| token_count(l) as u64).sum();
        prop_assert_eq!(total, CorpusStats::from_counts(n, recount, 0));
    }
}

#[test]
fn mismatched_line_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = parallel_paths(&dir.path().join("x"), "cs", "en");
    fs::write(&p[0], "a\nb\n").unwrap();
    fs::write(&p[1], "a\n").unwrap();
    assert!(load_shard(&p, ShardKind::Parallel).is_err());
}

#[test]
fn invalid_utf8_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad");
    fs::write(&p, b"ok\n\xff\xfe\n").unwrap();
    assert!(load_shard(&[p], ShardKind::Mono).is_err());
}
