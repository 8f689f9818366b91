//! Cleaning + stats throughput on a synthetic parallel corpus.
//!
//! ```text
//! cargo run --release -p mtforge --example throughput -- [pairs] [threads]
//! ```
//! Defaults: 1,000,000 pairs, rayon's default thread count. Generation time
//! is excluded from the measurement.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use mtforge::clean::{parse_rules, run_pipeline_shard};
use mtforge::corpus::{compute_stats, load_shard, parallel_paths, ShardKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RULES: &str = "\
max_len limit=80
len_bounds min=3 max=200
len_ratio max=1.3
alpha_ratio min=0.5
contains_link
repeat_noise
dedup
";

fn generate(paths: &[std::path::PathBuf], pairs: usize) -> std::io::Result<()> {
    let en = ["the", "a", "house", "river", "is", "green", "we", "walk", "to", "market", "today"];
    let cs = ["dům", "řeka", "je", "zelená", "jdeme", "na", "trh", "dnes", "pomalu", "velký"];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut src = BufWriter::new(File::create(&paths[0])?);
    let mut tgt = BufWriter::new(File::create(&paths[1])?);
    for i in 0..pairs {
        let len = rng.gen_range(4..30);
        write!(src, "{i}")?;
        write!(tgt, "{i}")?;
        for _ in 0..len {
            write!(src, " {}", en.choose(&mut rng).unwrap())?;
            write!(tgt, " {}", cs.choose(&mut rng).unwrap())?;
        }
        writeln!(src)?;
        writeln!(tgt)?;
    }
    src.flush()?;
    tgt.flush()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let pairs: usize = args.next().map_or(Ok(1_000_000), |a| a.parse())?;
    if let Some(threads) = args.next() {
        rayon::ThreadPoolBuilder::new().num_threads(threads.parse()?).build_global()?;
    }
    let dir = tempfile::tempdir()?;
    let input = parallel_paths(&dir.path().join("synth"), "en", "cs");
    let output = parallel_paths(&dir.path().join("clean"), "en", "cs");
    generate(&input, pairs)?;
    let rules = parse_rules(RULES)?;

    let start = Instant::now();
    let shard = load_shard(&input, ShardKind::Parallel)?;
    let (cleaned, report) = run_pipeline_shard(&shard, &rules, "clean", &output, None)?;
    let clean_secs = start.elapsed().as_secs_f64();
    let stats = compute_stats(&cleaned)?;
    let total_secs = start.elapsed().as_secs_f64();

    println!("pairs            {pairs}");
    println!("threads          {}", rayon::current_num_threads());
    println!("kept             {} ({} rejected)", report.total_out, report.rejected_total());
    println!("avg len src/tgt  {:.2} / {:.2}", stats.avg_len_src, stats.avg_len_tgt);
    println!("clean            {clean_secs:.2} s  {:.0} pairs/s", pairs as f64 / clean_secs);
    println!("clean + stats    {total_secs:.2} s  {:.0} pairs/s", pairs as f64 / total_secs);
    Ok(())
}
