use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Uniform sample of `n` sentences without replacement across all corpora,
/// returned in corpus order. Takes everything when `n` covers the total.
pub fn sample_for_training<S: AsRef<str>>(corpora: &[&[S]], n: usize, seed: u64) -> Vec<String> {
    let total: usize = corpora.iter().map(|c| c.len()).sum();
    let all = || {
        corpora
            .iter()
            .flat_map(|c| c.iter().map(|s| s.as_ref().to_string()))
    };
    if n >= total {
        return all().collect();
    }
    let picked = sample_indices(total, n, seed);
    let mut out = Vec::with_capacity(n);
    let mut next = picked.iter().peekable();
    for (i, s) in all().enumerate() {
        if next.peek() == Some(&&i) {
            out.push(s);
            next.next();
        }
    }
    out
}

/// Sorted indices of a uniform `n`-subset of `0..total`.
pub fn sample_indices(total: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, total, n.min(total)).into_vec();
    picked.sort_unstable();
    picked
}
