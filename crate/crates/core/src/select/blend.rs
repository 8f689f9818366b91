use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SelectError;

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    WithReplacement,
    UpsampleCycle,
}

impl std::str::FromStr for Sampling {
    type Err = SelectError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "with_replacement" => Ok(Sampling::WithReplacement),
            "upsample_cycle" => Ok(Sampling::UpsampleCycle),
            other => Err(SelectError::Config(format!(
                "unknown sampling {other:?}, expected with_replacement or upsample_cycle"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlendComponent {
    pub shard: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlendSpec {
    pub components: Vec<BlendComponent>,
    pub epoch_size: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

/// One emitted item: which component and which record of that component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlendItem {
    pub component: usize,
    pub index: usize,
}

impl BlendSpec {
    pub fn validate(&self) -> Result<(), SelectError> {
        if self.components.is_empty() {
            return Err(SelectError::Config("blend has no components".into()));
        }
        let mut sum = 0.0;
        for c in &self.components {
            if !c.weight.is_finite() || c.weight < 0.0 {
                return Err(SelectError::Config(format!(
                    "weight {} for {} must be a non-negative number",
                    c.weight, c.shard
                )));
            }
            sum += c.weight;
        }
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(SelectError::Config(format!("blend weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn component_counts(&self) -> Result<Vec<usize>, SelectError> {
        self.validate()?;
        let weights: Vec<f64> = self.components.iter().map(|c| c.weight).collect();
        Ok(largest_remainder(&weights, self.epoch_size))
    }

    /// Parses `key = value` settings and `shard<TAB>weight` lines. Relative
    /// shard paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, SelectError> {
        let mut components = Vec::new();
        let mut epoch_size = None;
        let mut seed = 0u64;
        let mut sampling = Sampling::UpsampleCycle;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| SelectError::Config(format!("line {}: {m}", i + 1));
            if let Some((k, v)) = line.split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "epoch_size" => epoch_size = Some(v.parse().map_err(|_| err("bad epoch_size"))?),
                    "seed" => seed = v.parse().map_err(|_| err("bad seed"))?,
                    "sampling" => sampling = v.parse()?,
                    other => return Err(err(&format!("unknown key {other:?}"))),
                }
                continue;
            }
            let Some((shard, weight)) = line.rsplit_once(|c: char| c == '\t' || c == ' ') else {
                return Err(err("expected shard<TAB>weight"));
            };
            let weight: f64 = weight.trim().parse().map_err(|_| err("bad weight"))?;
            let path = PathBuf::from(shard.trim());
            let path = if path.is_relative() { base_dir.join(path) } else { path };
            components.push(BlendComponent {
                shard: path.to_string_lossy().into_owned(),
                weight,
            });
        }
        let spec = BlendSpec {
            components,
            epoch_size: epoch_size.ok_or_else(|| SelectError::Config("missing epoch_size".into()))?,
            sampling,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SelectError> {
        let text = std::fs::read_to_string(path).map_err(|e| SelectError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// Integer apportionment of `total` by `weights` (assumed to sum to 1).
/// Leftover units go to the largest fractional parts, lower index first on
/// ties. Quotas and remainders are compared at a resolution of 1e-6 of a
/// unit, so weights like 0.1 that are inexact in binary still tie.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    const RESOLUTION: f64 = 1e-6;
    let quotas: Vec<f64> = weights
        .iter()
        .map(|w| {
            let q = w * total as f64;
            if (q - q.round()).abs() < RESOLUTION {
                q.round()
            } else {
                q
            }
        })
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    if assigned > total {
        // only reachable through float drift in the weight sum
        let mut excess = assigned - total;
        for c in counts.iter_mut().rev() {
            let take = excess.min(*c);
            *c -= take;
            excess -= take;
        }
        return counts;
    }
    let remainder = |i: usize| ((quotas[i] - quotas[i].floor()) / RESOLUTION).round() as u64;
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| remainder(b).cmp(&remainder(a)).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Chooses which records of each component make up the epoch, then shuffles
/// the whole epoch. `pool_sizes[i]` is the record count of component i.
pub fn build_blend(spec: &BlendSpec, pool_sizes: &[usize]) -> Result<Vec<BlendItem>, SelectError> {
    let counts = spec.component_counts()?;
    if pool_sizes.len() != counts.len() {
        return Err(SelectError::Config(format!(
            "{} pools given for {} components",
            pool_sizes.len(),
            counts.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut items = Vec::with_capacity(spec.epoch_size);
    for (component, (&want, &size)) in counts.iter().zip(pool_sizes).enumerate() {
        if size == 0 {
            return Err(SelectError::EmptyComponent(spec.components[component].shard.clone()));
        }
        for k in 0..want {
            let index = match spec.sampling {
                Sampling::UpsampleCycle => k % size,
                Sampling::WithReplacement => rng.gen_range(0..size),
            };
            items.push(BlendItem { component, index });
        }
    }
    items.shuffle(&mut rng);
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_noise_does_not_break_ties() {
        // quotas 1/3, 1/3, 7/3: all remainders are exactly 1/3
        let w = [1.0 / 9.0, 1.0 / 9.0, 7.0 / 9.0];
        assert_eq!(largest_remainder(&w, 3), [1, 0, 2]);
        assert_eq!(largest_remainder(&[0.1, 0.2, 0.7], 10), [1, 2, 7]);
    }

    fn spec(weights: &[f64], epoch: usize, sampling: Sampling) -> BlendSpec {
        BlendSpec {
            components: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| BlendComponent { shard: format!("c{i}"), weight: w })
                .collect(),
            epoch_size: epoch,
            sampling,
            seed: 7,
        }
    }

    #[test]
    fn seventy_five_twenty_five() {
        let s = spec(&[0.75, 0.25], 400, Sampling::UpsampleCycle);
        assert_eq!(s.component_counts().unwrap(), [300, 100]);
        let items = build_blend(&s, &[900, 100]).unwrap();
        assert_eq!(items.len(), 400);
        assert_eq!(items.iter().filter(|i| i.component == 0).count(), 300);
    }

    #[test]
    fn cycling_repeats_from_start() {
        let s = spec(&[1.0], 150, Sampling::UpsampleCycle);
        let items = build_blend(&s, &[100]).unwrap();
        let mut seen = [0usize; 100];
        for it in &items {
            seen[it.index] += 1;
        }
        assert!(seen[..50].iter().all(|&c| c == 2));
        assert!(seen[50..].iter().all(|&c| c == 1));
    }

    #[test]
    fn single_component_is_a_permutation() {
        let s = spec(&[1.0], 10, Sampling::UpsampleCycle);
        let items = build_blend(&s, &[10]).unwrap();
        let mut idx: Vec<usize> = items.iter().map(|i| i.index).collect();
        assert_ne!(idx, (0..10).collect::<Vec<_>>());
        idx.sort_unstable();
        assert_eq!(idx, (0..10).collect::<Vec<_>>());
        assert_eq!(build_blend(&s, &[10]).unwrap(), items);
    }

    #[test]
    fn remainder_ties_favour_lower_index() {
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 10), [4, 3, 3]);
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), [2, 1]);
    }

    #[test]
    fn errors() {
        assert!(spec(&[0.5, 0.4], 10, Sampling::UpsampleCycle).validate().is_err());
        let s = spec(&[0.5, 0.5], 10, Sampling::WithReplacement);
        assert!(matches!(build_blend(&s, &[3, 0]), Err(SelectError::EmptyComponent(n)) if n == "c1"));
    }

    #[test]
    fn parse_config() {
        let text = "epoch_size = 400\nseed = 3\nsampling = with_replacement\n# pools\nsynth.en\t0.75\n/abs/par.en\t0.25\n";
        let s = BlendSpec::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(s.epoch_size, 400);
        assert_eq!(s.seed, 3);
        assert_eq!(s.sampling, Sampling::WithReplacement);
        assert_eq!(s.components[0].shard, "/cfg/synth.en");
        assert_eq!(s.components[1].shard, "/abs/par.en");
        assert!(BlendSpec::parse("seed = 1\na\t1\n", Path::new(".")).is_err());
    }
}
