use std::collections::HashMap;
use std::fmt;

use crate::corpus::ShardKind;
use crate::script::ScriptRangeSet;

use super::filters::{self, Side, Sides, Verdict, CZECH_DIACRITICS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupMode {
    /// Exact (src, tgt) pairs.
    Pair,
    Src,
    Tgt,
}

impl std::str::FromStr for DedupMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pair" => Ok(DedupMode::Pair),
            "src" => Ok(DedupMode::Src),
            "tgt" => Ok(DedupMode::Tgt),
            other => Err(format!("unknown dedup mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    MaxLen { limit: usize },
    LenBounds { min: usize, max: usize },
    LenRatio { max_ratio: f64 },
    RequiresDiacritic { side: Side, chars: Vec<char> },
    AlphaRatio { min_ratio: f64 },
    ContainsLink,
    ScriptPresence {
        script_side: Side,
        ranges: ScriptRangeSet,
        require_script: bool,
        forbid_script_only: bool,
    },
    Dedup { mode: DedupMode },
    RepeatNoise { max_char_run: usize, max_token_run: usize },
}

impl RuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::MaxLen { .. } => "max_len",
            RuleKind::LenBounds { .. } => "len_bounds",
            RuleKind::LenRatio { .. } => "len_ratio",
            RuleKind::RequiresDiacritic { .. } => "requires_diacritic",
            RuleKind::AlphaRatio { .. } => "alpha_ratio",
            RuleKind::ContainsLink => "contains_link",
            RuleKind::ScriptPresence { .. } => "script_presence",
            RuleKind::Dedup { .. } => "dedup",
            RuleKind::RepeatNoise { .. } => "repeat_noise",
        }
    }

    pub fn is_stateful(&self) -> bool {
        matches!(self, RuleKind::Dedup { .. })
    }

    /// Evaluates a stateless rule. Dedup always keeps here; the engine
    /// handles it.
    pub fn check(&self, sides: Sides<'_>) -> Verdict {
        match self {
            RuleKind::MaxLen { limit } => filters::filter_max_len(sides, *limit),
            RuleKind::LenBounds { min, max } => filters::filter_len_bounds(sides, *min, *max),
            RuleKind::LenRatio { max_ratio } => filters::filter_len_ratio(sides, *max_ratio),
            RuleKind::RequiresDiacritic { side, chars } => {
                filters::filter_requires_diacritic(sides, *side, chars)
            }
            RuleKind::AlphaRatio { min_ratio } => filters::filter_alpha_ratio(sides, *min_ratio),
            RuleKind::ContainsLink => filters::filter_contains_link(sides),
            RuleKind::ScriptPresence {
                script_side,
                ranges,
                require_script,
                forbid_script_only,
            } => {
                if *require_script && !filters::requires_script(sides, *script_side, ranges).is_keep()
                {
                    return Verdict::Reject;
                }
                if *forbid_script_only {
                    return filters::forbids_script_only(sides, script_side.other(), ranges);
                }
                Verdict::Keep
            }
            RuleKind::Dedup { .. } => Verdict::Keep,
            RuleKind::RepeatNoise {
                max_char_run,
                max_token_run,
            } => filters::filter_repeat_noise(sides, *max_char_run, *max_token_run),
        }
    }

    fn needs_parallel(&self) -> bool {
        match self {
            RuleKind::LenRatio { .. } | RuleKind::ScriptPresence { .. } => true,
            RuleKind::RequiresDiacritic { side, .. } => *side == Side::Tgt,
            RuleKind::Dedup { mode } => *mode == DedupMode::Tgt,
            _ => false,
        }
    }

    /// Parameter range checks.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            RuleKind::MaxLen { limit } if *limit < 1 => Err("limit must be >= 1".into()),
            RuleKind::LenBounds { min, max } if !(1 <= *min && min <= max) => {
                Err(format!("need 1 <= min <= max, got min={min} max={max}"))
            }
            RuleKind::LenRatio { max_ratio } if !(max_ratio.is_finite() && *max_ratio > 1.0) => {
                Err(format!("ratio must be > 1.0, got {max_ratio}"))
            }
            RuleKind::AlphaRatio { min_ratio } if !(0.0..=1.0).contains(min_ratio) => {
                Err(format!("min ratio must lie in [0, 1], got {min_ratio}"))
            }
            RuleKind::RequiresDiacritic { chars, .. } if chars.is_empty() => {
                Err("diacritic set is empty".into())
            }
            RuleKind::ScriptPresence {
                require_script: false,
                forbid_script_only: false,
                ..
            } => Err("script_presence with both checks disabled".into()),
            RuleKind::RepeatNoise {
                max_char_run,
                max_token_run,
            } if *max_char_run < 2 || *max_token_run < 2 => {
                Err("repeat thresholds must be >= 2".into())
            }
            _ => Ok(()),
        }
    }
}

/// A configured rule: the check plus the label it reports under.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanRule {
    pub id: String,
    pub kind: RuleKind,
}

impl CleanRule {
    pub fn new(kind: RuleKind) -> Self {
        CleanRule {
            id: kind.name().to_string(),
            kind,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

impl fmt::Display for CleanRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule {index} ({rule}): {message}")]
pub struct RuleError {
    /// 1-based position in the rule list.
    pub index: usize,
    pub rule: String,
    pub message: String,
}

/// Parses one rule line: `name key=value ...`.
///
/// ```text
/// max_len limit=80
/// len_bounds min=3 max=200
/// len_ratio max=1.3
/// requires_diacritic side=tgt [chars=áčď...]
/// alpha_ratio min=0.5
/// contains_link
/// script_presence script_side=src [ranges=4E00-9FFF,3400-4DBF] [require=true] [forbid_only=true]
/// dedup [mode=pair|src|tgt]
/// repeat_noise [char_run=4] [token_run=3]
/// ```
/// Any rule accepts `id=<label>` to override its report label.
pub fn parse_rule(line: &str) -> Result<CleanRule, String> {
    let mut parts = line.split_whitespace();
    let name = parts.next().ok_or("empty rule")?;
    let mut params: HashMap<&str, &str> = HashMap::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| format!("parameter {p:?} is not key=value"))?;
        if params.insert(k, v).is_some() {
            return Err(format!("parameter {k:?} given twice"));
        }
    }
    let mut take = |key: &str| params.remove(key);

    fn num<T: std::str::FromStr>(key: &str, v: Option<&str>, default: Option<T>) -> Result<T, String> {
        match v {
            Some(v) => v
                .parse()
                .map_err(|_| format!("{key}={v:?} is not a valid number")),
            None => default.ok_or_else(|| format!("missing parameter {key}")),
        }
    }
    fn flag(key: &str, v: Option<&str>, default: bool) -> Result<bool, String> {
        match v {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(format!("{key}={v:?} is not true/false")),
        }
    }

    let id = take("id").map(str::to_string);
    let kind = match name {
        "max_len" => RuleKind::MaxLen {
            limit: num("limit", take("limit"), None)?,
        },
        "len_bounds" => RuleKind::LenBounds {
            min: num("min", take("min"), None)?,
            max: num("max", take("max"), None)?,
        },
        "len_ratio" => RuleKind::LenRatio {
            max_ratio: num("max", take("max"), None)?,
        },
        "requires_diacritic" => RuleKind::RequiresDiacritic {
            side: take("side").unwrap_or("tgt").parse()?,
            chars: take("chars").unwrap_or(CZECH_DIACRITICS).chars().collect(),
        },
        "alpha_ratio" => RuleKind::AlphaRatio {
            min_ratio: num("min", take("min"), None)?,
        },
        "contains_link" => RuleKind::ContainsLink,
        "script_presence" => RuleKind::ScriptPresence {
            script_side: take("script_side").unwrap_or("src").parse()?,
            ranges: match take("ranges") {
                Some(r) => r.parse().map_err(|e| format!("ranges: {e}"))?,
                None => ScriptRangeSet::chinese(),
            },
            require_script: flag("require", take("require"), true)?,
            forbid_script_only: flag("forbid_only", take("forbid_only"), true)?,
        },
        "dedup" => RuleKind::Dedup {
            mode: take("mode").unwrap_or("pair").parse()?,
        },
        "repeat_noise" => RuleKind::RepeatNoise {
            max_char_run: num("char_run", take("char_run"), Some(4))?,
            max_token_run: num("token_run", take("token_run"), Some(3))?,
        },
        other => return Err(format!("unknown rule {other:?}")),
    };
    if let Some(k) = params.keys().next() {
        return Err(format!("unknown parameter {k:?} for {name}"));
    }
    let rule = CleanRule::new(kind);
    Ok(match id {
        Some(id) => rule.with_id(id),
        None => rule,
    })
}

/// Parses a rules file: one rule per line, `#` comments, blank lines ignored.
/// Labels that repeat get a numeric suffix (`max_len`, `max_len.2`, ...).
pub fn parse_rules(text: &str) -> Result<Vec<CleanRule>, RuleError> {
    let mut rules = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let rule = parse_rule(line).map_err(|message| RuleError {
            index: rules.len() + 1,
            rule: line.split_whitespace().next().unwrap_or("").to_string(),
            message,
        })?;
        rules.push(rule);
    }
    disambiguate_ids(&mut rules);
    Ok(rules)
}

pub fn disambiguate_ids(rules: &mut [CleanRule]) {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for rule in rules.iter_mut() {
        let n = seen.entry(rule.id.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            rule.id = format!("{}.{}", rule.id, n);
        }
    }
}

/// Static checks of a rule list against the kind of shard it will run on.
pub fn validate_rules(rules: &[CleanRule], kind: ShardKind) -> Vec<RuleError> {
    let mut errors = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        let err = |message: String| RuleError {
            index: i + 1,
            rule: rule.id.clone(),
            message,
        };
        if let Err(m) = rule.kind.validate() {
            errors.push(err(m));
        }
        if kind == ShardKind::Mono && rule.kind.needs_parallel() {
            errors.push(err("rule needs a parallel shard".into()));
        }
    }
    let mut ids: Vec<&str> = rules.iter().map(|r| r.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        errors.push(RuleError {
            index: 0,
            rule: w[0].to_string(),
            message: "duplicate rule id".into(),
        });
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_rules() {
        let text = "\
# cleaning
max_len limit=80
max_len limit=50
len_bounds min=3 max=200
len_ratio max=1.3
requires_diacritic side=tgt
alpha_ratio min=0.5
contains_link
script_presence script_side=src ranges=4E00-9FFF
dedup
repeat_noise   # defaults
";
        let rules = parse_rules(text).unwrap();
        assert_eq!(rules.len(), 10);
        assert_eq!(rules[0].id, "max_len");
        assert_eq!(rules[1].id, "max_len.2");
        assert_eq!(
            rules[9].kind,
            RuleKind::RepeatNoise {
                max_char_run: 4,
                max_token_run: 3
            }
        );
        match &rules[4].kind {
            RuleKind::RequiresDiacritic { chars, side } => {
                assert_eq!(*side, Side::Tgt);
                assert_eq!(chars.len(), 30);
            }
            other => panic!("{other:?}"),
        }
        assert!(validate_rules(&rules, ShardKind::Parallel).is_empty());
    }

    #[test]
    fn parse_errors() {
        assert!(parse_rule("nope").unwrap_err().contains("unknown rule"));
        assert!(parse_rule("max_len").unwrap_err().contains("missing"));
        assert!(parse_rule("max_len limit=x").is_err());
        assert!(parse_rule("max_len limit=3 foo=1").unwrap_err().contains("unknown parameter"));
        assert!(parse_rule("max_len limit").is_err());
        let err = parse_rules("max_len limit=80\nbogus\n").unwrap_err();
        assert_eq!(err.index, 2);
    }

    #[test]
    fn range_validation() {
        let bad = [
            "len_ratio max=0.9",
            "len_ratio max=1.0",
            "alpha_ratio min=1.5",
            "len_bounds min=5 max=3",
            "len_bounds min=0 max=3",
            "max_len limit=0",
            "repeat_noise char_run=1",
            "script_presence require=false forbid_only=false",
        ];
        for line in bad {
            let rule = parse_rule(line).unwrap();
            assert!(rule.kind.validate().is_err(), "{line}");
        }
    }

    #[test]
    fn mono_compatibility() {
        let rules = parse_rules("len_ratio max=1.3\nmax_len limit=3\ndedup mode=src").unwrap();
        let errs = validate_rules(&rules, ShardKind::Mono);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].rule, "len_ratio");
    }

    #[test]
    fn explicit_ids() {
        let rules = parse_rules("max_len limit=80 id=moses\nmax_len limit=50 id=moses").unwrap();
        assert_eq!(rules[1].id, "moses.2");
        let r = parse_rule("dedup id=x").unwrap();
        assert_eq!(r.id, "x");
    }
}
