//! Chinese desegmentation and character-level segmentation.
//!
//! Both transforms only touch the space/tab separators used for tokens.
//! Desegmentation removes separator runs that touch a Chinese character;
//! character segmentation puts a single space between adjacent characters
//! when either of them is Chinese, so Latin words and numbers stay whole.

use crate::corpus::is_token_separator;
use crate::script::ScriptRangeSet;

/// Removes every separator run with a character from `ranges` on at least
/// one side. Other runs are kept verbatim.
pub fn zh_desegment(sentence: &str, ranges: &ScriptRangeSet) -> String {
    let mut out = String::with_capacity(sentence.len());
    let mut prev: Option<char> = None;
    let mut pending = String::new();
    for c in sentence.chars() {
        if is_token_separator(c) {
            pending.push(c);
            continue;
        }
        if !pending.is_empty() {
            let touches = prev.is_some_and(|p| ranges.contains(p)) || ranges.contains(c);
            if !touches {
                out.push_str(&pending);
            }
            pending.clear();
        }
        out.push(c);
        prev = Some(c);
    }
    if !pending.is_empty() && !prev.is_some_and(|p| ranges.contains(p)) {
        out.push_str(&pending);
    }
    out
}

/// Inserts a space between directly adjacent characters when at least one
/// of them is in `ranges`. Idempotent.
pub fn zh_char_segment(sentence: &str, ranges: &ScriptRangeSet) -> String {
    let mut out = String::with_capacity(sentence.len() * 2);
    let mut prev: Option<char> = None;
    for c in sentence.chars() {
        if let Some(p) = prev {
            if !is_token_separator(p)
                && !is_token_separator(c)
                && (ranges.contains(p) || ranges.contains(c))
            {
                out.push(' ');
            }
        }
        out.push(c);
        prev = Some(c);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZhMode {
    Char,
    Deseg,
}

impl std::str::FromStr for ZhMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "char" => Ok(ZhMode::Char),
            "deseg" => Ok(ZhMode::Deseg),
            other => Err(format!("unknown zh-seg mode {other:?}, expected char or deseg")),
        }
    }
}

/// Range sets for the two transforms. CJK punctuation counts as Chinese when
/// desegmenting but does not trigger splits in character mode unless
/// `split_punct` is set.
#[derive(Debug, Clone)]
pub struct ZhSegmenter {
    pub mode: ZhMode,
    pub ranges: ScriptRangeSet,
}

impl ZhSegmenter {
    pub fn new(mode: ZhMode, split_punct: bool) -> Self {
        let ranges = match (mode, split_punct) {
            (ZhMode::Deseg, _) | (ZhMode::Char, true) => ScriptRangeSet::chinese_with_punct(),
            (ZhMode::Char, false) => ScriptRangeSet::chinese(),
        };
        ZhSegmenter { mode, ranges }
    }

    pub fn apply(&self, sentence: &str) -> String {
        match self.mode {
            ZhMode::Char => zh_char_segment(sentence, &self.ranges),
            ZhMode::Deseg => zh_desegment(sentence, &self.ranges),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::token_count;
    use proptest::prelude::*;

    fn zh() -> ScriptRangeSet {
        ScriptRangeSet::chinese()
    }

    fn deseg_ranges() -> ScriptRangeSet {
        ScriptRangeSet::chinese_with_punct()
    }

    #[test]
    fn desegment_examples() {
        let r = deseg_ranges();
        assert_eq!(zh_desegment("我 喜 欢 NASA", &r), "我喜欢NASA");
        assert_eq!(zh_desegment("NASA is great", &r), "NASA is great");
        assert_eq!(zh_desegment("你 好 , world", &r), "你好, world");
        assert_eq!(zh_desegment("  你 \t好  ", &r), "你好");
        assert_eq!(zh_desegment(" a b ", &r), " a b ");
        assert_eq!(zh_desegment("好 。 好", &r), "好。好");
    }

    #[test]
    fn char_segment_examples() {
        assert_eq!(zh_char_segment("我喜欢NASA的工作", &zh()), "我 喜 欢 NASA 的 工 作");
        assert_eq!(zh_char_segment("hello world 123", &zh()), "hello world 123");
        assert_eq!(zh_char_segment("2019年", &zh()), "2019 年");
        // full-width punctuation stays attached in the default mode
        assert_eq!(zh_char_segment("好。", &zh()), "好 。");
        assert_eq!(zh_char_segment("a。b", &zh()), "a。b");
    }

    #[test]
    fn segmenter_modes() {
        let seg = ZhSegmenter::new(ZhMode::Char, true);
        assert_eq!(seg.apply("a。b"), "a 。 b");
        let deseg = ZhSegmenter::new(ZhMode::Deseg, false);
        assert_eq!(deseg.apply("我 喜 欢"), "我喜欢");
    }

    fn mixed() -> impl Strategy<Value = String> {
        let pieces = prop_oneof![
            Just("我".to_string()),
            Just("喜".to_string()),
            Just("工".to_string()),
            Just("。".to_string()),
            Just(" ".to_string()),
            Just("\t".to_string()),
            Just("NASA".to_string()),
            Just("1".to_string()),
            Just(",".to_string()),
            "[a-z]{1,3}",
        ];
        prop::collection::vec(pieces, 0..20).prop_map(|v| v.concat())
    }

    fn non_ws_sorted(s: &str) -> Vec<char> {
        let mut v: Vec<char> = s.chars().filter(|c| !is_token_separator(*c)).collect();
        v.sort_unstable();
        v
    }

    proptest! {
        #[test]
        fn char_segment_is_idempotent(s in mixed()) {
            let once = zh_char_segment(&s, &zh());
            prop_assert_eq!(zh_char_segment(&once, &zh()), once);
        }

        #[test]
        fn deseg_after_seg_equals_deseg(s in mixed()) {
            let d = deseg_ranges();
            prop_assert_eq!(
                zh_desegment(&zh_char_segment(&s, &zh()), &d),
                zh_desegment(&s, &d)
            );
        }

        #[test]
        fn only_whitespace_changes(s in mixed()) {
            prop_assert_eq!(non_ws_sorted(&zh_char_segment(&s, &zh())), non_ws_sorted(&s));
            prop_assert_eq!(non_ws_sorted(&zh_desegment(&s, &deseg_ranges())), non_ws_sorted(&s));
        }

        #[test]
        fn segmentation_never_reduces_tokens(s in mixed()) {
            prop_assert!(token_count(&zh_char_segment(&s, &zh())) >= token_count(&s));
        }
    }
}
