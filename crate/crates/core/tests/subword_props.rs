mod oracles;

use std::collections::{BTreeMap, HashMap};

use mtforge::corpus::token_count;
use mtforge::subword::{bpe_learn, learn_from_counts, BpeModel};
use proptest::prelude::*;

fn corpus() -> impl Strategy<Value = BTreeMap<String, u64>> {
    prop::collection::btree_map("[abcde]{1,7}", 1u64..20, 1..=50)
}

fn to_hash(m: &BTreeMap<String, u64>) -> HashMap<String, u64> {
    m.iter().map(|(k, v)| (k.clone(), *v)).collect()
}

fn fixed_model(merges: usize) -> BpeModel {
    let lines: Vec<String> = [
        "the lowest newer wider lower low low",
        "नमस्ते दुनिया नमस्ते",
        "我们 我们 你们 tokens tokenizer tokenization",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    bpe_learn(&[&lines[..]], merges, true).unwrap().pop().unwrap()
}

fn marker_free_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[^@\\s]{1,6}".prop_map(|s| s),
        Just(" ".to_string()),
        Just("\t".to_string()),
        Just("  ".to_string()),
        "[lowertheस्]{1,5}".prop_map(|s| s),
    ];
    prop::collection::vec(piece, 0..12).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merges_match_bruteforce_oracle(words in corpus(), n in 0usize..=30) {
        let got = learn_from_counts(&to_hash(&words), n).unwrap();
        let want = oracles::bpe_merges_bruteforce(&words, n);
        prop_assert_eq!(got.merges(), &want[..]);
    }

    #[test]
    fn shorter_run_is_a_prefix(words in corpus(), m in 1usize..15, extra in 0usize..15) {
        let short = learn_from_counts(&to_hash(&words), m).unwrap();
        let long = learn_from_counts(&to_hash(&words), m + extra).unwrap();
        let double = learn_from_counts(&to_hash(&words), 2 * m).unwrap();
        prop_assert!(long.merges().starts_with(short.merges()));
        prop_assert!(double.merges().starts_with(short.merges()));
    }

    #[test]
    fn learning_ignores_line_order(lines in prop::collection::vec("[abc ]{0,12}", 1..30), n in 0usize..20) {
        prop_assume!(lines.iter().any(|l| token_count(l) > 0));
        let a = bpe_learn(&[&lines[..]], n, true).unwrap();
        let mut rev = lines.clone();
        rev.reverse();
        let b = bpe_learn(&[&rev[..]], n, true).unwrap();
        prop_assert_eq!(a[0].merges(), b[0].merges());
    }

    #[test]
    fn apply_then_desegment_is_identity(s in marker_free_text()) {
        for m in [0, 10, 60] {
            let model = fixed_model(m);
            let seg = model.apply(&s, None);
            prop_assert_eq!(model.desegment(&seg), s.clone());
        }
    }

    #[test]
    fn more_merges_never_add_tokens(s in marker_free_text()) {
        let mut prev = usize::MAX;
        for m in [0, 5, 20, 60] {
            let n = token_count(&fixed_model(m).apply(&s, None));
            prop_assert!(n <= prev);
            prev = n;
        }
    }
}

#[test]
fn model_file_round_trip() {
    let model = fixed_model(40);
    let back = BpeModel::from_text(&model.to_text()).unwrap();
    assert_eq!(back.merges(), model.merges());
    let s = "the lowest tokenizer नमस्ते 我们";
    assert_eq!(back.apply(s, None), model.apply(s, None));
}
