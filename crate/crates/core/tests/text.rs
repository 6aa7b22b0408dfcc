mod common;

use misinfo_core::arabic_text::{clean, is_arabic_diacritic, normalize, preprocess, NormalizationRules, StemmerKind};
use misinfo_core::{PreprocessConfig, StopList};
use proptest::prelude::*;

fn arabic_noise() -> impl Strategy<Value = String> {
    let pieces = prop::sample::select(vec![
        "ا", "ب", "ت", "ج", "ح", "د", "ر", "س", "ع", "ل", "م", "ن", "ه", "و", "ي", "ة", "ى", "أ", "إ", "آ", "ـ", "\u{64b}",
        "\u{64e}", "\u{651}", "\u{652}", " ", " ", "#", "@", "!", "؟", "،", "x", "9", "٣", "https://t.co/ab", "😀",
    ]);
    prop::collection::vec(pieces, 0..60).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn normalize_is_idempotent(s in arabic_noise()) {
        let rules = NormalizationRules::default();
        let once = normalize(&s, &rules);
        prop_assert_eq!(normalize(&once, &rules), once);
    }

    #[test]
    fn preprocess_tokens_are_clean(s in arabic_noise()) {
        let cfg = PreprocessConfig::default();
        let stops = StopList::default_arabic();
        for t in preprocess(&s, &cfg).tokens {
            prop_assert!(!t.is_empty());
            prop_assert!(!t.chars().any(|c| c.is_whitespace() || is_arabic_diacritic(c) || "#@!؟،ـةىأإآ".contains(c)));
            prop_assert!(!stops.contains(&t), "stop word {} survived", t);
        }
    }

    #[test]
    fn clean_output_never_contains_urls(s in arabic_noise()) {
        let out = clean(&s);
        prop_assert!(!out.contains("http") && !out.contains("t.co"));
    }

    #[test]
    fn stemming_never_adds_tokens(s in arabic_noise()) {
        let plain = preprocess(&s, &PreprocessConfig::default().with_stemmer(StemmerKind::None));
        let stemmed = preprocess(&s, &PreprocessConfig::default());
        prop_assert!(stemmed.len() <= plain.len());
    }
}

#[test]
fn realistic_tweet() {
    let cfg = PreprocessConfig::default();
    let out = preprocess("عاااااجل!! #كورونا ينتشر في المدينة https://t.co/xyz @user_1 😷", &cfg);
    assert!(!out.is_empty());
    let joined = out.join();
    for banned in ["#", "@", "http", "😷", "!"] {
        assert!(!joined.contains(banned), "{banned} in {joined}");
    }
    assert!(!out.tokens.iter().any(|t| t == "في"));
}

#[test]
fn same_input_same_tokens() {
    let cfg = PreprocessConfig::default();
    let mut r = common::rng(2);
    for w in common::word_list(&mut r, 200) {
        let text = format!("ال{w}ات و{w}");
        assert_eq!(preprocess(&text, &cfg), preprocess(&text, &cfg));
    }
}
