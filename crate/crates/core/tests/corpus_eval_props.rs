use beamseg::corpus::{clean_line, make_test_pairs, shuffle_split, PreprocessOptions, SplitSpec};
use beamseg::eval::{exact_match, EvalMode};
use beamseg::segment::strip_boundaries;
use proptest::prelude::*;

fn noisy_line() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-z]{1,6}",
            "@[a-z_]{1,5}",
            "#[a-z0-9]{1,5}",
            "https?://[a-z./]{1,8}",
            "www\\.[a-z]{1,5}",
            "[?!,.]{1,2}",
            Just("\t".to_string()),
            Just(String::new()),
        ],
        0..8,
    )
    .prop_map(|toks| toks.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn preprocess_is_idempotent(line in noisy_line(), sgml in any::<bool>()) {
        let opts = PreprocessOptions { strip_sgml: sgml, max_chars: None };
        if let Some(once) = clean_line(&line, &opts) {
            prop_assert_eq!(clean_line(&once, &opts), Some(once.clone()));
            prop_assert!(!once.chars().any(|c| ('\u{1}'..='\u{1f}').contains(&c)), "control char left");
            prop_assert!(!once.contains("  "));
        }
    }

    #[test]
    fn test_pairs_strip_to_input(lines in prop::collection::vec("[a-z ]{0,12}", 0..10)) {
        for p in make_test_pairs(&lines, ' ') {
            prop_assert_eq!(strip_boundaries(&p.reference, ' ', false), p.input);
        }
    }

    #[test]
    fn split_is_a_seeded_partition(n in 0usize..60, train in 0usize..70, dev in 0usize..70, seed in any::<u64>()) {
        let lines: Vec<usize> = (0..n).collect();
        let spec = SplitSpec { train_n: train, dev_n: dev, seed };
        let (a, b) = shuffle_split(&lines, &spec);
        prop_assert_eq!(a.len(), train.min(n));
        prop_assert_eq!(b.len(), dev.min(n - a.len()));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), a.len() + b.len());
        prop_assert_eq!(shuffle_split(&lines, &spec), (a, b));
    }

    #[test]
    fn alnum_is_never_stricter(reference in "[a-z?!.,]{1,10}", mask in any::<u32>(), rmask in any::<u32>()) {
        let chars: Vec<char> = reference.chars().collect();
        let place = |m: u32| {
            let mut s = String::new();
            for (i, &c) in chars.iter().enumerate() {
                if i > 0 && m & (1 << i) != 0 {
                    s.push(' ');
                }
                s.push(c);
            }
            s
        };
        let (hyp, r) = (place(mask), place(rmask));
        let strict = exact_match(&hyp, &r, EvalMode::Strict).unwrap();
        let alnum = exact_match(&hyp, &r, EvalMode::Alnum).unwrap();
        prop_assert!(!strict || alnum);
        prop_assert!(exact_match(&r, &r, EvalMode::Strict).unwrap());
    }
}
