use std::collections::BTreeSet;

use prszz_core::eval::f_score;
use prszz_core::lexer::{is_cosmetic_line, LanguageProfile};
use prszz_core::links::LinkPatterns;
use prszz_core::{IssueRef, Metrics};
use proptest::prelude::*;

fn jira_patterns() -> LinkPatterns {
    LinkPatterns::new(false, &BTreeSet::from(["KAFKA".to_string()]))
}

proptest! {
    #[test]
    fn jira_key_glued_to_a_word_is_not_a_reference(prefix in "[A-Za-z0-9_]{1,6}", n in 1u32..100000) {
        let text = format!("{prefix}KAFKA-{n} done");
        prop_assert!(jira_patterns().extract(&text).is_empty(), "{}", text);
    }

    #[test]
    fn jira_key_after_a_separator_is_a_reference(sep in "[ \t(\\[:;,.]", n in 1u32..100000, tail in "[ .,;)]{0,2}") {
        let text = format!("see{sep}KAFKA-{n}{tail}");
        prop_assert_eq!(jira_patterns().extract(&text), vec![IssueRef::jira(&format!("KAFKA-{n}"))]);
    }

    #[test]
    fn jira_number_followed_by_a_word_character_is_not_a_reference(n in 1u32..100000, tail in "[A-Za-z_]{1,3}") {
        let text = format!("KAFKA-{n}{tail}");
        prop_assert!(jira_patterns().extract(&text).is_empty());
    }

    #[test]
    fn github_closing_keyword_any_case(kw in prop::sample::select(vec!["fix", "fixes", "fixed", "close", "closes", "closed", "resolve", "resolves", "resolved"]),
                                       upper in any::<bool>(), n in 1u32..100000) {
        let kw = if upper { kw.to_uppercase() } else { kw.to_string() };
        let patterns = LinkPatterns::new(true, &BTreeSet::new());
        prop_assert_eq!(patterns.extract(&format!("{kw} #{n}")), vec![IssueRef::github(n as u64)]);
        let glued = format!("{kw} #{n}x");
        prop_assert!(patterns.extract(&glued).is_empty());
    }

    #[test]
    fn injected_whitespace_is_cosmetic(tokens in prop::collection::vec("[a-z]{1,5}|[(){};=+]", 1..12),
                                       gaps in prop::collection::vec(0usize..3, 12)) {
        let java = LanguageProfile::java();
        let tight: String = tokens.concat();
        let loose: String = tokens
            .iter()
            .zip(gaps.iter().cycle())
            .map(|(t, g)| format!("{}{t}", " ".repeat(*g)))
            .collect();
        prop_assert!(is_cosmetic_line(Some(&tight), Some(&loose), Some(&java)));
    }

    #[test]
    fn metrics_stay_in_bounds(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
        let m = Metrics::from_counts(tp, fp, fn_);
        for v in [m.precision, m.recall, m.f_score] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(m.f_score == 0.0, tp == 0);
        if tp > 0 {
            prop_assert_eq!(m.f_score, (2 * tp) as f64 / (2 * tp + fp + fn_) as f64);
        }
        prop_assert!((m.f_score - f_score(m.precision, m.recall)).abs() <= 4.0 * f64::EPSILON);
    }
}
