//! Token-overlap relatedness over token sets.

use serde::Serialize;

use crate::corpus::TokenizedSentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMetric {
    Jaccard,
    Dice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapScore {
    pub value: f64,
    pub metric: OverlapMetric,
}

fn intersection_size(a: &TokenizedSentence, b: &TokenizedSentence) -> usize {
    let (small, large) = if a.token_set.len() <= b.token_set.len() {
        (&a.token_set, &b.token_set)
    } else {
        (&b.token_set, &a.token_set)
    };
    small.iter().filter(|t| large.contains(*t)).count()
}

/// `|A ∩ B| / |A ∪ B|`; two empty sentences score 1.
pub fn jaccard(a: &TokenizedSentence, b: &TokenizedSentence) -> OverlapScore {
    let inter = intersection_size(a, b);
    let union = a.token_set.len() + b.token_set.len() - inter;
    let value = if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    };
    OverlapScore {
        value,
        metric: OverlapMetric::Jaccard,
    }
}

/// `2 |A ∩ B| / (|A| + |B|)`; two empty sentences score 1.
pub fn dice(a: &TokenizedSentence, b: &TokenizedSentence) -> OverlapScore {
    let inter = intersection_size(a, b);
    let total = a.token_set.len() + b.token_set.len();
    let value = if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    };
    OverlapScore {
        value,
        metric: OverlapMetric::Dice,
    }
}

pub fn overlap(metric: OverlapMetric, a: &TokenizedSentence, b: &TokenizedSentence) -> OverlapScore {
    match metric {
        OverlapMetric::Jaccard => jaccard(a, b),
        OverlapMetric::Dice => dice(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sent(words: &[&str]) -> TokenizedSentence {
        TokenizedSentence::from_tokens(words.iter().map(|w| w.to_string()).collect())
    }

    #[test]
    fn hand_examples() {
        let a = sent(&["the", "cat", "sat"]);
        let b = sent(&["the", "cat", "ran"]);
        assert_eq!(jaccard(&a, &b).value, 0.5);
        assert!((dice(&a, &b).value - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(jaccard(&a, &a).value, 1.0);
        assert_eq!(dice(&a, &a).value, 1.0);
        let c = sent(&["dog"]);
        assert_eq!(jaccard(&a, &c).value, 0.0);
        assert_eq!(dice(&a, &c).value, 0.0);
    }

    #[test]
    fn empty_sentences() {
        let e = sent(&[]);
        assert_eq!(jaccard(&e, &e).value, 1.0);
        assert_eq!(dice(&e, &e).value, 1.0);
        assert_eq!(jaccard(&e, &sent(&["x"])).value, 0.0);
    }

    #[test]
    fn sets_not_multisets() {
        let a = sent(&["a", "a", "b"]);
        let b = sent(&["a", "b"]);
        assert_eq!(jaccard(&a, &b).value, 1.0);
    }

    fn arb_sentence() -> impl Strategy<Value = TokenizedSentence> {
        proptest::collection::vec("[a-f]", 0..6).prop_map(TokenizedSentence::from_tokens)
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_dice_dominates(a in arb_sentence(), b in arb_sentence()) {
            let j = jaccard(&a, &b).value;
            let d = dice(&a, &b).value;
            prop_assert_eq!(j, jaccard(&b, &a).value);
            prop_assert_eq!(d, dice(&b, &a).value);
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!(d >= j);
        }

        #[test]
        fn shared_token_never_decreases(a in arb_sentence(), b in arb_sentence(), extra in "[a-h]") {
            let mut a2 = a.tokens.clone();
            a2.push(extra.clone());
            let mut b2 = b.tokens.clone();
            b2.push(extra);
            let (a2, b2) = (TokenizedSentence::from_tokens(a2), TokenizedSentence::from_tokens(b2));
            prop_assert!(jaccard(&a2, &b2).value >= jaccard(&a, &b).value);
            prop_assert!(dice(&a2, &b2).value >= dice(&a, &b).value);
        }
    }
}
