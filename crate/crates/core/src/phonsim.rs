//! Symbolic similarity spaces: transcription string similarity (global scope)
//! and the same-phoneme indicator (local scope).

use crate::data::PhonemeId;

/// Unit-cost edit distance (insert, delete, substitute).
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // single rolling row over b
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(ca != cb);
            row[j + 1] = (above + 1).min(row[j] + 1).min(diag + cost);
            diag = above;
        }
    }
    row[b.len()]
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)`; two empty strings count as identical.
pub fn string_similarity<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// 1 when two frames carry the same phoneme label, else 0.
pub fn same_phoneme(a: PhonemeId, b: PhonemeId) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_insertions() {
        assert_eq!(levenshtein(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(levenshtein::<u8>(&[], &[0, 1, 2]), 3);
        assert_eq!(levenshtein(&[0, 1, 2], &[] as &[u8]), 3);
    }

    #[test]
    fn single_substitution() {
        // p a t -> p i t
        assert_eq!(levenshtein(&['p', 'a', 't'], &['p', 'i', 't']), 1);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(string_similarity(&[4, 5], &[4, 5]), 1.0);
        assert!((string_similarity(&['a', 'b', 'c'], &['a', 'b', 'd']) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(string_similarity::<u8>(&[], &[]), 1.0);
        assert_eq!(string_similarity(&[1, 2], &[3, 4, 5]), 0.0);
    }

    #[test]
    fn indicator() {
        assert_eq!(same_phoneme(3, 3), 1.0);
        assert_eq!(same_phoneme(3, 5), 0.0);
        for p in 0..40 {
            assert_eq!(same_phoneme(p, p), 1.0);
        }
    }

    proptest! {
        #[test]
        fn bounded_by_longer_string(
            a in proptest::collection::vec(0u8..5, 0..20),
            b in proptest::collection::vec(0u8..5, 0..20),
        ) {
            let d = levenshtein(&a, &b);
            prop_assert!(d <= a.len().max(b.len()));
            prop_assert!(d >= a.len().abs_diff(b.len()));
            prop_assert_eq!(d, levenshtein(&b, &a));
            let s = string_similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s == 1.0, a == b);
        }
    }
}
