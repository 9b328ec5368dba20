//! BLEU-4 with brevity penalty, sentence and corpus level, on a 0-100 scale.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// Clipped n-gram matches and totals for one or more candidate/reference pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    /// Candidate n-grams per order.
    pub totals: [u64; MAX_ORDER],
    /// Reference n-grams per order.
    pub ref_totals: [u64; MAX_ORDER],
    pub candidate_len: u64,
    pub reference_len: u64,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

impl BleuStats {
    pub fn of<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Self {
        let mut s = BleuStats {
            candidate_len: candidate.len() as u64,
            reference_len: reference.len() as u64,
            ..BleuStats::default()
        };
        for n in 1..=MAX_ORDER {
            let cand = ngram_counts(candidate, n);
            let refs = ngram_counts(reference, n);
            s.totals[n - 1] = cand.values().sum();
            s.ref_totals[n - 1] = refs.values().sum();
            s.matches[n - 1] = cand
                .iter()
                .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
            self.ref_totals[n] += other.ref_totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// Combine into a score. An order with no candidate n-grams is skipped
    /// when the reference has none either; otherwise its precision is 0.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut used = 0;
        for n in 0..MAX_ORDER {
            if self.totals[n] == 0 {
                if self.ref_totals[n] == 0 {
                    continue;
                }
                return 0.0;
            }
            if self.matches[n] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[n] as f64 / self.totals[n] as f64).ln();
            used += 1;
        }
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        100.0 * bp * (log_sum / used as f64).exp()
    }
}

/// Sentence-level BLEU-4 of `candidate` against `reference`.
pub fn bleu4<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Corpus("BLEU reference is empty".to_string()));
    }
    Ok(BleuStats::of(candidate, reference).score())
}

/// Corpus-level BLEU-4: counts are summed over all pairs before combining.
pub fn corpus_bleu4<T: Eq + Hash, C: AsRef<[T]>, R: AsRef<[T]>>(pairs: &[(C, R)]) -> Result<f64> {
    let mut total = BleuStats::default();
    for (i, (c, r)) in pairs.iter().enumerate() {
        if r.as_ref().is_empty() {
            return Err(Error::Corpus(format!("BLEU reference {i} is empty")));
        }
        total.add(&BleuStats::of(c.as_ref(), r.as_ref()));
    }
    Ok(total.score())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_is_hundred() {
        let x = toks("fix null check here");
        assert_eq!(bleu4(&x, &x).unwrap(), 100.0);
        assert_eq!(bleu4(&toks("fix"), &toks("fix")).unwrap(), 100.0);
    }

    #[test]
    fn empty_candidate_is_zero_and_empty_reference_errors() {
        assert_eq!(bleu4(&[] as &[&str], &toks("a b")).unwrap(), 0.0);
        assert!(bleu4(&toks("a"), &[]).is_err());
    }

    #[test]
    fn hand_computed_example() {
        // c = "a b c d e", r = "a b c d f g"
        // p1 = 4/5, p2 = 3/4, p3 = 2/3, p4 = 1/2, BP = exp(1 - 6/5)
        let got = bleu4(&toks("a b c d e"), &toks("a b c d f g")).unwrap();
        let want = 100.0 * (1.0f64 - 6.0 / 5.0).exp() * (0.8f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn missing_order_gives_zero() {
        // no shared bigram
        assert_eq!(bleu4(&toks("b a c"), &toks("a b c")).unwrap(), 0.0);
        // short candidate, long reference: no 4-grams in the candidate
        assert_eq!(bleu4(&toks("a b"), &toks("a b c d")).unwrap(), 0.0);
    }

    #[test]
    fn clipping_limits_repeats() {
        let s = BleuStats::of(&toks("the the the"), &toks("the cat"));
        assert_eq!(s.matches[0], 1);
        assert_eq!(s.totals[0], 3);
    }

    #[test]
    fn corpus_of_identical_pairs_is_hundred() {
        let pairs = vec![(toks("fix a bug"), toks("fix a bug")), (toks("add x"), toks("add x"))];
        assert_eq!(corpus_bleu4(&pairs).unwrap(), 100.0);
    }

    proptest! {
        #[test]
        fn self_bleu_is_hundred(x in prop::collection::vec(0u8..20, 1..30)) {
            prop_assert_eq!(bleu4(&x, &x).unwrap(), 100.0);
        }

        #[test]
        fn renaming_invariance(
            c in prop::collection::vec(0u8..6, 0..12),
            r in prop::collection::vec(0u8..6, 1..12),
            shift in 1u8..50,
        ) {
            let rename = |v: &[u8]| v.iter().map(|t| t.wrapping_mul(7).wrapping_add(shift)).collect::<Vec<_>>();
            let a = bleu4(&c, &r).unwrap();
            let b = bleu4(&rename(&c), &rename(&r)).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=100.0).contains(&a));
        }
    }
}
