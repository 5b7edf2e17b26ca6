//! Fuzzy string matching for cleansing.
//!
//! Similarity is one minus the Damerau-Levenshtein distance (adjacent
//! transpositions counted as one edit, the optimal-string-alignment variant)
//! between folded inputs, normalized by the longer folded length. Folding
//! trims, collapses internal whitespace runs and lowercases, so case and
//! spacing noise never count as edits.

/// Case-fold + trim + collapse internal whitespace.
pub fn fold(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars() {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Damerau-Levenshtein distance with adjacent transpositions (OSA variant),
/// computed over Unicode scalar values.
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let w = b.len() + 1;
    let mut d = vec![0usize; (a.len() + 1) * w];
    for i in 0..=a.len() {
        d[i * w] = i;
    }
    for j in 0..=b.len() {
        d[j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut best = (d[(i - 1) * w + j] + 1)
                .min(d[i * w + j - 1] + 1)
                .min(d[(i - 1) * w + j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(d[(i - 2) * w + j - 2] + 1);
            }
            d[i * w + j] = best;
        }
    }
    d[a.len() * w + b.len()]
}

/// Normalized similarity in `[0, 1]`; 1 exactly when the folded inputs are
/// equal (two empty strings score 1).
pub fn similarity(a: &str, b: &str) -> f64 {
    let fa = fold(a);
    let fb = fold(b);
    let longest = fa.chars().count().max(fb.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - damerau_levenshtein(&fa, &fb) as f64 / longest as f64
}

#[derive(Clone, Debug, PartialEq)]
pub enum LookupOutcome {
    /// Best reference entry at or above the threshold.
    Match { entry: String, index: usize, score: f64 },
    /// Nothing reached the threshold; the best candidate is reported.
    Unmatched { best: Option<(String, f64)> },
}

impl LookupOutcome {
    pub fn matched(&self) -> Option<(&str, f64)> {
        match self {
            LookupOutcome::Match { entry, score, .. } => Some((entry, *score)),
            LookupOutcome::Unmatched { .. } => None,
        }
    }
}

/// Find the reference entry most similar to `value`. Ties go to the smallest
/// reference index, so sorted reference lists give deterministic answers.
pub fn fuzzy_lookup(value: &str, reference: &[String], threshold: f64) -> LookupOutcome {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "threshold must lie in (0, 1]"
    );
    let mut best: Option<(usize, f64)> = None;
    for (i, entry) in reference.iter().enumerate() {
        let score = similarity(value, entry);
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    match best {
        Some((i, score)) if score >= threshold => LookupOutcome::Match {
            entry: reference[i].clone(),
            index: i,
            score,
        },
        Some((i, score)) => LookupOutcome::Unmatched {
            best: Some((reference[i].clone(), score)),
        },
        None => LookupOutcome::Unmatched { best: None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_symmetry() {
        assert_eq!(similarity("Leukemia", "Leukemia"), 1.0);
        assert_eq!(similarity("", ""), 1.0);
        assert_eq!(
            similarity("Sarcoma", "Lymphoma"),
            similarity("Lymphoma", "Sarcoma")
        );
    }

    #[test]
    fn folding_ignores_case_and_spacing() {
        assert_eq!(fold("  Hormone   Therapy "), "hormone therapy");
        assert_eq!(similarity("LEUKEMIA", " leukemia "), 1.0);
    }

    #[test]
    fn transposition_counts_as_one_edit() {
        // one transposition over folded length 8
        assert_eq!(damerau_levenshtein("leukemai", "leukemia"), 1);
        assert_eq!(similarity("Leukemai", "Leukemia"), 0.875);
    }

    #[test]
    fn distant_names_score_low() {
        // frozen from an independent edit-distance oracle: distance 5 over length 8
        assert_eq!(damerau_levenshtein("sarcoma", "lymphoma"), 5);
        assert_eq!(similarity("Sarcoma", "Lymphoma"), 1.0 - 5.0 / 8.0);
        assert!(similarity("Sarcoma", "Lymphoma") < 0.8);
    }

    #[test]
    fn lookup_picks_the_best_entry() {
        let reference: Vec<String> =
            ["Leukemia", "Lymphoma", "Melanoma"].iter().map(|s| s.to_string()).collect();
        match fuzzy_lookup("Leukemai", &reference, 0.8) {
            LookupOutcome::Match { entry, index, score } => {
                assert_eq!(entry, "Leukemia");
                assert_eq!(index, 0);
                assert_eq!(score, 0.875);
            }
            other => panic!("expected a match, got {other:?}"),
        }
        match fuzzy_lookup("Leukemia", &reference, 0.8) {
            LookupOutcome::Match { entry, score, .. } => {
                assert_eq!(entry, "Leukemia");
                assert_eq!(score, 1.0);
            }
            other => panic!("expected a match, got {other:?}"),
        }
    }

    #[test]
    fn lookup_reports_best_candidate_when_unmatched() {
        let reference: Vec<String> =
            ["Leukemia", "Lymphoma", "Melanoma"].iter().map(|s| s.to_string()).collect();
        match fuzzy_lookup("Glioblastoma", &reference, 0.8) {
            LookupOutcome::Unmatched { best: Some((entry, score)) } => {
                // frozen from the oracle: melanoma is closest at 5/12
                assert_eq!(entry, "Melanoma");
                assert!((score - 5.0 / 12.0).abs() < 1e-12);
            }
            other => panic!("expected unmatched, got {other:?}"),
        }
    }

    #[test]
    fn empty_reference_is_unmatched() {
        assert_eq!(
            fuzzy_lookup("anything", &[], 0.8),
            LookupOutcome::Unmatched { best: None }
        );
    }
}
