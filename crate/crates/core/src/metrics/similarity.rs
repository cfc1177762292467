use crate::scalar::Scalar;
use crate::triple::Triple;

/// Levenshtein ratio `1 - dist / max(len)` over Unicode scalar values.
/// Two empty strings are identical (1).
pub fn levenshtein_ratio<T: Scalar>(a: &str, b: &str) -> T {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return T::one();
    }
    let dist = strsim::levenshtein(a, b);
    T::one() - T::ratio(dist, longest)
}

/// Similarity of two triples on their canonical joined form.
pub fn fuzzy_similarity<T: Scalar>(gold: &Triple, pred: &Triple) -> T {
    levenshtein_ratio(&gold.joined(), &pred.joined())
}

/// Row-major `gold × pred` similarity matrix.
pub fn similarity_matrix<T: Scalar>(gold: &[Triple], pred: &[Triple]) -> Vec<Vec<T>> {
    let pred_joined: Vec<String> = pred.iter().map(Triple::joined).collect();
    gold.iter()
        .map(|g| {
            let gj = g.joined();
            pred_joined
                .iter()
                .map(|pj| levenshtein_ratio(&gj, pj))
                .collect()
        })
        .collect()
}
