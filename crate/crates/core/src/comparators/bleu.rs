use std::collections::HashMap;

fn ngram_counts<'t, 'a>(tokens: &'t [&'a str], n: usize) -> HashMap<&'t [&'a str], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len == 0 {
        0.0
    } else if candidate_len > reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

/// Clipped n-gram matches and candidate n-gram total for one order.
fn clipped(candidate: &[&str], reference: &[&str], n: usize) -> (f64, f64) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let matched: usize = cand
        .iter()
        .map(|(g, c)| (*c).min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    let total: usize = cand.values().sum();
    (matched as f64, total as f64)
}

fn combine(precisions: &[f64], candidate_len: usize, reference_len: usize) -> f64 {
    if precisions.iter().any(|p| *p <= 0.0) {
        return 0.0;
    }
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / precisions.len() as f64;
    (brevity_penalty(candidate_len, reference_len) * log_mean.exp()).clamp(0.0, 1.0)
}

/// Sentence BLEU up to `max_order` with uniform weights. Orders two and up
/// use add-one smoothing: `(matches + 1) / (total + 1)`.
pub fn bleu(candidate: &[&str], reference: &[&str], max_order: usize) -> f64 {
    weighted_bleu(candidate, reference, max_order, |_| 1.0)
}

/// BLEU whose unigram precision weighs each token by `weight`; higher
/// orders are plain clipped counts with add-one smoothing.
pub fn weighted_bleu<F: Fn(&str) -> f64>(
    candidate: &[&str],
    reference: &[&str],
    max_order: usize,
    weight: F,
) -> f64 {
    if candidate.is_empty() || reference.is_empty() || max_order == 0 {
        return 0.0;
    }
    let mut precisions = Vec::with_capacity(max_order);

    let cand1 = ngram_counts(candidate, 1);
    let ref1 = ngram_counts(reference, 1);
    let (mut num, mut den) = (0.0, 0.0);
    for (g, c) in &cand1 {
        let w = weight(g[0]);
        num += w * (*c).min(ref1.get(g).copied().unwrap_or(0)) as f64;
        den += w * *c as f64;
    }
    precisions.push(if den > 0.0 { num / den } else { 0.0 });

    for n in 2..=max_order {
        let (m, t) = clipped(candidate, reference, n);
        precisions.push((m + 1.0) / (t + 1.0));
    }
    combine(&precisions, candidate.len(), reference.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_one() {
        let t = ["def", "f", "(", ")", ":"];
        assert!((bleu(&t, &t, 4) - 1.0).abs() < 1e-12);
        assert!((bleu(&["x"], &["x"], 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(bleu(&["a", "b"], &["c", "d"], 4), 0.0);
        assert_eq!(bleu(&[], &["c"], 4), 0.0);
    }

    #[test]
    fn hand_computed_value() {
        // cand "the cat sat", ref "the cat sat down"
        // p1 = 3/3, p2 = (2+1)/(2+1), p3 = (1+1)/(1+1), p4 = (0+1)/(0+1)
        // BP = exp(1 - 4/3)
        let got = bleu(&["the", "cat", "sat"], &["the", "cat", "sat", "down"], 4);
        assert!((got - (1.0_f64 - 4.0 / 3.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn keyword_weights_change_unigram_precision() {
        // cand "return x", ref "return y"; keyword "return" weight 1, other 0.2.
        // p1 = 1 / (1 + 0.2), p2 = (0+1)/(1+1); BP = 1.
        let cand = ["return", "x"];
        let reference = ["return", "y"];
        let w = |t: &str| if t == "return" { 1.0 } else { 0.2 };
        let expected = ((1.0_f64 / 1.2).ln() / 2.0 + (0.5_f64).ln() / 2.0).exp();
        assert!((weighted_bleu(&cand, &reference, 2, w) - expected).abs() < 1e-12);
    }
}
