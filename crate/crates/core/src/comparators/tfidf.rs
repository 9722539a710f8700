use std::collections::{HashMap, HashSet};

use super::tokenize;

/// Document frequencies over a small corpus of outputs.
#[derive(Debug, Clone, Default)]
pub struct DocumentFrequency {
    n_docs: usize,
    df: HashMap<String, usize>,
}

impl DocumentFrequency {
    pub fn from_documents<'a, I: IntoIterator<Item = &'a str>>(docs: I) -> Self {
        let mut stats = Self::default();
        for doc in docs {
            stats.n_docs += 1;
            let unique: HashSet<&str> = tokenize(doc).into_iter().collect();
            for t in unique {
                *stats.df.entry(t.to_string()).or_insert(0) += 1;
            }
        }
        stats
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`,
    /// strictly positive for every term.
    pub fn idf(&self, term: &str) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df(term) as f64)).ln() + 1.0
    }

    fn vector(&self, text: &str) -> HashMap<String, f64> {
        let mut tf: HashMap<String, f64> = HashMap::new();
        for t in tokenize(text) {
            *tf.entry(t.to_string()).or_insert(0.0) += 1.0;
        }
        for (term, w) in tf.iter_mut() {
            *w *= self.idf(term);
        }
        tf
    }
}

/// Cosine of raw-count TF-IDF vectors; 0 when either vector is all-zero.
/// Byte-equal non-empty inputs score exactly 1.
pub fn tfidf_cosine(a: &str, b: &str, stats: &DocumentFrequency) -> f64 {
    if a == b && !a.is_empty() {
        return 1.0;
    }
    let va = stats.vector(a);
    let vb = stats.vector(b);
    let dot: f64 = va.iter().filter_map(|(t, x)| vb.get(t).map(|y| x * y)).sum();
    let na = va.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = vb.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}
