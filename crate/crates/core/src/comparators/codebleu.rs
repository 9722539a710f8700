use std::collections::HashSet;

use tree_sitter::Node;

use super::bleu::{bleu, weighted_bleu};
use super::dataflow::{dataflow_match, triples_of};
use super::{tokenize, ComparatorConfig};
use crate::grammar::{preorder, Language};

/// Per-component CodeBLEU scores. `None` marks a component that is undefined
/// for the reference and therefore dropped from the weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeBleuBreakdown {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub syntax: Option<f64>,
    pub dataflow: Option<f64>,
    pub total: f64,
}

/// S-expressions (leaf text elided) of every node that has children.
fn subtrees(root: Node<'_>) -> Vec<String> {
    preorder(root)
        .into_iter()
        .filter(|n| n.child_count() > 0)
        .map(|n| n.to_sexp())
        .collect()
}

/// Matched reference subtrees over total reference subtrees.
pub fn syntax_match(candidate: Node<'_>, reference: Node<'_>) -> f64 {
    let reference = subtrees(reference);
    if reference.is_empty() {
        return 0.0;
    }
    let candidate: HashSet<String> = subtrees(candidate).into_iter().collect();
    let matched = reference.iter().filter(|s| candidate.contains(*s)).count();
    matched as f64 / reference.len() as f64
}

pub fn codebleu_breakdown(
    candidate: &str,
    reference: &str,
    lang: Language,
    cfg: &ComparatorConfig,
) -> CodeBleuBreakdown {
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    let ngram = bleu(&cand_tokens, &ref_tokens, cfg.ngram_order);
    let weighted_ngram = weighted_bleu(&cand_tokens, &ref_tokens, cfg.ngram_order, |t| {
        if lang.is_keyword(t) {
            cfg.keyword_weight
        } else {
            cfg.base_weight
        }
    });

    let (syntax, dataflow) = match lang.parse(reference) {
        Ok(ref_tree) if !ref_tree.root_node().has_error() => {
            let ref_root = ref_tree.root_node();
            let ref_flow = triples_of(ref_root, reference, lang);
            match lang.parse(candidate) {
                Ok(cand_tree) if !cand_tree.root_node().has_error() => {
                    let cand_root = cand_tree.root_node();
                    let cand_flow = triples_of(cand_root, candidate, lang);
                    (
                        Some(syntax_match(cand_root, ref_root)),
                        dataflow_match(&cand_flow, &ref_flow),
                    )
                }
                // Candidate does not parse: defined components score zero.
                _ => (Some(0.0), (!ref_flow.is_empty()).then_some(0.0)),
            }
        }
        _ => (None, None),
    };

    let parts = [Some(ngram), Some(weighted_ngram), syntax, dataflow];
    let (num, den) = parts
        .iter()
        .zip(cfg.codebleu_weights.iter())
        .filter_map(|(c, w)| c.map(|c| (c * w, *w)))
        .fold((0.0, 0.0), |(n, d), (cw, w)| (n + cw, d + w));
    let total = if candidate.is_empty() || den <= 0.0 {
        0.0
    } else {
        (num / den).clamp(0.0, 1.0)
    };
    CodeBleuBreakdown {
        ngram,
        weighted_ngram,
        syntax,
        dataflow,
        total,
    }
}

/// CodeBLEU of `candidate` against `reference`. An empty candidate scores 0
/// and a non-empty candidate equal to its reference scores 1.
pub fn codebleu(candidate: &str, reference: &str, lang: Language, cfg: &ComparatorConfig) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    if candidate == reference {
        return 1.0;
    }
    codebleu_breakdown(candidate, reference, lang, cfg).total
}
