use tree_sitter::Node;

use crate::error::SplitError;
use crate::grammar::{preorder, Language};
use crate::model::{FeaturePartition, InputDocument};

const JAVA_WRAP_OPEN: &str = "class __FeatureWrapper__ {\n";
const JAVA_WRAP_CLOSE: &str = "\n}\n";

/// Slices a single function at its top-level statements.
///
/// The first feature runs from the start of the input (so any leading
/// comments stay inside it) through the byte before the first body
/// statement, covering the signature and a leading docstring. Every other
/// feature runs from one statement's start byte to the next statement's
/// start byte; the last one runs to the end of the input.
///
/// Inputs without a recognizable function or body statement come back as a
/// single whole-input feature whose splitter name ends in `(degenerate)`.
pub fn split_code(doc: &InputDocument) -> Result<FeaturePartition, SplitError> {
    if doc.text.is_empty() {
        return Err(SplitError::Empty);
    }
    let lang = Language::from_hint(doc.language_hint.as_deref())?;
    let name = format!("code:{lang}");
    let starts = statement_starts(&doc.text, lang)?;
    let starts: Vec<usize> = starts.into_iter().filter(|&s| s > 0 && s < doc.text.len()).collect();
    if starts.is_empty() {
        return Ok(FeaturePartition::whole(&doc.id, &doc.text, format!("{name}(degenerate)")));
    }
    let mut cuts = Vec::with_capacity(starts.len() + 2);
    cuts.push(0);
    cuts.extend(starts);
    cuts.push(doc.text.len());
    cuts.dedup();
    FeaturePartition::from_cuts(&doc.id, &doc.text, &cuts, name).map_err(|e| SplitError::Parse(e.to_string()))
}

/// Start bytes of the top-level body statements of the first function in
/// `text`, excluding a leading docstring and comments. Empty when no
/// function (or no statement) is found.
pub fn statement_starts(text: &str, lang: Language) -> Result<Vec<usize>, SplitError> {
    match lang {
        Language::Python => {
            let tree = lang.parse(text)?;
            Ok(python_function(tree.root_node())
                .map(|f| python_statements(f, lang))
                .unwrap_or_default())
        }
        Language::Java => {
            let tree = lang.parse(text)?;
            if let Some(m) = java_method(tree.root_node()) {
                return Ok(java_statements(m, lang));
            }
            // Bare methods are not valid compilation units; retry inside a class.
            let wrapped = format!("{JAVA_WRAP_OPEN}{text}{JAVA_WRAP_CLOSE}");
            let tree = lang.parse(&wrapped)?;
            let offset = JAVA_WRAP_OPEN.len();
            Ok(java_method(tree.root_node())
                .map(|m| {
                    java_statements(m, lang)
                        .into_iter()
                        .filter(|&s| s >= offset && s - offset < text.len())
                        .map(|s| s - offset)
                        .collect()
                })
                .unwrap_or_default())
        }
    }
}

fn python_function(root: Node<'_>) -> Option<Node<'_>> {
    preorder(root)
        .into_iter()
        .find(|n| n.kind() == "function_definition")
}

fn python_statements(func: Node<'_>, lang: Language) -> Vec<usize> {
    let Some(body) = func.child_by_field_name("body") else {
        return Vec::new();
    };
    let mut cursor = body.walk();
    let stmts: Vec<Node<'_>> = body
        .named_children(&mut cursor)
        .filter(|n| !lang.is_comment(n.kind()))
        .collect();
    let skip = usize::from(stmts.first().is_some_and(|s| is_docstring(*s)));
    stmts[skip..].iter().map(|s| s.start_byte()).collect()
}

fn is_docstring(stmt: Node<'_>) -> bool {
    if stmt.kind() != "expression_statement" || stmt.named_child_count() != 1 {
        return false;
    }
    stmt.named_child(0)
        .is_some_and(|c| matches!(c.kind(), "string" | "concatenated_string"))
}

fn java_method(root: Node<'_>) -> Option<Node<'_>> {
    preorder(root)
        .into_iter()
        .find(|n| matches!(n.kind(), "method_declaration" | "constructor_declaration"))
}

fn java_statements(method: Node<'_>, lang: Language) -> Vec<usize> {
    let Some(body) = method.child_by_field_name("body") else {
        return Vec::new();
    };
    let mut cursor = body.walk();
    body.named_children(&mut cursor)
        .filter(|n| !lang.is_comment(n.kind()))
        .map(|s| s.start_byte())
        .collect()
}
