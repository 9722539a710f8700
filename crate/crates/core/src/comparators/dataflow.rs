//! Def-use triples for the data-flow component of CodeBLEU.
//!
//! Identifier occurrences are visited in evaluation order (right-hand sides
//! before the targets they bind). Each visit gets a site ordinal; a use is
//! linked to the most recent definition of the same name. Variable names are
//! replaced by `var_k` in order of first appearance, so a consistent rename
//! leaves the triples unchanged.

use std::collections::HashMap;

use tree_sitter::Node;

use crate::error::SplitError;
use crate::grammar::Language;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DefUse {
    pub variable: String,
    pub def_site: usize,
    pub use_site: usize,
}

#[derive(Default)]
struct Walker<'s> {
    src: &'s [u8],
    next_site: usize,
    defs: HashMap<String, usize>,
    names: HashMap<String, usize>,
    triples: Vec<DefUse>,
}

impl<'s> Walker<'s> {
    fn text(&self, node: Node<'_>) -> String {
        String::from_utf8_lossy(&self.src[node.byte_range()]).into_owned()
    }

    fn normalized(&mut self, name: &str) -> String {
        let k = self.names.len();
        let k = *self.names.entry(name.to_string()).or_insert(k);
        format!("var_{k}")
    }

    fn site(&mut self) -> usize {
        self.next_site += 1;
        self.next_site - 1
    }

    fn define(&mut self, node: Node<'_>) {
        let name = self.text(node);
        let var = self.normalized(&name);
        let site = self.site();
        self.defs.insert(var, site);
    }

    fn use_(&mut self, node: Node<'_>) {
        let name = self.text(node);
        let var = self.normalized(&name);
        let site = self.site();
        if let Some(&def_site) = self.defs.get(&var) {
            self.triples.push(DefUse {
                variable: var,
                def_site,
                use_site: site,
            });
        }
    }

    /// `x += 1`: one occurrence that reads and then rebinds `x`.
    fn use_and_define(&mut self, node: Node<'_>) {
        let name = self.text(node);
        let var = self.normalized(&name);
        let site = self.site();
        if let Some(&def_site) = self.defs.get(&var) {
            self.triples.push(DefUse {
                variable: var.clone(),
                def_site,
                use_site: site,
            });
        }
        self.defs.insert(var, site);
    }

    fn walk_children(&mut self, node: Node<'_>, lang: Language) {
        let mut cursor = node.walk();
        let children: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
        for c in children {
            self.walk(c, lang);
        }
    }

    fn walk_field(&mut self, node: Node<'_>, field: &str, lang: Language) {
        if let Some(c) = node.child_by_field_name(field) {
            self.walk(c, lang);
        }
    }

    fn walk(&mut self, node: Node<'_>, lang: Language) {
        match lang {
            Language::Python => self.walk_python(node),
            Language::Java => self.walk_java(node),
        }
    }

    fn walk_python(&mut self, node: Node<'_>) {
        let lang = Language::Python;
        match node.kind() {
            "identifier" => self.use_(node),
            "assignment" => {
                self.walk_field(node, "right", lang);
                if let Some(left) = node.child_by_field_name("left") {
                    self.bind_python(left);
                }
            }
            "augmented_assignment" => {
                self.walk_field(node, "right", lang);
                match node.child_by_field_name("left") {
                    Some(l) if l.kind() == "identifier" => self.use_and_define(l),
                    Some(l) => self.walk_python(l),
                    None => {}
                }
            }
            "for_statement" | "for_in_clause" => {
                self.walk_field(node, "right", lang);
                if let Some(left) = node.child_by_field_name("left") {
                    self.bind_python(left);
                }
                self.walk_field(node, "body", lang);
                self.walk_field(node, "alternative", lang);
            }
            "list_comprehension" | "set_comprehension" | "generator_expression" | "dictionary_comprehension" => {
                // Clauses bind before the element expression reads.
                let mut cursor = node.walk();
                let children: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
                for c in children.iter().filter(|c| matches!(c.kind(), "for_in_clause" | "if_clause")) {
                    self.walk_python(*c);
                }
                for c in children.iter().filter(|c| !matches!(c.kind(), "for_in_clause" | "if_clause")) {
                    self.walk_python(*c);
                }
            }
            "as_pattern" => {
                let mut cursor = node.walk();
                let children: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
                for c in &children {
                    if c.kind() == "as_pattern_target" {
                        self.bind_python(*c);
                    } else {
                        self.walk_python(*c);
                    }
                }
            }
            "named_expression" => {
                self.walk_field(node, "value", lang);
                if let Some(n) = node.child_by_field_name("name") {
                    self.define(n);
                }
            }
            "function_definition" => {
                if let Some(n) = node.child_by_field_name("name") {
                    self.define(n);
                }
                self.walk_field(node, "parameters", lang);
                self.walk_field(node, "body", lang);
            }
            "lambda" => {
                self.walk_field(node, "parameters", lang);
                self.walk_field(node, "body", lang);
            }
            "parameters" | "lambda_parameters" => {
                let mut cursor = node.walk();
                let children: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
                for p in children {
                    self.bind_parameter(p);
                }
            }
            "keyword_argument" => self.walk_field(node, "value", lang),
            "attribute" => self.walk_field(node, "object", lang),
            "type" | "comment" | "import_statement" | "import_from_statement" | "global_statement"
            | "nonlocal_statement" => {}
            _ => self.walk_children(node, lang),
        }
    }

    fn bind_parameter(&mut self, p: Node<'_>) {
        match p.kind() {
            "identifier" => self.define(p),
            "default_parameter" | "typed_default_parameter" => {
                self.walk_field(p, "value", Language::Python);
                if let Some(n) = p.child_by_field_name("name") {
                    self.bind_parameter(n);
                }
            }
            "typed_parameter" | "list_splat_pattern" | "dictionary_splat_pattern" => {
                let mut cursor = p.walk();
                let first = p.named_children(&mut cursor).find(|c| c.kind() != "type");
                if let Some(c) = first {
                    self.bind_parameter(c);
                }
            }
            _ => {}
        }
    }

    fn bind_python(&mut self, target: Node<'_>) {
        match target.kind() {
            "identifier" => self.define(target),
            "pattern_list" | "tuple_pattern" | "list_pattern" | "tuple" | "list" | "parenthesized_expression"
            | "list_splat_pattern" | "list_splat" | "as_pattern_target" => {
                let mut cursor = target.walk();
                let children: Vec<Node<'_>> = target.named_children(&mut cursor).collect();
                for c in children {
                    self.bind_python(c);
                }
            }
            _ => self.walk_python(target),
        }
    }

    fn walk_java(&mut self, node: Node<'_>) {
        let lang = Language::Java;
        match node.kind() {
            "identifier" => self.use_(node),
            "formal_parameter" | "catch_formal_parameter" => {
                if let Some(n) = node.child_by_field_name("name") {
                    self.define(n);
                } else {
                    let mut cursor = node.walk();
                    let last = node.named_children(&mut cursor).filter(|c| c.kind() == "identifier").last();
                    if let Some(n) = last {
                        self.define(n);
                    }
                }
            }
            "variable_declarator" => {
                self.walk_field(node, "value", lang);
                if let Some(n) = node.child_by_field_name("name") {
                    self.define(n);
                }
            }
            "assignment_expression" => {
                self.walk_field(node, "right", lang);
                let compound = node
                    .child_by_field_name("operator")
                    .is_some_and(|op| op.kind() != "=");
                match node.child_by_field_name("left") {
                    Some(l) if l.kind() == "identifier" && compound => self.use_and_define(l),
                    Some(l) if l.kind() == "identifier" => self.define(l),
                    Some(l) => self.walk_java(l),
                    None => {}
                }
            }
            "update_expression" => {
                let mut cursor = node.walk();
                let target = node.named_children(&mut cursor).next();
                match target {
                    Some(t) if t.kind() == "identifier" => self.use_and_define(t),
                    Some(t) => self.walk_java(t),
                    None => {}
                }
            }
            "enhanced_for_statement" => {
                self.walk_field(node, "value", lang);
                if let Some(n) = node.child_by_field_name("name") {
                    self.define(n);
                }
                self.walk_field(node, "body", lang);
            }
            "lambda_expression" => {
                if let Some(params) = node.child_by_field_name("parameters") {
                    if params.kind() == "identifier" {
                        self.define(params);
                    } else {
                        let mut cursor = params.walk();
                        let children: Vec<Node<'_>> = params.named_children(&mut cursor).collect();
                        for c in children {
                            if c.kind() == "identifier" {
                                self.define(c);
                            } else {
                                self.walk_java(c);
                            }
                        }
                    }
                }
                self.walk_field(node, "body", lang);
            }
            "method_declaration" | "constructor_declaration" => {
                self.walk_field(node, "parameters", lang);
                self.walk_field(node, "body", lang);
            }
            "class_declaration" | "interface_declaration" | "enum_declaration" => {
                self.walk_field(node, "body", lang)
            }
            "field_access" => self.walk_field(node, "object", lang),
            "method_invocation" => {
                self.walk_field(node, "object", lang);
                self.walk_field(node, "arguments", lang);
            }
            "line_comment" | "block_comment" | "import_declaration" | "package_declaration" => {}
            _ => self.walk_children(node, lang),
        }
    }
}

/// Def-use triples of `code`, or an error when no tree could be produced.
pub fn def_use_triples(code: &str, lang: Language) -> Result<Vec<DefUse>, SplitError> {
    let tree = lang.parse(code)?;
    Ok(triples_of(tree.root_node(), code, lang))
}

pub(crate) fn triples_of(root: Node<'_>, code: &str, lang: Language) -> Vec<DefUse> {
    let mut w = Walker {
        src: code.as_bytes(),
        ..Walker::default()
    };
    w.walk(root, lang);
    w.triples
}

/// Share of reference triples also present in the candidate (multiset
/// intersection). `None` when the reference has no data flow.
pub fn dataflow_match(candidate: &[DefUse], reference: &[DefUse]) -> Option<f64> {
    if reference.is_empty() {
        return None;
    }
    let mut pool: HashMap<&DefUse, usize> = HashMap::new();
    for t in candidate {
        *pool.entry(t).or_insert(0) += 1;
    }
    let mut matched = 0usize;
    for t in reference {
        if let Some(c) = pool.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    Some(matched as f64 / reference.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: usize, d: usize, u: usize) -> DefUse {
        DefUse {
            variable: format!("var_{v}"),
            def_site: d,
            use_site: u,
        }
    }

    #[test]
    fn python_straight_line() {
        // sites: f=0 (def, var_0), x=1 (param, var_1), x=2 (use), y=3 (def, var_2), y=4 (use)
        let code = "def f(x):\n    y = x + 1\n    return y\n";
        assert_eq!(def_use_triples(code, Language::Python).unwrap(), vec![t(1, 1, 2), t(2, 3, 4)]);
    }

    #[test]
    fn consistent_rename_preserves_triples() {
        let a = "def f(x):\n    total = x * 2\n    total += x\n    return total\n";
        let b = "def f(x):\n    acc = x * 2\n    acc += x\n    return acc\n";
        let ta = def_use_triples(a, Language::Python).unwrap();
        assert!(!ta.is_empty());
        assert_eq!(ta, def_use_triples(b, Language::Python).unwrap());
    }

    #[test]
    fn augmented_assignment_reads_then_rebinds() {
        // f=0, n=1, n=2 (use of param; then rebinds), n=3 (use)
        let code = "def f(n):\n    n += 1\n    return n\n";
        assert_eq!(def_use_triples(code, Language::Python).unwrap(), vec![t(1, 1, 2), t(1, 2, 3)]);
    }

    #[test]
    fn loops_and_comprehensions_bind_targets() {
        let code = "def f(xs):\n    out = [v * 2 for v in xs]\n    for i, v in enumerate(out):\n        print(i, v)\n";
        let triples = def_use_triples(code, Language::Python).unwrap();
        // xs used in comprehension, v used in element, out used in loop, i and v used in print
        assert_eq!(triples.len(), 5);
    }

    #[test]
    fn attributes_and_keywords_are_not_variables() {
        let code = "def f(o):\n    return o.size(key=1)\n";
        assert_eq!(def_use_triples(code, Language::Python).unwrap(), vec![t(1, 1, 2)]);
    }

    #[test]
    fn java_declarations_and_updates() {
        let code = "class A { int f(int a) { int s = a + 1; s++; return s; } }";
        // a=0 (param), a=1 (use), s=2 (def), s=3 (use+def), s=4 (use)
        assert_eq!(
            def_use_triples(code, Language::Java).unwrap(),
            vec![t(0, 0, 1), t(1, 2, 3), t(1, 3, 4)]
        );
    }

    #[test]
    fn match_ratio() {
        let r = vec![t(0, 0, 1), t(0, 0, 2), t(1, 3, 4)];
        let c = vec![t(0, 0, 1), t(1, 3, 4), t(1, 3, 4)];
        assert_eq!(dataflow_match(&c, &r), Some(2.0 / 3.0));
        assert_eq!(dataflow_match(&c, &[]), None);
        assert_eq!(dataflow_match(&[], &r), Some(0.0));
    }
}
