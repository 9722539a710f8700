//! Tree-sitter grammars shared by the code splitter and the CodeBLEU comparator.

use std::fmt;

use tree_sitter::{Node, Parser, Tree};

use crate::error::SplitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Language {
    Python,
    Java,
}

impl Language {
    /// Resolves a `language_hint`; `None` selects Python.
    pub fn from_hint(hint: Option<&str>) -> Result<Self, SplitError> {
        match hint.map(|h| h.trim().to_ascii_lowercase()) {
            None => Ok(Language::Python),
            Some(h) => match h.as_str() {
                "" | "python" | "py" | "python3" => Ok(Language::Python),
                "java" => Ok(Language::Java),
                _ => Err(SplitError::UnsupportedLanguage(h)),
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Java => "java",
        }
    }

    fn ts_language(&self) -> tree_sitter::Language {
        match self {
            Language::Python => tree_sitter_python::LANGUAGE.into(),
            Language::Java => tree_sitter_java::LANGUAGE.into(),
        }
    }

    pub fn keywords(&self) -> &'static [&'static str] {
        match self {
            Language::Python => PYTHON_KEYWORDS,
            Language::Java => JAVA_KEYWORDS,
        }
    }

    pub fn is_keyword(&self, token: &str) -> bool {
        self.keywords().contains(&token)
    }

    pub fn parse(&self, text: &str) -> Result<Tree, SplitError> {
        let mut parser = Parser::new();
        parser
            .set_language(&self.ts_language())
            .map_err(|e| SplitError::Parse(e.to_string()))?;
        parser
            .parse(text, None)
            .ok_or_else(|| SplitError::Parse(format!("{} parser returned no tree", self.name())))
    }

    pub(crate) fn is_comment(&self, kind: &str) -> bool {
        matches!(kind, "comment" | "line_comment" | "block_comment")
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pre-order walk over every node of the tree.
pub(crate) fn preorder<'t>(root: Node<'t>) -> Vec<Node<'t>> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        out.push(node);
        let mut cursor = node.walk();
        let children: Vec<Node<'t>> = node.children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
    out
}

const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in",
    "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with",
    "yield",
];

const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while", "true", "false", "null", "var",
];
