//! Grammar-driven parsing, local-variable discovery, and offset-safe renaming.
//!
//! Every snippet is treated at function granularity: the first top-level
//! function (Python) or method/constructor (Java) is the analysis root.
//! Variable matching is name-based within that function body; nested scopes
//! binding the same name are treated as one variable.

mod java;
mod python;

use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser, Tree};

use crate::error::SyntaxError;

/// Languages with a bundled grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Java,
}

impl Language {
    pub fn name(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Java => "java",
        }
    }

    pub fn from_name(name: &str) -> Option<Language> {
        match name.to_ascii_lowercase().as_str() {
            "python" => Some(Language::Python),
            "java" => Some(Language::Java),
            _ => None,
        }
    }

    fn grammar(self) -> tree_sitter::Language {
        match self {
            Language::Python => tree_sitter_python::LANGUAGE.into(),
            Language::Java => tree_sitter_java::LANGUAGE.into(),
        }
    }

    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            Language::Python => python::KEYWORDS,
            Language::Java => java::KEYWORDS,
        }
    }

    /// Lexical identifier check for names this toolkit introduces.
    /// Reserved words are rejected alongside malformed names.
    pub fn is_valid_identifier(self, name: &str) -> bool {
        if name.is_empty() || self.keywords().contains(&name) {
            return false;
        }
        let dollar = matches!(self, Language::Java);
        let mut chars = name.chars();
        let first = chars.next().unwrap();
        if !(first.is_ascii_alphabetic() || first == '_' || (dollar && first == '$')) {
            return false;
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || (dollar && c == '$'))
    }
}

/// One function-level snippet of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSample {
    pub id: String,
    pub code: String,
    pub language: Language,
}

impl CodeSample {
    pub fn new(id: impl Into<String>, code: impl Into<String>, language: Language) -> Self {
        CodeSample {
            id: id.into(),
            code: code.into(),
            language,
        }
    }
}

/// Concrete syntax tree of a sample, anchored at its first function.
pub struct SyntaxTree {
    tree: Tree,
    language: Language,
    function_range: (usize, usize),
}

impl SyntaxTree {
    pub fn root_node(&self) -> Node<'_> {
        self.tree.root_node()
    }

    /// The analyzed function/method node.
    pub fn function_node(&self) -> Node<'_> {
        find_function(self.tree.root_node(), self.language)
            .expect("function node present by construction")
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn function_range(&self) -> (usize, usize) {
        self.function_range
    }
}

fn new_parser(language: Language) -> Parser {
    let mut parser = Parser::new();
    parser
        .set_language(&language.grammar())
        .expect("bundled grammar is ABI-compatible");
    parser
}

fn find_function<'a>(root: Node<'a>, language: Language) -> Option<Node<'a>> {
    let function_kinds: &[&str] = match language {
        Language::Python => &["function_definition"],
        Language::Java => &["method_declaration", "constructor_declaration"],
    };
    let mut stack = vec![root];
    // Depth-first in document order; the first hit is the first function.
    while let Some(node) = stack.pop() {
        if function_kinds.contains(&node.kind()) {
            return Some(node);
        }
        let mut cursor = node.walk();
        let children: Vec<Node> = node.children(&mut cursor).collect();
        for child in children.into_iter().rev() {
            stack.push(child);
        }
    }
    None
}

/// Parse a sample into a syntax tree.
///
/// Fails when the grammar reports error or missing nodes, or when the snippet
/// contains no function definition. Such samples are excluded from carrier
/// candidacy and pass through any corpus rewrite untouched.
pub fn parse(sample: &CodeSample) -> Result<SyntaxTree, SyntaxError> {
    let mut parser = new_parser(sample.language);
    let tree = parser
        .parse(&sample.code, None)
        .ok_or_else(|| SyntaxError::ParseError {
            id: sample.id.clone(),
        })?;
    if tree.root_node().has_error() {
        return Err(SyntaxError::ParseError {
            id: sample.id.clone(),
        });
    }
    let function =
        find_function(tree.root_node(), sample.language).ok_or_else(|| SyntaxError::ParseError {
            id: sample.id.clone(),
        })?;
    let function_range = (function.start_byte(), function.end_byte());
    Ok(SyntaxTree {
        tree,
        language: sample.language,
        function_range,
    })
}

/// A discovered local variable: every occurrence byte-range decodes to `name`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableEntry {
    pub name: String,
    pub first_offset: usize,
    pub occurrences: Vec<(usize, usize)>,
    pub is_parameter: bool,
}

impl VariableEntry {
    pub fn frequency(&self) -> usize {
        self.occurrences.len()
    }
}

/// Variables of one function, ordered by first occurrence byte offset.
#[derive(Debug, Clone, Default)]
pub struct VariableTable {
    entries: Vec<VariableEntry>,
}

impl VariableTable {
    pub fn entries(&self) -> &[VariableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&VariableEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }
}

/// A binding site: a position where a name is introduced or (re)bound.
#[derive(Debug, Clone)]
pub(crate) struct BindingSite {
    pub name: String,
    pub is_parameter: bool,
}

pub(crate) fn collect_binding_sites(root: Node, code: &str, language: Language) -> Vec<BindingSite> {
    match language {
        Language::Python => python::collect_binding_sites(root, code),
        Language::Java => java::collect_binding_sites(root, code),
    }
}

fn collect_occurrences(
    root: Node,
    code: &str,
    language: Language,
    names: &std::collections::HashSet<String>,
) -> Vec<(String, usize, usize)> {
    match language {
        Language::Python => python::collect_occurrences(root, code, names),
        Language::Java => java::collect_occurrences(root, code, names),
    }
}

fn build_table(root: Node, code: &str, language: Language) -> VariableTable {
    let sites = collect_binding_sites(root, code, language);
    let mut names = std::collections::HashSet::new();
    let mut is_param: std::collections::HashMap<String, bool> = std::collections::HashMap::new();
    for site in &sites {
        names.insert(site.name.clone());
        let flag = is_param.entry(site.name.clone()).or_insert(false);
        *flag = *flag || site.is_parameter;
    }
    let mut occurrences = collect_occurrences(root, code, language, &names);
    occurrences.sort_by_key(|(_, start, _)| *start);

    let mut entries: Vec<VariableEntry> = Vec::new();
    for (name, start, end) in occurrences {
        match entries.iter_mut().find(|e| e.name == name) {
            Some(entry) => entry.occurrences.push((start, end)),
            None => entries.push(VariableEntry {
                is_parameter: is_param.get(&name).copied().unwrap_or(false),
                name,
                first_offset: start,
                occurrences: vec![(start, end)],
            }),
        }
    }
    entries.sort_by_key(|e| e.first_offset);
    VariableTable { entries }
}

/// Extract parameters and locally bound names from the analyzed function,
/// ordered by first occurrence byte offset. Attribute/field member names,
/// call targets that are never bound, keywords, and string contents are
/// excluded.
pub fn extract_variables(tree: &SyntaxTree, sample: &CodeSample) -> VariableTable {
    build_table(tree.function_node(), &sample.code, sample.language)
}

/// Lenient variable scan over arbitrary (possibly truncated or erroneous)
/// code: anchors at the whole tree instead of a function node and tolerates
/// error nodes. Used to inspect model prompts.
pub fn scan_variables(code: &str, language: Language) -> VariableTable {
    let mut parser = new_parser(language);
    match parser.parse(code, None) {
        Some(tree) => build_table(tree.root_node(), code, language),
        None => VariableTable::default(),
    }
}

/// Result of a rename pass. `replaced` is 0 when the name was absent.
#[derive(Debug, Clone)]
pub struct RenameOutcome {
    pub sample: CodeSample,
    pub replaced: usize,
}

/// Replace every occurrence of `old` with `new`, in descending offset order
/// so earlier ranges stay valid. No non-identifier bytes change.
pub fn rename(
    sample: &CodeSample,
    table: &VariableTable,
    old: &str,
    new: &str,
) -> Result<RenameOutcome, SyntaxError> {
    if !sample.language.is_valid_identifier(new) {
        return Err(SyntaxError::InvalidIdentifier {
            name: new.to_string(),
            language: sample.language.name().to_string(),
        });
    }
    if new != old && table.contains(new) {
        return Err(SyntaxError::CollisionError {
            name: new.to_string(),
        });
    }
    let entry = match table.get(old) {
        Some(entry) => entry,
        None => {
            return Ok(RenameOutcome {
                sample: sample.clone(),
                replaced: 0,
            })
        }
    };
    if new == old {
        return Ok(RenameOutcome {
            sample: sample.clone(),
            replaced: entry.frequency(),
        });
    }
    let mut ranges = entry.occurrences.clone();
    ranges.sort_by(|a, b| b.0.cmp(&a.0));
    let mut code = sample.code.clone();
    for (start, end) in ranges {
        debug_assert_eq!(&code[start..end], old);
        code.replace_range(start..end, new);
    }
    Ok(RenameOutcome {
        sample: CodeSample {
            id: sample.id.clone(),
            code,
            language: sample.language,
        },
        replaced: entry.frequency(),
    })
}

/// Per-language naming conventions for compound variable names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamingConvention {
    SnakeCase,
    CamelCase,
}

impl NamingConvention {
    pub fn name(self) -> &'static str {
        match self {
            NamingConvention::SnakeCase => "snake",
            NamingConvention::CamelCase => "camel",
        }
    }
}

/// Whether `name` is a compound identifier under the given convention:
/// snake_case needs an interior underscore separating two non-empty
/// alphanumeric runs, camelCase an uppercase letter following a lowercase one.
pub fn is_compound(name: &str, convention: NamingConvention) -> bool {
    match convention {
        NamingConvention::SnakeCase => {
            let bytes = name.as_bytes();
            (1..bytes.len().saturating_sub(1)).any(|i| {
                bytes[i] == b'_'
                    && bytes[i - 1].is_ascii_alphanumeric()
                    && bytes[i + 1].is_ascii_alphanumeric()
            })
        }
        NamingConvention::CamelCase => {
            let chars: Vec<char> = name.chars().collect();
            chars
                .windows(2)
                .any(|w| w[0].is_ascii_lowercase() && w[1].is_ascii_uppercase())
        }
    }
}
