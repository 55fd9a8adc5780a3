//! Function-level complexity features computed from the syntax tree.
//!
//! Ten features are extracted; the suitability projection consumes the seven
//! retained ones (cc, nloc, tc, vc, dvc, ec, dec). All counting rules are
//! fixed by the per-language node-kind tables below so results are
//! deterministic across releases.

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::syntax::{collect_binding_sites, CodeSample, Language, SyntaxTree};

/// The ten complexity measurements of one function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Extended cyclomatic complexity.
    pub cc: u32,
    /// Non-comment non-blank lines of code.
    pub nloc: u32,
    /// Leaf tokens excluding comments; literals count as one token.
    pub tc: u32,
    /// Maximum level of control nesting.
    pub mlcn: u32,
    /// Maximum depth of the syntax tree under the function node.
    pub mdt: u32,
    /// Calls to unique functions (rightmost identifier of the call target).
    pub ufcc: u32,
    /// Local declarations and parameters (binding sites).
    pub vc: u32,
    /// Distinct names among declarations and parameters.
    pub dvc: u32,
    /// Expression-category nodes.
    pub ec: u32,
    /// Distinct abstracted expressions.
    pub dec: u32,
}

/// Names of the seven features retained for the projection, in order.
pub const RETAINED_FEATURES: [&str; 7] = ["cc", "nloc", "tc", "vc", "dvc", "ec", "dec"];

/// Names of all ten features, in the order they are reported.
pub const ALL_FEATURES: [&str; 10] = [
    "cc", "nloc", "tc", "mlcn", "mdt", "ufcc", "vc", "dvc", "ec", "dec",
];

impl FeatureVector {
    pub fn retained(&self) -> [f64; 7] {
        [
            self.cc as f64,
            self.nloc as f64,
            self.tc as f64,
            self.vc as f64,
            self.dvc as f64,
            self.ec as f64,
            self.dec as f64,
        ]
    }

    pub fn all(&self) -> [f64; 10] {
        [
            self.cc as f64,
            self.nloc as f64,
            self.tc as f64,
            self.mlcn as f64,
            self.mdt as f64,
            self.ufcc as f64,
            self.vc as f64,
            self.dvc as f64,
            self.ec as f64,
            self.dec as f64,
        ]
    }
}

// --- versioned per-language node-kind tables ------------------------------

/// Branch constructs contributing to extended cyclomatic complexity, beyond
/// the short-circuit operators handled separately.
fn branch_kinds(language: Language) -> &'static [&'static str] {
    match language {
        Language::Python => &[
            "if_statement",
            "elif_clause",
            "conditional_expression",
            "while_statement",
            "for_statement",
            "for_in_clause",
            "if_clause",
            "except_clause",
            "case_clause",
        ],
        Language::Java => &[
            "if_statement",
            "ternary_expression",
            "while_statement",
            "do_statement",
            "for_statement",
            "enhanced_for_statement",
            "catch_clause",
        ],
    }
}

/// Control structures counted for nesting depth.
fn control_kinds(language: Language) -> &'static [&'static str] {
    match language {
        Language::Python => &[
            "if_statement",
            "while_statement",
            "for_statement",
            "try_statement",
            "with_statement",
            "match_statement",
        ],
        Language::Java => &[
            "if_statement",
            "while_statement",
            "do_statement",
            "for_statement",
            "enhanced_for_statement",
            "switch_expression",
            "try_statement",
            "synchronized_statement",
        ],
    }
}

/// Literal node kinds: abstracted to one token and one `⟨LIT⟩` placeholder.
fn literal_kinds(language: Language) -> &'static [&'static str] {
    match language {
        Language::Python => &[
            "string",
            "concatenated_string",
            "integer",
            "float",
            "true",
            "false",
            "none",
            "ellipsis",
        ],
        Language::Java => &[
            "decimal_integer_literal",
            "hex_integer_literal",
            "octal_integer_literal",
            "binary_integer_literal",
            "decimal_floating_point_literal",
            "hex_floating_point_literal",
            "character_literal",
            "string_literal",
            "text_block",
            "true",
            "false",
            "null_literal",
        ],
    }
}

/// Expression-category node kinds counted for ec/dec. Identifiers and
/// literals are themselves expression nodes; grouping parentheses and
/// assignment forms are not.
fn expression_kinds(language: Language) -> &'static [&'static str] {
    match language {
        Language::Python => &[
            "identifier",
            "string",
            "concatenated_string",
            "integer",
            "float",
            "true",
            "false",
            "none",
            "ellipsis",
            "binary_operator",
            "boolean_operator",
            "comparison_operator",
            "unary_operator",
            "not_operator",
            "conditional_expression",
            "call",
            "attribute",
            "subscript",
            "lambda",
            "await",
            "named_expression",
            "tuple",
            "list",
            "set",
            "dictionary",
            "list_comprehension",
            "set_comprehension",
            "dictionary_comprehension",
            "generator_expression",
        ],
        Language::Java => &[
            "identifier",
            "decimal_integer_literal",
            "hex_integer_literal",
            "octal_integer_literal",
            "binary_integer_literal",
            "decimal_floating_point_literal",
            "hex_floating_point_literal",
            "character_literal",
            "string_literal",
            "text_block",
            "true",
            "false",
            "null_literal",
            "binary_expression",
            "unary_expression",
            "update_expression",
            "ternary_expression",
            "instanceof_expression",
            "cast_expression",
            "lambda_expression",
            "method_invocation",
            "method_reference",
            "field_access",
            "array_access",
            "object_creation_expression",
            "array_creation_expression",
            "array_initializer",
        ],
    }
}

fn comment_kinds(language: Language) -> &'static [&'static str] {
    match language {
        Language::Python => &["comment"],
        Language::Java => &["line_comment", "block_comment"],
    }
}

// --- token walk ------------------------------------------------------------

/// One lexical token of the analyzed function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub is_identifier: bool,
    pub start_row: usize,
    pub end_row: usize,
}

fn walk_tokens(node: Node, language: Language, out: &mut Vec<Token>) {
    let kind = node.kind();
    if comment_kinds(language).contains(&kind) {
        return;
    }
    if literal_kinds(language).contains(&kind) || node.child_count() == 0 {
        if node.start_byte() < node.end_byte() {
            out.push(Token {
                start: node.start_byte(),
                end: node.end_byte(),
                is_identifier: kind == "identifier",
                start_row: node.start_position().row,
                end_row: node.end_position().row,
            });
        }
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        walk_tokens(child, language, out);
    }
}

/// Lexical tokens of the sample's analyzed function, in source order.
/// Comments are excluded and literals are atomic.
pub fn tokens(tree: &SyntaxTree, sample: &CodeSample) -> Vec<Token> {
    let mut out = Vec::new();
    walk_tokens(tree.function_node(), sample.language, &mut out);
    out
}

// --- feature extraction ----------------------------------------------------

fn count_branches(node: Node, language: Language) -> u32 {
    let mut count = 0;
    let kind = node.kind();
    if branch_kinds(language).contains(&kind) {
        count += 1;
    }
    match language {
        Language::Python => {
            if kind == "boolean_operator" {
                count += 1;
            }
        }
        Language::Java => {
            if kind == "binary_expression" {
                if let Some(op) = node.child_by_field_name("operator") {
                    if matches!(op.kind(), "&&" | "||") {
                        count += 1;
                    }
                }
            }
            // Each `case` arm of a switch (default excluded).
            if kind == "switch_label" && node.child(0).map(|c| c.kind()) == Some("case") {
                count += 1;
            }
        }
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        count += count_branches(child, language);
    }
    count
}

fn max_control_nesting(node: Node, language: Language, depth: u32) -> u32 {
    let here = if control_kinds(language).contains(&node.kind()) {
        depth + 1
    } else {
        depth
    };
    let mut max = here;
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        max = max.max(max_control_nesting(child, language, here));
    }
    max
}

fn max_tree_depth(node: Node, depth: u32) -> u32 {
    let mut max = depth;
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        max = max.max(max_tree_depth(child, depth + 1));
    }
    max
}

/// Rightmost identifier leaf of a call target node.
fn rightmost_identifier<'c>(node: Node, code: &'c str) -> Option<&'c str> {
    if node.kind() == "identifier" {
        return Some(&code[node.byte_range()]);
    }
    let mut cursor = node.walk();
    let children: Vec<Node> = node.children(&mut cursor).collect();
    for child in children.into_iter().rev() {
        if let Some(found) = rightmost_identifier(child, code) {
            return Some(found);
        }
    }
    None
}

fn collect_callees<'c>(
    node: Node,
    code: &'c str,
    language: Language,
    out: &mut std::collections::BTreeSet<&'c str>,
) {
    match (language, node.kind()) {
        (Language::Python, "call") => {
            if let Some(function) = node.child_by_field_name("function") {
                let target = match function.kind() {
                    "identifier" => Some(&code[function.byte_range()]),
                    "attribute" => function
                        .child_by_field_name("attribute")
                        .map(|n| &code[n.byte_range()]),
                    _ => None,
                };
                if let Some(name) = target {
                    out.insert(name);
                }
            }
        }
        (Language::Java, "method_invocation") => {
            if let Some(name) = node.child_by_field_name("name") {
                out.insert(&code[name.byte_range()]);
            }
        }
        (Language::Java, "object_creation_expression") => {
            if let Some(ty) = node.child_by_field_name("type") {
                if let Some(name) = rightmost_type_identifier(ty, code) {
                    out.insert(name);
                }
            }
        }
        _ => {}
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_callees(child, code, language, out);
    }
}

fn rightmost_type_identifier<'c>(node: Node, code: &'c str) -> Option<&'c str> {
    if node.kind() == "type_identifier" {
        return Some(&code[node.byte_range()]);
    }
    let mut cursor = node.walk();
    let children: Vec<Node> = node.children(&mut cursor).collect();
    for child in children.into_iter().rev() {
        if let Some(found) = rightmost_type_identifier(child, code) {
            return Some(found);
        }
    }
    None
}

/// Canonical abstraction of one expression node: identifiers become ⟨ID⟩,
/// literals ⟨LIT⟩, other tokens keep their text, joined without whitespace.
fn abstract_node(node: Node, code: &str, language: Language, out: &mut String) {
    let kind = node.kind();
    if comment_kinds(language).contains(&kind) {
        return;
    }
    if kind == "identifier" {
        out.push_str("\u{27e8}ID\u{27e9}");
        return;
    }
    if literal_kinds(language).contains(&kind) {
        out.push_str("\u{27e8}LIT\u{27e9}");
        return;
    }
    if node.child_count() == 0 {
        out.push_str(&code[node.byte_range()]);
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        abstract_node(child, code, language, out);
    }
}

fn collect_expressions(node: Node, code: &str, language: Language, out: &mut Vec<String>) {
    if expression_kinds(language).contains(&node.kind()) {
        let mut canon = String::new();
        abstract_node(node, code, language, &mut canon);
        out.push(canon);
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_expressions(child, code, language, out);
    }
}

/// One canonical string per expression-category node in the analyzed
/// function. ec is the length of this list, dec the number of distinct
/// strings.
pub fn abstract_expressions(tree: &SyntaxTree, sample: &CodeSample) -> Vec<String> {
    let mut out = Vec::new();
    collect_expressions(
        tree.function_node(),
        &sample.code,
        sample.language,
        &mut out,
    );
    out
}

/// Compute all ten features for the sample's analyzed function.
pub fn extract_features(tree: &SyntaxTree, sample: &CodeSample) -> FeatureVector {
    let language = sample.language;
    let function = tree.function_node();
    let code = sample.code.as_str();

    let cc = 1 + count_branches(function, language);
    let mlcn = max_control_nesting(function, language, 0);
    let mdt = max_tree_depth(function, 1);

    let toks = tokens(tree, sample);
    let tc = toks.len() as u32;
    let mut rows = std::collections::BTreeSet::new();
    for token in &toks {
        for row in token.start_row..=token.end_row {
            rows.insert(row);
        }
    }
    let nloc = rows.len() as u32;

    let mut callees = std::collections::BTreeSet::new();
    collect_callees(function, code, language, &mut callees);
    let ufcc = callees.len() as u32;

    let sites = collect_binding_sites(function, code, language);
    let vc = sites.len() as u32;
    let distinct: std::collections::BTreeSet<&str> =
        sites.iter().map(|s| s.name.as_str()).collect();
    let dvc = distinct.len() as u32;

    let expressions = abstract_expressions(tree, sample);
    let ec = expressions.len() as u32;
    let distinct_exprs: std::collections::BTreeSet<&String> = expressions.iter().collect();
    let dec = distinct_exprs.len() as u32;

    FeatureVector {
        cc,
        nloc,
        tc,
        mlcn,
        mdt,
        ufcc,
        vc,
        dvc,
        ec,
        dec,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;
    use proptest::prelude::*;

    fn features(code: &str, language: Language) -> FeatureVector {
        let sample = CodeSample::new("s", code, language);
        let tree = parse(&sample).unwrap();
        extract_features(&tree, &sample)
    }

    #[test]
    fn straight_line_function() {
        let f = features("def f():\n    return 1", Language::Python);
        assert_eq!(f.cc, 1);
        assert_eq!(f.nloc, 2);
        assert_eq!(f.mlcn, 0);
        assert!(f.mdt >= 3);
    }

    #[test]
    fn single_branch_function() {
        let f = features(
            "def f(x):\n    if x:\n        return 1\n    return 0",
            Language::Python,
        );
        assert_eq!(f.cc, 2);
        assert_eq!(f.mlcn, 1);
        assert_eq!(f.vc, 1);
        assert_eq!(f.dvc, 1);
    }

    /// Hand-counted via a brute-force node walk before the implementation:
    /// nested for+if (cc 3, mlcn 2), two distinct callees, three distinct
    /// locals bound twice each (6 sites, 3 names).
    #[test]
    fn nested_snippet_hand_count() {
        let code = "def f(rows):\n    acc = 0\n    best = 0\n    mark = 0\n    for row in rows:\n        if row:\n            acc = scan(row)\n            best = rank(row)\n            mark = acc\n    return (acc, best, mark)\n";
        let f = features(code, Language::Python);
        assert_eq!(f.cc, 3);
        assert_eq!(f.mlcn, 2);
        assert_eq!(f.ufcc, 2);
        assert_eq!(f.dvc, 5); // rows, acc, best, mark, row
        assert_eq!(f.vc, 8); // 1 param + 6 assignments + 1 loop target
        assert_eq!(f.nloc, 10);
    }

    #[test]
    fn abstraction_erases_identifier_identity() {
        let sample = CodeSample::new("s", "def f(a, b):\n    return a + b\n", Language::Python);
        let tree = parse(&sample).unwrap();
        let exprs = abstract_expressions(&tree, &sample);
        assert!(exprs.contains(&"\u{27e8}ID\u{27e9}+\u{27e8}ID\u{27e9}".to_string()));
        let sample2 = CodeSample::new("s", "def f(a, b):\n    return a + a\n", Language::Python);
        let tree2 = parse(&sample2).unwrap();
        let exprs2 = abstract_expressions(&tree2, &sample2);
        let distinct: std::collections::BTreeSet<_> = exprs.iter().collect();
        let distinct2: std::collections::BTreeSet<_> = exprs2.iter().collect();
        assert_eq!(distinct, distinct2);
    }

    /// Independent recursive-descent oracle for ec/dec: rebuilds each
    /// expression's abstraction from raw bytes using identifier/literal
    /// classification by node kind, walking with a cursor rather than the
    /// production visitor.
    fn oracle_expressions(code: &str, language: Language) -> Vec<String> {
        let sample = CodeSample::new("s", code, language);
        let tree = parse(&sample).unwrap();
        fn leaf_abstract(node: tree_sitter::Node, code: &str, language: Language) -> String {
            let mut parts: Vec<(usize, String)> = Vec::new();
            let mut stack = vec![node];
            while let Some(n) = stack.pop() {
                let kind = n.kind();
                if kind == "identifier" {
                    parts.push((n.start_byte(), "\u{27e8}ID\u{27e9}".to_string()));
                    continue;
                }
                if literal_kinds(language).contains(&kind) {
                    parts.push((n.start_byte(), "\u{27e8}LIT\u{27e9}".to_string()));
                    continue;
                }
                if comment_kinds(language).contains(&kind) {
                    continue;
                }
                if n.child_count() == 0 {
                    parts.push((n.start_byte(), code[n.byte_range()].to_string()));
                    continue;
                }
                let mut cursor = n.walk();
                for child in n.children(&mut cursor) {
                    stack.push(child);
                }
            }
            // Stack order scrambles positions; sort by offset to rebuild.
            parts.sort_by_key(|(off, _)| *off);
            parts.into_iter().map(|(_, s)| s).collect::<String>()
        }
        fn walk(node: tree_sitter::Node, code: &str, language: Language, out: &mut Vec<String>) {
            if expression_kinds(language).contains(&node.kind()) {
                out.push(leaf_abstract(node, code, language));
            }
            let mut cursor = node.walk();
            for child in node.children(&mut cursor) {
                walk(child, code, language, out);
            }
        }
        let mut out = Vec::new();
        walk(tree.function_node(), code, language, &mut out);
        out
    }

    #[test]
    fn expression_counts_match_enumeration_oracle() {
        let code = "def g(x):\n    return f(x, 1) + f(x, 1)\n";
        let sample = CodeSample::new("s", code, Language::Python);
        let tree = parse(&sample).unwrap();
        let exprs = abstract_expressions(&tree, &sample);
        let mut oracle = oracle_expressions(code, Language::Python);
        let mut got = exprs.clone();
        oracle.sort();
        got.sort();
        assert_eq!(got, oracle);
        let f = extract_features(&tree, &sample);
        assert_eq!(f.ec, exprs.len() as u32);
        let distinct: std::collections::BTreeSet<_> = exprs.iter().collect();
        assert_eq!(f.dec, distinct.len() as u32);
        // Both calls abstract identically, so dec < ec.
        assert!(f.dec < f.ec);
    }

    #[test]
    fn java_features() {
        let code = "public int run(int[] xs, int max) {\n    int total = 0;\n    for (int x : xs) {\n        if (x > 0 && x < max) {\n            total += scale(x);\n        }\n    }\n    return total;\n}\n";
        let f = features(code, Language::Java);
        assert_eq!(f.cc, 4); // for + if + &&  (+1 base)
        assert_eq!(f.mlcn, 2);
        assert_eq!(f.ufcc, 1);
        assert_eq!(f.vc, 4); // xs, max, total, x
        assert_eq!(f.dvc, 4);
    }

    #[test]
    fn comments_do_not_count() {
        let py = features(
            "def f():\n    # setup\n    x = 1\n    return x  # done\n",
            Language::Python,
        );
        assert_eq!(py.nloc, 3);
        let jv = features(
            "int f() {\n    // setup\n    return 1;\n}\n",
            Language::Java,
        );
        assert_eq!(jv.nloc, 3);
    }

    #[test]
    fn renaming_leaves_features_unchanged() {
        let code = "def lookup(key, iterator):\n    a = None\n    for item in iterator:\n        if item:\n            a = item\n    return a\n";
        let sample = CodeSample::new("s", code, Language::Python);
        let tree = parse(&sample).unwrap();
        let before = extract_features(&tree, &sample);
        let table = crate::syntax::extract_variables(&tree, &sample);
        let renamed = crate::syntax::rename(&sample, &table, "a", "key_iterator")
            .unwrap()
            .sample;
        let tree2 = parse(&renamed).unwrap();
        let after = extract_features(&tree2, &renamed);
        assert_eq!(before, after);
    }

    fn arb_snippet() -> impl Strategy<Value = String> {
        // Small straight-line or branched functions with varying body size.
        (1usize..5, 0usize..3, any::<bool>()).prop_map(|(assigns, ifs, call)| {
            let mut body = String::new();
            for i in 0..assigns {
                body.push_str(&format!("    v{i} = {i} + 1\n"));
            }
            for i in 0..ifs {
                body.push_str(&format!("    if v0 > {i}:\n        v0 = v0 - {i}\n"));
            }
            if call {
                body.push_str("    v0 = helper(v0)\n");
            }
            body.push_str("    return v0\n");
            format!("def f(seed):\n    v0 = seed\n{body}")
        })
    }

    proptest! {
        #[test]
        fn prop_distinct_counts_bounded(code in arb_snippet()) {
            let f = features(&code, Language::Python);
            prop_assert!(f.dec <= f.ec);
            prop_assert!(f.dvc <= f.vc);
            prop_assert!(f.ufcc <= f.tc);
            prop_assert!(f.cc >= 1);
            prop_assert!(f.nloc >= 1);
            prop_assert!(f.mdt >= 1);
        }

        #[test]
        fn prop_statement_append_monotonic(code in arb_snippet()) {
            let before = features(&code, Language::Python);
            let appended = format!("{code}    extra = 1\n");
            let after = features(&appended, Language::Python);
            prop_assert!(after.nloc >= before.nloc);
            prop_assert!(after.tc >= before.tc);
            prop_assert!(after.ec >= before.ec);
        }
    }
}
