//! Python binding-site and occurrence collection.
//!
//! Locally bound per the toolkit's scope model: parameters, assignment
//! targets (including augmented and walrus forms), for-loop targets,
//! with-targets, and comprehension targets.

use std::collections::HashSet;

use tree_sitter::Node;

use super::BindingSite;

pub(crate) const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

/// Node kinds whose subtrees never contribute variable occurrences.
const OPAQUE_KINDS: &[&str] = &[
    "import_statement",
    "import_from_statement",
    "future_import_statement",
];

fn node_text<'c>(node: Node, code: &'c str) -> &'c str {
    &code[node.byte_range()]
}

fn push_site(sites: &mut Vec<BindingSite>, node: Node, code: &str, is_parameter: bool) {
    if node.kind() == "identifier" {
        sites.push(BindingSite {
            name: node_text(node, code).to_string(),
            is_parameter,
        });
    }
}

/// Targets of assignment-like constructs: identifiers, possibly nested in
/// tuple/list patterns or splats. Attribute and subscript targets rebind
/// object members, not variables.
fn collect_pattern_targets(node: Node, code: &str, sites: &mut Vec<BindingSite>) {
    match node.kind() {
        "identifier" => push_site(sites, node, code, false),
        "pattern_list" | "tuple_pattern" | "list_pattern" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                collect_pattern_targets(child, code, sites);
            }
        }
        "list_splat_pattern" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                collect_pattern_targets(child, code, sites);
            }
        }
        _ => {}
    }
}

fn collect_parameters(params: Node, code: &str, sites: &mut Vec<BindingSite>) {
    let mut cursor = params.walk();
    for child in params.named_children(&mut cursor) {
        match child.kind() {
            "identifier" => push_site(sites, child, code, true),
            "typed_parameter" => {
                if let Some(inner) = child.named_child(0) {
                    push_site(sites, inner, code, true);
                }
            }
            "default_parameter" | "typed_default_parameter" => {
                if let Some(name) = child.child_by_field_name("name") {
                    push_site(sites, name, code, true);
                }
            }
            "list_splat_pattern" | "dictionary_splat_pattern" => {
                if let Some(inner) = child.named_child(0) {
                    push_site(sites, inner, code, true);
                }
            }
            _ => {}
        }
    }
}

pub(crate) fn collect_binding_sites(root: Node, code: &str) -> Vec<BindingSite> {
    let mut sites = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        match node.kind() {
            "parameters" | "lambda_parameters" => collect_parameters(node, code, &mut sites),
            "assignment" | "augmented_assignment" => {
                if let Some(left) = node.child_by_field_name("left") {
                    collect_pattern_targets(left, code, &mut sites);
                }
            }
            "named_expression" => {
                if let Some(name) = node.child_by_field_name("name") {
                    push_site(&mut sites, name, code, false);
                }
            }
            "for_statement" | "for_in_clause" => {
                if let Some(left) = node.child_by_field_name("left") {
                    collect_pattern_targets(left, code, &mut sites);
                }
            }
            "as_pattern" => {
                // With-targets only; except/match aliases are out of scope.
                if node.parent().map(|p| p.kind()) == Some("with_item") {
                    if let Some(alias) = node.child_by_field_name("alias") {
                        if let Some(inner) = alias.named_child(0) {
                            push_site(&mut sites, inner, code, false);
                        }
                    }
                }
            }
            kind if OPAQUE_KINDS.contains(&kind) => continue,
            _ => {}
        }
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            stack.push(child);
        }
    }
    sites
}

/// True when the identifier position denotes something other than a variable:
/// attribute member names, keyword-argument names, and definition names.
fn is_excluded_position(node: Node) -> bool {
    let parent = match node.parent() {
        Some(p) => p,
        None => return false,
    };
    match parent.kind() {
        "attribute" => parent.child_by_field_name("attribute") == Some(node),
        "keyword_argument" => parent.child_by_field_name("name") == Some(node),
        "function_definition" | "class_definition" => {
            parent.child_by_field_name("name") == Some(node)
        }
        _ => false,
    }
}

pub(crate) fn collect_occurrences(
    root: Node,
    code: &str,
    names: &HashSet<String>,
) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if OPAQUE_KINDS.contains(&node.kind()) {
            continue;
        }
        if node.kind() == "identifier" {
            let text = node_text(node, code);
            if names.contains(text) && !is_excluded_position(node) {
                out.push((text.to_string(), node.start_byte(), node.end_byte()));
            }
            continue;
        }
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            stack.push(child);
        }
    }
    out
}
