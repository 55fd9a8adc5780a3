//! Java binding-site and occurrence collection.
//!
//! Locally bound per the toolkit's scope model: formal parameters, local
//! variable declarators (including for-init and try-with-resources), and
//! enhanced-for variables. Fields are member names, never variables.

use std::collections::HashSet;

use tree_sitter::Node;

use super::BindingSite;

pub(crate) const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class",
    "const", "continue", "default", "do", "double", "else", "enum", "extends", "false",
    "final", "finally", "float", "for", "goto", "if", "implements", "import", "instanceof",
    "int", "interface", "long", "native", "new", "null", "package", "private", "protected",
    "public", "record", "return", "short", "static", "strictfp", "super", "switch",
    "synchronized", "this", "throw", "throws", "transient", "true", "try", "var", "void",
    "volatile", "while", "yield",
];

const OPAQUE_KINDS: &[&str] = &[
    "import_declaration",
    "package_declaration",
    "annotation",
    "marker_annotation",
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

pub(crate) fn collect_binding_sites(root: Node, code: &str) -> Vec<BindingSite> {
    let mut sites = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        match node.kind() {
            "formal_parameter" => {
                if let Some(name) = node.child_by_field_name("name") {
                    push_site(&mut sites, name, code, true);
                }
            }
            "spread_parameter" => {
                // Varargs: the declarator (or bare identifier) carries the name.
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    match child.kind() {
                        "variable_declarator" => {
                            if let Some(name) = child.child_by_field_name("name") {
                                push_site(&mut sites, name, code, true);
                            }
                        }
                        "identifier" => push_site(&mut sites, child, code, true),
                        _ => {}
                    }
                }
            }
            "variable_declarator" => {
                if let Some(name) = node.child_by_field_name("name") {
                    push_site(&mut sites, name, code, false);
                }
            }
            "resource" => {
                if let Some(name) = node.child_by_field_name("name") {
                    push_site(&mut sites, name, code, false);
                }
            }
            "enhanced_for_statement" => {
                if let Some(name) = node.child_by_field_name("name") {
                    push_site(&mut sites, name, code, false);
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

fn is_excluded_position(node: Node) -> bool {
    let parent = match node.parent() {
        Some(p) => p,
        None => return false,
    };
    match parent.kind() {
        "field_access" => parent.child_by_field_name("field") == Some(node),
        "method_invocation" => parent.child_by_field_name("name") == Some(node),
        // obj::method — the trailing identifier is the method name.
        "method_reference" => parent.child(parent.child_count() - 1) == Some(node),
        "method_declaration" | "constructor_declaration" | "class_declaration"
        | "interface_declaration" | "enum_declaration" => {
            parent.child_by_field_name("name") == Some(node)
        }
        "labeled_statement" => parent.child(0) == Some(node),
        "break_statement" | "continue_statement" => true,
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
