use std::fmt::Write;

use super::{EventCatalog, Node, PredicateRef, SchemaTree};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn predicate(p: &PredicateRef) -> String {
    if p.params.is_empty() {
        return p.name.clone();
    }
    let params: Vec<String> = p.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{}({})", p.name, params.join(", "))
}

fn node(out: &mut String, n: &Node, indent: usize) {
    let pad = "  ".repeat(indent);
    match n {
        Node::Primitive(p) => {
            let _ = write!(
                out,
                "{pad}prim(channel={}, predicate={})",
                quote(&p.channel),
                predicate(&p.predicate)
            );
        }
        Node::Composite(c) => {
            let _ = writeln!(out, "{pad}{}(", c.op);
            for (i, child) in c.children.iter().enumerate() {
                node(out, child, indent + 1);
                out.push_str(if i + 1 < c.children.len() {
                    ",\n"
                } else {
                    "\n"
                });
            }
            let _ = write!(out, "{pad})");
        }
    }
}

/// Serializes a schema back to the text format. Parsing the output yields
/// a structurally equal tree.
pub fn render_schema(schema: &SchemaTree) -> String {
    let mut out = format!("event {} {{", quote(&schema.event_type));
    match &schema.root {
        Node::Primitive(_) => {
            out.push(' ');
            node(&mut out, &schema.root, 0);
            out.push_str(" }");
        }
        Node::Composite(_) => {
            out.push('\n');
            node(&mut out, &schema.root, 1);
            out.push_str("\n}");
        }
    }
    out.push('\n');
    out
}

pub fn render_catalog(catalog: &EventCatalog) -> String {
    catalog
        .iter()
        .map(render_schema)
        .collect::<Vec<_>>()
        .join("\n")
}
