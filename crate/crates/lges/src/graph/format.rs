//! Text and DOT serialization for graphs.
//!
//! The text format is one edge per line, `A -> B` for directed and `A -- B`
//! for undirected, with `#` comment lines. Emitters prepend a `# nodes: ...`
//! comment so files round-trip without an external name list; the parser uses
//! it only when no names are supplied.

use super::{Edge, GraphError, NodeId, Pdag};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Serializes `e` using `names[i]` for node `i`.
pub fn write_graph(e: &Pdag, names: &[String]) -> String {
    assert_eq!(e.node_count(), names.len(), "one name per node");
    let mut out = String::new();
    writeln!(out, "# nodes: {}", names.join(" ")).unwrap();
    for edge in e.edges() {
        match edge {
            Edge::Directed(u, v) => {
                writeln!(out, "{} -> {}", names[u as usize], names[v as usize]).unwrap()
            }
            Edge::Undirected(u, v) => {
                writeln!(out, "{} -- {}", names[u as usize], names[v as usize]).unwrap()
            }
        }
    }
    out
}

/// Parses the edge-list format.
///
/// With `names` given, every mentioned node must resolve against it and the
/// returned graph has `names.len()` nodes. Without names, the universe comes
/// from a `# nodes:` header if present, otherwise from order of appearance.
pub fn parse_graph(
    text: &str,
    names: Option<&[String]>,
) -> Result<(Pdag, Vec<String>), GraphError> {
    let mut resolved: Vec<String> = names.map(|n| n.to_vec()).unwrap_or_default();
    let mut fixed_universe = names.is_some();
    let mut index: HashMap<String, NodeId> =
        resolved.iter().enumerate().map(|(i, n)| (n.clone(), i as NodeId)).collect();
    if index.len() != resolved.len() {
        return Err(GraphError::Parse { line: 0, reason: "duplicate variable name".into() });
    }

    let mut edges: Vec<(String, String, bool, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(list) = rest.strip_prefix("nodes:") {
                if !fixed_universe {
                    for name in list.split_whitespace() {
                        if index.contains_key(name) {
                            return Err(GraphError::Parse {
                                line: lineno + 1,
                                reason: format!("duplicate variable name '{name}'"),
                            });
                        }
                        index.insert(name.to_string(), resolved.len() as NodeId);
                        resolved.push(name.to_string());
                    }
                    fixed_universe = true;
                }
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 || (toks[1] != "->" && toks[1] != "--") {
            return Err(GraphError::Parse {
                line: lineno + 1,
                reason: format!("expected 'A -> B' or 'A -- B', got '{line}'"),
            });
        }
        edges.push((toks[0].to_string(), toks[2].to_string(), toks[1] == "->", lineno + 1));
    }

    if !fixed_universe {
        for (a, b, _, _) in &edges {
            for name in [a, b] {
                if !index.contains_key(name.as_str()) {
                    index.insert(name.clone(), resolved.len() as NodeId);
                    resolved.push(name.clone());
                }
            }
        }
    }

    let mut g = Pdag::new(resolved.len());
    for (a, b, directed, lineno) in edges {
        let ia = *index.get(&a).ok_or(GraphError::UnknownName { name: a.clone() })?;
        let ib = *index.get(&b).ok_or(GraphError::UnknownName { name: b.clone() })?;
        let added = if directed { g.add_directed(ia, ib) } else { g.add_undirected(ia, ib) };
        added.map_err(|e| GraphError::Parse { line: lineno, reason: e.to_string() })?;
    }
    Ok((g, resolved))
}

/// DOT rendering; undirected edges are drawn with `dir=none`.
pub fn write_dot(e: &Pdag, names: &[String]) -> String {
    assert_eq!(e.node_count(), names.len(), "one name per node");
    let mut out = String::from("digraph g {\n");
    for name in names {
        writeln!(out, "  \"{name}\";").unwrap();
    }
    for edge in e.edges() {
        match edge {
            Edge::Directed(u, v) => {
                writeln!(out, "  \"{}\" -> \"{}\";", names[u as usize], names[v as usize]).unwrap()
            }
            Edge::Undirected(u, v) => writeln!(
                out,
                "  \"{}\" -> \"{}\" [dir=none];",
                names[u as usize], names[v as usize]
            )
            .unwrap(),
        }
    }
    out.push_str("}\n");
    out
}
