//! DOT rendering with node shapes by role and edge styles by type. Output is
//! a pure function of the graph, so regeneration is byte-identical.

use super::{CausalDag, ConflictGraph, NodeRole};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn conflict_graph_dot(g: &ConflictGraph) -> String {
    let mut out = String::from("digraph G {\n");
    out.push_str("  rankdir=LR;\n");
    if !g.xapps.is_empty() {
        out.push_str("  subgraph cluster_xapps {\n    label=\"xApps\";\n");
        for x in &g.xapps {
            out.push_str(&format!(
                "    {} [shape=box, label={}];\n",
                quote(&x.id),
                quote(&x.name)
            ));
        }
        out.push_str("  }\n");
    }
    if !g.rcps.is_empty() {
        out.push_str("  subgraph cluster_rcps {\n    label=\"RCPs\";\n");
        for p in &g.rcps {
            out.push_str(&format!("    {} [shape=ellipse];\n", quote(p)));
        }
        out.push_str("  }\n");
    }
    if !g.kpis.is_empty() {
        out.push_str("  subgraph cluster_kpis {\n    label=\"KPIs\";\n");
        for k in &g.kpis {
            out.push_str(&format!("    {} [shape=diamond];\n", quote(k)));
        }
        out.push_str("  }\n");
    }
    for x in &g.xapps {
        for p in &x.controlled_rcps {
            out.push_str(&format!(
                "  {} -> {} [color=gray50];\n",
                quote(&x.id),
                quote(p)
            ));
        }
    }
    for (f, t) in &g.influence_edges {
        out.push_str(&format!("  {} -> {};\n", quote(f), quote(t)));
    }
    for (f, t) in &g.structural_edges {
        out.push_str(&format!(
            "  {} -> {} [style=dashed];\n",
            quote(f),
            quote(t)
        ));
    }
    out.push_str("}\n");
    out
}

pub fn causal_dag_dot(d: &CausalDag) -> String {
    let mut out = String::from("digraph G {\n");
    for name in d.node_names() {
        let shape = match d.role_of(name).unwrap() {
            NodeRole::Rcp => "ellipse",
            NodeRole::Kpi => "diamond",
            NodeRole::Context => "box",
        };
        out.push_str(&format!("  {} [shape={shape}];\n", quote(name)));
    }
    for (f, t) in d.edges() {
        out.push_str(&format!("  {} -> {};\n", quote(&f), quote(&t)));
    }
    out.push_str("}\n");
    out
}
