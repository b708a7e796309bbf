//! Graphviz, JSON and SVG renderings of transition graphs.

use std::fmt::Write as _;

use serde::Serialize;

use crate::logic::FormulaReport;
use crate::tg::{Analysis, Cause, Finding, Tg, Tri};

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn edge_order(tg: &Tg) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tg.edges.len()).collect();
    idx.sort_by_key(|&i| {
        let e = &tg.edges[i];
        (e.from, e.to, e.actor, e.edge)
    });
    idx
}

pub fn edge_label(tg: &Tg, i: usize) -> String {
    let e = &tg.edges[i];
    format!("{} @ {}", e.action, tg.names[e.actor])
}

/// DOT text. The initial node has a double border; edges shown unrealizable
/// carry a filled circle at their tail; unreachable nodes are dashed.
pub fn to_dot(tg: &Tg, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", esc(name));
    out.push_str("  node [shape=ellipse, fontname=\"monospace\"];\n");
    out.push_str("  edge [fontname=\"monospace\"];\n");
    for n in 0..tg.nodes.len() {
        let mut attrs = Vec::new();
        if n == tg.init {
            attrs.push("peripheries=2".to_string());
        }
        if tg.reachable[n] == Tri::No {
            attrs.push("style=dashed".to_string());
        }
        let a = if attrs.is_empty() { String::new() } else { format!(" [{}]", attrs.join(", ")) };
        let _ = writeln!(out, "  \"{}\"{};", tg.label(n), a);
    }
    for i in edge_order(tg) {
        let e = &tg.edges[i];
        let mut label = edge_label(tg, i);
        let mut attrs = Vec::new();
        match e.cause {
            Some(Cause::EmptyContent) => {
                label = format!("● {label}");
                attrs.push("dir=both, arrowtail=dot".to_string());
            }
            Some(Cause::UnreachableSource) => attrs.push("style=dashed".to_string()),
            None => {}
        }
        attrs.insert(0, format!("label=\"{}\"", esc(&label)));
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [{}];",
            tg.label(e.from),
            tg.label(e.to),
            attrs.join(", ")
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct NodeFacts {
    pub node: String,
    pub fact: FormulaReport,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct FactsReport {
    pub protocol: String,
    #[serde(rename = "fullNodes")]
    pub full_nodes: usize,
    #[serde(rename = "reducedNodes")]
    pub reduced_nodes: Vec<String>,
    #[serde(rename = "unrealizableEdges")]
    pub unrealizable_edges: Vec<String>,
    pub rounds: Vec<Vec<String>>,
    pub facts: Vec<NodeFacts>,
    pub findings: Vec<Finding>,
}

pub fn facts_report(a: &Analysis, protocol: &str) -> FactsReport {
    FactsReport {
        protocol: protocol.to_string(),
        full_nodes: a.full.nodes.len(),
        reduced_nodes: a.reduced.labels(),
        unrealizable_edges: a
            .full
            .marked_edges()
            .into_iter()
            .map(|i| {
                let e = &a.full.edges[i];
                format!("{} -> {}: {}", a.full.label(e.from), a.full.label(e.to), edge_label(&a.full, i))
            })
            .collect(),
        rounds: a.rounds.clone(),
        facts: a
            .facts
            .iter()
            .enumerate()
            .map(|(i, f)| NodeFacts {
                node: a.reduced.label(i),
                fact: f.report(),
            })
            .collect(),
        findings: a.findings.clone(),
    }
}

/// A layered SVG drawing: nodes ranked by total progress, ordered by label.
pub fn to_svg(tg: &Tg) -> String {
    let rank = |n: usize| tg.nodes[n].at.iter().sum::<usize>();
    let max_rank = (0..tg.nodes.len()).map(rank).max().unwrap_or(0);
    let mut layers: Vec<Vec<usize>> = vec![Vec::new(); max_rank + 1];
    for n in 0..tg.nodes.len() {
        layers[rank(n)].push(n);
    }
    let width = layers.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let (dx, dy, r) = (130.0, 110.0, 34.0);
    let w = width as f64 * dx + 40.0;
    let h = layers.len() as f64 * dy + 40.0;
    let mut pos = vec![(0.0, 0.0); tg.nodes.len()];
    for (li, layer) in layers.iter().enumerate() {
        let off = (width - layer.len()) as f64 * dx / 2.0;
        for (k, &n) in layer.iter().enumerate() {
            pos[n] = (20.0 + off + dx * (k as f64 + 0.5), 20.0 + dy * (li as f64 + 0.5));
        }
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"11\">"
    );
    out.push_str("<defs><marker id=\"arr\" markerWidth=\"8\" markerHeight=\"8\" refX=\"8\" refY=\"4\" orient=\"auto\"><path d=\"M0,0 L8,4 L0,8 z\"/></marker></defs>\n");
    for i in edge_order(tg) {
        let e = &tg.edges[i];
        let ((x1, y1), (x2, y2)) = (pos[e.from], pos[e.to]);
        let len = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt().max(1.0);
        let (ux, uy) = ((x2 - x1) / len, (y2 - y1) / len);
        let (sx, sy, ex, ey) = (x1 + ux * r, y1 + uy * r, x2 - ux * r, y2 - uy * r);
        let dash = if e.realizable == Tri::No { " stroke-dasharray=\"4 3\"" } else { "" };
        let label = xml(&edge_label(tg, i));
        let _ = writeln!(
            out,
            "<g class=\"edge\"><title>{label}</title><line x1=\"{sx:.1}\" y1=\"{sy:.1}\" x2=\"{ex:.1}\" y2=\"{ey:.1}\" stroke=\"#444\"{dash} marker-end=\"url(#arr)\"/>"
        );
        if e.cause == Some(Cause::EmptyContent) {
            let _ = write!(out, "<circle cx=\"{sx:.1}\" cy=\"{sy:.1}\" r=\"4\" fill=\"black\"/>");
        }
        out.push_str("</g>\n");
    }
    for n in 0..tg.nodes.len() {
        let (x, y) = pos[n];
        let dash = if tg.reachable[n] == Tri::No { " stroke-dasharray=\"4 3\"" } else { "" };
        let label = tg.label(n);
        let _ = write!(
            out,
            "<g class=\"node\" data-label=\"{label}\"><ellipse cx=\"{x:.1}\" cy=\"{y:.1}\" rx=\"{r}\" ry=\"20\" fill=\"white\" stroke=\"black\"{dash}/>"
        );
        if n == tg.init {
            let _ = write!(out, "<ellipse cx=\"{x:.1}\" cy=\"{y:.1}\" rx=\"{}\" ry=\"24\" fill=\"none\" stroke=\"black\"/>", r + 4.0);
        }
        let _ = writeln!(out, "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text></g>", y + 4.0);
    }
    out.push_str("</svg>\n");
    out
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{corpus, tg::analyze};

    #[test]
    fn dot_marks_initial_and_unrealizable() {
        let (dp, _) = corpus::load("p1").unwrap().single_dp();
        let a = analyze(&dp).unwrap();
        let d = to_dot(&a.full, "p1");
        assert!(d.contains("\"A0B0\" [peripheries=2];"));
        assert_eq!(d.matches("arrowtail=dot").count(), 1);
        assert!(d.contains("@ B"));
        assert_eq!(d, to_dot(&a.full, "p1"));
    }

    #[test]
    fn svg_has_every_node() {
        let (dp, _) = corpus::load("p3").unwrap().single_dp();
        let a = analyze(&dp).unwrap();
        let s = to_svg(&a.reduced);
        assert_eq!(s.matches("class=\"node\"").count(), 10);
    }
}
