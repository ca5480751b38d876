//! Tripartite conflict graph over applications, control parameters, and
//! KPIs; the causal DAG over the parameter/KPI subgraph; conflict
//! classification; d-separation; and backdoor adjustment-set search.

mod backdoor;
mod dot;
mod dsep;

pub use backdoor::backdoor_sets;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ColumnRole;
use crate::scalar::Real;
use crate::shapley::ImportanceTable;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("node sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("KPI node `{from}` cannot have an outgoing edge (to `{to}`)")]
    KpiOutEdge { from: String, to: String },
    #[error("edge {from} -> {to} violates the {kind} signature")]
    BadEdge {
        kind: &'static str,
        from: String,
        to: String,
    },
    #[error("treatment and outcome must differ (`{0}`)")]
    SameNode(String),
    #[error("edge threshold tau={0} outside (0, 1)")]
    BadTau(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Rcp,
    Kpi,
    Context,
}

/// Directed acyclic graph over control parameters and KPIs (plus optional
/// exogenous context nodes). KPI nodes never have outgoing edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalDag {
    names: Vec<String>,
    roles: Vec<NodeRole>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl CausalDag {
    pub fn new(
        nodes: Vec<(String, NodeRole)>,
        edges: Vec<(String, String)>,
    ) -> Result<Self, GraphError> {
        let mut names = Vec::with_capacity(nodes.len());
        let mut roles = Vec::with_capacity(nodes.len());
        let mut index = BTreeMap::new();
        for (name, role) in nodes {
            if index.insert(name.clone(), names.len()).is_some() {
                return Err(GraphError::DuplicateNode(name));
            }
            names.push(name);
            roles.push(role);
        }
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (from, to) in edges {
            let &f = index
                .get(&from)
                .ok_or_else(|| GraphError::UnknownNode(from.clone()))?;
            let &t = index
                .get(&to)
                .ok_or_else(|| GraphError::UnknownNode(to.clone()))?;
            if roles[f] == NodeRole::Kpi {
                return Err(GraphError::KpiOutEdge { from, to });
            }
            if !children[f].contains(&t) {
                children[f].push(t);
                parents[t].push(f);
            }
        }
        for adj in parents.iter_mut().chain(children.iter_mut()) {
            adj.sort_unstable();
        }
        let dag = CausalDag {
            names,
            roles,
            parents,
            children,
        };
        if let Some(cycle) = dag.find_cycle() {
            return Err(GraphError::Cycle(cycle));
        }
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn role_of(&self, name: &str) -> Option<NodeRole> {
        self.index_of(name).map(|i| self.roles[i])
    }

    pub(crate) fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub(crate) fn resolve(&self, name: &str) -> Result<usize, GraphError> {
        self.index_of(name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub(crate) fn parents_idx(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn children_idx(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub(crate) fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index_of(from), self.index_of(to)) {
            (Some(f), Some(t)) => self.children[f].binary_search(&t).is_ok(),
            _ => false,
        }
    }

    /// Edges as (from, to) name pairs, in node-index order.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (f, ch) in self.children.iter().enumerate() {
            for &t in ch {
                out.push((self.names[f].clone(), self.names[t].clone()));
            }
        }
        out
    }

    pub fn children_of(&self, name: &str) -> Vec<String> {
        self.index_of(name)
            .map(|i| {
                self.children[i]
                    .iter()
                    .map(|&c| self.names[c].clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Copy of the graph with every outgoing edge of `node` removed.
    pub(crate) fn without_outgoing(&self, node: usize) -> CausalDag {
        let mut cut = self.clone();
        for &c in &self.children[node] {
            cut.parents[c].retain(|&p| p != node);
        }
        cut.children[node].clear();
        cut
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        // Iterative DFS with colors; reconstructs the cycle for the error.
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let n = self.len();
        let mut color = vec![Color::White; n];
        let mut pred = vec![usize::MAX; n];
        for start in 0..n {
            if color[start] != Color::White {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color[start] = Color::Gray;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if *next < self.children[v].len() {
                    let c = self.children[v][*next];
                    *next += 1;
                    match color[c] {
                        Color::White => {
                            color[c] = Color::Gray;
                            pred[c] = v;
                            stack.push((c, 0));
                        }
                        Color::Gray => {
                            // walk predecessors from v back to c
                            let mut cycle = vec![self.names[c].clone()];
                            let mut cur = v;
                            while cur != c {
                                cycle.push(self.names[cur].clone());
                                cur = pred[cur];
                            }
                            cycle.push(self.names[c].clone());
                            cycle.reverse();
                            return Some(cycle);
                        }
                        Color::Black => {}
                    }
                } else {
                    color[v] = Color::Black;
                    stack.pop();
                }
            }
        }
        None
    }

    pub fn to_dot(&self) -> String {
        dot::causal_dag_dot(self)
    }
}

/// One control application: the parameters it sets and the KPIs it targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XApp {
    pub id: String,
    pub name: String,
    pub controlled_rcps: Vec<String>,
    pub target_kpis: Vec<String>,
}

/// Typed tripartite graph: control edges (xapp -> rcp) come from the xapp
/// definitions; influence (rcp -> kpi) and structural (rcp -> rcp) edges come
/// from the causal DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGraph {
    pub xapps: Vec<XApp>,
    pub rcps: Vec<String>,
    pub kpis: Vec<String>,
    pub influence_edges: Vec<(String, String)>,
    pub structural_edges: Vec<(String, String)>,
}

impl ConflictGraph {
    pub fn new(
        xapps: Vec<XApp>,
        rcps: Vec<String>,
        kpis: Vec<String>,
        influence_edges: Vec<(String, String)>,
        structural_edges: Vec<(String, String)>,
    ) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for id in xapps
            .iter()
            .map(|x| &x.id)
            .chain(rcps.iter())
            .chain(kpis.iter())
        {
            if !seen.insert(id.clone()) {
                return Err(GraphError::DuplicateNode(id.clone()));
            }
        }
        let rcp_set: BTreeSet<&String> = rcps.iter().collect();
        let kpi_set: BTreeSet<&String> = kpis.iter().collect();
        for x in &xapps {
            for p in &x.controlled_rcps {
                if !rcp_set.contains(p) {
                    return Err(GraphError::BadEdge {
                        kind: "control",
                        from: x.id.clone(),
                        to: p.clone(),
                    });
                }
            }
        }
        for (f, t) in &influence_edges {
            if !rcp_set.contains(f) || !kpi_set.contains(t) {
                return Err(GraphError::BadEdge {
                    kind: "influence",
                    from: f.clone(),
                    to: t.clone(),
                });
            }
        }
        for (f, t) in &structural_edges {
            if !rcp_set.contains(f) || !rcp_set.contains(t) {
                return Err(GraphError::BadEdge {
                    kind: "structural",
                    from: f.clone(),
                    to: t.clone(),
                });
            }
        }
        Ok(ConflictGraph {
            xapps,
            rcps,
            kpis,
            influence_edges,
            structural_edges,
        })
    }

    /// Assemble the tripartite view from xapp definitions plus a causal DAG
    /// (context nodes are not part of the conflict graph).
    pub fn from_scenario(xapps: Vec<XApp>, dag: &CausalDag) -> Result<Self, GraphError> {
        let mut rcps = Vec::new();
        let mut kpis = Vec::new();
        for name in dag.node_names() {
            match dag.role_of(name).unwrap() {
                NodeRole::Rcp => rcps.push(name.clone()),
                NodeRole::Kpi => kpis.push(name.clone()),
                NodeRole::Context => {}
            }
        }
        let mut influence = Vec::new();
        let mut structural = Vec::new();
        for (f, t) in dag.edges() {
            match (dag.role_of(&f).unwrap(), dag.role_of(&t).unwrap()) {
                (NodeRole::Rcp, NodeRole::Kpi) => influence.push((f, t)),
                (NodeRole::Rcp, NodeRole::Rcp) => structural.push((f, t)),
                _ => {}
            }
        }
        ConflictGraph::new(xapps, rcps, kpis, influence, structural)
    }

    pub fn to_dot(&self) -> String {
        dot::conflict_graph_dot(self)
    }
}

/// A classified conflict between two applications. Ordering is by kind, then
/// participants, then mediators, which fixes the report order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Finding {
    /// Two xapps set the same parameter.
    Direct { xapps: [String; 2], rcp: String },
    /// Two xapps set different parameters that influence the same KPI.
    Indirect {
        xapps: [String; 2],
        rcps: [String; 2],
        kpi: String,
    },
    /// One xapp's parameter perturbs another xapp's parameter, and through it
    /// a KPI the second parameter influences.
    Implicit {
        xapps: [String; 2],
        path: [String; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ConflictReport {
    pub findings: Vec<Finding>,
}

impl ConflictReport {
    pub fn of_kind(&self, kind: &str) -> Vec<&Finding> {
        self.findings
            .iter()
            .filter(|f| match f {
                Finding::Direct { .. } => kind == "direct",
                Finding::Indirect { .. } => kind == "indirect",
                Finding::Implicit { .. } => kind == "implicit",
            })
            .collect()
    }

    /// Deduplicated (rcp, kpi) pairs implicated by indirect or implicit
    /// findings, sorted. These are the pairs the effect estimators quantify.
    pub fn effect_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = BTreeSet::new();
        for f in &self.findings {
            match f {
                Finding::Direct { .. } => {}
                Finding::Indirect { rcps, kpi, .. } => {
                    pairs.insert((rcps[0].clone(), kpi.clone()));
                    pairs.insert((rcps[1].clone(), kpi.clone()));
                }
                Finding::Implicit { path, .. } => {
                    pairs.insert((path[0].clone(), path[2].clone()));
                    pairs.insert((path[1].clone(), path[2].clone()));
                }
            }
        }
        pairs.into_iter().collect()
    }
}

fn sorted_pair(a: &str, b: &str) -> [String; 2] {
    if a <= b {
        [a.to_string(), b.to_string()]
    } else {
        [b.to_string(), a.to_string()]
    }
}

/// Classify every pairwise conflict implied by the control lists and the
/// causal edges. Callers must pass a graph and DAG over consistent node sets.
pub fn classify_conflicts(graph: &ConflictGraph, dag: &CausalDag) -> ConflictReport {
    let mut findings = BTreeSet::new();

    let kpi_children = |rcp: &str| -> Vec<String> {
        dag.children_of(rcp)
            .into_iter()
            .filter(|c| dag.role_of(c) == Some(NodeRole::Kpi))
            .collect()
    };

    for (i, a) in graph.xapps.iter().enumerate() {
        for b in graph.xapps.iter().skip(i + 1) {
            let xapps = sorted_pair(&a.id, &b.id);
            // Direct: shared controlled parameter.
            for p in &a.controlled_rcps {
                if b.controlled_rcps.contains(p) {
                    findings.insert(Finding::Direct {
                        xapps: xapps.clone(),
                        rcp: p.clone(),
                    });
                }
            }
            // Indirect: distinct parameters influencing the same KPI.
            for pm in &a.controlled_rcps {
                for pn in &b.controlled_rcps {
                    if pm == pn {
                        continue;
                    }
                    for k in kpi_children(pm) {
                        if dag.has_edge(pn, &k) {
                            let mut rcps = [pm.clone(), pn.clone()];
                            rcps.sort();
                            findings.insert(Finding::Indirect {
                                xapps: xapps.clone(),
                                rcps,
                                kpi: k,
                            });
                        }
                    }
                }
            }
        }
    }

    // Implicit: pm -> pn structural edge carries a's influence onto a KPI of
    // b's parameter, while pm drives some other KPI of its own.
    for a in &graph.xapps {
        for b in &graph.xapps {
            if a.id == b.id {
                continue;
            }
            for pm in &a.controlled_rcps {
                for pn in &b.controlled_rcps {
                    if pm == pn || !dag.has_edge(pm, pn) {
                        continue;
                    }
                    let own_kpis = kpi_children(pm);
                    for kz in kpi_children(pn) {
                        if own_kpis.iter().any(|ky| *ky != kz) {
                            findings.insert(Finding::Implicit {
                                xapps: sorted_pair(&a.id, &b.id),
                                path: [pm.clone(), pn.clone(), kz.clone()],
                            });
                        }
                    }
                }
            }
        }
    }

    ConflictReport {
        findings: findings.into_iter().collect(),
    }
}

/// Build the causal DAG from attribution shares: an rcp (or context) feature
/// gains an edge to a KPI when its normalized share reaches `tau`; declared
/// structural rcp -> rcp edges are always included.
pub fn build_dag<F: Real>(
    importance: &ImportanceTable<F>,
    roles: &BTreeMap<String, ColumnRole>,
    structural_edges: &[(String, String)],
    tau: f64,
    include_context: bool,
) -> Result<CausalDag, GraphError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(GraphError::BadTau(tau));
    }

    let mut features: Vec<String> = Vec::new();
    let mut kpis: Vec<String> = Vec::new();
    for row in &importance.rows {
        if !features.contains(&row.feature) {
            features.push(row.feature.clone());
        }
        if !kpis.contains(&row.kpi) {
            kpis.push(row.kpi.clone());
        }
    }

    let role_of = |f: &String| -> Result<ColumnRole, GraphError> {
        roles
            .get(f)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(f.clone()))
    };

    let mut edges: Vec<(String, String)> = Vec::new();
    let mut context_used: BTreeSet<String> = BTreeSet::new();
    let threshold = F::of(tau);
    for row in &importance.rows {
        if row.normalized_share < threshold {
            continue;
        }
        match role_of(&row.feature)? {
            ColumnRole::Rcp => edges.push((row.feature.clone(), row.kpi.clone())),
            ColumnRole::Context if include_context => {
                context_used.insert(row.feature.clone());
                edges.push((row.feature.clone(), row.kpi.clone()));
            }
            _ => {}
        }
    }

    let mut nodes: Vec<(String, NodeRole)> = Vec::new();
    for f in &features {
        match role_of(f)? {
            ColumnRole::Rcp => nodes.push((f.clone(), NodeRole::Rcp)),
            ColumnRole::Context if context_used.contains(f) => {
                nodes.push((f.clone(), NodeRole::Context))
            }
            _ => {}
        }
    }
    for k in &kpis {
        nodes.push((k.clone(), NodeRole::Kpi));
    }
    for (f, t) in structural_edges {
        edges.push((f.clone(), t.clone()));
    }
    CausalDag::new(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapley::ImportanceRow;

    fn share_table(entries: &[(&str, &str, f64)]) -> ImportanceTable<f64> {
        ImportanceTable {
            rows: entries
                .iter()
                .map(|&(kpi, feature, share)| ImportanceRow {
                    kpi: kpi.to_string(),
                    feature: feature.to_string(),
                    mean_abs_phi: share,
                    normalized_share: share,
                    degenerate: false,
                })
                .collect(),
        }
    }

    fn roles(rcps: &[&str], context: &[&str]) -> BTreeMap<String, ColumnRole> {
        let mut m = BTreeMap::new();
        for r in rcps {
            m.insert(r.to_string(), ColumnRole::Rcp);
        }
        for c in context {
            m.insert(c.to_string(), ColumnRole::Context);
        }
        m
    }

    /// The three-application topology used throughout the taxonomy tests:
    /// a1 -> {p1, p2}, a2 -> {p2, p3}; p1 -> k1, p3 -> k1, p3 -> k3;
    /// structural p1 -> p3.
    pub(crate) fn reference_topology() -> (ConflictGraph, CausalDag) {
        let dag = CausalDag::new(
            vec![
                ("p1".into(), NodeRole::Rcp),
                ("p2".into(), NodeRole::Rcp),
                ("p3".into(), NodeRole::Rcp),
                ("k1".into(), NodeRole::Kpi),
                ("k2".into(), NodeRole::Kpi),
                ("k3".into(), NodeRole::Kpi),
            ],
            vec![
                ("p1".into(), "k1".into()),
                ("p3".into(), "k1".into()),
                ("p3".into(), "k3".into()),
                ("p1".into(), "p3".into()),
            ],
        )
        .unwrap();
        let xapps = vec![
            XApp {
                id: "a1".into(),
                name: "first".into(),
                controlled_rcps: vec!["p1".into(), "p2".into()],
                target_kpis: vec!["k1".into()],
            },
            XApp {
                id: "a2".into(),
                name: "second".into(),
                controlled_rcps: vec!["p2".into(), "p3".into()],
                target_kpis: vec!["k3".into()],
            },
        ];
        let graph = ConflictGraph::from_scenario(xapps, &dag).unwrap();
        (graph, dag)
    }

    #[test]
    fn reference_topology_yields_exactly_three_findings() {
        let (graph, dag) = reference_topology();
        let report = classify_conflicts(&graph, &dag);
        assert_eq!(
            report.findings,
            vec![
                Finding::Direct {
                    xapps: ["a1".into(), "a2".into()],
                    rcp: "p2".into(),
                },
                Finding::Indirect {
                    xapps: ["a1".into(), "a2".into()],
                    rcps: ["p1".into(), "p3".into()],
                    kpi: "k1".into(),
                },
                Finding::Implicit {
                    xapps: ["a1".into(), "a2".into()],
                    path: ["p1".into(), "p3".into(), "k3".into()],
                },
            ]
        );
    }

    #[test]
    fn effect_pairs_cover_indirect_and_implicit_participants() {
        let (graph, dag) = reference_topology();
        let report = classify_conflicts(&graph, &dag);
        assert_eq!(
            report.effect_pairs(),
            vec![
                ("p1".to_string(), "k1".to_string()),
                ("p1".to_string(), "k3".to_string()),
                ("p3".to_string(), "k1".to_string()),
                ("p3".to_string(), "k3".to_string()),
            ]
        );
    }

    #[test]
    fn threshold_selects_edges() {
        let table = share_table(&[("k", "p1", 0.5), ("k", "p2", 0.4), ("k", "p3", 0.02)]);
        let dag = build_dag(&table, &roles(&["p1", "p2", "p3"], &[]), &[], 0.1, true).unwrap();
        assert!(dag.has_edge("p1", "k"));
        assert!(dag.has_edge("p2", "k"));
        assert!(!dag.has_edge("p3", "k"));
    }

    #[test]
    fn structural_edges_survive_regardless_of_shares() {
        let table = share_table(&[("k", "p1", 0.9), ("k", "p2", 0.0)]);
        let structural = vec![("p1".to_string(), "p2".to_string())];
        let dag = build_dag(&table, &roles(&["p1", "p2"], &[]), &structural, 0.1, true).unwrap();
        assert!(dag.has_edge("p1", "p2"));
    }

    #[test]
    fn declared_cycle_is_reported() {
        let table = share_table(&[("k", "p", 0.9), ("k", "q", 0.9)]);
        let structural = vec![
            ("p".to_string(), "q".to_string()),
            ("q".to_string(), "p".to_string()),
        ];
        let err = build_dag(&table, &roles(&["p", "q"], &[]), &structural, 0.1, true).unwrap_err();
        match err {
            GraphError::Cycle(cycle) => {
                assert!(cycle.len() >= 3);
                assert_eq!(cycle.first(), cycle.last());
            }
            other => panic!("expected cycle error, got {other}"),
        }
    }

    #[test]
    fn context_features_gain_edges_only_when_enabled() {
        let table = share_table(&[("k", "p", 0.6), ("k", "ctx", 0.4)]);
        let r = roles(&["p"], &["ctx"]);
        let with = build_dag(&table, &r, &[], 0.1, true).unwrap();
        assert!(with.has_edge("ctx", "k"));
        let without = build_dag(&table, &r, &[], 0.1, false).unwrap();
        assert!(without.index_of("ctx").is_none());
    }

    #[test]
    fn raising_tau_only_removes_edges() {
        let table = share_table(&[
            ("k1", "p1", 0.35),
            ("k1", "p2", 0.15),
            ("k1", "p3", 0.5),
            ("k2", "p1", 0.08),
            ("k2", "p2", 0.72),
            ("k2", "p3", 0.2),
        ]);
        let r = roles(&["p1", "p2", "p3"], &[]);
        let mut prev: Option<Vec<(String, String)>> = None;
        for tau in [0.05, 0.1, 0.18, 0.4, 0.6] {
            let edges = build_dag(&table, &r, &[], tau, true).unwrap().edges();
            if let Some(prev) = &prev {
                assert!(edges.iter().all(|e| prev.contains(e)), "tau={tau}");
            }
            prev = Some(edges);
        }
    }

    #[test]
    fn bad_tau_rejected() {
        let table = share_table(&[("k", "p", 0.5)]);
        let r = roles(&["p"], &[]);
        assert!(matches!(
            build_dag(&table, &r, &[], 0.0, true),
            Err(GraphError::BadTau(_))
        ));
        assert!(matches!(
            build_dag(&table, &r, &[], 1.0, true),
            Err(GraphError::BadTau(_))
        ));
    }

    #[test]
    fn findings_are_equivariant_under_relabeling() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(99);
        for _ in 0..50 {
            // Random small scenario.
            let n_rcps = rng.gen_range(2..5usize);
            let n_kpis = rng.gen_range(1..4usize);
            let rcps: Vec<String> = (0..n_rcps).map(|i| format!("p{i}")).collect();
            let kpis: Vec<String> = (0..n_kpis).map(|i| format!("k{i}")).collect();
            let mut nodes: Vec<(String, NodeRole)> =
                rcps.iter().map(|p| (p.clone(), NodeRole::Rcp)).collect();
            nodes.extend(kpis.iter().map(|k| (k.clone(), NodeRole::Kpi)));
            let mut edges = Vec::new();
            for p in &rcps {
                for k in &kpis {
                    if rng.gen_bool(0.5) {
                        edges.push((p.clone(), k.clone()));
                    }
                }
            }
            // forward-only structural edges keep the graph acyclic
            for i in 0..n_rcps {
                for j in (i + 1)..n_rcps {
                    if rng.gen_bool(0.3) {
                        edges.push((rcps[i].clone(), rcps[j].clone()));
                    }
                }
            }
            let dag = CausalDag::new(nodes.clone(), edges.clone()).unwrap();
            let xapps: Vec<XApp> = (0..2)
                .map(|i| XApp {
                    id: format!("a{i}"),
                    name: format!("app {i}"),
                    controlled_rcps: rcps
                        .iter()
                        .filter(|_| rng.gen_bool(0.6))
                        .cloned()
                        .collect(),
                    target_kpis: vec![],
                })
                .collect();
            let graph = ConflictGraph::from_scenario(xapps.clone(), &dag).unwrap();
            let report = classify_conflicts(&graph, &dag);

            // Relabel with a map that reverses lexicographic order, so the
            // canonical pair orientation actually flips.
            let mut all: Vec<String> = nodes.iter().map(|(n, _)| n.clone()).collect();
            all.extend(xapps.iter().map(|x| x.id.clone()));
            all.sort();
            let map: BTreeMap<String, String> = all
                .iter()
                .enumerate()
                .map(|(rank, name)| (name.clone(), format!("n{:02}", all.len() - 1 - rank)))
                .collect();
            let relabel = |s: &str| map[s].clone();

            let nodes2: Vec<(String, NodeRole)> =
                nodes.iter().map(|(n, r)| (relabel(n), *r)).collect();
            let edges2: Vec<(String, String)> = edges
                .iter()
                .map(|(f, t)| (relabel(f), relabel(t)))
                .collect();
            let dag2 = CausalDag::new(nodes2, edges2).unwrap();
            let xapps2: Vec<XApp> = xapps
                .iter()
                .map(|x| XApp {
                    id: relabel(&x.id),
                    name: x.name.clone(),
                    controlled_rcps: x.controlled_rcps.iter().map(|p| relabel(p)).collect(),
                    target_kpis: vec![],
                })
                .collect();
            let graph2 = ConflictGraph::from_scenario(xapps2, &dag2).unwrap();
            let report2 = classify_conflicts(&graph2, &dag2);

            let resort = |mut pair: [String; 2]| {
                pair.sort();
                pair
            };
            let mut mapped: Vec<Finding> = report
                .findings
                .iter()
                .map(|f| match f {
                    Finding::Direct { xapps, rcp } => Finding::Direct {
                        xapps: resort([relabel(&xapps[0]), relabel(&xapps[1])]),
                        rcp: relabel(rcp),
                    },
                    Finding::Indirect { xapps, rcps, kpi } => Finding::Indirect {
                        xapps: resort([relabel(&xapps[0]), relabel(&xapps[1])]),
                        rcps: resort([relabel(&rcps[0]), relabel(&rcps[1])]),
                        kpi: relabel(kpi),
                    },
                    Finding::Implicit { xapps, path } => Finding::Implicit {
                        xapps: resort([relabel(&xapps[0]), relabel(&xapps[1])]),
                        path: [relabel(&path[0]), relabel(&path[1]), relabel(&path[2])],
                    },
                })
                .collect();
            mapped.sort();
            assert_eq!(mapped, report2.findings);
        }
    }
}
