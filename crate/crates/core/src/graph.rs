//! Single-time-point causal DAG and its temporal unrolling.
//!
//! The graph is configuration: a list of typed variables plus parent → child
//! edges. At `t = 0` every variable depends on its same-time parents only. At
//! `t >= 1` each dynamic variable additionally depends on its own value at
//! `t - 1`; there are no cross-lagged edges. Static variables and the latent
//! subtype are drawn once per trajectory.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Categorical {
        levels: Vec<String>,
        /// Levels are numeric labels; the variable enters other models as a
        /// single numeric column rather than a one-hot block.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        ordinal: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Temporal {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Covariate,
    Outcome,
    Diagnosis,
    Latent,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Covariate => "covariate",
            Role::Outcome => "outcome",
            Role::Diagnosis => "diagnosis",
            Role::Latent => "latent",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
    pub temporal: Temporal,
    pub role: Role,
}

impl VariableSpec {
    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            VariableKind::Categorical { levels, .. } => Some(levels),
            VariableKind::Continuous => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, VariableKind::Categorical { .. })
    }

    pub fn is_ordinal(&self) -> bool {
        matches!(self.kind, VariableKind::Categorical { ordinal: true, .. })
    }

    pub fn is_dynamic(&self) -> bool {
        self.temporal == Temporal::Dynamic
    }

    /// Index of `label` among the declared levels.
    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels()?.iter().position(|l| l == label)
    }
}

/// One problem found by [`CausalGraph::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum GraphIssue {
    DuplicateVariable(String),
    DanglingEdge { parent: String, child: String },
    SelfEdge(String),
    CycleDetected(Vec<String>),
    LatentHasParents { latent: String, parents: Vec<String> },
    StaticWithDynamicParent { child: String, parent: String },
    BadLevels { variable: String, reason: String },
    RoleCount { role: Role, count: usize },
    LatentNotDeclared(String),
}

impl fmt::Display for GraphIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphIssue::DuplicateVariable(n) => write!(f, "duplicate variable `{n}`"),
            GraphIssue::DanglingEdge { parent, child } => {
                write!(f, "edge {parent} -> {child} references an undeclared variable")
            }
            GraphIssue::SelfEdge(n) => write!(f, "self edge on `{n}`"),
            GraphIssue::CycleDetected(c) => write!(f, "cycle detected: [{}]", c.join(", ")),
            GraphIssue::LatentHasParents { latent, parents } => {
                write!(f, "latent `{latent}` has parents [{}]", parents.join(", "))
            }
            GraphIssue::StaticWithDynamicParent { child, parent } => {
                write!(f, "static `{child}` has dynamic parent `{parent}`")
            }
            GraphIssue::BadLevels { variable, reason } => {
                write!(f, "categorical `{variable}`: {reason}")
            }
            GraphIssue::RoleCount { role, count } => {
                write!(f, "expected exactly one {role} variable, found {count}")
            }
            GraphIssue::LatentNotDeclared(n) => {
                write!(f, "latent `{n}` is not a declared latent-role variable")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid causal graph:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<GraphIssue>),
    #[error("cycle detected: [{}]", .0.join(", "))]
    CycleDetected(Vec<String>),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("graph config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("graph config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub latent: String,
    pub variables: Vec<VariableSpec>,
    pub edges: Vec<(String, String)>,
}

/// A parent reference in the unrolled graph. `offset` is 0 for same-time
/// parents and -1 for the self-lag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentRef {
    pub name: String,
    pub offset: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnrolledParents {
    pub child: String,
    pub time: usize,
    pub parents: Vec<ParentRef>,
}

impl UnrolledParents {
    pub fn same_time(&self) -> impl Iterator<Item = &str> {
        self.parents.iter().filter(|p| p.offset == 0).map(|p| p.name.as_str())
    }

    pub fn has_lag(&self) -> bool {
        self.parents.iter().any(|p| p.offset == -1)
    }
}

/// Node in the time-unrolled graph. `time` is `None` for static and latent
/// variables, which exist once per trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UnrolledNode {
    pub name: String,
    pub time: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct UnrolledGraph {
    pub nodes: Vec<UnrolledNode>,
    pub edges: Vec<(usize, usize)>,
}

impl CausalGraph {
    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("graph serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn variable(&self, name: &str) -> Result<&VariableSpec, GraphError> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| GraphError::UnknownVariable(name.to_string()))
    }

    fn by_role(&self, role: Role) -> &VariableSpec {
        self.variables
            .iter()
            .find(|v| v.role == role)
            .expect("validated graph has every role")
    }

    /// The outcome variable, i.e. the untreated outcome `Y(0)`.
    pub fn outcome(&self) -> &VariableSpec {
        self.by_role(Role::Outcome)
    }

    pub fn diagnosis(&self) -> &VariableSpec {
        self.by_role(Role::Diagnosis)
    }

    pub fn latent_var(&self) -> &VariableSpec {
        self.by_role(Role::Latent)
    }

    /// Observed variables (everything except the latent), in declaration order.
    pub fn observed(&self) -> impl Iterator<Item = &VariableSpec> {
        self.variables.iter().filter(|v| v.role != Role::Latent)
    }

    /// Same-time parents of `child`, in declaration order of the parents.
    pub fn parents_of(&self, child: &str) -> Vec<&str> {
        let mut ps: Vec<(usize, &str)> = self
            .edges
            .iter()
            .filter(|(_, c)| c == child)
            .filter_map(|(p, _)| self.index_of(p).map(|i| (i, p.as_str())))
            .collect();
        ps.sort_by_key(|(i, _)| *i);
        ps.dedup();
        ps.into_iter().map(|(_, p)| p).collect()
    }

    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut issues = Vec::new();

        let mut seen = HashSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                issues.push(GraphIssue::DuplicateVariable(v.name.clone()));
            }
            if let VariableKind::Categorical { levels, ordinal } = &v.kind {
                if levels.len() < 2 {
                    issues.push(GraphIssue::BadLevels {
                        variable: v.name.clone(),
                        reason: format!("needs at least 2 levels, has {}", levels.len()),
                    });
                }
                let distinct: HashSet<_> = levels.iter().collect();
                if distinct.len() != levels.len() {
                    issues.push(GraphIssue::BadLevels {
                        variable: v.name.clone(),
                        reason: "levels are not distinct".into(),
                    });
                }
                if *ordinal && levels.iter().any(|l| l.parse::<f64>().is_err()) {
                    issues.push(GraphIssue::BadLevels {
                        variable: v.name.clone(),
                        reason: "ordinal levels must be numeric labels".into(),
                    });
                }
            }
        }

        for role in [Role::Outcome, Role::Diagnosis, Role::Latent] {
            let count = self.variables.iter().filter(|v| v.role == role).count();
            if count != 1 {
                issues.push(GraphIssue::RoleCount { role, count });
            }
        }
        match self.variables.iter().find(|v| v.name == self.latent) {
            Some(v) if v.role == Role::Latent => {}
            _ => issues.push(GraphIssue::LatentNotDeclared(self.latent.clone())),
        }

        let names: HashMap<&str, &VariableSpec> =
            self.variables.iter().map(|v| (v.name.as_str(), v)).collect();
        let mut acyclic_edges = Vec::new();
        for (p, c) in &self.edges {
            if !names.contains_key(p.as_str()) || !names.contains_key(c.as_str()) {
                issues.push(GraphIssue::DanglingEdge { parent: p.clone(), child: c.clone() });
                continue;
            }
            if p == c {
                issues.push(GraphIssue::SelfEdge(p.clone()));
                continue;
            }
            acyclic_edges.push((p.as_str(), c.as_str()));
        }

        let latent_parents: Vec<String> = acyclic_edges
            .iter()
            .filter(|(_, c)| *c == self.latent)
            .map(|(p, _)| p.to_string())
            .collect();
        if !latent_parents.is_empty() {
            issues.push(GraphIssue::LatentHasParents {
                latent: self.latent.clone(),
                parents: latent_parents,
            });
        }

        for (p, c) in &acyclic_edges {
            if names[c].temporal == Temporal::Static && names[p].temporal == Temporal::Dynamic {
                issues.push(GraphIssue::StaticWithDynamicParent {
                    child: c.to_string(),
                    parent: p.to_string(),
                });
            }
        }

        if let Some(cycle) = find_cycle(&self.variables, &acyclic_edges) {
            issues.push(GraphIssue::CycleDetected(cycle));
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(GraphError::Invalid(issues))
        }
    }

    /// Parent-before-child ordering of all variables. Ties go to the variable
    /// declared first.
    pub fn topological_order(&self) -> Result<Vec<String>, GraphError> {
        let n = self.variables.len();
        let mut indeg = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (p, c) in &self.edges {
            let pi = self.index_of(p).ok_or_else(|| GraphError::UnknownVariable(p.clone()))?;
            let ci = self.index_of(c).ok_or_else(|| GraphError::UnknownVariable(c.clone()))?;
            children[pi].push(ci);
            indeg[ci] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(self.variables[i].name.clone());
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != n {
            let edges: Vec<(&str, &str)> =
                self.edges.iter().map(|(p, c)| (p.as_str(), c.as_str())).collect();
            let cycle = find_cycle(&self.variables, &edges).unwrap_or_default();
            return Err(GraphError::CycleDetected(cycle));
        }
        Ok(order)
    }

    /// Parents of `child` at step `t` in the unrolled graph.
    pub fn parents_at(&self, child: &str, t: usize) -> Result<UnrolledParents, GraphError> {
        let spec = self.variable(child)?;
        let mut parents: Vec<ParentRef> = self
            .parents_of(child)
            .into_iter()
            .map(|p| ParentRef { name: p.to_string(), offset: 0 })
            .collect();
        if t >= 1 && spec.is_dynamic() && spec.role != Role::Latent {
            parents.push(ParentRef { name: child.to_string(), offset: -1 });
        }
        Ok(UnrolledParents { child: child.to_string(), time: t, parents })
    }

    /// Unrolls the graph over `horizon` steps.
    pub fn unroll(&self, horizon: usize) -> Result<UnrolledGraph, GraphError> {
        let mut nodes = Vec::new();
        let mut index: HashMap<(String, Option<usize>), usize> = HashMap::new();
        let once = |v: &VariableSpec| v.role == Role::Latent || v.temporal == Temporal::Static;
        for v in &self.variables {
            if once(v) {
                index.insert((v.name.clone(), None), nodes.len());
                nodes.push(UnrolledNode { name: v.name.clone(), time: None });
            }
        }
        for t in 0..horizon {
            for v in self.variables.iter().filter(|v| !once(v)) {
                index.insert((v.name.clone(), Some(t)), nodes.len());
                nodes.push(UnrolledNode { name: v.name.clone(), time: Some(t) });
            }
        }
        let lookup = |name: &str, t: usize| -> usize {
            index
                .get(&(name.to_string(), Some(t)))
                .or_else(|| index.get(&(name.to_string(), None)))
                .copied()
                .expect("every declared variable is unrolled")
        };
        let mut edges = Vec::new();
        for t in 0..horizon {
            for v in &self.variables {
                if once(v) && t > 0 {
                    continue;
                }
                let child = lookup(&v.name, t);
                for p in self.parents_at(&v.name, t)?.parents {
                    let pt = (t as i64 + p.offset as i64) as usize;
                    edges.push((lookup(&p.name, pt), child));
                }
            }
        }
        Ok(UnrolledGraph { nodes, edges })
    }
}

impl UnrolledGraph {
    pub fn is_acyclic(&self) -> bool {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in &self.edges {
            children[p].push(c);
            indeg[c] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut visited = 0;
        while let Some(i) = stack.pop() {
            visited += 1;
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        visited == n
    }
}

/// Depth-first search for a directed cycle; returns the cycle's nodes in
/// traversal order.
fn find_cycle(vars: &[VariableSpec], edges: &[(&str, &str)]) -> Option<Vec<String>> {
    let idx: HashMap<&str, usize> =
        vars.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let n = vars.len();
    let mut adj = vec![Vec::new(); n];
    for (p, c) in edges {
        if let (Some(&pi), Some(&ci)) = (idx.get(p), idx.get(c)) {
            adj[pi].push(ci);
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut stack: Vec<usize> = Vec::new();

    fn dfs(
        u: usize,
        adj: &[Vec<usize>],
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        state[u] = 1;
        stack.push(u);
        for &w in &adj[u] {
            if state[w] == 1 {
                let start = stack.iter().position(|&s| s == w).expect("on stack");
                return Some(stack[start..].to_vec());
            }
            if state[w] == 0 {
                if let Some(c) = dfs(w, adj, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[u] = 2;
        None
    }

    for s in 0..n {
        if state[s] == 0 {
            if let Some(c) = dfs(s, &adj, &mut state, &mut stack) {
                return Some(c.into_iter().map(|i| vars[i].name.clone()).collect());
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    fn cont(name: &str, temporal: Temporal, role: Role) -> VariableSpec {
        VariableSpec { name: name.into(), kind: VariableKind::Continuous, temporal, role }
    }

    fn tiny(edges: &[(&str, &str)]) -> CausalGraph {
        CausalGraph {
            latent: "Z".into(),
            variables: vec![
                VariableSpec {
                    name: "Z".into(),
                    kind: VariableKind::Categorical { levels: vec!["0".into(), "1".into()], ordinal: false },
                    temporal: Temporal::Static,
                    role: Role::Latent,
                },
                cont("Tau", Temporal::Dynamic, Role::Covariate),
                cont("PTau", Temporal::Dynamic, Role::Covariate),
                cont("ADAS13", Temporal::Dynamic, Role::Outcome),
                VariableSpec {
                    name: "Diagnosis".into(),
                    kind: VariableKind::Categorical {
                        levels: vec!["CN".into(), "MCI".into(), "Dementia".into()],
                        ordinal: false,
                    },
                    temporal: Temporal::Dynamic,
                    role: Role::Diagnosis,
                },
            ],
            edges: edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    #[test]
    fn empty_edges_validate() {
        tiny(&[]).validate().unwrap();
    }

    #[test]
    fn two_cycle_is_reported() {
        let g = tiny(&[("Tau", "PTau"), ("PTau", "Tau")]);
        let GraphError::Invalid(issues) = g.validate().unwrap_err() else { panic!() };
        assert!(issues.contains(&GraphIssue::CycleDetected(vec!["Tau".into(), "PTau".into()])));
        assert!(matches!(g.topological_order(), Err(GraphError::CycleDetected(_))));
    }

    #[test]
    fn reports_every_violation() {
        let mut g = tiny(&[("Tau", "Ghost"), ("Tau", "Tau"), ("Tau", "Z")]);
        g.variables.push(cont("Tau", Temporal::Dynamic, Role::Covariate));
        let GraphError::Invalid(issues) = g.validate().unwrap_err() else { panic!() };
        assert!(issues.contains(&GraphIssue::DuplicateVariable("Tau".into())));
        assert!(issues.iter().any(|i| matches!(i, GraphIssue::DanglingEdge { child, .. } if child == "Ghost")));
        assert!(issues.contains(&GraphIssue::SelfEdge("Tau".into())));
        assert!(issues.iter().any(|i| matches!(i, GraphIssue::LatentHasParents { .. })));
    }

    #[test]
    fn static_child_of_dynamic_rejected() {
        let mut g = tiny(&[("Tau", "Gender")]);
        g.variables.push(VariableSpec {
            name: "Gender".into(),
            kind: VariableKind::Categorical { levels: vec!["F".into(), "M".into()], ordinal: false },
            temporal: Temporal::Static,
            role: Role::Covariate,
        });
        let GraphError::Invalid(issues) = g.validate().unwrap_err() else { panic!() };
        assert_eq!(
            issues,
            vec![GraphIssue::StaticWithDynamicParent { child: "Gender".into(), parent: "Tau".into() }]
        );
    }

    #[test]
    fn bad_levels_and_roles() {
        let mut g = tiny(&[]);
        g.variables.push(VariableSpec {
            name: "One".into(),
            kind: VariableKind::Categorical { levels: vec!["a".into()], ordinal: false },
            temporal: Temporal::Static,
            role: Role::Outcome,
        });
        let GraphError::Invalid(issues) = g.validate().unwrap_err() else { panic!() };
        assert!(issues.iter().any(|i| matches!(i, GraphIssue::BadLevels { .. })));
        assert!(issues.contains(&GraphIssue::RoleCount { role: Role::Outcome, count: 2 }));
    }

    #[test]
    fn chain_order() {
        let g = tiny(&[("Z", "Tau"), ("Tau", "ADAS13")]);
        let order = g.topological_order().unwrap();
        let pos = |n: &str| order.iter().position(|o| o == n).unwrap();
        assert!(pos("Z") < pos("Tau") && pos("Tau") < pos("ADAS13"));
    }

    #[test]
    fn ties_follow_declaration() {
        let g = tiny(&[("Z", "Tau"), ("Z", "PTau")]);
        let order = g.topological_order().unwrap();
        assert_eq!(&order[..3], &["Z", "Tau", "PTau"]);
    }

    #[test]
    fn default_graph_properties() {
        let g = reference::default_graph();
        g.validate().unwrap();
        let order = g.topological_order().unwrap();
        assert_eq!(order[0], "Z");
        let pos = |n: &str| order.iter().position(|o| o == n).unwrap();
        assert!(pos("ADAS13") < pos("Diagnosis"));
        for (p, c) in &g.edges {
            assert!(pos(p) < pos(c), "{p} -> {c}");
        }
    }

    #[test]
    fn tau_parents_follow_the_unrolling_rule() {
        let g = reference::default_graph();
        let at3 = g.parents_at("Tau", 3).unwrap();
        let same: BTreeSet<&str> = at3.same_time().collect();
        assert_eq!(same, BTreeSet::from(["APOE4", "Race", "Z"]));
        let lags: Vec<_> = at3.parents.iter().filter(|p| p.offset == -1).collect();
        assert_eq!(lags, vec![&ParentRef { name: "Tau".into(), offset: -1 }]);

        let at0 = g.parents_at("Tau", 0).unwrap();
        assert_eq!(at0.same_time().collect::<BTreeSet<_>>(), same);
        assert!(!at0.has_lag());

        let gender = g.parents_at("Gender", 5).unwrap();
        assert!(gender.parents.is_empty());
        assert!(matches!(g.parents_at("Nope", 0), Err(GraphError::UnknownVariable(_))));
    }

    #[test]
    fn parents_are_stationary_after_first_step() {
        let g = reference::default_graph();
        for v in &g.variables {
            let one = g.parents_at(&v.name, 1).unwrap().parents;
            for t in 2..6 {
                assert_eq!(g.parents_at(&v.name, t).unwrap().parents, one);
            }
        }
    }

    #[test]
    fn unrolled_graph_is_acyclic_with_expected_size() {
        let g = reference::default_graph();
        let n_dyn = g.variables.iter().filter(|v| v.is_dynamic() && v.role != Role::Latent).count();
        let n_static = g
            .variables
            .iter()
            .filter(|v| v.temporal == Temporal::Static && v.role != Role::Latent)
            .count();
        for t in 1..=4 {
            let u = g.unroll(t).unwrap();
            assert_eq!(u.nodes.len(), t * n_dyn + n_static + 1);
            assert!(u.is_acyclic());
        }
    }

    #[test]
    fn json_round_trip() {
        let g = reference::default_graph();
        let back = CausalGraph::from_json(&g.to_json_pretty()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.hash(), g.hash());
    }
}
