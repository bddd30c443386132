//! Build programs: model-building instructions that reference variables by canonical
//! name, so the same program can run on a local graph or on a worker in one request.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::algebra::{canonical_name, AffineExpr, Constraint, Sense, VariableBounds, VariableId};
use crate::error::ModelError;
use crate::graph::OptiGraph;
use crate::remote::proxy::{node_to_proxy, variable_to_proxy, ProxyNodeRef, ProxyVariableRef};

/// Affine expression over canonical variable names.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NamedExpr {
    pub terms: Vec<(String, f64)>,
    pub constant: f64,
}

impl NamedExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, name: impl Into<String>, coefficient: f64) -> Self {
        self.terms.push((name.into(), coefficient));
        self
    }

    pub fn constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn le(self, rhs: f64) -> NamedConstraint {
        NamedConstraint {
            body: self,
            sense: Sense::LessEqual,
            rhs,
        }
    }

    pub fn eq(self, rhs: f64) -> NamedConstraint {
        NamedConstraint {
            body: self,
            sense: Sense::Equal,
            rhs,
        }
    }

    pub fn ge(self, rhs: f64) -> NamedConstraint {
        NamedConstraint {
            body: self,
            sense: Sense::GreaterEqual,
            rhs,
        }
    }

    pub fn resolve<F>(&self, mut lookup: F) -> Result<AffineExpr, ModelError>
    where
        F: FnMut(&str) -> Result<VariableId, ModelError>,
    {
        let mut expr = AffineExpr::constant(self.constant);
        for (name, c) in &self.terms {
            expr.add_term(lookup(name)?, *c);
        }
        Ok(expr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedConstraint {
    pub body: NamedExpr,
    pub sense: Sense,
    pub rhs: f64,
}

impl NamedConstraint {
    pub fn resolve<F>(&self, lookup: F) -> Result<Constraint, ModelError>
    where
        F: FnMut(&str) -> Result<VariableId, ModelError>,
    {
        Ok(Constraint::new(self.body.resolve(lookup)?, self.sense, self.rhs))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.body.terms.iter().map(|(n, _)| n.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Instruction {
    AddNode {
        label: String,
    },
    AddVariable {
        node: String,
        name: String,
        subscripts: Vec<i64>,
        bounds: VariableBounds,
    },
    AddConstraint {
        node: String,
        constraint: NamedConstraint,
    },
    SetObjective {
        node: String,
        objective: NamedExpr,
    },
    AddLinkConstraint {
        constraint: NamedConstraint,
    },
}

/// Instruction list plus the canonical names whose proxies the caller wants back.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildProgram {
    pub instructions: Vec<Instruction>,
    pub fetch: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgramOutput {
    pub nodes: Vec<ProxyNodeRef>,
    pub fetched: Vec<ProxyVariableRef>,
}

impl BuildProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn add_node(&mut self, label: &str) {
        self.instructions.push(Instruction::AddNode {
            label: label.to_string(),
        });
    }

    /// Appends a variable instruction and returns its canonical name.
    pub fn add_variable(&mut self, node: &str, name: &str, bounds: VariableBounds, subscripts: &[i64]) -> String {
        self.instructions.push(Instruction::AddVariable {
            node: node.to_string(),
            name: name.to_string(),
            subscripts: subscripts.to_vec(),
            bounds,
        });
        canonical_name(node, name, subscripts).unwrap_or_else(|_| format!("{node}[:{name}]"))
    }

    pub fn add_constraint(&mut self, node: &str, constraint: NamedConstraint) {
        self.instructions.push(Instruction::AddConstraint {
            node: node.to_string(),
            constraint,
        });
    }

    pub fn set_objective(&mut self, node: &str, objective: NamedExpr) {
        self.instructions.push(Instruction::SetObjective {
            node: node.to_string(),
            objective,
        });
    }

    pub fn add_link_constraint(&mut self, constraint: NamedConstraint) {
        self.instructions.push(Instruction::AddLinkConstraint { constraint });
    }

    pub fn fetch(&mut self, name: impl Into<String>) {
        self.fetch.push(name.into());
    }
}

/// Looks up a variable by canonical name anywhere in the hierarchy.
pub fn variable_by_name(graph: &OptiGraph, canonical: &str) -> Result<VariableId, ModelError> {
    let label = canonical.split("[:").next().unwrap_or(canonical);
    graph
        .node_by_label(label)
        .and_then(|n| n.variable_by_name(canonical))
        .ok_or_else(|| ModelError::UnknownVariable(canonical.to_string()))
}

fn node_id(graph: &OptiGraph, label: &str) -> Result<crate::algebra::NodeId, ModelError> {
    graph
        .node_by_label(label)
        .map(|n| n.id())
        .ok_or_else(|| ModelError::UnknownNodeLabel(label.to_string()))
}

fn apply_instruction(graph: &mut OptiGraph, ins: &Instruction, out: &mut ProgramOutput) -> Result<(), ModelError> {
    match ins {
        Instruction::AddNode { label } => {
            let id = graph.add_node(label)?;
            out.nodes.push(node_to_proxy(graph, id)?);
        }
        Instruction::AddVariable {
            node,
            name,
            subscripts,
            bounds,
        } => {
            let id = node_id(graph, node)?;
            graph.add_variable(id, name, *bounds, subscripts)?;
        }
        Instruction::AddConstraint { node, constraint } => {
            let id = node_id(graph, node)?;
            let c = constraint.resolve(|n| variable_by_name(graph, n))?;
            graph.add_constraint(id, c)?;
        }
        Instruction::SetObjective { node, objective } => {
            let id = node_id(graph, node)?;
            let e = objective.resolve(|n| variable_by_name(graph, n))?;
            graph.set_node_objective(id, e)?;
        }
        Instruction::AddLinkConstraint { constraint } => {
            let c = constraint.resolve(|n| variable_by_name(graph, n))?;
            graph.add_link_constraint(c)?;
        }
    }
    Ok(())
}

/// Runs a program against a graph. On failure the graph is restored to its state
/// before the program and the error names the failing instruction.
pub fn apply_program(graph: &mut OptiGraph, program: &BuildProgram) -> Result<ProgramOutput, ModelError> {
    let snapshot = graph.clone();
    let mut out = ProgramOutput::default();
    let result = (|| {
        for (index, ins) in program.instructions.iter().enumerate() {
            apply_instruction(graph, ins, &mut out).map_err(|e| ModelError::Instruction {
                index,
                source: Box::new(e),
            })?;
        }
        for name in &program.fetch {
            let id = variable_by_name(graph, name)?;
            out.fetched.push(variable_to_proxy(graph, id)?);
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(out),
        Err(e) => {
            *graph = snapshot;
            Err(e)
        }
    }
}

/// A graph hierarchy described as programs. Link constraints reference variables by
/// path `sub/.../canonical` relative to the plan that holds the link.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphPlan {
    pub label: String,
    pub program: BuildProgram,
    pub subgraphs: Vec<GraphPlan>,
    pub links: Vec<NamedConstraint>,
}

impl GraphPlan {
    pub fn new(label: &str) -> Self {
        Self {
            label: label.to_string(),
            ..Self::default()
        }
    }

    pub fn subgraph(&self, label: &str) -> Option<&GraphPlan> {
        self.subgraphs.iter().find(|s| s.label == label)
    }

    /// Canonical names each plan must hand back so that every link can be resolved,
    /// keyed by subgraph path relative to this plan.
    pub fn fetch_requirements(&self) -> BTreeMap<Vec<String>, BTreeSet<String>> {
        let mut out: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
        self.collect_requirements(&mut Vec::new(), &mut out);
        out
    }

    fn collect_requirements(&self, prefix: &mut Vec<String>, out: &mut BTreeMap<Vec<String>, BTreeSet<String>>) {
        for link in &self.links {
            for path in link.names() {
                let (sub, name) = split_path(path);
                let mut key = prefix.clone();
                key.extend(sub.iter().map(|s| s.to_string()));
                out.entry(key).or_default().insert(name.to_string());
            }
        }
        for sub in &self.subgraphs {
            prefix.push(sub.label.clone());
            sub.collect_requirements(prefix, out);
            prefix.pop();
        }
    }
}

/// Splits `a/b/name` into (["a","b"], "name").
pub fn split_path(path: &str) -> (Vec<&str>, &str) {
    let mut parts: Vec<&str> = path.split('/').collect();
    let name = parts.pop().unwrap_or(path);
    (parts, name)
}

/// Resolves a relative variable path against a local graph hierarchy.
pub fn resolve_path(graph: &OptiGraph, path: &str) -> Result<VariableId, ModelError> {
    let (subs, name) = split_path(path);
    let mut g = graph;
    for s in subs {
        g = g
            .subgraph(s)
            .ok_or_else(|| ModelError::UnknownVariable(path.to_string()))?;
    }
    variable_by_name(g, name)
}

/// Builds a plan as one local graph hierarchy.
pub fn realize_local(plan: &GraphPlan) -> Result<OptiGraph, ModelError> {
    let mut graph = OptiGraph::new(&plan.label);
    apply_program(&mut graph, &plan.program)?;
    for sub in &plan.subgraphs {
        graph.add_subgraph(realize_local(sub)?)?;
    }
    for link in &plan.links {
        let c = link.resolve(|p| resolve_path(&graph, p))?;
        graph.add_link_constraint(c)?;
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node_program(vars: usize) -> BuildProgram {
        let mut p = BuildProgram::new();
        p.add_node("n");
        let mut obj = NamedExpr::new();
        for i in 0..vars {
            let name = p.add_variable("n", "x", VariableBounds::non_negative(), &[i as i64]);
            obj = obj.term(name, 1.0);
        }
        p.set_objective("n", obj);
        p
    }

    #[test]
    fn program_builds_node() {
        let mut g = OptiGraph::new("g");
        let mut p = node_program(3);
        p.fetch("n[:x][2]");
        let out = apply_program(&mut g, &p).unwrap();
        assert_eq!(out.nodes.len(), 1);
        assert_eq!(out.fetched[0].name, "n[:x][2]");
        assert_eq!(g.num_variables(), 3);
        assert_eq!(g.objective().len(), 3);
    }

    #[test]
    fn empty_program_is_noop() {
        let mut g = OptiGraph::new("g");
        let before = g.canonical_dump();
        let out = apply_program(&mut g, &BuildProgram::new()).unwrap();
        assert!(out.nodes.is_empty() && out.fetched.is_empty());
        assert_eq!(g.canonical_dump(), before);
    }

    #[test]
    fn failure_rolls_back_and_names_index() {
        let mut g = OptiGraph::new("g");
        apply_program(&mut g, &node_program(1)).unwrap();
        let before = g.canonical_dump();
        let mut p = BuildProgram::new();
        p.add_node("m");
        p.add_variable("m", "y", VariableBounds::non_negative(), &[]);
        p.add_constraint("m", NamedExpr::new().term("m[:nope]", 1.0).le(1.0));
        match apply_program(&mut g, &p) {
            Err(ModelError::Instruction { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(g.canonical_dump(), before);
    }

    #[test]
    fn plan_links_resolve_through_paths() {
        let mut plan = GraphPlan::new("top");
        let mut a = GraphPlan::new("a");
        a.program = node_program(1);
        let mut b = GraphPlan::new("b");
        b.program = node_program(1);
        plan.subgraphs = vec![a, b];
        plan.links.push(
            NamedExpr::new()
                .term("a/n[:x][0]", 1.0)
                .term("b/n[:x][0]", -1.0)
                .eq(0.0),
        );
        let req = plan.fetch_requirements();
        assert_eq!(req[&vec!["a".to_string()]].len(), 1);
        let g = realize_local(&plan).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.num_variables(), 2);
    }
}
