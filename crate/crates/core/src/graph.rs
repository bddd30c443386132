//! The optigraph: nodes holding local models, hyperedges holding linking
//! constraints, and nested subgraphs.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::algebra::{
    canonical_name, validate_label, AffineExpr, Constraint, EdgeId, GraphId, NodeId, VariableBounds, VariableId,
};
use crate::error::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableInfo {
    /// Canonical name, see [`canonical_name`].
    pub name: String,
    pub bounds: VariableBounds,
}

/// Index of a constraint within its node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintId {
    pub node: NodeId,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptiNode {
    id: NodeId,
    label: String,
    variables: Vec<VariableInfo>,
    constraints: Vec<Constraint>,
    objective: AffineExpr,
}

impl OptiNode {
    fn new(label: &str) -> Self {
        Self {
            id: NodeId::new(),
            label: label.to_string(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: AffineExpr::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn variables(&self) -> impl Iterator<Item = (VariableId, &VariableInfo)> + '_ {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, info)| (VariableId::new(self.id, i as u32), info))
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variable(&self, var: VariableId) -> Option<&VariableInfo> {
        if var.node != self.id {
            return None;
        }
        self.variables.get(var.index as usize)
    }

    pub fn variable_by_name(&self, canonical: &str) -> Option<VariableId> {
        self.variables
            .iter()
            .position(|v| v.name == canonical)
            .map(|i| VariableId::new(self.id, i as u32))
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &AffineExpr {
        &self.objective
    }

    pub fn add_variable(
        &mut self,
        var_name: &str,
        bounds: VariableBounds,
        subscripts: &[i64],
    ) -> Result<VariableId, ModelError> {
        let name = canonical_name(&self.label, var_name, subscripts)?;
        bounds.validate()?;
        if self.variables.iter().any(|v| v.name == name) {
            return Err(ModelError::DuplicateVariable(name));
        }
        self.variables.push(VariableInfo { name, bounds });
        Ok(VariableId::new(self.id, (self.variables.len() - 1) as u32))
    }

    fn check_own(&self, expr: &AffineExpr) -> Result<(), ModelError> {
        for var in expr.variables() {
            if var.node != self.id {
                return Err(ModelError::ForeignVariable { node: self.id, var });
            }
            if var.index as usize >= self.variables.len() {
                return Err(ModelError::UnknownVariable(format!("{}#{}", var.node, var.index)));
            }
        }
        Ok(())
    }

    pub fn add_constraint(&mut self, constraint: Constraint) -> Result<ConstraintId, ModelError> {
        constraint.validate()?;
        self.check_own(&constraint.body)?;
        self.constraints.push(constraint);
        Ok(ConstraintId {
            node: self.id,
            index: self.constraints.len() - 1,
        })
    }

    pub fn set_objective(&mut self, expr: AffineExpr) -> Result<(), ModelError> {
        self.check_own(&expr)?;
        if !expr.constant_term().is_finite() || expr.terms().any(|(_, c)| !c.is_finite()) {
            return Err(ModelError::NonFinite("objective".into()));
        }
        self.objective = expr;
        Ok(())
    }

    pub fn bounds(&self, var: VariableId) -> Result<VariableBounds, ModelError> {
        self.variable(var)
            .map(|v| v.bounds)
            .ok_or_else(|| ModelError::UnknownVariable(format!("{}#{}", var.node, var.index)))
    }

    pub fn set_bounds(&mut self, var: VariableId, bounds: VariableBounds) -> Result<(), ModelError> {
        bounds.validate()?;
        if var.node != self.id {
            return Err(ModelError::ForeignVariable { node: self.id, var });
        }
        let info = self
            .variables
            .get_mut(var.index as usize)
            .ok_or_else(|| ModelError::UnknownVariable(format!("{}#{}", var.node, var.index)))?;
        info.bounds = bounds;
        Ok(())
    }
}

/// A hyperedge carrying link constraints over two or more nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptiEdge {
    id: EdgeId,
    incident_nodes: BTreeSet<NodeId>,
    link_constraints: Vec<Constraint>,
}

impl OptiEdge {
    pub fn id(&self) -> EdgeId {
        self.id
    }

    pub fn incident_nodes(&self) -> &BTreeSet<NodeId> {
        &self.incident_nodes
    }

    pub fn link_constraints(&self) -> &[Constraint] {
        &self.link_constraints
    }
}

/// Owners of the variables in `expr`.
pub fn owning_nodes(expr: &AffineExpr) -> BTreeSet<NodeId> {
    expr.variables().map(|v| v.node).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptiGraph {
    id: GraphId,
    label: String,
    nodes: Vec<OptiNode>,
    edges: Vec<OptiEdge>,
    subgraphs: Vec<OptiGraph>,
}

impl OptiGraph {
    pub fn new(label: &str) -> Self {
        Self::with_id(GraphId::new(), label)
    }

    pub(crate) fn with_id(id: GraphId, label: &str) -> Self {
        Self {
            id,
            label: label.to_string(),
            nodes: Vec::new(),
            edges: Vec::new(),
            subgraphs: Vec::new(),
        }
    }

    pub fn id(&self) -> GraphId {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn nodes(&self) -> &[OptiNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[OptiEdge] {
        &self.edges
    }

    pub fn subgraphs(&self) -> &[OptiGraph] {
        &self.subgraphs
    }

    pub fn subgraph(&self, label: &str) -> Option<&OptiGraph> {
        self.subgraphs.iter().find(|g| g.label == label)
    }

    pub fn subgraph_mut(&mut self, label: &str) -> Option<&mut OptiGraph> {
        self.subgraphs.iter_mut().find(|g| g.label == label)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Own nodes followed by every descendant's nodes, depth first in creation order.
    pub fn all_nodes(&self) -> Vec<&OptiNode> {
        let mut out: Vec<&OptiNode> = self.nodes.iter().collect();
        for sub in &self.subgraphs {
            out.extend(sub.all_nodes());
        }
        out
    }

    pub fn all_edges(&self) -> Vec<&OptiEdge> {
        let mut out: Vec<&OptiEdge> = self.edges.iter().collect();
        for sub in &self.subgraphs {
            out.extend(sub.all_edges());
        }
        out
    }

    pub fn num_variables(&self) -> usize {
        self.all_nodes().iter().map(|n| n.num_variables()).sum()
    }

    pub fn add_node(&mut self, label: &str) -> Result<NodeId, ModelError> {
        validate_label(label)?;
        if self.nodes.iter().any(|n| n.label == label) {
            return Err(ModelError::DuplicateNodeLabel(label.to_string()));
        }
        let node = OptiNode::new(label);
        let id = node.id;
        self.nodes.push(node);
        Ok(id)
    }

    pub fn node(&self, id: NodeId) -> Option<&OptiNode> {
        self.nodes
            .iter()
            .find(|n| n.id == id)
            .or_else(|| self.subgraphs.iter().find_map(|g| g.node(id)))
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut OptiNode> {
        if let Some(pos) = self.nodes.iter().position(|n| n.id == id) {
            return Some(&mut self.nodes[pos]);
        }
        self.subgraphs.iter_mut().find_map(|g| g.node_mut(id))
    }

    /// Looks up a node among this graph's own nodes by label.
    pub fn node_by_label(&self, label: &str) -> Option<&OptiNode> {
        self.nodes.iter().find(|n| n.label == label)
    }

    fn node_or_err(&mut self, id: NodeId) -> Result<&mut OptiNode, ModelError> {
        self.node_mut(id).ok_or(ModelError::UnknownNode(id))
    }

    pub fn add_variable(
        &mut self,
        node: NodeId,
        var_name: &str,
        bounds: VariableBounds,
        subscripts: &[i64],
    ) -> Result<VariableId, ModelError> {
        self.node_or_err(node)?.add_variable(var_name, bounds, subscripts)
    }

    pub fn add_constraint(&mut self, node: NodeId, constraint: Constraint) -> Result<ConstraintId, ModelError> {
        self.node_or_err(node)?.add_constraint(constraint)
    }

    pub fn set_node_objective(&mut self, node: NodeId, expr: AffineExpr) -> Result<(), ModelError> {
        self.node_or_err(node)?.set_objective(expr)
    }

    pub fn variable(&self, var: VariableId) -> Option<&VariableInfo> {
        self.node(var.node).and_then(|n| n.variable(var))
    }

    pub fn bounds(&self, var: VariableId) -> Result<VariableBounds, ModelError> {
        self.node(var.node)
            .ok_or(ModelError::UnknownNode(var.node))?
            .bounds(var)
    }

    pub fn set_bounds(&mut self, var: VariableId, bounds: VariableBounds) -> Result<(), ModelError> {
        self.node_or_err(var.node)?.set_bounds(var, bounds)
    }

    pub fn set_lower_bound(&mut self, var: VariableId, value: f64) -> Result<(), ModelError> {
        let mut bounds = self.bounds(var)?;
        bounds.lower = value;
        self.set_bounds(var, bounds)
    }

    pub fn set_upper_bound(&mut self, var: VariableId, value: f64) -> Result<(), ModelError> {
        let mut bounds = self.bounds(var)?;
        bounds.upper = value;
        self.set_bounds(var, bounds)
    }

    /// Adds a constraint over variables of two or more nodes in this hierarchy,
    /// reusing the edge whose incident-node set matches.
    pub fn add_link_constraint(&mut self, constraint: Constraint) -> Result<EdgeId, ModelError> {
        constraint.validate()?;
        let incident = owning_nodes(&constraint.body);
        if incident.len() < 2 {
            return Err(ModelError::SingleNodeLink(incident.len()));
        }
        for var in constraint.body.variables() {
            let node = self.node(var.node).ok_or(ModelError::NodeOutsideHierarchy(var.node))?;
            if node.variable(var).is_none() {
                return Err(ModelError::UnknownVariable(format!("{}#{}", var.node, var.index)));
            }
        }
        if let Some(edge) = self.edges.iter_mut().find(|e| e.incident_nodes == incident) {
            edge.link_constraints.push(constraint);
            return Ok(edge.id);
        }
        let edge = OptiEdge {
            id: EdgeId::new(),
            incident_nodes: incident,
            link_constraints: vec![constraint],
        };
        let id = edge.id;
        self.edges.push(edge);
        Ok(id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&OptiEdge> {
        self.edges
            .iter()
            .find(|e| e.id == id)
            .or_else(|| self.subgraphs.iter().find_map(|g| g.edge(id)))
    }

    fn collect_ids(&self, graphs: &mut HashSet<GraphId>, nodes: &mut HashSet<NodeId>) {
        graphs.insert(self.id);
        nodes.extend(self.nodes.iter().map(|n| n.id));
        for sub in &self.subgraphs {
            sub.collect_ids(graphs, nodes);
        }
    }

    pub fn add_subgraph(&mut self, child: OptiGraph) -> Result<(), ModelError> {
        if child.id == self.id {
            return Err(ModelError::SelfNesting);
        }
        let (mut graphs, mut nodes) = (HashSet::new(), HashSet::new());
        self.collect_ids(&mut graphs, &mut nodes);
        fn check(g: &OptiGraph, graphs: &HashSet<GraphId>, nodes: &HashSet<NodeId>) -> Result<(), ModelError> {
            if graphs.contains(&g.id) {
                return Err(ModelError::DuplicateGraph(g.id));
            }
            if let Some(n) = g.nodes.iter().find(|n| nodes.contains(&n.id)) {
                return Err(ModelError::NodeIdCollision(n.id));
            }
            g.subgraphs.iter().try_for_each(|s| check(s, graphs, nodes))
        }
        check(&child, &graphs, &nodes)?;
        self.subgraphs.push(child);
        Ok(())
    }

    /// Separable graph objective: the sum of every node objective in the hierarchy.
    pub fn objective(&self) -> AffineExpr {
        let mut total = AffineExpr::new();
        for node in self.all_nodes() {
            for (var, c) in node.objective.terms() {
                total.add_term(var, c);
            }
            total.add_constant(node.objective.constant_term());
        }
        total
    }

    /// Qualified names `<graph>/<sub>/.../<canonical>` of every variable in the hierarchy.
    pub fn qualified_names(&self) -> HashMap<VariableId, String> {
        let mut names = HashMap::new();
        self.qualify_into(&self.label, &mut names);
        names
    }

    fn qualify_into(&self, path: &str, names: &mut HashMap<VariableId, String>) {
        for node in &self.nodes {
            for (id, info) in node.variables() {
                names.insert(id, format!("{path}/{}", info.name));
            }
        }
        for sub in &self.subgraphs {
            sub.qualify_into(&format!("{path}/{}", sub.label), names);
        }
    }

    /// Textual dump, one record per line, sorted. Records use qualified names, not ids,
    /// so graphs built the same way on different workers dump identically.
    pub fn canonical_dump(&self) -> String {
        let names = self.qualified_names();
        let node_paths = self.node_paths();
        let mut lines = Vec::new();
        self.dump_into(&self.label, &names, &node_paths, &mut lines);
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    fn node_paths(&self) -> HashMap<NodeId, String> {
        fn walk(g: &OptiGraph, path: &str, out: &mut HashMap<NodeId, String>) {
            for n in &g.nodes {
                out.insert(n.id, format!("{path}/{}", n.label));
            }
            for sub in &g.subgraphs {
                walk(sub, &format!("{path}/{}", sub.label), out);
            }
        }
        let mut out = HashMap::new();
        walk(self, &self.label, &mut out);
        out
    }

    fn dump_into(
        &self,
        path: &str,
        names: &HashMap<VariableId, String>,
        node_paths: &HashMap<NodeId, String>,
        lines: &mut Vec<String>,
    ) {
        lines.push(format!("graph {path}"));
        for node in &self.nodes {
            let node_path = format!("{path}/{}", node.label);
            lines.push(format!("node {node_path}"));
            for (id, info) in node.variables() {
                lines.push(format!(
                    "var {} lower={} upper={} {}",
                    names[&id],
                    fmt_num(info.bounds.lower),
                    fmt_num(info.bounds.upper),
                    if info.bounds.is_integer() {
                        "integer"
                    } else {
                        "continuous"
                    }
                ));
            }
            for c in &node.constraints {
                lines.push(format!("con {node_path} {}", fmt_constraint(c, names)));
            }
            if !node.objective.is_empty() || node.objective.constant_term() != 0.0 {
                lines.push(format!("obj {node_path} {}", fmt_expr(&node.objective, names)));
            }
        }
        for edge in &self.edges {
            let mut incident: Vec<&str> = edge.incident_nodes.iter().map(|n| node_paths[n].as_str()).collect();
            incident.sort();
            let incident = incident.join(",");
            lines.push(format!("edge {path} [{incident}]"));
            for c in &edge.link_constraints {
                lines.push(format!("link {path} [{incident}] {}", fmt_constraint(c, names)));
            }
        }
        for sub in &self.subgraphs {
            sub.dump_into(&format!("{path}/{}", sub.label), names, node_paths, lines);
        }
    }

    #[cfg(test)]
    pub(crate) fn nodes_mut(&mut self) -> &mut Vec<OptiNode> {
        &mut self.nodes
    }
}

pub(crate) fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        // shortest round-trip representation
        format!("{x:?}")
    }
}

pub(crate) fn fmt_expr(expr: &AffineExpr, names: &HashMap<VariableId, String>) -> String {
    let mut terms: Vec<(String, f64)> = expr
        .terms()
        .map(|(v, c)| {
            (
                names
                    .get(&v)
                    .cloned()
                    .unwrap_or_else(|| format!("{}#{}", v.node, v.index)),
                c,
            )
        })
        .collect();
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    let mut parts: Vec<String> = terms
        .into_iter()
        .map(|(n, c)| format!("{}*{}", fmt_num(c), n))
        .collect();
    parts.push(format!("const={}", fmt_num(expr.constant_term())));
    parts.join(" ")
}

fn fmt_constraint(c: &Constraint, names: &HashMap<VariableId, String>) -> String {
    let body = AffineExpr::from_terms(c.body.terms(), 0.0);
    format!("{} {} {}", fmt_expr(&body, names), c.sense, fmt_num(c.normalized_rhs()))
}

/// Where a flattened row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "origin", content = "id", rename_all = "snake_case")]
pub enum RowOrigin {
    Node(NodeId),
    Edge(EdgeId),
    Interworker(EdgeId),
    /// Rows added by decomposition (cuts, fixing rows).
    Algorithm(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub id: VariableId,
    pub name: String,
    pub bounds: VariableBounds,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StandardFormData {
    columns: Vec<Column>,
    objective: AffineExpr,
    rows: Vec<Constraint>,
    provenance: Vec<RowOrigin>,
}

/// A flat LP/MIP: minimize `objective` subject to `rows` and per-column bounds.
///
/// Row bodies carry no constant; it is folded into `rhs`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "StandardFormData", into = "StandardFormData")]
pub struct StandardFormProblem {
    columns: Vec<Column>,
    index: HashMap<VariableId, usize>,
    pub objective: AffineExpr,
    rows: Vec<Constraint>,
    provenance: Vec<RowOrigin>,
}

impl From<StandardFormData> for StandardFormProblem {
    fn from(data: StandardFormData) -> Self {
        let index = data.columns.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
        Self {
            columns: data.columns,
            index,
            objective: data.objective,
            rows: data.rows,
            provenance: data.provenance,
        }
    }
}

impl From<StandardFormProblem> for StandardFormData {
    fn from(p: StandardFormProblem) -> Self {
        Self {
            columns: p.columns,
            objective: p.objective,
            rows: p.rows,
            provenance: p.provenance,
        }
    }
}

impl Default for StandardFormProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for StandardFormProblem {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
            && self.objective == other.objective
            && self.rows == other.rows
            && self.provenance == other.provenance
    }
}

impl StandardFormProblem {
    pub fn new() -> Self {
        Self {
            columns: Vec::new(),
            index: HashMap::new(),
            objective: AffineExpr::new(),
            rows: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn add_column(
        &mut self,
        id: VariableId,
        name: impl Into<String>,
        bounds: VariableBounds,
    ) -> Result<usize, ModelError> {
        bounds.validate()?;
        if self.index.contains_key(&id) {
            return Err(ModelError::DuplicateVariable(name.into()));
        }
        self.columns.push(Column {
            id,
            name: name.into(),
            bounds,
        });
        self.index.insert(id, self.columns.len() - 1);
        Ok(self.columns.len() - 1)
    }

    pub fn add_row(&mut self, constraint: Constraint, origin: RowOrigin) -> Result<usize, ModelError> {
        constraint.validate()?;
        for var in constraint.body.variables() {
            if !self.index.contains_key(&var) {
                return Err(ModelError::UnknownVariable(format!("{}#{}", var.node, var.index)));
            }
        }
        let rhs = constraint.normalized_rhs();
        let body = AffineExpr::from_terms(constraint.body.terms(), 0.0);
        self.rows.push(Constraint::new(body, constraint.sense, rhs));
        self.provenance.push(origin);
        Ok(self.rows.len() - 1)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_index(&self, id: VariableId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn column(&self, id: VariableId) -> Option<&Column> {
        self.column_index(id).map(|i| &self.columns[i])
    }

    pub fn column_by_name(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn set_bounds(&mut self, id: VariableId, bounds: VariableBounds) -> Result<(), ModelError> {
        bounds.validate()?;
        let i = self
            .column_index(id)
            .ok_or_else(|| ModelError::UnknownVariable(format!("{}#{}", id.node, id.index)))?;
        self.columns[i].bounds = bounds;
        Ok(())
    }

    /// Replaces the right-hand side of a row.
    pub fn set_rhs(&mut self, row: usize, rhs: f64) -> Result<(), ModelError> {
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(format!("rhs of row {row}")));
        }
        let r = self
            .rows
            .get_mut(row)
            .ok_or_else(|| ModelError::UnknownVariable(format!("row {row}")))?;
        r.rhs = rhs;
        Ok(())
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn provenance(&self) -> &[RowOrigin] {
        &self.provenance
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn has_integers(&self) -> bool {
        self.columns.iter().any(|c| c.bounds.is_integer())
    }

    pub fn names(&self) -> HashMap<VariableId, String> {
        self.columns.iter().map(|c| (c.id, c.name.clone())).collect()
    }

    /// Order-independent textual form: one sorted line per column, row and the objective.
    pub fn canonical_lines(&self) -> Vec<String> {
        let names = self.names();
        let mut lines: Vec<String> = self
            .columns
            .iter()
            .map(|c| {
                format!(
                    "col {} {} {} {}",
                    c.name,
                    fmt_num(c.bounds.lower),
                    fmt_num(c.bounds.upper),
                    if c.bounds.is_integer() { "I" } else { "C" }
                )
            })
            .collect();
        lines.extend(self.rows.iter().map(|r| format!("row {}", fmt_constraint(r, &names))));
        lines.push(format!("obj {}", fmt_expr(&self.objective, &names)));
        lines.sort();
        lines
    }

    /// Fixed-format text: objective row, then one line per row with sense and rhs, then bounds.
    pub fn fixed_format_dump(&self) -> String {
        let mut out = String::new();
        let obj: Vec<String> = self
            .objective
            .terms()
            .map(|(v, c)| format!("{} {}", self.column_index(v).unwrap_or(usize::MAX), fmt_num(c)))
            .collect();
        out.push_str(&format!(
            "OBJ const {} terms {}\n",
            fmt_num(self.objective.constant_term()),
            obj.join(" ")
        ));
        for (i, row) in self.rows.iter().enumerate() {
            let terms: Vec<String> = row
                .body
                .terms()
                .map(|(v, c)| format!("{} {}", self.column_index(v).unwrap_or(usize::MAX), fmt_num(c)))
                .collect();
            out.push_str(&format!(
                "ROW {i} {} {} terms {}\n",
                row.sense,
                fmt_num(row.rhs),
                terms.join(" ")
            ));
        }
        for (j, col) in self.columns.iter().enumerate() {
            out.push_str(&format!(
                "BND {j} {} {} {} {}\n",
                fmt_num(col.bounds.lower),
                fmt_num(col.bounds.upper),
                if col.bounds.is_integer() { "I" } else { "C" },
                col.name
            ));
        }
        out
    }

    pub fn objective_value<F: Fn(VariableId) -> f64>(&self, value: F) -> f64 {
        self.objective.evaluate(value)
    }
}

/// Flattens a graph hierarchy into a standard-form problem.
///
/// Columns appear depth first in node creation order; rows are node constraints
/// then edge constraints per graph, followed by subgraphs.
pub fn flatten(graph: &OptiGraph) -> StandardFormProblem {
    let names = graph.qualified_names();
    let mut problem = StandardFormProblem::new();
    for node in graph.all_nodes() {
        for (id, info) in node.variables() {
            problem
                .add_column(id, names[&id].clone(), info.bounds)
                .expect("ids unique in hierarchy");
        }
    }
    flatten_rows(graph, &mut problem);
    problem.objective = graph.objective();
    problem
}

fn flatten_rows(graph: &OptiGraph, problem: &mut StandardFormProblem) {
    for node in &graph.nodes {
        for c in &node.constraints {
            problem
                .add_row(c.clone(), RowOrigin::Node(node.id))
                .expect("validated on insert");
        }
    }
    for edge in &graph.edges {
        for c in &edge.link_constraints {
            problem
                .add_row(c.clone(), RowOrigin::Edge(edge.id))
                .expect("validated on insert");
        }
    }
    for sub in &graph.subgraphs {
        flatten_rows(sub, problem);
    }
}
