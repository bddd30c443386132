//! Wire-minimal identifiers for nodes, variables and edges.

use serde::{Deserialize, Serialize};

use crate::algebra::{EdgeId, NodeId, VariableId};
use crate::error::ModelError;
use crate::graph::OptiGraph;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProxyNodeRef {
    pub node: NodeId,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProxyVariableRef {
    pub node: NodeId,
    pub index: u32,
    pub name: String,
}

impl ProxyVariableRef {
    pub fn id(&self) -> VariableId {
        VariableId::new(self.node, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProxyEdgeRef {
    pub edge: EdgeId,
}

pub fn node_to_proxy(graph: &OptiGraph, node: NodeId) -> Result<ProxyNodeRef, ModelError> {
    let n = graph.node(node).ok_or(ModelError::UnknownNode(node))?;
    Ok(ProxyNodeRef {
        node,
        label: n.label().to_string(),
    })
}

pub fn resolve_node(graph: &OptiGraph, proxy: &ProxyNodeRef) -> Result<NodeId, ModelError> {
    graph
        .node(proxy.node)
        .map(|n| n.id())
        .ok_or(ModelError::UnknownNode(proxy.node))
}

pub fn variable_to_proxy(graph: &OptiGraph, var: VariableId) -> Result<ProxyVariableRef, ModelError> {
    let info = graph
        .variable(var)
        .ok_or_else(|| ModelError::UnknownVariable(format!("{}#{}", var.node, var.index)))?;
    Ok(ProxyVariableRef {
        node: var.node,
        index: var.index,
        name: info.name.clone(),
    })
}

/// Resolves a proxy on the graph that owns it. The node UUID, index and name must all agree.
pub fn resolve_variable(graph: &OptiGraph, proxy: &ProxyVariableRef) -> Result<VariableId, ModelError> {
    let node = graph.node(proxy.node).ok_or(ModelError::UnknownNode(proxy.node))?;
    let id = proxy.id();
    match node.variable(id) {
        Some(info) if info.name == proxy.name => Ok(id),
        _ => Err(ModelError::UnknownVariable(proxy.name.clone())),
    }
}

pub fn edge_to_proxy(graph: &OptiGraph, edge: EdgeId) -> Result<ProxyEdgeRef, ModelError> {
    graph.edge(edge).ok_or(ModelError::UnknownEdge(edge))?;
    Ok(ProxyEdgeRef { edge })
}

pub fn resolve_edge(graph: &OptiGraph, proxy: &ProxyEdgeRef) -> Result<EdgeId, ModelError> {
    graph
        .edge(proxy.edge)
        .map(|e| e.id())
        .ok_or(ModelError::UnknownEdge(proxy.edge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::VariableBounds;

    #[test]
    fn roundtrips() {
        let mut g = OptiGraph::new("g");
        let a = g.add_node("a").unwrap();
        let b = g.add_node("b").unwrap();
        let x = g.add_variable(a, "x", VariableBounds::non_negative(), &[1, 2]).unwrap();
        let y = g.add_variable(b, "y", VariableBounds::non_negative(), &[]).unwrap();
        let e = g
            .add_link_constraint(crate::algebra::Constraint::le(
                crate::algebra::AffineExpr::from_terms([(x, 1.0), (y, 1.0)], 0.0),
                1.0,
            ))
            .unwrap();
        let p = variable_to_proxy(&g, x).unwrap();
        assert_eq!(p.name, "a[:x][1,2]");
        assert_eq!(resolve_variable(&g, &p).unwrap(), x);
        assert_eq!(resolve_node(&g, &node_to_proxy(&g, b).unwrap()).unwrap(), b);
        assert_eq!(resolve_edge(&g, &edge_to_proxy(&g, e).unwrap()).unwrap(), e);
    }

    #[test]
    fn stale_uuid_is_named() {
        let g = OptiGraph::new("g");
        let stale = ProxyVariableRef {
            node: NodeId::new(),
            index: 0,
            name: "n[:x]".into(),
        };
        let err = resolve_variable(&g, &stale).unwrap_err();
        assert!(err.to_string().contains(&stale.node.to_string()));
    }
}
