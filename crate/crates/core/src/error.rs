use thiserror::Error;

use crate::algebra::{EdgeId, GraphId, NodeId, VariableId};

/// Model-building and graph-structure errors.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: &'static str },
    #[error("a node labelled {0:?} already exists in this graph")]
    DuplicateNodeLabel(String),
    #[error("variable {0:?} already exists on this node")]
    DuplicateVariable(String),
    #[error("invalid bounds: lower {lower} > upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("node {0} not found")]
    UnknownNode(NodeId),
    #[error("node labelled {0:?} not found")]
    UnknownNodeLabel(String),
    #[error("variable {0:?} not found")]
    UnknownVariable(String),
    #[error("variable {var:?} does not belong to node {node}; use a link constraint for multi-node constraints")]
    ForeignVariable { node: NodeId, var: VariableId },
    #[error("link constraint spans {0} node(s); a link constraint must reference at least two nodes")]
    SingleNodeLink(usize),
    #[error("node {0} is outside the graph hierarchy")]
    NodeOutsideHierarchy(NodeId),
    #[error("graph {0} is already part of this hierarchy")]
    DuplicateGraph(GraphId),
    #[error("id collision on node {0} while nesting a subgraph")]
    NodeIdCollision(NodeId),
    #[error("a graph cannot be nested inside itself")]
    SelfNesting,
    #[error("edge {0} not found")]
    UnknownEdge(EdgeId),
    #[error("graph {0} not found")]
    UnknownGraph(GraphId),
    #[error("instruction {index} failed: {source}")]
    Instruction {
        index: usize,
        #[source]
        source: Box<ModelError>,
    },
}
