//! Step-by-step remote build: a graph on one worker, a subgraph on another, links
//! inside each graph and links across them.

use crate::algebra::{AffineExpr, Constraint, EdgeId, VariableBounds};
use crate::error::ModelError;
use crate::graph::OptiGraph;
use crate::remote::{Cluster, LinkRef, RemoteError, RemoteOptiGraph, RemoteVariableRef};

use super::InstanceError;

/// Handles produced by [`tutorial_remote`].
#[derive(Debug)]
pub struct Tutorial {
    pub rgraph: RemoteOptiGraph,
    pub rsub: RemoteOptiGraph,
    /// `n1[:x]` on the first graph.
    pub x: RemoteVariableRef,
    /// Links local to each graph.
    pub local_links: Vec<LinkRef>,
    pub interworker: Vec<EdgeId>,
}

fn sum(terms: &[(&RemoteVariableRef, f64)]) -> AffineExpr {
    AffineExpr::from_terms(terms.iter().map(|(v, c)| (v.id(), *c)), 0.0)
}

/// Builds the tutorial model on the first two remote workers.
pub fn tutorial_remote(cluster: &Cluster) -> Result<Tutorial, InstanceError> {
    let workers = cluster.remote_workers();
    if workers.len() < 2 {
        return Err(InstanceError::WorkerShortfall {
            needed: 2,
            available: workers.len(),
        });
    }
    // a: a graph on the first remote worker
    let rgraph = cluster.remote_graph(workers[0], "rgraph")?;
    // b: two nodes with variables, a local constraint and objectives
    let n1 = rgraph.add_node("n1")?;
    let n2 = rgraph.add_node("n2")?;
    let x = rgraph.add_variable(&n1, "x", VariableBounds::non_negative(), &[])?;
    let y = rgraph.add_variable(&n2, "y", VariableBounds::non_negative(), &[])?;
    rgraph.add_constraint(&n1, Constraint::le(sum(&[(&x, 1.0)]), 4.0))?;
    rgraph.set_objective(&n1, sum(&[(&x, 1.0)]))?;
    rgraph.set_objective(&n2, sum(&[(&y, 2.0)]))?;
    x.set_lower_bound(1.0)?;

    // c: a subgraph on the second worker
    let rsub = cluster.remote_graph(workers[1], "rsub")?;
    rgraph.add_subgraph(&rsub)?;
    // d: its model
    let m1 = rsub.add_node("m1")?;
    let m2 = rsub.add_node("m2")?;
    let u = rsub.add_variable(&m1, "u", VariableBounds::new(0.0, 10.0), &[])?;
    let v = rsub.add_variable(&m2, "v", VariableBounds::new(0.0, 10.0), &[])?;
    rsub.set_objective(&m1, sum(&[(&u, 3.0)]))?;
    rsub.set_objective(&m2, sum(&[(&v, 1.0)]))?;

    // e: links inside each graph
    let local_links = vec![
        rgraph.add_link_constraint(Constraint::ge(sum(&[(&x, 1.0), (&y, 1.0)]), 2.0))?,
        rsub.add_link_constraint(Constraint::eq(sum(&[(&u, 1.0), (&v, -1.0)]), 0.0))?,
    ];
    // f: links across workers
    let interworker = vec![
        rgraph.add_interworker_link(Constraint::ge(sum(&[(&x, 1.0), (&u, 1.0)]), 3.0))?,
        rgraph.add_interworker_link(Constraint::le(sum(&[(&y, 1.0), (&v, 1.0)]), 8.0))?,
    ];
    Ok(Tutorial {
        rgraph,
        rsub,
        x,
        local_links,
        interworker,
    })
}

/// The same model built locally.
pub fn tutorial_local() -> Result<OptiGraph, ModelError> {
    let mut g = OptiGraph::new("rgraph");
    let n1 = g.add_node("n1")?;
    let n2 = g.add_node("n2")?;
    let x = g.add_variable(n1, "x", VariableBounds::non_negative(), &[])?;
    let y = g.add_variable(n2, "y", VariableBounds::non_negative(), &[])?;
    g.add_constraint(n1, Constraint::le(AffineExpr::term(x, 1.0), 4.0))?;
    g.set_node_objective(n1, AffineExpr::term(x, 1.0))?;
    g.set_node_objective(n2, AffineExpr::term(y, 2.0))?;
    g.set_lower_bound(x, 1.0)?;

    let mut s = OptiGraph::new("rsub");
    let m1 = s.add_node("m1")?;
    let m2 = s.add_node("m2")?;
    let u = s.add_variable(m1, "u", VariableBounds::new(0.0, 10.0), &[])?;
    let v = s.add_variable(m2, "v", VariableBounds::new(0.0, 10.0), &[])?;
    s.set_node_objective(m1, AffineExpr::term(u, 3.0))?;
    s.set_node_objective(m2, AffineExpr::term(v, 1.0))?;
    g.add_link_constraint(Constraint::ge(AffineExpr::from_terms([(x, 1.0), (y, 1.0)], 0.0), 2.0))?;
    s.add_link_constraint(Constraint::eq(AffineExpr::from_terms([(u, 1.0), (v, -1.0)], 0.0), 0.0))?;
    g.add_subgraph(s)?;
    g.add_link_constraint(Constraint::ge(AffineExpr::from_terms([(x, 1.0), (u, 1.0)], 0.0), 3.0))?;
    g.add_link_constraint(Constraint::le(AffineExpr::from_terms([(y, 1.0), (v, 1.0)], 0.0), 8.0))?;
    Ok(g)
}

impl Tutorial {
    /// Applies an upper bound through the remote reference.
    pub fn bound_x(&self, upper: f64) -> Result<(), RemoteError> {
        self.x.set_upper_bound(upper)
    }
}
