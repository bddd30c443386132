//! Graph-structured optimization modeling with distributed remote graphs.
// `!(x > 0.0)` is the NaN-rejecting check we want; index loops read better in the numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algebra;
pub mod benders;
pub mod error;
pub mod graph;
pub mod harness;
pub mod models;
pub mod program;
pub mod remote;
pub mod solver;

pub use algebra::{
    canonical_name, expr_add, expr_scale, AffineExpr, Constraint, EdgeId, GraphId, Integrality, NodeId, Sense,
    VariableBounds, VariableId,
};
pub use benders::{run_benders, BendersConfig, BendersSolver, BendersState};
pub use error::ModelError;
pub use graph::{flatten, OptiEdge, OptiGraph, OptiNode, RowOrigin, StandardFormProblem};
pub use program::{realize_local, BuildProgram, GraphPlan, NamedExpr};
pub use remote::{collect_remote_graph, realize_remote, Cluster, RemoteOptiGraph};
pub use solver::{fix_variables, solve_lp, solve_mip, SolveResult, SolveStatus, SolverConfig};
