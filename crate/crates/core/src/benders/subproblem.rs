//! A subproblem prepared once and re-solved for each master point.

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::BendersError;
use crate::algebra::{AffineExpr, Constraint, NodeId, VariableBounds, VariableId};
use crate::graph::{RowOrigin, StandardFormProblem};
use crate::solver::{solve_lp, SolveStatus, SolverConfig};

/// Node id under which slack columns are numbered; never used by a real node.
const SLACK_NODE: u128 = 0x5eed_51ac_0000_4000_8000_0000_0000_0001;

const LINK_ROW: u64 = 1;
const FIXING_ROW: u64 = 2;

/// Everything a worker needs, besides its own graph, to set up a subproblem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSpec {
    /// Rows between master variables and subproblem variables.
    pub links: Vec<Constraint>,
    /// Master variables that appear in `links`, in the order values are sent.
    pub master_columns: Vec<(VariableId, String)>,
    pub add_slacks: bool,
    pub slack_penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubSolution {
    pub status: SolveStatus,
    pub objective: f64,
    /// Dual of each fixing row: the slope of the value function along that master column.
    pub slopes: Vec<f64>,
    /// Total slack used to keep the subproblem feasible.
    pub slack_activity: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct Subproblem {
    problem: StandardFormProblem,
    fixing_rows: Vec<usize>,
    slacks: Vec<VariableId>,
}

impl Subproblem {
    /// Adds a free copy of each master column, the link rows, and one fixing row
    /// `copy - s+ + s- = x_hat` per copy.
    pub fn new(mut problem: StandardFormProblem, spec: &SubproblemSpec) -> Result<Self, BendersError> {
        if problem.has_integers() {
            return Err(BendersError::Structure(
                "subproblems must be continuous; integer variables belong on the root graph".into(),
            ));
        }
        if !(spec.slack_penalty > 0.0) {
            return Err(BendersError::Config("slack_penalty must be positive".into()));
        }
        for (id, name) in &spec.master_columns {
            if problem.column(*id).is_some() {
                return Err(BendersError::Structure(format!(
                    "master variable {name} is also a subproblem variable"
                )));
            }
            problem.add_column(*id, name.clone(), VariableBounds::free())?;
        }
        for link in &spec.links {
            problem
                .add_row(link.clone(), RowOrigin::Algorithm(LINK_ROW))
                .map_err(|e| BendersError::Structure(format!("link row references an unknown variable: {e}")))?;
        }
        let mut fixing_rows = Vec::new();
        let mut slacks = Vec::new();
        for (j, (id, name)) in spec.master_columns.iter().enumerate() {
            let mut body = AffineExpr::term(*id, 1.0);
            if spec.add_slacks {
                let plus = VariableId::new(NodeId(Uuid::from_u128(SLACK_NODE)), 2 * j as u32);
                let minus = VariableId::new(NodeId(Uuid::from_u128(SLACK_NODE)), 2 * j as u32 + 1);
                problem.add_column(plus, format!("slack+/{name}"), VariableBounds::non_negative())?;
                problem.add_column(minus, format!("slack-/{name}"), VariableBounds::non_negative())?;
                problem.objective.add_term(plus, spec.slack_penalty);
                problem.objective.add_term(minus, spec.slack_penalty);
                body.add_term(plus, -1.0);
                body.add_term(minus, 1.0);
                slacks.extend([plus, minus]);
            }
            fixing_rows.push(problem.add_row(Constraint::eq(body, 0.0), RowOrigin::Algorithm(FIXING_ROW))?);
        }
        Ok(Self {
            problem,
            fixing_rows,
            slacks,
        })
    }

    pub fn num_linking(&self) -> usize {
        self.fixing_rows.len()
    }

    pub fn problem(&self) -> &StandardFormProblem {
        &self.problem
    }

    /// The problem with the fixing rows set to `values`.
    pub fn fixed(&self, values: &[f64]) -> Result<StandardFormProblem, BendersError> {
        if values.len() != self.fixing_rows.len() {
            return Err(BendersError::Config(format!(
                "expected {} master values, got {}",
                self.fixing_rows.len(),
                values.len()
            )));
        }
        let mut p = self.problem.clone();
        for (row, v) in self.fixing_rows.iter().zip(values) {
            p.set_rhs(*row, *v)?;
        }
        Ok(p)
    }

    /// Solves at `values`. Slacks are held at zero first so that the slopes come from
    /// the model rather than from a degenerate choice between a copy and its slack;
    /// they are released only when the point is otherwise infeasible.
    pub fn solve(&self, values: &[f64], cfg: &SolverConfig) -> Result<SubSolution, BendersError> {
        let mut p = self.fixed(values)?;
        let mut r = None;
        if !self.slacks.is_empty() {
            let mut pinned = p.clone();
            for s in &self.slacks {
                pinned.set_bounds(*s, VariableBounds::fixed(0.0))?;
            }
            let first = solve_lp(&pinned, cfg)?;
            if first.status != SolveStatus::Infeasible {
                r = Some(first);
            }
        }
        let r = match r {
            Some(r) => r,
            None => solve_lp(&std::mem::take(&mut p), cfg)?,
        };
        let optimal = r.status == SolveStatus::Optimal;
        Ok(SubSolution {
            status: r.status,
            objective: r.objective,
            slopes: if optimal {
                self.fixing_rows.iter().map(|&i| r.duals[i]).collect()
            } else {
                Vec::new()
            },
            slack_activity: if optimal {
                self.slacks.iter().map(|s| r.value(*s)).sum()
            } else {
                0.0
            },
            iterations: r.iterations,
        })
    }
}
