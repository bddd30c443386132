//! Built-in LP/MIP solver: bounded-variable two-phase primal simplex with dual
//! extraction, and depth-first branch and bound for integer columns.

mod mip;
mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{Sense, VariableBounds, VariableId};
use crate::graph::StandardFormProblem;

pub use mip::solve_mip;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    /// Simplex iterations per LP solve.
    pub max_iterations: usize,
    /// Relative gap at which branch and bound stops.
    pub mip_gap: f64,
    /// Branch-and-bound node budget.
    pub max_nodes: usize,
    /// Attach the root relaxation's duals to a MIP result.
    pub root_duals: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            pivot_tol: 1e-9,
            max_iterations: 200_000,
            mip_gap: 1e-6,
            max_nodes: 200_000,
            root_duals: false,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    Config(&'static str),
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
    #[error("integer column {0:?} has an infinite bound")]
    UnboundedInteger(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(VariableId),
    #[error("invalid bounds for {name:?}: [{lower}, {upper}]")]
    Bounds { name: String, lower: f64, upper: f64 },
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.feas_tol > 0.0) || !(self.pivot_tol > 0.0) || !(self.mip_gap > 0.0) {
            return Err(SolveError::Config("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Duals follow `d objective / d rhs`: `>=` rows have dual >= 0, `<=` rows dual <= 0,
/// `==` rows are free. Reduced costs are `c - A^T y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    /// Proven lower bound; equals `objective` for LPs.
    pub best_bound: f64,
    pub primal: BTreeMap<VariableId, f64>,
    /// Per row, empty for MIP results unless root duals were requested.
    pub duals: Vec<f64>,
    pub reduced_costs: BTreeMap<VariableId, f64>,
    pub iterations: usize,
    pub nodes: usize,
}

impl SolveResult {
    pub(crate) fn failed(status: SolveStatus, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            best_bound: f64::NAN,
            primal: BTreeMap::new(),
            duals: Vec::new(),
            reduced_costs: BTreeMap::new(),
            iterations,
            nodes: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, var: VariableId) -> f64 {
        self.primal.get(&var).copied().unwrap_or(f64::NAN)
    }
}

fn dense_form(p: &StandardFormProblem) -> Result<simplex::DenseLp, SolveError> {
    let n = p.num_columns();
    let m = p.num_rows();
    let mut a = vec![0.0; m * n];
    for (i, row) in p.rows().iter().enumerate() {
        if !row.rhs.is_finite() {
            return Err(SolveError::NonFinite("row rhs"));
        }
        for (var, c) in row.body.terms() {
            if !c.is_finite() {
                return Err(SolveError::NonFinite("row coefficient"));
            }
            let j = p.column_index(var).ok_or(SolveError::UnknownVariable(var))?;
            a[i * n + j] += c;
        }
    }
    let mut cost = vec![0.0; n];
    for (var, c) in p.objective.terms() {
        if !c.is_finite() {
            return Err(SolveError::NonFinite("objective"));
        }
        let j = p.column_index(var).ok_or(SolveError::UnknownVariable(var))?;
        cost[j] += c;
    }
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for col in p.columns() {
        let b = col.bounds;
        if b.lower.is_nan() || b.upper.is_nan() || b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
            return Err(SolveError::Bounds {
                name: col.name.clone(),
                lower: b.lower,
                upper: b.upper,
            });
        }
        lower.push(b.lower);
        upper.push(b.upper);
    }
    Ok(simplex::DenseLp {
        n,
        m,
        a,
        senses: p.rows().iter().map(|r| r.sense).collect(),
        rhs: p.rows().iter().map(|r| r.rhs).collect(),
        cost,
        lower,
        upper,
    })
}

/// Solves the continuous relaxation of `p` (integrality is ignored).
pub fn solve_lp(p: &StandardFormProblem, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let lp = dense_form(p)?;
    Ok(solve_dense_lp(p, &lp, cfg))
}

pub(crate) fn solve_dense_lp(p: &StandardFormProblem, lp: &simplex::DenseLp, cfg: &SolverConfig) -> SolveResult {
    let out = simplex::solve_dense(lp, cfg);
    if out.status != SolveStatus::Optimal {
        return SolveResult::failed(out.status, out.iterations);
    }
    let objective = p.objective.constant_term() + lp.cost.iter().zip(&out.x).map(|(c, x)| c * x).sum::<f64>();
    let ids = p.columns().iter().map(|c| c.id);
    SolveResult {
        status: SolveStatus::Optimal,
        objective,
        best_bound: objective,
        primal: ids.clone().zip(out.x.iter().copied()).collect(),
        duals: out.y,
        reduced_costs: ids.zip(out.d.iter().copied()).collect(),
        iterations: out.iterations,
        nodes: 1,
    }
}

/// Copy of `p` with each assigned column fixed (`lower = upper = value`). Rows are untouched.
pub fn fix_variables<'a, I>(p: &StandardFormProblem, assignments: I) -> Result<StandardFormProblem, SolveError>
where
    I: IntoIterator<Item = (&'a VariableId, &'a f64)>,
{
    let mut fixed = p.clone();
    for (var, value) in assignments {
        let col = p.column(*var).ok_or(SolveError::UnknownVariable(*var))?;
        let bounds = VariableBounds {
            lower: *value,
            upper: *value,
            integrality: col.bounds.integrality,
        };
        fixed.set_bounds(*var, bounds).map_err(|_| SolveError::Bounds {
            name: col.name.clone(),
            lower: *value,
            upper: *value,
        })?;
    }
    Ok(fixed)
}

/// Largest primal violation of rows and bounds at `result.primal`.
pub fn primal_residual(p: &StandardFormProblem, result: &SolveResult) -> f64 {
    let mut worst = 0.0f64;
    for row in p.rows() {
        worst = worst.max(row.violation(|v| result.value(v)).max(0.0));
    }
    for col in p.columns() {
        let x = result.value(col.id);
        worst = worst.max(col.bounds.lower - x).max(x - col.bounds.upper);
    }
    worst
}

/// Dual objective `b^T y + sum of reduced-cost bound contributions` for an optimal LP result.
/// Infinite if a reduced cost points at an infinite bound.
pub fn dual_objective(p: &StandardFormProblem, result: &SolveResult) -> f64 {
    let mut z = p.objective.constant_term();
    for (row, y) in p.rows().iter().zip(&result.duals) {
        z += row.rhs * y;
    }
    for col in p.columns() {
        let d = result.reduced_costs.get(&col.id).copied().unwrap_or(0.0);
        if d.abs() <= 1e-11 {
            continue;
        }
        let bound = if d > 0.0 { col.bounds.lower } else { col.bounds.upper };
        if !bound.is_finite() {
            return f64::INFINITY;
        }
        z += d * bound;
    }
    z
}

/// `|c^T x - dual objective| / (1 + |c^T x|)`.
pub fn duality_gap(p: &StandardFormProblem, result: &SolveResult) -> f64 {
    (result.objective - dual_objective(p, result)).abs() / (1.0 + result.objective.abs())
}

/// Largest violation of the dual sign convention and complementary slackness.
pub fn complementarity_residual(p: &StandardFormProblem, result: &SolveResult) -> f64 {
    let mut worst = 0.0f64;
    for (row, y) in p.rows().iter().zip(&result.duals) {
        let sign_violation = match row.sense {
            Sense::LessEqual => y.max(0.0),
            Sense::GreaterEqual => (-y).max(0.0),
            Sense::Equal => 0.0,
        };
        let slack = row.violation(|v| result.value(v)).abs();
        let slack = if row.sense == Sense::Equal { 0.0 } else { slack };
        worst = worst.max(sign_violation).max((y * slack).abs());
    }
    for col in p.columns() {
        let d = result.reduced_costs.get(&col.id).copied().unwrap_or(0.0);
        let x = result.value(col.id);
        let gap = if d > 0.0 {
            x - col.bounds.lower
        } else {
            col.bounds.upper - x
        };
        if d.abs() > 1e-11 {
            worst = worst.max((d * gap).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{AffineExpr, Constraint, NodeId};
    use uuid::Uuid;

    pub(crate) fn var(i: u32) -> VariableId {
        VariableId::new(NodeId(Uuid::from_u128(1)), i)
    }

    fn problem(bounds: &[(f64, f64)]) -> StandardFormProblem {
        let mut p = StandardFormProblem::new();
        for (i, (l, u)) in bounds.iter().enumerate() {
            p.add_column(var(i as u32), format!("x{i}"), VariableBounds::new(*l, *u))
                .unwrap();
        }
        p
    }

    fn check_certificates(p: &StandardFormProblem, r: &SolveResult) {
        assert!(
            primal_residual(p, r) <= 1e-7,
            "primal residual {}",
            primal_residual(p, r)
        );
        assert!(duality_gap(p, r) <= 1e-6, "duality gap {}", duality_gap(p, r));
        assert!(complementarity_residual(p, r) <= 1e-7);
    }

    #[test]
    fn two_variable_lp_with_row_dual() {
        let mut p = problem(&[(0.0, 1.0), (0.0, 1.0)]);
        p.objective = AffineExpr::from_terms([(var(0), -1.0), (var(1), -1.0)], 0.0);
        p.add_row(
            Constraint::le(AffineExpr::from_terms([(var(0), 1.0), (var(1), 1.0)], 0.0), 1.0),
            crate::graph::RowOrigin::Algorithm(0),
        )
        .unwrap();
        let r = solve_lp(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective + 1.0).abs() < 1e-9);
        assert!((r.value(var(0)) + r.value(var(1)) - 1.0).abs() < 1e-9);
        assert!((r.duals[0] + 1.0).abs() < 1e-9, "dual {}", r.duals[0]);
        check_certificates(&p, &r);
    }

    #[test]
    fn lower_bounding_row() {
        let mut p = problem(&[(f64::NEG_INFINITY, f64::INFINITY)]);
        p.objective = AffineExpr::term(var(0), 1.0);
        p.add_row(
            Constraint::ge(AffineExpr::term(var(0), 1.0), 3.0),
            crate::graph::RowOrigin::Algorithm(0),
        )
        .unwrap();
        let r = solve_lp(&p, &SolverConfig::default()).unwrap();
        assert!((r.value(var(0)) - 3.0).abs() < 1e-9);
        assert!((r.objective - 3.0).abs() < 1e-9);
        assert!((r.duals[0] - 1.0).abs() < 1e-9);
        check_certificates(&p, &r);
    }

    #[test]
    fn infeasible_lp() {
        let mut p = problem(&[(0.0, f64::INFINITY)]);
        p.objective = AffineExpr::term(var(0), 1.0);
        p.add_row(
            Constraint::le(AffineExpr::term(var(0), 1.0), -1.0),
            crate::graph::RowOrigin::Algorithm(0),
        )
        .unwrap();
        assert_eq!(
            solve_lp(&p, &SolverConfig::default()).unwrap().status,
            SolveStatus::Infeasible
        );
    }

    #[test]
    fn unbounded_lp() {
        let mut p = problem(&[(0.0, f64::INFINITY), (0.0, f64::INFINITY)]);
        p.objective = AffineExpr::from_terms([(var(0), -1.0)], 0.0);
        p.add_row(
            Constraint::le(AffineExpr::from_terms([(var(0), 1.0), (var(1), -1.0)], 0.0), 1.0),
            crate::graph::RowOrigin::Algorithm(0),
        )
        .unwrap();
        assert_eq!(
            solve_lp(&p, &SolverConfig::default()).unwrap().status,
            SolveStatus::Unbounded
        );
    }

    #[test]
    fn fixed_column_is_honoured() {
        let mut p = problem(&[(0.0, 0.0), (0.0, 5.0)]);
        p.objective = AffineExpr::from_terms([(var(0), -1.0), (var(1), 1.0)], 0.0);
        let r = solve_lp(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.value(var(0)), 0.0);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn fixing_copies_problem() {
        let mut p = problem(&[(f64::NEG_INFINITY, f64::INFINITY), (0.0, f64::INFINITY)]);
        p.objective = AffineExpr::from_terms([(var(0), 1.0), (var(1), 1.0)], 0.0);
        let fixed = fix_variables(&p, [(&var(0), &2.0)]).unwrap();
        let r = solve_lp(&fixed, &SolverConfig::default()).unwrap();
        assert!((r.objective - 2.0).abs() < 1e-12);
        assert!((r.reduced_costs[&var(0)] - 1.0).abs() < 1e-12);
        let refixed = fix_variables(&p, [(&var(0), &-4.0)]).unwrap();
        assert!((solve_lp(&refixed, &SolverConfig::default()).unwrap().objective + 4.0).abs() < 1e-12);
        assert_eq!(fixed.column(var(0)).unwrap().bounds.lower, 2.0);
        assert_eq!(p.column(var(0)).unwrap().bounds.lower, f64::NEG_INFINITY);
        assert!(matches!(
            fix_variables(&p, [(&var(9), &0.0)]),
            Err(SolveError::UnknownVariable(_))
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = SolverConfig {
            feas_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve_lp(&StandardFormProblem::new(), &cfg).is_err());
    }

    #[test]
    fn empty_problem_is_optimal() {
        let mut p = StandardFormProblem::new();
        p.objective = AffineExpr::constant(4.0);
        let r = solve_lp(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, 4.0);
    }

    #[test]
    fn degenerate_lp_terminates() {
        // several rows tight at the origin
        let mut p = problem(&[(0.0, f64::INFINITY), (0.0, f64::INFINITY), (0.0, f64::INFINITY)]);
        p.objective = AffineExpr::from_terms([(var(0), -0.75), (var(1), 150.0), (var(2), -0.02)], 0.0);
        let rows = [
            ([0.25, -60.0, -0.04], 0.0),
            ([0.5, -90.0, -0.02], 0.0),
            ([0.0, 0.0, 1.0], 1.0),
        ];
        for (coef, rhs) in rows {
            p.add_row(
                Constraint::le(
                    AffineExpr::from_terms(coef.iter().enumerate().map(|(j, c)| (var(j as u32), *c)), 0.0),
                    rhs,
                ),
                crate::graph::RowOrigin::Algorithm(0),
            )
            .unwrap();
        }
        let r = solve_lp(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        check_certificates(&p, &r);
    }
}
