use super::simplex::DenseLp;
use super::{dense_form, solve_dense_lp, SolveError, SolveResult, SolveStatus, SolverConfig};
use crate::graph::StandardFormProblem;

const INTEGER_TOL: f64 = 1e-6;
const RESTART_EVERY: usize = 100;

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Parent relaxation value, a valid bound for this subtree.
    bound: f64,
}

/// Branch and bound: most-fractional branching, depth-first, with a best-bound
/// restart every hundred processed nodes.
pub fn solve_mip(p: &StandardFormProblem, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let base = dense_form(p)?;
    let integer: Vec<usize> = p
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.bounds.is_integer())
        .map(|(j, _)| j)
        .collect();
    for &j in &integer {
        let c = &p.columns()[j];
        if !c.bounds.lower.is_finite() || !c.bounds.upper.is_finite() {
            return Err(SolveError::UnboundedInteger(c.name.clone()));
        }
    }
    if integer.is_empty() {
        return Ok(solve_dense_lp(p, &base, cfg));
    }

    let mut lower = base.lower.clone();
    let mut upper = base.upper.clone();
    for &j in &integer {
        lower[j] = lower[j].ceil();
        upper[j] = upper[j].floor();
    }

    let mut incumbent: Option<SolveResult> = None;
    let mut root_duals = Vec::new();
    let mut iterations = 0;
    let mut processed = 0;
    // smallest bound among subtrees discarded only because of the gap tolerance
    let mut pruned_bound = f64::INFINITY;
    let mut stack = vec![Node {
        lower,
        upper,
        bound: f64::NEG_INFINITY,
    }];
    let mut exhausted = true;

    let cutoff = |inc: &Option<SolveResult>| -> f64 {
        match inc {
            Some(r) => r.objective - cfg.mip_gap * r.objective.abs().max(1.0),
            None => f64::INFINITY,
        }
    };

    while let Some(node) = stack.pop() {
        if processed >= cfg.max_nodes {
            stack.push(node);
            exhausted = false;
            break;
        }
        if node.bound >= cutoff(&incumbent) {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }
        processed += 1;
        if processed % RESTART_EVERY == 0 && !stack.is_empty() {
            // move the best-bound open node to the top of the stack
            let best = (0..stack.len())
                .min_by(|&a, &b| stack[a].bound.total_cmp(&stack[b].bound))
                .expect("non-empty");
            let node_best = stack.remove(best);
            stack.push(node);
            stack.push(node_best);
            continue;
        }
        if node.lower.iter().zip(&node.upper).any(|(l, u)| l > u) {
            continue;
        }

        let lp = DenseLp {
            lower: node.lower.clone(),
            upper: node.upper.clone(),
            ..base.clone()
        };
        let relaxed = solve_dense_lp(p, &lp, cfg);
        iterations += relaxed.iterations;
        if processed == 1 && cfg.root_duals && relaxed.is_optimal() {
            root_duals = relaxed.duals.clone();
        }
        match relaxed.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded if processed == 1 => {
                let mut r = SolveResult::failed(SolveStatus::Unbounded, iterations);
                r.nodes = processed;
                return Ok(r);
            }
            SolveStatus::Unbounded => continue,
            SolveStatus::IterationLimit => {
                exhausted = false;
                continue;
            }
        }
        if relaxed.objective >= cutoff(&incumbent) {
            pruned_bound = pruned_bound.min(relaxed.objective);
            continue;
        }

        let values: Vec<f64> = p.columns().iter().map(|c| relaxed.value(c.id)).collect();
        let branch = integer
            .iter()
            .map(|&j| (j, values[j] - values[j].floor()))
            .filter(|(_, f)| *f > INTEGER_TOL && *f < 1.0 - INTEGER_TOL)
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()));

        match branch {
            None => {
                let mut r = relaxed;
                for &j in &integer {
                    let id = p.columns()[j].id;
                    let v = r.primal[&id].round();
                    r.primal.insert(id, v);
                }
                r.objective = p.objective_value(|v| r.value(v));
                incumbent = Some(r);
            }
            Some((j, frac)) => {
                let v = values[j];
                let mut down = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    bound: relaxed.objective,
                };
                down.upper[j] = v.floor();
                let mut up = Node {
                    lower: node.lower,
                    upper: node.upper,
                    bound: relaxed.objective,
                };
                up.lower[j] = v.ceil();
                // the child on the nearer side is explored first
                if frac >= 0.5 {
                    stack.push(down);
                    stack.push(up);
                } else {
                    stack.push(up);
                    stack.push(down);
                }
            }
        }
    }

    let open_bound = stack.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    match incumbent {
        Some(mut r) => {
            r.best_bound = r.objective.min(pruned_bound).min(open_bound);
            r.iterations = iterations;
            r.nodes = processed;
            r.duals = root_duals;
            r.reduced_costs.clear();
            if !exhausted {
                let gap = (r.objective - r.best_bound) / r.objective.abs().max(1.0);
                if gap > cfg.mip_gap {
                    r.status = SolveStatus::IterationLimit;
                }
            }
            Ok(r)
        }
        None => {
            let status = if exhausted {
                SolveStatus::Infeasible
            } else {
                SolveStatus::IterationLimit
            };
            let mut r = SolveResult::failed(status, iterations);
            r.nodes = processed;
            Ok(r)
        }
    }
}
