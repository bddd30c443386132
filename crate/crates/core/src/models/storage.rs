//! Storage sizing and inventory LP: a planning graph holding the storage size and an
//! operations graph with one node per period.

use serde::{Deserialize, Serialize};

use super::InstanceError;
use crate::algebra::VariableBounds;
use crate::program::{BuildProgram, GraphPlan, NamedExpr};
use crate::remote::{realize_remote, BuildMode, Cluster, RemoteOptiGraph, WorkerId, MAIN_WORKER};

pub const PLANNING: &str = "planning_graph";
pub const OPERATIONS: &str = "operation_graph";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    pub periods: usize,
    /// Cost per unit of storage size.
    pub alpha: f64,
    /// Purchase price per period.
    pub beta: Vec<f64>,
    /// Sale price per period.
    pub gamma: Vec<f64>,
    pub zeta: f64,
    pub d_sell: f64,
    pub d_save: f64,
    pub d_buy: f64,
    /// Initial storage level.
    pub y_bar: f64,
}

impl Default for StorageParams {
    fn default() -> Self {
        Self::with_periods(20)
    }
}

impl StorageParams {
    /// Default data with `periods` periods; prices rise in periods 8-10 and 16-20.
    pub fn with_periods(periods: usize) -> Self {
        let mut gamma = vec![5.0; periods];
        for (t, g) in gamma.iter_mut().enumerate() {
            match t + 1 {
                8..=10 => *g = 20.0,
                16..=20 => *g = 50.0,
                _ => {}
            }
        }
        Self {
            periods,
            alpha: 10.0,
            beta: vec![20.0; periods],
            gamma,
            zeta: 2.0,
            d_sell: 50.0,
            d_save: 20.0,
            d_buy: 15.0,
            y_bar: 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let bad = |m: &str| Err(InstanceError::Params(m.to_string()));
        if self.periods == 0 {
            return bad("periods must be at least 1");
        }
        if self.beta.len() != self.periods || self.gamma.len() != self.periods {
            return bad("beta and gamma need one entry per period");
        }
        let scalars = [self.alpha, self.zeta, self.d_sell, self.d_save, self.d_buy, self.y_bar];
        if scalars
            .iter()
            .chain(&self.beta)
            .chain(&self.gamma)
            .any(|v| !v.is_finite())
        {
            return bad("parameters must be finite");
        }
        if self.d_sell < 0.0 || self.d_save < 0.0 || self.d_buy < 0.0 || self.y_bar < 0.0 {
            return bad("bounds must be non-negative");
        }
        Ok(())
    }

    /// Valid lower bound on the operations value: at best every unit sold at full price.
    pub fn theta_lower(&self) -> f64 {
        -self.gamma.iter().map(|g| g * self.d_sell).sum::<f64>()
    }
}

pub fn storage_plan(p: &StorageParams) -> Result<GraphPlan, InstanceError> {
    p.validate()?;
    let mut planning = GraphPlan::new(PLANNING);
    planning.program.add_node("planning_node");
    let size = planning
        .program
        .add_variable("planning_node", "storage_size", VariableBounds::non_negative(), &[]);
    planning
        .program
        .set_objective("planning_node", NamedExpr::new().term(size.clone(), p.alpha));

    let mut ops = BuildProgram::new();
    let mut stored = Vec::with_capacity(p.periods);
    let mut save = Vec::with_capacity(p.periods);
    for t in 0..p.periods {
        let node = format!("operation_node_{}", t + 1);
        ops.add_node(&node);
        let y_stored = ops.add_variable(&node, "y_stored", VariableBounds::non_negative(), &[]);
        let y_sell = ops.add_variable(&node, "y_sell", VariableBounds::new(0.0, p.d_sell), &[]);
        let y_save = ops.add_variable(&node, "y_save", VariableBounds::new(-p.d_save, p.d_save), &[]);
        let x_buy = ops.add_variable(&node, "x_buy", VariableBounds::new(0.0, p.d_buy), &[]);
        ops.add_constraint(
            &node,
            NamedExpr::new()
                .term(y_save.clone(), 1.0)
                .term(y_sell.clone(), 1.0)
                .term(x_buy.clone(), -p.zeta)
                .eq(0.0),
        );
        ops.set_objective(&node, NamedExpr::new().term(x_buy, p.beta[t]).term(y_sell, -p.gamma[t]));
        stored.push(y_stored);
        save.push(y_save);
    }
    ops.add_constraint(
        "operation_node_1",
        NamedExpr::new().term(stored[0].clone(), 1.0).eq(p.y_bar),
    );
    for t in 1..p.periods {
        ops.add_link_constraint(
            NamedExpr::new()
                .term(stored[t].clone(), 1.0)
                .term(stored[t - 1].clone(), -1.0)
                .term(save[t].clone(), -1.0)
                .eq(0.0),
        );
    }
    let mut operations = GraphPlan::new(OPERATIONS);
    operations.program = ops;

    let mut graph = GraphPlan::new("graph");
    graph.links = stored
        .iter()
        .map(|y| {
            NamedExpr::new()
                .term(format!("{OPERATIONS}/{y}"), 1.0)
                .term(format!("{PLANNING}/{size}"), -1.0)
                .le(0.0)
        })
        .collect();
    graph.subgraphs = vec![planning, operations];
    Ok(graph)
}

/// Builds the storage model on a cluster: the top graph on the main worker, planning
/// on the first remote worker and operations on the second.
pub fn build_storage_remote(
    cluster: &Cluster,
    p: &StorageParams,
    mode: BuildMode,
) -> Result<RemoteOptiGraph, InstanceError> {
    let workers = cluster.remote_workers();
    if workers.len() < 2 {
        return Err(InstanceError::WorkerShortfall {
            needed: 2,
            available: workers.len(),
        });
    }
    let plan = storage_plan(p)?;
    let placement = |path: &[String]| -> WorkerId {
        match path.first().map(String::as_str) {
            Some(PLANNING) => workers[0],
            Some(_) => workers[1],
            None => MAIN_WORKER,
        }
    };
    Ok(realize_remote(cluster, &plan, &placement, mode)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::flatten;
    use crate::program::realize_local;

    #[test]
    fn default_counts() {
        let g = realize_local(&storage_plan(&StorageParams::default()).unwrap()).unwrap();
        let p = flatten(&g);
        assert_eq!(p.num_columns(), 81);
        assert_eq!(p.num_rows(), 60);
        assert_eq!(g.edges().len(), 20);
    }

    #[test]
    fn single_period() {
        let g = realize_local(&storage_plan(&StorageParams::with_periods(1)).unwrap()).unwrap();
        let p = flatten(&g);
        assert_eq!(p.num_columns(), 5);
        assert_eq!(p.num_rows(), 3);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = StorageParams::default();
        p.beta.pop();
        assert!(storage_plan(&p).is_err());
        assert!(storage_plan(&StorageParams::with_periods(0)).is_err());
    }
}
