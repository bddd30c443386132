//! Graph-based Benders decomposition over a root (master) subgraph and one
//! subproblem per remaining subgraph. Runs the same way on local and remote graphs.

mod subproblem;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::thread;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use uuid::Uuid;

pub use subproblem::{SubSolution, Subproblem, SubproblemSpec};

use crate::algebra::{name_suffix, AffineExpr, Constraint, EdgeId, GraphId, NodeId, VariableBounds, VariableId};
use crate::error::ModelError;
use crate::graph::{flatten, OptiGraph, RowOrigin, StandardFormProblem};
use crate::remote::worker::kind;
use crate::remote::{Cluster, RemoteError, RemoteOptiGraph, WorkerId};
use crate::solver::{solve_lp, solve_mip, SolveError, SolveStatus, SolverConfig};

/// Node id under which the value-function columns are numbered.
const THETA_NODE: u128 = 0x7e7a_0000_0000_4000_8000_0000_0000_0001;
const CUT_ROW: u64 = 3;

#[derive(Debug, Error)]
pub enum BendersError {
    #[error("structural error: {0}")]
    Structure(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("subproblem {index} ({label}) is infeasible; enable slacks to guarantee recourse")]
    SubproblemInfeasible { index: usize, label: String },
    #[error("subproblem {index} ({label}) returned status {status:?}")]
    SubproblemStatus {
        index: usize,
        label: String,
        status: SolveStatus,
    },
    #[error("master problem returned status {0:?}")]
    Master(SolveStatus),
    #[error("linking variables: {0}")]
    Linking(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendersConfig {
    pub rel_gap: f64,
    pub max_iterations: usize,
    pub add_slacks: bool,
    pub slack_penalty: f64,
    /// Lower bound of every value-function variable.
    pub theta_lower: f64,
}

impl Default for BendersConfig {
    fn default() -> Self {
        Self {
            rel_gap: 1e-3,
            max_iterations: 200,
            add_slacks: true,
            slack_penalty: 1e6,
            theta_lower: 0.0,
        }
    }
}

impl BendersConfig {
    pub fn validate(&self) -> Result<(), BendersError> {
        if !(self.rel_gap > 0.0) {
            return Err(BendersError::Config("rel_gap must be positive".into()));
        }
        if !(self.slack_penalty > 0.0) {
            return Err(BendersError::Config("slack_penalty must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(BendersError::Config("max_iterations must be at least 1".into()));
        }
        if !self.theta_lower.is_finite() {
            return Err(BendersError::Config("theta_lower must be finite".into()));
        }
        Ok(())
    }
}

/// Relative gap `(ub - lb) / max(|ub|, 1)`.
pub fn relative_gap(upper: f64, lower: f64) -> f64 {
    (upper - lower) / upper.abs().max(1.0)
}

/// An optimality cut `theta_w >= value + sum_j coefficient_j * (x_j - point_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub subproblem: usize,
    pub value: f64,
    pub point: BTreeMap<VariableId, f64>,
    pub coefficients: BTreeMap<VariableId, f64>,
}

impl Cut {
    pub fn evaluate(&self, x: &BTreeMap<VariableId, f64>) -> f64 {
        self.value
            + self
                .coefficients
                .iter()
                .map(|(v, c)| c * (x.get(v).copied().unwrap_or(0.0) - self.point[v]))
                .sum::<f64>()
    }

    /// Constant term and coefficients of the cut as a function of x.
    pub fn intercept(&self) -> f64 {
        self.value - self.coefficients.iter().map(|(v, c)| c * self.point[v]).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub wall_seconds: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub rel_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendersState {
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
    pub cuts: Vec<Cut>,
    /// Master solution at the best upper bound.
    pub incumbent: BTreeMap<VariableId, f64>,
    pub converged: bool,
    pub subproblems: Vec<String>,
    /// Slack used by the subproblems at the incumbent.
    pub slack_activity: f64,
}

impl BendersState {
    pub fn lower_bounds(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.lower_bound).collect()
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.upper_bound).collect()
    }

    pub fn lower_bound(&self) -> f64 {
        self.history.last().map_or(f64::NEG_INFINITY, |r| r.lower_bound)
    }

    /// Best incumbent objective.
    pub fn upper_bound(&self) -> f64 {
        self.history.last().map_or(f64::INFINITY, |r| r.upper_bound)
    }

    pub fn objective(&self) -> f64 {
        self.upper_bound()
    }

    pub fn gap(&self) -> f64 {
        relative_gap(self.upper_bound(), self.lower_bound())
    }

    /// Convergence trace, one row per iteration. Without timing the wall-clock column is 0.
    pub fn trace_csv(&self, timing: bool) -> String {
        let mut out = String::from("iteration,wall_seconds,lower_bound,upper_bound,rel_gap\n");
        for r in &self.history {
            let secs = if timing { r.wall_seconds } else { 0.0 };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, secs, r.lower_bound, r.upper_bound, r.rel_gap
            );
        }
        out
    }
}

/// Pairs of (subproblem variable, master variable) matched by canonical-name suffix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkingVariableMap {
    pub pairs: Vec<(VariableId, VariableId)>,
}

/// Matches entries of `sub` to entries of `master` whose names share the
/// `[:<var>][<subscripts>]` suffix. A suffix that `sub` needs and that occurs more
/// than once on the master side is an error.
pub fn match_by_suffix<K: Clone>(master: &[(K, String)], sub: &[(K, String)]) -> Result<Vec<(K, K)>, String> {
    let mut by_suffix: HashMap<&str, Vec<&K>> = HashMap::new();
    for (k, name) in master {
        by_suffix.entry(name_suffix(name)).or_default().push(k);
    }
    let mut pairs = Vec::new();
    for (k, name) in sub {
        match by_suffix.get(name_suffix(name)).map(|v| v.as_slice()) {
            None => {}
            Some([m]) => pairs.push((k.clone(), (*m).clone())),
            Some(_) => return Err(format!("suffix {} is ambiguous on the master side", name_suffix(name))),
        }
    }
    Ok(pairs)
}

/// Name-based linking map between a root graph and one subproblem graph. Every
/// subproblem variable appearing in `links` must have a master counterpart.
pub fn map_linking_variables(
    root: &OptiGraph,
    sub: &OptiGraph,
    links: &[Constraint],
) -> Result<LinkingVariableMap, BendersError> {
    let names = |g: &OptiGraph| -> Vec<(VariableId, String)> {
        g.all_nodes()
            .into_iter()
            .flat_map(|n| {
                n.variables()
                    .map(|(id, info)| (id, info.name.clone()))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let sub_names = names(sub);
    let pairs = match_by_suffix(&names(root), &sub_names).map_err(BendersError::Linking)?;
    let matched: BTreeSet<VariableId> = pairs.iter().map(|(s, _)| *s).collect();
    let sub_ids: HashMap<VariableId, &str> = sub_names.iter().map(|(id, n)| (*id, n.as_str())).collect();
    for c in links {
        for v in c.body.variables() {
            if let Some(name) = sub_ids.get(&v) {
                if !matched.contains(&v) {
                    return Err(BendersError::Linking(format!("{name} has no master counterpart")));
                }
            }
        }
    }
    Ok(LinkingVariableMap { pairs })
}

/// A graph Benders can run on.
#[derive(Clone, Copy, Debug)]
pub enum BendersGraph<'a> {
    Local(&'a OptiGraph),
    Remote(&'a RemoteOptiGraph),
}

impl<'a> From<&'a OptiGraph> for BendersGraph<'a> {
    fn from(g: &'a OptiGraph) -> Self {
        Self::Local(g)
    }
}

impl<'a> From<&'a RemoteOptiGraph> for BendersGraph<'a> {
    fn from(g: &'a RemoteOptiGraph) -> Self {
        Self::Remote(g)
    }
}

/// Result of [`validate_structure`]: which direct subgraph is the root, the
/// subproblem order, and the top-level link rows attached to each part.
#[derive(Clone, Debug)]
pub struct Structure {
    pub root: usize,
    pub labels: Vec<String>,
    /// Indices (into the subgraph list) of the subproblems.
    pub subproblems: Vec<usize>,
    /// Per subgraph: top-level rows linking it to the root (empty for the root).
    pub links: Vec<Vec<Constraint>>,
    /// Per subgraph: top-level rows touching only that subgraph.
    pub internal: Vec<Vec<Constraint>>,
}

fn classify(
    root: usize,
    labels: Vec<String>,
    edges: Vec<(EdgeId, BTreeSet<usize>, Vec<Constraint>)>,
) -> Result<Structure, BendersError> {
    let n = labels.len();
    let mut links = vec![Vec::new(); n];
    let mut internal = vec![Vec::new(); n];
    for (id, parts, constraints) in edges {
        let parts: Vec<usize> = parts.into_iter().collect();
        match parts.as_slice() {
            [one] => internal[*one].extend(constraints),
            [a, b] if *a == root || *b == root => {
                let other = if *a == root { *b } else { *a };
                links[other].extend(constraints);
            }
            _ => {
                let names: Vec<&str> = parts.iter().map(|&i| labels[i].as_str()).collect();
                return Err(BendersError::Structure(format!(
                    "edge {id} connects {} instead of the root and exactly one other subgraph",
                    names.join(", ")
                )));
            }
        }
    }
    Ok(Structure {
        root,
        subproblems: (0..n).filter(|&i| i != root).collect(),
        labels,
        links,
        internal,
    })
}

/// Checks that every top-level edge connects the root and exactly one other subgraph.
pub fn validate_structure(graph: BendersGraph<'_>, root: &str) -> Result<Structure, BendersError> {
    match graph {
        BendersGraph::Local(g) => {
            let root_index = g
                .subgraphs()
                .iter()
                .position(|s| s.label() == root)
                .ok_or_else(|| BendersError::Structure(format!("{root:?} is not a direct subgraph")))?;
            if !g.nodes().is_empty() {
                return Err(BendersError::Structure(
                    "the decomposed graph holds nodes outside its subgraphs".into(),
                ));
            }
            let mut owner: HashMap<NodeId, usize> = HashMap::new();
            for (i, sub) in g.subgraphs().iter().enumerate() {
                for node in sub.all_nodes() {
                    owner.insert(node.id(), i);
                }
            }
            let edges = g
                .edges()
                .iter()
                .map(|e| {
                    let parts = e.incident_nodes().iter().map(|n| owner[n]).collect();
                    (e.id(), parts, e.link_constraints().to_vec())
                })
                .collect();
            for (i, sub) in g.subgraphs().iter().enumerate() {
                if i != root_index {
                    if let Some(v) = flatten(sub).columns().iter().find(|c| c.bounds.is_integer()) {
                        return Err(BendersError::Structure(format!(
                            "subproblem {} has integer variable {}",
                            sub.label(),
                            v.name
                        )));
                    }
                }
            }
            let labels = g.subgraphs().iter().map(|s| s.label().to_string()).collect();
            classify(root_index, labels, edges)
        }
        BendersGraph::Remote(g) => {
            let subs = g.subgraphs();
            let labels: Vec<String> = subs.iter().map(|s| s.label()).collect();
            let root_index = labels
                .iter()
                .position(|l| l == root)
                .ok_or_else(|| BendersError::Structure(format!("{root:?} is not a direct subgraph")))?;
            if g.num_nodes()? != 0 {
                return Err(BendersError::Structure(
                    "the decomposed graph holds nodes outside its subgraphs".into(),
                ));
            }
            // map every remote graph below g to the direct subgraph that contains it
            let mut part: HashMap<GraphId, usize> = HashMap::new();
            fn walk(g: &RemoteOptiGraph, i: usize, part: &mut HashMap<GraphId, usize>) {
                part.insert(g.id(), i);
                for s in g.subgraphs() {
                    walk(&s, i, part);
                }
            }
            for (i, s) in subs.iter().enumerate() {
                walk(s, i, &mut part);
            }
            let edges = g
                .interworker_edges()
                .into_iter()
                .map(|e| {
                    let parts = e.endpoints.iter().map(|(gid, _)| part[gid]).collect();
                    (e.id, parts, e.link_constraints)
                })
                .collect();
            classify(root_index, labels, edges)
        }
    }
}

enum SubHandle {
    Local(Subproblem),
    Remote {
        cluster: Cluster,
        worker: WorkerId,
        handle: u64,
        key: u64,
    },
}

impl SubHandle {
    fn solve(&self, values: &[f64], cfg: &SolverConfig) -> Result<SubSolution, BendersError> {
        match self {
            SubHandle::Local(s) => s.solve(values, cfg),
            SubHandle::Remote {
                cluster,
                worker,
                handle,
                key,
            } => {
                let body = cluster.call(
                    *worker,
                    kind::SUBPROBLEM_SOLVE,
                    Some(*handle),
                    json!({ "key": key, "values": values, "solver": cfg }),
                )?;
                serde_json::from_value(body)
                    .map_err(|e| RemoteError::Protocol(format!("malformed subproblem result: {e}")).into())
            }
        }
    }

    /// Requests to one worker are serialized, so subproblems are grouped per worker.
    fn lane(&self, index: usize, local_lanes: usize) -> u64 {
        match self {
            SubHandle::Local(_) => (index % local_lanes) as u64,
            SubHandle::Remote { worker, .. } => u64::MAX - worker.0 as u64,
        }
    }
}

/// A prepared decomposition: master problem with value-function columns and one
/// subproblem handle per non-root subgraph.
pub struct BendersSolver {
    cfg: BendersConfig,
    solver: SolverConfig,
    master: StandardFormProblem,
    theta: Vec<VariableId>,
    linking: Vec<Vec<VariableId>>,
    labels: Vec<String>,
    subs: Vec<SubHandle>,
}

fn master_columns(master: &StandardFormProblem, links: &[Constraint]) -> Vec<(VariableId, String)> {
    let used: BTreeSet<usize> = links
        .iter()
        .flat_map(|c| c.body.variables())
        .filter_map(|v| master.column_index(v))
        .collect();
    used.into_iter()
        .map(|j| (master.columns()[j].id, master.columns()[j].name.clone()))
        .collect()
}

impl BendersSolver {
    pub fn new<'a>(
        graph: impl Into<BendersGraph<'a>>,
        root: &str,
        cfg: BendersConfig,
        solver: SolverConfig,
    ) -> Result<Self, BendersError> {
        cfg.validate()?;
        solver.validate()?;
        let graph = graph.into();
        let structure = validate_structure(graph, root)?;
        let (mut master, subs_data) = match graph {
            BendersGraph::Local(g) => {
                let master = flatten(&g.subgraphs()[structure.root]);
                (master, None)
            }
            BendersGraph::Remote(g) => {
                let subs = g.subgraphs();
                let r = &subs[structure.root];
                let master = if r.subgraphs().is_empty() {
                    r.flatten_on_worker()?
                } else {
                    flatten(&r.collect()?)
                };
                (master, Some(subs))
            }
        };
        for c in &structure.internal[structure.root] {
            master.add_row(c.clone(), RowOrigin::Algorithm(0))?;
        }

        let mut theta = Vec::new();
        let mut linking = Vec::new();
        let mut labels = Vec::new();
        let mut specs = Vec::new();
        for (w, &i) in structure.subproblems.iter().enumerate() {
            let id = VariableId::new(NodeId(Uuid::from_u128(THETA_NODE)), w as u32);
            master.add_column(
                id,
                format!("theta[{}]", structure.labels[i]),
                VariableBounds::new(cfg.theta_lower, f64::INFINITY),
            )?;
            master.objective.add_term(id, 1.0);
            theta.push(id);
            let cols = master_columns(&master, &structure.links[i]);
            linking.push(cols.iter().map(|(v, _)| *v).collect::<Vec<_>>());
            labels.push(structure.labels[i].clone());
            let mut links = structure.links[i].clone();
            links.extend(structure.internal[i].iter().cloned());
            specs.push(SubproblemSpec {
                links,
                master_columns: cols,
                add_slacks: cfg.add_slacks,
                slack_penalty: cfg.slack_penalty,
            });
        }

        let subs = match (graph, subs_data) {
            (BendersGraph::Local(g), _) => structure
                .subproblems
                .iter()
                .zip(&specs)
                .map(|(&i, spec)| Subproblem::new(flatten(&g.subgraphs()[i]), spec).map(SubHandle::Local))
                .collect::<Result<Vec<_>, _>>()?,
            (BendersGraph::Remote(_), Some(remote)) => {
                let mut handles = Vec::new();
                for (&i, spec) in structure.subproblems.iter().zip(&specs) {
                    let sub = &remote[i];
                    let problem = if sub.subgraphs().is_empty() {
                        None
                    } else {
                        Some(flatten(&sub.collect()?))
                    };
                    let body = sub
                        .cluster()
                        .call(
                            sub.worker(),
                            kind::SUBPROBLEM_SETUP,
                            Some(sub.handle()),
                            json!({ "spec": spec, "problem": problem }),
                        )
                        .map_err(|e| match e {
                            RemoteError::Remote { message, .. } => {
                                BendersError::Structure(format!("subproblem {}: {message}", sub.label()))
                            }
                            other => other.into(),
                        })?;
                    let key = body["key"]
                        .as_u64()
                        .ok_or_else(|| RemoteError::Protocol("subproblem_setup returned no key".into()))?;
                    handles.push(SubHandle::Remote {
                        cluster: sub.cluster().clone(),
                        worker: sub.worker(),
                        handle: sub.handle(),
                        key,
                    });
                }
                handles
            }
            (BendersGraph::Remote(_), None) => unreachable!("remote subgraphs fetched above"),
        };

        Ok(Self {
            cfg,
            solver,
            master,
            theta,
            linking,
            labels,
            subs,
        })
    }

    pub fn num_subproblems(&self) -> usize {
        self.subs.len()
    }

    pub fn master(&self) -> &StandardFormProblem {
        &self.master
    }

    /// Master columns that link to subproblem `w`.
    pub fn linking_columns(&self, w: usize) -> &[VariableId] {
        &self.linking[w]
    }

    fn solve_master(&self, master: &StandardFormProblem) -> Result<crate::solver::SolveResult, BendersError> {
        let r = if master.has_integers() {
            solve_mip(master, &self.solver)?
        } else {
            solve_lp(master, &self.solver)?
        };
        match r.status {
            SolveStatus::Optimal => Ok(r),
            s => Err(BendersError::Master(s)),
        }
    }

    /// Solves every subproblem at the master point, concurrently across workers.
    fn solve_subproblems(&self, x: &BTreeMap<VariableId, f64>) -> Result<Vec<SubSolution>, BendersError> {
        let lanes = thread::available_parallelism().map_or(4, |n| n.get()).max(1);
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (w, s) in self.subs.iter().enumerate() {
            groups.entry(s.lane(w, lanes)).or_default().push(w);
        }
        let values: Vec<Vec<f64>> = self
            .linking
            .iter()
            .map(|cols| cols.iter().map(|v| x.get(v).copied().unwrap_or(0.0)).collect())
            .collect();
        let mut results: Vec<Option<Result<SubSolution, BendersError>>> = (0..self.subs.len()).map(|_| None).collect();
        let finished: Vec<Vec<(usize, Result<SubSolution, BendersError>)>> = thread::scope(|s| {
            let handles: Vec<_> = groups
                .values()
                .map(|ws| {
                    let values = &values;
                    s.spawn(move || {
                        ws.iter()
                            .map(|&w| (w, self.subs[w].solve(&values[w], &self.solver)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("subproblem thread"))
                .collect()
        });
        for (w, r) in finished.into_iter().flatten() {
            results[w] = Some(r);
        }
        results
            .into_iter()
            .enumerate()
            .map(|(w, r)| {
                let r = r.expect("every subproblem solved")?;
                match r.status {
                    SolveStatus::Optimal => Ok(r),
                    SolveStatus::Infeasible => Err(BendersError::SubproblemInfeasible {
                        index: w,
                        label: self.labels[w].clone(),
                    }),
                    status => Err(BendersError::SubproblemStatus {
                        index: w,
                        label: self.labels[w].clone(),
                        status,
                    }),
                }
            })
            .collect()
    }

    /// True value of subproblem `w` at a master point.
    pub fn evaluate_subproblem(&self, w: usize, x: &BTreeMap<VariableId, f64>) -> Result<f64, BendersError> {
        let values: Vec<f64> = self.linking[w]
            .iter()
            .map(|v| x.get(v).copied().unwrap_or(0.0))
            .collect();
        let r = self.subs[w].solve(&values, &self.solver)?;
        Ok(match r.status {
            SolveStatus::Optimal => r.objective,
            SolveStatus::Infeasible => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        })
    }

    pub fn run(&self) -> Result<BendersState, BendersError> {
        let start = Instant::now();
        let mut master = self.master.clone();
        let mut state = BendersState {
            iteration: 0,
            history: Vec::new(),
            cuts: Vec::new(),
            incumbent: BTreeMap::new(),
            converged: false,
            subproblems: self.labels.clone(),
            slack_activity: 0.0,
        };
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for iteration in 1..=self.cfg.max_iterations {
            let r = self.solve_master(&master)?;
            lower = lower.max(r.best_bound);
            let x: BTreeMap<VariableId, f64> = master.columns().iter().map(|c| (c.id, r.value(c.id))).collect();
            let theta_hat: f64 = self.theta.iter().map(|t| x[t]).sum();

            let solutions = self.solve_subproblems(&x)?;
            let candidate = r.objective - theta_hat + solutions.iter().map(|s| s.objective).sum::<f64>();
            if candidate < upper {
                upper = candidate;
                state.incumbent = x.clone();
                state.slack_activity = solutions.iter().map(|s| s.slack_activity).sum();
            }
            for (w, s) in solutions.iter().enumerate() {
                let cut = Cut {
                    subproblem: w,
                    value: s.objective,
                    point: self.linking[w].iter().map(|v| (*v, x[v])).collect(),
                    coefficients: self.linking[w].iter().copied().zip(s.slopes.iter().copied()).collect(),
                };
                let mut body = AffineExpr::term(self.theta[w], 1.0);
                for (v, c) in &cut.coefficients {
                    body.add_term(*v, -c);
                }
                master.add_row(Constraint::ge(body, cut.intercept()), RowOrigin::Algorithm(CUT_ROW))?;
                state.cuts.push(cut);
            }

            let gap = relative_gap(upper, lower);
            state.iteration = iteration;
            state.history.push(IterationRecord {
                iteration,
                wall_seconds: start.elapsed().as_secs_f64(),
                lower_bound: lower,
                upper_bound: upper,
                rel_gap: gap,
            });
            if gap <= self.cfg.rel_gap {
                state.converged = true;
                break;
            }
        }
        Ok(state)
    }

    /// Random master points: each linking column drawn within its bounds around the
    /// incumbent (integer columns rounded).
    pub fn sample_points(&self, state: &BendersState, count: usize, seed: u64) -> Vec<BTreeMap<VariableId, f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        let cols: BTreeSet<VariableId> = self.linking.iter().flatten().copied().collect();
        (0..count)
            .map(|_| {
                cols.iter()
                    .map(|v| {
                        let b = self.master.column(*v).expect("linking column").bounds;
                        let center = state.incumbent.get(v).copied().unwrap_or(0.0);
                        let span = center.abs().max(10.0);
                        let lo = b.lower.max(center - span);
                        let hi = b.upper.min(center + span).max(lo);
                        let mut value = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                        if b.is_integer() {
                            value = value.round().clamp(b.lower, b.upper);
                        }
                        (*v, value)
                    })
                    .collect()
            })
            .collect()
    }

    /// Every stored cut must under-estimate the true subproblem value at every point.
    pub fn cut_validity_check(
        &self,
        state: &BendersState,
        points: &[BTreeMap<VariableId, f64>],
    ) -> Result<CutReport, BendersError> {
        let mut report = CutReport::default();
        for (p, x) in points.iter().enumerate() {
            let values: Vec<f64> = (0..self.subs.len())
                .map(|w| self.evaluate_subproblem(w, x))
                .collect::<Result<_, _>>()?;
            for (i, cut) in state.cuts.iter().enumerate() {
                let v = values[cut.subproblem];
                let c = cut.evaluate(x);
                report.checked += 1;
                if c > v + 1e-6 * (1.0 + v.abs()) {
                    report.violations.push(CutViolation {
                        cut: i,
                        point: p,
                        cut_value: c,
                        true_value: v,
                    });
                }
            }
        }
        Ok(report)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutViolation {
    pub cut: usize,
    pub point: usize,
    pub cut_value: f64,
    pub true_value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CutReport {
    pub checked: usize,
    pub violations: Vec<CutViolation>,
}

impl CutReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Convenience wrapper: prepare and run in one call.
pub fn run_benders<'a>(
    graph: impl Into<BendersGraph<'a>>,
    root: &str,
    cfg: &BendersConfig,
    solver: &SolverConfig,
) -> Result<BendersState, BendersError> {
    BendersSolver::new(graph, root, cfg.clone(), solver.clone())?.run()
}
