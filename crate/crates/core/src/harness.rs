//! Run harness shared by the command line and the tests: build a model, solve it
//! monolithically or with Benders, and report the outcome.

use std::time::Instant;

use thiserror::Error;

use crate::benders::{run_benders, BendersConfig, BendersError, BendersState};
use crate::error::ModelError;
use crate::graph::{flatten, OptiGraph};
use crate::models::{self, InstanceError, StorageParams, ToyCemInstance};
use crate::program::{realize_local, GraphPlan};
use crate::remote::{BuildMode, Cluster, RemoteError, RemoteOptiGraph, TransportKind};
use crate::solver::{solve_lp, solve_mip, SolveError, SolveStatus, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    Monolithic,
    Benders,
    BendersRemote,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub mode: SolveMode,
    /// Total workers in remote mode, the main worker included.
    pub workers: usize,
    pub transport: TransportKind,
    pub build: BuildMode,
    /// Running worker daemons to use instead of spawning workers.
    pub connect: Vec<String>,
    pub benders: BendersConfig,
    pub solver: SolverConfig,
    /// Keep a canonical dump of the model (collected from the workers in remote mode).
    pub dump: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: SolveMode::Monolithic,
            workers: 3,
            transport: TransportKind::InProcess,
            build: BuildMode::Batched,
            connect: Vec::new(),
            benders: BendersConfig::default(),
            solver: SolverConfig::default(),
            dump: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: SolveStatus,
    pub objective: f64,
    pub columns: usize,
    pub rows: usize,
    pub benders: Option<BendersState>,
    pub dump: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Benders(#[from] BendersError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn remote_code(e: &RemoteError) -> i32 {
    match e {
        RemoteError::Transport { .. }
        | RemoteError::Timeout { .. }
        | RemoteError::Protocol(_)
        | RemoteError::UnknownWorker(_) => 4,
        _ => 3,
    }
}

impl RunError {
    /// Process exit code: 1 usage, 2 infeasible, 3 structural, 4 transport.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) | RunError::Solve(_) => 1,
            RunError::Instance(InstanceError::Remote(e)) | RunError::Remote(e) => remote_code(e),
            RunError::Instance(InstanceError::Model(_)) | RunError::Model(_) => 3,
            RunError::Instance(_) => 1,
            RunError::Benders(e) => match e {
                BendersError::SubproblemInfeasible { .. }
                | BendersError::Master(SolveStatus::Infeasible | SolveStatus::Unbounded) => 2,
                BendersError::Remote(r) => remote_code(r),
                BendersError::Config(_) | BendersError::Solve(_) => 1,
                _ => 3,
            },
        }
    }
}

/// Exit code for a finished solve.
pub fn status_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible | SolveStatus::Unbounded => 2,
        SolveStatus::IterationLimit => 1,
    }
}

/// A cluster with `opts.workers` workers, or the main worker plus the listed daemons.
pub fn make_cluster(opts: &RunOptions) -> Result<Cluster, RunError> {
    let cluster = Cluster::new();
    if !opts.connect.is_empty() {
        for addr in &opts.connect {
            cluster.connect_tcp(addr)?;
        }
    } else {
        if opts.workers < 2 {
            return Err(RunError::Usage("remote mode needs at least 2 workers".into()));
        }
        cluster.spawn_workers(opts.workers - 1, opts.transport)?;
    }
    Ok(cluster)
}

fn monolithic(graph: &OptiGraph, opts: &RunOptions, start: Instant) -> Result<RunOutcome, RunError> {
    let problem = flatten(graph);
    let r = if problem.has_integers() {
        solve_mip(&problem, &opts.solver)?
    } else {
        solve_lp(&problem, &opts.solver)?
    };
    Ok(RunOutcome {
        status: r.status,
        objective: r.objective,
        columns: problem.num_columns(),
        rows: problem.num_rows(),
        benders: None,
        dump: opts.dump.then(|| graph.canonical_dump()),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn decomposed(
    graph: &OptiGraph,
    remote: Option<&RemoteOptiGraph>,
    root: &str,
    opts: &RunOptions,
    start: Instant,
) -> Result<RunOutcome, RunError> {
    let problem = flatten(graph);
    let state = match remote {
        Some(rg) => run_benders(rg, root, &opts.benders, &opts.solver)?,
        None => run_benders(graph, root, &opts.benders, &opts.solver)?,
    };
    Ok(RunOutcome {
        status: if state.converged {
            SolveStatus::Optimal
        } else {
            SolveStatus::IterationLimit
        },
        objective: state.objective(),
        columns: problem.num_columns(),
        rows: problem.num_rows(),
        benders: Some(state),
        dump: opts.dump.then(|| graph.canonical_dump()),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_plan<B>(plan: &GraphPlan, root: &str, opts: &RunOptions, build_remote: B) -> Result<RunOutcome, RunError>
where
    B: FnOnce(&Cluster) -> Result<RemoteOptiGraph, InstanceError>,
{
    let start = Instant::now();
    match opts.mode {
        SolveMode::Monolithic => monolithic(&realize_local(plan)?, opts, start),
        SolveMode::Benders => decomposed(&realize_local(plan)?, None, root, opts, start),
        SolveMode::BendersRemote => {
            let cluster = make_cluster(opts)?;
            let rg = build_remote(&cluster)?;
            let collected = rg.collect()?;
            decomposed(&collected, Some(&rg), root, opts, start)
        }
    }
}

/// The value-function bound a storage run needs: operations can earn revenue, so
/// the default bound of zero would cut off the optimum.
pub fn storage_benders_config(p: &StorageParams, rel_gap: f64) -> BendersConfig {
    BendersConfig {
        rel_gap,
        theta_lower: p.theta_lower(),
        ..BendersConfig::default()
    }
}

pub fn solve_storage(p: &StorageParams, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let plan = models::storage_plan(p)?;
    run_plan(&plan, models::STORAGE_ROOT, opts, |c| {
        models::build_storage_remote(c, p, opts.build)
    })
}

pub fn solve_cem(inst: &ToyCemInstance, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let plan = models::toy_cem_plan(inst)?;
    run_plan(&plan, models::CEM_ROOT, opts, |c| {
        models::build_toy_cem_remote(c, inst, opts.build)
    })
}
