//! Worker message loop: a single-threaded graph store answering one request at a time.

use std::collections::HashMap;
use std::io;
use std::net::TcpListener;
use std::thread::{self, JoinHandle};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::proxy::{resolve_variable, variable_to_proxy, ProxyVariableRef};
use super::transport::{ChannelTransport, TcpTransport, Transport};
use super::wire::{WireMessage, KIND_ERROR, KIND_OK};
use crate::algebra::{AffineExpr, Constraint, GraphId, NodeId, VariableBounds};
use crate::benders::{Subproblem, SubproblemSpec};
use crate::graph::{flatten, OptiGraph, StandardFormProblem};
use crate::program::{apply_program, variable_by_name, BuildProgram};
use crate::remote::proxy::node_to_proxy;
use crate::solver::SolverConfig;

pub(crate) mod kind {
    pub const PING: &str = "ping";
    pub const SHUTDOWN: &str = "shutdown";
    pub const CREATE_GRAPH: &str = "create_graph";
    pub const ADD_NODE: &str = "add_node";
    pub const ADD_VARIABLE: &str = "add_variable";
    pub const ADD_CONSTRAINT: &str = "add_constraint";
    pub const SET_OBJECTIVE: &str = "set_objective";
    pub const ADD_LINK_CONSTRAINT: &str = "add_link_constraint";
    pub const SET_LOWER_BOUND: &str = "set_lower_bound";
    pub const SET_UPPER_BOUND: &str = "set_upper_bound";
    pub const GET_BOUNDS: &str = "get_bounds";
    pub const LOOKUP_VARIABLE: &str = "lookup_variable";
    pub const NODE_COUNT: &str = "node_count";
    pub const EXECUTE_PROGRAM: &str = "execute_program";
    pub const FETCH_GRAPH: &str = "fetch_graph";
    pub const FLATTEN: &str = "flatten";
    pub const SUBPROBLEM_SETUP: &str = "subproblem_setup";
    pub const SUBPROBLEM_SOLVE: &str = "subproblem_solve";
}

#[derive(Serialize, Deserialize)]
pub(crate) struct CreateGraph {
    pub id: GraphId,
    pub label: String,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct AddNode {
    pub label: String,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct AddVariable {
    pub node: NodeId,
    pub name: String,
    pub subscripts: Vec<i64>,
    pub bounds: VariableBounds,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct AddConstraint {
    pub node: NodeId,
    pub constraint: Constraint,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SetObjective {
    pub node: NodeId,
    pub objective: AffineExpr,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct AddLink {
    pub constraint: Constraint,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SetBound {
    pub variable: ProxyVariableRef,
    pub value: f64,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct VariableRequest {
    pub variable: ProxyVariableRef,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct LookupVariable {
    pub name: String,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ExecuteProgram {
    pub program: BuildProgram,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SubproblemSetup {
    pub spec: SubproblemSpec,
    /// Replaces the flattened worker graph, for subproblems spanning several workers.
    pub problem: Option<StandardFormProblem>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SubproblemSolve {
    pub key: u64,
    pub values: Vec<f64>,
    pub solver: SolverConfig,
}

/// Graphs and prepared subproblems hosted by one worker.
#[derive(Default)]
pub struct WorkerState {
    graphs: HashMap<u64, OptiGraph>,
    subproblems: HashMap<u64, Subproblem>,
    next_handle: u64,
}

fn parse<T: DeserializeOwned>(body: &Value) -> Result<T, String> {
    serde_json::from_value(body.clone()).map_err(|e| format!("malformed request body: {e}"))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("response bodies always serialize")
}

impl WorkerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers one request. The response carries the same request id and graph handle.
    pub fn handle(&mut self, msg: &WireMessage) -> WireMessage {
        let (kind, body) = match self.dispatch(&msg.kind, msg.graph_handle, &msg.body) {
            Ok(body) => (KIND_OK, body),
            Err(message) => (KIND_ERROR, json!({ "message": message })),
        };
        WireMessage::request(msg.request_id, kind, msg.graph_handle, body)
    }

    fn graph(&mut self, handle: Option<u64>) -> Result<&mut OptiGraph, String> {
        let h = handle.ok_or("request needs a graph handle")?;
        self.graphs
            .get_mut(&h)
            .ok_or_else(|| format!("unknown graph handle {h}"))
    }

    fn dispatch(&mut self, kind: &str, handle: Option<u64>, body: &Value) -> Result<Value, String> {
        let err = |e: crate::error::ModelError| e.to_string();
        match kind {
            kind::PING | kind::SHUTDOWN => Ok(json!({})),
            kind::CREATE_GRAPH => {
                let req: CreateGraph = parse(body)?;
                self.next_handle += 1;
                let h = self.next_handle;
                self.graphs.insert(h, OptiGraph::with_id(req.id, &req.label));
                Ok(json!({ "handle": h }))
            }
            kind::ADD_NODE => {
                let req: AddNode = parse(body)?;
                let g = self.graph(handle)?;
                let id = g.add_node(&req.label).map_err(err)?;
                Ok(json!({ "node": to_value(&node_to_proxy(g, id).map_err(err)?) }))
            }
            kind::ADD_VARIABLE => {
                let req: AddVariable = parse(body)?;
                let g = self.graph(handle)?;
                let id = g
                    .add_variable(req.node, &req.name, req.bounds, &req.subscripts)
                    .map_err(err)?;
                Ok(json!({ "variable": to_value(&variable_to_proxy(g, id).map_err(err)?) }))
            }
            kind::ADD_CONSTRAINT => {
                let req: AddConstraint = parse(body)?;
                let c = self
                    .graph(handle)?
                    .add_constraint(req.node, req.constraint)
                    .map_err(err)?;
                Ok(json!({ "index": c.index }))
            }
            kind::SET_OBJECTIVE => {
                let req: SetObjective = parse(body)?;
                self.graph(handle)?
                    .set_node_objective(req.node, req.objective)
                    .map_err(err)?;
                Ok(json!({}))
            }
            kind::ADD_LINK_CONSTRAINT => {
                let req: AddLink = parse(body)?;
                let e = self.graph(handle)?.add_link_constraint(req.constraint).map_err(err)?;
                Ok(json!({ "edge": e }))
            }
            kind::SET_LOWER_BOUND | kind::SET_UPPER_BOUND => {
                let req: SetBound = parse(body)?;
                let g = self.graph(handle)?;
                let var = resolve_variable(g, &req.variable).map_err(err)?;
                if kind == kind::SET_LOWER_BOUND {
                    g.set_lower_bound(var, req.value).map_err(err)?;
                } else {
                    g.set_upper_bound(var, req.value).map_err(err)?;
                }
                Ok(json!({}))
            }
            kind::GET_BOUNDS => {
                let req: VariableRequest = parse(body)?;
                let g = self.graph(handle)?;
                let var = resolve_variable(g, &req.variable).map_err(err)?;
                Ok(json!({ "bounds": to_value(&g.bounds(var).map_err(err)?) }))
            }
            kind::LOOKUP_VARIABLE => {
                let req: LookupVariable = parse(body)?;
                let g = self.graph(handle)?;
                let var = variable_by_name(g, &req.name).map_err(err)?;
                Ok(json!({ "variable": to_value(&variable_to_proxy(g, var).map_err(err)?) }))
            }
            kind::NODE_COUNT => Ok(json!({ "count": self.graph(handle)?.num_nodes() })),
            kind::EXECUTE_PROGRAM => {
                let req: ExecuteProgram = parse(body)?;
                let out = apply_program(self.graph(handle)?, &req.program).map_err(err)?;
                Ok(to_value(&out))
            }
            kind::FETCH_GRAPH => Ok(json!({ "graph": to_value(self.graph(handle)?) })),
            kind::FLATTEN => Ok(json!({ "problem": to_value(&flatten(self.graph(handle)?)) })),
            kind::SUBPROBLEM_SETUP => {
                let req: SubproblemSetup = parse(body)?;
                let problem = match req.problem {
                    Some(p) => p,
                    None => flatten(self.graph(handle)?),
                };
                let sub = Subproblem::new(problem, &req.spec).map_err(|e| e.to_string())?;
                self.next_handle += 1;
                self.subproblems.insert(self.next_handle, sub);
                Ok(json!({ "key": self.next_handle }))
            }
            kind::SUBPROBLEM_SOLVE => {
                let req: SubproblemSolve = parse(body)?;
                let sub = self
                    .subproblems
                    .get(&req.key)
                    .ok_or_else(|| format!("unknown subproblem {}", req.key))?;
                let r = sub.solve(&req.values, &req.solver).map_err(|e| e.to_string())?;
                Ok(to_value(&r))
            }
            other => Err(format!("unknown command {other:?}")),
        }
    }
}

/// Runs the message loop until the peer disconnects or sends `shutdown`.
/// Returns `true` when stopped by `shutdown`.
pub fn serve<T: Transport>(transport: &mut T, state: &mut WorkerState) -> io::Result<bool> {
    loop {
        let payload = match transport.recv(None) {
            Ok(p) => p,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(false),
            Err(e) => return Err(e),
        };
        let msg = WireMessage::from_payload(&payload)?;
        let response = state.handle(&msg);
        transport.send(&response.payload())?;
        if msg.kind == kind::SHUTDOWN {
            return Ok(true);
        }
    }
}

/// Starts a worker thread and returns the coordinator end of its channel.
pub fn spawn_in_process() -> (ChannelTransport, JoinHandle<()>) {
    let (client, mut server) = ChannelTransport::pair();
    let handle = thread::spawn(move || {
        let _ = serve(&mut server, &mut WorkerState::new());
    });
    (client, handle)
}

/// Serves coordinator connections one after another, keeping the graph store across
/// connections, until a `shutdown` request arrives.
pub fn run_tcp_worker(listener: TcpListener) -> io::Result<()> {
    let mut state = WorkerState::new();
    for stream in listener.incoming() {
        let mut transport = TcpTransport::new(stream?)?;
        if serve(&mut transport, &mut state)? {
            break;
        }
    }
    Ok(())
}
