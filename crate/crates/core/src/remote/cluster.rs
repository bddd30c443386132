use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::net::TcpListener;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::proxy::{ProxyEdgeRef, ProxyNodeRef, ProxyVariableRef};
use super::transport::{TcpTransport, Transport, TransportKind};
use super::wire::{Transcript, WireMessage, KIND_ERROR, KIND_OK};
use super::worker::{self, kind};
use super::RemoteError;
use crate::algebra::{AffineExpr, Constraint, EdgeId, GraphId, NodeId, VariableBounds, VariableId};
use crate::error::ModelError;
use crate::graph::{owning_nodes, OptiGraph, StandardFormProblem};
use crate::program::{split_path, BuildProgram, GraphPlan, Instruction, ProgramOutput};

/// Worker 1 is the coordinator's own process; spawned or connected workers get 2, 3, ...
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WorkerId(pub u32);

pub const MAIN_WORKER: WorkerId = WorkerId(1);
pub const PING_TIMEOUT: Duration = Duration::from_secs(5);

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "worker {}", self.0)
    }
}

struct WorkerClient {
    transport: Mutex<Box<dyn Transport>>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

/// Cross-worker link constraints, kept only on the coordinator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterWorkerEdge {
    pub id: EdgeId,
    pub endpoints: BTreeSet<(GraphId, NodeId)>,
    pub link_constraints: Vec<Constraint>,
}

impl InterWorkerEdge {
    /// Number of distinct remote graphs among the endpoints.
    pub fn graph_span(&self) -> usize {
        self.endpoints.iter().map(|(g, _)| *g).collect::<BTreeSet<_>>().len()
    }
}

struct GraphMeta {
    label: String,
    worker: WorkerId,
    handle: u64,
    parent: Option<GraphId>,
    subgraphs: Vec<GraphId>,
    iw_edges: Vec<InterWorkerEdge>,
}

#[derive(Default)]
struct Registry {
    graphs: HashMap<GraphId, GraphMeta>,
    node_owner: HashMap<NodeId, GraphId>,
}

impl Registry {
    fn is_within(&self, mut g: GraphId, ancestor: GraphId) -> bool {
        loop {
            if g == ancestor {
                return true;
            }
            match self.graphs.get(&g).and_then(|m| m.parent) {
                Some(p) => g = p,
                None => return false,
            }
        }
    }
}

struct Inner {
    workers: Mutex<BTreeMap<WorkerId, Arc<WorkerClient>>>,
    next_worker: AtomicU32,
    next_request: AtomicU64,
    registry: Mutex<Registry>,
    transcript: Mutex<Option<Transcript>>,
}

impl Drop for Inner {
    fn drop(&mut self) {
        let workers = std::mem::take(self.workers.get_mut().expect("worker lock"));
        for (_, client) in workers {
            // daemons we only connected to keep running for the next coordinator
            let owned = client.thread.lock().map(|h| h.is_some()).unwrap_or(false);
            if !owned {
                continue;
            }
            if let Ok(mut t) = client.transport.lock() {
                let msg = WireMessage::request(0, kind::SHUTDOWN, None, json!({}));
                if t.send(&msg.payload()).is_ok() {
                    let _ = t.recv(Some(Duration::from_secs(1)));
                }
            }
            if let Some(h) = client.thread.lock().ok().and_then(|mut h| h.take()) {
                let _ = h.join();
            }
        }
    }
}

/// The coordinator: a registry of workers and of the remote graphs placed on them.
/// Cloning shares the same cluster.
#[derive(Clone)]
pub struct Cluster {
    inner: Arc<Inner>,
}

impl Default for Cluster {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Cluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cluster").field("workers", &self.workers()).finish()
    }
}

impl Cluster {
    /// A cluster with only the main worker, which runs in-process behind the same
    /// handle mechanism as every other worker.
    pub fn new() -> Self {
        let cluster = Self {
            inner: Arc::new(Inner {
                workers: Mutex::new(BTreeMap::new()),
                next_worker: AtomicU32::new(MAIN_WORKER.0),
                next_request: AtomicU64::new(1),
                registry: Mutex::new(Registry::default()),
                transcript: Mutex::new(None),
            }),
        };
        let (t, h) = worker::spawn_in_process();
        cluster.register(Box::new(t), Some(h));
        cluster
    }

    fn register(&self, transport: Box<dyn Transport>, thread: Option<JoinHandle<()>>) -> WorkerId {
        let id = WorkerId(self.inner.next_worker.fetch_add(1, Ordering::SeqCst));
        let client = Arc::new(WorkerClient {
            transport: Mutex::new(transport),
            thread: Mutex::new(thread),
        });
        self.inner.workers.lock().expect("worker lock").insert(id, client);
        id
    }

    /// Starts `n` workers. TCP workers listen on an ephemeral loopback port.
    pub fn spawn_workers(&self, n: usize, transport: TransportKind) -> Result<Vec<WorkerId>, RemoteError> {
        if n == 0 {
            return Err(RemoteError::InvalidArgument("at least one worker is required".into()));
        }
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let id = match transport {
                TransportKind::InProcess => {
                    let (t, h) = worker::spawn_in_process();
                    self.register(Box::new(t), Some(h))
                }
                TransportKind::Tcp => {
                    let io = |e: std::io::Error| RemoteError::Transport {
                        worker: WorkerId(0),
                        request_id: 0,
                        message: e.to_string(),
                    };
                    let listener = TcpListener::bind("127.0.0.1:0").map_err(io)?;
                    let addr = listener.local_addr().map_err(io)?;
                    let h = thread::spawn(move || {
                        let _ = worker::run_tcp_worker(listener);
                    });
                    let t = TcpTransport::connect(&addr.to_string()).map_err(io)?;
                    self.register(Box::new(t), Some(h))
                }
            };
            ids.push(id);
        }
        for id in &ids {
            self.ping(*id)?;
        }
        Ok(ids)
    }

    /// Connects to a running `worker --listen` daemon.
    pub fn connect_tcp(&self, addr: &str) -> Result<WorkerId, RemoteError> {
        let t = TcpTransport::connect(addr).map_err(|e| RemoteError::Transport {
            worker: WorkerId(0),
            request_id: 0,
            message: format!("connecting to {addr}: {e}"),
        })?;
        let id = self.register(Box::new(t), None);
        self.ping(id)?;
        Ok(id)
    }

    pub fn workers(&self) -> Vec<WorkerId> {
        self.inner
            .workers
            .lock()
            .expect("worker lock")
            .keys()
            .copied()
            .collect()
    }

    /// Workers other than the main one.
    pub fn remote_workers(&self) -> Vec<WorkerId> {
        self.workers().into_iter().filter(|w| *w != MAIN_WORKER).collect()
    }

    /// Records every frame sent or received from now on.
    pub fn capture(&self) -> Transcript {
        let t = Transcript::new();
        *self.inner.transcript.lock().expect("transcript lock") = Some(t.clone());
        t
    }

    pub fn stop_capture(&self) {
        *self.inner.transcript.lock().expect("transcript lock") = None;
    }

    pub fn ping(&self, worker: WorkerId) -> Result<(), RemoteError> {
        self.request(worker, kind::PING, None, json!({}), Some(PING_TIMEOUT))
            .map(|_| ())
    }

    pub(crate) fn call(
        &self,
        worker: WorkerId,
        kind: &str,
        handle: Option<u64>,
        body: Value,
    ) -> Result<Value, RemoteError> {
        self.request(worker, kind, handle, body, None)
    }

    fn request(
        &self,
        worker: WorkerId,
        kind: &str,
        handle: Option<u64>,
        body: Value,
        timeout: Option<Duration>,
    ) -> Result<Value, RemoteError> {
        let client = self
            .inner
            .workers
            .lock()
            .expect("worker lock")
            .get(&worker)
            .cloned()
            .ok_or(RemoteError::UnknownWorker(worker))?;
        let request_id = self.inner.next_request.fetch_add(1, Ordering::SeqCst);
        let msg = WireMessage::request(request_id, kind, handle, body);
        let payload = msg.payload();
        let transcript = self.inner.transcript.lock().expect("transcript lock").clone();
        let transport_err = |e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::TimedOut {
                RemoteError::Timeout {
                    worker,
                    request_id,
                    seconds: timeout.unwrap_or_default().as_secs_f64(),
                }
            } else {
                RemoteError::Transport {
                    worker,
                    request_id,
                    message: e.to_string(),
                }
            }
        };
        // one request in flight per worker: requests to the same worker are FIFO
        let response = {
            let mut t = client.transport.lock().expect("transport lock");
            if let Some(tr) = &transcript {
                tr.record(&payload);
            }
            t.send(&payload).map_err(transport_err)?;
            let bytes = t.recv(timeout).map_err(transport_err)?;
            if let Some(tr) = &transcript {
                tr.record(&bytes);
            }
            WireMessage::from_payload(&bytes).map_err(transport_err)?
        };
        if response.request_id != request_id {
            return Err(RemoteError::Protocol(format!(
                "{worker} answered request {} while {request_id} was pending",
                response.request_id
            )));
        }
        match response.kind.as_str() {
            KIND_OK => Ok(response.body),
            KIND_ERROR => Err(RemoteError::Remote {
                worker,
                request_id,
                message: response.body["message"]
                    .as_str()
                    .unwrap_or("unspecified error")
                    .to_string(),
            }),
            other => Err(RemoteError::Protocol(format!("unexpected response kind {other:?}"))),
        }
    }

    /// Creates an empty graph on `worker` and returns its coordinator-side handle.
    pub fn remote_graph(&self, worker: WorkerId, label: &str) -> Result<RemoteOptiGraph, RemoteError> {
        crate::algebra::validate_label(label)?;
        let id = GraphId::new();
        let body = self.call(worker, kind::CREATE_GRAPH, None, json!({ "id": id, "label": label }))?;
        let handle = body["handle"]
            .as_u64()
            .ok_or_else(|| RemoteError::Protocol("create_graph returned no handle".into()))?;
        self.inner.registry.lock().expect("registry lock").graphs.insert(
            id,
            GraphMeta {
                label: label.to_string(),
                worker,
                handle,
                parent: None,
                subgraphs: Vec::new(),
                iw_edges: Vec::new(),
            },
        );
        Ok(RemoteOptiGraph {
            cluster: self.clone(),
            id,
            worker,
            handle,
        })
    }

    fn registry(&self) -> std::sync::MutexGuard<'_, Registry> {
        self.inner.registry.lock().expect("registry lock")
    }

    fn graph_handle(&self, id: GraphId) -> Result<RemoteOptiGraph, RemoteError> {
        let reg = self.registry();
        let meta = reg.graphs.get(&id).ok_or(RemoteError::UnknownGraph(id))?;
        Ok(RemoteOptiGraph {
            cluster: self.clone(),
            id,
            worker: meta.worker,
            handle: meta.handle,
        })
    }
}

fn decode<T: DeserializeOwned>(value: Value) -> Result<T, RemoteError> {
    serde_json::from_value(value).map_err(|e| RemoteError::Protocol(format!("malformed response: {e}")))
}

/// Coordinator-side handle to a graph stored on a worker. It holds no nodes or edges;
/// those live in the worker's graph. Subgraphs and inter-worker edges are tracked here.
#[derive(Clone)]
pub struct RemoteOptiGraph {
    cluster: Cluster,
    id: GraphId,
    worker: WorkerId,
    handle: u64,
}

impl fmt::Debug for RemoteOptiGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteOptiGraph")
            .field("id", &self.id)
            .field("worker", &self.worker)
            .field("handle", &self.handle)
            .finish()
    }
}

impl PartialEq for RemoteOptiGraph {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteNodeRef {
    pub graph: RemoteOptiGraph,
    pub proxy: ProxyNodeRef,
}

impl RemoteNodeRef {
    pub fn id(&self) -> NodeId {
        self.proxy.node
    }

    pub fn label(&self) -> &str {
        &self.proxy.label
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteVariableRef {
    pub graph: RemoteOptiGraph,
    pub proxy: ProxyVariableRef,
}

impl RemoteVariableRef {
    pub fn id(&self) -> VariableId {
        self.proxy.id()
    }

    pub fn name(&self) -> &str {
        &self.proxy.name
    }

    pub fn worker(&self) -> WorkerId {
        self.graph.worker
    }

    /// Sends the proxy with the graph handle; the worker resolves it and applies the bound.
    pub fn set_lower_bound(&self, value: f64) -> Result<(), RemoteError> {
        self.graph
            .call(kind::SET_LOWER_BOUND, json!({ "variable": self.proxy, "value": value }))?;
        Ok(())
    }

    pub fn set_upper_bound(&self, value: f64) -> Result<(), RemoteError> {
        self.graph
            .call(kind::SET_UPPER_BOUND, json!({ "variable": self.proxy, "value": value }))?;
        Ok(())
    }

    pub fn bounds(&self) -> Result<VariableBounds, RemoteError> {
        let body = self.graph.call(kind::GET_BOUNDS, json!({ "variable": self.proxy }))?;
        decode(body["bounds"].clone())
    }
}

impl From<&RemoteVariableRef> for AffineExpr {
    fn from(v: &RemoteVariableRef) -> Self {
        AffineExpr::term(v.id(), 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteEdgeRef {
    pub graph: RemoteOptiGraph,
    pub proxy: ProxyEdgeRef,
}

/// Where a link constraint ended up.
#[derive(Clone, Debug, PartialEq)]
pub enum LinkRef {
    /// An ordinary edge on the worker graph that owns every referenced node.
    Local(RemoteEdgeRef),
    /// A coordinator-side edge spanning several remote graphs.
    InterWorker(EdgeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildMode {
    /// One request per program.
    Batched,
    /// One request per instruction.
    PerCall,
}

impl RemoteOptiGraph {
    pub fn id(&self) -> GraphId {
        self.id
    }

    pub fn worker(&self) -> WorkerId {
        self.worker
    }

    pub fn handle(&self) -> u64 {
        self.handle
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    fn call(&self, kind: &str, body: Value) -> Result<Value, RemoteError> {
        self.cluster.call(self.worker, kind, Some(self.handle), body)
    }

    pub fn label(&self) -> String {
        self.cluster
            .registry()
            .graphs
            .get(&self.id)
            .map(|m| m.label.clone())
            .unwrap_or_default()
    }

    pub fn subgraphs(&self) -> Vec<RemoteOptiGraph> {
        let ids: Vec<GraphId> = self
            .cluster
            .registry()
            .graphs
            .get(&self.id)
            .map(|m| m.subgraphs.clone())
            .unwrap_or_default();
        ids.into_iter()
            .filter_map(|id| self.cluster.graph_handle(id).ok())
            .collect()
    }

    pub fn subgraph(&self, label: &str) -> Option<RemoteOptiGraph> {
        self.subgraphs().into_iter().find(|g| g.label() == label)
    }

    pub fn parent(&self) -> Option<RemoteOptiGraph> {
        let parent = self.cluster.registry().graphs.get(&self.id).and_then(|m| m.parent);
        parent.and_then(|p| self.cluster.graph_handle(p).ok())
    }

    pub fn interworker_edges(&self) -> Vec<InterWorkerEdge> {
        self.cluster
            .registry()
            .graphs
            .get(&self.id)
            .map(|m| m.iw_edges.clone())
            .unwrap_or_default()
    }

    /// Remote graph holding `node`, if the coordinator knows it.
    pub fn owner_of(&self, node: NodeId) -> Option<GraphId> {
        self.cluster.registry().node_owner.get(&node).copied()
    }

    /// Nests `child`; the child may live on a different worker.
    pub fn add_subgraph(&self, child: &RemoteOptiGraph) -> Result<(), RemoteError> {
        if child.id == self.id {
            return Err(ModelError::SelfNesting.into());
        }
        let mut reg = self.cluster.registry();
        if !reg.graphs.contains_key(&child.id) {
            return Err(RemoteError::UnknownGraph(child.id));
        }
        if reg.graphs[&child.id].parent.is_some() {
            return Err(ModelError::DuplicateGraph(child.id).into());
        }
        if reg.is_within(self.id, child.id) {
            return Err(ModelError::SelfNesting.into());
        }
        reg.graphs.get_mut(&child.id).expect("checked").parent = Some(self.id);
        reg.graphs
            .get_mut(&self.id)
            .ok_or(RemoteError::UnknownGraph(self.id))?
            .subgraphs
            .push(child.id);
        Ok(())
    }

    fn register_nodes(&self, nodes: &[ProxyNodeRef]) {
        let mut reg = self.cluster.registry();
        for n in nodes {
            reg.node_owner.insert(n.node, self.id);
        }
    }

    pub fn add_node(&self, label: &str) -> Result<RemoteNodeRef, RemoteError> {
        let body = self.call(kind::ADD_NODE, json!({ "label": label }))?;
        let proxy: ProxyNodeRef = decode(body["node"].clone())?;
        self.register_nodes(std::slice::from_ref(&proxy));
        Ok(RemoteNodeRef {
            graph: self.clone(),
            proxy,
        })
    }

    pub fn add_variable(
        &self,
        node: &RemoteNodeRef,
        name: &str,
        bounds: VariableBounds,
        subscripts: &[i64],
    ) -> Result<RemoteVariableRef, RemoteError> {
        let body = self.call(
            kind::ADD_VARIABLE,
            json!({ "node": node.id(), "name": name, "subscripts": subscripts, "bounds": bounds }),
        )?;
        Ok(RemoteVariableRef {
            graph: self.clone(),
            proxy: decode(body["variable"].clone())?,
        })
    }

    fn check_local(&self, node: &RemoteNodeRef, expr: &AffineExpr) -> Result<(), RemoteError> {
        for var in expr.variables() {
            if var.node == node.id() {
                continue;
            }
            match self.owner_of(var.node) {
                Some(g) if g != self.id => {
                    return Err(RemoteError::CrossGraph(format!(
                        "variable on node {} belongs to another remote graph",
                        var.node
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn add_constraint(&self, node: &RemoteNodeRef, constraint: Constraint) -> Result<usize, RemoteError> {
        self.check_local(node, &constraint.body)?;
        let body = self.call(
            kind::ADD_CONSTRAINT,
            json!({ "node": node.id(), "constraint": constraint }),
        )?;
        decode(body["index"].clone())
    }

    pub fn set_objective(&self, node: &RemoteNodeRef, objective: AffineExpr) -> Result<(), RemoteError> {
        self.check_local(node, &objective)?;
        self.call(
            kind::SET_OBJECTIVE,
            json!({ "node": node.id(), "objective": objective }),
        )?;
        Ok(())
    }

    /// Remote graphs owning the nodes of `constraint`, each checked to be in this hierarchy.
    fn owners(&self, constraint: &Constraint) -> Result<BTreeMap<GraphId, BTreeSet<NodeId>>, RemoteError> {
        let reg = self.cluster.registry();
        let mut owners: BTreeMap<GraphId, BTreeSet<NodeId>> = BTreeMap::new();
        for node in owning_nodes(&constraint.body) {
            let g = *reg
                .node_owner
                .get(&node)
                .ok_or(ModelError::NodeOutsideHierarchy(node))?;
            if !reg.is_within(g, self.id) {
                return Err(ModelError::NodeOutsideHierarchy(node).into());
            }
            owners.entry(g).or_default().insert(node);
        }
        Ok(owners)
    }

    /// Link constraint within this hierarchy: forwarded to the owning worker when all
    /// nodes share one remote graph, otherwise stored here as an inter-worker edge.
    pub fn add_link_constraint(&self, constraint: Constraint) -> Result<LinkRef, RemoteError> {
        constraint.validate()?;
        let owners = self.owners(&constraint)?;
        if owners.len() <= 1 {
            let nodes: usize = owners.values().map(|s| s.len()).sum();
            if nodes < 2 {
                return Err(ModelError::SingleNodeLink(nodes).into());
            }
            let target = self.cluster.graph_handle(*owners.keys().next().expect("one owner"))?;
            let body = target.call(kind::ADD_LINK_CONSTRAINT, json!({ "constraint": constraint }))?;
            return Ok(LinkRef::Local(RemoteEdgeRef {
                graph: target,
                proxy: ProxyEdgeRef {
                    edge: decode(body["edge"].clone())?,
                },
            }));
        }
        self.store_interworker(owners, constraint).map(LinkRef::InterWorker)
    }

    /// Strict form: the constraint must span at least two remote graphs.
    pub fn add_interworker_link(&self, constraint: Constraint) -> Result<EdgeId, RemoteError> {
        constraint.validate()?;
        let owners = self.owners(&constraint)?;
        if owners.len() < 2 {
            return Err(RemoteError::SingleGraphLink);
        }
        self.store_interworker(owners, constraint)
    }

    fn store_interworker(
        &self,
        owners: BTreeMap<GraphId, BTreeSet<NodeId>>,
        constraint: Constraint,
    ) -> Result<EdgeId, RemoteError> {
        let endpoints: BTreeSet<(GraphId, NodeId)> = owners
            .into_iter()
            .flat_map(|(g, nodes)| nodes.into_iter().map(move |n| (g, n)))
            .collect();
        let mut reg = self.cluster.registry();
        let meta = reg.graphs.get_mut(&self.id).ok_or(RemoteError::UnknownGraph(self.id))?;
        if let Some(e) = meta.iw_edges.iter_mut().find(|e| e.endpoints == endpoints) {
            e.link_constraints.push(constraint);
            return Ok(e.id);
        }
        let edge = InterWorkerEdge {
            id: EdgeId::new(),
            endpoints,
            link_constraints: vec![constraint],
        };
        let id = edge.id;
        meta.iw_edges.push(edge);
        Ok(id)
    }

    /// Number of nodes in this graph's worker-resident store (not counting subgraphs).
    pub fn num_nodes(&self) -> Result<usize, RemoteError> {
        decode(self.call(kind::NODE_COUNT, json!({}))?["count"].clone())
    }

    pub fn proxy_to_remote(&self, proxy: ProxyVariableRef) -> RemoteVariableRef {
        RemoteVariableRef {
            graph: self.clone(),
            proxy,
        }
    }

    /// Runs the whole program on the worker in one round trip.
    pub fn execute_program(&self, program: &BuildProgram) -> Result<Vec<RemoteVariableRef>, RemoteError> {
        let out: ProgramOutput = decode(self.call(kind::EXECUTE_PROGRAM, json!({ "program": program }))?)?;
        self.register_nodes(&out.nodes);
        Ok(out.fetched.into_iter().map(|p| self.proxy_to_remote(p)).collect())
    }

    /// Runs the program one instruction per request, the way individual modeling calls would.
    pub fn run_per_call(&self, program: &BuildProgram) -> Result<Vec<RemoteVariableRef>, RemoteError> {
        let mut nodes: HashMap<String, RemoteNodeRef> = HashMap::new();
        let mut vars: HashMap<String, VariableId> = HashMap::new();
        let lookup = |vars: &mut HashMap<String, VariableId>, name: &str| -> Result<VariableId, ModelError> {
            if let Some(v) = vars.get(name) {
                return Ok(*v);
            }
            let body = self
                .call(kind::LOOKUP_VARIABLE, json!({ "name": name }))
                .map_err(|_| ModelError::UnknownVariable(name.to_string()))?;
            let p: ProxyVariableRef = serde_json::from_value(body["variable"].clone())
                .map_err(|_| ModelError::UnknownVariable(name.into()))?;
            vars.insert(name.to_string(), p.id());
            Ok(p.id())
        };
        let node = |nodes: &HashMap<String, RemoteNodeRef>, label: &str| -> Result<RemoteNodeRef, RemoteError> {
            nodes
                .get(label)
                .cloned()
                .ok_or_else(|| ModelError::UnknownNodeLabel(label.to_string()).into())
        };
        for ins in &program.instructions {
            match ins {
                Instruction::AddNode { label } => {
                    nodes.insert(label.clone(), self.add_node(label)?);
                }
                Instruction::AddVariable {
                    node: n,
                    name,
                    subscripts,
                    bounds,
                } => {
                    let v = self.add_variable(&node(&nodes, n)?, name, *bounds, subscripts)?;
                    vars.insert(v.proxy.name.clone(), v.id());
                }
                Instruction::AddConstraint { node: n, constraint } => {
                    let c = constraint.resolve(|name| lookup(&mut vars, name))?;
                    self.add_constraint(&node(&nodes, n)?, c)?;
                }
                Instruction::SetObjective { node: n, objective } => {
                    let e = objective.resolve(|name| lookup(&mut vars, name))?;
                    self.set_objective(&node(&nodes, n)?, e)?;
                }
                Instruction::AddLinkConstraint { constraint } => {
                    let c = constraint.resolve(|name| lookup(&mut vars, name))?;
                    self.add_link_constraint(c)?;
                }
            }
        }
        program
            .fetch
            .iter()
            .map(|name| {
                let body = self.call(kind::LOOKUP_VARIABLE, json!({ "name": name }))?;
                Ok(self.proxy_to_remote(decode(body["variable"].clone())?))
            })
            .collect()
    }

    /// The worker-resident graph of this remote graph alone.
    pub fn fetch_graph(&self) -> Result<OptiGraph, RemoteError> {
        decode(self.call(kind::FETCH_GRAPH, json!({}))?["graph"].clone())
    }

    /// Flattens this remote graph's own store on its worker.
    pub fn flatten_on_worker(&self) -> Result<StandardFormProblem, RemoteError> {
        decode(self.call(kind::FLATTEN, json!({}))?["problem"].clone())
    }

    /// Rebuilds the whole hierarchy as one local graph. Inter-worker edges become
    /// ordinary edges on the graph that stored them.
    pub fn collect(&self) -> Result<OptiGraph, RemoteError> {
        let mut graph = self.fetch_graph()?;
        let subs = self.subgraphs();
        let collected: Vec<Result<OptiGraph, RemoteError>> = thread::scope(|s| {
            let handles: Vec<_> = subs.iter().map(|sub| s.spawn(move || sub.collect())).collect();
            handles.into_iter().map(|h| h.join().expect("collect thread")).collect()
        });
        for child in collected {
            graph.add_subgraph(child?)?;
        }
        for edge in self.interworker_edges() {
            for c in edge.link_constraints {
                graph.add_link_constraint(c)?;
            }
        }
        Ok(graph)
    }
}

pub fn collect_remote_graph(graph: &RemoteOptiGraph) -> Result<OptiGraph, RemoteError> {
    graph.collect()
}

type NameMaps = HashMap<Vec<String>, HashMap<String, VariableId>>;

/// Builds a plan as remote graphs. `placement` picks the worker for each subgraph
/// path (the root has the empty path). Sibling subgraphs are built concurrently.
pub fn realize_remote<P>(
    cluster: &Cluster,
    plan: &GraphPlan,
    placement: &P,
    mode: BuildMode,
) -> Result<RemoteOptiGraph, RemoteError>
where
    P: Fn(&[String]) -> WorkerId + Sync,
{
    let requirements = plan.fetch_requirements();
    realize_at(cluster, plan, Vec::new(), &requirements, placement, mode).map(|(g, _)| g)
}

fn realize_at<P>(
    cluster: &Cluster,
    plan: &GraphPlan,
    path: Vec<String>,
    requirements: &BTreeMap<Vec<String>, BTreeSet<String>>,
    placement: &P,
    mode: BuildMode,
) -> Result<(RemoteOptiGraph, NameMaps), RemoteError>
where
    P: Fn(&[String]) -> WorkerId + Sync,
{
    let graph = cluster.remote_graph(placement(&path), &plan.label)?;
    let mut program = plan.program.clone();
    if let Some(names) = requirements.get(&path) {
        program.fetch.extend(names.iter().cloned());
    }
    let fetched = match mode {
        BuildMode::Batched => graph.execute_program(&program)?,
        BuildMode::PerCall => graph.run_per_call(&program)?,
    };
    let mut maps: NameMaps = HashMap::new();
    maps.insert(
        path.clone(),
        fetched.iter().map(|v| (v.proxy.name.clone(), v.id())).collect(),
    );

    let children: Vec<Result<(RemoteOptiGraph, NameMaps), RemoteError>> = thread::scope(|s| {
        let handles: Vec<_> = plan
            .subgraphs
            .iter()
            .map(|sub| {
                let mut child_path = path.clone();
                child_path.push(sub.label.clone());
                s.spawn(move || realize_at(cluster, sub, child_path, requirements, placement, mode))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("build thread")).collect()
    });
    for child in children {
        let (child, child_maps) = child?;
        graph.add_subgraph(&child)?;
        maps.extend(child_maps);
    }

    for link in &plan.links {
        let c = link.resolve(|p| {
            let (subs, name) = split_path(p);
            let mut key = path.clone();
            key.extend(subs.iter().map(|s| s.to_string()));
            maps.get(&key)
                .and_then(|m| m.get(name))
                .copied()
                .ok_or_else(|| ModelError::UnknownVariable(p.to_string()))
        })?;
        graph.add_link_constraint(c)?;
    }
    Ok((graph, maps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Sense;

    #[test]
    fn main_worker_is_one() {
        let c = Cluster::new();
        assert_eq!(c.workers(), vec![MAIN_WORKER]);
        assert!(c.remote_workers().is_empty());
        c.ping(MAIN_WORKER).unwrap();
        let ids = c.spawn_workers(2, TransportKind::InProcess).unwrap();
        assert_eq!(ids, vec![WorkerId(2), WorkerId(3)]);
        assert!(c.spawn_workers(0, TransportKind::InProcess).is_err());
        assert!(matches!(c.ping(WorkerId(9)), Err(RemoteError::UnknownWorker(_))));
    }

    #[test]
    fn cross_graph_constraint_is_redirected() {
        let c = Cluster::new();
        let w = c.spawn_workers(2, TransportKind::InProcess).unwrap();
        let top = c.remote_graph(MAIN_WORKER, "top").unwrap();
        let a = c.remote_graph(w[0], "a").unwrap();
        let b = c.remote_graph(w[1], "b").unwrap();
        top.add_subgraph(&a).unwrap();
        top.add_subgraph(&b).unwrap();
        let na = a.add_node("n").unwrap();
        let nb = b.add_node("n").unwrap();
        let x = a.add_variable(&na, "x", VariableBounds::non_negative(), &[]).unwrap();
        let y = b.add_variable(&nb, "y", VariableBounds::non_negative(), &[]).unwrap();
        let c1 = Constraint::new(
            AffineExpr::from_terms([(x.id(), 1.0), (y.id(), 1.0)], 0.0),
            Sense::LessEqual,
            1.0,
        );
        assert!(matches!(
            a.add_constraint(&na, c1.clone()),
            Err(RemoteError::CrossGraph(_))
        ));
        // the link must be stored on a common ancestor
        assert!(a.add_link_constraint(c1.clone()).is_err());
        assert!(matches!(top.add_link_constraint(c1).unwrap(), LinkRef::InterWorker(_)));
        assert_eq!(top.interworker_edges()[0].graph_span(), 2);
    }

    #[test]
    fn nesting_rules() {
        let c = Cluster::new();
        let g = c.remote_graph(MAIN_WORKER, "g").unwrap();
        let h = c.remote_graph(MAIN_WORKER, "h").unwrap();
        assert!(g.add_subgraph(&g).is_err());
        g.add_subgraph(&h).unwrap();
        assert!(g.add_subgraph(&h).is_err());
        assert!(h.add_subgraph(&g).is_err());
        assert_ne!(g.handle(), h.handle());
        assert_eq!(g.subgraphs(), vec![h.clone()]);
        assert_eq!(h.parent().unwrap(), g);
    }
}
