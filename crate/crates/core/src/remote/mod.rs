//! Distributed graphs: workers hosting graph stores, remote and proxy references,
//! inter-worker edges, and the framed wire protocol between them.

mod cluster;
pub mod proxy;
pub mod transport;
pub mod wire;
pub mod worker;

use thiserror::Error;

use crate::error::ModelError;

pub use cluster::{
    collect_remote_graph, realize_remote, BuildMode, Cluster, InterWorkerEdge, LinkRef, RemoteEdgeRef, RemoteNodeRef,
    RemoteOptiGraph, RemoteVariableRef, WorkerId, MAIN_WORKER, PING_TIMEOUT,
};
pub use proxy::{ProxyEdgeRef, ProxyNodeRef, ProxyVariableRef};
pub use transport::TransportKind;
pub use wire::{Transcript, WireMessage};

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("unknown worker {0}")]
    UnknownWorker(WorkerId),
    #[error("unknown remote graph {0}")]
    UnknownGraph(crate::algebra::GraphId),
    #[error("transport failure on {worker}, request {request_id}: {message}")]
    Transport {
        worker: WorkerId,
        request_id: u64,
        message: String,
    },
    #[error("{worker} did not answer request {request_id} within {seconds} s")]
    Timeout {
        worker: WorkerId,
        request_id: u64,
        seconds: f64,
    },
    #[error("{worker} rejected request {request_id}: {message}")]
    Remote {
        worker: WorkerId,
        request_id: u64,
        message: String,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("constraint spans several remote graphs: {0}; use add_interworker_link or add_link_constraint on a common ancestor")]
    CrossGraph(String),
    #[error("inter-worker link spans only one remote graph; use add_link_constraint instead")]
    SingleGraphLink,
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
