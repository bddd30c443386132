//! Worked example models: a storage sizing LP, a toy capacity expansion model and
//! a small remote-graph tutorial build.

mod cem;
mod storage;
mod tutorial;

use thiserror::Error;

pub use cem::{build_toy_cem_remote, toy_cem_plan, ToyCemInstance, ToyCemParams};
pub use storage::{build_storage_remote, storage_plan, StorageParams};
pub use tutorial::{tutorial_local, tutorial_remote, Tutorial};

/// Root (master) subgraph of the storage model.
pub const STORAGE_ROOT: &str = storage::PLANNING;
/// Root (master) subgraph of the capacity expansion model.
pub const CEM_ROOT: &str = cem::PLANNING;

use crate::error::ModelError;
use crate::remote::RemoteError;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("need at least {needed} remote worker(s), have {available}")]
    WorkerShortfall { needed: usize, available: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
}
