// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::sim::SimState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("unknown net {0}")]
    UnknownNet(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("self-merge of net `{0}`")]
    SelfMerge(String),
    #[error("valve `{0}` has its chamber on its own channel")]
    ChamberOnChannel(String),
    #[error("net `{0}` cannot be both vented and a power input")]
    VentedPowerNet(String),
}

/// Settling did not reach a fixed point.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no fixed point after {iterations} iterations (cycle of {} states)", cycle.len())]
pub struct OscillationError {
    pub iterations: usize,
    /// States visited on the detected cycle, or the trailing window when the
    /// iteration budget ran out first.
    pub cycle: Vec<SimState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("fault target `{0}` does not exist")]
    UnknownTarget(String),
    #[error("fault id `{0}` already in use")]
    DuplicateId(String),
    #[error("no active fault with id `{0}`")]
    UnknownFault(String),
    #[error("port `{port}` is not on net `{net}`")]
    PortNotOnNet { port: String, net: String },
    #[error("port `{0}` cannot be driven")]
    Undrivable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Oscillation(#[from] OscillationError),
    #[error("scenario references unknown port `{0}`")]
    UnknownPort(String),
    #[error("port `{0}` is an output and cannot be driven")]
    Undrivable(String),
    #[error(transparent)]
    Fault(#[from] FaultError),
}
