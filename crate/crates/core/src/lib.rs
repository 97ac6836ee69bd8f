// SPDX-License-Identifier: Apache-2.0

//! Switch-level simulation of vacuum-driven membrane-valve logic.
//!
//! Nets hold one of three discrete pressures ([`PressureState`]): vacuum
//! (logical 1), atmosphere (logical 0) or indeterminate. Valves conduct when
//! their chamber holds vacuum; [`sim::settle`] finds the steady state of a
//! [`Netlist`] under a set of port drives. On top of the engine sit a gate
//! library with a three-stage parity error detector, the controller protocol
//! that powers and resets it, fault injection, and a model of a three-bellows
//! compression device monitored by the detector.

pub mod dsl;
pub mod error;
pub mod fault;
pub mod gates;
pub mod ipc;
pub mod netlist;
pub mod pressure;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod trace;
mod union_find;

pub use dsl::{parse_netlist, parse_scenario, serialize_netlist, serialize_scenario, ParseError};
pub use error::{FaultError, NetlistError, OscillationError, SimError};
pub use fault::{Fault, FaultKind};
pub use gates::{build_gate, build_parity_detector, truth_table, GateHandle, GateKind};
pub use netlist::{NetId, Netlist, PortRole};
pub use pressure::{DriveLevel, PressureState};
pub use protocol::{parity, BitVector, ParityMethod, PhaseConfig, ScheduleMode};
pub use scenario::{Action, Scenario, ScenarioEvent};
pub use ipc::{run_ipc, IpcRun, IpcSystem, Whistle};
pub use sim::{settle, ConductionSemantics, ConflictMode, Drives, SimConfig, SimState};
pub use trace::{run_events, Simulator, Trace};
