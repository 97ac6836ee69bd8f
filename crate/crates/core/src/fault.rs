// SPDX-License-Identifier: Apache-2.0

//! Structural and drive perturbations: punctures, severed tubing, stuck
//! valves and stuck control lines.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::FaultError;
use crate::netlist::{NetId, Netlist};
use crate::pressure::{DriveLevel, PressureState};
use crate::sim::{resolve_component, Conduction, SimState, Sources};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StuckState {
    Open,
    Closed,
}

impl StuckState {
    pub fn keyword(self) -> &'static str {
        match self {
            StuckState::Open => "OPEN",
            StuckState::Closed => "CLOSED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FaultKind {
    /// A hole open to the atmosphere on a net.
    Leak { net: String },
    /// Severed tubing. The distal side takes `distal_ports` and every valve
    /// terminal on the net, and is open to the atmosphere; the remaining
    /// ports stay on the proximal side.
    Cut { net: String, distal_ports: Vec<String> },
    StuckValve { valve: String, state: StuckState },
    StuckBit { port: String, level: DriveLevel },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fault {
    pub id: String,
    pub kind: FaultKind,
}

impl Fault {
    pub fn leak(id: &str, net: &str) -> Self {
        Self {
            id: id.into(),
            kind: FaultKind::Leak { net: net.into() },
        }
    }

    pub fn cut(id: &str, net: &str, distal_ports: &[&str]) -> Self {
        Self {
            id: id.into(),
            kind: FaultKind::Cut {
                net: net.into(),
                distal_ports: distal_ports.iter().map(|p| p.to_string()).collect(),
            },
        }
    }

    pub fn stuck_valve(id: &str, valve: &str, state: StuckState) -> Self {
        Self {
            id: id.into(),
            kind: FaultKind::StuckValve {
                valve: valve.into(),
                state,
            },
        }
    }

    pub fn stuck_bit(id: &str, port: &str, level: DriveLevel) -> Self {
        Self {
            id: id.into(),
            kind: FaultKind::StuckBit {
                port: port.into(),
                level,
            },
        }
    }
}

/// Scenario-DSL form, e.g. `LEAK bit2 AS puncture`.
impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FaultKind::Leak { net } => write!(f, "LEAK {net}")?,
            FaultKind::Cut { net, distal_ports } => {
                write!(f, "CUT {net}")?;
                if !distal_ports.is_empty() {
                    write!(f, " DISTAL {}", distal_ports.join(" "))?;
                }
            }
            FaultKind::StuckValve { valve, state } => {
                write!(f, "STUCK_VALVE {valve} {}", state.keyword())?
            }
            FaultKind::StuckBit { port, level } => write!(f, "STUCK_BIT {port} {level}")?,
        }
        write!(f, " AS {}", self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Effect {
    Leak(NetId),
    Cut { proximal: NetId, distal: NetId },
    StuckValve(String, Conduction),
    StuckBit(String, DriveLevel),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ActiveFault {
    fault: Fault,
    effect: Effect,
}

/// Faults currently applied to a netlist, in injection order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveFaults {
    entries: Vec<ActiveFault>,
}

impl ActiveFaults {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.fault.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&Fault> {
        self.entries.iter().find(|e| e.fault.id == id).map(|e| &e.fault)
    }

    /// Nets open to the atmosphere because of a fault.
    pub fn leak_nets(&self) -> impl Iterator<Item = &NetId> {
        self.entries.iter().filter_map(|e| match &e.effect {
            Effect::Leak(net) => Some(net),
            Effect::Cut { distal, .. } => Some(distal),
            _ => None,
        })
    }

    /// Most recent stuck override for a valve.
    pub fn stuck_valve(&self, valve: &str) -> Option<Conduction> {
        self.entries.iter().rev().find_map(|e| match &e.effect {
            Effect::StuckValve(name, c) if name == valve => Some(*c),
            _ => None,
        })
    }

    pub fn stuck_bit(&self, port: &str) -> Option<DriveLevel> {
        self.entries.iter().rev().find_map(|e| match &e.effect {
            Effect::StuckBit(name, level) if name == port => Some(*level),
            _ => None,
        })
    }

    pub(crate) fn rewrite_net(&mut self, from: NetId, to: NetId) {
        for entry in &mut self.entries {
            match &mut entry.effect {
                Effect::Leak(net) if *net == from => *net = to,
                Effect::Cut { proximal, distal } => {
                    if *proximal == from {
                        *proximal = to;
                    }
                    if *distal == from {
                        *distal = to;
                    }
                }
                _ => {}
            }
        }
    }
}

fn lookup_net(netlist: &Netlist, name: &str) -> Result<NetId, FaultError> {
    netlist
        .net_id(name)
        .ok_or_else(|| FaultError::UnknownTarget(name.to_string()))
}

/// Applies `fault`, returning the perturbed netlist and state. The inputs
/// are left untouched.
pub fn inject(
    netlist: &Netlist,
    state: &SimState,
    fault: &Fault,
) -> Result<(Netlist, SimState), FaultError> {
    if netlist.faults.get(&fault.id).is_some() {
        return Err(FaultError::DuplicateId(fault.id.clone()));
    }
    let mut netlist = netlist.clone();
    let mut state = state.clone();

    let effect = match &fault.kind {
        FaultKind::Leak { net } => Effect::Leak(lookup_net(&netlist, net)?),
        FaultKind::Cut { net, distal_ports } => {
            let proximal = lookup_net(&netlist, net)?;
            for port in distal_ports {
                match netlist.port(port) {
                    None => return Err(FaultError::UnknownTarget(port.clone())),
                    Some(p) if p.net != proximal => {
                        return Err(FaultError::PortNotOnNet {
                            port: port.clone(),
                            net: net.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
            let mut name = format!("{}~{}", netlist.net_name(proximal), fault.id);
            while netlist.name_taken(&name) {
                name.push('\'');
            }
            let distal = netlist.insert_net(name);
            for valve in &mut netlist.valves {
                for t in [&mut valve.chamber, &mut valve.side1, &mut valve.side2] {
                    if *t == proximal {
                        *t = distal;
                    }
                }
            }
            for port in &mut netlist.ports {
                if distal_ports.contains(&port.name) {
                    port.net = distal;
                }
            }
            state.pressure.insert(distal, PressureState::Atm);
            Effect::Cut { proximal, distal }
        }
        FaultKind::StuckValve { valve, state: stuck } => {
            if netlist.valve(valve).is_none() {
                return Err(FaultError::UnknownTarget(valve.clone()));
            }
            let c = match stuck {
                StuckState::Open => Conduction::Open,
                StuckState::Closed => Conduction::Closed,
            };
            Effect::StuckValve(valve.clone(), c)
        }
        FaultKind::StuckBit { port, level } => match netlist.port(port) {
            None => return Err(FaultError::UnknownTarget(port.clone())),
            Some(p) if !p.role.is_drivable() => return Err(FaultError::Undrivable(port.clone())),
            Some(_) => Effect::StuckBit(port.clone(), *level),
        },
    };

    netlist.faults.entries.push(ActiveFault {
        fault: fault.clone(),
        effect,
    });
    Ok((netlist, state))
}

/// Lifts an active fault. A repaired cut rejoins its two halves; their
/// stored pressures combine like any source-free component.
pub fn clear(
    netlist: &Netlist,
    state: &SimState,
    fault_id: &str,
) -> Result<(Netlist, SimState), FaultError> {
    let pos = netlist
        .faults
        .entries
        .iter()
        .position(|e| e.fault.id == fault_id)
        .ok_or_else(|| FaultError::UnknownFault(fault_id.to_string()))?;
    let mut netlist = netlist.clone();
    let mut state = state.clone();
    let entry = netlist.faults.entries.remove(pos);
    if let Effect::Cut { proximal, distal } = entry.effect {
        let merged = resolve_component(
            &[proximal, distal],
            &state,
            Sources::default(),
            crate::sim::ConflictMode::XOnConflict,
        );
        netlist.rewrite_net(distal, proximal);
        state.pressure.remove(&distal);
        state.pressure.insert(proximal, merged);
    }
    Ok((netlist, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detectability {
    Detectable,
    Undetectable,
}

/// Whether a parity check catches flipping the given bit positions
/// (zero-based). Only odd-sized flips change the parity.
pub fn detectability(
    base_bits: &[bool],
    flipped_positions: &BTreeSet<usize>,
) -> Result<Detectability, FaultError> {
    if let Some(&bad) = flipped_positions.iter().find(|&&i| i >= base_bits.len()) {
        return Err(FaultError::UnknownTarget(format!("bit {bad}")));
    }
    Ok(if flipped_positions.len() % 2 == 1 {
        Detectability::Detectable
    } else {
        Detectability::Undetectable
    })
}
