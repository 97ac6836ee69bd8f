// SPDX-License-Identifier: Apache-2.0

//! Fixed-point settling of net pressures.
//!
//! One settling step computes every valve's conduction from the current
//! state, groups nets into components joined by open valves, and resolves
//! each component from its sources (vents, driven ports) or, when it has
//! none, from the pressure it already holds. Steps repeat synchronously
//! until the state stops changing.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::OscillationError;
use crate::netlist::{NetId, Netlist};
use crate::pressure::{DriveLevel, PressureState};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConductionSemantics {
    /// Open iff the chamber holds vacuum.
    ChamberVac,
    /// Open iff the chamber is below at least one channel side; a valve whose
    /// chamber and both sides hold vacuum is closed.
    StrictPaper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConflictMode {
    /// A component fed by both atmosphere and vacuum is indeterminate.
    XOnConflict,
    /// Vents and atmospheric drives win over vacuum supplies.
    VentDominates,
    /// Vacuum supplies win over vents.
    SupplyDominates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub conduction: ConductionSemantics,
    pub conflict: ConflictMode,
    /// Iteration cap; `None` means `4 * nets + 8`.
    pub max_iterations: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            conduction: ConductionSemantics::ChamberVac,
            conflict: ConflictMode::XOnConflict,
            max_iterations: None,
        }
    }
}

impl SimConfig {
    /// Operating point for circuits that rely on vents overpowering the
    /// narrow vacuum channels (every XOR-based circuit in the gate library).
    pub fn vent_dominant() -> Self {
        Self {
            conflict: ConflictMode::VentDominates,
            ..Self::default()
        }
    }

    pub fn with_conduction(mut self, conduction: ConductionSemantics) -> Self {
        self.conduction = conduction;
        self
    }

    pub fn with_conflict(mut self, conflict: ConflictMode) -> Self {
        self.conflict = conflict;
        self
    }

    pub fn iteration_limit(&self, nets: usize) -> usize {
        self.max_iterations.unwrap_or(4 * nets + 8).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Conduction {
    Open,
    Closed,
    X,
}

impl fmt::Display for Conduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Conduction::Open => "OPEN",
            Conduction::Closed => "CLOSED",
            Conduction::X => "X",
        })
    }
}

/// Conduction of a single valve given its chamber and channel pressures.
pub fn conduction(
    chamber: PressureState,
    side1: PressureState,
    side2: PressureState,
    semantics: ConductionSemantics,
) -> Conduction {
    use PressureState::*;
    match (chamber, semantics) {
        (Atm, _) => Conduction::Closed,
        (X, _) => Conduction::X,
        (Vac, ConductionSemantics::ChamberVac) => Conduction::Open,
        (Vac, ConductionSemantics::StrictPaper) => match (side1, side2) {
            (Vac, Vac) => Conduction::Closed,
            (Atm, _) | (_, Atm) => Conduction::Open,
            _ => Conduction::X,
        },
    }
}

/// Which kinds of source feed a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Sources {
    pub atm: bool,
    pub vac: bool,
}

impl Sources {
    fn add(&mut self, level: DriveLevel) {
        match level {
            DriveLevel::Atm => self.atm = true,
            DriveLevel::Vac => self.vac = true,
        }
    }

    fn merge(&mut self, other: Sources) {
        self.atm |= other.atm;
        self.vac |= other.vac;
    }

    pub fn any(self) -> bool {
        self.atm || self.vac
    }
}

/// Aggregate of the pressures a component's members already hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stored {
    Empty,
    Uniform(PressureState),
    Mixed,
}

impl Stored {
    fn push(self, p: PressureState) -> Self {
        match self {
            Stored::Empty => Stored::Uniform(p),
            Stored::Uniform(q) if q == p => self,
            _ => Stored::Mixed,
        }
    }

    fn merge(self, other: Stored) -> Self {
        match other {
            Stored::Empty => self,
            Stored::Uniform(p) => self.push(p),
            Stored::Mixed => Stored::Mixed,
        }
    }
}

fn resolve(sources: Sources, stored: Stored, mode: ConflictMode) -> PressureState {
    match (sources.atm, sources.vac) {
        (true, false) => PressureState::Atm,
        (false, true) => PressureState::Vac,
        (true, true) => match mode {
            ConflictMode::XOnConflict => PressureState::X,
            ConflictMode::VentDominates => PressureState::Atm,
            ConflictMode::SupplyDominates => PressureState::Vac,
        },
        (false, false) => match stored {
            Stored::Uniform(p) => p,
            // Fresh nets admit atmosphere.
            Stored::Empty => PressureState::Atm,
            Stored::Mixed => PressureState::X,
        },
    }
}

/// Pressure of one connected component. Without sources the component keeps
/// its stored pressure when all members agree and becomes `X` otherwise.
pub fn resolve_component(
    members: &[NetId],
    prev: &SimState,
    sources: Sources,
    mode: ConflictMode,
) -> PressureState {
    let stored = members
        .iter()
        .fold(Stored::Empty, |acc, &net| acc.push(prev.pressure(net)));
    resolve(sources, stored, mode)
}

/// Pressure of every net and conduction of every valve.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SimState {
    pub pressure: BTreeMap<NetId, PressureState>,
    pub valve_open: BTreeMap<String, Conduction>,
}

impl SimState {
    /// Everything at atmosphere, every valve closed.
    pub fn initial(netlist: &Netlist) -> Self {
        Self {
            pressure: netlist
                .net_ids()
                .map(|id| (id, PressureState::Atm))
                .collect(),
            valve_open: netlist
                .valves
                .iter()
                .map(|v| (v.name.clone(), Conduction::Closed))
                .collect(),
        }
    }

    /// Pressure of a net; nets missing from the state read as atmosphere.
    pub fn pressure(&self, net: NetId) -> PressureState {
        self.pressure
            .get(&net)
            .copied()
            .unwrap_or(PressureState::Atm)
    }

    pub fn port_pressure(&self, netlist: &Netlist, port: &str) -> Option<PressureState> {
        netlist.port(port).map(|p| self.pressure(p.net))
    }

    pub fn has_x(&self) -> bool {
        self.pressure.values().any(|p| *p == PressureState::X)
    }
}

/// Levels currently applied to drivable ports. Ports not listed sit at
/// atmosphere, like a de-energized three-port solenoid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Drives(BTreeMap<String, DriveLevel>);

impl Drives {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, port: &str, level: DriveLevel) {
        self.0.insert(port.to_string(), level);
    }

    pub fn with(mut self, port: &str, level: DriveLevel) -> Self {
        self.set(port, level);
        self
    }

    pub fn level(&self, port: &str) -> DriveLevel {
        self.0.get(port).copied().unwrap_or(DriveLevel::Atm)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, DriveLevel)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Netlist flattened onto dense indices for the inner loop.
struct Compiled {
    ids: Vec<NetId>,
    valves: Vec<CompiledValve>,
    sources: Vec<Sources>,
}

struct CompiledValve {
    chamber: usize,
    side1: usize,
    side2: usize,
    stuck: Option<Conduction>,
}

impl Compiled {
    fn new(netlist: &Netlist, drives: &Drives) -> Self {
        let ids: Vec<NetId> = netlist.net_ids().collect();
        let index: BTreeMap<NetId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let idx = |id: NetId| index[&id];

        let valves = netlist
            .valves
            .iter()
            .map(|v| CompiledValve {
                chamber: idx(v.chamber),
                side1: idx(v.side1),
                side2: idx(v.side2),
                stuck: netlist.faults.stuck_valve(&v.name),
            })
            .collect();

        let mut sources = vec![Sources::default(); ids.len()];
        for &net in netlist.vents.iter().chain(netlist.faults.leak_nets()) {
            sources[idx(net)].atm = true;
        }
        for port in netlist.ports.iter().filter(|p| p.role.is_drivable()) {
            let level = netlist
                .faults
                .stuck_bit(&port.name)
                .unwrap_or_else(|| drives.level(&port.name));
            sources[idx(port.net)].add(level);
        }

        Self {
            ids,
            valves,
            sources,
        }
    }

    fn conductions(&self, state: &[PressureState], semantics: ConductionSemantics) -> Vec<Conduction> {
        self.valves
            .iter()
            .map(|v| {
                v.stuck.unwrap_or_else(|| {
                    conduction(state[v.chamber], state[v.side1], state[v.side2], semantics)
                })
            })
            .collect()
    }

    fn components(&self, cond: &[Conduction], admit_x: bool) -> (Vec<usize>, UnionFind) {
        let mut uf = UnionFind::new(self.ids.len());
        for (v, c) in self.valves.iter().zip(cond) {
            if *c == Conduction::Open || (admit_x && *c == Conduction::X) {
                uf.union(v.side1, v.side2);
            }
        }
        let roots = (0..self.ids.len()).map(|i| uf.find(i)).collect();
        (roots, uf)
    }

    fn aggregate(&self, roots: &[usize], state: &[PressureState]) -> (Vec<Sources>, Vec<Stored>) {
        let n = self.ids.len();
        let mut sources = vec![Sources::default(); n];
        let mut stored = vec![Stored::Empty; n];
        for i in 0..n {
            let r = roots[i];
            sources[r].merge(self.sources[i]);
            stored[r] = stored[r].merge(Stored::Uniform(state[i]));
        }
        (sources, stored)
    }

    /// One synchronous update.
    fn step(&self, state: &[PressureState], config: &SimConfig) -> Vec<PressureState> {
        let cond = self.conductions(state, config.conduction);
        let (definite, _) = self.components(&cond, false);
        let (def_src, def_stored) = self.aggregate(&definite, state);

        let any_x = cond.contains(&Conduction::X);
        let potential = if any_x {
            let (roots, _) = self.components(&cond, true);
            let (src, stored) = self.aggregate(&roots, state);
            Some((roots, src, stored))
        } else {
            None
        };

        (0..self.ids.len())
            .map(|i| {
                // Directly sourced nets hold their own source level.
                if self.sources[i].any() {
                    return resolve(self.sources[i], Stored::Empty, config.conflict);
                }
                let d = definite[i];
                let value = resolve(def_src[d], def_stored[d], config.conflict);
                match &potential {
                    // Nets reached only through X valves stay definite only if
                    // opening those valves would not change their pressure.
                    Some((roots, src, stored)) if !def_src[d].any() => {
                        let p = roots[i];
                        let widened = resolve(src[p], stored[p], config.conflict);
                        if widened == value {
                            value
                        } else {
                            PressureState::X
                        }
                    }
                    _ => value,
                }
            })
            .collect()
    }

    fn to_state(&self, netlist: &Netlist, state: &[PressureState], semantics: ConductionSemantics) -> SimState {
        let cond = self.conductions(state, semantics);
        SimState {
            pressure: self.ids.iter().copied().zip(state.iter().copied()).collect(),
            valve_open: netlist
                .valves
                .iter()
                .map(|v| v.name.clone())
                .zip(cond)
                .collect(),
        }
    }
}

/// Settles the netlist from `prev` under `drives`.
pub fn settle(
    netlist: &Netlist,
    prev: &SimState,
    drives: &Drives,
    config: &SimConfig,
) -> Result<SimState, OscillationError> {
    let compiled = Compiled::new(netlist, drives);
    let mut current: Vec<PressureState> = compiled.ids.iter().map(|&id| prev.pressure(id)).collect();
    let limit = config.iteration_limit(compiled.ids.len());
    let mut history = vec![current.clone()];

    for _ in 0..limit {
        let next = compiled.step(&current, config);
        if next == current {
            return Ok(compiled.to_state(netlist, &current, config.conduction));
        }
        if let Some(start) = history.iter().position(|s| *s == next) {
            let cycle = history[start..]
                .iter()
                .map(|s| compiled.to_state(netlist, s, config.conduction))
                .collect();
            return Err(OscillationError {
                iterations: history.len(),
                cycle,
            });
        }
        history.push(next.clone());
        current = next;
    }

    let tail = history.len().saturating_sub(4);
    Err(OscillationError {
        iterations: limit,
        cycle: history[tail..]
            .iter()
            .map(|s| compiled.to_state(netlist, s, config.conduction))
            .collect(),
    })
}
