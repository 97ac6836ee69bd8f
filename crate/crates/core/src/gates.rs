// SPDX-License-Identifier: Apache-2.0

//! Gate library and the three-bit parity error detector.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::error::{NetlistError, SimError};
use crate::netlist::{NetId, Netlist, PortRole};
use crate::pressure::{DriveLevel, PressureState};
use crate::protocol::{reset_sequence, BitVector, ControlPorts, PhaseConfig};
use crate::scenario::Action;
use crate::sim::{Conduction, SimConfig};
use crate::trace::Simulator;
use crate::union_find::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Xor,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::And, GateKind::Or, GateKind::Xor];

    pub fn eval(self, a: bool, b: bool) -> bool {
        match self {
            GateKind::And => a && b,
            GateKind::Or => a || b,
            GateKind::Xor => a ^ b,
        }
    }

    pub fn valve_count(self) -> usize {
        match self {
            GateKind::And | GateKind::Or => 2,
            GateKind::Xor => 6,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Xor => "XOR",
        })
    }
}

/// Port names of the reference detector.
pub mod detector_ports {
    pub const BITS: [&str; 3] = ["bit1", "bit2", "bit3"];
    pub const PARITY: &str = "parity";
    pub const POWER: [&str; 3] = ["power1", "power2", "power3"];
    /// Upstream stage first: power2 feeds bit1/bit2, power1 the bit3 stage,
    /// power3 the comparator.
    pub const POWER_ON_ORDER: [&str; 3] = ["power2", "power1", "power3"];
    pub const POWER_OFF_ORDER: [&str; 3] = ["power3", "power2", "power1"];
    pub const RESET: [&str; 2] = ["reset1", "reset2"];
    pub const ERROR: &str = "error";
}

/// Incremental construction of gate circuits.
///
/// Gate outputs live on the channel layer; feeding one into a valve chamber
/// needs [`CircuitBuilder::cross_layer`], which becomes a via on `finish`.
#[derive(Debug, Default)]
pub struct CircuitBuilder {
    netlist: Netlist,
    pending_vias: Vec<(NetId, NetId)>,
    gates: usize,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn net(&mut self, name: &str) -> Result<NetId, NetlistError> {
        self.netlist.add_net(name)
    }

    /// New net carrying a drivable port of the same name.
    pub fn input(&mut self, name: &str, role: PortRole) -> Result<NetId, NetlistError> {
        let id = self.netlist.add_net(name)?;
        self.netlist.add_port(name, id, role)?;
        Ok(id)
    }

    pub fn output(&mut self, name: &str, net: NetId, role: PortRole) -> Result<(), NetlistError> {
        self.netlist.add_port(name, net, role)
    }

    pub fn valve(&mut self, name: &str, chamber: NetId, s1: NetId, s2: NetId) -> Result<(), NetlistError> {
        self.netlist.add_valve(name, chamber, s1, s2)
    }

    pub fn vent(&mut self, net: NetId) -> Result<(), NetlistError> {
        self.netlist.add_vent(net)
    }

    /// Fresh net on the other layer, joined to `net` by a via at `finish`.
    pub fn cross_layer(&mut self, net: NetId) -> Result<NetId, NetlistError> {
        let name = format!("{}_via{}", self.netlist.net_name(net), self.pending_vias.len());
        let twin = self.netlist.add_net(&name)?;
        self.pending_vias.push((net, twin));
        Ok(twin)
    }

    /// Adds a gate with auto-named valves and returns its output net.
    pub fn gate(&mut self, kind: GateKind, a: NetId, b: NetId, power: NetId) -> Result<NetId, NetlistError> {
        let prefix = format!("g{}", self.gates);
        let names: Vec<String> = (0..kind.valve_count()).map(|i| format!("{prefix}v{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        self.named_gate(kind, &prefix, &names, a, b, power)
    }

    /// Adds a gate; `valves` must hold `kind.valve_count()` names.
    ///
    /// AND: power through a then b. OR: a and b each connect power to the
    /// output. XOR: two vented arms `power -[a]- n1 -[b]- vent` and
    /// `power -[b]- n2 -[a]- vent`, each arm gating power onto the output.
    pub fn named_gate(
        &mut self,
        kind: GateKind,
        prefix: &str,
        valves: &[&str],
        a: NetId,
        b: NetId,
        power: NetId,
    ) -> Result<NetId, NetlistError> {
        assert_eq!(valves.len(), kind.valve_count());
        self.gates += 1;
        let out = self.net(&format!("{prefix}_out"))?;
        match kind {
            GateKind::And => {
                let m = self.net(&format!("{prefix}_m"))?;
                self.valve(valves[0], a, power, m)?;
                self.valve(valves[1], b, m, out)?;
            }
            GateKind::Or => {
                self.valve(valves[0], a, power, out)?;
                self.valve(valves[1], b, power, out)?;
            }
            GateKind::Xor => {
                let n1 = self.net(&format!("{prefix}_n1"))?;
                let n2 = self.net(&format!("{prefix}_n2"))?;
                let v1 = self.net(&format!("{prefix}_v1"))?;
                let v2 = self.net(&format!("{prefix}_v2"))?;
                self.vent(v1)?;
                self.vent(v2)?;
                self.valve(valves[0], a, power, n1)?;
                self.valve(valves[1], b, n1, v1)?;
                self.valve(valves[2], b, power, n2)?;
                self.valve(valves[3], a, n2, v2)?;
                self.valve(valves[4], n1, power, out)?;
                self.valve(valves[5], n2, power, out)?;
            }
        }
        Ok(out)
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    /// The circuit so far with pending vias applied.
    pub fn snapshot(&self) -> Result<Netlist, NetlistError> {
        let mut n = self.netlist.clone();
        for &(kept, twin) in &self.pending_vias {
            n.merge_via(kept, twin)?;
        }
        Ok(n)
    }

    pub fn finish(mut self) -> Result<Netlist, NetlistError> {
        for (kept, twin) in std::mem::take(&mut self.pending_vias) {
            self.netlist.merge_via(kept, twin)?;
        }
        Ok(self.netlist)
    }
}

/// A built circuit and the names of its interface ports.
#[derive(Debug, Clone, PartialEq)]
pub struct GateHandle {
    pub netlist: Netlist,
    /// Row inputs, most significant first.
    pub inputs: Vec<String>,
    pub output: String,
    /// In power-on order.
    pub power: Vec<String>,
    pub power_down: Vec<String>,
    pub reset: Vec<String>,
}

impl GateHandle {
    pub fn control_ports(&self) -> ControlPorts {
        ControlPorts {
            bits: self.inputs.clone(),
            parity: None,
            power: self.power.clone(),
            power_down: self.power_down.clone(),
            reset: self.reset.clone(),
        }
    }
}

/// A two-input gate with ports `a`, `b`, `power` and `out`.
pub fn build_gate(kind: GateKind) -> GateHandle {
    let mut b = CircuitBuilder::new();
    let a = b.input("a", PortRole::GenericIn).unwrap();
    let bb = b.input("b", PortRole::GenericIn).unwrap();
    let p = b.input("power", PortRole::PowerVac).unwrap();
    let out = b.gate(kind, a, bb, p).unwrap();
    b.output("out", out, PortRole::GenericOut).unwrap();
    GateHandle {
        netlist: b.finish().unwrap(),
        inputs: vec!["a".into(), "b".into()],
        output: "out".into(),
        power: vec!["power".into()],
        power_down: vec!["power".into()],
        reset: vec![],
    }
}

/// XOR cascade computing the parity of `inputs` bits (at least two). Every
/// stage has its own power port, powered upstream first and shut down
/// downstream first.
pub fn build_parity_chain(inputs: usize) -> GateHandle {
    assert!(inputs >= 2);
    let mut b = CircuitBuilder::new();
    let names: Vec<String> = (0..inputs).map(|i| format!("in{i}")).collect();
    let ids: Vec<NetId> = names
        .iter()
        .map(|n| b.input(n, PortRole::ControlBit).unwrap())
        .collect();
    let mut power = Vec::new();
    let mut acc = ids[0];
    for (stage, &next) in ids.iter().enumerate().skip(1) {
        let name = format!("power{stage}");
        let p = b.input(&name, PortRole::PowerVac).unwrap();
        power.push(name);
        let a = if stage == 1 { acc } else { b.cross_layer(acc).unwrap() };
        acc = b.gate(GateKind::Xor, a, next, p).unwrap();
    }
    b.output("out", acc, PortRole::GenericOut).unwrap();
    GateHandle {
        netlist: b.finish().unwrap(),
        inputs: names,
        output: "out".into(),
        power_down: power.iter().rev().cloned().collect(),
        power,
        reset: vec![],
    }
}

/// The three-bit parity error detector: three XOR stages comparing the
/// parity of `bit1..bit3` with the expected `parity`, plus unlatch valves on
/// every net that can hold vacuum after power-down.
pub fn build_parity_detector() -> GateHandle {
    use detector_ports as p;
    let mut b = CircuitBuilder::new();
    let bits: Vec<NetId> = p::BITS
        .iter()
        .map(|n| b.input(n, PortRole::ControlBit).unwrap())
        .collect();
    let parity = b.input(p::PARITY, PortRole::ExpectedParity).unwrap();
    let power: Vec<NetId> = p::POWER
        .iter()
        .map(|n| b.input(n, PortRole::PowerVac).unwrap())
        .collect();

    let o_a = b
        .named_gate(GateKind::Xor, "xa", &["A", "B", "C", "D", "E", "F"], bits[0], bits[1], power[1])
        .unwrap();
    let o_a_ctl = b.cross_layer(o_a).unwrap();
    let o_b = b
        .named_gate(GateKind::Xor, "xb", &["G", "H", "I", "J", "K", "L"], o_a_ctl, bits[2], power[0])
        .unwrap();
    let o_b_ctl = b.cross_layer(o_b).unwrap();
    let error = b
        .named_gate(GateKind::Xor, "xc", &["M", "N", "O", "P", "Q", "R"], o_b_ctl, parity, power[2])
        .unwrap();
    b.output(p::ERROR, error, PortRole::ErrorOut).unwrap();

    let core = GateHandle {
        netlist: b.snapshot().unwrap(),
        inputs: p::BITS.iter().chain([&p::PARITY]).map(|s| s.to_string()).collect(),
        output: p::ERROR.into(),
        power: p::POWER_ON_ORDER.iter().map(|s| s.to_string()).collect(),
        power_down: p::POWER_OFF_ORDER.iter().map(|s| s.to_string()).collect(),
        reset: vec![],
    };
    let mut targets: BTreeSet<String> = latch_prone_nets(&core, &SimConfig::vent_dominant())
        .expect("detector core settles");
    targets.insert(core.netlist.net_name(error).to_string());
    assert_eq!(targets.len(), 3, "unexpected latch analysis {targets:?}");

    let resets: Vec<NetId> = p::RESET
        .iter()
        .map(|n| b.input(n, PortRole::Reset).unwrap())
        .collect();
    // Internal latches clear on reset1, the output line on reset2.
    let error_name = core.netlist.net_name(error).to_string();
    let mut order: Vec<String> = targets.iter().filter(|t| **t != error_name).cloned().collect();
    order.push(error_name);
    for (valve, net) in ["S", "T", "U"].iter().zip(order) {
        let id = b.netlist().net_id(&net).unwrap();
        let tap = b.net(&format!("{net}_tap")).unwrap();
        let vent = b.net(&format!("{net}_vent")).unwrap();
        b.vent(vent).unwrap();
        let gate = if *valve == "U" { resets[1] } else { resets[0] };
        b.valve(valve, gate, tap, vent).unwrap();
        b.pending_vias.push((id, tap));
    }

    GateHandle {
        netlist: b.finish().unwrap(),
        reset: p::RESET.iter().map(|s| s.to_string()).collect(),
        ..core
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub inputs: BitVector,
    pub output: PressureState,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("row {row}: {source}")]
pub struct TruthTableError {
    pub row: BitVector,
    #[source]
    pub source: SimError,
}

/// One output per input combination, in binary counting order. Each row
/// sets the inputs, powers the circuit, reads the output and then runs the
/// reset protocol, all on one continuing simulation.
pub fn truth_table(handle: &GateHandle, config: &SimConfig) -> Result<Vec<TruthRow>, TruthTableError> {
    let n = handle.inputs.len();
    let start = BitVector::from_u32(0, n);
    let mut sim = Simulator::new(handle.netlist.clone(), *config).map_err(|e| TruthTableError {
        row: start,
        source: e.into(),
    })?;
    let reset = reset_sequence(&PhaseConfig::default(), &handle.control_ports());
    let mut rows = Vec::with_capacity(1 << n);
    for value in 0..(1u32 << n) {
        let row = BitVector::from_u32(value, n);
        let wrap = |source| TruthTableError {
            row: row.clone(),
            source,
        };
        for (port, &bit) in handle.inputs.iter().zip(row.bits()) {
            sim.drive(port, DriveLevel::from_bit(bit)).map_err(wrap)?;
        }
        for port in &handle.power {
            sim.drive(port, DriveLevel::Vac).map_err(wrap)?;
        }
        let output = sim.port_pressure(&handle.output).unwrap_or(PressureState::X);
        for event in reset.scenario.events() {
            sim.step(&event.action).map_err(wrap)?;
        }
        for port in &handle.inputs {
            sim.step(&Action::SetDrive {
                port: port.clone(),
                level: DriveLevel::Atm,
            })
            .map_err(wrap)?;
        }
        rows.push(TruthRow { inputs: row, output });
    }
    Ok(rows)
}

/// Nets that can still hold vacuum after power-down without a reset pulse:
/// for every input combination and every power-down order, power on, power
/// off, and collect vacuum nets with no drivable port, vent or leak in their
/// component.
pub fn latch_prone_nets(handle: &GateHandle, config: &SimConfig) -> Result<BTreeSet<String>, TruthTableError> {
    let n = handle.inputs.len();
    let mut found = BTreeSet::new();
    for order in permutations(&handle.power) {
        for value in 0..(1u32 << n) {
            let row = BitVector::from_u32(value, n);
            let wrap = |source| TruthTableError {
                row: row.clone(),
                source,
            };
            let mut sim = Simulator::new(handle.netlist.clone(), *config).map_err(|e| wrap(e.into()))?;
            for (port, &bit) in handle.inputs.iter().zip(row.bits()) {
                sim.drive(port, DriveLevel::from_bit(bit)).map_err(wrap)?;
            }
            for port in &handle.power {
                sim.drive(port, DriveLevel::Vac).map_err(wrap)?;
            }
            for port in &order {
                sim.drive(port, DriveLevel::Atm).map_err(wrap)?;
            }
            found.extend(trapped_vacuum(&sim));
        }
    }
    Ok(found)
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Vacuum nets whose open-valve component has no source.
pub fn trapped_vacuum(sim: &Simulator) -> BTreeSet<String> {
    let netlist = sim.netlist();
    let state = sim.state();
    let ids: Vec<NetId> = netlist.net_ids().collect();
    let index = |id: NetId| ids.binary_search(&id).unwrap();
    let mut uf = UnionFind::new(ids.len());
    for valve in &netlist.valves {
        if state.valve_open.get(&valve.name).is_some_and(|c| *c == Conduction::Open) {
            uf.union(index(valve.side1), index(valve.side2));
        }
    }
    let mut sourced = vec![false; ids.len()];
    let sources = netlist
        .vents
        .iter()
        .copied()
        .chain(netlist.faults.leak_nets().copied())
        .chain(netlist.ports.iter().filter(|p| p.role.is_drivable()).map(|p| p.net));
    for net in sources {
        let root = uf.find(index(net));
        sourced[root] = true;
    }
    ids.iter()
        .enumerate()
        .filter(|(i, id)| state.pressure(**id) == PressureState::Vac && !sourced[uf.find(*i)])
        .map(|(_, id)| netlist.net_name(*id).to_string())
        .collect()
}
