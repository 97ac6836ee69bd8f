// SPDX-License-Identifier: Apache-2.0

//! Structural model of a pneumatic circuit: nets, membrane valves, vents,
//! ports and via merges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::NetlistError;
use crate::fault::ActiveFaults;

/// Opaque net identifier. Ids are never reused within one netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NetId(u32);

impl NetId {
    pub fn new(raw: u32) -> Self {
        NetId(raw)
    }

    pub fn raw(self) -> u32 {
        self.0
    }
}

impl fmt::Display for NetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A monolithic membrane valve: a gap in a channel (between `side1` and
/// `side2`) facing a chamber across the membrane.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Valve {
    pub name: String,
    pub chamber: NetId,
    pub side1: NetId,
    pub side2: NetId,
}

impl Valve {
    pub fn terminals(&self) -> [NetId; 3] {
        [self.chamber, self.side1, self.side2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PortRole {
    ControlBit,
    ExpectedParity,
    PowerVac,
    Reset,
    ErrorOut,
    GenericIn,
    GenericOut,
}

impl PortRole {
    pub const ALL: [PortRole; 7] = [
        PortRole::ControlBit,
        PortRole::ExpectedParity,
        PortRole::PowerVac,
        PortRole::Reset,
        PortRole::ErrorOut,
        PortRole::GenericIn,
        PortRole::GenericOut,
    ];

    /// Output roles are observed, never driven.
    pub fn is_drivable(self) -> bool {
        !matches!(self, PortRole::ErrorOut | PortRole::GenericOut)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            PortRole::ControlBit => "CONTROL_BIT",
            PortRole::ExpectedParity => "EXPECTED_PARITY",
            PortRole::PowerVac => "POWER_VAC",
            PortRole::Reset => "RESET",
            PortRole::ErrorOut => "ERROR_OUT",
            PortRole::GenericIn => "GENERIC_IN",
            PortRole::GenericOut => "GENERIC_OUT",
        }
    }
}

impl FromStr for PortRole {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        PortRole::ALL
            .into_iter()
            .find(|role| role.keyword() == s)
            .ok_or(())
    }
}

impl fmt::Display for PortRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Port {
    pub name: String,
    pub net: NetId,
    pub role: PortRole,
}

/// Record of a via: `absorbed` was merged into `kept`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ViaMerge {
    pub kept: NetId,
    pub absorbed: NetId,
    pub absorbed_name: String,
}

/// A flat pneumatic netlist.
///
/// Fields are public so that malformed netlists can be assembled and fed to
/// [`Netlist::validate`]; the builder methods keep the invariants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Netlist {
    pub nets: BTreeMap<NetId, String>,
    pub valves: Vec<Valve>,
    /// One entry per drilled vent; a net may carry more than one.
    pub vents: Vec<NetId>,
    pub ports: Vec<Port>,
    pub via_merges: Vec<ViaMerge>,
    /// Injected faults currently perturbing this circuit.
    pub faults: ActiveFaults,
    next_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Budget {
    pub valves: usize,
    pub vents: usize,
    pub vias: usize,
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} valves, {} vents, {} vias",
            self.valves, self.vents, self.vias
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FindingKind {
    UnknownNet,
    ChamberOnChannel,
    VentedPowerNet,
    DuplicateNetName,
    DuplicateValveName,
    DuplicatePortName,
    DegenerateValve,
    UnconnectedNet,
    UndrivableInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    fn error(&mut self, kind: FindingKind, message: String) {
        self.errors.push(Finding { kind, message });
    }

    fn warn(&mut self, kind: FindingKind, message: String) {
        self.warnings.push(Finding { kind, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {}", e.message)?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {}", w.message)?;
        }
        Ok(())
    }
}

/// Name-based view of a netlist, independent of id assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    pub nets: Vec<String>,
    pub valves: Vec<(String, String, String, String)>,
    pub vents: Vec<String>,
    pub ports: Vec<(String, String, PortRole)>,
    pub vias: Vec<(String, String)>,
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_net(&mut self, name: &str) -> Result<NetId, NetlistError> {
        if self.name_taken(name) {
            return Err(NetlistError::DuplicateName(name.to_string()));
        }
        Ok(self.insert_net(name.to_string()))
    }

    pub(crate) fn insert_net(&mut self, name: String) -> NetId {
        let id = NetId(self.next_id);
        self.next_id += 1;
        self.nets.insert(id, name);
        id
    }

    /// True if `name` is a live net or the absorbed side of a via.
    pub fn name_taken(&self, name: &str) -> bool {
        self.nets.values().any(|n| n == name)
            || self.via_merges.iter().any(|v| v.absorbed_name == name)
    }

    pub fn add_valve(
        &mut self,
        name: &str,
        chamber: NetId,
        side1: NetId,
        side2: NetId,
    ) -> Result<(), NetlistError> {
        for net in [chamber, side1, side2] {
            self.require_net(net)?;
        }
        if self.valve(name).is_some() {
            return Err(NetlistError::DuplicateName(name.to_string()));
        }
        if chamber == side1 || chamber == side2 {
            return Err(NetlistError::ChamberOnChannel(name.to_string()));
        }
        self.valves.push(Valve {
            name: name.to_string(),
            chamber,
            side1,
            side2,
        });
        Ok(())
    }

    pub fn add_vent(&mut self, net: NetId) -> Result<(), NetlistError> {
        self.require_net(net)?;
        if self.ports_on(net).any(|p| p.role == PortRole::PowerVac) {
            return Err(NetlistError::VentedPowerNet(self.net_name(net).to_string()));
        }
        self.vents.push(net);
        Ok(())
    }

    pub fn add_port(&mut self, name: &str, net: NetId, role: PortRole) -> Result<(), NetlistError> {
        self.require_net(net)?;
        if self.port(name).is_some() {
            return Err(NetlistError::DuplicateName(name.to_string()));
        }
        if role == PortRole::PowerVac && self.is_vented(net) {
            return Err(NetlistError::VentedPowerNet(self.net_name(net).to_string()));
        }
        self.ports.push(Port {
            name: name.to_string(),
            net,
            role,
        });
        Ok(())
    }

    /// Joins two nets through a via. References to `b` are rewritten to
    /// `a`, and the merge is recorded for budget accounting.
    pub fn merge_via(&mut self, a: NetId, b: NetId) -> Result<(), NetlistError> {
        self.require_net(a)?;
        self.require_net(b)?;
        if a == b {
            return Err(NetlistError::SelfMerge(self.net_name(a).to_string()));
        }
        let absorbed_name = self.nets[&b].clone();
        self.rewrite_net(b, a);
        self.via_merges.push(ViaMerge {
            kept: a,
            absorbed: b,
            absorbed_name,
        });
        Ok(())
    }

    /// Joins two nets without recording a via (plain channel continuity).
    pub fn fuse(&mut self, a: NetId, b: NetId) -> Result<(), NetlistError> {
        self.require_net(a)?;
        self.require_net(b)?;
        if a == b {
            return Err(NetlistError::SelfMerge(self.net_name(a).to_string()));
        }
        self.rewrite_net(b, a);
        Ok(())
    }

    /// Replaces every reference to `from` by `to` and drops `from`.
    pub(crate) fn rewrite_net(&mut self, from: NetId, to: NetId) {
        for valve in &mut self.valves {
            for t in [&mut valve.chamber, &mut valve.side1, &mut valve.side2] {
                if *t == from {
                    *t = to;
                }
            }
        }
        for v in &mut self.vents {
            if *v == from {
                *v = to;
            }
        }
        for p in &mut self.ports {
            if p.net == from {
                p.net = to;
            }
        }
        for via in &mut self.via_merges {
            if via.kept == from {
                via.kept = to;
            }
        }
        self.faults.rewrite_net(from, to);
        self.nets.remove(&from);
    }

    fn require_net(&self, net: NetId) -> Result<(), NetlistError> {
        if self.nets.contains_key(&net) {
            Ok(())
        } else {
            Err(NetlistError::UnknownNet(net.to_string()))
        }
    }

    pub fn net_name(&self, net: NetId) -> &str {
        self.nets.get(&net).map(String::as_str).unwrap_or("?")
    }

    /// Looks a net up by name; absorbed via names resolve to the kept net.
    pub fn net_id(&self, name: &str) -> Option<NetId> {
        self.nets
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(id, _)| *id)
            .or_else(|| {
                self.via_merges
                    .iter()
                    .find(|v| v.absorbed_name == name)
                    .map(|v| v.kept)
            })
    }

    pub fn valve(&self, name: &str) -> Option<&Valve> {
        self.valves.iter().find(|v| v.name == name)
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn ports_on(&self, net: NetId) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(move |p| p.net == net)
    }

    pub fn ports_with_role(&self, role: PortRole) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(move |p| p.role == role)
    }

    pub fn is_vented(&self, net: NetId) -> bool {
        self.vents.contains(&net)
    }

    pub fn net_ids(&self) -> impl Iterator<Item = NetId> + '_ {
        self.nets.keys().copied()
    }

    pub fn budget(&self) -> Budget {
        Budget {
            valves: self.valves.len(),
            vents: self.vents.len(),
            vias: self.via_merges.len(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();

        let mut seen = BTreeSet::new();
        for name in self.nets.values() {
            if !seen.insert(name.as_str()) {
                report.error(
                    FindingKind::DuplicateNetName,
                    format!("duplicate net name `{name}`"),
                );
            }
        }

        let mut used = BTreeSet::new();
        let mut valve_names = BTreeSet::new();
        for valve in &self.valves {
            if !valve_names.insert(valve.name.as_str()) {
                report.error(
                    FindingKind::DuplicateValveName,
                    format!("duplicate valve name `{}`", valve.name),
                );
            }
            let mut known = true;
            for net in valve.terminals() {
                if !self.nets.contains_key(&net) {
                    known = false;
                    report.error(
                        FindingKind::UnknownNet,
                        format!("valve `{}` references unknown net {net}", valve.name),
                    );
                }
                used.insert(net);
            }
            if valve.chamber == valve.side1 || valve.chamber == valve.side2 {
                report.error(
                    FindingKind::ChamberOnChannel,
                    format!("valve `{}` has its chamber on its own channel", valve.name),
                );
            } else if known && valve.side1 == valve.side2 {
                report.warn(
                    FindingKind::DegenerateValve,
                    format!(
                        "degenerate valve `{}`: both sides on net `{}`",
                        valve.name,
                        self.net_name(valve.side1)
                    ),
                );
            }
        }

        for &net in &self.vents {
            if !self.nets.contains_key(&net) {
                report.error(
                    FindingKind::UnknownNet,
                    format!("vent references unknown net {net}"),
                );
            }
            used.insert(net);
        }

        let mut port_names = BTreeSet::new();
        for port in &self.ports {
            if !port_names.insert(port.name.as_str()) {
                report.error(
                    FindingKind::DuplicatePortName,
                    format!("duplicate port name `{}`", port.name),
                );
            }
            if !self.nets.contains_key(&port.net) {
                report.error(
                    FindingKind::UnknownNet,
                    format!("port `{}` references unknown net {}", port.name, port.net),
                );
                continue;
            }
            used.insert(port.net);
            if self.is_vented(port.net) {
                if port.role == PortRole::PowerVac {
                    report.error(
                        FindingKind::VentedPowerNet,
                        format!(
                            "power port `{}` sits on vented net `{}`",
                            port.name,
                            self.net_name(port.net)
                        ),
                    );
                } else if port.role.is_drivable() {
                    report.warn(
                        FindingKind::UndrivableInput,
                        format!(
                            "input port `{}` sits on vented net `{}` and cannot be driven",
                            port.name,
                            self.net_name(port.net)
                        ),
                    );
                }
            }
        }

        for (id, name) in &self.nets {
            if !used.contains(id) {
                report.warn(
                    FindingKind::UnconnectedNet,
                    format!("net `{name}` has no connections"),
                );
            }
        }

        report
    }

    /// Name-keyed canonical form; two netlists with equal structure differ at
    /// most in id assignment.
    pub fn structure(&self) -> Structure {
        let name = |id: NetId| self.net_name(id).to_string();
        let mut nets: Vec<String> = self.nets.values().cloned().collect();
        nets.extend(self.via_merges.iter().map(|v| v.absorbed_name.clone()));
        nets.sort();
        let mut valves: Vec<_> = self
            .valves
            .iter()
            .map(|v| (v.name.clone(), name(v.chamber), name(v.side1), name(v.side2)))
            .collect();
        valves.sort();
        let mut vents: Vec<String> = self.vents.iter().map(|&v| name(v)).collect();
        vents.sort();
        let mut ports: Vec<_> = self
            .ports
            .iter()
            .map(|p| (p.name.clone(), name(p.net), p.role))
            .collect();
        ports.sort();
        let mut vias: Vec<_> = self
            .via_merges
            .iter()
            .map(|v| (name(v.kept), v.absorbed_name.clone()))
            .collect();
        vias.sort();
        Structure {
            nets,
            valves,
            vents,
            ports,
            vias,
        }
    }

    pub fn structurally_eq(&self, other: &Netlist) -> bool {
        self.structure() == other.structure()
    }
}
