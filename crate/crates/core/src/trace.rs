// SPDX-License-Identifier: Apache-2.0

//! Event-driven execution of scenarios and trace export.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::error::{OscillationError, SimError};
use crate::fault;
use crate::netlist::{NetId, Netlist};
use crate::pressure::{DriveLevel, PressureState};
use crate::scenario::{Action, Scenario, ScenarioEvent};
use crate::sim::{settle, Drives, SimConfig, SimState};

/// Supply vacuum of the reference bench, in kPa gauge.
pub const VACUUM_LEVEL_KPA: f64 = -68.0;

/// A netlist under simulation together with its drives and stored state.
#[derive(Debug, Clone)]
pub struct Simulator {
    netlist: Netlist,
    state: SimState,
    drives: Drives,
    config: SimConfig,
}

impl Simulator {
    /// Starts from all-atmosphere and settles once with every port idle.
    pub fn new(netlist: Netlist, config: SimConfig) -> Result<Self, OscillationError> {
        let state = SimState::initial(&netlist);
        let mut sim = Self {
            netlist,
            state,
            drives: Drives::new(),
            config,
        };
        sim.settle()?;
        Ok(sim)
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn drives(&self) -> &Drives {
        &self.drives
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn port_pressure(&self, port: &str) -> Option<PressureState> {
        self.state.port_pressure(&self.netlist, port)
    }

    pub fn net_pressure(&self, net: &str) -> Option<PressureState> {
        self.netlist.net_id(net).map(|id| self.state.pressure(id))
    }

    /// Applies an action without settling.
    pub fn apply(&mut self, action: &Action) -> Result<(), SimError> {
        match action {
            Action::SetDrive { port, level } => self.set_drive(port, *level)?,
            Action::InjectFault(f) => {
                let (n, s) = fault::inject(&self.netlist, &self.state, f)?;
                self.netlist = n;
                self.state = s;
            }
            Action::ClearFault(id) => {
                let (n, s) = fault::clear(&self.netlist, &self.state, id)?;
                self.netlist = n;
                self.state = s;
            }
            Action::Checkpoint(_) => {}
        }
        Ok(())
    }

    fn set_drive(&mut self, port: &str, level: DriveLevel) -> Result<(), SimError> {
        match self.netlist.port(port) {
            None => Err(SimError::UnknownPort(port.to_string())),
            Some(p) if !p.role.is_drivable() => Err(SimError::Undrivable(port.to_string())),
            Some(_) => {
                self.drives.set(port, level);
                Ok(())
            }
        }
    }

    pub fn settle(&mut self) -> Result<(), OscillationError> {
        self.state = settle(&self.netlist, &self.state, &self.drives, &self.config)?;
        Ok(())
    }

    /// Applies an action and settles.
    pub fn step(&mut self, action: &Action) -> Result<(), SimError> {
        self.apply(action)?;
        self.settle()?;
        Ok(())
    }

    pub fn drive(&mut self, port: &str, level: DriveLevel) -> Result<(), SimError> {
        self.step(&Action::SetDrive {
            port: port.to_string(),
            level,
        })
    }

    /// Port pressures, keyed by port name.
    pub fn port_snapshot(&self) -> BTreeMap<String, PressureState> {
        self.netlist
            .ports
            .iter()
            .map(|p| (p.name.clone(), self.state.pressure(p.net)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub time_ms: u64,
    pub state: SimState,
    pub ports: BTreeMap<String, PressureState>,
    /// `None` for the initial entry.
    pub event: Option<ScenarioEvent>,
    pub diagnostics: Vec<String>,
}

impl TraceEntry {
    pub fn port(&self, name: &str) -> Option<PressureState> {
        self.ports.get(name).copied()
    }

    pub fn checkpoint(&self) -> Option<&str> {
        match &self.event {
            Some(ScenarioEvent {
                action: Action::Checkpoint(label),
                ..
            }) => Some(label),
            _ => None,
        }
    }
}

/// Settled snapshots of a run, one per event.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    pub vacuum_level_kpa: f64,
    pub config: SimConfig,
    /// Net columns (sorted by name) fixed from the starting netlist.
    pub nets: Vec<(String, NetId)>,
    pub port_names: Vec<String>,
}

impl Trace {
    pub fn new(netlist: &Netlist, config: SimConfig) -> Self {
        let mut nets: Vec<(String, NetId)> = netlist
            .nets
            .iter()
            .map(|(id, name)| (name.clone(), *id))
            .collect();
        nets.sort();
        let mut port_names: Vec<String> = netlist.ports.iter().map(|p| p.name.clone()).collect();
        port_names.sort();
        Self {
            entries: Vec::new(),
            vacuum_level_kpa: VACUUM_LEVEL_KPA,
            config,
            nets,
            port_names,
        }
    }

    pub fn record(&mut self, time_ms: u64, sim: &Simulator, event: Option<ScenarioEvent>) {
        let state = sim.state().clone();
        let diagnostics = x_nets(sim.netlist(), &state)
            .map(|names| vec![format!("indeterminate: {}", names.join(" "))])
            .unwrap_or_default();
        self.entries.push(TraceEntry {
            time_ms,
            ports: sim.port_snapshot(),
            state,
            event,
            diagnostics,
        });
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    /// `time_ms,<nets...>,<ports...>` with cells `0`, `1` or `X`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_ms");
        for (name, _) in &self.nets {
            write!(out, ",{name}").unwrap();
        }
        for name in &self.port_names {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for e in &self.entries {
            write!(out, "{}", e.time_ms).unwrap();
            for (_, id) in &self.nets {
                write!(out, ",{}", e.state.pressure(*id).csv_cell()).unwrap();
            }
            for name in &self.port_names {
                let cell = e.port(name).map_or("X", PressureState::csv_cell);
                write!(out, ",{cell}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn x_nets(netlist: &Netlist, state: &SimState) -> Option<Vec<String>> {
    let mut names: Vec<String> = state
        .pressure
        .iter()
        .filter(|(_, p)| **p == PressureState::X)
        .map(|(id, _)| netlist.net_name(*id).to_string())
        .collect();
    names.sort();
    (!names.is_empty()).then_some(names)
}

/// A run that stopped early; `trace` holds every entry settled before the
/// failure.
#[derive(Debug, Clone, Error)]
#[error("run failed at {time_ms} ms: {source}")]
pub struct RunError {
    pub time_ms: u64,
    pub trace: Trace,
    #[source]
    pub source: SimError,
}

/// Runs a scenario from the all-atmosphere state, settling after every
/// event.
pub fn run_events(
    netlist: &Netlist,
    scenario: &Scenario,
    config: &SimConfig,
) -> Result<Trace, Box<RunError>> {
    let mut trace = Trace::new(netlist, *config);
    let mut sim = match Simulator::new(netlist.clone(), *config) {
        Ok(sim) => sim,
        Err(e) => {
            return Err(Box::new(RunError {
                time_ms: 0,
                trace,
                source: e.into(),
            }))
        }
    };
    trace.record(0, &sim, None);
    for event in scenario.events() {
        if let Err(source) = sim.step(&event.action) {
            return Err(Box::new(RunError {
                time_ms: event.time_ms,
                trace,
                source,
            }));
        }
        trace.record(event.time_ms, &sim, Some(event.clone()));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    fn and_chain() -> Netlist {
        crate::dsl::parse_netlist(
            "NET a\nNET b\nNET pwr\nNET m\nNET out\n\
             VALVE A CHAMBER a SIDES pwr m\nVALVE B CHAMBER b SIDES m out\n\
             PORT a a ROLE GENERIC_IN\nPORT b b ROLE GENERIC_IN\n\
             PORT power pwr ROLE POWER_VAC\nPORT out out ROLE GENERIC_OUT",
        )
        .unwrap()
    }

    #[test]
    fn empty_scenario_yields_initial_entry() {
        let n = and_chain();
        let t = run_events(&n, &Scenario::new(), &SimConfig::default()).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert_eq!(t.entries[0].time_ms, 0);
        assert!(t.entries[0]
            .state
            .pressure
            .values()
            .all(|p| *p == PressureState::Atm));
        assert_eq!(t.vacuum_level_kpa, -68.0);
    }

    #[test]
    fn unknown_port_names_the_port() {
        let n = and_chain();
        let s = crate::dsl::parse_scenario("AT 0 SET a VAC\nAT 5 SET ghost VAC").unwrap();
        let err = run_events(&n, &s, &SimConfig::default()).unwrap_err();
        assert_eq!(err.source, SimError::UnknownPort("ghost".into()));
        assert_eq!(err.trace.entries.len(), 2);
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn output_ports_cannot_be_driven() {
        let n = and_chain();
        let s = crate::dsl::parse_scenario("AT 0 SET out VAC").unwrap();
        let err = run_events(&n, &s, &SimConfig::default()).unwrap_err();
        assert_eq!(err.source, SimError::Undrivable("out".into()));
    }

    #[test]
    fn csv_layout() {
        let n = and_chain();
        let s = crate::dsl::parse_scenario(
            "AT 0 SET power VAC\nAT 10 SET a VAC\nAT 20 SET b VAC\nAT 30 CHECKPOINT done",
        )
        .unwrap();
        let t = run_events(&n, &s, &SimConfig::default()).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("time_ms,a,b,m,out,pwr,a,b,out,power"));
        assert_eq!(lines.last(), Some("30,1,1,1,1,1,1,1,1,1"));
        assert_eq!(t.last().unwrap().checkpoint(), Some("done"));
    }
}
