// SPDX-License-Identifier: Apache-2.0

//! The detector wired into a three-chamber peristaltic actuator with a
//! whistle on its error output.

use std::fmt;
use std::fmt::Write as _;

use crate::fault::Fault;
use crate::gates::{build_parity_detector, detector_ports, GateHandle};
use crate::netlist::{Netlist, PortRole};
use crate::pressure::PressureState;
use crate::protocol::{phase_schedule, BitVector, ControlPorts, PhaseConfig, ScheduleMode};
use crate::scenario::{Action, Scenario, ScenarioEvent};
use crate::sim::SimConfig;
use crate::trace::{run_events, RunError, Trace};

/// Actuator chambers teed onto the control lines.
pub const BELLOWS: [&str; 3] = ["bellows1", "bellows2", "bellows3"];
pub const PARITY_BELLOWS: &str = "parity_bellows";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Whistle {
    Silent,
    Sounding,
    Unknown,
}

impl fmt::Display for Whistle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Whistle::Silent => "SILENT",
            Whistle::Sounding => "SOUNDING",
            Whistle::Unknown => "UNKNOWN",
        })
    }
}

/// Vacuum on the error line switches the whistle's pressure supply on.
pub fn level_shift(error: PressureState) -> Whistle {
    match error {
        PressureState::Vac => Whistle::Sounding,
        PressureState::Atm => Whistle::Silent,
        PressureState::X => Whistle::Unknown,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpcSystem {
    pub detector: GateHandle,
    pub netlist: Netlist,
}

impl Default for IpcSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl IpcSystem {
    pub fn new() -> Self {
        let detector = build_parity_detector();
        let mut netlist = detector.netlist.clone();
        for (bellows, bit) in BELLOWS.iter().zip(detector_ports::BITS) {
            let net = netlist.port(bit).unwrap().net;
            netlist.add_port(bellows, net, PortRole::GenericOut).unwrap();
        }
        let net = netlist.port(detector_ports::PARITY).unwrap().net;
        netlist
            .add_port(PARITY_BELLOWS, net, PortRole::GenericOut)
            .unwrap();
        Self { detector, netlist }
    }

    /// Actuation pattern: chambers 1, 2, 3 in turn, `count` steps.
    pub fn peristaltic_steps(count: usize) -> Vec<BitVector> {
        (0..count.max(1)).map(|i| BitVector::one_hot(i % 3, 3)).collect()
    }

    /// Controller schedule covering at least `total_ms`, with `extra` events
    /// (faults, checkpoints) merged in after same-time controller events.
    pub fn scenario(
        &self,
        mode: ScheduleMode,
        cfg: &PhaseConfig,
        total_ms: u64,
        extra: &[ScenarioEvent],
    ) -> Scenario {
        let count = match mode {
            ScheduleMode::Continuous => total_ms.div_ceil(cfg.check_cycle_ms()),
            ScheduleMode::Phased => {
                total_ms.div_ceil(cfg.period_ms()) * (cfg.run_duration_ms / cfg.run_step_ms).max(1)
            }
        } as usize;
        let mut s = phase_schedule(
            &Self::peristaltic_steps(count),
            cfg,
            mode,
            &ControlPorts::detector(),
        );
        for e in extra {
            s.push(e.clone());
        }
        s
    }
}

/// The severed bit3 line of the reference experiment: the bellows and the
/// detector lose the solenoid 3.5 s into the run.
pub fn reference_cut() -> ScenarioEvent {
    ScenarioEvent::inject(3_500, Fault::cut("c", "bit3", &["bellows3"]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IpcEventKind {
    Whistle(Whistle),
    Checkpoint(String),
    Inject(Fault),
    Clear(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpcEvent {
    pub time_ms: u64,
    pub kind: IpcEventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpcRun {
    pub trace: Trace,
    pub events: Vec<IpcEvent>,
}

impl IpcRun {
    pub fn from_trace(trace: Trace) -> Self {
        let mut events = Vec::new();
        let mut whistle = Whistle::Silent;
        for entry in &trace.entries {
            if let Some(e) = &entry.event {
                let kind = match &e.action {
                    Action::Checkpoint(l) => Some(IpcEventKind::Checkpoint(l.clone())),
                    Action::InjectFault(f) => Some(IpcEventKind::Inject(f.clone())),
                    Action::ClearFault(id) => Some(IpcEventKind::Clear(id.clone())),
                    Action::SetDrive { .. } => None,
                };
                if let Some(kind) = kind {
                    events.push(IpcEvent {
                        time_ms: entry.time_ms,
                        kind,
                    });
                }
            }
            let now = level_shift(entry.port(detector_ports::ERROR).unwrap_or(PressureState::X));
            if now != whistle {
                whistle = now;
                events.push(IpcEvent {
                    time_ms: entry.time_ms,
                    kind: IpcEventKind::Whistle(now),
                });
            }
        }
        Self { trace, events }
    }

    pub fn whistle_transitions(&self) -> impl Iterator<Item = (u64, Whistle)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            IpcEventKind::Whistle(w) => Some((e.time_ms, w)),
            _ => None,
        })
    }

    pub fn first_alarm_ms(&self) -> Option<u64> {
        self.whistle_transitions()
            .find(|(_, w)| *w == Whistle::Sounding)
            .map(|(t, _)| t)
    }

    /// `time_ms,event,detail`
    pub fn events_csv(&self) -> String {
        let mut out = String::from("time_ms,event,detail\n");
        for e in &self.events {
            let (event, detail) = match &e.kind {
                IpcEventKind::Whistle(w) => ("whistle", w.to_string()),
                IpcEventKind::Checkpoint(l) => ("checkpoint", l.clone()),
                IpcEventKind::Inject(f) => ("inject", f.to_string()),
                IpcEventKind::Clear(id) => ("clear", id.clone()),
            };
            writeln!(out, "{},{event},{detail}", e.time_ms).unwrap();
        }
        out
    }
}

/// Runs the actuator for at least `total_ms` with `extra` events merged into
/// the controller schedule.
pub fn run_ipc(
    mode: ScheduleMode,
    extra: &[ScenarioEvent],
    cfg: &PhaseConfig,
    total_ms: u64,
    config: &SimConfig,
) -> Result<IpcRun, Box<RunError>> {
    let system = IpcSystem::new();
    let scenario = system.scenario(mode, cfg, total_ms, extra);
    let trace = run_events(&system.netlist, &scenario, config)?;
    Ok(IpcRun::from_trace(trace))
}
