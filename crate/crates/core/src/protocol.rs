// SPDX-License-Identifier: Apache-2.0

//! Controller side of the error detector: parity computation and the event
//! sequences that power, check and reset it.

use std::fmt;

use crate::pressure::{DriveLevel, PressureState};
use crate::scenario::{Fragment, Scenario, ScenarioEvent};
use crate::trace::Trace;

/// Ordered control bits; never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn new(bits: Vec<bool>) -> Option<Self> {
        (!bits.is_empty()).then_some(Self(bits))
    }

    /// Bits of `value`, most significant first.
    pub fn from_u32(value: u32, len: usize) -> Self {
        assert!(len >= 1 && len <= 32);
        Self((0..len).rev().map(|i| value >> i & 1 == 1).collect())
    }

    /// Only bit `index` set.
    pub fn one_hot(index: usize, len: usize) -> Self {
        assert!(index < len);
        Self((0..len).map(|i| i == index).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flipped(&self, positions: &[usize]) -> Self {
        let mut bits = self.0.clone();
        for &p in positions {
            bits[p] = !bits[p];
        }
        Self(bits)
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityMethod {
    XorFold,
    SumMod2,
    PopcountOdd,
}

impl ParityMethod {
    pub const ALL: [ParityMethod; 3] = [
        ParityMethod::XorFold,
        ParityMethod::SumMod2,
        ParityMethod::PopcountOdd,
    ];
}

pub fn parity(bits: &BitVector, method: ParityMethod) -> bool {
    match method {
        ParityMethod::XorFold => bits.0.iter().fold(false, |acc, &b| acc ^ b),
        ParityMethod::SumMod2 => bits.0.iter().map(|&b| b as u32).sum::<u32>() % 2 == 1,
        ParityMethod::PopcountOdd => bits.0.iter().filter(|&&b| b).count() % 2 == 1,
    }
}

/// Which pattern the check phase applies to the control bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckPattern {
    /// Each control bit set to 1 in turn, one check per bit.
    Sequential,
    /// All control bits set to 1 at once, a single check.
    AllOnes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseConfig {
    pub run_duration_ms: u64,
    pub check_duration_ms: u64,
    pub run_step_ms: u64,
    pub operate_ms: u64,
    pub reset_ms: u64,
    pub reset_pulse_ms: u64,
    pub check_pattern: CheckPattern,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            run_duration_ms: 22_500,
            check_duration_ms: 39_000,
            run_step_ms: 750,
            operate_ms: 1_000,
            reset_ms: 5_000,
            reset_pulse_ms: 500,
            check_pattern: CheckPattern::Sequential,
        }
    }
}

impl PhaseConfig {
    pub fn check_cycle_ms(&self) -> u64 {
        self.operate_ms + self.reset_ms
    }

    pub fn period_ms(&self) -> u64 {
        self.run_duration_ms + self.check_duration_ms
    }

    pub fn is_valid(&self) -> bool {
        [
            self.run_duration_ms,
            self.check_duration_ms,
            self.run_step_ms,
            self.operate_ms,
            self.reset_ms,
            self.reset_pulse_ms,
        ]
        .iter()
        .all(|&v| v > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    Continuous,
    Phased,
}

/// Port names the controller drives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlPorts {
    pub bits: Vec<String>,
    pub parity: Option<String>,
    /// In power-on order.
    pub power: Vec<String>,
    pub power_down: Vec<String>,
    pub reset: Vec<String>,
}

impl ControlPorts {
    /// Ports of the reference parity detector.
    pub fn detector() -> Self {
        use crate::gates::detector_ports as p;
        Self {
            bits: p::BITS.iter().map(|s| s.to_string()).collect(),
            parity: Some(p::PARITY.to_string()),
            power: p::POWER_ON_ORDER.iter().map(|s| s.to_string()).collect(),
            power_down: p::POWER_OFF_ORDER.iter().map(|s| s.to_string()).collect(),
            reset: p::RESET.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Ordered power-down, reset pulse, then the expected-parity line back to
/// atmosphere. Steps are spread evenly over `reset_ms`.
pub fn reset_sequence(cfg: &PhaseConfig, ports: &ControlPorts) -> Fragment {
    let slots = ports.power_down.len() as u64 + 2;
    let slot = cfg.reset_ms / slots;
    assert!(
        cfg.reset_pulse_ms < slot,
        "reset pulse must fit in one reset slot"
    );
    let mut s = Scenario::new();
    let mut t = 0;
    for power in &ports.power_down {
        s.set(t, power, DriveLevel::Atm);
        t += slot;
    }
    for reset in &ports.reset {
        s.set(t, reset, DriveLevel::Vac);
    }
    for reset in &ports.reset {
        s.set(t + cfg.reset_pulse_ms, reset, DriveLevel::Atm);
    }
    t += slot;
    if let Some(parity) = &ports.parity {
        s.set(t, parity, DriveLevel::Atm);
    }
    Fragment {
        scenario: s,
        duration_ms: cfg.reset_ms,
    }
}

/// Expected parity drive and power-on, hold for `operate_ms`, then reset.
/// The control bits themselves are driven by the plant.
pub fn check_cycle(bits: &BitVector, cfg: &PhaseConfig, ports: &ControlPorts) -> Fragment {
    let p = parity(bits, ParityMethod::XorFold);
    check_with_parity(&bits.to_string(), p, cfg.operate_ms, cfg, ports)
}

/// Check cycle with an explicit (possibly wrong) expected parity. Emits
/// `check-<label>` at power-on and `read-<label>` at the end of the hold,
/// just before power-down.
pub fn check_with_parity(
    label: &str,
    expected: bool,
    hold_ms: u64,
    cfg: &PhaseConfig,
    ports: &ControlPorts,
) -> Fragment {
    let mut s = Scenario::new();
    s.push(ScenarioEvent::checkpoint(0, &format!("check-{label}")));
    if let Some(p) = &ports.parity {
        s.set(0, p, DriveLevel::from_bit(expected));
    }
    for power in &ports.power {
        s.set(0, power, DriveLevel::Vac);
    }
    s.push(ScenarioEvent::checkpoint(hold_ms, &format!("read-{label}")));
    Fragment {
        scenario: s,
        duration_ms: hold_ms,
    }
    .then(&reset_sequence(cfg, ports))
}

/// The 16 rows of the bench sweep: the 8 bit patterns with correct expected
/// parity, then the same 8 with it inverted.
pub fn sweep_rows() -> Vec<(BitVector, bool)> {
    let consistent = (0..8).map(|v| {
        let b = BitVector::from_u32(v, 3);
        let p = parity(&b, ParityMethod::XorFold);
        (b, p)
    });
    let inconsistent = (0..8).map(|v| {
        let b = BitVector::from_u32(v, 3);
        let p = !parity(&b, ParityMethod::XorFold);
        (b, p)
    });
    consistent.chain(inconsistent).collect()
}

/// Label used for a sweep row: bits then expected parity, e.g. `1101`.
pub fn row_label(bits: &BitVector, expected: bool) -> String {
    format!("{bits}{}", expected as u8)
}

/// Back-to-back checks over [`sweep_rows`], each holding power for
/// `hold_ms`. The sweep driver returns the control bits to atmosphere with
/// the expected parity at the end of each reset.
pub fn sweep_scenario(hold_ms: u64, cfg: &PhaseConfig) -> Scenario {
    let ports = ControlPorts::detector();
    let slot = cfg.reset_ms / (ports.power_down.len() as u64 + 2);
    let clear_at = hold_ms + slot * (ports.power_down.len() as u64 + 1);
    let mut out = Fragment::default();
    for (bits, p) in sweep_rows() {
        let mut block = apply_bits(&bits, &ports).then(&check_with_parity(
            &row_label(&bits, p),
            p,
            hold_ms,
            cfg,
            &ports,
        ));
        for port in &ports.bits {
            block.scenario.set(clear_at, port, DriveLevel::Atm);
        }
        out = out.then(&block);
    }
    out.scenario
}

/// `(time, label, port level)` at every `read-` checkpoint of a trace.
pub fn readings(trace: &Trace, port: &str) -> Vec<(u64, String, PressureState)> {
    trace
        .entries
        .iter()
        .filter_map(|e| {
            let label = e.checkpoint()?.strip_prefix("read-")?;
            Some((e.time_ms, label.to_string(), e.port(port).unwrap_or(PressureState::X)))
        })
        .collect()
}

/// The plant applying `bits` to the control lines.
pub fn apply_bits(bits: &BitVector, ports: &ControlPorts) -> Fragment {
    let mut s = Scenario::new();
    for (port, &b) in ports.bits.iter().zip(bits.bits()) {
        s.set(0, port, DriveLevel::from_bit(b));
    }
    Fragment {
        scenario: s,
        duration_ms: 0,
    }
}

/// Full controller schedule for a sequence of actuation steps.
///
/// `Continuous` checks after every step, so steps advance once per check
/// cycle. `Phased` alternates a run phase, stepping every `run_step_ms` with
/// the detector unpowered, and a check phase; run-phase steps cycle through
/// `steps` and continue where the previous run phase stopped.
pub fn phase_schedule(
    steps: &[BitVector],
    cfg: &PhaseConfig,
    mode: ScheduleMode,
    ports: &ControlPorts,
) -> Scenario {
    assert!(!steps.is_empty(), "schedule needs at least one step");
    let mut out = Fragment::default();
    match mode {
        ScheduleMode::Continuous => {
            for step in steps {
                out = out.then(&apply_bits(step, ports)).then(&check_cycle(step, cfg, ports));
            }
        }
        ScheduleMode::Phased => {
            let per_run = (cfg.run_duration_ms / cfg.run_step_ms).max(1) as usize;
            let periods = steps.len().div_ceil(per_run);
            let width = ports.bits.len();
            let mut cursor = 0;
            for _ in 0..periods {
                let mut run = Scenario::new();
                run.push(ScenarioEvent::checkpoint(0, "run"));
                for j in 0..per_run {
                    let step = &steps[cursor % steps.len()];
                    cursor += 1;
                    run.append_at(j as u64 * cfg.run_step_ms, &apply_bits(step, ports).scenario);
                }
                out = out.then(&Fragment {
                    scenario: run,
                    duration_ms: cfg.run_duration_ms,
                });

                let patterns: Vec<BitVector> = match cfg.check_pattern {
                    CheckPattern::Sequential => (0..width).map(|k| BitVector::one_hot(k, width)).collect(),
                    CheckPattern::AllOnes => vec![BitVector(vec![true; width])],
                };
                let slot = cfg.check_duration_ms / patterns.len() as u64;
                assert!(slot >= cfg.check_cycle_ms(), "check phase too short");
                let mut check = Scenario::new();
                for (k, pattern) in patterns.iter().enumerate() {
                    let cycle = apply_bits(pattern, ports).then(&check_cycle(pattern, cfg, ports));
                    check.append_at(k as u64 * slot, &cycle.scenario);
                }
                out = out.then(&Fragment {
                    scenario: check,
                    duration_ms: cfg.check_duration_ms,
                });
            }
        }
    }
    out.scenario
}

/// `b1,b2,b3,p,error` rows from the readings of a sweep trace.
pub fn sweep_table(trace: &Trace) -> String {
    let mut out = String::from("b1,b2,b3,p,error\n");
    for (_, label, level) in readings(trace, crate::gates::detector_ports::ERROR) {
        let cells: Vec<String> = label.chars().map(String::from).collect();
        out.push_str(&format!("{},{}\n", cells.join(","), level.csv_cell()));
    }
    out
}
