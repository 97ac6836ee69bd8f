// SPDX-License-Identifier: Apache-2.0

//! Timestamped external events driving a simulation.

use crate::fault::Fault;
use crate::pressure::DriveLevel;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    SetDrive { port: String, level: DriveLevel },
    InjectFault(Fault),
    ClearFault(String),
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScenarioEvent {
    pub time_ms: u64,
    pub action: Action,
}

impl ScenarioEvent {
    pub fn set(time_ms: u64, port: &str, level: DriveLevel) -> Self {
        Self {
            time_ms,
            action: Action::SetDrive {
                port: port.to_string(),
                level,
            },
        }
    }

    pub fn checkpoint(time_ms: u64, label: &str) -> Self {
        Self {
            time_ms,
            action: Action::Checkpoint(label.to_string()),
        }
    }

    pub fn inject(time_ms: u64, fault: Fault) -> Self {
        Self {
            time_ms,
            action: Action::InjectFault(fault),
        }
    }

    pub fn clear(time_ms: u64, id: &str) -> Self {
        Self {
            time_ms,
            action: Action::ClearFault(id.to_string()),
        }
    }
}

/// An ordered event list. Events are kept sorted by time; ties keep
/// insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Scenario {
    events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(mut events: Vec<ScenarioEvent>) -> Self {
        events.sort_by_key(|e| e.time_ms);
        Self { events }
    }

    pub fn events(&self) -> &[ScenarioEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<ScenarioEvent> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Inserts after every event with the same or an earlier timestamp.
    pub fn push(&mut self, event: ScenarioEvent) {
        let at = self.events.partition_point(|e| e.time_ms <= event.time_ms);
        self.events.insert(at, event);
    }

    pub fn set(&mut self, time_ms: u64, port: &str, level: DriveLevel) {
        self.push(ScenarioEvent::set(time_ms, port, level));
    }

    /// Appends `other` with all its timestamps shifted by `offset_ms`.
    pub fn append_at(&mut self, offset_ms: u64, other: &Scenario) {
        for e in &other.events {
            self.push(ScenarioEvent {
                time_ms: e.time_ms + offset_ms,
                action: e.action.clone(),
            });
        }
    }

    pub fn last_time(&self) -> Option<u64> {
        self.events.last().map(|e| e.time_ms)
    }
}

/// A scenario fragment with an explicit duration, for back-to-back
/// composition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Fragment {
    pub scenario: Scenario,
    pub duration_ms: u64,
}

impl Fragment {
    /// Concatenation: `other` starts when `self` ends.
    pub fn then(mut self, other: &Fragment) -> Fragment {
        self.scenario.append_at(self.duration_ms, &other.scenario);
        self.duration_ms += other.duration_ms;
        self
    }
}
