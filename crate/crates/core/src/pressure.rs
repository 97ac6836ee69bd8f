// SPDX-License-Identifier: Apache-2.0

//! Discrete pressure levels.
//!
//! Vacuum carries logical 1 and atmosphere logical 0. `X` stands for an
//! intermediate or conflicted pressure that cannot be trusted to actuate a
//! valve.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// Three-valued pressure state of a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PressureState {
    Atm,
    Vac,
    X,
}

impl PressureState {
    pub fn is_known(self) -> bool {
        self != PressureState::X
    }

    /// Logical value: `Some(true)` for vacuum, `Some(false)` for atmosphere.
    pub fn logic(self) -> Option<bool> {
        match self {
            PressureState::Vac => Some(true),
            PressureState::Atm => Some(false),
            PressureState::X => None,
        }
    }

    /// Cell value used in CSV traces.
    pub fn csv_cell(self) -> &'static str {
        match self {
            PressureState::Atm => "0",
            PressureState::Vac => "1",
            PressureState::X => "X",
        }
    }

    /// Physical pressure comparison. Vacuum is below atmosphere; `X` is
    /// unordered against everything except itself.
    pub fn physical_cmp(self, other: Self) -> Option<Ordering> {
        use PressureState::*;
        match (self, other) {
            (Vac, Atm) => Some(Ordering::Less),
            (Atm, Vac) => Some(Ordering::Greater),
            (a, b) if a == b && a != X => Some(Ordering::Equal),
            _ => None,
        }
    }
}

impl From<bool> for PressureState {
    fn from(bit: bool) -> Self {
        if bit {
            PressureState::Vac
        } else {
            PressureState::Atm
        }
    }
}

impl From<DriveLevel> for PressureState {
    fn from(level: DriveLevel) -> Self {
        match level {
            DriveLevel::Atm => PressureState::Atm,
            DriveLevel::Vac => PressureState::Vac,
        }
    }
}

impl fmt::Display for PressureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PressureState::Atm => "ATM",
            PressureState::Vac => "VAC",
            PressureState::X => "X",
        })
    }
}

/// A level an external solenoid can apply to a port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DriveLevel {
    Atm,
    Vac,
}

impl DriveLevel {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            DriveLevel::Vac
        } else {
            DriveLevel::Atm
        }
    }

    pub fn bit(self) -> bool {
        self == DriveLevel::Vac
    }

    pub fn inverted(self) -> Self {
        match self {
            DriveLevel::Atm => DriveLevel::Vac,
            DriveLevel::Vac => DriveLevel::Atm,
        }
    }
}

impl fmt::Display for DriveLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriveLevel::Atm => "ATM",
            DriveLevel::Vac => "VAC",
        })
    }
}

impl FromStr for DriveLevel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "ATM" => Ok(DriveLevel::Atm),
            "VAC" => Ok(DriveLevel::Vac),
            _ => Err(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_below_atmosphere() {
        use PressureState::*;
        assert_eq!(Vac.physical_cmp(Atm), Some(Ordering::Less));
        assert_eq!(Atm.physical_cmp(Vac), Some(Ordering::Greater));
        assert_eq!(X.physical_cmp(Vac), None);
        assert_eq!(X.physical_cmp(X), None);
        assert_eq!(Atm.physical_cmp(Atm), Some(Ordering::Equal));
    }

    #[test]
    fn logic_mapping() {
        assert_eq!(PressureState::from(true), PressureState::Vac);
        assert_eq!(PressureState::Atm.logic(), Some(false));
        assert_eq!(PressureState::X.logic(), None);
        assert_eq!("VAC".parse::<DriveLevel>(), Ok(DriveLevel::Vac));
        assert!("vac".parse::<DriveLevel>().is_err());
    }
}
