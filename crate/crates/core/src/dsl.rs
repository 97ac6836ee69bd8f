// SPDX-License-Identifier: Apache-2.0

//! Line-oriented text formats: `.pnet` netlists and `.pseq` scenarios.
//!
//! Netlist statements, one per line (`#` starts a comment):
//!
//! ```text
//! NET <name>
//! VALVE <name> CHAMBER <net> SIDES <net> <net>
//! VENT <net>
//! PORT <name> <net> ROLE <role>
//! VIA <netA> <netB>
//! ```
//!
//! Scenario statements:
//!
//! ```text
//! AT <ms> SET <port> <VAC|ATM>
//! AT <ms> FAULT LEAK <net> AS <id>
//! AT <ms> FAULT CUT <net> [DISTAL <port>...] AS <id>
//! AT <ms> FAULT STUCK_VALVE <valve> <OPEN|CLOSED> AS <id>
//! AT <ms> FAULT STUCK_BIT <port> <VAC|ATM> AS <id>
//! AT <ms> CLEAR <id>
//! AT <ms> CHECKPOINT <label>
//! ```

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::error::NetlistError;
use crate::fault::{Fault, FaultKind, StuckState};
use crate::netlist::{NetId, Netlist, PortRole};
use crate::pressure::DriveLevel;
use crate::scenario::{Action, Scenario, ScenarioEvent};

pub const NETLIST_HEADER: &str = "# pneumatic netlist";
pub const SCENARIO_HEADER: &str = "# pneumatic scenario";

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownKeyword(String),
    /// Wrong number of tokens for the statement.
    Arity { expected: &'static str },
    ExpectedKeyword(&'static str),
    DuplicateName(String),
    UndeclaredNet(String),
    MalformedRole(String),
    MalformedLevel(String),
    MalformedTime(String),
    NegativeTime(String),
    Invalid(NetlistError),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnknownKeyword(k) => write!(f, "unknown keyword `{k}`"),
            ParseErrorKind::Arity { expected } => write!(f, "expected `{expected}`"),
            ParseErrorKind::ExpectedKeyword(k) => write!(f, "expected keyword `{k}`"),
            ParseErrorKind::DuplicateName(n) => write!(f, "duplicate name `{n}`"),
            ParseErrorKind::UndeclaredNet(n) => write!(f, "undeclared net `{n}`"),
            ParseErrorKind::MalformedRole(r) => write!(f, "malformed role `{r}`"),
            ParseErrorKind::MalformedLevel(l) => write!(f, "malformed level `{l}` (expected VAC or ATM)"),
            ParseErrorKind::MalformedTime(t) => write!(f, "malformed time `{t}`"),
            ParseErrorKind::NegativeTime(t) => write!(f, "negative time `{t}`"),
            ParseErrorKind::Invalid(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in code.char_indices().chain(std::iter::once((code.len(), ' '))) {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &code[s..i],
                    column: code[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    tokens
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
}

impl<'a> Line<'a> {
    fn span(&self, index: usize) -> SourceSpan {
        let column = self
            .tokens
            .get(index)
            .or(self.tokens.last())
            .map_or(1, |t| t.column);
        SourceSpan {
            line: self.number,
            column,
        }
    }

    fn err(&self, index: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            span: self.span(index),
            kind,
        }
    }

    fn text(&self, index: usize) -> &'a str {
        self.tokens[index].text
    }

    fn arity(&self, n: usize, expected: &'static str) -> Result<(), ParseError> {
        if self.tokens.len() == n {
            Ok(())
        } else {
            Err(self.err(n.min(self.tokens.len()), ParseErrorKind::Arity { expected }))
        }
    }

    fn keyword(&self, index: usize, keyword: &'static str) -> Result<(), ParseError> {
        if self.text(index) == keyword {
            Ok(())
        } else {
            Err(self.err(index, ParseErrorKind::ExpectedKeyword(keyword)))
        }
    }

    fn level(&self, index: usize) -> Result<DriveLevel, ParseError> {
        self.text(index)
            .parse()
            .map_err(|_| self.err(index, ParseErrorKind::MalformedLevel(self.text(index).into())))
    }
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.split('\n').enumerate().filter_map(|(i, raw)| {
        let tokens = tokenize(raw);
        (!tokens.is_empty()).then_some(Line {
            number: i + 1,
            tokens,
        })
    })
}

fn net_ref(netlist: &Netlist, line: &Line<'_>, index: usize) -> Result<NetId, ParseError> {
    let name = line.text(index);
    netlist
        .net_id(name)
        .ok_or_else(|| line.err(index, ParseErrorKind::UndeclaredNet(name.into())))
}

fn invalid(line: &Line<'_>, index: usize, e: NetlistError) -> ParseError {
    match e {
        NetlistError::DuplicateName(n) => line.err(index, ParseErrorKind::DuplicateName(n)),
        other => line.err(index, ParseErrorKind::Invalid(other)),
    }
}

/// Parses a `.pnet` netlist. The first error wins.
pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    let mut netlist = Netlist::new();
    for line in lines(text) {
        match line.text(0) {
            "NET" => {
                line.arity(2, "NET <name>")?;
                netlist
                    .add_net(line.text(1))
                    .map_err(|e| invalid(&line, 1, e))?;
            }
            "VALVE" => {
                line.arity(7, "VALVE <name> CHAMBER <net> SIDES <net> <net>")?;
                line.keyword(2, "CHAMBER")?;
                line.keyword(4, "SIDES")?;
                let chamber = net_ref(&netlist, &line, 3)?;
                let side1 = net_ref(&netlist, &line, 5)?;
                let side2 = net_ref(&netlist, &line, 6)?;
                netlist
                    .add_valve(line.text(1), chamber, side1, side2)
                    .map_err(|e| invalid(&line, 1, e))?;
            }
            "VENT" => {
                line.arity(2, "VENT <net>")?;
                let net = net_ref(&netlist, &line, 1)?;
                netlist.add_vent(net).map_err(|e| invalid(&line, 1, e))?;
            }
            "PORT" => {
                line.arity(5, "PORT <name> <net> ROLE <role>")?;
                line.keyword(3, "ROLE")?;
                let net = net_ref(&netlist, &line, 2)?;
                let role: PortRole = line
                    .text(4)
                    .parse()
                    .map_err(|_| line.err(4, ParseErrorKind::MalformedRole(line.text(4).into())))?;
                netlist
                    .add_port(line.text(1), net, role)
                    .map_err(|e| invalid(&line, 1, e))?;
            }
            "VIA" => {
                line.arity(3, "VIA <netA> <netB>")?;
                let a = net_ref(&netlist, &line, 1)?;
                let b = net_ref(&netlist, &line, 2)?;
                netlist.merge_via(a, b).map_err(|e| invalid(&line, 2, e))?;
            }
            other => return Err(line.err(0, ParseErrorKind::UnknownKeyword(other.into()))),
        }
    }
    Ok(netlist)
}

/// Canonical text form: nets, vents, valves, ports, vias, each sorted by
/// name.
pub fn serialize_netlist(netlist: &Netlist) -> String {
    let s = netlist.structure();
    let mut out = String::new();
    writeln!(out, "{NETLIST_HEADER}").unwrap();
    for net in &s.nets {
        writeln!(out, "NET {net}").unwrap();
    }
    for vent in &s.vents {
        writeln!(out, "VENT {vent}").unwrap();
    }
    for (name, chamber, side1, side2) in &s.valves {
        writeln!(out, "VALVE {name} CHAMBER {chamber} SIDES {side1} {side2}").unwrap();
    }
    for (name, net, role) in &s.ports {
        writeln!(out, "PORT {name} {net} ROLE {role}").unwrap();
    }
    for (kept, absorbed) in &s.vias {
        writeln!(out, "VIA {kept} {absorbed}").unwrap();
    }
    out
}

fn parse_time(line: &Line<'_>, index: usize) -> Result<u64, ParseError> {
    let text = line.text(index);
    if text.starts_with('-') {
        return Err(line.err(index, ParseErrorKind::NegativeTime(text.into())));
    }
    if !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(line.err(index, ParseErrorKind::MalformedTime(text.into())));
    }
    text.parse()
        .map_err(|_| line.err(index, ParseErrorKind::MalformedTime(text.into())))
}

/// Parses the fault specification following `FAULT`; `start` indexes the
/// fault keyword.
fn parse_fault_tokens(line: &Line<'_>, start: usize) -> Result<Fault, ParseError> {
    let n = line.tokens.len();
    let rest = n - start;
    let id_at = |expected: &'static str| -> Result<String, ParseError> {
        if rest < 4 || line.text(n - 2) != "AS" {
            return Err(line.err(n.min(start + 3), ParseErrorKind::Arity { expected }));
        }
        Ok(line.text(n - 1).to_string())
    };
    let kind = match line.text(start) {
        "LEAK" => {
            const FORM: &str = "LEAK <net> AS <id>";
            if rest != 4 {
                return Err(line.err(n.min(start + 3), ParseErrorKind::Arity { expected: FORM }));
            }
            id_at(FORM)?;
            FaultKind::Leak {
                net: line.text(start + 1).into(),
            }
        }
        "CUT" => {
            const FORM: &str = "CUT <net> [DISTAL <port>...] AS <id>";
            id_at(FORM)?;
            let middle = &line.tokens[start + 2..n - 2];
            let distal_ports = match middle.split_first() {
                None => Vec::new(),
                Some((kw, ports)) if kw.text == "DISTAL" && !ports.is_empty() => {
                    ports.iter().map(|t| t.text.to_string()).collect()
                }
                Some(_) => {
                    return Err(line.err(start + 2, ParseErrorKind::ExpectedKeyword("DISTAL")))
                }
            };
            FaultKind::Cut {
                net: line.text(start + 1).into(),
                distal_ports,
            }
        }
        "STUCK_VALVE" => {
            const FORM: &str = "STUCK_VALVE <valve> <OPEN|CLOSED> AS <id>";
            if rest != 5 {
                return Err(line.err(n.min(start + 4), ParseErrorKind::Arity { expected: FORM }));
            }
            id_at(FORM)?;
            let state = match line.text(start + 2) {
                "OPEN" => StuckState::Open,
                "CLOSED" => StuckState::Closed,
                other => {
                    return Err(line.err(start + 2, ParseErrorKind::MalformedLevel(other.into())))
                }
            };
            FaultKind::StuckValve {
                valve: line.text(start + 1).into(),
                state,
            }
        }
        "STUCK_BIT" => {
            const FORM: &str = "STUCK_BIT <port> <VAC|ATM> AS <id>";
            if rest != 5 {
                return Err(line.err(n.min(start + 4), ParseErrorKind::Arity { expected: FORM }));
            }
            id_at(FORM)?;
            FaultKind::StuckBit {
                port: line.text(start + 1).into(),
                level: line.level(start + 2)?,
            }
        }
        other => return Err(line.err(start, ParseErrorKind::UnknownKeyword(other.into()))),
    };
    Ok(Fault {
        id: line.text(n - 1).into(),
        kind,
    })
}

/// Parses a single fault specification such as `LEAK bit2 AS puncture`.
pub fn parse_fault(text: &str) -> Result<Fault, ParseError> {
    let line = Line {
        number: 1,
        tokens: tokenize(text),
    };
    if line.tokens.is_empty() {
        return Err(line.err(0, ParseErrorKind::Arity { expected: "<fault spec>" }));
    }
    parse_fault_tokens(&line, 0)
}

/// Parses a `.pseq` scenario. Events come back sorted by time, file order
/// within equal times. Port and fault targets are checked at run time.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut events = Vec::new();
    for line in lines(text) {
        if line.text(0) != "AT" {
            return Err(line.err(0, ParseErrorKind::UnknownKeyword(line.text(0).into())));
        }
        if line.tokens.len() < 3 {
            return Err(line.err(line.tokens.len(), ParseErrorKind::Arity { expected: "AT <ms> <action>" }));
        }
        let time_ms = parse_time(&line, 1)?;
        let action = match line.text(2) {
            "SET" => {
                line.arity(5, "AT <ms> SET <port> <VAC|ATM>")?;
                Action::SetDrive {
                    port: line.text(3).into(),
                    level: line.level(4)?,
                }
            }
            "FAULT" => {
                if line.tokens.len() < 4 {
                    return Err(line.err(3, ParseErrorKind::Arity { expected: "AT <ms> FAULT <spec>" }));
                }
                Action::InjectFault(parse_fault_tokens(&line, 3)?)
            }
            "CLEAR" => {
                line.arity(4, "AT <ms> CLEAR <fault-id>")?;
                Action::ClearFault(line.text(3).into())
            }
            "CHECKPOINT" => {
                line.arity(4, "AT <ms> CHECKPOINT <label>")?;
                Action::Checkpoint(line.text(3).into())
            }
            other => return Err(line.err(2, ParseErrorKind::UnknownKeyword(other.into()))),
        };
        events.push(ScenarioEvent { time_ms, action });
    }
    Ok(Scenario::from_events(events))
}

pub fn serialize_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    writeln!(out, "{SCENARIO_HEADER}").unwrap();
    for e in scenario.events() {
        write!(out, "AT {} ", e.time_ms).unwrap();
        match &e.action {
            Action::SetDrive { port, level } => writeln!(out, "SET {port} {level}"),
            Action::InjectFault(fault) => writeln!(out, "FAULT {fault}"),
            Action::ClearFault(id) => writeln!(out, "CLEAR {id}"),
            Action::Checkpoint(label) => writeln!(out, "CHECKPOINT {label}"),
        }
        .unwrap();
    }
    out
}
