// SPDX-License-Identifier: Apache-2.0

//! Independent settle reference: a step function built on transitive-closure
//! matrices, its fixed points by exhaustive enumeration, and the trajectory
//! from a prior state.

#![allow(dead_code)]

use std::collections::BTreeMap;

use pneusim::netlist::{NetId, Netlist, PortRole};
use pneusim::sim::{settle, ConductionSemantics, ConflictMode, Drives, SimConfig, SimState};
use pneusim::{DriveLevel, PressureState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use PressureState::{Atm, Vac, X};

pub const CASES: usize = 1000;
const LEVELS: [PressureState; 3] = [Atm, Vac, X];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Cond {
    Open,
    Closed,
    Unknown,
}

pub struct Model {
    pub n: usize,
    pub valves: Vec<(usize, usize, usize)>,
    pub atm_src: Vec<bool>,
    pub vac_src: Vec<bool>,
    pub semantics: ConductionSemantics,
    pub mode: ConflictMode,
}

fn cond_of(c: PressureState, s1: PressureState, s2: PressureState, sem: ConductionSemantics) -> Cond {
    let chamber_vac = match c {
        Atm => return Cond::Closed,
        X => return Cond::Unknown,
        Vac => true,
    };
    debug_assert!(chamber_vac);
    match sem {
        ConductionSemantics::ChamberVac => Cond::Open,
        ConductionSemantics::StrictPaper => {
            // Closed only when both sides hold vacuum.
            let outcomes: Vec<bool> = [s1, s2]
                .iter()
                .map(|s| match s {
                    Atm => vec![false],
                    Vac => vec![true],
                    X => vec![false, true],
                })
                .fold(vec![vec![]], |acc: Vec<Vec<bool>>, opts| {
                    acc.iter()
                        .flat_map(|p| opts.iter().map(move |o| [p.clone(), vec![*o]].concat()))
                        .collect()
                })
                .into_iter()
                .map(|v| !(v[0] && v[1]))
                .collect();
            if outcomes.iter().all(|&o| o) {
                Cond::Open
            } else if outcomes.iter().all(|&o| !o) {
                Cond::Closed
            } else {
                Cond::Unknown
            }
        }
    }
}

fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        r[a][b] = true;
        r[b][a] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

impl Model {
    fn table(&self, atm: bool, vac: bool, members: &[PressureState]) -> PressureState {
        match (atm, vac) {
            (true, false) => Atm,
            (false, true) => Vac,
            (true, true) => match self.mode {
                ConflictMode::XOnConflict => X,
                ConflictMode::VentDominates => Atm,
                ConflictMode::SupplyDominates => Vac,
            },
            (false, false) => {
                if members.is_empty() {
                    Atm
                } else if members.iter().all(|m| *m == members[0]) {
                    members[0]
                } else {
                    X
                }
            }
        }
    }

    fn resolve_group(&self, reach: &[bool], s: &[PressureState]) -> PressureState {
        let atm = (0..self.n).any(|j| reach[j] && self.atm_src[j]);
        let vac = (0..self.n).any(|j| reach[j] && self.vac_src[j]);
        let members: Vec<PressureState> = (0..self.n).filter(|&j| reach[j]).map(|j| s[j]).collect();
        self.table(atm, vac, &members)
    }

    fn step(&self, s: &[PressureState]) -> Vec<PressureState> {
        let conds: Vec<Cond> = self
            .valves
            .iter()
            .map(|&(c, a, b)| cond_of(s[c], s[a], s[b], self.semantics))
            .collect();
        let open: Vec<(usize, usize)> = self
            .valves
            .iter()
            .zip(&conds)
            .filter(|(_, c)| **c == Cond::Open)
            .map(|(&(_, a, b), _)| (a, b))
            .collect();
        let maybe: Vec<(usize, usize)> = self
            .valves
            .iter()
            .zip(&conds)
            .filter(|(_, c)| **c != Cond::Closed)
            .map(|(&(_, a, b), _)| (a, b))
            .collect();
        let definite = closure(self.n, &open);
        let potential = closure(self.n, &maybe);
        (0..self.n)
            .map(|i| {
                if self.atm_src[i] || self.vac_src[i] {
                    return self.table(self.atm_src[i], self.vac_src[i], &[]);
                }
                let d = self.resolve_group(&definite[i], s);
                let sourced = (0..self.n).any(|j| definite[i][j] && (self.atm_src[j] || self.vac_src[j]));
                if sourced {
                    return d;
                }
                let p = self.resolve_group(&potential[i], s);
                if p == d {
                    d
                } else {
                    X
                }
            })
            .collect()
    }

    pub fn fixed_points(&self) -> Vec<Vec<PressureState>> {
        let total = 3usize.pow(self.n as u32);
        (0..total)
            .map(|mut code| {
                (0..self.n)
                    .map(|_| {
                        let v = LEVELS[code % 3];
                        code /= 3;
                        v
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|a| self.step(a) == *a)
            .collect()
    }

    /// `Ok(fixed point)` or `Err(())` when the trajectory cycles or runs
    /// past `limit` steps.
    pub fn trajectory(&self, prev: &[PressureState], limit: usize) -> Result<Vec<PressureState>, ()> {
        let mut seen = vec![prev.to_vec()];
        let mut cur = prev.to_vec();
        for _ in 0..limit {
            let next = self.step(&cur);
            if next == cur {
                return Ok(cur);
            }
            if seen.contains(&next) {
                return Err(());
            }
            seen.push(next.clone());
            cur = next;
        }
        Err(())
    }
}

pub struct Case {
    pub netlist: Netlist,
    pub drives: Drives,
    pub prev: SimState,
    pub config: SimConfig,
    pub model: Model,
    pub ids: Vec<NetId>,
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let n = rng.gen_range(1..=6);
    let mut netlist = Netlist::new();
    let ids: Vec<NetId> = (0..n).map(|i| netlist.add_net(&format!("n{i}")).unwrap()).collect();
    let mut drives = Drives::new();
    let mut atm_src = vec![false; n];
    let mut vac_src = vec![false; n];

    for i in 0..n {
        match rng.gen_range(0..8) {
            0 => {
                netlist.add_vent(ids[i]).unwrap();
                atm_src[i] = true;
            }
            1 | 2 => {
                let role = if rng.gen_bool(0.5) {
                    PortRole::PowerVac
                } else {
                    PortRole::GenericIn
                };
                let name = format!("p{i}");
                netlist.add_port(&name, ids[i], role).unwrap();
                let level = if rng.gen_bool(0.6) {
                    DriveLevel::Vac
                } else {
                    DriveLevel::Atm
                };
                drives.set(&name, level);
                match level {
                    DriveLevel::Vac => vac_src[i] = true,
                    DriveLevel::Atm => atm_src[i] = true,
                }
            }
            _ => {}
        }
    }

    let mut valves = Vec::new();
    if n >= 2 {
        for v in 0..rng.gen_range(0..=6) {
            let c = rng.gen_range(0..n);
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if c == a || c == b {
                continue;
            }
            netlist.add_valve(&format!("v{v}"), ids[c], ids[a], ids[b]).unwrap();
            valves.push((c, a, b));
        }
    }

    let mut prev = SimState::initial(&netlist);
    let prev_levels: Vec<PressureState> = (0..n).map(|_| LEVELS[rng.gen_range(0..3)]).collect();
    for (i, id) in ids.iter().enumerate() {
        prev.pressure.insert(*id, prev_levels[i]);
    }

    let semantics = if rng.gen_bool(0.5) {
        ConductionSemantics::ChamberVac
    } else {
        ConductionSemantics::StrictPaper
    };
    let mode = [
        ConflictMode::XOnConflict,
        ConflictMode::VentDominates,
        ConflictMode::SupplyDominates,
    ][rng.gen_range(0..3)];
    let config = SimConfig::default().with_conduction(semantics).with_conflict(mode);

    Case {
        netlist,
        drives,
        prev,
        config,
        model: Model {
            n,
            valves,
            atm_src,
            vac_src,
            semantics,
            mode,
        },
        ids,
    }
}

/// Runs `count` random cases; `Err` names the first divergent case.
pub fn check_cases(seed: u64, count: usize) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut settled = 0;
    let mut oscillating = 0;
    for case_no in 0..count {
        let case = random_case(&mut rng);
        let prev: Vec<PressureState> = case.ids.iter().map(|id| case.prev.pressure(*id)).collect();
        let limit = case.config.iteration_limit(case.model.n);
        let expected = case.model.trajectory(&prev, limit);
        let got = settle(&case.netlist, &case.prev, &case.drives, &case.config);
        match (expected, got) {
            (Ok(fp), Ok(state)) => {
                let got: Vec<PressureState> = case.ids.iter().map(|id| state.pressure(*id)).collect();
                if got != fp {
                    return Err(format!("case {case_no}: settle {got:?}, oracle {fp:?}"));
                }
                if !case.model.fixed_points().contains(&got) {
                    return Err(format!("case {case_no}: {got:?} is not a consistent assignment"));
                }
                settled += 1;
            }
            (Err(()), Err(_)) => oscillating += 1,
            (e, g) => {
                return Err(format!(
                    "case {case_no}: oracle settles {}, settle returns {}",
                    e.is_ok(),
                    g.map(|s| format!("{:?}", s.pressure.into_iter().collect::<BTreeMap<_, _>>()))
                        .unwrap_or_else(|e| e.to_string())
                ))
            }
        }
    }
    Ok((settled, oscillating))
}
