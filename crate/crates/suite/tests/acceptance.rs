// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use pneusim::gates::{build_gate, build_parity_detector, detector_ports, truth_table, CircuitBuilder, GateKind};
use pneusim::ipc::reference_cut;
use pneusim::netlist::{NetId, Netlist, PortRole};
use pneusim::protocol::{apply_bits, check_with_parity, readings, ControlPorts};
use pneusim::{
    parity, parse_netlist, parse_scenario, run_events, run_ipc, serialize_netlist, Action, BitVector,
    DriveLevel, Fault, ParityMethod, PhaseConfig, PressureState, ScenarioEvent, ScheduleMode, SimConfig,
    SimError, Simulator,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DETECTOR: &str = include_str!("../../core/fixtures/detector.pnet");
const SWEEP: &str = include_str!("../../core/fixtures/fig4_sweep.pseq");

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bits_of(label: &str) -> Vec<bool> {
    label.chars().map(|c| c == '1').collect()
}

fn popcount_odd(mut v: u32) -> bool {
    let mut ones = 0;
    while v != 0 {
        ones += v & 1;
        v >>= 1;
    }
    ones % 2 == 1
}

fn c1_sweep() -> Outcome {
    let started = Instant::now();
    let netlist = parse_netlist(DETECTOR).map_err(|e| e.to_string())?;
    let scenario = parse_scenario(SWEEP).map_err(|e| e.to_string())?;
    let trace = run_events(&netlist, &scenario, &SimConfig::vent_dominant()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let rows = readings(&trace, detector_ports::ERROR);
    ensure(rows.len() == 16, || format!("{} readings, expected 16", rows.len()))?;
    let mut consistent = 0;
    for (_, label, level) in &rows {
        let b = bits_of(label);
        let mismatch = b[0] ^ b[1] ^ b[2] ^ b[3];
        let want = if mismatch { PressureState::Vac } else { PressureState::Atm };
        ensure(*level == want, || format!("row {label}: error {level:?}, expected {want:?}"))?;
        consistent += usize::from(!mismatch);
    }
    ensure(consistent == 8, || format!("{consistent} consistent rows"))?;
    let x = trace.entries.iter().filter(|e| e.state.has_x()).count();
    ensure(x == 0, || format!("{x} trace entries hold X"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("16/16 rows exact, 0 X entries, {} ms", elapsed.as_millis()))
}

fn c2_parity() -> Outcome {
    let started = Instant::now();
    let mut vectors = 0;
    for len in 1..=12usize {
        for v in 0..(1u32 << len) {
            let bits = BitVector::from_u32(v, len);
            let want = popcount_odd(v);
            for m in ParityMethod::ALL {
                ensure(parity(&bits, m) == want, || format!("{m:?} wrong on {bits}"))?;
            }
            vectors += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{vectors} vectors, 3 methods, {} ms", elapsed.as_millis()))
}

fn c3_gates() -> Outcome {
    let oracle = |kind: GateKind, a: bool, b: bool| match kind {
        GateKind::And => a && b,
        GateKind::Or => a || b,
        GateKind::Xor => a != b,
    };
    for kind in GateKind::ALL {
        let handle = build_gate(kind);
        let rows = truth_table(&handle, &SimConfig::vent_dominant()).map_err(|e| e.to_string())?;
        ensure(rows.len() == 4, || format!("{kind}: {} rows", rows.len()))?;
        for row in rows {
            let b = row.inputs.bits();
            let want = PressureState::from(DriveLevel::from_bit(oracle(kind, b[0], b[1])));
            ensure(row.output == want, || format!("{kind} {}: {:?}", row.inputs, row.output))?;
        }
    }
    let xor = build_gate(GateKind::Xor).netlist.budget();
    ensure(xor.valves == 6 && xor.vents == 2, || format!("XOR uses {} valves, {} vents", xor.valves, xor.vents))?;
    let det = build_parity_detector().netlist.budget();
    ensure(det.valves == 21, || format!("detector uses {} valves", det.valves))?;
    Ok(format!("AND/OR/XOR exhaustive, XOR 6 valves 2 vents, detector {} valves", det.valves))
}

fn c4_settle_oracle() -> Outcome {
    let (settled, oscillating) = common::check_cases(0x5e77_1e, common::CASES)?;
    Ok(format!("{} cases: {settled} fixed points, {oscillating} oscillating on both sides", common::CASES))
}

fn port_nets(n: &Netlist) -> BTreeSet<NetId> {
    n.ports.iter().map(|p| p.net).collect()
}

fn c5_latch_and_reset() -> Outcome {
    let handle = build_parity_detector();
    let ports = ControlPorts::detector();
    let cfg = PhaseConfig::default();
    let config = SimConfig::vent_dominant();
    let external = port_nets(&handle.netlist);
    let mut latched = Vec::new();
    let mut unlatched = Vec::new();
    let mut reset_ok = 0;
    for v in 0..16u32 {
        let bits = BitVector::from_u32(v >> 1, 3);
        let p = v & 1 == 1;
        let mismatch = popcount_odd(v >> 1) != p;
        let label = format!("{bits}{}", p as u8);
        let mut sim = Simulator::new(handle.netlist.clone(), config).map_err(|e| e.to_string())?;
        for e in apply_bits(&bits, &ports).scenario.events() {
            sim.step(&e.action).map_err(|e| e.to_string())?;
        }
        let mut powered_off = None;
        for e in check_with_parity(&label, p, cfg.operate_ms, &cfg, &ports).scenario.events() {
            let is_reset = matches!(&e.action, Action::SetDrive { port, .. } if ports.reset.contains(port));
            if is_reset && powered_off.is_none() {
                let vac: Vec<String> = handle
                    .netlist
                    .nets
                    .iter()
                    .filter(|(id, _)| !external.contains(id))
                    .filter(|(_, name)| sim.net_pressure(name) == Some(PressureState::Vac))
                    .map(|(_, name)| name.clone())
                    .collect();
                powered_off = Some(vac);
            }
            sim.step(&e.action).map_err(|e| e.to_string())?;
        }
        if mismatch {
            let vac = powered_off.unwrap_or_default();
            if vac.is_empty() {
                unlatched.push(label.clone());
            } else {
                latched.push(format!("{label}:{}", vac.join("+")));
            }
        }
        for port in &ports.bits {
            sim.drive(port, DriveLevel::Atm).map_err(|e| e.to_string())?;
        }
        for e in check_with_parity("000", false, cfg.operate_ms, &cfg, &ports).scenario.events() {
            sim.step(&e.action).map_err(|e| e.to_string())?;
            if matches!(&e.action, Action::Checkpoint(l) if l.starts_with("read-"))
                && sim.port_pressure(detector_ports::ERROR) == Some(PressureState::Atm)
            {
                reset_ok += 1;
            }
        }
    }
    let detail = format!(
        "latched after {}/8 mismatched checks [{}], not latched [{}]; all-zeros check after reset ATM for {reset_ok}/16 prior states",
        latched.len(),
        latched.join(" "),
        unlatched.join(" ")
    );
    if unlatched.is_empty() && reset_ok == 16 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c6_continuous_leak() -> Outcome {
    let cfg = PhaseConfig::default();
    let (inject_at, clear_at, total) = (13_000, 40_000, 80_000);
    let extra = [
        ScenarioEvent::inject(inject_at, Fault::leak("l", "bit2")),
        ScenarioEvent::clear(clear_at, "l"),
    ];
    let run = run_ipc(ScheduleMode::Continuous, &extra, &cfg, total, &SimConfig::vent_dominant())
        .map_err(|e| e.to_string())?;
    let checks: Vec<(u64, String)> = run
        .trace
        .entries
        .iter()
        .filter_map(|e| Some((e.time_ms, e.checkpoint()?.strip_prefix("check-")?.to_string())))
        .collect();
    let first_bit2 = checks
        .iter()
        .find(|(t, label)| *t > inject_at && bits_of(label)[1])
        .map(|(t, _)| *t)
        .ok_or("no bit-2 check after the leak")?;
    let alarm = run.first_alarm_ms();
    ensure(alarm == Some(first_bit2), || format!("first alarm {alarm:?}, first bit-2 check at {first_bit2}"))?;
    let late: Vec<_> = readings(&run.trace, detector_ports::ERROR)
        .into_iter()
        .filter(|(t, _, _)| *t > clear_at)
        .collect();
    ensure(!late.is_empty(), || "no checks after clearing".into())?;
    ensure(late.iter().all(|(_, _, l)| *l == PressureState::Atm), || format!("checks after clearing: {late:?}"))?;
    let sounding_after = run
        .whistle_transitions()
        .any(|(t, w)| t > clear_at && w == pneusim::Whistle::Sounding);
    ensure(!sounding_after, || "whistle sounded after clearing".into())?;
    Ok(format!(
        "leak at {inject_at} ms, SOUNDING at {first_bit2} ms (first bit-2 check), {} silent checks after clearing",
        late.len()
    ))
}

fn c7_phased_cut() -> Outcome {
    let cfg = PhaseConfig::default();
    let cut = reference_cut();
    let injected = cut.time_ms;
    let repaired = cfg.period_ms() + 500;
    let extra = [cut, ScenarioEvent::clear(repaired, "c")];
    let run = run_ipc(ScheduleMode::Phased, &extra, &cfg, 2 * cfg.period_ms(), &SimConfig::vent_dominant())
        .map_err(|e| e.to_string())?;
    let alarm = run.first_alarm_ms().ok_or("no alarm")?;
    let latency = alarm - injected;
    ensure(latency <= 61_500, || format!("latency {latency} ms"))?;
    let late: Vec<_> = readings(&run.trace, detector_ports::ERROR)
        .into_iter()
        .filter(|(t, _, _)| *t > repaired)
        .collect();
    ensure(!late.is_empty(), || "no checks after repair".into())?;
    ensure(late.iter().all(|(_, _, l)| *l == PressureState::Atm), || format!("checks after repair: {late:?}"))?;
    Ok(format!(
        "cut at {injected} ms, SOUNDING at {alarm} ms ({latency} ms later), {} silent checks after repair",
        late.len()
    ))
}

fn c8_blind_spot() -> Outcome {
    let handle = build_parity_detector();
    let ports = ControlPorts::detector();
    let cfg = PhaseConfig::default();
    let mut cases = 0;
    for v in 0..8u32 {
        let base = BitVector::from_u32(v, 3);
        let p = popcount_odd(v);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let mut sim =
                Simulator::new(handle.netlist.clone(), SimConfig::vent_dominant()).map_err(|e| e.to_string())?;
            for e in apply_bits(&base, &ports).scenario.events() {
                sim.step(&e.action).map_err(|e| e.to_string())?;
            }
            for k in [i, j] {
                let wrong = DriveLevel::from_bit(!base.bits()[k]);
                let f = Fault::stuck_bit(&format!("s{k}"), &ports.bits[k], wrong);
                sim.step(&Action::InjectFault(f)).map_err(|e| e.to_string())?;
            }
            let mut read = None;
            for e in check_with_parity(&base.to_string(), p, cfg.operate_ms, &cfg, &ports).scenario.events() {
                sim.step(&e.action).map_err(|e| e.to_string())?;
                if matches!(&e.action, Action::Checkpoint(l) if l.starts_with("read-")) {
                    read = sim.port_pressure(detector_ports::ERROR);
                }
            }
            ensure(read == Some(PressureState::Atm), || {
                format!("base {base}, bits {} and {} flipped: error {read:?}", i + 1, j + 1)
            })?;
            cases += 1;
        }
    }
    Ok(format!("{cases}/24 double-bit faults read ATM"))
}

fn sweep_csv(netlist: &Netlist) -> Result<String, String> {
    let s = parse_scenario(SWEEP).map_err(|e| e.to_string())?;
    Ok(run_events(netlist, &s, &SimConfig::vent_dominant())
        .map_err(|e| e.to_string())?
        .to_csv())
}

const OSCILLATOR: &str = "\
NET p
NET q
NET c
NET k
NET v
VENT v
PORT power p ROLE POWER_VAC
PORT hold q ROLE GENERIC_IN
VALVE W1 CHAMBER q SIDES p c
VALVE W2 CHAMBER q SIDES c k
VALVE V CHAMBER c SIDES k v
";

fn c9_determinism() -> Outcome {
    let n = parse_netlist(DETECTOR).map_err(|e| e.to_string())?;
    let reference = sweep_csv(&n)?;
    for _ in 0..3 {
        ensure(sweep_csv(&n)? == reference, || "repeated run differs".into())?;
    }
    let (header, body): (Vec<&str>, Vec<&str>) = DETECTOR.lines().partition(|l| l.starts_with('#'));
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..5 {
        let mut nets: Vec<&str> = body.iter().copied().filter(|l| l.starts_with("NET ")).collect();
        let (mut vias, mut others): (Vec<&str>, Vec<&str>) = body
            .iter()
            .copied()
            .filter(|l| !l.starts_with("NET "))
            .partition(|l| l.starts_with("VIA "));
        nets.shuffle(&mut rng);
        others.shuffle(&mut rng);
        vias.shuffle(&mut rng);
        let permuted = [header.clone(), nets, others, vias].concat().join("\n");
        let m = parse_netlist(&permuted).map_err(|e| e.to_string())?;
        ensure(sweep_csv(&m)? == reference, || "permuted declarations change the trace".into())?;
    }
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let n = parse_netlist(OSCILLATOR).unwrap();
        let s = parse_scenario("AT 0 SET power VAC\nAT 10 SET hold VAC").unwrap();
        let r: Vec<bool> = [SimConfig::default(), SimConfig::vent_dominant()]
            .iter()
            .map(|c| matches!(run_events(&n, &s, c).map_err(|e| e.source), Err(SimError::Oscillation(_))))
            .collect();
        let _ = tx.send(r);
    });
    let r = rx
        .recv_timeout(Duration::from_secs(5))
        .map_err(|_| "oscillator did not return within 5 s".to_string())?;
    ensure(r.iter().all(|&o| o), || "oscillator did not report oscillation".into())?;
    Ok(format!("{} trace bytes identical over 3 repeats and 5 permutations; oscillator rejected", reference.len()))
}

fn random_composition(rng: &mut ChaCha8Rng) -> Netlist {
    let mut b = CircuitBuilder::new();
    let inputs = rng.gen_range(1..4);
    let mut pool: Vec<NetId> = (0..inputs)
        .map(|i| b.input(&format!("in{i}"), PortRole::GenericIn).unwrap())
        .collect();
    for g in 0..rng.gen_range(1..6) {
        let kind = GateKind::ALL[rng.gen_range(0..3)];
        let power = b.input(&format!("power{g}"), PortRole::PowerVac).unwrap();
        let a = pool[rng.gen_range(0..pool.len())];
        let c = pool[rng.gen_range(0..pool.len())];
        let out = b.gate(kind, a, c, power).unwrap();
        b.output(&format!("out{g}"), out, PortRole::GenericOut).unwrap();
        pool.push(if rng.gen_bool(0.5) { b.cross_layer(out).unwrap() } else { out });
    }
    b.finish().unwrap()
}

fn c10_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x2071);
    for i in 0..100 {
        let n = random_composition(&mut rng);
        let text = serialize_netlist(&n);
        let back = parse_netlist(&text).map_err(|e| format!("netlist {i}: {e}"))?;
        ensure(back.structurally_eq(&n), || format!("netlist {i} changed shape"))?;
        ensure(serialize_netlist(&back) == text, || format!("netlist {i} not idempotent"))?;
    }
    let words = [
        "NET", "VALVE", "CHAMBER", "SIDES", "VENT", "PORT", "ROLE", "VIA", "AT", "SET", "INJECT", "CLEAR",
        "CHECKPOINT", "LEAK", "CUT", "DISTAL", "AS", "STUCK_BIT", "VAC", "ATM", "POWER_VAC", "x", "-1", "0",
        "18446744073709551616", "é", "\u{0}",
    ];
    let lines: Vec<String> = (0..10_000)
        .map(|_| {
            (0..rng.gen_range(0..8))
                .map(|_| words[rng.gen_range(0..words.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let crashed = std::panic::catch_unwind(|| {
        for chunk in lines.chunks(50) {
            for l in chunk {
                let _ = parse_netlist(l);
                let _ = parse_scenario(l);
            }
            let text = chunk.join("\n");
            let _ = parse_netlist(&text);
            let _ = parse_scenario(&text);
        }
    })
    .is_err();
    ensure(!crashed, || "parser panicked on fuzz input".into())?;
    Ok("100 composed netlists round-trip; 10000 fuzz lines parsed without panic".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("sweep reproduction", c1_sweep),
        ("parity oracle equivalence", c2_parity),
        ("gate truth tables", c3_gates),
        ("settle oracle equivalence", c4_settle_oracle),
        ("latching and reset", c5_latch_and_reset),
        ("continuous-mode leak", c6_continuous_leak),
        ("phased-mode cut", c7_phased_cut),
        ("double-bit blind spot", c8_blind_spot),
        ("determinism and robustness", c9_determinism),
        ("parser round-trip", c10_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
