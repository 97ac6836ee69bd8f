// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use pneusim::dsl::parse_fault;
use pneusim::gates::build_parity_detector;
use pneusim::ipc::IpcSystem;
use pneusim::netlist::FindingKind;
use pneusim::protocol::{sweep_scenario, sweep_table};
use pneusim::scenario::ScenarioEvent;
use pneusim::{
    parse_netlist, parse_scenario, run_events, run_ipc, serialize_scenario, ConductionSemantics,
    ConflictMode, PhaseConfig, PortRole, PressureState, ScheduleMode, SimConfig, Trace,
};

/// Exit status when the detector's error output reached vacuum.
const EXIT_ERROR_DETECTED: u8 = 2;

#[derive(Parser)]
#[command(name = "pneusim", version, about = "Pneumatic membrane-valve logic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Continuous,
    Phased,
}

impl From<Mode> for ScheduleMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Continuous => ScheduleMode::Continuous,
            Mode::Phased => ScheduleMode::Phased,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a netlist.
    Lint { file: PathBuf },
    /// Run the 16-row sweep on the reference detector.
    Sweep {
        #[arg(long, default_value_t = 15_000)]
        hold_ms: u64,
        /// Simulator overrides, e.g. `conduction=strict_paper,conflict=vent_dominates`.
        #[arg(long)]
        config: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a scenario file against a netlist file.
    Scenario {
        file: PathBuf,
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        config: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the compression-device case study.
    Ipc {
        #[arg(long, value_enum)]
        mode: Mode,
        /// `<fault spec>@<ms>`, e.g. `LEAK bit2 AS l@15000`. Repeatable.
        #[arg(long)]
        fault: Vec<String>,
        /// `<id>@<ms>`. Repeatable.
        #[arg(long)]
        clear: Vec<String>,
        /// Simulated span; defaults to one run/check period.
        #[arg(long)]
        duration_ms: Option<u64>,
        #[arg(long)]
        config: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Emit the controller schedule of the case study as a scenario file.
    Protocol {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        duration_ms: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Lint { file } => lint(&file),
        Command::Sweep {
            hold_ms,
            config,
            output,
        } => sweep(hold_ms, &sim_config(config.as_deref(), SimConfig::vent_dominant())?, output.as_deref()),
        Command::Scenario {
            file,
            netlist,
            config,
            output,
        } => scenario(&file, &netlist, &sim_config(config.as_deref(), SimConfig::default())?, output.as_deref()),
        Command::Ipc {
            mode,
            fault,
            clear,
            duration_ms,
            config,
            output,
            events,
        } => {
            let mut extra = Vec::new();
            for f in &fault {
                let (spec, t) = split_at_time(f)?;
                let fault = parse_fault(spec).map_err(|e| anyhow!("--fault `{f}`: {}", e.kind))?;
                extra.push(ScenarioEvent::inject(t, fault));
            }
            for c in &clear {
                let (id, t) = split_at_time(c)?;
                extra.push(ScenarioEvent::clear(t, id.trim()));
            }
            let cfg = PhaseConfig::default();
            let total = duration_ms.unwrap_or(cfg.period_ms());
            let sim = sim_config(config.as_deref(), SimConfig::vent_dominant())?;
            let run = run_ipc(mode.into(), &extra, &cfg, total, &sim).map_err(|e| {
                let _ = write_out(output.as_deref(), &e.trace.to_csv());
                anyhow!("{e}")
            })?;
            write_out(output.as_deref(), &run.trace.to_csv())?;
            if let Some(path) = &events {
                write_out(Some(path), &run.events_csv())?;
            }
            Ok(if run.first_alarm_ms().is_some() {
                EXIT_ERROR_DETECTED
            } else {
                0
            })
        }
        Command::Protocol {
            mode,
            duration_ms,
            output,
        } => {
            let cfg = PhaseConfig::default();
            let total = duration_ms.unwrap_or(cfg.period_ms());
            let s = IpcSystem::new().scenario(mode.into(), &cfg, total, &[]);
            write_out(output.as_deref(), &serialize_scenario(&s))?;
            Ok(0)
        }
    }
}

fn lint(file: &Path) -> Result<u8> {
    let text = read(file)?;
    let netlist = match parse_netlist(&text) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("{}:{e}", file.display());
            return Ok(1);
        }
    };
    let report = netlist.validate();
    for f in report.errors.iter().chain(&report.warnings) {
        let level = if is_warning(f.kind) { "warning" } else { "error" };
        eprintln!("{}: {level}: {}", file.display(), f.message);
    }
    let b = netlist.budget();
    println!("valves {} vents {} vias {}", b.valves, b.vents, b.vias);
    Ok(if report.errors.is_empty() { 0 } else { 1 })
}

fn is_warning(kind: FindingKind) -> bool {
    matches!(
        kind,
        FindingKind::DegenerateValve | FindingKind::UnconnectedNet | FindingKind::UndrivableInput
    )
}

fn sweep(hold_ms: u64, config: &SimConfig, output: Option<&Path>) -> Result<u8> {
    let detector = build_parity_detector();
    let s = sweep_scenario(hold_ms, &PhaseConfig::default());
    let trace = run_events(&detector.netlist, &s, config).map_err(|e| anyhow!("{e}"))?;
    write_out(output, &sweep_table(&trace))?;
    Ok(0)
}

fn scenario(file: &Path, netlist: &Path, config: &SimConfig, output: Option<&Path>) -> Result<u8> {
    let n = parse_netlist(&read(netlist)?).map_err(|e| anyhow!("{}:{e}", netlist.display()))?;
    let s = parse_scenario(&read(file)?).map_err(|e| anyhow!("{}:{e}", file.display()))?;
    match run_events(&n, &s, config) {
        Ok(trace) => {
            write_out(output, &trace.to_csv())?;
            let errors: Vec<String> = n.ports_with_role(PortRole::ErrorOut).map(|p| p.name.clone()).collect();
            Ok(if error_reached_vacuum(&trace, &errors) {
                EXIT_ERROR_DETECTED
            } else {
                0
            })
        }
        Err(e) => {
            write_out(output, &e.trace.to_csv())?;
            bail!("{e}")
        }
    }
}

/// Whether any error-output port held vacuum in any entry.
fn error_reached_vacuum(trace: &Trace, errors: &[String]) -> bool {
    trace
        .entries
        .iter()
        .any(|e| errors.iter().any(|p| e.port(p) == Some(PressureState::Vac)))
}

fn split_at_time(arg: &str) -> Result<(&str, u64)> {
    let (spec, t) = arg
        .rsplit_once('@')
        .ok_or_else(|| anyhow!("`{arg}`: expected `<spec>@<ms>`"))?;
    let t = t
        .trim()
        .parse()
        .with_context(|| format!("`{arg}`: bad time"))?;
    Ok((spec, t))
}

fn sim_config(overrides: Option<&str>, mut config: SimConfig) -> Result<SimConfig> {
    let Some(text) = overrides else {
        return Ok(config);
    };
    for pair in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("config `{pair}`: expected key=value"))?;
        match (k.trim(), v.trim().to_ascii_lowercase().as_str()) {
            ("conduction", "chamber_vac") => config.conduction = ConductionSemantics::ChamberVac,
            ("conduction", "strict_paper") => config.conduction = ConductionSemantics::StrictPaper,
            ("conflict", "x_on_conflict") => config.conflict = ConflictMode::XOnConflict,
            ("conflict", "vent_dominates") => config.conflict = ConflictMode::VentDominates,
            ("conflict", "supply_dominates") => config.conflict = ConflictMode::SupplyDominates,
            ("max_iterations", n) => {
                let n: usize = n.parse().with_context(|| format!("config `{pair}`"))?;
                if n == 0 {
                    bail!("config `{pair}`: max_iterations must be at least 1");
                }
                config.max_iterations = Some(n);
            }
            _ => bail!("config `{pair}`: unknown key or value"),
        }
    }
    Ok(config)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
