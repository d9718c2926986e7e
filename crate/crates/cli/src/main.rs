use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rvf_core::event::EventId;
use rvf_core::explorer::{explore, ExploreOptions};
use rvf_core::oracle::{census, for_each_maximal_trace, OracleError, DEFAULT_BUDGET};
use rvf_core::program::{parse_program, AssertId, Program};
use rvf_core::vsc::{format_witness, parse_instance, verify_sc, VscOptions};

const EXIT_VIOLATION: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Stateless model checker for bounded concurrent programs.
#[derive(Parser)]
#[command(name = "rvf-mc", version)]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Mode {
    /// Explore one trace per reads-value-from class.
    Explore { program: PathBuf },
    /// Enumerate every maximal trace and count equivalence classes.
    Census { program: PathBuf },
    /// Decide a VSC instance given in the line format.
    Vsc { instance: PathBuf },
}

#[derive(Args, Clone, Copy)]
struct SwitchFlags {
    /// Keep mutating every read instead of waiting for a backtrack signal.
    #[arg(long, global = true)]
    no_backtrack_signals: bool,
    /// Skip the closure preprocessing in the solver.
    #[arg(long, global = true)]
    no_closure: bool,
    /// Do not guide the solver with the parent trace.
    #[arg(long, global = true)]
    no_aux_trace: bool,
    /// Disable the solver's greedy extension rules.
    #[arg(long, global = true)]
    no_greedy: bool,
}

#[derive(Args)]
struct Flags {
    #[command(flatten)]
    switches: SwitchFlags,
    /// Maximal-trace budget for census mode.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Exit with status 1 when an assertion can fail.
    #[arg(long, global = true)]
    fail_on_violation: bool,
    /// Write each explored trace (or the witness) as a line of event ids.
    #[arg(long, global = true, value_name = "PATH")]
    emit_traces: Option<PathBuf>,
}

#[derive(Serialize)]
struct OptionsOut {
    backtrack_signals: bool,
    closure: bool,
    aux_trace: bool,
    greedy: bool,
    budget: u64,
}

#[derive(Serialize)]
struct Report {
    mode: &'static str,
    program: String,
    maximal_traces: Option<u64>,
    rvf_classes: Option<usize>,
    rf_classes: Option<usize>,
    maz_classes: Option<usize>,
    leaves: Option<usize>,
    vsc_calls: Option<u64>,
    witness_states: Option<u64>,
    assertion_violations: Vec<String>,
    deadlocks: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    satisfiable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
    wall_time_ms: f64,
    options: OptionsOut,
}

enum Failure {
    Parse(String),
    Runtime(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            println!(
                "{}",
                serde_json::to_string(&report).expect("report serializes")
            );
            if cli.flags.fail_on_violation && !report.assertion_violations.is_empty() {
                ExitCode::from(EXIT_VIOLATION)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Parse(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PARSE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let src = read(path)?;
    parse_program(&src).map_err(|e| Failure::Parse(format!("{}:{e}", path.display())))
}

fn vsc_options(s: SwitchFlags) -> VscOptions {
    VscOptions {
        greedy: !s.no_greedy,
        closure: !s.no_closure,
        aux_trace: !s.no_aux_trace,
    }
}

fn labels(p: &Program, ids: impl IntoIterator<Item = AssertId>) -> Vec<String> {
    ids.into_iter().map(|id| p.assert_label(id)).collect()
}

fn line_of(ids: &[EventId]) -> String {
    format_witness(ids)
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    let flags = &cli.flags;
    let sw = flags.switches;
    let options = OptionsOut {
        backtrack_signals: !sw.no_backtrack_signals,
        closure: !sw.no_closure,
        aux_trace: !sw.no_aux_trace,
        greedy: !sw.no_greedy,
        budget: flags.budget,
    };
    let start = Instant::now();
    let mut report = match &cli.mode {
        Mode::Explore { program } => {
            let p = load_program(program)?;
            let opts = ExploreOptions {
                backtrack_signals: !sw.no_backtrack_signals,
                vsc: vsc_options(sw),
            };
            let rep = explore(&p, opts);
            if let Some(path) = &flags.emit_traces {
                let mut out = String::new();
                for leaf in &rep.leaves {
                    out.push_str(&line_of(&leaf.ids()));
                    out.push('\n');
                }
                fs::write(path, out)?;
            }
            Report {
                mode: "explore",
                program: program.display().to_string(),
                maximal_traces: Some(rep.maximal_traces() as u64),
                rvf_classes: None,
                rf_classes: None,
                maz_classes: None,
                leaves: Some(rep.maximal_traces()),
                vsc_calls: Some(rep.vsc_calls),
                witness_states: Some(rep.witness_states),
                assertion_violations: labels(&p, rep.violations()),
                deadlocks: Some(rep.deadlocks() as u64),
                satisfiable: None,
                witness: None,
                wall_time_ms: 0.0,
                options,
            }
        }
        Mode::Census { program } => {
            let p = load_program(program)?;
            let c = census(&p, flags.budget)?;
            if let Some(path) = &flags.emit_traces {
                let mut file = std::io::BufWriter::new(fs::File::create(path)?);
                let mut io_err = None;
                for_each_maximal_trace(&p, flags.budget, |t| {
                    if io_err.is_none() {
                        if let Err(e) = writeln!(file, "{}", line_of(&t.ids())) {
                            io_err = Some(e);
                        }
                    }
                })?;
                if let Some(e) = io_err {
                    return Err(e.into());
                }
                file.flush()?;
            }
            Report {
                mode: "census",
                program: program.display().to_string(),
                maximal_traces: Some(c.maximal_traces),
                rvf_classes: Some(c.rvf_classes),
                rf_classes: Some(c.rf_classes),
                maz_classes: Some(c.maz_classes),
                leaves: None,
                vsc_calls: None,
                witness_states: None,
                assertion_violations: labels(&p, c.violations.iter().copied()),
                deadlocks: Some(c.deadlocks),
                satisfiable: None,
                witness: None,
                wall_time_ms: 0.0,
                options,
            }
        }
        Mode::Vsc { instance } => {
            let src = read(instance)?;
            let (inst, _) = parse_instance(&src)
                .map_err(|e| Failure::Parse(format!("{}: {e}", instance.display())))?;
            let out = verify_sc(&inst, vsc_options(sw), None);
            let witness = out.witness.as_deref().map(line_of);
            if let (Some(path), Some(w)) = (&flags.emit_traces, &witness) {
                fs::write(path, format!("{w}\n"))?;
            }
            Report {
                mode: "vsc",
                program: instance.display().to_string(),
                maximal_traces: None,
                rvf_classes: None,
                rf_classes: None,
                maz_classes: None,
                leaves: None,
                vsc_calls: Some(1),
                witness_states: Some(out.stats.states_processed),
                assertion_violations: Vec::new(),
                deadlocks: None,
                satisfiable: Some(witness.is_some()),
                witness,
                wall_time_ms: 0.0,
                options,
            }
        }
    };
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
