use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oocsim::circuit::{generate_sycamore, merge_single_qubit_gates, Circuit, QubitLayout};
use oocsim::costmodel::{depth_sweep, estimate, sweep_csv, sweep_text, MachineProfile, SweepSpec};
use oocsim::engine::run_plan;
use oocsim::oracle::{compare_states, dense_simulate, ORACLE_MAX_QUBITS};
use oocsim::plan::schedule::{build_plan, ScheduleSpec};
use oocsim::plan::{emit_plan, reference, summarize_plan, validate_plan, PlanSummary, SimulationPlan};
use oocsim::storage::SliceStore;
use oocsim::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_INVALID_PLAN: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_MISMATCH: u8 = 5;
const EXIT_UNVERIFIABLE: u8 = 6;

/// Out-of-core sliced simulation of random circuits, with runtime estimates.
#[derive(Parser)]
#[command(name = "oocsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a staggered-lattice layout file.
    Layout {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// Keep only the first N qubits.
        #[arg(long)]
        qubits: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an ABCDCDAB random circuit.
    GenCircuit {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        cycles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Absorb single-qubit gates into the two-qubit gates.
        #[arg(long)]
        merge: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a plan for a circuit with the greedy scheduler.
    BuildPlan {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, default_value_t = 1)]
        disk_bits: usize,
        #[arg(long, default_value_t = 2)]
        global_bits: usize,
        #[arg(long, default_value_t = 2)]
        deferred: usize,
        #[arg(long, default_value_t = oocsim::plan::K_MAX)]
        k_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one of the shipped large-scale plans.
    ReferencePlan {
        /// sycamore53-20, sycamore53-10 or sycamore54-20.
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a plan, optionally against a circuit.
    Validate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        circuit: Option<PathBuf>,
    },
    /// Per-phase counts of a plan, as a summary file.
    Summarize {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runtime estimate from a plan, a phase summary or depth-sweep rows.
    Estimate(EstimateArgs),
    /// Run a plan and leave the final amplitudes in the store.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Write the execution trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare stored amplitudes against the dense oracle.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, conflicts_with_all = ["summary", "sweep"])]
    plan: Option<PathBuf>,
    #[arg(long, conflicts_with = "sweep")]
    summary: Option<PathBuf>,
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Machine profile; Summit when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Directory for the logical files; in-memory store when absent.
    #[arg(long, env = "OOCSIM_STORAGE_ROOT")]
    storage_root: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Lib(Error),
    Mismatch(String),
    Unverifiable(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Mismatch(_) => EXIT_MISMATCH,
            Failure::Unverifiable(_) => EXIT_UNVERIFIABLE,
            Failure::Lib(e) => match e {
                Error::PlanParse { .. } | Error::PlanStep { .. } | Error::Locality { .. } => {
                    EXIT_INVALID_PLAN
                }
                Error::Io(_)
                | Error::MissingFile { .. }
                | Error::Discipline(_)
                | Error::SliceLength { .. } => EXIT_IO,
                Error::Config(_) | Error::Layout(_) | Error::TomlDe(_) | Error::Json(_) => EXIT_USAGE,
                _ => 1,
            },
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn emit(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Lib(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn two_qubit(c: Circuit) -> oocsim::Result<Circuit> {
    if c.is_two_qubit_only() {
        Ok(c)
    } else {
        merge_single_qubit_gates(&c)
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Layout { rows, cols, qubits, out } => {
            let mut layout = QubitLayout::sycamore_like(rows, cols)?;
            if let Some(n) = qubits {
                layout = layout.truncated(n)?;
            }
            emit(&layout.to_toml_string()?, out.as_deref())
        }
        Command::GenCircuit {
            layout,
            cycles,
            seed,
            merge,
            out,
        } => {
            if cycles == 0 {
                return Err(Failure::Usage("--cycles must be at least 1".into()));
            }
            let mut c = generate_sycamore(&QubitLayout::load(&layout)?, cycles, seed)?;
            if merge {
                c = merge_single_qubit_gates(&c)?;
            }
            emit(&(c.to_json()? + "\n"), out.as_deref())
        }
        Command::BuildPlan {
            circuit,
            disk_bits,
            global_bits,
            deferred,
            k_max,
            out,
        } => {
            let c = two_qubit(Circuit::load(&circuit)?)?;
            let mut spec = ScheduleSpec::alternating(c.n_qubits, disk_bits, global_bits)?;
            spec.max_deferred = deferred;
            spec.k_max = k_max;
            emit(&emit_plan(&build_plan(&c, &spec)?), out.as_deref())
        }
        Command::ReferencePlan { name, out } => {
            let plan = match name.as_str() {
                "sycamore53-20" => reference::sycamore53_20(),
                "sycamore53-10" => reference::sycamore53_10(),
                "sycamore54-20" => reference::sycamore54_20(),
                other => return Err(Failure::Usage(format!("unknown reference plan `{other}`"))),
            };
            emit(&emit_plan(&plan), out.as_deref())
        }
        Command::Validate { plan, circuit } => {
            let plan = SimulationPlan::load(&plan)?;
            let circuit = circuit.map(|p| Circuit::load(p).and_then(two_qubit)).transpose()?;
            let violations = validate_plan(&plan, circuit.as_ref());
            if violations.is_empty() {
                println!("plan is valid ({} steps)", plan.steps().len());
                Ok(())
            } else {
                for v in &violations {
                    eprintln!("{v}");
                }
                Err(Failure::Lib(oocsim::engine::violation_error(&violations)))
            }
        }
        Command::Summarize { plan, out } => {
            let summary = summarize_plan(&SimulationPlan::load(&plan)?)?;
            emit(&summary.to_toml_string()?, out.as_deref())
        }
        Command::Estimate(args) => {
            let profile = match &args.profile {
                Some(p) => MachineProfile::load(p)?,
                None => MachineProfile::summit(),
            };
            let text = if let Some(sweep) = &args.sweep {
                let points = depth_sweep(&SweepSpec::load(sweep)?, &profile)?;
                if args.csv {
                    sweep_csv(&points)?
                } else {
                    sweep_text(&points)
                }
            } else {
                let summary = match (&args.plan, &args.summary) {
                    (Some(p), _) => summarize_plan(&SimulationPlan::load(p)?)?,
                    (None, Some(s)) => PlanSummary::load(s)?,
                    (None, None) => {
                        return Err(Failure::Usage("estimate needs --plan, --summary or --sweep".into()))
                    }
                };
                let report = estimate(&summary, &profile)?;
                if args.csv {
                    report.to_csv()?
                } else {
                    report.to_text()
                }
            };
            emit(&text, args.out.as_deref())
        }
        Command::Simulate { run, trace } => {
            let circuit = two_qubit(Circuit::load(&run.circuit)?)?;
            let plan = SimulationPlan::load(&run.plan)?;
            let mut store = match &run.storage_root {
                Some(root) => SliceStore::disk_fresh(root)?,
                None => SliceStore::memory(),
            };
            let t = run_plan(&plan, &circuit, &mut store)?;
            println!(
                "simulated {} qubits: {} disk transfers, {:.6} all-to-alls, {} kernels per disk slice",
                t.n_qubits,
                t.transfers(),
                t.all2alls(),
                t.kernels()
            );
            match trace {
                Some(p) => emit(&(t.to_json()? + "\n"), Some(&p)),
                None => Ok(()),
            }
        }
        Command::Verify { run, tolerance } => {
            let original = Circuit::load(&run.circuit)?;
            if original.n_qubits > ORACLE_MAX_QUBITS {
                return Err(Failure::Unverifiable(format!(
                    "unverifiable at this size: {} qubits exceeds the oracle cap of {ORACLE_MAX_QUBITS}",
                    original.n_qubits
                )));
            }
            let mut store = match &run.storage_root {
                Some(root) => SliceStore::disk(root)?,
                None => SliceStore::memory(),
            };
            if !store.has_data() {
                let plan = SimulationPlan::load(&run.plan)?;
                run_plan(&plan, &two_qubit(original.clone())?, &mut store)?;
            }
            let tolerance = tolerance.unwrap_or(if store.is_disk() { 1e-4 } else { 1e-10 });
            let got = store.load_state()?;
            let want = dense_simulate(&original)?;
            let cmp = compare_states(&got, want.amplitudes())?;
            println!(
                "max_abs_diff {:.3e}  fidelity {:.12}  tolerance {:.1e}",
                cmp.max_abs_diff, cmp.fidelity, tolerance
            );
            if cmp.max_abs_diff <= tolerance {
                println!("match");
                Ok(())
            } else {
                Err(Failure::Mismatch(format!(
                    "mismatch: max_abs_diff {:.3e} exceeds {tolerance:.1e}",
                    cmp.max_abs_diff
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Mismatch(m) | Failure::Unverifiable(m) => eprintln!("{m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}
