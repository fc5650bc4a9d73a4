//! Command-line syntax.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "tdflow", version, about = "Combined transmission and distribution power flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Log more (repeat for debug output).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one operating point and write the solution, report and summary.
    Solve(SolveArgs),
    /// Sweep the loading factor and record POI voltage up to the nose.
    Pvcurve(PvCurveArgs),
    /// Resolve a coupling map into a self-contained case bundle.
    Generate(GenerateArgs),
    /// Time the solver with a feeder replicated at 1, 4, 16, ... buses.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Direct,
    Gsn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HomotopyArg {
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LfScope {
    /// Transmission and feeder demand plus generator real power.
    All,
    /// Feeder demand only.
    Feeders,
}

#[derive(Args, Clone, Debug, Default)]
pub struct CaseArgs {
    /// Transmission case: MATPOWER `.m` or a JSON network.
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Coupling map attaching feeders to transmission buses.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Case bundle written by `generate`.
    #[arg(long, conflicts_with_all = ["case", "map"])]
    pub bundle: Option<PathBuf>,
    /// Keep the transmission demand at coupled buses instead of replacing it by the feeder.
    #[arg(long)]
    pub keep_bus_load: bool,
}

#[derive(Args, Clone, Debug, Default)]
pub struct SolverArgs {
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// GSN worker threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Newton mismatch tolerance (per unit).
    #[arg(long)]
    pub tol: Option<f64>,
    /// GSN boundary tolerance.
    #[arg(long)]
    pub outer_tol: Option<f64>,
    /// Largest voltage step per Newton iteration.
    #[arg(long)]
    pub dvmax: Option<f64>,
    /// Homotopy admittance scale.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub homotopy: Option<HomotopyArg>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Ignore stored initial voltages.
    #[arg(long)]
    pub flat_start: bool,
    /// Do not enforce generator reactive limits.
    #[arg(long)]
    pub no_q_limits: bool,
    /// Refuse GSN partitions that break the weak-coupling bound.
    #[arg(long)]
    pub strict_weak_coupling: bool,
    /// JSON file of solver options (`{"direct": {...}, "gsn": {...}}`); flags override it.
    #[arg(long)]
    pub options: Option<PathBuf>,
    /// Write the last Newton matrix here in MatrixMarket form.
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
    /// Write one JSON line per GSN epoch here.
    #[arg(long)]
    pub epoch_log: Option<PathBuf>,
    /// Per-epoch progress on stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Args, Clone, Debug)]
pub struct ScenarioArgs {
    /// Loading factor on demand (P and Q) and generator real power.
    #[arg(long, default_value_t = 1.0)]
    pub lf: f64,
    #[arg(long, value_enum, default_value_t = LfScope::All)]
    pub lf_scope: LfScope,
    /// Multiplier on every DER injection.
    #[arg(long, default_value_t = 1.0)]
    pub der_scale: f64,
    /// Remove this series element (repeatable).
    #[arg(long = "remove-element")]
    pub remove_elements: Vec<u64>,
    /// Take the generator at this bus out of service (repeatable).
    #[arg(long = "outage-gen")]
    pub outage_gens: Vec<u64>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PvCurveArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 1.0)]
    pub lf_start: f64,
    #[arg(long, default_value_t = 3.0)]
    pub lf_stop: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lf_step: f64,
    #[arg(long, value_enum, default_value_t = LfScope::All)]
    pub lf_scope: LfScope,
    /// DER multiplier of the base scenario.
    #[arg(long, default_value_t = 1.0)]
    pub der_scale: f64,
    /// Extra scenario with DER injections multiplied by this value (repeatable).
    #[arg(long = "der-scenario")]
    pub der_scenarios: Vec<f64>,
    /// Element removed in the contingency scenario (repeatable).
    #[arg(long = "contingency-element")]
    pub contingency_elements: Vec<u64>,
    /// Generator bus taken out in the contingency scenario (repeatable).
    #[arg(long = "contingency-gen")]
    pub contingency_gens: Vec<u64>,
    /// POI bus to record; defaults to the first coupling port.
    #[arg(long)]
    pub poi: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, default_value = "bundle")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Transmission case; feeders go on its first k PQ buses.
    #[arg(long)]
    pub case: PathBuf,
    /// Feeder file replicated at every coupled bus.
    #[arg(long)]
    pub feeder: PathBuf,
    /// Feeder counts to time.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 4, 16])]
    pub k: Vec<usize>,
    /// Timed runs per point; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "bench")]
    pub out: PathBuf,
}
