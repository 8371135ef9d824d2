//! Command-line interface to the measurement-dependent-locality Bell
//! toolkit: predictions, coincidence simulation, count-table analysis,
//! polytope oracles, tomography, and optimization behind one binary.
//!
//! Conventions shared by every subcommand:
//!
//! - Angles carry an explicit unit suffix (`45deg` or `0.785rad`); bare
//!   numbers are usage errors.
//! - Every stochastic subcommand takes a mandatory `--seed`, and identical
//!   invocations produce byte-identical output regardless of thread count.
//! - Reports are JSON (self-identified by their `schema` field); count
//!   tables are CSV with metadata in a `.json` sidecar (file mode) or a
//!   leading `# {...}` line (stream mode), so tables pipe cleanly between
//!   subcommands.
//! - Exit codes: 0 on success; 1 on domain failures (inconsistent or
//!   degenerate data, failed reconstructions, missing thresholds); 2 on
//!   usage errors (unknown flags, suffix-less angles, out-of-range
//!   parameters, unresolvable paths).
//! - The environment variable `MDL_BELL_THREADS` caps the worker pool.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mdl_bell::analysis;
use mdl_bell::exec;
use mdl_bell::inequality::{
    chsh_joint_functional, chsh_value, critical_ell, evaluate, inequality_cells,
    mdl_joint_functional, BellFunctional, JointDistribution, MdlParameter,
};
use mdl_bell::optimizer::{self, Objective, ObjectiveSpec, ParameterPoint, TraceEntry};
use mdl_bell::oracle::{self, MdlVertex};
use mdl_bell::quantum::{
    born_table, golden_schmidt_angle, mix_white_noise, CorrelationTable, DensityMatrix2Q,
    PureState2Q, SettingsSet,
};
use mdl_bell::sim::{self, DetectionModel, SourceModel};
use mdl_bell::tomography::{self, TomographyData, TomographyMetadata, TomographyProtocol};
use mdl_bell::{Error, Result};

/// Bell tests under measurement-dependent locality: predict, simulate,
/// analyze, and optimize two-qubit experiments that bound the
/// measurement-dependence parameter.
#[derive(Parser, Debug)]
#[command(name = "mdl-bell", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Born-rule prediction report for a state and analyzer settings.
    Predict(PredictArgs),
    /// Seeded Poisson coincidence run in the full count-table format.
    Simulate(SimulateArgs),
    /// Critical-parameter report for a count table with bootstrap errors.
    Analyze(AnalyzeArgs),
    /// Exact polytope maxima, violation thresholds, and model sweeps.
    Oracle(OracleArgs),
    /// Tomographic count generation and state reconstruction.
    Tomo(TomoArgs),
    /// Simplex search over states and analyzer settings.
    Optimize(OptimizeArgs),
}

/// Parses an angle with a mandatory `deg` or `rad` suffix into radians.
fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (number, scale) = if let Some(v) = t.strip_suffix("deg") {
        (v, std::f64::consts::PI / 180.0)
    } else if let Some(v) = t.strip_suffix("rad") {
        (v, 1.0)
    } else {
        return Err(format!(
            "`{t}` has no unit; write angles with an explicit `deg` or `rad` suffix (e.g. 45deg)"
        ));
    };
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|e| format!("`{t}`: {e}"))?;
    if !value.is_finite() {
        return Err(format!("`{t}` is not a finite angle"));
    }
    Ok(value * scale)
}

/// Source-state selection shared by the state-dependent subcommands.
#[derive(Args, Debug)]
#[command(group(ArgGroup::new("state_choice").args(["golden", "chi"])))]
struct StateArgs {
    /// Use the golden Schmidt state.
    #[arg(long)]
    golden: bool,

    /// Schmidt angle of a pure Schmidt state (e.g. `--chi 20.905deg`).
    #[arg(long, value_parser = parse_angle, value_name = "ANGLE")]
    chi: Option<f64>,

    /// Relative phase of the Schmidt state.
    #[arg(long, value_parser = parse_angle, value_name = "ANGLE", default_value = "0rad")]
    phase: f64,

    /// White-noise visibility in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,
}

/// A fully determined source state.
struct ResolvedState {
    chi: f64,
    phase: f64,
    visibility: f64,
    pure: PureState2Q,
}

impl ResolvedState {
    fn density(&self) -> Result<DensityMatrix2Q> {
        mix_white_noise(&self.pure.density(), self.visibility)
    }
}

impl StateArgs {
    /// Resolves the selected state; `default_golden` supplies the golden
    /// state when neither `--golden` nor `--chi` is given.
    fn resolve(&self, default_golden: bool) -> Result<ResolvedState> {
        let golden = self.golden || (self.chi.is_none() && default_golden);
        let chi = match (golden, self.chi) {
            (true, _) => golden_schmidt_angle(),
            (false, Some(chi)) => chi,
            (false, None) => {
                return Err(Error::InvalidArgument(
                    "choose a state: --golden or --chi <ANGLE>".into(),
                ))
            }
        };
        let pure = if golden && self.phase == 0.0 {
            PureState2Q::golden()
        } else {
            PureState2Q::schmidt(chi, self.phase)?
        };
        Ok(ResolvedState {
            chi,
            phase: self.phase,
            visibility: self.visibility,
            pure,
        })
    }
}

/// Analyzer-settings selection shared by the settings-dependent
/// subcommands. The tied single-angle family sets `a1 = theta + 45deg` and
/// mirrors each B angle (`b_i = -a_i`).
#[derive(Args, Debug)]
#[command(group(ArgGroup::new("analyzer_choice").args(["hardy", "theta", "a0"])))]
struct SettingsArgs {
    /// Tied analyzer family at the golden-optimal angle (76.7175deg).
    #[arg(long)]
    hardy: bool,

    /// Tied analyzer family at this angle.
    #[arg(long, value_parser = parse_angle, value_name = "ANGLE")]
    theta: Option<f64>,

    /// Analyzer angle of party A, input 0 (needs --a1, --b0, --b1).
    #[arg(long, value_parser = parse_angle, value_name = "ANGLE", requires_all = ["a1", "b0", "b1"])]
    a0: Option<f64>,

    /// Analyzer angle of party A, input 1.
    #[arg(long, value_parser = parse_angle, value_name = "ANGLE", requires = "a0")]
    a1: Option<f64>,

    /// Analyzer angle of party B, input 0.
    #[arg(long, value_parser = parse_angle, value_name = "ANGLE", requires = "a0")]
    b0: Option<f64>,

    /// Analyzer angle of party B, input 1.
    #[arg(long, value_parser = parse_angle, value_name = "ANGLE", requires = "a0")]
    b1: Option<f64>,
}

impl SettingsArgs {
    /// Resolves the selected settings; `default_hardy` supplies the tied
    /// golden-optimal set when no choice is given.
    fn resolve(&self, default_hardy: bool) -> Result<SettingsSet> {
        if self.hardy {
            Ok(SettingsSet::hardy())
        } else if let Some(theta) = self.theta {
            SettingsSet::tied(theta)
        } else if let Some(a0) = self.a0 {
            let bundle = [self.a1, self.b0, self.b1].map(|v| v.expect("clap bundles the angles"));
            SettingsSet::from_angles(a0, bundle[0], bundle[1], bundle[2])
        } else if default_hardy {
            Ok(SettingsSet::hardy())
        } else {
            Err(Error::InvalidArgument(
                "choose analyzer settings: --hardy, --theta <ANGLE>, or --a0/--a1/--b0/--b1".into(),
            ))
        }
    }
}

#[derive(Args, Debug)]
#[command(after_help = "Example: mdl-bell predict --golden --hardy")]
struct PredictArgs {
    #[command(flatten)]
    state: StateArgs,

    #[command(flatten)]
    settings: SettingsArgs,

    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(after_help = "Example: mdl-bell simulate --seed 7 --pair-rate 1166.7 --time 30 \
--accidental-rate 2.25 --visibility 0.995")]
struct SimulateArgs {
    /// Seed for the per-cell Poisson streams.
    #[arg(long)]
    seed: u64,

    /// Entangled-pair rate delivered to the analyzers, in pairs per second.
    #[arg(long, value_name = "PAIRS_PER_S")]
    pair_rate: f64,

    /// Integration time per basis in seconds.
    #[arg(long, value_name = "SECONDS")]
    time: f64,

    /// Accidental-coincidence rate per cell in counts per second.
    #[arg(long, value_name = "PER_S", default_value_t = 0.0)]
    accidental_rate: f64,

    #[command(flatten)]
    state: StateArgs,

    #[command(flatten)]
    settings: SettingsArgs,

    /// Write the CSV here (with a `.json` metadata sidecar) instead of
    /// streaming it, with inline metadata, to standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "stdin"])))]
#[command(after_help = "Example: mdl-bell analyze --input data/table1_summary.csv --boot 10000 --seed 1")]
struct AnalyzeArgs {
    /// Count table in the full or summary CSV format.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,

    /// Read the count table from standard input (inline `# {...}` metadata).
    #[arg(long)]
    stdin: bool,

    /// Number of parametric bootstrap resamples per probability kind.
    #[arg(long, default_value_t = analysis::DEFAULT_BOOTSTRAP_RESAMPLES)]
    boot: usize,

    /// Seed for the bootstrap resampling streams.
    #[arg(long)]
    seed: u64,

    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

/// Which Bell functional the oracle works on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FunctionalKind {
    /// The measurement-dependence functional at the given parameter.
    Mdl,
    /// The CHSH functional in joint form.
    Chsh,
}

impl FunctionalKind {
    fn name(self) -> &'static str {
        match self {
            FunctionalKind::Mdl => "mdl",
            FunctionalKind::Chsh => "chsh",
        }
    }
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("mode").required(true).args(["ell", "threshold"])))]
#[command(after_help = "Examples:\n  mdl-bell oracle --functional mdl --ell 0.1\n  \
mdl-bell oracle --functional chsh --threshold")]
struct OracleArgs {
    /// Bell functional to maximize or threshold.
    #[arg(long, value_enum, default_value = "mdl")]
    functional: FunctionalKind,

    /// Evaluate the polytope maximum at this measurement-dependence
    /// parameter (in [0, 0.25]).
    #[arg(long, value_name = "ELL")]
    ell: Option<f64>,

    /// Bisect for the parameter where the quantum value starts to beat the
    /// polytope maximum.
    #[arg(long)]
    threshold: bool,

    /// Also sweep this many seeded random models at the same parameter and
    /// report their largest functional value.
    #[arg(long, value_name = "COUNT", requires_all = ["ell", "seed"])]
    sweep: Option<usize>,

    /// Largest number of mixture components per random model.
    #[arg(long, default_value_t = 4)]
    components: usize,

    /// Seed for the random-model sweep.
    #[arg(long)]
    seed: Option<u64>,

    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

/// Fidelity reference for reconstructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TargetKind {
    /// Compare against the golden Schmidt state.
    Golden,
    /// Report no fidelity.
    None,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("mode").required(true).args(["input", "simulate", "exact"])))]
#[command(after_help = "Examples:\n  mdl-bell tomo --simulate --flux 10000 --seed 5 \
--visibility 0.99 --output counts.csv\n  mdl-bell tomo --input counts.csv")]
struct TomoArgs {
    /// Reconstruct the density matrix from this counts table.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,

    /// Draw Poisson counts for the configured state.
    #[arg(long, requires_all = ["flux", "seed"])]
    simulate: bool,

    /// Write exact (noise-free) expected counts for the configured state.
    #[arg(long, requires = "flux")]
    exact: bool,

    /// Mean photon flux per analyzer configuration.
    #[arg(long, conflicts_with = "input")]
    flux: Option<f64>,

    /// Seed for the per-configuration Poisson streams.
    #[arg(long, conflicts_with_all = ["input", "exact"])]
    seed: Option<u64>,

    /// Fidelity reference reported with a reconstruction.
    #[arg(long, value_enum, default_value = "golden")]
    target: TargetKind,

    #[command(flatten)]
    state: StateArgs,

    /// Counts mode: write the CSV here (with a `.json` sidecar) instead of
    /// streaming. Reconstruction mode: write the JSON report here.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

/// Figure of merit minimized by the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ObjectiveKind {
    /// The critical measurement-dependence parameter.
    CriticalEll,
    /// The penalized surrogate `-(P0 - kappa*S)`.
    Penalized,
}

#[derive(Args, Debug)]
#[command(after_help = "Examples:\n  mdl-bell optimize --tied --starts 32 --seed 424242\n  \
mdl-bell optimize --start-hardy")]
struct OptimizeArgs {
    /// Figure of merit to minimize.
    #[arg(long, value_enum, default_value = "penalized")]
    objective: ObjectiveKind,

    /// Zero-cell penalty strength of the penalized objective.
    #[arg(long, default_value_t = 1e3)]
    kappa: f64,

    /// White-noise visibility of the candidate states, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,

    /// Restrict the search to the tied single-angle analyzer family.
    #[arg(long)]
    tied: bool,

    /// Number of random starts.
    #[arg(long, default_value_t = 32)]
    starts: usize,

    /// Seed for the random starting points.
    #[arg(long, required_unless_present = "start_hardy")]
    seed: Option<u64>,

    /// Refine from the golden construction instead of random starts.
    #[arg(long, conflicts_with_all = ["seed", "starts", "tied"])]
    start_hardy: bool,

    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(code) = configure_threads() {
        return code;
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}

/// Domain failures exit 1; invalid parameter values are usage errors and
/// exit 2, matching the parser's own convention.
fn failure_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Applies `MDL_BELL_THREADS` before any parallel work runs.
fn configure_threads() -> Option<ExitCode> {
    let value = match std::env::var("MDL_BELL_THREADS") {
        Ok(v) => v,
        Err(std::env::VarError::NotPresent) => return None,
        Err(e) => {
            eprintln!("error: MDL_BELL_THREADS is unreadable: {e}");
            return Some(ExitCode::from(2));
        }
    };
    match value.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            exec::set_thread_cap(n);
            None
        }
        _ => {
            eprintln!("error: MDL_BELL_THREADS must be a positive integer, got `{value}`");
            Some(ExitCode::from(2))
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Predict(args) => run_predict(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Analyze(args) => run_analyze(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Tomo(args) => run_tomo(args),
        Command::Optimize(args) => run_optimize(args),
    }
}

/// Writes `text` to the output path, or to standard output when none is
/// given.
fn emit_text(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit_text(&text, output)
}

/// Path arguments must resolve at invocation; a dangling one is a usage
/// error rather than a runtime failure.
fn require_path(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "input path `{}` does not resolve",
            path.display()
        )))
    }
}

#[derive(Serialize)]
struct AnglesRad {
    a0: f64,
    a1: f64,
    b0: f64,
    b1: f64,
}

impl AnglesRad {
    fn from_settings(s: &SettingsSet) -> Self {
        Self {
            a0: s.a0.angle(),
            a1: s.a1.angle(),
            b0: s.b0.angle(),
            b1: s.b1.angle(),
        }
    }
}

#[derive(Serialize)]
struct CriticalOut {
    /// Root of the conditional-form left-hand side, when defined.
    root: Option<f64>,
    violable: bool,
}

#[derive(Serialize)]
struct PredictReport {
    schema: &'static str,
    chi_rad: f64,
    phase_rad: f64,
    visibility: f64,
    analyzer_angles_rad: AnglesRad,
    /// Conditional probabilities `P(ab|xy)` indexed `[x][y][a][b]`.
    probabilities_xyab: [[[[f64; 2]; 2]; 2]; 2],
    signal_cell: f64,
    zero_cells: [f64; 3],
    critical_ell: CriticalOut,
    chsh_value: f64,
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let state = args.state.resolve(false)?;
    let settings = args.settings.resolve(false)?;
    let table = born_table(&state.density()?, &settings);
    let (signal, zeros) = inequality_cells(&table);
    let crit = critical_ell(&table);
    let report = PredictReport {
        schema: "mdl-predict/1",
        chi_rad: state.chi,
        phase_rad: state.phase,
        visibility: state.visibility,
        analyzer_angles_rad: AnglesRad::from_settings(&settings),
        probabilities_xyab: *table.as_array(),
        signal_cell: signal,
        zero_cells: zeros,
        critical_ell: CriticalOut {
            root: crit.root(),
            violable: crit.is_violable(),
        },
        chsh_value: chsh_value(&table),
    };
    emit_json(&report, args.output.as_deref())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let state = args.state.resolve(true)?;
    let src = SourceModel::new(state.chi, state.phase, state.visibility, args.pair_rate)?;
    let det = DetectionModel::new(args.accidental_rate, args.time)?;
    let settings = args.settings.resolve(true)?;
    let data = sim::simulate(&src, &det, &settings, args.seed);
    match args.output.as_deref() {
        Some(path) => data.save(path),
        None => data.write_stream(&mut std::io::stdout().lock()),
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let dataset = match (&args.input, args.stdin) {
        (Some(path), false) => {
            require_path(path)?;
            analysis::ingest_path(path)?
        }
        _ => analysis::ingest_reader(&mut std::io::stdin().lock())?,
    };
    let report = analysis::report(&dataset, args.boot, args.seed)?;
    emit_json(&report, args.output.as_deref())
}

#[derive(Serialize)]
struct VertexOut {
    strategy_index: usize,
    a_outputs: [u8; 2],
    b_outputs: [u8; 2],
    /// Input-pair probabilities indexed `2x + y`.
    input_probabilities: [f64; 4],
}

impl VertexOut {
    fn from_vertex(v: &MdlVertex) -> Self {
        Self {
            strategy_index: v.strategy.index(),
            a_outputs: [v.strategy.output_a(0), v.strategy.output_a(1)],
            b_outputs: [v.strategy.output_b(0), v.strategy.output_b(1)],
            input_probabilities: *v.inputs.as_array(),
        }
    }
}

#[derive(Serialize)]
struct SweepOut {
    count: usize,
    max_components: usize,
    seed: u64,
    max_value: f64,
}

#[derive(Serialize)]
struct OracleReport {
    schema: &'static str,
    functional: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    ell: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    argmax: Option<VertexOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepOut>,
}

fn functional_for(kind: FunctionalKind, ell: MdlParameter) -> BellFunctional {
    match kind {
        FunctionalKind::Mdl => mdl_joint_functional(ell),
        FunctionalKind::Chsh => chsh_joint_functional(),
    }
}

/// The quantum realization whose value the `--threshold` bisection feeds:
/// the golden Hardy construction for the measurement-dependence functional,
/// a Tsirelson-saturating construction for CHSH. Inputs are uniform.
fn quantum_reference(kind: FunctionalKind) -> Result<CorrelationTable> {
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
    match kind {
        FunctionalKind::Mdl => Ok(born_table(
            &PureState2Q::golden().density(),
            &SettingsSet::hardy(),
        )),
        FunctionalKind::Chsh => {
            let state = PureState2Q::schmidt(FRAC_PI_4, 0.0)?;
            let settings = SettingsSet::from_angles(0.0, FRAC_PI_4, FRAC_PI_8, -FRAC_PI_8)?;
            Ok(born_table(&state.density(), &settings))
        }
    }
}

fn run_oracle(args: OracleArgs) -> Result<()> {
    // The parser treats a requirement on `ell` as satisfied by any member
    // of its mode group, so the pairing is enforced here.
    if args.sweep.is_some() && args.ell.is_none() {
        return Err(Error::InvalidArgument(
            "--sweep needs --ell: random models live at one parameter value".into(),
        ));
    }
    let mut report = OracleReport {
        schema: "mdl-oracle/1",
        functional: args.functional.name(),
        ell: args.ell,
        max_value: None,
        argmax: None,
        threshold: None,
        sweep: None,
    };
    if let Some(l) = args.ell {
        let ell = MdlParameter::new(l)?;
        let f = functional_for(args.functional, ell);
        let (value, vertex) = oracle::maximize(&f, ell);
        report.max_value = Some(value);
        report.argmax = Some(VertexOut::from_vertex(&vertex));
        if let Some(count) = args.sweep {
            let seed = args.seed.expect("clap ties --sweep to --seed");
            let max_value = oracle::random_model_sweep(&f, ell, count, args.components, seed);
            report.sweep = Some(SweepOut {
                count,
                max_components: args.components,
                seed,
                max_value,
            });
        }
    }
    if args.threshold {
        let table = quantum_reference(args.functional)?;
        let joint = JointDistribution::uniform_inputs(&table);
        report.threshold = Some(oracle::threshold(
            |ell| functional_for(args.functional, ell),
            |ell| evaluate(&functional_for(args.functional, ell), &joint),
        )?);
    }
    emit_json(&report, args.output.as_deref())
}

#[derive(Serialize)]
struct TomoReport {
    schema: &'static str,
    flux: f64,
    /// Smallest eigenvalue of the linear-inversion estimate before the
    /// physicality projection.
    pre_projection_min_eigenvalue: f64,
    eigenvalues: [f64; 4],
    rho_re: [[f64; 4]; 4],
    rho_im: [[f64; 4]; 4],
    fidelity_to_golden: Option<f64>,
}

/// Loads a tomography counts table: `.json` sidecar first, inline `# {...}`
/// metadata otherwise.
fn load_tomography(path: &Path) -> Result<(TomographyProtocol, TomographyData)> {
    if path.with_extension("json").exists() {
        return TomographyData::load(path);
    }
    let body = std::fs::read_to_string(path)?;
    let meta_line = body
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with('#'))
        .ok_or_else(|| {
            Error::InvalidData(
                "no tomography metadata: provide a `.json` sidecar or a leading `# {...}` line"
                    .into(),
            )
        })?;
    let meta: TomographyMetadata = serde_json::from_str(meta_line.trim_start_matches('#').trim())?;
    if meta.protocol != "james16" {
        return Err(Error::InvalidProtocol(format!(
            "unknown tomography protocol `{}`",
            meta.protocol
        )));
    }
    Ok((
        TomographyProtocol::james16(),
        TomographyData::from_csv_str(&body)?,
    ))
}

fn run_tomo(args: TomoArgs) -> Result<()> {
    if let Some(path) = &args.input {
        require_path(path)?;
        let (protocol, data) = load_tomography(path)?;
        let golden_density;
        let target = match args.target {
            TargetKind::Golden => {
                golden_density = PureState2Q::golden().density();
                Some(&golden_density)
            }
            TargetKind::None => None,
        };
        let result = tomography::reconstruct(&protocol, &data, target)?;
        let m = result.rho.matrix();
        let report = TomoReport {
            schema: "mdl-tomo/1",
            flux: tomography::flux_estimate(&protocol, &data)?,
            pre_projection_min_eigenvalue: result.pre_projection_min_eigenvalue,
            eigenvalues: result.rho.eigenvalues(),
            rho_re: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)].re)),
            rho_im: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)].im)),
            fidelity_to_golden: result.fidelity_to_target,
        };
        return emit_json(&report, args.output.as_deref());
    }
    let protocol = TomographyProtocol::james16();
    let state = args.state.resolve(true)?;
    let rho = state.density()?;
    let flux = args.flux.expect("clap ties the counts modes to --flux");
    let data = if args.simulate {
        let seed = args.seed.expect("clap ties --simulate to --seed");
        tomography::simulate_counts(&protocol, &rho, flux, seed)?
    } else {
        tomography::exact_counts(&protocol, &rho, flux)?
    };
    match args.output.as_deref() {
        Some(path) => data.save(path),
        None => {
            let meta = serde_json::to_string(&TomographyMetadata {
                protocol: "james16".into(),
            })?;
            emit_text(&format!("# {meta}\n{}", data.to_csv_string()), None)
        }
    }
}

#[derive(Serialize)]
struct PointDegrees {
    chi: f64,
    a0: f64,
    a1: f64,
    b0: f64,
    b1: f64,
}

impl PointDegrees {
    fn from_point(p: &ParameterPoint) -> Self {
        let scale = 180.0 / std::f64::consts::PI;
        Self {
            chi: p.chi * scale,
            a0: p.theta_a0 * scale,
            a1: p.theta_a1 * scale,
            b0: p.theta_b0 * scale,
            b1: p.theta_b1 * scale,
        }
    }
}

#[derive(Serialize)]
struct OptimizeReport {
    schema: &'static str,
    visibility: f64,
    objective: Objective,
    tied: bool,
    n_starts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    best: ParameterPoint,
    best_degrees: PointDegrees,
    objective_value: f64,
    degenerate: bool,
    evaluations: u64,
    /// Per-start local optima in start order.
    trace: Vec<TraceEntry>,
}

fn run_optimize(args: OptimizeArgs) -> Result<()> {
    let objective = match args.objective {
        ObjectiveKind::CriticalEll => Objective::CriticalEll,
        ObjectiveKind::Penalized => Objective::Penalized { kappa: args.kappa },
    };
    let spec = ObjectiveSpec::new(args.visibility, objective)?;
    let (result, tied, n_starts) = if args.start_hardy {
        let result = optimizer::optimize_from(&spec, &ParameterPoint::hardy_point())?;
        (result, true, 1)
    } else {
        let seed = args.seed.expect("clap requires --seed without --start-hardy");
        let result = optimizer::optimize(&spec, args.tied, args.starts, seed)?;
        (result, args.tied, args.starts)
    };
    let report = OptimizeReport {
        schema: "mdl-optimize/1",
        visibility: args.visibility,
        objective,
        tied,
        n_starts,
        seed: if args.start_hardy { None } else { args.seed },
        best: result.best,
        best_degrees: PointDegrees::from_point(&result.best),
        objective_value: result.objective_value,
        degenerate: result.degenerate,
        evaluations: result.evaluations,
        trace: result.trace,
    };
    emit_json(&report, args.output.as_deref())
}
