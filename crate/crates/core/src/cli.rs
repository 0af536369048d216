//! Command-line front end. `run` parses arguments, dispatches and returns the
//! process exit code; the `qcausal` binary is a thin wrapper around it.
//!
//! Exit codes: 0 success, 1 property failure, 2 usage or parse error, 3 solver failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    gate_zoo, load_gate_file, Channel, ChannelError, GateSpec, SystemDims, UnitaryGate,
};
use crate::diamond::{
    causal_influence, check_lemma1, signalling, BoundReport, QuantifierError, QuantifierResult,
    BOUND_SLACK, CERTIFICATION_TOL, DEFAULT_TOL,
};
use crate::linalg::ComplexMatrix;
use crate::random::{haar_unitary, random_channel, random_pure_state, rng_from_seed};
use crate::witness::{
    cnot_causal_witness, dephasing_gap, dephasing_gap_direct, sign_label, sm_cnot, sm_cnot_sdp,
    OUTPUT_SIGNS, PROBE_SIGNS,
};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Agreement required between the witness bound and the SDP value of `C(Cnot)`.
pub const CROSS_CHECK_TOL: f64 = 1e-3;
/// Agreement required between the two dephasing-gap evaluations.
pub const DEPHASING_TOL: f64 = 1e-9;
pub const DEPHASING_STATES: usize = 100;
pub const CSV_HEADER: &str = "family,theta,s_value,s_gap,c_value,c_gap,lower_ok,upper_ok,wall_ms";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Property(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Solver(_) => EXIT_SOLVER,
            Self::Property(_) => EXIT_PROPERTY,
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<QuantifierError> for CliError {
    fn from(e: QuantifierError) -> Self {
        match e {
            QuantifierError::Channel(c) => Self::Usage(c.to_string()),
            QuantifierError::Precondition(m) => Self::Usage(m),
            other => Self::Solver(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "qcausal",
    version,
    about = "Signalling and causal-influence quantifiers for bipartite gates",
    long_about = "Computes the signalling quantifier S(U) and the causal-influence quantifier C(U) of \
                  bipartite unitaries by semidefinite programming, checks the bounds between them, and \
                  reproduces the CNOT witness.\n\nExit codes: 0 success, 1 property failure, 2 usage or \
                  parse error, 3 solver failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute S and/or C for one gate.
    Quantify(QuantifyArgs),
    /// Tabulate S and C across a one-parameter gate family as CSV.
    Sweep(SweepArgs),
    /// Run the verification suites and print a pass/fail table.
    Verify(VerifyArgs),
    /// Reproduce the analytic CNOT witness for C = 2.
    Witness(WitnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Signalling,
    Causal,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cz,
    Pswap,
}

impl Family {
    pub fn gate(self, theta: f64) -> GateSpec {
        match self {
            Self::Cz => GateSpec::Cz(theta),
            Self::Pswap => GateSpec::PartialSwap(theta),
        }
    }
}

#[derive(Debug, Args)]
pub struct QuantifyArgs {
    /// Gate name (identity, cnot, swap, cz, pswap, local) or `file:<path>` to a JSON gate file.
    #[arg(long)]
    pub gate: String,
    /// Angle for cz and pswap.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Seed for the Haar-random factors of `local` (ChaCha8, U_A drawn before U_B).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Which::Both)]
    pub which: Which,
    /// Relative duality-gap target of each SDP.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub out: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    /// Number of evenly spaced angles, endpoints included (at least 2).
    #[arg(long)]
    pub steps: usize,
    /// Accepted for a uniform interface; the cz and pswap families involve no sampling.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// CSV destination; `-` writes to stdout.
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum concurrent solves (0 uses every core). Rows stay in angle order.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Record wall-clock milliseconds per row; without it `wall_ms` is 0 so files are reproducible.
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Number of Haar-random gates; the product and channel suites use half as many (rounded up).
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Master seed. Haar gates use ChaCha8 seeded with `seed`, product gates `seed + 1`,
    /// lemma channels `seed + 2` and dephasing states `seed + 3`.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write every case as CSV to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Maximum concurrent solves (0 uses every core).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    /// Only `cnot` has an analytic witness.
    #[arg(long, default_value = "cnot")]
    pub gate: String,
    /// Emit JSON, including the four density matrices.
    #[arg(long)]
    pub json: bool,
    /// Also solve the causal-influence SDP and compare it with the bound.
    #[arg(long)]
    pub cross_check: bool,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_SUCCESS
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Quantify(a) => cmd_quantify(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Witness(a) => cmd_witness(&a, out),
    };
    match result {
        Ok(()) => EXIT_SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))
}

/// Resolves `--gate`: a zoo name, `local`, or `file:<path>`.
pub fn resolve_gate(
    name: &str,
    theta: Option<f64>,
    seed: u64,
) -> Result<(String, UnitaryGate), CliError> {
    if let Some(path) = name.strip_prefix("file:") {
        return Ok((name.to_string(), load_gate_file(Path::new(path))?));
    }
    let spec = if name.eq_ignore_ascii_case("local") {
        let mut rng = rng_from_seed(seed);
        let ua = haar_unitary(&mut rng, 2);
        let ub = haar_unitary(&mut rng, 2);
        GateSpec::Local(ua, ub)
    } else {
        GateSpec::parse(name, theta)?
    };
    Ok((spec.label(), gate_zoo(&spec)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueGap {
    pub value: f64,
    pub gap: f64,
}

impl From<&QuantifierResult> for ValueGap {
    fn from(r: &QuantifierResult) -> Self {
        Self {
            value: r.value,
            gap: r.gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantifyReport {
    pub gate: String,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none")]
    pub s: Option<ValueGap>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<ValueGap>,
    /// Present only when both quantifiers were computed.
    pub bounds_ok: Option<bool>,
}

pub fn quantify(
    gate_label: &str,
    gate: &UnitaryGate,
    which: Which,
    tol: f64,
) -> Result<QuantifyReport, CliError> {
    let s = match which {
        Which::Signalling | Which::Both => Some(ValueGap::from(&signalling(gate, tol)?)),
        Which::Causal => None,
    };
    let c = match which {
        Which::Causal | Which::Both => Some(ValueGap::from(&causal_influence(gate, tol)?)),
        Which::Signalling => None,
    };
    let bounds_ok = match (s, c) {
        (Some(s), Some(c)) => {
            Some(BoundReport::from_values(s.value, s.gap, c.value, c.gap, BOUND_SLACK).all_ok())
        }
        _ => None,
    };
    Ok(QuantifyReport {
        gate: gate_label.to_string(),
        s,
        c,
        bounds_ok,
    })
}

pub fn cmd_quantify(args: &QuantifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let (label, gate) = resolve_gate(&args.gate, args.theta, args.seed)?;
    let report = quantify(&label, &gate, args.which, args.tol)?;
    let w = |e: std::io::Error| CliError::Usage(e.to_string());
    match args.out {
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            writeln!(out, "{text}").map_err(w)?;
        }
        OutputFormat::Text => {
            writeln!(out, "gate: {}", report.gate).map_err(w)?;
            if let Some(s) = report.s {
                writeln!(out, "S = {:.9} (gap {:.2e})", s.value, s.gap).map_err(w)?;
            }
            if let Some(c) = report.c {
                writeln!(out, "C = {:.9} (gap {:.2e})", c.value, c.gap).map_err(w)?;
            }
            if let Some(ok) = report.bounds_ok {
                writeln!(out, "bounds: {}", if ok { "ok" } else { "VIOLATED" }).map_err(w)?;
            }
        }
    }
    Ok(())
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub family: Family,
    pub theta: f64,
    pub s_value: f64,
    pub s_gap: f64,
    pub c_value: f64,
    pub c_gap: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub wall_ms: u64,
}

impl SweepRecord {
    /// Flags recomputed from the stored values with `BOUND_SLACK`.
    pub fn bounds(&self) -> BoundReport {
        BoundReport::from_values(
            self.s_value,
            self.s_gap,
            self.c_value,
            self.c_gap,
            BOUND_SLACK,
        )
    }
}

/// `steps` evenly spaced angles from `from` to `to`, both included.
pub fn sweep_angles(from: f64, to: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                to
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

/// Evaluates the family on `sweep_angles`, in parallel on `threads` workers.
/// Records come back in angle order.
pub fn sweep(
    family: Family,
    from: f64,
    to: f64,
    steps: usize,
    threads: usize,
    timing: bool,
    tol: f64,
) -> Result<Vec<SweepRecord>, CliError> {
    if steps < 2 {
        return Err(CliError::Usage(format!(
            "--steps must be at least 2, got {steps}"
        )));
    }
    if !from.is_finite() || !to.is_finite() {
        return Err(CliError::Usage("angles must be finite".into()));
    }
    let angles = sweep_angles(from, to, steps);
    let pool = thread_pool(threads)?;
    pool.install(|| {
        angles
            .par_iter()
            .map(|&theta| {
                let start = Instant::now();
                let gate = gate_zoo(&family.gate(theta))?;
                let s = signalling(&gate, tol)?;
                let c = causal_influence(&gate, tol)?;
                let b = BoundReport::from_values(s.value, s.gap, c.value, c.gap, BOUND_SLACK);
                Ok(SweepRecord {
                    family,
                    theta,
                    s_value: s.value,
                    s_gap: s.gap,
                    c_value: c.value,
                    c_gap: c.gap,
                    lower_ok: b.lower_ok,
                    upper_ok: b.upper_ok,
                    wall_ms: if timing {
                        start.elapsed().as_millis() as u64
                    } else {
                        0
                    },
                })
            })
            .collect()
    })
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], sink: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let to_stdout = args.out.as_os_str() == "-";
    // open the destination first so an unwritable path fails before any solve
    let file = if to_stdout {
        None
    } else {
        Some(std::fs::File::create(&args.out).map_err(|e| io_error(&args.out, e))?)
    };
    let records = sweep(
        args.family,
        args.from,
        args.to,
        args.steps,
        args.threads,
        args.timing,
        args.tol,
    )?;
    let csv_err = |e: csv::Error| CliError::Usage(format!("{}: {e}", args.out.display()));
    match file {
        Some(f) => {
            write_sweep_csv(&records, f).map_err(csv_err)?;
            writeln!(
                out,
                "wrote {} rows to {}",
                records.len(),
                args.out.display()
            )
            .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        None => write_sweep_csv(&records, &mut *out).map_err(csv_err)?,
    }
    let bad: Vec<String> = records
        .iter()
        .filter(|r| !(r.lower_ok && r.upper_ok))
        .map(|r| r.theta.to_string())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Property(format!(
            "bounds violated at theta = {}",
            bad.join(", ")
        )))
    }
}

/// One case of the verification suites. The meaning of `value` and
/// `reference` depends on the suite:
///
/// | suite      | value              | reference                |
/// |------------|--------------------|--------------------------|
/// | bounds     | S                  | C                        |
/// | zero       | S                  | C                        |
/// | lemma      | squared distance   | 4 × marginal distance    |
/// | witness    | certified bound    | 2                        |
/// | sm         | SDP value          | analytic value           |
/// | dephasing  | closed form        | direct trace norm        |
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub suite: &'static str,
    pub case: String,
    pub value: f64,
    pub reference: f64,
    /// Largest duality gap among the programs behind this row (0 without an SDP).
    pub gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySummary {
    pub rows: Vec<VerifyRow>,
}

impl VerifySummary {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn max_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.gap).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `(suite, cases, passed)` in first-appearance order.
    pub fn table(&self) -> Vec<(&'static str, usize, usize)> {
        let mut out: Vec<(&'static str, usize, usize)> = Vec::new();
        for r in &self.rows {
            let idx = match out.iter().position(|(s, _, _)| *s == r.suite) {
                Some(i) => i,
                None => {
                    out.push((r.suite, 0, 0));
                    out.len() - 1
                }
            };
            out[idx].1 += 1;
            out[idx].2 += usize::from(r.pass);
        }
        out
    }
}

enum VerifyCase {
    Bounds(String, UnitaryGate),
    Zero(String, UnitaryGate),
    Lemma(String, Channel),
}

fn zoo_cases() -> Vec<(String, GateSpec)> {
    let mut rng = rng_from_seed(0);
    let ua = haar_unitary(&mut rng, 2);
    let ub = haar_unitary(&mut rng, 2);
    [
        GateSpec::Identity,
        GateSpec::Cnot,
        GateSpec::Swap,
        GateSpec::Cz(1.0),
        GateSpec::PartialSwap(std::f64::consts::FRAC_PI_4),
        GateSpec::Local(ua, ub),
    ]
    .into_iter()
    .map(|g| (g.label(), g))
    .collect()
}

fn verify_cases(trials: usize, seed: u64) -> Vec<VerifyCase> {
    let half = trials.div_ceil(2);
    let mut cases = Vec::new();
    let mut rng = rng_from_seed(seed);
    for k in 0..trials {
        let u = haar_unitary(&mut rng, 4);
        let g = UnitaryGate::bipartite(2, 2, 2, 2, u).expect("Haar unitary");
        cases.push(VerifyCase::Bounds(format!("haar-{k}"), g));
    }
    for (label, spec) in zoo_cases() {
        cases.push(VerifyCase::Bounds(
            label,
            gate_zoo(&spec).expect("zoo gate"),
        ));
    }
    let mut rng = rng_from_seed(seed.wrapping_add(1));
    for k in 0..half {
        let ua = haar_unitary(&mut rng, 2);
        let ub = haar_unitary(&mut rng, 2);
        let g = gate_zoo(&GateSpec::Local(ua, ub)).expect("product gate");
        cases.push(VerifyCase::Zero(format!("product-{k}"), g));
    }
    let mut rng = rng_from_seed(seed.wrapping_add(2));
    for k in 0..half {
        let rank = rng.gen_range(1..=4);
        let ch = random_channel(&mut rng, SystemDims::square([2, 2]), rank);
        cases.push(VerifyCase::Lemma(format!("channel-{k}-rank-{rank}"), ch));
    }
    cases
}

fn run_case(case: &VerifyCase) -> Result<VerifyRow, QuantifierError> {
    Ok(match case {
        VerifyCase::Bounds(name, g) => {
            let s = signalling(g, DEFAULT_TOL)?;
            let c = causal_influence(g, DEFAULT_TOL)?;
            let b = BoundReport::from_values(s.value, s.gap, c.value, c.gap, BOUND_SLACK);
            let gap = s.gap.max(c.gap);
            VerifyRow {
                suite: "bounds",
                case: name.clone(),
                value: s.value,
                reference: c.value,
                gap,
                pass: b.all_ok() && gap <= CERTIFICATION_TOL,
            }
        }
        VerifyCase::Zero(name, g) => {
            let s = signalling(g, DEFAULT_TOL)?;
            let c = causal_influence(g, DEFAULT_TOL)?;
            let gap = s.gap.max(c.gap);
            VerifyRow {
                suite: "zero",
                case: name.clone(),
                value: s.value,
                reference: c.value,
                gap,
                pass: s.value <= CERTIFICATION_TOL
                    && c.value <= CERTIFICATION_TOL
                    && gap <= CERTIFICATION_TOL,
            }
        }
        VerifyCase::Lemma(name, ch) => {
            let r = check_lemma1(ch, BOUND_SLACK)?;
            VerifyRow {
                suite: "lemma",
                case: name.clone(),
                value: r.lhs,
                reference: r.rhs,
                gap: r.gap,
                pass: r.ok && r.gap <= CERTIFICATION_TOL,
            }
        }
    })
}

/// Runs every suite; rows are ordered by suite then case regardless of `threads`.
pub fn verify(trials: usize, seed: u64, threads: usize) -> Result<VerifySummary, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let cases = verify_cases(trials, seed);
    let pool = thread_pool(threads)?;
    let mut rows: Vec<VerifyRow> =
        pool.install(|| cases.par_iter().map(run_case).collect::<Result<_, _>>())?;

    let w = cnot_causal_witness();
    rows.push(VerifyRow {
        suite: "witness",
        case: "cnot".into(),
        value: w.certified_lower_bound,
        reference: 2.0,
        gap: 0.0,
        pass: w.holds() && (w.certified_lower_bound - 2.0).abs() <= 1e-12,
    });

    let analytic = sm_cnot();
    let cert = sm_cnot_sdp(DEFAULT_TOL)?;
    rows.push(VerifyRow {
        suite: "sm",
        case: "cnot".into(),
        value: cert.value,
        reference: analytic,
        gap: cert.gap,
        pass: analytic == 1.0
            && (cert.value - analytic).abs() <= CERTIFICATION_TOL
            && cert.gap <= CERTIFICATION_TOL,
    });

    let mut rng = rng_from_seed(seed.wrapping_add(3));
    for k in 0..DEPHASING_STATES {
        let psi = random_pure_state(&mut rng, 4);
        let formula = dephasing_gap(&psi).expect("normalized state");
        let direct = dephasing_gap_direct(&psi).expect("normalized state");
        rows.push(VerifyRow {
            suite: "dephasing",
            case: format!("state-{k}"),
            value: formula,
            reference: direct,
            gap: 0.0,
            pass: (formula - direct).abs() <= DEPHASING_TOL,
        });
    }
    Ok(VerifySummary { rows })
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let file = match &args.report {
        Some(path) => Some((
            path,
            std::fs::File::create(path).map_err(|e| io_error(path, e))?,
        )),
        None => None,
    };
    let summary = verify(args.trials, args.seed, args.threads)?;
    if let Some((path, f)) = file {
        summary
            .write_csv(f)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    let w = |e: std::io::Error| CliError::Usage(e.to_string());
    writeln!(
        out,
        "{:<10} {:>6} {:>6}  result",
        "suite", "cases", "passed"
    )
    .map_err(w)?;
    for (suite, cases, passed) in summary.table() {
        let verdict = if cases == passed { "PASS" } else { "FAIL" };
        writeln!(out, "{suite:<10} {cases:>6} {passed:>6}  {verdict}").map_err(w)?;
    }
    for r in summary.rows.iter().filter(|r| !r.pass) {
        writeln!(
            out,
            "failed: {} {} value={} reference={} gap={:.2e}",
            r.suite, r.case, r.value, r.reference, r.gap
        )
        .map_err(w)?;
    }
    writeln!(out, "max duality gap: {:.2e}", summary.max_gap()).map_err(w)?;
    if summary.all_pass() {
        writeln!(out, "overall: PASS").map_err(w)?;
        Ok(())
    } else {
        writeln!(out, "overall: FAIL").map_err(w)?;
        Err(CliError::Property("verification failed".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Vec<Vec<JsonComplex>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| JsonComplex {
                    re: m[(i, j)].re,
                    im: m[(i, j)].im,
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub sdp_value: f64,
    pub sdp_gap: f64,
    pub difference: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessJson {
    pub gate: String,
    pub probe: String,
    pub output: String,
    pub output_residual: f64,
    pub factorized_residual: f64,
    pub certified_lower_bound: f64,
    pub probe_state: Vec<Vec<JsonComplex>>,
    pub true_output: Vec<Vec<JsonComplex>>,
    pub bprime_marginal_true: Vec<Vec<JsonComplex>>,
    pub bprime_marginal_factorized: Vec<Vec<JsonComplex>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheck>,
}

fn format_small(m: &ComplexMatrix) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = (0..m.ncols())
                .map(|j| format!("{:+.4}", m[(i, j)].re))
                .collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

pub fn cmd_witness(args: &WitnessArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !args.gate.eq_ignore_ascii_case("cnot") {
        return Err(CliError::Usage(format!(
            "no analytic witness for gate '{}'; only cnot is supported",
            args.gate
        )));
    }
    let report = cnot_causal_witness();
    let cross_check = if args.cross_check {
        let gate = gate_zoo(&GateSpec::Cnot)?;
        let c = causal_influence(&gate, DEFAULT_TOL)?;
        let difference = (c.value - report.certified_lower_bound).abs();
        Some(CrossCheck {
            sdp_value: c.value,
            sdp_gap: c.gap,
            difference,
            agrees: difference <= CROSS_CHECK_TOL,
        })
    } else {
        None
    };
    let w = |e: std::io::Error| CliError::Usage(e.to_string());
    if args.json {
        let doc = WitnessJson {
            gate: "cnot".into(),
            probe: sign_label(&PROBE_SIGNS),
            output: sign_label(&OUTPUT_SIGNS),
            output_residual: report.output_residual,
            factorized_residual: report.factorized_residual,
            certified_lower_bound: report.certified_lower_bound,
            probe_state: matrix_to_json(&report.probe_state),
            true_output: matrix_to_json(&report.true_output),
            bprime_marginal_true: matrix_to_json(&report.bprime_marginal_true),
            bprime_marginal_factorized: matrix_to_json(&report.bprime_marginal_factorized),
            cross_check: cross_check.clone(),
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&doc).expect("report serializes")
        )
        .map_err(w)?;
    } else {
        writeln!(
            out,
            "probe state (E, A-bar, A', B'): {}",
            sign_label(&PROBE_SIGNS)
        )
        .map_err(w)?;
        writeln!(
            out,
            "output state under I_E x T(cnot): {} (residual {:.1e})",
            sign_label(&OUTPUT_SIGNS),
            report.output_residual
        )
        .map_err(w)?;
        writeln!(
            out,
            "B' marginal, cnot:        {}",
            format_small(&report.bprime_marginal_true)
        )
        .map_err(w)?;
        writeln!(
            out,
            "B' marginal, any T' x I:  {} (max deviation {:.1e})",
            format_small(&report.bprime_marginal_factorized),
            report.factorized_residual
        )
        .map_err(w)?;
        writeln!(
            out,
            "certified lower bound on C(cnot): {:?}",
            report.certified_lower_bound
        )
        .map_err(w)?;
        if let Some(cc) = &cross_check {
            writeln!(
                out,
                "cross-check: SDP C(cnot) = {:.9} (gap {:.1e}), difference {:.1e}: {}",
                cc.sdp_value,
                cc.sdp_gap,
                cc.difference,
                if cc.agrees { "agree" } else { "DISAGREE" }
            )
            .map_err(w)?;
        }
    }
    if !report.holds() {
        return Err(CliError::Property("witness assertions failed".into()));
    }
    match cross_check {
        Some(cc) if !cc.agrees => Err(CliError::Property(format!(
            "witness bound and SDP differ by {:.3e}",
            cc.difference
        ))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("qcausal").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn angles_include_endpoints() {
        let a = sweep_angles(0.0, std::f64::consts::PI, 5);
        assert_eq!(a.len(), 5);
        assert_eq!(a[0], 0.0);
        assert_eq!(a[4], std::f64::consts::PI);
        assert!((a[2] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_str(&["quantify"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["quantify", "--gate", "toffoli"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["quantify", "--gate", "cz"]).0, EXIT_USAGE);
        assert_eq!(
            run_str(&["quantify", "--gate", "file:/nonexistent/gate.json"]).0,
            EXIT_USAGE
        );
        assert_eq!(run_str(&["verify", "--trials", "0"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["witness", "--gate", "swap"]).0, EXIT_USAGE);
        assert_eq!(
            run_str(&[
                "sweep", "--family", "cz", "--from", "0", "--to", "1", "--steps", "1", "--out", "-"
            ])
            .0,
            EXIT_USAGE
        );
        assert_eq!(run_str(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["--help"]).0, EXIT_SUCCESS);
    }

    #[test]
    fn help_documents_seeding() {
        let (_, out, _) = run_str(&["verify", "--help"]);
        assert!(out.contains("ChaCha8"));
    }

    #[test]
    fn quantify_signalling_json_shape() {
        let (code, out, _) = run_str(&["quantify", "--gate", "swap", "--which", "signalling"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["gate"], "swap");
        assert!(v["S"]["value"].as_f64().unwrap() >= 1.0 - 1e-6);
        assert!(v["S"]["gap"].is_number());
        assert!(v.get("C").is_none());
        assert!(v["bounds_ok"].is_null());
    }

    #[test]
    fn witness_text_mentions_states_and_bound() {
        let (code, out, _) = run_str(&["witness", "--gate", "cnot"]);
        assert_eq!(code, 0);
        assert!(out.contains("|++-->"));
        assert!(out.contains("|+-++>"));
        assert!(out.contains("2.0"));
    }

    #[test]
    fn witness_json_has_four_matrices() {
        let (code, out, _) = run_str(&["witness", "--json"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        for key in [
            "probe_state",
            "true_output",
            "bprime_marginal_true",
            "bprime_marginal_factorized",
        ] {
            assert!(v[key].is_array(), "{key}");
        }
        assert_eq!(v["probe_state"].as_array().unwrap().len(), 16);
        assert_eq!(v["bprime_marginal_true"].as_array().unwrap().len(), 2);
        assert_eq!(v["certified_lower_bound"].as_f64().unwrap(), 2.0);
    }

    #[test]
    fn empty_sweep_still_has_header() {
        let mut buf = Vec::new();
        write_sweep_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
    }
}
