//! Command-line front end. [`run`] is what the `dqkd` binary calls; it
//! returns the process exit code: 0 on success, 1 when a verification or
//! statistical check fails, 2 on usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::galois::{FieldError, FieldSpec, MAX_ORDER};
use crate::montecarlo::{
    analytic_scan, qdc_curve, run_session_with, run_transcript, scan_dimensions, wilson_interval,
    write_qdc_csv, write_scan_csv, ScanSettings, SessionCounters, SessionStats,
};
use crate::mub::{MubTable, SignConvention};
use crate::pauli::{verify_appendix_with, CheckStatus};
use crate::protocol::{write_transcript, EveStrategy, KeySchedule, ProtocolConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dqkd",
    version,
    about = "MUB verification and two-way d-ary QKD simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check pairwise unbiasedness of all d+1 bases
    VerifyMub {
        #[command(flatten)]
        dim: DimArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Run the operator identity suite exhaustively
    VerifyAppendix {
        #[command(flatten)]
        dim: DimArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Build the bases without the sign correction (negative control)
        #[arg(long)]
        wrong_sign: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Simulate a session and write its statistics as JSON
    Simulate(SimulateArgs),
    /// Detection probability across dimensions
    Scan(ScanArgs),
    /// Probability that Eve eavesdrops I bits undetected, as a function of I
    Qdc(QdcArgs),
    /// Dump the full basis table as JSON
    ExportMub {
        #[command(flatten)]
        dim: DimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Dimension as `--d` or as `--p` with optional `--m`.
#[derive(Debug, Args, Clone, Copy)]
pub struct DimArgs {
    #[arg(long, conflicts_with_all = ["p", "m"], required_unless_present = "p")]
    pub d: Option<u64>,
    #[arg(long)]
    pub p: Option<u64>,
    #[arg(long, requires = "p")]
    pub m: Option<u32>,
}

impl DimArgs {
    /// Resolves to the canonical field. `p^m` must be a prime power.
    pub fn field(&self) -> Result<FieldSpec> {
        let d = match (self.d, self.p) {
            (Some(d), _) => d,
            (None, Some(p)) => {
                let m = self.m.unwrap_or(1);
                if m == 0 {
                    return Err(FieldError::BadDegree(0).into());
                }
                p.checked_pow(m)
                    .filter(|&d| d <= u64::from(MAX_ORDER))
                    .ok_or(FieldError::TooLarge(p.saturating_pow(m)))?
            }
            (None, None) => return Err(Error::InvalidConfig("give --d or --p".into())),
        };
        Ok(FieldSpec::with_order(d)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

fn parse_strategy(s: &str) -> Result<EveStrategy> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dim: DimArgs,
    #[arg(long, default_value_t = 100_000)]
    pub runs: u64,
    /// Probability of control mode
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    /// none, intercept-resend or controlled-shift
    #[arg(long, value_parser = parse_strategy, default_value = "none")]
    pub attack: EveStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write every run as JSON lines
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub independent_eve_bases: bool,
    /// Fixed message symbols (comma separated labels) instead of uniform ones
    #[arg(long, value_delimiter = ',')]
    pub message: Option<Vec<u64>>,
    /// Exit 1 unless the detection rate lies within 4σ of its closed form
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2u64, 3, 4, 5, 7, 8, 9, 11, 13, 16, 17, 19, 23, 25, 27, 29, 31, 32])]
    pub dims: Vec<u64>,
    /// Runs per dimension; 0 emits the closed form only
    #[arg(long, default_value_t = 0)]
    pub runs: u64,
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    #[arg(long, value_parser = parse_strategy, default_value = "controlled-shift")]
    pub attack: EveStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct QdcArgs {
    #[command(flatten)]
    pub dim: DimArgs,
    #[arg(long)]
    pub c: f64,
    /// Largest message size I in bits
    #[arg(long)]
    pub bits: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command, printing to
/// stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error raised while executing a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Field(_)
        | Error::InvalidConfig(_)
        | Error::UnknownStrategy(_)
        | Error::IndexOutOfRange { .. }
        | Error::DegenerateSeries => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn with_output<F>(out: Option<&Path>, stdout: &mut dyn Write, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            body(&mut w)?;
            w.flush()?;
        }
        None => body(stdout)?,
    }
    Ok(())
}

fn to_json_line<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn pass_fail(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::VerifyMub { dim, tol, format } => {
            let field = dim.field()?;
            check_tol(*tol)?;
            let report = MubTable::build(&field).verify(*tol);
            match format {
                ReportFormat::Json => stdout.write_all(to_json_line(&report)?.as_bytes())?,
                ReportFormat::Text => writeln!(
                    stdout,
                    "d={} (p={}, m={}) pairs={} max_deviation={:.3e} tol={:e} {}",
                    report.d,
                    report.p,
                    report.m,
                    report.pairs_checked,
                    report.max_deviation,
                    report.tol,
                    pass_fail(report.passed)
                )?,
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::VerifyAppendix {
            dim,
            tol,
            wrong_sign,
            format,
        } => {
            let field = dim.field()?;
            check_tol(*tol)?;
            let convention = if *wrong_sign {
                SignConvention::Uncorrected
            } else {
                SignConvention::Corrected
            };
            let report = verify_appendix_with(&field, *tol, convention)?;
            match format {
                ReportFormat::Json => stdout.write_all(to_json_line(&report)?.as_bytes())?,
                ReportFormat::Text => {
                    writeln!(
                        stdout,
                        "d={} (p={}, m={}) tol={:e}",
                        report.d, report.p, report.m, report.tol
                    )?;
                    for c in &report.checks {
                        match c.status {
                            CheckStatus::Skipped => {
                                writeln!(stdout, "{:<24} {}", c.name, c.note.unwrap_or("skipped"))?
                            }
                            status => writeln!(
                                stdout,
                                "{:<24} {:.3e} over {} cases {}",
                                c.name,
                                c.max_deviation.unwrap_or(0.0),
                                c.cases,
                                pass_fail(status == CheckStatus::Pass)
                            )?,
                        }
                    }
                    writeln!(stdout, "{}", pass_fail(report.passed))?;
                }
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Simulate(args) => simulate(args, stdout),
        Command::Scan(args) => scan(args, stdout),
        Command::Qdc(args) => {
            let field = args.dim.field()?;
            let curve = qdc_curve(args.c, field.order() as u64, args.bits, args.step)?;
            with_output(args.out.as_deref(), stdout, |w| {
                match args.format {
                    TableFormat::Csv => write_qdc_csv(&curve, w)?,
                    TableFormat::Json => w.write_all(to_json_line(&curve)?.as_bytes())?,
                }
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
        Command::ExportMub { dim, out } => {
            let field = dim.field()?;
            let export = MubTable::build(&field).to_export();
            with_output(out.as_deref(), stdout, |w| {
                serde_json::to_writer(&mut *w, &export)?;
                w.write_all(b"\n")?;
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

fn check_workers(workers: Option<usize>) -> Result<()> {
    match workers {
        Some(0) => Err(Error::InvalidConfig("--workers must be at least 1".into())),
        _ => Ok(()),
    }
}

fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let field = args.dim.field()?;
    let mut config = ProtocolConfig::new(field, args.c, args.attack, args.seed);
    config.independent_eve_bases = args.independent_eve_bases;
    if let Some(message) = &args.message {
        config.key_schedule = KeySchedule::Fixed(
            message
                .iter()
                .map(|&v| config.field.element(v))
                .collect::<Result<_, _>>()?,
        );
    }
    config.validate()?;
    check_workers(args.workers)?;
    if args.runs == 0 {
        return Err(Error::InvalidConfig("--runs must be at least 1".into()));
    }

    let tab = MubTable::build(&config.field);
    let stats = match &args.transcript {
        None => run_session_with(&config, &tab, args.runs, args.workers)?,
        Some(path) => {
            let records = run_transcript(&config, &tab, args.runs, args.workers)?;
            let mut w = BufWriter::new(File::create(path)?);
            write_transcript(&records, &mut w)?;
            w.flush()?;
            let counters = records
                .iter()
                .fold(SessionCounters::default(), |mut acc, r| {
                    acc.record(r);
                    acc
                });
            SessionStats::from_counters(&config, counters)?
        }
    };
    with_output(args.out.as_deref(), stdout, |w| {
        w.write_all(stats.to_json()?.as_bytes())?;
        Ok(())
    })?;

    if args.check {
        let n = stats.counters.n_control;
        let p = stats.expected_detection_rate();
        let sigma = (p * (1.0 - p) / n.max(1) as f64).sqrt();
        if (stats.pe_hat - p).abs() > 4.0 * sigma {
            let (lo, hi) = wilson_interval(stats.counters.n_detected, n, crate::montecarlo::Z_95);
            eprintln!(
                "detection rate {:.6} [{lo:.6}, {hi:.6}] is more than 4 sigma from {p:.6}",
                stats.pe_hat
            );
            return Ok(EXIT_FAILURE);
        }
    }
    Ok(EXIT_OK)
}

fn scan(args: &ScanArgs, stdout: &mut dyn Write) -> Result<i32> {
    if args.dims.is_empty() {
        return Err(Error::InvalidConfig("--dims is empty".into()));
    }
    check_workers(args.workers)?;
    let rows = if args.runs == 0 {
        analytic_scan(&args.dims)?
    } else {
        if !(args.c > 0.0 && args.c <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "control probability must lie in (0, 1], got {}",
                args.c
            )));
        }
        let settings = ScanSettings {
            runs: args.runs,
            c: args.c,
            attack: args.attack,
            seed: args.seed,
            workers: args.workers,
        };
        scan_dimensions(&args.dims, &settings)?
    };
    with_output(args.out.as_deref(), stdout, |w| {
        match args.format {
            TableFormat::Csv => write_scan_csv(&rows, w)?,
            TableFormat::Json => w.write_all(to_json_line(&rows)?.as_bytes())?,
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}
