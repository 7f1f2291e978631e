//! Command-line interface.
//!
//! Exit codes: 0 success, 1 numeric failure (including failed checks),
//! 2 usage or input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{self, DEFAULT_SERIES_ORDER};
use crate::law::{IncrementLaw, Orientation};
use crate::montecarlo::{self, SimConfig};
use crate::oracle::{self, DpConfig, TailTable};
use crate::output::{CsvCell, CsvTable, Meta};
use crate::rates::{self, MdpConstants, RatePoint};
use crate::verify::{self, Suite, VerifyReport};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "RECORD_WALK_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "record-walk", version, about = "Weak-record deviation rates for skip-free random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct LawArgs {
    /// Law file (JSON).
    #[arg(long)]
    law: PathBuf,
    /// Override the orientation stored in the law file.
    #[arg(long, value_enum)]
    orientation: Option<OrientationArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrientationArg {
    Right,
    Left,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::Right => Orientation::Right,
            OrientationArg::Left => Orientation::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Dp,
    Renewal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SeriesKind {
    /// Coefficients of the law's generating function.
    Phi,
    /// Minimal fixed point `h`.
    H,
    /// Return-time p.m.f.
    Tau,
    /// Return probabilities `P(S̄_m = 0)`.
    Returns,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    HLimits,
    LambdaLimits,
    Legendre,
    OracleEquivalence,
    Tauberian,
    LdpTrend,
    MdpConstants,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a law file and print its canonical form.
    Validate {
        #[command(flatten)]
        law: LawArgs,
    },
    /// Large-deviation rate at a record density (JSON) or over a grid (CSV).
    Rate {
        #[command(flatten)]
        law: LawArgs,
        /// Record density `x_rec` in (0, 1].
        #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
        x: Option<f64>,
        /// Grid `a:b:n` of record densities.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Moderate-deviation constants.
    Mdp {
        #[command(flatten)]
        law: LawArgs,
        /// Estimate (alpha, c) by regression instead of closed forms.
        #[arg(long)]
        numeric: bool,
    },
    /// Exact tail probabilities of the record count.
    Oracle {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "dp")]
        mode: Mode,
        #[arg(long)]
        kmax: Option<usize>,
        /// Level cap of the DP (default n, which is exact).
        #[arg(long)]
        level_cap: Option<usize>,
    },
    /// Monte Carlo tail estimates.
    Simulate {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        paths: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        kmax: Option<usize>,
        /// Worker threads (capped by RECORD_WALK_THREADS).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Power-series coefficients as CSV.
    Series {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, value_enum)]
        kind: SeriesKind,
        #[arg(long, default_value_t = DEFAULT_SERIES_ORDER)]
        order: usize,
    },
    /// Run a check suite; exits 1 if any check fails.
    Verify {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, value_enum)]
        suite: SuiteArg,
    },
}

/// JSON document with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub meta: Meta,
    pub result: T,
}

pub type RateDocument = Envelope<RatePoint>;
pub type MdpDocument = Envelope<MdpConstants>;
pub type VerifyDocument = Envelope<Vec<VerifyReport>>;
pub type LawDocument = Envelope<IncrementLaw>;

fn json<T: Serialize>(meta: Meta, result: T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { meta, result }).expect("serializable output");
    s.push('\n');
    s
}

/// Worker count: the request (or all cores), capped by [`THREADS_ENV`].
pub fn worker_count(requested: Option<usize>) -> usize {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0);
    let w = requested.unwrap_or(default).max(1);
    cap.map_or(w, |c| w.min(c))
}

fn load_law(args: &LawArgs) -> Result<IncrementLaw> {
    let text = std::fs::read_to_string(&args.law)?;
    let law = IncrementLaw::from_json(&text)?;
    Ok(match args.orientation {
        Some(o) => law.with_orientation(o.into()),
        None => law,
    })
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Input(format!("grid must be a:b:n, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts[..] else { return Err(bad()) };
    let a: f64 = a.parse().map_err(|_| bad())?;
    let b: f64 = b.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn tail_csv(meta: Meta, table: &TailTable) -> String {
    let mut csv = CsvTable::new(meta, &["k", "tail_prob", "error_bound", "provenance"]);
    for (k, &p) in table.entries.iter().enumerate() {
        csv.push(vec![
            CsvCell::Int(k as i64),
            CsvCell::Real(p),
            CsvCell::Real(table.error_bound),
            CsvCell::Text(table.provenance.as_str().into()),
        ]);
    }
    csv.render()
}

/// Output of a successful command and whether its checks passed.
struct Outcome {
    text: String,
    passed: bool,
}

impl From<String> for Outcome {
    fn from(text: String) -> Self {
        Self { text, passed: true }
    }
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Validate { law } => {
            let law = load_law(&law)?;
            Ok(json(Meta::new(&law), law).into())
        }
        Command::Rate { law, x, grid } => {
            let law = load_law(&law)?;
            let meta = Meta::new(&law);
            match (x, grid) {
                (Some(x), _) => Ok(json(meta, rates::rate_point(&law, x)?).into()),
                (None, Some(grid)) => {
                    let mut csv = CsvTable::new(meta, &["x_rec", "x", "lambda", "Lambda", "Lambda_star", "ldp_rate"]);
                    for x_rec in parse_grid(&grid)? {
                        let p = rates::rate_point(&law, x_rec)?;
                        csv.push(
                            [p.x_rec, p.x, p.lambda, p.cumulant, p.legendre.as_f64(), p.ldp_rate.as_f64()]
                                .into_iter()
                                .map(CsvCell::Real)
                                .collect(),
                        );
                    }
                    Ok(csv.render().into())
                }
                (None, None) => Err(Error::Input("one of --x or --grid is required".into())),
            }
        }
        Command::Mdp { law, numeric } => {
            let law = load_law(&law)?;
            let k = if numeric {
                rates::mdp_constants_numeric(&law)?
            } else {
                rates::mdp_constants(&law)?
            };
            Ok(json(Meta::new(&law), k).into())
        }
        Command::Oracle {
            law,
            n,
            mode,
            kmax,
            level_cap,
        } => {
            let law = load_law(&law)?;
            let kmax = kmax.unwrap_or(n);
            let table = match mode {
                Mode::Dp => {
                    let kernel = oracle::build_kernel(&law, level_cap.unwrap_or(n))?;
                    let config = DpConfig {
                        kmax: Some(kmax),
                        ..DpConfig::default()
                    };
                    oracle::exact_an_distribution(&kernel, n, &config)?
                }
                Mode::Renewal => oracle::renewal_distribution(&law, n, kmax)?,
            };
            let mut meta = Meta::new(&law);
            if table.truncated_mass > 0.0 {
                meta = meta.with_note(format!("exact-for-truncated-law;moved-mass={:e}", table.truncated_mass));
            }
            Ok(tail_csv(meta, &table).into())
        }
        Command::Simulate {
            law,
            n,
            paths,
            seed,
            kmax,
            workers,
        } => {
            let law = load_law(&law)?;
            let config = SimConfig {
                n,
                paths,
                seed,
                workers: worker_count(workers),
            };
            let table = montecarlo::empirical_tail(&law, &config, kmax.unwrap_or(n))?;
            let intervals = table.intervals.as_deref().unwrap_or_default();
            let mut csv = CsvTable::new(Meta::new(&law).with_seed(seed), &["k", "estimate", "ci_lo", "ci_hi"]);
            for (k, (&e, &(lo, hi))) in table.entries.iter().zip(intervals).enumerate() {
                csv.push(vec![CsvCell::Int(k as i64), CsvCell::Real(e), CsvCell::Real(lo), CsvCell::Real(hi)]);
            }
            Ok(csv.render().into())
        }
        Command::Series { law, kind, order } => {
            let law = load_law(&law)?;
            let coeffs = match kind {
                SeriesKind::Phi => law.expand_coefficients(order).into_coeffs(),
                SeriesKind::H => fixed_point::h_series(&law, order)?.into_coeffs(),
                SeriesKind::Tau => oracle::tau_pmf(&law, order)?.into_coeffs(),
                SeriesKind::Returns => oracle::return_prob_partial_sums(&law, order)?.u,
            };
            let mut csv = CsvTable::new(Meta::new(&law), &["index", "coefficient"]);
            for (i, c) in coeffs.into_iter().enumerate().take(order + 1) {
                csv.push(vec![CsvCell::Int(i as i64), CsvCell::Real(c)]);
            }
            Ok(csv.render().into())
        }
        Command::Verify { law, suite } => {
            let law = load_law(&law)?;
            let suites: Vec<Suite> = match suite {
                SuiteArg::HLimits => vec![Suite::HLimits],
                SuiteArg::LambdaLimits => vec![Suite::LambdaLimits],
                SuiteArg::Legendre => vec![Suite::Legendre],
                SuiteArg::OracleEquivalence => vec![Suite::OracleEquivalence],
                SuiteArg::Tauberian => vec![Suite::Tauberian],
                SuiteArg::LdpTrend => vec![Suite::LdpTrend],
                SuiteArg::MdpConstants => vec![Suite::MdpConstants],
                SuiteArg::All => Suite::ALL.to_vec(),
            };
            let reports = suites
                .into_iter()
                .map(|s| verify::run_suite(&law, s))
                .collect::<Result<Vec<_>>>()?;
            let passed = reports.iter().all(|r| r.passed);
            Ok(Outcome {
                text: json(Meta::new(&law), reports),
                passed,
            })
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Convergence(_) | Error::SeriesInstability { .. } | Error::Memory { .. } | Error::Regression(_) => {
            EXIT_NUMERIC
        }
        Error::InvalidLaw(_) | Error::Domain { .. } | Error::Input(_) | Error::Io(_) | Error::Json(_) => EXIT_USAGE,
    }
}

/// Parses `args` (program name first), writes the result to `out` and
/// diagnostics to `err`, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command) {
        Ok(outcome) => {
            if out.write_all(outcome.text.as_bytes()).is_err() {
                return EXIT_USAGE;
            }
            if outcome.passed {
                EXIT_OK
            } else {
                let _ = writeln!(err, "one or more checks failed");
                EXIT_NUMERIC
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
