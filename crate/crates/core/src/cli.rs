//! Command-line front end: `run`, `oracle`, `compare` and `gen`.
//!
//! Reports go to the `out` writer as `key: value` lines, diagnostics to `err`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::oracle;
use crate::scenario::{generate_random_scenario, load_scenario, InitMode, Scenario};
use crate::trace::{write_gnuplot_script, write_trace_csv};
use crate::Engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InvalidInput = 1,
    NotConverged = 2,
    NumericalFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn from_error(e: &Error) -> Self {
        if e.is_numerical() {
            ExitStatus::NumericalFailure
        } else {
            ExitStatus::InvalidInput
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nbiot-alloc",
    version,
    about = "Distributed bandwidth allocation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the distributed engine on a scenario.
    Run {
        file: PathBuf,
        /// Write the per-round CSV trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write a gnuplot script plotting the trace.
        #[arg(long, requires = "trace")]
        gnuplot: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Solve the scenario centrally.
    Oracle { file: PathBuf },
    /// Run the engine and the oracle and report the gap.
    Compare {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate a random connected scenario.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol_consensus: Option<f64>,
    #[arg(long)]
    pub tol_constraint: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// demand | uniform | random
    #[arg(long)]
    pub init: Option<InitMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trace every K-th round.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario<f64>) -> Result<(), Error> {
        let o = &mut scenario.options;
        if let Some(v) = self.max_iters {
            o.max_iters = v;
        }
        if let Some(v) = self.tol_consensus {
            o.tol_consensus = v;
        }
        if let Some(v) = self.tol_constraint {
            o.tol_constraint = v;
        }
        if let Some(v) = self.init {
            o.init_mode = v;
        }
        if let Some(v) = self.seed {
            o.seed = Some(v);
        }
        if let Some(v) = self.eta {
            scenario.globals.eta = v;
        }
        if let Some(v) = self.mu {
            scenario.globals.mu = v;
        }
        scenario.validate()
    }
}

/// Plain decimal with at least six significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.6}");
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (5 - magnitude).clamp(6, 340) as usize;
    format!("{v:.decimals$}")
}

fn fmt_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_num(v))
        .collect::<Vec<_>>()
        .join(" ")
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

// Report output failures (closed pipes) are not worth a distinct exit path.
macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{ let _ = writeln!($w, $($arg)*); }};
}

fn fail(io: &mut Io<'_>, e: &Error) -> ExitStatus {
    say!(io.err, "error: {e}");
    ExitStatus::from_error(e)
}

fn load(path: &Path, overrides: Option<&Overrides>) -> Result<Scenario<f64>, Error> {
    let mut s = load_scenario(path)?;
    if let Some(o) = overrides {
        o.apply(&mut s)?;
    }
    Ok(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let mut io = Io { out, err };
    match &cli.command {
        Command::Run {
            file,
            trace,
            gnuplot,
            overrides,
        } => cmd_run(
            &mut io,
            file,
            trace.as_deref(),
            gnuplot.as_deref(),
            overrides,
        ),
        Command::Oracle { file } => cmd_oracle(&mut io, file),
        Command::Compare { file, overrides } => cmd_compare(&mut io, file, overrides),
        Command::Gen { n, seed, out } => cmd_gen(&mut io, *n, *seed, out.as_deref()),
    }
}

fn cmd_run(
    io: &mut Io<'_>,
    file: &Path,
    trace_path: Option<&Path>,
    gnuplot: Option<&Path>,
    overrides: &Overrides,
) -> ExitStatus {
    let scenario = match load(file, Some(overrides)) {
        Ok(s) => s,
        Err(e) => return fail(io, &e),
    };
    let result = match Engine::new(&scenario).and_then(|e| e.run(overrides.stride)) {
        Ok(r) => r,
        Err(e) => return fail(io, &e),
    };
    for w in &result.warnings {
        say!(io.err, "warning: {w}");
    }
    if let Some(path) = trace_path {
        let written = create(path).and_then(|f| {
            write_trace_csv(&result.trace, f).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })
        });
        if let Err(e) = written {
            return fail(io, &e);
        }
        if let Some(script) = gnuplot {
            let csv = path.display().to_string();
            let written = create(script).and_then(|f| {
                write_gnuplot_script(&csv, scenario.len(), f).map_err(|source| Error::Io {
                    path: script.display().to_string(),
                    source,
                })
            });
            if let Err(e) = written {
                return fail(io, &e);
            }
        }
    }
    say!(
        io.out,
        "confirmed_demands: {}",
        fmt_list(&result.confirmed.values)
    );
    say!(io.out, "allocations: {}", fmt_list(&result.allocations));
    say!(
        io.out,
        "allocation_total: {}",
        fmt_num(result.allocations.iter().sum())
    );
    say!(
        io.out,
        "consensus_value: {}",
        fmt_num(result.consensus_value)
    );
    say!(io.out, "iterations: {}", result.iterations_used);
    say!(io.out, "converged: {}", result.converged);
    say!(
        io.out,
        "consensus_residual: {}",
        fmt_num(result.consensus_residual)
    );
    say!(
        io.out,
        "constraint_residual: {}",
        fmt_num(result.constraint_residual)
    );
    if result.converged {
        ExitStatus::Success
    } else {
        say!(
            io.err,
            "error: not converged after {} iterations",
            result.iterations_used
        );
        ExitStatus::NotConverged
    }
}

fn cmd_oracle(io: &mut Io<'_>, file: &Path) -> ExitStatus {
    let solved = load(file, None).and_then(|s| {
        let engine = Engine::new(&s)?;
        let confirmed = engine.admit()?;
        let sol = oracle::solve(&s, &confirmed)?;
        Ok((confirmed, sol))
    });
    let (confirmed, sol) = match solved {
        Ok(v) => v,
        Err(e) => return fail(io, &e),
    };
    for w in &sol.warnings {
        say!(io.err, "warning: {w}");
    }
    say!(io.out, "confirmed_demands: {}", fmt_list(&confirmed.values));
    say!(io.out, "allocations: {}", fmt_list(&sol.allocations));
    match sol.lambda {
        Some(l) => say!(io.out, "lambda: {}", fmt_num(l)),
        None => say!(io.out, "lambda: n/a"),
    }
    say!(io.out, "objective: {}", fmt_num(sol.objective));
    ExitStatus::Success
}

fn cmd_compare(io: &mut Io<'_>, file: &Path, overrides: &Overrides) -> ExitStatus {
    let scenario = match load(file, Some(overrides)) {
        Ok(s) => s,
        Err(e) => return fail(io, &e),
    };
    let both = Engine::new(&scenario).and_then(|e| {
        let run = e.run(overrides.stride)?;
        let sol = oracle::solve(&scenario, &run.confirmed)?;
        Ok((run, sol))
    });
    let (run, sol) = match both {
        Ok(v) => v,
        Err(e) => return fail(io, &e),
    };
    let gaps: Vec<f64> = run
        .allocations
        .iter()
        .zip(&sol.allocations)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    let threshold = 10.0 * (scenario.options.tol_consensus + scenario.options.tol_constraint);

    say!(
        io.out,
        "confirmed_demands: {}",
        fmt_list(&run.confirmed.values)
    );
    say!(io.out, "engine_allocations: {}", fmt_list(&run.allocations));
    say!(io.out, "oracle_allocations: {}", fmt_list(&sol.allocations));
    for (i, g) in gaps.iter().enumerate() {
        say!(io.out, "gap[{i}]: {}", fmt_num(*g));
    }
    say!(io.out, "max_gap: {}", fmt_num(max_gap));
    say!(io.out, "gap_threshold: {}", fmt_num(threshold));
    say!(io.out, "consensus_value: {}", fmt_num(run.consensus_value));
    match sol.lambda {
        Some(l) => {
            say!(io.out, "lambda: {}", fmt_num(l));
            say!(
                io.out,
                "lambda_gap: {}",
                fmt_num((run.consensus_value - l).abs())
            );
        }
        None => say!(io.out, "lambda: n/a"),
    }
    say!(io.out, "iterations: {}", run.iterations_used);
    say!(io.out, "converged: {}", run.converged);

    if run.converged && max_gap <= threshold {
        ExitStatus::Success
    } else {
        say!(
            io.err,
            "error: converged={} max_gap={} threshold={}",
            run.converged,
            fmt_num(max_gap),
            fmt_num(threshold)
        );
        ExitStatus::NotConverged
    }
}

fn cmd_gen(io: &mut Io<'_>, n: usize, seed: u64, out: Option<&Path>) -> ExitStatus {
    let scenario = match generate_random_scenario::<f64>(n, seed) {
        Ok(s) => s,
        Err(e) => return fail(io, &e),
    };
    let json = scenario.to_json();
    match out {
        Some(path) => {
            if let Err(source) = std::fs::write(path, format!("{json}\n")) {
                let e = Error::Io {
                    path: path.display().to_string(),
                    source,
                };
                return fail(io, &e);
            }
        }
        None => say!(io.out, "{json}"),
    }
    ExitStatus::Success
}
