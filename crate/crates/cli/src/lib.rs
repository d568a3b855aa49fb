//! Command-line front end: `analyze`, `check`, `reduce`, `simulate` and
//! `demo`. [`run`] executes one command line and returns its exit code
//! (0 certified or done, 1 check failed, 2 bad input).

pub mod commands;
pub mod demo;
pub mod error;
pub mod files;
pub mod json;
pub mod report;
pub mod signal;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use error::CliError;
pub use files::SystemFile;
pub use report::ReportFile;

/// Absolute rank cutoff overriding the default policy.
pub const TOL_ENV: &str = "DESCR_SWITCH_TOL";

#[derive(Debug, Parser)]
#[command(
    name = "descr-switch",
    version,
    about = "Stability analysis of switched descriptor systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index, consistency space and stability of every mode
    Analyze {
        system: PathBuf,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a GUES test
    Check {
        system: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Lyapunov matrix (or one per mode) for theorem1, as JSON rows
        #[arg(long = "P", value_name = "FILE")]
        p: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Order reduction through E_i = X_i Y_i'; also writes <out>.lift.json
    Reduce {
        system: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a trajectory and write it as CSV
    Simulate {
        system: PathBuf,
        /// hybrid:T=0.2, periodic:T1=..,T2=.. or event[:surface]
        #[arg(long)]
        signal: String,
        /// Initial state, comma separated
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, num_args = 2, value_names = ["T0", "T1"], allow_hyphen_values = true, default_values_t = [0.0, 10.0])]
        tspan: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Initial mode
        #[arg(long, default_value_t = 0)]
        mode: usize,
        /// Trajectory CSV (stdout when absent)
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        events_csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run a built-in reference system end to end
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        /// Also write the system file of the demo
        #[arg(long)]
        emit_system: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Auto,
    Theorem1,
    Rank,
    Spectral01,
    Spectral12,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Theorem1 => "theorem1",
            Method::Rank => "rank",
            Method::Spectral01 => "spectral01",
            Method::Spectral12 => "spectral12",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    Mechanical,
    Example2,
    Example3,
}

/// Output streams of a command.
pub struct Output<'a> {
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

impl Output<'_> {
    pub fn out(&mut self, text: &str) {
        let _ = self.stdout.write_all(text.as_bytes());
    }

    pub fn err(&mut self, text: &str) {
        let _ = self.stderr.write_all(text.as_bytes());
    }
}

fn rank_override() -> Result<Option<f64>, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => Ok(Some(t)),
            _ => Err(CliError::Usage(format!("{TOL_ENV}={v:?} is not a non-negative number"))),
        },
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: Cli, io: &mut Output) -> Result<i32, CliError> {
    let rank = rank_override()?;
    match cli.command {
        Command::Analyze { system, out } => commands::analyze(&system, out.as_deref(), rank, io),
        Command::Check { system, method, p, out } => {
            commands::check(&system, method, p.as_deref(), out.as_deref(), rank, io)
        }
        Command::Reduce { system, out } => commands::reduce(&system, &out, rank, io),
        Command::Simulate {
            system,
            signal,
            x0,
            tspan,
            dt,
            mode,
            csv,
            events_csv,
            svg,
        } => commands::simulate_cmd(
            &commands::SimulateArgs {
                path: &system,
                signal: &signal,
                x0: &x0,
                tspan: (tspan[0], tspan[1]),
                dt,
                mode,
                csv: csv.as_deref(),
                events_csv: events_csv.as_deref(),
                svg: svg.as_deref(),
            },
            rank,
            io,
        ),
        Command::Demo { name, emit_system } => demo::demo(name, emit_system.as_deref(), io),
    }
}

/// Runs one command line (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut io = Output { stdout, stderr };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                io.err(&text);
                2
            } else {
                io.out(&text);
                0
            };
        }
    };
    match dispatch(cli, &mut io) {
        Ok(code) => code,
        Err(e) => {
            io.err(&format!("error: {e}\n"));
            e.exit_code()
        }
    }
}
