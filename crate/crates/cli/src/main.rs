#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use optigraph::benders::BendersConfig;
use optigraph::harness::{self, RunError, RunOptions, RunOutcome, SolveMode};
use optigraph::models::{tutorial_remote, StorageParams, ToyCemInstance, ToyCemParams};
use optigraph::remote::worker::run_tcp_worker;
use optigraph::remote::{BuildMode, Cluster, TransportKind};

#[derive(Parser)]
#[command(
    name = "optigraph",
    version,
    about = "Graph-structured optimization models, Benders decomposition and remote workers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Storage sizing and inventory model.
    Storage {
        #[command(subcommand)]
        action: StorageAction,
    },
    /// Toy capacity expansion model with weekly operations.
    Cem {
        #[command(subcommand)]
        action: CemAction,
    },
    /// Serve coordinator connections over TCP.
    Worker {
        #[arg(long)]
        listen: String,
    },
    /// Build the tutorial model on two workers and write the frame transcript.
    ProtocolDump {
        #[arg(long)]
        capture: PathBuf,
        #[arg(long, value_enum, default_value_t = Transport::Inproc)]
        transport: Transport,
    },
    /// Build the tutorial model on two workers and print its canonical dump.
    Tutorial,
}

#[derive(Subcommand)]
enum StorageAction {
    Solve {
        /// Number of periods.
        #[arg(long, default_value_t = 20)]
        periods: usize,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Subcommand)]
enum CemAction {
    Solve {
        #[arg(long, default_value_t = 3)]
        zones: usize,
        #[arg(long, default_value_t = 8)]
        weeks: usize,
        #[arg(long, default_value_t = 3)]
        techs: usize,
        /// Hours per week.
        #[arg(long, default_value_t = 4)]
        hours: usize,
        /// Build capacity in whole units.
        #[arg(long)]
        integer: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Monolithic,
    Benders,
    BendersRemote,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transport {
    Inproc,
    Tcp,
}

impl From<Transport> for TransportKind {
    fn from(t: Transport) -> Self {
        match t {
            Transport::Inproc => TransportKind::InProcess,
            Transport::Tcp => TransportKind::Tcp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Build {
    Batched,
    PerCall,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = Mode::Monolithic)]
    mode: Mode,
    /// Workers in remote mode, the main worker included.
    #[arg(long, env = "OPTIGRAPH_WORKERS", default_value_t = 3)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Transport::Inproc)]
    transport: Transport,
    /// Use running `worker --listen` daemons instead of spawning workers.
    #[arg(long, value_name = "ADDR")]
    connect: Vec<String>,
    #[arg(long, value_enum, default_value_t = Build::Batched)]
    build: Build,
    /// Relative Benders gap.
    #[arg(long, default_value_t = 1e-3)]
    gap: f64,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    /// Write the convergence trace (CSV) here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write zero instead of wall-clock seconds to the trace.
    #[arg(long)]
    no_timing: bool,
    /// Write the canonical model dump here.
    #[arg(long)]
    dump: Option<PathBuf>,
}

impl RunArgs {
    fn options(&self, benders: BendersConfig) -> Result<RunOptions, RunError> {
        if !(self.gap > 0.0) {
            return Err(RunError::Usage("--gap must be positive".into()));
        }
        Ok(RunOptions {
            mode: match self.mode {
                Mode::Monolithic => SolveMode::Monolithic,
                Mode::Benders => SolveMode::Benders,
                Mode::BendersRemote => SolveMode::BendersRemote,
            },
            workers: self.workers,
            transport: self.transport.into(),
            build: match self.build {
                Build::Batched => BuildMode::Batched,
                Build::PerCall => BuildMode::PerCall,
            },
            connect: self.connect.clone(),
            benders: BendersConfig {
                rel_gap: self.gap,
                max_iterations: self.max_iterations,
                ..benders
            },
            dump: self.dump.is_some(),
            ..RunOptions::default()
        })
    }
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|e| RunError::Usage(format!("writing {}: {e}", path.display())))
}

fn finish(out: RunOutcome, args: &RunArgs) -> Result<i32, RunError> {
    println!("status: {:?}", out.status);
    println!("objective: {}", out.objective);
    println!("variables: {}", out.columns);
    println!("constraints: {}", out.rows);
    if let Some(state) = &out.benders {
        println!("iterations: {}", state.iteration);
        println!("lower_bound: {}", state.lower_bound());
        println!("upper_bound: {}", state.upper_bound());
        println!("gap: {:.3e}", state.gap());
        if let Some(path) = &args.trace {
            write(path, &state.trace_csv(!args.no_timing))?;
        }
    } else if args.trace.is_some() {
        eprintln!("warning: no trace for a monolithic solve");
    }
    if let (Some(path), Some(dump)) = (&args.dump, &out.dump) {
        write(path, dump)?;
    }
    println!("seconds: {:.3}", out.seconds);
    Ok(harness::status_code(out.status))
}

fn run(cli: Cli) -> Result<i32, RunError> {
    match cli.command {
        Command::Storage {
            action: StorageAction::Solve { periods, run },
        } => {
            let p = StorageParams::with_periods(periods);
            let opts = run.options(harness::storage_benders_config(&p, run.gap))?;
            finish(harness::solve_storage(&p, &opts)?, &run)
        }
        Command::Cem {
            action:
                CemAction::Solve {
                    zones,
                    weeks,
                    techs,
                    hours,
                    integer,
                    seed,
                    run,
                },
        } => {
            let params = ToyCemParams {
                zones,
                weeks,
                techs,
                hours,
                integer_builds: integer,
                seed,
            };
            let inst = ToyCemInstance::generate(&params)?;
            if inst.seed_used != seed {
                eprintln!(
                    "warning: seed {seed} gave an infeasible instance, using seed {}",
                    inst.seed_used
                );
            }
            let opts = run.options(BendersConfig::default())?;
            finish(harness::solve_cem(&inst, &opts)?, &run)
        }
        Command::Worker { listen } => {
            let listener =
                TcpListener::bind(&listen).map_err(|e| RunError::Usage(format!("cannot listen on {listen}: {e}")))?;
            let addr = listener.local_addr().map(|a| a.to_string()).unwrap_or(listen);
            println!("listening on {addr}");
            run_tcp_worker(listener).map_err(|e| {
                RunError::Remote(optigraph::remote::RemoteError::Protocol(format!("worker stopped: {e}")))
            })?;
            Ok(0)
        }
        Command::ProtocolDump { capture, transport } => {
            let cluster = Cluster::new();
            cluster.spawn_workers(2, transport.into())?;
            let transcript = cluster.capture();
            let t = tutorial_remote(&cluster)?;
            t.rgraph.collect()?;
            cluster.stop_capture();
            write(&capture, &transcript.to_text())?;
            println!("{} frames written to {}", transcript.lines().len(), capture.display());
            Ok(0)
        }
        Command::Tutorial => {
            let cluster = Cluster::new();
            cluster.spawn_workers(2, TransportKind::InProcess)?;
            let t = tutorial_remote(&cluster)?;
            print!("{}", t.rgraph.collect()?.canonical_dump());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
