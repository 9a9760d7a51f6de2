use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use sfvqd_cli::commands::{self, Status, ValidationFailed};
use sfvqd_cli::manifest::{Manifest, OneOrMany};
use sfvqd_core::vqd::{Method, Mode};

#[derive(Parser)]
#[command(name = "sfvqd", version, about = "Spin-filtered variational quantum deflation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run deflation over every fixture, method and layer count in a manifest.
    Run(RunArgs),
    /// Tabulate exact sector energies.
    Reference {
        #[arg(required = true)]
        fixtures: Vec<PathBuf>,
        /// Total spin to tabulate (repeatable); all compatible spins by default.
        #[arg(long = "spin")]
        spins: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        states: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Screen an exact eigenstate and compare with the closed-form pass mass.
    Probe {
        fixture: PathBuf,
        #[arg(long)]
        spin: f64,
        #[arg(long, allow_hyphen_values = true)]
        mz: f64,
        /// Which eigenstate of that (S, m_z), lowest first.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Load fixtures and check their symmetries.
    Validate {
        #[arg(required = true)]
        fixtures: Vec<PathBuf>,
        /// Accept unknown top-level fields.
        #[arg(long)]
        lenient: bool,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra fixtures, added to those in the manifest.
    fixtures: Vec<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Method to run (repeatable): VQD/SP, VQD/SSP or sfVQD/SSP.
    #[arg(long = "method")]
    methods: Vec<Method>,
    /// Layer count (repeatable).
    #[arg(long = "layers")]
    layers: Vec<usize>,
    #[arg(long)]
    states: Option<usize>,
    /// Switch to shot mode with this many shots per term.
    #[arg(long)]
    shots: Option<usize>,
    /// Penalty factor for spin-invalid ancilla outcomes.
    #[arg(long, allow_hyphen_values = true)]
    penalty: Option<f64>,
}

fn manifest_from(args: RunArgs) -> Result<Manifest> {
    let mut m = match &args.config {
        Some(path) => Manifest::load(path).map_err(|e| ValidationFailed(format!("{e:#}")))?,
        None => Manifest::empty(),
    };
    m.fixtures.extend(args.fixtures);
    if let Some(seed) = args.seed {
        m.config.seed = seed;
    }
    if let Some(out) = args.out {
        m.out = out;
    }
    if args.jobs.is_some() {
        m.jobs = args.jobs;
    }
    if !args.methods.is_empty() {
        m.config.method = OneOrMany::Many(args.methods);
    }
    if !args.layers.is_empty() {
        m.config.layers = OneOrMany::Many(args.layers);
    }
    if let Some(n) = args.states {
        m.config.n_states = n;
    }
    if let Some(n) = args.shots {
        m.config.mode = Mode::Shot;
        m.config.n_shot = n;
    }
    if let Some(c) = args.penalty {
        m.config.c_penalty = c;
    }
    Ok(m)
}

fn dispatch(cli: Cli) -> Result<Status> {
    match cli.command {
        Cmd::Run(args) => commands::run(&manifest_from(args)?),
        Cmd::Reference {
            fixtures,
            spins,
            states,
            out,
        } => commands::reference(&fixtures, &spins, states, out.as_deref()),
        Cmd::Probe {
            fixture,
            spin,
            mz,
            index,
        } => commands::probe(&fixture, spin, mz, index),
        Cmd::Validate { fixtures, lenient } => commands::validate(&fixtures, lenient),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("warning: some states did not converge");
            ExitCode::from(3)
        }
        Ok(Status::Mismatch) => {
            eprintln!("error: pass mass differs from the closed form");
            ExitCode::from(1)
        }
        Err(e) if e.downcast_ref::<ValidationFailed>().is_some() => {
            eprintln!("validation failed: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
