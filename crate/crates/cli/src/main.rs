//! `ddxy`: command-line driver for the driven-dissipative XY lattice solvers.

mod commands;
mod config;
mod error;
mod oracle;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Settings;
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "ddxy",
    version,
    about = "Mean-field phases, quantum trajectories and Liouvillian gaps of a driven-dissipative XY lattice"
)]
pub struct Cli {
    /// TOML parameter file (flat dotted keys or nested tables).
    #[arg(long, global = true, env = "DDXY_CONFIG")]
    pub config: Option<PathBuf>,
    /// Master seed for every random number stream of the run.
    #[arg(long, global = true, env = "DDXY_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "DDXY_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DDXY_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Model parameters; rates are in units of γ unless `--gamma` is set.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    #[arg(long, env = "DDXY_J")]
    pub j: Option<f64>,
    #[arg(long, env = "DDXY_MU", allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long, env = "DDXY_OMEGA")]
    pub omega: Option<f64>,
    #[arg(long, env = "DDXY_GAMMA")]
    pub gamma: Option<f64>,
    /// `nn`, `infinite` or `mfz`.
    #[arg(long = "coupling", env = "DDXY_COUPLING")]
    pub coupling_kind: Option<String>,
    /// Number of cavities (`nn`, `infinite`).
    #[arg(long, env = "DDXY_N")]
    pub n: Option<usize>,
    /// Periodic boundary conditions (`nn`).
    #[arg(long, env = "DDXY_PERIODIC")]
    pub periodic: Option<bool>,
    /// Coordination number (`mfz`).
    #[arg(long, env = "DDXY_Z")]
    pub z: Option<usize>,
}

impl ModelArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("j", self.j);
        s.set_opt("mu", self.mu);
        s.set_opt("omega", self.omega);
        s.set_opt("gamma", self.gamma);
        s.set_opt("coupling.kind", self.coupling_kind.clone());
        s.set_opt("coupling.n", self.n);
        s.set_opt("coupling.periodic", self.periodic);
        s.set_opt("coupling.z", self.z);
    }
}

/// Rectangular (μ/γ, Ω/γ) grid.
#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub mu_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_max: Option<f64>,
    #[arg(long)]
    pub mu_steps: Option<usize>,
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    #[arg(long)]
    pub omega_steps: Option<usize>,
    /// Grid points per flushed chunk.
    #[arg(long)]
    pub chunk: Option<usize>,
    /// Keep rows already present in the output file and compute only the rest.
    #[arg(long)]
    pub resume: bool,
}

impl GridArgs {
    fn apply(&self, s: &mut Settings, section: &str) {
        s.set_opt(&format!("{section}.mu_min"), self.mu_min);
        s.set_opt(&format!("{section}.mu_max"), self.mu_max);
        s.set_opt(&format!("{section}.mu_steps"), self.mu_steps);
        s.set_opt(&format!("{section}.omega_min"), self.omega_min);
        s.set_opt(&format!("{section}.omega_max"), self.omega_max);
        s.set_opt(&format!("{section}.omega_steps"), self.omega_steps);
        s.set_opt(&format!("{section}.chunk"), self.chunk);
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Two-sublattice mean-field phase diagram over a (μ, Ω) grid.
    MfSweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Random initial states per point, in addition to vacuum and inverted.
        #[arg(long)]
        n_random: Option<usize>,
        /// Integration time per initial state, in units of 1/γ.
        #[arg(long)]
        t_total: Option<f64>,
        /// Transient discarded before attractor analysis, in units of 1/γ.
        #[arg(long)]
        transient: Option<f64>,
    },
    /// Linear stability of every uniform steady state.
    Stability {
        #[command(flatten)]
        model: ModelArgs,
        /// Wave numbers on [0, π].
        #[arg(long)]
        k_points: Option<usize>,
        /// Also evolve a noisy periodic chain of this many sites around each
        /// unstable branch (0 disables).
        #[arg(long)]
        chain_sites: Option<usize>,
    },
    /// Quantum-jump trajectories with ensemble and switching statistics.
    Trajectory {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        sample_dt: Option<f64>,
        /// Base RK4 step in units of 1/γ.
        #[arg(long)]
        dt: Option<f64>,
        /// Number of independent trajectories.
        #[arg(long)]
        count: Option<usize>,
        /// Burn-in before time averages, in units of 1/γ.
        #[arg(long)]
        burn_in: Option<f64>,
        /// Fail with the insufficient-statistics exit code when switching
        /// times cannot be extracted.
        #[arg(long)]
        switching: bool,
    },
    /// Liouvillian gap over a (μ, Ω) grid.
    Gap {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// `auto`, `permsym` or `dense`.
        #[arg(long)]
        solver: Option<String>,
    },
    /// Cross-validates the independent solvers against each other.
    OracleCheck {
        /// Replace every check's tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Corrupt the reference fixture of the named check (negative control).
        #[arg(long)]
        inject_fault: Option<String>,
        /// Only run checks whose name contains this string.
        #[arg(long)]
        only: Option<String>,
    },
    /// Auxiliary data for figures: `branches`, `limit-cycle` or `chain-profile`.
    PlotData {
        kind: String,
        #[command(flatten)]
        model: ModelArgs,
        /// Ω/γ range for `branches`.
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long)]
        omega_steps: Option<usize>,
        /// Chain length for `chain-profile`.
        #[arg(long)]
        sites: Option<usize>,
        /// Evolution time in units of 1/γ.
        #[arg(long)]
        t_final: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut settings = Settings::load(cli.config.as_deref())?;
    settings.set_opt("seed", cli.seed);
    let seed = settings.resolve("seed", 0u64)?;
    let ctx = commands::Context {
        out: cli.out.clone(),
        seed,
        threads: rayon::current_num_threads(),
    };
    match &cli.command {
        Command::MfSweep {
            model,
            grid,
            n_random,
            t_total,
            transient,
        } => {
            model.apply(&mut settings);
            grid.apply(&mut settings, "sweep");
            settings.set_opt("classify.n_random", *n_random);
            settings.set_opt("classify.t_total", *t_total);
            settings.set_opt("classify.transient", *transient);
            commands::mf_sweep(&ctx, &mut settings, grid.resume)
        }
        Command::Stability {
            model,
            k_points,
            chain_sites,
        } => {
            model.apply(&mut settings);
            settings.set_opt("stability.k_points", *k_points);
            settings.set_opt("stability.chain_sites", *chain_sites);
            commands::stability(&ctx, &mut settings)
        }
        Command::Trajectory {
            model,
            t_final,
            sample_dt,
            dt,
            count,
            burn_in,
            switching,
        } => {
            model.apply(&mut settings);
            settings.set_opt("trajectory.t_final", *t_final);
            settings.set_opt("trajectory.sample_dt", *sample_dt);
            settings.set_opt("trajectory.dt", *dt);
            settings.set_opt("trajectory.count", *count);
            settings.set_opt("trajectory.burn_in", *burn_in);
            commands::trajectory(&ctx, &mut settings, *switching)
        }
        Command::Gap {
            model,
            grid,
            solver,
        } => {
            model.apply(&mut settings);
            grid.apply(&mut settings, "gap");
            settings.set_opt("gap.solver", solver.clone());
            commands::gap(&ctx, &mut settings, grid.resume)
        }
        Command::OracleCheck {
            tolerance,
            inject_fault,
            only,
        } => {
            settings.set_opt("oracle.tolerance", *tolerance);
            settings.set_opt("oracle.inject_fault", inject_fault.clone());
            settings.set_opt("oracle.only", only.clone());
            oracle::run(&ctx, &mut settings)
        }
        Command::PlotData {
            kind,
            model,
            omega_min,
            omega_max,
            omega_steps,
            sites,
            t_final,
        } => {
            model.apply(&mut settings);
            settings.set_opt("plot.omega_min", *omega_min);
            settings.set_opt("plot.omega_max", *omega_max);
            settings.set_opt("plot.omega_steps", *omega_steps);
            settings.set_opt("plot.sites", *sites);
            settings.set_opt("plot.t_final", *t_final);
            commands::plot_data(&ctx, &mut settings, kind)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ddxy: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
