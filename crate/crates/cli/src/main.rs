mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

/// Self-similar blow-up profiles of u_t = (u^m)_xx + |x|^sigma u.
#[derive(Parser, Debug)]
#[command(name = "blowup", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Similarity exponents alpha and beta.
    #[command(allow_negative_numbers = true)]
    Exponents {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Explicit profile at sigma_* sampled on a uniform grid.
    #[command(allow_negative_numbers = true)]
    Explicit {
        #[arg(long)]
        m: f64,
        /// Number of grid rows.
        #[arg(long, default_value_t = 512)]
        n: usize,
        /// Blow-up time followed by sample times, e.g. `1,0,0.5,0.9`.
        #[arg(long, value_delimiter = ',')]
        time_slices: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Backward shoot from an interface at eta.
    #[command(allow_negative_numbers = true)]
    ShootBack {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        eta: f64,
        #[command(flatten)]
        ctrl: CtrlArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Forward shoot from the origin with f ~ c xi^((sigma+2)/(m-1)).
    #[command(allow_negative_numbers = true)]
    ShootOrigin {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        c: f64,
        #[command(flatten)]
        ctrl: CtrlArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Good profile by bisection on the interface point.
    #[command(allow_negative_numbers = true)]
    FindProfile {
        #[command(flatten)]
        params: ParamArgs,
        /// Interface bracket `lo,hi`; found automatically when absent.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        bracket: Option<Vec<f64>>,
        #[command(flatten)]
        ctrl: CtrlArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Classification of forward shoots over a grid of origin coefficients.
    #[command(allow_negative_numbers = true)]
    ScanC {
        #[command(flatten)]
        params: ParamArgs,
        /// `log:a:b:n` (n values from 10^a to 10^b) or a comma list.
        #[arg(long, default_value = "log:-2:2:25")]
        grid: String,
        /// Bisect the first Tail/TransversalZero bracket for the interface profile.
        #[arg(long)]
        refine: bool,
        #[command(flatten)]
        ctrl: CtrlArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Regime report for each sigma of a grid.
    #[command(allow_negative_numbers = true)]
    ScanSigma {
        #[arg(long)]
        m: f64,
        /// `lin:a:b:n`, `log:a:b:n` or a comma list of sigma values.
        #[arg(long)]
        sigma_grid: String,
        /// Grid of origin coefficients, same syntax as in `scan-c`.
        #[arg(long, default_value = "log:-2:2:25")]
        grid: String,
        #[command(flatten)]
        ctrl: CtrlArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Phase-space orbit out of P2 or P0, continued in profile variables.
    #[command(allow_negative_numbers = true)]
    PhaseOrbit {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum)]
        from: Source,
        /// Offset along the unstable direction of P2.
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        /// Slope Z/X of the orbit out of P0.
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Starting X on the center manifold of P0.
        #[arg(long, default_value_t = 1e-4)]
        x0: f64,
        /// X below which the orbit is handed over to profile variables.
        #[arg(long, default_value_t = 1e-3)]
        x_handoff: f64,
        #[command(flatten)]
        ctrl: CtrlArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Source {
    #[value(name = "P2")]
    P2,
    #[value(name = "P0")]
    P0,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    #[arg(long)]
    pub m: f64,
    #[arg(long, required_unless_present = "sigma_star", conflicts_with = "sigma_star")]
    pub sigma: Option<f64>,
    /// Use sigma = sqrt(2(m+1)).
    #[arg(long)]
    pub sigma_star: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CtrlArgs {
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Lower xi cutoff of backward runs.
    #[arg(long)]
    pub xi_min: Option<f64>,
    /// Z at which forward runs stop.
    #[arg(long)]
    pub z_cut: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output format; defaults to csv for `explicit` and json otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
