#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::{Failure, EXIT_CONFIG};

/// Normalized solutions of (-d^2/dx^2)^m u + lambda G'(u) = F'(u) with int K(u) = rho.
#[derive(Debug, Parser)]
#[command(name = "normsol", version)]
pub struct Cli {
    /// Model JSON: a power sum {"G": {"power": p}, "K": {"power": q}, "F": {"terms": [{"c": .., "r": ..}]}}
    /// or a builtin {"builtin": "cubic" | "quintic" | "sign-changing" | "cosine-gap", "p": ..}
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Output file [default: standard output]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format [default: csv for branch and profile, json otherwise]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Tolerance: quadrature relative tolerance for branch, solve-mass, profile and window
    /// [default: 1e-10]; residual tolerance for minimize [default: 1e-6]; stagnation
    /// tolerance for gn [default: 1e-12]; pass threshold for verify [default: 1e-6]
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample (lambda, m_lambda, rho_lambda) on a log-spaced lambda grid
    Branch {
        /// lo:hi:n, n points log-spaced in [lo, hi]
        #[arg(long)]
        lambda: String,
    },
    /// Find every lambda in range with rho_lambda = rho
    SolveMass {
        #[arg(long)]
        rho: f64,
        /// Search grid lo:hi:n
        #[arg(long, default_value = "1e-3:1e3:25")]
        lambda: String,
    },
    /// Export the soliton profile u_lambda on a uniform grid
    Profile {
        #[arg(long)]
        lambda: f64,
        /// Number of grid nodes (odd)
        #[arg(long, default_value_t = 2001)]
        nodes: usize,
        /// Half-width of the grid
        #[arg(long, default_value_t = 20.0)]
        x_max: f64,
    },
    /// Existence window in rho from the asymptotic limits and I_F
    Window,
    /// Constrained minimization of the energy at mass rho
    Minimize(MinimizeArgs),
    /// Estimate the sharp Gagliardo-Nirenberg constant C_p^p
    Gn {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        m: u32,
        /// Grid size (power of two)
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 40.0)]
        half_length: f64,
    },
    /// Nehari, Pohozaev and equipartition residuals of an exported profile or field
    Verify {
        /// CSV with columns x,u,du_dx (profile) or x,u (periodic field)
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1)]
        m: u32,
    },
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// sub: minimize over the mass ball; super: over the ball intersected with the
    /// Nehari-Pohozaev manifold
    #[arg(long, value_enum, default_value_t = Regime::Sub)]
    regime: Regime,
    /// Grid size (power of two)
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 40.0)]
    half_length: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Known C_{2+4m}^{2+4m}; estimated when needed and omitted
    #[arg(long)]
    gn_c: Option<f64>,
    /// Skip the structural hypotheses check
    #[arg(long)]
    skip_checks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regime {
    Sub,
    Super,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("normsol: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

impl Cli {
    fn require_model(&self) -> Result<normsol::model::NonlinearityModel, Failure> {
        let path = self.model.as_ref().ok_or_else(|| Failure::Config("--model is required for this command".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read model file {}: {e}", path.display())))?;
        let spec = normsol::model::ModelSpec::from_json(&text)?;
        Ok(spec.build()?)
    }
}
