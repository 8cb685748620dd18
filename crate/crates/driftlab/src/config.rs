use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use driftlab_core::barrier::BarrierParams;
use driftlab_core::examples::ExampleId;
use driftlab_core::solver::AxisymGrid;

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "driftlab", version, about = "Numerical lab for -Δu + b·∇u = 0 with singular drift")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Strong residuals of the closed-form examples at random points.
    Examples {
        #[arg(value_enum, default_value = "verify")]
        action: ExamplesAction,
        /// ex1..ex4 or all
        #[arg(long, default_value = "all")]
        id: String,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// One norm of an example's drift or solution, with its δ-trail.
    Norms {
        #[arg(long, default_value = "ex1")]
        id: String,
        #[arg(long, value_enum, default_value = "lp")]
        kind: NormChoice,
        #[arg(long, value_enum, default_value = "drift")]
        field: FieldChoice,
        /// Morrey exponent
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        alpha: f64,
    },
    /// Weak residuals (gradient and divergence forms) against five bumps.
    Weakform {
        #[arg(long, default_value = "all")]
        id: String,
    },
    /// Barrier construction checks.
    Barrier {
        #[arg(value_enum, default_value = "check")]
        action: BarrierAction,
    },
    /// Cutoff cylinder problem at one ε.
    Solve,
    /// Cutoff cylinder problem over a decreasing list of ε.
    Sweep,
    /// Examples, barrier and one solve in a single JSON object.
    Report,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExamplesAction {
    Verify,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BarrierAction {
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormChoice {
    Lp,
    W12,
    Orlicz,
    Morrey,
    Bmo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldChoice {
    Drift,
    Solution,
}

#[derive(Debug, Args)]
pub struct Opts {
    /// Space dimension
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Cutoff radius; a comma-separated list for `sweep`
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Vec<f64>,
    #[arg(long = "K", global = true, allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// Solver grid as NρxNz cells
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long, global = true)]
    pub quad_cells: Option<usize>,
    #[arg(long, global = true)]
    pub quad_order: Option<usize>,
    /// Innermost polar radius
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Write measured wall times into reports (otherwise 0, keeping files reproducible)
    #[arg(long, global = true)]
    pub timing: bool,
}

/// A flag that fails its precondition. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: String) -> Result<T, UsageError> {
    Err(UsageError(msg))
}

/// Validated settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub params: BarrierParams,
    pub eps: Vec<f64>,
    pub grid: Option<(usize, usize)>,
    pub quad_cells: Option<usize>,
    pub quad_order: Option<usize>,
    pub delta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub timing: bool,
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), UsageError> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if let [a, b] = parts[..] {
        if let (Ok(a), Ok(b)) = (a.trim().parse::<usize>(), b.trim().parse::<usize>()) {
            if a >= 2 && b >= 2 {
                return Ok((a, b));
            }
            return usage(format!("--grid {s}: both cell counts must be >= 2"));
        }
    }
    usage(format!("--grid {s}: expected NρxNz, e.g. 128x128"))
}

pub fn parse_ids(s: &str) -> Result<Vec<ExampleId>, UsageError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(ExampleId::ALL.to_vec());
    }
    match ExampleId::parse(s) {
        Some(id) => Ok(vec![id]),
        None => usage(format!("--id {s}: expected ex1, ex2, ex3, ex4 or all")),
    }
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, UsageError> {
        let o = &cli.opts;
        let (default_eps, default_format): (&[f64], Format) = match cli.command {
            Command::Sweep => (&[0.1, 0.05, 0.025], Format::Csv),
            Command::Solve => (&[0.1], Format::Json),
            Command::Barrier { .. } | Command::Report => (&[0.05], Format::Json),
            _ => (&[0.05], Format::Csv),
        };
        let eps = if o.eps.is_empty() { default_eps.to_vec() } else { o.eps.clone() };
        if !matches!(cli.command, Command::Sweep) && eps.len() != 1 {
            return usage("--eps takes a list only for sweep".into());
        }
        if eps.windows(2).any(|w| !(w[1] < w[0])) {
            return usage("--eps list must be strictly decreasing".into());
        }
        let d = BarrierParams::default();
        let params = BarrierParams {
            n: o.n.unwrap_or(d.n),
            mu: o.mu.unwrap_or(d.mu),
            eps: eps[0],
            p_target: o.p.unwrap_or(d.p_target),
            k: o.k.unwrap_or(d.k),
        };
        if let Some(n) = o.n {
            if n < 2 {
                return usage(format!("--n {n}: dimension must be >= 2"));
            }
        }
        if !(params.p_target >= 1.0) {
            return usage(format!("--p {}: must be >= 1", params.p_target));
        }
        let grid = o.grid.as_deref().map(parse_grid).transpose()?;
        if let Some(c) = o.quad_cells {
            if c < 2 {
                return usage(format!("--quad-cells {c}: must be >= 2"));
            }
        }
        if let Some(k) = o.quad_order {
            if !(1..=32).contains(&k) {
                return usage(format!("--quad-order {k}: must be in 1..=32"));
            }
        }
        let delta = o.delta.unwrap_or(1e-5);
        if !(delta > 0.0 && delta < 1e-2) {
            return usage(format!("--delta {delta}: must satisfy 0 < delta < 1e-2"));
        }
        let tol = o.tol.unwrap_or(1e-10);
        if !(tol > 0.0 && tol < 1.0) {
            return usage(format!("--tol {tol}: must satisfy 0 < tol < 1"));
        }
        let max_iter = o.max_iter.unwrap_or(20_000);
        if max_iter == 0 {
            return usage("--max-iter 0: must be >= 1".into());
        }
        let samples = o.samples.unwrap_or(10_000);
        if samples == 0 {
            return usage("--samples 0: must be >= 1".into());
        }
        Ok(RunConfig {
            n: o.n,
            params,
            eps,
            grid,
            quad_cells: o.quad_cells,
            quad_order: o.quad_order,
            delta,
            tol,
            max_iter,
            samples,
            seed: o.seed.unwrap_or(1),
            out: o.out.clone(),
            format: o.format.unwrap_or(default_format),
            timing: o.timing,
        })
    }

    /// Barrier parameters at each ε, checked against the construction's constraints.
    pub fn checked_params(&self) -> Result<Vec<BarrierParams>, UsageError> {
        self.eps
            .iter()
            .map(|&e| {
                let p = self.params.with_eps(e);
                p.validate().map(|_| p).map_err(|err| UsageError(err.to_string()))
            })
            .collect()
    }

    /// Solver grid for one ε: `--grid` if given (must satisfy h_z ≤ ε/4), else
    /// `max(128, ⌈4/ε⌉)` cells per direction.
    pub fn solve_grid(&self, eps: f64) -> Result<AxisymGrid, UsageError> {
        let (nr, nz) = match self.grid {
            Some(g) => g,
            None => {
                let c = 128usize.max((4.0 / eps - 1e-9).ceil() as usize);
                (c, c)
            }
        };
        let h_z = 1.0 / nz as f64;
        if h_z > eps / 4.0 * (1.0 + 1e-12) {
            return usage(format!("--grid {nr}x{nz}: h_z = {h_z} exceeds eps/4 = {} at eps = {eps}", eps / 4.0));
        }
        AxisymGrid::half(nr, nz).map_err(|e| UsageError(e.to_string()))
    }

    pub fn wall(&self, t: std::time::Duration) -> f64 {
        if self.timing {
            t.as_secs_f64()
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("128x64").unwrap(), (128, 64));
        assert!(parse_grid("128").is_err());
        assert!(parse_grid("1x4").is_err());
        assert!(parse_grid("ax4").is_err());
    }

    #[test]
    fn coarse_grid_is_a_usage_error() {
        let cli = Cli::parse_from(["driftlab", "solve", "--eps", "0.05", "--grid", "64x64"]);
        let cfg = RunConfig::from_cli(&cli).unwrap();
        assert!(cfg.solve_grid(0.05).unwrap_err().0.contains("eps/4"));
        assert_eq!(cfg.solve_grid(0.1).unwrap().n_z, 64);
    }

    #[test]
    fn eps_list_only_for_sweep() {
        let cli = Cli::parse_from(["driftlab", "solve", "--eps", "0.1,0.05"]);
        assert!(RunConfig::from_cli(&cli).is_err());
        let cli = Cli::parse_from(["driftlab", "sweep", "--eps", "0.05,0.1"]);
        assert!(RunConfig::from_cli(&cli).unwrap_err().0.contains("decreasing"));
    }

    #[test]
    fn small_k_is_rejected_by_name() {
        let cli = Cli::parse_from(["driftlab", "barrier", "check", "--K", "1"]);
        let cfg = RunConfig::from_cli(&cli).unwrap();
        assert!(cfg.checked_params().unwrap_err().0.contains("K"));
    }
}
