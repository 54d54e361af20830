//! `banditlab` — UCB1 experiments from the command line.
//!
//! Exit status: 0 on success, 1 on an audit/assertion failure or I/O error,
//! 2 on a usage error (unknown flags, unparsable numbers, inconsistent
//! dimensions, out-of-domain parameters).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use banditlab_cli::run::{
    self, canonical_gamma, default_alphas, fig_coverage_preset, fig_sweep_preset,
};
use banditlab_cli::{emit_table, render_table, Format, RunSpec, Table};

#[derive(Parser)]
#[command(
    name = "banditlab",
    version,
    about = "UCB1 bandit experiments: fixed-point solutions, Monte-Carlo sweeps, coverage and CLT studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    #[default]
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Number of arms (checked against --mu/--deltas when both are given)
    #[arg(long = "K")]
    k: Option<usize>,
    /// Arm means, comma separated (takes precedence over --deltas)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Option<Vec<f64>>,
    /// Sub-optimality gaps, comma separated; arm a gets mean -gap_a
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Noise scale sigma
    #[arg(long)]
    sigma: Option<f64>,
}

impl InstanceArgs {
    /// Resolves to (means, sigma), or a usage error message.
    fn resolve(&self) -> Result<(Vec<f64>, f64), String> {
        let mu = match (&self.mu, &self.deltas) {
            (Some(mu), _) => mu.clone(),
            (None, Some(deltas)) => deltas.iter().map(|d| 0.0 - d).collect(),
            (None, None) => return Err("specify the instance via --mu or --deltas".into()),
        };
        if let Some(k) = self.k {
            if k != mu.len() {
                return Err(format!(
                    "--K {} does not match the {} given means",
                    k,
                    mu.len()
                ));
            }
        }
        let sigma = self.sigma.ok_or("--sigma is required")?;
        Ok((mu, sigma))
    }
}

#[derive(Args, Debug)]
struct HorizonArgs {
    /// Horizon T (number of rounds)
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Exploration rate gamma (default: sqrt(2 ln T))
    #[arg(long)]
    gamma: Option<f64>,
}

impl HorizonArgs {
    fn resolve(&self) -> Result<(usize, f64), String> {
        let horizon = self.horizon.ok_or("--T is required")?;
        if horizon == 0 {
            return Err("--T must be at least 1".into());
        }
        Ok((
            horizon,
            self.gamma.unwrap_or_else(|| canonical_gamma(horizon)),
        ))
    }
}

#[derive(Args, Debug)]
struct McArgs {
    /// Monte-Carlo replicates B
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Base seed; replicate r derives its own seed from (seed, r)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores; the BANDITLAB_WORKERS environment
    /// variable overrides the default when this flag is absent)
    #[arg(long)]
    workers: Option<usize>,
}

impl McArgs {
    fn workers(&self) -> Option<usize> {
        self.workers.or_else(|| {
            std::env::var("BANDITLAB_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
    }
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
    /// Also write an SVG line plot next to --out (sweep and coverage only)
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the noiseless fixed point and report pull targets and regret
    Solve {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run one UCB1 trajectory and report per-arm statistics
    Simulate {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        /// RNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sweep the sub-optimality gap and tabulate MC regret vs theory
    Sweep {
        /// Preset: fig1 (K=2, sigma=0.1, T=3000, gaps 0.01..0.25, B=1000)
        #[arg(long, value_parser = ["fig1"])]
        preset: Option<String>,
        /// Number of arms (one optimal, K-1 at the swept gap)
        #[arg(long = "K")]
        k: Option<usize>,
        /// Noise scale sigma
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        horizon: HorizonArgs,
        /// Gap grid, comma separated
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Estimate confidence-interval coverage per arm and nominal level
    Coverage {
        /// Preset: fig2 (T=10000, mu=(1, 1-sqrt(ln T/T)), sigma=0.1, B=1000)
        #[arg(long, value_parser = ["fig2"])]
        preset: Option<String>,
        /// With --preset fig2: use the tiny rate sqrt(6 ln T / T) instead of
        /// the default sqrt(6 ln T)
        #[arg(long)]
        gamma_literal: bool,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        /// Nominal miscoverage levels, comma separated
        #[arg(long = "alpha", value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Build intervals from the pooled noise-scale estimate instead of
        /// the known sigma
        #[arg(long)]
        estimate_sigma: bool,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Collect the per-arm normalized-mean CLT statistic across replicates
    Clt {
        /// Preset: fig2 (T=10000, mu=(1, 1-sqrt(ln T/T)), sigma=0.1, B=1000)
        #[arg(long, value_parser = ["fig2"])]
        preset: Option<String>,
        /// With --preset fig2: use the tiny rate sqrt(6 ln T / T)
        #[arg(long)]
        gamma_literal: bool,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Ridge CLT statistic on the built-in rank-3 decision set (5 arms)
    Linear {
        /// Noise scale sigma
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[command(flatten)]
        horizon: HorizonArgs,
        /// Ridge penalty checked for invariance (alongside 0 and 1)
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Audit the comparison-sandwich inequalities over replicates
    Audit {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Estimate Gaussian partial-sum boundary-crossing probabilities
    Crossing {
        /// Horizon T
        #[arg(long = "T")]
        horizon: usize,
        /// Crossing levels x >= 1, comma separated
        #[arg(long = "x", value_delimiter = ',')]
        x_grid: Vec<f64>,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(MainError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(MainError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum MainError {
    Usage(String),
    Runtime(String),
}

impl From<String> for MainError {
    fn from(msg: String) -> Self {
        MainError::Usage(msg)
    }
}

impl From<&str> for MainError {
    fn from(msg: &str) -> Self {
        MainError::Usage(msg.to_string())
    }
}

impl From<banditlab::Error> for MainError {
    // Library errors are bad requests: wrong domain, dimensions, or configs.
    fn from(e: banditlab::Error) -> Self {
        MainError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for MainError {
    fn from(e: std::io::Error) -> Self {
        MainError::Runtime(e.to_string())
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, MainError> {
    let (outcome, out_args) = match cli.command {
        Command::Solve {
            instance,
            horizon,
            out,
        } => {
            let (mu, sigma) = instance.resolve()?;
            let (t, gamma) = horizon.resolve()?;
            (run::solve(mu, sigma, t, gamma)?, out)
        }
        Command::Simulate {
            instance,
            horizon,
            seed,
            out,
        } => {
            let (mu, sigma) = instance.resolve()?;
            let (t, gamma) = horizon.resolve()?;
            (run::simulate(mu, sigma, t, gamma, seed)?, out)
        }
        Command::Sweep {
            preset,
            k,
            sigma,
            horizon,
            deltas,
            mc,
            out,
        } => {
            let (mut pk, mut psigma, mut pt, mut pgamma, mut pdeltas, mut preps) =
                if preset.is_some() {
                    fig_sweep_preset()
                } else {
                    (0, 0.0, 0, 0.0, Vec::new(), mc.reps)
                };
            if preset.is_none() {
                pk = k.ok_or("--K is required (or use --preset fig1)")?;
                psigma = sigma.ok_or("--sigma is required (or use --preset fig1)")?;
                let (t, gamma) = horizon.resolve()?;
                pt = t;
                pgamma = gamma;
                pdeltas = deltas.ok_or("--deltas is required (or use --preset fig1)")?;
            } else {
                // Explicit flags override individual preset entries.
                if let Some(k) = k {
                    pk = k;
                }
                if let Some(s) = sigma {
                    psigma = s;
                }
                if let Some(t) = horizon.horizon {
                    pt = t;
                    pgamma = canonical_gamma(t);
                }
                if let Some(g) = horizon.gamma {
                    pgamma = g;
                }
                if let Some(d) = deltas {
                    pdeltas = d;
                }
                preps = mc.reps;
            }
            (
                run::sweep(
                    pk,
                    psigma,
                    pt,
                    pgamma,
                    pdeltas,
                    preps,
                    mc.seed,
                    mc.workers(),
                )?,
                out,
            )
        }
        Command::Coverage {
            preset,
            gamma_literal,
            instance,
            horizon,
            alphas,
            estimate_sigma,
            mc,
            out,
        } => {
            let (mu, sigma, t, gamma, reps) =
                resolve_fig2(preset.is_some(), gamma_literal, &instance, &horizon, &mc)?;
            let alphas = alphas.unwrap_or_else(default_alphas);
            (
                run::coverage(
                    mu,
                    sigma,
                    t,
                    gamma,
                    alphas,
                    estimate_sigma,
                    reps,
                    mc.seed,
                    mc.workers(),
                )?,
                out,
            )
        }
        Command::Clt {
            preset,
            gamma_literal,
            instance,
            horizon,
            mc,
            out,
        } => {
            let (mu, sigma, t, gamma, reps) =
                resolve_fig2(preset.is_some(), gamma_literal, &instance, &horizon, &mc)?;
            (
                run::clt(mu, sigma, t, gamma, reps, mc.seed, mc.workers())?,
                out,
            )
        }
        Command::Linear {
            sigma,
            horizon,
            lambda,
            mc,
            out,
        } => {
            let (t, gamma) = horizon.resolve()?;
            (
                run::linear(sigma, t, gamma, lambda, mc.reps, mc.seed, mc.workers())?,
                out,
            )
        }
        Command::Audit {
            instance,
            horizon,
            mc,
            out,
        } => {
            let (mu, sigma) = instance.resolve()?;
            let (t, gamma) = horizon.resolve()?;
            (
                run::audit(mu, sigma, t, gamma, mc.reps, mc.seed, mc.workers())?,
                out,
            )
        }
        Command::Crossing {
            horizon,
            x_grid,
            mc,
            out,
        } => {
            if x_grid.is_empty() {
                return Err(MainError::Usage("--x requires at least one level".into()));
            }
            (
                run::crossing(horizon, x_grid, mc.reps, mc.seed, mc.workers())?,
                out,
            )
        }
    };
    write_outcome(outcome, out_args)
}

fn resolve_fig2(
    preset: bool,
    gamma_literal: bool,
    instance: &InstanceArgs,
    horizon: &HorizonArgs,
    mc: &McArgs,
) -> Result<(Vec<f64>, f64, usize, f64, usize), MainError> {
    if preset {
        let (mut mu, mut sigma, mut t, mut gamma, _) = fig_coverage_preset(gamma_literal);
        if let Some(m) = &instance.mu {
            mu = m.clone();
        }
        if let Some(s) = instance.sigma {
            sigma = s;
        }
        if let Some(h) = horizon.horizon {
            t = h;
        }
        if let Some(g) = horizon.gamma {
            gamma = g;
        }
        Ok((mu, sigma, t, gamma, mc.reps))
    } else {
        if gamma_literal {
            return Err(MainError::Usage(
                "--gamma-literal requires --preset fig2".into(),
            ));
        }
        let (mu, sigma) = instance.resolve()?;
        let (t, gamma) = horizon.resolve()?;
        Ok((mu, sigma, t, gamma, mc.reps))
    }
}

fn write_outcome(outcome: run::Outcome, out: OutArgs) -> Result<ExitCode, MainError> {
    let format: Format = out.format.into();
    let rendered = render_table(&outcome.spec, &outcome.table, format);
    match &out.out {
        Some(path) => {
            emit(&outcome.spec, &outcome.table, format, path)?;
            if out.plot {
                let (series, x_label, y_label) = outcome.plot.as_ref().ok_or_else(|| {
                    MainError::Usage("--plot is not supported for this command".into())
                })?;
                let svg = banditlab_cli::plot::render_svg_lineplot(series, x_label, y_label)
                    .map_err(MainError::Usage)?;
                std::fs::write(path.with_extension("svg"), svg)?;
            }
        }
        None => {
            if out.plot {
                return Err(MainError::Usage("--plot requires --out".into()));
            }
            print!("{rendered}");
        }
    }
    Ok(ExitCode::from(outcome.exit as u8))
}

fn emit(
    spec: &RunSpec,
    table: &Table,
    format: Format,
    path: &std::path::Path,
) -> std::io::Result<()> {
    emit_table(spec, table, format, path)
}
