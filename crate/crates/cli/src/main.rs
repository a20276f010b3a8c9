use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use osfde::{wsgd_weights, FractionalOrder};
use osfde_cli::config::{ConfigBuilder, ExperimentConfig};
use osfde_cli::emit::{emit, ResultTable};
use osfde_cli::error::{HarnessError, Result};
use osfde_cli::harness::{attach_rates, in_pool, run_convergence, run_precond_bench, run_spectral, solve_cell};

/// Crank-Nicolson / WSGD solvers for one-sided space-fractional diffusion.
#[derive(Parser, Debug)]
#[command(name = "osfde", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` assignments applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    #[arg(long, global = true, value_parser = ["pgmres-t", "plu"])]
    solver: Option<String>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print Grünwald-Letnikov and WSGD weights as CSV.
    Weights {
        #[arg(long)]
        alpha: f64,
        /// Largest index `k`.
        #[arg(long, default_value_t = 16)]
        count: usize,
    },
    /// One 1D solve at the first ladder entries.
    Solve1d(SolveArgs),
    /// One 2D solve at the first ladder entries.
    Solve2d(SolveArgs),
    /// Error and convergence-rate table over the ladders.
    Convergence,
    /// Mean PGMRES iterations over the ladders.
    PrecondBench,
    /// Dense singular values of the preconditioned matrix against the bounds.
    Spectral,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Write the final state (nodes and values) as CSV.
    #[arg(long)]
    state: Option<PathBuf>,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut b = ConfigBuilder::new();
    if let Some(path) = &common.config {
        b.read_file(path)?;
    }
    for o in &common.overrides {
        b.apply_override(o)?;
    }
    let mut flag = |k: &str, v: Option<String>| v.map(|v| b.set(k, &v).map_err(HarnessError::Config)).transpose();
    flag("format", common.format.clone())?;
    flag("solver", common.solver.clone())?;
    flag("threads", common.threads.map(|v| v.to_string()))?;
    flag("seed", common.seed.map(|v| v.to_string()))?;
    flag("out", common.out.as_ref().map(|p| p.display().to_string()))?;
    b.finish()
}

fn write_weights(alpha: f64, count: usize, out: Option<&PathBuf>) -> Result<()> {
    let k = wsgd_weights::<f64>(FractionalOrder::new(alpha)?, count);
    let mut text = String::from("k,g,w\n");
    for (i, (g, w)) in k.g().iter().zip(k.w()).enumerate() {
        text.push_str(&format!("{i},{g:e},{w:e}\n"));
    }
    write_text(&text, out)
}

fn write_text(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| HarnessError::Io {
            path: p.clone(),
            source,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| HarnessError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn solve_one(cfg: &ExperimentConfig, want_2d: bool, args: &SolveArgs) -> Result<()> {
    if cfg.problem.is_2d() != want_2d {
        let dim = if want_2d { "two" } else { "one" };
        return Err(HarnessError::Config(format!("this subcommand needs a {dim}-dimensional problem")));
    }
    let (h, t) = (cfg.h_exps[0], cfg.tau_exps[0]);
    let cell = in_pool(cfg.threads, || solve_cell(cfg, h, t))??;
    if let Some(path) = &args.state {
        let mut text = String::new();
        let hstep = 2f64.powi(h);
        if want_2d {
            let m = (cfg.extent() / hstep).round() as usize - 1;
            text.push_str("x,y,u\n");
            for (k, u) in cell.final_state.iter().enumerate() {
                let (i, j) = (k % m, k / m);
                text.push_str(&format!("{},{},{u:e}\n", (i + 1) as f64 * hstep, (j + 1) as f64 * hstep));
            }
        } else {
            let x0 = match &cfg.problem {
                osfde_cli::ProblemId::Custom(c) => c.x_left,
                _ => 0.0,
            };
            text.push_str("x,u\n");
            for (i, u) in cell.final_state.iter().enumerate() {
                text.push_str(&format!("{},{u:e}\n", x0 + (i + 1) as f64 * hstep));
            }
        }
        write_text(&text, Some(path))?;
    }
    let mut rows = vec![cell.row];
    attach_rates(&mut rows, cfg.refine_axis());
    emit(&ResultTable { rows }, cfg.format, cfg.out.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Weights { alpha, count } = cli.command {
        return write_weights(alpha, count, cli.common.out.as_ref());
    }
    let cfg = load(&cli.common)?;
    match &cli.command {
        Command::Weights { .. } => unreachable!(),
        Command::Solve1d(a) => solve_one(&cfg, false, a),
        Command::Solve2d(a) => solve_one(&cfg, true, a),
        Command::Convergence => emit(&run_convergence(&cfg)?, cfg.format, cfg.out.as_deref()),
        Command::PrecondBench => emit(&run_precond_bench(&cfg)?, cfg.format, cfg.out.as_deref()),
        Command::Spectral => {
            let table = run_spectral(&cfg)?;
            emit(&table, cfg.format, cfg.out.as_deref())?;
            if table.assumptions_hold() {
                Ok(())
            } else {
                Err(HarnessError::Assumption(
                    "coefficients violate the bound assumptions for at least one cell".into(),
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OSFDE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("osfde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
