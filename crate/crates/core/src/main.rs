use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dfo_sparse::bench::{
    emit_outputs, parse_solver, profiles_for, run_benchmark, BenchConfig, Preset, ProblemSpec,
};
use dfo_sparse::driver::{run_dfo_tr, DfoConfig};
use dfo_sparse::error::{Error, Result};
use dfo_sparse::problems::{get_problem, list};
use dfo_sparse::recovery::{sparse_hessian_recovery_experiment, write_recovery_csv};

#[derive(Parser)]
#[command(
    name = "dfo-sparse",
    version,
    about = "Derivative-free trust-region solver with sparse quadratic models"
)]
struct Cli {
    /// Print the test problem registry (name, n, NNZH) and exit.
    #[arg(long)]
    list_problems: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run solvers over test problems and write records and performance profiles.
    Bench {
        /// Comma-separated NAME or NAME:N entries, or `all`.
        #[arg(long, default_value = "all")]
        problems: String,
        #[arg(long, default_value = "frob,l1", value_delimiter = ',')]
        solvers: Vec<String>,
        #[arg(long, default_value = "4,6", value_delimiter = ',')]
        acc: Vec<u32>,
        /// Evaluation budget; defaults to the preset's.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value = "table1")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Randomized sparse Hessian recovery experiment.
    Recover {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        h: usize,
        #[arg(long, default_value = "25,35,45,55,66", value_delimiter = ',')]
        p_grid: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Half-width of the sampling hypercube.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "recover-out")]
        out: PathBuf,
    },
    /// Solve one test problem and print a summary.
    Solve {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "l1")]
        solver: String,
        #[arg(long)]
        budget: Option<usize>,
        /// Print one line per iteration.
        #[arg(long)]
        trace: bool,
    },
}

fn print_registry() -> Result<()> {
    println!("{:<18} {:>4} {:>6}", "name", "n", "NNZH");
    for name in list() {
        let p = get_problem(name, None)?;
        let nnz = p.nnz_upper.map_or("-".to_string(), |v| v.to_string());
        println!("{:<18} {:>4} {:>6}", p.name, p.n, nnz);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.list_problems {
        return print_registry();
    }
    let Some(command) = cli.command else {
        return Err(Error::InvalidArgument(
            "no command given (try --help)".into(),
        ));
    };
    match command {
        Command::Bench {
            problems,
            solvers,
            acc,
            budget,
            preset,
            seed,
            out,
        } => {
            let preset = Preset::parse(&preset)?;
            let mut cfg = BenchConfig::new(ProblemSpec::parse_list(&problems)?, preset);
            cfg.solvers = solvers
                .iter()
                .map(|s| parse_solver(s))
                .collect::<Result<_>>()?;
            cfg.accs = acc;
            cfg.budget = budget.unwrap_or(preset.budget());
            cfg.seed = seed;
            let records = run_benchmark(&cfg)?;
            for r in &records {
                println!(
                    "{:<10} {:>3} {:<12} acc={} {:>6} {}",
                    r.problem,
                    r.n,
                    r.solver.label(),
                    r.acc,
                    r.fevals.map_or("-".to_string(), |v| v.to_string()),
                    r.status()
                );
            }
            let profiles = profiles_for(&records)?;
            for path in emit_outputs(&records, &profiles, &out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Recover {
            n,
            h,
            p_grid,
            trials,
            delta,
            seed,
            out,
        } => {
            let mut reports = Vec::new();
            for p in p_grid {
                let r = sparse_hessian_recovery_experiment(n, h, p, trials, delta, seed)?;
                println!("p={:<4} success_rate={:.4}", p, r.success_rate);
                reports.push(r);
            }
            std::fs::create_dir_all(&out).map_err(|source| Error::Io {
                path: out.clone(),
                source,
            })?;
            let path = out.join("recovery.csv");
            write_recovery_csv(&reports, &path)?;
            println!("wrote {}", path.display());
        }
        Command::Solve {
            problem,
            n,
            solver,
            budget,
            trace,
        } => {
            let p = get_problem(&problem, n)?;
            let mut cfg = DfoConfig::default().with_norm(parse_solver(&solver)?);
            if let Some(b) = budget {
                cfg.max_fevals = b;
            }
            let t = run_dfo_tr(|x| p.value(x), &p.start, &cfg)?;
            if trace {
                println!("k fevals f delta |Y| rho gnorm");
                for it in &t.iterations {
                    println!(
                        "{} {} {:.10e} {:.3e} {} {:.3e} {:.3e}",
                        it.k, it.fevals, it.f, it.delta, it.y_size, it.rho, it.gnorm
                    );
                }
            }
            println!("problem      {} (n = {})", p.name, p.n);
            println!("solver       {}", cfg.norm.label());
            println!("termination  {}", t.termination.as_str());
            println!("fevals       {}", t.fevals);
            println!("f            {:.16e}", t.f);
            println!("model gnorm  {:.6e}", t.final_gnorm);
            if let Some(fb) = p.f_best {
                for acc in [4, 6] {
                    let reach = t.fevals_to_reach(fb + 10f64.powi(-acc));
                    println!(
                        "acc {acc}        {}",
                        reach.map_or("FAIL".to_string(), |v| v.to_string())
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
