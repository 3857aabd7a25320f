use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use risksynth_cli::commands::{
    cmd_certify, cmd_demo, cmd_evaluate, cmd_impact, cmd_synth, load_matrix, parse_delta,
    write_demo_outputs, write_synth_outputs,
};
use risksynth_cli::config::ExperimentConfig;
use risksynth_cli::report::{box_stats_csv, certificate_csv};
use risksynth_cli::CliError;

/// Risk-averse static output-feedback synthesis against stealthy actuator
/// data-injection attacks.
#[derive(Parser)]
#[command(name = "risksynth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Size of the worker thread pool (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Stdout format for the main result (files are governed by the config).
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full synthesis pipeline from a JSON config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the CVaR tail size m.
        #[arg(long)]
        m: Option<usize>,
        /// Override the regularization weight.
        #[arg(long)]
        eta: Option<f64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the worst-case impact and the proxy at one (K, delta).
    Impact {
        #[arg(long)]
        config: PathBuf,
        /// JSON file holding K as nested row-major arrays; zero when absent.
        #[arg(long)]
        k_file: Option<PathBuf>,
        /// Comma-separated uncertainty realization; zero when absent.
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Compare two controllers on fresh uncertainties (box statistics).
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k_optimal: PathBuf,
        #[arg(long)]
        k_nominal: PathBuf,
        #[arg(long)]
        n_eval: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in demo experiment (m = 1 and m = 2).
    Demo {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the out-of-sample confidence curve for the configured (N, m).
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        // Ignore the error when a pool already exists (e.g. repeat calls in
        // tests); determinism does not depend on the pool size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    match cli.command {
        Command::Synth {
            config,
            seed,
            m,
            eta,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.scenarios.seed = seed;
            }
            if let Some(m) = m {
                cfg.risk.m = Some(m);
            }
            if let Some(eta) = eta {
                cfg.risk.eta = eta;
            }
            if let Some(out) = &out {
                cfg.output.directory = out.display().to_string();
            }
            let outcome = cmd_synth(&cfg)?;
            let dir = PathBuf::from(&cfg.output.directory);
            write_synth_outputs(&dir, &cfg, &outcome)?;
            match cli.format {
                Format::Json => println!("{}", outcome.report.to_json()),
                Format::Csv => print!("{}", box_stats_csv(&outcome.report.evaluation.rows)),
                Format::Text => {
                    let s = &outcome.report.summary;
                    println!(
                        "synthesis over N = {} scenarios (m = {}, eta = {})",
                        s.n_scenarios, s.m, s.eta
                    );
                    println!("  cvar objective      : {:.4}", s.objective_cvar);
                    println!("    singular-value part: {:.4}", s.objective_kyfan);
                    println!("    regularization     : {:.4}", s.regularization);
                    match s.shortfall_threshold {
                        Some(t) => println!("  shortfall threshold : {t:.4}"),
                        None => println!("  shortfall threshold : n/a (N < m + d)"),
                    }
                    println!("  iterations          : {}", s.iterations);
                    if !s.converged {
                        println!("  WARNING: solver did not meet its stall criterion; best iterate reported");
                    }
                    if let Some(table) = &outcome.report.certificate {
                        let at = table.rows.iter().find(|r| (r.epsilon - 0.9).abs() < 1e-12);
                        if let Some(row) = at {
                            println!(
                                "  confidence P(PS <= 0.9) = {:.6}  [Beta({}, {})]",
                                row.confidence, table.a, table.b
                            );
                        }
                    }
                    println!("outputs written to {}", dir.display());
                }
            }
        }
        Command::Impact {
            config,
            k_file,
            delta,
            eta,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(eta) = eta {
                cfg.risk.eta = eta;
            }
            let k = k_file.as_deref().map(load_matrix).transpose()?;
            let delta = delta.as_deref().map(parse_delta).transpose()?;
            let printout = cmd_impact(&cfg, k, delta)?;
            match cli.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&printout).expect("impact serialization")
                ),
                _ => {
                    println!("q_exact          : {:.6}", printout.q_exact);
                    println!("sigma_max(kappa) : {:.6}", printout.sigma_max_kappa);
                    println!("q_proxy          : {:.6}", printout.q_proxy);
                    match printout.bound_value {
                        Some(b) => println!("impact bound     : {b:.6}"),
                        None => println!("impact bound     : n/a (n_x * N_h = 1)"),
                    }
                    match printout.bound_satisfied {
                        Some(ok) => println!("bound satisfied  : {ok}"),
                        None => println!("bound satisfied  : n/a"),
                    }
                    if printout.degenerate_tie {
                        println!("note: singular values tied at the Ky Fan cut (subgradient mode)");
                    }
                }
            }
        }
        Command::Evaluate {
            config,
            k_optimal,
            k_nominal,
            n_eval,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let k_opt = load_matrix(&k_optimal)?;
            let k_nom = load_matrix(&k_nominal)?;
            let n_eval = n_eval.unwrap_or(cfg.evaluation.n_eval);
            let seed = seed.unwrap_or(cfg.evaluation.eval_seed);
            let outcome = cmd_evaluate(&cfg, k_opt, k_nom, n_eval, seed)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("box_stats.csv"), &outcome.box_stats_csv)?;
                std::fs::write(dir.join("eval_samples.csv"), &outcome.samples_csv)?;
            }
            match cli.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&outcome.rows).expect("rows serialization")
                ),
                _ => print!("{}", outcome.box_stats_csv),
            }
        }
        Command::Demo { out } => {
            let outcome = cmd_demo()?;
            let dir = out.unwrap_or_else(|| PathBuf::from("demo_out"));
            write_demo_outputs(&dir, &outcome)?;
            match cli.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&outcome.demo).expect("demo serialization")
                ),
                _ => {
                    println!("      CVaR(q_bar)   shortfall threshold");
                    for row in &outcome.demo.rows {
                        println!(
                            "m = {}   {:>9.4}   {:>9.4}",
                            row.m, row.cvar, row.shortfall_threshold
                        );
                    }
                    println!(
                        "confidence P(PS <= 0.9), m = 2: {:.6}",
                        outcome.demo.confidence_at_09_m2
                    );
                    for r in &outcome.demo.evaluation_rows {
                        println!(
                            "{:8} {:8}  median {:>9.4}  q25 {:>9.4}  q75 {:>9.4}  range [{:.4}, {:.4}]",
                            r.metric,
                            r.controller,
                            r.stats.median,
                            r.stats.q25,
                            r.stats.q75,
                            r.stats.whisker_lo,
                            r.stats.whisker_hi
                        );
                    }
                    println!("outputs written to {}", dir.display());
                }
            }
        }
        Command::Certify { config, m, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(m) = m {
                cfg.risk.m = Some(m);
            }
            let table = cmd_certify(&cfg)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("certificate.csv"), certificate_csv(&table))?;
            }
            match cli.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&table).expect("table serialization")
                ),
                Format::Csv => print!("{}", certificate_csv(&table)),
                Format::Text => {
                    println!("PS ~ Beta({}, {}):", table.a, table.b);
                    for row in table.rows.iter().filter(|r| {
                        [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95]
                            .iter()
                            .any(|e| (r.epsilon - e).abs() < 1e-12)
                    }) {
                        println!("  P(PS <= {:>4}) = {:.6}", row.epsilon, row.confidence);
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
