use std::path::PathBuf;
use std::process::ExitCode;

use assignkit::cli;
use assignkit::{Error, ExperimentConfig, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "assignkit", version, about = "Anchor label assignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign labels for one scene file and write the assignment JSON.
    Assign {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file, or a directory to receive assignment.json.
        #[arg(long, default_value = "assignment.json")]
        out: PathBuf,
    },
    /// Run one seeded simulation; writes metrics.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the base config once per variant on identical scenes.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated, e.g. atss,dynamic_atss or constant,d_up,d_down.
        #[arg(long, value_delimiter = ',', default_value = "")]
        variants: Vec<String>,
    },
    /// Check the fast implementations against the brute-force oracles.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
}

fn load(config: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(&p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Assign { scene, config, out } => {
            let cfg = load(config, None, None)?;
            let out = cli::resolve_assign_out(&out);
            let a = cli::cmd_assign(&scene, &cfg, &out)?;
            println!("{} positives -> {}", a.total_pos(), out.display());
        }
        Command::Simulate { config, out, seed } => {
            let cfg = load(config, out, seed)?;
            let s = cli::cmd_simulate(&cfg)?;
            println!(
                "seed {} scene_hash {} reg_loss {:.6} mean_pos_pred_iou {:.6} -> {}",
                s.seed,
                s.scene_hash,
                s.final_window.reg_loss,
                s.final_window.mean_pos_pred_iou,
                cfg.output.dir.display()
            );
        }
        Command::Compare {
            config,
            out,
            seed,
            variants,
        } => {
            let cfg = load(config, out, seed)?;
            let variants: Vec<String> = variants.into_iter().filter(|v| !v.trim().is_empty()).collect();
            let rows = cli::cmd_compare(&cfg, &variants)?;
            println!("seed {}", cfg.train.seed);
            for r in rows {
                println!(
                    "{:<16} reg_loss {:.6} mean_pos_pred_iou {:.6} num_pos {:.2}",
                    r.variant, r.reg_loss, r.mean_pos_pred_iou, r.num_pos
                );
            }
        }
        Command::OracleCheck { seed, cases } => {
            let checks = cli::cmd_oracle_check(seed, cases);
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {}: {}/{} cases agree",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.cases - c.failures,
                    c.cases
                );
                failed += usize::from(!c.passed());
            }
            if failed > 0 {
                return Err(Error::Invariant(format!("{failed} oracle checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors; here 2 means an internal failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
