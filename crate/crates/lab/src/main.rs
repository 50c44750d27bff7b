use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fa_lab::config::load;
use fa_lab::deep::{run_deep, DeepConfig};
use fa_lab::linear::{run_linear, LinearConfig};
use fa_lab::shallow::{run_ode, run_plearn, run_teacher_student, OdeCmdConfig, PLearnCmdConfig, TeacherStudentConfig};
use fa_lab::sweeps::{run_alphabeta, run_corruption, AlphaBetaConfig, CorruptionConfig};
use fa_lab::{Result, RunOptions};

#[derive(Parser)]
#[command(name = "fa-lab", version, about = "Feedback-alignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads for independent runs
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers as usize,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Online teacher-student simulations
    TeacherStudent(Common),
    /// Order-parameter ODEs, optionally next to a simulation
    Ode(Common),
    /// Deep networks on MNIST, CIFAR-10 or synthetic targets
    Deep(Common),
    /// Probability of perfect recovery for ReLU students
    Plearn(Common),
    /// Final alignment over a grid of target covariances
    Alphabeta(Common),
    /// Alignment timing under label corruption
    Corruption(Common),
    /// Deep linear networks and their alignment matrices
    LinearWa(Common),
}

fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::TeacherStudent(c) => {
            for s in run_teacher_student(&load::<TeacherStudentConfig>(&c.config)?, &c.options())? {
                println!("{}\tfinal eg {:e}", s.stem, s.final_eg);
            }
        }
        Command::Ode(c) => {
            for s in run_ode(&load::<OdeCmdConfig>(&c.config)?, &c.options())? {
                let last = s.ode.last().map_or(f64::NAN, |r| r.eg);
                match s.max_deviation {
                    Some(d) => println!("{} seed {}\tfinal eg {last:e}\tmax |sim - ode| {d:e}", s.algo.name(), s.seed_index),
                    None => println!("{} seed {}\tfinal eg {last:e}", s.algo.name(), s.seed_index),
                }
            }
        }
        Command::Deep(c) => {
            for r in run_deep(&load::<DeepConfig>(&c.config)?, &c.options())? {
                let f = |v: Option<f64>| v.map_or_else(|| "nan".into(), |v| format!("{v:.4}"));
                println!(
                    "{}\tloss {}\tacc {}\twa {}\tga {}\tinterrun {}",
                    r.stem,
                    f(r.last.loss),
                    f(r.last.accuracy),
                    f(r.last.wa_global),
                    f(r.last.ga_global),
                    f(r.last.interrun)
                );
            }
        }
        Command::Plearn(c) => {
            let (table, forced) = run_plearn(&load::<PLearnCmdConfig>(&c.config)?, &c.options())?;
            println!("k\tm\tformula\ttail\tempirical");
            for r in table {
                let formula = r.formula.map_or_else(|| "nan".into(), |v| format!("{v:.4}"));
                println!("{}\t{}\t{formula}\t{:.4}\t{:.2}", r.k, r.m, r.tail, r.empirical);
            }
            for r in forced {
                println!("forced {} positive, trial {}\tfinal eg {:e}", r.positives, r.trial, r.final_eg);
            }
        }
        Command::Alphabeta(c) => {
            println!("alpha\tbeta\twa\tga");
            for g in run_alphabeta(&load::<AlphaBetaConfig>(&c.config)?, &c.options())? {
                println!("{}\t{}\t{:.4}\t{:.4}", g.alpha, g.beta, g.wa_mean, g.ga_mean);
            }
        }
        Command::Corruption(c) => {
            println!("p\tfirst epoch\tfinal wa");
            for s in run_corruption(&load::<CorruptionConfig>(&c.config)?, &c.options())? {
                let e = s.first_epoch.map_or_else(|| "never".into(), |e| e.to_string());
                println!("{}\t{e}\t{:.4}", s.p, s.final_wa);
            }
        }
        Command::LinearWa(c) => {
            for s in run_linear(&load::<LinearConfig>(&c.config)?, &c.options())? {
                println!("{}\tmax residual {:e}", s.variant, s.max_residual);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fa-lab: {e}");
            ExitCode::FAILURE
        }
    }
}
