use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};
use hjlab_cli::artifacts::OutDir;
use hjlab_cli::commands::{self, Context};
use hjlab_cli::report;
use hjlab_cli::scenario::Scenario;

#[derive(Parser)]
#[command(name = "hjlab", version, about = "Hamilton-Jacobi boundary-value laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Time-march the scenario and record probes and snapshots.
    Evolve(Common),
    /// Estimate the ergodic constant and, for Dirichlet data, stationary solvability.
    Ergodic(Common),
    /// Compare the evolution limit with the representation formulas (needs evolve, ergodic).
    Profile(Common),
    /// Monotonicity ratios and drift diagnostics (needs evolve, ergodic).
    Diagnose(Common),
    /// Sampled audits of the hypotheses on H and the data.
    Check(Common),
    /// Summarize an output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Every command in order, then the report.
    All(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn context(&self) -> Result<Context> {
        let mut scenario = Scenario::load(&self.scenario)?;
        if let Some(seed) = self.seed {
            scenario.run.seed = seed;
        }
        Context::new(scenario, OutDir::create(&self.out)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Evolve(c) => {
            let s = commands::evolve(&c.context()?)?;
            println!("evolved to t = {} in {} steps (dt {:.3e})", s.t, s.steps, s.dt);
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Ergodic(c) => {
            let e = commands::ergodic(&c.context()?)?;
            println!("c = {:.10e} ({:?}, residual {:.3e})", e.c, e.method, e.residual);
            for w in &e.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Profile(c) => {
            let p = commands::profile(&c.context()?)?;
            println!("{}: distance {:.3e}", p.formula, p.distance);
        }
        Command::Diagnose(c) => {
            let d = commands::diagnose(&c.context()?)?;
            println!("drift growth {:.3e}, final change {:.3e}", d.drift_growth, d.final_change);
        }
        Command::Check(c) => {
            let ctx = c.context()?;
            for r in commands::check(&ctx, ctx.scenario.run.seed)? {
                println!("{}: {:?}", r.id, r.verdict);
            }
        }
        Command::Report { out } => {
            let r = report::write(&OutDir::open(&out))?;
            print!("{}", report::render(&r));
        }
        Command::All(c) => {
            let ctx = c.context()?;
            commands::evolve(&ctx)?;
            commands::ergodic(&ctx)?;
            commands::diagnose(&ctx)?;
            match ctx.scenario.profile_unsupported() {
                None => {
                    commands::profile(&ctx)?;
                }
                Some(why) => eprintln!("skipping profile: {why}"),
            }
            commands::check(&ctx, ctx.scenario.run.seed)?;
            print!("{}", report::render(&report::write(&ctx.out)?));
        }
    }
    Ok(())
}

/// 2 for numerical breakdown (divergence, non-coercive H), 1 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<hjlab_core::Error>(),
            Some(hjlab_core::Error::Divergence { .. } | hjlab_core::Error::NotCoercive { .. })
        )
    });
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
