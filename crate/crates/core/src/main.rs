use cartan_lab::reports::{exit_code, run, Context, Subcommand};
use clap::{Parser, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Validate,
    Census,
    Bowen,
    Birkhoff,
    Spectrum,
    Trace,
    Zeta,
    Count,
    All,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Validate => Subcommand::Validate,
            Command::Census => Subcommand::Census,
            Command::Bowen => Subcommand::Bowen,
            Command::Birkhoff => Subcommand::Birkhoff,
            Command::Spectrum => Subcommand::Spectrum,
            Command::Trace => Subcommand::Trace,
            Command::Zeta => Subcommand::Zeta,
            Command::Count => Subcommand::Count,
            Command::All => Subcommand::All,
        }
    }
}

/// Periodic tori, SRB estimators and trace formulas for Cartan actions on tori.
#[derive(Parser, Debug)]
#[command(name = "cartan-lab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set birkhoff.n_seeds=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Report directory; defaults to `output_dir` from the config, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = match Context::load(&cli.config, &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let out = cli
        .out
        .clone()
        .or_else(|| ctx.config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let cmd: Subcommand = cli.command.into();
    let result = run(cmd, &ctx).and_then(|r| r.write(&out).map(|_| r));
    match result {
        Ok(r) => {
            for c in &r.criteria {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failures = r.failures();
            if failures.is_empty() {
                println!("run {} ok; reports in {}", ctx.run_id, out.display());
                ExitCode::SUCCESS
            } else {
                for c in &failures {
                    eprintln!("failed criterion: {}", c.name);
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
