use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use basketflow::cli::{self, CmdResult, Failure};
use basketflow::config::RunConfig;

#[derive(Parser)]
#[command(name = "basketflow", version, about = "Streaming market-basket analysis")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Flat `key = value` config file; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> CmdResult<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p).map_err(Failure::Usage)?,
            None => RunConfig::default(),
        };
        let mut extra = self.overrides.clone();
        if let Some(s) = self.seed {
            extra.push(format!("seed={s}"));
        }
        if let Some(o) = &self.out {
            extra.push(format!("output_dir={}", o.display()));
        }
        base.with_overrides(extra.iter().map(String::as_str))
            .map_err(Failure::Usage)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convert a transaction file to the canonical CSV and print counts.
    Ingest {
        input: PathBuf,
        #[arg(long, default_value = "canonical")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train embeddings over the configured dataset.
    Train(ConfigArgs),
    /// Mine association rules from a snapshot.
    Mine {
        snapshot: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Run the intra-basket retrieval evaluation.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write per-query ranks.
        #[arg(long)]
        ranks: bool,
    },
    /// Test whether users rebuy the same products.
    Analyze {
        input: PathBuf,
        /// Sampled basket pairs per group.
        #[arg(long, short)]
        k: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn run(cmd: Command) -> CmdResult<()> {
    match cmd {
        Command::Ingest { input, format, out } => {
            let s = cli::cmd_ingest(&input, &format, &out)?;
            print!("{}", cli::format_summary(&s));
        }
        Command::Train(cfg) => {
            let out = cli::cmd_train(&cfg.resolve()?)?;
            println!("{}", out.snapshot.display());
        }
        Command::Mine { snapshot, cfg, top_k } => {
            let mut c = cfg.resolve()?;
            if let Some(k) = top_k {
                c.top_k = k;
            }
            let rules = cli::cmd_mine(&snapshot, &c)?;
            println!("{} rules", rules.len());
        }
        Command::Eval { cfg, ranks } => {
            let report = cli::cmd_eval(&cfg.resolve()?, ranks)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json value"));
        }
        Command::Analyze { input, k, cfg } => {
            let c = cfg.resolve()?;
            let r = cli::cmd_analyze(&input, k.unwrap_or(c.repetition_pairs), &c)?;
            println!("t = {:.4}, p = {:.3e}", r.t_stat, r.p_value);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
