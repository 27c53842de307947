use std::path::PathBuf;
use std::process::ExitCode;

use chainfl::clients::AttackMode;
use chainfl::harness::{emit_results, metrics_to_csv, metrics_to_json, run_scenario, OutputFormat, ScenarioConfig};
use chainfl::Error;
use clap::{Args, Parser, Subcommand};
use log::info;

#[derive(Parser)]
#[command(name = "chainfl", version, about = "Run encrypted, poisoning-resistant federated learning sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write per-round metrics.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML scenario file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    pmr: Option<f64>,
    #[arg(long)]
    pdr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "non-iid")]
    non_iid: Option<f64>,
    /// benign, untargeted, backdoor, constrain_and_scale or dba
    #[arg(long)]
    attack: Option<AttackMode>,
    #[arg(long = "poly-degree")]
    poly_degree: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Metrics file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Also write the ledger as JSON lines.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

macro_rules! apply {
    ($cfg:ident, $($flag:expr => $field:ident),+ $(,)?) => {
        $(
            if let Some(v) = $flag {
                info!("flag overrides {}: {:?} -> {:?}", stringify!($field), $cfg.$field, v);
                $cfg.$field = v;
            }
        )+
    };
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    apply!(cfg,
        args.rounds => rounds,
        args.clients => n_clients,
        args.pmr => pmr,
        args.pdr => pdr,
        args.alpha => alpha,
        args.non_iid => non_iid_rate,
        args.attack => attack_mode,
        args.poly_degree => poly_degree,
        args.seed => seed,
        args.dropout => dropout_prob,
    );
    let outcome = run_scenario(&cfg)?;
    match &args.out {
        Some(path) => emit_results(&outcome.metrics, path, args.format)?,
        None => match args.format {
            OutputFormat::Csv => print!("{}", metrics_to_csv(&outcome.metrics)?),
            OutputFormat::Json => println!("{}", metrics_to_json(&outcome.metrics)?),
        },
    }
    if let Some(path) = &args.ledger {
        std::fs::write(path, outcome.ledger_export())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.code(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
