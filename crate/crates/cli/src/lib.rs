//! Command-line front end for the federated learning simulator.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedsim_core::datagen;
use fedsim_core::experiments::{
    self, axes_from_records, emit_heatmap, emit_tradeoff, Metric, ResultsStore, RunRecord, RunSelection,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fedsim", version, about = "Federated learning and differential privacy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic two-Gaussian dataset as CSV.
    GenData(GenData),
    /// Run the federated configurations of a config file (no baselines).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        store: StoreArg,
    },
    /// Run the full grid, including per-site baselines and the pooled reference.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        store: StoreArg,
    },
    /// Build reports from a results store.
    Report {
        #[arg(value_enum)]
        kind: ReportKind,
        #[command(flatten)]
        store: StoreArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct GenData {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = 1.5)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StoreArg {
    #[arg(long = "store", default_value = "results.jsonl")]
    path: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportKind {
    Heatmap,
    Tradeoff,
}

type CmdResult = Result<(), Box<dyn std::error::Error>>;

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::GenData(args) => gen_data(&args),
        Command::Run { config, seed, store } => run(&config, seed, &store.path),
        Command::Sweep { config, store } => sweep(&config, &store.path),
        Command::Report { kind, store, out } => report(kind, &store.path, &out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn gen_data(args: &GenData) -> CmdResult {
    let ds = datagen::generate_synthetic::<f64>(args.n, args.d, args.rate, args.separation, args.seed)?;
    datagen::save_csv(&ds, &args.out)?;
    println!(
        "wrote {} samples ({} positive) x {} features to {}",
        ds.len(),
        ds.positives(),
        ds.dim(),
        args.out.display()
    );
    Ok(())
}

fn print_records(records: &[RunRecord]) {
    for r in records {
        match &r.error {
            None => println!(
                "{}  {:<14} {}  auroc={:.4} auprc={:.4} eps={}",
                r.run_id,
                format!("{:?}", r.kind),
                r.scenario,
                r.auroc,
                r.auprc,
                r.epsilon
            ),
            Some(err) => println!("{}  {:?} {}  FAILED: {err}", r.run_id, r.kind, r.scenario),
        }
    }
}

fn finish(records: &[RunRecord], store: &Path) -> CmdResult {
    print_records(records);
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    eprintln!(
        "{} runs appended to {} ({failed} failed)",
        records.len(),
        store.display()
    );
    if failed == records.len() && failed > 0 {
        return Err("every run failed".into());
    }
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, store: &Path) -> CmdResult {
    let mut cfg = experiments::parse_config(config)?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    let store_handle = ResultsStore::new(store);
    let records = experiments::run_sweep_with(&cfg, Some(&store_handle), RunSelection::FederatedOnly)?;
    finish(&records, store)
}

fn sweep(config: &Path, store: &Path) -> CmdResult {
    let cfg = experiments::parse_config(config)?;
    let store_handle = ResultsStore::new(store);
    let records = experiments::run_sweep(&cfg, Some(&store_handle))?;
    finish(&records, store)
}

fn report(kind: ReportKind, store: &Path, out: &Path) -> CmdResult {
    let records = ResultsStore::new(store).load()?;
    if records.is_empty() {
        return Err(format!("results store {} is empty", store.display()).into());
    }
    std::fs::create_dir_all(out)?;
    match kind {
        ReportKind::Heatmap => {
            let (x, y) = axes_from_records(&records);
            for metric in [Metric::Auroc, Metric::Auprc] {
                let base = out.join(format!("heatmap_{}", metric.name()));
                let map = emit_heatmap(&records, metric, &x, &y, &base)?;
                println!("wrote {} and {}", map.csv_path.display(), map.svg_path.display());
            }
        }
        ReportKind::Tradeoff => {
            let path = out.join("tradeoff.csv");
            let rows = emit_tradeoff(&records, &path)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
        }
    }
    Ok(())
}
