//! Command-line front end for the classifier and its robustness harnesses.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfgadv_core::config::ConfigFile;
use cfgadv_core::pipeline::{Pipeline, PipelineError, Settings};

/// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 invariant
/// violation.
#[derive(Parser)]
#[command(
    name = "cfgadv",
    version,
    about = "CFG-based malware classification and robustness experiments"
)]
struct Cli {
    /// Config file (key=value lines with [section] headers per module).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed controlling corpus, split, training, and attack sampling.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Output directory holding all artifacts of a run.
    #[arg(long, global = true, default_value = "runs/default")]
    out: PathBuf,

    /// Worker thread cap for parallel stages (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic labeled corpus.
    GenCorpus,
    /// Extract the 23 features of every corpus graph into features.csv.
    Extract,
    /// Split, fit the normalizer, train the classifier, evaluate.
    Train,
    /// Run the six feature-space attacks over the test split.
    AttackOsaa,
    /// Run the graph-splicing attack across targets and directions.
    AttackGea,
    /// Sweep combined-graph density with node count fixed.
    DensitySweep,
    /// Aggregate artifacts into the final report tables.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("cfgadv: failed to configure {threads} worker threads: {e}");
            return ExitCode::from(2);
        }
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cfgadv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let settings = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.clone(),
                source,
            })?;
            Settings::from_config(&ConfigFile::parse(&text)?, cli.seed)?
        }
        None => Settings::defaults(cli.seed),
    };

    let mut pipeline = Pipeline::new(cli.out.clone(), cli.seed, settings);
    pipeline.config_path = cli.config.clone();

    match cli.command {
        Command::GenCorpus => {
            let n = pipeline.gen_corpus()?;
            println!(
                "generated {n} graphs under {}",
                pipeline.corpus_dir().display()
            );
        }
        Command::Extract => {
            let n = pipeline.extract()?;
            println!(
                "extracted features for {n} graphs -> {}",
                pipeline.features_csv().display()
            );
        }
        Command::Train => {
            let metrics = pipeline.train()?;
            println!("trained model -> {}", pipeline.model_json().display());
            println!("{metrics}");
        }
        Command::AttackOsaa => {
            let rows = pipeline.attack_osaa()?;
            for row in &rows {
                println!(
                    "{:<11} MR {:6.2}%  Avg.FG {:5.2}  CT {:8.2} ms  ({} samples)",
                    row.method.display_name(),
                    row.mr_percent,
                    row.avg_fg,
                    row.mean_ct_ms,
                    row.samples
                );
            }
        }
        Command::AttackGea => {
            let rows = pipeline.attack_gea()?;
            for row in &rows {
                println!(
                    "{} {:<7} target {:>5} nodes: MR {:6.2}%  CT {:8.2} ms",
                    row.direction, row.target_strategy, row.target_nodes, row.mr_percent, row.mean_ct_ms
                );
            }
        }
        Command::DensitySweep => {
            let levels = pipeline.density_sweep()?;
            for level in &levels {
                println!(
                    "+{:>5} edges: density {:.6}  MR {:6.2}%  CT {:8.2} ms",
                    level.edges_added, level.mean_density, level.mr_percent, level.mean_ct_ms
                );
            }
        }
        Command::Report => {
            let text = pipeline.report()?;
            print!("{text}");
        }
    }
    Ok(())
}
