//! Command-line surface of the `grain` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grain_core::graph::{generate_synthetic, LabeledDataset, SynthConfig};
use grain_core::io::{convert_content_cites, load_dataset, load_run_config, save_dataset};
use grain_core::models::BaselineKind;
use grain_core::tensor::suite::run_gradient_suite;
use grain_core::trainer::{
    build_cache, derive_actions, emit_report, run_baseline, run_gnn_phase, run_pipeline, run_rl_phase,
    write_embedding, PhaseMetrics, TrainConfig,
};
use grain_core::{Error, Result};
use log::info;

#[derive(Parser)]
#[command(name = "grain", version, about = "Hop-granularity graph node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write report.json, actions.tsv and embedding.tsv.
    Train(Common),
    /// Train GCN and/or MLP baselines and write baseline.json.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        model: BaselineChoice,
    },
    /// Print the edge homophily of a dataset.
    Homophily {
        #[arg(long)]
        data: PathBuf,
    },
    /// Write a synthetic dataset directory.
    GenSynth(SynthArgs),
    /// Convert content/cites citation files to a dataset directory.
    Convert {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dataset name; defaults to the output directory name.
        #[arg(long)]
        name: Option<String>,
    },
    /// Finite-difference check of every differentiable op.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Train the policy and classifier, then write a 2-D projection of the logits.
    Embed(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    h: f64,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 10.0)]
    degree: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 1.5)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineChoice {
    Gcn,
    Mlp,
    All,
}

impl Common {
    fn load(&self) -> Result<(Arc<LabeledDataset>, TrainConfig)> {
        let mut cfg = match &self.config {
            Some(path) => load_run_config(path)?,
            None => TrainConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let dataset = load_dataset(&self.data, cfg.seed)?;
        fs::create_dir_all(&self.out).map_err(|e| io_error(&self.out, e))?;
        Ok((Arc::new(dataset), cfg))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn summary(name: &str, m: &PhaseMetrics) -> String {
    format!(
        "{name}\ttrain={:.4}\tval={:.4}\ttest={:.4}",
        m.train_accuracy, m.val_accuracy, m.test_accuracy
    )
}

fn train(args: &Common) -> Result<()> {
    let (dataset, cfg) = args.load()?;
    let outcome = run_pipeline(dataset.clone(), &cfg)?;
    let report_path = args.out.join("report.json");
    emit_report(&outcome.report, &report_path)?;
    let mut actions = String::new();
    for (i, a) in outcome.actions.values().iter().enumerate() {
        writeln!(actions, "{i}\t{a}").expect("string write");
    }
    write_file(&args.out.join("actions.tsv"), &actions)?;
    write_embedding(&outcome.grain.logits, &dataset.labels, &args.out.join("embedding.tsv"))?;
    println!("{}", summary("grain", &outcome.report.grain));
    for (name, m) in [("gcn", &outcome.report.gcn), ("mlp", &outcome.report.mlp)] {
        if let Some(m) = m {
            println!("{}", summary(name, m));
        }
    }
    info!("report written to {}", report_path.display());
    Ok(())
}

fn baseline(args: &Common, choice: BaselineChoice) -> Result<()> {
    let (dataset, cfg) = args.load()?;
    let kinds: &[BaselineKind] = match choice {
        BaselineChoice::Gcn => &[BaselineKind::Gcn],
        BaselineChoice::Mlp => &[BaselineKind::Mlp],
        BaselineChoice::All => &[BaselineKind::Gcn, BaselineKind::Mlp],
    };
    let mut results = serde_json::Map::new();
    for &kind in kinds {
        let fit = run_baseline(&dataset, kind, &cfg)?;
        let metrics = PhaseMetrics::from_fit(&fit);
        println!("{}", summary(kind.name(), &metrics));
        results.insert(kind.name().to_string(), serde_json::to_value(metrics).map_err(Error::Json)?);
    }
    let mut text = serde_json::to_string_pretty(&results).map_err(Error::Json)?;
    text.push('\n');
    write_file(&args.out.join("baseline.json"), &text)
}

fn embed(args: &Common) -> Result<()> {
    let (dataset, cfg) = args.load()?;
    cfg.validate()?;
    let cache = build_cache(&dataset, &cfg)?;
    let rl = run_rl_phase(&dataset, &cache, &cfg)?;
    let actions = derive_actions(&rl.policy, &dataset, cfg.gnn.k_max)?;
    let grain = run_gnn_phase(&dataset, &cache, &actions, &cfg)?;
    write_embedding(&grain.logits, &dataset.labels, &args.out.join("embedding.tsv"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(&args),
        Command::Baseline { common, model } => baseline(&common, model),
        Command::Homophily { data } => {
            let dataset = load_dataset(&data, 0)?;
            println!("{:.3}", dataset.homophily()?);
            Ok(())
        }
        Command::GenSynth(a) => {
            let cfg = SynthConfig {
                n: a.n,
                classes: a.classes,
                h_target: a.h,
                avg_degree: a.degree,
                dim: a.dim,
                class_separation: a.separation,
                seed: a.seed,
            };
            save_dataset(&generate_synthetic(&cfg)?, &a.out)
        }
        Command::Convert { content, cites, out, name } => {
            let name = name.unwrap_or_else(|| {
                out.file_name()
                    .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
            });
            let log = convert_content_cites(&content, &cites, &out, &name)?;
            println!("{}", serde_json::to_string(&log).map_err(Error::Json)?);
            Ok(())
        }
        Command::Gradcheck { seed, instances, eps } => {
            let checks = run_gradient_suite(instances, seed, eps)?;
            let mut failed = Vec::new();
            for c in &checks {
                let status = if c.passed() { "ok" } else { "FAIL" };
                println!("{}\t{:.3e}\t{:.0e}\t{status}", c.op, c.max_error, c.tolerance);
                if !c.passed() {
                    failed.push(c.op.as_str());
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("gradient check failed for {}", failed.join(", "))))
            }
        }
        Command::Embed(args) => embed(&args),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit status. Usage errors print clap's usage text; runtime
/// errors print one `error\t<kind>\t<message>` line on stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{message}", e.kind());
            1
        }
    }
}
