use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use scriptdate::features::FeatureKind;
use scriptdate::learn::Condition;
use scriptdate_cli::config::ExperimentConfig;
use scriptdate_cli::experiment::run_experiment;
use scriptdate_cli::stages::{self, CODEBOOK_FILE, MANIFEST_FILE};
use scriptdate_cli::synth;

#[derive(Parser)]
#[command(name = "scriptdate", version, about = "Style-based dating of handwritten documents")]
struct Cli {
    /// TOML experiment configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic stage (CV seeds excepted).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for every artifact the command writes.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ManifestArg {
    /// JSON-lines manifest.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic corpus into <out-dir>/images with <out-dir>/manifest.jsonl.
    Synth,
    /// Otsu-binarize every page.
    Binarize(ManifestArg),
    /// Write elastic variants of every source page.
    Augment {
        #[command(flatten)]
        m: ManifestArg,
        /// Copies per source (overrides the config).
        #[arg(long)]
        copies: Option<usize>,
    },
    /// Extract one feature kind; `junclets` writes raw junction descriptors.
    Extract {
        #[command(flatten)]
        m: ManifestArg,
        #[arg(long)]
        feature: FeatureKind,
        /// Output file; defaults to <out-dir>/<feature>.bin.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a CSV copy.
        #[arg(long)]
        csv: bool,
    },
    /// Train a temporal codebook, sweeping sizes by cross-validation when several are given.
    Codebook {
        #[command(flatten)]
        m: ManifestArg,
        #[arg(long)]
        descriptors: PathBuf,
        /// Comma-separated sub-codebook sizes (default: the configured candidates).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Encode raw descriptors with a trained codebook.
    Encode {
        #[command(flatten)]
        m: ManifestArg,
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate the cost grid and fit the final model.
    Train {
        #[command(flatten)]
        m: ManifestArg,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_enum, default_value = "non-augmented")]
        condition: ConditionArg,
    },
    /// Evaluate a trained model on a held-out manifest.
    Eval {
        #[command(flatten)]
        m: ManifestArg,
        #[arg(long)]
        features: PathBuf,
        /// Directory holding model.bin and scaler.json (default: <out-dir>).
        #[arg(long)]
        model_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "non-augmented")]
        condition: ConditionArg,
    },
    /// Run the full two-condition experiment.
    Experiment,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ConditionArg {
    NonAugmented,
    Augmented,
}

impl From<ConditionArg> for Condition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::NonAugmented => Condition::NonAugmented,
            ConditionArg::Augmented => Condition::Augmented,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn feature_file(out_dir: &Path, kind: FeatureKind) -> PathBuf {
    out_dir.join(format!("{}.bin", kind.name().to_ascii_lowercase()))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli)?;
    let out = &cli.out_dir;
    match &cli.command {
        Command::Synth => {
            let m = synth::generate(&cfg.corpus.synth, out)?;
            println!("{} samples -> {}", m.len(), out.join(MANIFEST_FILE).display());
        }
        Command::Binarize(m) => {
            let res = stages::cmd_binarize(&m.manifest, out, cfg.polarity)?;
            println!("{} pages binarized -> {}", res.len(), out.display());
        }
        Command::Augment { m, copies } => {
            let mut params = cfg.morph;
            if let Some(c) = copies {
                params.copies = *c;
            }
            let res = stages::cmd_augment(&m.manifest, out, &params, cfg.morph_stage, cfg.polarity)?;
            println!("{} entries -> {}", res.len(), out.join(MANIFEST_FILE).display());
        }
        Command::Extract { m, feature, out: file, csv } => {
            let file = file.clone().unwrap_or_else(|| feature_file(out, *feature));
            let n = stages::cmd_extract(&m.manifest, *feature, &file, &cfg.hinge, cfg.polarity, *csv)?;
            println!("{n} records -> {}", file.display());
        }
        Command::Codebook { m, descriptors, sizes } => {
            let sizes = sizes.clone().unwrap_or_else(|| cfg.codebook.sizes.clone());
            let run = stages::cmd_codebook(
                &m.manifest,
                descriptors,
                &sizes,
                &cfg.codebook.som,
                cfg.codebook.max_patterns_per_year,
                &cfg.cv,
                out,
            )?;
            println!("sub-codebook size {} -> {}", run.selected_size, out.join(CODEBOOK_FILE).display());
        }
        Command::Encode {
            m,
            descriptors,
            codebook,
            out: file,
        } => {
            let cb = codebook.clone().unwrap_or_else(|| out.join(CODEBOOK_FILE));
            let file = file.clone().unwrap_or_else(|| feature_file(out, FeatureKind::Junclets));
            let n = stages::cmd_encode(&m.manifest, descriptors, &cb, &file)?;
            println!("{n} vectors -> {}", file.display());
        }
        Command::Train { m, features, condition } => {
            let res = stages::cmd_train(&m.manifest, features, (*condition).into(), &cfg.cv, out)?;
            let s = res.selected();
            println!("C = {} (cv CS(0) {:.2} ± {:.2}, MAE {:.2})", res.selected_c, s.cs0_mean, s.cs0_sd, s.mae_mean);
        }
        Command::Eval {
            m,
            features,
            model_dir,
            condition,
        } => {
            let dir = model_dir.clone().unwrap_or_else(|| out.clone());
            let r = stages::cmd_eval(&m.manifest, features, &dir, (*condition).into(), out)?;
            println!("MAE {:.3}  CS(0) {:.2}  CS(25) {:.2}", r.mae, r.cs0, r.cs25);
        }
        Command::Experiment => {
            let o = run_experiment(&cfg, out)?;
            for r in &o.report.runs {
                println!(
                    "{:<11} {:<14} C={:<10} MAE {:>7.3}  CS(0) {:>6.2}  CS(25) {:>6.2}",
                    r.feature.name(),
                    r.condition.name(),
                    r.selected_c,
                    r.holdout.mae,
                    r.holdout.cs0,
                    r.holdout.cs25
                );
            }
            println!("results -> {}", out.join("results.csv").display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
