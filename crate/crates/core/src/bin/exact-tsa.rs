use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use exact_tsa::acs::SignatureMode;
use exact_tsa::clustering::ClusterBudget;
use exact_tsa::data::CasePreset;
use exact_tsa::pipeline::{self, CaseSpec, ExperimentConfig, Mode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "exact-tsa", version, about = "Exact and learned temporal aggregation of storage dispatch LPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full, oracle or ml experiment and write its reports.
    Run(Common),
    /// Train the empty-storage classifier only.
    Train(Common),
    /// Solve the full-scale model and dump per-period diagnostics.
    Inspect(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bess-solar, bess-wind, phs-solar or phs-wind.
    #[arg(long)]
    case: Option<CasePreset>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Cluster counts, e.g. 30..100:10 or 30,50,70.
    #[arg(long)]
    clusters: Option<String>,
    /// Share the cluster count across linked submodels instead of per submodel.
    #[arg(long)]
    global_clusters: bool,
    /// full or reduced.
    #[arg(long)]
    signature: Option<SignatureMode>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Classifier seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    demand_scale: Option<f64>,
    /// Evaluation series CSV (synthesized when absent).
    #[arg(long)]
    series: Option<PathBuf>,
    /// Training series CSV for ml mode.
    #[arg(long)]
    train_series: Option<PathBuf>,
    /// Load a trained classifier instead of training one.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    synth_seed: Option<u64>,
    /// Years of synthetic evaluation data.
    #[arg(long)]
    years: Option<usize>,
    /// Synthetic training years in ml mode.
    #[arg(long)]
    train_years: Option<usize>,
    /// Truncate the evaluation series to this many hours.
    #[arg(long)]
    hours: Option<usize>,
    #[arg(long)]
    start_hour: Option<usize>,
    /// Also write the full-scale LP in LP text format.
    #[arg(long)]
    dump_lp: bool,
}

impl Common {
    fn config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(c) = self.case {
            cfg.case = CaseSpec::Preset(c);
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(k) = &self.clusters {
            cfg.clusters = ExperimentConfig::parse_clusters(k).map_err(anyhow::Error::msg)?;
        }
        if self.global_clusters {
            cfg.cluster_budget = ClusterBudget::Global;
        }
        if let Some(s) = self.signature {
            cfg.signature = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = self.out {
            cfg.out_dir = o;
        }
        if let Some(d) = self.demand_scale {
            cfg.demand_scale = d;
        }
        if self.series.is_some() {
            cfg.series = self.series;
        }
        if self.train_series.is_some() {
            cfg.train_series = self.train_series;
        }
        if self.model.is_some() {
            cfg.ml.model_path = self.model;
        }
        if let Some(s) = self.synth_seed {
            cfg.synth.seed = s;
        }
        if let Some(y) = self.years {
            cfg.synth.years = y;
        }
        if let Some(y) = self.train_years {
            cfg.synth.train_years = y;
        }
        if self.hours.is_some() {
            cfg.synth.hours = self.hours;
        }
        if let Some(s) = self.start_hour {
            cfg.synth.start_hour = s;
        }
        cfg.dump_lp |= self.dump_lp;
        Ok(cfg)
    }
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn main_inner() -> Result<()> {
    match Cli::parse().command {
        Command::Run(c) => {
            let out = pipeline::run(&c.config()?)?;
            for s in &out.stages {
                let r = &s.report;
                println!(
                    "{}: OFV full {:.2} agg {:.2}, {} periods, speed-up {:.2}",
                    s.stage, r.ofv_full, r.ofv_agg, r.periods_total, r.speedup
                );
                for e in &r.errors {
                    let unit = if e.denominator_zero { "abs" } else { "%" };
                    println!("  {:<8} {:>12.6} {unit}", e.quantity.label(), e.error);
                }
            }
            for (set, r) in &out.classifier {
                println!("classifier {set}: accuracy {:.4}, balanced {:.4}", r.accuracy, r.balanced_accuracy);
            }
            print_files(&out.files);
        }
        Command::Train(c) => {
            let (trained, files) = pipeline::run_train(&c.config()?)?;
            println!(
                "kept {} features; validation accuracy {:.4}, balanced {:.4}",
                trained.selection.kept.len(),
                trained.validation.accuracy,
                trained.validation.balanced_accuracy
            );
            print_files(&files);
        }
        Command::Inspect(c) => print_files(&pipeline::run_inspect(&c.config()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
