//! Experiment orchestration, work accounting and report emission.

mod config;
mod report;

pub use config::{CaseSpec, ExperimentConfig, MlSettings, Mode, SynthSettings};
pub use report::{write_classifier, write_error_sweep, write_report, write_speedup_sweep, StageReport, SweepPoint};

use crate::acs::{cut_partition, diagnose, signature_of, AcsTolerances, CutRule, PeriodDiagnostics, SignatureMode};
use crate::clustering::{apply_plan, plan_clusters, save_plans, ClusterBudget, ClusterError, ClusterPlan};
use crate::data::{load_series, net_demand, synth_series_with, CaseConfig, DataError, SeriesFrame, HOURS_PER_YEAR};
use crate::exec::{default_threads, par_map};
use crate::lp::{write_lp_format, LpSolution};
use crate::ml::{
    build_features, evaluate, label_periods, select_features, train_forest, write_importances, ClassifierReport,
    FeatureMatrix, ForestModel, MlError, SelectionReport,
};
use crate::tsa::{
    aggregate, compare, disaggregate, solve_full, solve_partition, Partition, PartitionSolution, SolveConfig, TsaError,
};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input data: {0}")]
    Data(#[from] DataError),
    #[error("{0}")]
    Tsa(#[from] TsaError),
    #[error("classifier: {0}")]
    Ml(#[from] MlError),
    #[error("clustering: {0}")]
    Cluster(#[from] ClusterError),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

/// Deterministic effort proxy: simplex iterations times equality rows.
pub fn work_units(sol: &LpSolution) -> f64 {
    sol.iterations as f64 * sol.y.len() as f64
}

/// `work_full` over the largest submodel work, the parallel lower bound.
pub fn speedup(work_full: f64, works: &[f64]) -> f64 {
    let bound = works.iter().cloned().fold(0.0, f64::max);
    if bound > 0.0 {
        work_full / bound
    } else {
        0.0
    }
}

fn output_err(path: &Path, e: impl ToString) -> PipelineError {
    PipelineError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_file<F, E>(path: &Path, f: F) -> Result<(), PipelineError>
where
    F: FnOnce(BufWriter<File>) -> Result<(), E>,
    E: ToString,
{
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    f(BufWriter::new(file)).map_err(|e| output_err(path, e))
}

/// Diagnostics of the single full-scale submodel.
pub fn full_diagnostics(full: &PartitionSolution, case: &CaseConfig) -> Vec<PeriodDiagnostics> {
    let s = &full.submodels[0];
    diagnose(&s.lp, &s.solution, &s.map, &s.reps.weights, case, &AcsTolerances::default())
        .expect("full-scale solution was checked optimal")
}

/// Everything produced by the perfect-information pipeline.
pub struct OracleOutcome {
    pub full: PartitionSolution,
    pub diagnostics: Vec<PeriodDiagnostics>,
    pub disaggregated: Partition,
    pub disaggregated_solution: PartitionSolution,
    pub aggregated: Partition,
    pub aggregated_solution: PartitionSolution,
    pub stages: Vec<StageReport>,
}

/// Solve, cut at empty storage, merge by signature and re-solve.
pub fn run_oracle(
    case: &CaseConfig,
    frame: &SeriesFrame,
    mode: SignatureMode,
    rule: CutRule,
    cfg: &SolveConfig,
) -> Result<OracleOutcome, PipelineError> {
    let full = solve_full(case, frame, cfg)?;
    let diagnostics = full_diagnostics(&full, case);
    let soc: Vec<f64> = diagnostics.iter().map(|d| d.primal.e).collect();
    let disaggregated = cut_partition(&soc, case.storage_emin, rule);
    let disaggregated_solution = solve_partition(case, frame, &disaggregated, cfg)?;
    let quantum = AcsTolerances::default().dual_quantum;
    let sigs: Vec<_> = diagnostics.iter().map(|d| signature_of(d, mode, quantum)).collect();
    let aggregated = aggregate(&disaggregated, &sigs);
    let aggregated_solution = solve_partition(case, frame, &aggregated, cfg)?;
    let stages = vec![
        StageReport {
            stage: "disaggregated".into(),
            report: compare(&full, &disaggregated_solution, &disaggregated),
        },
        StageReport {
            stage: "aggregated".into(),
            report: compare(&full, &aggregated_solution, &aggregated),
        },
    ];
    Ok(OracleOutcome {
        full,
        diagnostics,
        disaggregated,
        disaggregated_solution,
        aggregated,
        aggregated_solution,
        stages,
    })
}

/// Consecutive windows of at most one year.
pub fn year_windows(len: usize) -> Vec<std::ops::Range<usize>> {
    (0..len.div_ceil(HOURS_PER_YEAR))
        .map(|y| y * HOURS_PER_YEAR..((y + 1) * HOURS_PER_YEAR).min(len))
        .collect()
}

/// Empty-storage labels from full-scale solves of each year separately.
pub fn label_years(case: &CaseConfig, frame: &SeriesFrame, threads: usize) -> Result<Vec<bool>, PipelineError> {
    let windows = year_windows(frame.horizon_len());
    let inner = SolveConfig::default();
    let per_year = par_map(threads, &windows, |_, w| -> Result<Vec<bool>, PipelineError> {
        let full = solve_full(case, &frame.window(w.clone()), &inner)?;
        Ok(label_periods(&full_diagnostics(&full, case), case.storage_emin))
    });
    let mut labels = Vec::with_capacity(frame.horizon_len());
    for y in per_year {
        labels.extend(y?);
    }
    Ok(labels)
}

pub struct TrainedClassifier {
    pub selection: SelectionReport,
    pub model: ForestModel,
    pub validation: ClassifierReport,
}

/// Feature selection and grid-searched forest on a labelled training frame.
pub fn train_classifier(
    case: &CaseConfig,
    frame: &SeriesFrame,
    labels: &[bool],
    ml: &MlSettings,
    seed: u64,
    threads: usize,
) -> Result<TrainedClassifier, PipelineError> {
    let x = build_features(frame, case, ml.max_lag);
    let selection = select_features(&x, labels, &ml.selection);
    if selection.kept.is_empty() {
        return Err(PipelineError::Ml(MlError::MissingFeature("no feature passed selection".into())));
    }
    let kept: FeatureMatrix = x.select(&selection.kept).expect("kept names come from x");
    let outcome = train_forest(&kept, labels, &ml.grid, seed, threads)?;
    Ok(TrainedClassifier {
        selection,
        model: outcome.model,
        validation: outcome.validation,
    })
}

pub fn predict_flags(model: &ForestModel, case: &CaseConfig, frame: &SeriesFrame, max_lag: usize) -> Result<Vec<bool>, MlError> {
    model.predict(&build_features(frame, case, max_lag))
}

/// Clusters the linked submodels of `partition` at each `k` and compares the
/// result with `reference`.
pub fn cluster_sweep(
    case: &CaseConfig,
    frame: &SeriesFrame,
    reference: &PartitionSolution,
    partition: &Partition,
    ks: &[usize],
    budget: ClusterBudget,
    cfg: &SolveConfig,
) -> Result<(Vec<SweepPoint>, Vec<ClusterPlan>), PipelineError> {
    let nd = net_demand(frame, case);
    let mut points = Vec::with_capacity(ks.len());
    let mut plans = Vec::with_capacity(ks.len());
    for &k in ks {
        let plan = plan_clusters(partition, &nd, k, budget, cfg.threads)?;
        let clustered = apply_plan(partition, &plan)?;
        let sol = solve_partition(case, frame, &clustered, cfg)?;
        points.push(SweepPoint {
            k,
            report: compare(reference, &sol, &clustered),
        });
        plans.push(plan);
    }
    Ok((points, plans))
}

/// Reports and artifacts of one run.
pub struct RunOutput {
    pub stages: Vec<StageReport>,
    pub sweep: Vec<SweepPoint>,
    pub classifier: Vec<(String, ClassifierReport)>,
    pub files: Vec<PathBuf>,
}

fn load_frame(path: &Path, cfg: &ExperimentConfig) -> Result<SeriesFrame, PipelineError> {
    let mut frame = load_series(path, &cfg.schema)?;
    frame.scale_demand(cfg.demand_scale);
    Ok(frame)
}

fn truncate(frame: SeriesFrame, s: &SynthSettings) -> Result<SeriesFrame, PipelineError> {
    match s.hours {
        Some(h) => {
            let end = s.start_hour + h;
            if h == 0 || end > frame.horizon_len() {
                return Err(PipelineError::Config(format!(
                    "hours {}..{end} exceed the {}-hour series",
                    s.start_hour,
                    frame.horizon_len()
                )));
            }
            Ok(frame.window(s.start_hour..end))
        }
        None => Ok(frame),
    }
}

/// Evaluation series and, in ml mode, the training series.
pub fn load_inputs(cfg: &ExperimentConfig) -> Result<(SeriesFrame, Option<SeriesFrame>), PipelineError> {
    let mut params = cfg.synth.params.clone();
    params.demand_scale *= cfg.demand_scale;
    let profile = cfg.case.profile();
    match cfg.mode {
        Mode::Full | Mode::Oracle => {
            let frame = match &cfg.series {
                Some(p) => load_frame(p, cfg)?,
                None => synth_series_with(&params, cfg.synth.seed, cfg.synth.years, profile)?,
            };
            Ok((truncate(frame, &cfg.synth)?, None))
        }
        Mode::Ml => match (&cfg.series, &cfg.train_series) {
            (Some(test), Some(train)) => Ok((truncate(load_frame(test, cfg)?, &cfg.synth)?, Some(load_frame(train, cfg)?))),
            (Some(test), None) => Ok((truncate(load_frame(test, cfg)?, &cfg.synth)?, None)),
            _ => {
                let years = cfg.synth.train_years + 1;
                let all = synth_series_with(&params, cfg.synth.seed, years, profile)?;
                let split = cfg.synth.train_years * HOURS_PER_YEAR;
                let train = all.window(0..split);
                let test = truncate(all.window(split..all.horizon_len()), &cfg.synth)?;
                Ok((test, (split > 0).then_some(train)))
            }
        },
    }
}

fn resolve_threads(t: usize) -> usize {
    if t == 0 {
        default_threads()
    } else {
        t
    }
}

/// Trains the classifier of an ml configuration and writes the model and
/// feature importances.
pub fn run_train(cfg: &ExperimentConfig) -> Result<(TrainedClassifier, Vec<PathBuf>), PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let ml_cfg = ExperimentConfig {
        mode: Mode::Ml,
        ..cfg.clone()
    };
    let (_, train) = load_inputs(&ml_cfg)?;
    let train = train.ok_or_else(|| PipelineError::Config("no training series".into()))?;
    let case = cfg.case.config();
    let threads = resolve_threads(cfg.threads);
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| output_err(&cfg.out_dir, e))?;
    let labels = label_years(&case, &train, threads)?;
    let trained = train_classifier(&case, &train, &labels, &cfg.ml, cfg.seed, threads)?;
    let model_path = cfg.out_dir.join("classifier.forest");
    trained.model.save(&model_path).map_err(|e| output_err(&model_path, e))?;
    let imp_path = cfg.out_dir.join("feature_importance.csv");
    write_file(&imp_path, |w| write_importances(&trained.selection, w))?;
    Ok((trained, vec![model_path, imp_path]))
}

/// Full-scale solve of the evaluation series with per-period diagnostics and
/// the partition cut at empty storage.
pub fn run_inspect(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let case = cfg.case.config();
    let solve_cfg = SolveConfig {
        threads: resolve_threads(cfg.threads),
        ..Default::default()
    };
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| output_err(out, e))?;
    let eval_cfg = ExperimentConfig {
        mode: Mode::Full,
        ..cfg.clone()
    };
    let (frame, _) = load_inputs(&eval_cfg)?;
    let full = solve_full(&case, &frame, &solve_cfg)?;
    let diag = full_diagnostics(&full, &case);
    let mut files = Vec::new();
    let path = out.join("diagnostics.csv");
    write_file(&path, |w| crate::acs::write_diagnostics(&diag, w))?;
    files.push(path);
    let soc: Vec<f64> = diag.iter().map(|d| d.primal.e).collect();
    let path = out.join("partition.json");
    cut_partition(&soc, case.storage_emin, cfg.cut_rule)
        .save(&path)
        .map_err(|e| output_err(&path, e))?;
    files.push(path);
    if cfg.dump_lp {
        let path = out.join("full.lp");
        write_file(&path, |w| write_lp_format(&full.submodels[0].lp, w))?;
        files.push(path);
    }
    Ok(files)
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let case = cfg.case.config();
    let threads = resolve_threads(cfg.threads);
    let solve_cfg = SolveConfig {
        threads,
        ..Default::default()
    };
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| output_err(out, e))?;
    let (frame, train) = load_inputs(cfg)?;
    let mut files = Vec::new();
    let mut stages = Vec::new();
    let mut sweep = Vec::new();
    let mut classifier = Vec::new();
    let mode = cfg.mode.to_string();

    match cfg.mode {
        Mode::Full => {
            let full = solve_full(&case, &frame, &solve_cfg)?;
            let diag = full_diagnostics(&full, &case);
            let path = out.join("diagnostics.csv");
            write_file(&path, |w| crate::acs::write_diagnostics(&diag, w))?;
            files.push(path);
            if cfg.dump_lp {
                let path = out.join("full.lp");
                write_file(&path, |w| write_lp_format(&full.submodels[0].lp, w))?;
                files.push(path);
            }
            let identity = Partition::identity(frame.horizon_len());
            stages.push(StageReport {
                stage: "full".into(),
                report: compare(&full, &full, &identity),
            });
        }
        Mode::Oracle => {
            let o = run_oracle(&case, &frame, cfg.signature, cfg.cut_rule, &solve_cfg)?;
            let path = out.join("diagnostics.csv");
            write_file(&path, |w| crate::acs::write_diagnostics(&o.diagnostics, w))?;
            files.push(path);
            let path = out.join("partition.json");
            o.aggregated.save(&path).map_err(|e| output_err(&path, e))?;
            files.push(path);
            if cfg.dump_lp {
                let path = out.join("full.lp");
                write_file(&path, |w| write_lp_format(&o.full.submodels[0].lp, w))?;
                files.push(path);
            }
            stages = o.stages;
        }
        Mode::Ml => {
            let model = match &cfg.ml.model_path {
                Some(p) => ForestModel::load(p)?,
                None => {
                    let train = train.ok_or_else(|| PipelineError::Config("no training series".into()))?;
                    let labels = label_years(&case, &train, threads)?;
                    let trained = train_classifier(&case, &train, &labels, &cfg.ml, cfg.seed, threads)?;
                    let path = out.join("classifier.forest");
                    trained.model.save(&path).map_err(|e| output_err(&path, e))?;
                    files.push(path);
                    let path = out.join("feature_importance.csv");
                    write_file(&path, |w| write_importances(&trained.selection, w))?;
                    files.push(path);
                    classifier.push(("validation".to_string(), trained.validation));
                    trained.model
                }
            };
            let full = solve_full(&case, &frame, &solve_cfg)?;
            let diag = full_diagnostics(&full, &case);
            let truth = label_periods(&diag, case.storage_emin);
            let x = build_features(&frame, &case, cfg.ml.max_lag);
            classifier.push(("test".to_string(), evaluate(&model, &x, &truth)?));
            let predicted = model.predict(&x)?;
            let partition = disaggregate(&predicted);
            let dis = solve_partition(&case, &frame, &partition, &solve_cfg)?;
            stages.push(StageReport {
                stage: "disaggregated".into(),
                report: compare(&full, &dis, &partition),
            });
            let path = out.join("partition.json");
            partition.save(&path).map_err(|e| output_err(&path, e))?;
            files.push(path);

            let (points, plans) =
                cluster_sweep(&case, &frame, &full, &partition, &cfg.clusters, cfg.cluster_budget, &solve_cfg)?;
            sweep = points;
            let path = out.join("clusters.json");
            save_plans(&plans, &path).map_err(|e| output_err(&path, e))?;
            files.push(path);
            let path = out.join("error_vs_clusters.csv");
            write_file(&path, |w| write_error_sweep(&sweep, w))?;
            files.push(path);
            let path = out.join("speedup_vs_clusters.csv");
            write_file(&path, |w| write_speedup_sweep(&sweep, w))?;
            files.push(path);
            let path = out.join("classifier.csv");
            let rows: Vec<(&str, ClassifierReport)> = classifier.iter().map(|(n, r)| (n.as_str(), *r)).collect();
            write_file(&path, |w| write_classifier(&rows, w))?;
            files.push(path);
        }
    }
    let path = out.join("report.csv");
    write_file(&path, |w| write_report(&cfg.case.name(), &mode, &stages, w))?;
    files.push(path);
    Ok(RunOutput {
        stages,
        sweep,
        classifier,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpStatus;

    #[test]
    fn speedup_arithmetic() {
        assert_eq!(speedup(100.0, &[5.0, 3.0, 2.0]), 20.0);
        assert_eq!(speedup(7.0, &[7.0]), 1.0);
        assert_eq!(speedup(187e-3 / 77e-4, &[1.0]).round(), 24.0);
        assert_eq!((187e-3 / 51e-5_f64).round(), 367.0);
    }

    #[test]
    fn zero_iterations_is_zero_work() {
        let sol = LpSolution {
            status: LpStatus::Optimal,
            objective: 0.0,
            x: vec![],
            y: vec![0.0; 3],
            d: vec![],
            iterations: 0,
            work: 0.0,
        };
        assert_eq!(work_units(&sol), 0.0);
    }

    #[test]
    fn year_windows_cover() {
        assert_eq!(year_windows(8736 * 2 + 5), vec![0..8736, 8736..17472, 17472..17477]);
        assert_eq!(year_windows(100), vec![0..100]);
    }
}
