//! End-to-end orchestration: filter → epoch → split → CSP → cross-validate
//! → train → evaluate → select → graphs → separability report.
//!
//! Every stage is a pure function over in-memory values. [`run_stage`]
//! wraps each one with artifact IO so a stage can be rerun from the
//! upstream files already present in the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{self, CvSummary, EvalReport, TslrModel};
use crate::csp::{self, SpatialFilterBank};
use crate::dsp::{self, FilterSpec, SosFilter};
use crate::eegdata::{self, load_trialset, read_json, write_json, TrialSet};
use crate::fixture::{GroundTruth, GROUND_TRUTH_FILE};
use crate::graphnet::{self, ConnectivityGraph, NodeMetrics, Separability, METRIC_NAMES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Errp,
    MotorImagery,
}

/// How multiple band filters are combined before CSP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Only the first filter is used.
    #[default]
    Single,
    /// Each filter's output is stacked as extra channels.
    Concatenated,
}

impl DatasetKind {
    /// Default filters at sampling rate `fs`.
    pub fn default_filters(self, fs: f64) -> Vec<FilterSpec> {
        match self {
            DatasetKind::Errp => vec![FilterSpec::butterworth(5, 0.1, 10.0, fs)],
            DatasetKind::MotorImagery => vec![
                FilterSpec::elliptic(6, 8.0, 12.0, fs),
                FilterSpec::elliptic(6, 16.0, 24.0, fs),
            ],
        }
    }

    /// Default epoch window `(onset_s, duration_s)`.
    pub fn default_epoch(self) -> (f64, f64) {
        match self {
            DatasetKind::Errp => (0.0, 1.0),
            DatasetKind::MotorImagery => (0.0, 3.5),
        }
    }
}

/// Configuration file contents; every field is optional and falls back to
/// the defaults implied by `dataset_kind`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset_kind: Option<DatasetKind>,
    pub filters: Option<Vec<FilterSpec>>,
    pub band_mode: Option<BandMode>,
    pub epoch: Option<(f64, f64)>,
    pub n_filters: Option<usize>,
    pub lambda: Option<f64>,
    pub k_folds: Option<usize>,
    pub posterior_threshold: Option<f64>,
    pub top_edge_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub n_train: Option<usize>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset_kind: DatasetKind,
    /// `None` selects the kind's defaults at the data's sampling rate.
    pub filters: Option<Vec<FilterSpec>>,
    pub band_mode: BandMode,
    pub epoch: (f64, f64),
    pub n_filters: usize,
    /// `None` means `0.1 / n_train`.
    pub lambda: Option<f64>,
    pub k_folds: usize,
    pub posterior_threshold: f64,
    pub top_edge_fraction: f64,
    pub seed: u64,
    /// `None` uses the 200:80 train/test ratio.
    pub n_train: Option<usize>,
    pub input: PathBuf,
    pub output: PathBuf,
}

impl PipelineConfig {
    pub fn for_kind(kind: DatasetKind) -> Self {
        Self {
            dataset_kind: kind,
            filters: None,
            band_mode: BandMode::Single,
            epoch: kind.default_epoch(),
            n_filters: csp::DEFAULT_N_FILTERS,
            lambda: None,
            k_folds: classifier::DEFAULT_K_FOLDS,
            posterior_threshold: classifier::DEFAULT_THRESHOLD,
            top_edge_fraction: 0.1,
            seed: classifier::DEFAULT_SEED,
            n_train: None,
            input: PathBuf::from("manifest.json"),
            output: PathBuf::from("out"),
        }
    }

    /// Applies file overrides on top of the kind defaults. Relative paths
    /// in the file resolve against `base_dir`.
    pub fn from_file(file: ConfigFile, base_dir: &Path) -> Self {
        let kind = file.dataset_kind.unwrap_or(DatasetKind::MotorImagery);
        let mut cfg = Self::for_kind(kind);
        cfg.filters = file.filters;
        if let Some(v) = file.band_mode {
            cfg.band_mode = v;
        }
        if let Some(v) = file.epoch {
            cfg.epoch = v;
        }
        if let Some(v) = file.n_filters {
            cfg.n_filters = v;
        }
        cfg.lambda = file.lambda;
        if let Some(v) = file.k_folds {
            cfg.k_folds = v;
        }
        if let Some(v) = file.posterior_threshold {
            cfg.posterior_threshold = v;
        }
        if let Some(v) = file.top_edge_fraction {
            cfg.top_edge_fraction = v;
        }
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        cfg.n_train = file.n_train;
        if let Some(p) = file.input {
            cfg.input = base_dir.join(p);
        }
        if let Some(p) = file.output {
            cfg.output = base_dir.join(p);
        }
        cfg
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ConfigFile = read_json(path)?;
        Ok(Self::from_file(file, path.parent().unwrap_or(Path::new("."))))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Argument(format!("k_folds must be >= 2, got {}", self.k_folds)));
        }
        if !(self.posterior_threshold > 0.5 && self.posterior_threshold <= 1.0) {
            return Err(Error::Argument(format!(
                "posterior_threshold must be in (0.5, 1], got {}",
                self.posterior_threshold
            )));
        }
        if !(self.top_edge_fraction > 0.0 && self.top_edge_fraction <= 1.0) {
            return Err(Error::Argument(format!(
                "top_edge_fraction must be in (0, 1], got {}",
                self.top_edge_fraction
            )));
        }
        if self.n_filters < 2 || self.n_filters % 2 != 0 {
            return Err(Error::Argument(format!(
                "n_filters must be even and >= 2, got {}",
                self.n_filters
            )));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Argument(format!("lambda must be >= 0, got {l}")));
            }
        }
        let (onset, duration) = self.epoch;
        if !(onset >= 0.0 && duration > 0.0) {
            return Err(Error::Argument(format!("invalid epoch window {:?}", self.epoch)));
        }
        if let Some(filters) = &self.filters {
            if filters.is_empty() {
                return Err(Error::Argument("filter list is empty".into()));
            }
            for f in filters {
                f.validate()?;
            }
        }
        Ok(())
    }

    /// Filters in effect for data sampled at `fs`.
    pub fn filter_specs(&self, fs: f64) -> Result<Vec<FilterSpec>> {
        let mut specs = self
            .filters
            .clone()
            .unwrap_or_else(|| self.dataset_kind.default_filters(fs));
        if self.band_mode == BandMode::Single {
            specs.truncate(1);
        }
        for s in &specs {
            if (s.sampling_rate_hz - fs).abs() > 1e-9 * fs {
                return Err(Error::Argument(format!(
                    "filter designed for {} Hz but data is sampled at {fs} Hz",
                    s.sampling_rate_hz
                )));
            }
        }
        Ok(specs)
    }

    pub fn n_train_for(&self, total: usize) -> usize {
        self.n_train
            .unwrap_or_else(|| ((total as f64) * 200.0 / 280.0).round() as usize)
    }

    pub fn lambda_for(&self, n_train: usize) -> f64 {
        self.lambda.unwrap_or_else(|| classifier::default_lambda(n_train))
    }
}

/// A designed filter together with the spec it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignedFilter {
    pub spec: FilterSpec,
    pub sos: SosFilter,
}

pub fn design_filters(cfg: &PipelineConfig, fs: f64) -> Result<Vec<DesignedFilter>> {
    cfg.filter_specs(fs)?
        .into_iter()
        .map(|spec| {
            let sos = dsp::design_bandpass(&spec)?;
            Ok(DesignedFilter { spec, sos })
        })
        .collect()
}

/// Filters every trial (stacking band outputs in concatenated mode), then
/// cuts the configured epoch.
pub fn preprocess(cfg: &PipelineConfig, filters: &[DesignedFilter], raw: &TrialSet) -> Result<TrialSet> {
    let fs = raw.sampling_rate_hz();
    let (onset, duration) = cfg.epoch;
    let names = if filters.len() > 1 {
        Some(
            filters
                .iter()
                .flat_map(|f| {
                    let (lo, hi) = f.spec.band_hz;
                    raw.channel_names().iter().map(move |c| format!("{c}@{lo}-{hi}Hz"))
                })
                .collect(),
        )
    } else {
        None
    };
    raw.map_trials(names, |trial| {
        let bands = filters
            .iter()
            .map(|f| dsp::apply_filter(&f.sos, trial))
            .collect::<Result<Vec<_>>>()?;
        let stacked = if bands.len() == 1 {
            bands.into_iter().next().expect("one band")
        } else {
            let rows: Vec<_> = bands.iter().flat_map(|b| b.samples.row_iter()).collect();
            trial.with_samples(nalgebra::DMatrix::from_rows(&rows))
        };
        dsp::extract_epoch(&stacked, fs, onset, duration)
    })
}

pub fn split(cfg: &PipelineConfig, pre: &TrialSet) -> Result<(TrialSet, TrialSet)> {
    eegdata::split_train_test(pre, cfg.n_train_for(pre.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSelection {
    pub filter_index: usize,
    pub channel: String,
    pub eigenvalue: f64,
}

pub fn channel_table(bank: &SpatialFilterBank, names: &[String]) -> Result<Vec<ChannelSelection>> {
    Ok(csp::select_channels(bank, names)?
        .into_iter()
        .map(|(filter_index, channel)| ChannelSelection {
            filter_index,
            channel,
            eigenvalue: bank.eigenvalues[filter_index],
        })
        .collect())
}

pub fn cross_validate(cfg: &PipelineConfig, train: &TrialSet) -> Result<CvSummary> {
    let fold_train = train.len() - train.len() / cfg.k_folds;
    classifier::cross_validate(
        train,
        cfg.k_folds,
        cfg.lambda_for(fold_train),
        cfg.n_filters,
        cfg.seed,
    )
}

pub fn train_model(cfg: &PipelineConfig, train: &TrialSet, bank: &SpatialFilterBank) -> Result<TslrModel> {
    classifier::train(train, bank, cfg.lambda_for(train.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    All,
    Selected,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::All => "all",
            Condition::Selected => "selected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledGraph {
    pub condition: Condition,
    pub class: u8,
    pub class_name: String,
    pub n_trials: usize,
    pub graph: ConnectivityGraph,
    /// Strongest edges only, for display.
    pub top_graph: ConnectivityGraph,
    pub metrics: NodeMetrics,
}

/// Channels that carry the largest coefficient of some kept CSP pattern,
/// deduplicated, in montage order. These are the graph nodes.
pub fn graph_nodes(bank: &SpatialFilterBank, channel_names: &[String]) -> Result<Vec<usize>> {
    let mut nodes: Vec<usize> = csp::select_channels(bank, channel_names)?
        .into_iter()
        .map(|(_, name)| {
            channel_names
                .iter()
                .position(|c| *c == name)
                .expect("selected channel comes from the name list")
        })
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    Ok(nodes)
}

/// Per-class channel-space graphs over the evaluated trials, once with
/// every trial and once with only the selected ones. Nodes are the
/// CSP-selected channels. Order: (all, 0), (all, 1), (selected, 0),
/// (selected, 1).
pub fn build_graphs(
    cfg: &PipelineConfig,
    bank: &SpatialFilterBank,
    evaluated: &TrialSet,
    selected_ids: &[i64],
) -> Result<Vec<LabeledGraph>> {
    let nodes = graph_nodes(bank, evaluated.channel_names())?;
    let names: Vec<String> = nodes.iter().map(|&i| evaluated.channel_names()[i].clone()).collect();
    let mut out = Vec::with_capacity(4);
    for condition in [Condition::All, Condition::Selected] {
        for class in [0u8, 1] {
            let covs = evaluated
                .trials()
                .iter()
                .filter(|t| t.label == class)
                .filter(|t| condition == Condition::All || selected_ids.contains(&t.trial_id))
                .map(|t| {
                    let rows: Vec<_> = nodes.iter().map(|&i| t.samples.row(i)).collect();
                    csp::sample_covariance(&nalgebra::DMatrix::from_rows(&rows))
                })
                .collect::<Result<Vec<_>>>()?;
            let class_name = evaluated.class_names()[class as usize].clone();
            if covs.is_empty() {
                return Err(Error::Argument(format!(
                    "no {} trials of class {class_name} to build a graph from",
                    condition.as_str()
                )));
            }
            let graph = graphnet::build_graph(&covs, &names)?;
            let top_graph = graphnet::top_edges(&graph, cfg.top_edge_fraction)?;
            let metrics = NodeMetrics::compute(&graph);
            out.push(LabeledGraph {
                condition,
                class,
                class_name,
                n_trials: covs.len(),
                graph,
                top_graph,
                metrics,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub metrics: Vec<String>,
    pub all: Separability,
    pub selected: Separability,
    /// Metrics whose selected-trial separability is at least the all-trial one.
    pub improved: Vec<String>,
    pub n_improved: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted_irrelevant: Option<PlantedExclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedExclusion {
    /// Planted irrelevant trials among the evaluated trials.
    pub evaluated: usize,
    pub excluded: usize,
    pub exclusion_rate: f64,
}

fn find_graph(graphs: &[LabeledGraph], condition: Condition, class: u8) -> Result<&LabeledGraph> {
    graphs
        .iter()
        .find(|g| g.condition == condition && g.class == class)
        .ok_or_else(|| Error::Schema(format!("missing {} graph for class {class}", condition.as_str())))
}

pub fn separability_report(
    graphs: &[LabeledGraph],
    evaluated_ids: &[i64],
    selected_ids: &[i64],
    truth: Option<&GroundTruth>,
) -> Result<SeparabilityReport> {
    let sep = |c| -> Result<Separability> {
        graphnet::separability(&find_graph(graphs, c, 0)?.metrics, &find_graph(graphs, c, 1)?.metrics)
    };
    let all = sep(Condition::All)?;
    let selected = sep(Condition::Selected)?;
    let improved: Vec<String> = METRIC_NAMES
        .iter()
        .zip(all.values().iter().zip(selected.values()))
        .filter(|(_, (a, s))| s >= a)
        .map(|(n, _)| n.to_string())
        .collect();
    let planted_irrelevant = truth.map(|t| {
        let planted: Vec<i64> = t
            .irrelevant_ids
            .iter()
            .copied()
            .filter(|id| evaluated_ids.contains(id))
            .collect();
        let excluded = planted.iter().filter(|id| !selected_ids.contains(id)).count();
        PlantedExclusion {
            evaluated: planted.len(),
            excluded,
            exclusion_rate: if planted.is_empty() {
                1.0
            } else {
                excluded as f64 / planted.len() as f64
            },
        }
    });
    Ok(SeparabilityReport {
        metrics: METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
        all,
        selected,
        n_improved: improved.len(),
        improved,
        planted_irrelevant,
    })
}

/// Everything a full run produces, held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub filters: Vec<DesignedFilter>,
    pub bank: SpatialFilterBank,
    pub channels: Vec<ChannelSelection>,
    pub cv: CvSummary,
    pub model: TslrModel,
    pub report: EvalReport,
    pub selected: Vec<i64>,
    pub graphs: Vec<LabeledGraph>,
    pub separability: SeparabilityReport,
}

/// Runs the whole pipeline on an already loaded trial set.
pub fn run_in_memory(
    cfg: &PipelineConfig,
    raw: &TrialSet,
    truth: Option<&GroundTruth>,
) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let filters = design_filters(cfg, raw.sampling_rate_hz()).map_err(|e| e.in_stage("filter"))?;
    let pre = preprocess(cfg, &filters, raw).map_err(|e| e.in_stage("filter"))?;
    let (train, test) = split(cfg, &pre).map_err(|e| e.in_stage("split"))?;
    let bank = csp::fit_csp(&train, cfg.n_filters).map_err(|e| e.in_stage("fit-csp"))?;
    let channels = channel_table(&bank, train.channel_names()).map_err(|e| e.in_stage("fit-csp"))?;
    let cv = cross_validate(cfg, &train).map_err(|e| e.in_stage("cv"))?;
    let model = train_model(cfg, &train, &bank).map_err(|e| e.in_stage("train"))?;
    let report = classifier::evaluate(&model, &test).map_err(|e| e.in_stage("evaluate"))?;
    let selected = classifier::select_relevant(&report, cfg.posterior_threshold)
        .map_err(|e| e.in_stage("select"))?;
    let graphs = build_graphs(cfg, &model.filter_bank, &test, &selected).map_err(|e| e.in_stage("graph"))?;
    let evaluated: Vec<i64> = test.trials().iter().map(|t| t.trial_id).collect();
    let separability =
        separability_report(&graphs, &evaluated, &selected, truth).map_err(|e| e.in_stage("report"))?;
    Ok(PipelineOutcome {
        filters,
        bank,
        channels,
        cv,
        model,
        report,
        selected,
        graphs,
        separability,
    })
}

/// Artifact file names, flat in the output directory.
pub mod files {
    pub const FILTER: &str = "filter_design.json";
    pub const CSP_BANK: &str = "csp_bank.json";
    pub const CSP_CHANNELS: &str = "csp_channels.csv";
    pub const CV: &str = "cv_summary.json";
    pub const MODEL: &str = "train_model.json";
    pub const EVAL_JSON: &str = "evaluate_report.json";
    pub const EVAL_CSV: &str = "evaluate_trials.csv";
    pub const SELECTED: &str = "select_trials.json";
    pub const METRICS_CSV: &str = "graph_metrics.csv";
    pub const REPORT: &str = "report_separability.json";

    pub fn graph(condition: &str, class: u8) -> String {
        format!("graph_{condition}_class{class}.json")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Filter,
    FitCsp,
    Cv,
    Train,
    Evaluate,
    Select,
    Graph,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Filter,
        Stage::FitCsp,
        Stage::Cv,
        Stage::Train,
        Stage::Evaluate,
        Stage::Select,
        Stage::Graph,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Filter => "filter",
            Stage::FitCsp => "fit-csp",
            Stage::Cv => "cv",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Select => "select",
            Stage::Graph => "graph",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SelectedTrials {
    threshold: f64,
    trial_ids: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AggregateReport {
    accuracy: f64,
    precision: f64,
    recall: f64,
    n_trials: usize,
    positive_class: String,
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct MetricRow<'a> {
    node: &'a str,
    metric: &'a str,
    value: f64,
    condition: &'a str,
    class: &'a str,
}

/// Loaded, filtered and split input, shared by every stage.
struct Prepared {
    train: TrialSet,
    test: TrialSet,
}

fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    let raw = load_trialset(&cfg.input)?;
    let filters = design_filters(cfg, raw.sampling_rate_hz())?;
    let pre = preprocess(cfg, &filters, &raw)?;
    let (train, test) = split(cfg, &pre)?;
    Ok(Prepared { train, test })
}

fn load_truth(cfg: &PipelineConfig) -> Result<Option<GroundTruth>> {
    let path = cfg
        .input
        .parent()
        .unwrap_or(Path::new("."))
        .join(GROUND_TRUTH_FILE);
    if path.exists() {
        read_json(&path).map(Some)
    } else {
        Ok(None)
    }
}

/// Runs one stage, reading upstream artifacts from `cfg.output`.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<()> {
    cfg.validate()?;
    let out = &cfg.output;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let wrap = |r: Result<()>| r.map_err(|e| e.in_stage(stage.name()));
    wrap((|| match stage {
        Stage::Filter => {
            let raw = load_trialset(&cfg.input)?;
            let filters = design_filters(cfg, raw.sampling_rate_hz())?;
            write_json(&out.join(files::FILTER), &filters)
        }
        Stage::FitCsp => {
            let p = prepare(cfg)?;
            let bank = csp::fit_csp(&p.train, cfg.n_filters)?;
            write_json(&out.join(files::CSP_BANK), &bank)?;
            write_csv(&out.join(files::CSP_CHANNELS), &channel_table(&bank, p.train.channel_names())?)
        }
        Stage::Cv => {
            let p = prepare(cfg)?;
            write_json(&out.join(files::CV), &cross_validate(cfg, &p.train)?)
        }
        Stage::Train => {
            let p = prepare(cfg)?;
            let bank: SpatialFilterBank = read_json(&out.join(files::CSP_BANK))?;
            write_json(&out.join(files::MODEL), &train_model(cfg, &p.train, &bank)?)
        }
        Stage::Evaluate => {
            let p = prepare(cfg)?;
            let model: TslrModel = read_json(&out.join(files::MODEL))?;
            let report = classifier::evaluate(&model, &p.test)?;
            let aggregate = AggregateReport {
                accuracy: report.accuracy,
                precision: report.precision,
                recall: report.recall,
                n_trials: report.per_trial.len(),
                positive_class: p.test.class_names()[1].clone(),
            };
            write_json(&out.join(files::EVAL_JSON), &aggregate)?;
            write_csv(&out.join(files::EVAL_CSV), &report.per_trial)
        }
        Stage::Select => {
            let per_trial = read_eval_csv(&out.join(files::EVAL_CSV))?;
            let report = EvalReport::from_predictions(per_trial);
            let ids = classifier::select_relevant(&report, cfg.posterior_threshold)?;
            write_json(
                &out.join(files::SELECTED),
                &SelectedTrials {
                    threshold: cfg.posterior_threshold,
                    trial_ids: ids,
                },
            )
        }
        Stage::Graph => {
            let p = prepare(cfg)?;
            let model: TslrModel = read_json(&out.join(files::MODEL))?;
            let sel: SelectedTrials = read_json(&out.join(files::SELECTED))?;
            let graphs = build_graphs(cfg, &model.filter_bank, &p.test, &sel.trial_ids)?;
            for g in &graphs {
                write_json(&out.join(files::graph(g.condition.as_str(), g.class)), g)?;
            }
            let mut rows = Vec::new();
            for g in &graphs {
                let cols = g.metrics.columns();
                for (m, col) in METRIC_NAMES.iter().zip(cols) {
                    for (node, v) in g.metrics.nodes.iter().zip(col) {
                        rows.push(MetricRow {
                            node,
                            metric: m,
                            value: *v,
                            condition: g.condition.as_str(),
                            class: &g.class_name,
                        });
                    }
                }
            }
            write_csv(&out.join(files::METRICS_CSV), &rows)
        }
        Stage::Report => {
            let mut graphs = Vec::with_capacity(4);
            for c in [Condition::All, Condition::Selected] {
                for class in [0u8, 1] {
                    let g: LabeledGraph = read_json(&out.join(files::graph(c.as_str(), class)))?;
                    graphs.push(g);
                }
            }
            let sel: SelectedTrials = read_json(&out.join(files::SELECTED))?;
            let evaluated: Vec<i64> = read_eval_csv(&out.join(files::EVAL_CSV))?
                .iter()
                .map(|p| p.trial_id)
                .collect();
            let truth = load_truth(cfg)?;
            let report = separability_report(&graphs, &evaluated, &sel.trial_ids, truth.as_ref())?;
            write_json(&out.join(files::REPORT), &report)
        }
    })())
}

fn read_eval_csv(path: &Path) -> Result<Vec<classifier::TrialPrediction>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Runs every stage in order, each from the artifacts of the previous ones.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PathBuf> {
    for stage in Stage::ALL {
        run_stage(cfg, stage)?;
    }
    Ok(cfg.output.clone())
}

/// Prepared train/test split for callers outside the stage runner.
pub fn load_split(cfg: &PipelineConfig) -> Result<(TrialSet, TrialSet)> {
    let p = prepare(cfg)?;
    Ok((p.train, p.test))
}
