//! Browser bindings. Every export returns a JSON string so the page can
//! stay framework-free.

use eegconn::dsp::{design_bandpass, FilterSpec};
use eegconn::fixture::{generate, FixtureSpec};
use eegconn::pipeline::{run_in_memory, DatasetKind, PipelineConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_js<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

fn err(e: eegconn::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Magnitude response of a band-pass design as `[[hz, db], ...]`.
#[wasm_bindgen]
pub fn filter_response(
    elliptic: bool,
    order: usize,
    low_hz: f64,
    high_hz: f64,
    fs: f64,
    points: usize,
) -> Result<String, JsError> {
    let spec = if elliptic {
        FilterSpec::elliptic(order, low_hz, high_hz, fs)
    } else {
        FilterSpec::butterworth(order, low_hz, high_hz, fs)
    };
    let sos = design_bandpass(&spec).map_err(err)?;
    Ok(to_js(&sos.frequency_response(points)))
}

#[derive(Serialize)]
struct TrialPoint {
    id: i64,
    label: u8,
    posterior: f64,
    selected: bool,
    irrelevant: bool,
}

#[derive(Serialize)]
struct GraphView {
    condition: &'static str,
    class_name: String,
    n_trials: usize,
    nodes: Vec<String>,
    /// Row-major weights of the strongest edges.
    weights: Vec<f64>,
}

#[derive(Serialize)]
struct Explorer {
    accuracy: f64,
    cv_accuracy: f64,
    n_evaluated: usize,
    n_selected: usize,
    trials: Vec<TrialPoint>,
    metrics: Vec<String>,
    all: [f64; 4],
    selected: [f64; 4],
    improved: Vec<String>,
    exclusion_rate: Option<f64>,
    graphs: Vec<GraphView>,
}

/// Generates a synthetic motor-imagery fixture and runs the full pipeline
/// on it, returning posteriors, separability and the top-edge graphs.
#[wasm_bindgen]
pub fn explore_fixture(
    seed: u64,
    snr: f64,
    irrelevant_fraction: f64,
    threshold: f64,
    lambda: f64,
    top_fraction: f64,
) -> Result<String, JsError> {
    let spec = FixtureSpec {
        snr: (snr > 0.0).then_some(snr),
        irrelevant_fraction,
        ..FixtureSpec::default()
    };
    let (set, truth) = generate(seed, &spec).map_err(err)?;
    let mut cfg = PipelineConfig::for_kind(DatasetKind::MotorImagery);
    cfg.seed = seed;
    cfg.posterior_threshold = threshold;
    cfg.lambda = (lambda > 0.0).then_some(lambda);
    cfg.top_edge_fraction = top_fraction;
    let out = run_in_memory(&cfg, &set, Some(&truth)).map_err(err)?;
    let trials = out
        .report
        .per_trial
        .iter()
        .map(|p| TrialPoint {
            id: p.trial_id,
            label: p.true_label,
            posterior: p.posterior,
            selected: out.selected.contains(&p.trial_id),
            irrelevant: truth.irrelevant_ids.contains(&p.trial_id),
        })
        .collect();
    let graphs = out
        .graphs
        .iter()
        .map(|g| GraphView {
            condition: g.condition.as_str(),
            class_name: g.class_name.clone(),
            n_trials: g.n_trials,
            nodes: g.top_graph.nodes.clone(),
            weights: g.top_graph.weights.transpose().as_slice().to_vec(),
        })
        .collect();
    let sep = out.separability;
    Ok(to_js(&Explorer {
        accuracy: out.report.accuracy,
        cv_accuracy: out.cv.mean_accuracy,
        n_evaluated: out.report.per_trial.len(),
        n_selected: out.selected.len(),
        trials,
        metrics: sep.metrics,
        all: sep.all.values(),
        selected: sep.selected.values(),
        improved: sep.improved,
        exclusion_rate: sep.planted_irrelevant.map(|p| p.exclusion_rate),
        graphs,
    }))
}
