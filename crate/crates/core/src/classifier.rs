//! Tangent-space logistic regression (TSLR).
//!
//! Trial covariances are mapped to the tangent space at their Log-Euclidean
//! mean, standardized per dimension, and fed to an L1-regularized logistic
//! regression solved by proximal gradient descent.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csp::{self, SpatialFilterBank};
use crate::eegdata::TrialSet;
use crate::riemann::{tangent_map, ReferencePoint, SpdMatrix};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_K_FOLDS: usize = 10;
pub const DEFAULT_SEED: u64 = 42;

/// Default L1 strength for a training set of `n` trials.
pub fn default_lambda(n: usize) -> f64 {
    0.1 / n.max(1) as f64
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss of `(w, b)` on rows of `x` with 0/1 labels `y`.
pub fn logistic_loss(x: &DMatrix<f64>, y: &[u8], w: &DVector<f64>, b: f64) -> f64 {
    let z = x * w;
    let n = y.len() as f64;
    z.iter()
        .zip(y)
        .map(|(&zi, &yi)| softplus(zi + b) - f64::from(yi) * (zi + b))
        .sum::<f64>()
        / n
}

/// Gradient of [`logistic_loss`] with respect to `(w, b)`.
pub fn logistic_gradient(
    x: &DMatrix<f64>,
    y: &[u8],
    w: &DVector<f64>,
    b: f64,
) -> (DVector<f64>, f64) {
    let n = y.len() as f64;
    let z = x * w;
    let resid = DVector::from_iterator(
        y.len(),
        z.iter().zip(y).map(|(&zi, &yi)| sigmoid(zi + b) - f64::from(yi)),
    );
    let gw = x.transpose() * &resid / n;
    (gw, resid.sum() / n)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest violation of the first-order optimality conditions of the
/// L1-penalized problem (zero at a minimizer).
pub fn optimality_gap(gw: &DVector<f64>, gb: f64, w: &DVector<f64>, lambda: f64) -> f64 {
    gw.iter()
        .zip(w.iter())
        .map(|(&g, &wj)| {
            if wj != 0.0 {
                (g + lambda * wj.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(gb.abs(), f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: DVector<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
    /// Penalized objective after each accepted iterate, starting at zero weights.
    pub objective_history: Vec<f64>,
}

fn penalized(x: &DMatrix<f64>, y: &[u8], w: &DVector<f64>, b: f64, lambda: f64) -> f64 {
    logistic_loss(x, y, w, b) + lambda * w.lp_norm(1)
}

/// Power-iteration estimate of the gradient's Lipschitz constant.
fn lipschitz_estimate(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let mut v = DVector::from_element(x.ncols() + 1, 1.0);
    let mut est = 1.0;
    for _ in 0..50 {
        let w = v.rows(0, x.ncols()).into_owned();
        let b = v[x.ncols()];
        let xv = x * w + DVector::from_element(x.nrows(), b);
        let mut next = DVector::zeros(x.ncols() + 1);
        next.rows_mut(0, x.ncols()).copy_from(&(x.transpose() * &xv));
        next[x.ncols()] = xv.sum();
        let norm = next.norm();
        if norm == 0.0 {
            return 1.0;
        }
        est = norm / v.norm();
        v = next / norm;
    }
    0.25 * est / n
}

/// Minimizes mean logistic loss + `lambda`·‖w‖₁ (bias unpenalized) with
/// monotone accelerated proximal gradient and backtracking.
pub fn fit_l1_logistic(
    x: &DMatrix<f64>,
    y: &[u8],
    lambda: f64,
    opts: SolverOptions,
) -> Result<LogisticFit> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::Argument(format!(
            "{} feature rows for {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!("lambda must be >= 0, got {lambda}")));
    }
    let d = x.ncols();
    let mut w = DVector::zeros(d);
    let mut b = 0.0;
    let mut obj = penalized(x, y, &w, b, lambda);
    let mut history = vec![obj];
    let mut step = 1.0 / lipschitz_estimate(x).max(1e-12);

    // Extrapolated point and momentum state.
    let (mut yw, mut yb) = (w.clone(), b);
    let mut momentum = 1.0f64;
    let mut gap = f64::INFINITY;

    for iter in 0..opts.max_iter {
        let (gw, gb) = logistic_gradient(x, y, &w, b);
        gap = optimality_gap(&gw, gb, &w, lambda);
        if gap <= opts.tol {
            return Ok(LogisticFit {
                weights: w,
                bias: b,
                iterations: iter,
                gap,
                converged: true,
                objective_history: history,
            });
        }

        let f_y = logistic_loss(x, y, &yw, yb);
        let (gyw, gyb) = logistic_gradient(x, y, &yw, yb);
        let (zw, zb) = loop {
            let zw = (&yw - &gyw * step).map(|v| soft_threshold(v, step * lambda));
            let zb = yb - step * gyb;
            let dw = &zw - &yw;
            let db = zb - yb;
            let quad = f_y + gyw.dot(&dw) + gyb * db + (dw.norm_squared() + db * db) / (2.0 * step);
            if logistic_loss(x, y, &zw, zb) <= quad + 1e-15 * quad.abs() || step < 1e-20 {
                break (zw, zb);
            }
            step *= 0.5;
        };

        let z_obj = penalized(x, y, &zw, zb, lambda);
        // Adaptive restart: drop the momentum once it points uphill.
        let uphill = (&yw - &zw).dot(&(&zw - &w)) + (yb - zb) * (zb - b) > 0.0;
        if uphill || z_obj > obj {
            momentum = 1.0;
        }
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let (prev_w, prev_b) = (w.clone(), b);
        if z_obj <= obj {
            w = zw.clone();
            b = zb;
            obj = z_obj;
        }
        let a = momentum / next_momentum;
        let c = (momentum - 1.0) / next_momentum;
        yw = &w + (&zw - &w) * a + (&w - &prev_w) * c;
        yb = b + a * (zb - b) + c * (b - prev_b);
        momentum = next_momentum;
        history.push(obj);
    }
    Ok(LogisticFit {
        weights: w,
        bias: b,
        iterations: opts.max_iter,
        gap,
        converged: false,
        objective_history: history,
    })
}

/// Per-dimension affine standardization fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &DMatrix<f64>) -> Self {
        let n = features.nrows() as f64;
        let mut mean = Vec::with_capacity(features.ncols());
        let mut std = Vec::with_capacity(features.ncols());
        for col in features.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            std.push(if s > 1e-12 { s } else { 1.0 });
        }
        Self { mean, std }
    }

    pub fn apply_row(&self, v: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(x, (m, s))| (x - m) / s),
        )
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> DMatrix<f64> {
        let d = self.mean.len();
        let mut out = DMatrix::zeros(rows.len(), d);
        for (i, r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from(&self.apply_row(r).transpose());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TslrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub standardizer: Standardizer,
    pub reference: ReferencePoint,
    pub filter_bank: SpatialFilterBank,
    pub iterations: usize,
}

impl TslrModel {
    fn score(&self, covariance: &SpdMatrix) -> Result<f64> {
        if covariance.dim() != self.reference.dim() {
            return Err(Error::Argument(format!(
                "covariance is {0}x{0}, model expects {1}x{1}",
                covariance.dim(),
                self.reference.dim()
            )));
        }
        let s = tangent_map(&self.reference, covariance)?;
        let z = self.standardizer.apply_row(&s.values);
        Ok(z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias)
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

/// Posterior probability of class 1.
pub fn predict_proba(model: &TslrModel, covariance: &SpdMatrix) -> Result<f64> {
    Ok(sigmoid(model.score(covariance)?))
}

/// Fits the tangent-space classifier on precomputed (projected) covariances.
pub fn train_on_covariances(
    covariances: &[SpdMatrix],
    labels: &[u8],
    bank: &SpatialFilterBank,
    lambda: f64,
    opts: SolverOptions,
) -> Result<TslrModel> {
    if covariances.len() != labels.len() {
        return Err(Error::Argument("covariance and label counts differ".into()));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::Argument("training data must contain both classes".into()));
    }
    let reference = ReferencePoint::fit(covariances)?;
    let features = covariances
        .iter()
        .map(|c| tangent_map(&reference, c).map(|v| v.values))
        .collect::<Result<Vec<_>>>()?;
    let raw = DMatrix::from_fn(features.len(), features[0].len(), |r, c| features[r][c]);
    let standardizer = Standardizer::fit(&raw);
    let x = standardizer.apply(&features);
    let fit = fit_l1_logistic(&x, labels, lambda, opts)?;
    if !fit.converged {
        return Err(Error::Convergence {
            iterations: fit.iterations,
            gap: fit.gap,
        });
    }
    Ok(TslrModel {
        weights: fit.weights.iter().copied().collect(),
        bias: fit.bias,
        lambda,
        standardizer,
        reference,
        filter_bank: bank.clone(),
        iterations: fit.iterations,
    })
}

/// Projects `train_set` through `bank` and fits the classifier.
pub fn train(train_set: &TrialSet, bank: &SpatialFilterBank, lambda: f64) -> Result<TslrModel> {
    train_set.require_both_classes(1)?;
    let projected = csp::project_set(bank, train_set)?;
    let covs = csp::trial_covariances(&projected)?;
    train_on_covariances(&covs, &train_set.labels(), bank, lambda, SolverOptions::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPrediction {
    pub trial_id: i64,
    pub true_label: u8,
    pub predicted_label: u8,
    /// Posterior of class 1.
    pub posterior: f64,
}

impl TrialPrediction {
    pub fn from_posterior(trial_id: i64, true_label: u8, posterior: f64) -> Self {
        Self {
            trial_id,
            true_label,
            predicted_label: u8::from(posterior >= 0.5),
            posterior,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.true_label == self.predicted_label
    }

    /// Posterior of the predicted class.
    pub fn confidence(&self) -> f64 {
        self.posterior.max(1.0 - self.posterior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub per_trial: Vec<TrialPrediction>,
}

impl EvalReport {
    /// Aggregates with class 1 as the positive class. Precision (recall) is
    /// 0 when nothing is predicted (labelled) positive.
    pub fn from_predictions(per_trial: Vec<TrialPrediction>) -> Self {
        let (mut tp, mut fp, mut fneg, mut tn) = (0usize, 0usize, 0usize, 0usize);
        for p in &per_trial {
            match (p.true_label, p.predicted_label) {
                (1, 1) => tp += 1,
                (0, 1) => fp += 1,
                (1, 0) => fneg += 1,
                _ => tn += 1,
            }
        }
        let pct = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                100.0 * num as f64 / den as f64
            }
        };
        Self {
            accuracy: pct(tp + tn, per_trial.len()),
            precision: pct(tp, tp + fp),
            recall: pct(tp, tp + fneg),
            per_trial,
        }
    }
}

pub fn evaluate(model: &TslrModel, test_set: &TrialSet) -> Result<EvalReport> {
    let projected = csp::project_set(&model.filter_bank, test_set)?;
    let per_trial = projected
        .trials()
        .iter()
        .map(|t| {
            let cov = csp::trial_covariance(t)?;
            let p = predict_proba(model, &cov)?;
            Ok(TrialPrediction::from_posterior(t.trial_id, t.label, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_predictions(per_trial))
}

/// Ids of trials classified correctly with predicted-class confidence of at
/// least `threshold`, in report order.
pub fn select_relevant(report: &EvalReport, threshold: f64) -> Result<Vec<i64>> {
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(Error::Argument(format!(
            "threshold must be in (0.5, 1], got {threshold}"
        )));
    }
    Ok(report
        .per_trial
        .iter()
        .filter(|p| p.is_correct() && p.confidence() >= threshold)
        .map(|p| p.trial_id)
        .collect())
}

/// Test-fold positions for stratified k-fold assignment. Each class is
/// shuffled with `seed` and dealt round-robin, continuing the fold counter
/// across classes so fold sizes stay balanced.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} trials, fewer than k = {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Stratified k-fold accuracy. CSP, reference mean and standardization are
/// refit on every training fold.
pub fn cross_validate(
    set: &TrialSet,
    k: usize,
    lambda: f64,
    n_filters: usize,
    seed: u64,
) -> Result<CvSummary> {
    let folds = stratified_folds(&set.labels(), k, seed)?;
    let mut accs = Vec::with_capacity(k);
    for test_idx in &folds {
        let train_idx: Vec<usize> = (0..set.len()).filter(|i| test_idx.binary_search(i).is_err()).collect();
        let train_set = set.select(&train_idx)?;
        let test_set = set.select(test_idx)?;
        let bank = csp::fit_csp(&train_set, n_filters)?;
        let model = train(&train_set, &bank, lambda)?;
        accs.push(evaluate(&model, &test_set)?.accuracy);
    }
    let mean = accs.iter().sum::<f64>() / k as f64;
    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k as f64;
    Ok(CvSummary {
        k,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        fold_accuracies: accs,
    })
}
