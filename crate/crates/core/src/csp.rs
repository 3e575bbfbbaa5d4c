//! Common Spatial Patterns.
//!
//! Filters come from the simultaneous diagonalization of the two
//! trace-normalized class-mean covariances: whiten the composite
//! `S₀ + S₁`, then diagonalize the whitened `S₁`. Row `i` of `W` then
//! satisfies `w S₁ wᵀ = λᵢ` and `w S₀ wᵀ = 1 − λᵢ`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::eegdata::{Trial, TrialSet};
use crate::riemann::{shrink, SpdMatrix};
use crate::{Error, Result};

/// Shrinkage applied to every covariance used downstream of CSP.
pub const SHRINKAGE: f64 = 1e-6;

pub const DEFAULT_N_FILTERS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFilterBank {
    /// n_filters × Ch, one spatial filter per row.
    #[serde(with = "crate::matrix_serde")]
    pub w: DMatrix<f64>,
    /// Ch × n_filters, the matching columns of `W⁻¹`.
    #[serde(with = "crate::matrix_serde")]
    pub patterns: DMatrix<f64>,
    /// Class-1 variance fraction per kept filter, descending.
    pub eigenvalues: Vec<f64>,
    pub n_filters: usize,
}

impl SpatialFilterBank {
    pub fn n_channels(&self) -> usize {
        self.w.ncols()
    }

    /// Names for the projected signals: `csp1`, `csp2`, ...
    pub fn filter_names(&self) -> Vec<String> {
        (1..=self.n_filters).map(|i| format!("csp{i}")).collect()
    }
}

/// `X Xᵀ / (T − 1)` without centering or regularization.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = x.ncols();
    if t < 2 {
        return Err(Error::Argument(format!(
            "covariance needs at least 2 samples, got {t}"
        )));
    }
    let c = x * x.transpose() / (t as f64 - 1.0);
    Ok((&c + c.transpose()) * 0.5)
}

/// Trace-normalized mean covariance of each class, indexed by label.
pub fn class_mean_covariances(set: &TrialSet) -> Result<[DMatrix<f64>; 2]> {
    let ch = set.n_channels();
    let mut sums = [DMatrix::zeros(ch, ch), DMatrix::zeros(ch, ch)];
    let counts = set.class_counts();
    for trial in set.trials() {
        sums[trial.label as usize] += sample_covariance(&trial.samples)?;
    }
    for (label, sum) in sums.iter_mut().enumerate() {
        let tr = sum.trace();
        if !(tr > 0.0) || counts[label] == 0 {
            return Err(Error::Numeric(format!(
                "class {label} has zero total variance"
            )));
        }
        *sum /= tr;
    }
    Ok(sums)
}

fn is_singular(m: &DMatrix<f64>) -> bool {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    !(eig.min() > 1e-10 * eig.max().abs())
}

/// Eigenpairs sorted by descending value, ties by ascending original index.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

pub fn fit_csp(train: &TrialSet, n_filters: usize) -> Result<SpatialFilterBank> {
    let ch = train.n_channels();
    if n_filters == 0 || n_filters % 2 != 0 || n_filters > ch {
        return Err(Error::Argument(format!(
            "n_filters must be even and in 2..={ch}, got {n_filters}"
        )));
    }
    train.require_both_classes(2)?;
    let [mut s0, mut s1] = class_mean_covariances(train)?;
    if is_singular(&(&s0 + &s1)) {
        s0 = shrink(&s0, SHRINKAGE);
        s1 = shrink(&s1, SHRINKAGE);
        if is_singular(&(&s0 + &s1)) {
            return Err(Error::Numeric(
                "composite covariance is singular even after shrinkage".into(),
            ));
        }
    }

    let composite = SymmetricEigen::new(&s0 + &s1);
    let u = &composite.eigenvectors;
    let inv_sqrt = composite.eigenvalues.map(|v| 1.0 / v.sqrt());
    let sqrt = composite.eigenvalues.map(f64::sqrt);
    let whitening = DMatrix::from_diagonal(&inv_sqrt) * u.transpose();
    let s1_white = &whitening * &s1 * whitening.transpose();
    let (lambdas, b) = sorted_eigen((&s1_white + s1_white.transpose()) * 0.5);

    let mut w_full = b.transpose() * &whitening;
    let mut patterns_full = u * DMatrix::from_diagonal(&sqrt) * &b;
    // Sign convention: largest-magnitude coefficient of each filter positive.
    for i in 0..ch {
        let row = w_full.row(i);
        let imax = row.transpose().iamax();
        if row[imax] < 0.0 {
            w_full.row_mut(i).neg_mut();
            patterns_full.column_mut(i).neg_mut();
        }
    }

    let half = n_filters / 2;
    let keep: Vec<usize> = (0..half).chain(ch - half..ch).collect();
    let w = DMatrix::from_fn(n_filters, ch, |r, c| w_full[(keep[r], c)]);
    let patterns = DMatrix::from_fn(ch, n_filters, |r, c| patterns_full[(r, keep[c])]);
    let eigenvalues = keep.iter().map(|&i| lambdas[i].clamp(0.0, 1.0)).collect();
    Ok(SpatialFilterBank {
        w,
        patterns,
        eigenvalues,
        n_filters,
    })
}

/// `Z = W X`.
pub fn project(bank: &SpatialFilterBank, trial: &Trial) -> Result<Trial> {
    if trial.channels() != bank.n_channels() {
        return Err(Error::Argument(format!(
            "trial {} has {} channels, filter bank expects {}",
            trial.trial_id,
            trial.channels(),
            bank.n_channels()
        )));
    }
    Ok(trial.with_samples(&bank.w * &trial.samples))
}

pub fn project_set(bank: &SpatialFilterBank, set: &TrialSet) -> Result<TrialSet> {
    set.map_trials(Some(bank.filter_names()), |t| project(bank, t))
}

/// Sample covariance of a (projected) trial, with shrinkage.
pub fn trial_covariance(projected: &Trial) -> Result<SpdMatrix> {
    let c = sample_covariance(&projected.samples)?;
    if c.amax() == 0.0 {
        return Err(Error::Numeric(format!(
            "trial {} is all zeros after projection",
            projected.trial_id
        )));
    }
    SpdMatrix::new(shrink(&c, SHRINKAGE))
}

pub fn trial_covariances(projected: &TrialSet) -> Result<Vec<SpdMatrix>> {
    projected.trials().iter().map(trial_covariance).collect()
}

/// For each kept pattern, the channel with the largest absolute coefficient
/// (lowest index on ties).
pub fn select_channels(
    bank: &SpatialFilterBank,
    channel_names: &[String],
) -> Result<Vec<(usize, String)>> {
    if channel_names.len() != bank.patterns.nrows() {
        return Err(Error::Argument(format!(
            "{} channel names for {} pattern rows",
            channel_names.len(),
            bank.patterns.nrows()
        )));
    }
    Ok(bank
        .patterns
        .column_iter()
        .enumerate()
        .map(|(f, col)| {
            let mut best = 0;
            for (i, v) in col.iter().enumerate() {
                if v.abs() > col[best].abs() {
                    best = i;
                }
            }
            (f, channel_names[best].clone())
        })
        .collect())
}
