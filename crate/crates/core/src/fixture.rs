//! Seeded synthetic trial sets with planted class structure and a known
//! subset of "irrelevant" trials whose class signal is replaced by a
//! class-neutral mixture.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::eegdata::{save_trialset, write_json, Trial, TrialSet};
use crate::riemann::sym_apply;
use crate::{Error, Result};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub n_channels: usize,
    pub trials_per_class: [usize; 2],
    /// Signal-to-noise power ratio per channel; `None` means noise-free.
    pub snr: Option<f64>,
    pub irrelevant_fraction: f64,
    pub sampling_rate_hz: f64,
    pub duration_s: f64,
    /// Band holding the oscillatory sources.
    pub band_hz: (f64, f64),
    pub class_names: [String; 2],
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_channels: 6,
            trials_per_class: [100, 100],
            snr: Some(4.0),
            irrelevant_fraction: 0.25,
            sampling_rate_hz: 100.0,
            duration_s: 4.0,
            band_hz: (8.5, 11.5),
            class_names: ["foot".into(), "right".into()],
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels < 2 {
            return Err(Error::Argument("fixture needs at least 2 channels".into()));
        }
        if self.trials_per_class.iter().any(|&n| n == 0) {
            return Err(Error::Argument("each class needs at least one trial".into()));
        }
        if let Some(snr) = self.snr {
            if !(snr > 0.0 && snr.is_finite()) {
                return Err(Error::Argument(format!("snr must be positive, got {snr}")));
            }
        }
        if !(0.0..=1.0).contains(&self.irrelevant_fraction) {
            return Err(Error::Argument(format!(
                "irrelevant fraction must be in [0, 1], got {}",
                self.irrelevant_fraction
            )));
        }
        let (lo, hi) = self.band_hz;
        if !(self.sampling_rate_hz > 0.0 && lo > 0.0 && lo < hi && hi < self.sampling_rate_hz / 2.0) {
            return Err(Error::Argument(format!(
                "band {:?} Hz invalid for sampling rate {}",
                self.band_hz, self.sampling_rate_hz
            )));
        }
        if !(self.duration_s * self.sampling_rate_hz >= 2.0) {
            return Err(Error::Argument("trials must hold at least 2 samples".into()));
        }
        if self.class_names[0] == self.class_names[1] {
            return Err(Error::Argument("class names must differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub spec: FixtureSpec,
    pub irrelevant_ids: Vec<i64>,
}

/// Class covariance templates: each class couples a different group of
/// channels and concentrates power on a different end of the montage.
fn class_covariance(n: usize, class: u8) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(n, n);
    let group = n.div_ceil(2);
    for i in 0..n {
        let pos = if class == 0 { i } else { n - 1 - i };
        c[(i, i)] = 1.0 + 2.0 * (group.saturating_sub(pos) as f64) / group as f64;
    }
    let members: Vec<usize> = (0..n)
        .filter(|&i| if class == 0 { i < group } else { i >= n - group })
        .collect();
    for &i in &members {
        for &j in &members {
            if i != j {
                c[(i, j)] = 0.6 * (c[(i, i)] * c[(j, j)]).sqrt();
            }
        }
    }
    c
}

/// Unit-variance narrow-band source: a few random-phase sinusoids in `band`.
fn narrowband_source(rng: &mut ChaCha8Rng, band: (f64, f64), fs: f64, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for _ in 0..4 {
        let f = rng.random_range(band.0..band.1);
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp: f64 = 0.5 + rng.random::<f64>();
        for (t, v) in x.iter_mut().enumerate() {
            *v += amp * (2.0 * PI * f * t as f64 / fs + phase).sin();
        }
    }
    let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let s = var.sqrt().max(1e-12);
    x.iter_mut().for_each(|v| *v /= s);
    x
}

/// Generates the trial set and ground truth in memory.
pub fn generate(seed: u64, spec: &FixtureSpec) -> Result<(TrialSet, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_channels;
    let t = (spec.duration_s * spec.sampling_rate_hz).round() as usize;
    let covs = [class_covariance(n, 0), class_covariance(n, 1)];
    let mixing = [
        sym_apply(&covs[0], f64::sqrt),
        sym_apply(&covs[1], f64::sqrt),
    ];
    let neutral = sym_apply(&((&covs[0] + &covs[1]) * 0.5), f64::sqrt);

    let mut planned: Vec<(u8, bool)> = Vec::new();
    for class in [0u8, 1] {
        let count = spec.trials_per_class[class as usize];
        let n_irrelevant = (spec.irrelevant_fraction * count as f64).round() as usize;
        planned.extend((0..count).map(|i| (class, i < n_irrelevant)));
    }
    planned.shuffle(&mut rng);

    let mut trials = Vec::with_capacity(planned.len());
    let mut irrelevant_ids = Vec::new();
    for (k, &(label, irrelevant)) in planned.iter().enumerate() {
        let id = k as i64 + 1;
        let mut sources = DMatrix::zeros(n, t);
        for r in 0..n {
            let s = narrowband_source(&mut rng, spec.band_hz, spec.sampling_rate_hz, t);
            for (c, v) in s.into_iter().enumerate() {
                sources[(r, c)] = v;
            }
        }
        // Exactly uncorrelated unit-variance sources, so trial covariances
        // scatter only through noise and gain.
        let gram = &sources * sources.transpose() / t as f64;
        let sources = sym_apply(&gram, |v| 1.0 / v.sqrt()) * sources;
        let mix = if irrelevant { &neutral } else { &mixing[label as usize] };
        let gain = 1.0 + 0.1 * (rng.random::<f64>() - 0.5);
        let mut x = mix * sources * gain;
        if let Some(snr) = spec.snr {
            for r in 0..n {
                let power = x.row(r).iter().map(|v| v * v).sum::<f64>() / t as f64;
                let sd = (power / snr).sqrt();
                for c in 0..t {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    x[(r, c)] += sd * e;
                }
            }
        }
        if irrelevant {
            irrelevant_ids.push(id);
        }
        trials.push(Trial::new(x, label, id)?);
    }
    let channel_names = (1..=n).map(|i| format!("ch{i}")).collect();
    let set = TrialSet::new(
        trials,
        channel_names,
        spec.sampling_rate_hz,
        spec.class_names.clone(),
    )?;
    Ok((
        set,
        GroundTruth {
            seed,
            spec: spec.clone(),
            irrelevant_ids,
        },
    ))
}

/// Writes a fixture manifest directory and its ground-truth sidecar.
/// Returns the manifest path.
pub fn generate_fixture(seed: u64, spec: &FixtureSpec, dir: &Path) -> Result<PathBuf> {
    let (set, truth) = generate(seed, spec)?;
    let manifest = save_trialset(&set, dir)?;
    write_json(&dir.join(GROUND_TRUTH_FILE), &truth)?;
    Ok(manifest)
}
