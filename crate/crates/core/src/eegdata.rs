//! Labeled multichannel trials and their on-disk manifest format.
//!
//! A trial set lives in a directory: a JSON manifest plus one raw binary
//! file per trial holding little-endian `f64` samples, row-major
//! (channels × samples).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One epoch of EEG: a channels × time-points matrix with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub samples: DMatrix<f64>,
    pub label: u8,
    pub trial_id: i64,
}

impl Trial {
    pub fn new(samples: DMatrix<f64>, label: u8, trial_id: i64) -> Result<Self> {
        if label > 1 {
            return Err(Error::Data {
                trial_id,
                message: format!("label must be 0 or 1, got {label}"),
            });
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                trial_id,
                message: format!("non-finite sample at flat index {pos}"),
            });
        }
        Ok(Self {
            samples,
            label,
            trial_id,
        })
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Same label and id, new sample matrix.
    pub fn with_samples(&self, samples: DMatrix<f64>) -> Trial {
        Trial {
            samples,
            label: self.label,
            trial_id: self.trial_id,
        }
    }
}

/// An ordered collection of equally shaped trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    trials: Vec<Trial>,
    channel_names: Vec<String>,
    sampling_rate_hz: f64,
    class_names: [String; 2],
}

impl TrialSet {
    pub fn new(
        trials: Vec<Trial>,
        channel_names: Vec<String>,
        sampling_rate_hz: f64,
        class_names: [String; 2],
    ) -> Result<Self> {
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::Schema(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        if class_names[0] == class_names[1] {
            return Err(Error::Schema("class names must be distinct".into()));
        }
        let ch = channel_names.len();
        let t = trials.first().map(Trial::len);
        for trial in &trials {
            if trial.channels() != ch {
                return Err(Error::Schema(format!(
                    "trial {} has {} channels, expected {ch}",
                    trial.trial_id,
                    trial.channels()
                )));
            }
            if Some(trial.len()) != t {
                return Err(Error::Schema(format!(
                    "trial {} has {} samples, expected {}",
                    trial.trial_id,
                    trial.len(),
                    t.unwrap_or(0)
                )));
            }
        }
        let mut ids: Vec<i64> = trials.iter().map(|t| t.trial_id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Schema(format!("duplicate trial id {}", w[0])));
        }
        Ok(Self {
            trials,
            channel_names,
            sampling_rate_hz,
            class_names,
        })
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn class_names(&self) -> &[String; 2] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    /// Samples per trial, zero for an empty set.
    pub fn n_samples(&self) -> usize {
        self.trials.first().map_or(0, Trial::len)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.trials.iter().map(|t| t.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for t in &self.trials {
            counts[t.label as usize] += 1;
        }
        counts
    }

    /// Errors unless both classes have at least `min_per_class` trials.
    pub fn require_both_classes(&self, min_per_class: usize) -> Result<()> {
        let counts = self.class_counts();
        for (label, &n) in counts.iter().enumerate() {
            if n < min_per_class {
                return Err(Error::Argument(format!(
                    "class {label} ({}) has {n} trials, need at least {min_per_class}",
                    self.class_names[label]
                )));
            }
        }
        Ok(())
    }

    /// New set sharing metadata with `self` but holding `trials`.
    pub fn with_trials(&self, trials: Vec<Trial>) -> Result<TrialSet> {
        TrialSet::new(
            trials,
            self.channel_names.clone(),
            self.sampling_rate_hz,
            self.class_names.clone(),
        )
    }

    /// Trials at the given positions, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<TrialSet> {
        let trials = indices
            .iter()
            .map(|&i| {
                self.trials
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Argument(format!("trial index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_trials(trials)
    }

    /// Applies `f` to every trial, keeping metadata. `f` may change the
    /// channel count (e.g. spatial projection), in which case `names`
    /// replaces the channel names.
    pub fn map_trials<F>(&self, names: Option<Vec<String>>, mut f: F) -> Result<TrialSet>
    where
        F: FnMut(&Trial) -> Result<Trial>,
    {
        let trials = self.trials.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        TrialSet::new(
            trials,
            names.unwrap_or_else(|| self.channel_names.clone()),
            self.sampling_rate_hz,
            self.class_names.clone(),
        )
    }
}

/// First `n_train` trials (manifest order) become the training set, the
/// rest the test set.
pub fn split_train_test(set: &TrialSet, n_train: usize) -> Result<(TrialSet, TrialSet)> {
    if n_train == 0 || n_train >= set.len() {
        return Err(Error::Argument(format!(
            "n_train must be in 1..{}, got {n_train}",
            set.len()
        )));
    }
    let (head, tail) = set.trials.split_at(n_train);
    Ok((set.with_trials(head.to_vec())?, set.with_trials(tail.to_vec())?))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub id: i64,
    pub label: u8,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub channel_names: Vec<String>,
    pub sampling_rate_hz: f64,
    pub class_names: [String; 2],
    pub channels: usize,
    pub samples: usize,
    pub trials: Vec<ManifestEntry>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_trialset(manifest_path: &Path) -> Result<TrialSet> {
    let manifest: Manifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    if manifest.channel_names.len() != manifest.channels {
        return Err(Error::Schema(format!(
            "{} channel names for {} channels",
            manifest.channel_names.len(),
            manifest.channels
        )));
    }
    let mut trials = Vec::with_capacity(manifest.trials.len());
    for entry in &manifest.trials {
        let ch = entry.channels.unwrap_or(manifest.channels);
        let t = entry.samples.unwrap_or(manifest.samples);
        if ch != manifest.channels || t != manifest.samples {
            return Err(Error::Schema(format!(
                "trial {} is {ch}x{t}, manifest declares {}x{}",
                entry.id, manifest.channels, manifest.samples
            )));
        }
        let path = base.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != ch * t * 8 {
            return Err(Error::Schema(format!(
                "trial {} file {} holds {} bytes, expected {}",
                entry.id,
                entry.file,
                bytes.len(),
                ch * t * 8
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let samples = DMatrix::from_row_slice(ch, t, &values);
        trials.push(Trial::new(samples, entry.label, entry.id)?);
    }
    TrialSet::new(
        trials,
        manifest.channel_names,
        manifest.sampling_rate_hz,
        manifest.class_names,
    )
}

/// Writes `set` into `dir` as `manifest.json` plus `trials/<id>.bin`.
/// Returns the manifest path.
pub fn save_trialset(set: &TrialSet, dir: &Path) -> Result<PathBuf> {
    let trial_dir = dir.join("trials");
    fs::create_dir_all(&trial_dir).map_err(|e| Error::io(&trial_dir, e))?;
    let mut entries = Vec::with_capacity(set.len());
    for trial in set.trials() {
        let file = format!("trials/{:05}.bin", trial.trial_id);
        let path = dir.join(&file);
        let mut bytes = Vec::with_capacity(trial.samples.len() * 8);
        for r in 0..trial.channels() {
            for v in trial.samples.row(r).iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestEntry {
            id: trial.trial_id,
            label: trial.label,
            file,
            channels: None,
            samples: None,
        });
    }
    let manifest = Manifest {
        channel_names: set.channel_names.clone(),
        sampling_rate_hz: set.sampling_rate_hz,
        class_names: set.class_names.clone(),
        channels: set.n_channels(),
        samples: set.n_samples(),
        trials: entries,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}
