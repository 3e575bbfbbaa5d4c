//! Band-pass IIR design (bilinear transform of analog Butterworth/elliptic
//! prototypes), cascaded second-order-section filtering and epoching.

pub mod special;
mod zpk;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eegdata::Trial;
use crate::{Error, Result};

pub use zpk::Zpk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFamily {
    Butterworth,
    Elliptic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub family: FilterFamily,
    pub order: usize,
    pub band_hz: (f64, f64),
    pub passband_ripple_db: f64,
    pub stopband_atten_db: f64,
    pub sampling_rate_hz: f64,
}

impl FilterSpec {
    pub fn butterworth(order: usize, low: f64, high: f64, fs: f64) -> Self {
        Self {
            family: FilterFamily::Butterworth,
            order,
            band_hz: (low, high),
            passband_ripple_db: 1.0,
            stopband_atten_db: 50.0,
            sampling_rate_hz: fs,
        }
    }

    pub fn elliptic(order: usize, low: f64, high: f64, fs: f64) -> Self {
        Self {
            family: FilterFamily::Elliptic,
            ..Self::butterworth(order, low, high, fs)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (low, high) = self.band_hz;
        let fs = self.sampling_rate_hz;
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Argument(format!("sampling rate must be positive, got {fs}")));
        }
        if !(low > 0.0 && low < high && high < fs / 2.0) {
            return Err(Error::Argument(format!(
                "band ({low}, {high}) Hz must satisfy 0 < low < high < {}",
                fs / 2.0
            )));
        }
        if self.order == 0 {
            return Err(Error::Argument("filter order must be at least 1".into()));
        }
        if !(self.passband_ripple_db > 0.0 && self.stopband_atten_db > self.passband_ripple_db) {
            return Err(Error::Argument(format!(
                "need 0 < ripple ({}) < attenuation ({})",
                self.passband_ripple_db, self.stopband_atten_db
            )));
        }
        Ok(())
    }

    /// Pre-warped analog band edges in rad/s: (center, bandwidth).
    pub fn analog_band(&self) -> (f64, f64) {
        let fs = self.sampling_rate_hz;
        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let (w1, w2) = (warp(self.band_hz.0), warp(self.band_hz.1));
        ((w1 * w2).sqrt(), w2 - w1)
    }
}

/// One biquad, `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }

    /// Largest pole modulus of the section.
    pub fn pole_radius(&self) -> f64 {
        let [a1, a2] = self.a;
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        let r1 = (-a1 + disc) / 2.0;
        let r2 = (-a1 - disc) / 2.0;
        r1.norm().max(r2.norm())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub sampling_rate_hz: f64,
}

impl SosFilter {
    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sampling_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().max(1e-20).log10()
    }

    /// `n` evenly spaced frequencies over [0, fs/2), with magnitudes in dB.
    pub fn frequency_response(&self, n: usize) -> Vec<(f64, f64)> {
        let nyq = self.sampling_rate_hz / 2.0;
        (0..n)
            .map(|i| {
                let f = nyq * i as f64 / n as f64;
                (f, self.magnitude_db(f))
            })
            .collect()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(|s| s.pole_radius() < 1.0)
    }

    /// Causal filtering with zero initial state (transposed direct form II).
    pub fn filter_signal(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * out + z2;
                z2 = s.b[2] * input - s.a[1] * out;
                *v = out;
            }
        }
        y
    }
}

/// Analog low-pass prototype with passband edge at 1 rad/s.
pub fn analog_prototype(spec: &FilterSpec) -> Zpk {
    match spec.family {
        FilterFamily::Butterworth => zpk::butterworth_prototype(spec.order),
        FilterFamily::Elliptic => {
            zpk::elliptic_prototype(spec.order, spec.passband_ripple_db, spec.stopband_atten_db)
        }
    }
}

pub fn design_bandpass(spec: &FilterSpec) -> Result<SosFilter> {
    spec.validate()?;
    let proto = analog_prototype(spec);
    let (center, bandwidth) = spec.analog_band();
    let digital = proto
        .lowpass_to_bandpass(center, bandwidth)
        .bilinear(spec.sampling_rate_hz);
    let center_digital = 2.0 * (center / (2.0 * spec.sampling_rate_hz)).atan();
    let sections = digital.to_sos(center_digital)?;
    let filter = SosFilter {
        sections,
        sampling_rate_hz: spec.sampling_rate_hz,
    };
    if !filter.is_stable() {
        return Err(Error::Design(format!(
            "unstable section in {:?} order {} design for band {:?} Hz",
            spec.family, spec.order, spec.band_hz
        )));
    }
    Ok(filter)
}

pub fn apply_filter(filter: &SosFilter, trial: &Trial) -> Result<Trial> {
    let mut out = trial.samples.clone();
    for r in 0..out.nrows() {
        let row: Vec<f64> = trial.samples.row(r).iter().copied().collect();
        let y = filter.filter_signal(&row);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "filter produced non-finite output on trial {} channel {r}",
                trial.trial_id
            )));
        }
        for (c, v) in y.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(trial.with_samples(out))
}

/// Cuts `[onset, onset + duration)` seconds out of a trial sampled at `fs`.
pub fn extract_epoch(trial: &Trial, fs: f64, onset_s: f64, duration_s: f64) -> Result<Trial> {
    if !(onset_s >= 0.0) {
        return Err(Error::Argument(format!("epoch onset must be >= 0, got {onset_s}")));
    }
    let start = (onset_s * fs).round() as usize;
    let len = (duration_s * fs).round();
    if !(len >= 1.0) {
        return Err(Error::Argument(format!(
            "epoch of {duration_s} s at {fs} Hz is empty"
        )));
    }
    let len = len as usize;
    if start + len > trial.len() {
        return Err(Error::Argument(format!(
            "epoch [{start}, {}) exceeds trial {} length {}",
            start + len,
            trial.trial_id,
            trial.len()
        )));
    }
    Ok(trial.with_samples(trial.samples.columns(start, len).into_owned()))
}
