//! Zero-pole-gain representation and the analog→digital transforms.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::special::{ellipf, ellipj, ellipk, solve_modulus_ratio};
use super::Biquad;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Zpk {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub gain: f64,
}

pub fn butterworth_prototype(order: usize) -> Zpk {
    let n = order as f64;
    let poles = (0..order)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(1.0, theta)
        })
        .collect();
    Zpk {
        zeros: Vec::new(),
        poles,
        gain: 1.0,
    }
}

/// Elliptic (Cauer) low-pass prototype: equiripple `ripple_db` up to 1 rad/s,
/// at least `atten_db` attenuation in the stopband.
pub fn elliptic_prototype(order: usize, ripple_db: f64, atten_db: f64) -> Zpk {
    let eps_sq = 10f64.powf(0.1 * ripple_db) - 1.0;
    let eps = eps_sq.sqrt();
    if order == 1 {
        let p = -1.0 / eps;
        return Zpk {
            zeros: Vec::new(),
            poles: vec![Complex64::new(p, 0.0)],
            gain: -p,
        };
    }
    let k1_sq = eps_sq / (10f64.powf(0.1 * atten_db) - 1.0);
    let k1_complete = ellipk(k1_sq);
    let ratio = order as f64 * k1_complete / ellipk(1.0 - k1_sq);
    let m = solve_modulus_ratio(ratio);
    let capk = ellipk(m);

    // Inverse Jacobi sc with the complementary parameter.
    let r = ellipf((1.0 / eps).atan(), 1.0 - k1_sq);
    let v0 = capk * r / (order as f64 * k1_complete);
    let (sv, cv, dv) = ellipj(v0, 1.0 - m);

    let mut zeros = Vec::new();
    let mut poles = Vec::new();
    let first = 1 - order % 2;
    for j in (first..order).step_by(2) {
        let (s, c, d) = ellipj(j as f64 * capk / order as f64, m);
        if s.abs() > f64::EPSILON {
            let z = Complex64::new(0.0, 1.0 / (m.sqrt() * s));
            zeros.push(z);
            zeros.push(z.conj());
        }
        let denom = 1.0 - (d * sv).powi(2);
        let p = Complex64::new(-c * d * sv * cv, -s * dv) / denom;
        poles.push(p);
        if p.im.abs() > 1e-12 * p.norm() {
            poles.push(p.conj());
        }
    }
    let num: Complex64 = poles.iter().map(|p| -p).product();
    let den: Complex64 = zeros.iter().map(|z| -z).product();
    let mut gain = (num / den).re;
    if order % 2 == 0 {
        gain /= (1.0 + eps_sq).sqrt();
    }
    Zpk { zeros, poles, gain }
}

impl Zpk {
    /// Low-pass (edge 1 rad/s) to band-pass centered at `center` with width `bandwidth`.
    pub fn lowpass_to_bandpass(&self, center: f64, bandwidth: f64) -> Zpk {
        let map = |roots: &[Complex64]| -> Vec<Complex64> {
            let mut out = Vec::with_capacity(2 * roots.len());
            for &r in roots {
                let scaled = r * bandwidth / 2.0;
                let disc = (scaled * scaled - center * center).sqrt();
                out.push(scaled + disc);
                out.push(scaled - disc);
            }
            out
        };
        let degree = self.poles.len() - self.zeros.len();
        let mut zeros = map(&self.zeros);
        zeros.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
        Zpk {
            zeros,
            poles: map(&self.poles),
            gain: self.gain * bandwidth.powi(degree as i32),
        }
    }

    pub fn bilinear(&self, fs: f64) -> Zpk {
        let fs2 = 2.0 * fs;
        let map = |r: &Complex64| (fs2 + r) / (fs2 - r);
        let degree = self.poles.len() - self.zeros.len();
        let mut zeros: Vec<Complex64> = self.zeros.iter().map(map).collect();
        zeros.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), degree));
        let num: Complex64 = self.zeros.iter().map(|z| fs2 - z).product();
        let den: Complex64 = self.poles.iter().map(|p| fs2 - p).product();
        Zpk {
            zeros,
            poles: self.poles.iter().map(map).collect(),
            gain: self.gain * (num / den).re,
        }
    }

    /// Groups roots into biquads. Each section is scaled to unit gain at
    /// `norm_freq` (rad/sample) except the first, which carries the overall gain.
    pub fn to_sos(&self, norm_freq: f64) -> Result<Vec<Biquad>> {
        if self.poles.len() != self.zeros.len() || self.poles.len() % 2 != 0 {
            return Err(Error::Design(format!(
                "cannot form sections from {} zeros and {} poles",
                self.zeros.len(),
                self.poles.len()
            )));
        }
        let mut pole_pairs = pair_roots(&self.poles, false)?;
        let mut zero_pairs = pair_roots(&self.zeros, true)?;
        // Poles nearest the unit circle get first pick of zeros.
        pole_pairs.sort_by(|a, b| {
            let ra = a[0].norm().max(a[1].norm());
            let rb = b[0].norm().max(b[1].norm());
            rb.partial_cmp(&ra).unwrap_or(Ordering::Equal)
        });
        let z_inv = Complex64::from_polar(1.0, -norm_freq);
        let mut sections = Vec::with_capacity(pole_pairs.len());
        for pp in &pole_pairs {
            let rep = representative(pp);
            let (best, _) = zero_pairs
                .iter()
                .enumerate()
                .map(|(i, zp)| (i, (representative(zp) - rep).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
                .expect("zero pairs remain");
            let zp = zero_pairs.remove(best);
            let mut section = Biquad {
                b: [1.0, -(zp[0] + zp[1]).re, (zp[0] * zp[1]).re],
                a: [-(pp[0] + pp[1]).re, (pp[0] * pp[1]).re],
            };
            let mag = section.response(z_inv).norm();
            if !(mag.is_finite() && mag > 0.0) {
                return Err(Error::Design(format!(
                    "section has degenerate gain {mag} at normalization frequency"
                )));
            }
            for b in &mut section.b {
                *b /= mag;
            }
            sections.push(section);
        }
        // First section absorbs the overall gain and sign.
        let target = self.response(z_inv.conj());
        let current: Complex64 = sections.iter().map(|s| s.response(z_inv)).product();
        let scale = (target / current).re;
        for b in &mut sections[0].b {
            *b *= scale;
        }
        Ok(sections)
    }

    /// Evaluates the rational function at the complex point `z`.
    pub fn response(&self, z: Complex64) -> Complex64 {
        let num: Complex64 = self.zeros.iter().map(|r| z - r).product();
        let den: Complex64 = self.poles.iter().map(|r| z - r).product();
        self.gain * num / den
    }
}

fn representative(pair: &[Complex64; 2]) -> Complex64 {
    if pair[0].im >= pair[1].im {
        pair[0]
    } else {
        pair[1]
    }
}

/// Splits roots into conjugate pairs and pairs of reals. Real zeros pair
/// smallest with largest (so ±1 zeros share a section); real poles pair
/// with their neighbours.
fn pair_roots(roots: &[Complex64], extremes: bool) -> Result<Vec<[Complex64; 2]>> {
    let tol = |r: &Complex64| 1e-9 * r.norm().max(1.0);
    let mut reals: Vec<f64> = Vec::new();
    let mut upper: Vec<Complex64> = Vec::new();
    let mut lower = 0usize;
    for r in roots {
        if r.im.abs() <= tol(r) {
            reals.push(r.re);
        } else if r.im > 0.0 {
            upper.push(*r);
        } else {
            lower += 1;
        }
    }
    if lower != upper.len() || reals.len() % 2 != 0 {
        return Err(Error::Design(format!(
            "roots are not conjugate-symmetric ({} upper, {lower} lower, {} real)",
            upper.len(),
            reals.len()
        )));
    }
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut pairs: Vec<[Complex64; 2]> = upper.into_iter().map(|r| [r, r.conj()]).collect();
    let n = reals.len();
    for i in 0..n / 2 {
        let (a, b) = if extremes {
            (reals[i], reals[n - 1 - i])
        } else {
            (reals[2 * i], reals[2 * i + 1])
        };
        pairs.push([Complex64::new(a, 0.0), Complex64::new(b, 0.0)]);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mag_db(z: &Zpk, w: f64) -> f64 {
        20.0 * z.response(Complex64::new(0.0, w)).norm().log10()
    }

    #[test]
    fn butterworth_half_power_at_unit_frequency() {
        for n in 1..8 {
            let p = butterworth_prototype(n);
            assert_relative_eq!(mag_db(&p, 1.0), -10.0 * 2f64.log10(), epsilon = 1e-12);
            assert!(p.poles.iter().all(|p| p.re < 0.0));
        }
    }

    #[test]
    fn elliptic_prototype_edges() {
        for n in 2..8 {
            let p = elliptic_prototype(n, 1.0, 50.0);
            assert_relative_eq!(mag_db(&p, 1.0), -1.0, epsilon = 1e-8);
            assert_eq!(p.poles.len(), n);
            assert_eq!(p.zeros.len(), n - n % 2);
            if n % 2 == 0 {
                assert_relative_eq!(mag_db(&p, 0.0), -1.0, epsilon = 1e-8);
            } else {
                assert_relative_eq!(mag_db(&p, 0.0), 0.0, epsilon = 1e-8);
            }
        }
    }
}
