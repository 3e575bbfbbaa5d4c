//! Reference implementations shared by the integration tests. None of
//! these call into the library's own numerics, so agreement is evidence
//! rather than tautology.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Haar-ish random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::from_fn(n, n, |_, _| normal(rng));
    for j in 0..n {
        for k in 0..j {
            let proj = q.column(j).dot(&q.column(k));
            let col_k = q.column(k).into_owned();
            q.column_mut(j).axpy(-proj, &col_k, 1.0);
        }
        let norm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    q
}

/// Random SPD matrix with log-eigenvalues uniform in `[-spread, spread]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
        rng.random_range(-spread..spread).exp()
    }));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| scale * normal(rng));
    (&a + a.transpose()) * 0.5
}

/// Matrix exponential by truncated Taylor series with scaling and squaring.
pub fn expm_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.norm();
    let mut squarings = 0;
    let mut scaled = a.clone();
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
        scaled /= 2f64.powi(squarings as i32);
    }
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

// ---------------------------------------------------------------------
// Elliptic functions through descending Landen transformations. The
// library uses AGM / Carlson forms; these follow the Landen route.

const LANDEN_STEPS: usize = 12;

/// Descending Landen moduli of modulus `k` (not parameter).
fn landen(k: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(LANDEN_STEPS);
    let mut k = k;
    for _ in 0..LANDEN_STEPS {
        k = (k / (1.0 + (1.0 - k * k).sqrt())).powi(2);
        v.push(k);
    }
    v
}

/// Complete elliptic integral of the first kind of modulus `k`.
pub fn ellipk_landen(k: f64) -> f64 {
    landen(k).iter().map(|v| 1.0 + v).product::<f64>() * PI / 2.0
}

/// `cd(u·K(k), k)` for complex `u`.
fn cde(u: Complex64, k: f64) -> Complex64 {
    let v = landen(k);
    let mut w = (u * PI / 2.0).cos();
    for &vn in v.iter().rev() {
        w = (1.0 + vn) * w / (1.0 + vn * w * w);
    }
    w
}

/// Inverse of [`cde`]: `u` with `cd(u·K(k), k) = w`.
fn acde(w: Complex64, k: f64) -> Complex64 {
    let v = landen(k);
    let mut w = w;
    let mut prev = k;
    for &vn in &v {
        w = w / (1.0 + (1.0 - w * w * prev * prev).sqrt()) * 2.0 / (1.0 + vn);
        prev = vn;
    }
    w.acos() * 2.0 / PI
}

/// Selectivity modulus solving the degree equation for order `n`, by nome series.
fn ellipdeg(n: usize, k1: f64) -> f64 {
    let kk = ellipk_landen(k1);
    let kkp = ellipk_landen((1.0 - k1 * k1).sqrt());
    let q1 = (-PI * kkp / kk).exp();
    let q = q1.powf(1.0 / n as f64);
    let (mut num, mut den) = (1.0, 1.0);
    for m in 1..=10 {
        let m = m as f64;
        num += q.powf(m * (m + 1.0));
        den += 2.0 * q.powf(m * m);
    }
    4.0 * q.sqrt() * (num / den).powi(2)
}

/// Analog elliptic low-pass magnitude (linear) at `omega`, passband edge 1.
pub fn elliptic_prototype_mag(order: usize, ripple_db: f64, atten_db: f64, omega: f64) -> f64 {
    let ep = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let es = (10f64.powf(atten_db / 10.0) - 1.0).sqrt();
    let k1 = ep / es;
    let k = ellipdeg(order, k1);
    let u = acde(Complex64::new(omega.abs(), 0.0), k);
    let f = cde(u * order as f64, k1);
    1.0 / (1.0 + ep * ep * f.norm_sqr()).sqrt()
}

/// Stopband edge of the same prototype.
pub fn elliptic_stopband_edge(order: usize, ripple_db: f64, atten_db: f64) -> f64 {
    let ep = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let es = (10f64.powf(atten_db / 10.0) - 1.0).sqrt();
    1.0 / ellipdeg(order, ep / es)
}

pub fn butterworth_prototype_mag(order: usize, omega: f64) -> f64 {
    1.0 / (1.0 + omega.abs().powi(2 * order as i32)).sqrt()
}

/// Band-pass prototype frequency for digital frequency `f` under the
/// bilinear transform with pre-warped band edges.
pub fn bandpass_prototype_frequency(f: f64, band: (f64, f64), fs: f64) -> f64 {
    let warp = |x: f64| 2.0 * fs * (PI * x / fs).tan();
    let (w1, w2) = (warp(band.0), warp(band.1));
    let wo2 = w1 * w2;
    let wa = warp(f);
    (wa * wa - wo2) / ((w2 - w1) * wa)
}

// ---------------------------------------------------------------------
// Graph references, written from the metric definitions.

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                let v = rng.random_range(0.05..3.0);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    w
}

pub fn brute_strength(w: &DMatrix<f64>) -> Vec<f64> {
    let n = w.nrows();
    (0..n).map(|i| (0..n).map(|j| w[(i, j)]).sum()).collect()
}

/// Onnela clustering by enumerating unordered triangles.
pub fn brute_clustering(w: &DMatrix<f64>) -> Vec<f64> {
    let n = w.nrows();
    let max = w.iter().cloned().fold(0.0, f64::max);
    let mut tri = vec![0.0; n];
    if max > 0.0 {
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let p = w[(a, b)] * w[(a, c)] * w[(b, c)];
                    if p > 0.0 {
                        let t = (p / max.powi(3)).cbrt();
                        tri[a] += 2.0 * t;
                        tri[b] += 2.0 * t;
                        tri[c] += 2.0 * t;
                    }
                }
            }
        }
    }
    (0..n)
        .map(|i| {
            let k = (0..n).filter(|&j| w[(i, j)] > 0.0).count();
            if k < 2 {
                0.0
            } else {
                tri[i] / (k * (k - 1)) as f64
            }
        })
        .collect()
}

pub fn brute_participation(w: &DMatrix<f64>, modules: &[usize]) -> Vec<f64> {
    let n = w.nrows();
    (0..n)
        .map(|i| {
            let s: f64 = (0..n).map(|j| w[(i, j)]).sum();
            if s == 0.0 {
                return 0.0;
            }
            let mut ids: Vec<usize> = modules.to_vec();
            ids.sort_unstable();
            ids.dedup();
            1.0 - ids
                .iter()
                .map(|&m| {
                    let sm: f64 = (0..n).filter(|&j| modules[j] == m).map(|j| w[(i, j)]).sum();
                    (sm / s).powi(2)
                })
                .sum::<f64>()
        })
        .collect()
}

/// Shortest path length between `from` and `to` inside `allowed`, by
/// enumerating every simple path (edge length 1/w).
fn shortest_simple_path(w: &DMatrix<f64>, allowed: &[usize], from: usize, to: usize) -> f64 {
    fn dfs(
        w: &DMatrix<f64>,
        allowed: &[usize],
        at: usize,
        to: usize,
        visited: &mut Vec<usize>,
        len: f64,
        best: &mut f64,
    ) {
        if at == to {
            *best = best.min(len);
            return;
        }
        for &next in allowed {
            if w[(at, next)] > 0.0 && !visited.contains(&next) {
                visited.push(next);
                dfs(w, allowed, next, to, visited, len + 1.0 / w[(at, next)], best);
                visited.pop();
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut visited = vec![from];
    dfs(w, allowed, from, to, &mut visited, 0.0, &mut best);
    best
}

pub fn brute_local_efficiency(w: &DMatrix<f64>) -> Vec<f64> {
    let n = w.nrows();
    (0..n)
        .map(|i| {
            let nb: Vec<usize> = (0..n).filter(|&j| w[(i, j)] > 0.0).collect();
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut sum = 0.0;
            for &a in &nb {
                for &b in &nb {
                    if a != b {
                        let d = shortest_simple_path(w, &nb, a, b);
                        if d.is_finite() {
                            sum += 1.0 / d;
                        }
                    }
                }
            }
            sum / (k * (k - 1)) as f64
        })
        .collect()
}

/// Newman modularity of a partition, straight from the definition.
pub fn modularity(w: &DMatrix<f64>, modules: &[usize]) -> f64 {
    let n = w.nrows();
    let s = brute_strength(w);
    let two_m: f64 = s.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if modules[i] == modules[j] {
                q += w[(i, j)] - s[i] * s[j] / two_m;
            }
        }
    }
    q / two_m
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------
// Designed band-pass versus analytic prototype on a dense grid.

use eegconn::dsp::{self, FilterFamily, FilterSpec};

#[derive(Debug)]
pub struct FilterCheck {
    /// Largest |designed − oracle| in dB where the oracle is above -150 dB.
    pub max_oracle_dev_db: f64,
    /// Designed magnitude extremes over the passband.
    pub pass_min_db: f64,
    pub pass_max_db: f64,
    /// Largest designed magnitude over the stopband.
    pub stop_max_db: f64,
    pub n_pass: usize,
    pub n_stop: usize,
}

pub fn check_filter(spec: &FilterSpec, grid: usize) -> FilterCheck {
    let filter = dsp::design_bandpass(spec).expect("design succeeds");
    let ripple = spec.passband_ripple_db;
    let atten = spec.stopband_atten_db;
    let n = spec.order;
    let (pass_edge, stop_edge) = match spec.family {
        FilterFamily::Butterworth => (
            (10f64.powf(ripple / 10.0) - 1.0).powf(1.0 / (2.0 * n as f64)),
            (10f64.powf(atten / 10.0) - 1.0).powf(1.0 / (2.0 * n as f64)),
        ),
        FilterFamily::Elliptic => (1.0, elliptic_stopband_edge(n, ripple, atten)),
    };
    let mut out = FilterCheck {
        max_oracle_dev_db: 0.0,
        pass_min_db: f64::INFINITY,
        pass_max_db: f64::NEG_INFINITY,
        stop_max_db: f64::NEG_INFINITY,
        n_pass: 0,
        n_stop: 0,
    };
    let nyq = spec.sampling_rate_hz / 2.0;
    for i in 0..grid {
        let f = nyq * i as f64 / grid as f64;
        let designed = filter.magnitude_db(f);
        let omega = if f == 0.0 {
            f64::INFINITY
        } else {
            bandpass_prototype_frequency(f, spec.band_hz, spec.sampling_rate_hz)
        };
        if omega.is_finite() {
            let oracle = match spec.family {
                FilterFamily::Butterworth => butterworth_prototype_mag(n, omega),
                FilterFamily::Elliptic => elliptic_prototype_mag(n, ripple, atten, omega),
            };
            let oracle_db = 20.0 * oracle.log10();
            if oracle_db > -150.0 {
                out.max_oracle_dev_db = out.max_oracle_dev_db.max((designed - oracle_db).abs());
            }
        }
        if omega.abs() <= pass_edge {
            out.n_pass += 1;
            out.pass_min_db = out.pass_min_db.min(designed);
            out.pass_max_db = out.pass_max_db.max(designed);
        } else if omega.abs() >= stop_edge {
            out.n_stop += 1;
            out.stop_max_db = out.stop_max_db.max(designed);
        }
    }
    out
}

// ---------------------------------------------------------------------
// Planted CSP data: X = Q·diag(√d_c)·S with per-trial exactly white S, so
// every trial covariance equals Q·D_c·Qᵀ.

use eegconn::eegdata::{Trial, TrialSet};

pub struct PlantedCsp {
    pub set: TrialSet,
    /// Columns are the planted discriminative directions.
    pub q: DMatrix<f64>,
    pub d: [Vec<f64>; 2],
}

fn whiten_rows(s: DMatrix<f64>) -> DMatrix<f64> {
    let t = s.ncols() as f64;
    let c = &s * s.transpose() / (t - 1.0);
    let e = nalgebra::SymmetricEigen::new((&c + c.transpose()) * 0.5);
    let inv_sqrt = &e.eigenvectors
        * DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * e.eigenvectors.transpose();
    inv_sqrt * s
}

pub fn planted_csp(seed: u64, ch: usize, per_class: usize, samples: usize) -> PlantedCsp {
    let mut r = rng(seed);
    let q = random_orthogonal(&mut r, ch);
    // Class-1 variance fraction falls strictly from ~0.9 to ~0.1 across directions.
    let d1: Vec<f64> = (0..ch).map(|i| 9.0 * (1.0 / 81.0f64).powf(i as f64 / (ch - 1) as f64)).collect();
    let d0: Vec<f64> = d1.iter().rev().cloned().collect();
    let d = [d0, d1];
    let mut trials = Vec::new();
    for k in 0..2 * per_class {
        let label = (k % 2) as u8;
        let s = whiten_rows(DMatrix::from_fn(ch, samples, |_, _| normal(&mut r)));
        let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            ch,
            d[label as usize].iter().map(|v| v.sqrt()),
        ));
        trials.push(Trial::new(&q * scale * s, label, k as i64 + 1).unwrap());
    }
    let names = (0..ch).map(|i| format!("c{i}")).collect();
    let set = TrialSet::new(trials, names, 100.0, ["a".into(), "b".into()]).unwrap();
    PlantedCsp { set, q, d }
}

/// Trace-normalized class-mean covariances computed directly.
pub fn class_means(set: &TrialSet) -> [DMatrix<f64>; 2] {
    let ch = set.n_channels();
    let mut out = [DMatrix::zeros(ch, ch), DMatrix::zeros(ch, ch)];
    for t in set.trials() {
        let x = &t.samples;
        out[t.label as usize] += x * x.transpose() / (x.ncols() as f64 - 1.0);
    }
    for m in out.iter_mut() {
        let tr = m.trace();
        *m /= tr;
    }
    out
}

// ---------------------------------------------------------------------
// Two-class SPD data: C = exp(B ± δ·D + noise), classes split along D.

use eegconn::csp::SpatialFilterBank;
use eegconn::riemann::SpdMatrix;

pub struct SpdData {
    pub covs: Vec<SpdMatrix>,
    pub labels: Vec<u8>,
}

pub fn spd_classes(seed: u64, n: usize, dim: usize, delta: f64, noise: f64) -> SpdData {
    let mut r = rng(seed);
    let mut dr = rng(1_000 + dim as u64);
    let base = random_symmetric(&mut dr, dim, 0.5);
    let dir = random_symmetric(&mut dr, dim, 1.0);
    let dir = &dir / dir.norm();
    let mut covs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let y = (k % 2) as u8;
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let s = &base + &dir * (sign * delta) + random_symmetric(&mut r, dim, noise);
        covs.push(SpdMatrix::from_symmetrized(&expm_taylor(&s)).unwrap());
        labels.push(y);
    }
    SpdData { covs, labels }
}

pub fn identity_bank(dim: usize) -> SpatialFilterBank {
    SpatialFilterBank {
        w: DMatrix::identity(dim, dim),
        patterns: DMatrix::identity(dim, dim),
        eigenvalues: vec![0.5; dim],
        n_filters: dim,
    }
}

pub fn random_logistic_problem(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
) -> (DMatrix<f64>, Vec<u8>, nalgebra::DVector<f64>, f64) {
    let x = DMatrix::from_fn(n, d, |_, _| normal(rng));
    let y = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    let w = nalgebra::DVector::from_fn(d, |_, _| normal(rng));
    (x, y, w, normal(rng))
}
