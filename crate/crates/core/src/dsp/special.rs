//! Complete/incomplete elliptic integrals and Jacobi elliptic functions,
//! parameterized by `m = k²`.

use std::f64::consts::FRAC_PI_2;

/// Complete elliptic integral of the first kind via the arithmetic-geometric mean.
pub fn ellipk(m: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&m), "ellipk parameter {m}");
    let mut a = 1.0;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    FRAC_PI_2 / a
}

/// Carlson's symmetric integral R_F(x, y, z).
fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    for _ in 0..100 {
        let mu = (x + y + z) / 3.0;
        let dx = 1.0 - x / mu;
        let dy = 1.0 - y / mu;
        let dz = 1.0 - z / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-4 {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0)
                / mu.sqrt();
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * sy + sy * sz + sz * sx;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
    }
    let mu = (x + y + z) / 3.0;
    1.0 / mu.sqrt()
}

/// Incomplete elliptic integral of the first kind F(phi | m), |phi| ≤ π/2.
pub fn ellipf(phi: f64, m: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    s * carlson_rf(c * c, 1.0 - m * s * s, 1.0)
}

/// Jacobi elliptic functions (sn, cn, dn) for real argument, 0 ≤ m < 1,
/// by descending Landen/AGM transformation.
pub fn ellipj(u: f64, m: f64) -> (f64, f64, f64) {
    if m < 1e-12 {
        let (s, c) = u.sin_cos();
        return (s, c, 1.0);
    }
    let mut a = vec![1.0];
    let mut c = vec![m.sqrt()];
    let mut b = (1.0 - m).sqrt();
    while c.last().expect("nonempty").abs() > f64::EPSILON && a.len() < 32 {
        let an = *a.last().expect("nonempty");
        let next_a = 0.5 * (an + b);
        let next_c = 0.5 * (an - b);
        b = (an * b).sqrt();
        a.push(next_a);
        c.push(next_c);
    }
    let n = a.len() - 1;
    let mut phi = (1u64 << n) as f64 * a[n] * u;
    let mut prev = phi;
    for i in (1..=n).rev() {
        prev = phi;
        phi = 0.5 * (phi + (c[i] / a[i] * phi.sin()).asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let dn = cn / (prev - phi).cos();
    (sn, cn, dn)
}

/// Solves K(m)/K(1−m) = ratio for m in (0, 1).
pub fn solve_modulus_ratio(ratio: f64) -> f64 {
    let f = |m: f64| ellipk(m) / ellipk(1.0 - m) - ratio;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
