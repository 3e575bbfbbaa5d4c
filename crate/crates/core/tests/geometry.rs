mod common;

use eegconn::riemann::{
    logeuclidean_distance, logeuclidean_mean, matrix_exp, matrix_log, tangent_len, tangent_map,
    unvectorize_upper, vectorize_upper, ReferencePoint, SpdMatrix,
};
use eegconn::Error;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn spd(m: DMatrix<f64>) -> SpdMatrix {
    SpdMatrix::new(m).unwrap()
}

#[test]
fn log_agrees_with_taylor_exponential() {
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let m = common::random_spd(&mut rng, 6, 2.5);
        let log = matrix_log(&spd(m.clone())).unwrap();
        assert!(common::rel_frobenius(&common::expm_taylor(&log), &m) < 1e-9);
    }
}

#[test]
fn exp_agrees_with_taylor_exponential() {
    let mut rng = common::rng(12);
    for _ in 0..200 {
        let s = common::random_symmetric(&mut rng, 5, 1.5);
        let e = matrix_exp(&s).unwrap();
        assert!(common::rel_frobenius(e.values(), &common::expm_taylor(&s)) < 1e-9);
    }
}

#[test]
fn closed_form_distances() {
    let a = SpdMatrix::from_diagonal(&[1.0, 1.0]).unwrap();
    let b = SpdMatrix::from_diagonal(&[std::f64::consts::E, 1.0]).unwrap();
    assert!((logeuclidean_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
    // Commuting pair: distance is the norm of the log-eigenvalue differences.
    let c = SpdMatrix::from_diagonal(&[4.0, 0.5, 2.0]).unwrap();
    let d = SpdMatrix::from_diagonal(&[1.0, 2.0, 2.0]).unwrap();
    let expected = ((4f64.ln()).powi(2) + (0.25f64.ln()).powi(2)).sqrt();
    assert!((logeuclidean_distance(&c, &d).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn mean_of_commuting_matrices_is_geometric() {
    let a = SpdMatrix::from_diagonal(&[1.0, 9.0]).unwrap();
    let b = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
    let m = logeuclidean_mean(&[a, b]).unwrap();
    assert!((m.values()[(0, 0)] - 2.0).abs() < 1e-12);
    assert!((m.values()[(1, 1)] - 3.0).abs() < 1e-12);
    assert!(m.values()[(0, 1)].abs() < 1e-14);
}

#[test]
fn mean_rejects_empty_and_mixed_dimensions() {
    assert!(matches!(logeuclidean_mean(&[]), Err(Error::Argument(_))));
    let mixed = [SpdMatrix::identity(2), SpdMatrix::identity(3)];
    assert!(logeuclidean_mean(&mixed).is_err());
}

#[test]
fn non_spd_inputs_rejected() {
    let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(SpdMatrix::new(indefinite).is_err());
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
    assert!(SpdMatrix::new(asym).is_err());
}

#[test]
fn tangent_vector_at_mean_of_identical_set_is_zero() {
    let mut rng = common::rng(5);
    let m = spd(common::random_spd(&mut rng, 4, 1.0));
    let r = ReferencePoint::fit(&[m.clone(), m.clone(), m.clone()]).unwrap();
    let v = tangent_map(&r, &m).unwrap();
    assert_eq!(v.values.len(), 10);
    assert!(v.values.iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn tangent_norm_matches_independent_whitened_log() {
    let mut rng = common::rng(21);
    let mats: Vec<SpdMatrix> = (0..30).map(|_| spd(common::random_spd(&mut rng, 6, 1.5))).collect();
    let r = ReferencePoint::fit(&mats).unwrap();
    // Independent whitening and logarithm built straight on nalgebra.
    let eig = SymmetricEigen::new(r.mean().values().clone());
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    for m in &mats {
        let w = &inv_sqrt * m.values() * &inv_sqrt;
        let e = SymmetricEigen::new((&w + w.transpose()) * 0.5);
        let log_fro = e.eigenvalues.map(|v| v.ln().powi(2)).sum().sqrt();
        let v = tangent_map(&r, m).unwrap();
        let norm = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - log_fro).abs() <= 1e-10 * log_fro.max(1.0));
    }
}

#[test]
fn reference_point_serde_round_trip() {
    let mut rng = common::rng(3);
    let r = ReferencePoint::new(spd(common::random_spd(&mut rng, 3, 1.0)));
    let json = serde_json::to_string(&r).unwrap();
    let back: ReferencePoint = serde_json::from_str(&json).unwrap();
    assert!((back.inv_sqrt() - r.inv_sqrt()).amax() < 1e-15);
}

fn spd_strategy(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn log_exp_round_trip(m in spd_strategy(4)) {
        let back = matrix_exp(&matrix_log(&spd(m.clone())).unwrap()).unwrap();
        prop_assert!(common::rel_frobenius(back.values(), &m) < 1e-9);
    }

    #[test]
    fn vectorize_round_trip(v in prop::collection::vec(-5.0f64..5.0, 15)) {
        let m = unvectorize_upper(&v, 5).unwrap();
        prop_assert!((&m - m.transpose()).amax() == 0.0);
        let back = vectorize_upper(&m);
        prop_assert_eq!(back.len(), tangent_len(5));
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((m.norm() - v.iter().map(|x| x * x).sum::<f64>().sqrt()).abs() < 1e-10);
    }

    #[test]
    fn distance_is_a_metric(a in spd_strategy(3), b in spd_strategy(3), c in spd_strategy(3)) {
        let (a, b, c) = (spd(a), spd(b), spd(c));
        let ab = logeuclidean_distance(&a, &b).unwrap();
        let ba = logeuclidean_distance(&b, &a).unwrap();
        let ac = logeuclidean_distance(&a, &c).unwrap();
        let cb = logeuclidean_distance(&c, &b).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        prop_assert!(logeuclidean_distance(&a, &a).unwrap() == 0.0);
        prop_assert!(ab <= ac + cb + 1e-10);
    }

    #[test]
    fn distance_invariant_under_inversion_and_scaling(a in spd_strategy(3), b in spd_strategy(3), s in 0.1f64..10.0) {
        let inv = |m: &DMatrix<f64>| spd(m.clone().try_inverse().unwrap());
        let d = logeuclidean_distance(&spd(a.clone()), &spd(b.clone())).unwrap();
        let d_inv = logeuclidean_distance(&inv(&a), &inv(&b)).unwrap();
        let d_scaled = logeuclidean_distance(&spd(&a * s), &spd(&b * s)).unwrap();
        prop_assert!((d - d_inv).abs() <= 1e-8 * (1.0 + d));
        prop_assert!((d - d_scaled).abs() <= 1e-8 * (1.0 + d));
    }
}
