mod common;

use eegconn::dsp::{self, FilterSpec};
use eegconn::eegdata::Trial;
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn landen_oracle_self_consistency() {
    // K(1/√2) closed form.
    let k = common::ellipk_landen(std::f64::consts::FRAC_1_SQRT_2);
    assert!((k - 1.854_074_677_301_372).abs() < 1e-12);
    // Elliptic prototype oracle: -1 dB at the passband edge, at most -50 dB beyond the stopband edge.
    for n in 2..8 {
        let edge = common::elliptic_prototype_mag(n, 1.0, 50.0, 1.0);
        assert!((20.0 * edge.log10() + 1.0).abs() < 1e-8, "order {n}: {edge}");
        let ws = common::elliptic_stopband_edge(n, 1.0, 50.0);
        let stop = common::elliptic_prototype_mag(n, 1.0, 50.0, ws * 1.0001);
        assert!(20.0 * stop.log10() <= -50.0 + 1e-6, "order {n}");
    }
}

#[test]
fn errp_butterworth_matches_oracle() {
    let c = common::check_filter(&FilterSpec::butterworth(5, 0.1, 10.0, 200.0), 1024);
    assert!(c.max_oracle_dev_db < 1e-6, "{c:?}");
    assert!(c.n_pass > 0 && c.n_stop > 0);
    assert!(c.pass_min_db >= -1.0 - 1e-9 && c.pass_max_db <= 1e-9, "{c:?}");
    assert!(c.stop_max_db <= -50.0 + 1e-9, "{c:?}");
}

#[test]
fn mi_elliptic_bands_match_oracle() {
    for band in [(8.0, 12.0), (16.0, 24.0)] {
        let c = common::check_filter(&FilterSpec::elliptic(6, band.0, band.1, 100.0), 1024);
        assert!(c.max_oracle_dev_db < 1e-6, "{band:?}: {c:?}");
        assert!(c.pass_min_db >= -1.0 - 1e-9 && c.pass_max_db <= 1e-9, "{band:?}: {c:?}");
        assert!(c.stop_max_db <= -50.0 + 1e-9, "{band:?}: {c:?}");
    }
}

#[test]
fn odd_and_low_orders_match_oracle() {
    for order in 1..=7 {
        let spec = FilterSpec::elliptic(order, 5.0, 15.0, 80.0);
        let c = common::check_filter(&spec, 512);
        assert!(c.max_oracle_dev_db < 1e-6, "elliptic {order}: {c:?}");
        let spec = FilterSpec::butterworth(order, 2.0, 30.0, 128.0);
        let c = common::check_filter(&spec, 512);
        assert!(c.max_oracle_dev_db < 1e-6, "butterworth {order}: {c:?}");
    }
}

#[test]
fn impulse_response_decays() {
    let f = dsp::design_bandpass(&FilterSpec::elliptic(6, 8.0, 12.0, 100.0)).unwrap();
    assert!(f.is_stable());
    let mut x = vec![0.0; 10000];
    x[0] = 1.0;
    let y = f.filter_signal(&x);
    let tail: f64 = y[9000..].iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(tail < 1e-8, "tail {tail}");
}

#[test]
fn in_band_sinusoid_passes_out_of_band_is_removed() {
    let fs = 100.0;
    let f = dsp::design_bandpass(&FilterSpec::elliptic(6, 8.0, 12.0, fs)).unwrap();
    let gain = |hz: f64| {
        let x: Vec<f64> = (0..4000).map(|t| (2.0 * std::f64::consts::PI * hz * t as f64 / fs).sin()).collect();
        let y = f.filter_signal(&x);
        let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        rms(&y[2000..]) / rms(&x[2000..])
    };
    assert!((gain(10.0) - 1.0).abs() < 0.13);
    assert!(gain(30.0) < 10f64.powf(-50.0 / 20.0) * 1.5);
}

fn trial_from(row: &[f64]) -> Trial {
    Trial::new(DMatrix::from_row_slice(1, row.len(), row), 0, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filtering_is_linear(
        a in prop::collection::vec(-10.0f64..10.0, 64),
        b in prop::collection::vec(-10.0f64..10.0, 64),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let f = dsp::design_bandpass(&FilterSpec::butterworth(5, 0.1, 10.0, 200.0)).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
        let fa = dsp::apply_filter(&f, &trial_from(&a)).unwrap();
        let fb = dsp::apply_filter(&f, &trial_from(&b)).unwrap();
        let fm = dsp::apply_filter(&f, &trial_from(&mix)).unwrap();
        let expected = fa.samples * alpha + fb.samples * beta;
        let scale = 1.0 + expected.amax();
        prop_assert!((fm.samples - expected).amax() <= 1e-9 * scale);
    }

    #[test]
    fn response_magnitude_never_exceeds_unity(f in 0.0f64..50.0) {
        let filt = dsp::design_bandpass(&FilterSpec::elliptic(6, 8.0, 12.0, 100.0)).unwrap();
        prop_assert!(filt.magnitude_db(f) <= 1e-9);
    }
}
