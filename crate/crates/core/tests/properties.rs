use proptest::prelude::*;

use relayee::channel::db_to_linear;
use relayee::config::Config;
use relayee::metrics::{direct_metrics, relay_metrics};
use relayee::model::Model;
use relayee::optimizer::golden_section_max;
use relayee::report::fmt_sig;

fn model(lambda: f64, buffer: usize) -> Model {
    Config::paper_default().model.with_lambda(lambda).with_buffer(buffer)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relay_metrics_are_physical(
        lambda in 0.1f64..3.0,
        buffer in 2usize..40,
        db in 0.0f64..30.0,
        alpha in 0.05f64..0.95,
    ) {
        let m = relay_metrics(&model(lambda, buffer), alpha, db_to_linear(db)).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.drop_source));
        prop_assert!((0.0..=1.0).contains(&m.drop_relay));
        prop_assert!(m.qlen_source >= 0.0 && m.qlen_source <= buffer as f64);
        prop_assert!(m.qlen_relay >= 0.0 && m.qlen_relay <= buffer as f64);
        prop_assert!(m.throughput >= 0.0 && m.throughput <= lambda * (1.0 + 1e-12));
        prop_assert!(m.energy_per_period > 0.0);
        prop_assert!(m.ee >= 0.0 && m.ee.is_finite());
        prop_assert!(m.delay > 0.0);
    }

    #[test]
    fn direct_metrics_are_physical(lambda in 0.1f64..3.0, buffer in 2usize..40, db in 0.0f64..30.0) {
        let m = direct_metrics(&model(lambda, buffer), db_to_linear(db)).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.drop_source));
        prop_assert!(m.throughput >= 0.0 && m.throughput <= lambda * (1.0 + 1e-12));
        prop_assert!(m.ee >= 0.0 && m.ee.is_finite());
        prop_assert!(m.p_ld >= 0.0 && m.p_ld < 1.0);
    }

    #[test]
    fn bigger_buffer_drops_less(lambda in 0.5f64..3.0, db in 0.0f64..20.0, small in 2usize..20) {
        let snr = db_to_linear(db);
        let a = direct_metrics(&model(lambda, small), snr).unwrap().drop_source;
        let b = direct_metrics(&model(lambda, small * 2), snr).unwrap().drop_source;
        prop_assert!(b <= a + 1e-12, "{b} > {a}");
    }

    #[test]
    fn golden_section_finds_concave_peak(peak in -5.0f64..5.0, width in 0.1f64..10.0) {
        let (x, _) = golden_section_max(|x| Ok(-((x - peak) / width).powi(2)), -10.0, 10.0, 1e-8, 500).unwrap();
        prop_assert!((x - peak).abs() < 1e-6);
    }

    #[test]
    fn formatted_numbers_round_trip(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt_sig(x).parse().unwrap();
        prop_assert!(((back - x) / x).abs() <= 5e-9);
    }
}

#[test]
fn config_echo_round_trips() {
    let mut cfg = Config::paper_default();
    cfg.model = cfg.model.with_lambda(1.7).with_buffer(12);
    let back = Config::from_toml_str(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
}
