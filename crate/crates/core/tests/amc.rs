use underlay_core::amc::*;
use proptest::prelude::*;

#[test]
fn ladder_shape() {
    let t = default_amc_table();
    assert_eq!(t.modes().len(), 15);
    let count = |ty| t.modes().iter().filter(|m| m.modulation == ty).count();
    assert_eq!(count(ModulationType::Type0), 6);
    assert_eq!(count(ModulationType::Type1), 3);
    assert_eq!(count(ModulationType::Type2), 6);
    for w in t.modes().windows(2) {
        assert!(w[1].efficiency > w[0].efficiency);
        assert!(w[1].modulation >= w[0].modulation);
        assert!(w[1].throughput_kbps > w[0].throughput_kbps);
    }
    for w in t.thresholds().windows(2) {
        assert!(w[1] > w[0]);
    }
}

#[test]
fn first_threshold_and_top_throughput() {
    let t = default_amc_table();
    let expected = 2f64.powf(0.1523) - 1.0;
    assert!((t.threshold(1) - expected).abs() < 1e-12);
    assert!((t.threshold(1) - 0.1114).abs() < 1e-4);
    assert!((t.mode(15).throughput_kbps - 5.5547 * 336.0).abs() < 1e-9);
    assert!((t.mode(15).throughput_kbps - 1866.0).abs() < 1.0);
}

#[test]
fn threshold_scales_with_k() {
    let t = AmcTable::standard(0.5, DEFAULT_SYMBOL_BUDGET).unwrap();
    assert!((t.threshold(1) - 2.0 * (2f64.powf(0.1523) - 1.0)).abs() < 1e-12);
    assert!(AmcTable::standard(0.0, 1.0).is_err());
    assert!(AmcTable::standard(1.0, -1.0).is_err());
}

#[test]
fn selection_examples() {
    let t = default_amc_table();
    assert_eq!(t.mode_for_sinr(0.0).unwrap().cqi, 1);
    assert_eq!(t.mode_for_sinr(t.threshold(9)).unwrap().cqi, 9);
    assert_eq!(t.mode_for_sinr(1e6).unwrap().cqi, 15);
    assert!(t.mode_for_sinr(-1.0).is_err());
    assert!(t.mode_for_sinr(f64::NAN).is_err());
    for m in t.modes() {
        assert_eq!(t.mode_for_sinr(t.threshold(m.cqi)).unwrap().cqi, m.cqi);
    }
}

#[test]
fn outage_and_saturation() {
    let t = default_amc_table();
    assert_eq!(t.effective_throughput(0.0).unwrap(), 0.0);
    assert_eq!(t.effective_throughput(t.threshold(15)).unwrap(), t.mode(15).throughput_kbps);
    assert_eq!(t.effective_throughput(1e9).unwrap(), t.mode(15).throughput_kbps);
    assert_eq!(t.effective_throughput(t.threshold(1)).unwrap(), t.mode(1).throughput_kbps);
}

#[test]
fn staircase_over_forty_db() {
    let t = default_amc_table();
    let mut prev = 0.0;
    let mut distinct = 0;
    for i in 0..=4000 {
        let db = -20.0 + i as f64 * 0.01;
        let th = t.effective_throughput(10f64.powf(db / 10.0)).unwrap();
        assert!(th >= prev);
        if th > prev {
            distinct += 1;
        }
        prev = th;
    }
    // one step into CQI 1 plus fourteen upgrades
    assert_eq!(distinct, 15);
}

#[test]
fn modulation_projection() {
    let t = default_amc_table();
    assert_eq!(modulation_type_of(t.mode(1)), ModulationType::Type0);
    assert_eq!(modulation_type_of(t.mode(7)), ModulationType::Type1);
    assert_eq!(modulation_type_of(t.mode(15)), ModulationType::Type2);
    assert_eq!(ModulationType::from_index(2), Some(ModulationType::Type2));
    assert_eq!(ModulationType::from_index(3), None);
}

#[test]
fn nearest_cqi_quantizer() {
    let t = default_amc_table();
    for m in t.modes() {
        assert_eq!(t.nearest_cqi_for_throughput(m.throughput_kbps), m.cqi);
    }
    assert_eq!(t.nearest_cqi_for_throughput(0.0), 1);
    assert_eq!(t.nearest_cqi_for_throughput(1e6), 15);
    // exact midpoint goes to the lower CQI
    let mid = 0.5 * (t.mode(3).throughput_kbps + t.mode(4).throughput_kbps);
    assert_eq!(t.nearest_cqi_for_throughput(mid), 3);
}

proptest! {
    #[test]
    fn monotone_selection(a in 0.0..1e3f64, b in 0.0..1e3f64) {
        let t = default_amc_table();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(t.mode_for_sinr(lo).unwrap().cqi <= t.mode_for_sinr(hi).unwrap().cqi);
        prop_assert!(t.effective_throughput(lo).unwrap() <= t.effective_throughput(hi).unwrap());
    }

    #[test]
    fn attenuated_shannon_bracket(db in -9.5..40.0f64, k in 0.25..2.0f64) {
        let t = AmcTable::standard(k, DEFAULT_SYMBOL_BUDGET).unwrap();
        let gamma = 10f64.powf(db / 10.0);
        prop_assume!(gamma >= t.threshold(1));
        let m = t.mode_for_sinr(gamma).unwrap();
        let rate = (1.0 + k * gamma).log2();
        prop_assert!(m.efficiency <= rate + 1e-12);
        if m.cqi < 15 {
            prop_assert!(rate < t.mode(m.cqi + 1).efficiency);
        }
    }
}
