use underlay_core::radio_env::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> PlaygroundConfig {
    PlaygroundConfig::default()
}

/// Minimum over the nine periodic images; independent of the wrap logic.
fn brute_force_torus(a: Position, b: Position, side: f64) -> f64 {
    let mut best = f64::INFINITY;
    for ix in -1..=1 {
        for iy in -1..=1 {
            let dx = a.x - (b.x + ix as f64 * side);
            let dy = a.y - (b.y + iy as f64 * side);
            let d = (dx * dx + dy * dy).sqrt();
            if d < best {
                best = d;
            }
        }
    }
    best / 1000.0
}

#[test]
fn defaults_match_playground() {
    let c = cfg();
    assert_eq!(c.bs_count(), 25);
    assert_eq!(c.side_m(), 1000.0);
    assert_eq!(c.pn_power_range_dbm, [-20.0, 40.0]);
    assert_eq!(c.sn_power_range_dbm, [-30.0, 20.0]);
    assert_eq!(c.noise_power_dbm, -130.0);
    assert_eq!(c.su_pair_count, 4);
    c.validate().unwrap();
}

#[test]
fn invalid_configs_rejected() {
    let mut c = cfg();
    c.grid_side = 1;
    assert!(c.validate().is_err());
    let mut c = cfg();
    c.bs_spacing_m = 0.0;
    assert!(c.validate().is_err());
    let mut c = cfg();
    c.sn_power_range_dbm = [20.0, -30.0];
    assert!(c.validate().is_err());
}

#[test]
fn torus_distance_examples() {
    let c = cfg();
    let a = Position::new(0.0, 0.0);
    assert_eq!(torus_distance(a, a, &c), 0.0);
    let b = Position::new(950.0, 0.0);
    assert!((torus_distance(a, b, &c) - 0.050).abs() < 1e-12);
}

#[test]
fn torus_matches_nine_image_oracle() {
    let c = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let a = Position { x: rng.random_range(0.0..1000.0), y: rng.random_range(0.0..1000.0) };
        let b = Position { x: rng.random_range(0.0..1000.0), y: rng.random_range(0.0..1000.0) };
        let d = torus_distance(a, b, &c);
        assert!((d - brute_force_torus(a, b, 1000.0)).abs() < 1e-12);
        assert_eq!(d, torus_distance(b, a, &c));
        let direct = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() / 1000.0;
        assert!(d <= direct + 1e-12);
        assert!(d <= 1.0 * core::f64::consts::SQRT_2 / 2.0 + 1e-12);
    }
}

#[test]
fn path_gain_examples() {
    let c = cfg();
    let g = path_gain_linear(1.0, 0.0, &c).unwrap();
    assert!((g / 10f64.powf(-13.81) - 1.0).abs() < 1e-12);
    let l = path_loss_db(0.1, 0.0, &c).unwrap();
    assert!((l - 100.5).abs() < 1e-12);
    let expected = 128.1 + 37.6 * 0.2f64.log10() + 10.0 + 6.0;
    let l = path_loss_db(0.2, 6.0, &c).unwrap();
    assert!((l - expected).abs() < 1e-12);
    // distance floor keeps the log finite
    let l0 = path_loss_db(0.0, 0.0, &c).unwrap();
    assert!((l0 - path_loss_db(MIN_DISTANCE_KM, 0.0, &c).unwrap()).abs() < 1e-12);
    assert!(path_loss_db(f64::NAN, 0.0, &c).is_err());
}

#[test]
fn full_load_activates_every_bs() {
    let s = generate_scenario(&cfg(), 25, 3).unwrap();
    let mut bs: Vec<usize> = s.primary_links.iter().map(|l| l.bs_index).collect();
    bs.sort();
    assert_eq!(bs, (0..25).collect::<Vec<_>>());
    assert_eq!(s.load(), 1.0);
}

#[test]
fn load_convention() {
    let s = generate_scenario(&cfg(), 4, 3).unwrap();
    assert!((s.load() - 0.16).abs() < 1e-15);
    assert!(generate_scenario(&cfg(), 26, 3).is_err());
    assert!(generate_scenario(&cfg(), 0, 3).is_err());
}

#[test]
fn generation_is_deterministic() {
    let a = generate_scenario(&cfg(), 12, 99).unwrap();
    let b = generate_scenario(&cfg(), 12, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(gain_matrices(&a).unwrap(), gain_matrices(&b).unwrap());
    let c = generate_scenario(&cfg(), 12, 100).unwrap();
    assert_ne!(a, c);
}

#[test]
fn attachment_is_to_strongest_bs() {
    let c = cfg();
    for seed in 0..20 {
        let s = generate_scenario(&c, 16, seed).unwrap();
        s.validate().unwrap();
        for link in &s.primary_links {
            let serving = path_gain_linear(
                torus_distance(link.pu_position, c.bs_position(link.bs_index), &c),
                link.shadow_from_bs_db[link.bs_index],
                &c,
            )
            .unwrap();
            for k in 0..c.bs_count() {
                let g = path_gain_linear(
                    torus_distance(link.pu_position, c.bs_position(k), &c),
                    link.shadow_from_bs_db[k],
                    &c,
                )
                .unwrap();
                assert!(serving >= g);
            }
        }
    }
}

#[test]
fn su_receivers_within_radius() {
    let c = cfg();
    for seed in 0..50 {
        let s = generate_scenario(&c, 8, seed).unwrap();
        for p in &s.su_pairs {
            assert!(torus_distance(p.tx, p.rx, &c) * 1000.0 <= c.su_link_radius_m + 1e-9);
        }
    }
}

#[test]
fn degenerate_sizes() {
    let mut c = cfg();
    c.su_pair_count = 0;
    let s = generate_scenario(&c, 1, 5).unwrap();
    let g = gain_matrices(&s).unwrap();
    assert_eq!(g.gpp.len(), 1);
    assert_eq!(g.gpp[0].len(), 1);
    assert!(g.gps.iter().all(|r| r.is_empty()));
    assert!(g.gss.is_empty());
    assert!(g.gsp.is_empty());
}

#[test]
fn spot_gain_matches_hand_evaluation() {
    let c = cfg();
    let s = generate_scenario(&c, 6, 21).unwrap();
    let g = gain_matrices(&s).unwrap();
    let link = &s.primary_links[0];
    let bs = c.bs_position(link.bs_index);
    let dx = (link.pu_position.x - bs.x).abs();
    let dy = (link.pu_position.y - bs.y).abs();
    let dx = dx.min(1000.0 - dx);
    let dy = dy.min(1000.0 - dy);
    let d_km = ((dx * dx + dy * dy).sqrt() / 1000.0).max(0.001);
    let loss = 128.1 + 37.6 * d_km.log10() + 10.0 + link.shadow_from_bs_db[link.bs_index];
    let expected = 10f64.powf(-loss / 10.0);
    assert!((g.gpp[0][0] / expected - 1.0).abs() < 1e-12);

    let su = &s.su_pairs[1];
    let dx = (su.rx.x - su.tx.x).abs();
    let dy = (su.rx.y - su.tx.y).abs();
    let dx = dx.min(1000.0 - dx);
    let dy = dy.min(1000.0 - dy);
    let d_km = ((dx * dx + dy * dy).sqrt() / 1000.0).max(0.001);
    let loss = 128.1 + 37.6 * d_km.log10() + 10.0 + s.shadowing.ss[1][1];
    assert!((g.gss[1][1] / 10f64.powf(-loss / 10.0) - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn gains_positive_and_finite(seed in any::<u64>(), n_p in 1usize..=25) {
        let s = generate_scenario(&cfg(), n_p, seed).unwrap();
        let g = gain_matrices(&s).unwrap();
        g.validate().unwrap();
        for m in [&g.gpp, &g.gps, &g.gsp, &g.gss] {
            for row in m.iter() {
                for &v in row {
                    prop_assert!(v > 0.0 && v.is_finite());
                }
            }
        }
    }

    #[test]
    fn torus_symmetric(ax in 0.0..1000.0f64, ay in 0.0..1000.0f64, bx in 0.0..1000.0f64, by in 0.0..1000.0f64) {
        let c = cfg();
        let (a, b) = (Position::new(ax, ay), Position::new(bx, by));
        prop_assert_eq!(torus_distance(a, b, &c), torus_distance(b, a, &c));
        prop_assert_eq!(torus_distance(a, a, &c), 0.0);
    }
}
