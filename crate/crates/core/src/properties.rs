//! Property tests over the public API: snapshot, track, blockage and
//! path-loss invariants on randomized inputs.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::mean;
use crate::blockage::{simulate_trace, BlockageConfig, MarkovParams};
use crate::config::{validate_config, EnvironmentMode, Mode, SimConfig, ValidatedConfig};
use crate::consistency::run_spatially_consistent;
use crate::geometry::angle_diff;
use crate::harness::{blockage_cdf, run_drop_mode, ChannelKind};
use crate::pathloss::{fspl_db, path_loss_ci};
use crate::tcsl::ChannelSnapshot;

fn env_mode(k: u8) -> EnvironmentMode {
    match k % 3 {
        0 => EnvironmentMode::Los,
        1 => EnvironmentMode::Nlos,
        _ => EnvironmentMode::Auto,
    }
}

fn track(seed: u64, env: EnvironmentMode, iid: bool) -> ValidatedConfig {
    let mut c = SimConfig::default();
    c.mode = Mode::SpatialConsistency;
    c.environment = env;
    c.spatial.iid_sf = iid;
    c.seed = seed;
    validate_config(c).unwrap()
}

fn relative_power_error(s: &ChannelSnapshot) -> f64 {
    (s.power_sum_mw() - s.total_rx_power_mw).abs() / s.total_rx_power_mw
}

fn assert_canonical(s: &ChannelSnapshot) {
    for m in &s.mpcs {
        for az in [m.aod_rad, m.aoa_rad] {
            assert!((0.0..std::f64::consts::TAU).contains(&az), "azimuth {az}");
        }
        for z in [m.zod_rad, m.zoa_rad] {
            assert!(z > 0.0 && z < std::f64::consts::PI, "zenith {z}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn drop_snapshots_conserve_power_and_stay_canonical(
        seed in any::<u64>(),
        run in 0u64..1000,
        d in 10.0f64..500.0,
        env in 0u8..3,
    ) {
        let mut c = SimConfig::default();
        c.seed = seed;
        c.tr_distance_m = d;
        c.environment = env_mode(env);
        let r = run_drop_mode(&validate_config(c).unwrap(), run).unwrap();
        let s = &r.omni;
        prop_assert!(relative_power_error(s) <= 1e-9);
        assert_canonical(s);
        if let Some(los) = s.los_mpc() {
            prop_assert!(s.mpcs.iter().all(|m| m.delay_ns >= los.delay_ns));
        }
    }

    #[test]
    fn fspl_decade_is_twenty_db(f in 0.5f64..10.0) {
        prop_assert!((fspl_db(10.0 * f).unwrap() - fspl_db(f).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn path_loss_grows_with_distance(d in 1.0f64..2000.0, step in 0.001f64..50.0, n in 1.5f64..4.0) {
        let a = path_loss_ci(28.0, d, n, 0.0, 1.5).unwrap();
        let b = path_loss_ci(28.0, d + step, n, 0.0, 1.5).unwrap();
        prop_assert!(b.total_db > a.total_db);
    }

    #[test]
    fn traces_follow_the_cycle(
        l1 in 0.05f64..2.0, l2 in 1.0f64..20.0, l3 in 1.0f64..20.0, l4 in 1.0f64..20.0,
        att in 0.0f64..30.0, seed in any::<u64>(),
    ) {
        let p = MarkovParams {
            lambda_decay: l1,
            lambda_shadow: l2,
            lambda_rise: l3,
            lambda_unshadow: l4,
            mean_attenuation_db: att,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = simulate_trace(&p, 20.0, 1e-3, &mut rng).unwrap();
        for w in t.states.windows(2) {
            prop_assert!(w[0] == w[1] || w[1] == w[0].next());
        }
        prop_assert!(t.loss_db.iter().all(|&l| (0.0..=att + 1e-12).contains(&l)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tracks_keep_geometric_truth(seed in any::<u64>(), env in 0u8..3) {
        let t = run_spatially_consistent(&track(seed, env_mode(env), false), 0).unwrap();
        for (s, tags) in t.snapshots.iter().zip(&t.tags) {
            prop_assert!(relative_power_error(s) <= 1e-9);
            assert_canonical(s);
            let exact = s.geometry.los_angles();
            for (m, tag) in s.mpcs.iter().zip(tags) {
                match tag {
                    Some(tag) => prop_assert!(tag.residual(m.aod_rad, m.aoa_rad) <= 1e-6),
                    None => {
                        prop_assert!(m.is_los);
                        prop_assert!(angle_diff(m.aod_rad, exact.aod).abs().to_degrees() <= 0.5);
                        prop_assert!(angle_diff(m.aoa_rad, exact.aoa).abs().to_degrees() <= 0.5);
                    }
                }
            }
        }
    }
}

#[test]
fn correlated_sf_smooths_received_power() {
    let rms_step = |iid: bool| {
        let mut sq = Vec::new();
        for seed in 0..10 {
            let t = run_spatially_consistent(&track(seed, EnvironmentMode::Los, iid), 0).unwrap();
            let p: Vec<f64> = t.snapshots.iter().map(|s| s.total_power_dbm()).collect();
            sq.extend(p.windows(2).map(|w| (w[1] - w[0]).powi(2)));
        }
        mean(&sq).sqrt()
    };
    let (corr, iid) = (rms_step(false), rms_step(true));
    assert!(
        iid >= 3.0 * corr,
        "correlated {corr:.2} dB vs i.i.d. {iid:.2} dB"
    );
}

fn deciles(cfg: &ValidatedConfig, kind: ChannelKind) -> Vec<f64> {
    let cdf = blockage_cdf(cfg, 2000, kind).unwrap();
    (1..=9).map(|k| cdf.decile(k)).collect()
}

#[test]
fn narrow_beams_and_nlos_lobes_see_more_blockage() {
    let cfg = validate_config(SimConfig::default()).unwrap();
    let d7 = deciles(&cfg, ChannelKind::Directional { hpbw_deg: 7.0 });
    let d60 = deciles(&cfg, ChannelKind::Directional { hpbw_deg: 60.0 });
    assert!(
        d7.iter().zip(&d60).all(|(a, b)| a >= b),
        "{d7:?} vs {d60:?}"
    );
    let nlos = deciles(&cfg, ChannelKind::OmniNlos);
    let los = deciles(&cfg, ChannelKind::OmniLos);
    assert!(
        nlos.iter().zip(&los).all(|(a, b)| a >= b),
        "{nlos:?} vs {los:?}"
    );
    assert!(d7.iter().all(|&l| l >= 0.0));
}

#[test]
fn stationary_blocked_fraction_falls_with_beamwidth() {
    // Fraction of time a single blocker attenuates, from the mean dwells.
    let cfg = BlockageConfig::default();
    let active = |h: f64| {
        let p = cfg.params_for(h).unwrap();
        let d = [
            p.lambda_decay,
            p.lambda_shadow,
            p.lambda_rise,
            p.lambda_unshadow,
        ]
        .map(|l| 1.0 / l);
        (d[1] + d[2] + d[3]) / d.iter().sum::<f64>()
    };
    let widths = [7.0, 15.0, 30.0, 60.0, 120.0];
    for w in widths.windows(2) {
        assert!(active(w[0]) > active(w[1]));
        let (a, b) = (cfg.params_for(w[0]).unwrap(), cfg.params_for(w[1]).unwrap());
        assert!(a.mean_attenuation_db >= b.mean_attenuation_db);
    }
}
