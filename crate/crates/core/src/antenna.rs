//! Single-element directional antenna patterns and directional channel
//! synthesis from omnidirectional snapshots.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::angle_diff;
use crate::tcsl::ChannelSnapshot;

/// Sidelobe floor relative to the peak gain.
pub const SIDELOBE_FLOOR_DB: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoresightPolicy {
    StrongestMpc,
    Fixed,
}

/// Beamwidths in degrees. With `boresight = fixed`, the `fixed_*` angles
/// (degrees; azimuth from +x, zenith from +z) give the pointing directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    pub tx_az_hpbw_deg: f64,
    pub tx_el_hpbw_deg: f64,
    pub rx_az_hpbw_deg: f64,
    pub rx_el_hpbw_deg: f64,
    pub boresight: BoresightPolicy,
    pub fixed_tx_az_deg: f64,
    pub fixed_tx_zen_deg: f64,
    pub fixed_rx_az_deg: f64,
    pub fixed_rx_zen_deg: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        AntennaConfig {
            tx_az_hpbw_deg: 10.9,
            tx_el_hpbw_deg: 8.6,
            rx_az_hpbw_deg: 10.9,
            rx_el_hpbw_deg: 8.6,
            boresight: BoresightPolicy::StrongestMpc,
            fixed_tx_az_deg: 0.0,
            fixed_tx_zen_deg: 90.0,
            fixed_rx_az_deg: 180.0,
            fixed_rx_zen_deg: 90.0,
        }
    }
}

impl AntennaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("antenna.tx_az_hpbw_deg", self.tx_az_hpbw_deg),
            ("antenna.tx_el_hpbw_deg", self.tx_el_hpbw_deg),
            ("antenna.rx_az_hpbw_deg", self.rx_az_hpbw_deg),
            ("antenna.rx_el_hpbw_deg", self.rx_el_hpbw_deg),
        ] {
            if !(v > 0.0 && v <= 360.0) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} out of (0,360]: got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn tx_pattern(&self) -> Pattern {
        Pattern::new(self.tx_az_hpbw_deg, self.tx_el_hpbw_deg)
    }

    pub fn rx_pattern(&self) -> Pattern {
        Pattern::new(self.rx_az_hpbw_deg, self.rx_el_hpbw_deg)
    }
}

/// Gaussian-mainlobe horn pattern. A 360 x 360 degree beam is treated as
/// the isotropic 0 dBi radiator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pattern {
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
}

impl Pattern {
    pub fn new(hpbw_az_deg: f64, hpbw_el_deg: f64) -> Self {
        Pattern {
            hpbw_az_deg,
            hpbw_el_deg,
        }
    }

    pub fn isotropic() -> Self {
        Pattern::new(360.0, 360.0)
    }

    pub fn is_isotropic(&self) -> bool {
        self.hpbw_az_deg >= 360.0 && self.hpbw_el_deg >= 360.0
    }

    /// Peak gain from the aperture approximation `41253 / (az * el)`.
    pub fn peak_gain_dbi(&self) -> f64 {
        if self.is_isotropic() {
            0.0
        } else {
            10.0 * (41_253.0 / (self.hpbw_az_deg * self.hpbw_el_deg)).log10()
        }
    }

    /// Gain toward an offset of `(delta_az, delta_el)` degrees from boresight.
    pub fn gain_dbi(&self, delta_az_deg: f64, delta_el_deg: f64) -> f64 {
        pattern_gain(
            self.hpbw_az_deg,
            self.hpbw_el_deg,
            delta_az_deg,
            delta_el_deg,
        )
    }
}

/// `G0 - 12 [(daz/HPBW_az)^2 + (del/HPBW_el)^2]` dB, floored at `G0 - 25` dB.
pub fn pattern_gain(
    hpbw_az_deg: f64,
    hpbw_el_deg: f64,
    delta_az_deg: f64,
    delta_el_deg: f64,
) -> f64 {
    let p = Pattern::new(hpbw_az_deg, hpbw_el_deg);
    let g0 = p.peak_gain_dbi();
    if p.is_isotropic() {
        return g0;
    }
    let a = delta_az_deg / hpbw_az_deg;
    let e = delta_el_deg / hpbw_el_deg;
    let rolloff = 12.0 * (a * a + e * e);
    g0 - rolloff.min(SIDELOBE_FLOOR_DB)
}

/// Pointing directions chosen for a directional snapshot, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boresight {
    pub tx_az_rad: f64,
    pub tx_zen_rad: f64,
    pub rx_az_rad: f64,
    pub rx_zen_rad: f64,
}

pub fn choose_boresight(omni: &ChannelSnapshot, cfg: &AntennaConfig) -> Result<Boresight> {
    match cfg.boresight {
        BoresightPolicy::Fixed => Ok(Boresight {
            tx_az_rad: cfg.fixed_tx_az_deg.to_radians(),
            tx_zen_rad: cfg.fixed_tx_zen_deg.to_radians(),
            rx_az_rad: cfg.fixed_rx_az_deg.to_radians(),
            rx_zen_rad: cfg.fixed_rx_zen_deg.to_radians(),
        }),
        BoresightPolicy::StrongestMpc => {
            let m = omni
                .mpcs
                .iter()
                .reduce(|best, m| if m.power_mw > best.power_mw { m } else { best })
                .ok_or_else(|| SimError::InvalidArgument("snapshot has no MPCs".into()))?;
            Ok(Boresight {
                tx_az_rad: m.aod_rad,
                tx_zen_rad: m.zod_rad,
                rx_az_rad: m.aoa_rad,
                rx_zen_rad: m.zoa_rad,
            })
        }
    }
}

/// Applies TX and RX patterns to every MPC of `omni`.
pub fn directional_snapshot(
    omni: &ChannelSnapshot,
    cfg: &AntennaConfig,
) -> Result<(ChannelSnapshot, Boresight)> {
    let bore = choose_boresight(omni, cfg)?;
    let (tx, rx) = (cfg.tx_pattern(), cfg.rx_pattern());
    let mut out = omni.clone();
    for m in &mut out.mpcs {
        let g_tx = tx.gain_dbi(
            angle_diff(m.aod_rad, bore.tx_az_rad).to_degrees(),
            (m.zod_rad - bore.tx_zen_rad).to_degrees(),
        );
        let g_rx = rx.gain_dbi(
            angle_diff(m.aoa_rad, bore.rx_az_rad).to_degrees(),
            (m.zoa_rad - bore.rx_zen_rad).to_degrees(),
        );
        m.power_mw *= 10f64.powf((g_tx + g_rx) / 10.0);
    }
    out.total_rx_power_mw = out.power_sum_mw();
    out.rebuild_clusters();
    Ok((out, bore))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Environment;
    use crate::geometry::LinkGeometry;
    use crate::pathloss::path_loss_ci;
    use crate::rng::{substream, Purpose, StreamLabel};
    use crate::tcsl::{generate_snapshot, TcslConfig};

    fn omni(run: u64) -> ChannelSnapshot {
        let pl = path_loss_ci(73.0, 150.0, 3.2, 0.0, 0.0).unwrap();
        let geom = LinkGeometry {
            bs: [0.0, 0.0, 10.0],
            ut: [150.0, 20.0, 1.5],
        };
        let mut rng = substream(3, StreamLabel::new(Purpose::Tcsl, run));
        generate_snapshot(
            &TcslConfig::default(),
            geom,
            Environment::Nlos,
            pl,
            30.0,
            &mut rng,
        )
    }

    #[test]
    fn gain_at_key_offsets() {
        let (az, el) = (15.0, 10.0);
        let g0 = Pattern::new(az, el).peak_gain_dbi();
        assert!((g0 - 10.0 * (41_253.0f64 / 150.0).log10()).abs() < 1e-12);
        assert_eq!(pattern_gain(az, el, 0.0, 0.0), g0);
        assert!((pattern_gain(az, el, az / 2.0, 0.0) - (g0 - 3.0)).abs() < 0.01);
        assert!((pattern_gain(az, el, 0.0, -el / 2.0) - (g0 - 3.0)).abs() < 0.01);
        assert!((pattern_gain(az, el, az, 0.0) - (g0 - 12.0)).abs() < 1e-9);
        assert!((pattern_gain(az, el, 90.0, 0.0) - (g0 - SIDELOBE_FLOOR_DB)).abs() < 1e-12);
    }

    #[test]
    fn isotropic_limit_is_identity() {
        let cfg = AntennaConfig {
            tx_az_hpbw_deg: 360.0,
            tx_el_hpbw_deg: 360.0,
            rx_az_hpbw_deg: 360.0,
            rx_el_hpbw_deg: 360.0,
            ..AntennaConfig::default()
        };
        let o = omni(0);
        let (d, _) = directional_snapshot(&o, &cfg).unwrap();
        assert_eq!(d.mpcs, o.mpcs);
    }

    #[test]
    fn single_mpc_gets_both_peak_gains() {
        let mut o = omni(1);
        o.mpcs.truncate(1);
        let cfg = AntennaConfig::default();
        let (d, _) = directional_snapshot(&o, &cfg).unwrap();
        let gain_db = 10.0 * (d.mpcs[0].power_mw / o.mpcs[0].power_mw).log10();
        let expect = cfg.tx_pattern().peak_gain_dbi() + cfg.rx_pattern().peak_gain_dbi();
        assert!((gain_db - expect).abs() < 1e-9);
    }

    #[test]
    fn off_beam_mpc_hits_floor() {
        let mut o = omni(2);
        o.mpcs.truncate(2);
        o.mpcs[1] = o.mpcs[0];
        o.mpcs[1].power_mw = o.mpcs[0].power_mw / 10.0;
        o.mpcs[1].aoa_rad = crate::geometry::wrap_azimuth(o.mpcs[0].aoa_rad + 90f64.to_radians());
        let cfg = AntennaConfig {
            rx_az_hpbw_deg: 15.0,
            tx_az_hpbw_deg: 360.0,
            tx_el_hpbw_deg: 360.0,
            ..AntennaConfig::default()
        };
        let (d, _) = directional_snapshot(&o, &cfg).unwrap();
        let g = 10.0 * (d.mpcs[1].power_mw / o.mpcs[1].power_mw).log10();
        let g0 = cfg.rx_pattern().peak_gain_dbi();
        assert!((g - (g0 - SIDELOBE_FLOOR_DB)).abs() < 1e-9);
    }

    #[test]
    fn empty_snapshot_is_rejected() {
        let mut o = omni(3);
        o.mpcs.clear();
        assert!(directional_snapshot(&o, &AntennaConfig::default()).is_err());
    }

    #[test]
    fn narrower_beam_never_adds_strong_paths() {
        for run in 0..50 {
            let o = omni(run);
            let wide = AntennaConfig {
                rx_az_hpbw_deg: 60.0,
                ..AntennaConfig::default()
            };
            let narrow = AntennaConfig {
                rx_az_hpbw_deg: 7.0,
                ..AntennaConfig::default()
            };
            let threshold = o.total_power_dbm() - 20.0;
            let count = |c: &AntennaConfig| {
                let (d, _) = directional_snapshot(&o, c).unwrap();
                d.mpcs
                    .iter()
                    .filter(|m| 10.0 * m.power_mw.log10() > threshold)
                    .count()
            };
            // Narrow beams have higher peak gain; compare the pattern shape only.
            let shift = narrow.rx_pattern().peak_gain_dbi() - wide.rx_pattern().peak_gain_dbi();
            let narrow_count = {
                let (d, _) = directional_snapshot(&o, &narrow).unwrap();
                d.mpcs
                    .iter()
                    .filter(|m| 10.0 * m.power_mw.log10() - shift > threshold)
                    .count()
            };
            assert!(narrow_count <= count(&wide));
        }
    }

    #[test]
    fn directional_power_bounded_by_peak_gains() {
        for run in 0..50 {
            let o = omni(run);
            let cfg = AntennaConfig::default();
            let (d, _) = directional_snapshot(&o, &cfg).unwrap();
            let bound = o.total_power_dbm()
                + cfg.tx_pattern().peak_gain_dbi()
                + cfg.rx_pattern().peak_gain_dbi();
            assert!(d.total_power_dbm() <= bound + 1e-9);
        }
    }
}
