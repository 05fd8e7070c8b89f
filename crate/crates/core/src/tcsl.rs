//! Time-cluster / spatial-lobe (TCSL) generation of an omnidirectional
//! channel snapshot.
//!
//! Temporal structure (clusters of subpaths) and spatial structure (lobes of
//! arrival and departure directions) are drawn independently; every MPC then
//! belongs to one time cluster, one departure lobe and one arrival lobe.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::Environment;
use crate::error::{Result, SimError};
use crate::geometry::{clamp_zenith, delay_ns_for_length, wrap_azimuth, LinkGeometry};
use crate::pathloss::{dbm_to_mw, mw_to_dbm, PathLossSample};

/// One multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mpc {
    pub power_mw: f64,
    /// Absolute propagation delay.
    pub delay_ns: f64,
    pub phase_rad: f64,
    pub aod_rad: f64,
    pub zod_rad: f64,
    pub aoa_rad: f64,
    pub zoa_rad: f64,
    pub cluster_id: usize,
    pub lobe_id_tx: usize,
    pub lobe_id_rx: usize,
    pub is_los: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeCluster {
    pub id: usize,
    pub excess_delay_ns: f64,
    pub power_fraction: f64,
    pub mpc_indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LobeSide {
    Departure,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialLobe {
    pub id: usize,
    pub side: LobeSide,
    pub center_azimuth_rad: f64,
    pub angular_spread_deg: f64,
}

/// Statistics of the TCSL layer. Integer counts are drawn uniformly from
/// the inclusive `[min, max]` ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcslConfig {
    pub clusters_min: u32,
    pub clusters_max: u32,
    pub subpaths_min: u32,
    pub subpaths_max: u32,
    pub lobes_min: u32,
    pub lobes_max: u32,
    /// Mean gap between successive cluster excess delays.
    pub cluster_delay_mean_ns: f64,
    /// Mean gap between successive subpaths inside a cluster.
    pub subpath_delay_mean_ns: f64,
    /// Mean extra delay of the first NLOS arrival over the direct path.
    pub nlos_excess_delay_mean_ns: f64,
    pub cluster_decay_gamma_ns: f64,
    pub intra_cluster_decay_ns: f64,
    pub lobe_spread_los_deg: f64,
    pub lobe_spread_nlos_deg: f64,
    pub zenith_spread_deg: f64,
}

impl Default for TcslConfig {
    fn default() -> Self {
        TcslConfig {
            clusters_min: 1,
            clusters_max: 6,
            subpaths_min: 1,
            subpaths_max: 30,
            lobes_min: 1,
            lobes_max: 5,
            cluster_delay_mean_ns: 100.0,
            subpath_delay_mean_ns: 3.0,
            nlos_excess_delay_mean_ns: 20.0,
            cluster_decay_gamma_ns: 50.0,
            intra_cluster_decay_ns: 17.0,
            lobe_spread_los_deg: 10.5,
            lobe_spread_nlos_deg: 6.0,
            zenith_spread_deg: 5.0,
        }
    }
}

impl TcslConfig {
    pub fn lobe_spread_deg(&self, env: Environment) -> f64 {
        match env {
            Environment::Los => self.lobe_spread_los_deg,
            Environment::Nlos => self.lobe_spread_nlos_deg,
        }
    }
}

/// Omnidirectional CIR at one UT position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    pub geometry: LinkGeometry,
    pub environment: Environment,
    pub mpcs: Vec<Mpc>,
    pub clusters: Vec<TimeCluster>,
    pub lobes: Vec<SpatialLobe>,
    pub pathloss: PathLossSample,
    pub total_rx_power_mw: f64,
}

impl ChannelSnapshot {
    pub fn position_m(&self) -> [f64; 3] {
        self.geometry.ut
    }

    pub fn power_sum_mw(&self) -> f64 {
        self.mpcs.iter().map(|m| m.power_mw).sum()
    }

    pub fn total_power_dbm(&self) -> f64 {
        mw_to_dbm(self.power_sum_mw())
    }

    pub fn los_mpc(&self) -> Option<&Mpc> {
        self.mpcs.iter().find(|m| m.is_los)
    }

    pub fn arrival_lobes(&self) -> impl Iterator<Item = &SpatialLobe> {
        self.lobes.iter().filter(|l| l.side == LobeSide::Arrival)
    }

    pub fn min_delay_ns(&self) -> f64 {
        self.mpcs
            .iter()
            .map(|m| m.delay_ns)
            .fold(f64::INFINITY, f64::min)
    }

    /// Rebuilds `clusters` from the MPC cluster ids and current delays.
    pub fn rebuild_clusters(&mut self) {
        let min_delay = self.min_delay_ns();
        let total = self.power_sum_mw();
        let mut by_id: BTreeMap<usize, TimeCluster> = BTreeMap::new();
        for (idx, m) in self.mpcs.iter().enumerate() {
            let c = by_id.entry(m.cluster_id).or_insert_with(|| TimeCluster {
                id: m.cluster_id,
                excess_delay_ns: f64::INFINITY,
                power_fraction: 0.0,
                mpc_indices: Vec::new(),
            });
            c.excess_delay_ns = c.excess_delay_ns.min(m.delay_ns - min_delay);
            c.power_fraction += m.power_mw;
            c.mpc_indices.push(idx);
        }
        self.clusters = by_id
            .into_values()
            .map(|mut c| {
                c.power_fraction = if total > 0.0 {
                    c.power_fraction / total
                } else {
                    0.0
                };
                c
            })
            .collect();
    }
}

/// Exponentially decaying power allocation over clusters and subpaths.
///
/// Cluster `n` receives a share proportional to `exp(-tau_n / gamma)`; inside
/// a cluster, subpath `k` receives a share proportional to
/// `exp(-rho_k / intra_gamma)`. The result sums to `total_power_mw`.
pub fn assign_powers(
    cluster_excess_ns: &[f64],
    subpath_excess_ns: &[Vec<f64>],
    gamma_ns: f64,
    intra_gamma_ns: f64,
    total_power_mw: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(gamma_ns > 0.0 && intra_gamma_ns > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "decay constants must be positive, got {gamma_ns} / {intra_gamma_ns} ns"
        )));
    }
    if cluster_excess_ns.len() != subpath_excess_ns.len() {
        return Err(SimError::InvalidArgument(
            "one subpath delay list is required per cluster".into(),
        ));
    }
    // Offsets by the minimum keep exp() away from underflow.
    let c0 = cluster_excess_ns
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let cw: Vec<f64> = cluster_excess_ns
        .iter()
        .map(|t| (-(t - c0) / gamma_ns).exp())
        .collect();
    let csum: f64 = cw.iter().sum();
    Ok(cw
        .iter()
        .zip(subpath_excess_ns)
        .map(|(w, subs)| {
            let s0 = subs.iter().copied().fold(f64::INFINITY, f64::min);
            let sw: Vec<f64> = subs
                .iter()
                .map(|r| (-(r - s0) / intra_gamma_ns).exp())
                .collect();
            let ssum: f64 = sw.iter().sum();
            sw.into_iter()
                .map(|s| total_power_mw * (w / csum) * (s / ssum))
                .collect()
        })
        .collect())
}

/// Re-derives every MPC power from its current excess delays and rescales the
/// snapshot to `total_power_mw`.
pub fn redistribute_powers(snapshot: &mut ChannelSnapshot, total_power_mw: f64, tcsl: &TcslConfig) {
    snapshot.rebuild_clusters();
    let min_delay = snapshot.min_delay_ns();
    let cluster_excess: Vec<f64> = snapshot
        .clusters
        .iter()
        .map(|c| c.excess_delay_ns)
        .collect();
    let subpath_excess: Vec<Vec<f64>> = snapshot
        .clusters
        .iter()
        .map(|c| {
            c.mpc_indices
                .iter()
                .map(|&i| snapshot.mpcs[i].delay_ns - min_delay - c.excess_delay_ns)
                .collect()
        })
        .collect();
    let powers = assign_powers(
        &cluster_excess,
        &subpath_excess,
        tcsl.cluster_decay_gamma_ns,
        tcsl.intra_cluster_decay_ns,
        total_power_mw,
    )
    .expect("validated decay constants");
    for (c, ps) in snapshot.clusters.iter().zip(&powers) {
        for (&i, &p) in c.mpc_indices.iter().zip(ps) {
            snapshot.mpcs[i].power_mw = p;
        }
    }
    snapshot.total_rx_power_mw = total_power_mw;
    snapshot.rebuild_clusters();
}

fn uniform_count<R: Rng + ?Sized>(min: u32, max: u32, rng: &mut R) -> usize {
    rng.random_range(min..=max) as usize
}

/// Standard normal truncated to `[-3, 3]`.
fn truncated_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.sample(StandardNormal);
        if x.abs() <= 3.0 {
            return x;
        }
    }
}

fn lobe_centers<R: Rng + ?Sized>(
    count: usize,
    spread_rad: f64,
    anchor: Option<f64>,
    rng: &mut R,
) -> Vec<f64> {
    let mut centers: Vec<f64> = anchor.into_iter().collect();
    let mut tries = 0;
    while centers.len() < count {
        let c = rng.random_range(0.0..TAU);
        tries += 1;
        let clear = centers
            .iter()
            .all(|&o| crate::geometry::angle_diff(c, o).abs() >= spread_rad);
        if clear || tries > 10_000 {
            centers.push(c);
        }
    }
    centers
}

/// Draws a fresh omnidirectional snapshot whose MPC powers sum to
/// `tx_power_dbm - pathloss.total_db`.
pub fn generate_snapshot<R: Rng + ?Sized>(
    cfg: &TcslConfig,
    geometry: LinkGeometry,
    environment: Environment,
    pathloss: PathLossSample,
    tx_power_dbm: f64,
    rng: &mut R,
) -> ChannelSnapshot {
    let total_power_mw = dbm_to_mw(tx_power_dbm - pathloss.total_db);
    let los = geometry.los_angles();
    let d3 = geometry.distance_3d();

    // Temporal structure.
    let n_clusters = uniform_count(cfg.clusters_min, cfg.clusters_max, rng);
    let cluster_gap = Exp::new(1.0 / cfg.cluster_delay_mean_ns).expect("positive mean");
    let subpath_gap = Exp::new(1.0 / cfg.subpath_delay_mean_ns).expect("positive mean");
    let mut cluster_excess = Vec::with_capacity(n_clusters);
    let mut subpath_excess = Vec::with_capacity(n_clusters);
    let mut tau = 0.0;
    for n in 0..n_clusters {
        if n > 0 {
            tau += cluster_gap.sample(rng);
        }
        cluster_excess.push(tau);
        let m = uniform_count(cfg.subpaths_min, cfg.subpaths_max, rng);
        let mut rho = 0.0;
        let subs: Vec<f64> = (0..m)
            .map(|k| {
                if k > 0 {
                    rho += subpath_gap.sample(rng);
                }
                rho
            })
            .collect();
        subpath_excess.push(subs);
    }
    let base_delay = delay_ns_for_length(d3)
        + match environment {
            Environment::Los => 0.0,
            Environment::Nlos => Exp::new(1.0 / cfg.nlos_excess_delay_mean_ns)
                .expect("positive mean")
                .sample(rng),
        };
    let powers = assign_powers(
        &cluster_excess,
        &subpath_excess,
        cfg.cluster_decay_gamma_ns,
        cfg.intra_cluster_decay_ns,
        total_power_mw,
    )
    .expect("validated decay constants");

    // Spatial structure.
    let spread_deg = cfg.lobe_spread_deg(environment);
    let spread = spread_deg.to_radians();
    let is_los = environment == Environment::Los;
    let n_tx = uniform_count(cfg.lobes_min, cfg.lobes_max, rng);
    let n_rx = uniform_count(cfg.lobes_min, cfg.lobes_max, rng);
    let tx_centers = lobe_centers(n_tx, spread, is_los.then_some(los.aod), rng);
    let rx_centers = lobe_centers(n_rx, spread, is_los.then_some(los.aoa), rng);
    let zen_spread = cfg.zenith_spread_deg.to_radians();

    let mut mpcs = Vec::new();
    for (cid, (tau_n, subs)) in cluster_excess.iter().zip(&subpath_excess).enumerate() {
        for (k, rho) in subs.iter().enumerate() {
            let power_mw = powers[cid][k];
            let phase_rad = rng.random_range(0.0..TAU);
            if is_los && cid == 0 && k == 0 {
                mpcs.push(Mpc {
                    power_mw,
                    delay_ns: base_delay,
                    phase_rad,
                    aod_rad: los.aod,
                    zod_rad: los.zod,
                    aoa_rad: los.aoa,
                    zoa_rad: los.zoa,
                    cluster_id: cid,
                    lobe_id_tx: 0,
                    lobe_id_rx: 0,
                    is_los: true,
                });
                continue;
            }
            let lt = rng.random_range(0..n_tx);
            let lr = rng.random_range(0..n_rx);
            mpcs.push(Mpc {
                power_mw,
                delay_ns: base_delay + tau_n + rho,
                phase_rad,
                aod_rad: wrap_azimuth(tx_centers[lt] + spread * truncated_normal(rng)),
                zod_rad: clamp_zenith(los.zod + zen_spread * truncated_normal(rng)),
                aoa_rad: wrap_azimuth(rx_centers[lr] + spread * truncated_normal(rng)),
                zoa_rad: clamp_zenith(los.zoa + zen_spread * truncated_normal(rng)),
                cluster_id: cid,
                lobe_id_tx: lt,
                lobe_id_rx: lr,
                is_los: false,
            });
        }
    }

    let lobes = tx_centers
        .iter()
        .enumerate()
        .map(|(id, &c)| SpatialLobe {
            id,
            side: LobeSide::Departure,
            center_azimuth_rad: c,
            angular_spread_deg: spread_deg,
        })
        .chain(rx_centers.iter().enumerate().map(|(id, &c)| SpatialLobe {
            id,
            side: LobeSide::Arrival,
            center_azimuth_rad: c,
            angular_spread_deg: spread_deg,
        }))
        .collect();

    let mut snapshot = ChannelSnapshot {
        geometry,
        environment,
        mpcs,
        clusters: Vec::new(),
        lobes,
        pathloss,
        total_rx_power_mw: total_power_mw,
    };
    snapshot.rebuild_clusters();
    snapshot
}

/// Power delay profile: `(bin start in ns, power in dBm)` for every occupied
/// bin of width `bin_ns`, in increasing delay order.
pub fn omni_pdp(snapshot: &ChannelSnapshot, bin_ns: f64) -> Result<Vec<(f64, f64)>> {
    pdp_linear(snapshot, bin_ns)
        .map(|bins| bins.into_iter().map(|(d, p)| (d, mw_to_dbm(p))).collect())
}

/// Same as [`omni_pdp`] but with bin powers in mW.
pub fn pdp_linear(snapshot: &ChannelSnapshot, bin_ns: f64) -> Result<Vec<(f64, f64)>> {
    if !(bin_ns > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "PDP bin width must be positive, got {bin_ns} ns"
        )));
    }
    let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
    for m in &snapshot.mpcs {
        *bins
            .entry((m.delay_ns / bin_ns).floor() as i64)
            .or_default() += m.power_mw;
    }
    Ok(bins
        .into_iter()
        .map(|(b, p)| (b as f64 * bin_ns, p))
        .collect())
}

/// Angular offset of `az` from a lobe center, in `(-pi, pi]`.
pub fn lobe_offset(az: f64, center: f64) -> f64 {
    crate::geometry::angle_diff(az, center)
}
