//! Evolution of a channel along a UT track.
//!
//! Large-scale parameters follow the SF and LOS maps at the exact UT
//! position. Small-scale parameters drift geometrically: the LOS ray with
//! a linear angle update, every other MPC as a virtual LOS ray towards a
//! mirrored UT (multiple reflection surfaces, MRS). Each segment starts from
//! a fresh snapshot and is blended in one time cluster per snapshot.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{Environment, EnvironmentMode, ValidatedConfig};
use crate::error::{Result, SimError};
use crate::geometry::{
    angle_diff, clamp_zenith, delay_ns_for_length, dot, length_for_delay_ns, norm, sub,
    unit_vector, wrap_azimuth, LinkGeometry, RayAngles,
};
use crate::maps::{correlated_map, los_condition_map, sample_map, ExponentialFilter, GridMap};
use crate::pathloss::{dbm_to_mw, o2i_loss};
use crate::rng::{substream, Purpose, StreamLabel};
use crate::tcsl::{
    generate_snapshot, redistribute_powers, ChannelSnapshot, LobeSide, Mpc, TcslConfig,
};
use crate::trajectory::trajectory_positions;

/// Azimuth updates are skipped this close to the poles.
pub const POLE_SIN_LIMIT: f64 = 1e-3;

/// Reflection parity and aggregate surface angle of one NLOS MPC.
///
/// Odd reflection counts (`parity = +1`) mirror the geometry:
/// `aoa = delta - aod + pi` and the UT heading maps to `delta - heading`.
/// Even counts (`parity = -1`) rotate it: `aoa = delta + aod` and
/// `delta + heading`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrsTag {
    pub parity: i8,
    pub delta_rs_rad: f64,
    /// Mirrored UT heading at the time the tag was drawn.
    pub mirrored_heading_rad: f64,
}

impl MrsTag {
    /// Infers the aggregate surface angle from an MPC's current angles.
    pub fn from_angles(parity: i8, aod_rad: f64, aoa_rad: f64, heading_rad: f64) -> Self {
        assert!(parity == 1 || parity == -1, "parity must be +1 or -1");
        let delta = if parity == 1 {
            wrap_azimuth(aoa_rad + aod_rad - PI)
        } else {
            wrap_azimuth(aoa_rad - aod_rad)
        };
        let mut tag = MrsTag {
            parity,
            delta_rs_rad: delta,
            mirrored_heading_rad: 0.0,
        };
        tag.mirrored_heading_rad = tag.mirror_heading(heading_rad);
        tag
    }

    fn b(&self) -> f64 {
        f64::from(self.parity)
    }

    /// Arrival azimuth implied by departure azimuth `aod_rad`.
    pub fn aoa_for(&self, aod_rad: f64) -> f64 {
        wrap_azimuth(self.delta_rs_rad - self.b() * aod_rad + 0.5 * (1.0 + self.b()) * PI)
    }

    pub fn mirror_heading(&self, heading_rad: f64) -> f64 {
        wrap_azimuth(self.delta_rs_rad - self.b() * heading_rad)
    }

    /// Absolute violation of the consistency relation, radians.
    pub fn residual(&self, aod_rad: f64, aoa_rad: f64) -> f64 {
        angle_diff(aoa_rad, self.aoa_for(aod_rad)).abs()
    }
}

/// Draws a parity for every non-LOS MPC (`None` for the LOS ray).
pub fn init_mrs_tags<R: Rng + ?Sized>(
    snapshot: &ChannelSnapshot,
    heading_rad: f64,
    rng: &mut R,
) -> Vec<Option<MrsTag>> {
    snapshot
        .mpcs
        .iter()
        .map(|m| {
            (!m.is_los).then(|| {
                let parity = if rng.random_bool(0.5) { 1 } else { -1 };
                MrsTag::from_angles(parity, m.aod_rad, m.aoa_rad, heading_rad)
            })
        })
        .collect()
}

/// Rates `(d azimuth/dt, d zenith/dt)` of the direction from a fixed point
/// towards a point `r_m` away at (`az`, `zen`) that moves with `v`.
pub fn angle_rates(az: f64, zen: f64, v: [f64; 3], r_m: f64) -> (f64, f64) {
    let (sa, ca) = az.sin_cos();
    let (sz, cz) = zen.sin_cos();
    let s_az = if sz.abs() < POLE_SIN_LIMIT {
        0.0
    } else {
        (v[1] * ca - v[0] * sa) / (r_m * sz)
    };
    let s_zen = (v[0] * ca * cz + v[1] * sa * cz - v[2] * sz) / r_m;
    (s_az, s_zen)
}

fn neg(v: [f64; 3]) -> [f64; 3] {
    [-v[0], -v[1], -v[2]]
}

/// Linear drift of the LOS angles over `dt_s` for UT velocity `v`. Departure
/// angles see the UT move with `v`; arrival angles see the BS move with `-v`.
pub fn update_los_angles(angles: RayAngles, v: [f64; 3], r_m: f64, dt_s: f64) -> Result<RayAngles> {
    if !(r_m > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "LOS distance must be positive, got {r_m} m"
        )));
    }
    let (s_aod, s_zod) = angle_rates(angles.aod, angles.zod, v, r_m);
    let (s_aoa, s_zoa) = angle_rates(angles.aoa, angles.zoa, neg(v), r_m);
    Ok(RayAngles {
        aod: wrap_azimuth(angles.aod + s_aod * dt_s),
        zod: clamp_zenith(angles.zod + s_zod * dt_s),
        aoa: wrap_azimuth(angles.aoa + s_aoa * dt_s),
        zoa: clamp_zenith(angles.zoa + s_zoa * dt_s),
    })
}

/// Velocity of the mirrored UT seen by an MPC with `tag`.
pub fn mirrored_velocity(tag: &MrsTag, v: [f64; 3]) -> [f64; 3] {
    let speed = v[0].hypot(v[1]);
    if speed == 0.0 {
        return [0.0, 0.0, v[2]];
    }
    let h = tag.mirror_heading(v[1].atan2(v[0]));
    [speed * h.cos(), speed * h.sin(), v[2]]
}

/// Angle update of a non-LOS MPC treated as a virtual LOS ray of length
/// `r_virtual_m`. The arrival azimuth follows from the departure azimuth
/// through the tag, so the consistency relation holds after every step.
pub fn update_nlos_mpc(mpc: &Mpc, tag: &MrsTag, v: [f64; 3], r_virtual_m: f64, dt_s: f64) -> Mpc {
    let vm = mirrored_velocity(tag, v);
    let (s_aod, s_zod) = angle_rates(mpc.aod_rad, mpc.zod_rad, vm, r_virtual_m);
    let (_, s_zoa) = angle_rates(mpc.aoa_rad, mpc.zoa_rad, neg(v), r_virtual_m);
    let aod = wrap_azimuth(mpc.aod_rad + s_aod * dt_s);
    Mpc {
        aod_rad: aod,
        zod_rad: clamp_zenith(mpc.zod_rad + s_zod * dt_s),
        aoa_rad: tag.aoa_for(aod),
        zoa_rad: clamp_zenith(mpc.zoa_rad + s_zoa * dt_s),
        ..*mpc
    }
}

/// Law of cosines: new path length after a step of `s_m` at angle `alpha`
/// (given as its cosine) to the direction the wave arrives from.
pub fn updated_path_length(len_m: f64, s_m: f64, cos_alpha: f64) -> f64 {
    (len_m * len_m + s_m * s_m - 2.0 * len_m * s_m * cos_alpha)
        .max(0.0)
        .sqrt()
}

/// Advances the phase by the path-length change.
fn shifted_phase(phase: f64, delta_len_m: f64, wavelength_m: f64) -> f64 {
    wrap_azimuth(phase - TAU * delta_len_m / wavelength_m)
}

/// Delay and phase of `mpc` after the UT moves by `step`.
pub fn update_delay_phase(mpc: &Mpc, step: [f64; 3], wavelength_m: f64) -> Mpc {
    let s = norm(step);
    if s == 0.0 {
        return *mpc;
    }
    let len = length_for_delay_ns(mpc.delay_ns);
    let cos_alpha = dot(unit_vector(mpc.aoa_rad, mpc.zoa_rad), step) / s;
    let new_len = updated_path_length(len, s, cos_alpha.clamp(-1.0, 1.0));
    with_path_length(mpc, new_len, wavelength_m)
}

fn with_path_length(mpc: &Mpc, new_len_m: f64, wavelength_m: f64) -> Mpc {
    let len = length_for_delay_ns(mpc.delay_ns);
    Mpc {
        delay_ns: delay_ns_for_length(new_len_m),
        phase_rad: shifted_phase(mpc.phase_rad, new_len_m - len, wavelength_m),
        ..*mpc
    }
}

/// Re-derives MPC powers from the current delays at a new total power.
pub fn update_powers(snapshot: &mut ChannelSnapshot, new_total_power_mw: f64, tcsl: &TcslConfig) {
    redistribute_powers(snapshot, new_total_power_mw, tcsl);
}

/// One channel segment while it is being evolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentState {
    pub segment_index: usize,
    /// Index of the track position where the segment was drawn.
    pub start_snapshot: usize,
    pub environment: Environment,
    pub snapshot: ChannelSnapshot,
    pub tags: Vec<Option<MrsTag>>,
}

/// Snapshot `k` of the blend from `old` to `new`: clusters with index `<= k`
/// come from `new`, the rest from `old`, and the result is rescaled to the
/// total power of `new`. MRS tags travel with their MPCs.
pub fn blend_segments(old: &SegmentState, new: &SegmentState, k: usize) -> SegmentState {
    let tx_offset = new
        .snapshot
        .lobes
        .iter()
        .filter(|l| l.side == LobeSide::Departure)
        .count();
    let rx_offset = new.snapshot.arrival_lobes().count();
    let n = old.snapshot.clusters.len().max(new.snapshot.clusters.len());
    let mut mpcs = Vec::new();
    let mut tags = Vec::new();
    for cid in 0..n {
        if cid <= k {
            for (m, t) in new.snapshot.mpcs.iter().zip(&new.tags) {
                if m.cluster_id == cid {
                    mpcs.push(*m);
                    tags.push(*t);
                }
            }
        } else {
            for (m, t) in old.snapshot.mpcs.iter().zip(&old.tags) {
                if m.cluster_id == cid {
                    let mut m = *m;
                    m.lobe_id_tx += tx_offset;
                    m.lobe_id_rx += rx_offset;
                    mpcs.push(m);
                    tags.push(*t);
                }
            }
        }
    }
    let mut lobes = new.snapshot.lobes.clone();
    if k + 1 < n {
        lobes.extend(old.snapshot.lobes.iter().map(|l| {
            let mut l = *l;
            l.id += match l.side {
                LobeSide::Departure => tx_offset,
                LobeSide::Arrival => rx_offset,
            };
            l
        }));
    }
    let total = new.snapshot.total_rx_power_mw;
    let sum: f64 = mpcs.iter().map(|m| m.power_mw).sum();
    if sum > 0.0 {
        for m in &mut mpcs {
            m.power_mw *= total / sum;
        }
    }
    let mut snapshot = ChannelSnapshot {
        mpcs,
        lobes,
        ..new.snapshot.clone()
    };
    snapshot.rebuild_clusters();
    SegmentState {
        snapshot,
        tags,
        ..new.clone()
    }
}

/// Number of snapshots needed to hand over from `old` to `new`: one cluster
/// pair (or a lone birth or death) per snapshot.
pub fn transition_length(old: &ChannelSnapshot, new: &ChannelSnapshot) -> usize {
    old.clusters.len().max(new.clusters.len())
}

/// The full hand-over sequence between two segments at a fixed position.
pub fn segment_transition(
    old_final: &SegmentState,
    new_initial: &SegmentState,
) -> Vec<ChannelSnapshot> {
    (0..transition_length(&old_final.snapshot, &new_initial.snapshot))
        .map(|k| blend_segments(old_final, new_initial, k).snapshot)
        .collect()
}

/// Output of a spatially consistent run.
#[derive(Debug, Clone)]
pub struct TrackResult {
    pub run_index: u64,
    pub snapshots: Vec<ChannelSnapshot>,
    /// MRS tags aligned with each snapshot's MPCs.
    pub tags: Vec<Vec<Option<MrsTag>>>,
    /// Segment whose large-scale state each snapshot follows.
    pub segment_of: Vec<usize>,
    pub segment_environments: Vec<Environment>,
    pub sf_db: Vec<f64>,
    pub sf_map_los: Option<GridMap>,
    pub sf_map_nlos: Option<GridMap>,
    pub los_map: Option<GridMap>,
}

struct LargeScale {
    sf_los: Option<GridMap>,
    sf_nlos: Option<GridMap>,
    los: Option<GridMap>,
}

fn map_dims(cfg: &ValidatedConfig) -> (usize, (f64, f64)) {
    let g = cfg.spatial.granularity_m;
    let cells = (cfg.spatial.map_size_m / g).round() as usize + 1;
    let half = 0.5 * (cells - 1) as f64 * g;
    (cells, (-half, -half))
}

/// Builds the maps a run needs: SF maps for the environments that can occur
/// (unless i.i.d. SF is requested) and the LOS map for `environment = auto`.
pub fn build_maps(
    cfg: &ValidatedConfig,
    run_index: u64,
) -> Result<(Option<GridMap>, Option<GridMap>, Option<GridMap>)> {
    let (cells, origin) = map_dims(cfg);
    let g = cfg.spatial.granularity_m;
    let mut sf_rng = substream(cfg.seed, StreamLabel::new(Purpose::SfMap, run_index));
    let needs = |env: Environment| match cfg.environment {
        EnvironmentMode::Auto => true,
        EnvironmentMode::Los => env == Environment::Los,
        EnvironmentMode::Nlos => env == Environment::Nlos,
    };
    let mut sf = [None, None];
    if !cfg.spatial.iid_sf {
        for (slot, env, dco) in [
            (0, Environment::Los, cfg.spatial.sf_dco_los_m),
            (1, Environment::Nlos, cfg.spatial.sf_dco_nlos_m),
        ] {
            if needs(env) {
                let f = ExponentialFilter::for_correlation_distance(dco, g)?;
                sf[slot] = Some(correlated_map(
                    cells,
                    cells,
                    cfg.pathloss.sigma_db(env),
                    &f,
                    origin,
                    &mut sf_rng,
                )?);
            }
        }
    }
    let los = if cfg.environment == EnvironmentMode::Auto {
        let f = ExponentialFilter::for_correlation_distance(cfg.spatial.los_dco_m, g)?;
        let mut rng = substream(cfg.seed, StreamLabel::new(Purpose::LosMap, run_index));
        Some(los_condition_map(
            cells,
            cells,
            cfg.spatial.p_los,
            &f,
            origin,
            &mut rng,
        )?)
    } else {
        None
    };
    let [a, b] = sf;
    Ok((a, b, los))
}

/// Evolves the channel along the configured track.
pub fn run_spatially_consistent(cfg: &ValidatedConfig, run_index: u64) -> Result<TrackResult> {
    let spec = &cfg.trajectory;
    let start = cfg.ut_position(cfg.tr_distance_m, spec.start_azimuth_deg);
    let xy = trajectory_positions(spec, [start[0], start[1]])?;
    let positions: Vec<[f64; 3]> = xy.iter().map(|p| [p[0], p[1], cfg.ut_height_m]).collect();
    let bs = cfg.bs_position();

    let (sf_los, sf_nlos, los) = build_maps(cfg, run_index)?;
    let large = LargeScale {
        sf_los,
        sf_nlos,
        los,
    };
    let (cells, origin) = map_dims(cfg);
    let extent = GridMap {
        origin_m: origin,
        granularity_m: cfg.spatial.granularity_m,
        width: cells,
        height: cells,
        values: Vec::new(),
        kind: crate::maps::MapKind::SfDb,
    };
    let needs_map = !cfg.spatial.iid_sf || cfg.environment == EnvironmentMode::Auto;
    if needs_map {
        if let Some(p) = positions.iter().find(|p| !extent.contains((p[0], p[1]))) {
            return Err(SimError::OutsideMap { x: p[0], y: p[1] });
        }
    }

    let mut tcsl_rng = substream(cfg.seed, StreamLabel::new(Purpose::Tcsl, run_index));
    let mut tag_rng = substream(cfg.seed, StreamLabel::new(Purpose::MrsTags, run_index));
    let mut iid_rng = substream(cfg.seed, StreamLabel::new(Purpose::SfMap, run_index));
    let mut o2i_rng = substream(cfg.seed, StreamLabel::new(Purpose::O2i, run_index));
    let o2i_db = if cfg.o2i.enabled {
        o2i_loss(cfg.carrier_freq_ghz, &cfg.o2i, &mut o2i_rng)
    } else {
        0.0
    };

    // Shadow fading is looked up per (environment, position); i.i.d. mode
    // draws one value per snapshot and shares it between live segments.
    let mut iid_cache: Vec<Option<f64>> = vec![None; positions.len()];
    let mut sf_at = |env: Environment, k: usize| -> Result<f64> {
        if cfg.spatial.iid_sf {
            let sigma = cfg.pathloss.sigma_db(env);
            let z = *iid_cache[k].get_or_insert_with(|| {
                Normal::new(0.0, 1.0)
                    .expect("unit normal")
                    .sample(&mut iid_rng)
            });
            Ok(z * sigma)
        } else {
            let map = match env {
                Environment::Los => large.sf_los.as_ref(),
                Environment::Nlos => large.sf_nlos.as_ref(),
            }
            .expect("map built for every reachable environment");
            sample_map(map, (positions[k][0], positions[k][1]))
        }
    };

    let heading = |k: usize| -> f64 {
        let (a, b) = if k + 1 < positions.len() {
            (positions[k], positions[k + 1])
        } else if k > 0 {
            (positions[k - 1], positions[k])
        } else {
            return spec.heading_deg.to_radians();
        };
        (b[1] - a[1]).atan2(b[0] - a[0])
    };

    let seg_steps = ((spec.segment_length_m / spec.update_distance_m).round() as usize).max(1);
    let dt = spec.update_distance_m / spec.speed_mps;
    let wavelength = cfg.wavelength_m();

    let mut new_segment = |index: usize,
                           k: usize,
                           sf_at: &mut dyn FnMut(Environment, usize) -> Result<f64>|
     -> Result<SegmentState> {
        let env = match cfg.environment {
            EnvironmentMode::Los => Environment::Los,
            EnvironmentMode::Nlos => Environment::Nlos,
            EnvironmentMode::Auto => {
                let v = sample_map(
                    large.los.as_ref().expect("LOS map built"),
                    (positions[k][0], positions[k][1]),
                )?;
                if v >= 0.5 {
                    Environment::Los
                } else {
                    Environment::Nlos
                }
            }
        };
        let geometry = LinkGeometry {
            bs,
            ut: positions[k],
        };
        let pl = cfg.link_pathloss(&geometry, env, sf_at(env, k)?, o2i_db)?;
        let snapshot = generate_snapshot(
            &cfg.tcsl,
            geometry,
            env,
            pl,
            cfg.tx_power_dbm,
            &mut tcsl_rng,
        );
        let tags = init_mrs_tags(&snapshot, heading(k), &mut tag_rng);
        Ok(SegmentState {
            segment_index: index,
            start_snapshot: k,
            environment: env,
            snapshot,
            tags,
        })
    };

    let mut current = new_segment(0, 0, &mut sf_at)?;
    let mut retiring: Option<(SegmentState, usize)> = None;
    let mut out = TrackResult {
        run_index,
        snapshots: Vec::with_capacity(positions.len()),
        tags: Vec::with_capacity(positions.len()),
        segment_of: Vec::with_capacity(positions.len()),
        segment_environments: vec![current.environment],
        sf_db: Vec::with_capacity(positions.len()),
        sf_map_los: None,
        sf_map_nlos: None,
        los_map: None,
    };

    for (k, &pos) in positions.iter().enumerate() {
        if k > 0 {
            advance(
                &mut current,
                pos,
                dt,
                wavelength,
                cfg,
                o2i_db,
                &mut sf_at,
                k,
            )?;
            if let Some((old, _)) = retiring.as_mut() {
                advance(old, pos, dt, wavelength, cfg, o2i_db, &mut sf_at, k)?;
            }
            if k % seg_steps == 0 {
                let next = new_segment(current.segment_index + 1, k, &mut sf_at)?;
                out.segment_environments.push(next.environment);
                let old = std::mem::replace(&mut current, next);
                retiring = Some((old, k));
            }
        }
        let emitted = match &retiring {
            Some((old, start)) => {
                let step = k - start;
                if step + 1 >= transition_length(&old.snapshot, &current.snapshot) {
                    current.clone()
                } else {
                    blend_segments(old, &current, step)
                }
            }
            None => current.clone(),
        };
        if let Some((old, start)) = &retiring {
            if k - start + 1 >= transition_length(&old.snapshot, &current.snapshot) {
                retiring = None;
            }
        }
        out.sf_db.push(emitted.snapshot.pathloss.sf_db);
        out.segment_of.push(emitted.segment_index);
        out.snapshots.push(emitted.snapshot);
        out.tags.push(emitted.tags);
    }
    out.sf_map_los = large.sf_los;
    out.sf_map_nlos = large.sf_nlos;
    out.los_map = large.los;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn advance(
    seg: &mut SegmentState,
    new_ut: [f64; 3],
    dt_s: f64,
    wavelength_m: f64,
    cfg: &ValidatedConfig,
    o2i_db: f64,
    sf_at: &mut dyn FnMut(Environment, usize) -> Result<f64>,
    k: usize,
) -> Result<()> {
    let old_geom = seg.snapshot.geometry;
    let new_geom = LinkGeometry {
        bs: old_geom.bs,
        ut: new_ut,
    };
    let step = sub(new_ut, old_geom.ut);
    let v = [step[0] / dt_s, step[1] / dt_s, step[2] / dt_s];
    let r = old_geom.distance_3d();
    for (m, tag) in seg.snapshot.mpcs.iter_mut().zip(&seg.tags) {
        if m.is_los {
            let a = update_los_angles(
                RayAngles {
                    aod: m.aod_rad,
                    zod: m.zod_rad,
                    aoa: m.aoa_rad,
                    zoa: m.zoa_rad,
                },
                v,
                r,
                dt_s,
            )?;
            let moved = with_path_length(m, new_geom.distance_3d(), wavelength_m);
            *m = Mpc {
                aod_rad: a.aod,
                zod_rad: a.zod,
                aoa_rad: a.aoa,
                zoa_rad: a.zoa,
                ..moved
            };
        } else {
            let tag = tag.as_ref().expect("every non-LOS MPC carries a tag");
            let r_virtual = length_for_delay_ns(m.delay_ns);
            let moved = update_delay_phase(m, step, wavelength_m);
            let turned = update_nlos_mpc(m, tag, v, r_virtual, dt_s);
            *m = Mpc {
                delay_ns: moved.delay_ns,
                phase_rad: moved.phase_rad,
                ..turned
            };
        }
    }
    seg.snapshot.geometry = new_geom;
    let pl = cfg.link_pathloss(
        &new_geom,
        seg.environment,
        sf_at(seg.environment, k)?,
        o2i_db,
    )?;
    seg.snapshot.pathloss = pl;
    update_powers(
        &mut seg.snapshot,
        dbm_to_mw(cfg.tx_power_dbm - pl.total_db),
        &cfg.tcsl,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, SimConfig, TrackType};
    use crate::pathloss::path_loss_ci;
    use proptest::prelude::*;

    const DEG: f64 = PI / 180.0;

    #[test]
    fn rate_examples() {
        // Radial motion leaves the azimuth unchanged.
        let (s, _) = angle_rates(
            30.0 * DEG,
            PI / 2.0,
            [(30.0 * DEG).cos(), (30.0 * DEG).sin(), 0.0],
            100.0,
        );
        assert!(s.abs() < 1e-15);
        let (s, _) = angle_rates(0.0, PI / 2.0, [0.0, 1.0, 0.0], 100.0);
        assert!((s - 0.01).abs() < 1e-15);
        let (_, z) = angle_rates(0.0, PI / 2.0, [0.0, 0.0, 1.0], 100.0);
        assert!((z + 0.01).abs() < 1e-15);
        // Poles freeze the azimuth.
        let (s, _) = angle_rates(0.0, 1e-5, [0.0, 1.0, 0.0], 100.0);
        assert_eq!(s, 0.0);
    }

    fn exact_after_step(
        bs: [f64; 3],
        ut: [f64; 3],
        v: [f64; 3],
        dt: f64,
    ) -> (RayAngles, RayAngles) {
        let before = LinkGeometry { bs, ut }.los_angles();
        let after = LinkGeometry {
            bs,
            ut: [ut[0] + v[0] * dt, ut[1] + v[1] * dt, ut[2] + v[2] * dt],
        }
        .los_angles();
        (before, after)
    }

    #[test]
    fn los_drift_tracks_geometry() {
        let bs = [0.0, 0.0, 10.0];
        let ut = [80.0, 30.0, 1.5];
        for v in [
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.6, -0.8, 0.0],
            [0.0, 0.0, 1.0],
        ] {
            let (before, after) = exact_after_step(bs, ut, v, 1.0);
            let r = LinkGeometry { bs, ut }.distance_3d();
            let upd = update_los_angles(before, v, r, 1.0).unwrap();
            for (a, b) in [(upd.aod, after.aod), (upd.aoa, after.aoa)] {
                assert!(angle_diff(a, b).abs() < 0.5 * DEG, "{a} vs {b}");
            }
            assert!((upd.zod - after.zod).abs() < 0.5 * DEG);
            assert!((upd.zoa - after.zoa).abs() < 0.5 * DEG);
        }
        assert!(update_los_angles(
            RayAngles {
                aod: 0.0,
                zod: 1.0,
                aoa: PI,
                zoa: 2.0
            },
            [1.0, 0.0, 0.0],
            0.0,
            1.0
        )
        .is_err());
    }

    #[test]
    fn mrs_examples() {
        // One reflection off a surface at 90 degrees.
        let delta = 180.0 * DEG;
        let tag = MrsTag {
            parity: 1,
            delta_rs_rad: delta,
            mirrored_heading_rad: 0.0,
        };
        assert!(angle_diff(tag.aoa_for(30.0 * DEG), 330.0 * DEG).abs() < 1e-12);
        assert!(angle_diff(tag.mirror_heading(45.0 * DEG), 135.0 * DEG).abs() < 1e-12);
        let even = MrsTag {
            parity: -1,
            delta_rs_rad: 0.0,
            mirrored_heading_rad: 0.0,
        };
        assert!(angle_diff(even.aoa_for(1.234), 1.234).abs() < 1e-12);
        assert!(angle_diff(even.mirror_heading(0.7), 0.7).abs() < 1e-12);

        let t = MrsTag::from_angles(1, 30.0 * DEG, 330.0 * DEG, 45.0 * DEG);
        assert!(angle_diff(t.delta_rs_rad, delta).abs() < 1e-12);
        assert!(angle_diff(t.mirrored_heading_rad, 135.0 * DEG).abs() < 1e-12);
        assert!(t.residual(30.0 * DEG, 330.0 * DEG) < 1e-12);
    }

    fn nlos_mpc(aod: f64, aoa: f64) -> Mpc {
        Mpc {
            power_mw: 1.0,
            delay_ns: 500.0,
            phase_rad: 1.0,
            aod_rad: aod,
            zod_rad: 1.6,
            aoa_rad: aoa,
            zoa_rad: 1.5,
            cluster_id: 1,
            lobe_id_tx: 0,
            lobe_id_rx: 0,
            is_los: false,
        }
    }

    #[test]
    fn nlos_zero_velocity_is_identity() {
        let m = nlos_mpc(0.3, 2.0);
        let tag = MrsTag::from_angles(1, m.aod_rad, m.aoa_rad, 0.0);
        let u = update_nlos_mpc(&m, &tag, [0.0; 3], 150.0, 1.0);
        assert!(angle_diff(u.aoa_rad, m.aoa_rad).abs() < 1e-12);
        assert_eq!(
            (u.aod_rad, u.zod_rad, u.zoa_rad),
            (m.aod_rad, m.zod_rad, m.zoa_rad)
        );
        let p = update_delay_phase(&m, [0.0; 3], 0.01);
        assert_eq!(p, m);
    }

    #[test]
    fn law_of_cosines_examples() {
        assert!((updated_path_length(100.0, 1.0, 1.0) - 99.0).abs() < 1e-12);
        assert!((updated_path_length(100.0, 1.0, 0.0) - 10001f64.sqrt()).abs() < 1e-12);
        assert!((10001f64.sqrt() - 100.005).abs() < 1e-3);
        // Towards the arrival direction shortens the path.
        let m = nlos_mpc(0.0, 0.0);
        let step = unit_vector(m.aoa_rad, m.zoa_rad);
        let u = update_delay_phase(&m, step, 0.01);
        let d = length_for_delay_ns(m.delay_ns) - length_for_delay_ns(u.delay_ns);
        assert!((d - 1.0).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn mrs_relation_survives_updates(
            parity in prop_oneof![Just(1i8), Just(-1i8)],
            aod in 0.0..TAU, aoa in 0.0..TAU, zod in 0.2..2.9, zoa in 0.2..2.9,
            heading in 0.0..TAU, speed in 0.0..3.0, vz in -0.5..0.5,
            r in 20.0..500.0, steps in 1usize..50,
        ) {
            let mut m = Mpc { zod_rad: zod, zoa_rad: zoa, ..nlos_mpc(aod, aoa) };
            m.delay_ns = delay_ns_for_length(r);
            let tag = MrsTag::from_angles(parity, aod, aoa, heading);
            let v = [speed * heading.cos(), speed * heading.sin(), vz];
            for _ in 0..steps {
                let len = length_for_delay_ns(m.delay_ns);
                let moved = update_delay_phase(&m, v, 0.0107);
                let turned = update_nlos_mpc(&m, &tag, v, len, 1.0);
                prop_assert!((length_for_delay_ns(moved.delay_ns) - len).abs() <= norm(v) + 1e-9);
                m = Mpc { delay_ns: moved.delay_ns, phase_rad: moved.phase_rad, ..turned };
                prop_assert!(tag.residual(m.aod_rad, m.aoa_rad) <= 1e-6);
                prop_assert!((0.0..TAU).contains(&m.aod_rad) && (0.0..TAU).contains(&m.aoa_rad));
                prop_assert!(m.zod_rad > 0.0 && m.zod_rad < PI && m.zoa_rad > 0.0 && m.zoa_rad < PI);
                prop_assert!((0.0..TAU).contains(&m.phase_rad));
            }
        }

        #[test]
        fn path_length_change_bounded(len in 0.5..1000.0, s in 0.0..5.0, c in -1.0..1.0f64) {
            let l2 = updated_path_length(len, s, c);
            prop_assert!((l2 - len).abs() <= s + 1e-9);
        }
    }

    fn seg(run: u64, env: Environment) -> SegmentState {
        let geometry = LinkGeometry {
            bs: [0.0, 0.0, 10.0],
            ut: [100.0, 0.0, 1.5],
        };
        let pl = path_loss_ci(28.0, geometry.distance_3d(), 2.0, 0.0, 0.0).unwrap();
        let mut rng = substream(9, StreamLabel::new(Purpose::Tcsl, run));
        let snapshot = generate_snapshot(&TcslConfig::default(), geometry, env, pl, 30.0, &mut rng);
        let tags = init_mrs_tags(&snapshot, 0.0, &mut rng);
        SegmentState {
            segment_index: run as usize,
            start_snapshot: 0,
            environment: env,
            snapshot,
            tags,
        }
    }

    fn with_clusters(n: usize, env: Environment) -> SegmentState {
        (0..1000)
            .map(|r| seg(r, env))
            .find(|s| s.snapshot.clusters.len() == n)
            .expect("cluster count reachable")
    }

    #[test]
    fn identical_segments_transition_is_noop() {
        let s = seg(1, Environment::Los);
        for snap in segment_transition(&s, &s) {
            assert_eq!(snap.mpcs.len(), s.snapshot.mpcs.len());
            for (a, b) in snap.mpcs.iter().zip(&s.snapshot.mpcs) {
                assert!((a.power_mw - b.power_mw).abs() <= 1e-12 * b.power_mw);
                assert_eq!(
                    (a.delay_ns, a.aod_rad, a.aoa_rad),
                    (b.delay_ns, b.aod_rad, b.aoa_rad)
                );
            }
        }
    }

    #[test]
    fn transition_counts() {
        let a3 = with_clusters(3, Environment::Nlos);
        let b3 = with_clusters(3, Environment::Los);
        assert_eq!(segment_transition(&a3, &b3).len(), 3);

        let a2 = with_clusters(2, Environment::Nlos);
        let b4 = with_clusters(4, Environment::Nlos);
        let steps = segment_transition(&a2, &b4);
        assert_eq!(steps.len(), 4);
        for (k, snap) in steps.iter().enumerate() {
            let total = snap.power_sum_mw();
            assert!((total / b4.snapshot.total_rx_power_mw - 1.0).abs() < 1e-9);
            // Exactly the first k+1 clusters come from the new segment.
            let from_new = |m: &Mpc| {
                b4.snapshot
                    .mpcs
                    .iter()
                    .any(|n| n.delay_ns == m.delay_ns && n.aod_rad == m.aod_rad)
            };
            for m in &snap.mpcs {
                assert_eq!(
                    from_new(m),
                    m.cluster_id <= k,
                    "step {k}, cluster {}",
                    m.cluster_id
                );
            }
        }
        let last = steps.last().unwrap();
        assert_eq!(last.mpcs.len(), b4.snapshot.mpcs.len());
    }

    fn track_cfg(f: impl FnOnce(&mut SimConfig)) -> ValidatedConfig {
        let mut cfg = SimConfig::default();
        cfg.mode = crate::config::Mode::SpatialConsistency;
        f(&mut cfg);
        validate_config(cfg).unwrap()
    }

    #[test]
    fn hexagon_run_shape_and_invariants() {
        let cfg = track_cfg(|_| {});
        let res = run_spatially_consistent(&cfg, 0).unwrap();
        assert_eq!(res.snapshots.len(), 41);
        assert_eq!(res.segment_environments.len(), 4);
        for (snap, tags) in res.snapshots.iter().zip(&res.tags) {
            assert!((snap.power_sum_mw() / snap.total_rx_power_mw - 1.0).abs() < 1e-9);
            let los = snap.los_mpc().expect("LOS config keeps a LOS ray");
            let exact = snap.geometry.los_angles();
            assert!(angle_diff(los.aod_rad, exact.aod).abs() < 0.5 * DEG);
            assert!(angle_diff(los.aoa_rad, exact.aoa).abs() < 0.5 * DEG);
            assert!((length_for_delay_ns(los.delay_ns) - snap.geometry.distance_3d()).abs() < 1e-9);
            for (m, t) in snap.mpcs.iter().zip(tags) {
                if let Some(t) = t {
                    assert!(t.residual(m.aod_rad, m.aoa_rad) <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn track_outside_map_fails() {
        let cfg = track_cfg(|c| {
            c.tr_distance_m = 95.0;
            c.trajectory.heading_deg = 0.0;
        });
        assert!(matches!(
            run_spatially_consistent(&cfg, 0),
            Err(SimError::OutsideMap { .. })
        ));
    }

    #[test]
    fn auto_environment_uses_los_map() {
        let cfg = track_cfg(|c| {
            c.environment = EnvironmentMode::Auto;
            c.trajectory.track_type = TrackType::Linear;
            c.trajectory.heading_deg = 90.0;
            c.trajectory.track_length_m = 60.0;
        });
        let res = run_spatially_consistent(&cfg, 3).unwrap();
        let los = res.los_map.as_ref().unwrap();
        for (s, env) in res.segment_environments.iter().enumerate() {
            let k = s * 12;
            let p = res.snapshots[k].geometry.ut;
            let v = sample_map(los, (p[0], p[1])).unwrap();
            assert_eq!(*env == Environment::Los, v >= 0.5);
        }
        assert!(res.sf_map_los.is_some() && res.sf_map_nlos.is_some());
    }
}
