//! UT tracks sampled at the snapshot update distance.

use crate::config::{TrackType, TrajectorySpec};
use crate::error::{Result, SimError};

/// Positions along the track, `update_distance_m` apart in arc length,
/// starting at `start_xy`. Hexagon tracks turn 60 degrees clockwise every
/// `side_length_m`.
pub fn trajectory_positions(track: &TrajectorySpec, start_xy: [f64; 2]) -> Result<Vec<[f64; 2]>> {
    if !(track.track_length_m >= 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "track length must be non-negative, got {} m",
            track.track_length_m
        )));
    }
    if !(track.update_distance_m > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "update distance must be positive, got {} m",
            track.update_distance_m
        )));
    }
    if track.track_type == TrackType::Hexagon && !(track.side_length_m > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "hexagon side length must be positive, got {} m",
            track.side_length_m
        )));
    }
    let steps = (track.track_length_m / track.update_distance_m + 1e-9).floor() as usize;
    Ok((0..=steps)
        .map(|k| point_at(track, start_xy, k as f64 * track.update_distance_m))
        .collect())
}

/// Unit heading (radians) of the track at arc length `s`.
pub fn heading_at(track: &TrajectorySpec, s: f64) -> f64 {
    let h0 = track.heading_deg.to_radians();
    match track.track_type {
        TrackType::Linear => h0,
        TrackType::Hexagon => {
            let side = ((s + 1e-9) / track.side_length_m).floor();
            h0 - side * 60f64.to_radians()
        }
    }
}

fn point_at(track: &TrajectorySpec, start: [f64; 2], s: f64) -> [f64; 2] {
    let h0 = track.heading_deg.to_radians();
    match track.track_type {
        TrackType::Linear => [start[0] + s * h0.cos(), start[1] + s * h0.sin()],
        TrackType::Hexagon => {
            let side = track.side_length_m;
            let full = ((s + 1e-9) / side).floor() as usize;
            let mut p = start;
            let mut h = h0;
            for _ in 0..full {
                p = [p[0] + side * h.cos(), p[1] + side * h.sin()];
                h -= 60f64.to_radians();
            }
            let rest = (s - full as f64 * side).max(0.0);
            [p[0] + rest * h.cos(), p[1] + rest * h.sin()]
        }
    }
}
