//! Angle conventions and BS/UT link geometry.
//!
//! Azimuths are measured counter-clockwise from +x in `[0, 2pi)`; zenith
//! angles from +z in `(0, pi)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::pathloss::SPEED_OF_LIGHT;

/// Smallest zenith kept away from the poles.
pub const ZENITH_EPS: f64 = 1e-6;

pub fn wrap_azimuth(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed difference `a - b` folded into `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

pub fn clamp_zenith(z: f64) -> f64 {
    z.clamp(ZENITH_EPS, PI - ZENITH_EPS)
}

/// Unit vector for an (azimuth, zenith) direction.
pub fn unit_vector(azimuth: f64, zenith: f64) -> [f64; 3] {
    [
        zenith.sin() * azimuth.cos(),
        zenith.sin() * azimuth.sin(),
        zenith.cos(),
    ]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn delay_ns_for_length(length_m: f64) -> f64 {
    length_m / SPEED_OF_LIGHT * 1e9
}

pub fn length_for_delay_ns(delay_ns: f64) -> f64 {
    delay_ns * 1e-9 * SPEED_OF_LIGHT
}

/// Base station and user terminal positions, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub bs: [f64; 3],
    pub ut: [f64; 3],
}

/// Departure and arrival directions of one ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayAngles {
    pub aod: f64,
    pub zod: f64,
    pub aoa: f64,
    pub zoa: f64,
}

impl LinkGeometry {
    pub fn distance_3d(&self) -> f64 {
        norm(sub(self.ut, self.bs))
    }

    pub fn distance_2d(&self) -> f64 {
        (self.ut[0] - self.bs[0]).hypot(self.ut[1] - self.bs[1])
    }

    /// Exact angles of the direct BS-UT ray.
    pub fn los_angles(&self) -> RayAngles {
        let d = sub(self.ut, self.bs);
        let aod = wrap_azimuth(d[1].atan2(d[0]));
        let zod = clamp_zenith((d[2] / norm(d)).acos());
        RayAngles {
            aod,
            zod,
            aoa: wrap_azimuth(aod + PI),
            zoa: clamp_zenith(PI - zod),
        }
    }
}
