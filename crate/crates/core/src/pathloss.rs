//! Large-scale loss: close-in (1 m reference) path loss, atmospheric term,
//! outdoor-to-indoor penetration, and the SNR link budget.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Free-space path loss at the 1 m reference distance, in dB.
pub fn fspl_db(f_ghz: f64) -> Result<f64> {
    if !(f_ghz > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "carrier frequency must be positive, got {f_ghz} GHz"
        )));
    }
    Ok(32.4 + 20.0 * f_ghz.log10())
}

/// Atmospheric attenuation for a path of `d_m` meters at a constant rate.
pub fn atmospheric_at(d_m: f64, rate_db_per_km: f64) -> f64 {
    rate_db_per_km * d_m / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossSample {
    pub fspl_db: f64,
    /// FSPL plus the distance term, i.e. the CI mean path loss.
    pub pl_db: f64,
    pub sf_db: f64,
    pub at_db: f64,
    pub o2i_db: f64,
    pub total_db: f64,
}

impl PathLossSample {
    pub fn with_o2i(mut self, o2i_db: f64) -> Self {
        self.total_db += o2i_db - self.o2i_db;
        self.o2i_db = o2i_db;
        self
    }
}

/// CI path loss with an additive atmospheric term and shadow fading.
pub fn path_loss_ci(
    f_ghz: f64,
    d_m: f64,
    n: f64,
    at_db: f64,
    sf_db: f64,
) -> Result<PathLossSample> {
    if !(d_m >= 1.0) {
        return Err(SimError::InvalidArgument(format!(
            "T-R distance must be at least the 1 m reference distance, got {d_m} m"
        )));
    }
    let fspl = fspl_db(f_ghz)?;
    let pl = fspl + 10.0 * n * d_m.log10();
    Ok(PathLossSample {
        fspl_db: fspl,
        pl_db: pl,
        sf_db,
        at_db,
        o2i_db: 0.0,
        total_db: pl + at_db + sf_db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum O2iClass {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct O2IConfig {
    pub enabled: bool,
    pub loss_class: O2iClass,
    pub a: f64,
    pub b: f64,
    pub sigma_p_db: f64,
}

impl O2IConfig {
    /// Standard glass / wood exteriors.
    pub fn low() -> Self {
        O2IConfig {
            enabled: false,
            loss_class: O2iClass::Low,
            a: 5.0,
            b: 0.03,
            sigma_p_db: 4.0,
        }
    }

    /// IRR glass / concrete exteriors.
    pub fn high() -> Self {
        O2IConfig {
            enabled: false,
            loss_class: O2iClass::High,
            a: 10.0,
            b: 5.0,
            sigma_p_db: 6.0,
        }
    }

    pub fn for_class(class: O2iClass) -> Self {
        match class {
            O2iClass::Low => Self::low(),
            O2iClass::High => Self::high(),
        }
    }

    /// The parabolic mean term `10 log10(A + B f^2)`.
    pub fn mean_db(&self, f_ghz: f64) -> f64 {
        10.0 * (self.a + self.b * f_ghz * f_ghz).log10()
    }
}

impl Default for O2IConfig {
    fn default() -> Self {
        Self::low()
    }
}

/// One draw of building penetration loss, floored at 0 dB.
pub fn o2i_loss<R: Rng + ?Sized>(f_ghz: f64, cfg: &O2IConfig, rng: &mut R) -> f64 {
    let noise = if cfg.sigma_p_db > 0.0 {
        Normal::new(0.0, cfg.sigma_p_db)
            .expect("sigma validated non-negative")
            .sample(rng)
    } else {
        0.0
    };
    (cfg.mean_db(f_ghz) + noise).max(0.0)
}

/// Thermal noise power `N0` over the given bandwidth, dBm.
pub fn thermal_noise_dbm(bandwidth_mhz: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * (bandwidth_mhz * 1e6).log10()
}

pub fn snr_db(pr_dbm: f64, bandwidth_mhz: f64, nf_db: f64) -> f64 {
    pr_dbm - (thermal_noise_dbm(bandwidth_mhz) + nf_db)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}
