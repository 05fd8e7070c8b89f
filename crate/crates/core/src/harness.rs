//! Monte Carlo runs: independent drops, outage statistics and blockage CDFs.
//!
//! Every run draws from its own labelled substreams, so results do not
//! depend on thread scheduling and runs with and without blockage share all
//! non-blockage randomness.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fraction_below, percentile};
use crate::antenna::{directional_snapshot, Boresight};
use crate::blockage::{
    apply_beam_blockage, apply_blockage, lobe_equivalent_beamwidth, sample_blockage_loss,
};
use crate::config::{Environment, EnvironmentMode, ValidatedConfig};
use crate::error::{Result, SimError};
use crate::geometry::LinkGeometry;
use crate::pathloss::{o2i_loss, snr_db};
use crate::rng::{substream, Purpose, StreamLabel};
use crate::tcsl::{generate_snapshot, ChannelSnapshot};

/// Outage threshold on the link SNR.
pub const OUTAGE_THRESHOLD_DB: f64 = -5.0;

/// Percentiles reported for SNR distributions.
pub const SNR_PERCENTILES: [f64; 9] = [1.0, 5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0];

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run_index: u64,
    pub environment: Environment,
    pub omni: ChannelSnapshot,
    pub directional: ChannelSnapshot,
    pub boresight: Boresight,
    /// Loss applied to each arrival lobe of the omni channel (empty without blockage).
    pub omni_blockage_db: Vec<f64>,
    /// Loss applied to the RX beam (0 without blockage).
    pub directional_blockage_db: f64,
    pub omni_power_dbm: f64,
    pub directional_power_dbm: f64,
    pub snr_omni_db: f64,
    pub snr_directional_db: f64,
}

impl RunResult {
    pub fn distance_2d_m(&self) -> f64 {
        self.omni.geometry.distance_2d()
    }
}

fn draw_environment(cfg: &ValidatedConfig, run_index: u64) -> Environment {
    match cfg.environment {
        EnvironmentMode::Los => Environment::Los,
        EnvironmentMode::Nlos => Environment::Nlos,
        EnvironmentMode::Auto => {
            let mut rng = substream(cfg.seed, StreamLabel::new(Purpose::LosMap, run_index));
            if rng.random_bool(cfg.spatial.p_los) {
                Environment::Los
            } else {
                Environment::Nlos
            }
        }
    }
}

/// One independent drop at horizontal distance `distance_m`.
pub fn drop_at(
    cfg: &ValidatedConfig,
    run_index: u64,
    distance_m: f64,
    with_blockage: bool,
) -> Result<RunResult> {
    let environment = draw_environment(cfg, run_index);
    let mut sf_rng = substream(cfg.seed, StreamLabel::new(Purpose::SfMap, run_index));
    let z: f64 = sf_rng.sample(StandardNormal);
    let sf_db = z * cfg.pathloss.sigma_db(environment);
    let o2i_db = if cfg.o2i.enabled {
        let mut rng = substream(cfg.seed, StreamLabel::new(Purpose::O2i, run_index));
        o2i_loss(cfg.carrier_freq_ghz, &cfg.o2i, &mut rng)
    } else {
        0.0
    };
    let geometry = LinkGeometry {
        bs: cfg.bs_position(),
        ut: cfg.ut_position(distance_m, cfg.trajectory.start_azimuth_deg),
    };
    let pl = cfg.link_pathloss(&geometry, environment, sf_db, o2i_db)?;
    let mut tcsl_rng = substream(cfg.seed, StreamLabel::new(Purpose::Tcsl, run_index));
    let omni = generate_snapshot(
        &cfg.tcsl,
        geometry,
        environment,
        pl,
        cfg.tx_power_dbm,
        &mut tcsl_rng,
    );
    let (directional, boresight) = directional_snapshot(&omni, &cfg.antenna)?;

    let (omni, directional, omni_blockage_db, directional_blockage_db) = if with_blockage {
        let mut rng = substream(cfg.seed, StreamLabel::new(Purpose::Blockage, run_index));
        let n_rx = omni.arrival_lobes().count();
        let mut losses = vec![0.0; n_rx];
        for lobe in omni.arrival_lobes() {
            let bw = lobe_equivalent_beamwidth(lobe.angular_spread_deg)?;
            losses[lobe.id] = sample_blockage_loss(&cfg.blockage, bw.min(360.0), &mut rng)?;
        }
        let hpbw = cfg.antenna.rx_az_hpbw_deg;
        let beam_loss = sample_blockage_loss(&cfg.blockage, hpbw, &mut rng)?;
        let o = apply_blockage(&omni, &losses);
        let d = apply_beam_blockage(&directional, beam_loss, boresight.rx_az_rad, hpbw);
        (o, d, losses, beam_loss)
    } else {
        (omni, directional, Vec::new(), 0.0)
    };

    let omni_power_dbm = omni.total_power_dbm();
    let directional_power_dbm = directional.total_power_dbm();
    Ok(RunResult {
        run_index,
        environment,
        omni,
        directional,
        boresight,
        omni_blockage_db,
        directional_blockage_db,
        omni_power_dbm,
        directional_power_dbm,
        snr_omni_db: snr_db(omni_power_dbm, cfg.bandwidth_mhz, cfg.noise_figure_db),
        snr_directional_db: snr_db(
            directional_power_dbm,
            cfg.bandwidth_mhz,
            cfg.noise_figure_db,
        ),
    })
}

/// One drop at the configured T-R distance, with blockage if enabled.
pub fn run_drop_mode(cfg: &ValidatedConfig, run_index: u64) -> Result<RunResult> {
    drop_at(cfg, run_index, cfg.tr_distance_m, cfg.blockage.enabled)
}

/// `num_runs` drops in parallel, ordered by run index.
pub fn run_drops(cfg: &ValidatedConfig) -> Result<Vec<RunResult>> {
    (0..cfg.num_runs)
        .into_par_iter()
        .map(|i| run_drop_mode(cfg, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub threshold_db: f64,
    pub outage_fraction: f64,
    /// `(percentile, SNR dB)` pairs.
    pub snr_percentiles: Vec<(f64, f64)>,
    pub snr_5pct_db: f64,
    pub n_runs: u64,
    pub seed: u64,
    pub with_blockage: bool,
    pub distance_range_m: (f64, f64),
    /// Per-run directional SNR, indexed by run.
    pub snr_db: Vec<f64>,
    pub distance_m: Vec<f64>,
}

/// Uniform T-R distance of run `run_index`.
pub fn run_distance(cfg: &ValidatedConfig, run_index: u64, range_m: (f64, f64)) -> f64 {
    let mut rng = substream(cfg.seed, StreamLabel::new(Purpose::Harness, run_index));
    if range_m.1 > range_m.0 {
        rng.random_range(range_m.0..range_m.1)
    } else {
        range_m.0
    }
}

/// Outage statistics of the directional link SNR over `n_runs` drops at
/// distances uniform in `range_m`.
pub fn monte_carlo_outage(
    cfg: &ValidatedConfig,
    n_runs: u64,
    range_m: (f64, f64),
    with_blockage: bool,
) -> Result<OutageReport> {
    if n_runs < 1 {
        return Err(SimError::InvalidArgument(
            "outage needs at least one run".into(),
        ));
    }
    if !(range_m.0 >= 1.0 && range_m.1 >= range_m.0) {
        return Err(SimError::InvalidArgument(format!(
            "distance range must satisfy 1 <= min <= max, got {range_m:?}"
        )));
    }
    let runs: Vec<(f64, f64)> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let d = run_distance(cfg, i, range_m);
            drop_at(cfg, i, d, with_blockage).map(|r| (d, r.snr_directional_db))
        })
        .collect::<Result<_>>()?;
    let (distance_m, snr): (Vec<f64>, Vec<f64>) = runs.into_iter().unzip();
    Ok(OutageReport {
        threshold_db: OUTAGE_THRESHOLD_DB,
        outage_fraction: fraction_below(&snr, OUTAGE_THRESHOLD_DB),
        snr_percentiles: SNR_PERCENTILES
            .iter()
            .map(|&q| (q, percentile(&snr, q)))
            .collect(),
        snr_5pct_db: percentile(&snr, 5.0),
        n_runs,
        seed: cfg.seed,
        with_blockage,
        distance_range_m: range_m,
        snr_db: snr,
        distance_m,
    })
}

/// Channel whose blockage loss distribution is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelKind {
    OmniLos,
    OmniNlos,
    Directional { hpbw_deg: f64 },
}

impl ChannelKind {
    /// Parses `omni-los`, `omni-nlos` or `dir:<hpbw>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "omni-los" => Ok(ChannelKind::OmniLos),
            "omni-nlos" => Ok(ChannelKind::OmniNlos),
            _ => s
                .strip_prefix("dir:")
                .and_then(|h| h.parse::<f64>().ok())
                .filter(|h| *h > 0.0 && *h <= 360.0)
                .map(|hpbw_deg| ChannelKind::Directional { hpbw_deg })
                .ok_or_else(|| {
                    SimError::InvalidArgument(format!(
                        "channel kind must be omni-los, omni-nlos or dir:<hpbw in (0,360]>, got {s:?}"
                    ))
                }),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ChannelKind::OmniLos => "omni-los".into(),
            ChannelKind::OmniNlos => "omni-nlos".into(),
            ChannelKind::Directional { hpbw_deg } => format!("dir-{hpbw_deg}"),
        }
    }

    /// Beamwidth fed to the rate fits: the lobe-equivalent width for omni
    /// channels, the antenna HPBW otherwise.
    pub fn beamwidth_deg(&self, cfg: &ValidatedConfig) -> Result<f64> {
        match self {
            ChannelKind::OmniLos => lobe_equivalent_beamwidth(cfg.tcsl.lobe_spread_los_deg),
            ChannelKind::OmniNlos => lobe_equivalent_beamwidth(cfg.tcsl.lobe_spread_nlos_deg),
            ChannelKind::Directional { hpbw_deg } => Ok(*hpbw_deg),
        }
        .map(|b| b.min(360.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockageCdf {
    pub kind: ChannelKind,
    pub beamwidth_deg: f64,
    pub seed: u64,
    /// Sorted loss samples, dB.
    pub sorted_loss_db: Vec<f64>,
}

impl BlockageCdf {
    pub fn exceedance(&self, threshold_db: f64) -> f64 {
        crate::analysis::exceedance(&self.sorted_loss_db, threshold_db)
    }

    pub fn decile(&self, k: usize) -> f64 {
        crate::analysis::percentile_sorted(&self.sorted_loss_db, 10.0 * k as f64)
    }
}

/// `n_samples` blockage losses for `kind`. Sample `i` uses blockage stream
/// `i`, so different kinds are compared on common random numbers.
pub fn blockage_cdf(
    cfg: &ValidatedConfig,
    n_samples: usize,
    kind: ChannelKind,
) -> Result<BlockageCdf> {
    if n_samples == 0 {
        return Err(SimError::InvalidArgument(
            "blockage CDF needs at least one sample".into(),
        ));
    }
    let bw = kind.beamwidth_deg(cfg)?;
    let mut losses: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, StreamLabel::new(Purpose::Blockage, i));
            sample_blockage_loss(&cfg.blockage, bw, &mut rng)
        })
        .collect::<Result<_>>()?;
    losses.sort_by(f64::total_cmp);
    Ok(BlockageCdf {
        kind,
        beamwidth_deg: bw,
        seed: cfg.seed,
        sorted_loss_db: losses,
    })
}

/// SF values of `n` independent drops, for checking the drop-mode marginal.
pub fn drop_sf_samples(cfg: &ValidatedConfig, n: u64) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let env = draw_environment(cfg, i);
            let mut rng = substream(cfg.seed, StreamLabel::new(Purpose::SfMap, i));
            let z: f64 = StandardNormal.sample(&mut rng);
            z * cfg.pathloss.sigma_db(env)
        })
        .collect()
}
