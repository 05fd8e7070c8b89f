//! CSV and JSON exports. Column layouts are listed in `docs/csv_schema.md`.
//!
//! Floats are written with fixed precision and no timestamps are recorded,
//! so identical runs produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::blockage::BlockageTrace;
use crate::config::Environment;
use crate::consistency::TrackResult;
use crate::error::{Result, SimError};
use crate::harness::{BlockageCdf, OutageReport, RunResult};
use crate::pathloss::mw_to_dbm;
use crate::tcsl::{pdp_linear, ChannelSnapshot};

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn env_str(e: Environment) -> &'static str {
    match e {
        Environment::Los => "los",
        Environment::Nlos => "nlos",
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| SimError::csv(path, e))
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| SimError::csv(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| SimError::csv(path, e))?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| {
        SimError::InvalidArgument(format!("cannot serialize {}: {e}", path.display()))
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| SimError::io(path, e))
}

pub const MPC_HEADER: [&str; 14] = [
    "index",
    "mpc",
    "cluster_id",
    "lobe_id_tx",
    "lobe_id_rx",
    "is_los",
    "delay_ns",
    "power_dbm",
    "phase_rad",
    "aod_deg",
    "zod_deg",
    "aoa_deg",
    "zoa_deg",
    "environment",
];

/// MPC table; `index` is the run index (drop mode) or snapshot index (track).
pub fn write_mpcs_csv<'a>(
    path: &Path,
    snapshots: impl IntoIterator<Item = (u64, &'a ChannelSnapshot)>,
) -> Result<()> {
    let rows = snapshots.into_iter().flat_map(|(idx, s)| {
        s.mpcs.iter().enumerate().map(move |(k, m)| {
            vec![
                idx.to_string(),
                k.to_string(),
                m.cluster_id.to_string(),
                m.lobe_id_tx.to_string(),
                m.lobe_id_rx.to_string(),
                (m.is_los as u8).to_string(),
                f6(m.delay_ns),
                f6(mw_to_dbm(m.power_mw)),
                f6(m.phase_rad),
                f6(m.aod_rad.to_degrees()),
                f6(m.zod_rad.to_degrees()),
                f6(m.aoa_rad.to_degrees()),
                f6(m.zoa_rad.to_degrees()),
                env_str(s.environment).to_string(),
            ]
        })
    });
    write_rows(path, &MPC_HEADER, rows)
}

pub const PDP_HEADER: [&str; 5] = [
    "index",
    "position_x_m",
    "position_y_m",
    "delay_bin_ns",
    "power_dbm",
];

/// One PDP block per snapshot (absolute delays).
pub fn write_pdp_csv<'a>(
    path: &Path,
    snapshots: impl IntoIterator<Item = (u64, &'a ChannelSnapshot)>,
    bin_ns: f64,
) -> Result<()> {
    let mut rows = Vec::new();
    for (idx, s) in snapshots {
        let p = s.position_m();
        for (d, mw) in pdp_linear(s, bin_ns)? {
            rows.push(vec![
                idx.to_string(),
                f6(p[0]),
                f6(p[1]),
                f6(d),
                f6(mw_to_dbm(mw)),
            ]);
        }
    }
    write_rows(path, &PDP_HEADER, rows)
}

pub const DIRECTIONAL_PDP_HEADER: [&str; 8] = [
    "run_index",
    "tx_boresight_az_deg",
    "tx_boresight_zen_deg",
    "rx_boresight_az_deg",
    "rx_boresight_zen_deg",
    "delay_bin_ns",
    "power_dbm",
    "blockage_db",
];

pub fn write_directional_pdp_csv(path: &Path, runs: &[RunResult], bin_ns: f64) -> Result<()> {
    let mut rows = Vec::new();
    for r in runs {
        let b = &r.boresight;
        for (d, mw) in pdp_linear(&r.directional, bin_ns)? {
            rows.push(vec![
                r.run_index.to_string(),
                f6(b.tx_az_rad.to_degrees()),
                f6(b.tx_zen_rad.to_degrees()),
                f6(b.rx_az_rad.to_degrees()),
                f6(b.rx_zen_rad.to_degrees()),
                f6(d),
                f6(mw_to_dbm(mw)),
                f6(r.directional_blockage_db),
            ]);
        }
    }
    write_rows(path, &DIRECTIONAL_PDP_HEADER, rows)
}

pub const DROP_SUMMARY_HEADER: [&str; 11] = [
    "run_index",
    "environment",
    "distance_2d_m",
    "sf_db",
    "o2i_db",
    "path_loss_db",
    "omni_power_dbm",
    "directional_power_dbm",
    "snr_omni_db",
    "snr_directional_db",
    "directional_blockage_db",
];

pub fn write_drop_summary_csv(path: &Path, runs: &[RunResult]) -> Result<()> {
    write_rows(
        path,
        &DROP_SUMMARY_HEADER,
        runs.iter().map(|r| {
            vec![
                r.run_index.to_string(),
                env_str(r.environment).to_string(),
                f6(r.distance_2d_m()),
                f6(r.omni.pathloss.sf_db),
                f6(r.omni.pathloss.o2i_db),
                f6(r.omni.pathloss.total_db),
                f6(r.omni_power_dbm),
                f6(r.directional_power_dbm),
                f6(r.snr_omni_db),
                f6(r.snr_directional_db),
                f6(r.directional_blockage_db),
            ]
        }),
    )
}

pub const TRACK_SUMMARY_HEADER: [&str; 9] = [
    "snapshot_index",
    "position_x_m",
    "position_y_m",
    "segment",
    "environment",
    "sf_db",
    "path_loss_db",
    "total_power_dbm",
    "num_mpcs",
];

pub fn write_track_summary_csv(path: &Path, track: &TrackResult) -> Result<()> {
    write_rows(
        path,
        &TRACK_SUMMARY_HEADER,
        track.snapshots.iter().enumerate().map(|(k, s)| {
            let p = s.position_m();
            vec![
                k.to_string(),
                f6(p[0]),
                f6(p[1]),
                track.segment_of[k].to_string(),
                env_str(s.environment).to_string(),
                f6(s.pathloss.sf_db),
                f6(s.pathloss.total_db),
                f6(s.total_power_dbm()),
                s.mpcs.len().to_string(),
            ]
        }),
    )
}

pub const CDF_HEADER: [&str; 2] = ["loss_db", "cdf"];

pub fn write_blockage_cdf_csv(path: &Path, cdf: &BlockageCdf) -> Result<()> {
    let n = cdf.sorted_loss_db.len() as f64;
    write_rows(
        path,
        &CDF_HEADER,
        cdf.sorted_loss_db
            .iter()
            .enumerate()
            .map(|(i, l)| vec![f6(*l), f6((i + 1) as f64 / n)]),
    )
}

pub const TRACE_HEADER: [&str; 3] = ["time_s", "state", "loss_db"];

pub fn write_blockage_trace_csv(path: &Path, trace: &BlockageTrace) -> Result<()> {
    write_rows(
        path,
        &TRACE_HEADER,
        trace
            .states
            .iter()
            .zip(&trace.loss_db)
            .enumerate()
            .map(|(k, (s, l))| vec![f6(k as f64 * trace.dt_s), s.as_str().to_string(), f6(*l)]),
    )
}

pub const OUTAGE_RUNS_HEADER: [&str; 3] = ["run_index", "distance_m", "snr_db"];

/// Writes `<stem>.json` (summary) and `<stem>_runs.csv` (per-run SNR).
pub fn write_outage_report(dir: &Path, stem: &str, report: &OutageReport) -> Result<Vec<PathBuf>> {
    #[derive(Serialize)]
    struct Summary<'a> {
        threshold_db: f64,
        outage_fraction: f64,
        snr_5pct_db: f64,
        snr_percentiles: &'a [(f64, f64)],
        n_runs: u64,
        seed: u64,
        with_blockage: bool,
        distance_range_m: (f64, f64),
    }
    let json = dir.join(format!("{stem}.json"));
    write_json(
        &json,
        &Summary {
            threshold_db: report.threshold_db,
            outage_fraction: report.outage_fraction,
            snr_5pct_db: report.snr_5pct_db,
            snr_percentiles: &report.snr_percentiles,
            n_runs: report.n_runs,
            seed: report.seed,
            with_blockage: report.with_blockage,
            distance_range_m: report.distance_range_m,
        },
    )?;
    let csv = dir.join(format!("{stem}_runs.csv"));
    write_rows(
        &csv,
        &OUTAGE_RUNS_HEADER,
        report
            .snr_db
            .iter()
            .zip(&report.distance_m)
            .enumerate()
            .map(|(i, (s, d))| vec![i.to_string(), f6(*d), f6(*s)]),
    )?;
    Ok(vec![json, csv])
}

/// Everything needed to regenerate the files of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub num_runs: u64,
    /// Full configuration in the flat `key = value` format.
    pub config: String,
    pub files: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, manifest)?;
    Ok(path)
}

/// File name relative to `dir`, for manifests.
pub fn relative_name(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir)
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}
