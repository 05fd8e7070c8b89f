use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use chansim_core::blockage::simulate_trace;
use chansim_core::config::{EnvironmentMode, Mode};
use chansim_core::consistency::{build_maps, run_spatially_consistent};
use chansim_core::export::{
    ensure_dir, relative_name, write_blockage_cdf_csv, write_blockage_trace_csv,
    write_directional_pdp_csv, write_drop_summary_csv, write_manifest, write_mpcs_csv,
    write_outage_report, write_pdp_csv, write_track_summary_csv, Manifest,
};
use chansim_core::harness::{blockage_cdf, monte_carlo_outage, run_drops, ChannelKind};
use chansim_core::rng::{substream, Purpose, StreamLabel};
use chansim_core::{validate_config, SimConfig, ValidatedConfig};

/// Statistical mmWave channel simulator.
///
/// Any configuration key can be given as a flag, e.g. `--carrier_freq_ghz 73`
/// or `--blockage.enabled=true`; flags override the `--config` file.
#[derive(Debug, Parser)]
#[command(name = "chansim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Independent drops (one snapshot per run).
    Drop {
        #[command(flatten)]
        common: Common,
    },
    /// Spatially consistent channel along the configured track.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        run_index: u64,
    },
    /// Outage probability and SNR percentiles with and without blockage.
    Outage {
        #[command(flatten)]
        common: Common,
        /// Number of runs (defaults to num_runs).
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long, default_value_t = 100.0)]
        min_distance: f64,
        #[arg(long, default_value_t = 500.0)]
        max_distance: f64,
    },
    /// Blockage loss CDFs per channel kind.
    BlockageCdf {
        #[command(flatten)]
        common: Common,
        /// omni-los, omni-nlos or dir:<hpbw>; repeatable.
        #[arg(long = "kind")]
        kinds: Vec<String>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Also write one single-blocker trace for this beamwidth.
        #[arg(long)]
        trace_hpbw: Option<f64>,
    },
    /// Shadow-fading and LOS-condition maps.
    Maps {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        run_index: u64,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Drop { common }
            | Command::Track { common, .. }
            | Command::Outage { common, .. }
            | Command::BlockageCdf { common, .. }
            | Command::Maps { common, .. } => common,
        }
    }
}

type Overrides = Vec<(String, String)>;

/// Splits config-key flags from the remaining arguments.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let keys = SimConfig::keys();
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !keys.contains(&name) {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .with_context(|| format!("flag --{name} needs a value"))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

/// Arguments as recorded in the manifest: everything except the output
/// directory, so reruns into another directory produce identical manifests.
fn recorded_command(args: &[String]) -> String {
    let mut kept = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            kept.push(a.as_str());
        }
    }
    kept.join(" ")
}

fn load_config(common: &Common, overrides: &[(String, String)]) -> Result<ValidatedConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            SimConfig::parse(&text).with_context(|| format!("in config {}", path.display()))?
        }
        None => SimConfig::default(),
    };
    cfg.apply_overrides(overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    Ok(validate_config(cfg)?)
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        ensure_dir(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn finish(self, command: String, cfg: &ValidatedConfig) -> Result<()> {
        let manifest = Manifest {
            command,
            seed: cfg.seed,
            num_runs: cfg.num_runs,
            config: cfg.to_text(),
            files: self
                .files
                .iter()
                .map(|p| relative_name(&self.dir, p))
                .collect(),
        };
        let path = write_manifest(&self.dir, &manifest)?;
        println!("wrote {} files and {}", self.files.len(), path.display());
        Ok(())
    }
}

fn run(cli: Cli, overrides: Vec<(String, String)>, command_line: String) -> Result<()> {
    let common = cli.command.common();
    let cfg = load_config(common, &overrides)?;
    let mut out = Outputs::new(&common.out)?;

    match &cli.command {
        Command::Drop { .. } => {
            let runs = run_drops(&cfg)?;
            write_drop_summary_csv(&out.path("drop_summary.csv"), &runs)?;
            write_mpcs_csv(
                &out.path("mpcs.csv"),
                runs.iter().map(|r| (r.run_index, &r.omni)),
            )?;
            write_pdp_csv(
                &out.path("pdp_omni.csv"),
                runs.iter().map(|r| (r.run_index, &r.omni)),
                cfg.pdp_bin_ns,
            )?;
            write_directional_pdp_csv(&out.path("pdp_directional.csv"), &runs, cfg.pdp_bin_ns)?;
            for r in &runs {
                println!(
                    "run {}: {:?}, omni {:.2} dBm, directional {:.2} dBm, SNR {:.2} dB",
                    r.run_index,
                    r.environment,
                    r.omni_power_dbm,
                    r.directional_power_dbm,
                    r.snr_directional_db
                );
            }
        }
        Command::Track { run_index, .. } => {
            let mut c = cfg.clone().into_inner();
            c.mode = Mode::SpatialConsistency;
            let cfg_track = validate_config(c)?;
            let track = run_spatially_consistent(&cfg_track, *run_index)?;
            let indexed = || {
                track
                    .snapshots
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (k as u64, s))
            };
            write_track_summary_csv(&out.path("track_summary.csv"), &track)?;
            write_mpcs_csv(&out.path("mpcs.csv"), indexed())?;
            write_pdp_csv(&out.path("pdp_consecutive.csv"), indexed(), cfg.pdp_bin_ns)?;
            for (name, map) in [
                ("sf_map_los.csv", &track.sf_map_los),
                ("sf_map_nlos.csv", &track.sf_map_nlos),
                ("los_map.csv", &track.los_map),
            ] {
                if let Some(m) = map {
                    let p = out.path(name);
                    m.write_csv(&p, cfg.seed)?;
                    out.files.push(p.with_extension("meta.json"));
                }
            }
            println!(
                "{} snapshots in {} segments",
                track.snapshots.len(),
                track.segment_environments.len()
            );
        }
        Command::Outage {
            runs,
            min_distance,
            max_distance,
            ..
        } => {
            let n = runs.unwrap_or(cfg.num_runs);
            let range = (*min_distance, *max_distance);
            for (stem, blockage) in [("outage_no_blockage", false), ("outage_blockage", true)] {
                let report = monte_carlo_outage(&cfg, n, range, blockage)?;
                out.files
                    .extend(write_outage_report(&out.dir, stem, &report)?);
                println!(
                    "{stem}: outage {:.1}%, 5% SNR {:.2} dB over {} runs",
                    100.0 * report.outage_fraction,
                    report.snr_5pct_db,
                    report.n_runs
                );
            }
        }
        Command::BlockageCdf {
            kinds,
            samples,
            trace_hpbw,
            ..
        } => {
            let kinds: Vec<String> = if kinds.is_empty() {
                [
                    "omni-los",
                    "omni-nlos",
                    "dir:7",
                    "dir:15",
                    "dir:30",
                    "dir:60",
                ]
                .map(String::from)
                .to_vec()
            } else {
                kinds.clone()
            };
            for k in &kinds {
                let kind = ChannelKind::parse(k)?;
                let cdf = blockage_cdf(&cfg, *samples, kind)?;
                write_blockage_cdf_csv(
                    &out.path(&format!("blockage_cdf_{}.csv", kind.label())),
                    &cdf,
                )?;
                println!(
                    "{}: P(>10 dB) {:.1}%, P(>15 dB) {:.1}%",
                    kind.label(),
                    100.0 * cdf.exceedance(10.0),
                    100.0 * cdf.exceedance(15.0)
                );
            }
            if let Some(h) = trace_hpbw {
                let params = cfg.blockage.params_for(*h)?;
                let mut rng = substream(cfg.seed, StreamLabel::new(Purpose::Blockage, u64::MAX));
                let trace = simulate_trace(
                    &params,
                    cfg.blockage.trace_duration_s,
                    cfg.blockage.dt_s,
                    &mut rng,
                )?;
                write_blockage_trace_csv(
                    &out.path(&format!("blockage_trace_dir-{h}.csv")),
                    &trace,
                )?;
            }
        }
        Command::Maps { run_index, .. } => {
            let mut c = cfg.clone().into_inner();
            c.environment = EnvironmentMode::Auto;
            c.spatial.iid_sf = false;
            let cfg_maps = validate_config(c)?;
            let (sf_los, sf_nlos, los) = build_maps(&cfg_maps, *run_index)?;
            for (name, map) in [
                ("sf_map_los.csv", sf_los),
                ("sf_map_nlos.csv", sf_nlos),
                ("los_map.csv", los),
            ] {
                let Some(m) = map else {
                    bail!("map {name} was not generated")
                };
                let p = out.path(name);
                m.write_csv(&p, cfg.seed)?;
                out.files.push(p.with_extension("meta.json"));
            }
        }
    }
    out.finish(command_line, &cfg)
}

fn main() -> std::process::ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let command_line = recorded_command(&args[1..]);
    let result = split_overrides(args).and_then(|(rest, overrides)| {
        let cli = Cli::try_parse_from(&rest).unwrap_or_else(|e| e.exit());
        run(cli, overrides, command_line)
    });
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
