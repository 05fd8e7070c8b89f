//! Simulation configuration, validation and the flat `key = value` file format.
//!
//! Nested settings are addressed with dotted keys (`blockage.enabled`,
//! `trajectory.track_type`, ...). The same keys are accepted as CLI flags.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::antenna::AntennaConfig;
use crate::blockage::BlockageConfig;
use crate::error::{Result, SimError};
use crate::geometry::LinkGeometry;
use crate::pathloss::{
    atmospheric_at, path_loss_ci, O2IConfig, O2iClass, PathLossSample, SPEED_OF_LIGHT,
};
use crate::tcsl::TcslConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Umi,
    Uma,
}

/// Requested propagation condition; `Auto` draws it from the LOS probability
/// (drop mode) or the LOS-condition map (spatial-consistency mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentMode {
    Los,
    Nlos,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Los,
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Drop,
    SpatialConsistency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackType {
    Linear,
    Hexagon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    pub n_los: f64,
    pub n_nlos: f64,
    pub sigma_sf_los_db: f64,
    pub sigma_sf_nlos_db: f64,
}

impl PathLossParams {
    pub fn exponent(&self, env: Environment) -> f64 {
        match env {
            Environment::Los => self.n_los,
            Environment::Nlos => self.n_nlos,
        }
    }

    pub fn sigma_db(&self, env: Environment) -> f64 {
        match env {
            Environment::Los => self.sigma_sf_los_db,
            Environment::Nlos => self.sigma_sf_nlos_db,
        }
    }
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            n_los: 2.0,
            n_nlos: 3.2,
            sigma_sf_los_db: 4.0,
            sigma_sf_nlos_db: 7.0,
        }
    }
}

/// UT track. The track starts `tr_distance_m` from the BS at azimuth
/// `start_azimuth_deg` and initially moves along `heading_deg`; hexagon
/// tracks turn 60 degrees clockwise after every side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub track_type: TrackType,
    pub track_length_m: f64,
    pub side_length_m: f64,
    pub heading_deg: f64,
    pub start_azimuth_deg: f64,
    pub speed_mps: f64,
    pub update_distance_m: f64,
    pub segment_length_m: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            track_type: TrackType::Hexagon,
            track_length_m: 40.0,
            side_length_m: 10.0,
            heading_deg: 180.0,
            start_azimuth_deg: 0.0,
            speed_mps: 1.0,
            update_distance_m: 1.0,
            segment_length_m: 12.0,
        }
    }
}

/// Correlated-map settings used in spatial-consistency mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    /// Side of the square map centered on the BS.
    pub map_size_m: f64,
    pub granularity_m: f64,
    pub sf_dco_los_m: f64,
    pub sf_dco_nlos_m: f64,
    pub los_dco_m: f64,
    /// LOS probability for `environment = auto`.
    pub p_los: f64,
    /// Replace the correlated SF map by i.i.d. draws per snapshot.
    pub iid_sf: bool,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig {
            map_size_m: 200.0,
            granularity_m: 1.0,
            sf_dco_los_m: 10.0,
            sf_dco_nlos_m: 13.0,
            los_dco_m: 15.0,
            p_los: 0.5,
            iid_sf: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub carrier_freq_ghz: f64,
    pub bandwidth_mhz: f64,
    pub scenario: Scenario,
    pub environment: EnvironmentMode,
    /// Horizontal BS-UT separation at the start of a run.
    pub tr_distance_m: f64,
    pub bs_height_m: f64,
    pub ut_height_m: f64,
    pub pathloss: PathLossParams,
    pub atmospheric_rate_db_per_km: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub mode: Mode,
    pub trajectory: TrajectorySpec,
    pub spatial: SpatialConfig,
    pub blockage: BlockageConfig,
    pub o2i: O2IConfig,
    pub antenna: AntennaConfig,
    pub tcsl: TcslConfig,
    /// Width of the delay bins in PDP exports.
    pub pdp_bin_ns: f64,
    pub seed: u64,
    pub num_runs: u64,
}

impl SimConfig {
    pub fn defaults_for(scenario: Scenario, o2i_class: O2iClass) -> Self {
        SimConfig {
            carrier_freq_ghz: 28.0,
            bandwidth_mhz: 800.0,
            scenario,
            environment: EnvironmentMode::Los,
            tr_distance_m: 100.0,
            bs_height_m: match scenario {
                Scenario::Umi => 10.0,
                Scenario::Uma => 25.0,
            },
            ut_height_m: 1.5,
            pathloss: PathLossParams::default(),
            atmospheric_rate_db_per_km: 0.0,
            tx_power_dbm: 30.0,
            noise_figure_db: 10.0,
            mode: Mode::Drop,
            trajectory: TrajectorySpec::default(),
            spatial: SpatialConfig::default(),
            blockage: BlockageConfig::default(),
            o2i: O2IConfig::for_class(o2i_class),
            antenna: AntennaConfig::default(),
            tcsl: TcslConfig::default(),
            pdp_bin_ns: 2.5,
            seed: 1,
            num_runs: 1,
        }
    }

    /// Parses the flat key-value format on top of the defaults for the
    /// scenario and O2I class named in the text (or UMi / low).
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut cfg = Self::defaults_for(Scenario::Umi, O2iClass::Low);
        cfg.apply_indexed(pairs.iter().map(|(_, k, v)| (k.as_str(), v.as_str())))
            .map_err(|(idx, e)| match e {
                SimError::Parse { msg, .. } => SimError::Parse {
                    line: idx.map(|i| pairs[i].0).unwrap_or(0),
                    msg,
                },
                other => other,
            })?;
        Ok(cfg)
    }

    /// Applies `key = value` overrides. Setting `scenario` or
    /// `o2i.loss_class` resets the fields whose defaults depend on them,
    /// unless those fields are also given explicitly.
    pub fn apply_overrides<'a>(
        &mut self,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<()> {
        self.apply_indexed(pairs).map_err(|(_, e)| e)
    }

    fn apply_indexed<'a>(
        &mut self,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> std::result::Result<(), (Option<usize>, SimError)> {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let at = |i: usize| move |e: SimError| (Some(i), e);

        for (i, (key, value)) in pairs.iter().enumerate() {
            match *key {
                "scenario" => {
                    let scenario: Scenario = parse_enum(key, value).map_err(at(i))?;
                    let base = Self::defaults_for(scenario, self.o2i.loss_class);
                    set_leaf(&mut tree, "bs_height_m", Value::from(base.bs_height_m))
                        .map_err(at(i))?;
                }
                "o2i.loss_class" => {
                    let class: O2iClass = parse_enum(key, value).map_err(at(i))?;
                    let base = O2IConfig::for_class(class);
                    for (k, v) in [
                        ("o2i.a", base.a),
                        ("o2i.b", base.b),
                        ("o2i.sigma_p_db", base.sigma_p_db),
                    ] {
                        set_leaf(&mut tree, k, Value::from(v)).map_err(at(i))?;
                    }
                }
                _ => {}
            }
        }
        // Dependent defaults above must not clobber explicit values.
        for (i, (key, value)) in pairs.iter().enumerate() {
            let current =
                leaf(&tree, key).ok_or_else(|| (Some(i), SimError::UnknownKey(key.to_string())))?;
            let parsed = parse_like(current, key, value).map_err(at(i))?;
            set_leaf(&mut tree, key, parsed).map_err(at(i))?;
        }
        *self = serde_json::from_value(tree).map_err(|e| {
            (
                None,
                SimError::Parse {
                    line: 0,
                    msg: e.to_string(),
                },
            )
        })?;
        Ok(())
    }

    /// Every config key in sorted order with its current value.
    pub fn flat_entries(&self) -> Vec<(String, String)> {
        let tree = serde_json::to_value(self).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &tree, &mut out);
        out
    }

    pub fn keys() -> Vec<String> {
        Self::defaults_for(Scenario::Umi, O2iClass::Low)
            .flat_entries()
            .into_iter()
            .map(|(k, _)| k)
            .collect()
    }

    /// Renders the flat key-value format; `parse` inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.flat_entries() {
            s.push_str(&k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    pub fn bs_position(&self) -> [f64; 3] {
        [0.0, 0.0, self.bs_height_m]
    }

    /// UT position `horizontal_m` from the BS along `azimuth_deg`.
    pub fn ut_position(&self, horizontal_m: f64, azimuth_deg: f64) -> [f64; 3] {
        let a = azimuth_deg.to_radians();
        [
            horizontal_m * a.cos(),
            horizontal_m * a.sin(),
            self.ut_height_m,
        ]
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / (self.carrier_freq_ghz * 1e9)
    }

    /// Path loss over the exact 3-D separation of `geometry`.
    pub fn link_pathloss(
        &self,
        geometry: &LinkGeometry,
        env: Environment,
        sf_db: f64,
        o2i_db: f64,
    ) -> Result<PathLossSample> {
        let d = geometry.distance_3d();
        Ok(path_loss_ci(
            self.carrier_freq_ghz,
            d,
            self.pathloss.exponent(env),
            atmospheric_at(d, self.atmospheric_rate_db_per_km),
            sf_db,
        )?
        .with_o2i(o2i_db))
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::defaults_for(Scenario::Umi, O2iClass::Low)
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(key: &str, value: &str) -> Result<T> {
    serde_json::from_value(Value::String(value.to_string())).map_err(|_| SimError::Parse {
        line: 0,
        msg: format!("invalid value `{value}` for `{key}`"),
    })
}

fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| SimError::Parse {
            line: n + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let v = v.trim().trim_matches('"');
        out.push((n + 1, k.trim().to_string(), v.to_string()));
    }
    Ok(out)
}

fn leaf<'a>(tree: &'a Value, key: &str) -> Option<&'a Value> {
    let mut node = tree;
    for part in key.split('.') {
        node = node.as_object()?.get(part)?;
    }
    (!node.is_object()).then_some(node)
}

fn set_leaf(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(*part))
            .ok_or_else(|| SimError::UnknownKey(key.to_string()))?;
    }
    let map: &mut Map<String, Value> = node
        .as_object_mut()
        .ok_or_else(|| SimError::UnknownKey(key.to_string()))?;
    map.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_like(current: &Value, key: &str, text: &str) -> Result<Value> {
    let bad = || SimError::Parse {
        line: 0,
        msg: format!("invalid value `{text}` for `{key}`"),
    };
    match current {
        Value::Bool(_) => text.parse::<bool>().map(Value::Bool).map_err(|_| bad()),
        Value::Number(n) if n.is_u64() && !n.is_f64() => {
            text.parse::<u64>().map(Value::from).map_err(|_| bad())
        }
        Value::Number(_) => {
            let x: f64 = text.parse().map_err(|_| bad())?;
            if !x.is_finite() {
                return Err(bad());
            }
            Ok(Value::from(x))
        }
        Value::String(_) => Ok(Value::String(text.to_string())),
        _ => Err(bad()),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// A configuration that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig(SimConfig);

impl ValidatedConfig {
    pub fn into_inner(self) -> SimConfig {
        self.0
    }
}

impl Deref for ValidatedConfig {
    type Target = SimConfig;
    fn deref(&self) -> &SimConfig {
        &self.0
    }
}

fn check(ok: bool, field: &'static str, range: &'static str, value: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SimError::OutOfRange {
            field,
            range,
            value,
        })
    }
}

pub fn validate_config(cfg: SimConfig) -> Result<ValidatedConfig> {
    let f = cfg.carrier_freq_ghz;
    check(
        (0.5..=100.0).contains(&f),
        "carrier_freq_ghz",
        "[0.5,100]",
        f,
    )?;
    let bw = cfg.bandwidth_mhz;
    check(bw > 0.0 && bw <= 800.0, "bandwidth_mhz", "(0,800]", bw)?;
    check(
        cfg.tr_distance_m >= 1.0,
        "tr_distance_m",
        "[1,inf)",
        cfg.tr_distance_m,
    )?;
    check(
        cfg.bs_height_m > 0.0,
        "bs_height_m",
        "(0,inf)",
        cfg.bs_height_m,
    )?;
    check(
        cfg.ut_height_m > 0.0,
        "ut_height_m",
        "(0,inf)",
        cfg.ut_height_m,
    )?;

    let pl = &cfg.pathloss;
    check(pl.n_los > 0.0, "pathloss.n_los", "(0,inf)", pl.n_los)?;
    check(pl.n_nlos > 0.0, "pathloss.n_nlos", "(0,inf)", pl.n_nlos)?;
    check(
        pl.sigma_sf_los_db >= 0.0,
        "pathloss.sigma_sf_los_db",
        "[0,inf)",
        pl.sigma_sf_los_db,
    )?;
    check(
        pl.sigma_sf_nlos_db >= 0.0,
        "pathloss.sigma_sf_nlos_db",
        "[0,inf)",
        pl.sigma_sf_nlos_db,
    )?;
    let at = cfg.atmospheric_rate_db_per_km;
    check(at >= 0.0, "atmospheric_rate_db_per_km", "[0,inf)", at)?;
    check(
        cfg.noise_figure_db >= 0.0,
        "noise_figure_db",
        "[0,inf)",
        cfg.noise_figure_db,
    )?;
    check(
        cfg.pdp_bin_ns > 0.0,
        "pdp_bin_ns",
        "(0,inf)",
        cfg.pdp_bin_ns,
    )?;
    check(
        cfg.num_runs >= 1,
        "num_runs",
        "[1,inf)",
        cfg.num_runs as f64,
    )?;

    let t = &cfg.trajectory;
    check(
        t.track_length_m >= 0.0,
        "trajectory.track_length_m",
        "[0,inf)",
        t.track_length_m,
    )?;
    check(
        t.speed_mps > 0.0,
        "trajectory.speed_mps",
        "(0,inf)",
        t.speed_mps,
    )?;
    check(
        t.update_distance_m > 0.0,
        "trajectory.update_distance_m",
        "(0,inf)",
        t.update_distance_m,
    )?;
    check(
        t.segment_length_m >= t.update_distance_m,
        "trajectory.segment_length_m",
        "[update_distance_m,inf)",
        t.segment_length_m,
    )?;
    if t.track_type == TrackType::Hexagon {
        check(
            t.side_length_m > 0.0,
            "trajectory.side_length_m",
            "(0,inf)",
            t.side_length_m,
        )?;
    }

    let s = &cfg.spatial;
    check(
        s.map_size_m > 0.0,
        "spatial.map_size_m",
        "(0,inf)",
        s.map_size_m,
    )?;
    check(
        s.granularity_m > 0.0,
        "spatial.granularity_m",
        "(0,inf)",
        s.granularity_m,
    )?;
    check(
        s.sf_dco_los_m > 0.0,
        "spatial.sf_dco_los_m",
        "(0,inf)",
        s.sf_dco_los_m,
    )?;
    check(
        s.sf_dco_nlos_m > 0.0,
        "spatial.sf_dco_nlos_m",
        "(0,inf)",
        s.sf_dco_nlos_m,
    )?;
    check(
        s.los_dco_m > 0.0,
        "spatial.los_dco_m",
        "(0,inf)",
        s.los_dco_m,
    )?;
    check(
        (0.0..=1.0).contains(&s.p_los),
        "spatial.p_los",
        "[0,1]",
        s.p_los,
    )?;

    cfg.blockage.validate()?;
    cfg.antenna.validate()?;

    let o = &cfg.o2i;
    check(
        o.sigma_p_db >= 0.0,
        "o2i.sigma_p_db",
        "[0,inf)",
        o.sigma_p_db,
    )?;
    let inner = o.a + o.b * f * f;
    check(inner > 0.0, "o2i.a", "A + B f^2 > 0", inner)?;

    let c = &cfg.tcsl;
    for (name, lo, hi) in [
        ("tcsl.clusters", c.clusters_min, c.clusters_max),
        ("tcsl.subpaths", c.subpaths_min, c.subpaths_max),
        ("tcsl.lobes", c.lobes_min, c.lobes_max),
    ] {
        if lo < 1 || lo > hi {
            return Err(SimError::InvalidConfig(format!(
                "{name}: need 1 <= min <= max, got [{lo}, {hi}]"
            )));
        }
    }
    for (name, v) in [
        ("tcsl.cluster_delay_mean_ns", c.cluster_delay_mean_ns),
        ("tcsl.subpath_delay_mean_ns", c.subpath_delay_mean_ns),
        (
            "tcsl.nlos_excess_delay_mean_ns",
            c.nlos_excess_delay_mean_ns,
        ),
        ("tcsl.cluster_decay_gamma_ns", c.cluster_decay_gamma_ns),
        ("tcsl.intra_cluster_decay_ns", c.intra_cluster_decay_ns),
        ("tcsl.lobe_spread_los_deg", c.lobe_spread_los_deg),
        ("tcsl.lobe_spread_nlos_deg", c.lobe_spread_nlos_deg),
        ("tcsl.zenith_spread_deg", c.zenith_spread_deg),
    ] {
        if !(v > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if c.lobe_spread_nlos_deg >= c.lobe_spread_los_deg {
        return Err(SimError::InvalidConfig(format!(
            "tcsl.lobe_spread_nlos_deg ({}) must be smaller than tcsl.lobe_spread_los_deg ({})",
            c.lobe_spread_nlos_deg, c.lobe_spread_los_deg
        )));
    }
    Ok(ValidatedConfig(cfg))
}
