//! Four-state Markov human-blockage model.
//!
//! A blocker cycles unshadowed -> decay -> shadowed -> rise -> unshadowed.
//! `lambda_X` is the rate of the transition *into* state `X`, so the mean
//! dwell in a state is the reciprocal of the next state's rate (5 s
//! unshadowed for `lambda_decay = 0.2`). Loss is 0 dB while unshadowed, the
//! mean attenuation while shadowed, and ramps linearly in dB in between.
//! Several blockers add their losses in dB.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::angle_diff;
use crate::tcsl::ChannelSnapshot;

/// Simulated time discarded before `t = 0` so traces start in steady state.
const WARMUP_S: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockageState {
    Unshadowed,
    Decay,
    Shadowed,
    Rise,
}

impl BlockageState {
    /// All states in cycle order.
    pub const ALL: [BlockageState; 4] = [
        BlockageState::Unshadowed,
        BlockageState::Decay,
        BlockageState::Shadowed,
        BlockageState::Rise,
    ];

    pub fn next(self) -> Self {
        match self {
            BlockageState::Unshadowed => BlockageState::Decay,
            BlockageState::Decay => BlockageState::Shadowed,
            BlockageState::Shadowed => BlockageState::Rise,
            BlockageState::Rise => BlockageState::Unshadowed,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BlockageState::Unshadowed => "unshadowed",
            BlockageState::Decay => "decay",
            BlockageState::Shadowed => "shadowed",
            BlockageState::Rise => "rise",
        }
    }
}

/// Transition rates (per second) and mean attenuation of one blocker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovParams {
    pub lambda_decay: f64,
    pub lambda_shadow: f64,
    pub lambda_rise: f64,
    pub lambda_unshadow: f64,
    pub mean_attenuation_db: f64,
}

impl MarkovParams {
    /// Rate of leaving `state` (the rate named after its successor).
    pub fn exit_rate(&self, state: BlockageState) -> f64 {
        match state {
            BlockageState::Unshadowed => self.lambda_decay,
            BlockageState::Decay => self.lambda_shadow,
            BlockageState::Shadowed => self.lambda_rise,
            BlockageState::Rise => self.lambda_unshadow,
        }
    }

    pub fn mean_dwell_s(&self, state: BlockageState) -> f64 {
        1.0 / self.exit_rate(state)
    }

    pub fn max_rate(&self) -> f64 {
        self.lambda_decay
            .max(self.lambda_shadow)
            .max(self.lambda_rise)
            .max(self.lambda_unshadow)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_decay", self.lambda_decay),
            ("lambda_shadow", self.lambda_shadow),
            ("lambda_rise", self.lambda_rise),
            ("lambda_unshadow", self.lambda_unshadow),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidConfig(format!(
                    "blockage rate {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.mean_attenuation_db >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "blockage mean attenuation must be non-negative, got {}",
                self.mean_attenuation_db
            )));
        }
        Ok(())
    }
}

/// Mean attenuation versus beamwidth: `max(floor, intercept - slope * HPBW)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationFit {
    pub intercept_db: f64,
    pub slope_db_per_deg: f64,
    pub floor_db: f64,
}

impl AttenuationFit {
    pub fn mean_attenuation_db(&self, hpbw_deg: f64) -> f64 {
        (self.intercept_db - self.slope_db_per_deg * hpbw_deg)
            .max(self.floor_db)
            .max(0.0)
    }
}

impl Default for AttenuationFit {
    fn default() -> Self {
        AttenuationFit {
            intercept_db: 22.0,
            slope_db_per_deg: 0.15,
            floor_db: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageConfig {
    pub enabled: bool,
    /// Use the beamwidth-dependent rate and attenuation fits; otherwise
    /// `custom` is used verbatim.
    pub default_rates: bool,
    pub custom: MarkovParams,
    pub attenuation_fit: AttenuationFit,
    pub trace_duration_s: f64,
    pub dt_s: f64,
    /// Independent blockers per lobe or beam are drawn from `1..=max_blockers`.
    pub max_blockers: u32,
}

impl Default for BlockageConfig {
    fn default() -> Self {
        BlockageConfig {
            enabled: false,
            default_rates: true,
            custom: rates_for_beamwidth(60.0, &AttenuationFit::default())
                .expect("valid default beamwidth"),
            attenuation_fit: AttenuationFit::default(),
            trace_duration_s: 60.0,
            dt_s: 1e-3,
            max_blockers: 5,
        }
    }
}

impl BlockageConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.default_rates {
            self.custom.validate()?;
        }
        if !(self.dt_s > 0.0 && self.trace_duration_s > self.dt_s) {
            return Err(SimError::InvalidConfig(format!(
                "blockage trace needs 0 < dt_s < trace_duration_s, got dt {} s, duration {} s",
                self.dt_s, self.trace_duration_s
            )));
        }
        if self.max_blockers < 1 {
            return Err(SimError::InvalidConfig(
                "blockage.max_blockers must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Markov parameters for a beam (or lobe-equivalent width) of `hpbw_deg`.
    pub fn params_for(&self, hpbw_deg: f64) -> Result<MarkovParams> {
        if self.default_rates {
            rates_for_beamwidth(hpbw_deg, &self.attenuation_fit)
        } else {
            Ok(self.custom)
        }
    }
}

/// Linear beamwidth fits of the four transition rates.
pub fn rates_for_beamwidth(hpbw_deg: f64, fit: &AttenuationFit) -> Result<MarkovParams> {
    if !(hpbw_deg > 0.0 && hpbw_deg <= 360.0) {
        return Err(SimError::InvalidArgument(format!(
            "beamwidth must lie in (0, 360] degrees, got {hpbw_deg}"
        )));
    }
    Ok(MarkovParams {
        lambda_decay: 0.2,
        lambda_shadow: 0.065 * hpbw_deg + 7.425,
        lambda_rise: 0.05 * hpbw_deg + 7.35,
        lambda_unshadow: 6.7,
        mean_attenuation_db: fit.mean_attenuation_db(hpbw_deg),
    })
}

/// Full width of a Gaussian spatial lobe under the three-sigma rule.
pub fn lobe_equivalent_beamwidth(angular_spread_deg: f64) -> Result<f64> {
    if !(angular_spread_deg > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "lobe angular spread must be positive, got {angular_spread_deg}"
        )));
    }
    Ok(6.0 * angular_spread_deg)
}

/// One state visit of a continuous-time trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epoch {
    pub state: BlockageState,
    pub start_s: f64,
    pub end_s: f64,
}

/// Realization of one blocker on a time grid over `[0, duration_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovTrace {
    pub epochs: Vec<Epoch>,
    pub attenuation_db: f64,
    pub duration_s: f64,
}

impl MarkovTrace {
    /// Simulates on a `dt_s` grid: each visit lasts a geometric number of
    /// steps (at least one) with success probability `rate * dt_s`, so the
    /// mean dwell is exactly `1 / rate`.
    pub fn simulate<R: Rng + ?Sized>(
        params: &MarkovParams,
        duration_s: f64,
        dt_s: f64,
        rng: &mut R,
    ) -> Self {
        let mut state = BlockageState::Unshadowed;
        let mut step = -((WARMUP_S / dt_s).round() as i64);
        let end_step = (duration_s / dt_s).ceil() as i64;
        let mut epochs = Vec::new();
        while step < end_step {
            let p = (params.exit_rate(state) * dt_s).min(1.0);
            let extra = Geometric::new(p)
                .expect("probability in (0, 1]")
                .sample(rng);
            let end = step
                .saturating_add(1)
                .saturating_add(extra.min(i64::MAX as u64 / 4) as i64);
            if end > 0 {
                epochs.push(Epoch {
                    state,
                    start_s: step as f64 * dt_s,
                    end_s: end as f64 * dt_s,
                });
            }
            step = end;
            state = state.next();
        }
        MarkovTrace {
            epochs,
            attenuation_db: params.mean_attenuation_db,
            duration_s,
        }
    }

    fn epoch_at(&self, t: f64) -> &Epoch {
        let idx = self.epochs.partition_point(|e| e.end_s <= t);
        &self.epochs[idx.min(self.epochs.len() - 1)]
    }

    pub fn state_at(&self, t: f64) -> BlockageState {
        self.epoch_at(t).state
    }

    pub fn loss_at(&self, t: f64) -> f64 {
        let e = self.epoch_at(t);
        let frac = ((t - e.start_s) / (e.end_s - e.start_s)).clamp(0.0, 1.0);
        match e.state {
            BlockageState::Unshadowed => 0.0,
            BlockageState::Decay => self.attenuation_db * frac,
            BlockageState::Shadowed => self.attenuation_db,
            BlockageState::Rise => self.attenuation_db * (1.0 - frac),
        }
    }
}

/// Time-sampled blockage trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockageTrace {
    pub dt_s: f64,
    pub states: Vec<BlockageState>,
    pub loss_db: Vec<f64>,
}

impl BlockageTrace {
    pub fn len(&self) -> usize {
        self.loss_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss_db.is_empty()
    }

    /// Lengths (seconds) of the complete state visits, i.e. excluding the
    /// truncated first and last runs.
    pub fn dwell_times(&self) -> Vec<(BlockageState, f64)> {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=self.states.len() {
            if i == self.states.len() || self.states[i] != self.states[start] {
                runs.push((self.states[start], (i - start) as f64 * self.dt_s, start, i));
                start = i;
            }
        }
        let n = runs.len();
        runs.into_iter()
            .enumerate()
            .filter(|(k, _)| *k != 0 && *k + 1 != n)
            .map(|(_, (s, d, _, _))| (s, d))
            .collect()
    }
}

fn check_step(params: &MarkovParams, dt_s: f64) -> Result<()> {
    if params.max_rate() * dt_s >= 0.1 {
        return Err(SimError::InvalidArgument(format!(
            "time step {dt_s} s too coarse for transition rate {} /s",
            params.max_rate()
        )));
    }
    Ok(())
}

/// Samples one blocker's trace on a `dt_s` grid over `[0, duration_s)`.
pub fn simulate_trace<R: Rng + ?Sized>(
    params: &MarkovParams,
    duration_s: f64,
    dt_s: f64,
    rng: &mut R,
) -> Result<BlockageTrace> {
    params.validate()?;
    if !(dt_s > 0.0 && duration_s > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "trace needs positive dt and duration, got {dt_s} s / {duration_s} s"
        )));
    }
    check_step(params, dt_s)?;
    let trace = MarkovTrace::simulate(params, duration_s, dt_s, rng);
    let n = (duration_s / dt_s).round() as usize;
    let mut states = Vec::with_capacity(n);
    let mut loss_db = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt_s;
        states.push(trace.state_at(t));
        loss_db.push(trace.loss_at(t));
    }
    Ok(BlockageTrace {
        dt_s,
        states,
        loss_db,
    })
}

/// Pointwise dB sum of traces on a common grid. The state reported at each
/// step is that of the trace contributing the largest loss.
pub fn superimpose(traces: &[BlockageTrace]) -> Result<BlockageTrace> {
    let first = traces.first().ok_or(SimError::MismatchedTraces)?;
    if traces
        .iter()
        .any(|t| t.len() != first.len() || (t.dt_s - first.dt_s).abs() > 1e-15)
    {
        return Err(SimError::MismatchedTraces);
    }
    let mut out = first.clone();
    for k in 0..out.len() {
        let mut best = first.loss_db[k];
        for t in &traces[1..] {
            if t.loss_db[k] > best {
                best = t.loss_db[k];
                out.states[k] = t.states[k];
            }
            out.loss_db[k] += t.loss_db[k];
        }
    }
    Ok(out)
}

/// Several independent blockers acting on one lobe or beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockerSet {
    pub traces: Vec<MarkovTrace>,
}

impl BlockerSet {
    /// Draws `m ~ U{1..=max_blockers}` independent blockers over `duration_s`.
    pub fn draw<R: Rng + ?Sized>(
        cfg: &BlockageConfig,
        params: &MarkovParams,
        duration_s: f64,
        rng: &mut R,
    ) -> Self {
        let m = rng.random_range(1..=cfg.max_blockers);
        Self::with_count(m, params, duration_s, cfg.dt_s, rng)
    }

    pub fn with_count<R: Rng + ?Sized>(
        m: u32,
        params: &MarkovParams,
        duration_s: f64,
        dt_s: f64,
        rng: &mut R,
    ) -> Self {
        BlockerSet {
            traces: (0..m)
                .map(|_| MarkovTrace::simulate(params, duration_s, dt_s, rng))
                .collect(),
        }
    }

    pub fn loss_at(&self, t: f64) -> f64 {
        self.traces.iter().map(|tr| tr.loss_at(t)).sum()
    }
}

/// Shadowing loss seen at a uniformly random grid instant of a superposition
/// of `1..=max_blockers` blocker traces.
pub fn sample_blockage_loss<R: Rng + ?Sized>(
    cfg: &BlockageConfig,
    beamwidth_deg: f64,
    rng: &mut R,
) -> Result<f64> {
    let params = cfg.params_for(beamwidth_deg)?;
    check_step(&params, cfg.dt_s)?;
    // m and t0 come first so that calls with the same stream share them.
    let m = rng.random_range(1..=cfg.max_blockers);
    let steps = (cfg.trace_duration_s / cfg.dt_s).round().max(1.0) as u64;
    let t0 = rng.random_range(0..steps) as f64 * cfg.dt_s;
    let set = BlockerSet::with_count(m, &params, cfg.trace_duration_s, cfg.dt_s, rng);
    Ok(set.loss_at(t0))
}

/// Attenuates every MPC by the loss of its arrival lobe (indexed by lobe id).
pub fn apply_blockage(snapshot: &ChannelSnapshot, per_lobe_losses_db: &[f64]) -> ChannelSnapshot {
    let mut out = snapshot.clone();
    for m in &mut out.mpcs {
        let loss = per_lobe_losses_db.get(m.lobe_id_rx).copied().unwrap_or(0.0);
        m.power_mw *= 10f64.powf(-loss / 10.0);
    }
    out.total_rx_power_mw = out.power_sum_mw();
    out.rebuild_clusters();
    out
}

/// Attenuates the MPCs arriving within the RX half-power beamwidth around
/// `rx_boresight_az_rad` by a single beam loss.
pub fn apply_beam_blockage(
    snapshot: &ChannelSnapshot,
    loss_db: f64,
    rx_boresight_az_rad: f64,
    rx_hpbw_deg: f64,
) -> ChannelSnapshot {
    let half = 0.5 * rx_hpbw_deg.to_radians();
    let factor = 10f64.powf(-loss_db / 10.0);
    let mut out = snapshot.clone();
    for m in &mut out.mpcs {
        if angle_diff(m.aoa_rad, rx_boresight_az_rad).abs() <= half {
            m.power_mw *= factor;
        }
    }
    out.total_rx_power_mw = out.power_sum_mw();
    out.rebuild_clusters();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Environment;
    use crate::geometry::LinkGeometry;
    use crate::pathloss::path_loss_ci;
    use crate::rng::{substream, Purpose, StreamLabel};
    use crate::tcsl::{generate_snapshot, TcslConfig};

    fn rng(run: u64) -> crate::rng::RandomStream {
        substream(21, StreamLabel::new(Purpose::Blockage, run))
    }

    fn fit() -> AttenuationFit {
        AttenuationFit::default()
    }

    #[test]
    fn rate_fits() {
        let p = rates_for_beamwidth(60.0, &fit()).unwrap();
        assert!((p.lambda_shadow - 11.325).abs() < 1e-12);
        assert!((p.lambda_rise - 10.35).abs() < 1e-12);
        let p = rates_for_beamwidth(7.0, &fit()).unwrap();
        assert!((p.lambda_shadow - 7.88).abs() < 0.005);
        assert!((p.lambda_rise - 7.70).abs() < 1e-12);
        for hpbw in [1.0, 7.0, 33.0, 360.0] {
            let p = rates_for_beamwidth(hpbw, &fit()).unwrap();
            assert_eq!((p.lambda_decay, p.lambda_unshadow), (0.2, 6.7));
        }
        assert!(rates_for_beamwidth(0.0, &fit()).is_err());
        assert!(rates_for_beamwidth(400.0, &fit()).is_err());
    }

    #[test]
    fn lobe_widths() {
        assert!((lobe_equivalent_beamwidth(10.5).unwrap() - 63.0).abs() < 1e-12);
        assert_eq!(lobe_equivalent_beamwidth(10.0).unwrap(), 60.0);
        assert_eq!(lobe_equivalent_beamwidth(5.0).unwrap(), 30.0);
        assert!(lobe_equivalent_beamwidth(0.0).is_err());
    }

    #[test]
    fn trace_follows_cycle_and_loss_profile() {
        let p = rates_for_beamwidth(15.0, &fit()).unwrap();
        let tr = simulate_trace(&p, 600.0, 1e-3, &mut rng(0)).unwrap();
        for w in tr.states.windows(2) {
            assert!(
                w[0] == w[1] || w[1] == w[0].next(),
                "{:?} -> {:?}",
                w[0],
                w[1]
            );
        }
        for (s, l) in tr.states.iter().zip(&tr.loss_db) {
            match s {
                BlockageState::Unshadowed => assert_eq!(*l, 0.0),
                BlockageState::Shadowed => assert_eq!(*l, p.mean_attenuation_db),
                _ => assert!(*l >= 0.0 && *l <= p.mean_attenuation_db),
            }
        }
        // Ramps are monotone inside each visit.
        for k in 1..tr.len() {
            if tr.states[k] == tr.states[k - 1] {
                match tr.states[k] {
                    BlockageState::Decay => assert!(tr.loss_db[k] >= tr.loss_db[k - 1]),
                    BlockageState::Rise => assert!(tr.loss_db[k] <= tr.loss_db[k - 1]),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn coarse_step_rejected() {
        let p = rates_for_beamwidth(60.0, &fit()).unwrap();
        assert!(simulate_trace(&p, 10.0, 0.01, &mut rng(1)).is_err());
    }

    #[test]
    fn dwell_means_match_rates() {
        let p = rates_for_beamwidth(60.0, &fit()).unwrap();
        // ~1100 cycles of ~5.33 s each.
        let tr = simulate_trace(&p, 6000.0, 2e-3, &mut rng(2)).unwrap();
        let dwells = tr.dwell_times();
        for state in [
            BlockageState::Unshadowed,
            BlockageState::Decay,
            BlockageState::Shadowed,
            BlockageState::Rise,
        ] {
            let d: Vec<f64> = dwells
                .iter()
                .filter(|x| x.0 == state)
                .map(|x| x.1)
                .collect();
            assert!(d.len() >= 1000, "{state:?}: {} visits", d.len());
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let expect = p.mean_dwell_s(state);
            assert!(
                (mean / expect - 1.0).abs() < 0.1,
                "{state:?}: {mean} vs {expect}"
            );
        }
        assert!((p.mean_dwell_s(BlockageState::Unshadowed) - 5.0).abs() < 1e-12);
        assert!((p.mean_dwell_s(BlockageState::Shadowed) - 0.0966).abs() < 1e-4);
    }

    #[test]
    fn zero_attenuation_gives_zero_loss() {
        let cfg = BlockageConfig {
            enabled: true,
            default_rates: false,
            custom: MarkovParams {
                mean_attenuation_db: 0.0,
                ..rates_for_beamwidth(30.0, &fit()).unwrap()
            },
            ..BlockageConfig::default()
        };
        let mut r = rng(3);
        for _ in 0..200 {
            assert_eq!(sample_blockage_loss(&cfg, 30.0, &mut r).unwrap(), 0.0);
        }
    }

    #[test]
    fn superposition() {
        let p = rates_for_beamwidth(7.0, &fit()).unwrap();
        let a = simulate_trace(&p, 120.0, 1e-3, &mut rng(4)).unwrap();
        assert_eq!(superimpose(std::slice::from_ref(&a)).unwrap(), a);

        let zero = BlockageTrace {
            dt_s: 1e-3,
            states: vec![BlockageState::Unshadowed; 10],
            loss_db: vec![0.0; 10],
        };
        let z = superimpose(&[zero.clone(), zero.clone()]).unwrap();
        assert!(z.loss_db.iter().all(|&l| l == 0.0));

        let mut x = zero.clone();
        let mut y = zero.clone();
        x.loss_db[2] = 12.0;
        x.states[2] = BlockageState::Shadowed;
        y.loss_db[7] = 9.0;
        y.states[7] = BlockageState::Shadowed;
        let s = superimpose(&[x, y]).unwrap();
        assert_eq!(s.loss_db.iter().copied().fold(0.0, f64::max), 12.0);
        assert_eq!(s.states[7], BlockageState::Shadowed);
        assert_eq!(s.loss_db[7], 9.0);

        let mut short = zero.clone();
        short.loss_db.pop();
        short.states.pop();
        assert!(superimpose(&[zero, short]).is_err());
        assert!(superimpose(&[]).is_err());
    }

    #[test]
    fn sampled_loss_is_nonnegative_and_narrow_beams_lose_more() {
        let cfg = BlockageConfig {
            enabled: true,
            ..BlockageConfig::default()
        };
        let draw = |hpbw: f64, run: u64| -> Vec<f64> {
            let mut r = rng(100 + run);
            let mut v: Vec<f64> = (0..3000)
                .map(|_| sample_blockage_loss(&cfg, hpbw, &mut r).unwrap())
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let narrow = draw(7.0, 0);
        let wide = draw(60.0, 1);
        assert!(narrow.iter().all(|&l| l >= 0.0));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&narrow) > mean(&wide));
    }

    fn omni(run: u64) -> ChannelSnapshot {
        let pl = path_loss_ci(28.0, 100.0, 3.2, 0.0, 0.0).unwrap();
        let geom = LinkGeometry {
            bs: [0.0, 0.0, 10.0],
            ut: [100.0, 0.0, 1.5],
        };
        let mut r = substream(4, StreamLabel::new(Purpose::Tcsl, run));
        generate_snapshot(
            &TcslConfig::default(),
            geom,
            Environment::Nlos,
            pl,
            30.0,
            &mut r,
        )
    }

    #[test]
    fn apply_per_lobe() {
        let s = omni(0);
        let same = apply_blockage(&s, &[0.0; 5]);
        assert_eq!(same.mpcs, s.mpcs);

        let mut single = s.clone();
        for m in &mut single.mpcs {
            m.lobe_id_rx = 0;
        }
        let b = apply_blockage(&single, &[10.0]);
        let drop = 10.0 * (single.power_sum_mw() / b.power_sum_mw()).log10();
        assert!((drop - 10.0).abs() < 1e-9);

        let mut two = s.clone();
        for (i, m) in two.mpcs.iter_mut().enumerate() {
            m.lobe_id_rx = i % 2;
        }
        let b = apply_blockage(&two, &[10.0, 0.0]);
        for (x, y) in b.mpcs.iter().zip(&two.mpcs) {
            if y.lobe_id_rx == 0 {
                assert!((x.power_mw - y.power_mw / 10.0).abs() <= 1e-12 * y.power_mw);
            } else {
                assert_eq!(x.power_mw, y.power_mw);
            }
        }
    }

    #[test]
    fn beam_loss_only_hits_in_beam_paths() {
        let s = omni(1);
        let bore = s.mpcs[0].aoa_rad;
        let b = apply_beam_blockage(&s, 20.0, bore, 10.0);
        for (x, y) in b.mpcs.iter().zip(&s.mpcs) {
            if angle_diff(y.aoa_rad, bore).abs() <= 5f64.to_radians() {
                assert!((x.power_mw - y.power_mw / 100.0).abs() <= 1e-12 * y.power_mw);
            } else {
                assert_eq!(x.power_mw, y.power_mw);
            }
        }
    }
}
