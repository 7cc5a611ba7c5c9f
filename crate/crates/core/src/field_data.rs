//! Real-data pipeline: RSSI logs, ground truth, detection efficiency and
//! noise estimation, raised thresholds and tracked-error evaluation.
//!
//! Each (antenna, advertising channel) pair is one sensor with id
//! `"{antenna}-{channel}"`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::{circ_lerp, wrap_deg};
use crate::detection::{detection_prob_threshold, Observation};
use crate::error::{Error, Result};
use crate::estimator::{Estimator, Method};
use crate::io::{parse_err, read_csv, write_csv};
use crate::likelihood::Grids;
use crate::patterns::{
    synth_pattern, ArrayConfig, SensorPattern, SYNTH_BACK_DB, SYNTH_MAIN_DB, SYNTH_ORDER, SYNTH_SIDE_DB,
};
use crate::sim_harness::{ci95, mean, rmse_circular};
use crate::tracker::{epoch_profiles, run_filter, Epoch, FilterConfig, Prior};

/// Receiver sensitivity floor (dBm); nothing weaker is ever logged.
pub const HARDWARE_FLOOR_DBM: f64 = -95.0;
/// BLE advertising channels.
pub const ADV_CHANNELS: [u8; 3] = [37, 38, 39];
/// Nominal advertising rate per channel (Hz).
pub const DEFAULT_RATE_HZ: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiRecord {
    pub timestamp_s: f64,
    pub antenna_id: String,
    pub channel: u8,
    pub rssi_dbm: f64,
}

impl RssiRecord {
    pub fn sensor_id(&self) -> String {
        sensor_id(&self.antenna_id, self.channel)
    }
}

pub fn sensor_id(antenna: &str, channel: u8) -> String {
    format!("{antenna}-{channel}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RssiLog {
    pub records: Vec<RssiRecord>,
}

impl RssiLog {
    pub fn new(records: Vec<RssiRecord>) -> Result<Self> {
        validate_rssi(&records, "<memory>")?;
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sensor ids in first-seen order.
    pub fn sensor_ids(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.records {
            let id = r.sensor_id();
            if !seen.contains(&id) {
                seen.push(id);
            }
        }
        seen
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.records.first()?.timestamp_s, self.records.last()?.timestamp_s))
    }
}

fn validate_rssi(records: &[RssiRecord], path: &str) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (k, r) in records.iter().enumerate() {
        // header is line 1
        let line = k + 2;
        if !r.timestamp_s.is_finite() || !r.rssi_dbm.is_finite() {
            return Err(parse_err(path, line, "non-finite value"));
        }
        if !ADV_CHANNELS.contains(&r.channel) {
            return Err(parse_err(path, line, format!("channel {} is not an advertising channel", r.channel)));
        }
        if r.timestamp_s < prev {
            return Err(parse_err(path, line, format!("timestamp {} goes backwards (previous {prev})", r.timestamp_s)));
        }
        prev = r.timestamp_s;
    }
    Ok(())
}

pub const RSSI_HEADER: [&str; 4] = ["timestamp_s", "antenna_id", "channel", "rssi_dbm"];
pub const TRUTH_HEADER: [&str; 3] = ["timestamp_s", "bearing_deg", "distance_m"];

pub fn read_rssi_log<R: Read>(reader: R, name: &str) -> Result<RssiLog> {
    let records: Vec<RssiRecord> = read_csv(reader, name, &RSSI_HEADER)?;
    validate_rssi(&records, name)?;
    Ok(RssiLog { records })
}

pub fn parse_rssi_log(path: &Path) -> Result<RssiLog> {
    read_rssi_log(std::fs::File::open(path)?, &path.display().to_string())
}

pub fn write_rssi_log<W: Write>(writer: W, log: &RssiLog) -> Result<()> {
    write_csv(writer, &log.records, &RSSI_HEADER)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub timestamp_s: f64,
    pub bearing_deg: f64,
    pub distance_m: f64,
}

/// Bearings of the source in the array frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub records: Vec<TruthRecord>,
}

impl GroundTruth {
    pub fn new(records: Vec<TruthRecord>) -> Result<Self> {
        validate_truth(&records, "<memory>")?;
        Ok(Self { records })
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.records.first()?.timestamp_s, self.records.last()?.timestamp_s))
    }

    /// Bearing at `t` (degrees, (−180, 180]), circular-linear between fixes.
    /// `None` outside the recorded span.
    pub fn bearing_at(&self, t: f64) -> Option<f64> {
        let r = &self.records;
        let (t0, t1) = self.span()?;
        if !(t >= t0 && t <= t1) {
            return None;
        }
        let k = r.partition_point(|x| x.timestamp_s <= t);
        if k == 0 {
            return Some(wrap_deg(r[0].bearing_deg));
        }
        if k == r.len() {
            return Some(wrap_deg(r[k - 1].bearing_deg));
        }
        let (a, b) = (&r[k - 1], &r[k]);
        let f = (t - a.timestamp_s) / (b.timestamp_s - a.timestamp_s);
        let psi = circ_lerp(a.bearing_deg.to_radians(), b.bearing_deg.to_radians(), f);
        Some(wrap_deg(psi.to_degrees()))
    }
}

fn validate_truth(records: &[TruthRecord], path: &str) -> Result<()> {
    for (k, r) in records.iter().enumerate() {
        let line = k + 2;
        if !(r.timestamp_s.is_finite() && r.bearing_deg.is_finite() && r.distance_m.is_finite()) {
            return Err(parse_err(path, line, "non-finite value"));
        }
        if k > 0 && r.timestamp_s <= records[k - 1].timestamp_s {
            return Err(parse_err(path, line, "timestamps must be strictly increasing"));
        }
    }
    Ok(())
}

pub fn read_ground_truth<R: Read>(reader: R, name: &str) -> Result<GroundTruth> {
    let records: Vec<TruthRecord> = read_csv(reader, name, &TRUTH_HEADER)?;
    validate_truth(&records, name)?;
    Ok(GroundTruth { records })
}

pub fn parse_ground_truth(path: &Path) -> Result<GroundTruth> {
    read_ground_truth(std::fs::File::open(path)?, &path.display().to_string())
}

pub fn write_ground_truth<W: Write>(writer: W, truth: &GroundTruth) -> Result<()> {
    write_csv(writer, &truth.records, &TRUTH_HEADER)
}

/// Log with a per-record detection flag after applying a raised threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdedLog {
    pub gamma: f64,
    pub records: Vec<(RssiRecord, bool)>,
}

impl ThresholdedLog {
    pub fn n_missed(&self) -> usize {
        self.records.iter().filter(|(_, d)| !d).count()
    }
}

/// Reclassify every record weaker than `gamma_new` as a miss.
pub fn apply_threshold(log: &RssiLog, gamma_new: f64) -> Result<ThresholdedLog> {
    if !(gamma_new >= HARDWARE_FLOOR_DBM) {
        return Err(Error::InvalidParameter(format!(
            "threshold {gamma_new} dBm lies below the hardware floor {HARDWARE_FLOOR_DBM} dBm"
        )));
    }
    Ok(ThresholdedLog {
        gamma: gamma_new,
        records: log.records.iter().map(|r| (r.clone(), r.rssi_dbm >= gamma_new)).collect(),
    })
}

/// Packet counts of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowCounts {
    pub t_start: f64,
    pub t_mid: f64,
    /// Expected packets per sensor.
    pub expected: usize,
    /// Received packets per sensor (any strength).
    pub received: Vec<usize>,
    /// Received packets at or above the threshold, per sensor.
    pub above: Vec<usize>,
    /// Values at or above the threshold, per sensor.
    pub values: Vec<Vec<f64>>,
}

/// Tile the log span into windows of `window` seconds, starting at the first record.
pub fn window_counts(
    log: &RssiLog,
    sensors: &[String],
    gamma: f64,
    window: f64,
    expected_rate: f64,
) -> Result<Vec<WindowCounts>> {
    if !(window > 0.0) || !(expected_rate > 0.0) {
        return Err(Error::InvalidParameter("window and expected rate must be positive".into()));
    }
    let Some((t0, t1)) = log.span() else {
        return Ok(Vec::new());
    };
    let index: HashMap<String, usize> = sensors.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let n_windows = (((t1 - t0) / window).floor() as usize) + 1;
    let expected = (window * expected_rate).round() as usize;
    let n = sensors.len();
    let mut out: Vec<WindowCounts> = (0..n_windows)
        .map(|k| {
            let t_start = t0 + k as f64 * window;
            WindowCounts {
                t_start,
                t_mid: t_start + window / 2.0,
                expected,
                received: vec![0; n],
                above: vec![0; n],
                values: vec![Vec::new(); n],
            }
        })
        .collect();
    let mut unknown = 0usize;
    for r in &log.records {
        let Some(&m) = index.get(&r.sensor_id()) else {
            unknown += 1;
            continue;
        };
        let k = (((r.timestamp_s - t0) / window).floor() as usize).min(n_windows - 1);
        let w = &mut out[k];
        w.received[m] += 1;
        if r.rssi_dbm >= gamma {
            w.above[m] += 1;
            w.values[m].push(r.rssi_dbm);
        }
    }
    if unknown > 0 {
        warn!("{unknown} records from sensors outside the array were ignored");
    }
    Ok(out)
}

/// Per window and sensor: detections for packets at or above `gamma`,
/// misses for weaker packets and for expected packets that never arrived.
pub fn batch_observations(
    log: &RssiLog,
    sensors: &[String],
    gamma: f64,
    window: f64,
    expected_rate: f64,
) -> Result<Vec<Epoch<f64>>> {
    let counts = window_counts(log, sensors, gamma, window, expected_rate)?;
    Ok(counts.iter().map(|w| Epoch { timestamp: w.t_mid, observations: window_observations(w) }).collect())
}

fn window_observations(w: &WindowCounts) -> Vec<Observation<f64>> {
    let mut obs = Vec::new();
    for m in 0..w.received.len() {
        obs.extend(w.values[m].iter().map(|&y| Observation::detected(m, y)));
        let below = w.received[m] - w.above[m];
        let absent = w.expected.saturating_sub(w.received[m]);
        obs.extend(std::iter::repeat_n(Observation::missed(m), below + absent));
    }
    obs
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcEstimate {
    pub pc: Vec<f64>,
    /// False where no qualifying window existed and the default 1 was used.
    pub estimated: Vec<bool>,
    pub received: Vec<usize>,
    pub expected: Vec<usize>,
}

/// Smallest reported efficiency.
pub const PC_FLOOR: f64 = 1e-3;

/// Detection efficiency per sensor: received / expected packets over the
/// windows where `qualifies(window, sensor)` holds.
pub fn estimate_pc(counts: &[WindowCounts], qualifies: impl Fn(usize, usize) -> bool) -> PcEstimate {
    let n = counts.first().map_or(0, |w| w.received.len());
    let mut received = vec![0usize; n];
    let mut expected = vec![0usize; n];
    for (k, w) in counts.iter().enumerate() {
        for m in 0..n {
            if qualifies(k, m) {
                received[m] += w.received[m];
                expected[m] += w.expected;
            }
        }
    }
    let mut pc = vec![1.0; n];
    let mut estimated = vec![false; n];
    for m in 0..n {
        if expected[m] == 0 {
            warn!("sensor {m}: no high-signal windows; detection efficiency defaults to 1");
            continue;
        }
        pc[m] = (received[m] as f64 / expected[m] as f64).clamp(PC_FLOOR, 1.0);
        estimated[m] = true;
    }
    PcEstimate { pc, estimated, received, expected }
}

/// Windows where the predicted mean clears the threshold by `4σ`.
pub fn strong_signal_windows(
    counts: &[WindowCounts],
    alpha_hats: &[f64],
    truth: &GroundTruth,
    array: &ArrayConfig<f64>,
) -> Result<Vec<Vec<bool>>> {
    if alpha_hats.len() != counts.len() {
        return Err(Error::InvalidParameter("one alpha estimate per window is required".into()));
    }
    counts
        .iter()
        .zip(alpha_hats)
        .map(|(w, &alpha)| {
            let Some(bearing) = truth.bearing_at(w.t_mid) else {
                return Ok(vec![false; array.len()]);
            };
            (0..array.len())
                .map(|m| {
                    let mu = alpha + array.gain(m, bearing.to_radians())?;
                    Ok(mu >= array.gamma() + 4.0 * array.sigma(m))
                })
                .collect()
        })
        .collect()
}

/// Mean, variance and size of one calibration cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub mean: f64,
    pub var: f64,
    pub n: usize,
}

impl CellStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = if n > 0 { mean(samples) } else { f64::NAN };
        let var =
            if n > 1 { samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { mean, var, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    pub cells_used: usize,
    /// Pooled variance is zero.
    pub degenerate: bool,
}

/// Pooled within-cell standard deviation `√(Σ(n−1)s² / Σ(n−1))`.
///
/// With `exclude = Some((gamma, sigma_prior))`, cells whose mean lies within
/// `2·sigma_prior` of `gamma` are skipped to limit truncation bias.
pub fn estimate_sigma(cells: &[CellStats], exclude: Option<(f64, f64)>) -> Result<SigmaEstimate> {
    let mut num = 0.0;
    let mut den = 0usize;
    let mut used = 0;
    for c in cells {
        if c.n < 2 {
            continue;
        }
        if let Some((gamma, prior)) = exclude {
            if (c.mean - gamma).abs() < 2.0 * prior {
                continue;
            }
        }
        num += (c.n - 1) as f64 * c.var;
        den += c.n - 1;
        used += 1;
    }
    if den == 0 {
        return Err(Error::InvalidParameter("no calibration cell with at least two samples".into()));
    }
    let sigma = (num / den as f64).sqrt();
    let degenerate = sigma == 0.0;
    if degenerate {
        warn!("pooled noise variance is zero");
    }
    Ok(SigmaEstimate { sigma, cells_used: used, degenerate })
}

/// `p_D,m(t) = p_c,m (1 − Φ((γ − α̂(t) − h_m(ψ_gps(t)))/σ_m))`, indexed `[epoch][sensor]`.
/// Epochs outside the truth span yield `None`.
pub fn predicted_pd_timeline(
    epochs: &[(f64, f64)],
    truth: &GroundTruth,
    array: &ArrayConfig<f64>,
) -> Result<Vec<Option<Vec<f64>>>> {
    epochs
        .iter()
        .map(|&(t, alpha)| {
            let Some(bearing) = truth.bearing_at(t) else {
                return Ok(None);
            };
            let row = (0..array.len())
                .map(|m| {
                    let mu = alpha + array.gain(m, bearing.to_radians())?;
                    Ok(array.pc(m) * detection_prob_threshold(mu, array.gamma(), array.sigma(m))?)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Some(row))
        })
        .collect()
}

/// Received-above-threshold count over expected count, capped at 1, `[window][sensor]`.
pub fn measured_pd_timeline(counts: &[WindowCounts]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|w| {
            w.above
                .iter()
                .map(|&a| if w.expected == 0 { 0.0 } else { (a as f64 / w.expected as f64).min(1.0) })
                .collect()
        })
        .collect()
}

/// Central binomial interval `[lo, hi]` holding at least `level` of the mass
/// of `Bin(n, p)`, from exact tail sums.
pub fn binomial_interval(n: usize, p: f64, level: f64) -> (usize, usize) {
    let tail = (1.0 - level) / 2.0;
    let p = p.clamp(0.0, 1.0);
    let mut pmf = vec![0.0; n + 1];
    if p == 0.0 {
        pmf[0] = 1.0;
    } else if p == 1.0 {
        pmf[n] = 1.0;
    } else {
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let mut ln_choose = 0.0;
        for (k, v) in pmf.iter_mut().enumerate() {
            if k > 0 {
                ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            *v = (ln_choose + k as f64 * lp + (n - k) as f64 * lq).exp();
        }
    }
    let mut lo = 0;
    let mut acc = pmf[0];
    while acc < tail && lo < n {
        lo += 1;
        acc += pmf[lo];
    }
    let mut hi = n;
    let mut acc = pmf[n];
    while acc < tail && hi > 0 {
        hi -= 1;
        acc += pmf[hi];
    }
    (lo, hi.max(lo))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdAgreement {
    pub cells: usize,
    pub inside: usize,
}

impl PdAgreement {
    pub fn coverage(&self) -> f64 {
        if self.cells == 0 {
            0.0
        } else {
            self.inside as f64 / self.cells as f64
        }
    }
}

/// Count (window, sensor) cells whose above-threshold packet count lies in
/// the binomial interval of the predicted detection probability.
pub fn pd_agreement(predicted: &[Option<Vec<f64>>], counts: &[WindowCounts], level: f64) -> PdAgreement {
    let mut out = PdAgreement { cells: 0, inside: 0 };
    for (pred, w) in predicted.iter().zip(counts) {
        let Some(pred) = pred else { continue };
        for (&p, &a) in pred.iter().zip(&w.above) {
            let (lo, hi) = binomial_interval(w.expected, p, level);
            out.cells += 1;
            if (lo..=hi).contains(&a) {
                out.inside += 1;
            }
        }
    }
    out
}

/// Tracked error summary of one method at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub rmse_mean: f64,
    pub rmse_ci_lo: f64,
    pub rmse_ci_hi: f64,
    pub rmse_per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub gamma: f64,
    /// Missed packets over expected packets, percent.
    pub pct_missed: f64,
    pub proposed: MethodSummary,
    pub baseline: MethodSummary,
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub window: f64,
    pub expected_rate: f64,
    pub n_seeds: usize,
    pub seed: u64,
    pub grids: Grids<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { window: 1.0, expected_rate: DEFAULT_RATE_HZ, n_seeds: 10, seed: 0, grids: Grids::standard() }
    }
}

/// For each threshold: reclassify, batch, track with both methods over
/// `n_seeds` filter seeds, and score against the interpolated truth.
pub fn threshold_sweep_eval(
    log: &RssiLog,
    truth: &GroundTruth,
    array: &ArrayConfig<f64>,
    gammas: &[f64],
    pf_config: &FilterConfig<f64>,
    settings: &SweepSettings,
) -> Result<Vec<ThresholdPoint>> {
    if settings.n_seeds == 0 {
        return Err(Error::InvalidParameter("at least one filter seed is required".into()));
    }
    for &g in gammas {
        apply_threshold(log, g)?;
    }
    let sensors: Vec<String> = array.patterns().iter().map(|p| p.id().to_string()).collect();
    let base = Estimator::new(array.clone(), settings.grids.clone())?;
    gammas
        .par_iter()
        .map(|&gamma| {
            let epochs = batch_observations(log, &sensors, gamma, settings.window, settings.expected_rate)?;
            let total: usize = epochs.iter().map(|e| e.observations.len()).sum();
            let missed: usize = epochs.iter().map(|e| e.observations.iter().filter(|o| !o.is_detected()).count()).sum();
            let est = base.with_array(array.with_gamma(gamma))?;
            let summarize = |method: Method| -> Result<MethodSummary> {
                let profiles = epoch_profiles(&epochs, &est, method, pf_config.reduction)?;
                let mut per_seed = Vec::with_capacity(settings.n_seeds);
                for s in 0..settings.n_seeds {
                    let track = run_filter(&profiles, pf_config, Prior::Uniform, settings.seed.wrapping_add(s as u64))?;
                    let errs: Vec<f64> = track
                        .iter()
                        .filter_map(|p| truth.bearing_at(p.timestamp).map(|b| wrap_deg(p.psi_pf.to_degrees() - b)))
                        .collect();
                    per_seed.push(rmse_circular(&errs)?);
                }
                let (lo, hi) = if per_seed.len() >= 2 { ci95(&per_seed)? } else { (per_seed[0], per_seed[0]) };
                Ok(MethodSummary {
                    rmse_mean: mean(&per_seed),
                    rmse_ci_lo: lo,
                    rmse_ci_hi: hi,
                    rmse_per_seed: per_seed,
                })
            };
            Ok(ThresholdPoint {
                gamma,
                pct_missed: if total == 0 { 0.0 } else { 100.0 * missed as f64 / total as f64 },
                proposed: summarize(Method::Proposed)?,
                baseline: summarize(Method::Baseline)?,
            })
        })
        .collect()
}

/// Synthetic walk around the array, logged the way the receivers would.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub duration_s: f64,
    pub rate_hz: f64,
    pub n_antennas: usize,
    /// Efficiency per advertising channel 37, 38, 39.
    pub channel_pc: [f64; 3],
    pub sigma: f64,
    /// Source power at the reference distance (dBm).
    pub alpha_ref: f64,
    pub ref_distance_m: f64,
    pub path_loss_exponent: f64,
    pub start_bearing_deg: f64,
    /// Mean bearing rate (deg/s).
    pub bearing_rate_deg_s: f64,
    pub truth_rate_hz: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            duration_s: 300.0,
            rate_hz: DEFAULT_RATE_HZ,
            n_antennas: 4,
            channel_pc: [0.8, 0.9, 0.92],
            sigma: 2.0,
            alpha_ref: -70.0,
            ref_distance_m: 10.0,
            path_loss_exponent: 2.0,
            start_bearing_deg: -150.0,
            bearing_rate_deg_s: 1.0,
            truth_rate_hz: 1.0,
        }
    }
}

impl WalkConfig {
    /// Source bearing (deg) and distance (m) at time `t`.
    pub fn trajectory(&self, t: f64) -> (f64, f64) {
        let frac = t / self.duration_s.max(1e-9);
        let bearing =
            self.start_bearing_deg + self.bearing_rate_deg_s * t + 15.0 * (std::f64::consts::TAU * frac * 3.0).sin();
        let distance = self.ref_distance_m * (1.0 + 0.5 * (std::f64::consts::TAU * frac * 2.0).sin());
        (wrap_deg(bearing), distance)
    }

    pub fn alpha_at(&self, distance_m: f64) -> f64 {
        self.alpha_ref - 10.0 * self.path_loss_exponent * (distance_m / self.ref_distance_m).log10()
    }

    /// Array of `n_antennas × 3` sensors; antenna `a` is the synthetic pattern rotated by `a·360°/n`.
    pub fn array(&self, gamma: f64) -> Result<ArrayConfig<f64>> {
        let base = synth_pattern(SYNTH_MAIN_DB, SYNTH_SIDE_DB, SYNTH_BACK_DB, SYNTH_ORDER)?;
        let mut patterns = Vec::new();
        let mut pcs = Vec::new();
        for a in 0..self.n_antennas {
            let rotated = base.rotate(std::f64::consts::TAU * a as f64 / self.n_antennas as f64)?;
            for (c, &ch) in ADV_CHANNELS.iter().enumerate() {
                patterns.push(rotated.clone().with_id(sensor_id(&format!("A{a}"), ch)));
                pcs.push(self.channel_pc[c]);
            }
        }
        let n = patterns.len();
        ArrayConfig::new(patterns, vec![self.sigma; n], gamma, pcs)
    }
}

/// Generate a log (only packets that pass the efficiency coin and the
/// hardware floor are recorded), its ground truth, and the generating array.
pub fn synthetic_walk(cfg: &WalkConfig, seed: u64) -> Result<(RssiLog, GroundTruth, ArrayConfig<f64>)> {
    if !(cfg.duration_s > 0.0 && cfg.rate_hz > 0.0 && cfg.truth_rate_hz > 0.0) || cfg.n_antennas == 0 {
        return Err(Error::InvalidParameter("walk duration, rates and antenna count must be positive".into()));
    }
    let array = cfg.array(HARDWARE_FLOOR_DBM)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_packets = (cfg.duration_s * cfg.rate_hz).floor() as usize;
    let mut records = Vec::new();
    for k in 0..n_packets {
        let t_adv = k as f64 / cfg.rate_hz;
        for (c, &ch) in ADV_CHANNELS.iter().enumerate() {
            // channels hop within one advertising event
            let t = t_adv + 0.002 * c as f64;
            let (bearing, distance) = cfg.trajectory(t);
            let alpha = cfg.alpha_at(distance);
            for a in 0..cfg.n_antennas {
                let m = a * ADV_CHANNELS.len() + c;
                if rng.random::<f64>() >= array.pc(m) {
                    continue;
                }
                let e: f64 = rng.sample(StandardNormal);
                let y = alpha + array.gain(m, bearing.to_radians())? + cfg.sigma * e;
                if y >= HARDWARE_FLOOR_DBM {
                    records.push(RssiRecord {
                        timestamp_s: t,
                        antenna_id: format!("A{a}"),
                        channel: ch,
                        rssi_dbm: (y * 100.0).round() / 100.0,
                    });
                }
            }
        }
    }
    let n_truth = (cfg.duration_s * cfg.truth_rate_hz).floor() as usize + 1;
    let truth = (0..n_truth)
        .map(|k| {
            let t = k as f64 / cfg.truth_rate_hz;
            let (bearing_deg, distance_m) = cfg.trajectory(t);
            TruthRecord { timestamp_s: t, bearing_deg, distance_m }
        })
        .collect();
    Ok((RssiLog { records }, GroundTruth { records: truth }, array))
}

/// Sensor ids of an array, in order.
pub fn array_sensor_ids(patterns: &[SensorPattern<f64>]) -> Vec<String> {
    patterns.iter().map(|p| p.id().to_string()).collect()
}
