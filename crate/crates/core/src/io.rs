//! CSV readers and writers. Every file carries a fixed header; angles are
//! degrees at this boundary.

use std::collections::HashMap;
use std::io::{Read, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::angle::wrap_deg;
use crate::detection::{Observation, Outcome};
use crate::error::{Error, Result};
use crate::estimator::{BearingProfile, Estimate, Method};
use crate::field_data::ThresholdPoint;
use crate::likelihood::LikelihoodGrid;
use crate::patterns::{ArrayConfig, FitResidual, SensorPattern};
use crate::sim_harness::{Aggregate, PsiSummary, Record};
use crate::tracker::TrackPoint;

pub const PATTERN_HEADER: [&str; 4] = ["sensor_id", "k", "re", "im"];
pub const CALIBRATION_HEADER: [&str; 5] = ["sensor_id", "angle_deg", "mean_dbm", "var_db2", "n_samples"];
pub const OBSERVATION_HEADER: [&str; 4] = ["epoch_id", "sensor_id", "detected", "rssi_dbm"];
pub const GRID_HEADER: [&str; 3] = ["psi_deg", "alpha_dbm", "cost"];
pub const PROFILE_HEADER: [&str; 3] = ["psi_deg", "min_cost_over_alpha", "argmin_alpha_dbm"];
pub const ESTIMATE_HEADER: [&str; 6] = ["epoch_id", "method", "psi_deg", "alpha_dbm", "cost", "degenerate"];
pub const TRACK_HEADER: [&str; 6] =
    ["timestamp", "psi_pf_deg", "psi_ml_deg", "alpha_hat_dbm", "n_missed", "track_loss"];
pub const TRACK_ERROR_COLUMNS: [&str; 3] = ["truth_deg", "err_pf_deg", "err_ml_deg"];
pub const RESIDUAL_HEADER: [&str; 5] = ["sensor_id", "order", "n_angles", "rms_db", "weighted_rms"];
pub const RESULTS_HEADER: [&str; 13] = [
    "sweep",
    "psi_true_deg",
    "alpha_dbm",
    "pc",
    "batch",
    "run",
    "method",
    "psi_hat_deg",
    "alpha_hat_dbm",
    "err_deg",
    "err_alpha_db",
    "n_missed",
    "degenerate",
];
pub const AGGREGATE_HEADER: [&str; 17] = [
    "sweep",
    "alpha_dbm",
    "pc",
    "batch",
    "method",
    "n_records",
    "doa_rmse_mean",
    "doa_rmse_std",
    "doa_rmse_ci_lo",
    "doa_rmse_ci_hi",
    "alpha_rmse",
    "alpha_rmse_ci_lo",
    "alpha_rmse_ci_hi",
    "miss_mean",
    "miss_min",
    "miss_max",
    "n_degenerate",
];
pub const PER_PSI_HEADER: [&str; 10] =
    ["sweep", "alpha_dbm", "pc", "batch", "method", "psi_true_deg", "doa_rmse", "ci_lo", "ci_hi", "mean_psi_hat_err"];
pub const THRESHOLD_HEADER: [&str; 8] = [
    "gamma_dbm",
    "pct_missed",
    "proposed_rmse_deg",
    "proposed_ci_lo",
    "proposed_ci_hi",
    "baseline_rmse_deg",
    "baseline_ci_lo",
    "baseline_ci_hi",
];

/// Serde adapter writing booleans as `0`/`1`.
pub mod flag {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match String::deserialize(d)?.trim() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(de::Error::custom(format!("expected 0 or 1, found '{other}'"))),
        }
    }
}

pub(crate) fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), line, msg: msg.into() }
}

/// Deserialize rows after checking the header exactly. Data row `k` is reported as line `k + 2`.
pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(reader: R, path: &str, header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let got: Vec<String> =
        rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.iter().map(str::to_string).collect();
    if got != header {
        return Err(parse_err(path, 1, format!("expected header {}, found {}", header.join(","), got.join(","))));
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.deserialize().enumerate() {
        out.push(rec.map_err(|e| parse_err(path, k + 2, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_csv<T: Serialize, W: Write>(writer: W, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PatternRow<'a> {
    sensor_id: &'a str,
    k: i64,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct PatternRowOwned {
    sensor_id: String,
    k: i64,
    re: f64,
    im: f64,
}

/// Sensors appear in first-seen order; `K` is the largest `|k|` of each
/// sensor and unlisted coefficients are zero.
pub fn read_patterns<R: Read>(reader: R, path: &str) -> Result<Vec<SensorPattern<f64>>> {
    let rows: Vec<PatternRowOwned> = read_csv(reader, path, &PATTERN_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<(usize, i64, Complex<f64>)>> = HashMap::new();
    for (n, r) in rows.iter().enumerate() {
        if !by_id.contains_key(&r.sensor_id) {
            order.push(r.sensor_id.clone());
        }
        by_id.entry(r.sensor_id.clone()).or_default().push((n + 2, r.k, Complex::new(r.re, r.im)));
    }
    order
        .into_iter()
        .map(|id| {
            let entries = &by_id[&id];
            let kmax = entries.iter().map(|e| e.1.unsigned_abs() as usize).max().unwrap_or(0);
            let mut coeffs = vec![Complex::new(0.0, 0.0); 2 * kmax + 1];
            let mut seen = vec![false; 2 * kmax + 1];
            for &(line, k, c) in entries {
                let idx = (k + kmax as i64) as usize;
                if seen[idx] {
                    return Err(parse_err(path, line, format!("duplicate coefficient k={k} for sensor {id}")));
                }
                seen[idx] = true;
                coeffs[idx] = c;
            }
            SensorPattern::new(id, coeffs)
        })
        .collect()
}

pub fn write_patterns<W: Write>(writer: W, patterns: &[SensorPattern<f64>]) -> Result<()> {
    let mut rows = Vec::new();
    for p in patterns {
        let k = p.order() as i64;
        for kk in -k..=k {
            let c = p.coeff(kk as isize);
            rows.push(PatternRow { sensor_id: p.id(), k: kk, re: c.re, im: c.im });
        }
    }
    write_csv(writer, &rows, &PATTERN_HEADER)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub sensor_id: String,
    pub angle_deg: f64,
    pub mean_dbm: f64,
    pub var_db2: f64,
    pub n_samples: usize,
}

pub fn read_calibration<R: Read>(reader: R, path: &str) -> Result<Vec<CalibrationRow>> {
    let rows: Vec<CalibrationRow> = read_csv(reader, path, &CALIBRATION_HEADER)?;
    for (k, r) in rows.iter().enumerate() {
        if !(r.angle_deg.is_finite() && r.mean_dbm.is_finite() && r.var_db2.is_finite()) {
            return Err(parse_err(path, k + 2, "non-finite value"));
        }
    }
    Ok(rows)
}

pub fn write_calibration<W: Write>(writer: W, rows: &[CalibrationRow]) -> Result<()> {
    write_csv(writer, rows, &CALIBRATION_HEADER)
}

/// Rows grouped by sensor, in first-seen order.
pub fn group_calibration(rows: &[CalibrationRow]) -> Vec<(String, Vec<&CalibrationRow>)> {
    let mut out: Vec<(String, Vec<&CalibrationRow>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(id, _)| *id == r.sensor_id) {
            Some((_, v)) => v.push(r),
            None => out.push((r.sensor_id.clone(), vec![r])),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow<'a> {
    pub sensor_id: &'a str,
    pub order: usize,
    pub n_angles: usize,
    pub rms_db: f64,
    pub weighted_rms: f64,
}

impl<'a> ResidualRow<'a> {
    pub fn new(pattern: &'a SensorPattern<f64>, r: &FitResidual<f64>) -> Self {
        Self {
            sensor_id: pattern.id(),
            order: pattern.order(),
            n_angles: r.n_angles,
            rms_db: r.rms_db,
            weighted_rms: r.weighted_rms,
        }
    }
}

pub fn write_residuals<W: Write>(writer: W, rows: &[ResidualRow<'_>]) -> Result<()> {
    write_csv(writer, rows, &RESIDUAL_HEADER)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ObservationRow {
    epoch_id: u64,
    sensor_id: String,
    #[serde(with = "flag")]
    detected: bool,
    rssi_dbm: Option<f64>,
}

/// Observations grouped by epoch id, epochs in first-seen order.
pub fn read_observations<R: Read>(
    reader: R,
    path: &str,
    array: &ArrayConfig<f64>,
) -> Result<Vec<(u64, Vec<Observation<f64>>)>> {
    let rows: Vec<ObservationRow> = read_csv(reader, path, &OBSERVATION_HEADER)?;
    let mut out: Vec<(u64, Vec<Observation<f64>>)> = Vec::new();
    let mut slot: HashMap<u64, usize> = HashMap::new();
    for (k, r) in rows.into_iter().enumerate() {
        let line = k + 2;
        let m = array
            .index_of(&r.sensor_id)
            .ok_or_else(|| parse_err(path, line, format!("unknown sensor '{}'", r.sensor_id)))?;
        let obs = match (r.detected, r.rssi_dbm) {
            (true, Some(y)) if y.is_finite() => {
                if y < array.gamma() {
                    return Err(parse_err(
                        path,
                        line,
                        format!("detected value {y} lies below the threshold {}", array.gamma()),
                    ));
                }
                Observation::detected(m, y)
            }
            (true, _) => return Err(parse_err(path, line, "detection without a finite rssi_dbm")),
            (false, None) => Observation::missed(m),
            (false, Some(_)) => return Err(parse_err(path, line, "missed detection must leave rssi_dbm empty")),
        };
        let s = *slot.entry(r.epoch_id).or_insert_with(|| {
            out.push((r.epoch_id, Vec::new()));
            out.len() - 1
        });
        out[s].1.push(obs);
    }
    Ok(out)
}

pub fn write_observations<W: Write>(
    writer: W,
    epochs: &[(u64, Vec<Observation<f64>>)],
    array: &ArrayConfig<f64>,
) -> Result<()> {
    let mut rows = Vec::new();
    for (id, obs) in epochs {
        for o in obs {
            let sensor_id = array
                .patterns()
                .get(o.sensor)
                .ok_or_else(|| Error::InvalidParameter(format!("sensor index {} out of range", o.sensor)))?
                .id()
                .to_string();
            let (detected, rssi_dbm) = match o.outcome {
                Outcome::Detected(y) => (true, Some(y)),
                Outcome::Missed => (false, None),
            };
            rows.push(ObservationRow { epoch_id: *id, sensor_id, detected, rssi_dbm });
        }
    }
    write_csv(writer, &rows, &OBSERVATION_HEADER)
}

/// Long format, ψ-major.
pub fn write_grid<W: Write>(writer: W, grid: &LikelihoodGrid<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(GRID_HEADER)?;
    for (i, &psi) in grid.psi_grid().iter().enumerate() {
        let psi_deg = wrap_deg(psi.to_degrees());
        for (j, &alpha) in grid.alpha_grid().iter().enumerate() {
            w.serialize((psi_deg, alpha, grid.cost(i, j)))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_profile<W: Write>(writer: W, profile: &BearingProfile<f64>) -> Result<()> {
    let rows: Vec<(f64, f64, f64)> = (0..profile.len())
        .map(|i| (wrap_deg(profile.psi[i].to_degrees()), profile.cost[i], profile.alpha_at_min[i]))
        .collect();
    write_csv(writer, &rows, &PROFILE_HEADER)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub epoch_id: u64,
    pub method: Method,
    pub psi_deg: f64,
    pub alpha_dbm: f64,
    pub cost: f64,
    #[serde(with = "flag")]
    pub degenerate: bool,
}

impl EstimateRow {
    pub fn new(epoch_id: u64, e: &Estimate<f64>) -> Self {
        Self {
            epoch_id,
            method: e.method,
            psi_deg: wrap_deg(e.psi_hat.to_degrees()),
            alpha_dbm: e.alpha_hat,
            cost: e.cost_at_min,
            degenerate: e.degenerate,
        }
    }
}

pub fn write_estimates<W: Write>(writer: W, rows: &[EstimateRow]) -> Result<()> {
    write_csv(writer, rows, &ESTIMATE_HEADER)
}

pub fn read_estimates<R: Read>(reader: R, path: &str) -> Result<Vec<EstimateRow>> {
    read_csv(reader, path, &ESTIMATE_HEADER)
}

/// Track rows; with `truth` (degrees per point) three error columns are appended.
pub fn write_track<W: Write>(writer: W, track: &[TrackPoint<f64>], truth: Option<&[Option<f64>]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = TRACK_HEADER.to_vec();
    if truth.is_some() {
        header.extend(TRACK_ERROR_COLUMNS);
    }
    w.write_record(&header)?;
    for (n, p) in track.iter().enumerate() {
        let pf = wrap_deg(p.psi_pf.to_degrees());
        let ml = wrap_deg(p.psi_ml.to_degrees());
        let mut rec = vec![
            p.timestamp.to_string(),
            pf.to_string(),
            ml.to_string(),
            p.alpha_hat.to_string(),
            p.n_missed.to_string(),
            u8::from(p.track_loss).to_string(),
        ];
        if let Some(t) = truth {
            match t.get(n).copied().flatten() {
                Some(b) => {
                    rec.push(b.to_string());
                    rec.push(wrap_deg(pf - b).to_string());
                    rec.push(wrap_deg(ml - b).to_string());
                }
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records<W: Write>(writer: W, records: &[Record]) -> Result<()> {
    write_csv(writer, records, &RESULTS_HEADER)
}

pub fn read_records<R: Read>(reader: R, path: &str) -> Result<Vec<Record>> {
    read_csv(reader, path, &RESULTS_HEADER)
}

pub fn write_aggregates<W: Write>(writer: W, rows: &[Aggregate]) -> Result<()> {
    write_csv(writer, rows, &AGGREGATE_HEADER)
}

pub fn read_aggregates<R: Read>(reader: R, path: &str) -> Result<Vec<Aggregate>> {
    read_csv(reader, path, &AGGREGATE_HEADER)
}

pub fn write_per_psi<W: Write>(writer: W, rows: &[PsiSummary]) -> Result<()> {
    write_csv(writer, rows, &PER_PSI_HEADER)
}

pub fn write_threshold_summary<W: Write>(writer: W, points: &[ThresholdPoint]) -> Result<()> {
    let rows: Vec<[f64; 8]> = points
        .iter()
        .map(|p| {
            [
                p.gamma,
                p.pct_missed,
                p.proposed.rmse_mean,
                p.proposed.rmse_ci_lo,
                p.proposed.rmse_ci_hi,
                p.baseline.rmse_mean,
                p.baseline.rmse_ci_lo,
                p.baseline.rmse_ci_hi,
            ]
        })
        .collect();
    write_csv(writer, &rows, &THRESHOLD_HEADER)
}
