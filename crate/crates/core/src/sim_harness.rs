//! Monte Carlo sweeps over source power, detection efficiency and batch
//! size, with circular error metrics.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::wrap_deg;
use crate::detection::{simulate_batch, SourceState};
use crate::error::{Error, Result};
use crate::estimator::{Estimator, Method};
use crate::likelihood::Grids;
use crate::patterns::{make_uca, synth_pattern, ArrayConfig, SYNTH_BACK_DB, SYNTH_MAIN_DB, SYNTH_ORDER, SYNTH_SIDE_DB};

const Z95: f64 = 1.96;

/// Signed circular difference `psi_hat − psi_true` in degrees, in (−180, 180].
pub fn circular_error(psi_hat_deg: f64, psi_true_deg: f64) -> f64 {
    wrap_deg(psi_hat_deg - psi_true_deg)
}

/// Root mean square of wrapped errors (degrees).
pub fn rmse_circular(errors_deg: &[f64]) -> Result<f64> {
    if errors_deg.is_empty() {
        return Err(Error::InvalidParameter("no errors to average".into()));
    }
    let ss: f64 = errors_deg
        .iter()
        .map(|&e| {
            let w = wrap_deg(e);
            w * w
        })
        .sum();
    Ok((ss / errors_deg.len() as f64).sqrt())
}

/// Empirical CDF of absolute errors: `(value, fraction ≤ value)` at each distinct value.
pub fn error_cdf(errors: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return Err(Error::InvalidParameter("no errors for a CDF".into()));
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, &v) in abs.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    Ok(out)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two samples.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Normal-approximation 95% interval for the mean: `mean ± 1.96 s/√n`.
pub fn ci95(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("a confidence interval needs at least two samples".into()));
    }
    let m = mean(samples);
    let half = Z95 * std_dev(samples) / (samples.len() as f64).sqrt();
    Ok((m - half, m + half))
}

/// Interval for an RMSE: the mean-square interval, square-rooted (lower end clamped at 0).
pub fn rmse_ci95(errors_deg: &[f64]) -> Result<(f64, f64)> {
    let sq: Vec<f64> = errors_deg.iter().map(|e| e * e).collect();
    let (lo, hi) = ci95(&sq)?;
    Ok((lo.max(0.0).sqrt(), hi.max(0.0).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Alpha,
    Pc,
    Batch,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Alpha => "alpha",
            SweepKind::Pc => "pc",
            SweepKind::Batch => "batch",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepKind::Alpha),
            "pc" => Ok(SweepKind::Pc),
            "batch" => Ok(SweepKind::Batch),
            _ => Err(Error::InvalidParameter(format!("unknown sweep '{s}'"))),
        }
    }
}

/// Four rotated copies of the default synthetic pattern.
pub fn default_array(sigma: f64, gamma: f64, pc: f64) -> Result<ArrayConfig<f64>> {
    let base = synth_pattern(SYNTH_MAIN_DB, SYNTH_SIDE_DB, SYNTH_BACK_DB, SYNTH_ORDER)?;
    ArrayConfig::uniform(make_uca(&base, 4)?, sigma, gamma, pc)
}

/// ψ_true values −180°, −179°, ..., 179°.
pub fn default_psi_values() -> Vec<f64> {
    (-180..180).map(f64::from).collect()
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub array: ArrayConfig<f64>,
    pub grids: Grids<f64>,
    pub alpha_levels: Vec<f64>,
    pub psi_values_deg: Vec<f64>,
    pub mc_runs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// UCA of four synthetic patterns, σ = 2 dB, γ = −95 dBm, p_c = 1,
    /// α ∈ {−70, −75, −80, −85}, 50 runs, batch 1.
    pub fn standard(seed: u64) -> Result<Self> {
        Ok(Self {
            array: default_array(2.0, -95.0, 1.0)?,
            grids: Grids::standard(),
            alpha_levels: vec![-70.0, -75.0, -80.0, -85.0],
            psi_values_deg: default_psi_values(),
            mc_runs: 50,
            batch_size: 1,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_runs == 0 {
            return Err(Error::InvalidParameter("mc_runs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        if self.alpha_levels.is_empty() || self.psi_values_deg.is_empty() {
            return Err(Error::InvalidParameter("alpha and psi lists must be non-empty".into()));
        }
        if self.alpha_levels.iter().chain(&self.psi_values_deg).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("scenario"));
        }
        Ok(())
    }
}

/// One (ψ_true, α, run, method) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sweep: SweepKind,
    pub psi_true_deg: f64,
    pub alpha_dbm: f64,
    pub pc: f64,
    pub batch: usize,
    pub run: usize,
    pub method: Method,
    pub psi_hat_deg: f64,
    pub alpha_hat_dbm: f64,
    pub err_deg: f64,
    pub err_alpha_db: f64,
    pub n_missed: usize,
    #[serde(with = "crate::io::flag")]
    pub degenerate: bool,
}

/// Summary of one (α, p_c, batch, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sweep: SweepKind,
    pub alpha_dbm: f64,
    pub pc: f64,
    pub batch: usize,
    pub method: Method,
    pub n_records: usize,
    /// Mean over ψ_true of the per-ψ DOA RMSE.
    pub doa_rmse_mean: f64,
    /// Standard deviation over ψ_true of the per-ψ DOA RMSE.
    pub doa_rmse_std: f64,
    /// Normal-approximation interval of the pooled DOA RMSE.
    pub doa_rmse_ci_lo: f64,
    pub doa_rmse_ci_hi: f64,
    pub alpha_rmse: f64,
    pub alpha_rmse_ci_lo: f64,
    pub alpha_rmse_ci_hi: f64,
    pub miss_mean: f64,
    pub miss_min: usize,
    pub miss_max: usize,
    pub n_degenerate: usize,
}

/// Per-ψ_true statistics of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSummary {
    pub sweep: SweepKind,
    pub alpha_dbm: f64,
    pub pc: f64,
    pub batch: usize,
    pub method: Method,
    pub psi_true_deg: f64,
    pub doa_rmse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_psi_hat_err: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    pub per_psi: Vec<PsiSummary>,
}

impl SweepResult {
    pub fn aggregate(&self, alpha: f64, pc: f64, batch: usize, method: Method) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.alpha_dbm == alpha && a.pc == pc && a.batch == batch && a.method == method)
    }

    pub fn extend(&mut self, other: SweepResult) {
        self.records.extend(other.records);
        self.aggregates.extend(other.aggregates);
        self.per_psi.extend(other.per_psi);
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for one Monte Carlo task. Depends only on the seed, ψ_true, α and
/// the run index, so the same draw is reused across p_c and batch sweeps.
pub fn task_rng(seed: u64, psi_true_deg: f64, alpha: f64, run: usize) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for word in [psi_true_deg.to_bits(), alpha.to_bits(), run as u64] {
        h = splitmix64(h ^ word);
    }
    ChaCha8Rng::seed_from_u64(h)
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    alpha: f64,
    pc: f64,
    batch: usize,
}

fn run_cells(cfg: &ScenarioConfig, sweep: SweepKind, cells: &[Cell]) -> Result<SweepResult> {
    cfg.validate()?;
    let base = Estimator::new(cfg.array.clone(), cfg.grids.clone())?;
    let mut result = SweepResult::default();
    for cell in cells {
        if !(0.0..=1.0).contains(&cell.pc) {
            return Err(Error::InvalidParameter(format!("pc {} outside [0, 1]", cell.pc)));
        }
        let est = base.with_array(cfg.array.with_pc(cell.pc)?)?;
        let tasks: Vec<(usize, usize)> =
            (0..cfg.psi_values_deg.len()).flat_map(|p| (0..cfg.mc_runs).map(move |r| (p, r))).collect();
        let recs: Result<Vec<[Record; 2]>> = tasks
            .par_iter()
            .map(|&(p, run)| simulate_task(&est, sweep, cell, cfg.psi_values_deg[p], run, cfg.seed))
            .collect();
        let recs: Vec<Record> = recs?.into_iter().flatten().collect();
        summarize_cell(&recs, sweep, cell, cfg, &mut result)?;
        result.records.extend(recs);
    }
    Ok(result)
}

fn simulate_task(
    est: &Estimator<f64>,
    sweep: SweepKind,
    cell: &Cell,
    psi_true: f64,
    run: usize,
    seed: u64,
) -> Result<[Record; 2]> {
    let mut rng = task_rng(seed, psi_true, cell.alpha, run);
    let state = SourceState::from_degrees(psi_true, cell.alpha)?;
    let obs = simulate_batch(&state, est.array(), cell.batch, &mut rng)?;
    let summary = est.summarize(&obs)?;
    let n_missed = summary.n_missed();
    let rec = |method: Method| -> Result<Record> {
        let e = est.estimate_summary(&summary, method)?;
        let psi_hat_deg = e.psi_hat.to_degrees();
        Ok(Record {
            sweep,
            psi_true_deg: psi_true,
            alpha_dbm: cell.alpha,
            pc: cell.pc,
            batch: cell.batch,
            run,
            method,
            psi_hat_deg,
            alpha_hat_dbm: e.alpha_hat,
            err_deg: circular_error(psi_hat_deg, psi_true),
            err_alpha_db: e.alpha_hat - cell.alpha,
            n_missed,
            degenerate: e.degenerate,
        })
    };
    Ok([rec(Method::Proposed)?, rec(Method::Baseline)?])
}

fn summarize_cell(
    recs: &[Record],
    sweep: SweepKind,
    cell: &Cell,
    cfg: &ScenarioConfig,
    out: &mut SweepResult,
) -> Result<()> {
    for method in Method::BOTH {
        let mine: Vec<&Record> = recs.iter().filter(|r| r.method == method).collect();
        let mut per_psi_rmse = Vec::with_capacity(cfg.psi_values_deg.len());
        for &psi in &cfg.psi_values_deg {
            let errs: Vec<f64> = mine.iter().filter(|r| r.psi_true_deg == psi).map(|r| r.err_deg).collect();
            let rmse = rmse_circular(&errs)?;
            let (ci_lo, ci_hi) = if errs.len() >= 2 { rmse_ci95(&errs)? } else { (rmse, rmse) };
            per_psi_rmse.push(rmse);
            out.per_psi.push(PsiSummary {
                sweep,
                alpha_dbm: cell.alpha,
                pc: cell.pc,
                batch: cell.batch,
                method,
                psi_true_deg: psi,
                doa_rmse: rmse,
                ci_lo,
                ci_hi,
                mean_psi_hat_err: mean(&errs),
            });
        }
        let errs: Vec<f64> = mine.iter().map(|r| r.err_deg).collect();
        let aerrs: Vec<f64> = mine.iter().map(|r| r.err_alpha_db).collect();
        let misses: Vec<usize> = mine.iter().map(|r| r.n_missed).collect();
        let ci = |e: &[f64]| if e.len() >= 2 { rmse_ci95(e) } else { Ok((f64::NAN, f64::NAN)) };
        let (lo, hi) = ci(&errs)?;
        let alpha_rmse = (aerrs.iter().map(|e| e * e).sum::<f64>() / aerrs.len() as f64).sqrt();
        let (alo, ahi) = ci(&aerrs)?;
        out.aggregates.push(Aggregate {
            sweep,
            alpha_dbm: cell.alpha,
            pc: cell.pc,
            batch: cell.batch,
            method,
            n_records: mine.len(),
            doa_rmse_mean: mean(&per_psi_rmse),
            doa_rmse_std: std_dev(&per_psi_rmse),
            doa_rmse_ci_lo: lo,
            doa_rmse_ci_hi: hi,
            alpha_rmse,
            alpha_rmse_ci_lo: alo,
            alpha_rmse_ci_hi: ahi,
            miss_mean: misses.iter().sum::<usize>() as f64 / misses.len() as f64,
            miss_min: misses.iter().copied().min().unwrap_or(0),
            miss_max: misses.iter().copied().max().unwrap_or(0),
            n_degenerate: mine.iter().filter(|r| r.degenerate).count(),
        });
    }
    Ok(())
}

/// Every α level at the configured p_c (taken from sensor 0) and batch size.
pub fn run_alpha_sweep(cfg: &ScenarioConfig) -> Result<SweepResult> {
    let pc = cfg.array.pc(0);
    let cells: Vec<Cell> = cfg.alpha_levels.iter().map(|&alpha| Cell { alpha, pc, batch: cfg.batch_size }).collect();
    run_cells(cfg, SweepKind::Alpha, &cells)
}

/// Every α level at every p_c; the estimator is told the true p_c.
pub fn run_pc_sweep(cfg: &ScenarioConfig, pc_values: &[f64]) -> Result<SweepResult> {
    let cells: Vec<Cell> = cfg
        .alpha_levels
        .iter()
        .flat_map(|&alpha| pc_values.iter().map(move |&pc| Cell { alpha, pc, batch: cfg.batch_size }))
        .collect();
    run_cells(cfg, SweepKind::Pc, &cells)
}

/// Every α level at every batch size, at a fixed p_c.
pub fn run_batch_sweep(cfg: &ScenarioConfig, batch_sizes: &[usize], pc: f64) -> Result<SweepResult> {
    if batch_sizes.contains(&0) {
        return Err(Error::InvalidParameter("batch sizes must be at least 1".into()));
    }
    let cells: Vec<Cell> = cfg
        .alpha_levels
        .iter()
        .flat_map(|&alpha| batch_sizes.iter().map(move |&batch| Cell { alpha, pc, batch }))
        .collect();
    run_cells(cfg, SweepKind::Batch, &cells)
}
