//! Negative log-likelihood of thresholded observations and its evaluation
//! on a (ψ, α) grid.
//!
//! Three cost functions share the same dropped constants (`ln σ√(2π)` per
//! detection), so only cost differences are meaningful:
//!
//! * [`CostKind::Full`]: truncated-normal density of every detection times
//!   its detection probability, times the miss probability of every miss.
//! * [`CostKind::Simplified`]: the same function after the truncation
//!   normalizer cancels against `p_α`. Differs from `Full` only by rounding.
//! * [`CostKind::Baseline`]: least squares over detections only.
//!
//! Grid evaluation groups the observations per sensor (count, mean and
//! centred sum of squares of the detections, count of misses), so the cost
//! of a node does not grow with the batch size.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{validate_observations, Observation, Outcome, SourceState};
use crate::error::{Error, Result};
use crate::patterns::ArrayConfig;
use crate::scalar::{cost_add, Scalar};
use crate::special::{ln_add_exp, ln_normal_cdf, ln_normal_pdf, ln_normal_sf, ln_one_minus_scaled_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Full,
    Simplified,
    Baseline,
}

impl CostKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CostKind::Full => "full",
            CostKind::Simplified => "simplified",
            CostKind::Baseline => "baseline",
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CostKind::Full),
            "simplified" | "proposed" => Ok(CostKind::Simplified),
            "baseline" => Ok(CostKind::Baseline),
            _ => Err(Error::InvalidParameter(format!("unknown cost kind '{s}'"))),
        }
    }
}

// ---------------------------------------------------------------------------
// per-observation terms

fn sq_term<T: Scalar>(y: T, mu: T, sigma: T) -> T {
    let r = y - mu;
    r * r / (T::lit(2.0) * sigma * sigma)
}

/// `ln p_D = ln p_c + ln(1 − Φ((γ − μ)/σ))`.
fn ln_pd<T: Scalar>(mu: T, sigma: T, gamma: T, pc: T) -> T {
    pc.ln() + ln_normal_sf((gamma - mu) / sigma)
}

/// `−ln(1 − p_D)` built from `p_D` itself.
fn neg_ln_one_minus_pd<T: Scalar>(mu: T, sigma: T, gamma: T, pc: T) -> T {
    if pc <= T::zero() {
        return T::zero();
    }
    let z = (gamma - mu) / sigma;
    let pd = ln_pd(mu, sigma, gamma, pc).exp();
    if pd < T::lit(0.5) {
        -(-pd).ln_1p()
    } else {
        // 1 − p_D = (1 − p_c) + p_c·Φ(z)
        let tail = pc.ln() + ln_normal_cdf(z);
        if pc >= T::one() {
            -tail
        } else {
            -ln_add_exp((T::one() - pc).ln(), tail)
        }
    }
}

fn full_detected<T: Scalar>(y: T, mu: T, sigma: T, gamma: T, pc: T) -> T {
    if pc <= T::zero() {
        return T::impossible();
    }
    let ln_trunc = ln_normal_sf((gamma - mu) / sigma);
    cost_add(sq_term(y, mu, sigma), ln_trunc - ln_pd(mu, sigma, gamma, pc))
}

fn simplified_detected<T: Scalar>(y: T, mu: T, sigma: T, pc: T) -> T {
    cost_add(sq_term(y, mu, sigma), -pc.ln())
}

fn simplified_missed<T: Scalar>(mu: T, sigma: T, gamma: T, pc: T) -> T {
    -ln_one_minus_scaled_cdf(pc, (mu - gamma) / sigma)
}

fn gains_at<T: Scalar>(array: &ArrayConfig<T>, psi: T) -> Result<Vec<T>> {
    (0..array.len()).map(|m| array.gain(m, psi)).collect()
}

fn scalar_cost<T: Scalar>(
    obs: &[Observation<T>],
    array: &ArrayConfig<T>,
    state: &SourceState<T>,
    kind: CostKind,
) -> Result<T> {
    validate_observations(obs, array)?;
    let gains = gains_at(array, state.psi())?;
    let gamma = array.gamma();
    let mut cost = T::zero();
    for o in obs {
        let m = o.sensor;
        let (mu, s, pc) = (state.alpha() + gains[m], array.sigma(m), array.pc(m));
        let term = match (kind, o.outcome) {
            (CostKind::Full, Outcome::Detected(y)) => full_detected(y, mu, s, gamma, pc),
            (CostKind::Full, Outcome::Missed) => neg_ln_one_minus_pd(mu, s, gamma, pc),
            (CostKind::Simplified, Outcome::Detected(y)) => simplified_detected(y, mu, s, pc),
            (CostKind::Simplified, Outcome::Missed) => simplified_missed(mu, s, gamma, pc),
            (CostKind::Baseline, Outcome::Detected(y)) => sq_term(y, mu, s),
            (CostKind::Baseline, Outcome::Missed) => T::zero(),
        };
        cost = cost_add(cost, term);
    }
    Ok(cost)
}

/// Full negative log-likelihood: truncated density and detection
/// probability for every detection, miss probability for every miss.
pub fn nll_full<T: Scalar>(obs: &[Observation<T>], array: &ArrayConfig<T>, state: &SourceState<T>) -> Result<T> {
    scalar_cost(obs, array, state, CostKind::Full)
}

/// `Σ_D [(Y − μ)²/(2σ²) − ln p_c] − Σ_MD ln(1 − p_c Φ((μ − γ)/σ))`.
pub fn nll_simplified<T: Scalar>(obs: &[Observation<T>], array: &ArrayConfig<T>, state: &SourceState<T>) -> Result<T> {
    scalar_cost(obs, array, state, CostKind::Simplified)
}

/// Least squares over detections; misses are ignored.
pub fn nll_baseline<T: Scalar>(obs: &[Observation<T>], array: &ArrayConfig<T>, state: &SourceState<T>) -> Result<T> {
    if !obs.iter().any(Observation::is_detected) {
        validate_observations(obs, array)?;
        return Err(Error::NoInformation);
    }
    scalar_cost(obs, array, state, CostKind::Baseline)
}

/// Cost of the given kind at one state.
pub fn nll<T: Scalar>(
    obs: &[Observation<T>],
    array: &ArrayConfig<T>,
    state: &SourceState<T>,
    kind: CostKind,
) -> Result<T> {
    match kind {
        CostKind::Baseline => nll_baseline(obs, array, state),
        _ => scalar_cost(obs, array, state, kind),
    }
}

/// ∂/∂α of [`nll_simplified`].
pub fn nll_simplified_dalpha<T: Scalar>(
    obs: &[Observation<T>],
    array: &ArrayConfig<T>,
    state: &SourceState<T>,
) -> Result<T> {
    validate_observations(obs, array)?;
    let gains = gains_at(array, state.psi())?;
    let gamma = array.gamma();
    let mut grad = T::zero();
    for o in obs {
        let m = o.sensor;
        let (mu, s, pc) = (state.alpha() + gains[m], array.sigma(m), array.pc(m));
        match o.outcome {
            Outcome::Detected(y) => grad -= (y - mu) / (s * s),
            Outcome::Missed => {
                if pc > T::zero() {
                    let u = (mu - gamma) / s;
                    // pc·φ(u) / (1 − pc·Φ(u)) in log space
                    let ratio = (pc.ln() + ln_normal_pdf(u) - ln_one_minus_scaled_cdf(pc, u)).exp();
                    grad += ratio / s;
                }
            }
        }
    }
    Ok(grad)
}

// ---------------------------------------------------------------------------
// grids

/// Search grids: bearings in radians, powers in dBm. Both strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids<T> {
    psi: Vec<T>,
    alpha: Vec<T>,
}

fn strictly_increasing<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

impl<T: Scalar> Grids<T> {
    pub fn new(psi: Vec<T>, alpha: Vec<T>) -> Result<Self> {
        if psi.is_empty() || alpha.is_empty() {
            return Err(Error::InvalidParameter("grids must be non-empty".into()));
        }
        if !strictly_increasing(&psi) || !strictly_increasing(&alpha) {
            return Err(Error::InvalidParameter("grids must be finite and strictly increasing".into()));
        }
        Ok(Self { psi, alpha })
    }

    /// `n_psi` bearings covering [0°, 360°) and α from `lo` to `hi` (inclusive) in `step`.
    pub fn uniform(n_psi: usize, alpha_lo: f64, alpha_hi: f64, alpha_step: f64) -> Result<Self> {
        if n_psi == 0 || !(alpha_step > 0.0) || !(alpha_hi >= alpha_lo) {
            return Err(Error::InvalidParameter(format!(
                "bad grid spec: {n_psi} bearings, alpha {alpha_lo}..{alpha_hi} step {alpha_step}"
            )));
        }
        let psi = (0..n_psi).map(|i| T::lit((360.0 * i as f64 / n_psi as f64).to_radians())).collect();
        let n_alpha = ((alpha_hi - alpha_lo) / alpha_step + 1e-9).floor() as usize + 1;
        let alpha = (0..n_alpha).map(|j| T::lit(alpha_lo + alpha_step * j as f64)).collect();
        Self::new(psi, alpha)
    }

    /// 1° bearings over [0°, 360°) and α from −100 to 0 dBm in 0.2 dB steps.
    pub fn standard() -> Self {
        let psi = (0..360).map(|i| T::lit((i as f64).to_radians())).collect();
        let alpha = (0..=500).map(|j| T::lit((2 * j as i64 - 1000) as f64 / 10.0)).collect();
        Self { psi, alpha }
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn n_psi(&self) -> usize {
        self.psi.len()
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha.len()
    }
}

/// Pattern gains of every sensor at every grid bearing, row-major (ψ, sensor).
#[derive(Debug, Clone)]
pub struct GainTable<T> {
    n_sensors: usize,
    gains: Vec<T>,
}

impl<T: Scalar> GainTable<T> {
    pub fn new(array: &ArrayConfig<T>, psi: &[T]) -> Result<Self> {
        let mut gains = Vec::with_capacity(psi.len() * array.len());
        for &p in psi {
            for m in 0..array.len() {
                gains.push(array.gain(m, p)?);
            }
        }
        Ok(Self { n_sensors: array.len(), gains })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.gains[i * self.n_sensors..(i + 1) * self.n_sensors]
    }

    pub fn n_psi(&self) -> usize {
        self.gains.len() / self.n_sensors.max(1)
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }
}

/// Detections and misses of one sensor, reduced to sufficient statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorStats<T> {
    pub n_det: usize,
    pub mean: T,
    /// Σ (Y − mean)² over the detections.
    pub ss: T,
    pub n_miss: usize,
}

/// Observations grouped per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsSummary<T> {
    sensors: Vec<SensorStats<T>>,
}

impl<T: Scalar> ObsSummary<T> {
    pub fn new(obs: &[Observation<T>], array: &ArrayConfig<T>) -> Result<Self> {
        validate_observations(obs, array)?;
        let mut sensors = vec![SensorStats { n_det: 0, mean: T::zero(), ss: T::zero(), n_miss: 0 }; array.len()];
        for o in obs {
            let s = &mut sensors[o.sensor];
            match o.outcome {
                Outcome::Detected(y) => {
                    s.n_det += 1;
                    let d = y - s.mean;
                    s.mean += d / T::from_usize(s.n_det).unwrap_or_else(T::one);
                    s.ss += d * (y - s.mean);
                }
                Outcome::Missed => s.n_miss += 1,
            }
        }
        Ok(Self { sensors })
    }

    pub fn sensors(&self) -> &[SensorStats<T>] {
        &self.sensors
    }

    pub fn n_detected(&self) -> usize {
        self.sensors.iter().map(|s| s.n_det).sum()
    }

    pub fn n_missed(&self) -> usize {
        self.sensors.iter().map(|s| s.n_miss).sum()
    }
}

/// Per-sensor constants of one cost evaluation.
struct Kernel<'a, T> {
    kind: CostKind,
    stats: &'a [SensorStats<T>],
    sigma: &'a [T],
    pc: &'a [T],
    gamma: T,
    inv_2var: Vec<T>,
    n_det: Vec<T>,
    n_miss: Vec<T>,
    /// `n_det · (−ln p_c)` for the simplified cost.
    det_const: Vec<T>,
    any_det: bool,
}

impl<'a, T: Scalar> Kernel<'a, T> {
    fn new(summary: &'a ObsSummary<T>, array: &'a ArrayConfig<T>, kind: CostKind) -> Self {
        let stats = summary.sensors();
        let count = |n: usize| T::from_usize(n).unwrap_or_else(T::max_value);
        Self {
            kind,
            stats,
            sigma: array.sigmas(),
            pc: array.pcs(),
            gamma: array.gamma(),
            inv_2var: array.sigmas().iter().map(|&s| (T::lit(2.0) * s * s).recip()).collect(),
            n_det: stats.iter().map(|s| count(s.n_det)).collect(),
            n_miss: stats.iter().map(|s| count(s.n_miss)).collect(),
            det_const: stats
                .iter()
                .zip(array.pcs())
                .map(|(s, &pc)| if s.n_det == 0 { T::zero() } else { -count(s.n_det) * pc.ln() })
                .collect(),
            any_det: stats.iter().any(|s| s.n_det > 0),
        }
    }

    /// Detection part of the cost.
    fn quad(&self, gains: &[T], alpha: T) -> T {
        let mut c = T::zero();
        for (m, s) in self.stats.iter().enumerate() {
            if s.n_det == 0 {
                continue;
            }
            let mu = alpha + gains[m];
            let r = s.mean - mu;
            let sq = (s.ss + self.n_det[m] * r * r) * self.inv_2var[m];
            let term = match self.kind {
                CostKind::Baseline => sq,
                CostKind::Simplified => cost_add(sq, self.det_const[m]),
                CostKind::Full => {
                    if self.pc[m] <= T::zero() {
                        T::impossible()
                    } else {
                        let (sg, pc) = (self.sigma[m], self.pc[m]);
                        let ln_trunc = ln_normal_sf((self.gamma - mu) / sg);
                        let extra = self.n_det[m] * (ln_trunc - ln_pd(mu, sg, self.gamma, pc));
                        cost_add(sq, extra)
                    }
                }
            };
            c = cost_add(c, term);
        }
        c
    }

    /// Miss part of the cost; non-decreasing in α.
    fn miss(&self, gains: &[T], alpha: T) -> T {
        if self.kind == CostKind::Baseline {
            return T::zero();
        }
        let mut c = T::zero();
        for (m, s) in self.stats.iter().enumerate() {
            if s.n_miss == 0 {
                continue;
            }
            let mu = alpha + gains[m];
            let (sg, pc) = (self.sigma[m], self.pc[m]);
            let term = match self.kind {
                CostKind::Full => neg_ln_one_minus_pd(mu, sg, self.gamma, pc),
                _ => simplified_missed(mu, sg, self.gamma, pc),
            };
            c = cost_add(c, self.n_miss[m] * term);
        }
        c
    }

    fn node(&self, gains: &[T], alpha: T) -> T {
        cost_add(self.quad(gains, alpha), self.miss(gains, alpha))
    }

    /// Minimiser of the detection part over real α (ignores the constant).
    fn quad_center(&self, gains: &[T]) -> Option<T> {
        let (mut num, mut den) = (T::zero(), T::zero());
        for (m, s) in self.stats.iter().enumerate() {
            if s.n_det > 0 {
                let w = self.n_det[m] * self.inv_2var[m];
                num += w * (s.mean - gains[m]);
                den += w;
            }
        }
        (den > T::zero()).then(|| num / den)
    }
}

fn margin<T: Scalar>(x: T) -> T {
    let rel = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
    rel * (T::one() + x.abs())
}

/// Negative log-likelihood on a grid, row-major (ψ, α).
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodGrid<T> {
    psi: Vec<T>,
    alpha: Vec<T>,
    cost: Vec<T>,
    kind: CostKind,
}

impl<T: Scalar> LikelihoodGrid<T> {
    /// Wrap an externally computed surface.
    pub fn from_parts(grids: &Grids<T>, cost: Vec<T>, kind: CostKind) -> Result<Self> {
        if cost.len() != grids.n_psi() * grids.n_alpha() {
            return Err(Error::InvalidParameter(format!(
                "cost has {} entries, grid is {}x{}",
                cost.len(),
                grids.n_psi(),
                grids.n_alpha()
            )));
        }
        if cost.iter().any(|c| c.is_nan()) {
            return Err(Error::NonFinite("cost surface"));
        }
        Ok(Self { psi: grids.psi().to_vec(), alpha: grids.alpha().to_vec(), cost, kind })
    }

    pub fn psi_grid(&self) -> &[T] {
        &self.psi
    }

    pub fn alpha_grid(&self) -> &[T] {
        &self.alpha
    }

    pub fn n_psi(&self) -> usize {
        self.psi.len()
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha.len()
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn cost(&self, i: usize, j: usize) -> T {
        self.cost[i * self.alpha.len() + j]
    }

    pub fn costs(&self) -> &[T] {
        &self.cost
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.alpha.len();
        &self.cost[i * n..(i + 1) * n]
    }
}

/// Evaluate the cost at every grid node.
pub fn eval_grid<T: Scalar>(
    obs: &[Observation<T>],
    array: &ArrayConfig<T>,
    grids: &Grids<T>,
    kind: CostKind,
) -> Result<LikelihoodGrid<T>> {
    let summary = ObsSummary::new(obs, array)?;
    let table = GainTable::new(array, grids.psi())?;
    eval_grid_with(&summary, array, &table, grids, kind)
}

/// [`eval_grid`] with precomputed gains and grouped observations.
pub fn eval_grid_with<T: Scalar>(
    summary: &ObsSummary<T>,
    array: &ArrayConfig<T>,
    table: &GainTable<T>,
    grids: &Grids<T>,
    kind: CostKind,
) -> Result<LikelihoodGrid<T>> {
    check_table(table, grids, array)?;
    let kernel = Kernel::new(summary, array, kind);
    let n_alpha = grids.n_alpha();
    let mut cost = vec![T::zero(); grids.n_psi() * n_alpha];
    cost.par_chunks_mut(n_alpha).enumerate().for_each(|(i, row)| {
        let g = table.row(i);
        for (c, &a) in row.iter_mut().zip(grids.alpha()) {
            *c = kernel.node(g, a);
        }
    });
    Ok(LikelihoodGrid { psi: grids.psi().to_vec(), alpha: grids.alpha().to_vec(), cost, kind })
}

fn check_table<T: Scalar>(table: &GainTable<T>, grids: &Grids<T>, array: &ArrayConfig<T>) -> Result<()> {
    if table.n_psi() != grids.n_psi() || table.n_sensors() != array.len() {
        return Err(Error::InvalidParameter("gain table does not match grid and array".into()));
    }
    Ok(())
}

/// Minimum of one ψ row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMin<T> {
    pub j: usize,
    pub cost: T,
}

/// Grid argmin with the tie rule (smallest ψ index, then smallest α index).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMin<T> {
    pub i: usize,
    pub j: usize,
    pub cost: T,
    /// max − min of the whole surface is below 1e−12.
    pub flat: bool,
}

struct RowSearch<'k, 'a, T> {
    kernel: &'k Kernel<'a, T>,
    alpha: &'k [T],
}

impl<T: Scalar> RowSearch<'_, '_, T> {
    /// Index minimising the detection part, with its value.
    fn quad_argmin(&self, g: &[T]) -> (usize, T) {
        let a = self.alpha;
        let q = |j: usize| self.kernel.quad(g, a[j]);
        let Some(center) = self.kernel.quad_center(g) else {
            return (0, q(0));
        };
        let mut j = a.partition_point(|&x| x < center).min(a.len() - 1);
        let mut qj = q(j);
        while j > 0 {
            let ql = q(j - 1);
            if ql <= qj {
                j -= 1;
                qj = ql;
            } else {
                break;
            }
        }
        while j + 1 < a.len() {
            let qr = q(j + 1);
            if qr < qj {
                j += 1;
                qj = qr;
            } else {
                break;
            }
        }
        (j, qj)
    }

    /// Lower bound on every node of the row: Q minimum plus the miss term at the smallest α.
    fn lower_bound(&self, g: &[T]) -> (usize, T, T) {
        let (jq, qmin) = self.quad_argmin(g);
        let floor = self.kernel.miss(g, self.alpha[0]);
        (jq, qmin, floor)
    }

    /// Exact row minimum, smallest index on ties. Nodes not visited are
    /// provably worse than the returned one by more than the rounding margin.
    fn row_min(&self, g: &[T], jq: usize, qmin: T, floor: T) -> RowMin<T> {
        let a = self.alpha;
        if !self.kernel.any_det {
            // constant detection part, non-decreasing miss part
            return RowMin { j: 0, cost: self.kernel.node(g, a[0]) };
        }
        let mut best = RowMin { j: jq, cost: cost_add(qmin, self.kernel.miss(g, a[jq])) };
        let q_stop = qmin + margin(qmin);
        for j in jq + 1..a.len() {
            let q = self.kernel.quad(g, a[j]);
            if q > q_stop {
                break;
            }
            let c = cost_add(q, self.kernel.miss(g, a[j]));
            if c < best.cost {
                best = RowMin { j, cost: c };
            }
        }
        for j in (0..jq).rev() {
            let q = self.kernel.quad(g, a[j]);
            if q + floor > best.cost + margin(best.cost) {
                break;
            }
            let c = cost_add(q, self.kernel.miss(g, a[j]));
            if c <= best.cost {
                best = RowMin { j, cost: c };
            }
        }
        best
    }
}

fn full_row_min<T: Scalar>(kernel: &Kernel<'_, T>, g: &[T], alpha: &[T]) -> RowMin<T> {
    let mut best = RowMin { j: 0, cost: kernel.node(g, alpha[0]) };
    for (j, &a) in alpha.iter().enumerate().skip(1) {
        let c = kernel.node(g, a);
        if c < best.cost {
            best = RowMin { j, cost: c };
        }
    }
    best
}

/// Per-ψ minimum over α, identical to scanning the rows of [`eval_grid_with`].
pub fn profile_rows<T: Scalar>(
    summary: &ObsSummary<T>,
    array: &ArrayConfig<T>,
    table: &GainTable<T>,
    grids: &Grids<T>,
    kind: CostKind,
) -> Result<Vec<RowMin<T>>> {
    check_table(table, grids, array)?;
    let kernel = Kernel::new(summary, array, kind);
    let search = RowSearch { kernel: &kernel, alpha: grids.alpha() };
    Ok((0..grids.n_psi())
        .map(|i| {
            let g = table.row(i);
            if kind == CostKind::Full {
                full_row_min(&kernel, g, grids.alpha())
            } else {
                let (jq, qmin, floor) = search.lower_bound(g);
                search.row_min(g, jq, qmin, floor)
            }
        })
        .collect())
}

/// Grid argmin without evaluating the whole surface.
///
/// Returns the same node and cost as a full scan of [`eval_grid_with`]. Rows
/// are visited in order of a lower bound on their minimum and skipped once
/// the bound exceeds the best cost found.
pub fn argmin_grid<T: Scalar>(
    summary: &ObsSummary<T>,
    array: &ArrayConfig<T>,
    table: &GainTable<T>,
    grids: &Grids<T>,
    kind: CostKind,
) -> Result<GridMin<T>> {
    check_table(table, grids, array)?;
    if kind == CostKind::Full {
        let grid = eval_grid_with(summary, array, table, grids, kind)?;
        return Ok(scan_min(&grid));
    }
    let kernel = Kernel::new(summary, array, kind);
    let search = RowSearch { kernel: &kernel, alpha: grids.alpha() };
    let mut bounds: Vec<(T, usize, usize, T, T)> = (0..grids.n_psi())
        .map(|i| {
            let (jq, qmin, floor) = search.lower_bound(table.row(i));
            (cost_add(qmin, floor), i, jq, qmin, floor)
        })
        .collect();
    bounds.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal).then(x.1.cmp(&y.1)));

    let mut best: Option<GridMin<T>> = None;
    for &(lb, i, jq, qmin, floor) in &bounds {
        if let Some(b) = best {
            if lb > b.cost + margin(b.cost) {
                break;
            }
        }
        let r = search.row_min(table.row(i), jq, qmin, floor);
        let better = match best {
            None => true,
            Some(b) => r.cost < b.cost || (r.cost == b.cost && i < b.i),
        };
        if better {
            best = Some(GridMin { i, j: r.j, cost: r.cost, flat: false });
        }
    }
    let mut best = best.expect("grid is non-empty");
    best.flat = is_flat(&kernel, table, grids, best.cost)?;
    Ok(best)
}

/// Whether every node lies within 1e−12 of `min`.
fn is_flat<T: Scalar>(kernel: &Kernel<'_, T>, table: &GainTable<T>, grids: &Grids<T>, min: T) -> Result<bool> {
    let tol = T::lit(1e-12);
    let last = grids.n_alpha() - 1;
    for i in 0..grids.n_psi() {
        let g = table.row(i);
        for j in [last, 0] {
            if kernel.node(g, grids.alpha()[j]) - min >= tol {
                return Ok(false);
            }
        }
    }
    // undecided by the corners: scan everything
    for i in 0..grids.n_psi() {
        let g = table.row(i);
        for &a in grids.alpha() {
            if kernel.node(g, a) - min >= tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Full scan of a surface with the tie rule.
pub fn scan_min<T: Scalar>(grid: &LikelihoodGrid<T>) -> GridMin<T> {
    let n_alpha = grid.n_alpha();
    let mut best = (0usize, grid.costs()[0]);
    let mut max = grid.costs()[0];
    for (k, &c) in grid.costs().iter().enumerate() {
        if c < best.1 {
            best = (k, c);
        }
        if c > max {
            max = c;
        }
    }
    GridMin { i: best.0 / n_alpha, j: best.0 % n_alpha, cost: best.1, flat: max - best.1 < T::lit(1e-12) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{make_uca, synth_pattern, SensorPattern};
    use crate::special::normal_cdf;

    fn single(gamma: f64, pc: f64) -> ArrayConfig<f64> {
        ArrayConfig::uniform(vec![SensorPattern::constant("s", -3.0)], 2.0, gamma, pc).unwrap()
    }

    fn uca(gamma: f64, pc: f64) -> ArrayConfig<f64> {
        let base = synth_pattern(0.0, -12.0, -16.0, 7).unwrap();
        ArrayConfig::uniform(make_uca(&base, 4).unwrap(), 2.0, gamma, pc).unwrap()
    }

    #[test]
    fn untruncated_limit_is_least_squares() {
        let array = single(-1e6, 1.0);
        let state = SourceState::new(0.2, -60.0).unwrap();
        let obs = [Observation::detected(0, -61.5)];
        let want = 1.5f64 * 1.5 / 8.0;
        assert!((nll_full(&obs, &array, &state).unwrap() - want).abs() < 1e-9);
        assert!((nll_simplified(&obs, &array, &state).unwrap() - want).abs() < 1e-12);
        assert!((nll_baseline(&obs, &array, &state).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn single_miss_terms() {
        let array = single(-95.0, 1.0);
        let state = SourceState::new(0.0, -90.0).unwrap();
        let obs = [Observation::missed(0)];
        // μ = −93, miss probability Φ((γ − μ)/σ) = Φ(−1)
        let want = -normal_cdf(-1.0f64).ln();
        assert!((nll_full(&obs, &array, &state).unwrap() - want).abs() < 1e-12);
        assert!((nll_simplified(&obs, &array, &state).unwrap() - want).abs() < 1e-12);

        let array = single(-93.0, 0.7);
        let v = nll_simplified(&obs, &array, &state).unwrap();
        assert!((v - 0.430_782_916_092_454_2).abs() < 1e-12);
    }

    #[test]
    fn certain_misses_cost_nothing() {
        let array = uca(-95.0, 1.0);
        let state = SourceState::new(1.0, -100.0).unwrap();
        let mut obs: Vec<_> = (0..4).map(Observation::missed).collect();
        obs.extend((0..4).map(Observation::missed));
        let array = array.with_gamma(-20.0);
        assert!(nll_simplified(&obs, &array, &state).unwrap() < 1e-100);
    }

    #[test]
    fn baseline_without_detections_has_no_information() {
        let array = single(-95.0, 1.0);
        let state = SourceState::new(0.0, -90.0).unwrap();
        let err = nll_baseline(&[Observation::missed(0)], &array, &state).unwrap_err();
        assert!(matches!(err, Error::NoInformation));
        let grid = eval_grid(&[Observation::missed(0)], &array, &Grids::standard(), CostKind::Baseline).unwrap();
        assert!(grid.costs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn detection_below_threshold_is_rejected() {
        let array = single(-95.0, 1.0);
        let state = SourceState::new(0.0, -90.0).unwrap();
        let err = nll_full(&[Observation::detected(0, -96.0)], &array, &state).unwrap_err();
        assert!(matches!(err, Error::MalformedObservation { .. }));
    }

    #[test]
    fn standard_grid_dimensions() {
        let g = Grids::<f64>::standard();
        assert_eq!((g.n_psi(), g.n_alpha()), (360, 501));
        assert_eq!(g.alpha()[0], -100.0);
        assert_eq!(g.alpha()[500], 0.0);
        assert_eq!(g.alpha()[136], -72.8);
        let u = Grids::<f64>::uniform(360, -100.0, 0.0, 0.2).unwrap();
        assert_eq!(u.n_alpha(), 501);
        assert!(Grids::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn grid_matches_pointwise_costs() {
        let array = uca(-95.0, 0.8);
        let obs = vec![
            Observation::detected(0, -70.2),
            Observation::missed(1),
            Observation::detected(2, -88.0),
            Observation::detected(0, -71.9),
            Observation::missed(3),
        ];
        let grids = Grids::uniform(36, -100.0, 0.0, 2.5).unwrap();
        for kind in [CostKind::Full, CostKind::Simplified, CostKind::Baseline] {
            let grid = eval_grid(&obs, &array, &grids, kind).unwrap();
            for (i, &p) in grids.psi().iter().enumerate() {
                for (j, &a) in grids.alpha().iter().enumerate() {
                    let s = SourceState::new(p, a).unwrap();
                    let want = nll(&obs, &array, &s, kind).unwrap();
                    let got = grid.cost(i, j);
                    assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "{kind} {i} {j}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn fast_argmin_matches_full_scan() {
        let array = uca(-95.0, 0.7);
        let grids = Grids::standard();
        let table = GainTable::new(&array, grids.psi()).unwrap();
        let obs = vec![
            Observation::detected(0, -80.0),
            Observation::missed(1),
            Observation::missed(2),
            Observation::missed(3),
        ];
        let summary = ObsSummary::new(&obs, &array).unwrap();
        for kind in [CostKind::Simplified, CostKind::Baseline] {
            let grid = eval_grid_with(&summary, &array, &table, &grids, kind).unwrap();
            assert_eq!(argmin_grid(&summary, &array, &table, &grids, kind).unwrap(), scan_min(&grid));
            let rows = profile_rows(&summary, &array, &table, &grids, kind).unwrap();
            for (i, r) in rows.iter().enumerate() {
                let row = grid.row(i);
                let m = row.iter().cloned().fold(f64::INFINITY, f64::min);
                assert_eq!(r.cost, m);
                assert_eq!(r.j, row.iter().position(|&c| c == m).unwrap());
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let array = uca(-95.0, 0.8);
        let obs = vec![
            Observation::detected(0, -72.0),
            Observation::missed(1),
            Observation::detected(3, -90.0),
            Observation::missed(2),
        ];
        for &(p, a) in &[(0.3, -70.0), (2.0, -85.0), (-1.2, -60.0)] {
            let s = SourceState::new(p, a).unwrap();
            let g = nll_simplified_dalpha(&obs, &array, &s).unwrap();
            let h = 1e-5;
            let f = |x: f64| nll_simplified(&obs, &array, &SourceState::new(p, x).unwrap()).unwrap();
            let fd = (f(a + h) - f(a - h)) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-6 * g.abs().max(1.0), "{g} vs {fd}");
        }
    }

    #[test]
    fn kind_parses() {
        assert_eq!("proposed".parse::<CostKind>().unwrap(), CostKind::Simplified);
        assert_eq!(CostKind::Baseline.to_string(), "baseline");
        assert!("nope".parse::<CostKind>().is_err());
    }
}
