//! Grid-search point estimates and bearing profiles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detection::Observation;
use crate::error::{Error, Result};
use crate::likelihood::{
    argmin_grid, eval_grid_with, profile_rows, scan_min, CostKind, GainTable, Grids, LikelihoodGrid, ObsSummary,
};
use crate::patterns::ArrayConfig;
use crate::scalar::Scalar;
use crate::special::ln_add_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Detections and misses (simplified cost).
    Proposed,
    /// Detections only.
    Baseline,
}

impl Method {
    pub const BOTH: [Method; 2] = [Method::Proposed, Method::Baseline];

    pub fn cost_kind(self) -> CostKind {
        match self {
            Method::Proposed => CostKind::Simplified,
            Method::Baseline => CostKind::Baseline,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "baseline" => Ok(Method::Baseline),
            _ => Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    /// Radians, a node of the ψ grid.
    pub psi_hat: T,
    /// dBm, a node of the α grid.
    pub alpha_hat: T,
    pub cost_at_min: T,
    pub method: Method,
    pub degenerate: bool,
    pub psi_index: usize,
    pub alpha_index: usize,
}

fn method_of(kind: CostKind) -> Method {
    match kind {
        CostKind::Baseline => Method::Baseline,
        _ => Method::Proposed,
    }
}

/// Grid argmin; ties go to the smallest ψ index, then the smallest α index.
/// A surface with max − min below 1e−12 is flagged degenerate.
pub fn estimate_ml<T: Scalar>(grid: &LikelihoodGrid<T>) -> Estimate<T> {
    let m = scan_min(grid);
    Estimate {
        psi_hat: grid.psi_grid()[m.i],
        alpha_hat: grid.alpha_grid()[m.j],
        cost_at_min: m.cost,
        method: method_of(grid.kind()),
        degenerate: m.flat,
        psi_index: m.i,
        alpha_index: m.j,
    }
}

/// Cost over ψ after minimising over α, shifted so the smallest entry is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingProfile<T> {
    pub psi: Vec<T>,
    pub cost: Vec<T>,
    /// α node attaining each row minimum.
    pub alpha_at_min: Vec<T>,
}

impl<T: Scalar> BearingProfile<T> {
    fn shifted(psi: Vec<T>, raw: Vec<T>, alpha_at_min: Vec<T>) -> Self {
        let min = raw.iter().cloned().fold(T::infinity(), T::min);
        let cost = raw.iter().map(|&c| if min.is_finite() { c - min } else { T::zero() }).collect();
        Self { psi, cost, alpha_at_min }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

/// Profile likelihood in α: per ψ node, the minimum cost over the α grid.
pub fn profile_bearing<T: Scalar>(grid: &LikelihoodGrid<T>) -> BearingProfile<T> {
    let mut raw = Vec::with_capacity(grid.n_psi());
    let mut at = Vec::with_capacity(grid.n_psi());
    for i in 0..grid.n_psi() {
        let row = grid.row(i);
        let (mut j, mut c) = (0, row[0]);
        for (k, &v) in row.iter().enumerate() {
            if v < c {
                j = k;
                c = v;
            }
        }
        raw.push(c);
        at.push(grid.alpha_grid()[j]);
    }
    BearingProfile::shifted(grid.psi_grid().to_vec(), raw, at)
}

/// Marginal likelihood in α: `−ln Σ_j exp(−cost_ij)` per ψ node (flat prior
/// on the α grid), shifted to minimum 0. `alpha_at_min` holds the row argmin.
pub fn marginal_bearing<T: Scalar>(grid: &LikelihoodGrid<T>) -> BearingProfile<T> {
    let prof = profile_bearing(grid);
    let mut raw = Vec::with_capacity(grid.n_psi());
    for i in 0..grid.n_psi() {
        let lse = grid.row(i).iter().fold(T::neg_infinity(), |acc, &c| ln_add_exp(acc, -c));
        raw.push(-lse);
    }
    BearingProfile::shifted(prof.psi, raw, prof.alpha_at_min)
}

/// Estimator bound to one array and grid, with the pattern gains precomputed.
#[derive(Debug, Clone)]
pub struct Estimator<T> {
    array: ArrayConfig<T>,
    grids: Grids<T>,
    table: GainTable<T>,
}

impl<T: Scalar> Estimator<T> {
    pub fn new(array: ArrayConfig<T>, grids: Grids<T>) -> Result<Self> {
        let table = GainTable::new(&array, grids.psi())?;
        Ok(Self { array, grids, table })
    }

    pub fn array(&self) -> &ArrayConfig<T> {
        &self.array
    }

    pub fn grids(&self) -> &Grids<T> {
        &self.grids
    }

    /// Same patterns and grid with different detection parameters; reuses the gains.
    pub fn with_array(&self, array: ArrayConfig<T>) -> Result<Self> {
        if array.patterns() != self.array.patterns() {
            return Err(Error::InvalidParameter("patterns differ from the cached gain table".into()));
        }
        Ok(Self { array, grids: self.grids.clone(), table: self.table.clone() })
    }

    pub fn summarize(&self, obs: &[Observation<T>]) -> Result<ObsSummary<T>> {
        ObsSummary::new(obs, &self.array)
    }

    pub fn grid(&self, obs: &[Observation<T>], kind: CostKind) -> Result<LikelihoodGrid<T>> {
        eval_grid_with(&self.summarize(obs)?, &self.array, &self.table, &self.grids, kind)
    }

    /// Grid ML estimate; equal to `estimate_ml(self.grid(obs, ..))` but
    /// without evaluating the whole surface.
    pub fn estimate(&self, obs: &[Observation<T>], method: Method) -> Result<Estimate<T>> {
        let summary = self.summarize(obs)?;
        self.estimate_summary(&summary, method)
    }

    pub fn estimate_summary(&self, summary: &ObsSummary<T>, method: Method) -> Result<Estimate<T>> {
        let m = argmin_grid(summary, &self.array, &self.table, &self.grids, method.cost_kind())?;
        let mut degenerate = m.flat;
        if method == Method::Baseline && summary.n_detected() < 2 {
            degenerate = true;
        }
        Ok(Estimate {
            psi_hat: self.grids.psi()[m.i],
            alpha_hat: self.grids.alpha()[m.j],
            cost_at_min: m.cost,
            method,
            degenerate,
            psi_index: m.i,
            alpha_index: m.j,
        })
    }

    /// Profile over ψ together with the joint argmin it implies.
    pub fn profile(&self, obs: &[Observation<T>], method: Method) -> Result<(BearingProfile<T>, Estimate<T>)> {
        let summary = self.summarize(obs)?;
        let rows = profile_rows(&summary, &self.array, &self.table, &self.grids, method.cost_kind())?;
        let mut best = 0;
        for (i, r) in rows.iter().enumerate() {
            if r.cost < rows[best].cost {
                best = i;
            }
        }
        let raw = rows.iter().map(|r| r.cost).collect();
        let at = rows.iter().map(|r| self.grids.alpha()[r.j]).collect();
        let profile = BearingProfile::shifted(self.grids.psi().to_vec(), raw, at);
        let flat = profile.cost.iter().all(|&c| c < T::lit(1e-12))
            && rows.iter().all(|r| r.j == rows[0].j && r.j == 0)
            && self.grid(obs, method.cost_kind()).map(|g| scan_min(&g).flat)?;
        let degenerate = flat || (method == Method::Baseline && summary.n_detected() < 2);
        let est = Estimate {
            psi_hat: self.grids.psi()[best],
            alpha_hat: self.grids.alpha()[rows[best].j],
            cost_at_min: rows[best].cost,
            method,
            degenerate,
            psi_index: best,
            alpha_index: rows[best].j,
        };
        Ok((profile, est))
    }
}

/// Proposed-method estimate on the given grids.
pub fn estimate_proposed<T: Scalar>(
    obs: &[Observation<T>],
    array: &ArrayConfig<T>,
    grids: &Grids<T>,
) -> Result<Estimate<T>> {
    Estimator::new(array.clone(), grids.clone())?.estimate(obs, Method::Proposed)
}

/// Detections-only estimate; fewer than two detections flags it degenerate.
pub fn estimate_baseline<T: Scalar>(
    obs: &[Observation<T>],
    array: &ArrayConfig<T>,
    grids: &Grids<T>,
) -> Result<Estimate<T>> {
    Estimator::new(array.clone(), grids.clone())?.estimate(obs, Method::Baseline)
}
