//! Constant-velocity particle filter over bearing, driven by the α-profiled
//! likelihood of each epoch.

use std::str::FromStr;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angle::{circ_diff, wrap_pi, wrap_two_pi};
use crate::detection::Observation;
use crate::error::{Error, Result};
use crate::estimator::{estimate_ml, marginal_bearing, BearingProfile, Estimate, Estimator, Method};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle<T> {
    /// Radians in (−π, π].
    pub psi: T,
    /// Radians per second.
    pub psi_dot: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior<T> {
    Uniform,
    Point(T),
}

/// How α is removed from the (ψ, α) surface before the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaReduction {
    /// Minimum over α.
    Profile,
    /// Log-sum-exp over α.
    Marginal,
}

impl FromStr for AlphaReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profile" => Ok(AlphaReduction::Profile),
            "marginal" => Ok(AlphaReduction::Marginal),
            _ => Err(Error::InvalidParameter(format!("unknown alpha reduction '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig<T> {
    pub n_particles: usize,
    /// Spectral density of the bearing acceleration, rad²/s³.
    pub process_noise_q: T,
    /// Resample when ESS/n falls below this fraction.
    pub resample_threshold: T,
    /// Standard deviation of the initial bearing rate, rad/s.
    pub init_rate_std: T,
    /// Profile costs are capped at this height above their minimum.
    pub cost_clamp: T,
    pub reduction: AlphaReduction,
}

impl<T: Scalar> Default for FilterConfig<T> {
    fn default() -> Self {
        Self {
            n_particles: 2000,
            process_noise_q: T::lit(5f64.to_radians().powi(2)),
            resample_threshold: T::lit(0.5),
            init_rate_std: T::lit(2f64.to_radians()),
            cost_clamp: T::lit(50.0),
            reduction: AlphaReduction::Profile,
        }
    }
}

impl<T: Scalar> FilterConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidParameter("need at least two particles".into()));
        }
        if !(self.process_noise_q > T::zero()) || !self.process_noise_q.is_finite() {
            return Err(Error::InvalidParameter("process noise must be positive".into()));
        }
        if !(self.resample_threshold > T::zero() && self.resample_threshold <= T::one()) {
            return Err(Error::InvalidParameter("resample threshold must lie in (0, 1]".into()));
        }
        if !(self.init_rate_std >= T::zero()) || !(self.cost_clamp > T::zero()) {
            return Err(Error::InvalidParameter("rate spread and cost clamp must be positive".into()));
        }
        Ok(())
    }
}

/// Weighted particles; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet<T> {
    pub particles: Vec<Particle<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> ParticleSet<T> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn ess(&self) -> T {
        ess(&self.weights)
    }
}

pub fn ess<T: Scalar>(weights: &[T]) -> T {
    weights.iter().map(|&w| w * w).sum::<T>().recip()
}

fn normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

pub fn pf_init<T: Scalar, R: Rng + ?Sized>(
    config: &FilterConfig<T>,
    prior: Prior<T>,
    rng: &mut R,
) -> Result<ParticleSet<T>> {
    config.validate()?;
    let n = config.n_particles;
    let particles = (0..n)
        .map(|_| {
            let psi = match prior {
                Prior::Uniform => wrap_pi(T::lit(rng.random::<f64>()) * T::TAU() - T::PI()),
                Prior::Point(p) => wrap_pi(p),
            };
            let psi_dot = match prior {
                Prior::Uniform => config.init_rate_std * normal(rng),
                Prior::Point(_) => T::zero(),
            };
            Particle { psi, psi_dot }
        })
        .collect();
    let w = T::from_usize(n).unwrap().recip();
    Ok(ParticleSet { particles, weights: vec![w; n] })
}

/// Cholesky factor of `q·[[dt³/3, dt²/2], [dt²/2, dt]]`, lower triangle as (l11, l21, l22).
pub fn cv_noise_factor<T: Scalar>(dt: T, q: T) -> (T, T, T) {
    let three = T::lit(3.0);
    let l11 = (q * dt * dt * dt / three).sqrt();
    let l21 = q.sqrt() * (three * dt).sqrt() / T::lit(2.0);
    let l22 = (q * dt / T::lit(4.0)).sqrt();
    (l11, l21, l22)
}

/// Constant-velocity propagation with piecewise-constant white acceleration.
pub fn pf_predict<T: Scalar, R: Rng + ?Sized>(set: &mut ParticleSet<T>, dt: T, q: T, rng: &mut R) -> Result<()> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if !(q >= T::zero()) {
        return Err(Error::InvalidParameter("process noise must be non-negative".into()));
    }
    let (l11, l21, l22) = cv_noise_factor(dt, q);
    for p in &mut set.particles {
        let (z1, z2): (T, T) = (normal(rng), normal(rng));
        let w1 = l11 * z1;
        let w2 = l21 * z1 + l22 * z2;
        p.psi = wrap_pi(p.psi + p.psi_dot * dt + w1);
        p.psi_dot += w2;
    }
    Ok(())
}

/// Profile nodes sorted by bearing in [0, 2π), for circular interpolation.
struct CircularTable<T> {
    psi: Vec<T>,
    cost: Vec<T>,
}

impl<T: Scalar> CircularTable<T> {
    fn new(profile: &BearingProfile<T>) -> Self {
        let mut pairs: Vec<(T, T)> =
            profile.psi.iter().map(|&p| wrap_two_pi(p)).zip(profile.cost.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Self { psi: pairs.iter().map(|p| p.0).collect(), cost: pairs.iter().map(|p| p.1).collect() }
    }

    fn eval(&self, psi: T) -> T {
        let n = self.psi.len();
        if n == 1 {
            return self.cost[0];
        }
        let x = wrap_two_pi(psi);
        let k = self.psi.partition_point(|&g| g <= x);
        let (lo, hi) = if k == 0 || k == n { (n - 1, 0) } else { (k - 1, k) };
        let span = wrap_two_pi(self.psi[hi] - self.psi[lo]);
        let span = if span == T::zero() { T::TAU() } else { span };
        let f = wrap_two_pi(x - self.psi[lo]) / span;
        self.cost[lo] + (self.cost[hi] - self.cost[lo]) * f
    }
}

/// Linear interpolation of a bearing profile, wrapping around the circle.
pub fn interp_profile<T: Scalar>(profile: &BearingProfile<T>, psi: T) -> T {
    CircularTable::new(profile).eval(psi)
}

/// Multiply weights by `exp(−cost)` (cost capped at `clamp`) and renormalize.
///
/// Returns `true` and re-initializes from the uniform prior when every
/// weight underflows.
pub fn pf_update<T: Scalar, R: Rng + ?Sized>(
    set: &mut ParticleSet<T>,
    profile: &BearingProfile<T>,
    config: &FilterConfig<T>,
    rng: &mut R,
) -> Result<bool> {
    if profile.is_empty() {
        return Err(Error::InvalidParameter("empty bearing profile".into()));
    }
    let table = CircularTable::new(profile);
    let mut total = T::zero();
    for (p, w) in set.particles.iter().zip(set.weights.iter_mut()) {
        let c = table.eval(p.psi).min(config.cost_clamp).max(T::zero());
        *w *= (-c).exp();
        total += *w;
    }
    if !(total > T::zero()) || !total.is_finite() {
        warn!("all particle weights underflowed; re-initializing");
        *set = pf_init(config, Prior::Uniform, rng)?;
        return Ok(true);
    }
    for w in &mut set.weights {
        *w /= total;
    }
    Ok(false)
}

/// Systematic resampling; weights become uniform.
pub fn pf_resample<T: Scalar, R: Rng + ?Sized>(set: &mut ParticleSet<T>, rng: &mut R) {
    let counts = systematic_counts(&set.weights, T::lit(rng.random::<f64>()));
    let mut out = Vec::with_capacity(set.len());
    for (p, &c) in set.particles.iter().zip(&counts) {
        out.extend(std::iter::repeat_n(*p, c));
    }
    let n = set.len();
    set.particles = out;
    set.weights = vec![T::from_usize(n).unwrap().recip(); n];
}

/// Copies of each particle under systematic resampling with offset `u` in [0, 1).
pub fn systematic_counts<T: Scalar>(weights: &[T], u: T) -> Vec<usize> {
    let n = weights.len();
    let nf = T::from_usize(n).unwrap();
    let mut counts = vec![0usize; n];
    let mut cum = T::zero();
    let mut k = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        cum += w * nf;
        // positions u, u+1, ..., scaled by n
        while k < n && (T::from_usize(k).unwrap() + u < cum || i == n - 1) {
            counts[i] += 1;
            k += 1;
        }
    }
    counts
}

/// Weighted circular mean; `None` when the resultant length is below 1e−9.
pub fn pf_estimate<T: Scalar>(set: &ParticleSet<T>) -> Option<T> {
    let (mut s, mut c) = (T::zero(), T::zero());
    for (p, &w) in set.particles.iter().zip(&set.weights) {
        s += w * p.psi.sin();
        c += w * p.psi.cos();
    }
    if (s * s + c * c).sqrt() < T::lit(1e-9) {
        None
    } else {
        Some(s.atan2(c))
    }
}

/// One time-stamped group of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch<T> {
    pub timestamp: f64,
    pub observations: Vec<Observation<T>>,
}

/// Measurement of one epoch, computed once and reusable across filter seeds.
#[derive(Debug, Clone)]
pub struct EpochProfile<T> {
    pub timestamp: f64,
    pub profile: BearingProfile<T>,
    pub ml: Estimate<T>,
    pub n_missed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint<T> {
    pub timestamp: f64,
    pub psi_pf: T,
    pub psi_ml: T,
    pub alpha_hat: T,
    pub n_missed: usize,
    pub track_loss: bool,
    pub ess: T,
}

pub fn epoch_profiles<T: Scalar>(
    epochs: &[Epoch<T>],
    estimator: &Estimator<T>,
    method: Method,
    reduction: AlphaReduction,
) -> Result<Vec<EpochProfile<T>>> {
    check_timestamps(epochs.iter().map(|e| e.timestamp))?;
    epochs
        .iter()
        .map(|e| {
            let n_missed = e.observations.iter().filter(|o| !o.is_detected()).count();
            let (profile, ml) = match reduction {
                AlphaReduction::Profile => estimator.profile(&e.observations, method)?,
                AlphaReduction::Marginal => {
                    let grid = estimator.grid(&e.observations, method.cost_kind())?;
                    let mut ml = estimate_ml(&grid);
                    if method == Method::Baseline && e.observations.iter().filter(|o| o.is_detected()).count() < 2 {
                        ml.degenerate = true;
                    }
                    (marginal_bearing(&grid), ml)
                }
            };
            Ok(EpochProfile { timestamp: e.timestamp, profile, ml, n_missed })
        })
        .collect()
}

fn check_timestamps(ts: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev: Option<f64> = None;
    for (k, t) in ts.enumerate() {
        if !t.is_finite() {
            return Err(Error::NonFinite("epoch timestamp"));
        }
        if let Some(p) = prev {
            if t <= p {
                return Err(Error::InvalidParameter(format!(
                    "epoch {k}: timestamp {t} does not increase (previous {p})"
                )));
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// Run the filter over precomputed epoch measurements.
pub fn run_filter<T: Scalar>(
    epochs: &[EpochProfile<T>],
    config: &FilterConfig<T>,
    prior: Prior<T>,
    seed: u64,
) -> Result<Vec<TrackPoint<T>>> {
    check_timestamps(epochs.iter().map(|e| e.timestamp))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = pf_init(config, prior, &mut rng)?;
    let n = T::from_usize(config.n_particles).unwrap();
    let mut out = Vec::with_capacity(epochs.len());
    let mut prev_t: Option<f64> = None;
    let mut prev_psi: Option<T> = None;
    for e in epochs {
        if let Some(t0) = prev_t {
            pf_predict(&mut set, T::lit(e.timestamp - t0), config.process_noise_q, &mut rng)?;
        }
        let track_loss = pf_update(&mut set, &e.profile, config, &mut rng)?;
        let ess_now = set.ess();
        let psi = match pf_estimate(&set) {
            Some(p) => p,
            None => {
                debug!("undefined circular mean at t={}; carrying the previous estimate", e.timestamp);
                prev_psi.unwrap_or(wrap_pi(e.ml.psi_hat))
            }
        };
        if ess_now < config.resample_threshold * n {
            pf_resample(&mut set, &mut rng);
        }
        out.push(TrackPoint {
            timestamp: e.timestamp,
            psi_pf: psi,
            psi_ml: wrap_pi(e.ml.psi_hat),
            alpha_hat: e.ml.alpha_hat,
            n_missed: e.n_missed,
            track_loss,
            ess: ess_now,
        });
        prev_t = Some(e.timestamp);
        prev_psi = Some(psi);
    }
    Ok(out)
}

/// Profile every epoch, then filter.
pub fn track_sequence<T: Scalar>(
    epochs: &[Epoch<T>],
    estimator: &Estimator<T>,
    config: &FilterConfig<T>,
    method: Method,
    seed: u64,
) -> Result<Vec<TrackPoint<T>>> {
    config.validate()?;
    let profiles = epoch_profiles(epochs, estimator, method, config.reduction)?;
    run_filter(&profiles, config, Prior::Uniform, seed)
}

/// Absolute bearing error in radians, wrapped.
pub fn abs_error<T: Scalar>(a: T, b: T) -> T {
    circ_diff(a, b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn set_of(psis: &[f64]) -> ParticleSet<f64> {
        let n = psis.len() as f64;
        ParticleSet {
            particles: psis.iter().map(|&psi| Particle { psi, psi_dot: 0.0 }).collect(),
            weights: vec![1.0 / n; psis.len()],
        }
    }

    fn flat_profile(n: usize) -> BearingProfile<f64> {
        BearingProfile {
            psi: (0..n).map(|i| i as f64 * 2.0 * PI / n as f64).collect(),
            cost: vec![0.0; n],
            alpha_at_min: vec![0.0; n],
        }
    }

    #[test]
    fn init_uniform_and_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = FilterConfig::<f64> { n_particles: 10_000, ..Default::default() };
        let set = pf_init(&cfg, Prior::Uniform, &mut rng).unwrap();
        let (s, c) = set.particles.iter().fold((0.0, 0.0), |(s, c), p| (s + p.psi.sin(), c + p.psi.cos()));
        assert!((s * s + c * c).sqrt() / 1e4 < 0.05);
        assert!((set.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let set = pf_init(&cfg, Prior::Point(0.0), &mut rng).unwrap();
        assert!(set.particles.iter().all(|p| p.psi == 0.0));
    }

    #[test]
    fn deterministic_advance_wraps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dt = 0.1;
        let mut set =
            ParticleSet { particles: vec![Particle { psi: PI - 0.01, psi_dot: 0.02 / dt }], weights: vec![1.0] };
        pf_predict(&mut set, dt, 0.0, &mut rng).unwrap();
        assert!((set.particles[0].psi - (-PI + 0.01)).abs() < 1e-12);
        assert!(pf_predict(&mut set, 0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn noise_factor_reproduces_covariance() {
        let (dt, q): (f64, f64) = (0.7, 0.3);
        let (a, b, c) = cv_noise_factor(dt, q);
        assert!((a * a - q * dt.powi(3) / 3.0).abs() < 1e-14);
        assert!((a * b - q * dt * dt / 2.0).abs() < 1e-14);
        assert!((b * b + c * c - q * dt).abs() < 1e-14);
    }

    #[test]
    fn flat_profile_keeps_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut set = set_of(&[0.1, 1.0, -2.0]);
        set.weights = vec![0.2, 0.5, 0.3];
        let before = set.clone();
        let lost = pf_update(&mut set, &flat_profile(360), &FilterConfig::default(), &mut rng).unwrap();
        assert!(!lost);
        for (a, b) in set.weights.iter().zip(&before.weights) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_wraps() {
        let mut prof = flat_profile(4);
        prof.cost = vec![0.0, 1.0, 2.0, 3.0];
        assert!((interp_profile(&prof, PI / 4.0) - 0.5).abs() < 1e-12);
        // between 270° (3.0) and 360° = 0° (0.0)
        assert!((interp_profile(&prof, -PI / 4.0) - 1.5).abs() < 1e-12);
        assert!((interp_profile(&prof, 2.0 * PI) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn systematic_resampling_counts() {
        let w = [0.1, 0.2, 0.3, 0.4];
        for k in 0..100 {
            let c = systematic_counts(&w, k as f64 / 100.0);
            assert_eq!(c.iter().sum::<usize>(), 4);
            for (ci, wi) in c.iter().zip(&w) {
                assert!((*ci as f64 - 4.0 * wi).abs() < 1.0 + 1e-12);
            }
        }
        assert_eq!(systematic_counts(&[0.0, 1.0, 0.0], 0.5), vec![0, 3, 0]);
    }

    #[test]
    fn circular_mean_examples() {
        let d = |x: f64| x.to_radians();
        let e = pf_estimate(&set_of(&[d(10.0), d(-10.0)])).unwrap();
        assert!(e.abs() < 1e-12);
        let e = pf_estimate(&set_of(&[d(179.0), d(-179.0)])).unwrap();
        assert!((e.abs() - PI).abs() < 1e-12);
        let e = pf_estimate(&set_of(&[d(42.0)])).unwrap();
        assert!((e - d(42.0)).abs() < 1e-12);
        assert!(pf_estimate(&set_of(&[0.0, PI])).is_none());
    }

    #[test]
    fn timestamps_must_increase() {
        assert!(check_timestamps([0.0, 1.0, 1.0].into_iter()).is_err());
        assert!(check_timestamps([0.0, 1.0, 2.0].into_iter()).is_ok());
    }
}
