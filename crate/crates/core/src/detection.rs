//! Thresholded measurement model.
//!
//! A sensor reports `y = α + h_m(ψ) + e`, `e ~ N(0, σ²)`, only when `y ≥ γ`
//! and an independent efficiency coin with success probability `p_c`
//! comes up heads; otherwise it reports nothing. Without false alarms the
//! detection probability factors as `p_D = p_c · (1 − Φ((γ − μ)/σ))`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::angle::wrap_pi;
use crate::error::{Error, Result};
use crate::patterns::ArrayConfig;
use crate::scalar::Scalar;
pub use crate::special::normal_cdf;
use crate::special::{ln_normal_cdf, ln_normal_pdf, ln_normal_sf, normal_sf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<T> {
    Detected(T),
    Missed,
}

/// One sensor report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T> {
    pub sensor: usize,
    pub outcome: Outcome<T>,
}

impl<T: Scalar> Observation<T> {
    pub fn detected(sensor: usize, rssi_dbm: T) -> Self {
        Self { sensor, outcome: Outcome::Detected(rssi_dbm) }
    }

    pub fn missed(sensor: usize) -> Self {
        Self { sensor, outcome: Outcome::Missed }
    }

    pub fn is_detected(&self) -> bool {
        matches!(self.outcome, Outcome::Detected(_))
    }

    pub fn value(&self) -> Option<T> {
        match self.outcome {
            Outcome::Detected(y) => Some(y),
            Outcome::Missed => None,
        }
    }
}

/// Check sensor indices and that no detection sits below the threshold.
pub fn validate_observations<T: Scalar>(obs: &[Observation<T>], array: &ArrayConfig<T>) -> Result<()> {
    for o in obs {
        if o.sensor >= array.len() {
            return Err(Error::MalformedObservation {
                sensor: o.sensor,
                reason: format!("sensor index out of range for a {}-sensor array", array.len()),
            });
        }
        if let Outcome::Detected(y) = o.outcome {
            if !y.is_finite() {
                return Err(Error::MalformedObservation { sensor: o.sensor, reason: "non-finite RSSI".into() });
            }
            if y < array.gamma() {
                return Err(Error::MalformedObservation {
                    sensor: o.sensor,
                    reason: format!("detected value {y} below threshold {}", array.gamma()),
                });
            }
        }
    }
    Ok(())
}

/// Bearing and source power at the array centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceState<T> {
    psi: T,
    alpha: T,
}

impl<T: Scalar> SourceState<T> {
    /// `psi` in radians (wrapped to (−π, π]), `alpha` in dBm.
    pub fn new(psi: T, alpha: T) -> Result<Self> {
        if !psi.is_finite() || !alpha.is_finite() {
            return Err(Error::NonFinite("source state"));
        }
        Ok(Self { psi: wrap_pi(psi), alpha })
    }

    pub fn from_degrees(psi_deg: T, alpha: T) -> Result<Self> {
        Self::new(psi_deg.to_radians(), alpha)
    }

    pub fn psi(&self) -> T {
        self.psi
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
}

/// Probability that the noisy signal clears the threshold: `1 − Φ((γ − μ)/σ)`.
pub fn detection_prob_threshold<T: Scalar>(mu: T, gamma: T, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(normal_sf((gamma - mu) / sigma))
}

/// `p_D = p_c · p_α`.
pub fn detection_prob_total<T: Scalar>(pc: T, p_alpha: T) -> Result<T> {
    let unit = |p: T| p >= T::zero() && p <= T::one();
    if !unit(pc) || !unit(p_alpha) {
        return Err(Error::InvalidParameter(format!(
            "probabilities must lie in [0, 1], got pc={pc}, p_alpha={p_alpha}"
        )));
    }
    Ok(pc * p_alpha)
}

/// Log-density that can represent probability zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogDensity<T> {
    Value(T),
    /// Outside the support.
    Zero,
}

impl<T: Scalar> LogDensity<T> {
    pub fn value(self) -> Option<T> {
        match self {
            LogDensity::Value(v) => Some(v),
            LogDensity::Zero => None,
        }
    }

    /// As a negative-log cost; probability zero maps to [`Scalar::impossible`].
    pub fn to_cost(self) -> T {
        match self {
            LogDensity::Value(v) => -v,
            LogDensity::Zero => T::impossible(),
        }
    }
}

/// ln of the probability mass of N(μ, σ²) on (a, b).
fn ln_normal_mass<T: Scalar>(mu: T, sigma: T, a: T, b: T) -> T {
    let za = (a - mu) / sigma;
    let zb = (b - mu) / sigma;
    if b == T::infinity() {
        return ln_normal_sf(za);
    }
    if a == T::neg_infinity() {
        return ln_normal_cdf(zb);
    }
    if za >= T::zero() {
        // both in the upper tail: sf(za) − sf(zb)
        let la = ln_normal_sf(za);
        la + (-(ln_normal_sf(zb) - la).exp()).ln_1p()
    } else if zb <= T::zero() {
        let lb = ln_normal_cdf(zb);
        lb + (-(ln_normal_cdf(za) - lb).exp()).ln_1p()
    } else {
        (T::one() - normal_sf(zb) - normal_sf(-za)).ln()
    }
}

/// ln of the normal density N(y; μ, σ²) truncated to [a, b).
///
/// `b` may be `+∞` and `a` may be `−∞`. Values outside the interval give
/// [`LogDensity::Zero`]. A normalizer below 1e−300 is reported as an error.
pub fn truncated_normal_logpdf<T: Scalar>(y: T, mu: T, sigma: T, a: T, b: T) -> Result<LogDensity<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(a < b) || y.is_nan() || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid truncation interval ({a}, {b})")));
    }
    let ln_mass = ln_normal_mass(mu, sigma, a, b);
    if ln_mass < T::lit(1e-300f64.ln()) || !ln_mass.is_finite() {
        return Err(Error::NormalizerUnderflow {
            lo: a.to_f64().unwrap_or(f64::NAN),
            hi: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !(y >= a && y < b) {
        return Ok(LogDensity::Zero);
    }
    let z = (y - mu) / sigma;
    Ok(LogDensity::Value(ln_normal_pdf(z) - sigma.ln() - ln_mass))
}

/// Draw one report from sensor `m` for a source in `state`.
///
/// The efficiency coin is drawn first; a failed coin skips the noise draw.
pub fn simulate_observation<T: Scalar, R: Rng + ?Sized>(
    state: &SourceState<T>,
    array: &ArrayConfig<T>,
    m: usize,
    rng: &mut R,
) -> Result<Observation<T>> {
    if m >= array.len() {
        return Err(Error::InvalidParameter(format!("sensor index {m} out of range")));
    }
    let pc = array.pc(m);
    if pc < T::one() {
        let u: f64 = rng.random();
        if T::lit(u) >= pc {
            return Ok(Observation::missed(m));
        }
    }
    let mu = state.alpha() + array.gain(m, state.psi())?;
    let e: f64 = rng.sample(StandardNormal);
    let y = mu + array.sigma(m) * T::lit(e);
    Ok(if y < array.gamma() { Observation::missed(m) } else { Observation::detected(m, y) })
}

/// `batch` reports from every sensor, ordered batch-major
/// (all sensors for draw 0, then all sensors for draw 1, ...).
pub fn simulate_batch<T: Scalar, R: Rng + ?Sized>(
    state: &SourceState<T>,
    array: &ArrayConfig<T>,
    batch: usize,
    rng: &mut R,
) -> Result<Vec<Observation<T>>> {
    let mut out = Vec::with_capacity(batch * array.len());
    for _ in 0..batch {
        for m in 0..array.len() {
            out.push(simulate_observation(state, array, m, rng)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::SensorPattern;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_array(gain: f64, sigma: f64, gamma: f64, pc: f64) -> ArrayConfig<f64> {
        ArrayConfig::uniform(vec![SensorPattern::constant("s", gain)], sigma, gamma, pc).unwrap()
    }

    #[test]
    fn threshold_probability_examples() {
        assert_eq!(detection_prob_threshold(-80.0, -80.0, 3.0).unwrap(), 0.5);
        assert!((detection_prob_threshold(-80.0f64 + 16.0, -80.0, 2.0).unwrap() - 1.0).abs() <= 1e-15);
        let p: f64 = detection_prob_threshold(-95.0, -93.0, 2.0).unwrap();
        assert!((p - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!(detection_prob_threshold(0.0, 0.0, 0.0).is_err());
        assert!(detection_prob_threshold(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn threshold_probability_is_increasing_in_mu() {
        let mut prev = 0.0;
        for i in 0..400 {
            let mu = -110.0 + 0.075 * i as f64;
            let p = detection_prob_threshold(mu, -95.0, 2.0).unwrap();
            assert!(p > prev && p < 1.0);
            prev = p;
        }
    }

    #[test]
    fn total_probability_examples() {
        assert_eq!(detection_prob_total(1.0, 0.5).unwrap(), 0.5);
        assert_eq!(detection_prob_total(0.0, 0.37).unwrap(), 0.0);
        assert!((detection_prob_total(0.7f64, 0.5).unwrap() - 0.35).abs() < 1e-16);
        assert!(detection_prob_total(1.2, 0.5).is_err());
    }

    #[test]
    fn truncated_density_examples() {
        // mpmath: ln(npdf(1; 1, 0.7) / (1 − ncdf(0.5; 1, 0.7)))
        let v = truncated_normal_logpdf(1.0, 1.0, 0.7, 0.5, f64::INFINITY).unwrap();
        assert!((v.value().unwrap() + 0.291_077_687_689_359_7).abs() < 1e-14);
        let below = truncated_normal_logpdf(0.4, 1.0, 0.7, 0.5, f64::INFINITY).unwrap();
        assert_eq!(below, LogDensity::Zero);
        assert_eq!(below.to_cost(), f64::impossible());
        let full = truncated_normal_logpdf(2.0, 2.0, 1.5, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let want = -(1.5 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((full.value().unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn truncated_density_underflow_is_an_error() {
        let err = truncated_normal_logpdf(100.0, 0.0, 1.0, 40.0, f64::INFINITY).unwrap_err();
        assert!(matches!(err, Error::NormalizerUnderflow { .. }));
        assert!(truncated_normal_logpdf(0.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn truncated_density_two_sided_upper_tail() {
        // mass of (3, 4) under N(0,1) from the survival difference
        let v = truncated_normal_logpdf(3.5, 0.0, 1.0, 3.0, 4.0).unwrap().value().unwrap();
        let mass: f64 = normal_sf(3.0) - normal_sf(4.0);
        let want = ln_normal_pdf(3.5) - mass.ln();
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn zero_efficiency_always_misses() {
        let array = flat_array(0.0, 2.0, -95.0, 0.0);
        let state = SourceState::new(0.3, -40.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert!(!simulate_observation(&state, &array, 0, &mut rng).unwrap().is_detected());
        }
    }

    #[test]
    fn unbinding_threshold_gives_unbiased_draws() {
        let array = flat_array(-3.0, 2.0, -1e9, 1.0);
        let state = SourceState::new(1.0, -70.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let o = simulate_observation(&state, &array, 0, &mut rng).unwrap();
            sum += o.value().expect("always detected");
        }
        let mean = sum / n as f64;
        assert!((mean - -73.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());
    }

    #[test]
    fn mean_at_threshold_detects_half_the_time() {
        let array = flat_array(-5.0, 2.0, -95.0, 1.0);
        let state = SourceState::new(0.0, -90.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let hits = (0..n).filter(|_| simulate_observation(&state, &array, 0, &mut rng).unwrap().is_detected()).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn observation_validation() {
        let array = flat_array(0.0, 2.0, -95.0, 1.0);
        assert!(validate_observations(&[Observation::detected(0, -90.0)], &array).is_ok());
        assert!(validate_observations(&[Observation::detected(0, -96.0)], &array).is_err());
        assert!(validate_observations(&[Observation::<f64>::missed(3)], &array).is_err());
    }

    #[test]
    fn state_wraps_bearing() {
        let s = SourceState::from_degrees(270.0, -60.0).unwrap();
        assert!((s.psi() + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(SourceState::new(f64::NAN, 0.0).is_err());
    }
}
