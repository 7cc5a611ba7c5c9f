//! Fourier-series directional gain patterns and sensor-array configuration.
//!
//! A pattern stores complex coefficients `c_k`, `k = −K..=K`, of a real gain
//! curve in dB: `h(ψ) = Σ c_k e^{ikψ}`. Realness is enforced by conjugate
//! symmetry `c_{−k} = conj(c_k)`, validated on construction and then imposed
//! exactly.

use log::warn;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Gains used inside likelihoods are clamped to this range (dB).
pub const GAIN_FLOOR_DB: f64 = -120.0;
pub const GAIN_CEIL_DB: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorPattern<T> {
    id: String,
    order: usize,
    /// `coeffs[k + order]` holds `c_k`.
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> SensorPattern<T> {
    /// Build from the full coefficient vector `c_{−K}..=c_K`.
    pub fn new(id: impl Into<String>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        let id = id.into();
        if coeffs.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "pattern {id}: expected 2K+1 coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("pattern coefficients"));
        }
        let order = coeffs.len() / 2;
        let tol = T::symmetry_tol();
        for k in 0..=order {
            let pos = coeffs[order + k];
            let neg = coeffs[order - k];
            let residual = (pos - neg.conj()).norm();
            if residual > tol {
                return Err(Error::ConjugateSymmetry {
                    sensor: id,
                    k,
                    residual: residual.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let mut coeffs = coeffs;
        coeffs[order].im = T::zero();
        for k in 1..=order {
            let avg = (coeffs[order + k] + coeffs[order - k].conj()) * T::lit(0.5);
            coeffs[order + k] = avg;
            coeffs[order - k] = avg.conj();
        }
        Ok(Self { id, order, coeffs })
    }

    /// Build from the non-negative half `c_0..=c_K`; the negative half is
    /// filled by conjugation. `c_0` must be real.
    pub fn from_half(id: impl Into<String>, half: &[Complex<T>]) -> Result<Self> {
        if half.is_empty() {
            return Err(Error::InvalidParameter("empty coefficient list".into()));
        }
        let order = half.len() - 1;
        let mut full = vec![Complex::new(T::zero(), T::zero()); 2 * order + 1];
        for (k, c) in half.iter().enumerate() {
            full[order + k] = *c;
            full[order - k] = c.conj();
        }
        Self::new(id, full)
    }

    /// Build from the real basis: `a0 + Σ a_k cos kψ + b_k sin kψ`.
    pub fn from_real(id: impl Into<String>, a0: T, cos: &[T], sin: &[T]) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(Error::InvalidParameter("cos/sin length mismatch".into()));
        }
        let half: Vec<Complex<T>> = std::iter::once(Complex::new(a0, T::zero()))
            .chain(cos.iter().zip(sin).map(|(&a, &b)| Complex::new(a * T::lit(0.5), -b * T::lit(0.5))))
            .collect();
        Self::from_half(id, &half)
    }

    /// A pattern with constant gain.
    pub fn constant(id: impl Into<String>, gain_db: T) -> Self {
        Self { id: id.into(), order: 0, coeffs: vec![Complex::new(gain_db, T::zero())] }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// `c_k`, zero outside `−K..=K`.
    pub fn coeff(&self, k: isize) -> Complex<T> {
        let idx = k + self.order as isize;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex::new(T::zero(), T::zero())
        } else {
            self.coeffs[idx as usize]
        }
    }

    /// Gain in dB at bearing `psi` (radians).
    pub fn eval(&self, psi: T) -> Result<T> {
        if !psi.is_finite() {
            return Err(Error::NonFinite("bearing"));
        }
        let (re, im) = self.eval_complex(psi);
        debug_assert!(
            im.abs() < T::symmetry_tol() * T::lit(10.0) * (T::one() + re.abs()),
            "imaginary residual {im} at psi={psi}"
        );
        Ok(re)
    }

    /// Full complex sum `Σ c_k e^{ikψ}`; the imaginary part is round-off.
    pub fn eval_complex(&self, psi: T) -> (T, T) {
        let k0 = self.order as isize;
        let mut acc = Complex::new(T::zero(), T::zero());
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = T::from_isize(i as isize - k0).unwrap();
            acc = acc + c * Complex::from_polar(T::one(), k * psi);
        }
        (acc.re, acc.im)
    }

    /// Pattern seen from a sensor mounted at angle `theta`:
    /// `rotate(p, θ).eval(ψ) == p.eval(ψ − θ)`.
    pub fn rotate(&self, theta: T) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite("rotation angle"));
        }
        let k0 = self.order as isize;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = T::from_isize(i as isize - k0).unwrap();
                c * Complex::from_polar(T::one(), -k * theta)
            })
            .collect();
        Self::new(self.id.clone(), coeffs)
    }
}

/// Clamp a gain to `[GAIN_FLOOR_DB, GAIN_CEIL_DB]`, returning whether it moved.
pub fn clamp_gain<T: Scalar>(g: T) -> (T, bool) {
    let lo = T::lit(GAIN_FLOOR_DB);
    let hi = T::lit(GAIN_CEIL_DB);
    if g < lo {
        (lo, true)
    } else if g > hi {
        (hi, true)
    } else {
        (g, false)
    }
}

/// Weighted least-squares Fourier fit of order `order` to per-angle means.
///
/// Weights are `1 / variance`. Angles need not be uniform.
pub fn fit_pattern_wls<T: Scalar>(
    id: impl Into<String>,
    angles: &[T],
    means: &[T],
    variances: &[T],
    order: usize,
) -> Result<SensorPattern<T>> {
    let n = angles.len();
    if means.len() != n || variances.len() != n {
        return Err(Error::InvalidParameter("angles, means and variances must have equal length".into()));
    }
    if angles.iter().chain(means).chain(variances).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("calibration samples"));
    }
    if let Some(v) = variances.iter().find(|v| **v <= T::zero()) {
        return Err(Error::InvalidParameter(format!("variances must be strictly positive, got {v}")));
    }
    let cols = 2 * order + 1;
    let mut design = Vec::with_capacity(n * cols);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let w = variances[i].recip().sqrt();
        design.push(w);
        for k in 1..=order {
            let kpsi = T::from_usize(k).unwrap() * angles[i];
            design.push(w * kpsi.cos());
            design.push(w * kpsi.sin());
        }
        rhs.push(w * means[i]);
    }
    let beta = linalg::lstsq(design, rhs, n, cols)?;
    let cos: Vec<T> = (0..order).map(|k| beta[1 + 2 * k]).collect();
    let sin: Vec<T> = (0..order).map(|k| beta[2 + 2 * k]).collect();
    SensorPattern::from_real(id, beta[0], &cos, &sin)
}

/// Residual summary of a pattern against calibration data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResidual<T> {
    pub n_angles: usize,
    /// Plain RMS of `mean − h(ψ)`.
    pub rms_db: T,
    /// RMS of residuals scaled by `1/σ_i` (chi per degree of freedom is its square).
    pub weighted_rms: T,
}

pub fn fit_residual<T: Scalar>(
    pattern: &SensorPattern<T>,
    angles: &[T],
    means: &[T],
    variances: &[T],
) -> Result<FitResidual<T>> {
    let n = angles.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no calibration samples".into()));
    }
    let mut ss = T::zero();
    let mut wss = T::zero();
    for i in 0..n {
        let r = means[i] - pattern.eval(angles[i])?;
        ss += r * r;
        wss += r * r / variances[i];
    }
    let nf = T::from_usize(n).unwrap();
    Ok(FitResidual { n_angles: n, rms_db: (ss / nf).sqrt(), weighted_rms: (wss / nf).sqrt() })
}

/// `n` copies of `base`, sensor `m` rotated by `2πm/n`.
///
/// Gain-only array: element positions and phase are not modeled.
pub fn make_uca<T: Scalar>(base: &SensorPattern<T>, n: usize) -> Result<Vec<SensorPattern<T>>> {
    if n == 0 {
        return Err(Error::InvalidParameter("array needs at least one sensor".into()));
    }
    if n == 1 {
        return Ok(vec![base.clone()]);
    }
    let step = T::TAU() / T::from_usize(n).unwrap();
    (0..n)
        .map(|m| base.rotate(step * T::from_usize(m).unwrap()).map(|p| p.with_id(format!("{}{}", base.id(), m))))
        .collect()
}

/// Lobe layout of [`synth_pattern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobeShape {
    /// Concentration of the main lobe (larger is narrower).
    pub main_width: f64,
    pub side_width: f64,
    pub back_width: f64,
    /// Depth of the nulls between lobes, below the weaker of side/back level (dB).
    pub null_depth: f64,
}

impl Default for LobeShape {
    fn default() -> Self {
        Self { main_width: 3.0, side_width: 8.0, back_width: 6.0, null_depth: 10.0 }
    }
}

/// Default levels used by the simulator (dB).
pub const SYNTH_MAIN_DB: f64 = 15.0;
pub const SYNTH_SIDE_DB: f64 = -10.0;
pub const SYNTH_BACK_DB: f64 = -15.0;
pub const SYNTH_ORDER: usize = 7;

/// Modified Bessel functions `I_0..=I_kmax` at `x` by power series.
fn bessel_i<T: Scalar>(x: T, kmax: usize) -> Vec<T> {
    let half = x * T::lit(0.5);
    (0..=kmax)
        .map(|k| {
            // (x/2)^k / k!
            let mut term = (1..=k).fold(T::one(), |acc, i| acc * half / T::from_usize(i).unwrap());
            let mut sum = term;
            for j in 1..200 {
                term = term * half * half / T::from_usize(j * (j + k)).unwrap();
                sum += term;
                if term < sum * T::epsilon() {
                    break;
                }
            }
            sum
        })
        .collect()
}

/// Order-`K` truncation of the dB lobe `exp(κ(cos(ψ − θ) − 1))`, as half coefficients.
fn lobe_half<T: Scalar>(kappa: T, theta: T, order: usize) -> Vec<Complex<T>> {
    let bessel = bessel_i(kappa, order);
    let scale = (-kappa).exp();
    (0..=order)
        .map(|k| {
            let mag = bessel[k] * scale;
            if k == 0 {
                Complex::new(mag, T::zero())
            } else {
                Complex::from_polar(mag, -T::from_usize(k).unwrap() * theta)
            }
        })
        .collect()
}

fn eval_half<T: Scalar>(half: &[Complex<T>], psi: T) -> T {
    half.iter().enumerate().fold(T::zero(), |acc, (k, c)| {
        if k == 0 {
            acc + c.re
        } else {
            acc + T::lit(2.0) * (c * Complex::from_polar(T::one(), T::from_usize(k).unwrap() * psi)).re
        }
    })
}

/// Synthetic directional pattern with a main lobe at boresight (ψ = 0), side
/// lobes near ±90° and a back lobe near 180°, in dB.
///
/// The gain is a sum of von Mises shaped lobes on a floor; each lobe has a
/// closed-form Fourier series in modified Bessel functions. Lobe amplitudes
/// are solved so the order-`K` series hits `main_gain`, `side_level` and
/// `back_level` exactly at 0°, ±90° and 180°.
pub fn synth_pattern<T: Scalar>(main_gain: T, side_level: T, back_level: T, order: usize) -> Result<SensorPattern<T>> {
    synth_pattern_with(main_gain, side_level, back_level, order, LobeShape::default())
}

pub fn synth_pattern_with<T: Scalar>(
    main_gain: T,
    side_level: T,
    back_level: T,
    order: usize,
    shape: LobeShape,
) -> Result<SensorPattern<T>> {
    if order < 3 {
        return Err(Error::InvalidParameter(format!("synthetic pattern needs order >= 3, got {order}")));
    }
    if !(main_gain.is_finite() && side_level.is_finite() && back_level.is_finite()) {
        return Err(Error::NonFinite("lobe levels"));
    }
    if side_level >= main_gain || back_level >= main_gain {
        return Err(Error::InvalidParameter(format!(
            "lobe levels must sit below the main lobe: main {main_gain}, side {side_level}, back {back_level}"
        )));
    }
    let c = T::lit;
    let floor = side_level.min(back_level) - c(shape.null_depth);
    let half_pi = T::FRAC_PI_2();
    let main = lobe_half(c(shape.main_width), T::zero(), order);
    let side_a = lobe_half(c(shape.side_width), half_pi, order);
    let side_b = lobe_half(c(shape.side_width), -half_pi, order);
    let side: Vec<Complex<T>> = side_a.iter().zip(&side_b).map(|(a, b)| a + b).collect();
    let back = lobe_half(c(shape.back_width), T::PI(), order);

    // amplitudes from lobes[j] evaluated at anchors[i]
    let anchors = [T::zero(), half_pi, T::PI()];
    let targets = [main_gain - floor, side_level - floor, back_level - floor];
    let lobes = [&main, &side, &back];
    let mut m = [[T::zero(); 3]; 3];
    for (i, &a) in anchors.iter().enumerate() {
        for (j, lobe) in lobes.iter().enumerate() {
            m[i][j] = eval_half(lobe, a);
        }
    }
    let amps = solve3(m, targets)
        .ok_or_else(|| Error::InvalidParameter("lobe layout does not determine the amplitudes".into()))?;

    let mut half = vec![Complex::new(T::zero(), T::zero()); order + 1];
    half[0].re = floor;
    for (lobe, amp) in lobes.iter().zip(amps) {
        for (h, l) in half.iter_mut().zip(lobe.iter()) {
            *h = *h + l * amp;
        }
    }
    let pattern = SensorPattern::from_half("synth", &half)?;

    // single global maximum at boresight on a 1° grid
    let peak = (0..360)
        .map(|d| pattern.eval(T::from_i32(d).unwrap().to_radians()).unwrap())
        .enumerate()
        .fold((0usize, T::neg_infinity()), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    if peak.0 != 0 {
        warn!("synthetic pattern peaks at {}° instead of boresight", peak.0);
        return Err(Error::InvalidParameter(format!("infeasible lobe levels: maximum lands at {}°", peak.0)));
    }
    Ok(pattern)
}

fn solve3<T: Scalar>(m: [[T; 3]; 3], b: [T; 3]) -> Option<[T; 3]> {
    let det = |m: &[[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < T::epsilon() {
        return None;
    }
    let mut out = [T::zero(); 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = b[row];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// Sensor patterns plus the detection model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig<T> {
    patterns: Vec<SensorPattern<T>>,
    sigma: Vec<T>,
    gamma: T,
    pc: Vec<T>,
}

impl<T: Scalar> ArrayConfig<T> {
    /// Shared noise level and detection efficiency for every sensor.
    pub fn uniform(patterns: Vec<SensorPattern<T>>, sigma: T, gamma: T, pc: T) -> Result<Self> {
        let n = patterns.len();
        Self::new(patterns, vec![sigma; n], gamma, vec![pc; n])
    }

    pub fn new(patterns: Vec<SensorPattern<T>>, sigma: Vec<T>, gamma: T, pc: Vec<T>) -> Result<Self> {
        let n = patterns.len();
        if n == 0 {
            return Err(Error::InvalidParameter("array needs at least one sensor".into()));
        }
        if sigma.len() != n || pc.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{n} patterns but {} noise levels and {} efficiencies",
                sigma.len(),
                pc.len()
            )));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > T::zero())) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {s}")));
        }
        if let Some(p) = pc.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
            return Err(Error::InvalidParameter(format!("detection efficiency must lie in [0, 1], got {p}")));
        }
        if gamma.is_nan() {
            return Err(Error::NonFinite("threshold"));
        }
        Ok(Self { patterns, sigma, gamma, pc })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[SensorPattern<T>] {
        &self.patterns
    }

    pub fn pattern(&self, m: usize) -> &SensorPattern<T> {
        &self.patterns[m]
    }

    pub fn sigma(&self, m: usize) -> T {
        self.sigma[m]
    }

    pub fn sigmas(&self) -> &[T] {
        &self.sigma
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn pc(&self, m: usize) -> T {
        self.pc[m]
    }

    pub fn pcs(&self) -> &[T] {
        &self.pc
    }

    pub fn with_gamma(&self, gamma: T) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn with_pc(&self, pc: T) -> Result<Self> {
        Self::new(self.patterns.clone(), self.sigma.clone(), self.gamma, vec![pc; self.len()])
    }

    pub fn with_pcs(&self, pc: Vec<T>) -> Result<Self> {
        Self::new(self.patterns.clone(), self.sigma.clone(), self.gamma, pc)
    }

    pub fn with_sigma(&self, sigma: T) -> Result<Self> {
        Self::new(self.patterns.clone(), vec![sigma; self.len()], self.gamma, self.pc.clone())
    }

    /// Clamped gain of sensor `m` at `psi`.
    pub fn gain(&self, m: usize, psi: T) -> Result<T> {
        let (g, clamped) = clamp_gain(self.patterns[m].eval(psi)?);
        if clamped {
            warn!("gain of sensor {m} clamped at psi={psi}");
        }
        Ok(g)
    }

    /// Index of the sensor with the given id.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.patterns.iter().position(|p| p.id() == id)
    }
}
