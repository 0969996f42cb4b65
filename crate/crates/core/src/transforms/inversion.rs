//! Numerical Laplace-transform inversion.
//!
//! Two algorithms are provided:
//!
//! * **Euler summation** (Bromwich integral discretised by the trapezoidal
//!   rule, the alternating series accelerated by binomial averaging of the
//!   last `euler_order` partial sums). The discretisation parameter `A` is
//!   derived from the target tolerance. The leading aliasing term
//!   `e^{-A} f(3t)` is removed by combining two values of `A`, so growing
//!   originals such as ramps keep the requested accuracy.
//! * **Fixed Talbot** (deformed contour), suited to transforms whose
//!   singularities lie on the non-positive real axis.
//!
//! Transforms are passed as closures over complex arguments. Originals are
//! assumed real (conjugate-symmetric transforms) unless the `_complex`
//! variants are used, which evaluate both halves of the contour.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    EulerSummation,
    Talbot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionConfig {
    pub algorithm: Algorithm,
    /// Partial sums before Euler averaging (Euler) or contour nodes (Talbot).
    pub terms: usize,
    /// Number of binomially averaged partial sums.
    pub euler_order: usize,
    pub target_abs_tol: f64,
    /// Multiplies the Talbot contour radius.
    pub contour_scale: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::EulerSummation,
            terms: 41,
            euler_order: 12,
            target_abs_tol: 1e-8,
            contour_scale: 1.0,
        }
    }
}

impl InversionConfig {
    pub fn talbot() -> Self {
        Self { algorithm: Algorithm::Talbot, terms: 24, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms < 10 {
            return Err(Error::param("terms", format!("{} < 10", self.terms)));
        }
        if !(self.target_abs_tol > 0.0) {
            return Err(Error::param("target_abs_tol", "must be positive"));
        }
        if !(self.contour_scale > 0.0) {
            return Err(Error::param("contour_scale", "must be positive"));
        }
        Ok(())
    }

    /// Euler discretisation parameter for this tolerance.
    pub(crate) fn euler_a(&self) -> f64 {
        (1.0 / self.target_abs_tol).ln() + 2.0
    }
}

/// An inverted value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverted {
    pub value: f64,
    pub error: f64,
}

impl Inverted {
    /// Fails with `AccuracyNotReached` (carrying the estimate) when the
    /// error estimate exceeds `tol`.
    pub fn checked(self, tol: f64) -> Result<Self> {
        if self.error > tol || !self.value.is_finite() {
            Err(Error::AccuracyNotReached { value: self.value, error: self.error })
        } else {
            Ok(self)
        }
    }
}

fn binomial_weights(m: usize) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    let mut c = 1.0f64;
    let scale = 0.5f64.powi(m as i32);
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = c * scale;
        c = c * (m - k) as f64 / (k + 1) as f64;
    }
    w
}

/// Shift between the two discretisation parameters used for aliasing
/// extrapolation.
pub(crate) const ALIAS_SHIFT: f64 = 2.0;

pub(crate) struct EulerSum {
    pub value: Complex64,
    /// Change between the last two Euler averages.
    pub truncation: f64,
    /// Roundoff bound from the magnitude of the summed terms.
    pub roundoff: f64,
}

/// Euler-accelerated Bromwich sum with explicit discretisation parameter `a`.
pub(crate) fn euler_core<F>(fhat: &F, t: f64, a: f64, n: usize, m: usize, complex_valued: bool) -> Result<EulerSum>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let total = n + m;
    let mut partial = Vec::with_capacity(total + 1);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    let step = std::f64::consts::PI / t;
    let re = a / (2.0 * t);
    for k in 0..=total {
        let s = Complex64::new(re, step * k as f64);
        let term = if k == 0 {
            fhat(s)?
        } else {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let pair = if complex_valued { fhat(s)? + fhat(s.conj())? } else { Complex64::from(2.0 * fhat(s)?.re) };
            pair * sign
        };
        magnitude += term.norm();
        sum += term;
        partial.push(sum);
    }
    let w = binomial_weights(m);
    let avg = |start: usize| -> Complex64 { w.iter().enumerate().map(|(j, wj)| partial[start + j] * *wj).sum() };
    let scale = (a / 2.0).exp() / (2.0 * t);
    let e_n = avg(n) * scale;
    let e_prev = avg(n - 1) * scale;
    Ok(EulerSum { value: e_n, truncation: (e_n - e_prev).norm(), roundoff: 8.0 * f64::EPSILON * magnitude * scale })
}

/// Euler inversion at `a` and `a + ALIAS_SHIFT`, extrapolated to cancel
/// the leading aliasing term. Returns the value and an error estimate.
pub(crate) fn euler_extrapolated<F>(
    fhat: &F,
    t: f64,
    a: f64,
    n: usize,
    m: usize,
    complex_valued: bool,
) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let lo = euler_core(fhat, t, a, n, m, complex_valued)?;
    let hi = euler_core(fhat, t, a + ALIAS_SHIFT, n, m, complex_valued)?;
    let r = (-ALIAS_SHIFT).exp();
    let value = (hi.value - lo.value * r) / (1.0 - r);
    let alias = (-a).exp() * (hi.value - lo.value).norm() / (1.0 - r);
    let error = lo.truncation.max(hi.truncation) + lo.roundoff.max(hi.roundoff) + alias;
    Ok((value, error))
}

fn talbot_core<F>(fhat: &F, t: f64, m: usize, scale: f64, complex_valued: bool) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let r = scale * 2.0 * m as f64 / (5.0 * t);
    let mut acc = fhat(Complex64::from(r))? * (0.5 * (r * t).exp());
    for k in 1..m {
        let th = k as f64 * std::f64::consts::PI / m as f64;
        let cot = th.cos() / th.sin();
        let z = Complex64::new(r * th * cot, r * th);
        let sigma = th + (th * cot - 1.0) * cot;
        let dz = Complex64::new(1.0, sigma);
        let upper = (z * t).exp() * fhat(z)? * dz;
        if complex_valued {
            let lower = (z.conj() * t).exp() * fhat(z.conj())? * dz.conj();
            acc += (upper + lower) * 0.5;
        } else {
            acc += upper.re;
        }
    }
    Ok(acc * (r / m as f64))
}

fn run<F>(fhat: &F, t: f64, cfg: &InversionConfig, complex_valued: bool) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    cfg.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidRange(format!("inversion point t = {t} must be positive")));
    }
    match cfg.algorithm {
        Algorithm::EulerSummation => {
            euler_extrapolated(fhat, t, cfg.euler_a(), cfg.terms, cfg.euler_order, complex_valued)
        }
        Algorithm::Talbot => {
            let v = talbot_core(fhat, t, cfg.terms, cfg.contour_scale, complex_valued)?;
            // Compare against a coarser contour for an error estimate.
            let coarse = talbot_core(fhat, t, cfg.terms - 4, cfg.contour_scale, complex_valued)?;
            Ok((v, (v - coarse).norm()))
        }
    }
}

/// Inverts the transform of a real function at `t`, returning the best
/// estimate with its error even when the tolerance was not met.
pub fn invert_estimate<F>(fhat: F, t: f64, cfg: &InversionConfig) -> Result<Inverted>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let (v, error) = run(&fhat, t, cfg, false)?;
    Ok(Inverted { value: v.re, error })
}

/// Inverts the transform of a real function at `t`; fails with
/// `AccuracyNotReached` when the error estimate exceeds the target.
pub fn invert<F>(fhat: F, t: f64, cfg: &InversionConfig) -> Result<Inverted>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    invert_estimate(fhat, t, cfg)?.checked(cfg.target_abs_tol)
}

/// Inverts the transform of a complex-valued function at `t`.
pub fn invert_complex<F>(fhat: F, t: f64, cfg: &InversionConfig) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    run(&fhat, t, cfg, true)
}
