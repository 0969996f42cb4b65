//! Double transforms of the occupation time of an alternating renewal
//! process and their numerical inversion.

pub mod inversion;

use std::cell::Cell;

use num_complex::Complex64;

pub use inversion::{invert, invert_complex, invert_estimate, Algorithm, InversionConfig, Inverted};

use crate::error::{Error, Result};
use crate::renewal::SojournLaw;

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRange(format!("q = {q} must be > 0")))
    }
}

/// `∫₀^∞ e^{-qt} E e^{-θα(t)} dt` at complex arguments.
pub fn alpha_double_transform_complex(law: &SojournLaw, theta: Complex64, q: Complex64) -> Result<Complex64> {
    let s = q + theta;
    let l1 = law.l1(s)?;
    let l12 = law.l12(s, q)?;
    Ok(((1.0 - l1) / s + (l1 - l12) / q) / (1.0 - l12))
}

/// `∫₀^∞ e^{-qt} E e^{-θα(t)} dt` for `θ ≥ 0`, `q > 0`; lies in `(0, 1/q]`.
pub fn alpha_double_transform(law: &SojournLaw, theta: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidRange(format!("theta = {theta} must be >= 0")));
    }
    if theta == 0.0 {
        return Ok(1.0 / q);
    }
    let l12 = law.l12(Complex64::from(q + theta), Complex64::from(q))?.re;
    if l12 >= 1.0 {
        return Err(Error::DivergentTransform(l12));
    }
    Ok(alpha_double_transform_complex(law, Complex64::from(theta), Complex64::from(q))?.re)
}

/// Transforms of `P(X(t) ∈ A)` and `P(X(t) ∈ B)` given `X(0) ∈ A`.
pub fn availability_transforms(law: &SojournLaw, q: f64) -> Result<(f64, f64)> {
    check_q(q)?;
    let z = Complex64::from(q);
    let l1 = law.l1(z)?.re;
    let l12 = law.l12(z, z)?.re;
    if l12 >= 1.0 {
        return Err(Error::DivergentTransform(l12));
    }
    let in_a = (1.0 - l1) / (1.0 - l12) / q;
    let in_b = (l1 - l12) / (1.0 - l12) / q;
    Ok((in_a, in_b))
}

/// `P(X(t) ∈ A | X(0) ∈ A)` by inversion of the availability transform.
pub fn availability_at(law: &SojournLaw, t: f64, cfg: &InversionConfig) -> Result<Inverted> {
    if t == 0.0 {
        return Ok(Inverted { value: 1.0, error: 0.0 });
    }
    let fhat = |q: Complex64| -> Result<Complex64> { Ok((1.0 - law.l1(q)?) / (1.0 - law.l12(q, q)?) / q) };
    let r = invert(fhat, t, cfg)?;
    Ok(Inverted { value: r.value.clamp(0.0, 1.0), error: r.error })
}

/// Discretisation parameter ceiling for the outer inversion: its roundoff
/// amplification multiplies the inner inversion error.
const OUTER_A_MAX: f64 = 16.0;
const INNER_TOL: f64 = 1e-11;

/// `P(α(t) ≤ x)` from a double transform `(θ, q) ↦ ∫ e^{-qt} E e^{-θα(t)} dt`.
///
/// The inner inversion in `q` gives `E e^{-θα(t)}` at complex `θ`; the outer
/// inversion of `E e^{-θα(t)}/θ` gives the distribution function. The
/// achievable accuracy is limited to about `1e-6` by the nesting.
pub fn occupation_cdf_via_inversion<F>(source: F, t: f64, x: f64, cfg: &InversionConfig) -> Result<Inverted>
where
    F: Fn(Complex64, Complex64) -> Result<Complex64>,
{
    cfg.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidRange(format!("t = {t} must be positive")));
    }
    if !(0.0..=t).contains(&x) {
        return Err(Error::InvalidRange(format!("x = {x} outside [0, {t}]")));
    }
    if x == t {
        return Ok(Inverted { value: 1.0, error: 0.0 });
    }
    let inner_cfg = InversionConfig { algorithm: Algorithm::EulerSummation, target_abs_tol: INNER_TOL, ..cfg.clone() };
    // the inner transform has singularities near q = -θ; the Euler sum has
    // to run past |Im θ| to resolve them
    let inner = |theta: Complex64| -> Result<(Complex64, f64)> {
        let extra = (theta.im.abs() * t / std::f64::consts::PI).ceil() as usize;
        let cfg = InversionConfig { terms: inner_cfg.terms + extra, ..inner_cfg.clone() };
        invert_complex(|q| source(theta, q), t, &cfg)
    };
    if x == 0.0 {
        // P(α(t) = 0) = lim_{θ→∞} E e^{-θα(t)}
        let (v, e) = inner(Complex64::from(1e6 / t))?;
        return Ok(Inverted { value: v.re.clamp(0.0, 1.0), error: e });
    }

    let propagated = Cell::new(0.0);
    let outer = |theta: Complex64| -> Result<Complex64> {
        let (g, e) = inner(theta)?;
        propagated.set(propagated.get() + 2.0 * e / theta.norm());
        Ok(g / theta)
    };
    let (value, error) = match cfg.algorithm {
        Algorithm::EulerSummation => {
            let a = cfg.euler_a().min(OUTER_A_MAX);
            let (v, e) = inversion::euler_extrapolated(&outer, x, a, cfg.terms, cfg.euler_order, false)?;
            // the propagated sum covers both contours; weight by the larger scale
            let scale = ((a + inversion::ALIAS_SHIFT) / 2.0).exp() / (2.0 * x);
            (v.re, e + scale * propagated.get() * 0.5)
        }
        Algorithm::Talbot => {
            let r = invert_estimate(outer, x, cfg)?;
            (r.value, r.error + propagated.get())
        }
    };
    let clamped = value.clamp(0.0, 1.0);
    if (clamped - value).abs() > cfg.target_abs_tol {
        log::debug!("occupation cdf clamped from {value} at t = {t}, x = {x}");
    }
    Ok(Inverted { value: clamped, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal::{Marginal, SojournLaw};

    fn exp_exp() -> SojournLaw {
        SojournLaw::independent(Marginal::exponential(1.0).unwrap(), Marginal::exponential(1.0).unwrap())
    }

    #[test]
    fn double_transform_reference_value() {
        let v = alpha_double_transform(&exp_exp(), 1.0, 1.0).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
        assert_eq!(alpha_double_transform(&exp_exp(), 0.0, 3.0).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn availability() {
        let (a, b) = availability_transforms(&exp_exp(), 1.0).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert!((a + b - 1.0).abs() < 1e-15);
        let cfg = InversionConfig::default();
        let v = availability_at(&exp_exp(), 1.0, &cfg).unwrap();
        assert!((v.value - (0.5 + 0.5 * (-2f64).exp())).abs() < 1e-8);
        let v = availability_at(&exp_exp(), 40.0, &cfg).unwrap();
        assert!((v.value - 0.5).abs() < 1e-6);
        assert_eq!(availability_at(&exp_exp(), 0.0, &cfg).unwrap().value, 1.0);
    }

    #[test]
    fn rare_switching_stays_in_a() {
        let law = SojournLaw::independent(Marginal::exponential(1e-9).unwrap(), Marginal::exponential(1.0).unwrap());
        let (a, _) = availability_transforms(&law, 2.0).unwrap();
        assert!((a - 0.5).abs() < 1e-8);
    }

    #[test]
    fn iterated_inversion_endpoints() {
        let law = exp_exp();
        let cfg = InversionConfig::default();
        let src = |th: Complex64, q: Complex64| alpha_double_transform_complex(&law, th, q);
        assert_eq!(occupation_cdf_via_inversion(src, 2.0, 2.0, &cfg).unwrap().value, 1.0);
        assert!(occupation_cdf_via_inversion(src, 2.0, 2.5, &cfg).is_err());
        let zero = occupation_cdf_via_inversion(src, 2.0, 0.0, &cfg).unwrap();
        assert!(zero.value < 1e-6);
    }
}
