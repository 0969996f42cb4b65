use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{integrate, std_normal_cdf};

/// `tanh z` for `Re z ≥ 0`, without overflow for large `Re z`.
fn tanh_right(z: Complex64) -> Complex64 {
    let e = (-2.0 * z).exp();
    (1.0 - e) / (1.0 + e)
}

/// Whether `(μ, σ²)` is the driftless unit-variance case, where the reflected
/// double transform coincides with the classical tabulated formula.
pub fn is_borodin_salminen_case(mu: f64, sigma2: f64) -> bool {
    mu == 0.0 && sigma2 == 1.0
}

/// Double transform of the occupation of `[0, τ]` by Brownian motion with
/// drift `μ` and variance `σ²` reflected at 0 and started at `τ`.
///
/// With `D(z) = 2σ²z + μ²`, `Δ = D(q+θ)` and `T = tanh(√Δ τ/σ²)`:
/// `(1/q) [1 - 2θσ²T / ((Δ + μ√D(q)) T + σ²ψ(q)√Δ)]`.
pub fn rbm_double_transform_complex(
    mu: f64,
    sigma2: f64,
    tau: f64,
    theta: Complex64,
    q: Complex64,
) -> Result<Complex64> {
    if !(sigma2 > 0.0) {
        return Err(Error::param("sigma2", "must be positive"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", "level must be finite and >= 0"));
    }
    let dq = (2.0 * sigma2 * q + mu * mu).sqrt();
    let psi = if mu < 0.0 { 2.0 * q / (dq - mu) } else { (mu + dq) / sigma2 };
    let delta = 2.0 * sigma2 * (q + theta) + mu * mu;
    let root = delta.sqrt();
    let th = tanh_right(root * tau / sigma2);
    let frac = 2.0 * theta * sigma2 * th / ((delta + mu * dq) * th + sigma2 * psi * root);
    Ok((1.0 - frac) / q)
}

pub fn rbm_double_transform(mu: f64, sigma2: f64, tau: f64, theta: f64, q: f64) -> Result<f64> {
    if !(theta >= 0.0) || !(q > 0.0) {
        return Err(Error::InvalidRange(format!("need theta >= 0 and q > 0, got ({theta}, {q})")));
    }
    Ok(rbm_double_transform_complex(mu, sigma2, tau, Complex64::from(theta), Complex64::from(q))?.re)
}

fn check_mu_t(mu: f64, t: f64) -> Result<()> {
    if !mu.is_finite() {
        return Err(Error::param("mu", "must be finite"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidRange(format!("t = {t} must be positive")));
    }
    Ok(())
}

fn density_unchecked(mu: f64, t: f64, u: f64) -> f64 {
    let g = |s: f64| (-0.5 * mu * mu * s).exp() / (2.0 * PI * s).sqrt();
    let ahead = g(t - u) + mu * std_normal_cdf(mu * (t - u).sqrt());
    let behind = g(u) - mu * std_normal_cdf(-mu * u.sqrt());
    2.0 * ahead * behind
}

/// Density of the time spent in `(-∞, 0]` up to `t` by a unit-variance
/// Brownian motion with drift `μ` started at 0, at `u ∈ (0, t)`.
///
/// At `μ = 0` this is the arcsine density `1/(π√(u(t-u)))`.
pub fn bm_free_occupation_density(mu: f64, t: f64, u: f64) -> Result<f64> {
    check_mu_t(mu, t)?;
    if !(u > 0.0 && u < t) {
        return Err(Error::InvalidRange(format!("u = {u} must lie in (0, {t})")));
    }
    Ok(density_unchecked(mu, t, u))
}

/// [`bm_free_occupation_density`] for variance `σ²`: the occupation of the
/// half-line is invariant under `X → X/σ`, which maps the drift to `μ/σ`.
pub fn bm_free_occupation_density_scaled(mu: f64, sigma2: f64, t: f64, u: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::param("sigma2", "must be positive"));
    }
    bm_free_occupation_density(mu / sigma2.sqrt(), t, u)
}

/// `P(α(t) ≤ x)` for the free unit-variance Brownian motion, by quadrature
/// of the density after the substitution `u = t sin²φ`.
pub fn bm_free_occupation_cdf(mu: f64, t: f64, x: f64) -> Result<f64> {
    check_mu_t(mu, t)?;
    if !(0.0..=t).contains(&x) {
        return Err(Error::InvalidRange(format!("x = {x} must lie in [0, {t}]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let upper = (x / t).sqrt().asin();
    let r = integrate(
        |phi| {
            let (s, c) = phi.sin_cos();
            let u = t * s * s;
            if u <= 0.0 || u >= t {
                return 0.0;
            }
            density_unchecked(mu, t, u) * 2.0 * t * s * c
        },
        0.0,
        upper,
        1e-12,
    );
    Ok(r.value.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LevyModel, ScaleEvaluator};
    use crate::storage::{free_occupation_double_transform, occupation_double_transform};
    use crate::transforms::{invert_estimate, InversionConfig};

    #[test]
    fn matches_scale_function_route() {
        for &(mu, s2) in &[(-1.0, 1.0), (-0.3, 2.5), (-2.0, 0.5)] {
            let s = ScaleEvaluator::new(LevyModel::brownian(mu, s2).unwrap());
            for &tau in &[0.0, 0.4, 1.0, 3.0] {
                for &(th, q) in &[(1.0, 1.0), (0.2, 3.0), (5.0, 0.1)] {
                    let a = rbm_double_transform(mu, s2, tau, th, q).unwrap();
                    let b = occupation_double_transform(&s, tau, th, q).unwrap();
                    assert!((a - b).abs() < 1e-10, "mu={mu} s2={s2} tau={tau}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn normalisation_and_limits() {
        assert!((rbm_double_transform(0.0, 1.0, 1.0, 0.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((rbm_double_transform(-1.0, 1.0, 0.0, 3.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        let far = rbm_double_transform(-1.0, 1.0, 50.0, 1.0, 1.0).unwrap();
        let m = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert!((far - free_occupation_double_transform(&m, 1.0, 1.0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn arcsine_reduction() {
        let v = bm_free_occupation_density(0.0, 1.0, 0.5).unwrap();
        assert!((v - 2.0 / PI).abs() < 1e-15);
        for &u in &[0.1, 0.37, 1.6] {
            let a = bm_free_occupation_density(0.0, 2.0, u).unwrap();
            let b = bm_free_occupation_density(0.0, 2.0, 2.0 - u).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        assert!((bm_free_occupation_cdf(0.0, 1.0, 0.5).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn density_is_normalised_with_the_right_mean() {
        for &mu in &[-1.0, -0.5, 0.3, 1.0] {
            let t = 1.0;
            assert!((bm_free_occupation_cdf(mu, t, t).unwrap() - 1.0).abs() < 1e-9, "mu={mu}");
            // E α(t) = ∫₀ᵗ P(X_s ≤ 0) ds = ∫₀ᵗ Φ(-μ√s) ds
            let exact = integrate(|s| std_normal_cdf(-mu * s.sqrt()), 0.0, t, 1e-13).value;
            let upper = std::f64::consts::FRAC_PI_2;
            let mean = integrate(
                |phi| {
                    let (s, c) = phi.sin_cos();
                    let u = t * s * s;
                    if u <= 0.0 || u >= t {
                        0.0
                    } else {
                        u * density_unchecked(mu, t, u) * 2.0 * t * s * c
                    }
                },
                0.0,
                upper,
                1e-12,
            )
            .value;
            assert!((mean - exact).abs() < 1e-9, "mu={mu}: {mean} vs {exact}");
        }
    }

    #[test]
    fn density_matches_inverted_transform() {
        // E e^{-θα(t)} from the free double transform vs the density
        let (mu, t, th) = (-1.0, 1.0, 0.8);
        let m = LevyModel::brownian(mu, 1.0).unwrap();
        let lst = invert_estimate(
            |q| crate::storage::free_occupation_double_transform_complex(&m, Complex64::from(th), q),
            t,
            &InversionConfig::talbot(),
        )
        .unwrap();
        let upper = std::f64::consts::FRAC_PI_2;
        let direct = integrate(
            |phi| {
                let (s, c) = phi.sin_cos();
                let u = t * s * s;
                if u <= 0.0 || u >= t {
                    0.0
                } else {
                    (-th * u).exp() * density_unchecked(mu, t, u) * 2.0 * t * s * c
                }
            },
            0.0,
            upper,
            1e-12,
        )
        .value;
        assert!((lst.value - direct).abs() < 1e-8, "{} vs {direct}", lst.value);
    }

    #[test]
    fn scaled_density_uses_normalised_drift() {
        let a = bm_free_occupation_density_scaled(-2.0, 4.0, 1.5, 0.6).unwrap();
        let b = bm_free_occupation_density(-1.0, 1.5, 0.6).unwrap();
        assert_eq!(a, b);
    }
}
