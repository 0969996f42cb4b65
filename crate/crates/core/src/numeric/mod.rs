//! Shared numerical building blocks.

pub mod quadrature;
pub mod roots;

use num_complex::Complex64;
use statrs::function::erf::erfc;

pub use quadrature::{integrate, integrate_split, Integral};
pub use roots::brent;

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `(e^{z x} - 1) / z`, continuous at `z = 0`.
pub(crate) fn exp_ratio(z: Complex64, x: f64) -> Complex64 {
    let zx = z * x;
    if zx.norm() < 1e-5 {
        // series: x (1 + zx/2 + (zx)^2/6 + (zx)^3/24)
        Complex64::from(x) * (1.0 + zx * (0.5 + zx * (1.0 / 6.0 + zx / 24.0)))
    } else {
        (zx.exp() - 1.0) / z
    }
}

/// Central first derivative with one Richardson step (fourth order).
#[cfg(test)]
pub(crate) fn richardson_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let d1 = d(h);
    let d2 = d(0.5 * h);
    (4.0 * d2 - d1) / 3.0
}

/// Central second derivative with one Richardson step.
#[cfg(test)]
pub(crate) fn richardson_diff2<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let f0 = f(x);
    let d = |h: f64| (f(x + h) - 2.0 * f0 + f(x - h)) / (h * h);
    let d1 = d(h);
    let d2 = d(0.5 * h);
    (4.0 * d2 - d1) / 3.0
}

/// Mixed partial `∂²f/∂x∂y` by central differences with one Richardson step.
#[cfg(test)]
pub(crate) fn richardson_mixed<F: Fn(f64, f64) -> f64>(f: F, x: f64, y: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
    let d1 = d(h);
    let d2 = d(0.5 * h);
    (4.0 * d2 - d1) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-11);
        assert!((std_normal_cdf(-3.0) / 0.001_349_898_031_630_094_6 - 1.0).abs() < 1e-10);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn exp_ratio_is_continuous_at_zero() {
        let x = 2.0;
        let small = exp_ratio(Complex64::new(1e-7, 0.0), x);
        assert!((small.re - x).abs() < 1e-6);
        let big = exp_ratio(Complex64::new(1.0, 0.0), x);
        assert!((big.re - (2f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn finite_differences() {
        assert!((richardson_diff(f64::sin, 0.3, 1e-3) - 0.3f64.cos()).abs() < 1e-12);
        assert!((richardson_diff2(f64::exp, 0.5, 1e-3) - 0.5f64.exp()).abs() < 1e-8);
        let m = richardson_mixed(|x, y| (x * y).exp(), 0.2, 0.4, 1e-3);
        let exact = (1.0 + 0.08) * 0.08f64.exp();
        assert!((m - exact).abs() < 1e-8);
    }
}
