//! Finite exponential sums `f(x) = Σ c_k e^{r_k x}` with complex
//! coefficients and rates. Closed-form scale functions of the shipped
//! models are of this form.

use num_complex::Complex64;

use crate::numeric::exp_ratio;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    terms: Vec<(Complex64, Complex64)>,
}

impl ExpSum {
    pub fn new(terms: Vec<(Complex64, Complex64)>) -> Self {
        Self { terms }
    }

    /// `(coefficient, rate)` pairs.
    pub fn terms(&self) -> &[(Complex64, Complex64)] {
        &self.terms
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|&(c, r)| c * (r * x).exp()).sum()
    }

    pub fn deriv(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|&(c, r)| c * r * (r * x).exp()).sum()
    }

    /// `∫₀ˣ f(y) dy`.
    pub fn integral(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|&(c, r)| c * exp_ratio(r, x)).sum()
    }

    /// `e^{-shift·x} f(x)`.
    pub fn tilted(&self, shift: Complex64) -> Self {
        Self { terms: self.terms.iter().map(|&(c, r)| (c, r - shift)).collect() }
    }

    /// `(f ⋆ f)(x) = ∫₀ˣ f(y) f(x-y) dy` in closed form.
    pub fn self_convolution(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(ci, ri) in &self.terms {
            for &(cj, rj) in &self.terms {
                // ∫₀ˣ e^{ri y} e^{rj (x-y)} dy = e^{rj x} (e^{(ri-rj)x} - 1)/(ri - rj)
                acc += ci * cj * (rj * x).exp() * exp_ratio(ri - rj, x);
            }
        }
        acc
    }

    /// `d/dx (f ⋆ f)(x)`.
    pub fn self_convolution_deriv(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(ci, ri) in &self.terms {
            for &(cj, rj) in &self.terms {
                acc += ci * cj * (rj * (rj * x).exp() * exp_ratio(ri - rj, x) + (ri * x).exp());
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn evaluation_and_calculus() {
        // 2 - e^{-x/2}
        let f = ExpSum::new(vec![(c(2.0), c(0.0)), (c(-1.0), c(-0.5))]);
        assert!((f.eval(1.0).re - (2.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((f.deriv(1.0).re - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
        let int = 2.0 - 2.0 * (1.0 - (-0.5f64).exp());
        assert!((f.integral(1.0).re - int).abs() < 1e-14);
    }

    #[test]
    fn self_convolution_matches_hand_integral() {
        let f = ExpSum::new(vec![(c(2.0), c(0.0)), (c(-1.0), c(-0.5))]);
        // 4x - 8 + 8e^{-x/2} + x e^{-x/2}
        let x = 1.3;
        let e = (-x / 2.0f64).exp();
        let exact = 4.0 * x - 8.0 + 8.0 * e + x * e;
        assert!((f.self_convolution(x).re - exact).abs() < 1e-12);
        let d = 4.0 - 4.0 * e + e - 0.5 * x * e;
        assert!((f.self_convolution_deriv(x).re - d).abs() < 1e-12);
    }
}
