//! Scale functions `W^(q)`, `Z^(q)` and their tilted variants.
//!
//! Brownian and exponential-jump models have exponential-sum closed forms
//! valid for complex `q`. Phase-type jumps go through Euler inversion of
//! the tilted transform `1/(φ(θ + ψ(q)) - q)`, whose original
//! `e^{-ψ(q)x} W^(q)(x)` is bounded.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;

use super::expsum::ExpSum;
use super::model::{LevyKind, LevyModel};
use crate::error::{Error, Result};
use crate::numeric::integrate;
use crate::transforms::inversion::{invert_estimate, InversionConfig};

const QUAD_TOL: f64 = 1e-10;
const REL_TOL: f64 = 1e-8;

/// `(e^{-ψ(q)x} W^(q+θ)(x), 1 + θ ∫₀ˣ W_tilt, W_tilt'(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tilted<T> {
    pub w: T,
    pub z: T,
    pub w_deriv: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Quantity {
    W,
    WDeriv,
    Conv,
    ConvDeriv,
}

pub struct ScaleEvaluator {
    model: LevyModel,
    inversion: InversionConfig,
    cache: Mutex<HashMap<(Quantity, u64, u64), f64>>,
}

impl std::fmt::Debug for ScaleEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScaleEvaluator").field("model", &self.model).finish_non_exhaustive()
    }
}

impl Clone for ScaleEvaluator {
    fn clone(&self) -> Self {
        Self::new(self.model.clone())
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRange(format!("scale functions need finite x >= 0, got {x}")))
    }
}

/// Roots of `a² + b a + c`, largest real part first, cancellation-free.
fn quadratic_roots(b: Complex64, c: Complex64) -> (Complex64, Complex64) {
    let disc = (b * b - 4.0 * c).sqrt();
    let s1 = -b + disc;
    let s2 = -b - disc;
    let (r1, r2) = if s1.norm() >= s2.norm() {
        let r = s1 / 2.0;
        (r, if r.norm() > 0.0 { c / r } else { Complex64::new(0.0, 0.0) })
    } else {
        let r = s2 / 2.0;
        (if r.norm() > 0.0 { c / r } else { Complex64::new(0.0, 0.0) }, r)
    };
    if r1.re >= r2.re {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

impl ScaleEvaluator {
    pub fn new(model: LevyModel) -> Self {
        let inversion = InversionConfig { target_abs_tol: 1e-10, ..InversionConfig::default() };
        Self { model, inversion, cache: Mutex::new(HashMap::new()) }
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// Exponential-sum representation of `W^(q)` for closed-form kinds.
    pub fn expsum(&self, q: Complex64) -> Result<ExpSum> {
        let one = Complex64::new(1.0, 0.0);
        match self.model.kind() {
            LevyKind::Brownian { mu, sigma2 } => {
                // 1/(σ²θ²/2 - μθ - q) = (2/σ²) / ((θ - r1)(θ - r2))
                let (r1, r2) = quadratic_roots(Complex64::from(-2.0 * mu / sigma2), -2.0 * q / *sigma2);
                if (r1 - r2).norm() == 0.0 {
                    return Err(Error::InvalidRange("repeated root in the Brownian scale function".into()));
                }
                let c = 2.0 / (sigma2 * (r1 - r2));
                Ok(ExpSum::new(vec![(c, r1), (-c, r2)]))
            }
            LevyKind::CompoundPoissonExp { lambda, jump_mean } => {
                // 1/(φ(θ) - q) = (m + θ)/P(θ), P(θ) = θ² + (m - λ - q)θ - qm
                let m = 1.0 / jump_mean;
                let b = (m - lambda) * one - q;
                let (r1, r2) = quadratic_roots(b, -q * m);
                if (r1 - r2).norm() == 0.0 {
                    return Err(Error::InvalidRange("repeated root in the compound Poisson scale function".into()));
                }
                let coef = |r: Complex64| (m + r) / (2.0 * r + b);
                Ok(ExpSum::new(vec![(coef(r1), r1), (coef(r2), r2)]))
            }
            LevyKind::CompoundPoissonPhaseType { .. } => {
                Err(Error::Unsupported("phase-type jumps have no exponential-sum scale function".into()))
            }
        }
    }

    fn cached(&self, what: Quantity, q: f64, x: f64, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
        let key = (what, q.to_bits(), x.to_bits());
        if let Some(&v) = self.cache.lock().expect("scale cache poisoned").get(&key) {
            return Ok(v);
        }
        let v = compute()?;
        self.cache.lock().expect("scale cache poisoned").insert(key, v);
        Ok(v)
    }

    /// Inverts `g(θ, φ(θ + c) - q)` at `x` with `c = ψ(q)` and undoes the tilt.
    fn invert_tilted<G>(&self, q: f64, x: f64, g: G) -> Result<f64>
    where
        G: Fn(Complex64, Complex64, f64) -> Complex64,
    {
        let c = self.model.psi(q)?;
        let fhat = |s: Complex64| Ok(g(s, self.model.phi_complex(s + c) - q, c));
        let r = invert_estimate(fhat, x, &self.inversion)?;
        // relative criterion: tilted originals range over several decades
        if r.error > REL_TOL * r.value.abs().max(1.0) {
            return Err(Error::AccuracyNotReached { value: (c * x).exp() * r.value, error: (c * x).exp() * r.error });
        }
        Ok((c * x).exp() * r.value)
    }

    fn check_q(&self, q: f64) -> Result<()> {
        self.model.require_stable()?;
        if q.is_finite() && q >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidRange(format!("scale functions need q >= 0, got {q}")))
        }
    }

    /// `W^(q)(x)`; zero for `x < 0`.
    pub fn w(&self, q: f64, x: f64) -> Result<f64> {
        self.check_q(q)?;
        if x < 0.0 {
            return Ok(0.0);
        }
        check_x(x)?;
        if self.model.has_closed_form() {
            return Ok(self.expsum(Complex64::from(q))?.eval(x).re);
        }
        if x == 0.0 {
            return Ok(1.0);
        }
        self.cached(Quantity::W, q, x, || self.invert_tilted(q, x, |_, d, _| 1.0 / d))
    }

    /// `W^(q)'(x)`, right derivative at 0.
    pub fn w_deriv(&self, q: f64, x: f64) -> Result<f64> {
        self.check_q(q)?;
        check_x(x)?;
        if self.model.has_closed_form() {
            return Ok(self.expsum(Complex64::from(q))?.deriv(x).re);
        }
        if let LevyKind::CompoundPoissonPhaseType { lambda, .. } = self.model.kind() {
            if x == 0.0 {
                return Ok(q + lambda);
            }
        }
        // transform of (e^{-cx}W)' is θF(θ) - W(0), and W' = e^{cx}(e^{-cx}W)' + cW
        let tilted_deriv = self.cached(Quantity::WDeriv, q, x, || self.invert_tilted(q, x, |s, d, _| s / d - 1.0))?;
        let c = self.model.psi(q)?;
        Ok(tilted_deriv + c * self.w(q, x)?)
    }

    /// `∫₀ˣ W^(q)(y) dy`.
    pub fn w_integral(&self, q: f64, x: f64) -> Result<f64> {
        self.check_q(q)?;
        check_x(x)?;
        if self.model.has_closed_form() {
            return Ok(self.expsum(Complex64::from(q))?.integral(x).re);
        }
        self.quadrature(|y| self.w(q, y), x)
    }

    fn quadrature<F: Fn(f64) -> Result<f64>>(&self, f: F, x: f64) -> Result<f64> {
        self.quadrature_on(f, 0.0, x)
    }

    fn quadrature_on<F: Fn(f64) -> Result<f64>>(&self, f: F, a: f64, x: f64) -> Result<f64> {
        if x == a {
            return Ok(0.0);
        }
        let err = std::cell::RefCell::new(None);
        let r = integrate(
            |y| match f(y) {
                Ok(v) => v,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            a,
            x,
            QUAD_TOL,
        );
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(r.value),
        }
    }

    /// `Z^(q)(x) = 1 + q ∫₀ˣ W^(q)`.
    pub fn z(&self, q: f64, x: f64) -> Result<f64> {
        if q == 0.0 {
            self.check_q(q)?;
            check_x(x.max(0.0))?;
            return Ok(1.0);
        }
        if x <= 0.0 {
            self.check_q(q)?;
            return Ok(1.0);
        }
        Ok(1.0 + q * self.w_integral(q, x)?)
    }

    /// `(W^(q) ⋆ W^(q))(x)`.
    pub fn selfconv(&self, q: f64, x: f64) -> Result<f64> {
        self.check_q(q)?;
        check_x(x)?;
        if self.model.has_closed_form() {
            return Ok(self.expsum(Complex64::from(q))?.self_convolution(x).re);
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        self.cached(Quantity::Conv, q, x, || self.invert_tilted(q, x, |_, d, _| 1.0 / (d * d)))
    }

    /// `d/dx (W^(q) ⋆ W^(q))(x)`.
    pub fn selfconv_deriv(&self, q: f64, x: f64) -> Result<f64> {
        self.check_q(q)?;
        check_x(x)?;
        if self.model.has_closed_form() {
            return Ok(self.expsum(Complex64::from(q))?.self_convolution_deriv(x).re);
        }
        if x == 0.0 {
            let w0 = self.w(q, 0.0)?;
            return Ok(w0 * w0);
        }
        self.cached(Quantity::ConvDeriv, q, x, || self.invert_tilted(q, x, |s, d, c| (s + c) / (d * d)))
    }

    /// Tilted scale functions at rate `ψ(q)` and index `θ`:
    /// `W_tilt(x) = e^{-ψ(q)x} W^(q+θ)(x)` and `Z_tilt = 1 + θ ∫₀ˣ W_tilt`.
    /// `θ` may be negative provided `q + θ ≥ 0`.
    pub fn tilted(&self, q: f64, theta: f64, x: f64) -> Result<Tilted<f64>> {
        self.check_q(q)?;
        check_x(x)?;
        if !(q + theta >= 0.0) {
            return Err(Error::InvalidRange(format!("tilt needs q + theta >= 0, got {}", q + theta)));
        }
        if self.model.has_closed_form() {
            let t = self.tilted_complex(Complex64::from(q), Complex64::from(theta), x)?;
            return Ok(Tilted { w: t.w.re, z: t.z.re, w_deriv: t.w_deriv.re });
        }
        let psi = self.model.psi(q)?;
        let qt = q + theta;
        let w_tilt = |y: f64| -> Result<f64> { Ok((-psi * y).exp() * self.w(qt, y)?) };
        let w = w_tilt(x)?;
        // W_tilt decays at rate ψ(q) - ψ(q+θ) when θ < 0; then 1 + θ∫₀^∞ W_tilt = 0
        let decay = if theta < 0.0 { psi - self.model.psi(qt)? } else { 0.0 };
        let z = if theta == 0.0 {
            1.0
        } else if decay * x > 1.0 {
            let tail = self.quadrature_on(|s| Ok((-psi * s).exp() * self.w(qt, x + s)?), 0.0, 40.0 / decay)?;
            -theta * (-psi * x).exp() * tail
        } else {
            1.0 + theta * self.quadrature(w_tilt, x)?
        };
        let w_deriv = (-psi * x).exp() * (self.w_deriv(qt, x)? - psi * self.w(qt, x)?);
        Ok(Tilted { w, z, w_deriv })
    }

    /// Complex-argument tilted scale functions (closed-form kinds only).
    pub fn tilted_complex(&self, q: Complex64, theta: Complex64, x: f64) -> Result<Tilted<Complex64>> {
        check_x(x)?;
        let psi = self.model.psi_complex(q)?;
        let f = self.expsum(q + theta)?.tilted(psi);
        // Σ c_k/(ψ - r_k) = 1/(φ(ψ) - q - θ) = -1/θ, so the constant part of
        // 1 + θ∫f cancels exactly; drop it when every tilted rate decays, where
        // the two parts would otherwise cancel catastrophically
        let decaying = f.terms().iter().all(|&(_, r)| r.re * x < -1.0);
        let z = if decaying && theta.norm() > 0.0 {
            theta * f.terms().iter().map(|&(c, r)| c * (r * x).exp() / r).sum::<Complex64>()
        } else {
            1.0 + theta * f.integral(x)
        };
        Ok(Tilted { w: f.eval(x), z, w_deriv: f.deriv(x) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::PhaseType;
    use crate::numeric::richardson_diff;

    fn mm1() -> ScaleEvaluator {
        ScaleEvaluator::new(LevyModel::cp_exp(0.5, 1.0).unwrap())
    }

    fn ph_mm1() -> ScaleEvaluator {
        ScaleEvaluator::new(LevyModel::cp_phase_type(0.5, PhaseType::exponential(1.0).unwrap()).unwrap())
    }

    #[test]
    fn closed_form_exponential_jumps() {
        let s = mm1();
        assert!((s.w(0.0, 1.0).unwrap() - (2.0 - (-0.5f64).exp())).abs() < 1e-14);
        assert!((s.w_deriv(0.0, 1.0).unwrap() - 0.5 * (-0.5f64).exp()).abs() < 1e-14);
        assert!((s.w(0.7, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(s.w(0.7, -1.0).unwrap(), 0.0);
        assert!((s.w_deriv(0.7, 0.0).unwrap() - 1.2).abs() < 1e-13);
    }

    #[test]
    fn brownian_boundary() {
        let s = ScaleEvaluator::new(LevyModel::brownian(-1.0, 2.0).unwrap());
        assert!(s.w(1.0, 0.0).unwrap().abs() < 1e-15);
        assert!((s.w_deriv(1.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        // sinh form
        let (mu, s2, q, x) = (-1.0f64, 2.0f64, 1.0f64, 0.8f64);
        let d = mu * mu + 2.0 * s2 * q;
        let exact = 2.0 / d.sqrt() * (mu * x / s2).exp() * (x * d.sqrt() / s2).sinh();
        assert!((s.w(q, x).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn z_against_quadrature() {
        let s = mm1();
        let quad = integrate(|y| s.w(1.0, y).unwrap(), 0.0, 1.0, 1e-13).value;
        assert!((s.z(1.0, 1.0).unwrap() - (1.0 + quad)).abs() < 1e-10);
        assert_eq!(s.z(0.0, 3.0).unwrap(), 1.0);
        assert_eq!(s.z(2.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn tilted_identities() {
        let s = mm1();
        let t = s.tilted(1.0, 0.0, 2.0).unwrap();
        assert!((t.z - 1.0).abs() < 1e-15);
        let t = s.tilted(0.0, 1.5, 2.0).unwrap();
        assert!((t.w - s.w(1.5, 2.0).unwrap()).abs() < 1e-13);
        let t = s.tilted(1.0, 1.0, 1.0).unwrap();
        let psi = s.model().psi(1.0).unwrap();
        assert!((psi.exp() * t.w - s.w(2.0, 1.0).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn phase_type_inversion_matches_closed_form() {
        let (a, b) = (mm1(), ph_mm1());
        for &q in &[0.0, 0.5, 2.0] {
            for &x in &[0.3, 1.0, 4.0] {
                let wa = a.w(q, x).unwrap();
                assert!((wa - b.w(q, x).unwrap()).abs() < 1e-7 * wa.max(1.0), "W q={q} x={x}");
                let da = a.w_deriv(q, x).unwrap();
                assert!((da - b.w_deriv(q, x).unwrap()).abs() < 1e-6 * da.abs().max(1.0));
                let ca = a.selfconv(q, x).unwrap();
                assert!((ca - b.selfconv(q, x).unwrap()).abs() < 1e-6 * ca.max(1.0));
                let cd = a.selfconv_deriv(q, x).unwrap();
                assert!((cd - b.selfconv_deriv(q, x).unwrap()).abs() < 1e-6 * cd.max(1.0));
            }
        }
        let ta = a.tilted(1.0, 1.0, 1.0).unwrap();
        let tb = b.tilted(1.0, 1.0, 1.0).unwrap();
        assert!((ta.w - tb.w).abs() < 1e-7);
        assert!((ta.z - tb.z).abs() < 1e-7);
        assert!((ta.w_deriv - tb.w_deriv).abs() < 1e-6);
    }

    #[test]
    fn q_derivative_is_self_convolution() {
        let s = mm1();
        let fd = richardson_diff(|q| s.w(q, 1.0).unwrap(), 0.5, 1e-3);
        assert!((fd - s.selfconv(0.5, 1.0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn tilted_z_stays_accurate_for_large_negative_index() {
        // U is the busy period started by an Exp(1) overshoot whatever τ is
        let s = mm1();
        let ph = ph_mm1();
        for &tau in &[0.0, 1.0, 3.0] {
            for &q in &[1.0, 10.0, 99.0] {
                let u = crate::storage::sojourn_joint_transform(&s, tau, 0.0, q).unwrap();
                let want = 1.0 / (1.0 + s.model().psi(q).unwrap());
                assert!((u - want).abs() < 1e-12, "tau {tau} q {q}: {u} vs {want}");
                if q < 50.0 {
                    let v = crate::storage::sojourn_joint_transform(&ph, tau, 0.0, q).unwrap();
                    assert!((v - want).abs() < 1e-6, "phase-type tau {tau} q {q}: {v} vs {want}");
                }
            }
        }
    }

    #[test]
    fn unstable_model_rejected() {
        let s = ScaleEvaluator::new(LevyModel::cp_exp(2.0, 1.0).unwrap());
        assert!(matches!(s.w(0.0, 1.0), Err(Error::UnstableModel { .. })));
    }
}
