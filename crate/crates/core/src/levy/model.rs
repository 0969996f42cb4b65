use num_complex::Complex64;

use super::phase_type::PhaseType;
use crate::error::{Error, Result};
use crate::numeric::brent;

/// Parametric family of a spectrally positive Lévy process.
///
/// Compound Poisson kinds have unit drain rate: `X(t) = A(t) - t`.
#[derive(Debug, Clone, PartialEq)]
pub enum LevyKind {
    Brownian { mu: f64, sigma2: f64 },
    CompoundPoissonExp { lambda: f64, jump_mean: f64 },
    CompoundPoissonPhaseType { lambda: f64, jumps: PhaseType },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    kind: LevyKind,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

impl LevyModel {
    pub fn brownian(mu: f64, sigma2: f64) -> Result<Self> {
        positive("sigma2", sigma2)?;
        if !mu.is_finite() {
            return Err(Error::param("mu", "must be finite"));
        }
        Ok(Self { kind: LevyKind::Brownian { mu, sigma2 } })
    }

    pub fn cp_exp(lambda: f64, jump_mean: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        positive("jump_mean", jump_mean)?;
        Ok(Self { kind: LevyKind::CompoundPoissonExp { lambda, jump_mean } })
    }

    pub fn cp_phase_type(lambda: f64, jumps: PhaseType) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(Self { kind: LevyKind::CompoundPoissonPhaseType { lambda, jumps } })
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    /// Whether the scale functions have an exponential-sum closed form.
    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, LevyKind::CompoundPoissonPhaseType { .. })
    }

    pub fn has_bounded_variation(&self) -> bool {
        !matches!(self.kind, LevyKind::Brownian { .. })
    }

    /// `E X(1)`.
    pub fn mean_increment(&self) -> f64 {
        match &self.kind {
            LevyKind::Brownian { mu, .. } => *mu,
            LevyKind::CompoundPoissonExp { lambda, jump_mean } => lambda * jump_mean - 1.0,
            LevyKind::CompoundPoissonPhaseType { lambda, jumps } => lambda * jumps.mean() - 1.0,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.mean_increment() < 0.0
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::UnstableModel { mean_increment: self.mean_increment() })
        }
    }

    /// Laplace exponent `φ(a) = log E e^{-a X(1)}`.
    pub fn phi(&self, a: f64) -> f64 {
        match &self.kind {
            LevyKind::Brownian { mu, sigma2 } => 0.5 * sigma2 * a * a - mu * a,
            LevyKind::CompoundPoissonExp { lambda, jump_mean } => {
                let m = 1.0 / jump_mean;
                a - lambda * a / (m + a)
            }
            LevyKind::CompoundPoissonPhaseType { lambda, jumps } => {
                a - lambda * (1.0 - jumps.lst(Complex64::from(a)).re)
            }
        }
    }

    /// Analytic continuation of `φ` to complex arguments.
    pub fn phi_complex(&self, a: Complex64) -> Complex64 {
        match &self.kind {
            LevyKind::Brownian { mu, sigma2 } => 0.5 * sigma2 * a * a - mu * a,
            LevyKind::CompoundPoissonExp { lambda, jump_mean } => {
                let m = 1.0 / jump_mean;
                a - lambda * a / (m + a)
            }
            LevyKind::CompoundPoissonPhaseType { lambda, jumps } => a - lambda * (1.0 - jumps.lst(a)),
        }
    }

    pub fn phi_d1(&self, a: f64) -> f64 {
        match &self.kind {
            LevyKind::Brownian { mu, sigma2 } => sigma2 * a - mu,
            LevyKind::CompoundPoissonExp { lambda, jump_mean } => {
                let m = 1.0 / jump_mean;
                1.0 - lambda * m / ((m + a) * (m + a))
            }
            LevyKind::CompoundPoissonPhaseType { lambda, jumps } => 1.0 - lambda * jumps.weighted_moment(a, 1),
        }
    }

    pub fn phi_d2(&self, a: f64) -> f64 {
        match &self.kind {
            LevyKind::Brownian { sigma2, .. } => *sigma2,
            LevyKind::CompoundPoissonExp { lambda, jump_mean } => {
                let m = 1.0 / jump_mean;
                2.0 * lambda * m / ((m + a) * (m + a) * (m + a))
            }
            LevyKind::CompoundPoissonPhaseType { lambda, jumps } => lambda * jumps.weighted_moment(a, 2),
        }
    }

    /// Right inverse `ψ(q)` of `φ` for `q ≥ 0`.
    pub fn psi(&self, q: f64) -> Result<f64> {
        self.require_stable()?;
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::InvalidRange(format!("psi needs q >= 0, got {q}")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            LevyKind::Brownian { mu, sigma2 } => {
                // Larger root of σ²a²/2 - μa - q, in cancellation-free form.
                let disc = (mu * mu + 2.0 * sigma2 * q).sqrt();
                Ok(if *mu >= 0.0 { (mu + disc) / sigma2 } else { 2.0 * q / (disc - mu) })
            }
            LevyKind::CompoundPoissonExp { lambda, jump_mean } => {
                // a² + (m - λ - q) a - q m = 0
                let m = 1.0 / jump_mean;
                let b = m - lambda - q;
                let disc = (b * b + 4.0 * q * m).sqrt();
                Ok(if b <= 0.0 { (disc - b) / 2.0 } else { 2.0 * q * m / (disc + b) })
            }
            LevyKind::CompoundPoissonPhaseType { .. } => self.psi_newton(q),
        }
    }

    fn psi_newton(&self, q: f64) -> Result<f64> {
        // φ is convex with φ(0) = 0 and φ'(0) > 0, so a tangent step from
        // the right never overshoots the root; the Brent call is a fallback.
        let slope = self.phi_d1(0.0);
        let mut hi = q / slope;
        while self.phi(hi) < q {
            hi *= 2.0;
        }
        let mut a = hi;
        for _ in 0..100 {
            let f = self.phi(a) - q;
            let step = f / self.phi_d1(a);
            a -= step;
            if step.abs() <= 1e-15 * a.abs().max(1e-300) || f == 0.0 {
                return Ok(a);
            }
        }
        brent(|a| self.phi(a) - q, 0.0, hi, 1e-15 * hi)
    }

    /// `ψ` continued to complex `q` with `Re q ≥ 0`: the root of
    /// `φ(a) = q` with the largest real part. Closed-form kinds only.
    pub fn psi_complex(&self, q: Complex64) -> Result<Complex64> {
        self.require_stable()?;
        if q.im == 0.0 && q.re >= 0.0 {
            return self.psi(q.re).map(Complex64::from);
        }
        let (r1, r2) = match &self.kind {
            LevyKind::Brownian { mu, sigma2 } => {
                let disc = (mu * mu + 2.0 * sigma2 * q).sqrt();
                ((mu + disc) / sigma2, (mu - disc) / sigma2)
            }
            LevyKind::CompoundPoissonExp { lambda, jump_mean } => {
                let m = 1.0 / jump_mean;
                let b = m - lambda - q;
                let disc = (b * b + 4.0 * q * m).sqrt();
                ((disc - b) / 2.0, (-disc - b) / 2.0)
            }
            LevyKind::CompoundPoissonPhaseType { .. } => {
                return Err(Error::Unsupported("complex transform arguments for phase-type jumps".into()))
            }
        };
        Ok(if r1.re >= r2.re { r1 } else { r2 })
    }

    /// `ψ'(0) = 1/φ'(0)`.
    pub fn psi_d1_zero(&self) -> Result<f64> {
        self.require_stable()?;
        Ok(1.0 / self.phi_d1(0.0))
    }

    /// `ψ''(0) = -φ''(0)/φ'(0)³`.
    pub fn psi_d2_zero(&self) -> Result<f64> {
        self.require_stable()?;
        let d1 = self.phi_d1(0.0);
        Ok(-self.phi_d2(0.0) / (d1 * d1 * d1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_values() {
        let bm = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert_eq!(bm.phi(0.0), 0.0);
        assert!((bm.phi(2.0) - 4.0).abs() < 1e-15);
        let cp = LevyModel::cp_exp(0.5, 1.0).unwrap();
        assert!((cp.phi(1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn inverse_exponent() {
        let bm = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert!((bm.psi(4.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(bm.psi(0.0).unwrap(), 0.0);
        let nearly_free = LevyModel::brownian(-1e-6, 1.0).unwrap();
        assert!((nearly_free.psi(1.0).unwrap() - 2f64.sqrt()).abs() < 1e-4);
        assert!(matches!(LevyModel::brownian(0.5, 1.0).unwrap().psi(1.0), Err(Error::UnstableModel { .. })));
    }

    #[test]
    fn phase_type_matches_exponential_kind() {
        let cp = LevyModel::cp_exp(0.5, 1.0).unwrap();
        let ph = LevyModel::cp_phase_type(0.5, PhaseType::exponential(1.0).unwrap()).unwrap();
        for &q in &[0.01, 0.3, 1.0, 7.5, 80.0] {
            assert!((cp.psi(q).unwrap() - ph.psi(q).unwrap()).abs() < 1e-12 * q.max(1.0));
        }
        for &a in &[0.0, 0.5, 2.0] {
            assert!((cp.phi_d1(a) - ph.phi_d1(a)).abs() < 1e-13);
            assert!((cp.phi_d2(a) - ph.phi_d2(a)).abs() < 1e-13);
        }
    }

    #[test]
    fn psi_derivatives_at_zero() {
        let cp = LevyModel::cp_exp(0.5, 1.0).unwrap();
        assert!((cp.psi_d1_zero().unwrap() - 2.0).abs() < 1e-14);
        let h = 1e-4;
        let f = |k: f64| cp.psi(k * h).unwrap();
        // second-order one-sided second difference
        let fd = (2.0 * f(0.0) - 5.0 * f(1.0) + 4.0 * f(2.0) - f(3.0)) / (h * h);
        assert!((fd - cp.psi_d2_zero().unwrap()).abs() < 1e-3, "{fd}");
    }

    #[test]
    fn complex_psi_solves_exponent_equation() {
        for model in [LevyModel::brownian(-1.0, 2.0).unwrap(), LevyModel::cp_exp(0.5, 1.0).unwrap()] {
            for &q in &[Complex64::new(0.5, 3.0), Complex64::new(2.0, -40.0), Complex64::new(1e-3, 0.2)] {
                let a = model.psi_complex(q).unwrap();
                assert!((model.phi_complex(a) - q).norm() < 1e-12 * q.norm().max(1.0));
                assert!(a.re > 0.0);
            }
        }
    }
}
