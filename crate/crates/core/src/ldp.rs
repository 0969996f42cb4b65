//! Large deviations of `α(t)/t` for alternating renewal processes.
//!
//! The cumulant `λ(θ) = lim (1/t) log E e^{θα(t)}` equals `θ d(θ)` where the
//! drain rate `d(θ)` solves `E e^{θ(1-d)D - θdU} = 1`. Only steep light-tailed
//! families are supported.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::brent;
use crate::renewal::{LawKind, SojournLaw};

/// Effective domain of `(a, b) ↦ E e^{aD + bU}`:
/// `a < sup_a`, `b < sup_b` and `a + b < sup_sum`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfDomain {
    pub sup_a: f64,
    pub sup_b: f64,
    pub sup_sum: f64,
}

impl MgfDomain {
    pub fn new(sup_a: f64, sup_b: f64, sup_sum: f64) -> Self {
        Self { sup_a, sup_b, sup_sum }
    }

    pub fn contains(&self, a: f64, b: f64) -> bool {
        a < self.sup_a && b < self.sup_b && a + b < self.sup_sum
    }

    pub fn swapped(&self) -> Self {
        Self { sup_a: self.sup_b, sup_b: self.sup_a, sup_sum: self.sup_sum }
    }

    pub fn is_light_tailed(&self) -> bool {
        self.sup_a > 0.0 && self.sup_b > 0.0 && self.sup_sum > 0.0
    }
}

/// A single sample may carry at most this share of an empirical average.
const EMPIRICAL_GUARD: f64 = 0.1;

/// `E e^{aD + bU}`, `+∞` outside the domain.
///
/// For empirical laws the sample average is reported as `+∞` when one pair
/// carries more than a tenth of it and an exponent is positive.
pub fn joint_mgf(law: &SojournLaw, a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidRange(format!("mgf arguments must be finite, got ({a}, {b})")));
    }
    if a == 0.0 && b == 0.0 {
        return Ok(1.0);
    }
    if !law.mgf_domain()?.contains(a, b) {
        return Ok(f64::INFINITY);
    }
    if let LawKind::Empirical { pairs } = law.kind() {
        let (a, b) = if law.is_swapped() { (b, a) } else { (a, b) };
        let logs: Vec<f64> = pairs.iter().map(|&(d, u)| a * d + b * u).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        if (a > 0.0 || b > 0.0) && 1.0 / rel > EMPIRICAL_GUARD {
            return Ok(f64::INFINITY);
        }
        return Ok((top + rel.ln() - (pairs.len() as f64).ln()).exp());
    }
    let v = law.l12(Complex64::from(-a), Complex64::from(-b))?.re;
    Ok(if v > 0.0 { v } else { f64::INFINITY })
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRange(format!("theta = {theta} must be >= 0")))
    }
}

/// `log E e^{θ(1-d)D - θdU}`; convex in `d`, `≥ 0` at the mean fraction and
/// negative at `d = 1`.
fn log_mgf_line(law: &SojournLaw, theta: f64, d: f64) -> Result<f64> {
    Ok(joint_mgf(law, theta * (1.0 - d), -theta * d)?.ln())
}

/// Drain rate `d(θ)`: the root in `[α/(α+β), 1)` of `E e^{θ(1-d)D - θdU} = 1`.
pub fn drain_rate(law: &SojournLaw, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let m = law.moments()?.mean_fraction();
    if theta == 0.0 {
        return Ok(m);
    }
    if !law.mgf_domain()?.is_light_tailed() {
        return Err(Error::Unsupported("large deviations need light-tailed sojourns".into()));
    }
    let k = |d: f64| log_mgf_line(law, theta, d);

    // lower bracket: a finite point with k ≥ 0 between the mean fraction and
    // the root, searched towards 1 while the mgf is infinite
    let mut lo = m;
    let mut k_lo = k(lo)?;
    if k_lo.is_infinite() {
        let mut infinite = lo;
        let mut finite = None;
        let mut gap = 1.0 - lo;
        for _ in 0..200 {
            gap *= 0.5;
            let d = 1.0 - gap;
            if k(d)?.is_finite() {
                finite = Some(d);
                break;
            }
            infinite = d;
        }
        let mut fin =
            finite.ok_or_else(|| Error::NoRoot(format!("mgf infinite on the whole bracket at theta = {theta}")))?;
        // between the last infinite and first finite point, look for k > 0
        loop {
            let v = k(fin)?;
            if v >= 0.0 {
                lo = fin;
                k_lo = v;
                break;
            }
            let mid = 0.5 * (infinite + fin);
            if mid <= infinite || mid >= fin {
                return Err(Error::NoRoot(format!("theta = {theta} lies beyond the effective domain of the cumulant")));
            }
            if k(mid)?.is_finite() {
                fin = mid;
            } else {
                infinite = mid;
            }
        }
    }
    if k_lo <= 0.0 {
        // degenerate pairs: the root is the mean fraction itself
        return Ok(lo);
    }
    let d = brent(|d| k(d).unwrap_or(f64::NAN), lo, 1.0, 1e-15)?;
    Ok(d)
}

/// `λ(θ) = θ d(θ)`.
pub fn cumulant(law: &SojournLaw, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    Ok(theta * drain_rate(law, theta)?)
}

/// `λ'(θ) = M_a/(M_a + M_b)` at `(a, b) = (θ - λ, -λ)`, from complex-step
/// derivatives of the joint transform.
pub fn cumulant_derivative(law: &SojournLaw, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let lam = cumulant(law, theta)?;
    if theta == 0.0 {
        return Ok(law.moments()?.mean_fraction());
    }
    let (a, b) = (theta - lam, -lam);
    let (ma, mb) = match law.kind() {
        LawKind::Empirical { pairs } => {
            let (a, b) = if law.is_swapped() { (b, a) } else { (a, b) };
            let (sd, su) = pairs.iter().fold((0.0, 0.0), |(x, y), &(d, u)| {
                let w = (a * d + b * u).exp();
                (x + d * w, y + u * w)
            });
            if law.is_swapped() {
                (su, sd)
            } else {
                (sd, su)
            }
        }
        _ => {
            let h = 1e-20;
            let fa = law.l12(Complex64::new(-a, -h), Complex64::from(-b))?;
            let fb = law.l12(Complex64::from(-a), Complex64::new(-b, -h))?;
            (fa.im / h, fb.im / h)
        }
    };
    Ok(ma / (ma + mb))
}

/// Legendre–Fenchel transform `λ*(frac) = sup_θ (θ frac - λ(θ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateValue {
    pub value: f64,
    /// Maximiser `θ*`.
    pub theta: f64,
    /// `d(θ*)`.
    pub drain: f64,
    /// The maximiser sits at the edge of the effective domain of `λ`.
    pub boundary: bool,
}

/// `λ*(frac)` for `frac ∈ [α/(α+β), 1)`, from the first-order condition
/// `λ'(θ*) = frac`.
pub fn rate_function(law: &SojournLaw, frac: f64) -> Result<RateValue> {
    let m = law.moments()?.mean_fraction();
    if !(frac >= m && frac < 1.0) {
        return Err(Error::InvalidRange(format!("frac = {frac} must lie in [{m}, 1)")));
    }
    if frac == m {
        return Ok(RateValue { value: 0.0, theta: 0.0, drain: m, boundary: false });
    }
    let slope = |th: f64| cumulant_derivative(law, th);
    let finish = |theta: f64, boundary: bool| -> Result<RateValue> {
        let drain = drain_rate(law, theta)?;
        Ok(RateValue { value: (theta * frac - theta * drain).max(0.0), theta, drain, boundary })
    };

    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        match slope(hi) {
            Ok(s) if s >= frac => break,
            Ok(_) => {
                lo = hi;
                hi *= 2.0;
                if hi > 1e12 {
                    return finish(lo, true);
                }
            }
            Err(Error::NoRoot(_)) => {
                // bisect for the edge of the effective domain
                let mut bad = hi;
                let mut interior = false;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + bad);
                    if mid <= lo || mid >= bad {
                        break;
                    }
                    match slope(mid) {
                        Ok(s) if s >= frac => {
                            hi = mid;
                            interior = true;
                            break;
                        }
                        Ok(_) => lo = mid,
                        Err(Error::NoRoot(_)) => bad = mid,
                        Err(e) => return Err(e),
                    }
                }
                if interior {
                    break;
                }
                return finish(lo, true);
            }
            Err(e) => return Err(e),
        }
    }
    let theta = brent(|th| slope(th).map(|s| s - frac).unwrap_or(f64::NAN), lo, hi, 1e-14)?;
    finish(theta, false)
}

/// Logarithmic-scale asymptote `exp(-t λ*(frac))` of `P(α(t)/t > frac)`;
/// not an exact probability.
pub fn tail_asymptotic(law: &SojournLaw, frac: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidRange(format!("t = {t} must be positive")));
    }
    Ok((-t * rate_function(law, frac)?.value).exp())
}

/// Rate of the lower tail `P(α(t)/t < frac)` for `frac` below the mean
/// fraction: the upper-tail rate of `β(t)/t` at `1 - frac`, with the roles
/// of `D` and `U` exchanged.
pub fn lower_tail_rate(law: &SojournLaw, frac: f64) -> Result<RateValue> {
    if !(frac > 0.0) {
        return Err(Error::InvalidRange(format!("frac = {frac} must be positive")));
    }
    rate_function(&law.swapped(), 1.0 - frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal::Marginal;

    fn exp_exp() -> SojournLaw {
        SojournLaw::independent(Marginal::exponential(1.0).unwrap(), Marginal::exponential(1.0).unwrap())
    }

    #[test]
    fn mgf_values() {
        let law = exp_exp();
        assert_eq!(joint_mgf(&law, 0.0, 0.0).unwrap(), 1.0);
        assert!((joint_mgf(&law, 0.5, -1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(joint_mgf(&law, 1.0, 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn quadratic_drain_rate() {
        // 2d - 1 = θ d (1 - d)
        let law = exp_exp();
        for &th in &[0.3, 1.0, 2.0, 7.0, 40.0] {
            let d = drain_rate(&law, th).unwrap();
            let b = 2.0 - th;
            let exact = (-b + (b * b + 4.0 * th).sqrt()) / (2.0 * th);
            assert!((d - exact).abs() < 1e-12, "theta={th}: {d} vs {exact}");
            let m = joint_mgf(&law, th * (1.0 - d), -th * d).unwrap();
            assert!((m - 1.0).abs() <= 1e-12);
        }
        assert!((drain_rate(&law, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((cumulant(&law, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_symmetric() {
        let one = Marginal::deterministic(1.0).unwrap();
        let law = SojournLaw::independent(one.clone(), one);
        for &th in &[0.5, 1.0, 3.0] {
            assert!((drain_rate(&law, th).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_condition() {
        let law = exp_exp();
        let r = rate_function(&law, 0.7).unwrap();
        assert!(!r.boundary);
        assert!((cumulant_derivative(&law, r.theta).unwrap() - 0.7).abs() < 1e-8);
        // λ'(θ) from the quadratic closed form
        let th = r.theta;
        let b = 2.0 - th;
        let root = (b * b + 4.0 * th).sqrt();
        let lam = |t: f64| {
            let b = 2.0 - t;
            (-b + (b * b + 4.0 * t).sqrt()) / 2.0
        };
        let exact_slope = (1.0 + (-b + 2.0) / root) / 2.0;
        assert!((exact_slope - 0.7).abs() < 1e-8);
        assert!((r.value - (th * 0.7 - lam(th))).abs() < 1e-12);
        assert_eq!(rate_function(&law, 0.5).unwrap().value, 0.0);
        assert_eq!(tail_asymptotic(&law, 0.5, 100.0).unwrap(), 1.0);
    }

    #[test]
    fn marshall_olkin_complex_step_matches_differences() {
        let law = SojournLaw::marshall_olkin(1.0, 2.0, 0.5).unwrap();
        let th = 0.8;
        let s = cumulant_derivative(&law, th).unwrap();
        let h = 1e-5;
        let fd = (cumulant(&law, th + h).unwrap() - cumulant(&law, th - h).unwrap()) / (2.0 * h);
        assert!((s - fd).abs() < 1e-7, "{s} vs {fd}");
    }

    #[test]
    fn lower_tail_by_symmetry() {
        let law = exp_exp();
        let up = rate_function(&law, 0.7).unwrap().value;
        let down = lower_tail_rate(&law, 0.3).unwrap().value;
        assert!((up - down).abs() < 1e-12);
    }

    #[test]
    fn storage_law_is_unsupported() {
        let law = SojournLaw::storage(crate::levy::LevyModel::cp_exp(0.5, 1.0).unwrap(), 1.0).unwrap();
        assert!(matches!(joint_mgf(&law, 0.1, 0.0), Err(Error::Unsupported(_))));
    }
}
