use crate::error::{Error, Result};
use crate::numeric::std_normal_cdf;

/// First and second moments of a sojourn pair and the CLT scale constant
/// `C = (β²σ_α² + α²σ_β² - 2αβc)/(α+β)³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub alpha: f64,
    pub beta: f64,
    pub var_d: f64,
    pub var_u: f64,
    pub cov_du: f64,
    pub clt_scale: f64,
}

impl MomentSummary {
    pub fn new(alpha: f64, beta: f64, var_d: f64, var_u: f64, cov_du: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("mean of D must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", format!("mean of U must be positive, got {beta}")));
        }
        if !(var_d.is_finite() && var_u.is_finite() && cov_du.is_finite()) {
            return Err(Error::InfiniteMoment("the sojourn pair".into()));
        }
        // tiny negative values are roundoff in closed forms
        let slack = 1e-9 * (1.0 + alpha * alpha + beta * beta);
        if var_d < -slack || var_u < -slack {
            return Err(Error::param("variance", format!("negative variance ({var_d}, {var_u})")));
        }
        let (var_d, var_u) = (var_d.max(0.0), var_u.max(0.0));
        if cov_du.abs() > (var_d * var_u).sqrt() + slack {
            return Err(Error::param("cov_du", "violates Cauchy-Schwarz"));
        }
        let s = alpha + beta;
        let c = (beta * beta * var_d + alpha * alpha * var_u - 2.0 * alpha * beta * cov_du) / (s * s * s);
        Ok(Self { alpha, beta, var_d, var_u, cov_du, clt_scale: c.max(0.0) })
    }

    /// Long-run fraction of time in A, `α/(α+β)`.
    pub fn mean_fraction(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Moments of the pair with the roles of D and U exchanged.
    pub fn swapped(&self) -> Self {
        Self { alpha: self.beta, beta: self.alpha, var_d: self.var_u, var_u: self.var_d, ..*self }
    }
}

/// CLT approximation `Φ((x - αt/(α+β)) / √(Ct))` to `P(α(t) ≤ x)`.
pub fn normal_approx_cdf(ms: &MomentSummary, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidRange(format!("t = {t} must be positive")));
    }
    if !(ms.clt_scale > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(std_normal_cdf((x - ms.mean_fraction() * t) / (ms.clt_scale * t).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_pair_constant() {
        let ms = MomentSummary::new(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((ms.clt_scale - 0.25).abs() < 1e-15);
        assert_eq!(normal_approx_cdf(&ms, 10.0, 5.0).unwrap(), 0.5);
        assert_eq!(normal_approx_cdf(&ms, 10.0, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn deterministic_pair_is_degenerate() {
        let ms = MomentSummary::new(2.0, 3.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(ms.clt_scale, 0.0);
        assert_eq!(normal_approx_cdf(&ms, 1.0, 0.5), Err(Error::DegenerateVariance));
    }

    #[test]
    fn rejects_inconsistent_moments() {
        assert!(MomentSummary::new(1.0, 1.0, 1.0, 1.0, 2.0).is_err());
        assert!(MomentSummary::new(0.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(MomentSummary::new(1.0, 1.0, -1.0, 1.0, 0.0).is_err());
    }
}
