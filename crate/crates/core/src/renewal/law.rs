use std::io::Read;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

use super::moments::MomentSummary;
use crate::error::{Error, Result};
use crate::ldp::MgfDomain;
use crate::levy::{LevyModel, ScaleEvaluator};
use crate::simulate::storage_cycle;
use crate::storage::{sojourn_joint_transform, sojourn_joint_transform_complex, sojourn_moments};

/// Univariate sojourn law.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Deterministic { value: f64 },
    Uniform { low: f64, high: f64 },
}

fn finite_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

impl Marginal {
    pub fn exponential(rate: f64) -> Result<Self> {
        finite_positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        finite_positive("shape", shape)?;
        finite_positive("rate", rate)?;
        Ok(Self::Gamma { shape, rate })
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        if shape == 0 {
            return Err(Error::param("shape", "Erlang shape must be >= 1"));
        }
        Self::gamma(f64::from(shape), rate)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        finite_positive("value", value)?;
        Ok(Self::Deterministic { value })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        if !(low >= 0.0 && high > low && high.is_finite()) {
            return Err(Error::param("uniform", format!("need 0 <= low < high, got [{low}, {high}]")));
        }
        Ok(Self::Uniform { low, high })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Deterministic { value } => value,
            Self::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / (rate * rate),
            Self::Gamma { shape, rate } => shape / (rate * rate),
            Self::Deterministic { .. } => 0.0,
            Self::Uniform { low, high } => (high - low) * (high - low) / 12.0,
        }
    }

    /// `E e^{-sX}`.
    pub fn lst(&self, s: Complex64) -> Complex64 {
        match *self {
            Self::Exponential { rate } => rate / (rate + s),
            Self::Gamma { shape, rate } => ((rate / (rate + s)).ln() * shape).exp(),
            Self::Deterministic { value } => (-s * value).exp(),
            Self::Uniform { low, high } => {
                if s.norm() * (high - low) < 1e-8 {
                    (-s * (0.5 * (low + high))).exp()
                } else {
                    ((-s * low).exp() - (-s * high).exp()) / (s * (high - low))
                }
            }
        }
    }

    /// `P(X < x)`.
    pub fn cdf_strict(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::Gamma { shape, rate } => GammaDist::new(shape, rate).map(|g| g.cdf(x)).unwrap_or(f64::NAN),
            Self::Deterministic { value } => {
                if x > value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
        }
    }

    /// Supremum of `a` with `E e^{aX} < ∞`.
    pub fn mgf_abscissa(&self) -> f64 {
        match *self {
            Self::Exponential { rate } | Self::Gamma { rate, .. } => rate,
            Self::Deterministic { .. } | Self::Uniform { .. } => f64::INFINITY,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
            Self::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated gamma").sample(rng),
            Self::Deterministic { value } => value,
            Self::Uniform { low, high } => {
                // open at 0 so that the sojourn stays positive
                loop {
                    let v = low + (high - low) * rng.random::<f64>();
                    if v > 0.0 {
                        return v;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum LawKind {
    Independent {
        d: Marginal,
        u: Marginal,
    },
    /// `D = min(E₁, E₃)`, `U = min(E₂, E₃)` with independent exponential
    /// clocks of rates `rate_d`, `rate_u` and the common shock `rate_common`.
    MarshallOlkin {
        rate_d: f64,
        rate_u: f64,
        rate_common: f64,
    },
    /// Cycles below and above `τ` of a reflected compound Poisson storage
    /// process started at `τ`.
    StorageInduced {
        scale: Arc<ScaleEvaluator>,
        tau: f64,
    },
    Empirical {
        pairs: Arc<Vec<(f64, f64)>>,
    },
}

/// Law of the generic sojourn pair `(D, U)`: time in A, then time in B.
#[derive(Debug, Clone)]
pub struct SojournLaw {
    kind: LawKind,
    swapped: bool,
}

impl SojournLaw {
    pub fn independent(d: Marginal, u: Marginal) -> Self {
        Self { kind: LawKind::Independent { d, u }, swapped: false }
    }

    pub fn marshall_olkin(rate_d: f64, rate_u: f64, rate_common: f64) -> Result<Self> {
        finite_positive("rate_d", rate_d)?;
        finite_positive("rate_u", rate_u)?;
        if !(rate_common >= 0.0 && rate_common.is_finite()) {
            return Err(Error::param("rate_common", "must be >= 0"));
        }
        Ok(Self { kind: LawKind::MarshallOlkin { rate_d, rate_u, rate_common }, swapped: false })
    }

    /// Sojourn law of a compound Poisson storage model at level `τ`.
    pub fn storage(model: LevyModel, tau: f64) -> Result<Self> {
        if !model.has_bounded_variation() {
            return Err(Error::Unsupported(
                "unbounded-variation models have no alternating sojourn structure at a level".into(),
            ));
        }
        model.require_stable()?;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", "level must be finite and >= 0"));
        }
        Ok(Self { kind: LawKind::StorageInduced { scale: Arc::new(ScaleEvaluator::new(model)), tau }, swapped: false })
    }

    pub fn empirical(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&(d, u)) = pairs.iter().find(|&&(d, u)| !(d > 0.0 && u > 0.0 && d.is_finite() && u.is_finite())) {
            return Err(Error::param("pairs", format!("sojourns must be positive and finite, got ({d}, {u})")));
        }
        Ok(Self { kind: LawKind::Empirical { pairs: Arc::new(pairs) }, swapped: false })
    }

    /// Reads `d,u` rows with a header line.
    pub fn empirical_from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut pairs = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::param("csv", e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::param("csv", format!("row {} has {} fields, expected 2", line + 2, rec.len())));
            }
            let parse =
                |i: usize| rec[i].parse::<f64>().map_err(|e| Error::param("csv", format!("row {}: {e}", line + 2)));
            pairs.push((parse(0)?, parse(1)?));
        }
        Self::empirical(pairs)
    }

    /// The law seen from a start in B: the roles of D and U exchanged.
    pub fn swapped(&self) -> Self {
        Self { kind: self.kind.clone(), swapped: !self.swapped }
    }

    pub fn is_swapped(&self) -> bool {
        self.swapped
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn is_independent(&self) -> bool {
        matches!(self.kind, LawKind::Independent { .. })
            || matches!(self.kind, LawKind::MarshallOlkin { rate_common, .. } if rate_common == 0.0)
    }

    fn orient<T>(&self, (a, b): (T, T)) -> (T, T) {
        if self.swapped {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// One draw of `(D, U)`.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let pair = match &self.kind {
            LawKind::Independent { d, u } => (d.sample(rng), u.sample(rng)),
            LawKind::MarshallOlkin { rate_d, rate_u, rate_common } => {
                let e1 = Exp::new(*rate_d).expect("validated").sample(rng);
                let e2 = Exp::new(*rate_u).expect("validated").sample(rng);
                let e3 = if *rate_common > 0.0 {
                    Exp::new(*rate_common).expect("validated").sample(rng)
                } else {
                    f64::INFINITY
                };
                (e1.min(e3), e2.min(e3))
            }
            LawKind::StorageInduced { scale, tau } => {
                let c = storage_cycle(scale.model(), *tau, rng)?;
                (c.d, c.u)
            }
            LawKind::Empirical { pairs } => pairs[rng.random_range(0..pairs.len())],
        };
        Ok(self.orient(pair))
    }

    /// `E e^{-s₁D - s₂U}` in the unswapped orientation.
    fn l12_raw(&self, s1: Complex64, s2: Complex64) -> Result<Complex64> {
        match &self.kind {
            LawKind::Independent { d, u } => Ok(d.lst(s1) * u.lst(s2)),
            LawKind::MarshallOlkin { rate_d, rate_u, rate_common } => {
                let (a, b, c) = (*rate_d, *rate_u, *rate_common);
                let l = a + b + c;
                let k = l + s1 + s2;
                Ok((k * (a + c) * (b + c) + s1 * s2 * c) / (k * (a + c + s1) * (b + c + s2)))
            }
            LawKind::StorageInduced { scale, tau } => {
                if scale.model().has_closed_form() {
                    sojourn_joint_transform_complex(scale, *tau, s1, s2)
                } else if s1.im == 0.0 && s2.im == 0.0 {
                    sojourn_joint_transform(scale, *tau, s1.re, s2.re).map(Complex64::from)
                } else {
                    Err(Error::Unsupported("complex transform arguments for phase-type jumps".into()))
                }
            }
            LawKind::Empirical { pairs } => {
                let n = pairs.len() as f64;
                Ok(pairs.iter().map(|&(d, u)| (-s1 * d - s2 * u).exp()).sum::<Complex64>() / n)
            }
        }
    }

    /// Joint transform `L₁,₂(s₁, s₂) = E e^{-s₁D - s₂U}`.
    pub fn l12(&self, s1: Complex64, s2: Complex64) -> Result<Complex64> {
        let (a, b) = self.orient((s1, s2));
        self.l12_raw(a, b)
    }

    /// `L₁(s) = E e^{-sD}`.
    pub fn l1(&self, s: Complex64) -> Result<Complex64> {
        self.l12(s, Complex64::new(0.0, 0.0))
    }

    /// `E e^{-sU}`.
    pub fn lu(&self, s: Complex64) -> Result<Complex64> {
        self.l12(Complex64::new(0.0, 0.0), s)
    }

    pub fn moments(&self) -> Result<MomentSummary> {
        let ms = match &self.kind {
            LawKind::Independent { d, u } => MomentSummary::new(d.mean(), u.mean(), d.variance(), u.variance(), 0.0)?,
            LawKind::MarshallOlkin { rate_d, rate_u, rate_common } => {
                let (ra, rb) = (rate_d + rate_common, rate_u + rate_common);
                let l = rate_d + rate_u + rate_common;
                MomentSummary::new(1.0 / ra, 1.0 / rb, 1.0 / (ra * ra), 1.0 / (rb * rb), rate_common / (l * ra * rb))?
            }
            LawKind::StorageInduced { scale, tau } => sojourn_moments(scale, *tau)?.summary,
            LawKind::Empirical { pairs } => {
                if pairs.len() < 2 {
                    return Err(Error::InfiniteMoment("an empirical law with fewer than two pairs".into()));
                }
                let n = pairs.len() as f64;
                let (md, mu) = pairs.iter().fold((0.0, 0.0), |(a, b), &(d, u)| (a + d, b + u));
                let (md, mu) = (md / n, mu / n);
                let (mut vd, mut vu, mut c) = (0.0, 0.0, 0.0);
                for &(d, u) in pairs.iter() {
                    vd += (d - md) * (d - md);
                    vu += (u - mu) * (u - mu);
                    c += (d - md) * (u - mu);
                }
                MomentSummary::new(md, mu, vd / (n - 1.0), vu / (n - 1.0), c / (n - 1.0))?
            }
        };
        Ok(if self.swapped { ms.swapped() } else { ms })
    }

    /// `P(D < x, U < y)` for laws with an analytic joint distribution.
    pub fn joint_cdf_strict(&self, x: f64, y: f64) -> Result<f64> {
        let (x, y) = self.orient((x, y));
        if x <= 0.0 || y <= 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            LawKind::Independent { d, u } => Ok(d.cdf_strict(x) * u.cdf_strict(y)),
            LawKind::MarshallOlkin { rate_d, rate_u, rate_common } => {
                let sd = (-(rate_d + rate_common) * x).exp();
                let su = (-(rate_u + rate_common) * y).exp();
                let joint = (-rate_d * x - rate_u * y - rate_common * x.max(y)).exp();
                Ok((1.0 - sd - su + joint).clamp(0.0, 1.0))
            }
            _ => Err(Error::Unsupported("this law has no analytic joint distribution function".into())),
        }
    }

    /// `P(D < x)` for laws with an analytic marginal.
    pub fn d_cdf_strict(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        match (&self.kind, self.swapped) {
            (LawKind::Independent { d, .. }, false) | (LawKind::Independent { u: d, .. }, true) => Ok(d.cdf_strict(x)),
            (LawKind::MarshallOlkin { rate_d, rate_u, rate_common }, sw) => {
                let r = if sw { rate_u } else { rate_d } + rate_common;
                Ok(-(-r * x).exp_m1())
            }
            _ => Err(Error::Unsupported("this law has no analytic marginal distribution function".into())),
        }
    }

    /// Effective domain of `(a, b) ↦ E e^{aD + bU}`.
    pub fn mgf_domain(&self) -> Result<MgfDomain> {
        let dom = match &self.kind {
            LawKind::Independent { d, u } => MgfDomain::new(d.mgf_abscissa(), u.mgf_abscissa(), f64::INFINITY),
            LawKind::MarshallOlkin { rate_d, rate_u, rate_common } => {
                MgfDomain::new(rate_d + rate_common, rate_u + rate_common, rate_d + rate_u + rate_common)
            }
            LawKind::Empirical { .. } => MgfDomain::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            LawKind::StorageInduced { .. } => {
                return Err(Error::Unsupported(
                    "the moment generating function domain of storage sojourns is not available".into(),
                ))
            }
        };
        Ok(if self.swapped { dom.swapped() } else { dom })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn independent_transform_factorises() {
        let law = SojournLaw::independent(Marginal::gamma(2.5, 1.5).unwrap(), Marginal::uniform(0.5, 2.0).unwrap());
        for &a in &[0.0, 0.3, 2.0] {
            for &b in &[0.0, 0.7, 5.0] {
                let (za, zb) = (Complex64::from(a), Complex64::from(b));
                let joint = law.l12(za, zb).unwrap();
                let prod = law.l1(za).unwrap() * law.lu(zb).unwrap();
                assert!((joint - prod).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn marshall_olkin_transform_matches_survival_integral() {
        // E e^{-sD-tU} = 1 - s∫S_D - t∫S_U + st∫∫S(x,y): check against a
        // direct double quadrature of the joint survival function.
        use crate::numeric::integrate;
        let (a, b, c) = (0.7, 1.3, 0.9);
        let law = SojournLaw::marshall_olkin(a, b, c).unwrap();
        let (s, t) = (0.4, 1.1);
        let surv = |x: f64, y: f64| (-a * x - b * y - c * x.max(y)).exp();
        let inner = |x: f64| {
            integrate(|y| (-s * x - t * y).exp() * surv(x, y), 0.0, x, 1e-12).value
                + integrate(|y| (-s * x - t * y).exp() * surv(x, y), x, x + 60.0, 1e-12).value
        };
        let dbl = integrate(inner, 0.0, 60.0, 1e-11).value;
        let sd = 1.0 / (a + c + s);
        let su = 1.0 / (b + c + t);
        let exact = 1.0 - s * sd - t * su + s * t * dbl;
        let v = law.l12(Complex64::from(s), Complex64::from(t)).unwrap().re;
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn marshall_olkin_sampler_covariance() {
        let law = SojournLaw::marshall_olkin(1.0, 1.0, 1.0).unwrap();
        let ms = law.moments().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let draws: Vec<_> = (0..n).map(|_| law.sample_pair(&mut rng).unwrap()).collect();
        let emp = SojournLaw::empirical(draws).unwrap().moments().unwrap();
        let se = (ms.var_d * ms.var_u).sqrt() * 1.6 / (n as f64).sqrt();
        assert!(emp.cov_du > 0.0);
        assert!((emp.cov_du - ms.cov_du).abs() < 3.0 * se, "{} vs {}", emp.cov_du, ms.cov_du);
    }

    #[test]
    fn swapped_law_exchanges_roles() {
        let law = SojournLaw::independent(Marginal::exponential(2.0).unwrap(), Marginal::deterministic(3.0).unwrap());
        let sw = law.swapped();
        assert_eq!(sw.moments().unwrap().alpha, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sw.sample_pair(&mut rng).unwrap().0, 3.0);
        assert_eq!(sw.d_cdf_strict(3.5).unwrap(), 1.0);
        assert!(!sw.swapped().is_swapped());
    }

    #[test]
    fn empirical_csv() {
        let data = "d,u\n1.0,2.0\n3.0, 4.0\n";
        let law = SojournLaw::empirical_from_csv(data.as_bytes()).unwrap();
        let ms = law.moments().unwrap();
        assert_eq!((ms.alpha, ms.beta), (2.0, 3.0));
        assert!(SojournLaw::empirical_from_csv("d,u\n1.0,-2.0\n".as_bytes()).is_err());
        assert!(SojournLaw::empirical_from_csv("d,u\n".as_bytes()).is_err());
    }

    #[test]
    fn brownian_storage_law_is_rejected() {
        let m = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert!(matches!(SojournLaw::storage(m, 1.0), Err(Error::Unsupported(_))));
    }
}
