use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::SimConfig;
use crate::error::{Error, Result};
use crate::levy::{LevyKind, LevyModel};
use crate::renewal::PathSample;

/// One cycle of a storage process at level `τ`: `d` below or at `τ`, then
/// `u` above it, and the overshoot `Q(τ_α) - τ` at the upcrossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub d: f64,
    pub u: f64,
    pub overshoot: f64,
}

struct Jumps<'a> {
    arrivals: Exp<f64>,
    model: &'a LevyModel,
}

impl<'a> Jumps<'a> {
    fn new(model: &'a LevyModel) -> Result<Self> {
        let lambda = match model.kind() {
            LevyKind::CompoundPoissonExp { lambda, .. } | LevyKind::CompoundPoissonPhaseType { lambda, .. } => *lambda,
            LevyKind::Brownian { .. } => {
                return Err(Error::Unsupported("event-driven simulation needs a compound Poisson model".into()))
            }
        };
        Ok(Self { arrivals: Exp::new(lambda).expect("validated rate"), model })
    }

    fn gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.arrivals.sample(rng)
    }

    fn size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.model.kind() {
            LevyKind::CompoundPoissonExp { jump_mean, .. } => {
                Exp::new(1.0 / jump_mean).expect("validated mean").sample(rng)
            }
            LevyKind::CompoundPoissonPhaseType { jumps, .. } => jumps.sample(rng),
            LevyKind::Brownian { .. } => unreachable!(),
        }
    }

    fn cycle<R: Rng + ?Sized>(&self, tau: f64, rng: &mut R) -> CycleRecord {
        // below τ: drain at unit rate, reflected at 0, until a jump crosses τ
        let (mut level, mut d) = (tau, 0.0);
        loop {
            let e = self.gap(rng);
            d += e;
            level = (level - e).max(0.0) + self.size(rng);
            if level > tau {
                break;
            }
        }
        let overshoot = level - tau;
        // above τ: the downcrossing happens with equality
        let mut u = 0.0;
        loop {
            let e = self.gap(rng);
            let room = level - tau;
            if e >= room {
                u += room;
                break;
            }
            u += e;
            level += self.size(rng) - e;
        }
        CycleRecord { d, u, overshoot }
    }
}

/// One sojourn cycle of the compound Poisson storage process started at `τ`.
pub fn storage_cycle<R: Rng + ?Sized>(model: &LevyModel, tau: f64, rng: &mut R) -> Result<CycleRecord> {
    model.require_stable()?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", "level must be finite and >= 0"));
    }
    Ok(Jumps::new(model)?.cycle(tau, rng))
}

/// Exact event-driven path of the storage process on `[0, horizon]` with
/// `Q(0) = τ`, and its cycles. The last cycle may extend past the horizon.
pub fn simulate_storage<R: Rng + ?Sized>(
    model: &LevyModel,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<(PathSample, Vec<CycleRecord>)> {
    cfg.validate()?;
    model.require_stable()?;
    let jumps = Jumps::new(model)?;
    let t = cfg.horizon;
    let (mut elapsed, mut alpha) = (0.0, 0.0);
    let mut cycles = Vec::new();
    let in_a = loop {
        let c = jumps.cycle(cfg.tau, rng);
        cycles.push(c);
        if elapsed + c.d >= t {
            alpha += t - elapsed;
            break true;
        }
        elapsed += c.d;
        alpha += c.d;
        if elapsed + c.u >= t {
            break false;
        }
        elapsed += c.u;
    };
    let pairs = cycles.iter().map(|c| (c.d, c.u)).collect();
    Ok((PathSample { alpha_t: alpha, beta_t: t - alpha, in_a_at_t: in_a, cycle_pairs: pairs }, cycles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn level_zero_gives_first_jump_time() {
        let m = LevyModel::cp_exp(0.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mean = (0..n).map(|_| storage_cycle(&m, 0.0, &mut rng).unwrap().d).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn stationary_fraction_below_level() {
        let m = LevyModel::cp_exp(0.5, 1.0).unwrap();
        let cfg = SimConfig { seed: 0, replications: 1, horizon: 1e6, dt: None, tau: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (p, cycles) = simulate_storage(&m, &cfg, &mut rng).unwrap();
        assert!((p.alpha_t + p.beta_t - 1e6).abs() <= 1e-12 * 1e6);
        let exact = 1.0 - 0.5 * (-0.5f64).exp();
        assert!((p.alpha_t / 1e6 - exact).abs() < 0.002, "{}", p.alpha_t / 1e6);
        assert!(cycles.iter().all(|c| c.d > 0.0 && c.u > 0.0 && c.overshoot > 0.0));
    }

    #[test]
    fn brownian_and_unstable_models_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(storage_cycle(&LevyModel::brownian(-1.0, 1.0).unwrap(), 1.0, &mut rng).is_err());
        assert!(storage_cycle(&LevyModel::cp_exp(2.0, 1.0).unwrap(), 1.0, &mut rng).is_err());
    }
}
