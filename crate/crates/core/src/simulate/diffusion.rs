use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::SimConfig;
use crate::error::{Error, Result};
use crate::renewal::PathSample;

/// `1e-4 · min(1, σ²/μ²)`.
pub fn default_dt(mu: f64, sigma2: f64) -> f64 {
    if mu == 0.0 {
        1e-4
    } else {
        1e-4 * (sigma2 / (mu * mu)).min(1.0)
    }
}

fn check(mu: f64, sigma2: f64) -> Result<()> {
    if !mu.is_finite() {
        return Err(Error::param("mu", "must be finite"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::param("sigma2", "must be positive"));
    }
    Ok(())
}

/// Fraction of a step with linearly interpolated values `a → b` spent at or below `level`.
fn fraction_below(a: f64, b: f64, level: f64) -> f64 {
    match (a <= level, b <= level) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        (true, false) => (level - a) / (b - a),
        (false, true) => (level - b) / (a - b),
    }
}

/// Euler path of Brownian motion with drift reflected at 0 with `Q(0) = τ`;
/// `α(t)` is the time in `[0, τ]`. The bias is `O(√dt)`.
pub fn simulate_rbm<R: Rng + ?Sized>(mu: f64, sigma2: f64, cfg: &SimConfig, rng: &mut R) -> Result<PathSample> {
    check(mu, sigma2)?;
    cfg.validate()?;
    let dt = cfg.dt.unwrap_or_else(|| default_dt(mu, sigma2));
    let t = cfg.horizon;
    let full = (t / dt).floor() as usize;
    let last = t - full as f64 * dt;
    let sigma = sigma2.sqrt();
    let (mut q, mut alpha) = (cfg.tau, 0.0);
    let step = |h: f64, q: &mut f64, rng: &mut R| {
        let z: f64 = StandardNormal.sample(rng);
        let next = (*q + mu * h + sigma * h.sqrt() * z).max(0.0);
        let a = h * fraction_below(*q, next, cfg.tau);
        *q = next;
        a
    };
    for _ in 0..full {
        alpha += step(dt, &mut q, rng);
    }
    if last > 0.0 {
        alpha += step(last, &mut q, rng);
    }
    let alpha = alpha.min(t);
    Ok(PathSample { alpha_t: alpha, beta_t: t - alpha, in_a_at_t: q <= cfg.tau, cycle_pairs: Vec::new() })
}

/// For a free Brownian path started at 0 and an independent `e_q ~ Exp(q)`:
/// `(e_q - G, α(e_q))` with `G` the epoch of the supremum on `[0, e_q]` and
/// `α` the time spent in `(-∞, 0]`.
pub fn supremum_epoch_sample<R: Rng + ?Sized>(
    mu: f64,
    sigma2: f64,
    q: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check(mu, sigma2)?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::param("q", "must be positive"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    let horizon = Exp::new(q).expect("validated rate").sample(rng);
    let sigma = sigma2.sqrt();
    let (mut x, mut now, mut alpha) = (0.0f64, 0.0f64, 0.0);
    let (mut sup, mut epoch) = (0.0f64, 0.0f64);
    while now < horizon {
        let h = dt.min(horizon - now);
        let z: f64 = StandardNormal.sample(rng);
        let next = x + mu * h + sigma * h.sqrt() * z;
        alpha += h * fraction_below(x, next, 0.0);
        now += h;
        x = next;
        if x > sup {
            sup = x;
            epoch = now;
        }
    }
    Ok((horizon - epoch, alpha.min(horizon)))
}

/// Whether a free Brownian path from 0 on `[0, t]` stays strictly above 0
/// (`α(t) = 0`) and strictly below it (`α(t) = t`), using the Brownian-bridge
/// crossing probability `exp(-2ab/(σ²h))` between grid values `a`, `b`.
pub fn free_bm_boundary_sample<R: Rng + ?Sized>(
    mu: f64,
    sigma2: f64,
    t: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(bool, bool)> {
    check(mu, sigma2)?;
    if !(t > 0.0 && dt > 0.0) {
        return Err(Error::InvalidRange(format!("need t > 0 and dt > 0, got ({t}, {dt})")));
    }
    let sigma = sigma2.sqrt();
    let (mut x, mut now) = (0.0f64, 0.0f64);
    let (mut above, mut below) = (true, true);
    while now < t && (above || below) {
        let h = dt.min(t - now);
        let z: f64 = StandardNormal.sample(rng);
        let next = x + mu * h + sigma * h.sqrt() * z;
        let crossed = x * next <= 0.0 || rng.random::<f64>() < (-2.0 * x * next / (sigma2 * h)).exp();
        if crossed {
            above = false;
            below = false;
        } else if next > 0.0 {
            below = false;
        } else {
            above = false;
        }
        x = next;
        now += h;
    }
    Ok((above, below))
}
