use rand::Rng;

use super::law::SojournLaw;
use crate::error::{Error, Result};

/// One realised path of the alternating process on `[0, t]`, started in A.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub alpha_t: f64,
    pub beta_t: f64,
    pub in_a_at_t: bool,
    /// Cycles started before `t`; the last one may extend beyond `t`.
    pub cycle_pairs: Vec<(f64, f64)>,
}

impl PathSample {
    pub fn cycles(&self) -> usize {
        self.cycle_pairs.len()
    }
}

/// Alternates `D₁, U₁, D₂, U₂, …` until time `t` and truncates the last interval.
pub fn simulate_alternating<R: Rng + ?Sized>(law: &SojournLaw, t: f64, rng: &mut R) -> Result<PathSample> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidRange(format!("t = {t} must be positive")));
    }
    let mut elapsed = 0.0;
    let mut alpha = 0.0;
    let mut pairs = Vec::new();
    let in_a = loop {
        let (d, u) = law.sample_pair(rng)?;
        pairs.push((d, u));
        if elapsed + d >= t {
            alpha += t - elapsed;
            break true;
        }
        elapsed += d;
        alpha += d;
        if elapsed + u >= t {
            break false;
        }
        elapsed += u;
    };
    Ok(PathSample { alpha_t: alpha, beta_t: t - alpha, in_a_at_t: in_a, cycle_pairs: pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal::Marginal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_alternation() {
        let law = SojournLaw::independent(Marginal::deterministic(1.0).unwrap(), Marginal::deterministic(1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = simulate_alternating(&law, 2.5, &mut rng).unwrap();
        assert_eq!((p.alpha_t, p.beta_t, p.in_a_at_t, p.cycles()), (1.5, 1.0, true, 2));
        let two = SojournLaw::independent(Marginal::deterministic(1.0).unwrap(), Marginal::deterministic(2.0).unwrap());
        assert_eq!(simulate_alternating(&two, 2.5, &mut rng).unwrap().alpha_t, 1.0);
        assert_eq!(simulate_alternating(&two.swapped(), 2.5, &mut rng).unwrap().alpha_t, 2.0);
        assert!(simulate_alternating(&law, 0.0, &mut rng).is_err());
    }
}
