//! Monte Carlo oracles with reproducible parallel substreams.

mod diffusion;
mod stats;
mod storage;

pub use diffusion::{default_dt, free_bm_boundary_sample, simulate_rbm, supremum_epoch_sample};
pub use stats::{
    empirical_cdf, kolmogorov_p_value, ks_critical_value, ks_statistic, ks_two_sample, two_sample_critical_value,
};
pub use storage::{simulate_storage, storage_cycle, CycleRecord};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Replications per substream. Fixed so that results do not depend on the
/// number of worker threads.
pub const BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub replications: usize,
    pub horizon: f64,
    /// Time step for diffusions; `None` selects [`default_dt`].
    pub dt: Option<f64>,
    pub tau: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::param("replications", "must be >= 1"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive and finite"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::param("dt", "must be positive"));
            }
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::param("tau", "level must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Generator for substream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `n` replications of `f`, in order. Batch `b` draws from substream `b`.
pub fn replicate<T, F>(seed: u64, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let batches: Vec<Result<Vec<T>>> = (0..n.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b as u64);
            let len = BATCH.min(n - b * BATCH);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for b in batches {
        out.extend(b?);
    }
    Ok(out)
}

/// Folds `n` replications without storing them. Each batch is folded in
/// order and the batch accumulators are merged in batch order.
pub fn replicate_fold<A, T, F, G, M>(seed: u64, n: usize, init: A, f: F, fold: G, merge: M) -> Result<A>
where
    A: Clone + Send + Sync,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
    G: Fn(&mut A, T) + Sync,
    M: Fn(A, A) -> A,
{
    let parts: Vec<Result<A>> = (0..n.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b as u64);
            let mut acc = init.clone();
            for _ in 0..BATCH.min(n - b * BATCH) {
                fold(&mut acc, f(&mut rng)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = init;
    for p in parts {
        total = merge(total, p?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn replication_is_thread_independent() {
        let draw = |r: &mut ChaCha8Rng| Ok(r.random::<f64>());
        let a = replicate(11, 5000, draw).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| replicate(11, 5000, draw).unwrap());
        assert_eq!(a, b);
        let s = replicate_fold(11, 5000, 0.0, draw, |a: &mut f64, x| *a += x, |a, b| a + b).unwrap();
        let direct: Vec<f64> = a.chunks(BATCH).map(|c| c.iter().fold(0.0, |s, x| s + x)).collect();
        assert_eq!(s, direct.iter().fold(0.0, |s, x| s + x));
        assert_ne!(a, replicate(12, 5000, draw).unwrap());
    }
}
