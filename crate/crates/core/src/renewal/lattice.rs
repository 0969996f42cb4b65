use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

use super::law::{LawKind, Marginal, SojournLaw};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    /// Cell width; `None` selects `min(E D, E U)/50`.
    pub step: Option<f64>,
    pub tolerance: f64,
    /// Ceiling on the number of stored lattice cells over all levels.
    pub max_cells: usize,
    /// Draws used to histogram laws without an analytic distribution function.
    pub empirical_draws: usize,
    pub seed: u64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { step: None, tolerance: 1e-4, max_cells: 40_000_000, empirical_draws: 1_000_000, seed: 0 }
    }
}

/// Series value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub error: f64,
    /// Highest partial-sum index included.
    pub terms: usize,
}

/// How the pair law reaches the lattice.
#[derive(Debug, Clone)]
enum Source {
    Analytic(SojournLaw),
    /// Pairs with equal weights; the `D` column sorted separately.
    Sample {
        pairs: Arc<Vec<(f64, f64)>>,
        sorted_d: Arc<Vec<f64>>,
        drawn: bool,
    },
}

impl Source {
    fn new(law: &SojournLaw, cfg: &LatticeConfig) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = match law.kind() {
            LawKind::Independent { .. } | LawKind::MarshallOlkin { .. } => return Ok(Source::Analytic(law.clone())),
            LawKind::Empirical { pairs } if !law.is_swapped() => pairs.as_ref().clone(),
            LawKind::Empirical { pairs } => pairs.iter().map(|&(d, u)| (u, d)).collect(),
            LawKind::StorageInduced { .. } => {
                if cfg.empirical_draws == 0 {
                    return Err(Error::param("empirical_draws", "must be >= 1"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut v = Vec::with_capacity(cfg.empirical_draws);
                for _ in 0..cfg.empirical_draws {
                    v.push(law.sample_pair(&mut rng)?);
                }
                let mut sorted_d: Vec<f64> = v.iter().map(|p| p.0).collect();
                sorted_d.sort_by(f64::total_cmp);
                return Ok(Source::Sample { pairs: Arc::new(v), sorted_d: Arc::new(sorted_d), drawn: true });
            }
        };
        let mut sorted_d: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        sorted_d.sort_by(f64::total_cmp);
        Ok(Source::Sample { pairs: Arc::new(pairs), sorted_d: Arc::new(sorted_d), drawn: false })
    }

    fn d_cdf_strict(&self, x: f64) -> f64 {
        match self {
            Source::Analytic(law) => law.d_cdf_strict(x).expect("analytic law"),
            Source::Sample { sorted_d, .. } => sorted_d.partition_point(|&d| d < x) as f64 / sorted_d.len() as f64,
        }
    }

    /// Masses of the cells `[ih, (i+1)h) × [jh, (j+1)h)`, `i, j < n`.
    fn cell_masses(&self, h: f64, n: usize) -> Vec<f64> {
        let mut p = vec![0.0; n * n];
        match self {
            Source::Analytic(law) => {
                let cdf = |x: f64, y: f64| law.joint_cdf_strict(x, y).expect("analytic law");
                let edges: Vec<Vec<f64>> = (0..=n)
                    .into_par_iter()
                    .map(|i| (0..=n).map(|j| cdf(i as f64 * h, j as f64 * h)).collect())
                    .collect();
                for i in 0..n {
                    for j in 0..n {
                        let m = edges[i + 1][j + 1] - edges[i][j + 1] - edges[i + 1][j] + edges[i][j];
                        p[i * n + j] = m.max(0.0);
                    }
                }
            }
            Source::Sample { pairs, .. } => {
                let w = 1.0 / pairs.len() as f64;
                for &(d, u) in pairs.iter() {
                    let (i, j) = ((d / h).floor(), (u / h).floor());
                    if i < n as f64 && j < n as f64 {
                        p[i as usize * n + j as usize] += w;
                    }
                }
            }
        }
        p
    }

    fn sampling_error(&self) -> f64 {
        match self {
            Source::Sample { pairs, drawn: true, .. } => 0.5 / (pairs.len() as f64).sqrt(),
            _ => 0.0,
        }
    }
}

fn smooth_len(min: usize) -> usize {
    let mut m = min.max(1);
    loop {
        let mut r = m;
        for f in [2, 3, 5] {
            while r.is_multiple_of(f) {
                r /= f;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

struct Fft2 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { m, fwd: planner.plan_fft_forward(m), inv: planner.plan_fft_inverse(m) }
    }

    fn transpose(&self, a: &[Complex64]) -> Vec<Complex64> {
        let m = self.m;
        let mut out = vec![Complex64::new(0.0, 0.0); m * m];
        out.par_chunks_mut(m).enumerate().for_each(|(c, row)| {
            for (r, v) in row.iter_mut().enumerate() {
                *v = a[r * m + c];
            }
        });
        out
    }

    /// Spectrum of the zero-padded `n × n` array, in transposed layout.
    fn forward(&self, a: &[f64], n: usize) -> Vec<Complex64> {
        let m = self.m;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
        buf.par_chunks_mut(m).take(n).enumerate().for_each(|(i, row)| {
            for j in 0..n {
                row[j] = Complex64::new(a[i * n + j], 0.0);
            }
            self.fwd.process(row);
        });
        let mut t = self.transpose(&buf);
        t.par_chunks_mut(m).for_each(|row| self.fwd.process(row));
        t
    }

    /// Leading `n × n` block of the inverse of a transposed-layout spectrum.
    fn inverse(&self, mut spec: Vec<Complex64>, n: usize) -> Vec<f64> {
        let m = self.m;
        spec.par_chunks_mut(m).for_each(|row| self.inv.process(row));
        let mut t = self.transpose(&spec);
        t.par_chunks_mut(m).take(n).for_each(|row| self.inv.process(row));
        let scale = 1.0 / (m * m) as f64;
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for j in 0..n {
                let v = t[i * m + j].re * scale;
                // convolution roundoff can leave tiny negative masses
                row[j] = if v > 0.0 { v } else { 0.0 };
            }
        });
        out
    }
}

/// Partial-sum laws `P_n` of `(X_n, Y_n)` on one lattice; the mass of cell
/// `(i, j)` of level `n` sits at `((i + n/2)h, (j + n/2)h)`.
struct Grid {
    h: f64,
    n: usize,
    levels: Vec<Vec<f64>>,
    truncation: f64,
}

impl Grid {
    fn build(
        src: &Source,
        t: f64,
        h: f64,
        n_cap: usize,
        cheb: &dyn Fn(usize) -> f64,
        cfg: &LatticeConfig,
        stored: &mut usize,
    ) -> Result<Self> {
        let n = (t / h).ceil() as usize + 2;
        let base = src.cell_masses(h, n);
        let fft = Fft2::new(smooth_len(2 * n - 1));
        let base_spec = fft.forward(&base, n);
        let mut levels = vec![base];
        let truncation;
        loop {
            let k = levels.len();
            *stored += n * n;
            if *stored > cfg.max_cells {
                return Err(Error::GridTooLarge { cells: *stored, limit: cfg.max_cells });
            }
            let last = &levels[k - 1];
            // lattice estimate of P(X_k + Y_k <= t), which bounds every
            // remaining term of the series
            let reach = ((t + h) / h - k as f64).floor();
            let mass: f64 = (0..n)
                .map(|i| (0..n).filter(|&j| ((i + j) as f64) <= reach).map(|j| last[i * n + j]).sum::<f64>())
                .sum();
            if mass < cfg.tolerance / 2.0 {
                truncation = mass;
                break;
            }
            if k >= n_cap {
                truncation = cheb(k);
                break;
            }
            let mut spec = fft.forward(last, n);
            spec.par_iter_mut().zip(base_spec.par_iter()).for_each(|(a, b)| *a *= b);
            levels.push(fft.inverse(spec, n));
        }
        Ok(Self { h, n, levels, truncation })
    }

    /// Fraction of a mass at `pos`, spread over `pos ± h/2`, lying below `thr`.
    fn below(&self, pos: f64, thr: f64) -> f64 {
        ((thr - pos) / self.h + 0.5).clamp(0.0, 1.0)
    }

    /// `P(Y_k ≤ y, X_k < s) - P(Y_k ≤ y, X_k + D < s)` for `k = 1, 2, …`.
    fn terms(&self, src: &Source, s: f64, y: f64) -> Vec<f64> {
        let n = self.n;
        self.levels
            .iter()
            .enumerate()
            .map(|(idx, p)| {
                let k = (idx + 1) as f64;
                let wy: Vec<f64> = (0..n).map(|j| self.below((j as f64 + 0.5 * k) * self.h, y)).collect();
                (0..n)
                    .map(|i| {
                        let x = (i as f64 + 0.5 * k) * self.h;
                        let wx = self.below(x, s) - src.d_cdf_strict(s - x);
                        if wx == 0.0 {
                            return 0.0;
                        }
                        let row = &p[i * n..(i + 1) * n];
                        wx * row.iter().zip(&wy).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .sum()
            })
            .collect()
    }
}

/// Hard ceiling on the number of partial sums.
const MAX_LEVELS: usize = 100_000;

/// Bivariate lattice for the exact series at a fixed horizon `t`, built at
/// steps `h` and `h/2`; values are Richardson-extrapolated.
pub struct SeriesLattice {
    t: f64,
    src: Source,
    coarse: Grid,
    fine: Grid,
    tolerance: f64,
}

impl std::fmt::Debug for SeriesLattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeriesLattice")
            .field("t", &self.t)
            .field("h", &self.coarse.h)
            .field("levels", &(self.coarse.levels.len(), self.fine.levels.len()))
            .finish()
    }
}

impl SeriesLattice {
    pub fn new(law: &SojournLaw, t: f64, cfg: &LatticeConfig) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidRange(format!("t = {t} must be positive")));
        }
        if !(cfg.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        let ms = law.moments()?;
        let h = cfg.step.unwrap_or(ms.alpha.min(ms.beta) / 50.0);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::param("step", format!("lattice step must be positive, got {h}")));
        }
        let src = Source::new(law, cfg)?;

        // Chebyshev: P(X_k + Y_k ≤ t) ≤ k v/(k m - t)² once k m > t
        let m = ms.alpha + ms.beta;
        let v = ms.var_d + ms.var_u + 2.0 * ms.cov_du;
        let cheb = move |k: usize| {
            let gap = k as f64 * m - t;
            if gap <= 0.0 {
                1.0
            } else {
                (k as f64 * v / (gap * gap)).min(1.0)
            }
        };
        let mut n_cap = (t / m).floor() as usize + 1;
        while cheb(n_cap) >= cfg.tolerance / 2.0 && n_cap < MAX_LEVELS {
            n_cap += 1;
        }
        let mut stored = 0;
        let coarse = Grid::build(&src, t, h, n_cap, &cheb, cfg, &mut stored)?;
        let fine = Grid::build(&src, t, h / 2.0, n_cap, &cheb, cfg, &mut stored)?;
        Ok(Self { t, src, coarse, fine, tolerance: cfg.tolerance })
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn step(&self) -> f64 {
        self.coarse.h
    }

    fn series(&self, s: f64, y: f64) -> (Vec<f64>, Vec<f64>) {
        (self.coarse.terms(&self.src, s, y), self.fine.terms(&self.src, s, y))
    }

    fn combine(&self, head: f64, sign: f64, s: f64, y: f64) -> Result<SeriesValue> {
        let (c, f) = self.series(s, y);
        let vc = head + sign * c.iter().sum::<f64>();
        let vf = head + sign * f.iter().sum::<f64>();
        let r = (4.0 * vf - vc) / 3.0;
        let error = (r - vf).abs() + self.coarse.truncation.max(self.fine.truncation) + self.src.sampling_error();
        let value = r.clamp(0.0, 1.0);
        if error > self.tolerance {
            return Err(Error::GridTooCoarse { estimate: error, tolerance: self.tolerance });
        }
        Ok(SeriesValue { value, error, terms: c.len().max(f.len()) })
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(x >= 0.0 && x < self.t) {
            return Err(Error::InvalidRange(format!("x = {x} must lie in [0, {})", self.t)));
        }
        Ok(())
    }

    /// `P(β(t) ≤ x)`.
    pub fn cdf_beta(&self, x: f64) -> Result<SeriesValue> {
        self.check_x(x)?;
        let s = self.t - x;
        self.combine(1.0 - self.src.d_cdf_strict(s), 1.0, s, x)
    }

    /// `P(α(t) < x)`.
    pub fn cdf_alpha(&self, x: f64) -> Result<SeriesValue> {
        self.check_x(x)?;
        self.combine(self.src.d_cdf_strict(x), -1.0, x, self.t - x)
    }

    /// Extrapolated series terms `n = 0, 1, …` of `P(β(t) ≤ x)`.
    pub fn beta_terms(&self, x: f64) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let s = self.t - x;
        let (c, f) = self.series(s, x);
        let len = c.len().max(f.len());
        let mut out = vec![1.0 - self.src.d_cdf_strict(s)];
        for k in 0..len {
            let (a, b) = (c.get(k).copied().unwrap_or(0.0), f.get(k).copied().unwrap_or(0.0));
            out.push((4.0 * b - a) / 3.0);
        }
        Ok(out)
    }
}

/// `P(β(t) ≤ x)` for a start in A.
pub fn exact_cdf_beta(law: &SojournLaw, t: f64, x: f64, cfg: &LatticeConfig) -> Result<SeriesValue> {
    if !(x >= 0.0 && x < t) {
        return Err(Error::InvalidRange(format!("x = {x} must lie in [0, {t})")));
    }
    SeriesLattice::new(law, t, cfg)?.cdf_beta(x)
}

/// `P(α(t) < x)` for a start in A.
pub fn exact_cdf_alpha(law: &SojournLaw, t: f64, x: f64, cfg: &LatticeConfig) -> Result<SeriesValue> {
    if !(x >= 0.0 && x < t) {
        return Err(Error::InvalidRange(format!("x = {x} must lie in [0, {t})")));
    }
    SeriesLattice::new(law, t, cfg)?.cdf_alpha(x)
}

/// `P(S_n < x)` (`strict`) or `P(S_n ≤ x)` for `n` i.i.d. copies.
fn convolution_power_cdf(m: &Marginal, n: usize, x: f64, strict: bool) -> Result<f64> {
    if n == 0 {
        return Ok(if x > 0.0 || (!strict && x == 0.0) { 1.0 } else { 0.0 });
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let k = n as f64;
    match *m {
        Marginal::Exponential { rate } => Ok(GammaDist::new(k, rate).expect("valid").cdf(x)),
        Marginal::Gamma { shape, rate } => Ok(GammaDist::new(k * shape, rate).expect("valid").cdf(x)),
        Marginal::Deterministic { value } => {
            let v = k * value;
            Ok(if x > v || (!strict && x == v) { 1.0 } else { 0.0 })
        }
        Marginal::Uniform { .. } => {
            Err(Error::Unsupported("closed-form convolution powers of uniform sojourns".into()))
        }
    }
}

/// Terms `G⁽ⁿ⁾(x) [F⁽ⁿ⁾(t-x) - F⁽ⁿ⁺¹⁾(t-x)]` of the independent-sojourn form
/// of `P(β(t) ≤ x)`, using closed-form convolution powers.
pub fn independent_series_terms(d: &Marginal, u: &Marginal, t: f64, x: f64, tol: f64) -> Result<Vec<f64>> {
    if !(x >= 0.0 && x < t) {
        return Err(Error::InvalidRange(format!("x = {x} must lie in [0, {t})")));
    }
    let s = t - x;
    let mut out = Vec::new();
    let mut f_n = convolution_power_cdf(d, 0, s, true)?;
    for n in 0.. {
        let g = convolution_power_cdf(u, n, x, false)?;
        let f_next = convolution_power_cdf(d, n + 1, s, true)?;
        out.push(g * (f_n - f_next));
        if g * f_next < tol || n > 100_000 {
            break;
        }
        f_n = f_next;
    }
    Ok(out)
}
