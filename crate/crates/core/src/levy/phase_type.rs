use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// A phase-type law: absorption time of a finite Markov chain with initial
/// distribution `alpha` and sub-generator `generator`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    alpha: Vec<f64>,
    generator: Vec<Vec<f64>>,
    exit: Vec<f64>,
}

impl PhaseType {
    pub fn new(alpha: Vec<f64>, generator: Vec<Vec<f64>>) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(Error::param("alpha", "phase-type law needs at least one phase"));
        }
        if generator.len() != n || generator.iter().any(|row| row.len() != n) {
            return Err(Error::param("generator", format!("must be {n}x{n}")));
        }
        if alpha.iter().any(|&a| a < 0.0) || (alpha.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
            return Err(Error::param("alpha", "must be a probability vector"));
        }
        let mut exit = vec![0.0; n];
        for i in 0..n {
            if !(generator[i][i] < 0.0) {
                return Err(Error::param("generator", "diagonal entries must be negative"));
            }
            let mut row = 0.0;
            for (j, &g) in generator[i].iter().enumerate() {
                if i != j && g < 0.0 {
                    return Err(Error::param("generator", "off-diagonal entries must be >= 0"));
                }
                row += g;
            }
            if row > 1e-12 {
                return Err(Error::param("generator", "row sums must be <= 0"));
            }
            exit[i] = -row;
        }
        let ph = Self { alpha, generator, exit };
        // Transient chain: the mean must be finite.
        let m = ph.moment(1);
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::param("generator", "absorption is not certain"));
        }
        Ok(ph)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![vec![-rate]])
    }

    pub fn erlang(shape: usize, rate: f64) -> Result<Self> {
        let mut g = vec![vec![0.0; shape]; shape];
        for i in 0..shape {
            g[i][i] = -rate;
            if i + 1 < shape {
                g[i][i + 1] = rate;
            }
        }
        let mut alpha = vec![0.0; shape];
        alpha[0] = 1.0;
        Self::new(alpha, g)
    }

    pub fn hyperexponential(probs: &[f64], rates: &[f64]) -> Result<Self> {
        let n = rates.len();
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            g[i][i] = -rates[i];
        }
        Self::new(probs.to_vec(), g)
    }

    pub fn phases(&self) -> usize {
        self.alpha.len()
    }

    fn shifted(&self, s: Complex64) -> DMatrix<Complex64> {
        let n = self.phases();
        DMatrix::from_fn(n, n, |i, j| {
            let g = Complex64::from(-self.generator[i][j]);
            if i == j {
                s + g
            } else {
                g
            }
        })
    }

    /// `α (sI - T)^{-k} t` for `k ≥ 1`, where `t` is the exit vector.
    fn resolvent_power(&self, s: Complex64, k: u32) -> Complex64 {
        let lu = self.shifted(s).lu();
        let mut v = DVector::from_iterator(self.phases(), self.exit.iter().map(|&e| Complex64::from(e)));
        for _ in 0..k {
            v = match lu.solve(&v) {
                Some(v) => v,
                None => return Complex64::new(f64::INFINITY, 0.0),
            };
        }
        self.alpha.iter().zip(v.iter()).map(|(&a, &x)| x * a).sum()
    }

    /// Laplace–Stieltjes transform `E e^{-sJ}`.
    pub fn lst(&self, s: Complex64) -> Complex64 {
        self.resolvent_power(s, 1)
    }

    /// `E[J^k e^{-sJ}] = k! α (sI - T)^{-(k+1)} t`.
    pub fn weighted_moment(&self, s: f64, k: u32) -> f64 {
        let fact: f64 = (1..=k).map(f64::from).product();
        fact * self.resolvent_power(Complex64::from(s), k + 1).re
    }

    pub fn moment(&self, k: u32) -> f64 {
        self.weighted_moment(0.0, k)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Largest `s < 0` pole of the transform, i.e. the MGF abscissa
    /// (the smallest `-T` eigenvalue real part).
    pub fn decay_rate(&self) -> f64 {
        let n = self.phases();
        let m = DMatrix::from_fn(n, n, |i, j| -self.generator[i][j]);
        m.complex_eigenvalues().iter().map(|e| e.re).fold(f64::INFINITY, f64::min)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = self.phases();
        let mut u: f64 = rng.random();
        let mut phase = n - 1;
        for (i, &a) in self.alpha.iter().enumerate() {
            if u < a {
                phase = i;
                break;
            }
            u -= a;
        }
        let mut total = 0.0;
        loop {
            let rate = -self.generator[phase][phase];
            let hold: f64 = Exp1.sample(rng);
            total += hold / rate;
            let mut u: f64 = rng.random::<f64>() * rate;
            if u < self.exit[phase] {
                return total;
            }
            u -= self.exit[phase];
            let mut next = None;
            for j in 0..n {
                if j == phase {
                    continue;
                }
                if u < self.generator[phase][j] {
                    next = Some(j);
                    break;
                }
                u -= self.generator[phase][j];
            }
            match next {
                Some(j) => phase = j,
                None => return total,
            }
        }
    }
}
