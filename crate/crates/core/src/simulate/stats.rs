use crate::error::{Error, Result};

fn nonempty(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        Err(Error::EmptySample)
    } else {
        Ok(())
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Fraction of samples `≤ x`.
pub fn empirical_cdf(samples: &[f64], x: f64) -> Result<f64> {
    nonempty(samples)?;
    Ok(samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64)
}

/// `sup_x |F_n(x) - F(x)|` for a continuous `F`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    nonempty(samples)?;
    let v = sorted(samples);
    let n = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    nonempty(a)?;
    nonempty(b)?;
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic `P(D_n > d)` from the Kolmogorov distribution, with the
/// usual small-sample correction of the argument.
pub fn kolmogorov_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    let lam = (s + 0.12 + 0.11 / s) * d;
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lam * lam).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample critical value `√(-ln(level/2)/2) / √n`.
pub fn ks_critical_value(level: f64, n: usize) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Two-sample critical value `√(-ln(level/2)/2) · √((n+m)/(nm))`.
pub fn two_sample_critical_value(level: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-(level / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
}
