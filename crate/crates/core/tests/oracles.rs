//! Monte Carlo and quadrature oracles for the analytic routes.

use num_complex::Complex64;

use occupation::ldp::{cumulant, rate_function, tail_asymptotic};
use occupation::numeric::integrate;
use occupation::renewal::{exact_cdf_beta, simulate_alternating};
use occupation::simulate::{
    kolmogorov_p_value, ks_statistic, replicate, replicate_fold, simulate_rbm, simulate_storage, storage_cycle,
    supremum_epoch_sample,
};
use occupation::storage::{
    free_occupation_double_transform_complex, occupation_cdf, rbm_double_transform_complex, sojourn_joint_transform,
    sojourn_means, sojourn_moments,
};
use occupation::transforms::{invert, occupation_cdf_via_inversion};
use occupation::{InversionConfig, LatticeConfig, LevyModel, Marginal, ScaleEvaluator, SimConfig, SojournLaw};

fn exp_exp() -> SojournLaw {
    SojournLaw::independent(Marginal::exponential(1.0).unwrap(), Marginal::exponential(1.0).unwrap())
}

fn mm1() -> LevyModel {
    LevyModel::cp_exp(0.5, 1.0).unwrap()
}

/// Mean and standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn proportion_se(hits: usize, n: usize) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

fn assert_within(label: &str, value: f64, reference: f64, bound: f64) {
    assert!(
        (value - reference).abs() <= bound,
        "{label}: {value} vs {reference}, |diff| = {:.3e} > {bound:.3e}",
        (value - reference).abs()
    );
}

#[test]
fn sampler_means() {
    let n = 1_000_000;
    let law = exp_exp();
    let pairs = replicate(1, n, |rng| law.sample_pair(rng)).unwrap();
    let d: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let u: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    assert_within("exponential D mean", mean_se(&d).0, 1.0, 0.005);
    assert_within("exponential U mean", mean_se(&u).0, 1.0, 0.005);

    let storage = SojournLaw::storage(mm1(), 1.0).unwrap();
    let u = replicate(2, n, |rng| storage.sample_pair(rng).map(|p| p.1)).unwrap();
    assert_within("storage U mean", mean_se(&u).0, 2.0, 0.01);
}

#[test]
fn consecutive_pairs_are_uncorrelated() {
    // lag-one correlation of D within one long alternating path
    let law = SojournLaw::marshall_olkin(1.0, 1.0, 1.0).unwrap();
    let mut rng = occupation::simulate::stream(3, 0);
    let path = simulate_alternating(&law, 400_000.0, &mut rng).unwrap();
    let d: Vec<f64> = path.cycle_pairs.iter().map(|p| p.0).collect();
    let u: Vec<f64> = path.cycle_pairs.iter().map(|p| p.1).collect();
    let corr = |a: &[f64], b: &[f64]| {
        let (ma, mb) = (mean_se(a).0, mean_se(b).0);
        let c: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        c / (va * vb).sqrt()
    };
    let n = d.len() - 1;
    // under independence the sample correlation has s.e. 1/sqrt(n)
    let se = 1.0 / (n as f64).sqrt();
    assert_within("corr(D_i+1, D_i)", corr(&d[1..], &d[..n]), 0.0, 3.0 * se);
    assert_within("corr(D_i+1, U_i)", corr(&d[1..], &u[..n]), 0.0, 3.0 * se);
}

#[test]
fn complement_has_an_atom_at_zero() {
    let n = 1_000_000;
    let law = exp_exp();
    let zeros = replicate_fold(
        4,
        n,
        0usize,
        |rng| simulate_alternating(&law, 1.0, rng).map(|p| p.beta_t == 0.0),
        |acc: &mut usize, z| *acc += usize::from(z),
        |a, b| a + b,
    )
    .unwrap();
    assert_within("P(beta(1) = 0)", zeros as f64 / n as f64, (-1.0f64).exp(), 0.002);
}

#[test]
fn series_complement_law_matches_simulation() {
    let n = 10_000_000;
    let (t, x) = (2.0, 1.0);
    let law = exp_exp();
    let series = exact_cdf_beta(&law, t, x, &LatticeConfig::default()).unwrap();
    let hits = replicate_fold(
        5,
        n,
        0usize,
        |rng| simulate_alternating(&law, t, rng).map(|p| p.beta_t <= x),
        |acc: &mut usize, h| *acc += usize::from(h),
        |a, b| a + b,
    )
    .unwrap();
    let (p, se) = proportion_se(hits, n);
    assert_within("P(beta(2) <= 1)", series.value, p, 3.0 * se + series.error);
}

/// Storage cycles of the exponential model at level 1.
fn storage_cycles(seed: u64, n: usize) -> Vec<occupation::CycleRecord> {
    let model = mm1();
    replicate(seed, n, |rng| storage_cycle(&model, 1.0, rng)).unwrap()
}

#[test]
fn storage_cycle_means_and_joint_transform() {
    let cycles = storage_cycles(6, 10_000_000);
    let s = ScaleEvaluator::new(mm1());
    let (ed, eu) = sojourn_means(&s, 1.0).unwrap();
    let d: Vec<f64> = cycles.iter().map(|c| c.d).collect();
    let u: Vec<f64> = cycles.iter().map(|c| c.u).collect();
    let (md, sd) = mean_se(&d);
    let (mu, su) = mean_se(&u);
    assert_within("E D", md, ed, 3.0 * sd);
    assert_within("E U", mu, eu, 3.0 * su);

    let (a, b) = (0.3, 0.2);
    let w: Vec<f64> = cycles.iter().map(|c| (-a * c.d - b * c.u).exp()).collect();
    let (mw, sw) = mean_se(&w);
    assert_within("E exp(-0.3 D - 0.2 U)", mw, sojourn_joint_transform(&s, 1.0, a, b).unwrap(), 3.0 * sw);

    let ms = sojourn_moments(&s, 1.0).unwrap().summary;
    let prod: Vec<f64> = cycles.iter().map(|c| (c.d - md) * (c.u - mu)).collect();
    let (cov, scov) = mean_se(&prod);
    assert_within("Cov(D, U)", cov, ms.cov_du, 3.0 * scov);
}

#[test]
fn storage_cycles_renew_at_the_downcrossing() {
    // D_{i+1} is independent of U_i: consecutive cycles of one path
    let model = mm1();
    let cfg = SimConfig { seed: 7, replications: 1, horizon: 2_000_000.0, dt: None, tau: 1.0 };
    let mut rng = occupation::simulate::stream(7, 0);
    let (_, cycles) = simulate_storage(&model, &cfg, &mut rng).unwrap();
    let n = cycles.len() - 1;
    let next_d: Vec<f64> = cycles[1..].iter().map(|c| c.d).collect();
    let u: Vec<f64> = cycles[..n].iter().map(|c| c.u).collect();
    let (md, mu) = (mean_se(&next_d).0, mean_se(&u).0);
    let c: f64 = next_d.iter().zip(&u).map(|(x, y)| (x - md) * (y - mu)).sum();
    let vd: f64 = next_d.iter().map(|x| (x - md).powi(2)).sum();
    let vu: f64 = u.iter().map(|y| (y - mu).powi(2)).sum();
    let corr = c / (vd * vu).sqrt();
    assert_within("corr(D_i+1, U_i)", corr, 0.0, 3.0 / (n as f64).sqrt());
}

#[test]
fn overshoot_is_memoryless() {
    let cycles = storage_cycles(8, 100_000);
    let over: Vec<f64> = cycles.iter().map(|c| c.overshoot).collect();
    let d = ks_statistic(&over, |x| 1.0 - (-x).exp()).unwrap();
    let p = kolmogorov_p_value(d, over.len() as f64);
    assert!(p > 0.01, "KS p-value {p} (D = {d})");
}

#[test]
fn storage_occupation_law_matches_event_simulation() {
    let n = 1_000_000;
    let (t, x, tau) = (10.0, 7.0, 1.0);
    let model = mm1();
    let cfg = SimConfig { seed: 9, replications: n, horizon: t, dt: None, tau };
    let hits = replicate_fold(
        9,
        n,
        0usize,
        |rng| simulate_storage(&model, &cfg, rng).map(|p| p.0.alpha_t <= x),
        |acc: &mut usize, h| *acc += usize::from(h),
        |a, b| a + b,
    )
    .unwrap();
    let (p, se) = proportion_se(hits, n);
    let inv = occupation_cdf(&ScaleEvaluator::new(model), tau, t, x, &InversionConfig::default()).unwrap();
    assert_within("P(alpha(10) <= 7)", inv.value, p, 3.0 * se + inv.error);
}

/// `E e^{-θα(t)}` for reflected Brownian motion from `τ`, by inversion in `q`.
fn rbm_laplace(mu: f64, tau: f64, theta: f64, t: f64) -> f64 {
    let th = Complex64::from(theta);
    invert(|q| rbm_double_transform_complex(mu, 1.0, tau, th, q), t, &InversionConfig::default()).unwrap().value
}

/// `E f(α(t))` over Euler paths of reflected Brownian motion from `τ`.
fn euler_mean(mu: f64, tau: f64, t: f64, dt: f64, n: usize, seed: u64, f: impl Fn(f64) -> f64 + Sync) -> (f64, f64) {
    let cfg = SimConfig { seed, replications: n, horizon: t, dt: Some(dt), tau };
    let v = replicate(seed, n, |rng| simulate_rbm(mu, 1.0, &cfg, rng).map(|p| f(p.alpha_t))).unwrap();
    mean_se(&v)
}

#[test]
fn reflected_brownian_occupation_matches_euler() {
    // the Euler bias is O(√dt): doubling dt scales it by about √2, and the
    // Richardson combination of the two runs removes the leading term
    let (mu, tau, t, theta, x) = (-1.0, 1.0, 5.0, 1.0, 4.0);
    let (n, dt) = (400_000, 0.02);
    let s = ScaleEvaluator::new(LevyModel::brownian(mu, 1.0).unwrap());
    let laplace = rbm_laplace(mu, tau, theta, t);
    let cdf = occupation_cdf(&s, tau, t, x, &InversionConfig::default()).unwrap();
    let check = |label: &str, exact: f64, seed: u64, f: &(dyn Fn(f64) -> f64 + Sync)| {
        let r = std::f64::consts::SQRT_2;
        let (m1, s1) = euler_mean(mu, tau, t, dt, n, seed, f);
        let (m2, s2) = euler_mean(mu, tau, t, 2.0 * dt, n, seed + 1, f);
        let ratio = (m2 - exact) / (m1 - exact);
        assert!((1.2..=2.8).contains(&ratio), "{label}: bias ratio {ratio} under dt doubling");
        let extrapolated = (r * m1 - m2) / (r - 1.0);
        let se = (2.0 * s1 * s1 + s2 * s2).sqrt() / (r - 1.0);
        assert_within(label, extrapolated, exact, 3.0 * se + cdf.error);
    };
    check("E exp(-alpha(5))", laplace, 20, &|a| (-theta * a).exp());
    check("P(alpha(5) <= 4)", cdf.value, 22, &|a| f64::from(u8::from(a <= x)));
}

#[test]
fn driftless_reflected_brownian_laplace_transform() {
    let (tau, theta) = (1.0, 1.0);
    for (i, &t) in [0.5, 1.0, 2.0].iter().enumerate() {
        let exact = rbm_laplace(0.0, tau, theta, t);
        let (m, se) = euler_mean(0.0, tau, t, 1e-4, 100_000, 30 + i as u64, |a| (-theta * a).exp());
        assert_within("E exp(-alpha(t))", m, exact, 3.0 * se);
    }
}

#[test]
fn boundary_time_of_reflected_brownian_motion_vanishes() {
    // at τ = 0 the Euler occupation is pure discretisation error, O(√dt)
    let frac = |dt: f64| euler_mean(0.0, 0.0, 1.0, dt, 2000, 40, |a| a).0;
    let (coarse, fine) = (frac(1e-2), frac(1e-4));
    assert!(fine < 0.01, "alpha(1) at dt = 1e-4: {fine}");
    let ratio = coarse / fine;
    assert!((10.0 / 1.5..=10.0 * 1.5).contains(&ratio), "ratio {ratio} over a factor 100 in dt");
}

#[test]
fn supremum_epoch_transform() {
    let (mu, q, theta) = (-1.0, 1.0, 3.0);
    let model = LevyModel::brownian(mu, 1.0).unwrap();
    let want = model.psi(q).unwrap() / model.psi(q + theta).unwrap();
    let n = 100_000;
    let a = replicate(14, n, |rng| supremum_epoch_sample(mu, 1.0, q, 1e-4, rng).map(|p| (-theta * p.1).exp())).unwrap();
    let (m, se) = mean_se(&a);
    assert_within("E exp(-3 alpha(e_1))", m, want, 3.0 * se);

    let mut r = replicate(15, 10_000, |rng| supremum_epoch_sample(0.0, 1.0, 100.0, 1e-4, rng).map(|p| p.0)).unwrap();
    r.sort_by(f64::total_cmp);
    let p99 = r[r.len() * 99 / 100];
    assert!(p99 < 0.1, "99th percentile of the residual {p99}");
}

#[test]
fn arcsine_median_by_iterated_inversion() {
    let model = LevyModel::brownian(-1e-8, 1.0).unwrap();
    let v = occupation_cdf_via_inversion(
        |th, q| free_occupation_double_transform_complex(&model, th, q),
        1.0,
        0.5,
        &InversionConfig::default(),
    )
    .unwrap();
    assert_within("P(alpha(1) <= 1/2)", v.value, 0.5, 1e-4);
}

#[test]
fn scale_function_defining_transforms_by_quadrature() {
    let model = LevyModel::brownian(-1.0, 1.0).unwrap();
    let s = ScaleEvaluator::new(model.clone());
    let q = 1.0;
    let th = model.psi(q).unwrap() + 1.0;
    let v = integrate(|x| (-th * x).exp() * s.w(q, x).unwrap(), 0.0, 60.0, 1e-12).value;
    assert_within("Brownian transform of W", v, 1.0 / (model.phi(th) - q), 1e-6);

    // tilted: ∫ e^{-sx} W_tilt(x) dx = 1/(φ(s + ψ(q)) - q - θ)
    let model = mm1();
    let s = ScaleEvaluator::new(model.clone());
    let (q, theta) = (1.0, 1.0);
    let psi = model.psi(q).unwrap();
    let shift = model.psi(q + theta).unwrap() - psi + 1.0;
    let v = integrate(|x| (-shift * x).exp() * s.tilted(q, theta, x).unwrap().w, 0.0, 60.0, 1e-13).value;
    assert_within("tilted transform", v, 1.0 / (model.phi(shift + psi) - q - theta), 1e-8);
}

/// `E e^{θα(t)}` under independent exponential sojourns, by importance
/// sampling from exponentials with rates `1 - s1` and `1 + s2`.
fn tilted_moment(theta: f64, t: f64, s1: f64, s2: f64, n: usize, seed: u64) -> (f64, f64) {
    let proposal =
        SojournLaw::independent(Marginal::exponential(1.0 - s1).unwrap(), Marginal::exponential(1.0 + s2).unwrap());
    let logs = replicate(seed, n, |rng| {
        let p = simulate_alternating(&proposal, t, rng)?;
        let k = p.cycles() as f64;
        let (full_d, full_u) = if p.in_a_at_t { (k - 1.0, k - 1.0) } else { (k, k - 1.0) };
        Ok((theta - s1) * p.alpha_t + s2 * p.beta_t - full_d * (1.0 - s1).ln() - full_u * (1.0 + s2).ln())
    })
    .unwrap();
    // log-mean-exp with the standard error of the mean on the log scale
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let (m, se) = mean_se(&w);
    (top + m.ln(), se / m)
}

#[test]
fn cumulant_matches_simulated_exponential_moment() {
    let t = 200.0;
    let law = exp_exp();
    for &theta in &[0.5, 1.0] {
        // a fixed tilt not derived from the drain rate; the estimator is
        // unbiased for any s1 < 1 and s2 > -1
        let (log_m, rel_se) = tilted_moment(theta, t, 0.4 * theta, 0.6 * theta, 100_000, 16);
        assert!(rel_se < 0.05, "importance weights too dispersed: {rel_se}");
        let lam = cumulant(&law, theta).unwrap();
        let closed = theta * ((theta - 2.0 + (theta * theta + 4.0).sqrt()) / (2.0 * theta));
        assert_within("lambda vs closed form", lam, closed, 1e-10);
        assert_within("(1/t) log E e^{theta alpha(t)}", log_m / t, lam, 0.02 * lam);
    }
}

#[test]
fn tail_asymptotic_is_exponential_in_time() {
    let law = exp_exp();
    let r = rate_function(&law, 0.7).unwrap().value;
    for &t in &[10.0, 100.0, 1000.0] {
        let one = tail_asymptotic(&law, 0.7, t).unwrap();
        let two = tail_asymptotic(&law, 0.7, 2.0 * t).unwrap();
        assert_within("log ratio under t doubling", two.ln() - one.ln(), -r * t, 1e-9 * r * t);
        assert_eq!(tail_asymptotic(&law, 0.5, t).unwrap(), 1.0);
    }
}

#[test]
fn rate_function_matches_the_exponential_closed_form() {
    let law = exp_exp();
    for i in 1..20 {
        let f = 0.5 + 0.49 * i as f64 / 20.0;
        let closed = (f.sqrt() - (1.0 - f).sqrt()).powi(2);
        assert_within("rate function", rate_function(&law, f).unwrap().value, closed, 1e-10);
    }
}
