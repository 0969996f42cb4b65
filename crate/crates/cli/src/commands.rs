use std::collections::btree_map::{BTreeMap, Entry};

use anyhow::{bail, Context, Result};
use serde_json::json;

use occupation::ldp::{lower_tail_rate, rate_function};
use occupation::renewal::{normal_approx_cdf, simulate_alternating, SeriesLattice};
use occupation::simulate::{replicate, simulate_rbm, simulate_storage};
use occupation::storage::{
    free_occupation_double_transform, free_occupation_double_transform_complex, is_borodin_salminen_case,
    occupation_cdf, occupation_double_transform, rbm_double_transform,
};
use occupation::transforms::{alpha_double_transform, alpha_double_transform_complex, occupation_cdf_via_inversion};
use occupation::validation::{run_criterion, CRITERIA};
use occupation::{InversionConfig, LevyKind, LevyModel, PathSample, ScaleEvaluator, SimConfig, SojournLaw};

use crate::config::{InversionSpec, LoadedConfig, SimulationSpec};
use crate::output::{Cell, Meta, Table};
use crate::UsageError;

/// Result of a subcommand: the table, its metadata and whether a validation
/// check failed.
#[derive(Debug, Clone)]
pub struct Report {
    pub meta: Meta,
    pub table: Table,
    pub failed: bool,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

impl Report {
    fn new(meta: Meta, table: Table) -> Self {
        Self { meta, table, failed: false, summary: Vec::new() }
    }
}

const DEFAULT_SEED: u64 = 0;

enum Subject {
    Law(SojournLaw),
    Model(LevyModel),
}

fn subject(cfg: &LoadedConfig) -> Result<Subject> {
    match (&cfg.config.law, &cfg.config.model) {
        (Some(l), None) => Ok(Subject::Law(l.build(&cfg.base).context("building the sojourn law")?)),
        (None, Some(m)) => Ok(Subject::Model(m.build().context("building the Lévy model")?)),
        _ => Err(UsageError("config needs exactly one of `law` or `model`".into()).into()),
    }
}

fn tau(cfg: &LoadedConfig) -> Result<f64> {
    cfg.config.query.tau.ok_or_else(|| UsageError("model runs need `query.tau`".into()).into())
}

/// The alternating renewal law behind a run: the configured law, or the
/// sojourn law of the model at `query.tau`.
fn renewal_law(cfg: &LoadedConfig) -> Result<SojournLaw> {
    match subject(cfg)? {
        Subject::Law(l) => Ok(l),
        Subject::Model(m) => SojournLaw::storage(m, tau(cfg)?).context("sojourn law of the model"),
    }
}

fn require<T>(v: &[T], what: &str) -> Result<()> {
    if v.is_empty() {
        bail!(UsageError(format!("`query.{what}` must not be empty")));
    }
    Ok(())
}

fn free_flag_only_with_model(cfg: &LoadedConfig) -> Result<()> {
    if cfg.config.query.free && cfg.config.model.is_none() {
        bail!(UsageError("`query.free` needs a `model`".into()));
    }
    Ok(())
}

pub fn cmd_transform(cfg: &LoadedConfig, seed: Option<u64>) -> Result<Report> {
    let q = &cfg.config.query;
    require(&q.theta, "theta")?;
    require(&q.q, "q")?;
    free_flag_only_with_model(cfg)?;
    let mut meta = Meta::new("transform", seed, &cfg.text);
    let mut table = Table::new(&["theta", "q", "method", "value", "error"]);
    let grid: Vec<(f64, f64)> = q.theta.iter().flat_map(|&th| q.q.iter().map(move |&qq| (th, qq))).collect();
    match subject(cfg)? {
        Subject::Law(law) => {
            for &(th, qq) in &grid {
                let v = alpha_double_transform(&law, th, qq).with_context(|| format!("theta = {th}, q = {qq}"))?;
                table.push(vec![th.into(), qq.into(), "renewal".into(), v.into(), Cell::Empty]);
            }
        }
        Subject::Model(model) if q.free => {
            for &(th, qq) in &grid {
                let v = free_occupation_double_transform(&model, th, qq)
                    .with_context(|| format!("theta = {th}, q = {qq}"))?;
                table.push(vec![th.into(), qq.into(), "free".into(), v.into(), Cell::Empty]);
            }
        }
        Subject::Model(model) => {
            let tau = tau(cfg)?;
            let brownian = match *model.kind() {
                LevyKind::Brownian { mu, sigma2 } => Some((mu, sigma2)),
                _ => None,
            };
            if let Some((mu, sigma2)) = brownian {
                meta.set("borodin_salminen_case", is_borodin_salminen_case(mu, sigma2));
            }
            let law = match brownian {
                None => Some(SojournLaw::storage(model.clone(), tau)?),
                Some(_) => None,
            };
            let stable = model.is_stable();
            let scale = ScaleEvaluator::new(model);
            for &(th, qq) in &grid {
                let ctx = || format!("theta = {th}, q = {qq}");
                if let (false, Some((mu, s2))) = (stable, brownian) {
                    // ψ needs a negative drift; the closed form does not
                    let v = rbm_double_transform(mu, s2, tau, th, qq).with_context(ctx)?;
                    table.push(vec![th.into(), qq.into(), "rbm_closed_form".into(), v.into(), Cell::Empty]);
                    continue;
                }
                let direct = occupation_double_transform(&scale, tau, th, qq).with_context(ctx)?;
                let (name, other) = match (&law, brownian) {
                    (Some(law), _) => ("renewal", alpha_double_transform(law, th, qq).with_context(ctx)?),
                    (None, Some((mu, s2))) => {
                        ("rbm_closed_form", rbm_double_transform(mu, s2, tau, th, qq).with_context(ctx)?)
                    }
                    (None, None) => unreachable!("non-Brownian models always have a sojourn law"),
                };
                let gap = (direct - other).abs();
                table.push(vec![th.into(), qq.into(), "direct".into(), direct.into(), gap.into()]);
                table.push(vec![th.into(), qq.into(), name.into(), other.into(), gap.into()]);
            }
        }
    }
    Ok(Report::new(meta, table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Method {
    Series,
    Inversion,
    Normal,
    Simulation,
}

fn parse_methods(cfg: &LoadedConfig) -> Result<Vec<Method>> {
    let q = &cfg.config.query;
    let mut out: Vec<Method> = match &q.methods {
        Some(names) => names
            .iter()
            .map(|n| match n.as_str() {
                "series" => Ok(Method::Series),
                "inversion" => Ok(Method::Inversion),
                "normal" => Ok(Method::Normal),
                "simulation" => Ok(Method::Simulation),
                other => Err(UsageError(format!("unknown method `{other}`"))),
            })
            .collect::<Result<_, _>>()?,
        None => {
            let mut m = match &cfg.config.model {
                _ if q.free => vec![Method::Inversion],
                Some(crate::config::ModelSpec::Brownian { .. }) => vec![Method::Inversion],
                Some(crate::config::ModelSpec::CpPhaseType { .. }) => vec![Method::Series, Method::Normal],
                _ => vec![Method::Series, Method::Inversion, Method::Normal],
            };
            if cfg.config.simulation.is_some() {
                m.push(Method::Simulation);
            }
            m
        }
    };
    out.sort();
    out.dedup();
    if out.contains(&Method::Simulation) && cfg.config.simulation.is_none() {
        bail!(UsageError("method `simulation` needs a `[simulation]` block".into()));
    }
    Ok(out)
}

fn sim_block(cfg: &LoadedConfig) -> Result<&SimulationSpec> {
    cfg.config.simulation.as_ref().ok_or_else(|| UsageError("this command needs a `[simulation]` block".into()).into())
}

/// Simulated paths of the configured law or model on `[0, t]`.
fn simulate_paths(cfg: &LoadedConfig, sim: &SimulationSpec, seed: u64, t: f64) -> Result<Vec<PathSample>> {
    if cfg.config.query.free {
        bail!(UsageError("simulation of the free process is not available".into()));
    }
    match subject(cfg)? {
        Subject::Law(law) => Ok(replicate(seed, sim.replications, |rng| simulate_alternating(&law, t, rng))?),
        Subject::Model(model) => {
            let sc = SimConfig { seed, replications: sim.replications, horizon: t, dt: sim.dt, tau: tau(cfg)? };
            sc.validate()?;
            let out = match *model.kind() {
                LevyKind::Brownian { mu, sigma2 } => {
                    replicate(seed, sim.replications, |rng| simulate_rbm(mu, sigma2, &sc, rng))?
                }
                _ => replicate(seed, sim.replications, |rng| simulate_storage(&model, &sc, rng).map(|(p, _)| p))?,
            };
            Ok(out)
        }
    }
}

/// `P(α(t) ≤ x)` estimate and its standard error.
fn ecdf(alphas: &[f64], x: f64) -> (f64, f64) {
    let n = alphas.len() as f64;
    let p = alphas.iter().filter(|&&a| a <= x).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

fn seed_for(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64) << 32)
}

fn inversion_cdf(cfg: &LoadedConfig, inv: &InversionConfig, t: f64, x: f64) -> Result<(f64, f64)> {
    let r = match subject(cfg)? {
        Subject::Law(law) => {
            occupation_cdf_via_inversion(|th, q| alpha_double_transform_complex(&law, th, q), t, x, inv)?
        }
        Subject::Model(model) if cfg.config.query.free => {
            occupation_cdf_via_inversion(|th, q| free_occupation_double_transform_complex(&model, th, q), t, x, inv)?
        }
        Subject::Model(model) => occupation_cdf(&ScaleEvaluator::new(model), tau(cfg)?, t, x, inv)?,
    };
    Ok((r.value, r.error))
}

pub fn cmd_dist(cfg: &LoadedConfig, seed: Option<u64>) -> Result<Report> {
    let points = cfg.config.query.time_points();
    require(&points, "t` and `query.x")?;
    free_flag_only_with_model(cfg)?;
    let methods = parse_methods(cfg)?;
    let seed_v = seed.unwrap_or(DEFAULT_SEED);
    let inv = cfg.config.inversion.build()?;
    let mut meta = Meta::new("dist", Some(seed_v), &cfg.text);
    meta.set("methods", methods.iter().map(|m| format!("{m:?}").to_lowercase()).collect::<Vec<_>>());
    meta.set("inversion", InversionSpec::algorithm_name(&inv));

    let law = if methods.iter().any(|m| matches!(m, Method::Series | Method::Normal)) {
        Some(renewal_law(cfg)?)
    } else {
        None
    };
    let moments = match (&law, methods.contains(&Method::Normal)) {
        (Some(l), true) => {
            let ms = l.moments()?;
            meta.set("clt_scale", ms.clt_scale);
            Some(ms)
        }
        _ => None,
    };

    let mut lattices: BTreeMap<u64, SeriesLattice> = BTreeMap::new();
    let mut sims: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut table = Table::new(&[
        "t",
        "x",
        "series",
        "series_error",
        "inversion",
        "inversion_error",
        "normal",
        "simulation",
        "simulation_se",
    ]);
    for &(t, x) in &points {
        let ctx = || format!("t = {t}, x = {x}");
        let mut row = vec![t.into(), x.into()];
        if methods.contains(&Method::Series) {
            let law = law.as_ref().expect("series needs the renewal law");
            if let Entry::Vacant(slot) = lattices.entry(t.to_bits()) {
                slot.insert(SeriesLattice::new(law, t, &cfg.config.lattice.build(seed_v)).with_context(ctx)?);
            }
            if x >= t {
                row.extend([1.0.into(), 0.0.into()]);
            } else {
                let v = lattices[&t.to_bits()].cdf_alpha(x).with_context(ctx)?;
                row.extend([v.value.into(), v.error.into()]);
            }
        } else {
            row.extend([Cell::Empty, Cell::Empty]);
        }
        if methods.contains(&Method::Inversion) {
            let (v, e) = inversion_cdf(cfg, &inv, t, x).with_context(ctx)?;
            row.extend([v.into(), e.into()]);
        } else {
            row.extend([Cell::Empty, Cell::Empty]);
        }
        match &moments {
            Some(ms) => row.push(normal_approx_cdf(ms, t, x).with_context(ctx)?.into()),
            None => row.push(Cell::Empty),
        }
        if methods.contains(&Method::Simulation) {
            if !sims.contains_key(&t.to_bits()) {
                let s = seed_for(seed_v, sims.len());
                let paths = simulate_paths(cfg, sim_block(cfg)?, s, t).with_context(ctx)?;
                sims.insert(t.to_bits(), paths.iter().map(|p| p.alpha_t).collect());
            }
            let (p, se) = ecdf(&sims[&t.to_bits()], x);
            row.extend([p.into(), se.into()]);
        } else {
            row.extend([Cell::Empty, Cell::Empty]);
        }
        table.push(row);
    }
    Ok(Report::new(meta, table))
}

pub fn cmd_clt(cfg: &LoadedConfig, seed: Option<u64>) -> Result<Report> {
    let points = cfg.config.query.time_points();
    require(&points, "t` and `query.x")?;
    let seed_v = seed.unwrap_or(DEFAULT_SEED);
    let law = renewal_law(cfg)?;
    let ms = law.moments()?;
    let mut meta = Meta::new("clt", Some(seed_v), &cfg.text);
    meta.set(
        "moments",
        json!({
            "mean_d": ms.alpha,
            "mean_u": ms.beta,
            "var_d": ms.var_d,
            "var_u": ms.var_u,
            "cov_du": ms.cov_du,
            "clt_scale": ms.clt_scale,
            "mean_fraction": ms.mean_fraction(),
        }),
    );
    let mut sims: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut table = Table::new(&["t", "x", "z", "normal", "simulation", "simulation_se"]);
    for &(t, x) in &points {
        let z = (x - ms.mean_fraction() * t) / (ms.clt_scale * t).sqrt();
        let mut row = vec![t.into(), x.into(), z.into(), normal_approx_cdf(&ms, t, x)?.into()];
        match &cfg.config.simulation {
            Some(sim) => {
                if !sims.contains_key(&t.to_bits()) {
                    let s = seed_for(seed_v, sims.len());
                    let paths = replicate(s, sim.replications, |rng| simulate_alternating(&law, t, rng))?;
                    sims.insert(t.to_bits(), paths.iter().map(|p| p.alpha_t).collect());
                }
                let (p, se) = ecdf(&sims[&t.to_bits()], x);
                row.extend([p.into(), se.into()]);
            }
            None => row.extend([Cell::Empty, Cell::Empty]),
        }
        table.push(row);
    }
    Ok(Report::new(meta, table))
}

pub fn cmd_ldp(cfg: &LoadedConfig, seed: Option<u64>) -> Result<Report> {
    let q = &cfg.config.query;
    require(&q.frac, "frac")?;
    let seed_v = seed.unwrap_or(DEFAULT_SEED);
    let law = renewal_law(cfg)?;
    let m = law.moments()?.mean_fraction();
    let mut meta = Meta::new("ldp", Some(seed_v), &cfg.text);
    meta.set("mean_fraction", m);
    let horizons: Vec<Option<f64>> = if q.t.is_empty() { vec![None] } else { q.t.iter().copied().map(Some).collect() };
    let mut sims: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut table = Table::new(&[
        "frac",
        "side",
        "theta",
        "drain",
        "rate",
        "boundary",
        "t",
        "tail_asymptotic",
        "simulated_rate",
        "hits",
    ]);
    for &frac in &q.frac {
        let upper = frac >= m;
        let r = if upper { rate_function(&law, frac) } else { lower_tail_rate(&law, frac) }
            .with_context(|| format!("frac = {frac}"))?;
        for &t in &horizons {
            let mut row = vec![
                frac.into(),
                if upper { "upper" } else { "lower" }.into(),
                r.theta.into(),
                r.drain.into(),
                r.value.into(),
                r.boundary.into(),
                t.into(),
                t.map(|t| (-t * r.value).exp()).into(),
            ];
            match (&cfg.config.simulation, t) {
                (Some(sim), Some(t)) => {
                    if !sims.contains_key(&t.to_bits()) {
                        let s = seed_for(seed_v, sims.len());
                        let paths = replicate(s, sim.replications, |rng| simulate_alternating(&law, t, rng))?;
                        sims.insert(t.to_bits(), paths.iter().map(|p| p.alpha_t / t).collect());
                    }
                    let fr = &sims[&t.to_bits()];
                    let hits = fr.iter().filter(|&&a| if upper { a > frac } else { a < frac }).count();
                    let rate = -(hits as f64 / fr.len() as f64).ln() / t;
                    row.extend([rate.into(), hits.into()]);
                }
                _ => row.extend([Cell::Empty, Cell::Empty]),
            }
            table.push(row);
        }
    }
    Ok(Report::new(meta, table))
}

pub fn cmd_simulate(cfg: &LoadedConfig, seed: Option<u64>) -> Result<Report> {
    let sim = sim_block(cfg)?;
    let q = &cfg.config.query;
    let seed_v = seed.unwrap_or(DEFAULT_SEED);
    let horizon = match (sim.horizon, q.t.as_slice()) {
        (Some(h), _) => h,
        (None, [t]) => *t,
        _ => bail!(UsageError("set `simulation.horizon` or a single `query.t`".into())),
    };
    let mut meta = Meta::new("simulate", Some(seed_v), &cfg.text);
    meta.set("horizon", horizon);
    meta.set("replications", sim.replications);
    let paths = simulate_paths(cfg, sim, seed_v, horizon)?;
    let xs: Vec<f64> = q.x.iter().copied().chain(q.x_fraction.iter().map(|f| f * horizon)).collect();
    if xs.is_empty() {
        let mut table = Table::new(&["path", "alpha_t", "beta_t", "in_a_at_t", "n_cycles"]);
        for (i, p) in paths.iter().enumerate() {
            table.push(vec![i.into(), p.alpha_t.into(), p.beta_t.into(), p.in_a_at_t.into(), p.cycles().into()]);
        }
        return Ok(Report::new(meta, table));
    }
    let alphas: Vec<f64> = paths.iter().map(|p| p.alpha_t).collect();
    let mut table = Table::new(&["t", "x", "ecdf", "se"]);
    for x in xs {
        let (p, se) = ecdf(&alphas, x);
        table.push(vec![horizon.into(), x.into(), p.into(), se.into()]);
    }
    Ok(Report::new(meta, table))
}

pub fn cmd_validate(cfg: &LoadedConfig, seed: Option<u64>) -> Result<Report> {
    let spec = cfg.config.validate.clone().unwrap_or_default();
    let opts = spec.options(seed);
    opts.validate()?;
    let ids: Vec<u8> = spec.criteria.clone().unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
    if ids.is_empty() {
        bail!(UsageError("`validate.criteria` must not be empty".into()));
    }
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        bail!(UsageError(format!("unknown criterion {bad}")));
    }
    let mut meta = Meta::new("validate", Some(opts.seed), &cfg.text);
    meta.set("mc_scale", opts.mc_scale);
    let mut table = Table::new(&["criterion", "title", "check", "value", "reference", "bound", "passed"]);
    let mut summary = Vec::new();
    let mut failed = 0usize;
    for &id in &ids {
        let r = run_criterion(id, &opts).with_context(|| format!("criterion {id}"))?;
        log::info!("{}", r.summary_line());
        if !r.passed() {
            failed += 1;
        }
        summary.push(r.summary_line());
        for c in &r.checks {
            table.push(vec![
                (id as usize).into(),
                r.title.into(),
                c.name.clone().into(),
                c.value.into(),
                c.reference.into(),
                c.bound.into(),
                c.passed.into(),
            ]);
        }
    }
    meta.set("criteria", ids.len());
    meta.set("criteria_failed", failed);
    Ok(Report { meta, table, failed: failed > 0, summary })
}
