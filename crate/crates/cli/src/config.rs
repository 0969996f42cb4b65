use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use occupation::levy::PhaseType;
use occupation::validation::ValidationOptions;
use occupation::{Algorithm, InversionConfig, LatticeConfig, LevyModel, Marginal, SojournLaw};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One run: a law or a model, what to compute and where to write it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub law: Option<LawSpec>,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub query: Query,
    #[serde(default)]
    pub inversion: InversionSpec,
    #[serde(default)]
    pub lattice: LatticeSpec,
    pub simulation: Option<SimulationSpec>,
    pub validate: Option<ValidateSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Deterministic { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl MarginalSpec {
    pub fn build(&self) -> occupation::Result<Marginal> {
        match *self {
            MarginalSpec::Exponential { rate } => Marginal::exponential(rate),
            MarginalSpec::Gamma { shape, rate } => Marginal::gamma(shape, rate),
            MarginalSpec::Erlang { shape, rate } => Marginal::erlang(shape, rate),
            MarginalSpec::Deterministic { value } => Marginal::deterministic(value),
            MarginalSpec::Uniform { low, high } => Marginal::uniform(low, high),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Independent {
        d: MarginalSpec,
        u: MarginalSpec,
        #[serde(default)]
        swap: bool,
    },
    MarshallOlkin {
        rate_d: f64,
        rate_u: f64,
        rate_common: f64,
        #[serde(default)]
        swap: bool,
    },
    Storage {
        model: ModelSpec,
        tau: f64,
        #[serde(default)]
        swap: bool,
    },
    /// Two-column CSV `d,u` with a header; relative paths resolve against
    /// the config file.
    Empirical {
        path: PathBuf,
        #[serde(default)]
        swap: bool,
    },
}

impl LawSpec {
    pub fn build(&self, base: &Path) -> Result<SojournLaw> {
        let (law, swap) = match self {
            LawSpec::Independent { d, u, swap } => (SojournLaw::independent(d.build()?, u.build()?), *swap),
            LawSpec::MarshallOlkin { rate_d, rate_u, rate_common, swap } => {
                (SojournLaw::marshall_olkin(*rate_d, *rate_u, *rate_common)?, *swap)
            }
            LawSpec::Storage { model, tau, swap } => (SojournLaw::storage(model.build()?, *tau)?, *swap),
            LawSpec::Empirical { path, swap } => {
                let path = base.join(path);
                let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                let law =
                    SojournLaw::empirical_from_csv(file).with_context(|| format!("reading {}", path.display()))?;
                (law, *swap)
            }
        };
        Ok(if swap { law.swapped() } else { law })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Brownian {
        mu: f64,
        sigma2: f64,
    },
    CpExp {
        lambda: f64,
        jump_mean: f64,
    },
    /// Phase-type jumps with initial vector `alpha` and sub-generator rows.
    CpPhaseType {
        lambda: f64,
        alpha: Vec<f64>,
        generator: Vec<Vec<f64>>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> occupation::Result<LevyModel> {
        match self {
            ModelSpec::Brownian { mu, sigma2 } => LevyModel::brownian(*mu, *sigma2),
            ModelSpec::CpExp { lambda, jump_mean } => LevyModel::cp_exp(*lambda, *jump_mean),
            ModelSpec::CpPhaseType { lambda, alpha, generator } => {
                LevyModel::cp_phase_type(*lambda, PhaseType::new(alpha.clone(), generator.clone())?)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub t: Vec<f64>,
    #[serde(default)]
    pub x: Vec<f64>,
    /// Fractions of `t`; appended to `x` for every `t`.
    #[serde(default)]
    pub x_fraction: Vec<f64>,
    #[serde(default)]
    pub frac: Vec<f64>,
    /// Level of the reflected process for `model` runs.
    pub tau: Option<f64>,
    /// Occupation of the negative half-line by the free process.
    #[serde(default)]
    pub free: bool,
    /// Columns of `dist`: any of series, inversion, normal, simulation.
    pub methods: Option<Vec<String>>,
}

impl Query {
    /// `(t, x)` pairs in input order.
    pub fn time_points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &t in &self.t {
            out.extend(self.x.iter().map(|&x| (t, x)));
            out.extend(self.x_fraction.iter().map(|&f| (t, f * t)));
        }
        out
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSpec {
    /// `euler` or `talbot`.
    pub algorithm: Option<String>,
    pub terms: Option<usize>,
    pub euler_order: Option<usize>,
    pub tolerance: Option<f64>,
    pub contour_scale: Option<f64>,
}

impl InversionSpec {
    pub fn build(&self) -> Result<InversionConfig> {
        let mut cfg = match self.algorithm.as_deref() {
            None | Some("euler") => InversionConfig::default(),
            Some("talbot") => InversionConfig::talbot(),
            Some(other) => return Err(UsageError(format!("unknown inversion algorithm `{other}`")).into()),
        };
        if let Some(v) = self.terms {
            cfg.terms = v;
        }
        if let Some(v) = self.euler_order {
            cfg.euler_order = v;
        }
        if let Some(v) = self.tolerance {
            cfg.target_abs_tol = v;
        }
        if let Some(v) = self.contour_scale {
            cfg.contour_scale = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn algorithm_name(cfg: &InversionConfig) -> &'static str {
        match cfg.algorithm {
            Algorithm::EulerSummation => "euler",
            Algorithm::Talbot => "talbot",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub step: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_cells: Option<usize>,
    pub empirical_draws: Option<usize>,
}

impl LatticeSpec {
    pub fn build(&self, seed: u64) -> LatticeConfig {
        let d = LatticeConfig::default();
        LatticeConfig {
            step: self.step,
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            max_cells: self.max_cells.unwrap_or(d.max_cells),
            empirical_draws: self.empirical_draws.unwrap_or(d.empirical_draws),
            seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub replications: usize,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    /// Criterion ids; all when absent.
    pub criteria: Option<Vec<u8>>,
    pub mc_scale: Option<f64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl ValidateSpec {
    pub fn options(&self, seed: Option<u64>) -> ValidationOptions {
        let d = ValidationOptions::default();
        ValidationOptions {
            seed: seed.unwrap_or(d.seed),
            mc_scale: self.mc_scale.unwrap_or(d.mc_scale),
            tolerances: self.tolerances.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// A parsed config with the raw text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| UsageError(format!("config is not valid TOML: {e}")))?;
        if table.is_empty() {
            return Err(UsageError("config is empty".into()).into());
        }
        let config: RunConfig = table.try_into().map_err(|e| UsageError(format!("invalid config: {e}")))?;
        if config.law.is_some() && config.model.is_some() {
            return Err(UsageError("config sets both `law` and `model`; choose one".into()).into());
        }
        Ok(Self { config, text: text.to_owned(), base: base.to_owned() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).with_context(|| format!("config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_ambiguous_configs_are_usage_errors() {
        for text in ["", "  \n# nothing\n"] {
            let e = LoadedConfig::parse(text, Path::new(".")).unwrap_err();
            assert!(e.is::<UsageError>(), "{e:#}");
        }
        let both = r#"
            [law]
            kind = "marshall_olkin"
            rate_d = 1.0
            rate_u = 1.0
            rate_common = 0.5
            [model]
            kind = "cp_exp"
            lambda = 0.5
            jump_mean = 1.0
        "#;
        assert!(LoadedConfig::parse(both, Path::new(".")).unwrap_err().is::<UsageError>());
        let typo = "[query]\nthetas = [1.0]\n";
        assert!(LoadedConfig::parse(typo, Path::new(".")).unwrap_err().is::<UsageError>());
    }

    #[test]
    fn laws_and_models_build() {
        let text = r#"
            seed = 3
            [law]
            kind = "independent"
            d = { dist = "erlang", shape = 2, rate = 2.0 }
            u = { dist = "exponential", rate = 1.0 }
            swap = true
            [query]
            t = [1.0, 2.0]
            x = [0.5]
            x_fraction = [0.25]
        "#;
        let c = LoadedConfig::parse(text, Path::new(".")).unwrap();
        let law = c.config.law.as_ref().unwrap().build(&c.base).unwrap();
        assert!(law.is_swapped());
        assert_eq!(c.config.query.time_points(), vec![(1.0, 0.5), (1.0, 0.25), (2.0, 0.5), (2.0, 0.5)]);
        let m = ModelSpec::CpPhaseType { lambda: 0.5, alpha: vec![1.0], generator: vec![vec![-1.0]] };
        assert!(m.build().unwrap().is_stable());
        assert!(InversionSpec { algorithm: Some("bogus".into()), ..Default::default() }.build().is_err());
    }
}
