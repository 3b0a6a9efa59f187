//! Run configuration: a TOML document with fixed key names, plus `key=value` overrides.

use serde::{Deserialize, Serialize};

use crate::counterexample1d::{Mc1dConfig, ScalarFn, ScalarModel};
use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::integrator::{Scheme, SchemeConfig};
use crate::model::Model;
use crate::montecarlo::{EnsembleConfig, ErgodicityConfig, HistogramSpec, RefinementConfig};
use crate::lyapunov::LyapunovProfile;
use crate::params::ModelParams;
use crate::quadrature::Tolerances;

/// The configuration shipped with the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftChoice {
    /// `κ|x|^{m-1}x` with `κ, m` from the model section.
    Power,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub kind: DriftChoice,
}

/// Scheme settings; `x_max` and `eps_zero` come from the model section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub scheme: Scheme,
    pub dt0: f64,
    pub t_end: f64,
    #[serde(default = "default_true")]
    pub adaptive: bool,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_true() -> bool {
    true
}

fn default_max_steps() -> u64 {
    200_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    pub alpha: f64,
    pub gamma: f64,
    pub t_horizon: f64,
    /// Radii of the LV scan written by `lyapunov-scan`.
    pub scan_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroAvoidanceSection {
    pub n_paths: usize,
    /// Initial radius in transformed coordinates.
    pub y0_radius: f64,
    pub t_end: f64,
    pub dt0: f64,
    pub eps_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSection {
    pub b: String,
    pub sigma: String,
    pub x0: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub checkpoints: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Map used for the Feller-branch run (with σ ≡ 1).
    pub feller_b: String,
}

fn default_level() -> f64 {
    1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicitySection {
    pub scheme: Scheme,
    pub n_paths: usize,
    /// Ensemble size of the confirmatory rerun when the first pass fails.
    pub rerun_n_paths: usize,
    pub x0_a: Vec<f64>,
    pub x0_b: Vec<f64>,
    pub checkpoints: Vec<f64>,
    #[serde(default)]
    pub histogram: HistogramSpec,
    #[serde(default = "default_true")]
    pub independent_seeds: bool,
    pub alpha: f64,
}

impl ErgodicitySection {
    pub fn experiment(&self, n_paths: usize) -> ErgodicityConfig {
        ErgodicityConfig {
            n_paths,
            x0_a: self.x0_a.clone(),
            x0_b: self.x0_b.clone(),
            checkpoints: self.checkpoints.clone(),
            histogram: self.histogram,
            independent_seeds: self.independent_seeds,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_experiment")]
    pub experiment: String,
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    pub model: ModelParams,
    pub drift: DriftSection,
    pub scheme: SchemeSection,
    pub ensemble: EnsembleConfig,
    pub lyapunov: LyapunovSection,
    pub zero_avoidance: ZeroAvoidanceSection,
    pub refinement: RefinementConfig,
    pub ergodicity: ErgodicitySection,
    pub counterexample: CounterexampleSection,
}

fn default_experiment() -> String {
    "default".into()
}

fn default_out() -> String {
    "out".into()
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => DEFAULT_CONFIG.to_string(),
        };
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn drift_spec(&self) -> DriftSpec {
        match self.drift.kind {
            DriftChoice::Power => DriftSpec::power(self.model.kappa, self.model.m),
            DriftChoice::Zero => DriftSpec::zero(),
        }
    }

    pub fn build_model(&self) -> Model {
        Model::new(self.model.clone(), self.drift_spec())
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            scheme: self.scheme.scheme,
            dt0: self.scheme.dt0,
            t_end: self.scheme.t_end,
            adaptive: self.scheme.adaptive,
            x_max: self.model.x_max,
            eps_zero: self.model.eps_zero,
            seed: self.seed,
            watch_radius: None,
            record: Default::default(),
            max_steps: self.scheme.max_steps,
        }
    }

    pub fn scalar_model(&self) -> Result<ScalarModel> {
        let c = &self.counterexample;
        let mut m = ScalarModel::new(ScalarFn::preset(&c.b)?, ScalarFn::preset(&c.sigma)?, c.x0);
        m.tol = c.tolerances;
        Ok(m)
    }

    pub fn mc1d_config(&self) -> Mc1dConfig {
        let c = &self.counterexample;
        Mc1dConfig {
            n_paths: c.n_paths,
            dt: c.dt,
            checkpoints: c.checkpoints.clone(),
            seed: self.seed,
            level: c.level,
            eps: 1e-8,
        }
    }

    pub fn histogram(&self) -> HistogramSpec {
        self.ensemble.histogram
    }

    /// Every problem with the configuration, model admissibility first.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = self.model.validate().violations.iter().map(|v| {
            format!("model.{}: requires {} ({})", v.parameter, v.requirement, v.detail)
        }).collect();
        if self.ensemble.x0.len() != self.model.d {
            out.push(format!("ensemble.x0: expected {} components, got {}", self.model.d, self.ensemble.x0.len()));
        }
        let scheme = self.scheme_config();
        if let Err(e) = scheme.validate() {
            out.push(format!("scheme: {e}"));
        }
        if let Err(e) = self.ensemble.validate(&scheme) {
            out.push(format!("ensemble: {e}"));
        }
        if let Err(e) = LyapunovProfile::new(self.lyapunov.alpha, self.model.r_switch) {
            out.push(format!("lyapunov.alpha: {e}"));
        }
        if let Err(e) = self.scalar_model() {
            out.push(format!("counterexample: {e}"));
        }
        out
    }
}

/// Applies `a.b.c=value`; the value is read as a TOML value, falling back to a string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim();
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key '{key}': '{part}' is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_parses_and_round_trips() {
        let cfg = RunConfig::parse(DEFAULT_CONFIG, &[]).unwrap();
        assert!(cfg.model.validate().is_ok());
        let text = cfg.to_toml().unwrap();
        let again = RunConfig::parse(&text, &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn overrides_replace_values() {
        let cfg = RunConfig::parse(
            DEFAULT_CONFIG,
            &["model.m=3".into(), "model.eta=0.5".into(), "scheme.scheme=heun_stratonovich".into()],
        )
        .unwrap();
        assert_eq!(cfg.model.m, 3.0);
        assert_eq!(cfg.model.eta, 0.5);
        assert_eq!(cfg.scheme.scheme, Scheme::HeunStratonovich);
        assert_eq!(cfg.model.validate().names(), vec!["eta"]);
        assert!(cfg.problems()[0].starts_with("model.eta"));
        assert!(RunConfig::parse(DEFAULT_CONFIG, &[]).unwrap().problems().is_empty());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse(DEFAULT_CONFIG, &["model.etaa=1".into()]).unwrap_err();
        assert!(err.to_string().contains("etaa"), "{err}");
        let err = RunConfig::parse(DEFAULT_CONFIG, &["ergodicity.bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = RunConfig::parse(DEFAULT_CONFIG, &["bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        assert!(RunConfig::parse(DEFAULT_CONFIG, &["model.m".into()]).is_err());
    }
}
