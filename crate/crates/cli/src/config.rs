use std::path::Path;

use orlicz_carleson::carleson::{Classification, EquivalenceConfig, Mode};
use orlicz_carleson::growth::{ClassifyOptions, GrowthFunction};
use orlicz_carleson::maximal::MaximalSuiteConfig;
use orlicz_carleson::measure::{BoxFamily, DivergenceRule, Measure, Verdict};
use orlicz_carleson::multipliers::{OmegaOptions, Variant};
use orlicz_carleson::numerics::QuadratureSpec;
use orlicz_carleson::scan::LogGrid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    ClassifyGrowth,
    CarlesonTest,
    Equivalence,
    EmbedCheck,
    MultiplierClassify,
    WeakTest,
    MaximalSuite,
    Suite,
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::ClassifyGrowth => "classify-growth",
            CommandName::CarlesonTest => "carleson-test",
            CommandName::Equivalence => "equivalence",
            CommandName::EmbedCheck => "embed-check",
            CommandName::MultiplierClassify => "multiplier-classify",
            CommandName::WeakTest => "weak-test",
            CommandName::MaximalSuite => "maximal-suite",
            CommandName::Suite => "suite",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Φ₂∘Φ₁⁻¹ density measure built from a pair of growth functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialSpec {
    pub phi1: GrowthFunction,
    pub phi2: GrowthFunction,
    pub mode: Mode,
}

/// Exactly one of `measure`, `special` and `cloud` must be given.
fn validate_measure(section: &str, measure: &Option<Measure>, special: &Option<SpecialSpec>, cloud: bool) -> Result<(), ConfigError> {
    match (measure, special, cloud) {
        (Some(m), None, false) => m.validate().map_err(|e| ConfigError::Invalid(format!("{section}.measure: {e}"))),
        (None, Some(s), false) => s.mode.validate().map_err(|e| ConfigError::Invalid(format!("{section}.special.mode: {e}"))),
        (None, None, true) => Ok(()),
        _ => Err(ConfigError::Invalid(format!("{section}: give exactly one of `measure`, `special` and `cloud = true`"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthEntry {
    pub phi: GrowthFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_nabla2: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_delta2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyGrowthConfig {
    pub functions: Vec<GrowthEntry>,
    #[serde(default)]
    pub options: ClassifyOptions,
    /// Relative tolerance for `expect_delta2`.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    1e-6
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Carleson,
    NotCarleson,
}

impl Expectation {
    pub fn holds(&self, carleson: bool) -> bool {
        carleson == (*self == Expectation::Carleson)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlesonTestConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Measure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special: Option<SpecialSpec>,
    /// Seeded random atomic measure; the run seed picks the configuration.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cloud: bool,
    /// Defaults to Φ₂∘Φ₁⁻¹ for a special measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<GrowthFunction>,
    /// Defaults to the mode's exponent for a special measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default)]
    pub family: BoxFamily,
    #[serde(default)]
    pub divergence: DivergenceRule,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Measure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special: Option<SpecialSpec>,
    /// Seeded random atomic measure; the run seed picks the configuration.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cloud: bool,
    pub phi1: GrowthFunction,
    pub phi2: GrowthFunction,
    pub mode: Mode,
    #[serde(default)]
    pub settings: EquivalenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Classification>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedCheckConfig {
    pub phi1: GrowthFunction,
    pub phi2: GrowthFunction,
    pub variant: Variant,
    #[serde(default)]
    pub grid: LogGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_holds: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceName {
    HInfinity,
    ZeroSpace,
    HInfinityOmega,
    OutOfTheorem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierConfig {
    pub phi1: GrowthFunction,
    pub phi2: GrowthFunction,
    pub variant: Variant,
    #[serde(default)]
    pub classify: ClassifyOptions,
    #[serde(default)]
    pub omega: OmegaOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<SpaceName>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakTestConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Measure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special: Option<SpecialSpec>,
    /// Seeded random atomic measure; the run seed picks the configuration.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cloud: bool,
    pub phi1: GrowthFunction,
    pub phi2: GrowthFunction,
    pub mode: Mode,
    #[serde(default)]
    pub settings: EquivalenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Verdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub commands: Vec<CommandName>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify_growth: Option<ClassifyGrowthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carleson_test: Option<CarlesonTestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_check: Option<EmbedCheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier_classify: Option<MultiplierConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_test: Option<WeakTestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximal_suite: Option<MaximalSuiteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Commands this config runs, in order.
    pub fn commands(&self) -> Vec<CommandName> {
        match (&self.command, &self.suite) {
            (CommandName::Suite, Some(s)) => s.commands.clone(),
            (c, _) => vec![*c],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.command == CommandName::Suite {
            let s = self.suite.as_ref().ok_or_else(|| missing("suite"))?;
            if s.commands.is_empty() || s.commands.contains(&CommandName::Suite) {
                return Err(ConfigError::Invalid("suite.commands must be non-empty and must not contain `suite`".into()));
            }
        }
        for c in self.commands() {
            self.validate_section(c)?;
        }
        Ok(())
    }

    fn validate_section(&self, c: CommandName) -> Result<(), ConfigError> {
        let grid = |g: &LogGrid, name: &str| {
            if g.is_valid() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name}: grid needs 0 < t_min < t_max and at least 2 points")))
            }
        };
        match c {
            CommandName::ClassifyGrowth => {
                let s = self.classify_growth.as_ref().ok_or_else(|| missing("classify_growth"))?;
                if s.functions.is_empty() {
                    return Err(ConfigError::Invalid("classify_growth.functions is empty".into()));
                }
                positive(s.rel_tol, "classify_growth.rel_tol")?;
                grid(&s.options.grid, "classify_growth.options.grid")
            }
            CommandName::CarlesonTest => {
                let s = self.carleson_test.as_ref().ok_or_else(|| missing("carleson_test"))?;
                validate_measure("carleson_test", &s.measure, &s.special, s.cloud)?;
                s.family.validate().map_err(|e| ConfigError::Invalid(format!("carleson_test.family: {e}")))?;
                if s.special.is_none() && (s.phi.is_none() || s.s.is_none()) {
                    return Err(ConfigError::Invalid("carleson_test: `phi` and `s` are required unless `special` is given".into()));
                }
                if let Some(s) = s.s {
                    positive(s, "carleson_test.s")?;
                }
                Ok(())
            }
            CommandName::Equivalence => {
                let s = self.equivalence.as_ref().ok_or_else(|| missing("equivalence"))?;
                validate_measure("equivalence", &s.measure, &s.special, s.cloud)?;
                s.mode.validate().map_err(|e| ConfigError::Invalid(format!("equivalence.mode: {e}")))
            }
            CommandName::EmbedCheck => {
                let s = self.embed_check.as_ref().ok_or_else(|| missing("embed_check"))?;
                s.variant.validate().map_err(|e| ConfigError::Invalid(format!("embed_check.variant: {e}")))?;
                grid(&s.grid, "embed_check.grid")
            }
            CommandName::MultiplierClassify => {
                let s = self.multiplier_classify.as_ref().ok_or_else(|| missing("multiplier_classify"))?;
                s.variant.validate().map_err(|e| ConfigError::Invalid(format!("multiplier_classify.variant: {e}")))?;
                grid(&s.classify.grid, "multiplier_classify.classify.grid")?;
                positive(s.omega.bracket - 1.0, "multiplier_classify.omega.bracket - 1")
            }
            CommandName::WeakTest => {
                let s = self.weak_test.as_ref().ok_or_else(|| missing("weak_test"))?;
                validate_measure("weak_test", &s.measure, &s.special, s.cloud)?;
                s.mode.validate().map_err(|e| ConfigError::Invalid(format!("weak_test.mode: {e}")))?;
                if matches!(s.mode, Mode::Raw { .. }) {
                    return Err(ConfigError::Invalid("weak_test.mode: raw mode has no source space".into()));
                }
                Ok(())
            }
            CommandName::MaximalSuite => {
                let s = self.maximal_suite.as_ref().ok_or_else(|| missing("maximal_suite"))?;
                if s.functions == 0 || s.j_min >= s.j_max {
                    return Err(ConfigError::Invalid("maximal_suite needs functions > 0 and j_min < j_max".into()));
                }
                Ok(())
            }
            CommandName::Suite => Ok(()),
        }
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn missing(section: &str) -> ConfigError {
    ConfigError::Invalid(format!("missing [{section}] section"))
}

fn positive(v: f64, name: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive and finite, got {v}")))
    }
}
