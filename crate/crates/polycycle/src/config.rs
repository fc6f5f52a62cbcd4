//! Run configuration for the batch front-end: a single TOML file drives
//! every subcommand, so acceptance runs are reproducible byte for byte.

use serde::Deserialize;
use thiserror::Error;

use crate::asymptotics::{OfflineModel, TauSpec};
use crate::family::{builtin_kolmogorov, parse_family, FamilyError, ParamPoint, ParametricFamily};
use crate::flow::IntegratorConfig;
use crate::num::geomspace;
use crate::returnmap::{FIT_SAMPLES, FIT_WINDOW};
use crate::saddletools::{builtin_kolmogorov_skeleton, PolycycleSkeleton};

/// Configuration errors; they all map to exit code 2.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("unknown builtin family `{0}`")]
    UnknownFamily(String),
    #[error("unknown skeleton label `{0}`")]
    UnknownSkeleton(String),
    #[error("invalid family text: {0}")]
    Family(#[from] FamilyError),
}

/// Top-level run configuration.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyConfig,
    #[serde(default)]
    pub params: Option<ParamsSection>,
    #[serde(default)]
    pub skeleton: Option<SkeletonSection>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub cycle: Option<CycleSection>,
    #[serde(default)]
    pub path: Option<PathSection>,
    #[serde(default)]
    pub tau: Option<TauSection>,
    #[serde(default)]
    pub arc: Option<ArcSection>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// Where the vector field comes from: a named builtin, inline grammar
/// text, or a closed-form offline return model (no integration at all).
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    Builtin {
        name: String,
    },
    Inline {
        text: String,
    },
    Offline {
        a: f64,
        r: f64,
        t0_bar: f64,
        #[serde(default)]
        c: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonSection {
    pub builtin: String,
}

/// Integrator overrides; anything omitted keeps the library default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub max_time: Option<f64>,
    pub chart_switch_radius: Option<f64>,
}

impl IntegratorSection {
    pub fn to_config(&self) -> IntegratorConfig {
        let d = IntegratorConfig::default();
        IntegratorConfig {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            max_time: self.max_time.unwrap_or(d.max_time),
            chart_switch_radius: self.chart_switch_radius.unwrap_or(d.chart_switch_radius),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub window: [f64; 2],
    pub samples: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            window: [FIT_WINDOW.0, FIT_WINDOW.1],
            samples: FIT_SAMPLES,
        }
    }
}

impl FitSection {
    /// Descending sampling grid over the window.
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        if !(self.window[0] > 0.0 && self.window[1] > self.window[0] && self.samples >= 2) {
            return Err(ConfigError::Schema(format!(
                "fit window must satisfy 0 < lo < hi with >= 2 samples, got {:?} x {}",
                self.window, self.samples
            )));
        }
        let mut g = geomspace(self.window[0], self.window[1], self.samples);
        g.reverse();
        Ok(g)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSection {
    pub bracket: [f64; 2],
}

/// Parameter path for the period-law verifier: dynamically a named
/// parameter swept over explicit values; offline a list of exponents r.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub param: Option<String>,
    pub values: Option<Vec<f64>>,
    pub r_values: Option<Vec<f64>>,
}

/// Log-uniform grid descriptor.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSection {
    /// Descending grid (largest value first).
    pub fn descending(&self) -> Result<Vec<f64>, ConfigError> {
        if !(self.min > 0.0 && self.max > self.min && self.count >= 2) {
            return Err(ConfigError::Schema(format!(
                "grid must satisfy 0 < min < max with count >= 2, got {self:?}"
            )));
        }
        let mut g = geomspace(self.min, self.max, self.count);
        g.reverse();
        Ok(g)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSection {
    /// "power" (requires `exponent`) or "neg-log".
    pub kind: String,
    pub exponent: Option<f64>,
    pub alpha: Option<GridSection>,
}

impl TauSection {
    pub fn to_spec(&self) -> Result<TauSpec, ConfigError> {
        match self.kind.as_str() {
            "power" => {
                let l = self.exponent.ok_or_else(|| {
                    ConfigError::Schema("tau kind \"power\" requires `exponent`".into())
                })?;
                Ok(TauSpec::power(l))
            }
            "neg-log" => Ok(TauSpec::neg_log()),
            other => Err(ConfigError::Schema(format!("unknown tau kind `{other}`"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSection {
    pub alpha: Option<GridSection>,
    /// Names of the two free parameters the arc Newton adjusts.
    pub free: [String; 2],
}

/// Verdict thresholds with the documented defaults; tunable without
/// recompilation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Max relative variation of |1−r|·period over the last three path
    /// points.
    pub u_variation: f64,
    /// Max relative mismatch of the u-limit against −T̄₀|log Â|.
    pub u_match: f64,
    /// Max relative mismatch of the v-limit against |log Â|.
    pub v_match: f64,
    /// Max arc Newton residual norm.
    pub arc_residual: f64,
    /// Max relative deviation of s_star from (1+h)^{−1/α}.
    pub ansatz_rel: f64,
    /// Max relative variation of 𝒯/τ over the last decade of α.
    pub ratio_variation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            u_variation: 0.05,
            u_match: 0.10,
            v_match: 0.10,
            arc_residual: 1e-6,
            ansatz_rel: 0.10,
            ratio_variation: 0.10,
        }
    }
}

/// A resolved field source: either a genuine parametric family or the
/// closed-form offline model.
pub enum ResolvedFamily {
    Dynamic(ParametricFamily),
    Offline(OfflineModel),
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn resolve_family(&self) -> Result<ResolvedFamily, ConfigError> {
        match &self.family {
            FamilyConfig::Builtin { name } => match name.as_str() {
                "kolmogorov" => Ok(ResolvedFamily::Dynamic(builtin_kolmogorov())),
                other => Err(ConfigError::UnknownFamily(other.into())),
            },
            FamilyConfig::Inline { text } => Ok(ResolvedFamily::Dynamic(parse_family(text)?)),
            FamilyConfig::Offline { a, r, t0_bar, c } => Ok(ResolvedFamily::Offline(OfflineModel {
                a: *a,
                r: *r,
                t0_bar: *t0_bar,
                c: *c,
            })),
        }
    }

    pub fn param_point(&self) -> Result<ParamPoint, ConfigError> {
        let section = self.params.as_ref().ok_or_else(|| {
            ConfigError::Schema("this subcommand requires a [params] section".into())
        })?;
        ParamPoint::new(&section.names, &section.values).map_err(ConfigError::Family)
    }

    pub fn resolve_skeleton(&self) -> Result<PolycycleSkeleton, ConfigError> {
        let section = self.skeleton.as_ref().ok_or_else(|| {
            ConfigError::Schema("this subcommand requires a [skeleton] section".into())
        })?;
        match section.builtin.as_str() {
            "kolmogorov" => Ok(builtin_kolmogorov_skeleton()),
            other => Err(ConfigError::UnknownSkeleton(other.into())),
        }
    }
}
