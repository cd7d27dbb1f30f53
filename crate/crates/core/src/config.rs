//! Run configuration (TOML) and its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cauchy::{CauchyError, GridState, InitialData, Variant};
use crate::reaction::{MultistableReaction, ReactionError, ReactionSpec};
use crate::terrace::Terrace;
use crate::wave::{minimal_decomposition, WaveError, WaveOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub reaction: ReactionSpec,
    #[serde(default)]
    pub wave: WaveConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub variant: VariantConfig,
    pub initial: InitialSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

/// Endpoints for `wave` plus shooting options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveConfig {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub options: WaveOptions,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self { theta_lo: 0.0, theta_hi: 1.0, options: WaveOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    /// Shift the window with the mid-level crossing.
    #[serde(default)]
    pub follow: bool,
}

impl GridConfig {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Number of snapshot intervals; snapshots at `k t_end / snapshots`.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Front sampling interval; fronts only at snapshots when absent.
    #[serde(default)]
    pub front_dt: Option<f64>,
}

fn default_snapshots() -> usize {
    4
}

impl TimeConfig {
    pub fn snapshot_times(&self) -> Vec<f64> {
        if self.t_end == 0.0 || self.snapshots == 0 {
            return vec![0.0];
        }
        (0..=self.snapshots).map(|k| self.t_end * k as f64 / self.snapshots as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariantConfig {
    /// `epsilon` defaults to the grid spacing.
    Regularized {
        #[serde(default)]
        epsilon: Option<f64>,
    },
    LowerEnvelope,
    UpperEnvelope,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig::Regularized { epsilon: None }
    }
}

impl VariantConfig {
    pub fn resolve(&self, dx: f64) -> Variant {
        match *self {
            VariantConfig::Regularized { epsilon } => Variant::Regularized { epsilon: epsilon.unwrap_or(dx) },
            VariantConfig::LowerEnvelope => Variant::LowerEnvelope,
            VariantConfig::UpperEnvelope => Variant::UpperEnvelope,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Tanh { center: f64, width: f64 },
    Table { x: Vec<f64>, u: Vec<f64> },
    /// The minimal terrace at `t = 0`, glued edge to edge with the top wave
    /// starting at `anchor`.
    Terrace { anchor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Front margin; a tenth of the smallest platform gap when absent.
    pub tau: Option<f64>,
    /// Edge warning distance in units of the largest wave length.
    pub edge_margin_etas: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { tau: None, edge_margin_etas: 10.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Initial data ready for [`GridState::init`].
pub enum Initial {
    Data(InitialData),
    Terrace(Terrace),
}

impl Initial {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Initial::Data(d) => d.eval(x),
            Initial::Terrace(t) => t.eval(0.0, x),
        }
    }

    pub fn limits(&self) -> (f64, f64) {
        match self {
            Initial::Data(d) => d.limits(),
            Initial::Terrace(t) => (t.top(), t.base()),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(e) })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml(&text, path)
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        crate::output::config_hash(self)
    }

    pub fn variant(&self) -> Variant {
        self.variant.resolve(self.grid.dx())
    }

    /// Checks every parameter and builds the reaction.
    pub fn validate(&self) -> Result<MultistableReaction, ConfigError> {
        let r = self.reaction.build()?;
        let g = &self.grid;
        if g.n < 3 || !(g.x_max > g.x_min) || !g.x_min.is_finite() || !g.x_max.is_finite() {
            return Err(ConfigError::Invalid(format!("grid needs x_min < x_max and n >= 3, got [{}, {}] n = {}", g.x_min, g.x_max, g.n)));
        }
        let t = &self.time;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return Err(ConfigError::Invalid(format!("t_end = {} must be finite and >= 0", t.t_end)));
        }
        if t.front_dt.is_some_and(|d| !(d > 0.0)) {
            return Err(ConfigError::Invalid("front_dt must be positive".into()));
        }
        if let Variant::Regularized { epsilon } = self.variant() {
            if !(epsilon > 0.0 && epsilon < r.min_gap()) {
                return Err(ConfigError::Invalid(format!("epsilon = {epsilon} must lie in (0, {})", r.min_gap())));
            }
        }
        if let InitialSpec::Tanh { center, width } = &self.initial {
            InitialData::Tanh { center: *center, width: *width }.check()?;
        }
        if let InitialSpec::Table { x, u } = &self.initial {
            InitialData::Table { x: x.clone(), u: u.clone() }.check()?;
        }
        let w = &self.wave;
        for s in [w.theta_lo, w.theta_hi] {
            if r.stable_index(s).is_none() {
                return Err(ConfigError::Wave(WaveError::NotStableState { u: s }));
            }
        }
        let o = &w.options;
        if [o.dphi, o.tol_c, o.conn_tol, o.c_max, o.pin_tol].iter().any(|v| !(*v > 0.0)) {
            return Err(ConfigError::Invalid("wave options must be positive".into()));
        }
        if let Some(tau) = self.diagnostics.tau {
            let half_gap = crate::cauchy::default_tau(&r.stable_states()) * 5.0;
            if !(tau > 0.0 && tau < half_gap) {
                return Err(ConfigError::Invalid(format!("tau = {tau} must lie in (0, {half_gap})")));
            }
        }
        Ok(r)
    }

    pub fn initial(&self, r: &MultistableReaction) -> Result<Initial, ConfigError> {
        Ok(match &self.initial {
            InitialSpec::Tanh { center, width } => Initial::Data(InitialData::Tanh { center: *center, width: *width }),
            InitialSpec::Table { x, u } => Initial::Data(InitialData::Table { x: x.clone(), u: u.clone() }),
            InitialSpec::Terrace { anchor } => {
                let t = minimal_decomposition(r, &self.wave.options)?;
                let xi = t.solution_shifts(*anchor);
                Initial::Terrace(t.with_shifts(xi, true).map_err(WaveError::from)?)
            }
        })
    }

    pub fn grid_state(&self, r: &MultistableReaction, init: &Initial) -> Result<GridState, ConfigError> {
        let g = &self.grid;
        Ok(GridState::init(g.x_min, g.x_max, g.n, |x| init.eval(x), init.limits(), Some(r))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[reaction]
family = "dcubic"
a = 0.25
gamma = 0.05

[grid]
x_min = -10.0
x_max = 10.0
n = 201

[time]
t_end = 1.0

[initial]
kind = "tanh"
center = 0.0
width = 1.0
"#;

    fn sample() -> RunConfig {
        RunConfig::from_toml(SAMPLE, Path::new("sample.toml")).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = sample();
        assert_eq!(c.variant(), Variant::Regularized { epsilon: 0.1 });
        assert_eq!(c.time.snapshot_times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.wave.theta_hi, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = SAMPLE.replace("seed = 7", "seed = 7\nspeed = 1");
        assert!(matches!(RunConfig::from_toml(&text, Path::new("x")), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn hash_tracks_content() {
        let a = sample();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_parameters_caught_early() {
        let mut c = sample();
        c.grid.n = 2;
        assert!(c.validate().is_err());
        let mut c = sample();
        c.wave.theta_lo = 0.3;
        assert!(matches!(c.validate(), Err(ConfigError::Wave(WaveError::NotStableState { .. }))));
        let mut c = sample();
        c.variant = VariantConfig::Regularized { epsilon: Some(0.0) };
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_horizon_has_one_snapshot() {
        let t = TimeConfig { t_end: 0.0, snapshots: 4, front_dt: None };
        assert_eq!(t.snapshot_times(), vec![0.0]);
    }
}
