//! Experiment configuration: a strict TOML document with every field
//! defaulted, validated into domain objects on demand.
//!
//! ```toml
//! n = 200
//! d = 1.0
//! c = 2.0
//! damping.kind = "indicator"
//! damping.omega = [0.7, 1.0]
//! damping.a0 = 1.0
//! ```

use crate::abstract_modes::AbstractConfig;
use crate::damping::{
    indicator_profile, smooth_bump_profile, DampingKind, DampingProfile, GcPreset, Interval, DEFAULT_COLLAR,
    DEFAULT_STRUCTURAL_CAP,
};
use crate::error::{LabError, Result};
use crate::generator::{assemble_generator, CoupledGenerator, EnergyForm};
use crate::mesh::{DiscreteOperators, Grid};
use crate::resolvent::SweepOptions;
use crate::spectral::{DEFAULT_DENSE_CAP, DEFAULT_ZERO_TOL};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::dimension")]
    pub dimension: usize,
    /// Interior nodes per axis.
    #[serde(default = "defaults::n")]
    pub n: usize,
    #[serde(default = "defaults::d")]
    pub d: f64,
    #[serde(default = "defaults::c")]
    pub c: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub damping: DampingConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default, rename = "abstract")]
    pub abstract_model: AbstractModelConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A single interval `[lo, hi]` or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    One([f64; 2]),
    Many(Vec<[f64; 2]>),
}

impl OmegaSpec {
    pub fn intervals(&self) -> Result<Vec<Interval>> {
        let raw: Vec<[f64; 2]> = match self {
            OmegaSpec::One(p) => vec![*p],
            OmegaSpec::Many(v) => v.clone(),
        };
        raw.iter()
            .map(|[lo, hi]| Interval::new(*lo, *hi))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| LabError::param("damping.omega", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    #[serde(default = "defaults::kind")]
    pub kind: DampingKind,
    /// Explicit support; mutually exclusive with `preset`. Without either the
    /// right-collar preset is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<GcPreset>,
    #[serde(default = "defaults::collar")]
    pub collar: f64,
    #[serde(default = "defaults::a0")]
    pub a0: f64,
    /// Transition width of the smooth bump.
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default = "defaults::structural_cap")]
    pub cap: f64,
}

impl Default for DampingConfig {
    fn default() -> Self {
        DampingConfig {
            kind: defaults::kind(),
            omega: None,
            preset: None,
            collar: defaults::collar(),
            a0: defaults::a0(),
            tau: defaults::tau(),
            floor: None,
            cap: defaults::structural_cap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "defaults::dense_cap")]
    pub dense_cap: usize,
    /// Relative to `‖S𝒜S⁻¹‖₁`.
    #[serde(default = "defaults::zero_tol")]
    pub zero_tol: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            dense_cap: defaults::dense_cap(),
            zero_tol: defaults::zero_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "defaults::lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "defaults::lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "defaults::points")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
    #[serde(default = "defaults::yes")]
    pub refine_peaks: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lambda_min: defaults::lambda_min(),
            lambda_max: defaults::lambda_max(),
            points: defaults::points(),
            band: None,
            refine_peaks: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    /// Final time `T`.
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    /// Fixed step; at most one of `dt` and `steps` may be given. Without
    /// either, the accuracy-based default step is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Undamped modes excited in each block of the initial state.
    #[serde(default = "defaults::modes")]
    pub modes: usize,
    /// Decay-fit window; defaults to the second half of `[0, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            horizon: defaults::horizon(),
            dt: None,
            steps: None,
            modes: defaults::modes(),
            fit_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractModelConfig {
    #[serde(default = "defaults::one")]
    pub a: f64,
    #[serde(default = "defaults::c")]
    pub b: f64,
    #[serde(default = "defaults::one")]
    pub gamma: f64,
    #[serde(default = "defaults::thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "defaults::abstract_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "defaults::abstract_lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "defaults::abstract_points")]
    pub points: usize,
}

impl Default for AbstractModelConfig {
    fn default() -> Self {
        AbstractModelConfig {
            a: 1.0,
            b: 2.0,
            gamma: 1.0,
            thetas: defaults::thetas(),
            lambda_min: defaults::abstract_lambda_min(),
            lambda_max: defaults::abstract_lambda_max(),
            points: defaults::abstract_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "defaults::directory")]
    pub directory: PathBuf,
    #[serde(default = "defaults::formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: defaults::directory(),
            formats: defaults::formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

mod defaults {
    use super::*;
    pub fn dimension() -> usize {
        1
    }
    pub fn n() -> usize {
        100
    }
    pub fn d() -> f64 {
        1.0
    }
    pub fn c() -> f64 {
        2.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn kind() -> DampingKind {
        DampingKind::Indicator
    }
    pub fn collar() -> f64 {
        DEFAULT_COLLAR
    }
    pub fn a0() -> f64 {
        1.0
    }
    pub fn tau() -> f64 {
        0.15
    }
    pub fn structural_cap() -> f64 {
        DEFAULT_STRUCTURAL_CAP
    }
    pub fn dense_cap() -> usize {
        DEFAULT_DENSE_CAP
    }
    pub fn zero_tol() -> f64 {
        DEFAULT_ZERO_TOL
    }
    pub fn lambda_min() -> f64 {
        1e2
    }
    pub fn lambda_max() -> f64 {
        1e5
    }
    pub fn points() -> usize {
        60
    }
    pub fn horizon() -> f64 {
        4.0
    }
    pub fn modes() -> usize {
        5
    }
    pub fn thetas() -> Vec<f64> {
        vec![0.5, 0.25, 0.75, -0.5]
    }
    pub fn abstract_lambda_min() -> f64 {
        1e2
    }
    pub fn abstract_lambda_max() -> f64 {
        1e6
    }
    pub fn abstract_points() -> usize {
        40
    }
    pub fn directory() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn formats() -> Vec<OutputFormat> {
        vec![OutputFormat::Csv, OutputFormat::Json]
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::param(name, format!("must be positive and finite, got {v}")))
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config takes all defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical (fully defaulted) TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dimension) {
            return Err(LabError::param("dimension", format!("must be 1 or 2, got {}", self.dimension)));
        }
        if self.n < 3 {
            return Err(LabError::param("n", format!("need at least 3 interior nodes, got {}", self.n)));
        }
        positive("d", self.d)?;
        positive("c", self.c)?;

        let dm = &self.damping;
        if dm.omega.is_some() && dm.preset.is_some() {
            return Err(LabError::param("damping.preset", "give at most one of damping.omega and damping.preset"));
        }
        if dm.kind != DampingKind::Zero {
            positive("damping.a0", dm.a0)?;
            self.damping_support()?;
        }
        if dm.kind == DampingKind::Smooth {
            positive("damping.tau", dm.tau)?;
        }
        positive("damping.cap", dm.cap)?;
        if let Some(f) = dm.floor {
            positive("damping.floor", f)?;
        }
        if !(dm.collar > 0.0 && dm.collar < 1.0) {
            return Err(LabError::param("damping.collar", format!("must lie in (0, 1), got {}", dm.collar)));
        }

        if self.spectrum.dense_cap == 0 {
            return Err(LabError::param("spectrum.dense_cap", "must be positive"));
        }
        positive("spectrum.zero_tol", self.spectrum.zero_tol)?;

        let s = &self.sweep;
        positive("sweep.lambda_min", s.lambda_min)?;
        positive("sweep.lambda_max", s.lambda_max)?;
        if s.lambda_min >= s.lambda_max {
            return Err(LabError::param("sweep.lambda_max", "must exceed sweep.lambda_min"));
        }
        if s.points < 8 {
            return Err(LabError::param("sweep.points", format!("need at least 8, got {}", s.points)));
        }
        if let Some([lo, hi]) = s.band {
            if !(lo > 0.0 && lo < hi) {
                return Err(LabError::param("sweep.band", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
            }
        }

        let e = &self.evolve;
        positive("evolve.horizon", e.horizon)?;
        match (e.dt, e.steps) {
            (Some(_), Some(_)) => return Err(LabError::param("evolve.steps", "give at most one of dt and steps")),
            (Some(dt), None) => {
                positive("evolve.dt", dt)?;
                if dt > e.horizon {
                    return Err(LabError::param("evolve.dt", "must not exceed evolve.horizon"));
                }
            }
            (None, Some(0)) => return Err(LabError::param("evolve.steps", "must be positive")),
            _ => {}
        }
        if e.modes == 0 || e.modes > self.n {
            return Err(LabError::param("evolve.modes", format!("need 1 <= modes <= n, got {}", e.modes)));
        }
        if let Some([lo, hi]) = e.fit_window {
            if !(lo >= 0.0 && lo < hi && hi <= e.horizon) {
                return Err(LabError::param("evolve.fit_window", format!("need 0 <= lo < hi <= horizon, got [{lo}, {hi}]")));
            }
        }

        let a = &self.abstract_model;
        positive("abstract.a", a.a)?;
        positive("abstract.b", a.b)?;
        positive("abstract.gamma", a.gamma)?;
        if a.thetas.is_empty() {
            return Err(LabError::param("abstract.thetas", "must not be empty"));
        }
        if let Some(t) = a.thetas.iter().find(|t| !(-1.0..=1.0).contains(*t)) {
            return Err(LabError::param("abstract.thetas", format!("every theta must lie in [-1, 1], got {t}")));
        }
        positive("abstract.lambda_min", a.lambda_min)?;
        if a.lambda_min >= a.lambda_max {
            return Err(LabError::param("abstract.lambda_max", "must exceed abstract.lambda_min"));
        }
        if a.points < 6 {
            return Err(LabError::param("abstract.points", format!("need at least 6, got {}", a.points)));
        }
        if self.output.formats.is_empty() {
            return Err(LabError::param("output.formats", "must not be empty"));
        }
        Ok(())
    }

    pub fn damping_support(&self) -> Result<Vec<Interval>> {
        let dm = &self.damping;
        match (&dm.omega, dm.preset) {
            (Some(o), _) => o.intervals(),
            (None, Some(p)) => Ok(p.support(dm.collar)),
            (None, None) => Ok(GcPreset::RightCollar.support(dm.collar)),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        match self.dimension {
            1 => Grid::line(self.n),
            _ => Grid::rect(self.n, self.n),
        }
    }

    pub fn operators(&self) -> Result<Arc<DiscreteOperators>> {
        Ok(Arc::new(DiscreteOperators::build(&self.grid()?)))
    }

    pub fn damping_profile(&self, ops: &DiscreteOperators) -> Result<DampingProfile> {
        let dm = &self.damping;
        match dm.kind {
            DampingKind::Zero => Ok(DampingProfile::zero(ops)),
            DampingKind::Indicator => indicator_profile(&self.damping_support()?, dm.a0, ops),
            DampingKind::Smooth => smooth_bump_profile(&self.damping_support()?, dm.a0, dm.tau, ops),
        }
    }

    pub fn generator(&self) -> Result<(CoupledGenerator, EnergyForm)> {
        let ops = self.operators()?;
        let profile = self.damping_profile(&ops)?;
        assemble_generator(ops, self.d, self.c, profile)
    }

    pub fn sweep_options(&self) -> SweepOptions {
        let s = &self.sweep;
        SweepOptions {
            lambda_min: s.lambda_min,
            lambda_max: s.lambda_max,
            points: s.points,
            band: s.band.map(|[lo, hi]| (lo, hi)),
            refine_peaks: s.refine_peaks,
        }
    }

    /// The abstract model at the first listed θ.
    pub fn abstract_base(&self) -> AbstractConfig {
        let a = &self.abstract_model;
        AbstractConfig {
            a: a.a,
            b: a.b,
            gamma: a.gamma,
            theta: a.thetas[0],
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "n = 100\nd = 1\nc = 2\ndamping.kind = \"indicator\"\ndamping.omega = [0.7, 1]\ndamping.a0 = 1\n",
        )
        .unwrap();
        assert_eq!(cfg.n, 100);
        assert_eq!(cfg.dimension, 1);
        assert_eq!(cfg.sweep.points, 60);
        assert_eq!(cfg.evolve.modes, 5);
        assert_eq!(cfg.abstract_model.thetas, vec![0.5, 0.25, 0.75, -0.5]);
        assert_eq!(cfg.damping_support().unwrap(), vec![Interval { lo: 0.7, hi: 1.0 }]);
        let (g, _) = cfg.generator().unwrap();
        assert_eq!(g.dim(), 400);
    }

    #[test]
    fn negative_speed_names_the_key() {
        let err = ExperimentConfig::from_toml_str("d = -1").unwrap_err();
        match err {
            LabError::InvalidParameter { name, .. } => assert_eq!(name, "d"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("foo = 1").unwrap_err().to_string();
        assert!(err.contains("foo"), "{err}");
        let err = ExperimentConfig::from_toml_str("[sweep]\npionts = 9").unwrap_err().to_string();
        assert!(err.contains("pionts"), "{err}");
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let err = ExperimentConfig::from_toml_str("n = \"many\"").unwrap_err().to_string();
        assert!(err.contains('n'), "{err}");
    }

    #[test]
    fn omega_accepts_lists_and_presets() {
        let cfg = ExperimentConfig::from_toml_str("damping.omega = [[0.0, 0.2], [0.8, 1.0]]").unwrap();
        assert_eq!(cfg.damping_support().unwrap().len(), 2);
        let cfg = ExperimentConfig::from_toml_str("damping.preset = \"both-collars\"").unwrap();
        assert_eq!(cfg.damping_support().unwrap().len(), 2);
        assert!(ExperimentConfig::from_toml_str("damping.omega = [0.9, 0.2]").is_err());
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = ExperimentConfig::from_toml_str("n = 50\ndamping.kind = \"smooth\"\ndamping.omega = [0.6, 1.0]").unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn step_options_are_exclusive() {
        assert!(ExperimentConfig::from_toml_str("evolve.dt = 0.01\nevolve.steps = 10").is_err());
        assert!(ExperimentConfig::from_toml_str("evolve.steps = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("abstract.thetas = [2.0]").is_err());
    }
}
