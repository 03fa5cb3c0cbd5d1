//! Declarative run configuration (TOML).
//!
//! Unknown keys are rejected everywhere. A parsed configuration serializes
//! back to TOML that parses to the same value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chemistry::{ChemSolver, ChemistryModel};
use crate::diffusion::MotionModel;
use crate::engine::{InitialCondition, Model, DEFAULT_N_MAX};
use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainSpec};
use crate::irradiation::IrradiationModel;
use crate::meanfield::master::InitialLaw;
use crate::meanfield::mkm::MkmVariant;
use crate::meanfield::{PairConvention, ScalarRates};
use crate::rates::{PairProbability, RateModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SpatialMc,
    NonspatialMc,
    Master,
    Mkm,
    LimitHomog,
    LimitSpatial,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SpatialMc => "spatial_mc",
            Mode::NonspatialMc => "nonspatial_mc",
            Mode::Master => "master",
            Mode::Mkm => "mkm",
            Mode::LimitHomog => "limit_homog",
            Mode::LimitSpatial => "limit_spatial",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Mode::SpatialMc | Mode::NonspatialMc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    /// Default output directory; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub trajectories: bool,
    #[serde(default)]
    pub events: bool,
    #[serde(default)]
    pub snapshots: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { dir: None, trajectories: true, events: false, snapshots: false }
    }
}

/// Settings of the deterministic solvers and the count-only oracles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default)]
    pub convention: PairConvention,
    #[serde(default)]
    pub mkm_variant: MkmVariant,
    #[serde(default)]
    pub mkm_reduced: bool,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_cells")]
    pub cells_per_axis: usize,
    #[serde(default = "default_tolerance")]
    pub truncation_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            convention: PairConvention::default(),
            mkm_variant: MkmVariant::default(),
            mkm_reduced: false,
            dt: default_dt(),
            cells_per_axis: default_cells(),
            truncation_tolerance: default_tolerance(),
        }
    }
}

fn yes() -> bool {
    true
}
fn default_dt() -> f64 {
    1e-3
}
fn default_cells() -> usize {
    16
}
fn default_tolerance() -> f64 {
    1e-8
}
fn one() -> f64 {
    1.0
}
fn is_one(x: &f64) -> bool {
    *x == 1.0
}
fn default_replicates() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: Mode,
    /// Final time (hours).
    pub t_end: f64,
    /// Observation times; defaults to `[t_end]`. Must be ascending and end
    /// at or before `t_end`.
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Population scale `K`.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    pub domain: DomainSpec,
    pub rates: RateModel,
    pub motion: MotionModel,
    pub initial: InitialCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irradiation: Option<IrradiationModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chemistry: Option<ChemistryModel>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputOptions,
    /// Directory that relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Observation times with the default applied.
    pub fn times(&self) -> Vec<f64> {
        if self.output_times.is_empty() {
            vec![self.t_end]
        } else {
            self.output_times.clone()
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::from_spec(&self.domain)
    }

    fn irradiation_resolved(&self) -> Result<Option<IrradiationModel>> {
        let Some(irr) = &self.irradiation else { return Ok(None) };
        let mut irr = irr.clone();
        let base = self.base_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        irr.f1.resolve(&base)?;
        Ok(Some(irr))
    }

    /// Model with the rescaling by `K` applied.
    pub fn model(&self) -> Result<Model> {
        let domain = self.domain()?;
        let mut model = Model::new(domain.clone(), self.rates.clone(), self.motion.clone());
        if let Some(irr) = self.irradiation_resolved()? {
            model = model.with_irradiation(irr);
        }
        if let Some(chem) = &self.chemistry {
            model = model.with_chemistry(ChemSolver::new(chem.clone(), &domain)?);
        }
        model.n_max = self.n_max.unwrap_or(DEFAULT_N_MAX);
        let model = model.rescaled(self.scale);
        model.validate()?;
        Ok(model)
    }

    /// Constant rates for the count-only modes, with the pair rate divided by `K`.
    pub fn scalar_rates(&self) -> Result<ScalarRates> {
        let r = &self.rates;
        if !r.is_spatially_constant() {
            return Err(Error::Config(format!(
                "mode {} needs spatially constant rates (constant responses and pair kernel)",
                self.mode.as_str()
            )));
        }
        let PairProbability::Constant { p } = r.lethal_prob else {
            return Err(Error::Config("count-only modes need a constant lethal probability".into()));
        };
        let rates = ScalarRates {
            r: r.repair.base,
            a: r.death.base,
            b: r.pair.kernel.sup() / self.scale,
            p,
            convention: self.solver.convention,
        };
        rates.validate()?;
        Ok(rates)
    }

    /// Initial count law for the count-only modes (counts multiplied by `K`).
    pub fn initial_law(&self) -> Result<InitialLaw> {
        let k = self.scale;
        match &self.initial {
            InitialCondition::Lesions { x0, y0, poisson, .. } => {
                let ny = (y0 * k).round();
                if *poisson {
                    if *y0 != 0.0 {
                        return Err(Error::Config("count-only modes support Poisson X with y0 = 0 only".into()));
                    }
                    Ok(InitialLaw::Poisson { mean_x: x0 * k, y0: 0 })
                } else {
                    Ok(InitialLaw::Fixed { x0: (x0 * k).round() as u64, y0: ny as u64 })
                }
            }
            InitialCondition::Listed { xs, ys } => Ok(InitialLaw::Fixed { x0: xs.len() as u64, y0: ys.len() as u64 }),
            InitialCondition::Dose => Err(Error::Config(format!(
                "mode {} needs a lesion-count initial condition",
                self.mode.as_str()
            ))),
        }
    }

    /// Initial totals `(U^X, U^Y)` of the rescaled densities for the limit modes.
    pub fn initial_totals(&self) -> Result<(f64, f64)> {
        match &self.initial {
            InitialCondition::Lesions { x0, y0, .. } => Ok((*x0, *y0)),
            InitialCondition::Listed { xs, ys } => Ok((xs.len() as f64, ys.len() as f64)),
            InitialCondition::Dose => {
                let irr = self
                    .irradiation_resolved()?
                    .ok_or_else(|| Error::Config("dose initial condition needs an irradiation model".into()))?;
                let (ex, ey) = irr.mean_yields();
                let events = irr.dose / irr.z_f();
                Ok((events * ex, events * ey))
            }
        }
    }

    /// Checks everything the selected mode needs without running it.
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        let times = self.times();
        if times.iter().any(|t| !(*t >= 0.0) || *t > self.t_end) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("output_times must be ascending within [0, t_end]".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if !(self.scale >= 1.0 && self.scale.is_finite()) {
            return Err(Error::Config("scale K must be >= 1".into()));
        }
        if !(self.solver.dt > 0.0) || self.solver.cells_per_axis == 0 {
            return Err(Error::Config("solver.dt and solver.cells_per_axis must be positive".into()));
        }
        let model = self.model()?;
        self.initial.validate(&model)?;
        match self.mode {
            Mode::SpatialMc | Mode::LimitSpatial => {}
            Mode::NonspatialMc | Mode::Master => {
                self.scalar_rates()?;
                self.initial_law()?.validate()?;
            }
            Mode::Mkm | Mode::LimitHomog => {
                self.scalar_rates()?;
                self.initial_totals()?;
            }
        }
        Ok(())
    }

    /// Copy with a different population scale.
    pub fn with_scale(&self, k: f64) -> Self {
        Self { scale: k, ..self.clone() }
    }

    pub fn with_dt_diff(&self, dt: f64) -> Self {
        let mut c = self.clone();
        c.motion.dt_diff = dt;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
mode = "spatial_mc"
t_end = 5.0
output_times = [0.1, 0.5, 1.0, 2.0, 5.0]
replicates = 4
seed = 7

[domain]
shape = "box"
lo = [0.0, 0.0]
hi = [1.0, 1.0]

[rates]
repair = { base = 4.0 }
death = { base = 0.1 }
pair = { kernel = { kind = "constant", value = 0.1 } }
lethal_prob = { kind = "constant", p = 1.0 }

[motion]
dt_diff = 0.01
x = { sigma = 0.1 }

[initial]
kind = "lesions"
x0 = 5
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.mode, Mode::SpatialMc);
        let r = cfg.scalar_rates().unwrap();
        assert_eq!((r.r, r.a, r.b, r.p), (4.0, 0.1, 0.1, 1.0));
        assert_eq!(cfg.initial_law().unwrap(), InitialLaw::Fixed { x0: 5, y0: 0 });
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        let text = cfg.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(text, back.to_toml_string().unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = MINIMAL.replace("repair = { base", "repiar = { base");
        assert!(RunConfig::from_toml_str(&typo).unwrap_err().is_config());
        let extra = MINIMAL.replace("seed = 7", "seed = 7\nspeed = 3");
        assert!(RunConfig::from_toml_str(&extra).is_err());
    }

    #[test]
    fn schema_version_is_checked() {
        let v2 = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(RunConfig::from_toml_str(&v2).unwrap_err().is_config());
    }

    #[test]
    fn rescaling_applies_to_counts_and_rates() {
        let mut cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        cfg.scale = 10.0;
        let r = cfg.scalar_rates().unwrap();
        assert!((r.b - 0.01).abs() < 1e-15);
        assert_eq!(cfg.initial_law().unwrap(), InitialLaw::Fixed { x0: 50, y0: 0 });
        assert_eq!(cfg.model().unwrap().scale(), 10.0);
    }

    #[test]
    fn bad_times_are_rejected() {
        let cfg = RunConfig::from_toml_str(&MINIMAL.replace("[0.1, 0.5, 1.0, 2.0, 5.0]", "[1.0, 0.5]")).unwrap();
        assert!(cfg.validate().unwrap_err().is_config());
        let cfg = RunConfig::from_toml_str(&MINIMAL.replace("[0.1, 0.5, 1.0, 2.0, 5.0]", "[6.0]")).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn count_modes_need_constant_rates() {
        let text = MINIMAL.replace("mode = \"spatial_mc\"", "mode = \"master\"").replace(
            "kind = \"constant\", value = 0.1",
            "kind = \"ball_indicator\", weight = 1.0, epsilon = 0.1",
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        assert!(cfg.validate().unwrap_err().is_config());
    }
}
