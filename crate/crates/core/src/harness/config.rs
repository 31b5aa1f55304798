//! Run configuration: a JSON document with `mesh`, `run`, `physics` and
//! `output` sections. Missing keys take the experiment's preset values.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::MeshConfig;
use crate::physics::{InitialCondition, PhaseForm, PlaneWave};
use crate::scalar::{lit, Real};
use crate::solver::{FluxKind, Formulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Convergence,
    Stability,
    Conservation,
    Freestream,
    #[default]
    Custom,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Self::Convergence,
        Self::Stability,
        Self::Conservation,
        Self::Freestream,
        Self::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::Stability => "stability",
            Self::Conservation => "conservation",
            Self::Freestream => "freestream",
            Self::Custom => "custom",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "experiment",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Polynomial degrees; each is run in turn.
    pub degrees: Vec<usize>,
    /// Time steps; each is run in turn.
    pub dt: Vec<f64>,
    pub t_final: f64,
    /// Caps the number of steps (stability runs stop at divergence anyway).
    pub max_steps: Option<usize>,
    pub fluxes: Vec<FluxKind>,
    pub formulations: Vec<Formulation>,
    /// Steps between diagnostic rows.
    pub cadence: usize,
    /// Pass/fail threshold; its meaning depends on the experiment.
    pub tolerance: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            degrees: vec![4],
            dt: vec![1e-3],
            t_final: 0.1,
            max_steps: None,
            fluxes: vec![FluxKind::Upwind],
            formulations: vec![Formulation::Skew],
            cadence: 10,
            tolerance: 1e-12,
        }
    }
}

/// Exterior state on non-periodic boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySpec {
    /// The initial condition's exact solution (plane waves, constants).
    #[default]
    Exact,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub wave_speed: f64,
    pub initial_condition: String,
    pub boundary: BoundarySpec,
    pub wave_vector: [f64; 3],
    pub wave_origin: [f64; 3],
    pub wave_width: f64,
    pub phase_form: PhaseForm,
    /// Denominator of the spherical pulse exponent.
    pub pulse_width: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            wave_speed: 1.0,
            initial_condition: "spherical_pulse".into(),
            boundary: BoundarySpec::Exact,
            wave_vector: [1.0, 0.0, 0.0],
            wave_origin: [-1.0, 0.0, 0.0],
            wave_width: 1.0,
            phase_form: PhaseForm::Linear,
            pulse_width: 2.3f64.powi(3),
        }
    }
}

impl PhysicsSection {
    /// The configured initial condition, with the plane wave travelling at
    /// the configured wave speed.
    pub fn initial_condition<T: Real>(&self) -> Result<InitialCondition<T>> {
        Ok(match self.initial_condition.as_str() {
            "plane_wave" => InitialCondition::PlaneWave(
                PlaneWave::new(
                    self.wave_vector.map(lit),
                    self.wave_origin.map(lit),
                    lit(self.wave_width),
                    lit(self.wave_speed),
                )?
                .with_phase_form(self.phase_form),
            ),
            "spherical_pulse" => {
                if !(self.pulse_width > 0.0) {
                    return Err(Error::InvalidConfig("pulse width must be positive".into()));
                }
                InitialCondition::SphericalPulse {
                    width: lit(self.pulse_width),
                }
            }
            "constant_pi" => InitialCondition::ConstantPi,
            "zero" => InitialCondition::Zero,
            other => {
                return Err(Error::UnknownName {
                    kind: "initial condition",
                    name: other.to_string(),
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub n_poly: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub flux: Option<FluxKind>,
    pub formulation: Option<Formulation>,
}

impl RunConfig {
    /// The setup each experiment uses when nothing is overridden.
    pub fn preset(experiment: Experiment) -> Self {
        let periodic_mesh = MeshConfig::default();
        let open_mesh = MeshConfig {
            periodic: [false; 3],
            ..MeshConfig::default()
        };
        let both = vec![FluxKind::Upwind, FluxKind::Central];
        let (mesh, run, ic) = match experiment {
            Experiment::Convergence => (
                MeshConfig {
                    elements: [2, 2, 2],
                    ..open_mesh
                },
                RunSection {
                    degrees: (2..=12).collect(),
                    dt: vec![1e-2, 5e-3],
                    t_final: 4.0,
                    cadence: 0,
                    tolerance: 100.0,
                    ..RunSection::default()
                },
                "plane_wave",
            ),
            Experiment::Stability => (
                open_mesh,
                RunSection {
                    degrees: vec![4],
                    dt: vec![6.0 / 20000.0],
                    t_final: 6.0,
                    fluxes: vec![FluxKind::Central],
                    formulations: vec![Formulation::Skew, Formulation::Standard],
                    cadence: 1,
                    tolerance: 10.0,
                    ..RunSection::default()
                },
                "plane_wave",
            ),
            Experiment::Conservation => (
                periodic_mesh,
                RunSection {
                    degrees: vec![3, 4],
                    dt: vec![1e-3],
                    t_final: 1.0,
                    fluxes: both,
                    cadence: 10,
                    tolerance: 1e-12,
                    ..RunSection::default()
                },
                "spherical_pulse",
            ),
            Experiment::Freestream => (
                periodic_mesh,
                RunSection {
                    degrees: vec![3, 4],
                    dt: vec![1e-3],
                    t_final: 2.0,
                    fluxes: both,
                    cadence: 0,
                    tolerance: 1e-11,
                    ..RunSection::default()
                },
                "constant_pi",
            ),
            Experiment::Custom => (periodic_mesh, RunSection::default(), "spherical_pulse"),
        };
        Self {
            experiment,
            mesh,
            run,
            physics: PhysicsSection {
                initial_condition: ic.into(),
                ..PhysicsSection::default()
            },
            output: OutputSection::default(),
        }
    }

    /// Parses a JSON document, filling absent sections and keys from the
    /// preset of `experiment` (or of the document's own `experiment`).
    pub fn from_json(text: &str, experiment: Option<Experiment>) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text)?;
        let named = match doc.get("experiment") {
            Some(v) => Some(serde_json::from_value::<Experiment>(v.clone())?),
            None => None,
        };
        let experiment = experiment.or(named).unwrap_or_default();
        let mut base = serde_json::to_value(Self::preset(experiment))?;
        merge(&mut base, doc);
        base["experiment"] = serde_json::to_value(experiment)?;
        let config: Self = serde_json::from_value(base)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, experiment: Option<Experiment>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, experiment)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(n) = o.n_poly {
            self.run.degrees = vec![n];
        }
        if let Some(dt) = o.dt {
            self.run.dt = vec![dt];
        }
        if let Some(t) = o.t_final {
            self.run.t_final = t;
        }
        if let Some(f) = o.flux {
            self.run.fluxes = vec![f];
        }
        if let Some(f) = o.formulation {
            self.run.formulations = vec![f];
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.run.degrees.is_empty() || self.run.degrees.contains(&0) {
            return bad("run.degrees must be a non-empty list of degrees >= 1");
        }
        if self.run.dt.is_empty() || self.run.dt.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad("run.dt must be a non-empty list of positive steps");
        }
        if !(self.run.t_final > 0.0 && self.run.t_final.is_finite()) {
            return bad("run.t_final must be positive");
        }
        if self.run.fluxes.is_empty() || self.run.formulations.is_empty() {
            return bad("run.fluxes and run.formulations must not be empty");
        }
        if !(self.run.tolerance > 0.0) {
            return bad("run.tolerance must be positive");
        }
        if !(self.physics.wave_speed > 0.0) {
            return bad("physics.wave_speed must be positive");
        }
        self.physics.initial_condition::<f64>()?;
        Ok(())
    }
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
