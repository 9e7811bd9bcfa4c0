//! Run configuration: one TOML (or JSON) file with `beam`, `gains`, `sim`
//! and `output` sections. Every key has a default; unknown keys are errors.

use std::path::{Path, PathBuf};

use flexbeam::control::FeedbackMode;
use flexbeam::fem::LoadMode;
use flexbeam::profile::{PieceRecord, Profile};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub beam: BeamConfig,
    pub gains: GainsConfig,
    pub sim: SimConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Turning,
    Raising,
}

/// A profile given as a constant, a path to a JSON record file (relative to
/// the config file), or inline piece records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Constant(f64),
    File(PathBuf),
    Pieces(Vec<PieceRecord>),
}

impl ProfileSpec {
    pub fn resolve(&self, name: &str, length: f64, base: &Path) -> Result<Profile, CliError> {
        let profile = match self {
            Self::Constant(v) => {
                if !v.is_finite() {
                    return Err(CliError::Config(format!("beam.{name}: must be finite, got {v}")));
                }
                Profile::constant(length, *v)
            }
            Self::File(path) => Profile::from_json_file(base.join(path))
                .map_err(|e| CliError::Config(format!("beam.{name}: {}: {e}", path.display())))?,
            Self::Pieces(records) => {
                Profile::from_records(records).map_err(|e| CliError::Config(format!("beam.{name}: {e}")))?
            }
        };
        if (profile.length() - length).abs() > 1e-12 * length {
            return Err(CliError::Config(format!(
                "beam.{name}: profile ends at {} but the beam length is {length}",
                profile.length()
            )));
        }
        Ok(profile)
    }
}

/// Beam, payload and hub data; the names follow the torque-map parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub channel: Channel,
    pub length: f64,
    pub rho: ProfileSpec,
    pub cz: ProfileSpec,
    pub cy: ProfileSpec,
    pub z0: ProfileSpec,
    pub tip_mass: f64,
    pub i0: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub m0: f64,
    pub d: f64,
    pub radius: f64,
    pub g: f64,
    pub phi_r0: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            channel: Channel::Turning,
            length: 1.0,
            rho: ProfileSpec::Constant(1.2),
            cz: ProfileSpec::Constant(2.0),
            cy: ProfileSpec::Constant(3.0),
            z0: ProfileSpec::Constant(0.0),
            tip_mass: 0.5,
            i0: 2.0,
            i1: 0.3,
            i2: 0.4,
            i3: 0.2,
            j1: 0.05,
            j2: 0.05,
            j3: 0.05,
            m0: 1.5,
            d: 0.1,
            radius: 0.5,
            g: 9.81,
            phi_r0: 0.0,
        }
    }
}

/// Gains are suggested from the certificate with `margin` and damping `k`;
/// any of `alpha`, `beta`, `kappa` given explicitly replaces the suggestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    pub margin: f64,
    pub k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            margin: 2.0,
            k: 1.0,
            alpha: None,
            beta: None,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub elements: usize,
    pub feedback: FeedbackMode,
    pub load: LoadMode,
    /// Time step in seconds, or `"auto"` (`None`) for one twentieth of the
    /// shortest discrete period.
    #[serde(with = "time_step")]
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Initial hub angle, rate and tip deflection (static cantilever shape).
    pub phi0: f64,
    pub omega0: f64,
    pub tip0: f64,
    pub seed: u64,
    /// Random states per property sweep in `verify`.
    pub samples: usize,
    /// Steps of the dissipation check in `verify`.
    pub verify_steps: usize,
}

mod time_step {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    enum Keyword {
        Auto,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Seconds(f64),
        Keyword(Keyword),
    }

    pub fn serialize<S: Serializer>(dt: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match dt {
            Some(v) => Repr::Seconds(*v),
            None => Repr::Keyword(Keyword::Auto),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Seconds(v) => Some(v),
            Repr::Keyword(Keyword::Auto) => None,
        })
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            elements: 8,
            feedback: FeedbackMode::DiscreteConsistent,
            load: LoadMode::Consistent,
            dt: Some(0.01),
            t_final: 200.0,
            phi0: 0.1,
            omega0: 0.0,
            tip0: 0.0,
            seed: 42,
            samples: 200,
            verify_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parses TOML, or JSON when `path` ends in `.json`.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Scalar checks not covered by the model's own constructors.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: String| Err(CliError::Config(format!("{key}: {why}")));
        let s = &self.sim;
        if s.elements == 0 {
            return bad("sim.elements", "must be at least 1".into());
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return bad("sim.t_final", format!("must be positive, got {}", s.t_final));
        }
        if let Some(dt) = s.dt {
            if !(dt > 0.0 && dt <= s.t_final) {
                return bad("sim.dt", format!("must lie in (0, t_final], got {dt}"));
            }
        }
        for (key, v) in [("sim.phi0", s.phi0), ("sim.omega0", s.omega0), ("sim.tip0", s.tip0)] {
            if !v.is_finite() {
                return bad(key, format!("must be finite, got {v}"));
            }
        }
        if s.samples == 0 || s.verify_steps == 0 {
            return bad("sim.samples / sim.verify_steps", "must be at least 1".into());
        }
        let g = &self.gains;
        if !(g.margin > 1.0 && g.margin.is_finite()) {
            return bad("gains.margin", format!("must exceed 1, got {}", g.margin));
        }
        if !(self.beam.length > 0.0 && self.beam.length.is_finite()) {
            return bad("beam.length", format!("must be positive, got {}", self.beam.length));
        }
        Ok(())
    }
}
