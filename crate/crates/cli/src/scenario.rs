//! Scenario documents: a JSON description of one open system plus the grids
//! and options the commands need. Everything is validated on load.

use std::path::Path;

use feshbach::dynamics::Excitation;
use feshbach::model::{ChannelModel, CouplingMatrix, DiscreteSystem, OpenSystem};
use feshbach::spectra::{Parameter, ParameterAxis};
use feshbach::{CVector, Error};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Free-form declaration of the energy and time units.
    pub units: String,
    #[serde(default = "one")]
    pub hbar: f64,
    pub levels: Vec<f64>,
    #[serde(default)]
    pub internal_coupling: Option<Vec<Vec<f64>>>,
    pub channels: Vec<ChannelSpec>,
    /// Rows are states, columns are channels.
    pub coupling: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub probe_energy: f64,
    #[serde(default)]
    pub excitation: Option<ExcitationSpec>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub fixed_point: Option<FixedPointSpec>,
    #[serde(default)]
    pub ep_search: Option<EpSearchSpec>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelSpec {
    Wideband {
        density: f64,
        #[serde(default)]
        window: Option<(f64, f64)>,
    },
    Chain {
        hopping: f64,
        #[serde(default)]
        center: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExcitationSpec {
    Scattering { channel: usize },
    Source { re: Vec<f64>, im: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 })
            .collect()
    }

    pub fn validate(&self, name: &str) -> Result<(), Error> {
        if self.count == 0 || !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::InvalidInput(format!(
                "{name} grid needs finite min <= max and count >= 1"
            )));
        }
        if self.count > 1 && self.min == self.max {
            return Err(Error::InvalidInput(format!("{name} grid has repeated points")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default)]
    pub energy: Option<Grid>,
    #[serde(default)]
    pub time: Option<Grid>,
    #[serde(default)]
    pub alpha: Option<Grid>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSpec {
    #[serde(default)]
    pub seed_energy: Option<f64>,
    #[serde(default)]
    pub state: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpSearchSpec {
    pub params: [ParamSpec; 2],
    #[serde(default)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub kind: ParamKind,
    #[serde(default)]
    pub i: Option<usize>,
    #[serde(default)]
    pub j: Option<usize>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Alpha,
    Strength,
    Internal,
    Level,
}

impl ParamSpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| match self.kind {
            ParamKind::Alpha => "alpha".into(),
            ParamKind::Strength => "strength".into(),
            ParamKind::Internal => format!("u_{}_{}", self.i.unwrap_or(0), self.j.unwrap_or(1)),
            ParamKind::Level => format!("e_{}", self.i.unwrap_or(0)),
        })
    }

    pub fn axis(&self) -> Result<ParameterAxis, Error> {
        let parameter = match self.kind {
            ParamKind::Alpha => Parameter::Alpha,
            ParamKind::Strength => Parameter::Strength,
            ParamKind::Internal => match (self.i, self.j) {
                (Some(i), Some(j)) => Parameter::Internal(i, j),
                _ => return Err(Error::InvalidInput("internal parameter needs indices i and j".into())),
            },
            ParamKind::Level => match self.i {
                Some(i) => Parameter::Level(i),
                None => return Err(Error::InvalidInput("level parameter needs index i".into())),
            },
        };
        Ok(ParameterAxis { parameter, min: self.min, max: self.max })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub state: Option<usize>,
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    #[serde(default)]
    pub samples: Option<usize>,
}

/// Failure while reading a scenario.
#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Invalid(Error),
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(LoadError::Io)?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(LoadError::Parse)?;
        if scenario.units.trim().is_empty() {
            return Err(LoadError::Invalid(Error::InvalidInput("units must be declared".into())));
        }
        scenario.system().map_err(LoadError::Invalid)?;
        scenario.excitation().map_err(LoadError::Invalid)?;
        for (name, grid) in [
            ("energy", scenario.grids.energy),
            ("time", scenario.grids.time),
            ("alpha", scenario.grids.alpha),
        ] {
            if let Some(g) = grid {
                g.validate(name).map_err(LoadError::Invalid)?;
            }
        }
        if let Some(ep) = &scenario.ep_search {
            for p in &ep.params {
                p.axis().map_err(LoadError::Invalid)?;
            }
        }
        Ok(scenario)
    }

    pub fn system(&self) -> Result<OpenSystem, Error> {
        let n = self.levels.len();
        let internal = match &self.internal_coupling {
            None => DMatrix::zeros(n, n),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch(format!("internal_coupling must be {n}x{n}")));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        let k = self.channels.len();
        if self.coupling.len() != n || self.coupling.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(format!("coupling must be {n}x{k} (states x channels)")));
        }
        let w = DMatrix::from_fn(n, k, |i, c| self.coupling[i][c]);
        let channels = self
            .channels
            .iter()
            .map(|c| match c {
                ChannelSpec::Wideband { density, window } => {
                    if let Some((lo, hi)) = window {
                        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                            return Err(Error::InvalidInput("channel window must satisfy lo < hi".into()));
                        }
                    }
                    ChannelModel::wideband(*density)
                }
                ChannelSpec::Chain { hopping, center } => ChannelModel::chain(*hopping, *center),
            })
            .collect::<Result<Vec<_>, _>>()?;
        OpenSystem::new(
            DiscreteSystem::new(self.levels.clone(), internal)?,
            CouplingMatrix::new(w, self.alpha)?,
            channels,
            self.hbar,
        )
    }

    pub fn windows(&self) -> Vec<Option<(f64, f64)>> {
        self.channels
            .iter()
            .map(|c| match c {
                ChannelSpec::Wideband { window, .. } => *window,
                ChannelSpec::Chain { .. } => None,
            })
            .collect()
    }

    pub fn excitation(&self) -> Result<Excitation, Error> {
        match &self.excitation {
            None => Ok(Excitation::Scattering { channel: 0 }),
            Some(ExcitationSpec::Scattering { channel }) => {
                if *channel >= self.channels.len() {
                    return Err(Error::InvalidInput(format!("excitation channel {channel} does not exist")));
                }
                Ok(Excitation::Scattering { channel: *channel })
            }
            Some(ExcitationSpec::Source { re, im }) => {
                let n = self.levels.len();
                if re.len() != n || im.len() != n {
                    return Err(Error::DimensionMismatch(format!("source vector must have {n} components")));
                }
                Ok(Excitation::Source {
                    f: CVector::from_iterator(n, re.iter().zip(im).map(|(r, i)| Complex64::new(*r, *i))),
                })
            }
        }
    }
}
