//! Closed-system Hamiltonian, channel self-energies and the energy-dependent
//! effective Hamiltonian `H_eff(E) = H_B + Σ_c g_c(E) (αW)_c (αW)_cᵀ`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Hermitian Hamiltonian of the discrete states: level energies on the
/// diagonal plus a real symmetric internal coupling with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    levels: Vec<f64>,
    internal: DMatrix<f64>,
}

impl DiscreteSystem {
    pub fn new(levels: Vec<f64>, internal: DMatrix<f64>) -> Result<Self> {
        let n = levels.len();
        if n == 0 {
            return Err(Error::InvalidInput("at least one discrete level is required".into()));
        }
        if internal.nrows() != n || internal.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "internal coupling is {}x{}, expected {n}x{n}",
                internal.nrows(),
                internal.ncols()
            )));
        }
        if levels.iter().chain(internal.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("levels and couplings must be finite".into()));
        }
        let max_abs = internal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_deviation = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (internal[(i, j)] - internal[(j, i)]).abs())
            .fold(0.0f64, f64::max);
        if max_deviation > 1e-12 * max_abs {
            return Err(Error::AsymmetryError { max_deviation });
        }
        let mut sym = (&internal + internal.transpose()) * 0.5;
        sym.fill_diagonal(0.0);
        Ok(Self { levels, internal: sym })
    }

    /// Uncoupled levels.
    pub fn diagonal(levels: Vec<f64>) -> Result<Self> {
        let n = levels.len();
        Self::new(levels, DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn internal(&self) -> &DMatrix<f64> {
        &self.internal
    }

    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let mut h = self.internal.clone();
        for (i, e) in self.levels.iter().enumerate() {
            h[(i, i)] = *e;
        }
        h
    }

    pub(crate) fn set_level(&mut self, i: usize, value: f64) {
        self.levels[i] = value;
    }

    pub(crate) fn set_internal(&mut self, i: usize, j: usize, value: f64) {
        if i != j {
            self.internal[(i, j)] = value;
            self.internal[(j, i)] = value;
        }
    }
}

/// Analytic continuum attached to the discrete states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// Energy-independent density of states; self-energy `-iπρ`.
    Wideband { density: f64 },
    /// Semi-infinite nearest-neighbour chain with band `|E - center| < 2·hopping`.
    Chain { hopping: f64, center: f64 },
}

impl ChannelModel {
    pub fn wideband(density: f64) -> Result<Self> {
        if !(density.is_finite() && density > 0.0) {
            return Err(Error::InvalidInput(format!("wideband density must be > 0, got {density}")));
        }
        Ok(ChannelModel::Wideband { density })
    }

    pub fn chain(hopping: f64, center: f64) -> Result<Self> {
        if !(hopping.is_finite() && hopping > 0.0) || !center.is_finite() {
            return Err(Error::InvalidInput(format!(
                "chain needs hopping > 0 and finite center, got ({hopping}, {center})"
            )));
        }
        Ok(ChannelModel::Chain { hopping, center })
    }

    /// Self-energy kernel `g_c(E)`; its imaginary part is never positive.
    pub fn self_energy(&self, energy: f64) -> Complex64 {
        match *self {
            ChannelModel::Wideband { density } => Complex64::new(0.0, -PI * density),
            ChannelModel::Chain { hopping, center } => {
                let e = energy - center;
                let edge = 2.0 * hopping;
                let denom = 2.0 * hopping * hopping;
                if e.abs() < edge {
                    Complex64::new(e, -(edge * edge - e * e).sqrt()) / denom
                } else {
                    let root = (e * e - edge * edge).sqrt();
                    Complex64::new((e - e.signum() * root) / denom, 0.0)
                }
            }
        }
    }

    /// Local density of states `ρ_c(E) = -Im g_c(E) / π`.
    pub fn density(&self, energy: f64) -> f64 {
        (-self.self_energy(energy).im / PI).max(0.0)
    }

    pub fn is_open(&self, energy: f64) -> bool {
        self.density(energy) > 0.0
    }

    pub fn band(&self) -> Option<(f64, f64)> {
        match *self {
            ChannelModel::Wideband { .. } => None,
            ChannelModel::Chain { hopping, center } => {
                Some((center - 2.0 * hopping, center + 2.0 * hopping))
            }
        }
    }

    pub fn is_energy_independent(&self) -> bool {
        matches!(self, ChannelModel::Wideband { .. })
    }
}

/// Real bound-continuum couplings `W` (states × channels) with a global scale `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    w: DMatrix<f64>,
    alpha: f64,
}

impl CouplingMatrix {
    pub fn new(w: DMatrix<f64>, alpha: f64) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("coupling entries must be finite".into()));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidInput(format!("coupling scale must be >= 0, got {alpha}")));
        }
        Ok(Self { w, alpha })
    }

    pub fn raw(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.w.clone(), alpha)
    }

    /// `αW`.
    pub fn scaled(&self) -> DMatrix<f64> {
        &self.w * self.alpha
    }

    pub fn states(&self) -> usize {
        self.w.nrows()
    }

    pub fn channels(&self) -> usize {
        self.w.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    pub energy: f64,
    pub matrix: CMatrix,
}

impl EffectiveHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn build_discrete_hamiltonian(levels: &[f64], internal: &DMatrix<f64>) -> Result<DiscreteSystem> {
    DiscreteSystem::new(levels.to_vec(), internal.clone())
}

pub fn channel_self_energy(channel: &ChannelModel, energy: f64) -> Complex64 {
    channel.self_energy(energy)
}

pub fn build_effective_hamiltonian(
    system: &DiscreteSystem,
    coupling: &CouplingMatrix,
    channels: &[ChannelModel],
    energy: f64,
) -> Result<EffectiveHamiltonian> {
    let n = system.dim();
    if coupling.states() != n || coupling.channels() != channels.len() {
        return Err(Error::DimensionMismatch(format!(
            "coupling is {}x{}, expected {n}x{}",
            coupling.states(),
            coupling.channels(),
            channels.len()
        )));
    }
    if !energy.is_finite() {
        return Err(Error::InvalidInput("probe energy must be finite".into()));
    }
    let hb = system.hamiltonian();
    let mut matrix = hb.map(|x| Complex64::new(x, 0.0));
    if coupling.alpha() != 0.0 {
        let v = coupling.scaled();
        let g: Vec<Complex64> = channels.iter().map(|c| c.self_energy(energy)).collect();
        for i in 0..n {
            for j in i..n {
                let mut s = Complex64::new(0.0, 0.0);
                for (c, gc) in g.iter().enumerate() {
                    s += gc * (v[(i, c)] * v[(j, c)]);
                }
                let entry = matrix[(i, j)] + s;
                matrix[(i, j)] = entry;
                matrix[(j, i)] = entry;
            }
        }
    }
    Ok(EffectiveHamiltonian { energy, matrix })
}

/// Bundles everything that defines an open system: the discrete states,
/// their couplings to a list of channels, and ħ.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSystem {
    pub system: DiscreteSystem,
    pub coupling: CouplingMatrix,
    pub channels: Vec<ChannelModel>,
    pub hbar: f64,
}

impl OpenSystem {
    pub fn new(
        system: DiscreteSystem,
        coupling: CouplingMatrix,
        channels: Vec<ChannelModel>,
        hbar: f64,
    ) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidInput(format!("hbar must be > 0, got {hbar}")));
        }
        if coupling.states() != system.dim() || coupling.channels() != channels.len() {
            return Err(Error::DimensionMismatch(format!(
                "coupling is {}x{}, expected {}x{}",
                coupling.states(),
                coupling.channels(),
                system.dim(),
                channels.len()
            )));
        }
        Ok(Self { system, coupling, channels, hbar })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn effective_hamiltonian(&self, energy: f64) -> Result<EffectiveHamiltonian> {
        build_effective_hamiltonian(&self.system, &self.coupling, &self.channels, energy)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Ok(Self { coupling: self.coupling.with_alpha(alpha)?, ..self.clone() })
    }

    pub fn open_channels(&self, energy: f64) -> usize {
        self.channels.iter().filter(|c| c.is_open(energy)).count()
    }

    /// `Ṽ_ic = sqrt(ρ_c(E)) (αW)_ic`, the couplings weighted by the local channel density.
    pub fn weighted_coupling(&self, energy: f64) -> DMatrix<f64> {
        let mut v = self.coupling.scaled();
        for (c, ch) in self.channels.iter().enumerate() {
            let s = ch.density(energy).sqrt();
            v.column_mut(c).scale_mut(s);
        }
        v
    }
}
