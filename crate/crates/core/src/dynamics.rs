//! Time dependence after a sudden excitation at `t₀ = 0`.
//!
//! The interior state evolves as `Σ_λ c_λ0 e^{−i z_λ t/ħ} φ_λ`, its left
//! partner with `d_λ = c_λ0*`, so every weight `w_λ = c_λ0 d_λ = |c_λ0|²` is
//! real and non-negative. All rates are closed-form logarithmic derivatives;
//! nothing here differentiates sampled data.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c_product, CMatrix, CVector};
use crate::model::{EffectiveHamiltonian, OpenSystem};
use crate::spectra::{self, eigendecompose, phase_rigidity_report, ResonanceState};

/// Populations below this are reported as [`Error::Underflow`].
pub const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub enum Excitation {
    /// Population through the scattering channel `channel` (no source term).
    Scattering { channel: usize },
    /// Source term `F` switched on as a step at `t₀ = 0`.
    Source { f: CVector },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationCoefficients {
    /// `c_λ0 = n_λ / (E − z_λ)`.
    pub c0: Vec<Complex64>,
    /// `d_λ = n_λ* / (E − z_λ*) = c_λ0*`.
    pub d: Vec<Complex64>,
    /// `w_λ = c_λ0 d_λ ≥ 0`.
    pub weights: Vec<f64>,
}

fn numerators(system: &OpenSystem, energy: f64, states: &[ResonanceState], exc: &Excitation) -> Result<Vec<Complex64>> {
    match exc {
        Excitation::Scattering { channel } => {
            if *channel >= system.channels.len() {
                return Err(Error::InvalidInput(format!("channel {channel} does not exist")));
            }
            let v = system.weighted_coupling(energy);
            Ok(states
                .iter()
                .map(|s| (0..v.nrows()).map(|i| s.phi[i] * v[(i, *channel)]).sum())
                .collect())
        }
        Excitation::Source { f } => {
            if f.len() != system.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "source has {} components, system has {} states",
                    f.len(),
                    system.dim()
                )));
            }
            if f.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::InvalidInput("source vector must be finite".into()));
            }
            Ok(states.iter().map(|s| c_product(&s.phi, f)).collect())
        }
    }
}

pub fn coefficients_for(
    system: &OpenSystem,
    energy: f64,
    states: &[ResonanceState],
    exc: &Excitation,
) -> Result<ExcitationCoefficients> {
    let nums = numerators(system, energy, states, exc)?;
    let e = Complex64::new(energy, 0.0);
    let c0: Vec<Complex64> = nums.iter().zip(states).map(|(n, s)| n / (e - s.z)).collect();
    let d: Vec<Complex64> = nums.iter().zip(states).map(|(n, s)| n.conj() / (e - s.z.conj())).collect();
    let weights: Vec<f64> = c0.iter().zip(&d).map(|(c, d)| (c * d).re.max(0.0)).collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllZero);
    }
    Ok(ExcitationCoefficients { c0, d, weights })
}

pub fn excitation_coefficients(system: &OpenSystem, energy: f64, exc: &Excitation) -> Result<ExcitationCoefficients> {
    let states = eigendecompose(&system.effective_hamiltonian(energy)?)?;
    coefficients_for(system, energy, &states, exc)
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::DomainError { t });
    }
    Ok(())
}

/// Spectral data at one system energy together with an excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceEnsemble {
    pub energy: f64,
    pub hbar: f64,
    pub states: Vec<ResonanceState>,
    pub coefficients: ExcitationCoefficients,
    /// `B_λ^λ' = ⟨φ_λ|φ_λ'⟩`, diagonal `A_λ`.
    pub overlaps: CMatrix,
}

impl ResonanceEnsemble {
    pub fn new(system: &OpenSystem, energy: f64, exc: &Excitation) -> Result<Self> {
        let states = eigendecompose(&system.effective_hamiltonian(energy)?)?;
        let coefficients = coefficients_for(system, energy, &states, exc)?;
        let overlaps = phase_rigidity_report(&states).overlaps;
        Ok(Self { energy, hbar: system.hbar, states, coefficients, overlaps })
    }

    /// Same ensemble with all off-diagonal overlaps `B_λ^λ'` set to zero.
    pub fn without_cross_terms(mut self) -> Self {
        let n = self.states.len();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    self.overlaps[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        self
    }

    pub fn widths(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.width()).collect()
    }

    /// `P(t) = Σ_λ w_λ e^{−Γ_λ t/ħ}`.
    pub fn population(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self
            .states
            .iter()
            .zip(&self.coefficients.weights)
            .map(|(s, w)| w * (-s.width() * t / self.hbar).exp())
            .sum())
    }

    /// `k_gr(t) = (1/ħ) Σ Γ_λ w_λ e^{−Γ_λ t/ħ} / Σ w_λ e^{−Γ_λ t/ħ}`.
    pub fn group_rate(&self, t: f64) -> Result<f64> {
        let p = self.population(t)?;
        if p < UNDERFLOW {
            return Err(Error::Underflow { t, norm: p });
        }
        // shift exponents by the smallest populated width; the ratio is unchanged
        let weights = &self.coefficients.weights;
        let gmin = self
            .states
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(s, _)| s.width())
            .fold(f64::INFINITY, f64::min);
        let mut num = 0.0;
        let mut den = 0.0;
        for (s, &w) in self.states.iter().zip(weights) {
            let e = w * (-(s.width() - gmin) * t / self.hbar).exp();
            num += s.width() * e;
            den += e;
        }
        Ok(num / den / self.hbar)
    }

    /// `N_λ(t) = ⟨φ_λ(t)|φ_λ(t)⟩` and its time derivative. The expression is
    /// real whenever the overlaps are antisymmetric; its real part is used.
    pub fn individual_norm(&self, state: usize, t: f64) -> Result<(f64, f64)> {
        check_time(t)?;
        let n = self.states.len();
        if state >= n {
            return Err(Error::InvalidInput(format!("state {state} out of range for {n} states")));
        }
        let hb = self.hbar;
        let c = &self.coefficients.c0;
        let d = &self.coefficients.d;
        let s = &self.states[state];
        let (gl, el) = (s.width(), s.energy());
        let diag = c[state] * d[state] * s.a_norm * (-gl * t / hb).exp();
        let mut value = diag;
        let mut deriv = diag * (-gl / hb);
        for (other, so) in self.states.iter().enumerate() {
            if other == state {
                continue;
            }
            let b = self.overlaps[(other, state)];
            if b == Complex64::new(0.0, 0.0) {
                continue;
            }
            let decay = -(gl + so.width()) / (2.0 * hb);
            let omega = (so.energy() - el) / hb;
            let envelope = (decay * t).exp();
            let forward = c[state] * d[other] * Complex64::from_polar(1.0, omega * t);
            let backward = c[other] * d[state] * Complex64::from_polar(1.0, -omega * t);
            value += envelope * (forward - backward) * b;
            deriv += envelope
                * (forward * Complex64::new(decay, omega) - backward * Complex64::new(decay, -omega))
                * b;
        }
        Ok((value.re, deriv.re))
    }

    /// `k_λ(t) = −d/dt ln N_λ(t)`; negative values are returned as they are.
    /// A norm at or below the underflow threshold, including one driven
    /// negative by the cross terms, has no logarithm and is an error.
    pub fn individual_rate(&self, state: usize, t: f64) -> Result<f64> {
        let (norm, deriv) = self.individual_norm(state, t)?;
        if !(norm > UNDERFLOW) {
            return Err(Error::Underflow { t, norm });
        }
        Ok(-deriv / norm)
    }
}

pub fn population_probability(system: &OpenSystem, energy: f64, exc: &Excitation, t: f64) -> Result<f64> {
    check_time(t)?;
    ResonanceEnsemble::new(system, energy, exc)?.population(t)
}

pub fn decay_rate_group(system: &OpenSystem, energy: f64, exc: &Excitation, t: f64) -> Result<f64> {
    check_time(t)?;
    ResonanceEnsemble::new(system, energy, exc)?.group_rate(t)
}

pub fn decay_rate_individual(
    system: &OpenSystem,
    state: usize,
    energy: f64,
    exc: &Excitation,
    t: f64,
) -> Result<f64> {
    check_time(t)?;
    ResonanceEnsemble::new(system, energy, exc)?.individual_rate(state, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrace {
    pub energy: f64,
    pub times: Vec<f64>,
    pub population: Vec<f64>,
    pub rate: Vec<f64>,
}

/// `P(t)` and `k_gr(t)` on `count` uniform times in `[0, t_max]`.
pub fn decay_trace(
    system: &OpenSystem,
    energy: f64,
    exc: &Excitation,
    t_max: f64,
    count: usize,
) -> Result<DecayTrace> {
    check_time(t_max)?;
    if count < 1 {
        return Err(Error::InvalidInput("time grid needs at least one point".into()));
    }
    let ens = ResonanceEnsemble::new(system, energy, exc)?;
    let times: Vec<f64> = (0..count)
        .map(|i| if count == 1 { 0.0 } else { t_max * i as f64 / (count - 1) as f64 })
        .collect();
    let rows: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| Ok((ens.population(t)?, ens.group_rate(t)?)))
        .collect::<Result<_>>()?;
    let (population, rate) = rows.into_iter().unzip();
    Ok(DecayTrace { energy, times, population, rate })
}

/// `ψ(t) = Σ_λ e^{−i z_λ t/ħ} (φ_λᵀψ₀) φ_λ`.
pub fn propagate_spectral(
    h: &EffectiveHamiltonian,
    psi0: &CVector,
    times: &[f64],
    hbar: f64,
) -> Result<Vec<CVector>> {
    let states = eigendecompose(h)?;
    let amps: Vec<Complex64> = states.iter().map(|s| c_product(&s.phi, psi0)).collect();
    times
        .iter()
        .map(|&t| {
            check_time(t)?;
            let mut out = CVector::zeros(psi0.len());
            for (s, a) in states.iter().zip(&amps) {
                let phase = (Complex64::new(0.0, -t / hbar) * s.z).exp();
                out += &s.phi * (a * phase);
            }
            Ok(out)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrappingReport {
    pub alphas: Vec<f64>,
    /// Widths at each α, sorted descending.
    pub widths: Vec<Vec<f64>>,
    /// Number of broad states (open channels).
    pub broad: usize,
    /// Mean width of the `N − K` trapped states at each α.
    pub gamma_av: Vec<f64>,
    /// `Γ_av/ħ`.
    pub k_av: Vec<f64>,
    /// First α at which the trapped mean width starts to decrease.
    pub onset: Option<f64>,
}

impl TrappingReport {
    pub fn trapped(&self, step: usize) -> &[f64] {
        &self.widths[step][self.broad..]
    }

    /// Largest width divided by the total width at grid point `step`.
    pub fn dominant_fraction(&self, step: usize) -> f64 {
        let w = &self.widths[step];
        let sum: f64 = w.iter().sum();
        if sum == 0.0 {
            0.0
        } else {
            w[0] / sum
        }
    }
}

pub fn trapping_analysis(system: &OpenSystem, grid: &[f64], energy: f64) -> Result<TrappingReport> {
    let n = system.dim();
    let k = system.open_channels(energy);
    if k >= n {
        return Err(Error::NoBifurcationPartition { states: n, channels: k });
    }
    let traj = spectra::sweep_eigenvalues(system, energy, grid)?;
    let hbar = system.hbar;
    let widths: Vec<Vec<f64>> = traj
        .points
        .iter()
        .map(|p| {
            let mut w: Vec<f64> = p.states.iter().map(|s| s.width()).collect();
            w.sort_by(|a, b| b.total_cmp(a));
            w
        })
        .collect();
    let gamma_av: Vec<f64> = widths.iter().map(|w| w[k..].iter().sum::<f64>() / (n - k) as f64).collect();
    let k_av = gamma_av.iter().map(|g| g / hbar).collect();
    let onset = gamma_av.windows(2).position(|w| w[1] < w[0]).map(|i| grid[i + 1]);
    Ok(TrappingReport { alphas: grid.to_vec(), widths, broad: k, gamma_av, k_av, onset })
}
