//! Brute-force references that do not go through the resonance spectrum.
//!
//! [`propagate_direct`] integrates the Schrödinger equation under `H_eff`
//! with a fixed-step explicit scheme. [`discretize_full`] replaces every
//! channel by a finite set of uniform energy bins, which turns the open
//! problem back into a closed real symmetric one that can be diagonalized
//! exactly.

use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, CMatrix, CVector};
use crate::model::{ChannelModel, EffectiveHamiltonian, OpenSystem};
use crate::spectra::ResonanceState;

/// Ratio of the largest admissible step to `ħ/‖H‖`.
pub const STEP_FRACTION: f64 = 0.01;

/// Largest admissible integration step for `h`.
pub fn step_bound(h: &EffectiveHamiltonian, hbar: f64) -> f64 {
    let norm = frobenius(&h.matrix);
    if norm == 0.0 {
        f64::INFINITY
    } else {
        STEP_FRACTION * hbar / norm
    }
}

/// Integrates `iħ dψ/dt = H ψ` with classical fourth-order Runge-Kutta.
///
/// `step` defaults to the stability bound. Each output interval is split
/// into equal substeps no longer than the step.
pub fn propagate_direct(
    h: &EffectiveHamiltonian,
    psi0: &CVector,
    times: &[f64],
    hbar: f64,
    step: Option<f64>,
) -> Result<Vec<CVector>> {
    let n = h.dim();
    if psi0.len() != n {
        return Err(Error::DimensionMismatch(format!("initial state has {} components, H has {n}", psi0.len())));
    }
    if !(hbar > 0.0) {
        return Err(Error::InvalidInput("hbar must be positive".into()));
    }
    if let Some(&t) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::DomainError { t });
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("times must be increasing".into()));
    }
    let bound = step_bound(h, hbar);
    let step = match step {
        Some(s) if s > bound => return Err(Error::StepTooLarge { step: s, bound }),
        Some(s) if !(s > 0.0) => return Err(Error::InvalidInput("step must be positive".into())),
        Some(s) => s,
        None => bound,
    };
    let a = &h.matrix * Complex64::new(0.0, -1.0 / hbar);
    let mut out = Vec::with_capacity(times.len());
    let mut psi = psi0.clone();
    let mut now = 0.0;
    for &t in times {
        let span = t - now;
        if span > 0.0 {
            let count = (span / step).ceil().max(1.0) as usize;
            let dt = span / count as f64;
            let prop = rk4_propagator(&a, dt);
            for _ in 0..count {
                psi = &prop * &psi;
            }
        }
        now = t;
        out.push(psi.clone());
    }
    Ok(out)
}

/// One RK4 step for the linear system `ψ' = Aψ`, written as a matrix.
fn rk4_propagator(a: &CMatrix, dt: f64) -> CMatrix {
    let n = a.nrows();
    let x = a * Complex64::new(dt, 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = CMatrix::identity(n, n);
    for k in 1..=4 {
        term = &term * &x / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    sum
}

/// Real symmetric model of the discrete block coupled to binned continua.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSpaceModel {
    pub h_full: DMatrix<f64>,
    pub discrete: usize,
    pub bins_per_channel: Vec<usize>,
    pub bin_width: Vec<f64>,
    /// Bin centre energies for each channel.
    pub bin_energies: Vec<Vec<f64>>,
    /// `ρ_c(E_m)·ΔE_c` for each channel.
    pub bin_weights: Vec<Vec<f64>>,
    pub hbar: f64,
}

impl FullSpaceModel {
    pub fn dim(&self) -> usize {
        self.h_full.nrows()
    }

    /// Recurrence time `2πħ/ΔE` of the finest discretization.
    pub fn horizon(&self) -> f64 {
        let de = self.bin_width.iter().cloned().fold(f64::INFINITY, f64::min);
        2.0 * std::f64::consts::PI * self.hbar / de
    }

    pub fn eigen(&self) -> Result<FullSpectrum> {
        let n = self.dim();
        let m = Mat::<f64>::from_fn(n, n, |i, j| self.h_full[(i, j)]);
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::EigenNoConvergence { iterations: 0 })?;
        let s = evd.S().column_vector();
        let u = evd.U();
        Ok(FullSpectrum {
            values: (0..n).map(|i| s[i]).collect(),
            vectors: DMatrix::from_fn(n, n, |i, j| u[(i, j)]),
            discrete: self.discrete,
            hbar: self.hbar,
            horizon: self.horizon(),
        })
    }
}

/// Eigendecomposition `H_full = V Λ Vᵀ`.
#[derive(Debug, Clone)]
pub struct FullSpectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub discrete: usize,
    pub hbar: f64,
    pub horizon: f64,
}

impl FullSpectrum {
    fn amplitudes(&self, psi0: &CVector) -> Result<Vec<Complex64>> {
        if psi0.len() != self.discrete {
            return Err(Error::DimensionMismatch(format!(
                "initial state has {} components, discrete block has {}",
                psi0.len(),
                self.discrete
            )));
        }
        let norm = psi0.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("initial state must be nonzero".into()));
        }
        Ok((0..self.values.len())
            .map(|k| (0..self.discrete).map(|i| self.vectors[(i, k)] * psi0[i]).sum::<Complex64>() / norm)
            .collect())
    }

    fn check_horizon(&self, t: f64) -> Result<()> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::DomainError { t });
        }
        if t > self.horizon {
            return Err(Error::HorizonExceeded { t, horizon: self.horizon });
        }
        Ok(())
    }

    /// Full-space state at time `t` for the normalized discrete-block start `psi0`.
    pub fn evolve(&self, psi0: &CVector, t: f64) -> Result<CVector> {
        self.check_horizon(t)?;
        let amps = self.amplitudes(psi0)?;
        let n = self.values.len();
        let mut out = CVector::zeros(n);
        for (k, a) in amps.iter().enumerate() {
            let c = a * Complex64::from_polar(1.0, -self.values[k] * t / self.hbar);
            for i in 0..n {
                out[i] += c * self.vectors[(i, k)];
            }
        }
        Ok(out)
    }

    pub fn survival(&self, psi0: &CVector, times: &[f64]) -> Result<SurvivalCurve> {
        for &t in times {
            self.check_horizon(t)?;
        }
        let weights: Vec<f64> = self.amplitudes(psi0)?.iter().map(|a| a.norm_sqr()).collect();
        let probability = times
            .iter()
            .map(|&t| {
                let amp: Complex64 = weights
                    .iter()
                    .zip(&self.values)
                    .map(|(w, l)| w * Complex64::from_polar(1.0, -l * t / self.hbar))
                    .sum();
                amp.norm_sqr().min(1.0)
            })
            .collect();
        Ok(SurvivalCurve { times: times.to_vec(), probability, horizon: self.horizon, hbar: self.hbar })
    }
}

/// Builds the binned full-space model. `windows[c]` gives the energy range of
/// channel `c` and is only consulted for wideband channels, which need one.
pub fn discretize_full(system: &OpenSystem, bins: usize, windows: &[Option<(f64, f64)>]) -> Result<FullSpaceModel> {
    if bins < 100 {
        return Err(Error::InvalidInput(format!("at least 100 bins per channel are required, got {bins}")));
    }
    let k = system.channels.len();
    if !windows.is_empty() && windows.len() != k {
        return Err(Error::DimensionMismatch(format!("{} windows for {k} channels", windows.len())));
    }
    let n = system.dim();
    let coupling = system.coupling.scaled();
    let dim = n + bins * k;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let hb = system.system.hamiltonian();
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = hb[(i, j)];
        }
    }
    let mut bin_width = Vec::with_capacity(k);
    let mut bin_energies = Vec::with_capacity(k);
    let mut bin_weights = Vec::with_capacity(k);
    for (c, channel) in system.channels.iter().enumerate() {
        let (lo, hi) = match channel {
            ChannelModel::Chain { .. } => channel.band().expect("chain channels have a band"),
            ChannelModel::Wideband { .. } => match windows.get(c).copied().flatten() {
                Some((lo, hi)) if lo < hi && lo.is_finite() && hi.is_finite() => (lo, hi),
                Some(_) => return Err(Error::InvalidInput(format!("window of channel {c} is empty"))),
                None => return Err(Error::WindowRequired { channel: c }),
            },
        };
        let de = (hi - lo) / bins as f64;
        let energies: Vec<f64> = (0..bins).map(|m| lo + (m as f64 + 0.5) * de).collect();
        let weights: Vec<f64> = energies.iter().map(|&e| channel.density(e) * de).collect();
        for m in 0..bins {
            let row = n + c * bins + m;
            h[(row, row)] = energies[m];
            let scale = weights[m].sqrt();
            for i in 0..n {
                let v = coupling[(i, c)] * scale;
                h[(i, row)] = v;
                h[(row, i)] = v;
            }
        }
        bin_width.push(de);
        bin_energies.push(energies);
        bin_weights.push(weights);
    }
    Ok(FullSpaceModel {
        h_full: h,
        discrete: n,
        bins_per_channel: vec![bins; k],
        bin_width,
        bin_energies,
        bin_weights,
        hbar: system.hbar,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub probability: Vec<f64>,
    pub horizon: f64,
    pub hbar: f64,
}

pub fn survival_probability_full(model: &FullSpaceModel, psi0: &CVector, times: &[f64]) -> Result<SurvivalCurve> {
    let horizon = model.horizon();
    if let Some(&t) = times.iter().find(|&&t| t > horizon) {
        return Err(Error::HorizonExceeded { t, horizon });
    }
    model.eigen()?.survival(psi0, times)
}

/// Normalized real part of `φ_λ`, the default start for survival runs.
pub fn default_initial_state(state: &ResonanceState) -> Result<CVector> {
    let re: CVector = state.phi.map(|z| Complex64::new(z.re, 0.0));
    let norm = re.norm();
    if norm == 0.0 {
        return Err(Error::InvalidInput("eigenvector has a vanishing real part".into()));
    }
    Ok(re / Complex64::new(norm, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthFit {
    pub gamma: f64,
    /// Root-mean-square deviation of `ln P` from the fitted line.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares fit of `ln P(t)` on `[t_lo, t_hi]`, `Γ_fit = −ħ·slope`.
pub fn extract_width(curve: &SurvivalCurve, window: (f64, f64)) -> Result<WidthFit> {
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.probability)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, p)| (*t, *p))
        .collect();
    if pts.len() < 2 {
        return Err(Error::WindowEmpty);
    }
    if pts.iter().any(|(_, p)| !(*p > 0.0)) {
        return Err(Error::InvalidInput("survival probability must be positive on the fit window".into()));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::WindowEmpty);
    }
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1.ln() - ym)).sum();
    let slope = sty / stt;
    let residual = (pts.iter().map(|p| (p.1.ln() - ym - slope * (p.0 - tm)).powi(2)).sum::<f64>() / m).sqrt();
    Ok(WidthFit { gamma: -curve.hbar * slope, residual, samples: pts.len() })
}
