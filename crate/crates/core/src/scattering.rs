//! Resonance part of the S-matrix and line shapes.
//!
//! Convention: `S(E) = I − 2πi Ṽᵀ (E − H_eff(E))⁻¹ Ṽ` with
//! `Ṽ_ic = sqrt(ρ_c(E)) (αW)_ic`. Expanding the resolvent in the
//! biorthonormal eigenstates gives the spectral form
//! `S_res = −i Σ_λ a_λc a_λc' / (E − z_λ)`, `a_λc = sqrt(2πρ_c) ((αW)ᵀφ_λ)_c`.
//! Channels closed at `E` (outside a chain band) carry no flux and their
//! rows and columns reduce to the identity.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::OpenSystem;
use crate::spectra::{eigendecompose, ResonanceState};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `a_λc` for every state (rows) and channel (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAmplitudes {
    pub energy: f64,
    pub values: CMatrix,
}

pub fn channel_amplitudes(system: &OpenSystem, energy: f64, states: &[ResonanceState]) -> ChannelAmplitudes {
    let v = system.weighted_coupling(energy);
    let k = v.ncols();
    let norm = (2.0 * PI).sqrt();
    let values = CMatrix::from_fn(states.len(), k, |l, c| {
        let s: Complex64 = (0..v.nrows()).map(|i| states[l].phi[i] * v[(i, c)]).sum();
        s * norm
    });
    ChannelAmplitudes { energy, values }
}

/// `S_res` from the sum over resonance states at the probe energy.
pub fn resonance_amplitude(system: &OpenSystem, energy: f64) -> Result<CMatrix> {
    let states = eigendecompose(&system.effective_hamiltonian(energy)?)?;
    let amps = channel_amplitudes(system, energy, &states);
    let k = system.channels.len();
    let mut out = CMatrix::zeros(k, k);
    for (l, s) in states.iter().enumerate() {
        let denom = Complex64::new(energy, 0.0) - s.z;
        for c in 0..k {
            for d in 0..k {
                out[(c, d)] += -I * amps.values[(l, c)] * amps.values[(l, d)] / denom;
            }
        }
    }
    Ok(out)
}

/// `S_res = −2πi Ṽᵀ (E − H_eff)⁻¹ Ṽ`; valid at exceptional points too.
pub fn resonance_amplitude_resolvent(system: &OpenSystem, energy: f64) -> Result<CMatrix> {
    let h = system.effective_hamiltonian(energy)?;
    let n = h.dim();
    let shifted = CMatrix::identity(n, n) * Complex64::new(energy, 0.0) - &h.matrix;
    let v = system.weighted_coupling(energy).map(|x| Complex64::new(x, 0.0));
    let x = linalg::solve(&shifted, &v).ok_or(Error::SingularResolvent { energy })?;
    Ok((v.transpose() * x) * (-2.0 * PI * I))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrixSample {
    pub energy: f64,
    pub s: CMatrix,
    /// Channels open at `energy`.
    pub open: Vec<bool>,
}

impl SMatrixSample {
    /// Frobenius norm of `S†S − I` restricted to the open channels.
    pub fn unitarity_residual(&self) -> f64 {
        let idx: Vec<usize> = (0..self.open.len()).filter(|&c| self.open[c]).collect();
        let m = idx.len();
        let sub = CMatrix::from_fn(m, m, |a, b| self.s[(idx[a], idx[b])]);
        linalg::frobenius(&(sub.adjoint() * &sub - CMatrix::identity(m, m)))
    }

    pub fn symmetry_residual(&self) -> f64 {
        linalg::frobenius(&(&self.s - self.s.transpose()))
    }
}

pub fn smatrix(system: &OpenSystem, energy: f64) -> Result<SMatrixSample> {
    if !energy.is_finite() {
        return Err(Error::InvalidInput("energy must be finite".into()));
    }
    let k = system.channels.len();
    let mut s = resonance_amplitude_resolvent(system, energy)? + CMatrix::identity(k, k);
    let open: Vec<bool> = system.channels.iter().map(|c| c.is_open(energy)).collect();
    for c in (0..k).filter(|&c| !open[c]) {
        for d in 0..k {
            let delta = if c == d { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            s[(c, d)] = delta;
            s[(d, c)] = delta;
        }
    }
    Ok(SMatrixSample { energy, s, open })
}

/// S-matrix on an energy grid, evaluated in parallel and returned in grid order.
pub fn smatrix_grid(system: &OpenSystem, energies: &[f64]) -> Result<Vec<SMatrixSample>> {
    energies.par_iter().map(|&e| smatrix(system, e)).collect()
}

/// Dimensionless line shape `σ_cc'(E) = |δ_cc' − S_cc'(E)|²`.
pub fn cross_section(
    system: &OpenSystem,
    from: usize,
    to: usize,
    energies: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let k = system.channels.len();
    if from >= k || to >= k {
        return Err(Error::InvalidInput(format!("channel index out of range for {k} channels")));
    }
    let delta = if from == to { 1.0 } else { 0.0 };
    smatrix_grid(system, energies)?
        .into_iter()
        .map(|s| Ok((s.energy, (Complex64::new(delta, 0.0) - s.s[(from, to)]).norm_sqr())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use crate::model::{ChannelModel, CouplingMatrix, DiscreteSystem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_level(level: f64, gamma: f64) -> OpenSystem {
        // Γ = 2πρw² with ρ = 1
        let w = (gamma / (2.0 * PI)).sqrt();
        OpenSystem::new(
            DiscreteSystem::diagonal(vec![level]).unwrap(),
            CouplingMatrix::new(DMatrix::from_element(1, 1, w), 1.0).unwrap(),
            vec![ChannelModel::wideband(1.0).unwrap()],
            1.0,
        )
        .unwrap()
    }

    fn fixture(x: f64) -> OpenSystem {
        OpenSystem::new(
            DiscreteSystem::diagonal(vec![1.0, -1.0]).unwrap(),
            CouplingMatrix::new(DMatrix::from_element(2, 1, 1.0 / PI.sqrt()), x.sqrt()).unwrap(),
            vec![ChannelModel::wideband(1.0).unwrap()],
            1.0,
        )
        .unwrap()
    }

    fn random_wideband(rng: &mut ChaCha8Rng, n: usize, k: usize) -> OpenSystem {
        let levels: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut u = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(-0.5..0.5);
                u[(i, j)] = v;
                u[(j, i)] = v;
            }
        }
        let w = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let chans = (0..k).map(|_| ChannelModel::wideband(rng.random_range(0.2..1.5)).unwrap()).collect();
        OpenSystem::new(
            DiscreteSystem::new(levels, u).unwrap(),
            CouplingMatrix::new(w, rng.random_range(0.1..1.5)).unwrap(),
            chans,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn no_coupling_no_resonance_part() {
        let sys = fixture(0.0);
        let s = resonance_amplitude(&sys, 0.3).unwrap();
        assert_eq!(s[(0, 0)], Complex64::new(0.0, 0.0));
        let full = smatrix(&sys, 0.3).unwrap();
        assert!((full.s[(0, 0)] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn isolated_level_peak_and_half_width() {
        let sys = single_level(0.0, 1.0);
        let peak = smatrix(&sys, 0.0).unwrap().s[(0, 0)];
        assert!((peak + 1.0).norm() < 1e-14);
        for e in [-0.5, 0.5] {
            let s = smatrix(&sys, e).unwrap().s[(0, 0)];
            assert!(((Complex64::new(1.0, 0.0) - s).norm_sqr() - 2.0).abs() < 1e-13);
            assert!((s.norm() - 1.0).abs() < 1e-14);
        }
        // oracle: scalar Lorentzian amplitude 1 - iΓ/(E - E_λ + iΓ/2)
        for e in [-2.0, -0.3, 0.1, 1.7] {
            let s = smatrix(&sys, e).unwrap().s[(0, 0)];
            let want = Complex64::new(1.0, 0.0) - I / (Complex64::new(e, 0.5));
            assert!((s - want).norm() < 1e-14);
        }
    }

    #[test]
    fn spectral_sum_matches_resolvent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let sys = random_wideband(&mut rng, 4, 2);
            let e = rng.random_range(-2.0..2.0);
            let a = resonance_amplitude(&sys, e).unwrap();
            let b = resonance_amplitude_resolvent(&sys, e).unwrap();
            assert!(linalg::frobenius(&(&a - &b)) <= 1e-10 * linalg::frobenius(&b).max(1e-300));
        }
    }

    #[test]
    fn wideband_unitarity_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = random_wideband(&mut rng, 4, 2);
        let energies: Vec<f64> = (0..100).map(|i| -3.0 + 6.0 * i as f64 / 99.0).collect();
        for s in smatrix_grid(&sys, &energies).unwrap() {
            assert!(s.unitarity_residual() <= 1e-8);
            assert!(s.symmetry_residual() <= 1e-10);
            for c in 0..2 {
                assert!(s.s[(c, c)].norm() <= 1.0 + 1e-8);
            }
        }
    }

    #[test]
    fn chain_channel_unitary_inside_band_identity_outside() {
        let sys = OpenSystem::new(
            DiscreteSystem::diagonal(vec![-0.5, 0.7]).unwrap(),
            CouplingMatrix::new(DMatrix::from_row_slice(2, 2, &[0.4, 0.2, -0.3, 0.5]), 1.0).unwrap(),
            vec![ChannelModel::chain(1.0, 0.0).unwrap(), ChannelModel::chain(0.5, 1.0).unwrap()],
            1.0,
        )
        .unwrap();
        // common band is (0, 2)
        for e in [0.1, 0.6, 1.3, 1.9] {
            let s = smatrix(&sys, e).unwrap();
            assert!(s.unitarity_residual() <= 1e-10, "E={e} {}", s.unitarity_residual());
            assert!(s.symmetry_residual() <= 1e-10);
        }
        let s = smatrix(&sys, -1.0).unwrap();
        assert_eq!(s.open, vec![true, false]);
        assert_eq!(s.s[(1, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(s.s[(0, 1)], Complex64::new(0.0, 0.0));
        assert!(s.unitarity_residual() <= 1e-10);
    }

    #[test]
    fn bound_state_pole_is_singular() {
        let sys = fixture(0.0);
        let err = smatrix(&sys, 1.0).unwrap_err();
        assert_eq!(err.name(), "SingularResolvent");
    }

    #[test]
    fn breit_wigner_line_shape() {
        let gamma = 0.8;
        let level = 0.4;
        let sys = single_level(level, gamma);
        let energies: Vec<f64> = (0..201).map(|i| level - 5.0 * gamma + 10.0 * gamma * i as f64 / 200.0).collect();
        for (e, sigma) in cross_section(&sys, 0, 0, &energies).unwrap() {
            let bw = gamma * gamma / ((e - level).powi(2) + gamma * gamma / 4.0);
            assert!((sigma - bw).abs() <= 1e-10 * bw);
        }
    }

    #[test]
    fn overlapping_levels_interfere() {
        // x = 0.9: z = ±sqrt(0.19) - 0.9i; compare against the sum of two
        // independent Lorentzians with the same positions and widths
        let sys = fixture(0.9);
        let states = eigendecompose(&sys.effective_hamiltonian(0.0).unwrap()).unwrap();
        let energies: Vec<f64> = (0..301).map(|i| -3.0 + 6.0 * i as f64 / 300.0).collect();
        let sigma = cross_section(&sys, 0, 0, &energies).unwrap();
        let worst = sigma
            .iter()
            .map(|&(e, s)| {
                let sum: f64 = states
                    .iter()
                    .map(|st| st.width().powi(2) / ((e - st.energy()).powi(2) + st.width().powi(2) / 4.0))
                    .sum();
                (s - sum).abs() / sum
            })
            .fold(0.0f64, f64::max);
        assert!(worst > 0.1, "max relative deviation {worst}");
        // |1 - S|² never exceeds 4 for a unitary one-channel S
        assert!(sigma.iter().all(|&(_, s)| s <= 4.0 + 1e-12));
    }
}
