//! Resonance spectroscopy of the effective Hamiltonian.
//!
//! Eigenvectors of the complex symmetric `H_eff` are normalized with the
//! bilinear product `φ_λᵀφ_μ = δ_λμ`, so the left eigenvectors are the plain
//! transposes of the right ones. On top of the decomposition this module
//! provides the phase-rigidity diagnostics, the self-consistent resonance
//! energies of energy-dependent Hamiltonians, eigenvalue trajectories under
//! a parameter sweep, and a search for exceptional points.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, c_overlap, c_product, h_product, CMatrix, CVector};
use crate::model::{EffectiveHamiltonian, OpenSystem};

/// Normalized self-orthogonality `|φᵀφ| / φ†φ` below which a state is
/// treated as sitting on an exceptional point.
pub const SELF_ORTHOGONALITY_THRESHOLD: f64 = 1e-6;

/// One eigenpair of `H_eff` with bilinear normalization `φᵀφ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceState {
    pub z: Complex64,
    pub phi: CVector,
    /// `A_λ = φ†φ ≥ 1`.
    pub a_norm: f64,
    /// `1 / A_λ`.
    pub rigidity: f64,
}

impl ResonanceState {
    pub fn energy(&self) -> f64 {
        self.z.re
    }

    pub fn width(&self) -> f64 {
        -2.0 * self.z.im
    }
}

pub fn eigendecompose(h: &EffectiveHamiltonian) -> Result<Vec<ResonanceState>> {
    decompose_symmetric(&h.matrix)
}

/// Biorthonormal eigendecomposition of a complex symmetric matrix, sorted by
/// ascending real part of the eigenvalue.
pub fn decompose_symmetric(m: &CMatrix) -> Result<Vec<ResonanceState>> {
    let n = m.nrows();
    let eig = linalg::eig(m)?;
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let v = eig.vectors.column(k).into_owned();
        let cp = c_product(&v, &v);
        if cp.norm() < SELF_ORTHOGONALITY_THRESHOLD * v.norm_squared() {
            return Err(Error::EPDegenerate {
                z: eig.values[k],
                partner: nearest_other(&eig.values, k),
            });
        }
        vectors.push(v / cp.sqrt());
    }

    // Exactly degenerate eigenvalues leave the basis inside the eigenspace
    // arbitrary; make it biorthonormal explicitly.
    let scale = linalg::frobenius(m).max(1.0);
    let cluster_tol = 1e-8 * scale;
    for k in 0..n {
        for j in 0..k {
            if (eig.values[j] - eig.values[k]).norm() <= cluster_tol {
                let p = c_product(&vectors[j], &vectors[k]);
                let proj = &vectors[j] * p;
                vectors[k] -= proj;
            }
        }
        let cp = c_product(&vectors[k], &vectors[k]);
        if cp.norm() < SELF_ORTHOGONALITY_THRESHOLD * vectors[k].norm_squared() {
            return Err(Error::EPDegenerate {
                z: eig.values[k],
                partner: nearest_other(&eig.values, k),
            });
        }
        let normalized = &vectors[k] / cp.sqrt();
        vectors[k] = normalized;
    }

    let mut states: Vec<ResonanceState> = eig
        .values
        .iter()
        .zip(vectors)
        .map(|(&z, mut phi)| {
            fix_sign(&mut phi);
            let a_norm = phi.norm_squared();
            ResonanceState { z, phi, a_norm, rigidity: 1.0 / a_norm }
        })
        .collect();
    states.sort_by(|a, b| {
        a.z.re.total_cmp(&b.z.re).then_with(|| a.z.im.total_cmp(&b.z.im))
    });
    Ok(states)
}

fn nearest_other(values: &[Complex64], k: usize) -> Complex64 {
    values
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .min_by(|(_, a), (_, b)| (**a - values[k]).norm().total_cmp(&(**b - values[k]).norm()))
        .map(|(_, z)| *z)
        .unwrap_or(values[k])
}

/// Largest-modulus component gets a positive real part.
fn fix_sign(phi: &mut CVector) {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, c) in phi.iter().enumerate() {
        if c.norm() > best {
            best = c.norm();
            idx = i;
        }
    }
    let lead = phi[idx];
    if lead.re < 0.0 || (lead.re == 0.0 && lead.im < 0.0) {
        phi.neg_mut();
    }
}

/// `A_λ` per state and the Hermitian overlap matrix `B_λ^λ' = ⟨φ_λ|φ_λ'⟩`
/// (its diagonal holds `A_λ`).
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityReport {
    pub a_norm: Vec<f64>,
    pub overlaps: CMatrix,
}

impl RigidityReport {
    /// `max |B_λ^λ' + B_λ'^λ|` over off-diagonal pairs.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.a_norm.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max((self.overlaps[(i, j)] + self.overlaps[(j, i)]).norm());
                }
            }
        }
        worst
    }
}

pub fn phase_rigidity_report(states: &[ResonanceState]) -> RigidityReport {
    let n = states.len();
    let overlaps = CMatrix::from_fn(n, n, |i, j| h_product(&states[i].phi, &states[j].phi));
    RigidityReport { a_norm: states.iter().map(|s| s.a_norm).collect(), overlaps }
}

/// `max_λμ |φ_λᵀφ_μ − δ_λμ|`.
pub fn biorthonormality_residual(states: &[ResonanceState]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((c_product(&a.phi, &b.phi) - target).norm());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// fixed point

#[derive(Debug, Clone, PartialEq)]
pub enum Tracker {
    /// Position in the ascending-`Re z` ordering at the seed energy.
    Index(usize),
    Vector(CVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSeed {
    pub energy: f64,
    pub tracker: Tracker,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { damping: 0.5, tolerance: 1e-12, max_iterations: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub energy: f64,
    pub width: f64,
    pub z: Complex64,
    pub iterations: usize,
    pub converged: bool,
}

fn best_match(states: &[ResonanceState], tracker: &CVector) -> (usize, f64) {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| (i, c_overlap(tracker, &s.phi)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty spectrum")
}

/// Solves `E = Re z_λ(E)` by damped iteration, following branch `λ` through
/// eigenvector overlap. Wideband-only systems have an energy-independent
/// spectrum, so a single undamped step lands on the fixed point.
pub fn solve_fixed_point(
    system: &OpenSystem,
    seed: &BranchSeed,
    options: &FixedPointOptions,
) -> Result<FixedPointResult> {
    if !seed.energy.is_finite() {
        return Err(Error::InvalidInput("seed energy must be finite".into()));
    }
    let constant_map = system.channels.iter().all(|c| c.is_energy_independent());
    let beta = if constant_map { 1.0 } else { options.damping };
    let has_band = !constant_map;

    let mut energy = seed.energy;
    let mut states = eigendecompose(&system.effective_hamiltonian(energy)?)?;
    let mut idx = match &seed.tracker {
        Tracker::Index(i) => {
            if *i >= states.len() {
                return Err(Error::InvalidInput(format!(
                    "state index {i} out of range for {} states",
                    states.len()
                )));
            }
            *i
        }
        Tracker::Vector(v) => {
            if v.len() != states.len() {
                return Err(Error::DimensionMismatch("tracker vector length".into()));
            }
            let (i, overlap) = best_match(&states, v);
            if overlap < 0.5 {
                return Err(Error::BranchLost { overlap });
            }
            i
        }
    };

    let mut best = FixedPointResult {
        energy,
        width: states[idx].width(),
        z: states[idx].z,
        iterations: 0,
        converged: false,
    };
    let mut best_residual = f64::INFINITY;
    for iteration in 0..=options.max_iterations {
        let z = states[idx].z;
        let residual = z.re - energy;
        if residual.abs() < best_residual {
            best_residual = residual.abs();
            best = FixedPointResult { energy, width: -2.0 * z.im, z, iterations: iteration, converged: false };
        }
        if has_band && system.open_channels(energy) == 0 {
            // every channel is closed: the state has become bound
            best.iterations = iteration;
            return Err(Error::NotConverged(Box::new(best)));
        }
        if residual.abs() <= options.tolerance * energy.abs().max(1.0) {
            return Ok(FixedPointResult { energy, width: -2.0 * z.im, z, iterations: iteration, converged: true });
        }
        if iteration == options.max_iterations {
            break;
        }
        energy += beta * residual;
        let tracker = states[idx].phi.clone();
        states = eigendecompose(&system.effective_hamiltonian(energy)?)?;
        let (i, overlap) = best_match(&states, &tracker);
        if overlap < 0.5 {
            return Err(Error::BranchLost { overlap });
        }
        idx = i;
    }
    best.iterations = options.max_iterations;
    Err(Error::NotConverged(Box::new(best)))
}

// ---------------------------------------------------------------------------
// parameters, sweeps

/// A real parameter of an [`OpenSystem`] that can be swept or searched over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parameter {
    /// Global coupling scale `α`.
    Alpha,
    /// Coupling strength `α²`; `H_eff − H_B` is linear in it.
    Strength,
    /// Symmetric internal coupling `u_ij = u_ji`.
    Internal(usize, usize),
    /// Diagonal energy of level `i`.
    Level(usize),
}

impl Parameter {
    pub fn apply(&self, system: &OpenSystem, value: f64) -> Result<OpenSystem> {
        if !value.is_finite() {
            return Err(Error::InvalidInput("parameter value must be finite".into()));
        }
        let n = system.dim();
        match *self {
            Parameter::Alpha => system.with_alpha(value),
            Parameter::Strength => {
                if value < 0.0 {
                    return Err(Error::InvalidInput(format!("strength must be >= 0, got {value}")));
                }
                system.with_alpha(value.sqrt())
            }
            Parameter::Internal(i, j) => {
                if i >= n || j >= n || i == j {
                    return Err(Error::InvalidInput(format!("invalid coupling index ({i}, {j})")));
                }
                let mut out = system.clone();
                out.system.set_internal(i, j, value);
                Ok(out)
            }
            Parameter::Level(i) => {
                if i >= n {
                    return Err(Error::InvalidInput(format!("invalid level index {i}")));
                }
                let mut out = system.clone();
                out.system.set_level(i, value);
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub parameter: f64,
    /// Index-aligned with the previous point of the trajectory.
    pub states: Vec<ResonanceState>,
    /// Smallest matched overlap with the previous point (1 at the first point).
    pub min_overlap: f64,
    pub branch_lost: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub parameter: Parameter,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn branch_lost(&self) -> bool {
        self.points.iter().any(|p| p.branch_lost)
    }
}

/// Greedy assignment by descending overlap: `result[i]` is the index in
/// `next` continuing `prev[i]`.
fn match_states(prev: &[ResonanceState], next: &[ResonanceState]) -> (Vec<usize>, f64) {
    let n = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            pairs.push((c_overlap(&p.phi, &q.phi), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assign = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut min_overlap = 1.0f64;
    for (o, i, j) in pairs {
        if assign[i] == usize::MAX && !taken[j] {
            assign[i] = j;
            taken[j] = true;
            min_overlap = min_overlap.min(o);
        }
    }
    (assign, min_overlap)
}

pub fn sweep_parameter(
    system: &OpenSystem,
    energy: f64,
    parameter: Parameter,
    grid: &[f64],
) -> Result<Trajectory> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("sweep grid must be strictly increasing".into()));
    }
    let spectra: Vec<Result<Vec<ResonanceState>>> = grid
        .par_iter()
        .map(|&value| eigendecompose(&parameter.apply(system, value)?.effective_hamiltonian(energy)?))
        .collect();
    let mut points: Vec<TrajectoryPoint> = Vec::with_capacity(grid.len());
    for (&value, spectrum) in grid.iter().zip(spectra) {
        let states = spectrum?;
        let point = match points.last() {
            None => TrajectoryPoint { parameter: value, states, min_overlap: 1.0, branch_lost: false },
            Some(prev) => {
                let (assign, min_overlap) = match_states(&prev.states, &states);
                let aligned = assign.iter().map(|&j| states[j].clone()).collect();
                TrajectoryPoint {
                    parameter: value,
                    states: aligned,
                    min_overlap,
                    branch_lost: min_overlap < 0.5,
                }
            }
        };
        points.push(point);
    }
    Ok(Trajectory { parameter, points })
}

/// Eigenvalue trajectories as the coupling scale `α` runs over `grid`.
pub fn sweep_eigenvalues(system: &OpenSystem, energy: f64, grid: &[f64]) -> Result<Trajectory> {
    if grid.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidInput("coupling scale must be >= 0".into()));
    }
    sweep_parameter(system, energy, Parameter::Alpha, grid)
}

// ---------------------------------------------------------------------------
// exceptional points

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterAxis {
    pub parameter: Parameter,
    pub min: f64,
    pub max: f64,
}

impl ParameterAxis {
    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpSearchOptions {
    /// Points per axis of the coarse scan.
    pub grid: usize,
    pub max_evaluations: usize,
    /// Success threshold on `sqrt(d)` relative to the matrix scale.
    pub tolerance: f64,
}

impl Default for EpSearchOptions {
    fn default() -> Self {
        Self { grid: 41, max_evaluations: 4000, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionalPoint {
    pub params: [f64; 2],
    /// Mean of the coalescing pair.
    pub z: Complex64,
    /// Smallest eigenvalue gap at `params`.
    pub residual: f64,
    pub scale: f64,
    /// `min |φᵀφ| / φ†φ` over the coalescing pair.
    pub self_orthogonality: f64,
    pub converged: bool,
}

fn closest_pair(values: &[Complex64]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = (values[i] - values[j]).norm_sqr();
            if best.is_none_or(|b| d < b.2) {
                best = Some((i, j, d));
            }
        }
    }
    best
}

/// Searches the box spanned by two parameters for a coalescence of two
/// eigenvalues: coarse grid scan of the minimal squared gap followed by
/// Nelder–Mead refinement inside the box.
pub fn locate_exceptional_point(
    system: &OpenSystem,
    axes: [ParameterAxis; 2],
    energy: f64,
    options: &EpSearchOptions,
) -> Result<ExceptionalPoint> {
    if system.dim() < 2 {
        return Err(Error::InvalidInput("exceptional points need at least two states".into()));
    }
    for ax in &axes {
        if !(ax.min.is_finite() && ax.max.is_finite() && ax.min <= ax.max) {
            return Err(Error::InvalidInput("search box must be finite and ordered".into()));
        }
    }
    let build = |p: [f64; 2]| -> Result<EffectiveHamiltonian> {
        let s = axes[0].parameter.apply(system, p[0])?;
        let s = axes[1].parameter.apply(&s, p[1])?;
        s.effective_hamiltonian(energy)
    };
    let objective = |p: [f64; 2]| -> f64 {
        let p = [axes[0].clamp(p[0]), axes[1].clamp(p[1])];
        build(p)
            .and_then(|h| linalg::eigenvalues(&h.matrix))
            .ok()
            .and_then(|v| closest_pair(&v))
            .map(|(_, _, d)| d)
            .unwrap_or(f64::INFINITY)
    };

    let n = options.grid.max(2);
    let node = |ax: &ParameterAxis, k: usize| ax.min + (ax.max - ax.min) * k as f64 / (n - 1) as f64;
    let scan: Vec<([f64; 2], f64)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let p = [node(&axes[0], idx / n), node(&axes[1], idx % n)];
            (p, objective(p))
        })
        .collect();
    let (start, _) = scan
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("scan is non-empty");

    let steps = [
        (axes[0].max - axes[0].min) / (n - 1) as f64,
        (axes[1].max - axes[1].min) / (n - 1) as f64,
    ];
    let refined = nelder_mead(&objective, start, steps, options.max_evaluations);
    let params = [axes[0].clamp(refined[0]), axes[1].clamp(refined[1])];

    let h = build(params)?;
    let eig = linalg::eig(&h.matrix)?;
    let (i, j, d) = closest_pair(&eig.values).expect("at least two eigenvalues");
    let ratio = |k: usize| {
        let v = eig.vectors.column(k).into_owned();
        c_product(&v, &v).norm() / v.norm_squared()
    };
    let scale = linalg::frobenius(&h.matrix).max(1.0);
    let residual = d.sqrt();
    let point = ExceptionalPoint {
        params,
        z: (eig.values[i] + eig.values[j]) * 0.5,
        residual,
        scale,
        self_orthogonality: ratio(i).min(ratio(j)),
        converged: residual <= options.tolerance * scale,
    };
    if point.converged {
        Ok(point)
    } else {
        Err(Error::NotFound(Box::new(point)))
    }
}

fn nelder_mead(
    f: &dyn Fn([f64; 2]) -> f64,
    start: [f64; 2],
    steps: [f64; 2],
    max_evaluations: usize,
) -> [f64; 2] {
    let mut simplex: Vec<([f64; 2], f64)> = vec![
        start,
        [start[0] + steps[0], start[1]],
        [start[0], start[1] + steps[1]],
    ]
    .into_iter()
    .map(|p| (p, f(p)))
    .collect();
    let mut evaluations = 3;
    let by_value = |a: &([f64; 2], f64), b: &([f64; 2], f64)| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    while evaluations < max_evaluations {
        simplex.sort_by(by_value);
        let best = simplex[0];
        let width = simplex[1..]
            .iter()
            .map(|(p, _)| (p[0] - best.0[0]).abs().max((p[1] - best.0[1]).abs()))
            .fold(0.0f64, f64::max);
        let scale = 1.0 + best.0[0].abs().max(best.0[1].abs());
        if width <= 1e-15 * scale || best.1 == 0.0 {
            break;
        }
        let worst = simplex[2];
        let centroid = lerp(simplex[0].0, simplex[1].0, 0.5);
        let reflected = lerp(worst.0, centroid, 2.0);
        let fr = f(reflected);
        evaluations += 1;
        if fr < simplex[0].1 {
            let expanded = lerp(worst.0, centroid, 3.0);
            let fe = f(expanded);
            evaluations += 1;
            simplex[2] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                lerp(worst.0, centroid, 1.5)
            } else {
                lerp(worst.0, centroid, 0.5)
            };
            let fc = f(contracted);
            evaluations += 1;
            if fc < worst.1.min(fr) {
                simplex[2] = (contracted, fc);
            } else {
                for k in 1..3 {
                    let p = lerp(best.0, simplex[k].0, 0.5);
                    simplex[k] = (p, f(p));
                    evaluations += 1;
                }
            }
        }
    }
    simplex.sort_by(by_value);
    simplex[0].0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, CouplingMatrix, DiscreteSystem};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fixture(x: f64) -> OpenSystem {
        let sys = DiscreteSystem::diagonal(vec![1.0, -1.0]).unwrap();
        let w = DMatrix::from_element(2, 1, 1.0 / PI.sqrt());
        OpenSystem::new(
            sys,
            CouplingMatrix::new(w, x.sqrt()).unwrap(),
            vec![ChannelModel::wideband(1.0).unwrap()],
            1.0,
        )
        .unwrap()
    }

    /// Closed form for the fixture: `z± = -ix ± sqrt(1 - x²)`.
    fn fixture_eigenvalues(x: f64) -> [Complex64; 2] {
        let root = c(1.0 - x * x, 0.0).sqrt();
        [c(0.0, -x) - root, c(0.0, -x) + root]
    }

    #[test]
    fn diagonal_matrix_gives_unit_vectors() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, -0.5), c(2.0, -0.1)]));
        let states = decompose_symmetric(&m).unwrap();
        assert_eq!(states[0].z, c(1.0, -0.5));
        assert_eq!(states[1].z, c(2.0, -0.1));
        for (k, s) in states.iter().enumerate() {
            assert!((s.phi[k] - c(1.0, 0.0)).norm() < 1e-15);
            assert!((s.a_norm - 1.0).abs() < 1e-15);
            assert!((s.rigidity - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fixture_matches_closed_form() {
        for x in [0.1, 0.5, 0.9, 1.5, 2.0] {
            let states = eigendecompose(&fixture(x).effective_hamiltonian(0.0).unwrap()).unwrap();
            let want = fixture_eigenvalues(x);
            for s in &states {
                let d = want.iter().map(|w| (s.z - w).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-12, "x={x}: {} not in {want:?}", s.z);
            }
            let sum: Complex64 = states.iter().map(|s| s.z).sum();
            assert!((sum - (want[0] + want[1])).norm() < 1e-12);
        }
        let states = eigendecompose(&fixture(0.5).effective_hamiltonian(0.0).unwrap()).unwrap();
        for s in &states {
            assert!((s.width() - 1.0).abs() < 1e-12);
            assert!((s.energy().abs() - 0.75f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn fixture_at_coalescence_is_refused() {
        let err = eigendecompose(&fixture(1.0).effective_hamiltonian(0.0).unwrap()).unwrap_err();
        match err {
            Error::EPDegenerate { z, partner } => {
                assert!((z - c(0.0, -1.0)).norm() < 1e-6);
                assert!((partner - c(0.0, -1.0)).norm() < 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalization_and_sign_convention() {
        let states = eigendecompose(&fixture(0.7).effective_hamiltonian(0.0).unwrap()).unwrap();
        for s in &states {
            assert!((c_product(&s.phi, &s.phi) - 1.0).norm() < 1e-12);
            let re_im: f64 = s.phi.iter().map(|p| p.re * p.im).sum();
            assert!(re_im.abs() < 1e-12);
            let lead = s.phi.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            assert!(lead.re > 0.0);
            assert!(s.a_norm >= 1.0 - 1e-12);
        }
        assert!(biorthonormality_residual(&states) < 1e-12);
    }

    #[test]
    fn closed_system_report_is_trivial() {
        let u = DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 0.1, 0.2, 0.0, -0.3, 0.1, -0.3, 0.0]);
        let sys = OpenSystem::new(
            DiscreteSystem::new(vec![-1.0, 0.0, 1.2], u).unwrap(),
            CouplingMatrix::new(DMatrix::from_element(3, 1, 1.0), 0.0).unwrap(),
            vec![ChannelModel::wideband(1.0).unwrap()],
            1.0,
        )
        .unwrap();
        let states = eigendecompose(&sys.effective_hamiltonian(0.0).unwrap()).unwrap();
        let report = phase_rigidity_report(&states);
        for a in &report.a_norm {
            assert!((a - 1.0).abs() < 1e-12);
        }
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(report.overlaps[(i, j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rigidity_collapses_near_the_coalescence() {
        // oracle: closed-form eigenvectors of the fixture at x = 0.99,
        // φ ∝ (ix, 1 - z) for eigenvalue z, normalized with φᵀφ = 1
        let x = 0.99;
        let mut expected: Vec<f64> = fixture_eigenvalues(x)
            .iter()
            .map(|&z| {
                let v = [c(0.0, -x), z - c(1.0, -x)];
                let cp = v[0] * v[0] + v[1] * v[1];
                (v[0].norm_sqr() + v[1].norm_sqr()) / cp.norm()
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        let states = eigendecompose(&fixture(x).effective_hamiltonian(0.0).unwrap()).unwrap();
        let report = phase_rigidity_report(&states);
        let mut got = report.a_norm.clone();
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g - e).abs() < 1e-8 * e, "{g} vs {e}");
            assert!(*g > 5.0);
        }
        // frozen from the closed form: A = 1/sqrt(1 - x²) = 7.0888...
        assert!((expected[0] - 7.088812050083354).abs() < 1e-9);
        assert!(report.antisymmetry_residual() < 1e-10);
    }

    #[test]
    fn hermitian_overlaps_antisymmetric_for_two_states() {
        for x in [0.2, 0.6, 1.3, 3.0] {
            let states = eigendecompose(&fixture(x).effective_hamiltonian(0.0).unwrap()).unwrap();
            assert!(phase_rigidity_report(&states).antisymmetry_residual() < 1e-10);
        }
    }

    #[test]
    fn hermitian_overlaps_not_antisymmetric_beyond_two_states() {
        // three levels coupled to one channel: Re⟨φ_λ|φ_μ⟩ = 2 Re(φ_λ)·Re(φ_μ) need not vanish
        let sys = OpenSystem::new(
            DiscreteSystem::diagonal(vec![-1.0, 0.1, 1.0]).unwrap(),
            CouplingMatrix::new(DMatrix::from_row_slice(3, 1, &[0.8, 0.5, -0.6]), 1.0).unwrap(),
            vec![ChannelModel::wideband(1.0).unwrap()],
            1.0,
        )
        .unwrap();
        let states = eigendecompose(&sys.effective_hamiltonian(0.0).unwrap()).unwrap();
        assert!(biorthonormality_residual(&states) < 1e-12);
        assert!(phase_rigidity_report(&states).antisymmetry_residual() > 1e-3);
    }

    #[test]
    fn fixed_point_wideband_is_one_step() {
        let sys = fixture(0.5);
        let seed = BranchSeed { energy: 3.0, tracker: Tracker::Index(1) };
        let r = solve_fixed_point(&sys, &seed, &FixedPointOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!((r.energy - 0.75f64.sqrt()).abs() < 1e-12);
        assert!((r.width - 1.0).abs() < 1e-12);
    }

    fn chain_level(level: f64, w: f64) -> OpenSystem {
        OpenSystem::new(
            DiscreteSystem::diagonal(vec![level]).unwrap(),
            CouplingMatrix::new(DMatrix::from_element(1, 1, w), 1.0).unwrap(),
            vec![ChannelModel::chain(1.0, 0.0).unwrap()],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn fixed_point_band_center() {
        let sys = chain_level(0.0, 0.1);
        let seed = BranchSeed { energy: 0.0, tracker: Tracker::Index(0) };
        let r = solve_fixed_point(&sys, &seed, &FixedPointOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.energy.abs() < 1e-14);
        assert!((r.width - 0.02).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_off_center_is_self_consistent() {
        // level at 0.5: the real part of the chain self-energy shifts the
        // resonance, and the converged energy must reproduce itself
        let sys = chain_level(0.5, 0.3);
        let seed = BranchSeed { energy: 0.5, tracker: Tracker::Index(0) };
        let r = solve_fixed_point(&sys, &seed, &FixedPointOptions::default()).unwrap();
        assert!(r.converged);
        let g = ChannelModel::chain(1.0, 0.0).unwrap().self_energy(r.energy);
        let z = 0.5 + 0.09 * g;
        assert!((z.re - r.energy).abs() <= 1e-12);
        assert!((-2.0 * z.im - r.width).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_outside_band_is_bound() {
        let sys = chain_level(2.5, 0.1);
        let seed = BranchSeed { energy: 2.5, tracker: Tracker::Index(0) };
        let err = solve_fixed_point(&sys, &seed, &FixedPointOptions::default()).unwrap_err();
        match err {
            Error::NotConverged(r) => {
                assert!(!r.converged);
                assert_eq!(r.width, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sweep_reaches_width_bifurcation() {
        let sys = fixture(1.0);
        // α = sqrt(x) on the fixture
        let grid: Vec<f64> = (0..=40).map(|k| (2.0 * k as f64 / 40.0).sqrt()).filter(|a| (a - 1.0).abs() > 1e-9).collect();
        let traj = sweep_eigenvalues(&sys, 0.0, &grid).unwrap();
        for s in &traj.points[0].states {
            assert_eq!(s.width(), 0.0);
        }
        let last = traj.points.last().unwrap();
        let mut widths: Vec<f64> = last.states.iter().map(|s| s.width()).collect();
        widths.sort_by(f64::total_cmp);
        let r3 = 3.0f64.sqrt();
        assert!((widths[0] - 2.0 * (2.0 - r3)).abs() < 1e-10);
        assert!((widths[1] - 2.0 * (2.0 + r3)).abs() < 1e-10);
        for p in &traj.points {
            let h = fixture(p.parameter * p.parameter).effective_hamiltonian(0.0).unwrap();
            let trace = h.matrix.trace();
            let sum: Complex64 = p.states.iter().map(|s| s.z).sum();
            assert!((sum - trace).norm() <= 1e-10 * linalg::frobenius(&h.matrix).max(1.0));
        }
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let err = sweep_eigenvalues(&fixture(0.5), 0.0, &[0.1, 0.1]).unwrap_err();
        assert_eq!(err.name(), "InvalidInput");
    }

    #[test]
    fn sweep_keeps_branches_continuous() {
        let sys = fixture(0.0);
        let grid: Vec<f64> = (0..30).map(|k| (0.03 * k as f64).sqrt()).collect();
        let traj = sweep_eigenvalues(&sys, 0.0, &grid).unwrap();
        assert!(!traj.branch_lost());
        // branch 0 starts on level +1 or -1 and must not jump sides below x = 1
        let first = traj.points[0].states[0].energy();
        for p in traj.points.iter().filter(|p| p.parameter * p.parameter < 0.95) {
            assert_eq!(p.states[0].energy().signum(), first.signum());
        }
    }

    fn ep_axes(u: (f64, f64), x: (f64, f64)) -> [ParameterAxis; 2] {
        [
            ParameterAxis { parameter: Parameter::Internal(0, 1), min: u.0, max: u.1 },
            ParameterAxis { parameter: Parameter::Strength, min: x.0, max: x.1 },
        ]
    }

    #[test]
    fn exceptional_point_of_fixture() {
        let ep = locate_exceptional_point(
            &fixture(0.0),
            ep_axes((-1.0, 1.0), (0.0, 2.0)),
            0.0,
            &EpSearchOptions::default(),
        )
        .unwrap();
        assert!(ep.params[0].abs() < 1e-6 && (ep.params[1] - 1.0).abs() < 1e-6);
        assert!((ep.z - c(0.0, -1.0)).norm() < 1e-6);
        assert!(ep.self_orthogonality <= 1e-3);
    }

    #[test]
    fn exceptional_point_off_grid() {
        // box shifted so that the coalescence is not a scan node
        let ep = locate_exceptional_point(
            &fixture(0.0),
            ep_axes((-0.93, 1.07), (0.037, 2.037)),
            0.0,
            &EpSearchOptions::default(),
        )
        .unwrap();
        assert!(ep.params[0].abs() < 1e-6, "{:?}", ep.params);
        assert!((ep.params[1] - 1.0).abs() < 1e-6, "{:?}", ep.params);
        assert!((ep.z - c(0.0, -1.0)).norm() < 1e-6);
    }

    #[test]
    fn exceptional_point_outside_box() {
        let err = locate_exceptional_point(
            &fixture(0.0),
            ep_axes((0.0, 0.0), (0.0, 0.5)),
            0.0,
            &EpSearchOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::NotFound(ep) => {
                assert!(!ep.converged);
                assert!((ep.params[1] - 0.5).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
