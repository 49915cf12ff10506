use feshbach::model::{ChannelModel, CouplingMatrix, DiscreteSystem, OpenSystem};
use feshbach::oracle::{discretize_full, extract_width};
use feshbach::spectra::{solve_fixed_point, BranchSeed, FixedPointOptions, Tracker};
use feshbach::CVector;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn chain_level() -> OpenSystem {
    OpenSystem::new(
        DiscreteSystem::diagonal(vec![0.0]).unwrap(),
        CouplingMatrix::new(DMatrix::from_element(1, 1, 0.1), 1.0).unwrap(),
        vec![ChannelModel::chain(1.0, 0.0).unwrap()],
        1.0,
    )
    .unwrap()
}

#[test]
fn chain_level_against_full_space() {
    let sys = chain_level();
    let model = discretize_full(&sys, 2000, &[]).unwrap();
    assert_eq!(model.h_full, model.h_full.transpose());
    let weight: f64 = model.bin_weights[0].iter().sum();
    assert!((weight - 1.0).abs() <= 1e-3, "bin weight sum {weight}");

    let spec = model.eigen().unwrap();
    let psi0 = CVector::from_element(1, Complex64::new(1.0, 0.0));
    let fp = solve_fixed_point(
        &sys,
        &BranchSeed { energy: 0.0, tracker: Tracker::Index(0) },
        &FixedPointOptions::default(),
    )
    .unwrap();
    assert!((fp.width - 0.02).abs() < 1e-12);

    let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
    let curve = spec.survival(&psi0, &times).unwrap();
    assert!((curve.probability[0] - 1.0).abs() < 1e-12);
    assert!(curve.probability.iter().all(|p| (0.0..=1.0).contains(p)));
    let fit = extract_width(&curve, (0.2 / fp.width, 2.0 / fp.width)).unwrap();
    assert!((0.019..=0.021).contains(&fit.gamma), "fit {}", fit.gamma);

    let horizon = spec.horizon;
    assert!((horizon - 2.0 * std::f64::consts::PI / 0.002).abs() < 1e-6);
    let late = spec.survival(&psi0, &[horizon]).unwrap().probability[0];
    let ratio = late / (-fp.width * horizon).exp();
    assert!(ratio >= 10.0, "tail ratio {ratio}");

    for t in [0.0, 37.5, 500.0] {
        let psi = spec.evolve(&psi0, t).unwrap();
        assert!((psi.norm_squared() - 1.0).abs() <= 1e-10);
    }
}
