mod common;

use common::{small_fig2, small_fig4};
use dba_pump::fock::{Level, OrbitalId, Site};
use dba_pump::model::Side;
use dba_pump::oracle::*;
use dba_pump::redfield::{propagate, PropagationSettings};
use dba_pump::Error;

#[test]
fn bessel_sequence() {
    let j = bessel_j_sequence(5.0, 1e-18);
    // J_0(5), J_1(5), J_5(5)
    assert!((j[0] + 0.17759677131433830).abs() < 1e-14);
    assert!((j[1] + 0.32757913759146523).abs() < 1e-14);
    assert!((j[5] - 0.26114054612017007).abs() < 1e-14);
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    assert!((norm - 1.0).abs() < 1e-14);
    assert_eq!(bessel_j_sequence(0.0, 1e-18), vec![1.0]);
}

#[test]
fn single_particle_structure() {
    let m = small_fig2(0.05, 20);
    let sys = build_single_particle(&m).unwrap();
    assert_eq!(sys.n_mol(), 6);
    assert_eq!(sys.dim(), 46);
    assert_eq!(sys.lead_indices(Side::Right), 26..46);
    let h = sys.hamiltonian();
    for i in 0..sys.dim() {
        for j in 0..sys.dim() {
            assert_eq!(h[(i, j)], h[(j, i)]);
        }
    }
    // Left lead couples to both donor orbitals, right lead to both acceptor orbitals.
    assert_eq!(sys.leads[0].terminals, vec![0, 1]);
    assert_eq!(sys.leads[1].terminals, vec![4, 5]);
    assert_eq!(sys.mol_occupations, vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
}

#[test]
fn vibronic_model_is_rejected() {
    assert!(matches!(build_single_particle(&small_fig4(0.05, 10, 4)), Err(Error::UnsupportedByOracle(_))));
}

#[test]
fn charge_rate_equals_currents() {
    let m = small_fig2(0.05, 60);
    let sys = build_single_particle(&m).unwrap();
    for t in [3.0, 40.0, 170.0] {
        let c = evolve_exact(&sys, t).unwrap();
        let sum = exact_lead_current(&sys, &c, Side::Left) + exact_lead_current(&sys, &c, Side::Right);
        let rate = molecular_charge_rate(&sys, &c);
        assert!((sum - rate).abs() < 1e-14, "t = {t}: {sum} vs {rate}");
    }
}

#[test]
fn eigen_and_chebyshev_agree() {
    let m = small_fig2(0.05, 150);
    let sys = build_single_particle(&m).unwrap();
    let a = exact_trajectory(&sys, 300.0, 5.0, ExactMethod::Eigen).unwrap();
    let b = exact_trajectory(&sys, 300.0, 5.0, ExactMethod::Chebyshev).unwrap();
    assert_eq!(a.times, b.times);
    for (x, y) in a.current_l.iter().zip(&b.current_l).chain(a.current_r.iter().zip(&b.current_r)) {
        assert!((x - y).abs() < 1e-12);
    }
    for (p, q) in a.populations.iter().zip(&b.populations) {
        for (x, y) in p.iter().zip(q) {
            assert!((x - y).abs() < 1e-11);
        }
    }
    assert!(b.norm_drift < 1e-10);
}

#[test]
fn closed_molecule_matches_many_body() {
    let mut m = small_fig2(0.07, 1);
    m.set_xi(0.0);
    let sys = build_single_particle(&m).unwrap();
    let ex = exact_trajectory(&sys, 800.0, 10.0, ExactMethod::Eigen).unwrap();
    let mb = propagate(&m, &m.space().unwrap(), 800.0, 1.0, 10).unwrap();
    assert_eq!(ex.q_l, 0.0);
    for (o, p) in ex.populations.iter().enumerate() {
        for (n, x) in p.iter().enumerate() {
            assert!((x - mb.populations[o][n]).abs() < 1e-6, "orbital {o} record {n}");
        }
    }
    let a = OrbitalId::new(Site::A, Level::Lumo);
    assert!(mb.population(a).unwrap().iter().any(|&p| p > 0.05));
}

#[test]
fn trajectory_arguments() {
    let sys = build_single_particle(&small_fig2(0.05, 4)).unwrap();
    assert!(exact_trajectory(&sys, 10.0, 0.0, ExactMethod::Auto).is_err());
    assert!(exact_trajectory(&sys, 1.0, 5.0, ExactMethod::Auto).is_err());
    let settings = PropagationSettings { t_final: 20.0, ..Default::default() };
    assert!(compare_with_redfield(&small_fig2(0.05, 4), settings, 0, ORACLE_TOL).is_err());
}

#[test]
fn decoupled_comparison_passes() {
    let mut m = small_fig2(0.05, 1);
    m.set_xi(0.0);
    let settings = PropagationSettings { t_final: 200.0, ..Default::default() };
    let cmp = compare_with_redfield(&m, settings, 5, ORACLE_TOL).unwrap();
    assert_eq!(cmp.rel, [0.0, 0.0]);
    assert!(cmp.passed());
    assert_eq!(cmp.times.len(), 41);
}
