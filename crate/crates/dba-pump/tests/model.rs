mod common;

use common::{frob, small_fig2, small_fig4};
use dba_pump::fock::*;
use dba_pump::model::*;
use dba_pump::Error;

#[test]
fn lead_modes_small_n() {
    let one = LeadParams { mu: -0.2, gamma: -1.0, xi: -0.03, n_modes: 1 };
    let m = lead_modes(&one);
    assert!((m[0].energy + 0.2).abs() < 1e-15);
    assert!((m[0].coupling + 0.03).abs() < 1e-15);

    let three = LeadParams { n_modes: 3, ..one };
    let e: Vec<f64> = lead_modes(&three).iter().map(|m| m.energy).collect();
    let r2 = 2f64.sqrt();
    for (a, b) in e.iter().zip([-0.2 - r2, -0.2, -0.2 + r2]) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn coupling_weights_sum_to_xi_squared() {
    for n in 1..=50 {
        let l = LeadParams { mu: 0.0, gamma: -1.0, xi: 1.0, n_modes: n };
        let s: f64 = lead_modes(&l).iter().map(|m| m.coupling * m.coupling).sum();
        assert!((s - 1.0).abs() < 1e-12, "N = {n}: {s}");
    }
}

#[test]
fn lead_modes_symmetric() {
    let l = LeadParams { mu: -0.2, gamma: -1.0, xi: -0.03, n_modes: 41 };
    let m = lead_modes(&l);
    for k in 0..m.len() {
        let j = m.len() - 1 - k;
        assert!((m[k].energy - l.mu + m[j].energy - l.mu).abs() < 1e-12);
        assert!((m[k].coupling - m[j].coupling).abs() < 1e-15);
        assert!(m[k].energy >= l.mu - 2.0 && m[k].energy <= l.mu + 2.0);
    }
}

#[test]
fn lead_params_validation() {
    let l = LeadParams { mu: -0.2, gamma: -1.0, xi: -0.03, n_modes: 0 };
    assert!(matches!(l.validate(), Err(Error::Configuration(_))));
}

#[test]
fn zero_hopping_is_diagonal() {
    let mut m = small_fig2(0.05, 4);
    m.hopping = 0.0;
    let s = m.space().unwrap();
    let h = build_molecular_hamiltonian(&m, &s).unwrap();
    for j in 0..s.dim() {
        let (occ, _) = s.decompose(j);
        let e: f64 = m.orbitals.iter().enumerate().filter(|(i, _)| occ & (1 << i) != 0).map(|(_, o)| o.energy).sum();
        assert!((h.matrix()[(j, j)].re - e).abs() < 1e-15);
        for i in 0..s.dim() {
            if i != j {
                assert_eq!(h.matrix()[(i, j)].norm(), 0.0);
            }
        }
    }
}

#[test]
fn single_particle_lumo_block() {
    let m = small_fig2(0.07, 4);
    let s = m.space().unwrap();
    let h = build_molecular_hamiltonian(&m, &s).unwrap();
    let lumos = [Site::D, Site::B, Site::A].map(|site| s.position(OrbitalId::new(site, Level::Lumo)).unwrap());
    let expect = [[0.0, -0.01, 0.0], [-0.01, 0.07, -0.01], [0.0, -0.01, 0.0]];
    for (a, &pa) in lumos.iter().enumerate() {
        for (b, &pb) in lumos.iter().enumerate() {
            let v = h.matrix()[(s.index(1 << pa, 0), s.index(1 << pb, 0))];
            assert!((v.re - expect[a][b]).abs() < 1e-15 && v.im == 0.0);
        }
    }
}

#[test]
fn hamiltonians_hermitian_and_conserve_charge() {
    for m in [small_fig2(0.05, 4), small_fig4(0.08, 4, 8)] {
        let s = m.space().unwrap();
        let h = build_molecular_hamiltonian(&m, &s).unwrap();
        assert_eq!(h.hermiticity_defect(), 0.0);
        let n = number_operator(&s);
        assert!(frob(h.commutator(&n).unwrap().matrix()) < 1e-12);
    }
}

#[test]
fn vibronic_needs_boson_mode() {
    let m = small_fig4(0.05, 4, 8);
    let s = build_space(&m.register(), 0).unwrap();
    assert!(matches!(build_molecular_hamiltonian(&m, &s), Err(Error::Configuration(_))));
}

#[test]
fn vibronic_parameters() {
    let v = Vibronic::from_reorganization(0.05, 0.06, 15).unwrap();
    assert!((v.lambda - (2.0f64 * 0.06 * 0.05).sqrt()).abs() < 1e-15);
    assert!((v.reorganization() - 0.05).abs() < 1e-15);
    assert!(Vibronic::from_reorganization(-0.01, 0.06, 15).is_err());
    assert!(Vibronic::from_reorganization(0.01, 0.0, 15).is_err());
}

#[test]
fn coupling_operators() {
    let s = build_space(&FULL_REGISTER, 0).unwrap();
    let vl = coupling_operator(&s, Side::Left).unwrap();
    let expect = creator(&s, FULL_REGISTER[0]).unwrap().add(&creator(&s, FULL_REGISTER[1]).unwrap()).unwrap();
    assert_eq!(vl, expect);
    let v3 = vl.mul(&vl).unwrap().mul(&vl).unwrap();
    assert_eq!(frob(v3.matrix()), 0.0);

    let r = build_space(&REDUCED_REGISTER, 3).unwrap();
    let vr = coupling_operator(&r, Side::Right).unwrap();
    assert_eq!(vr, creator(&r, OrbitalId::new(Site::A, Level::Lumo)).unwrap());

    let no_acceptor = build_space(&FULL_REGISTER[..4], 0).unwrap();
    assert!(matches!(coupling_operator(&no_acceptor, Side::Right), Err(Error::Configuration(_))));
}

#[test]
fn initial_density_projectors() {
    for (m, electrons) in [(small_fig2(0.05, 4), 3.0), (small_fig4(0.05, 4, 6), 1.0)] {
        let s = m.space().unwrap();
        let rho = initial_density(&m, &s).unwrap();
        assert_eq!(rho.trace().re, 1.0);
        let r = s.wrap(rho.matrix.clone()).unwrap();
        assert!(frob(&(r.mul(&r).unwrap().matrix() - &rho.matrix)) == 0.0);
        let n = number_operator(&s);
        assert_eq!(r.mul(&n).unwrap().trace().re, electrons);
    }
    let m = small_fig2(0.05, 4);
    let s = m.space().unwrap();
    let rho = initial_density(&m, &s).unwrap();
    let occ = s.index(0b010110, 0);
    assert_eq!(rho.matrix[(occ, occ)].re, 1.0);
}

#[test]
fn presets_are_valid() {
    let f2 = presets::fig2(0.05);
    f2.validate().unwrap();
    assert_eq!(f2.space().unwrap().dim(), 64);
    assert!(f2.lead(Side::Left).recurrence_time() > 1.2 * presets::WINDOW_FS - 1.0);
    let f4 = presets::fig4(0.05).unwrap();
    f4.validate().unwrap();
    assert_eq!(f4.space().unwrap().dim(), 240);
    assert_eq!(modes_for_window(8000.0, -1.0), 14585);
    assert!(LeadParams { mu: 0.0, gamma: -1.0, xi: 0.0, n_modes: 14585 }.recurrence_time() >= 1.2 * 8000.0 - 0.1);
}
