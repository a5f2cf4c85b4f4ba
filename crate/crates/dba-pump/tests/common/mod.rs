#![allow(dead_code)]

use dba_pump::fock::ManyBodyOperator;
use dba_pump::model::{presets, JunctionModel};
use dba_pump::C64;
use faer::Mat;

pub fn frob(m: &Mat<C64>) -> f64 {
    m.norm_l2()
}

pub fn diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    (a - b).norm_l2()
}

pub fn op_diff(a: &ManyBodyOperator, b: &ManyBodyOperator) -> f64 {
    diff(a.matrix(), b.matrix())
}

/// Fig. 2 model with short chains and a short window, for fast tests.
pub fn small_fig2(eps: f64, n_modes: usize) -> JunctionModel {
    let mut m = presets::fig2(eps);
    m.set_n_modes(n_modes);
    m
}

pub fn small_fig4(delta: f64, n_modes: usize, n_vib: usize) -> JunctionModel {
    let mut m = presets::fig4(delta).unwrap();
    m.set_n_modes(n_modes);
    m.vibronic.as_mut().unwrap().levels = n_vib;
    m
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
