//! Time-dependent Redfield dynamics of the molecular density matrix.
//!
//! This module holds the dense reference forms (eigendecomposition, closed
//! form dissipators, the right-hand side). The production propagator lives in
//! [`engine`].

pub mod engine;

use faer::Mat;

use crate::bath::{CorrelationKind, LeadCorrelation};
use crate::error::{Error, Result};
use crate::fock::ManyBodyOperator;
use crate::linalg::{eigh, product};
use crate::model::{DensityMatrix, HBAR};
use crate::C64;

pub use engine::{propagate, propagate_with, PropagationSettings, Propagator};

/// Relative Frobenius tolerance for accepting an operator as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    pub eigenvectors: Mat<C64>,
}

impl SpectralDecomposition {
    /// U† A U
    pub fn to_eigenbasis(&self, a: &Mat<C64>) -> Mat<C64> {
        let u = self.eigenvectors.as_ref();
        product(product(u.adjoint(), a.as_ref()).as_ref(), u)
    }

    /// U A U†
    pub fn from_eigenbasis(&self, a: &Mat<C64>) -> Mat<C64> {
        let u = self.eigenvectors.as_ref();
        product(product(u, a.as_ref()).as_ref(), u.adjoint())
    }
}

pub fn eigendecompose(h: &ManyBodyOperator) -> Result<SpectralDecomposition> {
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL * h.norm_fro().max(1.0) {
        return Err(Error::InvalidOperator(format!("operator is not Hermitian (‖H − H†‖ = {defect:e})")));
    }
    let (eigenvalues, eigenvectors) = eigh(h.matrix().as_ref())?;
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// η(t; ω) = ∫₀ᵗ e^{−iωτ/ħ} dτ, written as t·e^{−iθ/2}·sinc(θ/2) with θ = ωt/ħ.
pub fn eta(t: f64, omega: f64) -> C64 {
    if omega.abs() < 1e-12 {
        return C64::new(t, 0.0);
    }
    let half = 0.5 * omega * t / HBAR;
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    C64::from_polar(t * sinc, -half)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadDissipators {
    pub f: ManyBodyOperator,
    pub f_tilde: ManyBodyOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipatorSet {
    pub time: f64,
    /// Indexed by `Side::index`.
    pub leads: [LeadDissipators; 2],
}

/// F_J(t) and F̃_J(t) from the per-mode closed form, returned in the computational basis.
pub fn dissipators(
    spec: &SpectralDecomposition,
    v: &ManyBodyOperator,
    lead: &LeadCorrelation,
    t: f64,
) -> Result<LeadDissipators> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("dissipators need t >= 0, got {t}")));
    }
    let n = v.dim();
    if spec.eigenvalues.len() != n {
        return Err(Error::InvalidOperand(format!(
            "spectral decomposition has dimension {}, operator {}",
            spec.eigenvalues.len(),
            n
        )));
    }
    let ve = spec.to_eigenbasis(v.matrix());
    let e = &spec.eigenvalues;
    let scale = 1.0 / (HBAR * HBAR);
    let emit: Vec<(f64, f64)> = (0..lead.modes.len())
        .map(|k| (lead.modes[k].energy, lead.weight(k, CorrelationKind::Emission)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let absorb: Vec<(f64, f64)> = (0..lead.modes.len())
        .map(|k| (lead.modes[k].energy, lead.weight(k, CorrelationKind::Absorption)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let mut fe = Mat::<C64>::zeros(n, n);
    let mut fte = Mat::<C64>::zeros(n, n);
    for b in 0..n {
        for a in 0..n {
            let vdag = ve[(b, a)].conj();
            if vdag != C64::new(0.0, 0.0) {
                let x = e[a] - e[b];
                let g: C64 = emit.iter().map(|&(eps, w)| eta(t, eps + x) * w).sum();
                fe[(a, b)] = vdag * g * scale;
            }
            let vab = ve[(a, b)];
            if vab != C64::new(0.0, 0.0) {
                let x = e[a] - e[b];
                let g: C64 = absorb.iter().map(|&(eps, w)| eta(t, x - eps) * w).sum();
                fte[(a, b)] = vab * g * scale;
            }
        }
    }
    Ok(LeadDissipators {
        f: v.with_matrix(spec.from_eigenbasis(&fe))?,
        f_tilde: v.with_matrix(spec.from_eigenbasis(&fte))?,
    })
}

/// Both leads at time t.
pub fn dissipator_set(
    spec: &SpectralDecomposition,
    v: [&ManyBodyOperator; 2],
    leads: [&LeadCorrelation; 2],
    t: f64,
) -> Result<DissipatorSet> {
    Ok(DissipatorSet {
        time: t,
        leads: [dissipators(spec, v[0], leads[0], t)?, dissipators(spec, v[1], leads[1], t)?],
    })
}

/// X_J = F_J ρ − ρ F̃_J†
pub(crate) fn x_operator(rho: &Mat<C64>, d: &LeadDissipators) -> Mat<C64> {
    let fr = product(d.f.matrix().as_ref(), rho.as_ref());
    let rf = product(rho.as_ref(), d.f_tilde.matrix().adjoint());
    &fr - &rf
}

/// dρ/dt = −(i/ħ)[H, ρ] + Σ_J [X_J, V_J] + h.c.
pub fn rhs(
    rho: &DensityMatrix,
    h: &ManyBodyOperator,
    dissipators: &DissipatorSet,
    v_l: &ManyBodyOperator,
    v_r: &ManyBodyOperator,
) -> Result<Mat<C64>> {
    let n = h.dim();
    for op in [v_l, v_r, &dissipators.leads[0].f, &dissipators.leads[0].f_tilde, &dissipators.leads[1].f, &dissipators.leads[1].f_tilde] {
        h.check_same_space(op)?;
    }
    if rho.matrix.nrows() != n || rho.matrix.ncols() != n {
        return Err(Error::InvalidOperand(format!(
            "density matrix is {}x{}, operators are {n}x{n}",
            rho.matrix.nrows(),
            rho.matrix.ncols()
        )));
    }
    let r = &rho.matrix;
    let mut diss = Mat::<C64>::zeros(n, n);
    for (d, v) in dissipators.leads.iter().zip([v_l, v_r]) {
        let x = x_operator(r, d);
        let xv = product(x.as_ref(), v.matrix().as_ref());
        let vx = product(v.matrix().as_ref(), x.as_ref());
        diss = &diss + &(&xv - &vx);
    }
    let hr = product(h.matrix().as_ref(), r.as_ref());
    let rh = product(r.as_ref(), h.matrix().as_ref());
    let mi = C64::new(0.0, -1.0 / HBAR);
    Ok(Mat::from_fn(n, n, |i, j| mi * (hr[(i, j)] - rh[(i, j)]) + diss[(i, j)] + diss[(j, i)].conj()))
}
