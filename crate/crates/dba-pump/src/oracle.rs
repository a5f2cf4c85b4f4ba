//! Exact dynamics of the electronic junction in the single-particle picture.
//!
//! Without vibrations the full Hamiltonian (molecule + finite leads) is
//! quadratic, so the one-body correlation matrix C_pq = ⟨a†_q a_p⟩ evolves as
//! C(t) = e^{−iht/ħ} C(0) e^{iht/ħ}. With C(0) diagonal (occupations c_r),
//! C_xy(t) = Σ_r c_r w_x[r] conj(w_y[r]) where w_x = e^{−iht/ħ} e_x, so it is
//! enough to propagate the vectors of the molecular orbitals and of the lead
//! surface vectors σ_J = Σ_k u_k e_k.
//!
//! Index layout: molecular orbitals in register order, then the left lead
//! modes, then the right lead modes.

use faer::Mat;

use crate::bath::fermi;
use crate::error::{Error, Result};
use crate::fock::{Level, OrbitalId};
use crate::linalg::{eigh_real, product};
use crate::model::{lead_modes, JunctionModel, Side, HBAR};
use crate::observables::{trapezoid, RunDiagnostics};
use crate::redfield::{propagate_with, PropagationSettings};
use crate::C64;

/// Largest h for which the dense eigendecomposition route is used by default.
pub const DENSE_LIMIT: usize = 2500;

#[derive(Debug, Clone, PartialEq)]
pub struct SingleParticleLead {
    pub energies: Vec<f64>,
    pub couplings: Vec<f64>,
    pub occupations: Vec<f64>,
    /// Molecular indices of the orbitals this lead couples to.
    pub terminals: Vec<usize>,
    /// Offset of the first mode in the global index.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleParticleSystem {
    pub orbitals: Vec<OrbitalId>,
    /// Molecular block of h.
    pub h_mol: Mat<f64>,
    /// Initial molecular occupations.
    pub mol_occupations: Vec<f64>,
    /// Indexed by `Side::index`.
    pub leads: [SingleParticleLead; 2],
}

impl SingleParticleSystem {
    pub fn n_mol(&self) -> usize {
        self.orbitals.len()
    }

    pub fn dim(&self) -> usize {
        self.n_mol() + self.leads.iter().map(|l| l.energies.len()).sum::<usize>()
    }

    pub fn molecular_indices(&self) -> std::ops::Range<usize> {
        0..self.n_mol()
    }

    pub fn lead_indices(&self, side: Side) -> std::ops::Range<usize> {
        let l = &self.leads[side.index()];
        l.offset..l.offset + l.energies.len()
    }

    /// Diagonal of C(0).
    pub fn initial_occupations(&self) -> Vec<f64> {
        let mut c = self.mol_occupations.clone();
        for l in &self.leads {
            c.extend_from_slice(&l.occupations);
        }
        c
    }

    /// Dense h.
    pub fn hamiltonian(&self) -> Mat<f64> {
        let n = self.dim();
        let m = self.n_mol();
        let mut h = Mat::<f64>::zeros(n, n);
        for j in 0..m {
            for i in 0..m {
                h[(i, j)] = self.h_mol[(i, j)];
            }
        }
        for l in &self.leads {
            for (k, (&e, &u)) in l.energies.iter().zip(&l.couplings).enumerate() {
                let p = l.offset + k;
                h[(p, p)] = e;
                for &t in &l.terminals {
                    h[(p, t)] = u;
                    h[(t, p)] = u;
                }
            }
        }
        h
    }

    pub fn initial_correlation(&self) -> Mat<C64> {
        let c = self.initial_occupations();
        Mat::from_fn(c.len(), c.len(), |i, j| if i == j { C64::new(c[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    /// y = h·x using the arrowhead structure.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let m = self.n_mol();
        for i in 0..m {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..m {
                s += x[j] * self.h_mol[(i, j)];
            }
            y[i] = s;
        }
        for l in &self.leads {
            let xs: C64 = l.terminals.iter().map(|&t| x[t]).sum();
            let mut acc = C64::new(0.0, 0.0);
            for (k, (&e, &u)) in l.energies.iter().zip(&l.couplings).enumerate() {
                let p = l.offset + k;
                y[p] = x[p] * e + xs * u;
                acc += x[p] * u;
            }
            for &t in &l.terminals {
                y[t] += acc;
            }
        }
    }

    /// Surface vector σ_J = Σ_k u_k e_k.
    pub fn surface_vector(&self, side: Side) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        let l = &self.leads[side.index()];
        for (k, &u) in l.couplings.iter().enumerate() {
            v[l.offset + k] = C64::new(u, 0.0);
        }
        v
    }

    /// Interval containing the spectrum of h.
    pub fn spectral_bounds(&self) -> Result<(f64, f64)> {
        let (mol, _) = eigh_real(self.h_mol.as_ref())?;
        let mut lo = mol[0];
        let mut hi = mol[mol.len() - 1];
        let mut w2 = 0.0;
        for l in &self.leads {
            for &e in &l.energies {
                lo = lo.min(e);
                hi = hi.max(e);
            }
            w2 += l.terminals.len() as f64 * l.couplings.iter().map(|u| u * u).sum::<f64>();
        }
        let w = w2.sqrt();
        let pad = 1e-6 * (hi - lo).max(1.0);
        Ok((lo - w - pad, hi + w + pad))
    }
}

pub fn build_single_particle(model: &JunctionModel) -> Result<SingleParticleSystem> {
    if model.vibronic.is_some() {
        return Err(Error::UnsupportedByOracle("the vibronic model is not quadratic".into()));
    }
    model.validate()?;
    let orbitals = model.register();
    let m = orbitals.len();
    let pos = |o: OrbitalId| orbitals.iter().position(|&x| x == o);
    let mut h_mol = Mat::<f64>::zeros(m, m);
    for (i, o) in model.orbitals.iter().enumerate() {
        h_mol[(i, i)] = o.energy;
    }
    use crate::fock::Site;
    for (upper, lower) in [(Site::B, Site::D), (Site::A, Site::B)] {
        for level in [Level::Homo, Level::Lumo] {
            if let (Some(a), Some(b)) = (pos(OrbitalId::new(upper, level)), pos(OrbitalId::new(lower, level))) {
                h_mol[(a, b)] += model.hopping;
                h_mol[(b, a)] += model.hopping;
            }
        }
    }
    let mut offset = m;
    let mut leads = Vec::new();
    for side in Side::BOTH {
        let p = model.lead(side);
        let modes = lead_modes(p);
        let occupations = modes
            .iter()
            .map(|md| fermi(md.energy, p.mu, model.temperature))
            .collect::<Result<Vec<_>>>()?;
        let terminals = (0..m).filter(|&i| orbitals[i].site == side.terminal_site()).collect();
        leads.push(SingleParticleLead {
            energies: modes.iter().map(|md| md.energy).collect(),
            couplings: modes.iter().map(|md| md.coupling).collect(),
            occupations,
            terminals,
            offset,
        });
        offset += modes.len();
    }
    let [l, r]: [SingleParticleLead; 2] = leads.try_into().expect("two leads");
    Ok(SingleParticleSystem {
        orbitals,
        h_mol,
        mol_occupations: model.orbitals.iter().map(|o| if o.occupied { 1.0 } else { 0.0 }).collect(),
        leads: [l, r],
    })
}

/// Eigendecomposition of h, reused across evaluation times.
#[derive(Debug, Clone)]
pub struct ExactEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl ExactEigen {
    pub fn new(sys: &SingleParticleSystem) -> Result<Self> {
        let (values, vectors) = eigh_real(sys.hamiltonian().as_ref())?;
        Ok(ExactEigen { values, vectors })
    }

    /// e^{−iht/ħ}
    pub fn propagator(&self, t: f64) -> Mat<C64> {
        let n = self.values.len();
        let ph: Vec<C64> = self.values.iter().map(|&l| C64::from_polar(1.0, -l * t / HBAR)).collect();
        let u = Mat::from_fn(n, n, |i, j| C64::new(self.vectors[(i, j)], 0.0));
        let ud = Mat::from_fn(n, n, |i, j| u[(i, j)] * ph[j]);
        product(ud.as_ref(), u.transpose())
    }

    /// w = e^{−iht/ħ} x
    pub fn apply_propagator(&self, t: f64, x: &[C64]) -> Vec<C64> {
        let n = self.values.len();
        let mut coef = vec![C64::new(0.0, 0.0); n];
        for (p, c) in coef.iter_mut().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for r in 0..n {
                s += x[r] * self.vectors[(r, p)];
            }
            *c = s * C64::from_polar(1.0, -self.values[p] * t / HBAR);
        }
        (0..n)
            .map(|r| (0..n).map(|p| coef[p] * self.vectors[(r, p)]).sum())
            .collect()
    }
}

/// Dense C(t) = e^{−iht/ħ} C(0) e^{iht/ħ}.
pub fn evolve_exact(sys: &SingleParticleSystem, t: f64) -> Result<Mat<C64>> {
    if sys.dim() > DENSE_LIMIT {
        return Err(Error::Configuration(format!(
            "dense evolution limited to dimension {DENSE_LIMIT}, system has {}",
            sys.dim()
        )));
    }
    let eig = ExactEigen::new(sys)?;
    let u = eig.propagator(t);
    let c0 = sys.initial_correlation();
    Ok(product(product(u.as_ref(), c0.as_ref()).as_ref(), u.adjoint()))
}

/// I_J = −d/dt Σ_{k∈J} C_kk = −(2/ħ) Σ_{k,m} u_k Im C_{mk}, positive into the molecule.
pub fn exact_lead_current(sys: &SingleParticleSystem, c: &Mat<C64>, side: Side) -> f64 {
    let l = &sys.leads[side.index()];
    let mut s = 0.0;
    for &m in &l.terminals {
        for (k, &u) in l.couplings.iter().enumerate() {
            s += u * c[(m, l.offset + k)].im;
        }
    }
    -2.0 * s / HBAR
}

/// d/dt Σ_{m∈mol} C_mm from the equation of motion of C.
pub fn molecular_charge_rate(sys: &SingleParticleSystem, c: &Mat<C64>) -> f64 {
    let h = sys.hamiltonian();
    let n = sys.dim();
    let mut s = C64::new(0.0, 0.0);
    for m in sys.molecular_indices() {
        for r in 0..n {
            s += c[(r, m)] * h[(m, r)] - h[(r, m)] * c[(m, r)];
        }
    }
    (C64::new(0.0, -1.0 / HBAR) * s).re
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactMethod {
    /// Dense eigendecomposition when dim ≤ `DENSE_LIMIT`, Chebyshev otherwise.
    Auto,
    Eigen,
    Chebyshev,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactRecord {
    pub times: Vec<f64>,
    pub current_l: Vec<f64>,
    pub current_r: Vec<f64>,
    /// `populations[o][n]`, molecular orbitals in register order.
    pub populations: Vec<Vec<f64>>,
    pub q_l: f64,
    pub q_r: f64,
    /// Largest deviation of a propagated vector norm from its initial value.
    pub norm_drift: f64,
}

/// J_m(z) for m = 0..len, by backward recurrence normalized with J₀ + 2ΣJ_{2k} = 1.
pub fn bessel_j_sequence(z: f64, tol: f64) -> Vec<f64> {
    if z.abs() < 1e-300 {
        return vec![1.0];
    }
    let start = (z.abs() + 10.0 * z.abs().cbrt() + 40.0).ceil() as usize;
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for m in (1..=start).rev() {
        j[m - 1] = 2.0 * m as f64 / z * j[m] - j[m + 1];
        if j[m - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(m - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in j.iter_mut() {
        *v /= norm;
    }
    let mut len = j.len();
    while len > 1 && j[len - 1].abs() < tol && len > z.abs() as usize + 1 {
        len -= 1;
    }
    j.truncate(len);
    j
}

/// Chebyshev expansion of e^{−ihΔ/ħ} over the spectral interval.
#[derive(Debug, Clone)]
struct Chebyshev {
    center: f64,
    radius: f64,
    coef: Vec<C64>,
    global: C64,
}

impl Chebyshev {
    fn new(lo: f64, hi: f64, delta: f64) -> Self {
        let center = 0.5 * (hi + lo);
        let radius = 0.5 * (hi - lo);
        let j = bessel_j_sequence(radius * delta / HBAR, 1e-18);
        let mi = C64::new(0.0, -1.0);
        let mut p = C64::new(1.0, 0.0);
        let coef = j
            .iter()
            .enumerate()
            .map(|(m, &jm)| {
                let c = p * jm * if m == 0 { 1.0 } else { 2.0 };
                p *= mi;
                c
            })
            .collect();
        Chebyshev {
            center,
            radius,
            coef,
            global: C64::from_polar(1.0, -center * delta / HBAR),
        }
    }

    fn apply(&self, sys: &SingleParticleSystem, v: &mut [C64], work: &mut [Vec<C64>; 3]) {
        let n = v.len();
        let [t0, t1, t2] = work;
        let inv_r = 1.0 / self.radius;
        let c = self.center;
        let scaled = |x: &[C64], y: &mut [C64]| {
            sys.apply(x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = (*yi - xi * c) * inv_r;
            }
        };
        t0.copy_from_slice(v);
        let mut out: Vec<C64> = t0.iter().map(|x| x * self.coef[0]).collect();
        if self.coef.len() > 1 {
            scaled(t0, t1);
            for i in 0..n {
                out[i] += t1[i] * self.coef[1];
            }
        }
        for m in 2..self.coef.len() {
            scaled(t1, t2);
            let cm = self.coef[m];
            for i in 0..n {
                let nv = t2[i] * 2.0 - t0[i];
                t2[i] = nv;
                out[i] += nv * cm;
            }
            std::mem::swap(t0, t1);
            std::mem::swap(t1, t2);
        }
        for (vi, oi) in v.iter_mut().zip(out) {
            *vi = oi * self.global;
        }
    }
}

/// Exact currents and populations on a uniform grid of spacing `dt_sample` up to `t_final`.
pub fn exact_trajectory(
    sys: &SingleParticleSystem,
    t_final: f64,
    dt_sample: f64,
    method: ExactMethod,
) -> Result<ExactRecord> {
    if !(dt_sample > 0.0 && t_final >= dt_sample) {
        return Err(Error::Configuration(format!(
            "need 0 < dt_sample <= t_final, got dt_sample = {dt_sample}, t_final = {t_final}"
        )));
    }
    let method = match method {
        ExactMethod::Auto if sys.dim() <= DENSE_LIMIT => ExactMethod::Eigen,
        ExactMethod::Auto => ExactMethod::Chebyshev,
        m => m,
    };
    let n = sys.dim();
    let m = sys.n_mol();
    let c = sys.initial_occupations();
    // Rows: molecular orbitals, then σ_L, σ_R.
    let mut init: Vec<Vec<C64>> = (0..m)
        .map(|i| {
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[i] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    init.push(sys.surface_vector(Side::Left));
    init.push(sys.surface_vector(Side::Right));
    let norms0: Vec<f64> = init.iter().map(|v| norm(v)).collect();

    let steps = (t_final / dt_sample).round() as usize;
    let mut rec = ExactRecord {
        populations: vec![Vec::new(); m],
        ..Default::default()
    };
    let sample = |t: f64, rows: &[Vec<C64>], rec: &mut ExactRecord| {
        rec.times.push(t);
        for i in 0..m {
            rec.populations[i].push(rows[i].iter().zip(&c).map(|(w, &ci)| ci * w.norm_sqr()).sum());
        }
        for side in Side::BOTH {
            let sig = &rows[m + side.index()];
            let mut s = 0.0;
            for &t in &sys.leads[side.index()].terminals {
                let z: C64 = rows[t].iter().zip(sig).zip(&c).map(|((a, b), &ci)| a * b.conj() * ci).sum();
                s += z.im;
            }
            let cur = -2.0 * s / HBAR;
            match side {
                Side::Left => rec.current_l.push(cur),
                Side::Right => rec.current_r.push(cur),
            }
        }
        rec.norm_drift = rec
            .norm_drift
            .max(rows.iter().zip(&norms0).map(|(v, &n0)| (norm(v) - n0).abs()).fold(0.0, f64::max));
    };

    match method {
        ExactMethod::Eigen | ExactMethod::Auto => {
            let eig = ExactEigen::new(sys)?;
            for s in 0..=steps {
                let t = s as f64 * dt_sample;
                let rows: Vec<Vec<C64>> = init.iter().map(|v| eig.apply_propagator(t, v)).collect();
                sample(t, &rows, &mut rec);
            }
        }
        ExactMethod::Chebyshev => {
            let (lo, hi) = sys.spectral_bounds()?;
            let cheb = Chebyshev::new(lo, hi, dt_sample);
            let mut rows = init;
            let mut work = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
            sample(0.0, &rows, &mut rec);
            for s in 1..=steps {
                for v in rows.iter_mut() {
                    cheb.apply(sys, v, &mut work);
                }
                sample(s as f64 * dt_sample, &rows, &mut rec);
            }
        }
    }
    rec.q_l = trapezoid(&rec.times, &rec.current_l);
    rec.q_r = trapezoid(&rec.times, &rec.current_r);
    Ok(rec)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest relative difference in Q_J the oracle check accepts.
pub const ORACLE_TOL: f64 = 0.15;

/// Matched Redfield and exact runs of one electronic model.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    /// Exact sampling grid; a subset of the Redfield record times.
    pub times: Vec<f64>,
    /// Redfield currents at `times`, indexed by `Side::index`.
    pub redfield_current: [Vec<f64>; 2],
    pub exact_current: [Vec<f64>; 2],
    /// Redfield charges integrated on its own full record.
    pub redfield_q: [f64; 2],
    pub exact_q: [f64; 2],
    /// |Q_redfield − Q_exact| / |Q_exact|, 0 when both vanish.
    pub rel: [f64; 2],
    pub tolerance: f64,
    pub diagnostics: RunDiagnostics,
    pub norm_drift: f64,
}

impl OracleComparison {
    pub fn passed(&self) -> bool {
        self.rel.iter().all(|&r| r <= self.tolerance)
    }
}

/// Runs both propagations; the exact one is sampled every `sample_every` Redfield records.
pub fn compare_with_redfield(
    model: &JunctionModel,
    settings: PropagationSettings,
    sample_every: usize,
    tolerance: f64,
) -> Result<OracleComparison> {
    if sample_every == 0 {
        return Err(Error::Configuration("sample_every must be >= 1".into()));
    }
    let sys = build_single_particle(model)?;
    let space = model.space()?;
    let red = propagate_with(model, &space, settings)?;
    let spacing = settings.dt * settings.record_every as f64;
    let n_samples = (red.times.len() - 1) / sample_every;
    let t_exact = n_samples as f64 * sample_every as f64 * spacing;
    let exact = exact_trajectory(&sys, t_exact, sample_every as f64 * spacing, ExactMethod::Auto)?;
    let idx: Vec<usize> = (0..exact.times.len()).map(|n| n * sample_every).collect();
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let rel = |a: f64, b: f64| {
        if a == b {
            0.0
        } else {
            (a - b).abs() / b.abs()
        }
    };
    Ok(OracleComparison {
        times: exact.times.clone(),
        redfield_current: [pick(&red.current_l), pick(&red.current_r)],
        exact_current: [exact.current_l.clone(), exact.current_r.clone()],
        redfield_q: [red.q_l, red.q_r],
        exact_q: [exact.q_l, exact.q_r],
        rel: [rel(red.q_l, exact.q_l), rel(red.q_r, exact.q_r)],
        tolerance,
        diagnostics: red.diagnostics,
        norm_drift: exact.norm_drift,
    })
}
