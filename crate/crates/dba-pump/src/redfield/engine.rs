//! Block-sparse Redfield propagator.
//!
//! Ĥ_M conserves electron number, so ρ stays block diagonal over number
//! sectors and each V_J maps sector s into s+1. All work happens in the
//! sector eigenbases. The dissipators depend on t only through
//! K(t; x) = (1/ħ²)∫₀ᵗ Σ_k w_k e^{−i(ε_k + x)τ/ħ} dτ evaluated at the Bohr
//! frequencies x that V_J connects; [`DissipatorStream`] accumulates these
//! integrals substep by substep.
//!
//! Time stepping is fourth-order Runge–Kutta in the interaction picture of
//! Ĥ_M: the coherent part is applied exactly as phase factors, the
//! dissipative part by the RK4 stages.

use faer::Mat;

use crate::bath::{CorrelationKind, LeadCorrelation};
use crate::error::{Error, Result};
use crate::fock::{self, FockSpace, ManyBodyOperator};
use crate::linalg::{axpy, eigh, gemm, min_eigenvalue, product, trace, trace_of_product};
use crate::model::{
    build_molecular_hamiltonian, coupling_operator, initial_density, DensityMatrix, JunctionModel,
    Side, HBAR,
};
use crate::observables::{
    decay_floor_met, trapezoid, RunDiagnostics, TransientRecord, DECAY_RATIO, DECAY_WINDOW_FS,
    POSITIVITY_TOL,
};
use crate::quadrature::{gauss_legendre, order_for_oscillation};
use crate::redfield::{DissipatorSet, LeadDissipators};
use crate::C64;

/// Default step in fs.
pub const DEFAULT_DT: f64 = 1.0;
/// Bohr frequencies closer than this (eV) share one integral.
const FREQ_TOL: f64 = 1e-12;
/// Eigenbasis coupling elements below this fraction of the largest are dropped.
const COUPLING_TOL: f64 = 1e-12;
/// Modes whose weight is below this fraction of the largest are dropped.
const WEIGHT_TOL: f64 = 1e-18;
/// Target remainder of each substep quadrature.
const QUAD_TOL: f64 = 1e-16;
/// Mode phases are recomputed from scratch this often (substeps).
const PHASE_RESET: u64 = 64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationSettings {
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    /// End the run early once the decay floor holds.
    pub stop_at_decay_floor: bool,
    pub decay_ratio: f64,
    pub decay_window: f64,
    pub positivity_tol: f64,
    pub trace_tol: f64,
    pub hermiticity_tol: f64,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            t_final: crate::model::presets::WINDOW_FS,
            dt: DEFAULT_DT,
            record_every: 1,
            stop_at_decay_floor: false,
            decay_ratio: DECAY_RATIO,
            decay_window: DECAY_WINDOW_FS,
            positivity_tol: POSITIVITY_TOL,
            trace_tol: 1e-6,
            hermiticity_tol: 1e-8,
        }
    }
}

impl PropagationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Configuration(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(Error::Configuration(format!(
                "t_final must be >= dt, got t_final = {} and dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Configuration("record_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }
}

const LANES: usize = 8;

/// Σ_k w_k e^{−iε_k τ/ħ} at the Gauss nodes of successive substeps, for one weight set.
///
/// Nodes come in mirror pairs about the substep midpoint, so the phase is kept
/// at the midpoint and each pair costs one pass over the modes.
#[derive(Debug, Clone)]
struct OscillatorSum {
    energies: Vec<f64>,
    /// e^{−iε_k t_mid/ħ}.
    phase_re: Vec<f64>,
    phase_im: Vec<f64>,
    step_re: Vec<f64>,
    step_im: Vec<f64>,
    /// w_k cos θ_kp and −w_k sin θ_kp with θ_kp = ε_k·h·z_p/(2ħ), one row per pair.
    wx: Vec<Vec<f64>>,
    wy: Vec<Vec<f64>>,
    /// w_k, for the middle node of odd rules.
    w: Vec<f64>,
}

impl OscillatorSum {
    fn new(energies: Vec<f64>, mut w: Vec<f64>, half_nodes: &[f64], h: f64) -> Self {
        let mut energies = energies;
        while energies.len() % LANES != 0 {
            energies.push(0.0);
            w.push(0.0);
        }
        let polar = |e: f64, d: f64| C64::from_polar(1.0, -e * d / HBAR);
        let row = |z: f64, f: fn(C64) -> f64| energies.iter().zip(&w).map(|(&e, &wk)| wk * f(polar(e, 0.5 * h * z))).collect();
        let wx = half_nodes.iter().map(|&z| row(z, |c| c.re)).collect();
        let wy = half_nodes.iter().map(|&z| row(z, |c| c.im)).collect();
        let m = energies.len();
        OscillatorSum {
            phase_re: vec![0.0; m],
            phase_im: vec![0.0; m],
            step_re: energies.iter().map(|&e| polar(e, h).re).collect(),
            step_im: energies.iter().map(|&e| polar(e, h).im).collect(),
            energies,
            wx,
            wy,
            w,
        }
    }

    fn reset(&mut self, t_mid: f64) {
        for k in 0..self.energies.len() {
            let p = C64::from_polar(1.0, -self.energies[k] * t_mid / HBAR);
            self.phase_re[k] = p.re;
            self.phase_im[k] = p.im;
        }
    }

    /// Writes unscaled node sums in ascending node order.
    fn sums(&self, out: &mut [C64]) {
        let n = self.energies.len();
        let q = out.len();
        let (pa, pb) = (&self.phase_re[..n], &self.phase_im[..n]);
        for (p, (wx, wy)) in self.wx.iter().zip(&self.wy).enumerate() {
            let (wx, wy) = (&wx[..n], &wy[..n]);
            let mut acc = [[0.0f64; LANES]; 4];
            for c in 0..n / LANES {
                for l in 0..LANES {
                    let k = c * LANES + l;
                    acc[0][l] += pa[k] * wx[k];
                    acc[1][l] += pb[k] * wy[k];
                    acc[2][l] += pa[k] * wy[k];
                    acc[3][l] += pb[k] * wx[k];
                }
            }
            let [a, b, c, d] = acc.map(|v| v.iter().sum::<f64>());
            out[q - 1 - p] = C64::new(a - b, c + d);
            out[p] = C64::new(a + b, d - c);
        }
        if q % 2 == 1 {
            let w = &self.w[..n];
            let mut acc = [[0.0f64; LANES]; 2];
            for c in 0..n / LANES {
                for l in 0..LANES {
                    let k = c * LANES + l;
                    acc[0][l] += pa[k] * w[k];
                    acc[1][l] += pb[k] * w[k];
                }
            }
            let [a, b] = acc.map(|v| v.iter().sum::<f64>());
            out[q / 2] = C64::new(a, b);
        }
    }

    fn advance(&mut self) {
        for k in 0..self.energies.len() {
            let (pr, pi) = (self.phase_re[k], self.phase_im[k]);
            let (sr, si) = (self.step_re[k], self.step_im[k]);
            self.phase_re[k] = pr * sr - pi * si;
            self.phase_im[k] = pr * si + pi * sr;
        }
    }

    fn max_energy(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }
}

/// Σ_k w_k e^{−iε_k τ/ħ} with the emission and absorption weight sets, sampled
/// at the Gauss nodes of successive substeps of length h.
#[derive(Debug, Clone)]
pub struct CorrelationSampler {
    h: f64,
    substeps: u64,
    emit: OscillatorSum,
    absorb: OscillatorSum,
    active: usize,
    offsets: Vec<f64>,
    /// Gauss weights scaled by h/(2ħ²).
    weights: Vec<f64>,
    s_emit: Vec<C64>,
    s_abs: Vec<C64>,
}

impl CorrelationSampler {
    /// Modes of negligible weight are dropped; the node count is `order`.
    pub fn new(corr: &LeadCorrelation, order: usize, h: f64) -> Self {
        let n = corr.modes.len();
        let we: Vec<f64> = (0..n).map(|k| corr.weight(k, CorrelationKind::Emission)).collect();
        let wa: Vec<f64> = (0..n).map(|k| corr.weight(k, CorrelationKind::Absorption)).collect();
        let wmax = we.iter().chain(wa.iter()).cloned().fold(0.0, f64::max);
        let floor = wmax * WEIGHT_TOL;
        let keep = |w: &[f64]| -> (Vec<f64>, Vec<f64>) {
            (0..n).filter(|&k| w[k] > floor).map(|k| (corr.modes[k].energy, w[k])).unzip()
        };
        let (ee, ew) = keep(&we);
        let (ae, aw) = keep(&wa);
        let active = (0..n).filter(|&k| we[k] > floor || wa[k] > floor).count();
        let (z, g) = gauss_legendre(order);
        let half: Vec<f64> = z[order.div_ceil(2)..].iter().rev().cloned().collect();
        let offsets = z.iter().map(|z| 0.5 * h * (1.0 + z)).collect();
        let weights = g.iter().map(|g| 0.5 * h * g / (HBAR * HBAR)).collect();
        CorrelationSampler {
            h,
            substeps: 0,
            emit: OscillatorSum::new(ee, ew, &half, h),
            absorb: OscillatorSum::new(ae, aw, &half, h),
            active,
            offsets,
            weights,
            s_emit: vec![ZERO; order],
            s_abs: vec![ZERO; order],
        }
    }

    /// Order needed for substeps of length h given the largest mode and Bohr frequency magnitudes.
    pub fn order_for(max_energy: f64, max_freq: f64, h: f64) -> usize {
        order_for_oscillation((max_energy + max_freq) * h / (2.0 * HBAR), QUAD_TOL)
    }

    pub fn max_energy(&self) -> f64 {
        self.emit.max_energy().max(self.absorb.max_energy())
    }

    pub fn time(&self) -> f64 {
        self.substeps as f64 * self.h
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn active_modes(&self) -> usize {
        self.active
    }

    /// Weighted node sums for the substep starting at `time()`, then moves to the next substep.
    pub fn sample(&mut self) -> (&[C64], &[C64]) {
        if self.substeps % PHASE_RESET == 0 {
            let t_mid = self.time() + 0.5 * self.h;
            self.emit.reset(t_mid);
            self.absorb.reset(t_mid);
        }
        self.emit.sums(&mut self.s_emit);
        self.absorb.sums(&mut self.s_abs);
        for (q, &g) in self.weights.iter().enumerate() {
            self.s_emit[q] *= g;
            self.s_abs[q] *= g;
        }
        self.emit.advance();
        self.absorb.advance();
        self.substeps += 1;
        (&self.s_emit, &self.s_abs)
    }
}

/// Running K(t; x_i) at a fixed set of Bohr frequencies, fed by a [`CorrelationSampler`].
///
/// `emission()[i]` is (1/ħ²)∫₀ᵗ C(τ) e^{−i x_i τ/ħ} dτ. `absorption()[i]` is
/// the same integral with weights u²f; the absorption dissipator integral at
/// Bohr frequency −x_i is its complex conjugate.
#[derive(Debug, Clone)]
pub struct FrequencyIntegrals {
    freqs: Vec<f64>,
    /// e^{−i x_i (τ_q − t)/ħ}, row-major over (i, q).
    node_phase: Vec<C64>,
    order: usize,
    k_emit: Vec<C64>,
    k_abs: Vec<C64>,
}

impl FrequencyIntegrals {
    pub fn new(freqs: Vec<f64>, offsets: &[f64]) -> Self {
        let node_phase = freqs
            .iter()
            .flat_map(|&x| offsets.iter().map(move |&d| C64::from_polar(1.0, -x * d / HBAR)))
            .collect();
        let n = freqs.len();
        FrequencyIntegrals {
            freqs,
            node_phase,
            order: offsets.len(),
            k_emit: vec![ZERO; n],
            k_abs: vec![ZERO; n],
        }
    }

    /// Adds the substep [t0, t0 + h] given the sampler's node sums.
    pub fn accumulate(&mut self, t0: f64, s_emit: &[C64], s_abs: &[C64]) {
        let q = self.order;
        for i in 0..self.freqs.len() {
            let base = C64::from_polar(1.0, -self.freqs[i] * t0 / HBAR);
            let row = &self.node_phase[i * q..(i + 1) * q];
            let (mut ae, mut aa) = (ZERO, ZERO);
            for j in 0..q {
                ae += s_emit[j] * row[j];
                aa += s_abs[j] * row[j];
            }
            self.k_emit[i] += base * ae;
            self.k_abs[i] += base * aa;
        }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    pub fn emission(&self) -> &[C64] {
        &self.k_emit
    }

    pub fn absorption(&self) -> &[C64] {
        &self.k_abs
    }
}

/// One lead's sampler and frequency integrals together.
#[derive(Debug, Clone)]
pub struct DissipatorStream {
    pub sampler: CorrelationSampler,
    pub integrals: FrequencyIntegrals,
}

impl DissipatorStream {
    pub fn new(corr: &LeadCorrelation, freqs: Vec<f64>, h: f64) -> Self {
        let probe = CorrelationSampler::new(corr, 1, h);
        let x_max = freqs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let order = CorrelationSampler::order_for(probe.max_energy(), x_max, h);
        let sampler = CorrelationSampler::new(corr, order, h);
        let integrals = FrequencyIntegrals::new(freqs, sampler.offsets());
        DissipatorStream { sampler, integrals }
    }

    pub fn time(&self) -> f64 {
        self.sampler.time()
    }

    pub fn advance(&mut self) {
        let t0 = self.sampler.time();
        let (e, a) = self.sampler.sample();
        self.integrals.accumulate(t0, e, a);
    }

    pub fn emission(&self) -> &[C64] {
        self.integrals.emission()
    }

    pub fn absorption(&self) -> &[C64] {
        self.integrals.absorption()
    }
}

#[derive(Debug, Clone)]
struct Sector {
    indices: Vec<usize>,
    energies: Vec<f64>,
    vectors: Mat<C64>,
}

impl Sector {
    fn len(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone)]
struct LeadBlocks {
    /// V^{(s+1,s)} in the eigenbases, n_{s+1} × n_s.
    v: Vec<Mat<C64>>,
    /// Frequency index per element of `v` (column-major), `u32::MAX` when the element is dropped.
    freq: Vec<Vec<u32>>,
    /// A^{(s)} = F^{(s,s+1)}, n_s × n_{s+1}.
    a: Vec<Mat<C64>>,
    /// B^{(s)} = (F̃^{(s+1,s)})†, n_s × n_{s+1}.
    b: Vec<Mat<C64>>,
    integrals: FrequencyIntegrals,
    /// Index into `Propagator::samplers`.
    sampler: usize,
}

impl LeadBlocks {
    fn assemble(&mut self) {
        let ke = self.integrals.emission();
        let ka = self.integrals.absorption();
        for s in 0..self.v.len() {
            let v = &self.v[s];
            let (rows, cols) = (v.nrows(), v.ncols());
            let a = &mut self.a[s];
            let b = &mut self.b[s];
            for j in 0..cols {
                for i in 0..rows {
                    let f = self.freq[s][j * rows + i];
                    let (x, y) = if f == u32::MAX {
                        (ZERO, ZERO)
                    } else {
                        let c = v[(i, j)].conj();
                        (c * ke[f as usize], c * ka[f as usize])
                    };
                    a[(j, i)] = x;
                    b[(j, i)] = y;
                }
            }
        }
    }
}

/// Sorted representatives of `xs`, merging values closer than `FREQ_TOL`.
fn cluster(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    let mut reps: Vec<f64> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for x in xs {
        if x - last > FREQ_TOL {
            reps.push(x);
        }
        last = x;
    }
    reps
}

fn nearest(reps: &[f64], x: f64) -> usize {
    let p = reps.partition_point(|&r| r <= x);
    if p == 0 {
        0
    } else if p == reps.len() || x - reps[p - 1] <= reps[p] - x {
        p - 1
    } else {
        p
    }
}

/// Outputs of one dissipator evaluation.
#[derive(Debug, Clone, Copy, Default)]
struct Flux {
    currents: [f64; 2],
    /// tr(N·D) where D is the dissipative derivative.
    dq: f64,
}

/// Stepwise Redfield propagation of one model.
#[derive(Debug, Clone)]
pub struct Propagator {
    space: FockSpace,
    settings: PropagationSettings,
    hamiltonian: ManyBodyOperator,
    couplings: [ManyBodyOperator; 2],
    sectors: Vec<Sector>,
    leads: [LeadBlocks; 2],
    samplers: Vec<CorrelationSampler>,
    rho: Vec<Mat<C64>>,
    phase_half: Vec<Mat<C64>>,
    phase_full: Vec<Mat<C64>>,
    orbital_numbers: Vec<Vec<Mat<C64>>>,
    boson_number: Option<Vec<Mat<C64>>>,
    step: usize,
    n_modes: [usize; 2],
    recurrence: [f64; 2],
}

fn extract_blocks(m: &Mat<C64>, sectors: &[Sector], what: &str, offset: usize) -> Result<Vec<Mat<C64>>> {
    // Blocks (s + offset, s); every other element must vanish.
    let n = m.nrows();
    let mut owner = vec![0usize; n];
    for (s, sec) in sectors.iter().enumerate() {
        for &i in &sec.indices {
            owner[i] = s;
        }
    }
    for j in 0..n {
        for i in 0..n {
            if owner[i] != owner[j] + offset && m[(i, j)] != ZERO {
                return Err(Error::InvalidOperator(format!(
                    "{what} couples number sectors {} and {}",
                    owner[j], owner[i]
                )));
            }
        }
    }
    Ok((0..sectors.len().saturating_sub(offset))
        .map(|s| {
            let (rows, cols) = (&sectors[s + offset].indices, &sectors[s].indices);
            Mat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
        })
        .collect())
}

fn rotate(sectors: &[Sector], s_out: usize, s_in: usize, block: &Mat<C64>) -> Mat<C64> {
    let ul = sectors[s_out].vectors.as_ref();
    let ur = sectors[s_in].vectors.as_ref();
    product(product(ul.adjoint(), block.as_ref()).as_ref(), ur)
}

fn phases(sec: &Sector, h: f64) -> Mat<C64> {
    let p: Vec<C64> = sec.energies.iter().map(|&e| C64::from_polar(1.0, -e * h / HBAR)).collect();
    Mat::from_fn(sec.len(), sec.len(), |a, b| p[a] * p[b].conj())
}

fn hadamard(p: &Mat<C64>, x: &Mat<C64>, out: &mut Mat<C64>) {
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            out[(i, j)] = p[(i, j)] * x[(i, j)];
        }
    }
}

impl Propagator {
    pub fn new(model: &JunctionModel, space: &FockSpace, settings: PropagationSettings) -> Result<Self> {
        model.validate()?;
        settings.validate()?;
        let hamiltonian = build_molecular_hamiltonian(model, space)?;
        let couplings = [coupling_operator(space, Side::Left)?, coupling_operator(space, Side::Right)?];

        let mut sectors = Vec::new();
        for indices in space.sectors() {
            let hs = Mat::from_fn(indices.len(), indices.len(), |i, j| {
                hamiltonian.matrix()[(indices[i], indices[j])]
            });
            let (energies, vectors) = eigh(hs.as_ref())?;
            sectors.push(Sector { indices, energies, vectors });
        }
        extract_blocks(hamiltonian.matrix(), &sectors, "Hamiltonian", 0)?;

        let h_sub = 0.5 * settings.dt;
        let mut raw_leads = Vec::new();
        for side in Side::BOTH {
            let raw = extract_blocks(couplings[side.index()].matrix(), &sectors, "coupling operator", 1)?;
            let v: Vec<Mat<C64>> = raw.iter().enumerate().map(|(s, b)| rotate(&sectors, s + 1, s, b)).collect();
            let vmax = v.iter().flat_map(|b| (0..b.ncols()).flat_map(move |j| (0..b.nrows()).map(move |i| b[(i, j)].norm()))).fold(0.0, f64::max);
            let keep = vmax * COUPLING_TOL;
            let mut xs = Vec::new();
            for (s, b) in v.iter().enumerate() {
                for j in 0..b.ncols() {
                    for i in 0..b.nrows() {
                        if b[(i, j)].norm() > keep {
                            xs.push(sectors[s].energies[j] - sectors[s + 1].energies[i]);
                        }
                    }
                }
            }
            let reps = cluster(xs);
            let freq = v
                .iter()
                .enumerate()
                .map(|(s, b)| {
                    let rows = b.nrows();
                    (0..b.ncols() * rows)
                        .map(|idx| {
                            let (i, j) = (idx % rows, idx / rows);
                            if b[(i, j)].norm() > keep {
                                nearest(&reps, sectors[s].energies[j] - sectors[s + 1].energies[i]) as u32
                            } else {
                                u32::MAX
                            }
                        })
                        .collect()
                })
                .collect();
            raw_leads.push((v, freq, reps));
        }
        // Identical leads share one sampler.
        let corrs = [
            LeadCorrelation::new(model.lead(Side::Left), model.temperature)?,
            LeadCorrelation::new(model.lead(Side::Right), model.temperature)?,
        ];
        let shared = model.lead(Side::Left) == model.lead(Side::Right);
        let max_energy = corrs
            .iter()
            .map(|c| CorrelationSampler::new(c, 1, h_sub).max_energy())
            .fold(0.0, f64::max);
        let max_freq = raw_leads
            .iter()
            .flat_map(|(_, _, r)| r.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let order = CorrelationSampler::order_for(max_energy, max_freq, h_sub);
        let mut samplers = vec![CorrelationSampler::new(&corrs[0], order, h_sub)];
        if !shared {
            samplers.push(CorrelationSampler::new(&corrs[1], order, h_sub));
        }
        let mut leads = Vec::new();
        for (j, (v, freq, reps)) in raw_leads.into_iter().enumerate() {
            let sampler = if shared { 0 } else { j };
            let integrals = FrequencyIntegrals::new(reps, samplers[sampler].offsets());
            let a = v.iter().map(|b| Mat::zeros(b.ncols(), b.nrows())).collect();
            let b = v.iter().map(|b| Mat::zeros(b.ncols(), b.nrows())).collect();
            leads.push(LeadBlocks { v, freq, a, b, integrals, sampler });
        }
        let leads: [LeadBlocks; 2] = leads.try_into().expect("two leads");

        let rho0 = initial_density(model, space)?;
        let rho = extract_blocks(&rho0.matrix, &sectors, "initial density", 0)?
            .iter()
            .enumerate()
            .map(|(s, b)| rotate(&sectors, s, s, b))
            .collect();

        let in_sectors = |op: &ManyBodyOperator| -> Result<Vec<Mat<C64>>> {
            Ok(extract_blocks(op.matrix(), &sectors, "number operator", 0)?
                .iter()
                .enumerate()
                .map(|(s, b)| rotate(&sectors, s, s, b))
                .collect())
        };
        let orbital_numbers = space
            .register()
            .iter()
            .map(|&o| in_sectors(&fock::orbital_number(space, o)?))
            .collect::<Result<Vec<_>>>()?;
        let boson_number = if space.boson_levels() >= 2 {
            Some(in_sectors(&fock::boson_number(space)?)?)
        } else {
            None
        };

        let phase_half = sectors.iter().map(|s| phases(s, 0.5 * settings.dt)).collect();
        let phase_full = sectors.iter().map(|s| phases(s, settings.dt)).collect();
        let mut p = Propagator {
            space: space.clone(),
            settings,
            hamiltonian,
            couplings,
            sectors,
            leads,
            samplers,
            rho,
            phase_half,
            phase_full,
            orbital_numbers,
            boson_number,
            step: 0,
            n_modes: [model.lead(Side::Left).n_modes, model.lead(Side::Right).n_modes],
            recurrence: [model.lead(Side::Left).recurrence_time(), model.lead(Side::Right).recurrence_time()],
        };
        for l in &mut p.leads {
            l.assemble();
        }
        Ok(p)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.settings.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn settings(&self) -> &PropagationSettings {
        &self.settings
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn hamiltonian(&self) -> &ManyBodyOperator {
        &self.hamiltonian
    }

    pub fn coupling(&self, side: Side) -> &ManyBodyOperator {
        &self.couplings[side.index()]
    }

    /// Number of distinct Bohr frequencies integrated for a lead.
    pub fn frequency_count(&self, side: Side) -> usize {
        self.leads[side.index()].integrals.frequencies().len()
    }

    pub fn integrals(&self, side: Side) -> &FrequencyIntegrals {
        &self.leads[side.index()].integrals
    }

    pub fn sampler(&self, side: Side) -> &CorrelationSampler {
        &self.samplers[self.leads[side.index()].sampler]
    }

    /// Current state in the computational basis.
    pub fn density(&self) -> DensityMatrix {
        let n = self.space.dim();
        let mut m = Mat::<C64>::zeros(n, n);
        for (sec, r) in self.sectors.iter().zip(&self.rho) {
            let u = sec.vectors.as_ref();
            let c = product(product(u, r.as_ref()).as_ref(), u.adjoint());
            for j in 0..sec.len() {
                for i in 0..sec.len() {
                    m[(sec.indices[i], sec.indices[j])] = c[(i, j)];
                }
            }
        }
        DensityMatrix { matrix: m, time: self.time() }
    }

    /// F_J, F̃_J at the current time, in the computational basis.
    pub fn dissipator_set(&self) -> Result<DissipatorSet> {
        let n = self.space.dim();
        let mut out = Vec::new();
        for (l, v) in self.leads.iter().zip(&self.couplings) {
            let mut f = Mat::<C64>::zeros(n, n);
            let mut ft = Mat::<C64>::zeros(n, n);
            for s in 0..l.v.len() {
                let (lo, hi) = (&self.sectors[s], &self.sectors[s + 1]);
                let fa = product(product(lo.vectors.as_ref(), l.a[s].as_ref()).as_ref(), hi.vectors.adjoint());
                let fb = product(product(hi.vectors.as_ref(), l.b[s].adjoint()).as_ref(), lo.vectors.adjoint());
                for j in 0..hi.len() {
                    for i in 0..lo.len() {
                        f[(lo.indices[i], hi.indices[j])] = fa[(i, j)];
                        ft[(hi.indices[j], lo.indices[i])] = fb[(j, i)];
                    }
                }
            }
            out.push(LeadDissipators { f: v.with_matrix(f)?, f_tilde: v.with_matrix(ft)? });
        }
        let [l, r]: [LeadDissipators; 2] = out.try_into().expect("two leads");
        Ok(DissipatorSet { time: self.time(), leads: [l, r] })
    }

    /// Dissipative derivative D(ρ) = Σ_J [X_J, V_J] + h.c. at the assembled time.
    fn dissipative(&self, rho: &[Mat<C64>], out: &mut [Mat<C64>]) -> Flux {
        let mut flux = Flux::default();
        for y in out.iter_mut() {
            y.fill(ZERO);
        }
        for (j, l) in self.leads.iter().enumerate() {
            for s in 0..l.v.len() {
                let (ns, nt) = (self.sectors[s].len(), self.sectors[s + 1].len());
                let mut x = Mat::<C64>::zeros(ns, nt);
                gemm(x.as_mut(), false, l.a[s].as_ref(), rho[s + 1].as_ref(), ONE);
                gemm(x.as_mut(), true, rho[s].as_ref(), l.b[s].as_ref(), -ONE);
                flux.currents[j] -= 2.0 * trace_of_product(x.as_ref(), l.v[s].as_ref()).re;
                let (lo, hi) = out.split_at_mut(s + 1);
                gemm(lo[s].as_mut(), true, x.as_ref(), l.v[s].as_ref(), ONE);
                gemm(hi[0].as_mut(), true, l.v[s].as_ref(), x.as_ref(), -ONE);
            }
        }
        for (s, y) in out.iter_mut().enumerate() {
            let n = y.nrows();
            for j in 0..n {
                for i in 0..=j {
                    let v = y[(i, j)] + y[(j, i)].conj();
                    y[(i, j)] = v;
                    y[(j, i)] = v.conj();
                }
            }
            flux.dq += s as f64 * trace(y.as_ref()).re;
        }
        flux
    }

    fn zeros_like(&self) -> Vec<Mat<C64>> {
        self.sectors.iter().map(|s| Mat::zeros(s.len(), s.len())).collect()
    }

    fn advance_streams(&mut self) {
        for (i, sampler) in self.samplers.iter_mut().enumerate() {
            let t0 = sampler.time();
            let (e, a) = sampler.sample();
            for l in self.leads.iter_mut().filter(|l| l.sampler == i) {
                l.integrals.accumulate(t0, e, a);
            }
        }
        for l in &mut self.leads {
            l.assemble();
        }
    }

    /// Currents and charge-balance residual for the current state.
    pub fn currents(&self) -> ([f64; 2], f64) {
        let mut d = self.zeros_like();
        let f = self.dissipative(&self.rho, &mut d);
        (f.currents, (f.dq - f.currents[0] - f.currents[1]).abs())
    }

    /// Advances one step of length dt.
    pub fn step(&mut self) -> Result<()> {
        let mut d1 = self.zeros_like();
        self.dissipative(&self.rho.clone(), &mut d1);
        self.step_with(d1)
    }

    fn step_with(&mut self, d1: Vec<Mat<C64>>) -> Result<()> {
        let h = self.settings.dt;
        let ns = self.sectors.len();
        let half = 0.5 * h;
        let mut stage = self.zeros_like();
        let mut d2 = self.zeros_like();
        let mut d3 = self.zeros_like();
        let mut d4 = self.zeros_like();

        self.advance_streams();
        for s in 0..ns {
            let t = axpy(&self.rho[s], half, &d1[s]);
            hadamard(&self.phase_half[s], &t, &mut stage[s]);
        }
        self.dissipative(&stage, &mut d2);
        let mut prho_half = self.zeros_like();
        for s in 0..ns {
            hadamard(&self.phase_half[s], &self.rho[s], &mut prho_half[s]);
            stage[s] = axpy(&prho_half[s], half, &d2[s]);
        }
        self.dissipative(&stage, &mut d3);
        self.advance_streams();
        let mut tmp = self.zeros_like();
        let mut prho_full = self.zeros_like();
        for s in 0..ns {
            hadamard(&self.phase_full[s], &self.rho[s], &mut prho_full[s]);
            hadamard(&self.phase_half[s], &d3[s], &mut tmp[s]);
            stage[s] = axpy(&prho_full[s], h, &tmp[s]);
        }
        self.dissipative(&stage, &mut d4);
        let sixth = h / 6.0;
        for s in 0..ns {
            let mut e1 = Mat::zeros(d1[s].nrows(), d1[s].ncols());
            hadamard(&self.phase_full[s], &d1[s], &mut e1);
            let mid = &d2[s] + &d3[s];
            hadamard(&self.phase_half[s], &mid, &mut tmp[s]);
            let incr = &axpy(&e1, 2.0, &tmp[s]) + &d4[s];
            self.rho[s] = axpy(&prho_full[s], sixth, &incr);
        }
        self.step += 1;

        let tr_err = (self.trace() - 1.0).abs();
        if !(tr_err <= self.settings.trace_tol) {
            return Err(Error::NumericalInstability {
                step: self.step,
                time: self.time(),
                reason: format!("trace drift {tr_err:e} exceeds {:e}", self.settings.trace_tol),
            });
        }
        let herm = self.hermiticity_error();
        if !(herm <= self.settings.hermiticity_tol) {
            return Err(Error::NumericalInstability {
                step: self.step,
                time: self.time(),
                reason: format!("Hermiticity drift {herm:e} exceeds {:e}", self.settings.hermiticity_tol),
            });
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        self.rho.iter().map(|r| trace(r.as_ref()).re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.rho
            .iter()
            .map(|r| crate::linalg::hermiticity_defect(r.as_ref()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// ⟨d†d⟩ per register orbital.
    pub fn populations(&self) -> Vec<f64> {
        self.orbital_numbers
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .zip(&self.rho)
                    .map(|(n, r)| trace_of_product(r.as_ref(), n.as_ref()).re)
                    .sum()
            })
            .collect()
    }

    pub fn boson_occupation(&self) -> Option<f64> {
        self.boson_number.as_ref().map(|blocks| {
            blocks
                .iter()
                .zip(&self.rho)
                .map(|(n, r)| trace_of_product(r.as_ref(), n.as_ref()).re)
                .sum()
        })
    }

    /// Smallest eigenvalue of ρ.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut m = f64::INFINITY;
        for r in &self.rho {
            m = m.min(min_eigenvalue(r.as_ref())?);
        }
        Ok(m)
    }

    /// Runs to `t_final` (or to the decay floor when enabled), recording along the way.
    pub fn run(mut self) -> Result<TransientRecord> {
        let n_steps = self.settings.n_steps();
        let every = self.settings.record_every;
        let mut rec = TransientRecord {
            orbitals: self.space.register().to_vec(),
            populations: vec![Vec::new(); self.space.n_orbitals()],
            boson_occupation: self.boson_number.as_ref().map(|_| Vec::new()),
            ..Default::default()
        };
        let mut diag = RunDiagnostics {
            dt: self.settings.dt,
            n_modes: self.n_modes,
            min_eigenvalue: f64::INFINITY,
            ..Default::default()
        };
        let mut d1 = self.zeros_like();
        loop {
            let flux = self.dissipative(&self.rho, &mut d1);
            let n = self.step;
            if n % every == 0 || n == n_steps {
                let t = self.time();
                rec.times.push(t);
                rec.current_l.push(flux.currents[0]);
                rec.current_r.push(flux.currents[1]);
                for (p, v) in rec.populations.iter_mut().zip(self.populations()) {
                    p.push(v);
                }
                if let (Some(b), Some(v)) = (rec.boson_occupation.as_mut(), self.boson_occupation()) {
                    b.push(v);
                }
                let te = (self.trace() - 1.0).abs();
                let he = self.hermiticity_error();
                let cb = (flux.dq - flux.currents[0] - flux.currents[1]).abs();
                let me = self.min_eigenvalue()?;
                rec.trace_error.push(te);
                rec.hermiticity_error.push(he);
                rec.charge_balance_error.push(cb);
                rec.min_rho_eigenvalue.push(me);
                diag.max_trace_drift = diag.max_trace_drift.max(te);
                diag.max_hermiticity_drift = diag.max_hermiticity_drift.max(he);
                diag.max_charge_balance_error = diag.max_charge_balance_error.max(cb);
                diag.min_eigenvalue = diag.min_eigenvalue.min(me);
                if me < -self.settings.positivity_tol {
                    diag.positivity_warnings += 1;
                }
                if self.settings.stop_at_decay_floor
                    && rec.times.len() % 32 == 0
                    && decay_floor_met(
                        &rec.times,
                        [&rec.current_l, &rec.current_r],
                        self.settings.decay_ratio,
                        self.settings.decay_window,
                    )
                {
                    break;
                }
            }
            if n == n_steps {
                break;
            }
            let d = std::mem::replace(&mut d1, self.zeros_like());
            self.step_with(d)?;
        }
        diag.steps = self.step;
        diag.t_final = self.time();
        diag.recurrence_free = self.recurrence.iter().all(|&r| r > diag.t_final);
        diag.decay_floor_met = decay_floor_met(
            &rec.times,
            [&rec.current_l, &rec.current_r],
            self.settings.decay_ratio,
            self.settings.decay_window,
        );
        diag.initial_charge = rec.charge(0);
        diag.final_charge = rec.charge(rec.times.len() - 1);
        rec.q_l = trapezoid(&rec.times, &rec.current_l);
        rec.q_r = trapezoid(&rec.times, &rec.current_r);
        rec.diagnostics = diag;
        Ok(rec)
    }
}

/// Fixed-window propagation with default monitoring settings.
pub fn propagate(
    model: &JunctionModel,
    space: &FockSpace,
    t_final: f64,
    dt: f64,
    record_every: usize,
) -> Result<TransientRecord> {
    propagate_with(
        model,
        space,
        PropagationSettings {
            t_final,
            dt,
            record_every,
            ..Default::default()
        },
    )
}

pub fn propagate_with(model: &JunctionModel, space: &FockSpace, settings: PropagationSettings) -> Result<TransientRecord> {
    Propagator::new(model, space, settings)?.run()
}
