//! Currents, populations, accumulated charge and the superexchange estimates.

use crate::error::{Error, Result};
use crate::fock::{self, FockSpace, ManyBodyOperator, OrbitalId};
use crate::linalg::trace_of_product;
use crate::model::{DensityMatrix, Side, HBAR};
use crate::redfield::{x_operator, DissipatorSet};

/// Ratio of the terminal current to its peak below which a run counts as decayed.
pub const DECAY_RATIO: f64 = 1e-3;
/// Trailing window (fs) over which the decay floor must hold.
pub const DECAY_WINDOW_FS: f64 = 100.0;
/// Negative eigenvalue magnitude of ρ that raises a positivity warning.
pub const POSITIVITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunDiagnostics {
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub n_modes: [usize; 2],
    /// Both lead chains are longer than the window needs to stay free of reflections.
    pub recurrence_free: bool,
    pub decay_floor_met: bool,
    pub min_eigenvalue: f64,
    pub positivity_warnings: usize,
    pub max_trace_drift: f64,
    pub max_hermiticity_drift: f64,
    pub max_charge_balance_error: f64,
    pub initial_charge: f64,
    pub final_charge: f64,
}

impl RunDiagnostics {
    pub fn positivity_ok(&self) -> bool {
        self.positivity_warnings == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransientRecord {
    pub times: Vec<f64>,
    pub current_l: Vec<f64>,
    pub current_r: Vec<f64>,
    pub orbitals: Vec<OrbitalId>,
    /// `populations[o][n]` is ⟨d†d⟩ of `orbitals[o]` at `times[n]`.
    pub populations: Vec<Vec<f64>>,
    pub boson_occupation: Option<Vec<f64>>,
    pub trace_error: Vec<f64>,
    pub hermiticity_error: Vec<f64>,
    /// |tr(N·dρ/dt) − (I_L + I_R)| per record.
    pub charge_balance_error: Vec<f64>,
    pub min_rho_eigenvalue: Vec<f64>,
    pub q_l: f64,
    pub q_r: f64,
    pub diagnostics: RunDiagnostics,
}

impl TransientRecord {
    pub fn current(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.current_l,
            Side::Right => &self.current_r,
        }
    }

    pub fn population(&self, orb: OrbitalId) -> Option<&[f64]> {
        self.orbitals.iter().position(|&o| o == orb).map(|i| self.populations[i].as_slice())
    }

    /// Σ populations at record n.
    pub fn charge(&self, n: usize) -> f64 {
        self.populations.iter().map(|p| p[n]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccumulatedCharge {
    pub q_l: f64,
    pub q_r: f64,
    pub decay_floor_met: bool,
}

/// I_J = 2·Re tr(N [F_J ρ − ρ F̃_J†, V_J]), positive for electrons entering the molecule.
pub fn lead_current(
    rho: &DensityMatrix,
    n: &ManyBodyOperator,
    dissipators: &DissipatorSet,
    v: &ManyBodyOperator,
    side: Side,
) -> Result<f64> {
    let d = &dissipators.leads[side.index()];
    for op in [v, &d.f, &d.f_tilde] {
        n.check_same_space(op)?;
    }
    if rho.matrix.nrows() != n.dim() {
        return Err(Error::InvalidOperand("density matrix dimension differs from operators".into()));
    }
    let x = n.with_matrix(x_operator(&rho.matrix, d))?;
    let c = x.commutator(v)?;
    Ok(2.0 * trace_of_product(n.matrix().as_ref(), c.matrix().as_ref()).re)
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Whether every current stays below `ratio`·max|I| over the trailing `window`.
pub fn decay_floor_met(times: &[f64], currents: [&[f64]; 2], ratio: f64, window: f64) -> bool {
    let Some(&t_end) = times.last() else {
        return false;
    };
    if t_end - times[0] < window {
        return false;
    }
    currents.iter().all(|cur| {
        let peak = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return true;
        }
        times
            .iter()
            .zip(cur.iter())
            .filter(|(&t, _)| t >= t_end - window)
            .all(|(_, v)| v.abs() <= ratio * peak)
    })
}

/// Trapezoidal Q_L, Q_R over the record, with the decay-floor verdict.
pub fn accumulate_charge(record: &TransientRecord) -> Result<AccumulatedCharge> {
    if record.times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "accumulated charge needs at least 2 samples, record has {}",
            record.times.len()
        )));
    }
    Ok(AccumulatedCharge {
        q_l: trapezoid(&record.times, &record.current_l),
        q_r: trapezoid(&record.times, &record.current_r),
        decay_floor_met: decay_floor_met(
            &record.times,
            [&record.current_l, &record.current_r],
            DECAY_RATIO,
            DECAY_WINDOW_FS,
        ),
    })
}

/// Full D↔A transfer period πħ|gap|/β² of the superexchange two-level reduction.
pub fn mcconnell_period(beta: f64, gap: f64) -> Result<f64> {
    if gap == 0.0 {
        return Err(Error::ResonantRegime("bridge gap is zero".into()));
    }
    if beta == 0.0 {
        return Err(Error::Domain("beta is zero; no transfer".into()));
    }
    Ok(std::f64::consts::PI * HBAR * gap.abs() / (beta * beta))
}

/// Whether |β| is small enough against the gap for the superexchange picture.
pub fn superexchange_regime(beta: f64, gap: f64) -> bool {
    beta.abs() <= 0.2 * gap.abs()
}

/// ν = 2β² e^{−Δ/ħΩ} / (ħ|ε_B − Δ|), in rad/fs.
pub fn vibronic_mcconnell_frequency(beta: f64, eps_bridge: f64, delta: f64, omega: f64) -> Result<f64> {
    if eps_bridge == delta {
        return Err(Error::ResonantRegime(format!(
            "bridge energy {eps_bridge} equals the reorganization energy"
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be > 0, got {omega}")));
    }
    Ok(2.0 * beta * beta * (-delta / omega).exp() / (HBAR * (eps_bridge - delta).abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    /// Register order.
    pub orbitals: Vec<f64>,
    pub boson: Option<f64>,
}

/// ⟨d†d⟩ per register orbital and ⟨c†c⟩ when the space has a boson mode.
pub fn populations(rho: &DensityMatrix, space: &FockSpace) -> Result<Populations> {
    if rho.matrix.nrows() != space.dim() {
        return Err(Error::InvalidOperand("density matrix dimension differs from the space".into()));
    }
    let diag = |i: usize| rho.matrix[(i, i)].re;
    let mut occ = vec![0.0; space.n_orbitals()];
    let mut boson = 0.0;
    for i in 0..space.dim() {
        let (bits, n) = space.decompose(i);
        for (j, o) in occ.iter_mut().enumerate() {
            if bits & (1 << j) != 0 {
                *o += diag(i);
            }
        }
        boson += n as f64 * diag(i);
    }
    Ok(Populations {
        orbitals: occ,
        boson: (space.boson_levels() >= 2).then_some(boson),
    })
}

/// Time of the first local maximum of a sampled series, refined by a parabola.
pub fn first_maximum(times: &[f64], values: &[f64]) -> Option<f64> {
    (1..values.len().saturating_sub(1))
        .find(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| parabolic_peak(times, values, i))
}

/// Times of all local maxima above `min_height`.
pub fn local_maxima(times: &[f64], values: &[f64], min_height: f64) -> Vec<f64> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1] && values[i] >= min_height)
        .map(|i| parabolic_peak(times, values, i))
        .collect()
}

fn parabolic_peak(times: &[f64], values: &[f64], i: usize) -> f64 {
    let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
    let h = times[i + 1] - times[i];
    let denom = y0 - 2.0 * y1 + y2;
    if denom == 0.0 {
        times[i]
    } else {
        times[i] + 0.5 * h * (y0 - y2) / denom
    }
}

/// Centered moving average of width `width` applied twice (triangular kernel),
/// for a uniformly sampled series. Components of period `width` are removed
/// and symmetric peaks stay in place. Ends use the available samples only.
pub fn low_pass(times: &[f64], values: &[f64], width: f64) -> Vec<f64> {
    if times.len() < 2 || !(width > 0.0) {
        return values.to_vec();
    }
    let dt = times[1] - times[0];
    let half = ((0.5 * width / dt).round() as usize).max(1);
    let pass = |v: &[f64]| -> Vec<f64> {
        let mut prefix = vec![0.0; v.len() + 1];
        for (i, x) in v.iter().enumerate() {
            prefix[i + 1] = prefix[i] + x;
        }
        (0..v.len())
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(v.len());
                (prefix[hi] - prefix[lo]) / (hi - lo) as f64
            })
            .collect()
    };
    pass(&pass(values))
}

/// Angular frequency 2π/T from the mean spacing of successive maxima.
pub fn oscillation_frequency(times: &[f64], values: &[f64]) -> Option<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let peaks = local_maxima(times, values, lo + 0.5 * (hi - lo));
    if peaks.len() < 2 {
        return None;
    }
    let period = (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64;
    Some(2.0 * std::f64::consts::PI / period)
}

/// Per-orbital number operators in register order.
pub fn orbital_number_operators(space: &FockSpace) -> Result<Vec<ManyBodyOperator>> {
    space.register().iter().map(|&o| fock::orbital_number(space, o)).collect()
}
