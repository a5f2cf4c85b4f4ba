//! Parameter scans over the bridge LUMO energy and the bridge reorganization
//! energy, plus the self-convergence audit of a single grid point.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{Level, OrbitalId, Site};
use crate::model::{modes_for_window, presets, JunctionModel, Side, Vibronic};
use crate::observables::RunDiagnostics;
use crate::redfield::{propagate_with, PropagationSettings};

/// Relative change in Q_J below which an audit variant counts as converged.
pub const AUDIT_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// ε of B.LUMO (eV).
    BridgeLumo,
    /// Δ (eV), with ħΩ held fixed and λ = √(2ħΩΔ).
    Reorganization,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::BridgeLumo => "eps.B.LUMO",
            SweepParameter::Reorganization => "delta",
        }
    }
}

/// Per-point run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    /// Lead chain length; `None` sizes each chain so the window is recurrence-free.
    pub n_modes: Option<usize>,
    /// Boson ladder length of vibronic models.
    pub n_vib: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            t_final: presets::WINDOW_FS,
            dt: 1.0,
            record_every: 1,
            n_modes: None,
            n_vib: presets::N_VIB,
        }
    }
}

impl RunSettings {
    pub fn propagation(&self) -> PropagationSettings {
        PropagationSettings {
            t_final: self.t_final,
            dt: self.dt,
            record_every: self.record_every,
            ..Default::default()
        }
    }

    /// Applies the chain length and ladder length to a model.
    pub fn apply(&self, model: &mut JunctionModel) {
        for side in Side::BOTH {
            let lead = model.lead_mut(side);
            lead.n_modes = self.n_modes.unwrap_or_else(|| modes_for_window(self.t_final, lead.gamma));
        }
        if let Some(v) = model.vibronic.as_mut() {
            v.levels = self.n_vib;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Model at which every grid point starts before the parameter is set.
    pub base: JunctionModel,
    pub parameter: SweepParameter,
    /// Strictly increasing.
    pub grid: Vec<f64>,
    pub settings: RunSettings,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
}

/// `start, start + step, …` up to `stop` inclusive, computed by index and
/// rounded to 1e−12 so that decimal steps print cleanly.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
}

impl SweepPlan {
    /// ε_B.LUMO ∈ 0.02..0.20 step 0.01 on the full electronic model.
    pub fn fig2() -> Self {
        SweepPlan {
            base: presets::fig2(presets::EPS_B_LUMO_VIB),
            parameter: SweepParameter::BridgeLumo,
            grid: linear_grid(0.02, 0.20, 0.01),
            settings: RunSettings::default(),
            jobs: 0,
        }
    }

    /// Δ ∈ 0..0.16 step 0.005 on the reduced vibronic model.
    pub fn fig4() -> Self {
        SweepPlan {
            base: presets::fig4(0.0).expect("preset vibronic parameters are valid"),
            parameter: SweepParameter::Reorganization,
            grid: linear_grid(0.0, 0.16, 0.005),
            settings: RunSettings::default(),
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Configuration("sweep grid is empty".into()));
        }
        if let Some(w) = self.grid.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Configuration(format!(
                "sweep grid must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Configuration("sweep grid values must be finite".into()));
        }
        match self.parameter {
            SweepParameter::BridgeLumo => {
                if self.base.energy(OrbitalId::new(Site::B, Level::Lumo)).is_none() {
                    return Err(Error::Configuration("bridge sweep needs the B.LUMO orbital".into()));
                }
            }
            SweepParameter::Reorganization => {
                if self.base.vibronic.is_none() {
                    return Err(Error::Configuration("reorganization sweep needs a vibronic model".into()));
                }
                if self.grid[0] < 0.0 {
                    return Err(Error::Configuration("reorganization energies must be >= 0".into()));
                }
            }
        }
        self.settings.propagation().validate()?;
        self.base.validate()
    }

    /// Fully configured model for one grid value.
    pub fn model_at(&self, value: f64) -> Result<JunctionModel> {
        let mut m = self.base.clone();
        match self.parameter {
            SweepParameter::BridgeLumo => {
                m.orbital_mut(OrbitalId::new(Site::B, Level::Lumo))
                    .ok_or_else(|| Error::Configuration("bridge sweep needs the B.LUMO orbital".into()))?
                    .energy = value;
            }
            SweepParameter::Reorganization => {
                let v = m
                    .vibronic
                    .ok_or_else(|| Error::Configuration("reorganization sweep needs a vibronic model".into()))?;
                m.vibronic = Some(Vibronic::from_reorganization(value, v.omega, v.levels)?);
            }
        }
        self.settings.apply(&mut m);
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub q_l: f64,
    pub q_r: f64,
    pub diagnostics: RunDiagnostics,
    /// Set when the point failed; charges are NaN then.
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn decay_floor_met(&self) -> bool {
        !self.failed() && self.diagnostics.decay_floor_met
    }

    /// Completed without instability and with recurrence-free lead chains.
    pub fn converged(&self) -> bool {
        !self.failed() && self.diagnostics.recurrence_free
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    /// Ordered by parameter value.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn any_failed(&self) -> bool {
        self.points.iter().any(SweepPoint::failed)
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn q_l(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.q_l).collect()
    }

    pub fn q_r(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.q_r).collect()
    }
}

fn run_point(plan: &SweepPlan, value: f64) -> SweepPoint {
    let outcome = plan.model_at(value).and_then(|m| {
        let space = m.space()?;
        propagate_with(&m, &space, plan.settings.propagation())
    });
    match outcome {
        Ok(r) => SweepPoint {
            value,
            q_l: r.q_l,
            q_r: r.q_r,
            diagnostics: r.diagnostics,
            error: None,
        },
        Err(e) => SweepPoint {
            value,
            q_l: f64::NAN,
            q_r: f64::NAN,
            diagnostics: RunDiagnostics::default(),
            error: Some(e.to_string()),
        },
    }
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Configuration(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// One propagation per grid point; a failing point is recorded and the sweep carries on.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let points = in_pool(plan.jobs, || plan.grid.par_iter().map(|&v| run_point(plan, v)).collect())?;
    Ok(SweepResult {
        parameter: plan.parameter,
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    /// `dt/2`, `N*2` or `n_vib+5`.
    pub name: &'static str,
    pub q_l: f64,
    pub q_r: f64,
    pub rel_l: f64,
    pub rel_r: f64,
}

impl AuditCheck {
    pub fn passed(&self) -> bool {
        self.rel_l < AUDIT_TOL && self.rel_r < AUDIT_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub value: f64,
    pub q_l: f64,
    pub q_r: f64,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(AuditCheck::passed)
    }

    /// Names of the variants that moved Q by 1% or more.
    pub fn flagged(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect()
    }
}

fn relative_change(base: f64, new: f64) -> f64 {
    let d = (new - base).abs();
    if d == 0.0 {
        0.0
    } else if base == 0.0 {
        f64::INFINITY
    } else {
        d / base.abs()
    }
}

/// Reruns one grid value with dt/2, doubled chains and, for vibronic models, five more boson levels.
pub fn convergence_audit(plan: &SweepPlan, value: f64) -> Result<AuditReport> {
    plan.validate()?;
    let base = plan.model_at(value)?;
    let s = plan.settings;
    let mut variants: Vec<(&'static str, JunctionModel, RunSettings)> = vec![("base", base.clone(), s)];
    let finer = RunSettings {
        dt: 0.5 * s.dt,
        record_every: 2 * s.record_every,
        ..s
    };
    variants.push(("dt/2", base.clone(), finer));
    let mut longer = base.clone();
    for side in Side::BOTH {
        longer.lead_mut(side).n_modes *= 2;
    }
    variants.push(("N*2", longer, s));
    if let Some(v) = base.vibronic {
        let mut m = base.clone();
        m.vibronic = Some(Vibronic {
            levels: v.levels + 5,
            ..v
        });
        variants.push(("n_vib+5", m, s));
    }
    let runs: Vec<Result<(f64, f64)>> = in_pool(plan.jobs, || {
        variants
            .par_iter()
            .map(|(_, m, rs)| {
                let space = m.space()?;
                let r = propagate_with(m, &space, rs.propagation())?;
                Ok((r.q_l, r.q_r))
            })
            .collect()
    })?;
    let mut runs = runs.into_iter();
    let (q_l, q_r) = runs.next().expect("base run")?;
    let mut checks = Vec::new();
    for ((name, _, _), r) in variants.iter().skip(1).zip(runs) {
        let (l, r) = r?;
        checks.push(AuditCheck {
            name,
            q_l: l,
            q_r: r,
            rel_l: relative_change(q_l, l),
            rel_r: relative_change(q_r, r),
        });
    }
    Ok(AuditReport { value, q_l, q_r, checks })
}
