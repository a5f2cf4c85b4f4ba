//! Lead statistics and the two-time correlation functions of a lead.

use crate::error::{Error, Result};
use crate::model::{lead_modes, LeadParams, HBAR};
use crate::C64;

/// Fermi–Dirac factor 1/(1 + e^{(ε−μ)/kT}), evaluated without overflow.
pub fn fermi(energy: f64, mu: f64, kt: f64) -> Result<f64> {
    if !(kt > 0.0) {
        return Err(Error::Domain(format!("kT must be > 0, got {kt}")));
    }
    let x = (energy - mu) / kt;
    Ok(if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    })
}

/// 1 − f, computed directly so that it keeps full relative precision below μ.
pub fn fermi_complement(energy: f64, mu: f64, kt: f64) -> Result<f64> {
    fermi(2.0 * mu - energy, mu, kt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    /// C(τ) = Σ u²(1−f) e^{−iετ/ħ}
    Emission,
    /// C̃(τ) = Σ u² f e^{+iετ/ħ}
    Absorption,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub energy: f64,
    pub coupling: f64,
    pub fermi: f64,
    /// 1 − fermi, kept separately for precision.
    pub hole: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadCorrelation {
    pub modes: Vec<BathMode>,
    pub temperature: f64,
    pub mu: f64,
}

impl LeadCorrelation {
    pub fn new(lead: &LeadParams, kt: f64) -> Result<Self> {
        lead.validate()?;
        let modes = lead_modes(lead)
            .into_iter()
            .map(|m| {
                Ok(BathMode {
                    energy: m.energy,
                    coupling: m.coupling,
                    fermi: fermi(m.energy, lead.mu, kt)?,
                    hole: fermi_complement(m.energy, lead.mu, kt)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LeadCorrelation {
            modes,
            temperature: kt,
            mu: lead.mu,
        })
    }

    /// Weight of mode k in the given correlation kind: u²(1−f) or u²f.
    pub fn weight(&self, k: usize, kind: CorrelationKind) -> f64 {
        let m = &self.modes[k];
        let u2 = m.coupling * m.coupling;
        match kind {
            CorrelationKind::Emission => u2 * m.hole,
            CorrelationKind::Absorption => u2 * m.fermi,
        }
    }

    pub fn correlation(&self, tau: f64, kind: CorrelationKind) -> C64 {
        let sign = match kind {
            CorrelationKind::Emission => -1.0,
            CorrelationKind::Absorption => 1.0,
        };
        (0..self.modes.len())
            .map(|k| C64::from_polar(self.weight(k, kind), sign * self.modes[k].energy * tau / HBAR))
            .sum()
    }
}
