//! Junction model: molecular Hamiltonian, lead structure, coupling operators
//! and the initial product state.
//!
//! Units are eV and fs throughout, with charge in units of e.

use faer::Mat;

use crate::error::{Error, Result};
use crate::fock::{
    self, boson_annihilator, build_space, creator, FockSpace, Level, ManyBodyOperator, OrbitalId,
    Site,
};
use crate::C64;

/// ħ in eV·fs.
pub const HBAR: f64 = 0.6582119569;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn terminal_site(self) -> Site {
        match self {
            Side::Left => Site::D,
            Side::Right => Site::A,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadParams {
    pub mu: f64,
    /// Chain hopping; the band is [μ − 2|γ|, μ + 2|γ|].
    pub gamma: f64,
    /// Molecule–lead hopping.
    pub xi: f64,
    pub n_modes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadMode {
    pub energy: f64,
    pub coupling: f64,
}

impl LeadParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::Configuration("n_modes must be at least 1".into()));
        }
        if !(self.mu.is_finite() && self.gamma.is_finite() && self.xi.is_finite()) {
            return Err(Error::Configuration("lead parameters must be finite".into()));
        }
        if self.gamma == 0.0 {
            return Err(Error::Configuration("lead hopping gamma must be nonzero".into()));
        }
        Ok(())
    }

    /// Time at which the front leaving the chain end returns: ħN/|γ|.
    pub fn recurrence_time(&self) -> f64 {
        HBAR * self.n_modes as f64 / self.gamma.abs()
    }
}

/// ε_k = μ − 2|γ| cos(kπ/(N+1)), u_k = ξ √(2/(N+1)) sin(kπ/(N+1)), k = 1..N.
pub fn lead_modes(lead: &LeadParams) -> Vec<LeadMode> {
    let n1 = (lead.n_modes + 1) as f64;
    let norm = (2.0 / n1).sqrt();
    (1..=lead.n_modes)
        .map(|k| {
            let x = k as f64 * std::f64::consts::PI / n1;
            LeadMode {
                energy: lead.mu - 2.0 * lead.gamma.abs() * x.cos(),
                coupling: lead.xi * norm * x.sin(),
            }
        })
        .collect()
}

/// Number of chain sites whose recurrence time exceeds `t_final` by 20%.
pub fn modes_for_window(t_final: f64, gamma: f64) -> usize {
    ((1.2 * t_final * gamma.abs() / HBAR).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vibronic {
    pub lambda: f64,
    /// ħΩ in eV.
    pub omega: f64,
    pub levels: usize,
}

impl Vibronic {
    /// λ = √(2ħΩΔ).
    pub fn from_reorganization(delta: f64, omega: f64, levels: usize) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Configuration(format!("reorganization energy must be >= 0, got {delta}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Configuration(format!("omega must be > 0, got {omega}")));
        }
        Ok(Vibronic {
            lambda: (2.0 * omega * delta).sqrt(),
            omega,
            levels,
        })
    }

    /// Δ = λ²/(2ħΩ).
    pub fn reorganization(&self) -> f64 {
        self.lambda * self.lambda / (2.0 * self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orbital {
    pub id: OrbitalId,
    pub energy: f64,
    pub occupied: bool,
}

/// Orbital energies and initial occupations are stored per register entry, so
/// both maps are defined on exactly the same orbital set.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionModel {
    /// Register order.
    pub orbitals: Vec<Orbital>,
    /// Nearest-neighbor hopping β between equal levels.
    pub hopping: f64,
    /// Indexed by `Side::index`.
    pub leads: [LeadParams; 2],
    pub vibronic: Option<Vibronic>,
    /// k_B T in eV.
    pub temperature: f64,
}

impl JunctionModel {
    pub fn register(&self) -> Vec<OrbitalId> {
        self.orbitals.iter().map(|o| o.id).collect()
    }

    pub fn lead(&self, side: Side) -> &LeadParams {
        &self.leads[side.index()]
    }

    pub fn lead_mut(&mut self, side: Side) -> &mut LeadParams {
        &mut self.leads[side.index()]
    }

    pub fn orbital_mut(&mut self, id: OrbitalId) -> Option<&mut Orbital> {
        self.orbitals.iter_mut().find(|o| o.id == id)
    }

    pub fn energy(&self, id: OrbitalId) -> Option<f64> {
        self.orbitals.iter().find(|o| o.id == id).map(|o| o.energy)
    }

    pub fn electron_count(&self) -> usize {
        self.orbitals.iter().filter(|o| o.occupied).count()
    }

    pub fn set_xi(&mut self, xi: f64) {
        for l in &mut self.leads {
            l.xi = xi;
        }
    }

    pub fn set_n_modes(&mut self, n: usize) {
        for l in &mut self.leads {
            l.n_modes = n;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let reg = self.register();
        build_space(&reg, 0)?;
        for o in &self.orbitals {
            if !o.energy.is_finite() {
                return Err(Error::Configuration(format!("energy of {} is not finite", o.id)));
            }
        }
        if !self.hopping.is_finite() {
            return Err(Error::Configuration("beta must be finite".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Configuration(format!("kT must be > 0, got {}", self.temperature)));
        }
        for l in &self.leads {
            l.validate()?;
        }
        for side in Side::BOTH {
            if !reg.iter().any(|o| o.site == side.terminal_site()) {
                return Err(Error::Configuration(format!(
                    "terminal site {} of lead {} is absent from the register",
                    side.terminal_site().name(),
                    side.name()
                )));
            }
        }
        if let Some(v) = &self.vibronic {
            if !(v.lambda.is_finite() && v.omega > 0.0 && v.omega.is_finite()) {
                return Err(Error::Configuration("vibronic parameters must be finite with omega > 0".into()));
            }
            if v.levels < 2 {
                return Err(Error::Configuration(format!("n_vib must be >= 2, got {}", v.levels)));
            }
            if !reg.contains(&OrbitalId::new(Site::B, Level::Lumo)) {
                return Err(Error::Configuration("vibronic coupling needs the B.LUMO orbital".into()));
            }
        }
        Ok(())
    }

    /// Space matching this model: the register plus the boson ladder when vibronic.
    pub fn space(&self) -> Result<FockSpace> {
        build_space(&self.register(), self.vibronic.map_or(0, |v| v.levels))
    }
}

fn check_register(model: &JunctionModel, space: &FockSpace) -> Result<()> {
    if space.register() != model.register().as_slice() {
        return Err(Error::Configuration("space register does not match the model's orbital set".into()));
    }
    Ok(())
}

/// Ĥ_M = Σ ε d†d + Σ_l β(d†_{m,l} d_{m−1,l} + h.c.) [+ (λ/√2)(c†+c) n_{B,LUMO} + ħΩ(c†c + ½)].
pub fn build_molecular_hamiltonian(model: &JunctionModel, space: &FockSpace) -> Result<ManyBodyOperator> {
    check_register(model, space)?;
    if model.vibronic.is_some() && space.boson_levels() < 2 {
        return Err(Error::Configuration("vibronic parameters given but the space has no boson mode".into()));
    }
    let dim = space.dim();
    let mut h = Mat::<C64>::zeros(dim, dim);
    let add = |h: &mut Mat<C64>, op: &ManyBodyOperator, s: f64| {
        let m = op.matrix();
        for j in 0..dim {
            for i in 0..dim {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    h[(i, j)] += v * s;
                }
            }
        }
    };
    for o in &model.orbitals {
        add(&mut h, &fock::orbital_number(space, o.id)?, o.energy);
    }
    let reg = space.register();
    let pairs = [(Site::B, Site::D), (Site::A, Site::B)];
    for (upper, lower) in pairs {
        for level in [Level::Homo, Level::Lumo] {
            let a = OrbitalId::new(upper, level);
            let b = OrbitalId::new(lower, level);
            if reg.contains(&a) && reg.contains(&b) {
                let hop = creator(space, a)?.mul(&fock::annihilator(space, b)?)?;
                add(&mut h, &hop, model.hopping);
                add(&mut h, &hop.adjoint(), model.hopping);
            }
        }
    }
    if let (Some(v), true) = (&model.vibronic, space.boson_levels() >= 2) {
        let c = boson_annihilator(space)?;
        let x = c.add(&c.adjoint())?;
        let nb = fock::orbital_number(space, OrbitalId::new(Site::B, Level::Lumo))
            .map_err(|_| Error::Configuration("vibronic coupling needs the B.LUMO orbital".into()))?;
        add(&mut h, &x.mul(&nb)?, v.lambda / std::f64::consts::SQRT_2);
        let nc = fock::boson_number(space)?;
        add(&mut h, &nc, v.omega);
        for i in 0..dim {
            h[(i, i)] += C64::new(0.5 * v.omega, 0.0);
        }
    }
    space.wrap(h)
}

/// V_L = Σ_l d†_{D,l}, V_R = Σ_l d†_{A,l} over the levels present.
pub fn coupling_operator(space: &FockSpace, side: Side) -> Result<ManyBodyOperator> {
    let site = side.terminal_site();
    let mut acc: Option<ManyBodyOperator> = None;
    for &o in space.register().iter().filter(|o| o.site == site) {
        let c = creator(space, o)?;
        acc = Some(match acc {
            None => c,
            Some(a) => a.add(&c)?,
        });
    }
    acc.ok_or_else(|| {
        Error::Configuration(format!("terminal site {} absent from the register", site.name()))
    })
}

/// Hermitian unit-trace state on the molecular space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub matrix: Mat<C64>,
    pub time: f64,
}

impl DensityMatrix {
    pub fn trace(&self) -> C64 {
        crate::linalg::trace(self.matrix.as_ref())
    }
}

/// Product state of the occupation pattern, boson in |0⟩.
pub fn initial_density(model: &JunctionModel, space: &FockSpace) -> Result<DensityMatrix> {
    check_register(model, space)?;
    let occ = model
        .orbitals
        .iter()
        .enumerate()
        .filter(|(_, o)| o.occupied)
        .fold(0usize, |acc, (j, _)| acc | (1 << j));
    let idx = space.index(occ, 0);
    let mut m = Mat::<C64>::zeros(space.dim(), space.dim());
    m[(idx, idx)] = C64::new(1.0, 0.0);
    Ok(DensityMatrix { matrix: m, time: 0.0 })
}

/// Parameter sets of the electronic and vibronic reference configurations.
pub mod presets {
    use super::*;

    pub const MU: f64 = -0.2;
    pub const XI: f64 = -0.03;
    pub const KT: f64 = 0.001;
    pub const GAMMA: f64 = -1.0;
    pub const BETA: f64 = -0.01;
    pub const EPS_D_HOMO: f64 = -0.3;
    pub const EPS_B_HOMO: f64 = -0.6;
    pub const EPS_A_HOMO: f64 = -0.25;
    pub const EPS_LUMO_TERMINAL: f64 = 0.0;
    /// Bridge LUMO of the vibronic configuration.
    pub const EPS_B_LUMO_VIB: f64 = 0.05;
    pub const OMEGA: f64 = 0.06;
    pub const N_VIB: usize = 15;
    /// Default propagation window.
    pub const WINDOW_FS: f64 = 8000.0;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Preset {
        Fig2,
        Fig4,
    }

    impl Preset {
        pub fn name(self) -> &'static str {
            match self {
                Preset::Fig2 => "fig2",
                Preset::Fig4 => "fig4",
            }
        }

        pub fn from_name(s: &str) -> Option<Preset> {
            match s {
                "fig2" => Some(Preset::Fig2),
                "fig4" => Some(Preset::Fig4),
                _ => None,
            }
        }
    }

    fn lead(n_modes: usize) -> LeadParams {
        LeadParams {
            mu: MU,
            gamma: GAMMA,
            xi: XI,
            n_modes,
        }
    }

    fn orb(site: Site, level: Level, energy: f64, occupied: bool) -> Orbital {
        Orbital {
            id: OrbitalId::new(site, level),
            energy,
            occupied,
        }
    }

    /// Full six-orbital model; donor excited (D.HOMO hole, D.LUMO electron).
    pub fn fig2(eps_bridge_lumo: f64) -> JunctionModel {
        let n = modes_for_window(WINDOW_FS, GAMMA);
        JunctionModel {
            orbitals: vec![
                orb(Site::D, Level::Homo, EPS_D_HOMO, false),
                orb(Site::D, Level::Lumo, EPS_LUMO_TERMINAL, true),
                orb(Site::B, Level::Homo, EPS_B_HOMO, true),
                orb(Site::B, Level::Lumo, eps_bridge_lumo, false),
                orb(Site::A, Level::Homo, EPS_A_HOMO, true),
                orb(Site::A, Level::Lumo, EPS_LUMO_TERMINAL, false),
            ],
            hopping: BETA,
            leads: [lead(n), lead(n)],
            vibronic: None,
            temperature: KT,
        }
    }

    /// Reduced four-orbital vibronic model at reorganization energy `delta`.
    pub fn fig4(delta: f64) -> Result<JunctionModel> {
        let n = modes_for_window(WINDOW_FS, GAMMA);
        Ok(JunctionModel {
            orbitals: vec![
                orb(Site::D, Level::Homo, EPS_D_HOMO, false),
                orb(Site::D, Level::Lumo, EPS_LUMO_TERMINAL, true),
                orb(Site::B, Level::Lumo, EPS_B_LUMO_VIB, false),
                orb(Site::A, Level::Lumo, EPS_LUMO_TERMINAL, false),
            ],
            hopping: BETA,
            leads: [lead(n), lead(n)],
            vibronic: Some(Vibronic::from_reorganization(delta, OMEGA, N_VIB)?),
            temperature: KT,
        })
    }
}
