//! Flat `key = value` run configurations.
//!
//! ```text
//! # comment
//! preset = fig2          # fig2 | fig4, optional
//! eps.B.LUMO = 0.08      # eps.<D|B|A>.<HOMO|LUMO>
//! beta = -0.01
//! mu.L = -0.2            # also mu.R, xi.L, xi.R, gamma.L, gamma.R
//! kT = 0.001
//! omega = 0.06           # omega and delta switch on the bridge vibration
//! delta = 0.05
//! n_vib = 15
//! n_modes = 14585        # omitted: sized to keep the window recurrence-free
//! t_final = 8000
//! dt = 1
//! record_every = 1
//! out = run.csv
//! ```
//!
//! Without a preset the electronic model uses the six-orbital register and the
//! vibronic model the four-orbital one. The initial state is always the donor
//! excitation: D.HOMO empty, D.LUMO filled, bridge and acceptor HOMOs filled.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fock::{Level, OrbitalId, Site, FULL_REGISTER, REDUCED_REGISTER};
use crate::model::presets::{self, Preset};
use crate::model::{modes_for_window, JunctionModel, LeadParams, Orbital, Side, Vibronic};
use crate::sweep::{linear_grid, RunSettings, SweepParameter, SweepPlan};

/// Reorganization energy of the `fig4` preset when `delta` is not given.
pub const FIG4_DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibronicConfig {
    /// ħΩ in eV.
    pub omega: f64,
    pub delta: f64,
    pub n_vib: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    /// Register order.
    pub energies: Vec<(OrbitalId, f64)>,
    pub beta: f64,
    /// Indexed by `Side::index`.
    pub mu: [f64; 2],
    pub xi: [f64; 2],
    pub gamma: [f64; 2],
    pub kt: f64,
    pub vibronic: Option<VibronicConfig>,
    pub n_modes: Option<usize>,
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    pub out: Option<String>,
    /// Worker threads for sweeps; set from the command line, 0 = default.
    pub jobs: usize,
}

const SCALAR_KEYS: [&str; 17] = [
    "preset", "beta", "mu.L", "mu.R", "xi.L", "xi.R", "gamma.L", "gamma.R", "kT", "omega", "delta", "n_modes",
    "n_vib", "t_final", "dt", "record_every", "out",
];

fn parse_orbital_key(key: &str) -> Option<OrbitalId> {
    let rest = key.strip_prefix("eps.")?;
    let (site, level) = rest.split_once('.')?;
    let site = match site {
        "D" => Site::D,
        "B" => Site::B,
        "A" => Site::A,
        _ => return None,
    };
    let level = match level {
        "HOMO" => Level::Homo,
        "LUMO" => Level::Lumo,
        _ => return None,
    };
    Some(OrbitalId::new(site, level))
}

fn eps_key(o: OrbitalId) -> String {
    format!("eps.{o}")
}

struct Entry {
    value: String,
    line: usize,
}

fn number(map: &BTreeMap<String, Entry>, key: &str) -> Result<Option<f64>> {
    let Some(e) = map.get(key) else {
        return Ok(None);
    };
    let v: f64 = e.value.parse().map_err(|_| Error::Parse {
        line: e.line,
        message: format!("`{key}` expects a number, got `{}`", e.value),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line: e.line,
            message: format!("`{key}` must be finite, got `{}`", e.value),
        });
    }
    Ok(Some(v))
}

fn count(map: &BTreeMap<String, Entry>, key: &str) -> Result<Option<usize>> {
    let Some(e) = map.get(key) else {
        return Ok(None);
    };
    e.value.parse().map(Some).map_err(|_| Error::Parse {
        line: e.line,
        message: format!("`{key}` expects a non-negative integer, got `{}`", e.value),
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !SCALAR_KEYS.contains(&key) && parse_orbital_key(key).is_none() {
            return Err(Error::UnknownKey { key: key.to_string(), line });
        }
        if value.is_empty() {
            return Err(Error::Parse { line, message: format!("`{key}` has no value") });
        }
        if let Some(prev) = map.get(key) {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` already set on line {}", prev.line),
            });
        }
        map.insert(key.to_string(), Entry { value: value.to_string(), line });
    }

    let preset = match map.get("preset") {
        None => None,
        Some(e) => Some(Preset::from_name(&e.value).ok_or_else(|| Error::Parse {
            line: e.line,
            message: format!("unknown preset `{}` (expected fig2 or fig4)", e.value),
        })?),
    };
    let base = preset.map(preset_config);

    let omega = number(&map, "omega")?;
    let delta = number(&map, "delta")?;
    let n_vib = count(&map, "n_vib")?;
    let base_vib = base.as_ref().and_then(|b| b.vibronic);
    let vibronic_wanted = base_vib.is_some() || omega.is_some() || delta.is_some() || n_vib.is_some();
    let register: Vec<OrbitalId> = match &base {
        Some(b) => b.energies.iter().map(|e| e.0).collect(),
        None if vibronic_wanted => REDUCED_REGISTER.to_vec(),
        None => FULL_REGISTER.to_vec(),
    };

    let mut missing = Vec::new();
    let mut need = |key: String, v: Option<f64>| -> f64 {
        if v.is_none() {
            missing.push(key);
        }
        v.unwrap_or(f64::NAN)
    };

    for (key, e) in &map {
        if let Some(o) = parse_orbital_key(key) {
            if !register.contains(&o) {
                return Err(Error::Parse {
                    line: e.line,
                    message: format!("`{key}` names an orbital outside the register of this model"),
                });
            }
        }
    }
    let mut energies = Vec::new();
    for &o in &register {
        let fallback = base.as_ref().and_then(|b| b.energies.iter().find(|e| e.0 == o).map(|e| e.1));
        let v = number(&map, &eps_key(o))?.or(fallback);
        energies.push((o, need(eps_key(o), v)));
    }
    let pick = |key: &str, fallback: Option<f64>| -> Result<Option<f64>> { Ok(number(&map, key)?.or(fallback)) };
    let beta = need("beta".into(), pick("beta", base.as_ref().map(|b| b.beta))?);
    let mut side_values = |name: &str, get: fn(&RunConfig) -> [f64; 2]| -> Result<[f64; 2]> {
        let mut out = [0.0; 2];
        for side in Side::BOTH {
            let key = format!("{name}.{}", side.name());
            let v = pick(&key, base.as_ref().map(|b| get(b)[side.index()]))?;
            out[side.index()] = need(key, v);
        }
        Ok(out)
    };
    let mu = side_values("mu", |b| b.mu)?;
    let xi = side_values("xi", |b| b.xi)?;
    let gamma = side_values("gamma", |b| b.gamma)?;
    let kt = need("kT".into(), pick("kT", base.as_ref().map(|b| b.kt))?);
    let t_final = need("t_final".into(), pick("t_final", base.as_ref().map(|b| b.t_final))?);
    let dt = need("dt".into(), pick("dt", base.as_ref().map(|b| b.dt))?);
    let vibronic = if vibronic_wanted {
        let omega = need("omega".into(), omega.or(base_vib.map(|v| v.omega)));
        let delta = need("delta".into(), delta.or(base_vib.map(|v| v.delta)));
        Some(VibronicConfig {
            omega,
            delta,
            n_vib: n_vib.or(base_vib.map(|v| v.n_vib)).unwrap_or(presets::N_VIB),
        })
    } else {
        None
    };
    if !missing.is_empty() {
        return Err(Error::MissingKeys(missing));
    }

    let cfg = RunConfig {
        preset,
        energies,
        beta,
        mu,
        xi,
        gamma,
        kt,
        vibronic,
        n_modes: count(&map, "n_modes")?,
        t_final,
        dt,
        record_every: count(&map, "record_every")?.or(base.as_ref().map(|b| b.record_every)).unwrap_or(1),
        out: map.get("out").map(|e| e.value.clone()),
        jobs: 0,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Fully resolved configuration of a preset.
pub fn preset_config(preset: Preset) -> RunConfig {
    let model = match preset {
        Preset::Fig2 => presets::fig2(presets::EPS_B_LUMO_VIB),
        Preset::Fig4 => presets::fig4(FIG4_DEFAULT_DELTA).expect("preset vibronic parameters are valid"),
    };
    let mut cfg = RunConfig::from_model(&model, RunSettings::default());
    cfg.preset = Some(preset);
    if let Some(v) = cfg.vibronic.as_mut() {
        v.delta = FIG4_DEFAULT_DELTA;
    }
    cfg
}

impl RunConfig {
    /// Configuration reproducing `model` with the given settings.
    pub fn from_model(model: &JunctionModel, s: RunSettings) -> RunConfig {
        let lead = |f: fn(&LeadParams) -> f64| [f(model.lead(Side::Left)), f(model.lead(Side::Right))];
        RunConfig {
            preset: None,
            energies: model.orbitals.iter().map(|o| (o.id, o.energy)).collect(),
            beta: model.hopping,
            mu: lead(|l| l.mu),
            xi: lead(|l| l.xi),
            gamma: lead(|l| l.gamma),
            kt: model.temperature,
            vibronic: model.vibronic.map(|v| VibronicConfig {
                omega: v.omega,
                delta: v.reorganization(),
                n_vib: v.levels,
            }),
            n_modes: s.n_modes,
            t_final: s.t_final,
            dt: s.dt,
            record_every: s.record_every,
            out: None,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.settings().propagation().validate()?;
        if self.n_modes == Some(0) {
            return Err(Error::Configuration("n_modes must be at least 1".into()));
        }
        self.model()?.validate()
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            t_final: self.t_final,
            dt: self.dt,
            record_every: self.record_every,
            n_modes: self.n_modes,
            n_vib: self.vibronic.map_or(presets::N_VIB, |v| v.n_vib),
        }
    }

    pub fn model(&self) -> Result<JunctionModel> {
        let occupied = |o: OrbitalId| {
            matches!(
                (o.site, o.level),
                (Site::D, Level::Lumo) | (Site::B, Level::Homo) | (Site::A, Level::Homo)
            )
        };
        let lead = |side: Side| {
            let j = side.index();
            LeadParams {
                mu: self.mu[j],
                gamma: self.gamma[j],
                xi: self.xi[j],
                n_modes: self.n_modes.unwrap_or_else(|| modes_for_window(self.t_final, self.gamma[j])),
            }
        };
        let vibronic = match self.vibronic {
            Some(v) => Some(Vibronic::from_reorganization(v.delta, v.omega, v.n_vib)?),
            None => None,
        };
        Ok(JunctionModel {
            orbitals: self
                .energies
                .iter()
                .map(|&(id, energy)| Orbital { id, energy, occupied: occupied(id) })
                .collect(),
            hopping: self.beta,
            leads: [lead(Side::Left), lead(Side::Right)],
            vibronic,
            temperature: self.kt,
        })
    }

    /// Sweep of `parameter` over its default grid, starting from this configuration.
    pub fn sweep_plan(&self, parameter: SweepParameter) -> Result<SweepPlan> {
        let grid = match parameter {
            SweepParameter::BridgeLumo => linear_grid(0.02, 0.20, 0.01),
            SweepParameter::Reorganization => {
                if self.vibronic.is_none() {
                    return Err(Error::Configuration(
                        "a reorganization sweep needs a vibronic configuration (set omega and delta or use preset fig4)"
                            .into(),
                    ));
                }
                linear_grid(0.0, 0.16, 0.005)
            }
        };
        Ok(SweepPlan {
            base: self.model()?,
            parameter,
            grid,
            settings: self.settings(),
            jobs: self.jobs,
        })
    }

    /// Every resolved key, in a form `parse_config` reads back to an identical value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(p) = self.preset {
            let _ = writeln!(s, "preset = {}", p.name());
        }
        for &(o, e) in &self.energies {
            let _ = writeln!(s, "{} = {e}", eps_key(o));
        }
        let _ = writeln!(s, "beta = {}", self.beta);
        for (name, v) in [("mu", self.mu), ("xi", self.xi), ("gamma", self.gamma)] {
            for side in Side::BOTH {
                let _ = writeln!(s, "{name}.{} = {}", side.name(), v[side.index()]);
            }
        }
        let _ = writeln!(s, "kT = {}", self.kt);
        if let Some(v) = self.vibronic {
            let _ = writeln!(s, "omega = {}", v.omega);
            let _ = writeln!(s, "delta = {}", v.delta);
            let _ = writeln!(s, "n_vib = {}", v.n_vib);
        }
        if let Some(n) = self.n_modes {
            let _ = writeln!(s, "n_modes = {n}");
        }
        let _ = writeln!(s, "t_final = {}", self.t_final);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "record_every = {}", self.record_every);
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {o}");
        }
        s
    }
}
