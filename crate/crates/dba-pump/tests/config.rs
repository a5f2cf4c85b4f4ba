use dba_pump::config::*;
use dba_pump::fock::{Level, OrbitalId, Site};
use dba_pump::model::presets::{self, Preset};
use dba_pump::model::Side;
use dba_pump::sweep::{RunSettings, SweepParameter};
use dba_pump::Error;

const ELECTRONIC: &str = "\
# full register, explicit
eps.D.HOMO = -0.3
eps.D.LUMO = 0.0
eps.B.HOMO = -0.35
eps.B.LUMO = 0.08   # bridge
eps.A.HOMO = -0.3
eps.A.LUMO = 0.0
beta = -0.01
mu.L = -0.2
mu.R = -0.2
xi.L = -0.03
xi.R = -0.03
gamma.L = -1
gamma.R = -1
kT = 0.001
t_final = 8000
dt = 1
";

#[test]
fn explicit_electronic_config() {
    let cfg = parse_config(ELECTRONIC).unwrap();
    assert_eq!(cfg.preset, None);
    assert_eq!(cfg.energies.len(), 6);
    assert_eq!(cfg.energies[3], (OrbitalId::new(Site::B, Level::Lumo), 0.08));
    assert!(cfg.vibronic.is_none());
    assert_eq!(cfg.record_every, 1);
    let m = cfg.model().unwrap();
    assert_eq!(m.space().unwrap().dim(), 64);
    assert_eq!(m.lead(Side::Right).n_modes, 14585);
    assert_eq!(m.electron_count(), 3);
}

#[test]
fn preset_matches_model() {
    let cfg = parse_config("preset = fig2\n").unwrap();
    assert_eq!(cfg, preset_config(Preset::Fig2));
    let mut expect = presets::fig2(presets::EPS_B_LUMO_VIB);
    RunSettings::default().apply(&mut expect);
    assert_eq!(cfg.model().unwrap(), expect);

    let cfg = parse_config("preset = fig4\ndelta = 0.08\n").unwrap();
    let v = cfg.vibronic.unwrap();
    assert_eq!((v.omega, v.delta, v.n_vib), (0.06, 0.08, 15));
    assert_eq!(parse_config("preset = fig4").unwrap().vibronic.unwrap().delta, FIG4_DEFAULT_DELTA);
    assert_eq!(cfg.model().unwrap().space().unwrap().dim(), 240);
}

#[test]
fn preset_overrides() {
    let cfg = parse_config("preset = fig2\neps.B.LUMO = 0.12\nn_modes = 300\nt_final = 100\nout = x.csv").unwrap();
    let m = cfg.model().unwrap();
    assert_eq!(m.energy(OrbitalId::new(Site::B, Level::Lumo)), Some(0.12));
    assert_eq!(m.lead(Side::Left).n_modes, 300);
    assert_eq!(cfg.out.as_deref(), Some("x.csv"));
}

#[test]
fn roundtrip() {
    for text in [ELECTRONIC, "preset = fig4\nn_modes = 77\nrecord_every = 3\nout = a b.csv", "preset = fig2\n"] {
        let cfg = parse_config(text).unwrap();
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn unknown_key_reports_line() {
    let err = parse_config("preset = fig2\n\nbogus = 1\n").unwrap_err();
    match err {
        Error::UnknownKey { key, line } => assert_eq!((key.as_str(), line), ("bogus", 3)),
        e => panic!("{e}"),
    }
    assert!(matches!(parse_config("eps.X.LUMO = 1"), Err(Error::UnknownKey { line: 1, .. })));
}

#[test]
fn missing_keys_listed() {
    let text: String = ELECTRONIC.lines().filter(|l| !l.starts_with("beta") && !l.starts_with("xi.R")).map(|l| format!("{l}\n")).collect();
    match parse_config(&text).unwrap_err() {
        Error::MissingKeys(k) => assert_eq!(k, vec!["beta".to_string(), "xi.R".into()]),
        e => panic!("{e}"),
    }
    match parse_config("omega = 0.06\n").unwrap_err() {
        Error::MissingKeys(k) => {
            assert_eq!(k[0], "eps.D.HOMO");
            assert_eq!(k.len(), 4 + 1 + 6 + 3 + 1);
            assert_eq!(k.last().unwrap(), "delta");
        }
        e => panic!("{e}"),
    }
}

#[test]
fn parse_errors() {
    let cases = [
        ("preset = fig2\nbeta = abc\n", 2),
        ("preset = fig2\nbeta = inf\n", 2),
        ("preset = fig2\nbeta = -0.01\nbeta = -0.02\n", 3),
        ("preset = fig3\n", 1),
        ("preset = fig2\njust words\n", 2),
        ("preset = fig2\nkT =\n", 2),
        ("preset = fig4\neps.B.HOMO = -0.3\n", 2),
        ("preset = fig2\nn_vib = 2.5\n", 2),
    ];
    for (text, line) in cases {
        match parse_config(text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn invalid_values_rejected() {
    for text in ["preset = fig2\nkT = 0", "preset = fig2\ndt = -1", "preset = fig2\nn_modes = 0", "preset = fig4\ndelta = -0.1"] {
        assert!(parse_config(text).and_then(|c| c.model()).is_err(), "{text}");
    }
}

#[test]
fn sweep_plans() {
    let cfg = parse_config("preset = fig2").unwrap();
    let p = cfg.sweep_plan(SweepParameter::BridgeLumo).unwrap();
    assert_eq!(p.grid.len(), 19);
    assert_eq!(p.grid[7], 0.09);
    assert!(matches!(cfg.sweep_plan(SweepParameter::Reorganization), Err(Error::Configuration(_))));
    let p = parse_config("preset = fig4").unwrap().sweep_plan(SweepParameter::Reorganization).unwrap();
    assert_eq!(p.grid.len(), 33);
    assert_eq!(p.grid[32], 0.16);
}

#[test]
fn from_model_roundtrip() {
    let mut m = presets::fig2(0.11);
    let s = RunSettings { t_final: 500.0, n_modes: Some(900), ..Default::default() };
    s.apply(&mut m);
    let cfg = RunConfig::from_model(&m, s);
    assert_eq!(cfg.model().unwrap(), m);
}
