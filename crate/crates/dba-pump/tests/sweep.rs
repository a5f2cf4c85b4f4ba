use dba_pump::model::presets;
use dba_pump::redfield::propagate_with;
use dba_pump::sweep::*;
use dba_pump::Error;

fn short() -> RunSettings {
    RunSettings { t_final: 200.0, dt: 1.0, record_every: 1, n_modes: Some(400), n_vib: 6 }
}

#[test]
fn grids() {
    assert_eq!(linear_grid(0.02, 0.20, 0.01).len(), 19);
    assert_eq!(linear_grid(0.0, 0.16, 0.005)[18], 0.09);
    assert_eq!(linear_grid(0.1, 0.1, 0.01), vec![0.1]);
    assert_eq!(SweepPlan::fig2().grid, linear_grid(0.02, 0.20, 0.01));
    assert_eq!(SweepPlan::fig4().grid.len(), 33);
}

#[test]
fn plan_validation() {
    let mut p = SweepPlan::fig2();
    p.grid = vec![];
    assert!(matches!(p.validate(), Err(Error::Configuration(_))));
    p.grid = vec![0.05, 0.05];
    assert!(p.validate().is_err());
    p.grid = vec![0.05, f64::NAN];
    assert!(p.validate().is_err());
    let mut p = SweepPlan::fig2();
    p.parameter = SweepParameter::Reorganization;
    assert!(p.validate().is_err());
    let mut p = SweepPlan::fig4();
    p.grid = vec![-0.01, 0.0];
    assert!(p.validate().is_err());
}

#[test]
fn model_at_sets_parameter() {
    let p = SweepPlan { settings: short(), ..SweepPlan::fig4() };
    let m = p.model_at(0.08).unwrap();
    let v = m.vibronic.unwrap();
    assert!((v.reorganization() - 0.08).abs() < 1e-15);
    assert_eq!(v.levels, 6);
    assert_eq!(m.leads[0].n_modes, 400);
    let d = SweepPlan::fig2();
    assert_eq!(d.model_at(0.1).unwrap().leads[1].n_modes, dba_pump::model::modes_for_window(presets::WINDOW_FS, -1.0));
}

#[test]
fn single_point_matches_direct_run() {
    let p = SweepPlan { grid: vec![0.07], settings: short(), ..SweepPlan::fig2() };
    let r = run_sweep(&p).unwrap();
    let m = p.model_at(0.07).unwrap();
    let direct = propagate_with(&m, &m.space().unwrap(), short().propagation()).unwrap();
    assert_eq!(r.points.len(), 1);
    assert_eq!(r.q_l(), vec![direct.q_l]);
    assert_eq!(r.q_r(), vec![direct.q_r]);
    assert!(r.points[0].converged());
    assert!(!r.any_failed());
}

#[test]
fn parallel_sweep_is_deterministic_and_ordered() {
    let grid = vec![0.03, 0.06, 0.09, 0.12];
    let one = run_sweep(&SweepPlan { grid: grid.clone(), settings: short(), jobs: 1, ..SweepPlan::fig2() }).unwrap();
    let four = run_sweep(&SweepPlan { grid: grid.clone(), settings: short(), jobs: 4, ..SweepPlan::fig2() }).unwrap();
    assert_eq!(one.values(), grid);
    assert_eq!(one, four);
}

#[test]
fn failing_point_is_recorded() {
    // A one-level ladder has no boson mode, so every point fails.
    let mut p = SweepPlan { grid: vec![0.0, 0.05], settings: short(), ..SweepPlan::fig4() };
    p.settings.n_vib = 1;
    let r = run_sweep(&p).unwrap();
    assert!(r.any_failed());
    assert!(r.points.iter().all(|pt| pt.failed() && pt.q_l.is_nan() && !pt.converged()));
}

#[test]
fn recurrent_chains_are_not_converged() {
    let mut s = short();
    s.n_modes = Some(50);
    let r = run_sweep(&SweepPlan { grid: vec![0.05], settings: s, ..SweepPlan::fig2() }).unwrap();
    assert!(!r.points[0].failed());
    assert!(!r.points[0].converged());
}

#[test]
fn decoupled_audit_is_exact() {
    let mut p = SweepPlan { grid: vec![0.05], settings: short(), ..SweepPlan::fig2() };
    p.base.set_xi(0.0);
    let a = convergence_audit(&p, 0.05).unwrap();
    assert_eq!((a.q_l, a.q_r), (0.0, 0.0));
    assert_eq!(a.checks.len(), 2);
    assert!(a.passed());
    assert!(a.flagged().is_empty());
}

#[test]
fn coarse_step_is_flagged() {
    let s = RunSettings { t_final: 300.0, dt: 30.0, record_every: 1, n_modes: Some(600), n_vib: 6 };
    let p = SweepPlan { grid: vec![0.05], settings: s, ..SweepPlan::fig2() };
    let a = convergence_audit(&p, 0.05).unwrap();
    assert!(a.flagged().contains(&"dt/2"), "{a:?}");
    assert!(!a.passed());
}

#[test]
fn vibronic_audit_has_ladder_check() {
    let p = SweepPlan { grid: vec![0.05], settings: RunSettings { t_final: 60.0, n_modes: Some(150), ..short() }, ..SweepPlan::fig4() };
    let a = convergence_audit(&p, 0.05).unwrap();
    let names: Vec<_> = a.checks.iter().map(|c| c.name).collect();
    assert_eq!(names, vec!["dt/2", "N*2", "n_vib+5"]);
}
