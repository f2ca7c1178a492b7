use attractor_lab::attractor::{
    absorbing_ball, certify_dissipation, certify_smoothing, linf_bound, run_trials, smoothing_profile, trial_suite,
    uniform_gronwall, verify_linf,
};
use attractor_lab::{make_basis, Domain, GalerkinProblem, NonlinearTerm, SpectralField};

fn problem(m: usize, spec: &str) -> GalerkinProblem {
    GalerkinProblem::unforced(&make_basis(m, Domain::unit()).unwrap(), NonlinearTerm::parse(spec).unwrap())
}

#[test]
fn cubic_decay_needs_no_offset() {
    let p = problem(16, "cubic");
    let trials = trial_suite(p.basis(), 20, 100.0, 1);
    assert!(trials.iter().all(|u| u.l2() <= 100.0 + 1e-9));
    let runs = run_trials(&p, &trials, 1e-3, 3.0, 0.01).unwrap();
    let cert = certify_dissipation(&p, &runs, Some(0.0), None).unwrap();
    assert!(cert.passed, "{cert:?}");
    assert!(cert.worst_slack >= 0.0);
    assert_eq!(cert.constant("R2_fitted"), Some(0.0));
    // the sharper rate e^{−2λ₁t} also holds
    assert!(cert.constant("excess_at_twice_rate").unwrap() <= 1e-12);
}

#[test]
fn chafee_infante_offset_is_finite_and_stable() {
    let p = problem(16, "chafee_infante(lambda=5)");
    let trials = trial_suite(p.basis(), 50, 100.0, 2);
    let runs = run_trials(&p, &trials, 2e-3, 4.0, 0.02).unwrap();
    let fine = runs.refined(&p).unwrap();
    let cert = certify_dissipation(&p, &runs, None, Some(&fine)).unwrap();
    let r2 = cert.constant("R2").unwrap();
    assert!(r2.is_finite() && r2 > 0.0);
    assert!(cert.worst_slack >= 0.0);
    assert_eq!(cert.refinement_stable, Some(true), "{cert:?}");
    assert!(cert.passed);
    // the equilibria bound the offset from below: ‖φ₂‖² must fit under R₂ as t → ∞
    assert!(r2 < 2.0 * 5.0 * std::f64::consts::PI);
}

#[test]
fn smoothing_distinguishes_rough_data() {
    let p = problem(64, "cubic");
    let rough = SpectralField::new(p.basis().clone(), (1..=64).map(|j| (j as f64).powf(-0.6)).collect()).unwrap();
    let grid = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0];
    let prof = smoothing_profile(&p, &rough, &grid, 5e-5).unwrap();
    assert!(prof.blows_up(), "{prof:?}");
    assert!(prof.h1_sq.windows(2).all(|w| w[0] >= w[1]));

    let smooth = SpectralField::mode(p.basis(), 1, 2.0).unwrap();
    let prof = smoothing_profile(&p, &smooth, &grid, 5e-5).unwrap();
    assert!(!prof.blows_up());
    assert!(prof.h1_sq.iter().all(|y| *y <= smooth.h1_sq() + 1e-12));
}

#[test]
fn smoothing_constants_fit_and_refine() {
    let p = problem(16, "chafee_infante(lambda=5)");
    let trials = trial_suite(p.basis(), 12, 20.0, 4);
    let runs = run_trials(&p, &trials, 1e-3, 3.0, 1e-3).unwrap();
    let fine = runs.refined(&p).unwrap();
    let grid = [1e-3, 1e-2, 0.1, 0.5, 1.0];
    let certs = certify_smoothing(&p, &runs, &grid, Some(&fine)).unwrap();
    for c in [&certs.propreg1, &certs.propreg3, &certs.propreg4] {
        assert!(c.passed, "{c:?}");
        assert_eq!(c.refinement_stable, Some(true), "{c:?}");
    }
    // zero data alone: every integral vanishes
    let zero = run_trials(&p, &[SpectralField::zeros(p.basis())], 1e-2, 1.0, 0.01).unwrap();
    let certs = certify_smoothing(&p, &zero, &grid, None).unwrap();
    assert_eq!(certs.propreg1.constant("R1"), Some(0.0));
    assert_eq!(certs.propreg3.constant("R3"), Some(0.0));
    assert!(certify_smoothing(&p, &zero, &[], None).is_err());
}

#[test]
fn cubic_trials_enter_the_absorbing_ball() {
    let p = problem(16, "cubic");
    let trials = trial_suite(p.basis(), 16, 10.0, 5);
    let runs = run_trials(&p, &trials, 1e-3, 12.0, 0.01).unwrap();
    let certs = certify_smoothing(&p, &runs, &[1e-2, 0.1, 1.0], None).unwrap();
    let ball = absorbing_ball(&certs.propreg1, &p, &runs).unwrap();
    assert!(ball.certificate.passed, "{:?}", ball.certificate);
    for (i, e) in ball.entry_times.iter().enumerate() {
        let t = e.unwrap_or_else(|| panic!("trial {i} never entered"));
        assert!(t <= 12.0);
    }
    assert_eq!(ball.entry_times[0], Some(0.0));
    assert!((ball.radius_sq - 4.0 * std::f64::consts::E * certs.propreg1.constant("R1").unwrap()).abs() < 1e-12);
}

#[test]
fn chafee_infante_entry_times_follow_log_law() {
    let p = problem(16, "chafee_infante(lambda=5)");
    let trials = trial_suite(p.basis(), 10, 100.0, 6);
    let runs = run_trials(&p, &trials, 1e-3, 12.0, 0.01).unwrap();
    let certs = certify_smoothing(&p, &runs, &[1e-2, 0.1, 1.0], None).unwrap();
    let ball = absorbing_ball(&certs.propreg1, &p, &runs).unwrap();
    assert!(ball.certificate.passed, "{:?}", ball.certificate);
    for ((e, pred), u0) in ball.entry_times.iter().zip(&ball.predicted).zip(&trials) {
        let expected = u0.l2_sq().ln().max(0.0) + 1.0;
        assert!(e.unwrap() <= *pred);
        assert!((pred - expected).abs() <= 0.01 + 1e-12);
    }
}

#[test]
fn uniform_gronwall_holds_along_trials() {
    for spec in ["cubic", "chafee_infante(lambda=5)"] {
        let p = problem(16, spec);
        let trials = trial_suite(p.basis(), 10, 30.0, 7);
        let runs = run_trials(&p, &trials, 1e-3, 4.0, 0.01).unwrap();
        for r in [0.1, 0.5, 1.0] {
            let cert = uniform_gronwall(&p, &runs, r).unwrap();
            assert!(cert.passed, "{spec}, r = {r}: {cert:?}");
        }
        assert!(uniform_gronwall(&p, &runs, 1e-4).is_err());
    }
}

#[test]
fn linf_bound_over_trajectories() {
    let p = problem(32, "chafee_infante(lambda=5)");
    let bound = linf_bound(&p);
    assert!((bound.m - 5f64.sqrt()).abs() < 1e-9);
    let trials = trial_suite(p.basis(), 6, 30.0, 8);
    let runs = run_trials(&p, &trials, 1e-3, 15.0, 0.1).unwrap();
    let late: Vec<SpectralField> = runs.runs.iter().map(|r| r.last_state().clone()).collect();
    let cert = verify_linf(&bound, &late, 1e-2);
    assert!(cert.passed, "{cert:?}");

    let cubic = linf_bound(&problem(8, "cubic"));
    assert_eq!(cubic.m, 0.0);
    let far = vec![SpectralField::mode(p.basis(), 1, 5.0).unwrap()];
    let bad = verify_linf(&bound, &far, 1e-2);
    assert!(!bad.passed && !bad.notes.is_empty());
}
