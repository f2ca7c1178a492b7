use std::sync::Arc;

use attractor_lab::msflow::{check_semiflow_inclusion, SetOfStates};
use attractor_lab::nonlinearity::{certify, make_ensemble, primitive_mismatch, GrowthConstants, Regularity};
use attractor_lab::spectral::IntegratorOptions;
use attractor_lab::{
    make_basis, BranchPolicy, Domain, Error, GalerkinBundle, GalerkinProblem, Metric, NonlinearTerm, SpectralField,
};

const BUILTINS: [&str; 5] = ["cubic", "chafee_infante(lambda=5)", "remark3(k=2401)", "root_branch", "zero"];

#[test]
fn certificates_survive_range_extension() {
    for spec in BUILTINS {
        let term = NonlinearTerm::parse(spec).unwrap();
        for r in [1.0, 10.0, 100.0, 1000.0] {
            let cert = certify(&term, (-r, r), 20_001).unwrap_or_else(|e| panic!("{spec} on ±{r}: {e}"));
            assert!(cert.passed);
            assert!(cert.checks.iter().all(|c| c.min_slack >= -1e-9 * r.powi(4)));
        }
    }
}

#[test]
fn primitive_matches_f() {
    for spec in BUILTINS {
        let term = NonlinearTerm::parse(spec).unwrap();
        let mismatch = primitive_mismatch(&term, (-10.0, 10.0), 2001);
        assert!(mismatch <= 1e-6, "{spec}: {mismatch:e}");
        assert_eq!(term.primitive(0.0), 0.0);
    }
}

#[test]
fn remark3_constants_do_not_depend_on_k() {
    let reference = NonlinearTerm::builtin("remark3", &[("k", 1.0)]).unwrap().constants();
    for k in [1.0, 10.0, 100.0, 1000.0, 10000.0] {
        let term = NonlinearTerm::builtin("remark3", &[("k", k)]).unwrap();
        assert_eq!(term.constants(), reference);
        // amplitude k^{-1/2}, slope −k^{1/2} at 0
        let u = 0.3;
        assert!((term.eval(u) - (u * u * u - (k * u).sin() / k.sqrt())).abs() < 1e-15);
        assert!((term.derivative(0.0) + k.sqrt()).abs() < 1e-9 * k.sqrt());
        certify(&term, (-50.0, 50.0), 200_001).unwrap();
    }
}

#[test]
fn chafee_infante_constants() {
    let k = NonlinearTerm::builtin("chafee_infante", &[("lambda", 5.0)]).unwrap().constants();
    assert_eq!(k.alpha, 0.5);
    assert!((k.c2 - 12.5).abs() < 1e-12);
    let cubic = NonlinearTerm::builtin("cubic", &[]).unwrap().constants();
    assert_eq!((cubic.c1, cubic.c2, cubic.alpha), (1.0, 0.0, 1.0));
}

#[test]
fn linear_decay_fails_certification() {
    let f: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(|u| -u);
    let constants = GrowthConstants { c1: 1.0, c2: 1.0, alpha: 1.0, d1: 1.0, d2: 1.0, delta: 0.0 };
    let term = NonlinearTerm::custom("neg", f, None, constants, Regularity::OneSidedLipschitz, true);
    match certify(&term, (-100.0, 100.0), 10_001) {
        Err(Error::Certification { inequality, at, slack }) => {
            assert!(inequality.starts_with("f(u)u"));
            assert!(at.abs() > 1.0 && slack < 0.0);
        }
        other => panic!("expected a violation, got {other:?}"),
    }
    assert!(certify(&term, (-1.0, 1.0), 999).is_err());
}

#[test]
fn regularity_flags() {
    for (spec, reg) in [
        ("cubic", Regularity::OneSidedLipschitz),
        ("chafee_infante(lambda=5)", Regularity::OneSidedLipschitz),
        ("root_branch", Regularity::NonLipschitz),
    ] {
        assert_eq!(NonlinearTerm::parse(spec).unwrap().regularity(), reg);
    }
    assert!(matches!(NonlinearTerm::parse("quartic"), Err(Error::UnknownNonlinearity(_))));
}

#[test]
fn root_branch_ensemble_departs_from_zero() {
    let basis = make_basis(8, Domain::unit()).unwrap();
    let p = GalerkinProblem::unforced(&basis, NonlinearTerm::parse("root_branch").unwrap());
    let u0 = SpectralField::zeros(&basis);
    let policy = BranchPolicy::perturbation(8, 1e-9, 3);
    let members = make_ensemble(&u0, &policy).unwrap();
    let initial = SetOfStates::new(members.iter().map(|m| m.field.clone()).collect(), Metric::L2);
    assert!(initial.diameter() <= 1e-8);

    let runs = p.integrate_ensemble(&u0, &IntegratorOptions::new(1e-3, 5.0).with_stride(100), &policy).unwrap();
    let finals = SetOfStates::new(runs.iter().map(|r| r.last_state().clone()).collect(), Metric::L2);
    assert!(finals.diameter() >= 1e-2, "diameter {:e}", finals.diameter());
    // the unperturbed member stays at the trivial solution
    assert_eq!(runs[0].last_state().l2(), 0.0);

    let mut bundle = GalerkinBundle::new(p.clone(), 1e-3, policy);
    bundle.output_stride = 100;
    let rep = check_semiflow_inclusion(&bundle, &u0, 2.0, 3.0, 8, 1e-3).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn ensembles_are_reproducible() {
    let basis = make_basis(8, Domain::unit()).unwrap();
    let u0 = SpectralField::mode(&basis, 2, 0.5).unwrap();
    let a = make_ensemble(&u0, &BranchPolicy::perturbation(6, 1e-6, 99)).unwrap();
    let b = make_ensemble(&u0, &BranchPolicy::perturbation(6, 1e-6, 99)).unwrap();
    let c = make_ensemble(&u0, &BranchPolicy::perturbation(6, 1e-6, 100)).unwrap();
    let text = |e: &[attractor_lab::nonlinearity::EnsembleMember]| {
        e.iter().map(|m| format!("{:?}", m.field.coeffs())).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(text(&a), text(&b));
    assert_ne!(text(&a), text(&c));
}
