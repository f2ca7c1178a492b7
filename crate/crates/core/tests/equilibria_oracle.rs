mod common;

use attractor_lab::equilibria::{
    check_regularity, find_all, linearize, newton_solve, residual_norm, NewtonOptions, SearchStrategy,
};
use attractor_lab::msflow::is_fixed_point;
use attractor_lab::{make_basis, BranchPolicy, Domain, GalerkinBundle, GalerkinProblem, NonlinearTerm, SpectralField};

fn chafee(m: usize, lambda: f64) -> GalerkinProblem {
    let term = NonlinearTerm::builtin("chafee_infante", &[("lambda", lambda)]).unwrap();
    GalerkinProblem::unforced(&make_basis(m, Domain::unit()).unwrap(), term)
}

#[test]
fn counts_match_shooting_enumeration() {
    for lambda in [0.5, 2.0, 5.0, 7.0, 10.0] {
        let expected = common::equilibrium_count(lambda);
        let n = (lambda.sqrt().ceil() as usize) - 1;
        assert_eq!(expected, 2 * n + 1, "oracle at λ = {lambda}");
        let set = find_all(&chafee(32, lambda), &SearchStrategy::default()).unwrap();
        assert_eq!(set.len(), expected, "λ = {lambda}: {:?}", set.log);
    }
}

#[test]
fn profiles_match_shooting_solutions() {
    let p = chafee(32, 5.0);
    let basis = p.basis().clone();
    let set = find_all(&p, &SearchStrategy::default()).unwrap();
    for s in common::shooting_slopes(5.0) {
        for sign in [1.0, -1.0] {
            let values: Vec<f64> = common::profile(5.0, sign * s, basis.intervals(), 64);
            let oracle = SpectralField::new(basis.clone(), basis.analyze(&values)).unwrap();
            let (_, d) = set
                .members
                .iter()
                .map(|e| (0, e.field.distance_l2(&oracle)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d <= 1e-6, "slope {s}: distance {d:e}");
        }
    }
}

#[test]
fn positive_branch_from_small_multiple_of_first_mode() {
    let p = chafee(32, 5.0);
    let s = *common::shooting_slopes(5.0).last().unwrap();
    let oracle = common::profile(5.0, s, p.basis().intervals(), 64);
    let sup_oracle = oracle.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let start = SpectralField::mode(p.basis(), 1, 0.5).unwrap();
    let eq = newton_solve(&p, &start, &NewtonOptions::continuation(0.1)).unwrap();
    assert!((eq.sup_norm - sup_oracle).abs() < 1e-6, "{} vs {sup_oracle}", eq.sup_norm);
    assert!(eq.sup_norm <= 5f64.sqrt());
}

#[test]
fn newton_converges_quadratically() {
    let p = chafee(32, 5.0);
    let eq = newton_solve(&p, &SpectralField::mode(p.basis(), 1, 2.0).unwrap(), &NewtonOptions::default()).unwrap();
    let h = &eq.history;
    // the last few contractions accelerate: r_{k+1} ≤ C r_k² once in the basin
    let k = h.len() - 2;
    assert!(h[k] < 1e-3, "{h:?}");
    assert!(h[k + 1] <= 10.0 * h[k] * h[k] + 1e-14, "{h:?}");
}

#[test]
fn stored_residuals_reproduce() {
    let p = chafee(32, 5.0);
    let set = find_all(&p, &SearchStrategy::default()).unwrap();
    for e in &set.members {
        assert!((residual_norm(&p, &e.field) - e.residual).abs() <= 1e-12);
        assert!(e.residual <= 1e-10);
        let s = linearize(&p, &e.field);
        assert_eq!(s.values, e.spectrum.values);
        assert_eq!(e.unstable_dim(), s.values.iter().filter(|v| **v < 0.0).count());
    }
}

#[test]
fn pairwise_separation_and_symmetry() {
    let p = chafee(32, 7.0);
    let set = find_all(&p, &SearchStrategy::default()).unwrap();
    for (i, a) in set.members.iter().enumerate() {
        for b in &set.members[i + 1..] {
            assert!(a.field.distance_l2(&b.field) > set.dedup_tol);
        }
        let neg = a.field.neg();
        assert!(set.members.iter().any(|b| b.field.distance_l2(&neg) == 0.0));
    }
}

#[test]
fn equilibria_are_fixed_points_of_the_flow() {
    let p = chafee(16, 5.0);
    let set = find_all(&p, &SearchStrategy::default()).unwrap();
    let bundle = GalerkinBundle::new(p.clone(), 1e-3, BranchPolicy::none());
    for e in &set.members {
        assert!(is_fixed_point(&bundle, &e.field, 1.0, 16, 1e-8).unwrap());
    }
    // a large kick along the unstable direction of 0 leaves
    let zero = set.members.iter().find(|e| e.field.l2() == 0.0).unwrap();
    let v = zero.field.with_coeffs(zero.spectrum.vectors[0].clone());
    let kicked = zero.field.axpy(0.5, &v);
    assert!(!is_fixed_point(&bundle, &kicked, 1.0, 16, 1e-3).unwrap());
}

#[test]
fn regularity_under_mode_doubling() {
    let p = chafee(32, 5.0);
    let set = find_all(&p, &SearchStrategy::default()).unwrap();
    let rep = check_regularity(&set, &p).unwrap();
    assert_eq!(rep.refined_modes, 64);
    assert!(rep.relative_change < 0.01);
    assert!(rep.max_sup <= 5f64.sqrt());
    assert!(rep.finite && rep.stable);
}

#[test]
fn remark3_spectrum_away_from_resonance() {
    let basis = make_basis(20, Domain::unit()).unwrap();
    for k in [2u64, 17, 50, 2400, 2402, 38000] {
        let term = NonlinearTerm::builtin("remark3", &[("k", k as f64)]).unwrap();
        let p = GalerkinProblem::unforced(&basis, term);
        let s = linearize(&p, &SpectralField::zeros(&basis));
        let count = (1..=20).filter(|j| ((j * j) as f64) < (k as f64).sqrt()).count();
        assert_eq!(s.unstable_dim, count, "k = {k}");
        assert_eq!(s.non_hyperbolic, 0);
    }
}

#[test]
fn forced_linear_problem() {
    let basis = make_basis(8, Domain::unit()).unwrap();
    let h = SpectralField::new(basis.clone(), (1..=8).map(|j| 1.0 / j as f64).collect()).unwrap();
    let p = GalerkinProblem::new(NonlinearTerm::builtin("zero", &[]).unwrap(), h.clone());
    let set = find_all(&p, &SearchStrategy::default()).unwrap();
    assert_eq!(set.len(), 1);
    for (j, a) in set.members[0].field.coeffs().iter().enumerate() {
        let l = ((j + 1) * (j + 1)) as f64;
        assert!((a - h.coeffs()[j] / l).abs() < 1e-12);
    }
}
