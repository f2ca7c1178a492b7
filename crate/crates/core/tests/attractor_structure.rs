use attractor_lab::attractor::{
    build_attractor, dimension_scan, energy_descent_audit, is_negation_symmetric, linf_bound, omega_limit,
    verify_linf, BuildParams,
};
use attractor_lab::equilibria::{find_all, EquilibriumSet, SearchStrategy};
use attractor_lab::spectral::IntegratorOptions;
use attractor_lab::{make_basis, Domain, Error, GalerkinProblem, NonlinearTerm, SpectralField, TrajectorySample};

fn setup(m: usize, spec: &str) -> (GalerkinProblem, EquilibriumSet) {
    let p = GalerkinProblem::unforced(&make_basis(m, Domain::unit()).unwrap(), NonlinearTerm::parse(spec).unwrap());
    let set = find_all(&p, &SearchStrategy::default()).unwrap();
    (p, set)
}

#[test]
fn omega_limits_of_simple_runs() {
    let (p, set) = setup(16, "chafee_infante(lambda=5)");
    let opts = IntegratorOptions::new(1e-3, 40.0).with_stride(100);

    let from_w1 = p.integrate(&SpectralField::mode(p.basis(), 1, 0.1).unwrap(), &opts).unwrap();
    let lim = omega_limit(&p, &from_w1, &set, 1e-4).unwrap();
    let phi1 = &set.members[lim.node];
    assert_eq!(phi1.unstable_dim(), 0);
    assert!(phi1.field.coeffs()[0] > 1.0);

    // odd data about π/2 stay in the invariant subspace and settle on ±φ₂
    let from_w2 = p.integrate(&SpectralField::mode(p.basis(), 2, 0.1).unwrap(), &opts).unwrap();
    let lim = omega_limit(&p, &from_w2, &set, 1e-4).unwrap();
    let node = &set.members[lim.node];
    assert_eq!(node.unstable_dim(), 1);
    assert!(node.field.coeffs()[1] > 0.0 && node.field.coeffs()[0] == 0.0);

    for e in &set.members {
        let still = TrajectorySample::constant(e.field.clone(), 0.0, 1.0, 4).unwrap();
        let lim = omega_limit(&p, &still, &set, 1e-4).unwrap();
        assert_eq!(lim.distance, 0.0);
        assert_eq!(set.members[lim.node].field, e.field);
    }

    let short = p.integrate(&SpectralField::mode(p.basis(), 1, 0.1).unwrap(), &IntegratorOptions::new(1e-3, 0.5)).unwrap();
    assert!(matches!(omega_limit(&p, &short, &set, 1e-4), Err(Error::UnresolvedLimit { .. })));
}

#[test]
fn single_node_attractors() {
    for spec in ["cubic", "chafee_infante(lambda=0.5)"] {
        let (p, set) = setup(16, spec);
        assert_eq!(set.len(), 1);
        let g = build_attractor(&p, &set, &BuildParams::default()).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.attractor_sample.len(), 1);
        assert!(energy_descent_audit(&p, &g, 1e-8).passed);
    }
    let (p, _) = setup(16, "cubic");
    assert_eq!(linf_bound(&p).m, 0.0);
}

#[test]
fn chafee_infante_structure() {
    let (p, set) = setup(16, "chafee_infante(lambda=5)");
    let params = BuildParams { check_eps: true, ..BuildParams::default() };
    let g = build_attractor(&p, &set, &params).unwrap();
    assert_eq!(g.nodes.len(), 5);
    assert!(g.forward_resolved(), "{:?}", g.unresolved);
    assert!(g.backward_resolved());
    assert!(g.edges.iter().all(|e| !e.homoclinic()));
    let side = g.stable_side.as_ref().unwrap();
    assert!(side.passed(), "{side:?}");
    let eps = g.eps_robustness.as_ref().unwrap();
    assert!(eps.passed(), "{eps:?}");

    // 0 reaches both ±φ₁ and both ±φ₂
    let zero = set.members.iter().position(|e| e.field.l2() == 0.0).unwrap();
    let sinks: Vec<usize> = g.adjacency().iter().filter(|(s, _)| *s == zero).map(|(_, t)| *t).collect();
    assert_eq!(sinks.len(), 4);
    // saddles ±φ₂ drain into the stable pair ±φ₁
    for (s, t) in g.adjacency() {
        if set.members[s].unstable_dim() == 1 {
            assert_eq!(set.members[t].unstable_dim(), 0);
        }
    }

    let audit = energy_descent_audit(&p, &g, 1e-8);
    assert!(audit.passed, "{:?}", audit.failures);
    assert!(is_negation_symmetric(&g, 1e-10));

    let bound = linf_bound(&p);
    assert!(verify_linf(&bound, &g.attractor_sample, 1e-2).passed);
    let e_max = set.members.iter().map(|e| e.energy).fold(f64::NEG_INFINITY, f64::max);
    for u in &g.attractor_sample {
        assert!(p.energy(u) <= e_max + 1e-8);
    }
}

#[test]
fn dimension_table() {
    let basis = make_basis(20, Domain::unit()).unwrap();
    let ladder = [2u64, 17, 82, 257, 626, 1297, 2402, 4097, 6562, 10001, 14642, 20737, 28562, 38417];
    let scan = dimension_scan(&ladder, &basis).unwrap();
    assert!(scan.strictly_increasing());
    assert!(scan.consistent());
    let n: Vec<usize> = scan.rows.iter().map(|r| r.n_k).collect();
    assert_eq!(n, (1..=14).collect::<Vec<_>>());

    for k in [1u64, 16, 2401, 38416] {
        match dimension_scan(&[k], &basis) {
            Err(Error::Resonant { k: got, eigenvalue, suggestion }) => {
                assert_eq!(got, k);
                assert_eq!(eigenvalue * eigenvalue, k as f64);
                assert!(dimension_scan(&[suggestion], &basis).is_ok());
            }
            other => panic!("k = {k}: {other:?}"),
        }
    }
    assert!(dimension_scan(&[160_001], &basis).is_err());
}
