//! Stationary solutions of `−Δu + f(u) = h` in the Galerkin space: Newton
//! with deflation and multi-start, linearized spectra and the
//! `H₀¹ ∩ H²` regularity check.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{GalerkinProblem, SpectralBasis, SpectralField};

pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const DEDUP_TOLERANCE: f64 = 1e-6;
pub const HYPERBOLICITY_TOLERANCE: f64 = 1e-8;

/// Eigenpairs of `A + f'(u*)` restricted to the Galerkin span, ascending.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    /// Eigenvalues below `−HYPERBOLICITY_TOLERANCE`.
    pub unstable_dim: usize,
    /// Eigenvalues with `|μ| ≤ HYPERBOLICITY_TOLERANCE`.
    pub non_hyperbolic: usize,
}

impl Spectrum {
    pub fn is_hyperbolic(&self) -> bool {
        self.non_hyperbolic == 0
    }

    /// Unit (L²) unstable eigenvectors with their eigenvalues, most unstable first.
    pub fn unstable_modes(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.values
            .iter()
            .zip(&self.vectors)
            .take(self.unstable_dim)
            .map(|(v, w)| (*v, w.as_slice()))
    }
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub field: SpectralField,
    /// `(Σ λ_j⁻¹ r_j²)^{1/2}` for `r = −Δu + f(u) − h`.
    pub residual: f64,
    pub spectrum: Spectrum,
    pub h1_norm: f64,
    /// `‖Δu‖`.
    pub h2_norm: f64,
    pub sup_norm: f64,
    pub energy: f64,
    pub history: Vec<f64>,
}

impl Equilibrium {
    pub fn unstable_dim(&self) -> usize {
        self.spectrum.unstable_dim
    }

    fn assemble(problem: &GalerkinProblem, coeffs: Vec<f64>, history: Vec<f64>) -> Self {
        let field = SpectralField::new(problem.basis().clone(), coeffs)
            .expect("Newton iterates are finite");
        let spectrum = linearize(problem, &field);
        Self {
            residual: residual_norm(problem, &field),
            h1_norm: field.h1(),
            h2_norm: field.laplacian_norm(),
            sup_norm: field.sup_norm(),
            energy: problem.energy(&field),
            spectrum,
            field,
            history,
        }
    }
}

/// Coefficients of `−Δu + P_m f(u) − h`.
pub fn residual_coeffs(problem: &GalerkinProblem, coeffs: &[f64]) -> Vec<f64> {
    let mut r = problem.nonlinear_coeffs(coeffs);
    let lam = problem.basis().eigenvalues();
    for (j, v) in r.iter_mut().enumerate() {
        *v += lam[j] * coeffs[j] - problem.forcing().coeffs()[j];
    }
    r
}

/// Discrete `H⁻¹` norm `(Σ λ_j⁻¹ r_j²)^{1/2}`.
pub fn dual_norm(basis: &SpectralBasis, r: &[f64]) -> f64 {
    r.iter()
        .zip(basis.eigenvalues())
        .map(|(v, l)| v * v / l)
        .sum::<f64>()
        .sqrt()
}

pub fn residual_norm(problem: &GalerkinProblem, u: &SpectralField) -> f64 {
    dual_norm(problem.basis(), &residual_coeffs(problem, u.coeffs()))
}

/// `⟨(A + f'(u)) w_i, w_j⟩` with `f'` from the term (analytic when available).
pub fn jacobian(problem: &GalerkinProblem, coeffs: &[f64]) -> DMatrix<f64> {
    let basis = problem.basis();
    let m = basis.mode_count();
    let vals = basis.synthesize(coeffs);
    let d: Vec<f64> = vals.iter().map(|u| basis.weight() * problem.term().derivative(*u)).collect();
    let mut jac = DMatrix::<f64>::zeros(m, m);
    // mirror nodes summed pairwise keep parity blocks exactly decoupled
    for (q, mirror) in basis.mirror_pairs() {
        for i in 0..m {
            for j in i..m {
                let mut v = d[q] * basis.mode_value(q, i) * basis.mode_value(q, j);
                if let Some(r) = mirror {
                    v += d[r] * basis.mode_value(r, i) * basis.mode_value(r, j);
                }
                jac[(i, j)] += v;
            }
        }
    }
    for i in 0..m {
        jac[(i, i)] += basis.eigenvalues()[i];
        for j in 0..i {
            jac[(i, j)] = jac[(j, i)];
        }
    }
    jac
}

/// Spectrum of the linearization at `u`.
pub fn linearize(problem: &GalerkinProblem, u: &SpectralField) -> Spectrum {
    let eig = SymmetricEigen::new(jacobian(problem, u.coeffs()));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let col: Vec<f64> = eig.eigenvectors.column(i).iter().cloned().collect();
            // sign convention: largest-magnitude entry positive
            let pivot = col.iter().cloned().fold(0.0, |p: f64, c| if c.abs() > p.abs() { c } else { p });
            // entries at roundoff level are cleared so parity classes stay exact
            let floor = 1e-12 * pivot.abs();
            col.iter()
                .map(|c| if c.abs() < floor { 0.0 } else { c * pivot.signum() })
                .collect()
        })
        .collect();
    Spectrum {
        unstable_dim: values.iter().filter(|v| **v < -HYPERBOLICITY_TOLERANCE).count(),
        non_hyperbolic: values.iter().filter(|v| v.abs() <= HYPERBOLICITY_TOLERANCE).count(),
        values,
        vectors,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates with L² norm above this are treated as divergent.
    pub divergence: f64,
    /// Initial pseudo-time step for pseudo-transient continuation: solves
    /// `(J + I/τ)δ = −r` with `τ` grown as the residual falls, so early
    /// iterates follow the gradient flow into the basin of a stable state.
    pub pseudo_time: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: NEWTON_TOLERANCE, max_iter: 60, divergence: 1e4, pseudo_time: None }
    }
}

impl NewtonOptions {
    pub fn continuation(tau: f64) -> Self {
        Self { pseudo_time: Some(tau), max_iter: 400, ..Self::default() }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn newton_direction(problem: &GalerkinProblem, a: &[f64], r: &[f64], tau: Option<f64>) -> Option<Vec<f64>> {
    let mut jac = jacobian(problem, a);
    if let Some(t) = tau {
        for i in 0..a.len() {
            jac[(i, i)] += 1.0 / t;
        }
    }
    let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
    jac.lu().solve(&rhs).map(|d| d.iter().cloned().collect())
}

// deflation operator M(a) = Π (‖a − r_k‖^{−p} + σ) and ∇M / M
fn deflation(a: &[f64], found: &[Vec<f64>], power: f64, shift: f64) -> (f64, Vec<f64>) {
    let mut m = 1.0;
    let mut grad = vec![0.0; a.len()];
    for root in found {
        let diff: Vec<f64> = a.iter().zip(root).map(|(x, y)| x - y).collect();
        let dist = l2(&diff).max(1e-300);
        let factor = dist.powf(-power) + shift;
        m *= factor;
        let coef = -power * dist.powf(-power - 2.0) / factor;
        for (g, d) in grad.iter_mut().zip(&diff) {
            *g += coef * d;
        }
    }
    (m, grad)
}

fn newton_core(
    problem: &GalerkinProblem,
    start: &[f64],
    found: &[Vec<f64>],
    opts: &NewtonOptions,
    deflate: (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>)> {
    let basis = problem.basis();
    let mut a = start.to_vec();
    let mut history = Vec::new();
    let mut tau = if found.is_empty() { opts.pseudo_time } else { None };
    let merit = |a: &[f64]| -> f64 {
        let r = dual_norm(basis, &residual_coeffs(problem, a));
        if found.is_empty() { r } else { deflation(a, found, deflate.0, deflate.1).0 * r }
    };
    for it in 0..opts.max_iter {
        let r = residual_coeffs(problem, &a);
        let rn = dual_norm(basis, &r);
        history.push(rn);
        if rn <= opts.tol {
            return Ok((a, history));
        }
        let fail = |history: Vec<f64>, a: Vec<f64>| Error::NewtonFailure {
            iterations: it + 1,
            residual: rn,
            history,
            last: a,
        };
        let Some(mut d) = newton_direction(problem, &a, &r, tau) else {
            return Err(fail(history, a));
        };
        if let Some(t) = tau {
            let trial: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + y).collect();
            if trial.iter().any(|x| !x.is_finite()) || l2(&trial) > opts.divergence {
                return Err(fail(history, a));
            }
            let next = dual_norm(basis, &residual_coeffs(problem, &trial));
            // switched evolution relaxation
            let grown = t * rn / next.max(1e-300);
            tau = if grown > 1e12 { None } else { Some(grown) };
            a = trial;
            continue;
        }
        if !found.is_empty() {
            let (m, grad) = deflation(&a, found, deflate.0, deflate.1);
            let _ = m;
            let gd: f64 = grad.iter().zip(&d).map(|(g, x)| g * x).sum();
            let beta = 1.0 / (1.0 - gd);
            d.iter_mut().for_each(|x| *x *= beta);
        }
        let current = merit(&a);
        let mut step = 1.0;
        let mut trial: Vec<f64>;
        loop {
            trial = a.iter().zip(&d).map(|(x, y)| x + step * y).collect();
            let m = merit(&trial);
            if (m.is_finite() && m < (1.0 - 1e-4 * step) * current) || step < 1.0 / 256.0 {
                break;
            }
            step *= 0.5;
        }
        if trial.iter().any(|x| !x.is_finite()) || l2(&trial) > opts.divergence {
            return Err(fail(history, a));
        }
        a = trial;
    }
    let rn = dual_norm(basis, &residual_coeffs(problem, &a));
    Err(Error::NewtonFailure { iterations: opts.max_iter, residual: rn, history, last: a })
}

/// Newton's method for the Galerkin stationary problem from `u_init`.
///
/// For merely continuous `f` the Jacobian comes from finite differences
/// and convergence is not guaranteed.
pub fn newton_solve(problem: &GalerkinProblem, u_init: &SpectralField, opts: &NewtonOptions) -> Result<Equilibrium> {
    u_init.same_basis(problem.forcing())?;
    let (a, history) = newton_core(problem, u_init.coeffs(), &[], opts, (2.0, 1.0))?;
    Ok(Equilibrium::assemble(problem, a, history))
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchStrategy {
    /// Starts are `a · w_j` for `j ≤ modes` and each amplitude `a`, plus 0.
    pub modes: usize,
    pub amplitudes: Vec<f64>,
    pub max_rounds: usize,
    pub dedup_tol: f64,
    pub newton: NewtonOptions,
    /// Add `−u*` for odd `f` and `h = 0`.
    pub symmetry: bool,
    pub deflation_power: f64,
    pub deflation_shift: f64,
}

impl Default for SearchStrategy {
    fn default() -> Self {
        Self {
            modes: 3,
            amplitudes: vec![-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0],
            max_rounds: 4,
            dedup_tol: DEDUP_TOLERANCE,
            newton: NewtonOptions::default(),
            symmetry: true,
            deflation_power: 2.0,
            deflation_shift: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SearchLog {
    pub starts: usize,
    pub rounds: usize,
    pub deflated_solves: usize,
    pub converged: usize,
    pub duplicates: usize,
    pub failures: usize,
    pub symmetric_additions: usize,
}

#[derive(Debug, Clone)]
pub struct EquilibriumSet {
    pub members: Vec<Equilibrium>,
    pub dedup_tol: f64,
    pub log: SearchLog,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn fields(&self) -> Vec<SpectralField> {
        self.members.iter().map(|e| e.field.clone()).collect()
    }

    /// Index and H¹ distance of the member nearest to `u`.
    pub fn nearest(&self, u: &SpectralField) -> Option<(usize, f64)> {
        self.members
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.field.distance_h1(u)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Wrap a single known equilibrium.
    pub fn singleton(eq: Equilibrium) -> Self {
        Self { members: vec![eq], dedup_tol: DEDUP_TOLERANCE, log: SearchLog::default() }
    }
}

fn is_new(candidate: &[f64], found: &[Vec<f64>], tol: f64) -> bool {
    found.iter().all(|f| {
        let d: f64 = candidate.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        d > tol
    })
}

/// Multi-start Newton with deflation; rounds are sequential, starts within
/// a round run in parallel.
pub fn find_all(problem: &GalerkinProblem, strategy: &SearchStrategy) -> Result<EquilibriumSet> {
    let basis = problem.basis();
    let m = basis.mode_count();
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; m]];
    for j in 0..strategy.modes.min(m) {
        for &a in &strategy.amplitudes {
            let mut s = vec![0.0; m];
            s[j] = a;
            starts.push(s);
        }
    }
    let mut log = SearchLog { starts: starts.len(), ..SearchLog::default() };
    let mut found: Vec<Vec<f64>> = Vec::new();
    let deflate = (strategy.deflation_power, strategy.deflation_shift);

    for round in 0..strategy.max_rounds.max(1) {
        log.rounds = round + 1;
        let snapshot = found.clone();
        let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = starts
            .par_iter()
            .map(|s| newton_core(problem, s, &snapshot, &strategy.newton, deflate))
            .collect();
        if round > 0 {
            log.deflated_solves += results.len();
        }
        let mut added = 0;
        for res in results {
            match res {
                Ok((a, _)) => {
                    log.converged += 1;
                    if is_new(&a, &found, strategy.dedup_tol) {
                        found.push(a);
                        added += 1;
                    } else {
                        log.duplicates += 1;
                    }
                }
                Err(_) => log.failures += 1,
            }
        }
        if round > 0 && added == 0 {
            break;
        }
    }

    let unforced = problem.forcing().coeffs().iter().all(|h| *h == 0.0);
    if strategy.symmetry && unforced && problem.term().is_odd() {
        // negation is exact in the discretization, so partners are snapped to −u
        let mut i = 0;
        while i < found.len() {
            let mirrored: Vec<f64> = found[i].iter().map(|x| 0.0 - x).collect();
            match found.iter().position(|b| !is_new(&mirrored, std::slice::from_ref(b), strategy.dedup_tol)) {
                Some(j) if j > i => found[j] = mirrored,
                Some(_) => {}
                None => {
                    let verified = newton_core(problem, &mirrored, &[], &strategy.newton, deflate);
                    if let Ok((a, _)) = verified {
                        if !is_new(&a, std::slice::from_ref(&mirrored), strategy.dedup_tol) {
                            found.push(mirrored);
                            log.symmetric_additions += 1;
                        }
                    }
                }
            }
            i += 1;
        }
    }

    let mut members: Vec<Equilibrium> = found
        .par_iter()
        .map(|a| {
            let (a, history) = newton_core(problem, a, &[], &strategy.newton, deflate)?;
            Ok(Equilibrium::assemble(problem, a, history))
        })
        .collect::<Result<_>>()?;
    if members.is_empty() {
        return Err(Error::Solver(format!(
            "no equilibrium found from {} starts; the stationary set is never empty",
            log.starts
        )));
    }
    members.sort_by(|a, b| {
        b.energy
            .total_cmp(&a.energy)
            .then(b.field.coeffs()[0].total_cmp(&a.field.coeffs()[0]))
            .then(b.field.coeffs().get(1).unwrap_or(&0.0).total_cmp(a.field.coeffs().get(1).unwrap_or(&0.0)))
    });
    Ok(EquilibriumSet { members, dedup_tol: strategy.dedup_tol, log })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub max_h1: f64,
    pub max_laplacian: f64,
    pub max_sup: f64,
    pub refined_modes: usize,
    pub refined_max_h1: f64,
    pub refined_max_laplacian: f64,
    /// Largest relative change of `‖Δu‖` over members under mode doubling.
    pub relative_change: f64,
    pub finite: bool,
    pub stable: bool,
}

/// Bounds in `H₀¹` and `H²` over the set, re-solved with twice the modes.
pub fn check_regularity(set: &EquilibriumSet, problem: &GalerkinProblem) -> Result<RegularityReport> {
    let basis = problem.basis();
    let refined = Arc::new(SpectralBasis::with_grid(
        2 * basis.mode_count(),
        2 * basis.intervals(),
        basis.domain(),
    )?);
    let fine = problem.rebased(&refined);
    let opts = NewtonOptions::default();
    let resolved: Vec<Equilibrium> = set
        .members
        .par_iter()
        .map(|e| newton_solve(&fine, &e.field.resized(&refined), &opts))
        .collect::<Result<_>>()?;
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let mut relative_change: f64 = 0.0;
    for (a, b) in set.members.iter().zip(&resolved) {
        let scale = a.h2_norm.max(b.h2_norm);
        if scale > 0.0 {
            relative_change = relative_change.max((a.h2_norm - b.h2_norm).abs() / scale);
        }
    }
    let max_h1 = max(&mut set.members.iter().map(|e| e.h1_norm));
    let max_laplacian = max(&mut set.members.iter().map(|e| e.h2_norm));
    Ok(RegularityReport {
        max_h1,
        max_laplacian,
        max_sup: max(&mut set.members.iter().map(|e| e.sup_norm)),
        refined_modes: refined.mode_count(),
        refined_max_h1: max(&mut resolved.iter().map(|e| e.h1_norm)),
        refined_max_laplacian: max(&mut resolved.iter().map(|e| e.h2_norm)),
        relative_change,
        finite: max_h1.is_finite() && max_laplacian.is_finite(),
        stable: relative_change < 0.01,
    })
}
