use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::SpectralBasis;
use super::field::SpectralField;
use crate::error::{Error, Result};
use crate::msflow::{TrajectoryBundle, TrajectoryKind, TrajectorySample};
use crate::nonlinearity::{make_ensemble, BranchPolicy, NonlinearTerm};

/// Coefficients below this are set to zero after each step.
pub const UNDERFLOW_FLOOR: f64 = 1e-200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// First-order exponential Euler.
    ExponentialEuler,
    /// Second-order exponential Runge–Kutta (ETD2RK).
    Etd2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub dt: f64,
    pub t_end: f64,
    pub output_stride: usize,
    pub scheme: Scheme,
    /// Upper bound on `dt · |f'(u)|` before a step is split into substeps.
    pub stiffness_limit: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            output_stride: 1,
            scheme: Scheme::ExponentialEuler,
            stiffness_limit: 0.5,
        }
    }
}

impl IntegratorOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, ..Self::default() }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt and T must be positive (dt = {}, T = {})",
                self.dt, self.t_end
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidParameter("output stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Components of `E(u) = ‖u‖²_{H₀¹} + 2(F(u),1) − 2(h,u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParts {
    pub h1_sq: f64,
    pub potential: f64,
    pub forcing: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.h1_sq + self.potential + self.forcing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy: f64,
    pub h1_sq: f64,
    pub potential: f64,
    pub forcing: f64,
    /// `2 ∫₀ᵗ ‖u_t‖²`, accumulated from per-step differences.
    pub dissipation: f64,
}

/// `u_t − Δu + f(u) = h` projected onto the first `m` eigenfunctions.
#[derive(Debug, Clone)]
pub struct GalerkinProblem {
    basis: Arc<SpectralBasis>,
    term: NonlinearTerm,
    forcing: SpectralField,
}

// (1 - e^{-z})/z and (e^{-z} - 1 + z)/z²
fn phi1(z: f64) -> f64 {
    if z < 1e-8 {
        1.0 - z / 2.0
    } else {
        -(-z).exp_m1() / z
    }
}

fn phi2(z: f64) -> f64 {
    if z < 1e-3 {
        0.5 - z / 6.0 + z * z / 24.0
    } else {
        ((-z).exp_m1() + z) / (z * z)
    }
}

impl GalerkinProblem {
    pub fn new(term: NonlinearTerm, forcing: SpectralField) -> Self {
        Self { basis: forcing.basis().clone(), term, forcing }
    }

    pub fn unforced(basis: &Arc<SpectralBasis>, term: NonlinearTerm) -> Self {
        Self::new(term, SpectralField::zeros(basis))
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn term(&self) -> &NonlinearTerm {
        &self.term
    }

    pub fn forcing(&self) -> &SpectralField {
        &self.forcing
    }

    pub fn with_term(&self, term: NonlinearTerm) -> Self {
        Self { term, ..self.clone() }
    }

    /// Same problem on another basis (forcing truncated or zero-padded).
    pub fn rebased(&self, basis: &Arc<SpectralBasis>) -> Self {
        Self { basis: basis.clone(), term: self.term.clone(), forcing: self.forcing.resized(basis) }
    }

    /// `P_m f(u)` by collocation on the quadrature grid.
    pub fn nonlinear_coeffs(&self, coeffs: &[f64]) -> Vec<f64> {
        let vals: Vec<f64> = self
            .basis
            .synthesize(coeffs)
            .into_iter()
            .map(|u| self.term.eval(u))
            .collect();
        self.basis.analyze(&vals)
    }

    // −P f(u) + h
    fn explicit_part(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut n = self.nonlinear_coeffs(coeffs);
        for (v, h) in n.iter_mut().zip(self.forcing.coeffs()) {
            *v = h - *v;
        }
        n
    }

    /// `−λ_j a_j − (P_m f(u))_j + h_j`.
    pub fn rhs(&self, u: &SpectralField) -> SpectralField {
        let mut n = self.explicit_part(u.coeffs());
        for ((v, a), l) in n.iter_mut().zip(u.coeffs()).zip(self.basis.eigenvalues()) {
            *v -= l * a;
        }
        u.with_coeffs(n)
    }

    pub fn energy_parts(&self, u: &SpectralField) -> EnergyParts {
        let vals: Vec<f64> = u.grid_values().iter().map(|v| self.term.primitive(*v)).collect();
        EnergyParts {
            h1_sq: u.h1_sq(),
            potential: 2.0 * self.basis.integrate(&vals),
            forcing: -2.0 * self.forcing.dot(u),
        }
    }

    pub fn energy(&self, u: &SpectralField) -> f64 {
        self.energy_parts(u).total()
    }

    /// One exponential-integrator step: the linear part `−λ_j a_j` is
    /// propagated exactly, the nonlinear part explicitly.
    pub fn step(&self, u: &SpectralField, dt: f64, scheme: Scheme) -> Result<SpectralField> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let a = u.coeffs();
        let lam = self.basis.eigenvalues();
        let n0 = self.explicit_part(a);
        let mut next: Vec<f64> = a
            .iter()
            .zip(&n0)
            .zip(lam)
            .map(|((a, n), l)| (-l * dt).exp() * a + dt * phi1(l * dt) * n)
            .collect();
        if scheme == Scheme::Etd2 {
            let n1 = self.explicit_part(&next);
            for (((v, p), q), l) in next.iter_mut().zip(&n1).zip(&n0).zip(lam) {
                *v += dt * phi2(l * dt) * (p - q);
            }
        }
        if let Some(j) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: f64::NAN, mode: j + 1 });
        }
        // decayed modes would otherwise sink into subnormal arithmetic
        for v in next.iter_mut() {
            if v.abs() < UNDERFLOW_FLOOR {
                *v = 0.0;
            }
        }
        Ok(u.with_coeffs(next))
    }

    /// Advance by `dt`, splitting into equal substeps when `dt · |f'(u)|`
    /// on the grid exceeds `limit`.
    pub fn advance(&self, u: &SpectralField, dt: f64, scheme: Scheme, limit: f64) -> Result<SpectralField> {
        let rate = u
            .grid_values()
            .iter()
            .map(|v| self.term.stiffness(*v))
            .fold(0.0, f64::max);
        let substeps = ((dt * rate / limit).ceil() as usize).max(1);
        if substeps == 1 {
            return self.step(u, dt, scheme);
        }
        let h = dt / substeps as f64;
        let mut cur = u.clone();
        for _ in 0..substeps {
            cur = self.step(&cur, h, scheme)?;
        }
        Ok(cur)
    }

    /// Forward run on `[0, t_end]`; samples every `output_stride` steps and at `t_end`.
    pub fn integrate(&self, u0: &SpectralField, opts: &IntegratorOptions) -> Result<TrajectorySample<SpectralField>> {
        opts.validate()?;
        u0.same_basis(&self.forcing)?;
        let full = ((opts.t_end / opts.dt) * (1.0 + 1e-12)).floor() as usize;
        let rest = opts.t_end - full as f64 * opts.dt;
        let partial = rest > 1e-9 * opts.dt;
        let mut times = vec![0.0];
        let mut states = vec![u0.clone()];
        let mut cur = u0.clone();
        let blow = |e: Error, t: f64| match e {
            Error::BlowUp { mode, .. } => Error::BlowUp { time: t, mode },
            e => e,
        };
        for n in 1..=full {
            let t = n as f64 * opts.dt;
            cur = self
                .advance(&cur, opts.dt, opts.scheme, opts.stiffness_limit)
                .map_err(|e| blow(e, t))?;
            if n % opts.output_stride == 0 || (n == full && !partial) {
                times.push(t);
                states.push(cur.clone());
            }
        }
        if partial {
            cur = self
                .advance(&cur, rest, opts.scheme, opts.stiffness_limit)
                .map_err(|e| blow(e, opts.t_end))?;
            times.push(opts.t_end);
            states.push(cur);
        }
        TrajectorySample::new(times, states, TrajectoryKind::ForwardOnly)
    }

    /// One trajectory per ensemble member of `policy`, integrated in parallel.
    pub fn integrate_ensemble(
        &self,
        u0: &SpectralField,
        opts: &IntegratorOptions,
        policy: &BranchPolicy,
    ) -> Result<Vec<TrajectorySample<SpectralField>>> {
        let members = make_ensemble(u0, policy)?;
        members
            .par_iter()
            .map(|m| match m.mollifier {
                Some(r) => self.with_term(self.term.mollified(r)).integrate(&m.field, opts),
                None => self.integrate(&m.field, opts),
            })
            .collect()
    }
}

/// Right-hand side of the Galerkin system for `u`, `f`, `h`.
pub fn galerkin_rhs(u: &SpectralField, f: &NonlinearTerm, h: &SpectralField) -> Result<SpectralField> {
    u.same_basis(h)?;
    Ok(GalerkinProblem::new(f.clone(), h.clone()).rhs(u))
}

/// Energy along a trajectory, with `2∫‖u_t‖²` accumulated between samples.
pub fn energy_series(problem: &GalerkinProblem, traj: &TrajectorySample<SpectralField>) -> Vec<EnergyRecord> {
    let parts: Vec<EnergyParts> = traj.states().par_iter().map(|u| problem.energy_parts(u)).collect();
    let mut out = Vec::with_capacity(parts.len());
    let mut dissipation = 0.0;
    for (k, (t, p)) in traj.times().iter().zip(&parts).enumerate() {
        if k > 0 {
            let dt = t - traj.times()[k - 1];
            let du = traj.states()[k].distance_l2(&traj.states()[k - 1]);
            dissipation += 2.0 * du * du / dt;
        }
        out.push(EnergyRecord {
            t: *t,
            energy: p.total(),
            h1_sq: p.h1_sq,
            potential: p.potential,
            forcing: p.forcing,
            dissipation,
        });
    }
    out
}

/// Largest `|E(t) + 2∫₀ᵗ‖u_t‖² − E(0)|` over a series.
pub fn energy_equality_residual(series: &[EnergyRecord]) -> f64 {
    let e0 = series[0].energy;
    series
        .iter()
        .map(|r| (r.energy + r.dissipation - e0).abs())
        .fold(0.0, f64::max)
}

/// The Galerkin semiflow as a trajectory bundle.
#[derive(Debug, Clone)]
pub struct GalerkinBundle {
    pub problem: GalerkinProblem,
    pub dt: f64,
    pub scheme: Scheme,
    pub policy: BranchPolicy,
    pub output_stride: usize,
}

impl GalerkinBundle {
    pub fn new(problem: GalerkinProblem, dt: f64, policy: BranchPolicy) -> Self {
        Self { problem, dt, scheme: Scheme::ExponentialEuler, policy, output_stride: 1 }
    }
}

impl TrajectoryBundle<SpectralField> for GalerkinBundle {
    fn generate(&self, x0: &SpectralField, horizon: f64) -> Result<Vec<TrajectorySample<SpectralField>>> {
        if horizon <= 0.0 {
            return Ok(vec![TrajectorySample::new(vec![0.0], vec![x0.clone()], TrajectoryKind::ForwardOnly)?]);
        }
        let opts = IntegratorOptions {
            dt: self.dt,
            t_end: horizon,
            output_stride: self.output_stride,
            scheme: self.scheme,
            ..IntegratorOptions::default()
        };
        self.problem.integrate_ensemble(x0, &opts, &self.policy)
    }

    fn resolution(&self) -> f64 {
        self.dt * self.output_stride as f64
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::Domain;

    fn setup(m: usize, term: &str) -> GalerkinProblem {
        let b = Arc::new(SpectralBasis::new(m, Domain::unit()).unwrap());
        GalerkinProblem::unforced(&b, NonlinearTerm::parse(term).unwrap())
    }

    #[test]
    fn rhs_cases() {
        let p = setup(6, "cubic");
        let z = SpectralField::zeros(p.basis());
        assert!(p.rhs(&z).coeffs().iter().all(|v| *v == 0.0));

        // w₁³ = (2/π)(¾ w₁ − ¼ w₃)
        let w1 = SpectralField::mode(p.basis(), 1, 1.0).unwrap();
        let r = p.rhs(&w1);
        assert!((r.coeffs()[0] - (-1.0 - 3.0 / (2.0 * PI))).abs() < 1e-13);
        assert!((r.coeffs()[2] - 1.0 / (2.0 * PI)).abs() < 1e-13);

        let heat = setup(6, "zero");
        let h = SpectralField::new(heat.basis().clone(), vec![0.5, 0.0, 1.0, 0.0, 0.0, 2.0]).unwrap();
        let u = SpectralField::new(heat.basis().clone(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let r = galerkin_rhs(&u, heat.term(), &h).unwrap();
        for (j, v) in r.coeffs().iter().enumerate() {
            let l = ((j + 1) * (j + 1)) as f64;
            assert!((v - (-l * u.coeffs()[j] + h.coeffs()[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_step_is_exact() {
        let p = setup(4, "zero");
        let w1 = SpectralField::mode(p.basis(), 1, 1.0).unwrap();
        let s = p.step(&w1, 1.0, Scheme::ExponentialEuler).unwrap();
        assert_eq!(s.coeffs()[0], (-1.0f64).exp());
        let u = SpectralField::new(p.basis().clone(), vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let traj = p.integrate(&u, &IntegratorOptions::new(0.01, 0.5)).unwrap();
        let end = traj.last_state();
        for (j, a) in end.coeffs().iter().enumerate() {
            let l = ((j + 1) * (j + 1)) as f64;
            assert!((a - (-l * 0.5).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn step_consistent_with_rhs() {
        let p = setup(8, "cubic");
        let w1 = SpectralField::mode(p.basis(), 1, 1.0).unwrap();
        let rhs = p.rhs(&w1);
        for scheme in [Scheme::ExponentialEuler, Scheme::Etd2] {
            let dt = 1e-7;
            let s = p.step(&w1, dt, scheme).unwrap();
            for (j, (a, b)) in s.coeffs().iter().zip(w1.coeffs()).enumerate() {
                let fd = (a - b) / dt;
                assert!((fd - rhs.coeffs()[j]).abs() < 1e-5, "{scheme:?} mode {j}");
            }
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let b = Arc::new(SpectralBasis::new(2, Domain::unit()).unwrap());
        let k = crate::nonlinearity::GrowthConstants { c1: 1.0, c2: 0.0, alpha: 0.0, d1: 1.0, d2: 0.0, delta: 0.0 };
        let bad = NonlinearTerm::custom(
            "anti",
            Arc::new(|u: f64| -u.powi(5)),
            Some(Arc::new(|_| 0.0)),
            k,
            crate::nonlinearity::Regularity::OneSidedLipschitz,
            true,
        );
        let p = GalerkinProblem::unforced(&b, bad);
        let u = SpectralField::mode(&b, 1, 3.0).unwrap();
        match p.integrate(&u, &IntegratorOptions::new(0.1, 50.0)) {
            Err(Error::BlowUp { time, mode }) => {
                assert!(time.is_finite() && time > 0.0);
                assert!(mode >= 1);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn energy_of_simple_fields() {
        let p = setup(6, "cubic");
        assert_eq!(p.energy(&SpectralField::zeros(p.basis())), 0.0);
        let w1 = SpectralField::mode(p.basis(), 1, 1.0).unwrap();
        assert!((p.energy(&w1) - (1.0 + 3.0 / (4.0 * PI))).abs() < 1e-13);
    }

    #[test]
    fn partial_final_step_lands_on_horizon() {
        let p = setup(4, "cubic");
        let w1 = SpectralField::mode(p.basis(), 1, 0.5).unwrap();
        let traj = p.integrate(&w1, &IntegratorOptions::new(0.1, 0.25)).unwrap();
        assert_eq!(traj.end(), 0.25);
        assert_eq!(traj.len(), 4);
    }
}
