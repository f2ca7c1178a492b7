use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::{Equilibrium, EquilibriumSet};
use crate::error::{Error, Result};
use crate::msflow::{State, TrajectoryKind, TrajectorySample};
use crate::spectral::{GalerkinProblem, IntegratorOptions, Scheme, SpectralField};

#[derive(Debug, Clone, Serialize)]
pub struct TraceOptions {
    /// Seed amplitude; `None` uses `10⁻⁵(1 + ‖u*‖)`.
    pub eps: Option<f64>,
    /// Directions on the ring in the leading unstable eigenplane.
    pub ring: usize,
    pub horizon: f64,
    /// Runs are extended by doubling until the limit resolves or this is hit.
    pub max_horizon: f64,
    pub dt: f64,
    pub output_stride: usize,
    pub scheme: Scheme,
    /// H¹ distance for identifying the ω-limit.
    pub limit_tol: f64,
    /// Length of the linearized backward tail.
    pub backward_span: f64,
    pub backward_points: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            eps: None,
            ring: 16,
            horizon: 20.0,
            max_horizon: 160.0,
            dt: 1e-3,
            output_stride: 10,
            scheme: Scheme::ExponentialEuler,
            limit_tol: 1e-4,
            backward_span: 2.0,
            backward_points: 21,
        }
    }
}

impl TraceOptions {
    pub fn eps_for(&self, eq: &Equilibrium) -> f64 {
        self.eps.unwrap_or(1e-5 * (1.0 + eq.field.l2()))
    }
}

/// One orbit leaving an equilibrium along a seed direction in its
/// unstable space.
#[derive(Debug, Clone)]
pub struct ManifoldTrace {
    pub seed: String,
    /// Unit coefficient vector of the seed direction.
    pub direction: Vec<f64>,
    /// Seed coordinates in the unstable eigenbasis.
    pub weights: Vec<f64>,
    pub eps: f64,
    /// Two-sided: linearized tail for `t < 0`, forward run for `t ≥ 0`.
    pub trajectory: TrajectorySample<SpectralField>,
    /// Least-squares departure rate of `log‖u(t) − u*‖` on the seed segment.
    pub observed_rate: f64,
    /// The same fit applied to the linearized flow.
    pub predicted_rate: f64,
}

impl ManifoldTrace {
    pub fn rate_ok(&self) -> bool {
        let q = self.observed_rate / self.predicted_rate;
        q.is_finite() && (0.5..=2.0).contains(&q)
    }

    /// Forward part of the orbit, starting at the seed.
    pub fn forward(&self) -> Result<TrajectorySample<SpectralField>> {
        self.trajectory.restrict(0.0, self.trajectory.end())
    }
}

fn seeds(eq: &Equilibrium, ring: usize) -> Vec<(String, Vec<f64>)> {
    let d = eq.unstable_dim();
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    let push_pair = |out: &mut Vec<(String, Vec<f64>)>, name: String, w: Vec<f64>| {
        let neg: Vec<f64> = w.iter().map(|x| 0.0 - x).collect();
        out.push((format!("{name}+"), w));
        out.push((format!("{name}-"), neg));
    };
    if d == 1 {
        let mut w = vec![0.0; 1];
        w[0] = 1.0;
        push_pair(&mut out, "v1".into(), w);
        return out;
    }
    let half = (ring / 2).max(1);
    for k in 0..half {
        let theta = std::f64::consts::PI * k as f64 / half as f64;
        let mut w = vec![0.0; d];
        // exact axes avoid roundoff leaking out of invariant subspaces
        let (c, s) = match (2 * k) as f64 / half as f64 {
            0.0 => (1.0, 0.0),
            1.0 => (0.0, 1.0),
            _ => (theta.cos(), theta.sin()),
        };
        w[0] = c;
        w[1] = s;
        push_pair(&mut out, format!("ring{k}"), w);
    }
    for i in 2..d {
        let mut w = vec![0.0; d];
        w[i] = 1.0;
        push_pair(&mut out, format!("v{}", i + 1), w);
    }
    out
}

fn combine(eq: &Equilibrium, weights: &[f64]) -> Vec<f64> {
    let m = eq.field.coeffs().len();
    let mut dir = vec![0.0; m];
    for ((_, v), w) in eq.spectrum.unstable_modes().zip(weights) {
        if *w != 0.0 {
            for (d, x) in dir.iter_mut().zip(v) {
                *d += w * x;
            }
        }
    }
    dir
}

fn linear_distance(eq: &Equilibrium, weights: &[f64], eps: f64, t: f64) -> f64 {
    let s: f64 = eq
        .spectrum
        .unstable_modes()
        .zip(weights)
        .map(|((mu, _), w)| (w * (-mu * t).exp()).powi(2))
        .sum();
    eps * s.sqrt()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx > 0.0 { sxy / sxx } else { f64::NAN }
}

fn integrate_to_limit(
    problem: &GalerkinProblem,
    start: &SpectralField,
    set: &EquilibriumSet,
    opts: &TraceOptions,
) -> Result<TrajectorySample<SpectralField>> {
    let run = |u: &SpectralField, t: f64| {
        let o = IntegratorOptions::new(opts.dt, t).with_stride(opts.output_stride).with_scheme(opts.scheme);
        problem.integrate(u, &o)
    };
    let mut traj = run(start, opts.horizon)?;
    loop {
        match omega_limit(problem, &traj, set, opts.limit_tol) {
            Ok(_) => return Ok(traj),
            Err(Error::UnresolvedLimit { .. }) if traj.end() < opts.max_horizon => {
                let extra = traj.end().min(opts.max_horizon - traj.end());
                let more = run(traj.last_state(), extra)?;
                traj = append(&traj, &more)?;
            }
            Err(e) => return Err(e),
        }
    }
}

fn append(
    first: &TrajectorySample<SpectralField>,
    second: &TrajectorySample<SpectralField>,
) -> Result<TrajectorySample<SpectralField>> {
    let offset = first.end();
    let (mut times, mut states, kind) = first.clone().into_parts();
    for (t, s) in second.times().iter().zip(second.states()).skip(1) {
        times.push(offset + t);
        states.push(s.clone());
    }
    TrajectorySample::new(times, states, kind)
}

/// Traces the unstable manifold of `eq`: `u* ± eps·v` along each unstable
/// eigenvector, with a ring of directions when the unstable space has
/// dimension two or more. Returns nothing for stable equilibria.
pub fn trace_unstable_manifold(
    problem: &GalerkinProblem,
    eq: &Equilibrium,
    set: &EquilibriumSet,
    opts: &TraceOptions,
) -> Result<Vec<ManifoldTrace>> {
    let eps = opts.eps_for(eq);
    seeds(eq, opts.ring)
        .into_par_iter()
        .map(|(seed, weights)| trace_one(problem, eq, set, opts, eps, seed, weights))
        .collect()
}

fn trace_one(
    problem: &GalerkinProblem,
    eq: &Equilibrium,
    set: &EquilibriumSet,
    opts: &TraceOptions,
    eps: f64,
    seed: String,
    weights: Vec<f64>,
) -> Result<ManifoldTrace> {
    let direction = combine(eq, &weights);
    let start = eq.field.axpy(eps, &eq.field.with_coeffs(direction.clone()));
    let forward = integrate_to_limit(problem, &start, set, opts)?;

    // linearized backward tail u* + eps Σ w_i e^{−μ_i t} v_i, t < 0
    let mut times = Vec::new();
    let mut states = Vec::new();
    let n = opts.backward_points.max(2);
    for i in 0..n - 1 {
        let t = -opts.backward_span * (1.0 - i as f64 / (n - 1) as f64);
        let mut c = eq.field.coeffs().to_vec();
        for ((mu, v), w) in eq.spectrum.unstable_modes().zip(&weights) {
            let a = eps * w * (-mu * t).exp();
            for (x, y) in c.iter_mut().zip(v) {
                *x += a * y;
            }
        }
        times.push(t);
        states.push(eq.field.with_coeffs(c));
    }
    let (ft, fs, _) = forward.into_parts();
    times.extend(ft);
    states.extend(fs);
    let trajectory = TrajectorySample::new(times, states, TrajectoryKind::TwoSided)?;

    // departure rate while the orbit is still within 100·eps of u*
    let (mut ts, mut ls, mut lin) = (Vec::new(), Vec::new(), Vec::new());
    for (t, u) in trajectory.times().iter().zip(trajectory.states()) {
        if *t < 0.0 {
            continue;
        }
        let d = u.distance(&eq.field, crate::msflow::Metric::L2);
        if d > 100.0 * eps {
            break;
        }
        ts.push(*t);
        ls.push(d.ln());
        lin.push(linear_distance(eq, &weights, eps, *t).ln());
    }
    let (observed_rate, predicted_rate) = if ts.len() >= 3 {
        (slope(&ts, &ls), slope(&ts, &lin))
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ManifoldTrace { seed, direction, weights, eps, trajectory, observed_rate, predicted_rate })
}

/// Result of matching a terminal state to the equilibrium set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OmegaLimit {
    pub node: usize,
    /// Terminal H¹ distance to the node.
    pub distance: f64,
    /// `|E(t_end) − E(t_end/2)|`.
    pub drift: f64,
}

/// The equilibrium the trajectory settles on: energy plateau and terminal
/// H¹ distance within `tol`.
pub fn omega_limit(
    problem: &GalerkinProblem,
    traj: &TrajectorySample<SpectralField>,
    set: &EquilibriumSet,
    tol: f64,
) -> Result<OmegaLimit> {
    let end = traj.last_state();
    let mid_t = traj.start().max(0.0) + 0.5 * (traj.end() - traj.start().max(0.0));
    let mid = traj.state_at(mid_t)?;
    let drift = (problem.energy(end) - problem.energy(&mid)).abs();
    let (node, distance) = set.nearest(end).ok_or(Error::EmptySet)?;
    if drift < tol && distance <= tol {
        Ok(OmegaLimit { node, distance, drift })
    } else {
        Err(Error::UnresolvedLimit { distance, drift })
    }
}

/// Forward runs from `states` until each resolves to an equilibrium.
pub fn resolve_forward(
    problem: &GalerkinProblem,
    states: &[SpectralField],
    set: &EquilibriumSet,
    opts: &TraceOptions,
) -> Vec<Result<OmegaLimit>> {
    states
        .par_iter()
        .map(|u| {
            let traj = integrate_to_limit(problem, u, set, opts)?;
            omega_limit(problem, &traj, set, opts.limit_tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{find_all, SearchStrategy};
    use crate::nonlinearity::NonlinearTerm;
    use crate::spectral::{make_basis, Domain};

    fn setup(spec: &str) -> (GalerkinProblem, EquilibriumSet) {
        let p = GalerkinProblem::unforced(&make_basis(16, Domain::unit()).unwrap(), NonlinearTerm::parse(spec).unwrap());
        let set = find_all(&p, &SearchStrategy::default()).unwrap();
        (p, set)
    }

    #[test]
    fn stable_node_has_no_manifold() {
        let (p, set) = setup("cubic");
        let traces = trace_unstable_manifold(&p, &set.members[0], &set, &TraceOptions::default()).unwrap();
        assert!(traces.is_empty());
    }

    #[test]
    fn departure_along_first_mode() {
        let (p, set) = setup("chafee_infante(lambda=5)");
        let zero = set.members.iter().find(|e| e.field.l2() == 0.0).unwrap();
        let traces = trace_unstable_manifold(&p, zero, &set, &TraceOptions::default()).unwrap();
        assert_eq!(traces.len(), 16);
        let v1 = traces.iter().find(|t| t.seed == "ring0+").unwrap();
        assert!((v1.observed_rate - 4.0).abs() < 0.2, "{}", v1.observed_rate);
        assert!((v1.predicted_rate - 4.0).abs() < 1e-9);
        let lim = omega_limit(&p, &v1.trajectory, &set, 1e-4).unwrap();
        let target = &set.members[lim.node];
        assert_eq!(target.unstable_dim(), 0);
        assert!(target.field.coeffs()[0] > 0.0);
        assert!(traces.iter().all(|t| t.rate_ok()));
    }

    #[test]
    fn constant_trajectory_is_its_own_limit() {
        let (p, set) = setup("chafee_infante(lambda=5)");
        let e = &set.members[3];
        let traj = TrajectorySample::constant(e.field.clone(), 0.0, 1.0, 5).unwrap();
        let lim = omega_limit(&p, &traj, &set, 1e-4).unwrap();
        assert_eq!(lim.node, 3);
        assert_eq!(lim.distance, 0.0);
    }
}
