use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::msflow::TrajectorySample;
use crate::spectral::{energy_series, GalerkinProblem, IntegratorOptions, SpectralBasis, SpectralField};

/// An empirically fitted bound: constants, the worst slack over all trials
/// and whether the fit survived refinement.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCertificate {
    pub name: String,
    pub constants: BTreeMap<String, f64>,
    pub trials: usize,
    pub worst_slack: f64,
    pub refinement_stable: Option<bool>,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl BoundCertificate {
    fn new(name: &str, trials: usize) -> Self {
        Self {
            name: name.into(),
            constants: BTreeMap::new(),
            trials,
            worst_slack: f64::INFINITY,
            refinement_stable: None,
            passed: false,
            notes: Vec::new(),
        }
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }

    fn set(&mut self, key: &str, value: f64) {
        self.constants.insert(key.into(), value);
    }

    fn finish(mut self) -> Self {
        if !self.worst_slack.is_finite() {
            self.worst_slack = 0.0;
        }
        let stable = self.refinement_stable.unwrap_or(true);
        self.passed = self.worst_slack >= 0.0 && stable && self.constants.values().all(|c| c.is_finite());
        self
    }
}

/// Zero first, then random directions with `1/j` decay at norms spread
/// geometrically from `max_norm / 100` up to `max_norm`.
pub fn trial_suite(basis: &std::sync::Arc<SpectralBasis>, count: usize, max_norm: f64, seed: u64) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = basis.mode_count();
    let mut out = vec![SpectralField::zeros(basis)];
    let rest = count.saturating_sub(1);
    for i in 0..rest {
        let frac = if rest > 1 { i as f64 / (rest - 1) as f64 } else { 1.0 };
        let norm = max_norm * 100f64.powf(frac - 1.0);
        let dir: Vec<f64> = (0..m)
            .map(|j| rng.sample::<f64, _>(StandardNormal) / (j + 1) as f64)
            .collect();
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let coeffs = dir.iter().map(|x| norm * x / len).collect();
        out.push(SpectralField::from_parts(basis.clone(), coeffs));
    }
    out.truncate(count.max(1));
    out
}

/// Forward runs of a trial suite.
#[derive(Debug, Clone)]
pub struct TrialRuns {
    pub initial: Vec<SpectralField>,
    pub runs: Vec<TrajectorySample<SpectralField>>,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: f64,
}

impl TrialRuns {
    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Same trials at half the time step.
    pub fn refined(&self, problem: &GalerkinProblem) -> Result<Self> {
        run_trials(problem, &self.initial, self.dt / 2.0, self.t_end, self.sample_every)
    }
}

pub fn run_trials(
    problem: &GalerkinProblem,
    initial: &[SpectralField],
    dt: f64,
    t_end: f64,
    sample_every: f64,
) -> Result<TrialRuns> {
    let stride = ((sample_every / dt).round() as usize).max(1);
    let opts = IntegratorOptions::new(dt, t_end).with_stride(stride);
    let runs = initial
        .par_iter()
        .enumerate()
        .map(|(i, u0)| {
            problem.integrate(u0, &opts).map_err(|e| match e {
                Error::BlowUp { time, mode } => Error::Dissipativity(format!(
                    "trial {i} (‖u0‖ = {:.3e}) blew up at t = {time} in mode {mode}",
                    u0.l2()
                )),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialRuns { initial: initial.to_vec(), runs, dt, t_end, sample_every: stride as f64 * dt })
}

fn within_five_percent(a: f64, b: f64) -> bool {
    (a - b).abs() <= 0.05 * a.abs().max(b.abs()) + 1e-12
}

fn dissipation_excess(runs: &TrialRuns, lambda1: f64, rate: f64) -> f64 {
    runs.runs
        .iter()
        .zip(&runs.initial)
        .flat_map(|(traj, u0)| {
            let n0 = u0.l2_sq();
            traj.times()
                .iter()
                .zip(traj.states())
                .map(move |(t, u)| u.l2_sq() - (-rate * lambda1 * t).exp() * n0)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `‖u(t)‖² ≤ e^{−λ₁t}‖u₀‖² + R₂` over every trial and output time.
///
/// With `candidate = None` the smallest admissible `R₂ ≥ 0` is fitted;
/// otherwise the given value is tested.
pub fn certify_dissipation(
    problem: &GalerkinProblem,
    runs: &TrialRuns,
    candidate: Option<f64>,
    refined: Option<&TrialRuns>,
) -> Result<BoundCertificate> {
    let lambda1 = problem.basis().lambda1();
    let excess = dissipation_excess(runs, lambda1, 1.0);
    if !excess.is_finite() {
        return Err(Error::Dissipativity("no finite R2 fits the trials".into()));
    }
    let fitted = excess.max(0.0);
    let r2 = candidate.unwrap_or(fitted);
    let mut cert = BoundCertificate::new("propreg2", runs.len());
    cert.set("R2", r2);
    cert.set("R2_fitted", fitted);
    cert.set("excess_at_twice_rate", dissipation_excess(runs, lambda1, 2.0));
    cert.worst_slack = r2 - excess;
    if let Some(fine) = refined {
        let fine_fit = dissipation_excess(fine, lambda1, 1.0).max(0.0);
        cert.set("R2_refined", fine_fit);
        cert.refinement_stable = Some(within_five_percent(fitted, fine_fit));
    }
    Ok(cert.finish())
}

fn smoothing_shape(n0: f64, lambda1: f64, t: f64, r: f64) -> f64 {
    (((-lambda1 * t).exp() * n0 + 1.0) / r + 1.0 + r) * r.exp()
}

struct SmoothingFit {
    r1: f64,
    r3: f64,
    r4: f64,
}

fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; times.len()];
    for k in 1..times.len() {
        out[k] = out[k - 1] + 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
    }
    out
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.iter().position(|s| *s >= t) {
        Some(0) => values[0],
        Some(k) => {
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            (1.0 - w) * values[k - 1] + w * values[k]
        }
        None => *values.last().unwrap_or(&0.0),
    }
}

fn fit_smoothing(problem: &GalerkinProblem, runs: &TrialRuns, r_grid: &[f64]) -> SmoothingFit {
    let lambda1 = problem.basis().lambda1();
    let per_run: Vec<SmoothingFit> = runs
        .runs
        .par_iter()
        .zip(&runs.initial)
        .map(|(traj, u0)| {
            let n0 = u0.l2_sq();
            let times = traj.times();
            let h1: Vec<f64> = traj.states().iter().map(|u| u.h1_sq()).collect();
            let lap: Vec<f64> = traj.states().iter().map(|u| u.laplacian_norm().powi(2)).collect();
            let lap_int = cumulative_trapezoid(times, &lap);
            let diss: Vec<f64> = energy_series(problem, traj).iter().map(|r| r.dissipation).collect();
            let t_end = traj.end();
            let mut fit = SmoothingFit { r1: 0.0, r3: 0.0, r4: 0.0 };
            for &r in r_grid {
                if r > t_end {
                    continue;
                }
                for (s, y) in times.iter().zip(&h1) {
                    if *s + 1e-12 >= r {
                        fit.r1 = fit.r1.max(y / smoothing_shape(n0, lambda1, (s - r).max(0.0), r));
                    }
                }
                let shape = smoothing_shape(n0, 0.0, 0.0, r);
                let ut = 0.5 * (diss[diss.len() - 1] - interpolate(times, &diss, r));
                fit.r3 = fit.r3.max(ut / shape);
                let lp = lap_int[lap_int.len() - 1] - interpolate(times, &lap_int, r);
                fit.r4 = fit.r4.max(lp / ((t_end - r + 1.0) * shape.powi(3)));
            }
            fit
        })
        .collect();
    per_run.into_iter().fold(SmoothingFit { r1: 0.0, r3: 0.0, r4: 0.0 }, |a, b| SmoothingFit {
        r1: a.r1.max(b.r1),
        r3: a.r3.max(b.r3),
        r4: a.r4.max(b.r4),
    })
}

const SHORT_TIME: f64 = 0.1;

/// Observed `‖u(r)‖²_{H₀¹}` against `1/r` for one initial datum.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingProfile {
    pub r: Vec<f64>,
    pub h1_sq: Vec<f64>,
    /// Least-squares slope of `log ‖u(r)‖²_{H₀¹}` against `log(1/r)` for `r ≤ 0.1`.
    pub slope: f64,
    /// `‖u(r)‖²_{H₀¹}` at the smallest `r` over its value at the largest `r ≤ 0.1`.
    pub growth: f64,
}

impl SmoothingProfile {
    /// A bound independent of `r` would not fit this profile.
    pub fn blows_up(&self) -> bool {
        self.slope > 0.25 && self.growth > 2.0
    }
}

pub fn smoothing_profile(problem: &GalerkinProblem, u0: &SpectralField, r_grid: &[f64], dt: f64) -> Result<SmoothingProfile> {
    let r_max = r_grid.iter().cloned().fold(0.0, f64::max);
    let traj = problem.integrate(u0, &IntegratorOptions::new(dt, r_max))?;
    let times = traj.times();
    let h1: Vec<f64> = traj.states().iter().map(|u| u.h1_sq()).collect();
    let mut rs: Vec<f64> = r_grid.to_vec();
    rs.sort_by(f64::total_cmp);
    let ys: Vec<f64> = rs.iter().map(|r| interpolate(times, &h1, *r)).collect();
    // fit only the short-time window so ordinary decay is not read as blow-up
    let short = rs.iter().filter(|r| **r <= SHORT_TIME).count().max(2).min(rs.len());
    let xs: Vec<f64> = rs[..short].iter().map(|r| (1.0 / r).ln()).collect();
    let ls: Vec<f64> = ys[..short].iter().map(|y| y.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let growth = if ys[short - 1] > 0.0 { ys[0] / ys[short - 1] } else { 1.0 };
    Ok(SmoothingProfile { r: rs, h1_sq: ys, slope, growth })
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingCertificates {
    pub propreg1: BoundCertificate,
    pub propreg3: BoundCertificate,
    pub propreg4: BoundCertificate,
}

/// Fits `R₁`, `R₃`, `R₄` in
/// `‖u(t+r)‖²_{H₀¹} ≤ R₁((e^{−λ₁t}‖u₀‖²+1)/r + 1 + r)e^r`,
/// `∫ᵣᵀ‖u_t‖² ≤ R₃((‖u₀‖²+1)/r + 1 + r)e^r` and
/// `∫ᵣᵀ‖Δu‖² ≤ R₄(T−r+1)((‖u₀‖²+1)/r + 1 + r)³e^{3r}`.
pub fn certify_smoothing(
    problem: &GalerkinProblem,
    runs: &TrialRuns,
    r_grid: &[f64],
    refined: Option<&TrialRuns>,
) -> Result<SmoothingCertificates> {
    if r_grid.is_empty() || r_grid.iter().any(|r| *r <= 0.0) {
        return Err(Error::InvalidParameter("r-grid must be non-empty and positive".into()));
    }
    let fit = fit_smoothing(problem, runs, r_grid);
    let fine = refined.map(|f| fit_smoothing(problem, f, r_grid));
    let make = |name: &str, key: &str, value: f64, fine_value: Option<f64>| {
        let mut c = BoundCertificate::new(name, runs.len());
        c.set(key, value);
        c.worst_slack = if value.is_finite() { 0.0 } else { f64::NEG_INFINITY };
        if let Some(v) = fine_value {
            c.set(&format!("{key}_refined"), v);
            c.refinement_stable = Some(within_five_percent(value, v));
        }
        c.notes.push(format!(
            "r-grid [{:.1e}, {:.1e}] with {} points",
            r_grid.iter().cloned().fold(f64::INFINITY, f64::min),
            r_grid.iter().cloned().fold(0.0, f64::max),
            r_grid.len()
        ));
        c.finish()
    };
    Ok(SmoothingCertificates {
        propreg1: make("propreg1", "R1", fit.r1, fine.as_ref().map(|f| f.r1)),
        propreg3: make("propreg3", "R3", fit.r3, fine.as_ref().map(|f| f.r3)),
        propreg4: make("propreg4", "R4", fit.r4, fine.as_ref().map(|f| f.r4)),
    })
}

/// Checks `y(t+r) ≤ (a₃/r + a₂)e^{a₁}` for `y = E(u) + M`, `g ≡ 1` and
/// `w ≡ 2D̃₂ + 2‖h‖²/λ₁` along every trial.
pub fn uniform_gronwall(problem: &GalerkinProblem, runs: &TrialRuns, r: f64) -> Result<BoundCertificate> {
    let basis = problem.basis();
    let lambda1 = basis.lambda1();
    let d2 = problem.term().constants().d2 * basis.volume();
    let h_sq = problem.forcing().l2_sq();
    let shift = 2.0 * d2 + 4.0 * h_sq / lambda1 + 1.0;
    let w = 2.0 * d2 + 2.0 * h_sq / lambda1;
    let offset = (r / runs.sample_every).round() as usize;
    if offset == 0 {
        return Err(Error::InvalidParameter(format!(
            "r = {r} is below the sampling interval {}",
            runs.sample_every
        )));
    }
    let r_eff = offset as f64 * runs.sample_every;
    let mut cert = BoundCertificate::new("uniform_gronwall", runs.len());
    let mut min_y = f64::INFINITY;
    for traj in &runs.runs {
        let y: Vec<f64> = traj.states().iter().map(|u| problem.energy(u) + shift).collect();
        min_y = min_y.min(y.iter().cloned().fold(f64::INFINITY, f64::min));
        let integral = cumulative_trapezoid(traj.times(), &y);
        for k in 0..y.len().saturating_sub(offset) {
            let a3 = integral[k + offset] - integral[k];
            let bound = (a3 / r_eff + w * r_eff) * r_eff.exp();
            cert.worst_slack = cert.worst_slack.min(bound - y[k + offset]);
        }
    }
    cert.set("r", r_eff);
    cert.set("shift", shift);
    cert.set("w", w);
    cert.set("min_y", min_y);
    if min_y <= 0.0 {
        cert.notes.push("y is not positive; the shift is too small".into());
        cert.worst_slack = cert.worst_slack.min(min_y);
    }
    Ok(cert.finish())
}

/// The ball `‖u‖²_{H₀¹} ≤ 4eR₁` and observed entry times.
#[derive(Debug, Clone, Serialize)]
pub struct AbsorbingBall {
    pub radius_sq: f64,
    /// First output time after which the trial stays inside; `None` if it
    /// never settles within the horizon.
    pub entry_times: Vec<Option<f64>>,
    /// `max(log‖u₀‖², 0)/λ₁ + 1` plus one sampling interval.
    pub predicted: Vec<f64>,
    pub certificate: BoundCertificate,
}

pub fn absorbing_ball(propreg1: &BoundCertificate, problem: &GalerkinProblem, runs: &TrialRuns) -> Result<AbsorbingBall> {
    let r1 = propreg1
        .constant("R1")
        .ok_or_else(|| Error::Precondition("propreg1 certificate without R1".into()))?;
    let radius_sq = 4.0 * std::f64::consts::E * r1;
    let lambda1 = problem.basis().lambda1();
    let tol = 1e-12 * (1.0 + radius_sq);
    let entry_times: Vec<Option<f64>> = runs
        .runs
        .iter()
        .map(|traj| {
            let outside = traj.states().iter().rposition(|u| u.h1_sq() > radius_sq + tol);
            match outside {
                None => Some(traj.start()),
                Some(k) if k + 1 < traj.len() => Some(traj.times()[k + 1]),
                Some(_) => None,
            }
        })
        .collect();
    let predicted: Vec<f64> = runs
        .initial
        .iter()
        .map(|u0| u0.l2_sq().ln().max(0.0) / lambda1 + 1.0 + runs.sample_every)
        .collect();
    let mut cert = BoundCertificate::new("absorbing_ball", runs.len());
    cert.set("radius_sq", radius_sq);
    let mut worst = f64::INFINITY;
    let mut latest: f64 = 0.0;
    for (i, (e, p)) in entry_times.iter().zip(&predicted).enumerate() {
        match e {
            Some(t) => {
                worst = worst.min(p - t);
                latest = latest.max(*t);
            }
            None => {
                worst = f64::NEG_INFINITY;
                cert.notes.push(format!("trial {i} did not enter the ball by t = {}", runs.t_end));
            }
        }
    }
    cert.set("latest_entry", latest);
    cert.worst_slack = worst;
    Ok(AbsorbingBall { radius_sq, entry_times, predicted, certificate: cert.finish() })
}

/// `M = (C̃₂/α̃)^{1/4}` for `g = f − h`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinfBound {
    pub alpha_tilde: f64,
    pub c2_tilde: f64,
    pub h_sup: f64,
    pub m: f64,
}

/// `α̃ = α` when `h = 0` and `α/2` otherwise; `C̃₂ = sup_u (α̃u⁴ − f(u)u + ‖h‖∞|u|)`.
pub fn linf_bound(problem: &GalerkinProblem) -> LinfBound {
    let term = problem.term();
    let k = term.constants();
    let h_sup = problem.forcing().sup_norm();
    let alpha_tilde = if h_sup == 0.0 { k.alpha } else { 0.5 * k.alpha };
    let gap = |u: f64| alpha_tilde * (u * u * u) * u - term.eval(u) * u + h_sup * u.abs();
    let reach = 4.0 * (1.0 + (k.c2 / k.alpha).powf(0.25) + (h_sup / alpha_tilde).cbrt() + k.c1);
    let n = 200_000;
    let mut best = (0.0, 0.0);
    for i in 0..=2 * n {
        let u = reach * (i as f64 - n as f64) / n as f64;
        let g = gap(u);
        if g > best.1 {
            best = (u, g);
        }
    }
    // golden-section polish of the grid maximum
    let step = reach / n as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if gap(c) > gap(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let c2_tilde = best.1.max(gap(0.5 * (a + b))).max(0.0);
    let scale = 1e-12 * (1.0 + k.c1 * reach.powi(4));
    let c2_tilde = if c2_tilde < scale { 0.0 } else { c2_tilde };
    LinfBound { alpha_tilde, c2_tilde, h_sup, m: (c2_tilde / alpha_tilde).powf(0.25) }
}

/// Grid sup-norm of every state against `M + tol`.
pub fn verify_linf(bound: &LinfBound, states: &[SpectralField], tol: f64) -> BoundCertificate {
    let mut cert = BoundCertificate::new("linf", states.len());
    cert.set("M", bound.m);
    cert.set("alpha_tilde", bound.alpha_tilde);
    cert.set("C2_tilde", bound.c2_tilde);
    let sups: Vec<f64> = states.par_iter().map(|u| u.sup_norm()).collect();
    let (worst_idx, worst) = sups
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, s)| if *s > acc.1 { (i, *s) } else { acc });
    cert.set("max_sup", worst);
    cert.worst_slack = bound.m + tol - worst;
    if cert.worst_slack < 0.0 {
        cert.notes.push(format!("state {worst_idx} has sup-norm {worst:.6}"));
    }
    cert.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::NonlinearTerm;
    use crate::spectral::{make_basis, Domain};

    fn problem(m: usize, spec: &str) -> GalerkinProblem {
        GalerkinProblem::unforced(&make_basis(m, Domain::unit()).unwrap(), NonlinearTerm::parse(spec).unwrap())
    }

    #[test]
    fn suite_layout() {
        let b = make_basis(8, Domain::unit()).unwrap();
        let s = trial_suite(&b, 5, 100.0, 3);
        assert_eq!(s.len(), 5);
        assert_eq!(s[0].l2(), 0.0);
        assert!((s[1].l2() - 1.0).abs() < 1e-12);
        assert!((s[4].l2() - 100.0).abs() < 1e-9);
        let again = trial_suite(&b, 5, 100.0, 3);
        assert!(s.iter().zip(&again).all(|(a, b)| a == b));
    }

    #[test]
    fn zero_datum_gives_equality() {
        let p = problem(8, "cubic");
        let runs = run_trials(&p, &[SpectralField::zeros(p.basis())], 1e-2, 1.0, 0.1).unwrap();
        let c = certify_dissipation(&p, &runs, Some(0.0), None).unwrap();
        assert_eq!(c.worst_slack, 0.0);
        assert!(c.passed);
    }

    #[test]
    fn linf_constants() {
        let b = linf_bound(&problem(8, "cubic"));
        assert_eq!((b.alpha_tilde, b.c2_tilde, b.m), (1.0, 0.0, 0.0));
        let b = linf_bound(&problem(8, "chafee_infante(lambda=5)"));
        assert_eq!(b.alpha_tilde, 0.5);
        assert!((b.c2_tilde - 12.5).abs() < 1e-9);
        assert!((b.m - 5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn forced_linf_is_positive() {
        let p = problem(8, "cubic");
        let ones = vec![0.1; p.basis().grid_len()];
        let h = crate::spectral::project(&ones, p.basis()).unwrap();
        let b = linf_bound(&GalerkinProblem::new(p.term().clone(), h));
        assert_eq!(b.alpha_tilde, 0.5);
        assert!(b.m > 0.0 && b.m.is_finite());
    }

    #[test]
    fn smoothing_of_rough_and_smooth_data() {
        let p = problem(32, "cubic");
        let rough = SpectralField::new(p.basis().clone(), (1..=32).map(|j| (j as f64).powf(-0.6)).collect()).unwrap();
        let grid = [2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1];
        let prof = smoothing_profile(&p, &rough, &grid, 1e-4).unwrap();
        assert!(prof.blows_up(), "{prof:?}");
        let smooth = SpectralField::mode(p.basis(), 1, 1.0).unwrap();
        let prof = smoothing_profile(&p, &smooth, &grid, 1e-4).unwrap();
        assert!(!prof.blows_up(), "{prof:?}");
    }
}
