//! Set-valued dynamics: trajectory samples, bundles of trajectories that
//! realize a multivalued semiflow, and the sampled checks built on them
//! (semiflow inclusion, fixed points, backward completion, semidistances).
//!
//! Everything here is generic over a [`State`], so the same machinery runs
//! on Galerkin fields and on plain coordinate vectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute L² tolerance for gluing two trajectory pieces.
pub const GLUING_TOLERANCE: f64 = 1e-8;

/// Relative tolerance under which two timestamps are considered equal.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    H1,
}

/// A point of the phase space.
pub trait State: Clone + Send + Sync {
    fn distance(&self, other: &Self, metric: Metric) -> f64;

    /// Affine combination `self + theta * (other - self)`.
    fn lerp(&self, other: &Self, theta: f64) -> Self;

    /// Flat coordinates used for columnar output.
    fn coordinates(&self) -> Vec<f64>;
}

impl State for Vec<f64> {
    fn distance(&self, other: &Self, _metric: Metric) -> f64 {
        self.iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn lerp(&self, other: &Self, theta: f64) -> Self {
        self.iter()
            .zip(other)
            .map(|(a, b)| a + theta * (b - a))
            .collect()
    }

    fn coordinates(&self) -> Vec<f64> {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    ForwardOnly,
    TwoSided,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_EPS * a.abs().max(b.abs()).max(1.0)
}

/// Time-stamped sequence of states.
#[derive(Debug, Clone)]
pub struct TrajectorySample<S> {
    times: Vec<f64>,
    states: Vec<S>,
    kind: TrajectoryKind,
}

impl<S: State> TrajectorySample<S> {
    pub fn new(times: Vec<f64>, states: Vec<S>, kind: TrajectoryKind) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidTrajectory("no samples".into()));
        }
        if times.len() != states.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} timestamps but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidTrajectory("non-finite timestamp".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTrajectory(format!(
                "timestamps not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if kind == TrajectoryKind::TwoSided && !(times[0] <= 0.0 && *times.last().unwrap() >= 0.0)
        {
            return Err(Error::InvalidTrajectory(
                "two-sided trajectory must contain t = 0 in its span".into(),
            ));
        }
        Ok(Self { times, states, kind })
    }

    /// Constant trajectory sampled at `n + 1` equispaced times on `[t0, t1]`.
    pub fn constant(state: S, t0: f64, t1: f64, n: usize) -> Result<Self> {
        let n = n.max(1);
        let times: Vec<f64> = (0..=n)
            .map(|i| t0 + (t1 - t0) * i as f64 / n as f64)
            .collect();
        let states = vec![state; n + 1];
        let kind = if t0 < 0.0 {
            TrajectoryKind::TwoSided
        } else {
            TrajectoryKind::ForwardOnly
        };
        Self::new(times, states, kind)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn first_state(&self) -> &S {
        &self.states[0]
    }

    pub fn last_state(&self) -> &S {
        self.states.last().unwrap()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<S>, TrajectoryKind) {
        (self.times, self.states, self.kind)
    }

    fn check_in_span(&self, t: f64) -> Result<()> {
        let (start, end) = (self.start(), self.end());
        if (t < start && !same_time(t, start)) || (t > end && !same_time(t, end)) {
            return Err(Error::TimeRange { tau: t, start, end });
        }
        Ok(())
    }

    /// Index of a stored timestamp equal to `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .find(|&j| j < self.times.len() && same_time(self.times[j], t))
    }

    /// State at time `t`; exact at stored timestamps, linear in between.
    pub fn state_at(&self, t: f64) -> Result<S> {
        self.check_in_span(t)?;
        if let Some(i) = self.index_of(t) {
            return Ok(self.states[i].clone());
        }
        let i = self.times.partition_point(|&s| s < t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let theta = (t - t0) / (t1 - t0);
        Ok(self.states[i - 1].lerp(&self.states[i], theta))
    }

    /// Restriction to `[t0, t1]`, with interpolated endpoints where needed.
    pub fn restrict(&self, t0: f64, t1: f64) -> Result<Self> {
        self.check_in_span(t0)?;
        self.check_in_span(t1)?;
        let mut times = vec![t0];
        let mut states = vec![self.state_at(t0)?];
        for (t, s) in self.times.iter().zip(&self.states) {
            if *t > t0 && !same_time(*t, t0) && *t < t1 && !same_time(*t, t1) {
                times.push(*t);
                states.push(s.clone());
            }
        }
        if !same_time(t0, t1) {
            times.push(t1);
            states.push(self.state_at(t1)?);
        }
        let kind = if t0 <= 0.0 && t1 >= 0.0 {
            self.kind
        } else {
            TrajectoryKind::ForwardOnly
        };
        Self::new(times, states, kind)
    }

    /// Same samples with every timestamp moved by `shift`.
    pub fn shifted(&self, shift: f64, kind: TrajectoryKind) -> Result<Self> {
        Self::new(
            self.times.iter().map(|t| t + shift).collect(),
            self.states.clone(),
            kind,
        )
    }

    /// Largest L² distance between stored states at timestamps shared with `other`.
    pub fn max_deviation_at_shared(&self, other: &Self, metric: Metric) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for (t, s) in self.times.iter().zip(&self.states) {
            if let Some(j) = other.index_of(*t) {
                let d = s.distance(&other.states[j], metric);
                worst = Some(worst.map_or(d, |w: f64| w.max(d)));
            }
        }
        worst
    }
}

/// Translation `φ_τ(t) = φ(t + τ)`.
///
/// Forward-only trajectories drop everything before `tau`; two-sided ones
/// keep their full history, shifted.
pub fn translate<S: State>(traj: &TrajectorySample<S>, tau: f64) -> Result<TrajectorySample<S>> {
    if tau == 0.0 {
        return Ok(traj.clone());
    }
    traj.check_in_span(tau)?;
    match traj.kind {
        TrajectoryKind::TwoSided => traj.shifted(-tau, TrajectoryKind::TwoSided),
        TrajectoryKind::ForwardOnly => traj
            .restrict(tau, traj.end())?
            .shifted(-tau, TrajectoryKind::ForwardOnly),
    }
}

/// Glue `second` onto `first` at time `s`, with the default tolerance.
pub fn concatenate<S: State>(
    first: &TrajectorySample<S>,
    second: &TrajectorySample<S>,
    s: f64,
) -> Result<TrajectorySample<S>> {
    concatenate_with_tolerance(first, second, s, GLUING_TOLERANCE)
}

/// `first` on `[start, s]` followed by `second` shifted to start at `s`.
///
/// `second` must start at `t = 0` in a state within `tol` (L²) of `first(s)`.
pub fn concatenate_with_tolerance<S: State>(
    first: &TrajectorySample<S>,
    second: &TrajectorySample<S>,
    s: f64,
    tol: f64,
) -> Result<TrajectorySample<S>> {
    if !same_time(second.start(), 0.0) {
        return Err(Error::InvalidTrajectory(format!(
            "second piece starts at {} instead of 0",
            second.start()
        )));
    }
    let head = first.restrict(first.start(), s)?;
    let junction = head.last_state();
    let gap = junction.distance(second.first_state(), Metric::L2);
    if gap > tol {
        return Err(Error::Gluing { gap, tol });
    }
    let (mut times, mut states, _) = head.into_parts();
    for (t, x) in second.times.iter().zip(&second.states).skip(1) {
        times.push(s + t);
        states.push(x.clone());
    }
    TrajectorySample::new(times, states, first.kind)
}

/// Finite sample of a set in phase space.
#[derive(Debug, Clone)]
pub struct SetOfStates<S> {
    pub members: Vec<S>,
    pub metric: Metric,
}

impl<S: State> SetOfStates<S> {
    pub fn new(members: Vec<S>, metric: Metric) -> Self {
        Self { members, metric }
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.members.iter().enumerate() {
            for b in &self.members[i + 1..] {
                d = d.max(a.distance(b, self.metric));
            }
        }
        d
    }
}

/// `sup_{x ∈ a} inf_{y ∈ b} d(x, y)` in the sets' common metric.
pub fn hausdorff_semidist<S: State>(a: &SetOfStates<S>, b: &SetOfStates<S>) -> Result<f64> {
    if a.members.is_empty() || b.members.is_empty() {
        return Err(Error::EmptySet);
    }
    if a.metric != b.metric {
        return Err(Error::MetricMismatch(a.metric, b.metric));
    }
    let metric = a.metric;
    Ok(a.members
        .par_iter()
        .map(|x| {
            b.members
                .iter()
                .map(|y| x.distance(y, metric))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max))
}

/// A generator of solutions: for every initial state at least one
/// trajectory starting there (the sampled solution set of a semiflow).
pub trait TrajectoryBundle<S: State>: Sync {
    /// Trajectories on `[0, horizon]` starting at `x0`. Never empty on success.
    fn generate(&self, x0: &S, horizon: f64) -> Result<Vec<TrajectorySample<S>>>;

    /// Time resolution of the generated samples (integrator step).
    fn resolution(&self) -> f64;

    fn metric(&self) -> Metric {
        Metric::L2
    }
}

/// Sampled `G(t, x0)`: the states at time `t` of up to `samples` generated trajectories.
pub fn sample_semiflow<S: State, B: TrajectoryBundle<S> + ?Sized>(
    bundle: &B,
    x0: &S,
    t: f64,
    samples: usize,
) -> Result<Vec<S>> {
    if t == 0.0 {
        return Ok(vec![x0.clone()]);
    }
    let trajs = bundle.generate(x0, t)?;
    trajs
        .iter()
        .take(samples.max(1))
        .map(|traj| traj.state_at(t))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiflowReport {
    pub t: f64,
    pub s: f64,
    /// Distance of each sampled `y ∈ G(t+s, x0)` to the sampled `G(t, G(s, x0))`.
    pub distances: Vec<f64>,
    pub max_semidist: f64,
    /// L² diameter of the sampled `G(t+s, x0)`.
    pub direct_diameter: f64,
    /// Reverse semidistance; nonzero values measure failure of strictness.
    pub strictness_gap: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Sampled check of `G(t+s, x0) ⊂ G(t, G(s, x0))`.
pub fn check_semiflow_inclusion<S: State, B: TrajectoryBundle<S> + ?Sized>(
    bundle: &B,
    x0: &S,
    t: f64,
    s: f64,
    samples: usize,
    tol: f64,
) -> Result<SemiflowReport> {
    if t < 0.0 || s < 0.0 {
        return Err(Error::Precondition("t and s must be non-negative".into()));
    }
    let samples = samples.max(1);
    let metric = bundle.metric();
    let (direct, mids) = if t + s == 0.0 {
        (vec![x0.clone()], vec![x0.clone()])
    } else {
        let trajs = bundle.generate(x0, t + s)?;
        let trajs = &trajs[..trajs.len().min(samples)];
        let direct = trajs
            .iter()
            .map(|tr| tr.state_at(t + s))
            .collect::<Result<Vec<_>>>()?;
        let mids = trajs
            .iter()
            .map(|tr| tr.state_at(s))
            .collect::<Result<Vec<_>>>()?;
        (direct, mids)
    };
    let composed: Vec<S> = mids
        .par_iter()
        .map(|y| sample_semiflow(bundle, y, t, samples))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let distances: Vec<f64> = direct
        .iter()
        .map(|x| {
            composed
                .iter()
                .map(|y| x.distance(y, metric))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let max_semidist = distances.iter().cloned().fold(0.0, f64::max);
    let direct_set = SetOfStates::new(direct, metric);
    let composed_set = SetOfStates::new(composed, metric);
    let strictness_gap = hausdorff_semidist(&composed_set, &direct_set)?;
    Ok(SemiflowReport {
        t,
        s,
        direct_diameter: direct_set.diameter(),
        distances,
        max_semidist,
        strictness_gap,
        tol,
        passed: max_semidist <= tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub t: f64,
    pub s: f64,
    /// Sampled `sup dist(G(t+s, x0), G(t, G(s, x0)))`.
    pub inclusion: f64,
    /// Gap between `(a ⊕ b) ⊕ c` and `a ⊕ (b ⊕ c)` at shared times.
    pub associativity: f64,
    /// Gap between `φ_{t+s}` and `(φ_s)_t`.
    pub translation: f64,
    /// Distance from `φ_s` on `[0, t]` to the nearest trajectory generated from `φ(s)`.
    pub membership: f64,
    pub tol: f64,
    pub passed: bool,
}

fn pick<S: State>(mut trajs: Vec<TrajectorySample<S>>, member: usize) -> TrajectorySample<S> {
    let k = member % trajs.len();
    trajs.swap_remove(k)
}

/// Inclusion, gluing associativity and translation checks for one
/// `(x0, t, s)`. Pieces follow generated trajectory `member` (mod the
/// bundle size); `t` and `s` should sit on the output grid.
pub fn check_axioms<S: State, B: TrajectoryBundle<S> + ?Sized>(
    bundle: &B,
    x0: &S,
    t: f64,
    s: f64,
    member: usize,
    samples: usize,
    tol: f64,
) -> Result<AxiomReport> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::Precondition("t and s must be positive".into()));
    }
    let inclusion = check_semiflow_inclusion(bundle, x0, t, s, samples, tol)?.max_semidist;

    let phi = pick(bundle.generate(x0, 2.0 * s + t)?, member);
    let b = pick(bundle.generate(&phi.state_at(s)?, t + s)?, member);
    let c = pick(bundle.generate(&b.state_at(t)?, s)?, member);
    let left = concatenate(&concatenate(&phi, &b, s)?, &c, s + t)?;
    let right = concatenate(&phi, &concatenate(&b, &c, t)?, s)?;
    let associativity = left.max_deviation_at_shared(&right, Metric::L2).unwrap_or(f64::INFINITY);

    let once = translate(&phi, t + s)?;
    let twice = translate(&translate(&phi, s)?, t)?;
    let translation = once.max_deviation_at_shared(&twice, Metric::L2).unwrap_or(f64::INFINITY);

    let moved = translate(&phi, s)?.restrict(0.0, t)?;
    let membership = bundle
        .generate(&phi.state_at(s)?, t)?
        .iter()
        .filter_map(|g| moved.max_deviation_at_shared(g, bundle.metric()))
        .fold(f64::INFINITY, f64::min);

    let passed = [inclusion, associativity, translation, membership].iter().all(|d| *d <= tol);
    Ok(AxiomReport { t, s, inclusion, associativity, translation, membership, tol, passed })
}

/// Dyadic checkpoints `j · horizon · 2⁻ⁿ`, with the level chosen so the
/// spacing reaches `resolution`, capped at `max_points` intervals.
pub fn dyadic_checkpoints(horizon: f64, resolution: f64, max_points: usize) -> Vec<f64> {
    let mut level = 0u32;
    while horizon / f64::from(1u32 << level) > resolution
        && (1usize << (level + 1)) <= max_points.max(1)
        && level < 30
    {
        level += 1;
    }
    let n = 1usize << level;
    (0..=n).map(|j| horizon * j as f64 / n as f64).collect()
}

/// Smallest, over generated trajectories from `z`, of the largest deviation
/// from `z` on the dyadic checkpoint grid.
pub fn fixed_point_defect<S: State, B: TrajectoryBundle<S> + ?Sized>(
    bundle: &B,
    z: &S,
    horizon: f64,
    checkpoints: usize,
) -> Result<f64> {
    if horizon <= 0.0 {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let grid = dyadic_checkpoints(horizon, bundle.resolution(), checkpoints);
    let metric = bundle.metric();
    let trajs = bundle.generate(z, horizon)?;
    let mut best = f64::INFINITY;
    for traj in &trajs {
        let mut worst: f64 = 0.0;
        for &t in &grid {
            worst = worst.max(traj.state_at(t)?.distance(z, metric));
        }
        best = best.min(worst);
    }
    Ok(best)
}

/// `z ∈ G(t, z)` on a dyadic grid of `[0, horizon]`, within `tol`.
pub fn is_fixed_point<S: State, B: TrajectoryBundle<S> + ?Sized>(
    bundle: &B,
    z: &S,
    horizon: f64,
    checkpoints: usize,
    tol: f64,
) -> Result<bool> {
    Ok(fixed_point_defect(bundle, z, horizon, checkpoints)? <= tol)
}

#[derive(Debug, Clone, Copy)]
pub struct BackwardOptions {
    pub depth: usize,
    pub tol: f64,
    /// Longest forward run searched for a preimage.
    pub horizon: f64,
    /// Length of the forward extension past `t = 0`.
    pub forward: f64,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        Self {
            depth: 8,
            tol: 1e-6,
            horizon: 2.0,
            forward: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BackwardCompletion<S> {
    pub trajectory: TrajectorySample<S>,
    /// Times at which consecutive pieces were joined, ascending.
    pub junctions: Vec<f64>,
    pub achieved_depth: usize,
    pub span: f64,
    pub complete: bool,
}

/// Build a two-sided trajectory through `z` by repeatedly finding, among the
/// attractor sample, a point whose forward run passes within `tol` of the
/// current left endpoint. Each level takes the longest admissible run.
pub fn backward_complete<S: State, B: TrajectoryBundle<S> + ?Sized>(
    bundle: &B,
    attractor: &SetOfStates<S>,
    z: &S,
    opts: BackwardOptions,
) -> Result<BackwardCompletion<S>> {
    let metric = attractor.metric;
    let start_gap = hausdorff_semidist(&SetOfStates::new(vec![z.clone()], metric), attractor)?;
    if start_gap > opts.tol {
        return Err(Error::Precondition(format!(
            "state is {start_gap:.3e} away from the attractor sample (tol {:.3e})",
            opts.tol
        )));
    }
    let runs: Vec<Vec<TrajectorySample<S>>> = attractor
        .members
        .par_iter()
        .map(|x| bundle.generate(x, opts.horizon))
        .collect::<Result<_>>()?;
    let min_step = bundle.resolution() * 0.5;

    // pieces in backward order, each on [offset - tau, offset]
    let mut pieces: Vec<TrajectorySample<S>> = Vec::new();
    let mut junctions = Vec::new();
    let mut current = z.clone();
    let mut offset = 0.0;
    let mut achieved = 0;
    for _ in 0..opts.depth {
        let mut best: Option<(usize, usize, f64)> = None;
        for (k, trajs) in runs.iter().enumerate() {
            for (r, traj) in trajs.iter().enumerate() {
                for (t, x) in traj.times().iter().zip(traj.states()) {
                    if *t < min_step || x.distance(&current, metric) > opts.tol {
                        continue;
                    }
                    if best.is_none_or(|(_, _, bt)| *t > bt) {
                        best = Some((k, r, *t));
                    }
                }
            }
        }
        let Some((k, r, tau)) = best else { break };
        let piece = runs[k][r].restrict(0.0, tau)?;
        let (times, mut states, _) = piece.into_parts();
        *states.last_mut().unwrap() = current.clone();
        let times = times.iter().map(|t| t - tau + offset).collect();
        let kind = TrajectoryKind::TwoSided;
        let piece = TrajectorySample {
            times,
            states,
            kind,
        };
        current = attractor.members[k].clone();
        junctions.push(offset);
        offset -= tau;
        pieces.push(piece);
        achieved += 1;
    }

    let mut times = Vec::new();
    let mut states = Vec::new();
    for piece in pieces.iter().rev() {
        let skip = usize::from(!times.is_empty());
        times.extend_from_slice(&piece.times[skip..]);
        states.extend_from_slice(&piece.states[skip..]);
    }
    if times.is_empty() {
        times.push(0.0);
        states.push(z.clone());
    }
    if opts.forward > 0.0 {
        let fwd = bundle.generate(z, opts.forward)?;
        let fwd = &fwd[0];
        times.extend_from_slice(&fwd.times[1..]);
        states.extend_from_slice(&fwd.states[1..]);
    }
    if achieved > 0 {
        junctions.push(offset);
    }
    junctions.reverse();
    let trajectory = TrajectorySample::new(times, states, TrajectoryKind::TwoSided)?;
    Ok(BackwardCompletion {
        span: -offset,
        trajectory,
        junctions,
        achieved_depth: achieved,
        complete: achieved == opts.depth,
    })
}

/// Check `γ(b) ∈ G(b - a, γ(a))` for consecutive stored times `a < b` drawn from `times`.
pub fn check_trajectory_consistency<S: State, B: TrajectoryBundle<S> + ?Sized>(
    bundle: &B,
    traj: &TrajectorySample<S>,
    times: &[f64],
    samples: usize,
) -> Result<f64> {
    let metric = bundle.metric();
    let pairs: Vec<(f64, f64)> = times.windows(2).map(|w| (w[0], w[1])).collect();
    let worst = pairs
        .par_iter()
        .map(|&(a, b)| -> Result<f64> {
            let from = traj.state_at(a)?;
            let target = traj.state_at(b)?;
            let reached = sample_semiflow(bundle, &from, b - a, samples)?;
            Ok(reached
                .iter()
                .map(|y| y.distance(&target, metric))
                .fold(f64::INFINITY, f64::min))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x' = -x, closed form.
    struct Decay;

    impl TrajectoryBundle<Vec<f64>> for Decay {
        fn generate(&self, x0: &Vec<f64>, horizon: f64) -> Result<Vec<TrajectorySample<Vec<f64>>>> {
            let n = (horizon / 0.01).round().max(1.0) as usize;
            let times: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
            let states = times
                .iter()
                .map(|t| x0.iter().map(|x| x * (-t).exp()).collect())
                .collect();
            Ok(vec![TrajectorySample::new(times, states, TrajectoryKind::ForwardOnly)?])
        }

        fn resolution(&self) -> f64 {
            0.01
        }
    }

    fn ramp() -> TrajectorySample<Vec<f64>> {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let states = times.iter().map(|t| vec![*t, 2.0 * t]).collect();
        TrajectorySample::new(times, states, TrajectoryKind::ForwardOnly).unwrap()
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(TrajectorySample::new(vec![0.0, 0.0], vec![vec![0.0]; 2], TrajectoryKind::ForwardOnly).is_err());
        assert!(TrajectorySample::<Vec<f64>>::new(vec![0.0], vec![], TrajectoryKind::ForwardOnly).is_err());
        assert!(TrajectorySample::new(vec![1.0, 2.0], vec![vec![0.0]; 2], TrajectoryKind::TwoSided).is_err());
    }

    #[test]
    fn semidist_cases() {
        let z = vec![1.0, 2.0];
        let a = SetOfStates::new(vec![z.clone()], Metric::L2);
        assert_eq!(hausdorff_semidist(&a, &a).unwrap(), 0.0);
        let b = SetOfStates::new(vec![z.clone(), vec![100.0, 0.0]], Metric::L2);
        assert_eq!(hausdorff_semidist(&a, &b).unwrap(), 0.0);
        assert!(hausdorff_semidist(&b, &a).unwrap() > 90.0);
        let empty: SetOfStates<Vec<f64>> = SetOfStates::new(vec![], Metric::L2);
        assert!(matches!(hausdorff_semidist(&a, &empty), Err(Error::EmptySet)));
        let h1 = SetOfStates::new(vec![z], Metric::H1);
        assert!(matches!(hausdorff_semidist(&a, &h1), Err(Error::MetricMismatch(..))));
    }

    #[test]
    fn interpolation_and_translation() {
        let traj = ramp();
        assert_eq!(traj.state_at(0.25).unwrap(), vec![0.25, 0.5]);
        assert!(matches!(traj.state_at(1.5), Err(Error::TimeRange { .. })));
        let same = translate(&traj, 0.0).unwrap();
        assert_eq!(same.times(), traj.times());
        let moved = translate(&traj, 0.3).unwrap();
        assert_eq!(moved.start(), 0.0);
        for (t, x) in moved.times().iter().zip(moved.states()) {
            let y = traj.state_at(t + 0.3).unwrap();
            assert!(x.distance(&y, Metric::L2) < 1e-12);
        }
        assert!(translate(&traj, 2.0).is_err());
    }

    #[test]
    fn concatenate_constant_pieces() {
        let c = TrajectorySample::constant(vec![3.0], 0.0, 1.0, 4).unwrap();
        let glued = concatenate(&c, &c, 1.0).unwrap();
        assert_eq!(glued.end(), 2.0);
        assert!(glued.states().iter().all(|x| x == &vec![3.0]));
        let other = TrajectorySample::constant(vec![3.1], 0.0, 1.0, 4).unwrap();
        match concatenate(&c, &other, 1.0) {
            Err(Error::Gluing { gap, .. }) => assert!((gap - 0.1).abs() < 1e-12),
            other => panic!("expected gluing error, got {other:?}"),
        }
    }

    #[test]
    fn translate_then_concatenate_reproduces_tail() {
        let bundle = Decay;
        let traj = bundle.generate(&vec![1.0, -2.0], 2.0).unwrap().remove(0);
        let tail = translate(&traj, 0.7).unwrap();
        let rebuilt = concatenate(&traj, &tail, 0.7).unwrap();
        let dev = rebuilt.max_deviation_at_shared(&traj, Metric::L2).unwrap();
        assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn semiflow_inclusion_for_exact_flow() {
        let rep = check_semiflow_inclusion(&Decay, &vec![1.0, 1.0], 0.5, 0.3, 1, 1e-10).unwrap();
        assert!(rep.passed, "{rep:?}");
        let rep = check_semiflow_inclusion(&Decay, &vec![1.0, 1.0], 0.0, 0.3, 1, 0.0).unwrap();
        assert_eq!(rep.max_semidist, 0.0);
    }

    #[test]
    fn axioms_for_exact_flow() {
        let rep = check_axioms(&Decay, &vec![1.0, -2.0], 0.5, 0.3, 0, 1, 1e-10).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(check_axioms(&Decay, &vec![1.0], 0.0, 0.3, 0, 1, 1e-10).is_err());
    }

    /// x(t) = x0 + t², which is not a semiflow.
    struct Quadratic;

    impl TrajectoryBundle<Vec<f64>> for Quadratic {
        fn generate(&self, x0: &Vec<f64>, horizon: f64) -> Result<Vec<TrajectorySample<Vec<f64>>>> {
            let n = (horizon / 0.01).round().max(1.0) as usize;
            let times: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
            let states = times.iter().map(|t| x0.iter().map(|x| x + t * t).collect()).collect();
            Ok(vec![TrajectorySample::new(times, states, TrajectoryKind::ForwardOnly)?])
        }

        fn resolution(&self) -> f64 {
            0.01
        }
    }

    #[test]
    fn axioms_reject_time_dependent_rule() {
        let rep = check_axioms(&Quadratic, &vec![0.0], 0.5, 0.5, 0, 1, 1e-6).unwrap();
        assert!(!rep.passed);
        assert!((rep.inclusion - 0.5).abs() < 1e-12, "{rep:?}");
        assert!(rep.membership > 0.1);
    }

    #[test]
    fn fixed_points_of_decay() {
        assert!(is_fixed_point(&Decay, &vec![0.0, 0.0], 1.0, 64, 1e-12).unwrap());
        assert!(!is_fixed_point(&Decay, &vec![1.0, 0.0], 1.0, 64, 1e-3).unwrap());
        let grid = dyadic_checkpoints(1.0, 0.01, 1024);
        assert_eq!(grid.len(), 129);
        assert!(grid.windows(2).all(|w| w[1] - w[0] <= 0.01));
    }

    #[test]
    fn backward_completion_of_equilibrium_is_constant() {
        let zero = vec![0.0, 0.0];
        let set = SetOfStates::new(vec![zero.clone(), vec![0.5, 0.5]], Metric::L2);
        let opts = BackwardOptions { depth: 3, tol: 1e-9, horizon: 1.0, forward: 0.5 };
        let done = backward_complete(&Decay, &set, &zero, opts).unwrap();
        assert!(done.complete);
        assert!((done.span - 3.0).abs() < 1e-12);
        assert!(done.trajectory.states().iter().all(|x| x == &zero));
        let far = vec![5.0, 5.0];
        assert!(matches!(
            backward_complete(&Decay, &set, &far, opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn backward_completion_along_decay_orbit() {
        // Sample of the orbit x(t) = e^{-t} x0 for t in [0, 3].
        let x0 = vec![1.0, 0.5];
        let orbit = Decay.generate(&x0, 3.0).unwrap().remove(0);
        let members: Vec<Vec<f64>> = orbit.states().iter().step_by(10).cloned().collect();
        let set = SetOfStates::new(members, Metric::L2);
        let z = orbit.state_at(3.0).unwrap();
        let opts = BackwardOptions { depth: 2, tol: 1e-9, horizon: 2.0, forward: 0.0 };
        let done = backward_complete(&Decay, &set, &z, opts).unwrap();
        assert!(done.achieved_depth >= 1);
        let worst = check_trajectory_consistency(&Decay, &done.trajectory, &done.junctions, 1).unwrap();
        assert!(worst < 1e-9, "{worst}");
    }
}
