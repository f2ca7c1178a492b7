use std::collections::BTreeSet;

use serde::Serialize;

use super::manifold::{omega_limit, resolve_forward, trace_unstable_manifold, ManifoldTrace, TraceOptions};
use crate::equilibria::EquilibriumSet;
use crate::error::{Error, Result};
use crate::msflow::TrajectorySample;
use crate::spectral::{energy_series, GalerkinProblem, SpectralField};

#[derive(Debug, Clone, Serialize)]
pub struct BuildParams {
    pub trace: TraceOptions,
    /// Forward-resolution check on this many states per edge (plus nodes).
    pub samples_per_edge: usize,
    pub check_stable_side: bool,
    /// Repeat the trace with half the seed amplitude and compare.
    pub check_eps: bool,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self { trace: TraceOptions::default(), samples_per_edge: 8, check_stable_side: true, check_eps: false }
    }
}

/// A traced orbit between two equilibria.
#[derive(Debug, Clone)]
pub struct Edge {
    pub source: usize,
    pub sink: usize,
    pub trace: ManifoldTrace,
    /// Terminal H¹ distance to the sink.
    pub forward_distance: f64,
    /// H¹ distance of the earliest tail state to the source.
    pub backward_distance: f64,
}

impl Edge {
    pub fn homoclinic(&self) -> bool {
        self.source == self.sink
    }

    pub fn backward_ok(&self, tol: f64) -> bool {
        self.backward_distance <= tol && self.trace.rate_ok()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnresolvedTrace {
    pub source: usize,
    pub seed: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StableSideReport {
    pub checked: usize,
    pub resolved: usize,
    pub max_distance: f64,
}

impl StableSideReport {
    pub fn passed(&self) -> bool {
        self.checked == self.resolved
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsReport {
    pub half_eps_labels_match: bool,
    /// Largest relative deviation between curves traced at eps and eps/2.
    pub max_curve_deviation: f64,
}

impl EpsReport {
    pub fn passed(&self) -> bool {
        self.half_eps_labels_match && self.max_curve_deviation < 0.01
    }
}

/// Equilibria joined by traced unstable-manifold orbits.
#[derive(Debug, Clone)]
pub struct ConnectionGraph {
    pub nodes: EquilibriumSet,
    pub edges: Vec<Edge>,
    pub attractor_sample: Vec<SpectralField>,
    pub unresolved: Vec<UnresolvedTrace>,
    pub stable_side: Option<StableSideReport>,
    pub eps_robustness: Option<EpsReport>,
    pub tol: f64,
}

impl ConnectionGraph {
    /// Distinct `(source, sink)` pairs.
    pub fn adjacency(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.source, e.sink)).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn forward_resolved(&self) -> bool {
        self.unresolved.is_empty() && self.edges.iter().all(|e| e.forward_distance <= self.tol)
    }

    pub fn backward_resolved(&self) -> bool {
        self.edges.iter().all(|e| e.backward_ok(self.tol))
    }

    pub fn report(&self) -> GraphReport {
        GraphReport {
            nodes: self
                .nodes
                .members
                .iter()
                .enumerate()
                .map(|(i, e)| NodeReport {
                    id: i,
                    energy: e.energy,
                    unstable_dim: e.unstable_dim(),
                    residual: e.residual,
                    l2: e.field.l2(),
                    h1: e.h1_norm,
                    laplacian: e.h2_norm,
                    sup: e.sup_norm,
                    spectrum: e.spectrum.values.clone(),
                    coeffs: e.field.coeffs().to_vec(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(k, e)| EdgeReport {
                    id: k,
                    source: e.source,
                    sink: e.sink,
                    seed: e.trace.seed.clone(),
                    eps: e.trace.eps,
                    forward_distance: e.forward_distance,
                    backward_distance: e.backward_distance,
                    observed_rate: e.trace.observed_rate,
                    predicted_rate: e.trace.predicted_rate,
                    homoclinic: e.homoclinic(),
                    file: edge_file_name(k),
                })
                .collect(),
            adjacency: self.adjacency(),
            attractor_sample_size: self.attractor_sample.len(),
            unresolved: self.unresolved.clone(),
            stable_side: self.stable_side.clone(),
            eps_robustness: self.eps_robustness.clone(),
            tol: self.tol,
        }
    }
}

pub fn edge_file_name(k: usize) -> String {
    format!("edges/edge_{k:03}.dat")
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeReport {
    pub id: usize,
    pub energy: f64,
    pub unstable_dim: usize,
    pub residual: f64,
    pub l2: f64,
    pub h1: f64,
    pub laplacian: f64,
    pub sup: f64,
    pub spectrum: Vec<f64>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeReport {
    pub id: usize,
    pub source: usize,
    pub sink: usize,
    pub seed: String,
    pub eps: f64,
    pub forward_distance: f64,
    pub backward_distance: f64,
    pub observed_rate: f64,
    pub predicted_rate: f64,
    pub homoclinic: bool,
    pub file: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphReport {
    pub nodes: Vec<NodeReport>,
    pub edges: Vec<EdgeReport>,
    pub adjacency: Vec<(usize, usize)>,
    pub attractor_sample_size: usize,
    pub unresolved: Vec<UnresolvedTrace>,
    pub stable_side: Option<StableSideReport>,
    pub eps_robustness: Option<EpsReport>,
    pub tol: f64,
}

fn thin<T: Clone>(items: &[T], count: usize) -> Vec<T> {
    if items.len() <= count || count == 0 {
        return items.to_vec();
    }
    (0..count).map(|i| items[i * (items.len() - 1) / (count - 1).max(1)].clone()).collect()
}

fn trace_all(
    problem: &GalerkinProblem,
    set: &EquilibriumSet,
    opts: &TraceOptions,
) -> (Vec<(usize, ManifoldTrace)>, Vec<UnresolvedTrace>) {
    let mut traces = Vec::new();
    let mut failed = Vec::new();
    // sequential over nodes; seeds of one node run in parallel
    for (i, eq) in set.members.iter().enumerate() {
        match trace_unstable_manifold(problem, eq, set, opts) {
            Ok(ts) => traces.extend(ts.into_iter().map(|t| (i, t))),
            Err(e) => failed.push(UnresolvedTrace { source: i, seed: "*".into(), message: e.to_string() }),
        }
    }
    (traces, failed)
}

/// Traces the unstable manifolds of every equilibrium, labels each orbit by
/// its ω-limit and checks that forward runs from the sampled attractor
/// settle on equilibria.
pub fn build_attractor(problem: &GalerkinProblem, set: &EquilibriumSet, params: &BuildParams) -> Result<ConnectionGraph> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let tol = params.trace.limit_tol;
    let (traces, mut unresolved) = trace_all(problem, set, &params.trace);
    let mut edges = Vec::new();
    for (source, trace) in traces {
        let fwd = trace.forward()?;
        match omega_limit(problem, &fwd, set, tol) {
            Ok(lim) => {
                let first = trace.trajectory.first_state();
                let backward_distance = first.distance_h1(&set.members[source].field);
                edges.push(Edge { source, sink: lim.node, trace, forward_distance: lim.distance, backward_distance });
            }
            Err(e) => unresolved.push(UnresolvedTrace { source, seed: trace.seed.clone(), message: e.to_string() }),
        }
    }

    let mut attractor_sample: Vec<SpectralField> = set.fields();
    let mut probe: Vec<SpectralField> = set.fields();
    for e in &edges {
        let fwd = e.trace.forward()?;
        attractor_sample.extend(fwd.states().iter().cloned());
        probe.extend(thin(fwd.states(), params.samples_per_edge));
    }

    let stable_side = params.check_stable_side.then(|| {
        let results = resolve_forward(problem, &probe, set, &params.trace);
        StableSideReport {
            checked: results.len(),
            resolved: results.iter().filter(|r| r.is_ok()).count(),
            max_distance: results.iter().filter_map(|r| r.as_ref().ok()).map(|l| l.distance).fold(0.0, f64::max),
        }
    });

    let eps_robustness = if params.check_eps {
        Some(compare_half_eps(problem, set, &params.trace, &edges))
    } else {
        None
    };

    Ok(ConnectionGraph { nodes: set.clone(), edges, attractor_sample, unresolved, stable_side, eps_robustness, tol })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (mut len_sq, mut dot) = (0.0, 0.0);
    for ((pi, ai), bi) in p.iter().zip(a).zip(b) {
        len_sq += (bi - ai) * (bi - ai);
        dot += (pi - ai) * (bi - ai);
    }
    let s = if len_sq > 0.0 { (dot / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    p.iter()
        .zip(a)
        .zip(b)
        .map(|((pi, ai), bi)| {
            let d = pi - ai - s * (bi - ai);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

// L² distance from a point to the polyline through `curve`, checked on the
// segments adjacent to the nearest vertex
fn distance_to_polyline(p: &SpectralField, curve: &[SpectralField]) -> f64 {
    let p = p.coeffs();
    let (k, d_sq) = curve
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(p, c.coeffs())))
        .fold((0, f64::INFINITY), |best, x| if x.1 < best.1 { x } else { best });
    let mut best = d_sq.sqrt();
    if k > 0 {
        best = best.min(segment_distance(p, curve[k - 1].coeffs(), curve[k].coeffs()));
    }
    if k + 1 < curve.len() {
        best = best.min(segment_distance(p, curve[k].coeffs(), curve[k + 1].coeffs()));
    }
    best
}

fn curve_deviation(a: &[SpectralField], b: &[SpectralField], origin: &SpectralField) -> f64 {
    let scale = a.iter().chain(b).map(|u| u.distance_l2(origin)).fold(1e-300, f64::max);
    let ab = a.iter().map(|p| distance_to_polyline(p, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|p| distance_to_polyline(p, a)).fold(0.0, f64::max);
    ab.max(ba) / scale
}

fn compare_half_eps(problem: &GalerkinProblem, set: &EquilibriumSet, opts: &TraceOptions, edges: &[Edge]) -> EpsReport {
    let mut labels_match = true;
    let mut deviation: f64 = 0.0;
    for (i, eq) in set.members.iter().enumerate() {
        if eq.unstable_dim() == 0 {
            continue;
        }
        let half = TraceOptions { eps: Some(0.5 * opts.eps_for(eq)), ..opts.clone() };
        let Ok(traces) = trace_unstable_manifold(problem, eq, set, &half) else {
            labels_match = false;
            continue;
        };
        for t in traces {
            let Some(orig) = edges.iter().find(|e| e.source == i && e.trace.seed == t.seed) else {
                labels_match = false;
                continue;
            };
            let fwd = match t.forward() {
                Ok(f) => f,
                Err(_) => {
                    labels_match = false;
                    continue;
                }
            };
            match omega_limit(problem, &fwd, set, opts.limit_tol) {
                Ok(lim) if lim.node == orig.sink => {}
                _ => labels_match = false,
            }
            if let Ok(o) = orig.trace.forward() {
                deviation = deviation.max(curve_deviation(o.states(), fwd.states(), &eq.field));
            }
        }
    }
    EpsReport { half_eps_labels_match: labels_match, max_curve_deviation: deviation }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeLevel {
    pub node: usize,
    pub energy: f64,
    pub unstable_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeAudit {
    pub edge: usize,
    pub source: usize,
    pub sink: usize,
    pub source_energy: f64,
    pub sink_energy: f64,
    pub strict_descent: bool,
    /// Largest increase of `E` between consecutive outputs.
    pub max_increase: f64,
    pub monotone: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    /// Nodes by decreasing energy.
    pub levels: Vec<NodeLevel>,
    pub edges: Vec<EdgeAudit>,
    pub topological_order: bool,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Lyapunov check: `E(source) > E(sink)` on every edge and `E` non-increasing
/// along every traced orbit up to `tol`.
pub fn energy_descent_audit(problem: &GalerkinProblem, graph: &ConnectionGraph, tol: f64) -> AuditReport {
    let energy: Vec<f64> = graph.nodes.members.iter().map(|e| e.energy).collect();
    let mut order: Vec<usize> = (0..energy.len()).collect();
    order.sort_by(|a, b| energy[*b].total_cmp(&energy[*a]).then(a.cmp(b)));
    let rank: Vec<usize> = {
        let mut r = vec![0; order.len()];
        for (pos, node) in order.iter().enumerate() {
            r[*node] = pos;
        }
        r
    };
    let mut failures = Vec::new();
    let edges: Vec<EdgeAudit> = graph
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let series = e.trace.forward().map(|f| energy_series(problem, &f)).unwrap_or_default();
            let max_increase = series.windows(2).map(|w| w[1].energy - w[0].energy).fold(0.0, f64::max);
            let strict = energy[e.source] > energy[e.sink];
            let first = series.first().map(|r| r.energy).unwrap_or(0.0);
            let last = series.last().map(|r| r.energy).unwrap_or(0.0);
            let degenerate = e.homoclinic() || (first - last).abs() <= tol;
            let audit = EdgeAudit {
                edge: k,
                source: e.source,
                sink: e.sink,
                source_energy: energy[e.source],
                sink_energy: energy[e.sink],
                strict_descent: strict,
                max_increase,
                monotone: max_increase <= tol,
                degenerate,
            };
            if !strict {
                failures.push(format!("edge {k} ({} -> {}): energy does not decrease", e.source, e.sink));
            }
            if !audit.monotone {
                failures.push(format!("edge {k}: energy rises by {max_increase:.3e}"));
            }
            if degenerate {
                failures.push(format!("edge {k}: degenerate (constant energy)"));
            }
            audit
        })
        .collect();
    let topological_order = graph.edges.iter().all(|e| rank[e.source] < rank[e.sink]);
    AuditReport {
        levels: order
            .iter()
            .map(|&i| NodeLevel { node: i, energy: energy[i], unstable_dim: graph.nodes.members[i].unstable_dim() })
            .collect(),
        passed: failures.is_empty() && topological_order,
        edges,
        topological_order,
        failures,
    }
}

/// Under `u ↦ −u` every node and every edge maps onto one of the graph's.
pub fn is_negation_symmetric(graph: &ConnectionGraph, tol: f64) -> bool {
    let mirror: Vec<Option<usize>> = graph
        .nodes
        .members
        .iter()
        .map(|e| {
            let neg = e.field.neg();
            graph.nodes.nearest(&neg).filter(|(_, d)| *d <= tol).map(|(j, _)| j)
        })
        .collect();
    if mirror.iter().any(|m| m.is_none()) {
        return false;
    }
    let adj = graph.adjacency();
    adj.iter().all(|(s, t)| adj.contains(&(mirror[*s].unwrap(), mirror[*t].unwrap())))
}

/// Forward parts of all edges, for writing out.
pub fn edge_curves(graph: &ConnectionGraph) -> Result<Vec<TrajectorySample<SpectralField>>> {
    graph.edges.iter().map(|e| Ok(e.trace.trajectory.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{find_all, SearchStrategy};
    use crate::nonlinearity::NonlinearTerm;
    use crate::spectral::{make_basis, Domain};

    fn graph(spec: &str, m: usize) -> (GalerkinProblem, ConnectionGraph) {
        let p = GalerkinProblem::unforced(&make_basis(m, Domain::unit()).unwrap(), NonlinearTerm::parse(spec).unwrap());
        let set = find_all(&p, &SearchStrategy::default()).unwrap();
        let params = BuildParams { check_stable_side: false, ..BuildParams::default() };
        let g = build_attractor(&p, &set, &params).unwrap();
        (p, g)
    }

    #[test]
    fn single_node_graphs() {
        for spec in ["cubic", "chafee_infante(lambda=0.5)"] {
            let (p, g) = graph(spec, 8);
            assert_eq!(g.nodes.len(), 1);
            assert!(g.edges.is_empty());
            assert!(energy_descent_audit(&p, &g, 1e-8).passed);
        }
    }

    #[test]
    fn chafee_infante_graph() {
        let (p, g) = graph("chafee_infante(lambda=5)", 16);
        assert_eq!(g.nodes.len(), 5);
        assert!(g.unresolved.is_empty(), "{:?}", g.unresolved);
        assert!(g.forward_resolved() && g.backward_resolved());
        let audit = energy_descent_audit(&p, &g, 1e-8);
        assert!(audit.passed, "{:?}", audit.failures);
        assert!(is_negation_symmetric(&g, 1e-10));
        let zero = g.nodes.members.iter().position(|e| e.field.l2() == 0.0).unwrap();
        let sinks: BTreeSet<usize> = g.edges.iter().filter(|e| e.source == zero).map(|e| e.sink).collect();
        assert_eq!(sinks.len(), 4);
    }

    #[test]
    fn polyline_distance() {
        let b = make_basis(2, Domain::unit()).unwrap();
        let f = |x: f64, y: f64| SpectralField::new(b.clone(), vec![x, y]).unwrap();
        let curve = [f(0.0, 0.0), f(1.0, 0.0)];
        assert!((distance_to_polyline(&f(0.5, 0.3), &curve) - 0.3).abs() < 1e-15);
        assert!((distance_to_polyline(&f(2.0, 0.0), &curve) - 1.0).abs() < 1e-15);
    }
}
