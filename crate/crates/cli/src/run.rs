//! The six experiments. Each writes its artifacts and returns the list of
//! certificates it checked.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use attractor_lab::attractor::{
    absorbing_ball, build_attractor, certify_dissipation, certify_smoothing, dimension_scan, energy_descent_audit,
    linf_bound, run_trials, trial_suite, uniform_gronwall, verify_linf, BoundCertificate, BuildParams, TraceOptions,
};
use attractor_lab::equilibria::{check_regularity, find_all, Equilibrium, NewtonOptions, SearchStrategy};
use attractor_lab::io::{fmt_f64, format_csv, format_energy_csv, format_trajectory, to_json};
use attractor_lab::msflow::{check_axioms, AxiomReport};
use attractor_lab::nonlinearity::{certify, primitive_mismatch};
use attractor_lab::spectral::energy_series;
use attractor_lab::{
    BranchMode, BranchPolicy, Domain, GalerkinBundle, GalerkinProblem, IntegratorOptions, Metric, SetOfStates,
    SpectralBasis, SpectralField, TrajectorySample,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Experiment, RunConfig};

/// Rows kept per edge file and per curve in `manifold_curves.csv`.
pub const EDGE_ROWS: usize = 1001;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Usage(String),
    Solver(attractor_lab::Error),
    Io(io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Usage(m) => write!(f, "{m}"),
            RunError::Solver(e) => write!(f, "solver failure: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<attractor_lab::Error> for RunError {
    fn from(e: attractor_lab::Error) -> Self {
        use attractor_lab::Error as E;
        match e {
            E::Io(io) => RunError::Io(io),
            E::InvalidParameter(_) | E::Resonant { .. } | E::UnknownNonlinearity(_) | E::UnsupportedDomain(_) => {
                RunError::Usage(e.to_string())
            }
            other => RunError::Solver(other),
        }
    }
}

/// Output directory; the only writer of files under it.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, rel: &str, text: &str) -> io::Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<(), RunError> {
        self.write(rel, &to_json(value)?)?;
        Ok(())
    }
}

/// One line of the certificate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    pub name: String,
    pub constant: String,
    /// Non-finite values are written as `null` and read back as NaN.
    #[serde(deserialize_with = "nan_if_null")]
    pub value: f64,
    /// Margin to failure; `None` for yes/no checks.
    pub slack: Option<f64>,
    pub passed: bool,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl CertRow {
    fn new(name: &str, constant: &str, value: f64, slack: Option<f64>, passed: bool) -> Self {
        Self { name: name.into(), constant: constant.into(), value, slack, passed }
    }

    /// `value ≤ tol`.
    fn at_most(name: &str, constant: &str, value: f64, tol: f64) -> Self {
        Self::new(name, constant, value, Some(tol - value), value <= tol)
    }

    fn from_bound(c: &BoundCertificate) -> Self {
        let key = ["R1", "R2", "R3", "R4", "radius_sq", "M", "min_y"]
            .into_iter()
            .find(|k| c.constants.contains_key(*k))
            .map(str::to_string)
            .or_else(|| c.constants.keys().next().cloned())
            .unwrap_or_default();
        let value = c.constants.get(&key).copied().unwrap_or(f64::NAN);
        Self { name: c.name.clone(), constant: key, value, slack: Some(c.worst_slack), passed: c.passed }
    }
}

/// What `report` reads back: one per run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub passed: bool,
    pub certificates: Vec<CertRow>,
    pub notes: Vec<String>,
}

impl Summary {
    fn new(exp: Experiment, certificates: Vec<CertRow>, notes: Vec<String>) -> Self {
        let passed = certificates.iter().all(|c| c.passed);
        Self { experiment: exp.name().into(), passed, certificates, notes }
    }
}

pub fn basis_for(cfg: &RunConfig) -> Result<Arc<SpectralBasis>, RunError> {
    Ok(Arc::new(SpectralBasis::with_grid(cfg.m, cfg.grid_intervals(), Domain::unit())?))
}

pub fn problem_for(cfg: &RunConfig) -> Result<GalerkinProblem, RunError> {
    let basis = basis_for(cfg)?;
    let forcing = cfg.forcing.to_field(&basis)?;
    Ok(GalerkinProblem::new(cfg.term(), forcing))
}

pub fn search_strategy(cfg: &RunConfig) -> SearchStrategy {
    SearchStrategy {
        modes: cfg.equilibria.modes.min(cfg.m),
        amplitudes: cfg.equilibria.amplitudes.clone(),
        max_rounds: cfg.equilibria.max_rounds,
        dedup_tol: cfg.tolerances.dedup,
        newton: NewtonOptions { tol: cfg.tolerances.newton, ..NewtonOptions::default() },
        ..SearchStrategy::default()
    }
}

pub fn build_params(cfg: &RunConfig) -> BuildParams {
    let a = &cfg.attractor;
    BuildParams {
        trace: TraceOptions {
            eps: a.eps,
            ring: a.ring,
            horizon: a.horizon,
            max_horizon: a.max_horizon,
            dt: cfg.dt,
            output_stride: cfg.output_stride,
            scheme: cfg.scheme,
            limit_tol: cfg.tolerances.limit,
            ..TraceOptions::default()
        },
        samples_per_edge: a.samples_per_edge,
        check_stable_side: a.check_stable_side,
        check_eps: a.check_eps,
    }
}

pub fn run(exp: Experiment, cfg: &RunConfig, art: &mut Artifacts) -> Result<Summary, RunError> {
    if let Some(declared) = cfg.experiment {
        if declared != exp {
            return Err(RunError::Usage(format!(
                "config declares experiment `{}` but `{}` was requested",
                declared.name(),
                exp.name()
            )));
        }
    }
    let summary = match exp {
        Experiment::Simulate => simulate(cfg, art)?,
        Experiment::Equilibria => equilibria(cfg, art)?,
        Experiment::Attractor => attractor(cfg, art)?,
        Experiment::Certify => certify_bounds(cfg, art)?,
        Experiment::DimensionScan => scan(cfg, art)?,
        Experiment::Audit => audit(cfg, art)?,
    };
    art.json("summary.json", &summary)?;
    Ok(summary)
}

fn thinned(traj: &TrajectorySample<SpectralField>, rows: usize) -> Result<TrajectorySample<SpectralField>, RunError> {
    let n = traj.len();
    if n <= rows {
        return Ok(traj.clone());
    }
    let pick: Vec<usize> = (0..rows).map(|i| i * (n - 1) / (rows - 1)).collect();
    let times = pick.iter().map(|&i| traj.times()[i]).collect();
    let states = pick.iter().map(|&i| traj.states()[i].clone()).collect();
    Ok(TrajectorySample::new(times, states, traj.kind())?)
}

#[derive(Serialize)]
struct MemberStats {
    member: usize,
    final_l2: f64,
    final_h1: f64,
    final_sup: f64,
    energy_start: f64,
    energy_end: f64,
    energy_residual: f64,
    max_energy_increase: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    term: String,
    t_end: f64,
    dt: f64,
    branch: BranchPolicy,
    members: Vec<MemberStats>,
    initial_diameter: f64,
    final_diameter: f64,
}

fn simulate(cfg: &RunConfig, art: &mut Artifacts) -> Result<Summary, RunError> {
    let p = problem_for(cfg)?;
    let u0 = cfg.initial.to_field(p.basis())?;
    let policy = cfg.branch_policy();
    let opts = IntegratorOptions::new(cfg.dt, cfg.t_end).with_stride(cfg.output_stride).with_scheme(cfg.scheme);
    let runs = if policy.mode == BranchMode::None { vec![p.integrate(&u0, &opts)?] } else { p.integrate_ensemble(&u0, &opts, &policy)? };

    let spec = p.term().spec_string();
    let mut members = Vec::new();
    let mut worst_increase: f64 = 0.0;
    let mut energy_tol: f64 = 0.0;
    for (i, traj) in runs.iter().enumerate() {
        let series = energy_series(&p, traj);
        let e0 = series[0].energy;
        let increase = series.windows(2).map(|w| w[1].energy - w[0].energy).fold(0.0, f64::max);
        worst_increase = worst_increase.max(increase);
        energy_tol = energy_tol.max(cfg.tolerances.audit * (1.0 + e0.abs()));
        let last = traj.last_state();
        members.push(MemberStats {
            member: i,
            final_l2: last.l2(),
            final_h1: last.h1(),
            final_sup: last.sup_norm(),
            energy_start: e0,
            energy_end: series.last().map_or(e0, |r| r.energy),
            energy_residual: attractor_lab::spectral::energy_equality_residual(&series),
            max_energy_increase: increase,
        });
        let meta = [("term", spec.clone()), ("member", i.to_string())];
        if runs.len() == 1 {
            art.write("trajectory.dat", &format_trajectory(traj, &meta))?;
            art.write("energy.csv", &format_energy_csv(&series))?;
        } else {
            art.write(&format!("trajectories/member_{i:03}.dat"), &format_trajectory(traj, &meta))?;
            art.write(&format!("energy/member_{i:03}.csv"), &format_energy_csv(&series))?;
        }
    }
    let set = |pick: &dyn Fn(&TrajectorySample<SpectralField>) -> SpectralField| {
        SetOfStates::new(runs.iter().map(pick).collect(), Metric::L2).diameter()
    };
    let report = SimulateReport {
        term: spec,
        t_end: cfg.t_end,
        dt: cfg.dt,
        branch: policy,
        members,
        initial_diameter: set(&|t| t.first_state().clone()),
        final_diameter: set(&|t| t.last_state().clone()),
    };
    art.json("simulate.json", &report)?;

    let mut certs = Vec::new();
    let mut notes = vec![format!("{} trajectory(ies) to T = {}", runs.len(), cfg.t_end)];
    if policy.mode == BranchMode::MollifiedSelection {
        notes.push("energy descent not checked: members follow mollified terms".into());
    } else {
        certs.push(CertRow::at_most("energy_descent", "max_increase", worst_increase, energy_tol));
    }
    if runs.len() > 1 {
        notes.push(format!(
            "ensemble diameter {} at t = 0, {} at t = {}",
            fmt_f64(report.initial_diameter),
            fmt_f64(report.final_diameter),
            cfg.t_end
        ));
    }
    Ok(Summary::new(Experiment::Simulate, certs, notes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRow {
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

fn node_rows(members: &[Equilibrium]) -> Vec<NodeRow> {
    members
        .iter()
        .enumerate()
        .map(|(id, e)| NodeRow {
            id,
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
        .collect()
}

fn energy_levels_csv(members: &[Equilibrium]) -> String {
    let rows: Vec<Vec<f64>> = members
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i as f64, e.energy, e.unstable_dim() as f64, e.field.l2(), e.sup_norm])
        .collect();
    format_csv(&["node", "energy", "unstable_dim", "l2", "sup"], &rows)
}

fn profiles_csv(basis: &SpectralBasis, members: &[Equilibrium]) -> String {
    let mut header = vec!["x".to_string()];
    header.extend((0..members.len()).map(|i| format!("u_{i}")));
    let values: Vec<Vec<f64>> = members.iter().map(|e| e.field.grid_values()).collect();
    let rows: Vec<Vec<f64>> = basis
        .nodes()
        .iter()
        .enumerate()
        .map(|(q, x)| std::iter::once(*x).chain(values.iter().map(|v| v[q])).collect())
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    format_csv(&header, &rows)
}

fn newton_row(cfg: &RunConfig, members: &[Equilibrium]) -> CertRow {
    let worst = members.iter().map(|e| e.residual).fold(0.0, f64::max);
    CertRow::at_most("newton_residual", "max_residual", worst, cfg.tolerances.newton)
}

#[derive(Serialize)]
struct EquilibriaReport<'a> {
    term: String,
    nodes: Vec<NodeRow>,
    search: &'a attractor_lab::equilibria::SearchLog,
    regularity: attractor_lab::equilibria::RegularityReport,
}

fn equilibria(cfg: &RunConfig, art: &mut Artifacts) -> Result<Summary, RunError> {
    let p = problem_for(cfg)?;
    let set = find_all(&p, &search_strategy(cfg))?;
    let regularity = check_regularity(&set, &p)?;
    art.json(
        "equilibria.json",
        &EquilibriaReport { term: p.term().spec_string(), nodes: node_rows(&set.members), search: &set.log, regularity: regularity.clone() },
    )?;
    art.write("energy_levels.csv", &energy_levels_csv(&set.members))?;
    art.write("profiles.csv", &profiles_csv(p.basis(), &set.members))?;
    let certs = vec![
        newton_row(cfg, &set.members),
        CertRow::new("regularity", "relative_change", regularity.relative_change, None, regularity.finite && regularity.stable),
    ];
    let dims: Vec<String> = set.members.iter().map(|e| e.unstable_dim().to_string()).collect();
    let notes = vec![format!("{} equilibria; unstable dimensions [{}]", set.len(), dims.join(", "))];
    Ok(Summary::new(Experiment::Equilibria, certs, notes))
}

fn attractor(cfg: &RunConfig, art: &mut Artifacts) -> Result<Summary, RunError> {
    let p = problem_for(cfg)?;
    let set = find_all(&p, &search_strategy(cfg))?;
    let graph = build_attractor(&p, &set, &build_params(cfg))?;
    let audit = energy_descent_audit(&p, &graph, cfg.tolerances.audit);
    let bound = linf_bound(&p);
    let linf = verify_linf(&bound, &graph.attractor_sample, cfg.tolerances.linf);

    art.json("graph.json", &graph.report())?;
    art.json("audit.json", &audit)?;
    art.write("energy_levels.csv", &energy_levels_csv(&set.members))?;
    art.write("profiles.csv", &profiles_csv(p.basis(), &set.members))?;
    let spec = p.term().spec_string();
    let mut curves = Vec::new();
    for (k, e) in graph.edges.iter().enumerate() {
        let traj = thinned(&e.trace.trajectory, EDGE_ROWS)?;
        let meta = [("term", spec.clone()), ("source", e.source.to_string()), ("sink", e.sink.to_string()), ("seed", e.trace.seed.clone())];
        art.write(&attractor_lab::attractor::edge_file_name(k), &format_trajectory(&traj, &meta))?;
        for (t, u) in traj.times().iter().zip(traj.states()) {
            curves.push(vec![k as f64, *t, p.energy(u), u.l2(), u.h1(), u.coeffs()[0], u.coeffs().get(1).copied().unwrap_or(0.0)]);
        }
    }
    art.write("manifold_curves.csv", &format_csv(&["edge", "t", "energy", "l2", "h1", "a_1", "a_2"], &curves))?;

    let tol = graph.tol;
    let forward = graph.edges.iter().map(|e| e.forward_distance).fold(0.0, f64::max);
    let backward = graph.edges.iter().map(|e| e.backward_distance).fold(0.0, f64::max);
    let mut certs = vec![
        CertRow::new(
            "forward_resolution",
            "max_terminal_h1",
            forward,
            Some(tol - forward),
            graph.forward_resolved(),
        ),
        CertRow::new("backward_resolution", "max_tail_h1", backward, Some(tol - backward), graph.backward_resolved()),
        CertRow::new(
            "energy_audit",
            "min_drop",
            audit.edges.iter().map(|e| e.source_energy - e.sink_energy).fold(f64::INFINITY, f64::min),
            None,
            audit.passed,
        ),
        CertRow::from_bound(&linf),
    ];
    if let Some(side) = &graph.stable_side {
        certs.push(CertRow::new("stable_side", "max_terminal_h1", side.max_distance, Some(tol - side.max_distance), side.passed()));
    }
    if let Some(eps) = &graph.eps_robustness {
        certs.push(CertRow::new("eps_robustness", "max_curve_deviation", eps.max_curve_deviation, Some(0.01 - eps.max_curve_deviation), eps.passed()));
    }
    art.json("certificates.json", &certs)?;
    let mut notes = vec![format!(
        "{} equilibria, {} edges, {} distinct connections, {} sample states",
        set.len(),
        graph.edges.len(),
        graph.adjacency().len(),
        graph.attractor_sample.len()
    )];
    notes.extend(graph.unresolved.iter().map(|u| format!("unresolved trace from node {} ({}): {}", u.source, u.seed, u.message)));
    notes.extend(audit.failures.iter().cloned());
    Ok(Summary::new(Experiment::Attractor, certs, notes))
}

fn certify_bounds(cfg: &RunConfig, art: &mut Artifacts) -> Result<Summary, RunError> {
    let p = problem_for(cfg)?;
    let k = &cfg.certify;
    let trials = trial_suite(p.basis(), k.trials, k.max_norm, cfg.seed.unwrap_or(0));
    let runs = run_trials(&p, &trials, cfg.dt, k.t_end, k.sample_every)?;
    let fine = if k.refine { Some(runs.refined(&p)?) } else { None };
    let dissipation = certify_dissipation(&p, &runs, k.r2, fine.as_ref())?;
    let smoothing = certify_smoothing(&p, &runs, &k.r_grid, fine.as_ref())?;
    let ball = absorbing_ball(&smoothing.propreg1, &p, &runs)?;
    let gronwall = uniform_gronwall(&p, &runs, k.r_gronwall)?;
    let bound = linf_bound(&p);

    let all = [
        &dissipation,
        &smoothing.propreg1,
        &smoothing.propreg3,
        &smoothing.propreg4,
        &ball.certificate,
        &gronwall,
    ];
    art.json("certificates.json", &all)?;
    art.json("linf_bound.json", &bound)?;

    let lambda1 = p.basis().lambda1();
    let r2 = dissipation.constant("R2").unwrap_or(0.0);
    let mut decay = Vec::new();
    for (i, (traj, u0)) in runs.runs.iter().zip(&runs.initial).enumerate() {
        let n0 = u0.l2_sq();
        for (t, u) in traj.times().iter().zip(traj.states()) {
            decay.push(vec![i as f64, *t, u.l2_sq(), (-lambda1 * t).exp() * n0 + r2, u.h1_sq()]);
        }
    }
    art.write("decay.csv", &format_csv(&["trial", "t", "l2_sq", "bound", "h1_sq"], &decay))?;
    let entries: Vec<Vec<f64>> = ball
        .entry_times
        .iter()
        .zip(&ball.predicted)
        .zip(&runs.initial)
        .enumerate()
        .map(|(i, ((e, pred), u0))| vec![i as f64, u0.l2_sq(), e.unwrap_or(f64::NAN), *pred])
        .collect();
    art.write("entry_times.csv", &format_csv(&["trial", "l2_sq_initial", "entry", "predicted"], &entries))?;

    let mut certs: Vec<CertRow> = all.iter().map(|c| CertRow::from_bound(c)).collect();
    certs.push(CertRow::new("linf_bound", "M", bound.m, None, bound.m.is_finite()));
    let mut notes: Vec<String> = all.iter().flat_map(|c| c.notes.iter().map(move |n| format!("{}: {n}", c.name))).collect();
    notes.insert(0, format!("{} trials, ‖u0‖ ≤ {}, T = {}", runs.len(), k.max_norm, k.t_end));
    Ok(Summary::new(Experiment::Certify, certs, notes))
}

fn scan(cfg: &RunConfig, art: &mut Artifacts) -> Result<Summary, RunError> {
    let basis = basis_for(cfg)?;
    let table = dimension_scan(&cfg.scan_k, &basis)?;
    art.json("scan.json", &table)?;
    let mut csv = String::from("k,n_k,linearized\n");
    for r in &table.rows {
        csv.push_str(&format!("{},{},{}\n", r.k, r.n_k, r.linearized));
    }
    art.write("scan.csv", &csv)?;
    let certs = vec![
        CertRow::new("linearized_count", "rows", table.rows.len() as f64, None, table.consistent()),
        CertRow::new("n_k_increasing", "rows", table.rows.len() as f64, None, table.strictly_increasing()),
    ];
    Ok(Summary::new(Experiment::DimensionScan, certs, Vec::new()))
}

/// Semiflow axioms over random `(x0, t, s)` triples: `x0` from the trial
/// suite, `t` and `s` on the bundle's output grid in `(0, t_max]`.
pub fn axiom_suite(bundle: &GalerkinBundle, triples: usize, t_max: f64, max_norm: f64, samples: usize, seed: u64, tol: f64) -> Result<Vec<AxiomReport>, RunError> {
    use rand::{Rng, SeedableRng};
    let res = bundle.dt * bundle.output_stride as f64;
    let steps = ((t_max / res).floor() as u64).max(1);
    let starts = trial_suite(bundle.problem.basis(), triples, max_norm, seed);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let times: Vec<(f64, f64)> = (0..starts.len())
        .map(|_| (rng.random_range(1..=steps) as f64 * res, rng.random_range(1..=steps) as f64 * res))
        .collect();
    let out = starts
        .par_iter()
        .zip(&times)
        .enumerate()
        .map(|(i, (x0, (t, s)))| check_axioms(bundle, x0, *t, *s, i, samples, tol))
        .collect::<attractor_lab::Result<Vec<_>>>()?;
    Ok(out)
}

#[derive(Serialize)]
struct AuditOutput {
    growth: Option<attractor_lab::nonlinearity::Certificate>,
    growth_error: Option<String>,
    primitive_mismatch: f64,
    branch: BranchPolicy,
    axioms: Vec<AxiomReport>,
}

fn audit(cfg: &RunConfig, art: &mut Artifacts) -> Result<Summary, RunError> {
    let p = problem_for(cfg)?;
    let term = p.term().clone();
    let (growth, growth_error) = match certify(&term, (-100.0, 100.0), 20_001) {
        Ok(c) => (Some(c), None),
        Err(e @ attractor_lab::Error::Certification { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let mismatch = primitive_mismatch(&term, (-10.0, 10.0), 2001);
    let mut bundle = GalerkinBundle::new(p, cfg.dt, cfg.branch_policy());
    bundle.scheme = cfg.scheme;
    bundle.output_stride = cfg.output_stride;
    let a = &cfg.audit;
    let tol = cfg.tolerances.semiflow;
    let axioms = axiom_suite(&bundle, a.triples, a.t_max, a.max_norm, a.samples, cfg.seed.unwrap_or(0), tol)?;
    let rows: Vec<Vec<f64>> = axioms
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i as f64, r.t, r.s, r.inclusion, r.associativity, r.translation, r.membership])
        .collect();
    art.write("axioms.csv", &format_csv(&["triple", "t", "s", "inclusion", "associativity", "translation", "membership"], &rows))?;
    let min_slack = match (&growth, &growth_error) {
        (Some(g), _) => g.checks.iter().map(|c| c.min_slack).fold(f64::INFINITY, f64::min),
        _ => f64::NEG_INFINITY,
    };
    let worst = |f: fn(&AxiomReport) -> f64| axioms.iter().map(f).fold(0.0, f64::max);
    let certs = vec![
        CertRow::new("growth_conditions", "min_slack", min_slack, Some(min_slack), growth.as_ref().is_some_and(|g| g.passed)),
        CertRow::at_most("primitive", "max_mismatch", mismatch, 1e-6),
        CertRow::at_most("semiflow_inclusion", "max_semidist", worst(|r| r.inclusion), tol),
        CertRow::at_most("concatenation", "max_gap", worst(|r| r.associativity), tol),
        CertRow::at_most("translation", "max_gap", worst(|r| r.translation), tol),
        CertRow::at_most("translate_membership", "max_gap", worst(|r| r.membership), tol),
    ];
    art.json("audit.json", &AuditOutput { growth, growth_error: growth_error.clone(), primitive_mismatch: mismatch, branch: bundle.policy, axioms })?;
    let mut notes = vec![format!("{} triples, t and s in (0, {}]", a.triples, a.t_max)];
    notes.extend(growth_error);
    Ok(Summary::new(Experiment::Audit, certs, notes))
}
