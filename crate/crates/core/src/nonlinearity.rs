//! Nonlinear terms `f` with their growth and dissipation constants, the
//! sampling certificate that checks them, and the branching policies used
//! to sample non-unique solutions.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Constants of
/// `|f(u)| ≤ C1(1+|u|³)`, `f(u)u ≥ α|u|⁴ − C2`,
/// `|F(u)| ≤ D1(1+u⁴)`, `F(u) ≥ δu⁴ − D2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub d1: f64,
    pub d2: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    OneSidedLipschitz,
    NonLipschitz,
}

#[derive(Clone)]
enum Kind {
    Zero,
    Cubic,
    ChafeeInfante { lambda: f64 },
    Remark3 { k: f64, sqrt_k: f64, amp: f64 },
    RootBranch { c: f64 },
    Custom {
        f: ScalarFn,
        df: Option<ScalarFn>,
        primitive: Arc<Antiderivative>,
        odd: bool,
    },
}

/// The reaction term `f` together with its primitive `F(u) = ∫₀ᵘ f`.
#[derive(Clone)]
pub struct NonlinearTerm {
    name: String,
    params: Vec<(String, f64)>,
    kind: Kind,
    constants: GrowthConstants,
    regularity: Regularity,
    mollifier: Option<f64>,
}

impl fmt::Debug for NonlinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearTerm")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("constants", &self.constants)
            .field("regularity", &self.regularity)
            .field("mollifier", &self.mollifier)
            .finish()
    }
}

/// `max_{u ≥ 0} (a uᵖ − b u⁴)` for `0 < p < 4`, `a, b > 0`.
fn max_power_gap(a: f64, p: f64, b: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let u = (a * p / (4.0 * b)).powf(1.0 / (4.0 - p));
    a * u.powf(p) - b * u.powi(4)
}

fn param(params: &[(&str, f64)], key: &str) -> Option<f64> {
    params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

fn require(params: &[(&str, f64)], key: &str, name: &str) -> Result<f64> {
    param(params, key)
        .ok_or_else(|| Error::InvalidParameter(format!("`{name}` requires parameter `{key}`")))
}

// regularized sign(u)|u|^{1/2} and its primitive
fn root(u: f64, rho: Option<f64>) -> f64 {
    match rho {
        Some(r) if u.abs() < r => u / r.sqrt(),
        _ => u.signum() * u.abs().sqrt(),
    }
}

fn root_primitive(u: f64, rho: Option<f64>) -> f64 {
    let a = u.abs();
    match rho {
        Some(r) if a < r => a * a / (2.0 * r.sqrt()),
        Some(r) => r.powf(1.5) / 2.0 + 2.0 / 3.0 * (a.powf(1.5) - r.powf(1.5)),
        None => 2.0 / 3.0 * a.powf(1.5),
    }
}

impl NonlinearTerm {
    /// Built-in terms: `zero`, `cubic`, `chafee_infante(lambda)`,
    /// `remark3(k)` for `f_k(u) = u³ − k^{−1/2} sin(k u)`, and
    /// `root_branch(c)` for `u³ − c·sign(u)|u|^{1/2}`.
    pub fn builtin(name: &str, params: &[(&str, f64)]) -> Result<Self> {
        let owned: Vec<(String, f64)> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let (kind, constants, regularity) = match name {
            "zero" => (
                Kind::Zero,
                GrowthConstants { c1: 0.0, c2: 0.0, alpha: 0.0, d1: 0.0, d2: 0.0, delta: 0.0 },
                Regularity::OneSidedLipschitz,
            ),
            "cubic" => (
                Kind::Cubic,
                GrowthConstants { c1: 1.0, c2: 0.0, alpha: 1.0, d1: 0.25, d2: 0.0, delta: 0.25 },
                Regularity::OneSidedLipschitz,
            ),
            "chafee_infante" => {
                let lambda = require(params, "lambda", name)?;
                let l = lambda.max(0.0);
                (
                    Kind::ChafeeInfante { lambda },
                    GrowthConstants {
                        c1: 1.0 + lambda.abs(),
                        c2: max_power_gap(l, 2.0, 0.5),
                        alpha: 0.5,
                        d1: 0.25 + lambda.abs() / 2.0,
                        d2: max_power_gap(l / 2.0, 2.0, 0.125),
                        delta: 0.125,
                    },
                    Regularity::OneSidedLipschitz,
                )
            }
            "remark3" => {
                let k = require(params, "k", name)?;
                if k < 1.0 {
                    return Err(Error::InvalidParameter(format!("remark3 needs k ≥ 1, got {k}")));
                }
                let sqrt_k = k.sqrt();
                // |u sin(ku)|/√k ≤ |u|, so f(u)u ≥ u⁴ − |u| ≥ ½u⁴ − max(|u| − ½u⁴)
                (
                    Kind::Remark3 { k, sqrt_k, amp: 1.0 / sqrt_k },
                    GrowthConstants {
                        c1: 1.0,
                        c2: max_power_gap(1.0, 1.0, 0.5),
                        alpha: 0.5,
                        d1: 2.0,
                        d2: 2.0,
                        delta: 0.25,
                    },
                    Regularity::OneSidedLipschitz,
                )
            }
            "root_branch" => {
                let c = param(params, "c").unwrap_or(1.0);
                if c <= 0.0 {
                    return Err(Error::InvalidParameter(format!("root_branch needs c > 0, got {c}")));
                }
                (
                    Kind::RootBranch { c },
                    GrowthConstants {
                        c1: 1.0 + c,
                        c2: max_power_gap(c, 1.5, 0.5),
                        alpha: 0.5,
                        d1: 0.25 + 2.0 * c / 3.0,
                        d2: max_power_gap(2.0 * c / 3.0, 1.5, 0.125),
                        delta: 0.125,
                    },
                    Regularity::NonLipschitz,
                )
            }
            other => return Err(Error::UnknownNonlinearity(other.to_string())),
        };
        let owned = if name == "root_branch" && param(params, "c").is_none() {
            vec![("c".to_string(), 1.0)]
        } else {
            owned
        };
        Ok(Self {
            name: name.to_string(),
            params: owned,
            kind,
            constants,
            regularity,
            mollifier: None,
        })
    }

    /// Parse `name` or `name(key=value, ...)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, rest) = match spec.find('(') {
            Some(i) => {
                let inner = spec[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Parse(format!("missing `)` in `{spec}`")))?;
                (spec[..i].trim(), inner)
            }
            None => (spec, ""),
        };
        let mut params = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number in `{item}`")))?;
            params.push((k.trim(), v));
        }
        Self::builtin(name, &params)
    }

    /// A user-supplied term; `F` is tabulated numerically on `[-range, range]`.
    pub fn custom(
        name: &str,
        f: ScalarFn,
        df: Option<ScalarFn>,
        constants: GrowthConstants,
        regularity: Regularity,
        odd: bool,
    ) -> Self {
        let primitive = Arc::new(Antiderivative::new(f.clone(), 50.0, 0.05));
        Self {
            name: name.to_string(),
            params: Vec::new(),
            kind: Kind::Custom { f, df, primitive, odd },
            constants,
            regularity,
            mollifier: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    /// `name(key=value,...)`, parseable by [`NonlinearTerm::parse`].
    pub fn spec_string(&self) -> String {
        if self.params.is_empty() {
            return self.name.clone();
        }
        let inner: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name, inner.join(","))
    }

    pub fn constants(&self) -> GrowthConstants {
        self.constants
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn mollifier(&self) -> Option<f64> {
        self.mollifier
    }

    pub fn is_odd(&self) -> bool {
        match &self.kind {
            Kind::Custom { odd, .. } => *odd,
            _ => true,
        }
    }

    /// Copy with the non-Lipschitz part regularized on `|u| < radius`.
    /// Terms that are already locally Lipschitz are returned unchanged.
    pub fn mollified(&self, radius: f64) -> Self {
        let mut out = self.clone();
        if matches!(self.kind, Kind::RootBranch { .. }) && radius > 0.0 {
            out.mollifier = Some(radius);
        }
        out
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Cubic => u * u * u,
            Kind::ChafeeInfante { lambda } => u * u * u - lambda * u,
            Kind::Remark3 { k, amp, .. } => u * u * u - amp * (k * u).sin(),
            Kind::RootBranch { c } => u * u * u - c * root(u, self.mollifier),
            Kind::Custom { f, .. } => f(u),
        }
    }

    /// `F(u) = ∫₀ᵘ f(s) ds`.
    pub fn primitive(&self, u: f64) -> f64 {
        let u4 = 0.25 * u.powi(4);
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Cubic => u4,
            Kind::ChafeeInfante { lambda } => u4 - 0.5 * lambda * u * u,
            Kind::Remark3 { k, amp, .. } => u4 + amp / k * ((k * u).cos() - 1.0),
            Kind::RootBranch { c } => u4 - c * root_primitive(u, self.mollifier),
            Kind::Custom { primitive, .. } => primitive.eval(u),
        }
    }

    /// Centered difference with step `10⁻⁶(1+|u|)`.
    pub fn derivative_fd(&self, u: f64) -> f64 {
        let h = 1e-6 * (1.0 + u.abs());
        (self.eval(u + h) - self.eval(u - h)) / (2.0 * h)
    }

    /// `f'(u)`: analytic for the smooth builtins, finite differences otherwise.
    pub fn derivative(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Cubic => 3.0 * u * u,
            Kind::ChafeeInfante { lambda } => 3.0 * u * u - lambda,
            Kind::Remark3 { k, sqrt_k, .. } => 3.0 * u * u - sqrt_k * (k * u).cos(),
            Kind::Custom { df: Some(df), .. } => df(u),
            _ => self.derivative_fd(u),
        }
    }

    /// Angular frequency of the oscillating part of `f` (1 if none).
    pub fn frequency(&self) -> f64 {
        match &self.kind {
            Kind::Remark3 { k, .. } => k.max(1.0),
            _ => 1.0,
        }
    }

    /// Local rate used to limit the explicit nonlinear substep.
    pub fn stiffness(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::RootBranch { .. } | Kind::Custom { df: None, .. } => {
                3.0 * self.constants.c1 * u * u
            }
            _ => self.derivative(u).abs(),
        }
    }
}

const GL5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss(f: &ScalarFn, a: f64, b: f64) -> f64 {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    half * GL5.iter().map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
}

/// Primitive of a user function, tabulated at `step` spacing on
/// `[-range, range]` with Gauss–Legendre cells.
pub struct Antiderivative {
    f: ScalarFn,
    range: f64,
    step: f64,
    // cumulative[i] = ∫₀^{x_i}, x_i = (i - n) step
    cumulative: Vec<f64>,
    n: usize,
}

impl Antiderivative {
    pub fn new(f: ScalarFn, range: f64, step: f64) -> Self {
        let n = (range / step).ceil() as usize;
        let mut cumulative = vec![0.0; 2 * n + 1];
        for i in 1..=n {
            let (a, b) = ((i - 1) as f64 * step, i as f64 * step);
            cumulative[n + i] = cumulative[n + i - 1] + gauss(&f, a, b);
            cumulative[n - i] = cumulative[n - i + 1] - gauss(&f, -b, -a);
        }
        Self { f, range: n as f64 * step, step, cumulative, n }
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u.abs() <= self.range {
            let i = ((u / self.step).round() as i64 + self.n as i64) as usize;
            let x = (i as f64 - self.n as f64) * self.step;
            self.cumulative[i] + gauss(&self.f, x, u)
        } else {
            let edge = self.range.copysign(u);
            let cells = ((u - edge).abs() / self.step).ceil().max(1.0) as usize;
            let h = (u - edge) / cells as f64;
            let tail: f64 = (0..cells)
                .map(|c| gauss(&self.f, edge + c as f64 * h, edge + (c + 1) as f64 * h))
                .sum();
            self.eval(edge) + tail
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    /// Smallest `rhs − lhs` over the grid (negative means violated).
    pub min_slack: f64,
    pub at: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub term: String,
    pub constants: GrowthConstants,
    pub range: [f64; 2],
    pub samples: usize,
    pub checks: Vec<InequalityCheck>,
    pub passed: bool,
}

/// Check the four growth/dissipation inequalities and `F(0) = 0` on a
/// uniform grid of `range`.
pub fn certify(term: &NonlinearTerm, range: (f64, f64), samples: usize) -> Result<Certificate> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 samples, got {samples}")));
    }
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("empty range [{lo}, {hi}]")));
    }
    let k = term.constants();
    type Ineq = (&'static str, fn(&NonlinearTerm, &GrowthConstants, f64) -> (f64, f64));
    let inequalities: [Ineq; 4] = [
        ("|f(u)| <= C1(1+|u|^3)", |t, k, u| (t.eval(u).abs(), k.c1 * (1.0 + u.abs().powi(3)))),
        ("f(u)u >= alpha|u|^4 - C2", |t, k, u| (k.alpha * u.powi(4) - k.c2, t.eval(u) * u)),
        ("|F(u)| <= D1(1+u^4)", |t, k, u| (t.primitive(u).abs(), k.d1 * (1.0 + u.powi(4)))),
        ("F(u) >= delta u^4 - D2", |t, k, u| (k.delta * u.powi(4) - k.d2, t.primitive(u))),
    ];
    let grid: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    let mut checks = Vec::new();
    for (name, ineq) in inequalities {
        let mut worst = InequalityCheck { name, min_slack: f64::INFINITY, at: lo };
        for &u in &grid {
            let (lhs, rhs) = ineq(term, &k, u);
            let slack = rhs - lhs;
            let scale = 1e-12 * (lhs.abs() + rhs.abs() + 1.0);
            if slack < -scale {
                return Err(Error::Certification { inequality: name, at: u, slack });
            }
            if slack < worst.min_slack {
                worst.min_slack = slack;
                worst.at = u;
            }
        }
        checks.push(worst);
    }
    let f0 = term.primitive(0.0);
    if f0.abs() > 1e-14 {
        return Err(Error::Certification { inequality: "F(0) = 0", at: 0.0, slack: -f0.abs() });
    }
    Ok(Certificate {
        term: term.spec_string(),
        constants: k,
        range: [lo, hi],
        samples,
        checks,
        passed: true,
    })
}

/// Largest `|F'(u) − f(u)| / (1 + |f(u)|)` over a uniform grid, with `F'`
/// from a five-point stencil whose step shrinks with the oscillation
/// frequency of `f`.
pub fn primitive_mismatch(term: &NonlinearTerm, range: (f64, f64), samples: usize) -> f64 {
    let (lo, hi) = range;
    (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples.max(2) - 1) as f64)
        .map(|u| {
            let h = 1e-5 * (1.0 + u.abs()) / term.frequency();
            let big = |s: f64| term.primitive(u + s * h) - term.primitive(u - s * h);
            let d = (8.0 * big(1.0) - big(2.0)) / (12.0 * h);
            let f = term.eval(u);
            (d - f).abs() / (1.0 + f.abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchMode {
    None,
    PerturbationEnsemble,
    MollifiedSelection,
}

/// How the sampled solution set is built from one initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPolicy {
    pub mode: BranchMode,
    pub size: usize,
    /// Perturbation L² amplitude, or base mollification radius.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for BranchPolicy {
    fn default() -> Self {
        Self::none()
    }
}

impl BranchPolicy {
    pub fn none() -> Self {
        Self { mode: BranchMode::None, size: 1, amplitude: 0.0, seed: 0 }
    }

    pub fn perturbation(size: usize, amplitude: f64, seed: u64) -> Self {
        Self { mode: BranchMode::PerturbationEnsemble, size, amplitude, seed }
    }

    pub fn mollified(size: usize, radius: f64, seed: u64) -> Self {
        Self { mode: BranchMode::MollifiedSelection, size, amplitude: radius, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidParameter("ensemble size must be at least 1".into()));
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter("amplitude must be non-negative".into()));
        }
        if self.mode == BranchMode::None && self.size != 1 {
            return Err(Error::InvalidParameter("branch mode `none` requires size 1".into()));
        }
        if self.mode == BranchMode::MollifiedSelection && self.amplitude == 0.0 {
            return Err(Error::InvalidParameter("mollified selection needs a positive radius".into()));
        }
        Ok(())
    }

    pub fn is_stochastic(&self) -> bool {
        self.mode == BranchMode::PerturbationEnsemble
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub field: SpectralField,
    pub mollifier: Option<f64>,
}

/// Initial states of the ensemble sampling `G(·, u0)`.
pub fn make_ensemble(u0: &SpectralField, policy: &BranchPolicy) -> Result<Vec<EnsembleMember>> {
    policy.validate()?;
    let plain = EnsembleMember { field: u0.clone(), mollifier: None };
    Ok(match policy.mode {
        BranchMode::None => vec![plain],
        BranchMode::PerturbationEnsemble => {
            let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
            let m = u0.coeffs().len();
            let mut out = vec![plain];
            for _ in 1..policy.size {
                let dir: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                let coeffs = u0
                    .coeffs()
                    .iter()
                    .zip(&dir)
                    .map(|(a, d)| a + policy.amplitude * d / norm)
                    .collect();
                out.push(EnsembleMember { field: u0.with_coeffs(coeffs), mollifier: None });
            }
            out
        }
        BranchMode::MollifiedSelection => (0..policy.size)
            .map(|i| EnsembleMember {
                field: u0.clone(),
                mollifier: Some(policy.amplitude * (i + 1) as f64),
            })
            .collect(),
    })
}
