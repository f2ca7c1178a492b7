//! Run configuration: flat `key = value` text grouped under `[section]`
//! headers, `#` comments, no includes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use attractor_lab::{BranchMode, BranchPolicy, NonlinearTerm, Scheme, SpectralBasis, SpectralField};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn general(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Equilibria,
    Attractor,
    Certify,
    DimensionScan,
    Audit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Equilibria => "equilibria",
            Experiment::Attractor => "attractor",
            Experiment::Certify => "certify",
            Experiment::DimensionScan => "dimension-scan",
            Experiment::Audit => "audit",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "simulate" => Experiment::Simulate,
            "equilibria" => Experiment::Equilibria,
            "attractor" => Experiment::Attractor,
            "certify" => Experiment::Certify,
            "dimension-scan" | "dimension_scan" => Experiment::DimensionScan,
            "audit" => Experiment::Audit,
            other => return Err(format!("unknown experiment `{other}`")),
        })
    }
}

/// A coefficient vector given as `zero`, `mode(j, a)` or `coeffs(a1, a2, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    Mode(usize, f64),
    Coeffs(Vec<f64>),
}

impl FieldSpec {
    pub fn to_field(&self, basis: &Arc<SpectralBasis>) -> attractor_lab::Result<SpectralField> {
        match self {
            FieldSpec::Zero => Ok(SpectralField::zeros(basis)),
            FieldSpec::Mode(j, a) => SpectralField::mode(basis, *j, *a),
            FieldSpec::Coeffs(c) => {
                let m = basis.mode_count();
                if c.len() > m {
                    return Err(attractor_lab::Error::InvalidParameter(format!(
                        "{} coefficients given for {m} modes",
                        c.len()
                    )));
                }
                let mut full = c.clone();
                full.resize(m, 0.0);
                SpectralField::new(basis.clone(), full)
            }
        }
    }
}

impl FromStr for FieldSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "zero" || s == "0" {
            return Ok(FieldSpec::Zero);
        }
        let (name, inner) = s
            .split_once('(')
            .and_then(|(n, r)| r.strip_suffix(')').map(|r| (n.trim(), r)))
            .ok_or_else(|| format!("expected zero, mode(j, a) or coeffs(...), got `{s}`"))?;
        let nums = parse_list::<f64>(inner)?;
        match name {
            "mode" => match nums.as_slice() {
                [j, a] if *j >= 1.0 && j.fract() == 0.0 => Ok(FieldSpec::Mode(*j as usize, *a)),
                _ => Err(format!("mode(j, a) needs an integer j ≥ 1 and an amplitude, got `{s}`")),
            },
            "coeffs" if !nums.is_empty() => Ok(FieldSpec::Coeffs(nums)),
            _ => Err(format!("unknown field form `{s}`")),
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Zero => write!(f, "zero"),
            FieldSpec::Mode(j, a) => write!(f, "mode({j}, {a:?})"),
            FieldSpec::Coeffs(c) => {
                let items: Vec<String> = c.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "coeffs({})", items.join(", "))
            }
        }
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|_| format!("bad list entry `{x}`")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub newton: f64,
    pub dedup: f64,
    /// H¹ distance for ω-limit identification.
    pub limit: f64,
    pub linf: f64,
    pub audit: f64,
    pub semiflow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriaSettings {
    pub modes: usize,
    pub amplitudes: Vec<f64>,
    pub max_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorSettings {
    pub eps: Option<f64>,
    pub ring: usize,
    pub horizon: f64,
    pub max_horizon: f64,
    pub samples_per_edge: usize,
    pub check_eps: bool,
    pub check_stable_side: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifySettings {
    pub trials: usize,
    pub max_norm: f64,
    pub t_end: f64,
    pub sample_every: f64,
    pub r_grid: Vec<f64>,
    pub r_gronwall: f64,
    pub refine: bool,
    /// Tested value for `R₂`; fitted when absent.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSettings {
    pub triples: usize,
    pub t_max: f64,
    pub samples: usize,
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub m: usize,
    /// Quadrature intervals; `4m` when absent.
    pub intervals: Option<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub output_stride: usize,
    pub scheme: Scheme,
    pub nonlinearity: String,
    pub forcing: FieldSpec,
    pub initial: FieldSpec,
    pub branch_mode: BranchMode,
    pub branch_size: usize,
    pub branch_amplitude: f64,
    pub tolerances: Tolerances,
    pub equilibria: EquilibriaSettings,
    pub attractor: AttractorSettings,
    pub certify: CertifySettings,
    pub scan_k: Vec<u64>,
    pub audit: AuditSettings,
    /// Source text as given.
    pub source: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: None,
            out: None,
            m: 32,
            intervals: None,
            dt: 1e-3,
            t_end: 10.0,
            output_stride: 10,
            scheme: Scheme::ExponentialEuler,
            nonlinearity: "chafee_infante(lambda=5)".into(),
            forcing: FieldSpec::Zero,
            initial: FieldSpec::Mode(1, 0.1),
            branch_mode: BranchMode::None,
            branch_size: 1,
            branch_amplitude: 0.0,
            tolerances: Tolerances { newton: 1e-10, dedup: 1e-6, limit: 1e-4, linf: 1e-2, audit: 1e-8, semiflow: 1e-6 },
            equilibria: EquilibriaSettings {
                modes: 3,
                amplitudes: vec![-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0],
                max_rounds: 4,
            },
            attractor: AttractorSettings {
                eps: None,
                ring: 16,
                horizon: 20.0,
                max_horizon: 160.0,
                samples_per_edge: 8,
                check_eps: false,
                check_stable_side: true,
            },
            certify: CertifySettings {
                trials: 20,
                max_norm: 100.0,
                t_end: 5.0,
                sample_every: 0.01,
                r_grid: vec![1e-2, 0.1, 0.5, 1.0],
                r_gronwall: 0.5,
                refine: true,
                r2: None,
            },
            scan_k: vec![17, 2402, 38417],
            audit: AuditSettings { triples: 100, t_max: 1.0, samples: 4, max_norm: 2.0 },
            source: String::new(),
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("run", &["experiment", "seed", "out"]),
    ("discretization", &["m", "N", "dt", "T", "output_stride", "scheme"]),
    ("model", &["nonlinearity", "forcing"]),
    ("initial", &["u0"]),
    ("branch", &["mode", "size", "amplitude"]),
    ("tolerances", &["newton", "dedup", "limit", "linf", "audit", "semiflow"]),
    ("equilibria", &["modes", "amplitudes", "max_rounds"]),
    ("attractor", &["eps", "ring", "horizon", "max_horizon", "samples_per_edge", "check_eps", "check_stable_side"]),
    ("certify", &["trials", "max_norm", "T", "sample_every", "r_grid", "r_gronwall", "refine", "R2"]),
    ("scan", &["k"]),
    ("audit", &["triples", "t_max", "samples", "max_norm"]),
];

struct Entry {
    value: String,
    line: usize,
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn lex(text: &str) -> Result<BTreeMap<(String, String), Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(no, format!("unterminated section header `{line}`")))?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::at(no, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::at(no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let sec = section
            .as_deref()
            .ok_or_else(|| ConfigError::at(no, format!("`{key}` appears before any [section]")))?;
        let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            return Err(ConfigError::at(no, format!("unknown key `{key}` in [{sec}]")));
        }
        let value = unquote(value).to_string();
        if value.is_empty() {
            return Err(ConfigError::at(no, format!("empty value for `{key}`")));
        }
        let slot = (sec.to_string(), key.to_string());
        if let Some(prev) = entries.get(&slot) {
            let prev: &Entry = prev;
            return Err(ConfigError::at(no, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        entries.insert(slot, Entry { value, line: no });
    }
    Ok(entries)
}

struct Reader(BTreeMap<(String, String), Entry>);

impl Reader {
    fn get<T, F>(&self, sec: &str, key: &str, parse: F) -> Result<Option<T>, ConfigError>
    where
        F: Fn(&str) -> Result<T, String>,
    {
        match self.0.get(&(sec.to_string(), key.to_string())) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|msg| ConfigError::at(e.line, format!("{key}: {msg}"))),
        }
    }

    fn set<T>(&self, sec: &str, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if let Some(v) = self.get(sec, key, |s| s.parse::<T>().map_err(|e| format!("cannot parse `{s}`: {e}")))? {
            *slot = v;
        }
        Ok(())
    }

    fn line(&self, sec: &str, key: &str) -> Option<usize> {
        self.0.get(&(sec.to_string(), key.to_string())).map(|e| e.line)
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "etd1" | "exponential_euler" | "exponential-euler" => Ok(Scheme::ExponentialEuler),
        "etd2" => Ok(Scheme::Etd2),
        other => Err(format!("unknown scheme `{other}` (etd1 or etd2)")),
    }
}

fn parse_branch(s: &str) -> Result<BranchMode, String> {
    match s {
        "none" => Ok(BranchMode::None),
        "perturbation" | "perturbation_ensemble" | "perturbation-ensemble" => Ok(BranchMode::PerturbationEnsemble),
        "mollified" | "mollified_selection" | "mollified-selection" => Ok(BranchMode::MollifiedSelection),
        other => Err(format!("unknown branch mode `{other}`")),
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_seed(text, None)
    }

    /// As [`RunConfig::parse`], with `seed` taking precedence over `[run] seed`.
    pub fn parse_with_seed(text: &str, seed: Option<u64>) -> Result<Self, ConfigError> {
        let entries = lex(text)?;
        if entries.is_empty() {
            return Err(ConfigError::general("empty configuration"));
        }
        let r = Reader(entries);
        let mut c = RunConfig { source: text.to_string(), ..RunConfig::default() };

        c.experiment = r.get("run", "experiment", |s| s.parse())?;
        c.seed = r.get("run", "seed", |s| s.parse::<u64>().map_err(|_| format!("`{s}` is not a u64")))?;
        if seed.is_some() {
            c.seed = seed;
        }
        c.out = r.get("run", "out", |s| Ok(PathBuf::from(s)))?;

        r.set("discretization", "m", &mut c.m)?;
        c.intervals = r.get("discretization", "N", |s| s.parse::<usize>().map_err(|_| format!("`{s}` is not a count")))?;
        r.set("discretization", "dt", &mut c.dt)?;
        r.set("discretization", "T", &mut c.t_end)?;
        r.set("discretization", "output_stride", &mut c.output_stride)?;
        if let Some(s) = r.get("discretization", "scheme", parse_scheme)? {
            c.scheme = s;
        }

        if let Some(n) = r.get("model", "nonlinearity", |s| {
            NonlinearTerm::parse(s).map(|_| s.to_string()).map_err(|e| e.to_string())
        })? {
            c.nonlinearity = n;
        }
        r.set("model", "forcing", &mut c.forcing)?;
        if let Some(u) = r.get("initial", "u0", |s| s.parse())? {
            c.initial = u;
        }

        if let Some(mode) = r.get("branch", "mode", parse_branch)? {
            c.branch_mode = mode;
        }
        r.set("branch", "size", &mut c.branch_size)?;
        r.set("branch", "amplitude", &mut c.branch_amplitude)?;

        let t = &mut c.tolerances;
        r.set("tolerances", "newton", &mut t.newton)?;
        r.set("tolerances", "dedup", &mut t.dedup)?;
        r.set("tolerances", "limit", &mut t.limit)?;
        r.set("tolerances", "linf", &mut t.linf)?;
        r.set("tolerances", "audit", &mut t.audit)?;
        r.set("tolerances", "semiflow", &mut t.semiflow)?;

        r.set("equilibria", "modes", &mut c.equilibria.modes)?;
        if let Some(a) = r.get("equilibria", "amplitudes", parse_list::<f64>)? {
            c.equilibria.amplitudes = a;
        }
        r.set("equilibria", "max_rounds", &mut c.equilibria.max_rounds)?;

        let a = &mut c.attractor;
        a.eps = r.get("attractor", "eps", |s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))?;
        r.set("attractor", "ring", &mut a.ring)?;
        r.set("attractor", "horizon", &mut a.horizon)?;
        r.set("attractor", "max_horizon", &mut a.max_horizon)?;
        r.set("attractor", "samples_per_edge", &mut a.samples_per_edge)?;
        if let Some(b) = r.get("attractor", "check_eps", parse_bool)? {
            a.check_eps = b;
        }
        if let Some(b) = r.get("attractor", "check_stable_side", parse_bool)? {
            a.check_stable_side = b;
        }

        let k = &mut c.certify;
        r.set("certify", "trials", &mut k.trials)?;
        r.set("certify", "max_norm", &mut k.max_norm)?;
        r.set("certify", "T", &mut k.t_end)?;
        r.set("certify", "sample_every", &mut k.sample_every)?;
        if let Some(g) = r.get("certify", "r_grid", parse_list::<f64>)? {
            k.r_grid = g;
        }
        r.set("certify", "r_gronwall", &mut k.r_gronwall)?;
        if let Some(b) = r.get("certify", "refine", parse_bool)? {
            k.refine = b;
        }
        k.r2 = r.get("certify", "R2", |s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))?;

        if let Some(ks) = r.get("scan", "k", parse_list::<u64>)? {
            c.scan_k = ks;
        }

        r.set("audit", "triples", &mut c.audit.triples)?;
        r.set("audit", "t_max", &mut c.audit.t_max)?;
        r.set("audit", "samples", &mut c.audit.samples)?;
        r.set("audit", "max_norm", &mut c.audit.max_norm)?;

        c.validate(&r)?;
        Ok(c)
    }

    fn validate(&self, r: &Reader) -> Result<(), ConfigError> {
        let fail = |sec: &str, key: &str, msg: String| match r.line(sec, key) {
            Some(l) => ConfigError::at(l, msg),
            None => ConfigError::general(msg),
        };
        if self.m == 0 {
            return Err(fail("discretization", "m", "m must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(fail("discretization", "dt", format!("dt = {} must lie in (0, 0.1]", self.dt)));
        }
        if !(self.t_end > 0.0) {
            return Err(fail("discretization", "T", "T must be positive".into()));
        }
        if self.output_stride == 0 {
            return Err(fail("discretization", "output_stride", "output_stride must be at least 1".into()));
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("newton", t.newton),
            ("dedup", t.dedup),
            ("limit", t.limit),
            ("linf", t.linf),
            ("audit", t.audit),
            ("semiflow", t.semiflow),
        ] {
            if !(v > 0.0) {
                return Err(fail("tolerances", key, format!("tolerance `{key}` must be positive")));
            }
        }
        if self.branch_mode == BranchMode::PerturbationEnsemble && self.seed.is_none() {
            return Err(fail("branch", "mode", "a stochastic branch policy needs [run] seed".into()));
        }
        self.branch_policy().validate().map_err(|e| fail("branch", "size", e.to_string()))?;
        Ok(())
    }

    pub fn term(&self) -> NonlinearTerm {
        NonlinearTerm::parse(&self.nonlinearity).expect("validated at parse time")
    }

    pub fn branch_policy(&self) -> BranchPolicy {
        BranchPolicy {
            mode: self.branch_mode,
            size: self.branch_size,
            amplitude: self.branch_amplitude,
            seed: self.seed.unwrap_or(0),
        }
    }

    pub fn grid_intervals(&self) -> usize {
        self.intervals.unwrap_or(4 * self.m)
    }

    /// Every effective setting, one `section.key = value` per line.
    pub fn resolved(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let scheme = match self.scheme {
            Scheme::ExponentialEuler => "etd1",
            Scheme::Etd2 => "etd2",
        };
        let branch = match self.branch_mode {
            BranchMode::None => "none",
            BranchMode::PerturbationEnsemble => "perturbation",
            BranchMode::MollifiedSelection => "mollified",
        };
        let t = &self.tolerances;
        let a = &self.attractor;
        let k = &self.certify;
        let rows = [
            ("run.experiment", self.experiment.map(|e| e.name().to_string()).unwrap_or_else(|| "-".into())),
            ("run.seed", self.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into())),
            ("discretization.m", self.m.to_string()),
            ("discretization.N", self.grid_intervals().to_string()),
            ("discretization.dt", format!("{:?}", self.dt)),
            ("discretization.T", format!("{:?}", self.t_end)),
            ("discretization.output_stride", self.output_stride.to_string()),
            ("discretization.scheme", scheme.into()),
            ("model.nonlinearity", self.term().spec_string()),
            ("model.forcing", self.forcing.to_string()),
            ("initial.u0", self.initial.to_string()),
            ("branch.mode", branch.into()),
            ("branch.size", self.branch_size.to_string()),
            ("branch.amplitude", format!("{:?}", self.branch_amplitude)),
            ("tolerances.newton", format!("{:?}", t.newton)),
            ("tolerances.dedup", format!("{:?}", t.dedup)),
            ("tolerances.limit", format!("{:?}", t.limit)),
            ("tolerances.linf", format!("{:?}", t.linf)),
            ("tolerances.audit", format!("{:?}", t.audit)),
            ("tolerances.semiflow", format!("{:?}", t.semiflow)),
            ("equilibria.modes", self.equilibria.modes.to_string()),
            ("equilibria.amplitudes", list(&self.equilibria.amplitudes)),
            ("equilibria.max_rounds", self.equilibria.max_rounds.to_string()),
            ("attractor.eps", a.eps.map(|e| format!("{e:?}")).unwrap_or_else(|| "auto".into())),
            ("attractor.ring", a.ring.to_string()),
            ("attractor.horizon", format!("{:?}", a.horizon)),
            ("attractor.max_horizon", format!("{:?}", a.max_horizon)),
            ("attractor.samples_per_edge", a.samples_per_edge.to_string()),
            ("attractor.check_eps", a.check_eps.to_string()),
            ("attractor.check_stable_side", a.check_stable_side.to_string()),
            ("certify.trials", k.trials.to_string()),
            ("certify.max_norm", format!("{:?}", k.max_norm)),
            ("certify.T", format!("{:?}", k.t_end)),
            ("certify.sample_every", format!("{:?}", k.sample_every)),
            ("certify.r_grid", list(&k.r_grid)),
            ("certify.r_gronwall", format!("{:?}", k.r_gronwall)),
            ("certify.refine", k.refine.to_string()),
            ("certify.R2", k.r2.map(|v| format!("{v:?}")).unwrap_or_else(|| "fit".into())),
            ("scan.k", self.scan_k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")),
            ("audit.triples", self.audit.triples.to_string()),
            ("audit.t_max", format!("{:?}", self.audit.t_max)),
            ("audit.samples", self.audit.samples.to_string()),
            ("audit.max_norm", format!("{:?}", self.audit.max_norm)),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
