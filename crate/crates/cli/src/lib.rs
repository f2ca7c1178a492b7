//! Batch front end for attractor-lab: configuration files in, artifact
//! directories out.

pub mod config;
pub mod report;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{ConfigError, Experiment, RunConfig};
pub use report::{report, Manifest};
pub use run::{run, Artifacts, CertRow, RunError, Summary};

pub const ENV_OUT: &str = "ATTRACTORLAB_OUT";
pub const DEFAULT_OUT: &str = "attractor-lab-out";

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CERTIFICATE_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const SOLVER: i32 = 3;
}

/// `ATTRACTORLAB_OUT` beats `--out`, which beats `[run] out`.
pub fn resolve_out(env: Option<&str>, flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    env.filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .or_else(|| flag.map(Path::to_path_buf))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Debug, Clone)]
pub struct Request {
    pub experiment: Experiment,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub env_out: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct Completed {
    pub out: PathBuf,
    pub summary: Option<Summary>,
    pub error: Option<RunError>,
    pub code: i32,
}

/// Parse the config, run the experiment and write the manifest. Config
/// errors are returned before anything is written.
pub fn execute(req: &Request) -> Result<Completed, RunError> {
    let text = fs::read_to_string(&req.config)
        .map_err(|e| RunError::Usage(format!("cannot read config {}: {e}", req.config.display())))?;
    let cfg = RunConfig::parse_with_seed(&text, req.seed)?;
    let out = resolve_out(req.env_out.as_deref(), req.out.as_deref(), cfg.out.as_deref());
    let mut art = Artifacts::create(&out)?;
    let start = Instant::now();
    let result = run::run(req.experiment, &cfg, &mut art);
    let wall = start.elapsed().as_secs_f64();

    let (summary, error, code, status) = match result {
        Ok(s) => {
            let code = if s.passed { exit::PASS } else { exit::CERTIFICATE_FAILED };
            let status = if s.passed { "pass" } else { "fail" };
            (Some(s), None, code, status)
        }
        Err(e) => {
            let code = match e {
                RunError::Usage(_) | RunError::Config(_) => exit::USAGE,
                _ => exit::SOLVER,
            };
            let diag = format!(
                "command: {}\nerror: {e}\n\ndetail:\n{e:#?}\n\nresolved configuration:\n{}",
                req.experiment.name(),
                cfg.resolved()
            );
            art.write("diagnostics.txt", &diag)?;
            (None, Some(e), code, "error")
        }
    };
    let mut files = art.files().to_vec();
    files.sort();
    let manifest = Manifest {
        fields: vec![
            ("command".into(), req.experiment.name().into()),
            ("status".into(), status.into()),
            ("exit_code".into(), code.to_string()),
            ("attractor-lab-cli".into(), env!("CARGO_PKG_VERSION").into()),
            ("attractor-lab-core".into(), attractor_lab::VERSION.into()),
            ("config_path".into(), req.config.display().to_string()),
            ("threads".into(), rayon::current_num_threads().to_string()),
            ("wall_time_s".into(), format!("{wall:.3}")),
            ("files".into(), files.join(", ")),
        ],
        resolved: cfg.resolved(),
        config: cfg.source.clone(),
    };
    art.write(report::MANIFEST, &manifest.render())?;
    Ok(Completed { out, summary, error, code })
}
