//! Config-driven batch runs over the phonon-forge core: cavity design,
//! decay verification, single-mode and two-mode lasing, phase diagrams.

pub mod cache;
pub mod config;
pub mod error;
pub mod output;
pub mod runs;
pub mod units;

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value as Json};

pub use cache::DecompositionCache;
pub use config::{Config, ConfigError, RunKind};
pub use error::CliError;

use output::{Header, Staging};
use runs::{RunEnv, Timings};

pub const SUMMARY_NAME: &str = "summary.json";

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub kind: RunKind,
    pub config: PathBuf,
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
    pub no_cache: bool,
    /// Overrides `run.out` from the config.
    pub out: Option<PathBuf>,
}

/// Cache location when the config does not name one.
pub fn default_cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os("PHONON_FORGE_CACHE") {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return Path::new(&d).join("phonon-forge");
    }
    if let Some(h) = std::env::var_os("HOME") {
        return Path::new(&h).join(".cache").join("phonon-forge");
    }
    PathBuf::from(".phonon-forge-cache")
}

/// Execute one run and return its manifest. Nothing is written to the
/// output directory unless the whole run succeeds.
pub fn run(args: &RunArgs) -> Result<Json, CliError> {
    let cfg = Config::load(&args.config)?;
    cfg.check_kind(args.kind)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}-out", args.kind.as_str())));
    let cache = if args.no_cache || !cfg.run.cache {
        DecompositionCache::disabled()
    } else {
        DecompositionCache::new(cfg.run.cache_dir.clone().unwrap_or_else(default_cache_dir))
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(ConfigError::new("--jobs", "must be at least 1").into());
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::io("thread pool", std::io::Error::other(e)))?;

    let header = Header {
        run_kind: args.kind.as_str().to_string(),
        omega0: cfg.array.omega0,
        config_hash: cfg.hash.clone(),
    };
    let mut staging = Staging::new(&out, header)?;
    let mut env = RunEnv {
        cfg: &cfg,
        cache: &cache,
        timings: Timings::default(),
    };
    let summary = pool.install(|| match args.kind {
        RunKind::CavityDesign => runs::cavity_design(&mut env, &mut staging),
        RunKind::DecayVerify => runs::decay_verify(&mut env, &mut staging),
        RunKind::SingleMode => runs::single_mode(&mut env, &mut staging),
        RunKind::TwoMode => runs::two_mode(&mut env, &mut staging),
        RunKind::PhaseDiagram => runs::phase(&mut env, &mut staging),
    })?;
    staging.write_json(SUMMARY_NAME, summary)?;

    let mut manifest = Map::new();
    manifest.insert("config_path".into(), json!(args.config.display().to_string()));
    manifest.insert("artifact_version".into(), json!(env!("CARGO_PKG_VERSION")));
    manifest.insert("jobs".into(), json!(pool.current_num_threads()));
    manifest.insert("stages".into(), env.timings.to_json());
    manifest.insert(
        "cache".into(),
        json!({
            "enabled": cache.dir().is_some(),
            "dir": cache.dir().map(|d| d.display().to_string()),
            "hits": cache.hits(),
            "misses": cache.misses(),
        }),
    );
    staging.commit(manifest)
}
