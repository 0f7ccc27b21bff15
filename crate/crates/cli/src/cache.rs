//! On-disk cache of mode decompositions, one file per (array, partition).

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use phonon_forge_core::cavity::{decompose, ModeDecomposition, Partition, FORMAT_VERSION};
use phonon_forge_core::crystal::{CouplingMatrix, IonArraySpec};

use crate::config::hash_hex;

pub const FILE_EXTENSION: &str = "pfmd";

/// Cache entries are keyed on this as well as the binary format version, so
/// a release that changes the numerics invalidates old entries.
pub const CACHE_EPOCH: &str = concat!("phonon-forge ", env!("CARGO_PKG_VERSION"));

#[derive(Debug)]
pub struct DecompositionCache {
    dir: Option<PathBuf>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

pub fn cache_key(spec: &IonArraySpec, part: &Partition) -> String {
    let payload = serde_json::json!({
        "epoch": CACHE_EPOCH,
        "format": FORMAT_VERSION,
        "spec": spec,
        "partition": part,
    });
    hash_hex(payload.to_string().as_bytes())
}

impl DecompositionCache {
    pub fn new(dir: PathBuf) -> Self {
        Self {
            dir: Some(dir),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn disabled() -> Self {
        Self {
            dir: None,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn entry_path(&self, spec: &IonArraySpec, part: &Partition) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{}.{FILE_EXTENSION}", cache_key(spec, part))))
    }

    pub fn lookup(&self, spec: &IonArraySpec, part: &Partition) -> Option<ModeDecomposition> {
        let path = self.entry_path(spec, part)?;
        let file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!("cache entry {} unreadable, recomputing: {e}", path.display());
                return None;
            }
        };
        match ModeDecomposition::read_from(BufReader::new(file)) {
            Ok(d) => Some(d),
            Err(e) => {
                log::warn!("cache entry {} rejected, recomputing: {e}", path.display());
                None
            }
        }
    }

    /// Best effort: a failed write only costs the next run a recomputation.
    pub fn store(&self, spec: &IonArraySpec, part: &Partition, d: &ModeDecomposition) {
        let Some(path) = self.entry_path(spec, part) else {
            return;
        };
        let result = (|| -> std::io::Result<()> {
            let dir = path.parent().expect("cache entries live in a directory");
            fs::create_dir_all(dir)?;
            let tmp = path.with_extension(format!("{FILE_EXTENSION}.tmp{}", std::process::id()));
            {
                let mut w = BufWriter::new(fs::File::create(&tmp)?);
                d.write_to(&mut w)?;
                std::io::Write::flush(&mut w)?;
            }
            fs::rename(&tmp, &path)
        })();
        if let Err(e) = result {
            log::warn!("could not write cache entry {}: {e}", path.display());
        }
    }

    /// Cached decomposition if present, otherwise compute and store it.
    pub fn get_or_compute(
        &self,
        spec: &IonArraySpec,
        part: &Partition,
        a: &CouplingMatrix,
    ) -> phonon_forge_core::Result<ModeDecomposition> {
        if let Some(d) = self.lookup(spec, part) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            log::debug!("cache hit for {} ions", spec.n_ions());
            return Ok(d);
        }
        if self.dir.is_some() {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
        let d = decompose(a, part)?;
        self.store(spec, part, &d);
        Ok(d)
    }
}
