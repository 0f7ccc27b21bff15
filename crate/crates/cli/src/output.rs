//! Output files are written into a staging directory next to the target and
//! only moved into place once the whole run has succeeded.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value as Json};

use crate::error::CliError;

pub const UNIT_CONVENTION: &str =
    "frequencies and rates in units of omega0; times in units of 1/omega0; energies and occupations dimensionless";

pub const MANIFEST_NAME: &str = "manifest.json";

/// Provenance written at the top of every output file.
#[derive(Debug, Clone)]
pub struct Header {
    pub run_kind: String,
    /// rad/s
    pub omega0: f64,
    pub config_hash: String,
}

impl Header {
    pub fn comment_block(&self) -> String {
        format!(
            "# generator: phonon-forge {} ({})\n# omega0 = {} rad/s\n# units: {UNIT_CONVENTION}\n# config_hash = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.run_kind,
            self.omega0,
            self.config_hash
        )
    }

    pub fn json_fields(&self) -> Map<String, Json> {
        let mut m = Map::new();
        m.insert(
            "generator".into(),
            json!(format!("phonon-forge {}", env!("CARGO_PKG_VERSION"))),
        );
        m.insert("run_kind".into(), json!(self.run_kind));
        m.insert("omega0_rad_s".into(), json!(self.omega0));
        m.insert("units".into(), json!(UNIT_CONVENTION));
        m.insert("config_hash".into(), json!(self.config_hash));
        m
    }
}

/// Shortest round-trip decimal form; `nan` for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "nan".into())
}

/// JSON number, or null for non-finite values.
pub fn jnum(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else {
        Json::Null
    }
}

pub struct Staging {
    out: PathBuf,
    stage: PathBuf,
    header: Header,
    files: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path, header: Header) -> Result<Self, CliError> {
        let name = out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
        let stage = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if stage.exists() {
            fs::remove_dir_all(&stage).map_err(|e| CliError::io(&stage, e))?;
        }
        fs::create_dir(&stage).map_err(|e| CliError::io(&stage, e))?;
        Ok(Self {
            out: out.to_path_buf(),
            stage,
            header,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.stage.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_csv<I>(&mut self, name: &str, columns: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut buf = self.header.comment_block().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let io = |e: csv::Error| CliError::io(name, std::io::Error::other(e));
            w.write_record(columns).map_err(io)?;
            for row in rows {
                debug_assert_eq!(row.len(), columns.len());
                w.write_record(&row).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::io(name, e))?;
        }
        self.put(name, &buf)
    }

    /// `body` must be an object; the header fields are merged in.
    pub fn write_json(&mut self, name: &str, body: Json) -> Result<(), CliError> {
        let mut m = self.header.json_fields();
        if let Json::Object(fields) = body {
            m.extend(fields);
        }
        let mut text = serde_json::to_string_pretty(&Json::Object(m)).expect("JSON values serialise");
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Write the manifest and move everything into the output directory.
    /// Returns the manifest as written.
    pub fn commit(mut self, manifest: Map<String, Json>) -> Result<Json, CliError> {
        let mut files = self.files.clone();
        files.push(MANIFEST_NAME.to_string());
        let mut m = manifest;
        m.insert("files".into(), json!(files));
        let body = Json::Object(m);
        self.write_json(MANIFEST_NAME, body)?;
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        for name in &self.files {
            let (from, to) = (self.stage.join(name), self.out.join(name));
            fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
        }
        self.committed = true;
        let _ = fs::remove_dir_all(&self.stage);
        let text = fs::read_to_string(self.out.join(MANIFEST_NAME))
            .map_err(|e| CliError::io(self.out.join(MANIFEST_NAME), e))?;
        Ok(serde_json::from_str(&text).expect("manifest was just written"))
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.stage);
        }
    }
}
