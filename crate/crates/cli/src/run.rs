use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use tameproj::io::{save_json, to_json_compact, CsvTable};
use tameproj::Result;

pub const TOOL: &str = "tameproj";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output directory plus the run identity echoed into every file.
pub struct Run {
    out: PathBuf,
    header: Value,
}

impl Run {
    pub fn new<C: Serialize>(out: &Path, command: &str, seed: u64, config: &C) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        let header = json!({
            "tool": TOOL,
            "version": VERSION,
            "command": command,
            "seed": seed,
            "config": serde_json::to_value(config)?,
        });
        Ok(Self {
            out: out.to_path_buf(),
            header,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// One-line echo of the run for CSV comments and point-set provenance.
    pub fn echo(&self) -> Result<String> {
        Ok(String::from_utf8(to_json_compact(&self.header)?).expect("json is utf-8"))
    }

    pub fn table(&self, header: &[&str]) -> Result<CsvTable> {
        Ok(CsvTable::new(&self.echo()?, header))
    }

    pub fn write_table(&self, name: &str, table: &CsvTable) -> Result<()> {
        table.save(&self.path(name))
    }

    pub fn write_summary(&self, result: Value) -> Result<()> {
        save_json(&json!({ "run": self.header, "result": result }), &self.path("summary.json"))
    }
}
