//! Batch front end: configuration ingestion, the six workflows and their
//! CSV/SVG artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod table;
pub mod units;

use commands::{GlobalOpts, Outcome};
use config::{Document, RunConfig};
use error::CliError;
use std::path::{Path, PathBuf};

/// Workflow selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Simulate,
    CompareModulations,
    Envelope,
    DesignInductor,
    ThermalCheck,
    Calorimetric,
}

/// Parses `config` and runs `verb`. Returns the artifacts and the directory
/// they belong in (`out_dir`, else `[output] dir`, else `ibb-out`).
pub fn execute(verb: Verb, config: &Path, out_dir: Option<&Path>, opts: &GlobalOpts) -> Result<(Outcome, PathBuf), CliError> {
    let doc = Document::read(config)?;
    let cfg = RunConfig::from_document(&doc)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("ibb-out"));
    let out = match verb {
        Verb::Simulate => commands::simulate(&cfg, &doc, opts)?,
        Verb::CompareModulations => commands::compare_modulations(&cfg)?,
        Verb::Envelope => commands::envelope(&cfg)?,
        Verb::DesignInductor => commands::design_inductor(&cfg, opts)?,
        Verb::ThermalCheck => commands::thermal_check(&cfg)?,
        Verb::Calorimetric => commands::calorimetric(&cfg)?,
    };
    Ok((out, dir))
}

/// Writes every artifact of `out` below `dir`.
pub fn write_outcome(out: &Outcome, dir: &Path) -> Result<(), CliError> {
    for (name, content) in &out.files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs a verb end to end and returns the process exit status.
pub fn run_verb(verb: Verb, config: &Path, out_dir: Option<&Path>, opts: &GlobalOpts) -> i32 {
    let (out, dir) = match execute(verb, config, out_dir, opts) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Err(e) = write_outcome(&out, &dir) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    print!("{}", out.summary);
    println!("artifacts: {}", dir.display());
    match &out.failure {
        Some(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        None => 0,
    }
}
