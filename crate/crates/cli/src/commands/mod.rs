mod closed_form;
mod fem;
mod oracle;

use steklov_trace::quadrature::CubatureOptions;
use thiserror::Error;

use crate::config::{CommandName, RunConfig};
use crate::format::CsvDoc;
use crate::VERSION;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Core(#[from] steklov_trace::Error),
    #[error("{0}")]
    Input(String),
}

/// One named check with its verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Audit {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    /// Complete file contents: header, tables, audit lines.
    pub csv: String,
    pub audits: Vec<Audit>,
}

impl CommandOutput {
    pub fn all_passed(&self) -> bool {
        self.audits.iter().all(|a| a.passed)
    }

    pub fn audit(&self, name: &str) -> Option<&Audit> {
        self.audits.iter().find(|a| a.name == name)
    }
}

/// Runs the command named in `cfg`.
pub fn run(cfg: &RunConfig) -> Result<CommandOutput, CommandError> {
    let mut doc = CsvDoc::new();
    doc.comment(format!("steklov-trace {VERSION}"));
    doc.comment(format!("command = {}", cfg.command));
    for (k, v) in cfg.echo() {
        doc.comment(format!("{k} = {v}"));
    }
    let mut audits = Vec::new();
    match cfg.command {
        CommandName::Kp => closed_form::kp(cfg, &mut doc, &mut audits)?,
        CommandName::VerifyExtremal => closed_form::verify_extremal(cfg, &mut doc, &mut audits)?,
        CommandName::Expand => closed_form::expand(cfg, &mut doc, &mut audits)?,
        CommandName::Oracle => oracle::oracle(cfg, &mut doc, &mut audits)?,
        CommandName::Steklov => fem::steklov(cfg, &mut doc, &mut audits)?,
        CommandName::Shapeopt => fem::shapeopt(cfg, &mut doc, &mut audits)?,
    }
    for a in &audits {
        let verdict = if a.passed { "PASS" } else { "FAIL" };
        doc.comment(format!("audit {}: {verdict} ({})", a.name, a.detail));
    }
    Ok(CommandOutput {
        csv: doc.into_string(),
        audits,
    })
}

fn cubature(cfg: &RunConfig) -> CubatureOptions {
    CubatureOptions {
        rel_tol: cfg.rel_tol,
        max_cells: cfg.max_cells,
        ..CubatureOptions::default()
    }
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
