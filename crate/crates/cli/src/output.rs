//! CSV rows and JSON sidecars. Numbers carry 17 significant digits so any
//! numeric drift shows up in a diff.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use qwfs::experiments::EnhancementRecord;

use crate::error::{CliError, CliResult};

pub const HEADER: &str = "config,model,n,doc,realization,seed,p_opt,p0,eta,eta_over_n,sigma1_sq,converged,iterations,baseline_mode";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn row(r: &EnhancementRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.config,
        r.model,
        r.n,
        num(r.doc),
        r.realization,
        r.seed,
        num(r.p_opt),
        num(r.p0),
        num(r.eta),
        num(r.eta_over_n),
        r.sigma1_sq.map(num).unwrap_or_default(),
        r.converged,
        r.iterations,
        r.baseline_mode,
    )
}

/// `out.csv` → `out.summary.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.summary.json"))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(CliError::io(format!("creating {}", path.display())))
}

/// Writes `header` and then `lines`, one per row.
pub fn write_lines<'a>(path: &Path, header: &str, lines: impl IntoIterator<Item = &'a str>) -> CliResult<()> {
    let context = || format!("writing {}", path.display());
    let mut w = create(path)?;
    writeln!(w, "{header}").map_err(CliError::io(context()))?;
    for line in lines {
        writeln!(w, "{line}").map_err(CliError::io(context()))?;
    }
    w.flush().map_err(CliError::io(context()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let context = || format!("writing {}", path.display());
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::io(context())(std::io::Error::other(e)))?;
    writeln!(w).map_err(CliError::io(context()))?;
    w.flush().map_err(CliError::io(context()))
}
