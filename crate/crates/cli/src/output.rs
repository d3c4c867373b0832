use serde_json::{json, Map, Value};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gue_quench::io::Metadata;
use gue_quench::DensityGrid;

use crate::args::{Format, OutputArgs};

pub const OUT_DIR_VAR: &str = "GUE_QUENCH_OUT_DIR";

/// An output file (or stdout) could not be written.
#[derive(Debug)]
pub struct IoFailure {
    pub target: String,
    pub source: std::io::Error,
}

impl fmt::Display for IoFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot write {}: {}", self.target, self.source)
    }
}

impl std::error::Error for IoFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Where output goes: `--out` (relative to the output directory when one is
/// set), else `<dir>/<stem>.<ext>`, else stdout.
pub fn destination(out: &OutputArgs, stem: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_VAR).map(PathBuf::from);
    match (&out.out, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => Some(d.join(format!("{stem}.{}", extension(out.format)))),
        (None, None) => None,
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

pub fn write_text(target: Option<&Path>, text: &str) -> Result<(), IoFailure> {
    let fail = |source, target: &str| IoFailure {
        target: target.to_string(),
        source,
    };
    match target {
        Some(path) => {
            let name = path.display().to_string();
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| fail(e, &name))?;
            }
            fs::write(path, text).map_err(|e| fail(e, &name))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| fail(e, "stdout"))
        }
    }
}

/// Writes `csv()` or `json()` according to `--format`.
pub fn emit<C, J>(out: &OutputArgs, stem: &str, csv: C, json: J) -> Result<(), IoFailure>
where
    C: FnOnce() -> String,
    J: FnOnce() -> Value,
{
    let text = match out.format {
        Format::Csv => csv(),
        Format::Json => pretty(&json()),
    };
    write_text(destination(out, stem).as_deref(), &text)
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn metadata_json(meta: &Metadata) -> Value {
    Value::Object(
        meta.0
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect::<Map<_, _>>(),
    )
}

/// Common leading metadata lines.
pub fn header(command: &str) -> Metadata {
    Metadata::new()
        .with("tool", format!("gue-quench {}", env!("CARGO_PKG_VERSION")))
        .with("command", command)
}

pub fn grid_json(grid: &DensityGrid, meta: &Metadata, diagnostics: Option<(f64, bool)>) -> Value {
    let mut v = json!({
        "metadata": metadata_json(meta),
        "x0": grid.x0,
        "dx": grid.dx,
        "values": grid.values,
        "integral": grid.integral(),
    });
    if let Some((deficit, warning)) = diagnostics {
        v["normalization_deficit"] = json!(deficit);
        v["coverage_warning"] = json!(warning);
    }
    v
}
