//! Outputs are built in a hidden sibling directory and renamed into place,
//! so a failed command leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

fn staging_path(out: &Path) -> Result<PathBuf> {
    let name = out
        .file_name()
        .with_context(|| format!("output path {} has no final component", out.display()))?;
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok(parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id())))
}

/// Runs `build` against an empty staging directory, then renames it to
/// `out`. An existing empty `out` is replaced; a non-empty one is refused.
pub fn with_staged_dir(out: &Path, build: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if out.exists() {
        let empty = out.is_dir() && fs::read_dir(out).map(|mut d| d.next().is_none()).unwrap_or(false);
        if !empty {
            bail!("output {} already exists and is not an empty directory", out.display());
        }
    }
    let stage = staging_path(out)?;
    if let Some(p) = stage.parent() {
        fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    if stage.exists() {
        fs::remove_dir_all(&stage).with_context(|| format!("clearing {}", stage.display()))?;
    }
    fs::create_dir(&stage).with_context(|| format!("creating {}", stage.display()))?;
    let result = build(&stage).and_then(|()| {
        if out.exists() {
            fs::remove_dir(out).with_context(|| format!("replacing {}", out.display()))?;
        }
        fs::rename(&stage, out).with_context(|| format!("moving results to {}", out.display()))
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&stage);
    }
    result
}
