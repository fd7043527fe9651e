//! Atomic writes and the on-disk layout of instance and plan directories.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use coat_core::{parse_instance, serialize_instance, Action, DomainTag, Instance};

use crate::error::{CliError, Result};

pub const INSTANCE_EXT: &str = "inst";
pub const PLAN_EXT: &str = "plan";
pub const PLAN_FORMAT_VERSION: u32 = 1;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Files in `dir` with extension `ext`, sorted by name.
pub fn list(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    parse_instance(&read_text(path)?).map_err(|e| CliError::from(e).in_file(path))
}

/// A single instance file, or every instance file of a directory.
pub fn read_instances(path: &Path) -> Result<Vec<(String, Instance)>> {
    let paths = if path.is_dir() {
        list(path, INSTANCE_EXT)?
    } else {
        vec![path.to_path_buf()]
    };
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no .{INSTANCE_EXT} files in {}", path.display())));
    }
    paths.iter().map(|p| Ok((stem(p), read_instance(p)?))).collect()
}

pub fn write_instance(dir: &Path, name: &str, inst: &Instance) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.{INSTANCE_EXT}"));
    write_atomic(&path, serialize_instance(inst).as_bytes())?;
    Ok(path)
}

pub fn plan_text(actions: &[Action]) -> String {
    let mut s = format!("format=coat-plan version={PLAN_FORMAT_VERSION} length={}\n", actions.len());
    for a in actions {
        s.push_str(&a.name());
        s.push('\n');
    }
    s
}

pub fn parse_plan(domain: DomainTag, text: &str) -> Result<Vec<Action>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut version = None;
    let mut length = None;
    let mut format_ok = false;
    for tok in header.split_whitespace() {
        match tok.split_once('=') {
            Some(("format", "coat-plan")) => format_ok = true,
            Some(("version", v)) => version = v.parse::<u32>().ok(),
            Some(("length", v)) => length = v.parse::<usize>().ok(),
            _ => return Err(CliError::Format(format!("unexpected plan header token {tok:?}"))),
        }
    }
    if !format_ok {
        return Err(CliError::Format("not a plan file".into()));
    }
    match version {
        Some(PLAN_FORMAT_VERSION) => {}
        Some(v) => {
            return Err(coat_core::CoatError::Version {
                found: v,
                expected: PLAN_FORMAT_VERSION,
            }
            .into())
        }
        None => return Err(CliError::Format("plan header lacks a version".into())),
    }
    let actions = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| Action::parse(domain, l.trim()).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    if length.is_some_and(|n| n != actions.len()) {
        return Err(CliError::Format(format!(
            "plan header says {} actions, file has {}",
            length.unwrap_or_default(),
            actions.len()
        )));
    }
    Ok(actions)
}

pub fn read_plan(path: &Path, domain: DomainTag) -> Result<Vec<Action>> {
    parse_plan(domain, &read_text(path)?).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn plan_round_trip() {
        let acts = vec![
            Action::parse(DomainTag::Maze, "up").unwrap(),
            Action::parse(DomainTag::Maze, "left").unwrap(),
        ];
        let text = plan_text(&acts);
        assert_eq!(parse_plan(DomainTag::Maze, &text).unwrap(), acts);
        assert!(parse_plan(DomainTag::Maze, &text.replace("version=1", "version=3")).is_err());
        assert!(parse_plan(DomainTag::Maze, &text.replace("length=2", "length=5")).is_err());
    }
}
