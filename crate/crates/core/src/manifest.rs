//! Tab-separated dataset manifests. Paths are stored relative to the
//! manifest's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

const SOURCE_HEADER: &str = "path\tgenre\tbpm";
const TAG_HEADER: &str = "path\ttags";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: expected header {expected:?}")]
    Header { path: String, expected: &'static str },
    #[error("{path}:{line}: {detail}")]
    Line { path: String, line: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceEntry {
    pub path: String,
    pub genre: String,
    pub bpm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagEntry {
    pub path: String,
    pub tags: Vec<String>,
}

/// Joins a manifest-relative path onto the manifest's directory.
pub fn resolve(manifest: &Path, rel: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(rel)
}

pub fn write_source_manifest(path: impl AsRef<Path>, rows: &[SourceEntry]) -> std::io::Result<()> {
    let mut s = format!("{SOURCE_HEADER}\n");
    for r in rows {
        writeln!(s, "{}\t{}\t{}", r.path, r.genre, r.bpm).expect("string write");
    }
    std::fs::write(path, s)
}

pub fn write_tag_manifest(path: impl AsRef<Path>, rows: &[TagEntry]) -> std::io::Result<()> {
    let mut s = format!("{TAG_HEADER}\n");
    for r in rows {
        writeln!(s, "{}\t{}", r.path, r.tags.join(";")).expect("string write");
    }
    std::fs::write(path, s)
}

fn data_lines<'a>(
    path: &Path,
    text: &'a str,
    header: &'static str,
) -> Result<impl Iterator<Item = (usize, &'a str)>, ManifestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == header => {}
        _ => return Err(ManifestError::Header { path: path.display().to_string(), expected: header }),
    }
    Ok(lines.filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l.trim_end_matches('\r'))))
}

pub fn read_source_manifest(path: impl AsRef<Path>) -> Result<Vec<SourceEntry>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let err = |line, detail: String| ManifestError::Line { path: path.display().to_string(), line, detail };
    let mut out = Vec::new();
    for (line, l) in data_lines(path, &text, SOURCE_HEADER)? {
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 3 {
            return Err(err(line, format!("expected 3 columns, found {}", cols.len())));
        }
        let bpm: f64 = cols[2].trim().parse().map_err(|_| err(line, format!("bad bpm {:?}", cols[2])))?;
        if !(bpm.is_finite() && bpm > 0.0) {
            return Err(err(line, format!("bpm must be positive, got {bpm}")));
        }
        if cols[0].is_empty() || cols[1].is_empty() {
            return Err(err(line, "empty path or genre".into()));
        }
        out.push(SourceEntry { path: cols[0].to_string(), genre: cols[1].to_string(), bpm });
    }
    Ok(out)
}

pub fn read_tag_manifest(path: impl AsRef<Path>) -> Result<Vec<TagEntry>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (line, l) in data_lines(path, &text, TAG_HEADER)? {
        let (p, tags) = l.split_once('\t').unwrap_or((l, ""));
        if p.is_empty() || tags.contains('\t') {
            return Err(ManifestError::Line {
                path: path.display().to_string(),
                line,
                detail: "expected `path<TAB>tag;tag`".into(),
            });
        }
        let tags = tags.split(';').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect();
        out.push(TagEntry { path: p.to_string(), tags });
    }
    Ok(out)
}
