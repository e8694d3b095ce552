//! `path,label` CSV manifests.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
struct RawRow {
    path: String,
    label: String,
}

/// One manifest entry. `row` is 1-based and excludes the header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRow {
    pub row: usize,
    pub path: PathBuf,
    pub label: String,
}

/// Parses a manifest; relative image paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> CliResult<Vec<ManifestRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("manifest header: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "label"] {
        return Err(CliError::Data(format!(
            "manifest header must be `path,label`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<RawRow>().enumerate() {
        let row = i + 1;
        let raw = record.map_err(|e| CliError::Data(format!("manifest row {row}: {e}")))?;
        if raw.path.is_empty() {
            return Err(CliError::Data(format!("manifest row {row}: empty path")));
        }
        if raw.label.is_empty() {
            return Err(CliError::Data(format!("manifest row {row}: empty label")));
        }
        rows.push(ManifestRow {
            row,
            path: base.join(&raw.path),
            label: raw.label,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Data("manifest lists no images".into()));
    }
    Ok(rows)
}

/// Labels in order of first appearance, each with its rows.
pub fn group_by_label(rows: &[ManifestRow]) -> Vec<(String, Vec<&ManifestRow>)> {
    let mut groups: Vec<(String, Vec<&ManifestRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(l, _)| *l == r.label) {
            Some((_, members)) => members.push(r),
            None => groups.push((r.label.clone(), vec![r])),
        }
    }
    groups
}

/// File-name-safe form of a label: anything outside `[A-Za-z0-9._-]`
/// becomes `_`.
pub fn file_stem_for(label: &str) -> String {
    let stem: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if stem.starts_with('.') {
        format!("_{stem}")
    } else {
        stem
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_paths() {
        let rows = parse_manifest(
            "path,label\na.ppm, monet\n/abs/b.ppm,pissarro\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].path, PathBuf::from("/data/a.ppm"));
        assert_eq!(rows[0].label, "monet");
        assert_eq!(rows[1].path, PathBuf::from("/abs/b.ppm"));
        assert_eq!(rows[1].row, 2);
    }

    #[test]
    fn rejects_bad_rows() {
        let base = Path::new(".");
        for (text, needle) in [
            ("file,label\na,b\n", "header"),
            ("path,label\na,b\n,c\n", "row 2"),
            ("path,label\na,\n", "row 1"),
            ("path,label\na,b,c\n", "row 1"),
            ("path,label\n", "no images"),
        ] {
            let err = parse_manifest(text, base).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn groups_keep_first_appearance_order() {
        let rows = parse_manifest("path,label\na,x\nb,y\nc,x\n", Path::new("")).unwrap();
        let groups = group_by_label(&rows);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].0, "x");
        assert_eq!(groups[0].1.len(), 2);
        assert_eq!(groups[1].0, "y");
    }

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(file_stem_for("Claude Monet"), "Claude_Monet");
        assert_eq!(file_stem_for("a/b"), "a_b");
        assert_eq!(file_stem_for(".hidden"), "_.hidden");
        assert_eq!(file_stem_for("ok-1.2"), "ok-1.2");
    }
}
