//! Dataset manifests: JSON Lines, one `{"id", "sar", "ms", "gt"?}` record per line, paths
//! relative to the manifest's directory. Blank lines are ignored.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::patch_file::read_patch;
use crate::error::{Error, Result};
use crate::raster::PairedSample;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub sar: PathBuf,
    pub ms: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        Ok(Manifest {
            root: root.into(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn has_gt(&self) -> bool {
        self.entries.iter().all(|e| e.gt.is_some())
    }

    /// Stream of samples in file order; each one is read and validated lazily.
    pub fn iterate_samples(&self) -> SampleIter<'_> {
        SampleIter {
            manifest: self,
            next: 0,
        }
    }

    /// Read every sample eagerly.
    pub fn load_all(&self) -> Result<Vec<PairedSample>> {
        self.iterate_samples().collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
            out.push('\n');
        }
        out
    }
}

pub struct SampleIter<'a> {
    manifest: &'a Manifest,
    next: usize,
}

impl Iterator for SampleIter<'_> {
    type Item = Result<PairedSample>;

    fn next(&mut self) -> Option<Self::Item> {
        let entry = self.manifest.entries.get(self.next)?;
        self.next += 1;
        Some(load_entry(self.manifest, entry))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.manifest.entries.len() - self.next;
        (left, Some(left))
    }
}

fn load_entry(manifest: &Manifest, entry: &ManifestEntry) -> Result<PairedSample> {
    let sar = read_patch(manifest.resolve(&entry.sar))?;
    let ms = read_patch(manifest.resolve(&entry.ms))?;
    let gt = entry
        .gt
        .as_ref()
        .map(|p| read_patch(manifest.resolve(p)))
        .transpose()?;
    PairedSample::new(entry.id.clone(), sar, ms, gt)
}

/// Parse manifest text without touching the filesystem.
pub fn parse_manifest(text: &str, root: impl Into<PathBuf>) -> Result<Manifest> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        if entry.id.is_empty() {
            return Err(Error::Manifest {
                line: i + 1,
                message: "empty id".into(),
            });
        }
        entries.push(entry);
    }
    Manifest::new(root, entries)
}

/// Parse a manifest file and check that every referenced path exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = parse_manifest(&text, root)?;
    for e in &manifest.entries {
        for rel in [Some(&e.sar), Some(&e.ms), e.gt.as_ref()].into_iter().flatten() {
            let full = manifest.resolve(rel);
            if !full.is_file() {
                return Err(Error::UnresolvablePath(full));
            }
        }
    }
    Ok(manifest)
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest.to_jsonl()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::write_patch;
    use crate::raster::RasterPatch;

    fn write_pair(dir: &Path, id: &str, sar_size: usize, ms_size: usize) -> ManifestEntry {
        let sar = RasterPatch::filled(sar_size, sar_size, 1, 12, 1.0).unwrap();
        let ms = RasterPatch::filled(ms_size, ms_size, 3, 12, 2.0).unwrap();
        write_patch(&sar, dir.join(format!("{id}_sar.scp"))).unwrap();
        write_patch(&ms, dir.join(format!("{id}_ms.scp"))).unwrap();
        ManifestEntry {
            id: id.into(),
            sar: format!("{id}_sar.scp").into(),
            ms: format!("{id}_ms.scp").into(),
            gt: None,
        }
    }

    #[test]
    fn samples_come_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![write_pair(dir.path(), "b", 4, 4), write_pair(dir.path(), "a", 4, 4)];
        let m = Manifest::new(dir.path(), entries).unwrap();
        let path = dir.path().join("m.jsonl");
        write_manifest(&m, &path).unwrap();
        let loaded = load_manifest(&path).unwrap();
        let ids: Vec<String> = loaded.iterate_samples().map(|s| s.unwrap().id).collect();
        assert_eq!(ids, ["b", "a"]);
    }

    #[test]
    fn mismatched_sizes_fail_at_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::new(dir.path(), vec![write_pair(dir.path(), "x", 128, 256)]).unwrap();
        let path = dir.path().join("m.jsonl");
        write_manifest(&m, &path).unwrap();
        let loaded = load_manifest(&path).unwrap();
        let first = loaded.iterate_samples().next().unwrap();
        assert!(matches!(first, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_manifest_is_empty_stream() {
        let m = parse_manifest("\n\n", "/nowhere").unwrap();
        assert_eq!(m.iterate_samples().count(), 0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "{\"id\":\"a\",\"sar\":\"s\",\"ms\":\"m\"}\n{\"id\":\"a\",\"sar\":\"s2\",\"ms\":\"m2\"}\n";
        assert!(matches!(parse_manifest(text, "."), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn missing_files_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        fs::write(&path, "{\"id\":\"a\",\"sar\":\"nope.scp\",\"ms\":\"m.scp\"}\n").unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::UnresolvablePath(_))));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_manifest("\n{\"id\":\"a\"", ".").unwrap_err();
        assert!(matches!(err, Error::Manifest { line: 2, .. }));
        let err = parse_manifest("{\"id\":\"a\",\"sar\":\"s\",\"ms\":\"m\",\"extra\":1}", ".").unwrap_err();
        assert!(matches!(err, Error::Manifest { line: 1, .. }));
    }

    #[test]
    fn gt_field_round_trips() {
        let text = "{\"id\":\"a\",\"sar\":\"s\",\"ms\":\"m\",\"gt\":\"g\"}\n";
        let m = parse_manifest(text, ".").unwrap();
        assert_eq!(m.entries[0].gt.as_deref(), Some(Path::new("g")));
        assert_eq!(m.to_jsonl(), text);
    }
}
