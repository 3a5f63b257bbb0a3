//! Labeled graph collections addressed through a manifest file.
//!
//! Manifest format: UTF-8 lines of `<path>\t<label:0|1>`; lines starting with
//! `#` are comments. Relative paths resolve against the manifest's directory.
//! An optional `# class_names = a,b` comment names the two classes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use once_cell::sync::OnceCell;

use crate::error::{Error, Result};
use crate::graph::BrainGraph;

#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: u8,
}

#[derive(Debug, Clone)]
pub struct GraphDataset {
    entries: Vec<ManifestEntry>,
    class_names: [String; 2],
}

impl GraphDataset {
    pub fn new(entries: Vec<ManifestEntry>, class_names: [String; 2]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("manifest", "no entries"));
        }
        let mut seen = [false, false];
        for e in &entries {
            if e.label > 1 {
                return Err(Error::invalid("label", format!("{} not in {{0,1}}", e.label)));
            }
            seen[e.label as usize] = true;
        }
        if !(seen[0] && seen[1]) {
            return Err(Error::SingleClass);
        }
        Ok(GraphDataset {
            entries,
            class_names,
        })
    }

    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(e, path))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse_manifest(&text, base)
    }

    pub fn parse_manifest(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut class_names = ["0".to_string(), "1".to_string()];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(names) = comment.trim().strip_prefix("class_names") {
                    if let Some(rest) = names.trim().strip_prefix('=') {
                        let mut parts = rest.split(',').map(|s| s.trim().to_string());
                        if let (Some(a), Some(b)) = (parts.next(), parts.next()) {
                            class_names = [a, b];
                        }
                    }
                }
                continue;
            }
            let (p, l) = line.split_once('\t').ok_or_else(|| {
                Error::invalid("manifest line", format!("line {}: missing tab", lineno + 1))
            })?;
            let label: u8 = l.trim().parse().map_err(|_| {
                Error::invalid(
                    "manifest label",
                    format!("line {}: {l:?} is not 0 or 1", lineno + 1),
                )
            })?;
            let rel = Path::new(p);
            let path = if rel.is_absolute() {
                rel.to_path_buf()
            } else {
                base.join(rel)
            };
            entries.push(ManifestEntry { path, label });
        }
        GraphDataset::new(entries, class_names)
    }

    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut out = String::new();
        out.push_str(&format!(
            "# class_names = {},{}\n",
            self.class_names[0], self.class_names[1]
        ));
        for e in &self.entries {
            let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
            out.push_str(&format!("{}\t{}\n", rel.display(), e.label));
        }
        std::fs::write(path, out).map_err(|e| Error::io(e, path))
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn class_names(&self) -> &[String; 2] {
        &self.class_names
    }

    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.label).collect()
    }
}

/// Access surface the training loop sees: labels up front, graphs loaded
/// on demand. Keeping loads behind this trait lets tests observe exactly
/// when each graph is first touched.
pub trait GraphSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, idx: usize) -> u8;

    fn load(&self, idx: usize) -> Result<Arc<BrainGraph>>;
}

impl GraphSource for GraphDataset {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn label(&self, idx: usize) -> u8 {
        self.entries[idx].label
    }

    fn load(&self, idx: usize) -> Result<Arc<BrainGraph>> {
        Ok(Arc::new(BrainGraph::read_file(&self.entries[idx].path)?))
    }
}

/// Caches each graph after its first load; the first touch still happens
/// only when the consumer asks for it.
pub struct CachedSource<S: GraphSource> {
    inner: S,
    slots: Vec<OnceCell<Arc<BrainGraph>>>,
}

impl<S: GraphSource> CachedSource<S> {
    pub fn new(inner: S) -> Self {
        let slots = (0..inner.len()).map(|_| OnceCell::new()).collect();
        CachedSource { inner, slots }
    }
}

impl<S: GraphSource> GraphSource for CachedSource<S> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn label(&self, idx: usize) -> u8 {
        self.inner.label(idx)
    }

    fn load(&self, idx: usize) -> Result<Arc<BrainGraph>> {
        self.slots[idx]
            .get_or_try_init(|| self.inner.load(idx))
            .cloned()
    }
}

/// In-memory source for tests and generated data.
pub struct VecSource {
    graphs: Vec<Arc<BrainGraph>>,
    labels: Vec<u8>,
}

impl VecSource {
    pub fn new(graphs: Vec<BrainGraph>) -> Result<Self> {
        let labels = graphs
            .iter()
            .map(|g| {
                g.label()
                    .ok_or_else(|| Error::invalid("dataset", "graph without label"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VecSource {
            graphs: graphs.into_iter().map(Arc::new).collect(),
            labels,
        })
    }
}

impl GraphSource for VecSource {
    fn len(&self) -> usize {
        self.graphs.len()
    }

    fn label(&self, idx: usize) -> u8 {
        self.labels[idx]
    }

    fn load(&self, idx: usize) -> Result<Arc<BrainGraph>> {
        Ok(self.graphs[idx].clone())
    }
}
