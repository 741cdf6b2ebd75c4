use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{KcId, KnowledgeComponent};
use crate::error::{Error, Result};

/// First-seen assignment of `kc_id`s to Wikipedia titles, persisted as
/// `kc_id<TAB>title<TAB>page_url` lines so ids survive across runs.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    by_title: HashMap<String, KcId>,
    entries: Vec<KnowledgeComponent>,
}

fn clean(field: &str) -> String {
    field.replace(['\t', '\n', '\r'], " ")
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a vocabulary file; a missing file yields an empty vocabulary.
    pub fn load(path: &Path) -> Result<Self> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::new()),
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut vocab = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let bad = || Error::InvalidEvent(format!("{}:{}: malformed vocabulary line", path.display(), lineno + 1));
            let id: KcId = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let title = parts.next().ok_or_else(bad)?.to_string();
            let page_url = parts.next().unwrap_or("").to_string();
            if id as usize != vocab.entries.len() || vocab.by_title.contains_key(&title) {
                return Err(bad());
            }
            vocab.by_title.insert(title.clone(), id);
            vocab.entries.push(KnowledgeComponent { kc_id: id, title, page_url });
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tsv.tmp");
        let mut out = Vec::new();
        for kc in &self.entries {
            writeln!(out, "{}\t{}\t{}", kc.kc_id, kc.title, kc.page_url).expect("write to Vec");
        }
        fs::write(&tmp, out).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Returns the component for `title`, assigning the next id if unseen.
    pub fn intern(&mut self, title: &str, page_url: &str) -> KnowledgeComponent {
        let title = clean(title);
        if let Some(&id) = self.by_title.get(&title) {
            return self.entries[id as usize].clone();
        }
        let kc =
            KnowledgeComponent { kc_id: self.entries.len() as KcId, title: title.clone(), page_url: clean(page_url) };
        self.by_title.insert(title, kc.kc_id);
        self.entries.push(kc.clone());
        kc
    }

    pub fn get(&self, kc_id: KcId) -> Option<&KnowledgeComponent> {
        self.entries.get(kc_id as usize)
    }

    pub fn lookup(&self, title: &str) -> Option<KcId> {
        self.by_title.get(title).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
