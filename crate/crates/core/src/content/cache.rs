use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::TopicScore;
use crate::error::{Error, Result};

const DATA_FILE: &str = "annotations.jsonl";
const INDEX_FILE: &str = "index.tsv";

/// One cached service answer for a fragment, keyed by the content hash of
/// the fragment text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub hash: String,
    pub lecture_id: String,
    pub fragment_index: usize,
    /// The service response exactly as received.
    pub response: serde_json::Value,
    pub topics: Vec<TopicScore>,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    offset: u64,
    len: u64,
}

struct Writer {
    data: File,
    index: File,
    end: u64,
}

/// Append-only line-delimited annotation store with a side index of byte
/// offsets. One writer, any number of concurrent readers.
pub struct AnnotationCache {
    dir: PathBuf,
    slots: RwLock<HashMap<String, Slot>>,
    writer: Mutex<Writer>,
}

impl AnnotationCache {
    /// Opens (or creates) the cache in `dir`. The index is rebuilt from the
    /// data file whenever it does not cover the data file exactly; a torn
    /// final record from an interrupted run is discarded.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let data_path = dir.join(DATA_FILE);
        let index_path = dir.join(INDEX_FILE);
        let data = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&data_path)
            .map_err(|e| Error::io(&data_path, e))?;
        let data_len = data.metadata().map_err(|e| Error::io(&data_path, e))?.len();

        let slots = match read_index(&index_path)? {
            Some((slots, end)) if end == data_len => slots,
            _ => {
                let (slots, good_end) = scan_data(&data_path)?;
                if good_end != data_len {
                    log::warn!("discarding torn tail of {}", data_path.display());
                    data.set_len(good_end).map_err(|e| Error::io(&data_path, e))?;
                }
                write_index(&index_path, &slots)?;
                slots
            }
        };
        let end = slots.values().map(|s| s.offset + s.len).max().unwrap_or(0);
        let index = OpenOptions::new().append(true).open(&index_path).map_err(|e| Error::io(&index_path, e))?;
        Ok(Self { dir: dir.to_path_buf(), slots: RwLock::new(slots), writer: Mutex::new(Writer { data, index, end }) })
    }

    pub fn len(&self) -> usize {
        self.slots.read().expect("cache index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, hash: &str) -> bool {
        self.slots.read().expect("cache index poisoned").contains_key(hash)
    }

    pub fn get(&self, hash: &str) -> Result<Option<CacheRecord>> {
        let slot = match self.slots.read().expect("cache index poisoned").get(hash) {
            Some(&s) => s,
            None => return Ok(None),
        };
        let path = self.dir.join(DATA_FILE);
        let mut file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        file.seek(SeekFrom::Start(slot.offset)).map_err(|e| Error::io(&path, e))?;
        let mut buf = vec![0u8; slot.len as usize];
        file.read_exact(&mut buf).map_err(|e| Error::io(&path, e))?;
        serde_json::from_slice(&buf).map(Some).map_err(|e| Error::json(format!("cache record {hash}"), e))
    }

    /// Appends a record unless its hash is already present.
    pub fn put(&self, record: &CacheRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record).map_err(|e| Error::json("cache record", e))?;
        line.push(b'\n');
        let mut w = self.writer.lock().expect("cache writer poisoned");
        if self.contains(&record.hash) {
            return Ok(());
        }
        let data_path = self.dir.join(DATA_FILE);
        let index_path = self.dir.join(INDEX_FILE);
        let slot = Slot { offset: w.end, len: line.len() as u64 - 1 };
        w.data.write_all(&line).map_err(|e| Error::io(&data_path, e))?;
        w.data.flush().map_err(|e| Error::io(&data_path, e))?;
        writeln!(w.index, "{}\t{}\t{}", record.hash, slot.offset, slot.len).map_err(|e| Error::io(&index_path, e))?;
        w.end += line.len() as u64;
        self.slots.write().expect("cache index poisoned").insert(record.hash.clone(), slot);
        Ok(())
    }

    /// All records in insertion order.
    pub fn records(&self) -> Result<Vec<CacheRecord>> {
        let path = self.dir.join(DATA_FILE);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::json(path.display().to_string(), e))?);
        }
        Ok(out)
    }
}

fn read_index(path: &Path) -> Result<Option<(HashMap<String, Slot>, u64)>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut slots = HashMap::new();
    let mut end = 0;
    for line in text.lines() {
        let parts: Vec<&str> = line.split('\t').collect();
        let parsed = match parts.as_slice() {
            [hash, off, len] => off.parse::<u64>().ok().zip(len.parse::<u64>().ok()).map(|(o, l)| (hash, o, l)),
            _ => None,
        };
        let Some((hash, offset, len)) = parsed else {
            return Ok(None);
        };
        end = end.max(offset + len + 1);
        slots.insert(hash.to_string(), Slot { offset, len });
    }
    Ok(Some((slots, end)))
}

fn scan_data(path: &Path) -> Result<(HashMap<String, Slot>, u64)> {
    #[derive(Deserialize)]
    struct HashOnly {
        hash: String,
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut slots = HashMap::new();
    let mut offset = 0usize;
    while offset < bytes.len() {
        let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            break;
        };
        let line = &bytes[offset..offset + nl];
        match serde_json::from_slice::<HashOnly>(line) {
            Ok(rec) => {
                slots.entry(rec.hash).or_insert(Slot { offset: offset as u64, len: nl as u64 });
            }
            Err(_) => break,
        }
        offset += nl + 1;
    }
    Ok((slots, offset as u64))
}

fn write_index(path: &Path, slots: &HashMap<String, Slot>) -> Result<()> {
    let mut sorted: Vec<_> = slots.iter().collect();
    sorted.sort_by_key(|(_, s)| s.offset);
    let mut out = String::new();
    for (hash, s) in sorted {
        out.push_str(&format!("{hash}\t{}\t{}\n", s.offset, s.len));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
