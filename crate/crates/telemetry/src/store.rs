//! Append-only session store.
//!
//! Records live in `segment-NNNNNN.jsonl` files. Each line is
//! `<crc32 of the JSON, 8 hex digits> <JSON record>\n` and is synced to disk
//! before the append returns. On open, a torn or corrupt tail of the newest
//! segment is truncated away; corrupt lines elsewhere are skipped with a
//! warning.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use crate::error::{Result, TelemetryError};
use crate::record::SessionRecord;

pub const DEFAULT_SEGMENT_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Appended {
    Stored,
    Duplicate,
}

/// What [`Store::open`] found on disk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Recovery {
    pub records: usize,
    pub skipped_lines: usize,
    pub truncated_bytes: u64,
}

struct Writer {
    file: File,
    index: u32,
    len: u64,
}

struct Inner {
    records: Vec<SessionRecord>,
    by_id: HashMap<String, usize>,
    writer: Writer,
}

pub struct Store {
    dir: PathBuf,
    segment_bytes: u64,
    inner: RwLock<Inner>,
    recovery: Recovery,
}

fn segment_path(dir: &Path, index: u32) -> PathBuf {
    dir.join(format!("segment-{index:06}.jsonl"))
}

fn segment_index(path: &Path) -> Option<u32> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("segment-")?.strip_suffix(".jsonl")?.parse().ok()
}

pub fn frame(json: &str) -> String {
    format!("{:08x} {json}\n", crc32fast::hash(json.as_bytes()))
}

/// Decodes one line (without its newline); `None` if the checksum or JSON is bad.
fn unframe(line: &str) -> Option<SessionRecord> {
    let (crc, json) = line.split_once(' ')?;
    let crc = u32::from_str_radix(crc, 16).ok()?;
    if crc32fast::hash(json.as_bytes()) != crc {
        return None;
    }
    serde_json::from_str(json).ok()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TelemetryError + '_ {
    move |source| TelemetryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads one segment. Returns the records and the byte offset just past the
/// last valid line, plus the number of invalid lines seen before it.
fn read_segment(path: &Path) -> Result<(Vec<SessionRecord>, u64, usize, u64)> {
    let file = File::open(path).map_err(io_err(path))?;
    let total = file.metadata().map_err(io_err(path))?.len();
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut good_end = 0u64;
    let mut bad_since_good = 0usize;
    let mut skipped = 0usize;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        offset += n as u64;
        let complete = buf.last() == Some(&b'\n');
        let record = complete
            .then(|| std::str::from_utf8(&buf[..buf.len() - 1]).ok().and_then(unframe))
            .flatten();
        match record {
            Some(r) => {
                records.push(r);
                good_end = offset;
                skipped += bad_since_good;
                bad_since_good = 0;
            }
            None => bad_since_good += 1,
        }
    }
    Ok((records, good_end, skipped, total))
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(dir, DEFAULT_SEGMENT_BYTES)
    }

    /// Opens (creating if needed) a store whose segments roll over at `segment_bytes`.
    pub fn open_with(dir: impl AsRef<Path>, segment_bytes: u64) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut segments: Vec<(u32, PathBuf)> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter_map(|p| segment_index(&p).map(|i| (i, p)))
            .collect();
        segments.sort();

        let mut recovery = Recovery::default();
        let mut records: Vec<SessionRecord> = Vec::new();
        let mut by_id = HashMap::new();
        let last = segments.len().checked_sub(1);
        for (pos, (_, path)) in segments.iter().enumerate() {
            let (found, good_end, skipped, total) = read_segment(path)?;
            recovery.skipped_lines += skipped;
            if good_end < total {
                if Some(pos) == last {
                    tracing::warn!(path = %path.display(), bytes = total - good_end, "truncating torn tail");
                    let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
                    f.set_len(good_end).map_err(io_err(path))?;
                    f.sync_all().map_err(io_err(path))?;
                    recovery.truncated_bytes += total - good_end;
                } else {
                    tracing::warn!(path = %path.display(), "ignoring corrupt tail of a sealed segment");
                    recovery.skipped_lines += 1;
                }
            }
            if skipped > 0 {
                tracing::warn!(path = %path.display(), skipped, "skipped corrupt records");
            }
            for r in found {
                if by_id.contains_key(&r.session_id) {
                    tracing::warn!(session_id = %r.session_id, "ignoring repeated session id on disk");
                    continue;
                }
                by_id.insert(r.session_id.clone(), records.len());
                records.push(r);
            }
        }
        recovery.records = records.len();

        let index = segments.last().map_or(1, |(i, _)| *i);
        let writer = Self::open_segment(&dir, index)?;
        Ok(Self {
            dir,
            segment_bytes: segment_bytes.max(1),
            inner: RwLock::new(Inner { records, by_id, writer }),
            recovery,
        })
    }

    fn open_segment(dir: &Path, index: u32) -> Result<Writer> {
        let path = segment_path(dir, index);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let len = file.seek(SeekFrom::End(0)).map_err(io_err(&path))?;
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(Writer { file, index, len })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn recovery(&self) -> Recovery {
        self.recovery
    }

    /// Appends `record` unless its session id is already stored. The record
    /// is on disk when this returns `Stored`.
    pub fn append(&self, record: SessionRecord) -> Result<Appended> {
        let mut inner = self.inner.write().unwrap_or_else(|e| e.into_inner());
        if inner.by_id.contains_key(&record.session_id) {
            return Ok(Appended::Duplicate);
        }
        let json = serde_json::to_string(&record).map_err(TelemetryError::Encode)?;
        let line = frame(&json);
        if inner.writer.len > 0 && inner.writer.len + line.len() as u64 > self.segment_bytes {
            let next = inner.writer.index + 1;
            inner.writer.file.sync_all().map_err(io_err(&segment_path(&self.dir, inner.writer.index)))?;
            inner.writer = Self::open_segment(&self.dir, next)?;
        }
        let path = segment_path(&self.dir, inner.writer.index);
        inner.writer.file.write_all(line.as_bytes()).map_err(io_err(&path))?;
        inner.writer.file.sync_data().map_err(io_err(&path))?;
        inner.writer.len += line.len() as u64;
        let i = inner.records.len();
        inner.by_id.insert(record.session_id.clone(), i);
        inner.records.push(record);
        Ok(Appended::Stored)
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, session_id: &str) -> Option<SessionRecord> {
        let inner = self.inner.read().unwrap_or_else(|e| e.into_inner());
        inner.by_id.get(session_id).map(|&i| inner.records[i].clone())
    }

    /// Runs `f` over all records in append order under a read lock.
    pub fn with_records<T>(&self, f: impl FnOnce(&[SessionRecord]) -> T) -> T {
        let inner = self.inner.read().unwrap_or_else(|e| e.into_inner());
        f(&inner.records)
    }

    pub fn segment_paths(&self) -> Vec<PathBuf> {
        let last = self.inner.read().unwrap_or_else(|e| e.into_inner()).writer.index;
        (1..=last).map(|i| segment_path(&self.dir, i)).filter(|p| p.exists()).collect()
    }
}
