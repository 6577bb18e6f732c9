//! Append-only, checksummed record log backing the file store.
//!
//! Each line is `<crc32 as 8 hex digits> <json>\n`. The first line is a
//! header carrying the schema name and version. A torn or unchecksummed
//! final line is treated as an interrupted write and truncated on open; a bad
//! line anywhere else is corruption.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{Record, StoreError, SCHEMA_NAME, SCHEMA_VERSION};

/// Whether each appended record is flushed to stable storage before the
/// operation reports success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SyncPolicy {
    #[default]
    EveryWrite,
    /// Rely on the OS page cache. Survives process crashes, not power loss.
    OsBuffered,
}

pub(crate) struct Journal {
    file: File,
    path: PathBuf,
    sync: SyncPolicy,
    len: u64,
    records: u64,
}

pub(crate) struct Recovered {
    pub journal: Journal,
    pub records: Vec<(usize, Record)>,
    pub truncated_bytes: u64,
}

fn encode(record: &Record) -> Result<Vec<u8>, StoreError> {
    let json = serde_json::to_string(record).map_err(|e| StoreError::Encode(e.to_string()))?;
    let crc = crc32fast::hash(json.as_bytes());
    Ok(format!("{crc:08x} {json}\n").into_bytes())
}

fn decode(line: &[u8]) -> Result<Record, String> {
    let line = std::str::from_utf8(line).map_err(|_| "not UTF-8".to_owned())?;
    let (crc, json) = line.split_once(' ').ok_or("missing checksum")?;
    let crc = u32::from_str_radix(crc, 16).map_err(|_| "bad checksum field".to_owned())?;
    if crc32fast::hash(json.as_bytes()) != crc {
        return Err("checksum mismatch".into());
    }
    serde_json::from_str(json).map_err(|e| e.to_string())
}

impl Journal {
    pub fn open(path: &Path, sync: SyncPolicy) -> Result<Recovered, StoreError> {
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;

        let mut records = Vec::new();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let mut line_no = 0usize;
        while offset < buf.len() {
            line_no += 1;
            let Some(nl) = buf[offset..].iter().position(|b| *b == b'\n') else {
                // Interrupted final write: no terminator.
                break;
            };
            let line = &buf[offset..offset + nl];
            let next = offset + nl + 1;
            match decode(line) {
                Ok(rec) => {
                    records.push((line_no, rec));
                    good_len = next;
                }
                // A final line that fails its checksum is an interrupted write too.
                Err(_) if next == buf.len() => break,
                Err(reason) => return Err(StoreError::Corrupt { line: line_no, reason }),
            }
            offset = next;
        }

        let truncated_bytes = (buf.len() - good_len) as u64;
        if truncated_bytes > 0 {
            file.set_len(good_len as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;

        let mut journal = Journal { file, path: path.to_owned(), sync, len: good_len as u64, records: 0 };

        match records.first() {
            None => {
                journal.append(&Record::Header { schema: SCHEMA_NAME.into(), version: SCHEMA_VERSION })?;
                journal.file.sync_all()?;
            }
            Some((_, Record::Header { schema, version })) => {
                if schema != SCHEMA_NAME || *version != SCHEMA_VERSION {
                    return Err(StoreError::SchemaMismatch { found: format!("{schema} v{version}") });
                }
                records.remove(0);
                journal.records = 1;
            }
            Some((line, _)) => return Err(StoreError::Corrupt { line: *line, reason: "missing header".into() }),
        }
        journal.records += records.len() as u64;

        Ok(Recovered { journal, records, truncated_bytes })
    }

    pub fn append(&mut self, record: &Record) -> Result<(), StoreError> {
        let bytes = encode(record)?;
        if let Err(e) = self.write_line(&bytes) {
            // Drop any partial line so the next append starts on a clean boundary.
            let _ = self.file.set_len(self.len);
            let _ = self.file.seek(SeekFrom::Start(self.len));
            return Err(e.into());
        }
        self.len += bytes.len() as u64;
        self.records += 1;
        Ok(())
    }

    fn write_line(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.file.write_all(bytes)?;
        if self.sync == SyncPolicy::EveryWrite {
            self.file.sync_data()?;
        }
        Ok(())
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
