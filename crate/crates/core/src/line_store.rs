//! Byte-offset access to line-oriented store files.
//!
//! A store is plain text, one record per line, every line terminated by a
//! single `\n`. A `\r` immediately before the terminator is stripped from the
//! record but still counted in byte offsets.
//!
//! # Selection rule
//!
//! [`ByteAddressedFile::advance_to_next_header`] always moves to the first
//! header *strictly after* the cursor, even when the cursor already sits on a
//! header. Starting from offset 0 therefore selects line 2, and any offset at
//! or past the last header wraps to line 1. Drawing the start offset
//! uniformly from `0..=n_f` selects line `i` with probability proportional to
//! the byte length of line `i - 1` (circularly; line 1 gets one extra offset
//! for `n_f` itself). For fixed-width stores this is uniform up to that single
//! extra offset. [`LineIndex`] offers exact line-uniform addressing when
//! that matters.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const TERMINATOR: u8 = b'\n';
pub const DEFAULT_BUFFER_SIZE: usize = 64 * 1024;

/// A read handle on a store file. `n_f` is fixed when the file is opened.
#[derive(Debug)]
pub struct ByteAddressedFile {
    path: PathBuf,
    n_f: u64,
    reader: BufReader<File>,
    // Logical offset of the next byte `reader` will yield.
    phys: u64,
}

/// Read position inside a [`ByteAddressedFile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineCursor {
    pub position: u64,
    /// Set once the cursor has run past end of file and restarted at 0.
    pub wrapped: bool,
}

impl LineCursor {
    pub fn at(position: u64) -> Self {
        LineCursor {
            position,
            wrapped: false,
        }
    }
}

/// One line of a store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// Line bytes without the terminator (and without a trailing `\r`).
    pub raw: Vec<u8>,
    /// Byte offset of the line header.
    pub origin_offset: u64,
}

impl Record {
    /// Parse the comma-separated fields as `f64`.
    pub fn fields(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        parse_fields_into(&self.raw, self.origin_offset, &mut out)?;
        Ok(out)
    }

    pub fn as_str(&self) -> std::borrow::Cow<'_, str> {
        String::from_utf8_lossy(&self.raw)
    }
}

/// Parse a comma-separated numeric line into `out` (cleared first).
pub fn parse_fields_into(raw: &[u8], offset: u64, out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    for field in raw.split(|&b| b == b',') {
        let parsed = std::str::from_utf8(field)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok());
        match parsed {
            Some(v) => out.push(v),
            None => {
                return Err(Error::Parse {
                    offset,
                    field: String::from_utf8_lossy(field).into_owned(),
                })
            }
        }
    }
    Ok(())
}

/// Result of a full sequential pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanSummary {
    /// Number of records, N.
    pub records: u64,
    pub bytes: u64,
    /// Capacity of the line buffer at the end of the scan; bounds the memory
    /// the scan held beyond the reader's fixed buffer.
    pub max_line_buffer: usize,
}

impl ByteAddressedFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::open_with_buffer(path, DEFAULT_BUFFER_SIZE)
    }

    pub fn open_with_buffer(path: impl AsRef<Path>, buffer_size: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path).map_err(|source| Error::Open {
            path: path.clone(),
            source,
        })?;
        let n_f = file.metadata()?.len();
        if n_f == 0 {
            return Err(Error::EmptyStore);
        }
        file.seek(SeekFrom::Start(n_f - 1))?;
        let mut last = [0u8; 1];
        file.read_exact(&mut last)?;
        if last[0] != TERMINATOR {
            return Err(Error::UnterminatedFinalLine);
        }
        file.seek(SeekFrom::Start(0))?;
        Ok(ByteAddressedFile {
            path,
            n_f,
            reader: BufReader::with_capacity(buffer_size.max(1), file),
            phys: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Size of the file in bytes at open time.
    pub fn n_f(&self) -> u64 {
        self.n_f
    }

    fn position_reader(&mut self, target: u64) -> Result<()> {
        if target != self.phys {
            // seek_relative keeps the buffer when the target is inside it.
            let delta = target as i128 - self.phys as i128;
            self.reader.seek_relative(delta as i64)?;
            self.phys = target;
        }
        Ok(())
    }

    /// Move the read pointer to raw byte `p_b`, without realigning.
    pub fn seek(&mut self, p_b: u64) -> Result<LineCursor> {
        if p_b > self.n_f {
            return Err(Error::OffsetOutOfRange {
                offset: p_b,
                n_f: self.n_f,
            });
        }
        self.position_reader(p_b)?;
        Ok(LineCursor::at(p_b))
    }

    /// Move to the first line header strictly after `cursor`, wrapping to 0
    /// when no further line exists.
    pub fn advance_to_next_header(&mut self, cursor: LineCursor) -> Result<LineCursor> {
        if cursor.position >= self.n_f {
            return Ok(LineCursor {
                position: 0,
                wrapped: true,
            });
        }
        self.position_reader(cursor.position)?;
        let skipped = self.skip_through_terminator()?;
        let next = cursor.position + skipped;
        self.phys = next;
        Ok(self.settle(next, cursor.wrapped))
    }

    fn skip_through_terminator(&mut self) -> Result<u64> {
        let mut skipped = 0u64;
        loop {
            let buf = self.reader.fill_buf()?;
            if buf.is_empty() {
                return Err(Error::UnterminatedFinalLine);
            }
            match buf.iter().position(|&b| b == TERMINATOR) {
                Some(i) => {
                    self.reader.consume(i + 1);
                    return Ok(skipped + i as u64 + 1);
                }
                None => {
                    let len = buf.len();
                    self.reader.consume(len);
                    skipped += len as u64;
                }
            }
        }
    }

    fn settle(&self, next: u64, wrapped: bool) -> LineCursor {
        if next >= self.n_f {
            LineCursor {
                position: 0,
                wrapped: true,
            }
        } else {
            LineCursor {
                position: next,
                wrapped,
            }
        }
    }

    /// Read the line starting at `cursor` (which must be a header) into
    /// `buf`, stripping the terminator. Returns the cursor at the following
    /// header.
    pub fn read_line_into(&mut self, cursor: LineCursor, buf: &mut Vec<u8>) -> Result<LineCursor> {
        if cursor.position >= self.n_f {
            return Err(Error::OffsetOutOfRange {
                offset: cursor.position,
                n_f: self.n_f,
            });
        }
        self.position_reader(cursor.position)?;
        buf.clear();
        let read = self.reader.read_until(TERMINATOR, buf)? as u64;
        if buf.last() != Some(&TERMINATOR) {
            return Err(Error::UnterminatedFinalLine);
        }
        buf.pop();
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        let next = cursor.position + read;
        self.phys = next;
        Ok(self.settle(next, cursor.wrapped))
    }

    pub fn read_line(&mut self, cursor: LineCursor) -> Result<(Record, LineCursor)> {
        let mut raw = Vec::new();
        let next = self.read_line_into(cursor, &mut raw)?;
        Ok((
            Record {
                raw,
                origin_offset: cursor.position,
            },
            next,
        ))
    }

    /// True when `offset` is 0 or directly follows a terminator.
    pub fn is_header(&mut self, offset: u64) -> Result<bool> {
        if offset >= self.n_f {
            return Ok(false);
        }
        if offset == 0 {
            return Ok(true);
        }
        self.position_reader(offset - 1)?;
        let mut b = [0u8; 1];
        self.reader.read_exact(&mut b)?;
        self.phys = offset;
        Ok(b[0] == TERMINATOR)
    }

    /// Visit every record in file order. Memory held is one line plus the
    /// visitor's own state. Visitor errors come back wrapped with the offset
    /// of the failing line.
    pub fn sequential_scan<F>(&mut self, mut visitor: F) -> Result<ScanSummary>
    where
        F: FnMut(&Record) -> Result<()>,
    {
        let mut cursor = self.seek(0)?;
        let mut record = Record {
            raw: Vec::with_capacity(256),
            origin_offset: 0,
        };
        let mut records = 0u64;
        loop {
            record.origin_offset = cursor.position;
            let next = self.read_line_into(cursor, &mut record.raw)?;
            visitor(&record).map_err(|e| Error::AtOffset {
                offset: record.origin_offset,
                source: Box::new(e),
            })?;
            records += 1;
            if next.wrapped {
                break;
            }
            cursor = next;
        }
        Ok(ScanSummary {
            records,
            bytes: self.n_f,
            max_line_buffer: record.raw.capacity(),
        })
    }

    /// Header offsets of every line, in file order.
    pub fn line_index(&mut self) -> Result<LineIndex> {
        let mut headers = Vec::new();
        self.sequential_scan(|r| {
            headers.push(r.origin_offset);
            Ok(())
        })?;
        Ok(LineIndex {
            headers,
            n_f: self.n_f,
        })
    }

    /// Count records with one sequential pass.
    pub fn count_lines(&mut self) -> Result<u64> {
        Ok(self.sequential_scan(|_| Ok(()))?.records)
    }
}

/// In-memory table of line headers: eight bytes per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIndex {
    headers: Vec<u64>,
    n_f: u64,
}

impl LineIndex {
    pub fn from_headers(headers: Vec<u64>, n_f: u64) -> Self {
        LineIndex { headers, n_f }
    }

    pub fn len(&self) -> usize {
        self.headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }

    pub fn headers(&self) -> &[u64] {
        &self.headers
    }

    pub fn n_f(&self) -> u64 {
        self.n_f
    }

    /// Zero-based line number of the header that byte addressing reaches
    /// from raw offset `p_b` (strictly-after rule, wrapping to line 0).
    pub fn line_after(&self, p_b: u64) -> usize {
        // first header > p_b
        let i = self.headers.partition_point(|&h| h <= p_b);
        if i >= self.headers.len() {
            0
        } else {
            i
        }
    }
}
