//! Word-vector text format (`|V| D` header, then `word v1 .. vD` per line).
//!
//! Subword tables additionally write a companion binary file next to the
//! text file (`<path>.subword`) holding the stored bucket rows.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{EmbeddingTable, SubwordSpec, SubwordTable};
use crate::error::{Error, Result};

pub const SUBWORD_MAGIC: &[u8; 8] = b"MISUBW01";

pub fn companion_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".subword");
    PathBuf::from(p)
}

pub fn save_table(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let dim = table.dim();
    let mut out = format!("{} {}\n", table.len(), dim);
    for (i, w) in table.words().iter().enumerate() {
        out.push_str(w);
        for x in table.word_row(i) {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))?;

    let side = companion_path(path);
    match table.subword() {
        Some(sub) => {
            let buckets = sub.stored_buckets();
            let mut bin = Vec::with_capacity(48 + buckets.len() * (4 + 4 * dim));
            bin.extend_from_slice(SUBWORD_MAGIC);
            for v in [dim as u32, sub.spec.min_n as u32, sub.spec.max_n as u32, sub.spec.buckets] {
                bin.extend_from_slice(&v.to_le_bytes());
            }
            bin.extend_from_slice(&sub.seed.to_le_bytes());
            bin.extend_from_slice(&(buckets.len() as u64).to_le_bytes());
            for b in buckets {
                bin.extend_from_slice(&b.to_le_bytes());
                for x in sub.bucket_vector(b, dim) {
                    bin.extend_from_slice(&x.to_le_bytes());
                }
            }
            std::fs::write(&side, bin).map_err(|e| Error::io(&side, e))?;
        }
        None => {
            if side.exists() {
                std::fs::remove_file(&side).map_err(|e| Error::io(&side, e))?;
            }
        }
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Parse {
                line: 0,
                message: format!("truncated subword file at byte {}", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn load_subword(path: &Path, dim: usize) -> Result<SubwordTable> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(8)? != SUBWORD_MAGIC {
        return Err(Error::Parse {
            line: 0,
            message: "bad subword magic".into(),
        });
    }
    let file_dim = c.u32()? as usize;
    if file_dim != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: file_dim,
        });
    }
    let spec = SubwordSpec {
        min_n: c.u32()? as usize,
        max_n: c.u32()? as usize,
        buckets: c.u32()?,
    };
    let seed = c.u64()?;
    let count = c.u64()? as usize;
    let mut rows = Vec::with_capacity(count * dim);
    let mut slots = HashMap::with_capacity(count);
    for slot in 0..count {
        let b = c.u32()?;
        slots.insert(b, slot);
        for _ in 0..dim {
            rows.push(c.f32()?);
        }
    }
    Ok(SubwordTable {
        spec,
        seed,
        rows,
        slots,
    })
}

pub fn load_table(path: &Path) -> Result<EmbeddingTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty vector file".into(),
    })?;
    let mut h = header.split_whitespace().map(str::parse::<usize>);
    let (Some(Ok(n)), Some(Ok(dim)), None) = (h.next(), h.next(), h.next()) else {
        return Err(Error::Parse {
            line: 1,
            message: format!("bad header {header:?}, expected \"|V| D\""),
        });
    };

    let mut words = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default();
        let row: Vec<f32> = parts
            .map(|p| {
                p.parse::<f32>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad value {p:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("row {word:?} has {} values, header says {dim}", row.len()),
            });
        }
        words.push(word.to_owned());
        values.extend(row);
    }
    if words.len() != n {
        return Err(Error::Parse {
            line: words.len() + 2,
            message: format!("truncated file: header says {n} rows, found {}", words.len()),
        });
    }
    let side = companion_path(path);
    let subword = if side.exists() {
        Some(load_subword(&side, dim)?)
    } else {
        None
    };
    EmbeddingTable::new(words, dim, values, subword)
}
