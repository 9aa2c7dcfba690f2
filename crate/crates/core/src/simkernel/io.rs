//! Tag files.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! "ILQT" | version u8 = 1 | channel_count u16 | duration_ps i64
//! then per tag: channel u16 | t_ps i64        (time-ascending)
//! ```
//!
//! The CSV form has the header `channel,t_ps` and carries no channel count or
//! duration; readers supply them or infer them from the data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::stream::{TagStream, TimeTag};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ILQT";
pub const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 2 + 8;
const RECORD_LEN: usize = 2 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagFormat {
    #[default]
    Binary,
    Csv,
}

impl FromStr for TagFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(TagFormat::Binary),
            "csv" => Ok(TagFormat::Csv),
            other => Err(Error::Format(format!("unknown tag format '{other}'"))),
        }
    }
}

pub fn write_binary<W: Write>(stream: &TagStream, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&stream.channel_count.to_le_bytes())?;
    w.write_all(&stream.duration_ps.to_le_bytes())?;
    for tag in &stream.tags {
        w.write_all(&tag.channel.to_le_bytes())?;
        w.write_all(&tag.t_ps.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(r: R) -> Result<TagStream> {
    let mut bytes = Vec::new();
    BufReader::new(r).read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("file too short for a header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {:#04x}", bytes[4])));
    }
    let channel_count = u16::from_le_bytes([bytes[5], bytes[6]]);
    let duration_ps = i64::from_le_bytes(bytes[7..15].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    if body.len() % RECORD_LEN != 0 {
        return Err(Error::Format(format!("truncated record ({} trailing bytes)", body.len() % RECORD_LEN)));
    }
    let tags = body
        .chunks_exact(RECORD_LEN)
        .map(|rec| {
            TimeTag::new(
                u16::from_le_bytes([rec[0], rec[1]]),
                i64::from_le_bytes(rec[2..10].try_into().expect("8 bytes")),
            )
        })
        .collect();
    let stream = TagStream { channel_count, duration_ps, tags, seed: None };
    stream.validate().map_err(|e| match e {
        Error::Precondition(m) => Error::Format(m),
        other => other,
    })?;
    Ok(stream)
}

pub fn write_csv<W: Write>(stream: &TagStream, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "channel,t_ps")?;
    for tag in &stream.tags {
        writeln!(w, "{},{}", tag.channel, tag.t_ps)?;
    }
    w.flush()?;
    Ok(())
}

/// Read `channel,t_ps` records. Without an explicit `(channel_count,
/// duration_ps)` layout the smallest consistent one is inferred.
pub fn read_csv<R: Read>(r: R, layout: Option<(u16, i64)>) -> Result<TagStream> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "channel" || &headers[1] != "t_ps" {
        return Err(Error::Format(format!("expected header 'channel,t_ps', got '{}'", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut tags = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let parse_err = |what: &str| Error::Format(format!("record {}: bad {what}", line + 2));
        let channel: u16 = rec[0].parse().map_err(|_| parse_err("channel"))?;
        let t_ps: i64 = rec[1].parse().map_err(|_| parse_err("t_ps"))?;
        tags.push(TimeTag::new(channel, t_ps));
    }
    let (channel_count, duration_ps) = layout.unwrap_or_else(|| {
        let ch = tags.iter().map(|t| t.channel + 1).max().unwrap_or(0);
        let dur = tags.iter().map(|t| t.t_ps).max().unwrap_or(0).max(0);
        (ch, dur)
    });
    let stream = TagStream { channel_count, duration_ps, tags, seed: None };
    stream.validate().map_err(|e| match e {
        Error::Precondition(m) => Error::Format(m),
        other => other,
    })?;
    Ok(stream)
}

pub fn write_tag_file(stream: &TagStream, path: &Path, format: TagFormat) -> Result<()> {
    let f = File::create(path)?;
    match format {
        TagFormat::Binary => write_binary(stream, f),
        TagFormat::Csv => write_csv(stream, f),
    }
}

/// Read a tag file, detecting the format from the magic bytes.
pub fn read_tag_file(path: &Path) -> Result<TagStream> {
    let mut f = File::open(path)?;
    let mut head = [0u8; 4];
    let n = f.read(&mut head)?;
    drop(f);
    let f = File::open(path)?;
    if n == 4 && &head == MAGIC {
        read_binary(f)
    } else {
        read_csv(f, None)
    }
}
