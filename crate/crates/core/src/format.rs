//! On-disk timestamp stream formats.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! offset 0   8 bytes  ASCII "SFWMTAG1"
//! offset 8   8 bytes  reserved, zero
//! offset 16  records, 9 bytes each: u64 timestamp (ps), u8 channel (0 = Stokes, 1 = anti-Stokes)
//! ```
//!
//! Timestamps are non-decreasing. There is no footer and no stored duration.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::biphoton::csv_err;
use crate::consts::PS_PER_S;
use crate::error::{Error, Result};
use crate::montecarlo::{Channel, Click, TimestampStream};

pub const MAGIC: &[u8; 8] = b"SFWMTAG1";
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 9;

pub fn write_stream<W: Write>(s: &TimestampStream, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    w.write_all(MAGIC)?;
    w.write_all(&[0u8; 8])?;
    for c in s.records() {
        w.write_all(&c.timestamp().to_le_bytes())?;
        w.write_all(&[c.channel() as u8])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stream_file(s: &TimestampStream, path: &Path) -> Result<()> {
    write_stream(s, File::create(path)?)
}

/// Decodes a binary stream. `duration` overrides the default of last
/// timestamp + 1 ps.
pub fn decode_stream(bytes: &[u8], duration: Option<f64>, seed: u64) -> Result<TimestampStream> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic".into(),
        });
    }
    if let Some(i) = bytes[8..HEADER_LEN].iter().position(|&b| b != 0) {
        return Err(Error::Format {
            offset: 8 + i as u64,
            message: "reserved header byte not zero".into(),
        });
    }
    let body = &bytes[HEADER_LEN..];
    if !body.len().is_multiple_of(RECORD_LEN) {
        let whole = body.len() / RECORD_LEN;
        return Err(Error::Format {
            offset: (HEADER_LEN + whole * RECORD_LEN) as u64,
            message: format!(
                "truncated record ({} trailing bytes)",
                body.len() % RECORD_LEN
            ),
        });
    }

    let mut records = Vec::with_capacity(body.len() / RECORD_LEN);
    let mut prev = 0u64;
    for (i, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
        let offset = (HEADER_LEN + i * RECORD_LEN) as u64;
        let t = u64::from_le_bytes(rec[..8].try_into().expect("8-byte slice"));
        if t > Click::MAX_TIMESTAMP {
            return Err(Error::Format {
                offset,
                message: format!("timestamp {t} ps out of range"),
            });
        }
        if t < prev {
            return Err(Error::Format {
                offset,
                message: format!("timestamp {t} ps precedes {prev} ps"),
            });
        }
        let ch = Channel::try_from(rec[8]).map_err(|v| Error::Format {
            offset: offset + 8,
            message: format!("invalid channel byte {v}"),
        })?;
        records.push(Click::new(t, ch));
        prev = t;
    }

    let min_duration = records.last().map_or(1, |c| c.timestamp() + 1) as f64 / PS_PER_S;
    let duration = match duration {
        Some(d) if d < min_duration => {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!("duration {d} s shorter than last timestamp"),
            })
        }
        Some(d) => d,
        None => min_duration,
    };
    TimestampStream::new(records, duration, seed)
}

pub fn read_stream<R: Read>(mut input: R, duration: Option<f64>) -> Result<TimestampStream> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_stream(&bytes, duration, 0)
}

pub fn read_stream_file(path: &Path, duration: Option<f64>) -> Result<TimestampStream> {
    read_stream(BufReader::new(File::open(path)?), duration)
}

/// Writes `timestamp_ps,channel` rows.
pub fn write_stream_csv<W: Write>(s: &TimestampStream, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp_ps", "channel"])
        .map_err(csv_err)?;
    for c in s.records() {
        w.write_record([c.timestamp().to_string(), (c.channel() as u8).to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
