//! Record framing for the table log.
//!
//! A log is the magic `CMDT`, a version byte, then records. Each record is
//! a varint body length, the body, and the CRC32C of the body as 4
//! big-endian bytes. A body is an 8-byte big-endian sequence number followed
//! by row, column and value token, each prefixed by its varint length.

use cmd_core::Key;

pub const MAGIC: &[u8; 4] = b"CMDT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 5;
const MAX_BODY: u64 = 1 << 30;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub seq: u64,
    pub row: Key,
    pub col: Key,
    pub token: Box<[u8]>,
}

pub fn header() -> [u8; HEADER_LEN] {
    [MAGIC[0], MAGIC[1], MAGIC[2], MAGIC[3], VERSION]
}

pub fn put_varint(out: &mut Vec<u8>, mut n: u64) {
    while n >= 0x80 {
        out.push((n as u8) | 0x80);
        n >>= 7;
    }
    out.push(n as u8);
}

/// Returns the value and the number of bytes it took, or `None` if the
/// buffer ends mid-varint or the varint overflows.
pub fn get_varint(buf: &[u8]) -> Option<(u64, usize)> {
    let mut n = 0u64;
    for (i, &b) in buf.iter().enumerate().take(10) {
        n |= u64::from(b & 0x7f).checked_shl(7 * i as u32)?;
        if b & 0x80 == 0 {
            return Some((n, i + 1));
        }
    }
    None
}

fn varint_len(mut n: u64) -> usize {
    let mut len = 1;
    while n >= 0x80 {
        n >>= 7;
        len += 1;
    }
    len
}

pub fn encode_record(out: &mut Vec<u8>, seq: u64, row: &[u8], col: &[u8], token: &[u8]) {
    let body_len = 8
        + [row, col, token].iter().map(|f| varint_len(f.len() as u64) + f.len()).sum::<usize>();
    put_varint(out, body_len as u64);
    let start = out.len();
    out.extend_from_slice(&seq.to_be_bytes());
    for field in [row, col, token] {
        put_varint(out, field.len() as u64);
        out.extend_from_slice(field);
    }
    let crc = crc32c::crc32c(&out[start..]);
    out.extend_from_slice(&crc.to_be_bytes());
}

fn decode_body(body: &[u8]) -> Result<Record, String> {
    let seq = u64::from_be_bytes(body.get(..8).ok_or("body shorter than sequence number")?.try_into().unwrap());
    let mut pos = 8;
    let mut fields: [&[u8]; 3] = [&[]; 3];
    for f in &mut fields {
        let (len, used) = get_varint(&body[pos..]).ok_or("bad field length")?;
        pos += used;
        let end = pos.checked_add(len as usize).filter(|&e| e <= body.len()).ok_or("field overruns record")?;
        *f = &body[pos..end];
        pos = end;
    }
    if pos != body.len() {
        return Err("trailing bytes in record".into());
    }
    if fields[0].is_empty() || fields[1].is_empty() {
        return Err("empty key".into());
    }
    Ok(Record { seq, row: Key::from(fields[0]), col: Key::from(fields[1]), token: fields[2].into() })
}

/// Result of reading a log front to back.
#[derive(Debug)]
pub struct Replay {
    pub records: Vec<Record>,
    /// Length of the intact prefix, header included.
    pub good_len: u64,
    pub error: Option<String>,
}

pub fn replay(bytes: &[u8]) -> Replay {
    let fail = |reason: &str| Replay { records: Vec::new(), good_len: 0, error: Some(reason.into()) };
    if bytes.len() < HEADER_LEN {
        return fail("truncated file header");
    }
    if &bytes[..4] != MAGIC {
        return fail("bad magic");
    }
    if bytes[4] != VERSION {
        return fail("unsupported version");
    }
    let mut records = Vec::new();
    let mut pos = HEADER_LEN;
    let error = loop {
        if pos == bytes.len() {
            break None;
        }
        let rest = &bytes[pos..];
        let Some((len, used)) = get_varint(rest) else { break Some("truncated record length".to_string()) };
        if len > MAX_BODY {
            break Some("implausible record length".into());
        }
        let len = len as usize;
        if rest.len() < used + len + 4 {
            break Some("truncated record".into());
        }
        let body = &rest[used..used + len];
        let stored = u32::from_be_bytes(rest[used + len..used + len + 4].try_into().unwrap());
        if crc32c::crc32c(body) != stored {
            break Some("checksum mismatch".into());
        }
        match decode_body(body) {
            Ok(r) => records.push(r),
            Err(e) => break Some(e),
        }
        pos += used + len + 4;
    };
    Replay { records, good_len: pos as u64, error }
}
