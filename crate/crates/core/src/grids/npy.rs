//! Minimal reader/writer for the numpy `.npy` container.
//!
//! Reads versions 1.0, 2.0 and 3.0 with C-order, little-endian (or byte-order
//! free) `u1`, `b1`, `f4` and `f8` payloads. Writes version 1.0 headers padded
//! to a 64-byte boundary, which is what numpy itself emits.

use crate::error::{Error, Result};

/// The npy magic string.
pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    U8(Vec<u8>),
    Bool(Vec<bool>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl NpyData {
    pub fn descr(&self) -> &'static str {
        match self {
            NpyData::U8(_) => "|u1",
            NpyData::Bool(_) => "|b1",
            NpyData::F32(_) => "<f4",
            NpyData::F64(_) => "<f8",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            NpyData::U8(v) => v.len(),
            NpyData::Bool(v) => v.len(),
            NpyData::F32(v) => v.len(),
            NpyData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Widens any payload to f64 (booleans become 0/1).
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            NpyData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            NpyData::Bool(v) => v.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect(),
            NpyData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            NpyData::F64(v) => v.clone(),
        }
    }

    /// Nonzero test per element.
    pub fn to_bool(&self) -> Vec<bool> {
        match self {
            NpyData::Bool(v) => v.clone(),
            NpyData::U8(v) => v.iter().map(|&x| x != 0).collect(),
            other => other.to_f64().into_iter().map(|x| x != 0.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 || &bytes[..6] != MAGIC {
            return Err(Error::Npy("missing \\x93NUMPY magic".into()));
        }
        let (major, minor) = (bytes[6], bytes[7]);
        let (header_len, start) = match major {
            1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10usize),
            2 | 3 => {
                if bytes.len() < 12 {
                    return Err(Error::Npy("truncated header length".into()));
                }
                (
                    u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                    12,
                )
            }
            _ => return Err(Error::Npy(format!("unsupported version {major}.{minor}"))),
        };
        let end = start
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Npy("header runs past end of file".into()))?;
        let header = std::str::from_utf8(&bytes[start..end])
            .map_err(|_| Error::Npy("header is not valid text".into()))?;
        let dict = HeaderDict::parse(header)?;
        if dict.fortran_order {
            return Err(Error::Npy("Fortran-ordered arrays are not supported".into()));
        }
        let count = dict
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Npy("shape overflows".into()))?;
        let payload = &bytes[end..];
        let data = decode_payload(&dict.descr, payload, count)?;
        Ok(NpyArray {
            shape: dict.shape,
            data,
        })
    }
}

fn decode_payload(descr: &str, payload: &[u8], count: usize) -> Result<NpyData> {
    let need = |width: usize| -> Result<&[u8]> {
        let n = count
            .checked_mul(width)
            .ok_or_else(|| Error::Npy("payload size overflows".into()))?;
        if payload.len() != n {
            return Err(Error::Npy(format!(
                "payload has {} bytes, shape needs {n}",
                payload.len()
            )));
        }
        Ok(payload)
    };
    match descr {
        "|u1" | "<u1" | ">u1" | "u1" | "=u1" | "|B" | "B" => Ok(NpyData::U8(need(1)?.to_vec())),
        "|b1" | "b1" | "?" | "|?" => Ok(NpyData::Bool(need(1)?.iter().map(|&b| b != 0).collect())),
        "<f4" | "f4" => Ok(NpyData::F32(
            need(4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )),
        "<f8" | "f8" => Ok(NpyData::F64(
            need(8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )),
        other => Err(Error::Npy(format!("unsupported dtype {other:?}"))),
    }
}

#[derive(Debug, PartialEq)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Python literal tokens that can appear in an npy header.
#[derive(Debug, PartialEq)]
enum Value {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

impl HeaderDict {
    fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            chars: text.trim_end().chars().collect(),
            pos: 0,
        };
        p.expect('{')?;
        let (mut descr, mut fortran, mut shape) = (None, None, None);
        loop {
            p.skip_ws();
            if p.eat('}') {
                break;
            }
            let key = p.string()?;
            p.expect(':')?;
            let value = p.value()?;
            match (key.as_str(), value) {
                ("descr", Value::Str(s)) => descr = Some(s),
                ("fortran_order", Value::Bool(b)) => fortran = Some(b),
                ("shape", Value::Tuple(t)) => shape = Some(t),
                (k, v) => return Err(Error::Npy(format!("unexpected header entry {k}: {v:?}"))),
            }
            p.skip_ws();
            if !p.eat(',') {
                p.expect('}')?;
                break;
            }
        }
        Ok(HeaderDict {
            descr: descr.ok_or_else(|| Error::Npy("header lacks 'descr'".into()))?,
            fortran_order: fortran.ok_or_else(|| Error::Npy("header lacks 'fortran_order'".into()))?,
            shape: shape.ok_or_else(|| Error::Npy("header lacks 'shape'".into()))?,
        })
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.chars.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Npy(format!("expected {c:?} at header offset {}", self.pos)))
        }
    }

    fn string(&mut self) -> Result<String> {
        self.skip_ws();
        let quote = match self.chars.get(self.pos) {
            Some(&q @ ('\'' | '"')) => q,
            _ => return Err(Error::Npy(format!("expected a string at offset {}", self.pos))),
        };
        self.pos += 1;
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|&c| c != quote) {
            self.pos += 1;
        }
        if self.pos >= self.chars.len() {
            return Err(Error::Npy("unterminated string in header".into()));
        }
        let s = self.chars[start..self.pos].iter().collect();
        self.pos += 1;
        Ok(s)
    }

    fn word(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_alphanumeric()) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn value(&mut self) -> Result<Value> {
        self.skip_ws();
        match self.chars.get(self.pos) {
            Some('\'' | '"') => self.string().map(Value::Str),
            Some('(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    if self.eat(')') {
                        break;
                    }
                    let w = self.word();
                    let d = w
                        .trim_end_matches('L')
                        .parse()
                        .map_err(|_| Error::Npy(format!("bad shape dimension {w:?}")))?;
                    dims.push(d);
                    if !self.eat(',') {
                        self.expect(')')?;
                        break;
                    }
                }
                Ok(Value::Tuple(dims))
            }
            _ => match self.word().as_str() {
                "True" => Ok(Value::Bool(true)),
                "False" => Ok(Value::Bool(false)),
                w => Err(Error::Npy(format!("unexpected token {w:?} in header"))),
            },
        }
    }
}

fn header_bytes(descr: &str, shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}");
    // magic + version + u16 length + dict + '\n' must land on the alignment.
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

/// Encodes a C-order u8 array.
pub fn encode_u8(shape: &[usize], data: &[u8]) -> Vec<u8> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let mut out = header_bytes("|u1", shape);
    out.extend_from_slice(data);
    out
}

/// Encodes a C-order little-endian f64 array.
pub fn encode_f64(shape: &[usize], data: &[f64]) -> Vec<u8> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let mut out = header_bytes("<f8", shape);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Encodes a C-order little-endian f32 array.
pub fn encode_f32(shape: &[usize], data: &[f32]) -> Vec<u8> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let mut out = header_bytes("<f4", shape);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
