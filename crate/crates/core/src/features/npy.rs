//! Minimal NPY (v1.0 written, v1.0–v3.0 read) support for `f32` arrays.
//!
//! Only little-endian `float32` in C order is a first-class dtype. Byte and
//! bool arrays (`|u1`, `|b1`) are also accepted on read, for binary masks,
//! and widened to `f32`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGNMENT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }
}

#[derive(Debug, PartialEq)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parser for the Python dict literal in an NPY header.
struct HeaderParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl HeaderParser<'_> {
    fn malformed(&self, what: &str) -> Error {
        Error::MalformedHeader(format!("{what} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.malformed(&format!("expected '{}'", c as char)))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = self.peek().ok_or_else(|| self.malformed("expected string"))?;
        if quote != b'\'' && quote != b'"' {
            return Err(self.malformed("expected quoted string"));
        }
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Err(self.malformed("unterminated string"));
        }
        let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(s)
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        // Python 2 era writers emit long literals such as `3L`.
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if self.src.get(self.pos) == Some(&b'L') {
            self.pos += 1;
        }
        digits.parse().map_err(|_| self.malformed("expected integer"))
    }

    fn value(&mut self) -> Result<Literal> {
        match self.peek() {
            Some(b'\'') | Some(b'"') => Ok(Literal::Str(self.string()?)),
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        Some(b',') => self.pos += 1,
                        Some(_) => dims.push(self.integer()?),
                        None => return Err(self.malformed("unterminated tuple")),
                    }
                }
                Ok(Literal::Tuple(dims))
            }
            Some(_) => {
                let rest = &self.src[self.pos..];
                if rest.starts_with(b"True") {
                    self.pos += 4;
                    Ok(Literal::Bool(true))
                } else if rest.starts_with(b"False") {
                    self.pos += 5;
                    Ok(Literal::Bool(false))
                } else {
                    Err(self.malformed("unsupported literal"))
                }
            }
            None => Err(self.malformed("expected value")),
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>> {
        self.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            match self.peek() {
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(entries);
                }
                Some(b',') => self.pos += 1,
                Some(_) => {
                    let key = self.string()?;
                    self.expect(b':')?;
                    let value = self.value()?;
                    entries.push((key, value));
                }
                None => return Err(self.malformed("unterminated dict")),
            }
        }
    }
}

enum Dtype {
    F32,
    Byte,
}

/// Decodes an NPY byte buffer.
pub fn parse_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::MalformedHeader("missing NPY magic".into()));
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            let raw = bytes
                .get(8..12)
                .ok_or_else(|| Error::MalformedHeader("truncated preamble".into()))?;
            (u32::from_le_bytes(raw.try_into().expect("4 bytes")) as usize, 12)
        }
        v => return Err(Error::MalformedHeader(format!("unsupported NPY version {v}"))),
    };
    let header = bytes
        .get(header_start..header_start + header_len)
        .ok_or_else(|| Error::MalformedHeader("truncated header".into()))?;
    let entries = HeaderParser { src: header, pos: 0 }.dict()?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    for (key, value) in entries {
        match (key.as_str(), value) {
            ("descr", Literal::Str(s)) => descr = Some(s),
            ("fortran_order", Literal::Bool(b)) => fortran = Some(b),
            ("shape", Literal::Tuple(t)) => shape = Some(t),
            (k, _) => return Err(Error::MalformedHeader(format!("unexpected entry {k:?}"))),
        }
    }
    let descr = descr.ok_or_else(|| Error::MalformedHeader("missing 'descr'".into()))?;
    let fortran = fortran.ok_or_else(|| Error::MalformedHeader("missing 'fortran_order'".into()))?;
    let shape = shape.ok_or_else(|| Error::MalformedHeader("missing 'shape'".into()))?;

    let dtype = match descr.as_str() {
        "<f4" => Dtype::F32,
        "|u1" | "|b1" | "u1" | "b1" => Dtype::Byte,
        _ => return Err(Error::UnsupportedDtype(descr)),
    };
    if fortran {
        return Err(Error::UnsupportedOrder);
    }

    let count: usize = shape.iter().product();
    let body = &bytes[header_start + header_len..];
    let data = match dtype {
        Dtype::F32 => {
            if body.len() != count * 4 {
                return Err(Error::MalformedHeader(format!(
                    "data section is {} bytes, shape {shape:?} needs {}",
                    body.len(),
                    count * 4
                )));
            }
            body.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect()
        }
        Dtype::Byte => {
            if body.len() != count {
                return Err(Error::MalformedHeader(format!(
                    "data section is {} bytes, shape {shape:?} needs {count}",
                    body.len()
                )));
            }
            body.iter().map(|&b| f32::from(b)).collect()
        }
    };
    Ok(NpyArray { shape, data })
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<NpyArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_npy(&bytes)
}

/// Encodes a `<f4`, C-order, NPY v1.0 buffer.
pub fn npy_bytes(shape: &[usize], data: &[f32]) -> Vec<u8> {
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': {dims}, }}");
    // Pad with spaces so the data section starts on an aligned offset; the
    // header ends in a newline.
    let unpadded = MAGIC.len() + 4 + header.len() + 1;
    let padding = (ALIGNMENT - unpadded % ALIGNMENT) % ALIGNMENT;
    header.push_str(&" ".repeat(padding));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_npy(path: impl AsRef<Path>, shape: &[usize], data: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "shape {shape:?} needs {expected} values, got {}",
            data.len()
        )));
    }
    fs::write(path, npy_bytes(shape, data)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_header(header: &str, body: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(body);
        out
    }

    #[test]
    fn header_is_aligned_and_parseable() {
        let bytes = npy_bytes(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + header_len) % ALIGNMENT, 0);
        assert_eq!(bytes[10 + header_len - 1], b'\n');
        let arr = parse_npy(&bytes).unwrap();
        assert_eq!(arr.shape, vec![2, 3]);
        assert_eq!(arr.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn one_dimensional_shape_uses_trailing_comma() {
        let bytes = npy_bytes(&[3], &[0.0; 3]);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("'shape': (3,)"));
        assert_eq!(parse_npy(&bytes).unwrap().shape, vec![3]);
    }

    #[test]
    fn big_endian_is_unsupported() {
        let bytes = with_header("{'descr': '>f4', 'fortran_order': False, 'shape': (1,), }\n", &[0; 4]);
        assert!(matches!(parse_npy(&bytes), Err(Error::UnsupportedDtype(d)) if d == ">f4"));
    }

    #[test]
    fn float64_is_unsupported() {
        let bytes = with_header("{'descr': '<f8', 'fortran_order': False, 'shape': (1,), }\n", &[0; 8]);
        assert!(matches!(parse_npy(&bytes), Err(Error::UnsupportedDtype(_))));
    }

    #[test]
    fn fortran_order_is_unsupported() {
        let bytes = with_header("{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }\n", &[0; 4]);
        assert!(matches!(parse_npy(&bytes), Err(Error::UnsupportedOrder)));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(parse_npy(b"not an npy"), Err(Error::MalformedHeader(_))));
        let missing = with_header("{'descr': '<f4', 'shape': (1,), }\n", &[0; 4]);
        assert!(matches!(parse_npy(&missing), Err(Error::MalformedHeader(_))));
        let short = with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }\n", &[0; 4]);
        assert!(matches!(parse_npy(&short), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn byte_masks_are_widened() {
        let bytes = with_header("{'descr': '|u1', 'fortran_order': False, 'shape': (2, 2), }\n", &[0, 1, 1, 0]);
        assert_eq!(parse_npy(&bytes).unwrap().data, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn double_quoted_keys_and_scalar_shape() {
        let bytes = with_header(r#"{"descr": "<f4", "fortran_order": False, "shape": ()}"#, &1.5f32.to_le_bytes());
        let arr = parse_npy(&bytes).unwrap();
        assert!(arr.shape.is_empty());
        assert_eq!(arr.data, vec![1.5]);
    }
}
