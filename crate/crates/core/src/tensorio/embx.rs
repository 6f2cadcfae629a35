//! The EMBX matrix container.
//!
//! Layout: the 4 magic bytes `EMBX`, a little-endian `u32` header length,
//! that many bytes of UTF-8 header, then the row-major little-endian
//! payload. The header is newline-separated `key=value` lines in a fixed
//! order:
//!
//! ```text
//! version=1
//! rows=<R>
//! cols=<C>
//! dtype=f32|f64
//! role=input|output|tied|unknown
//! tokens=none|<R>
//! <token 0>
//! ...
//! <token R-1>
//! ```
//!
//! Token labels are newline-joined after the `tokens=` line and compared by
//! exact byte equality.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{validate_tokens, Dtype, EmbeddingMatrix, Role};

pub const MAGIC: &[u8; 4] = b"EMBX";
const VERSION: u32 = 1;

pub fn encode_matrix(m: &EmbeddingMatrix) -> Result<Vec<u8>> {
    m.check_finite()?;
    let mut header = format!(
        "version={VERSION}\nrows={}\ncols={}\ndtype={}\nrole={}\n",
        m.rows(),
        m.cols(),
        m.dtype.as_str(),
        m.role.as_str()
    );
    match m.tokens() {
        None => header.push_str("tokens=none"),
        Some(tokens) => {
            header.push_str(&format!("tokens={}", tokens.len()));
            for t in tokens {
                header.push('\n');
                header.push_str(t);
            }
        }
    }
    let header_len = u32::try_from(header.len())
        .map_err(|_| Error::BadHeader("header exceeds 4 GiB".into()))?;

    let mut out = Vec::with_capacity(8 + header.len() + m.data().len() * m.dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match m.dtype {
        Dtype::F64 => {
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::F32 => {
            for v in m.data() {
                let narrow = *v as f32;
                if !narrow.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "value {v} overflows f32"
                    )));
                }
                out.extend_from_slice(&narrow.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    if bytes.len() < 8 {
        return Err(Error::BadHeader("file shorter than fixed preamble".into()));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let header_end = 8 + header_len;
    if bytes.len() < header_end {
        return Err(Error::BadHeader("header extends past end of file".into()));
    }
    let header = std::str::from_utf8(&bytes[8..header_end])
        .map_err(|e| Error::BadHeader(format!("header is not UTF-8: {e}")))?;
    let parsed = parse_header(header)?;

    let expected = parsed
        .rows
        .checked_mul(parsed.cols)
        .and_then(|n| n.checked_mul(parsed.dtype.size()))
        .ok_or_else(|| Error::BadHeader("declared shape overflows".into()))?;
    let payload = &bytes[header_end..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::Shape(format!(
            "payload holds {} bytes but header declares {expected}",
            payload.len()
        )));
    }

    let data: Vec<f64> = match parsed.dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    let mut m = EmbeddingMatrix::new(parsed.rows, parsed.cols, data)?
        .with_dtype(parsed.dtype)
        .with_role(parsed.role);
    if let Some(tokens) = parsed.tokens {
        m = m.with_tokens(tokens)?;
    }
    Ok(m)
}

struct Header {
    rows: usize,
    cols: usize,
    dtype: Dtype,
    role: Role,
    tokens: Option<Vec<String>>,
}

fn parse_header(header: &str) -> Result<Header> {
    let mut lines = header.split('\n');
    let mut field = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::BadHeader(format!("missing `{key}` line")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .map(str::to_owned)
            .ok_or_else(|| Error::BadHeader(format!("expected `{key}=`, found {line:?}")))
    };
    let count = |key: &str, v: String| -> Result<usize> {
        v.parse()
            .map_err(|_| Error::BadHeader(format!("`{key}` is not a count: {v:?}")))
    };

    let version = field("version")?;
    if version != VERSION.to_string() {
        return Err(Error::BadHeader(format!("unsupported version {version}")));
    }
    let rows = count("rows", field("rows")?)?;
    let cols = count("cols", field("cols")?)?;
    let dtype_s = field("dtype")?;
    let dtype = Dtype::parse(&dtype_s)
        .ok_or_else(|| Error::BadHeader(format!("unknown dtype {dtype_s:?}")))?;
    let role_s = field("role")?;
    let role = Role::parse(&role_s)
        .ok_or_else(|| Error::BadHeader(format!("unknown role {role_s:?}")))?;
    let tokens_s = field("tokens")?;

    let tokens = if tokens_s == "none" {
        if lines.next().is_some() {
            return Err(Error::BadHeader("trailing header content".into()));
        }
        None
    } else {
        let n = count("tokens", tokens_s)?;
        let tokens: Vec<String> = if n == 0 {
            Vec::new()
        } else {
            lines.map(str::to_owned).collect()
        };
        if tokens.len() != n {
            return Err(Error::BadHeader(format!(
                "header declares {n} tokens but holds {}",
                tokens.len()
            )));
        }
        validate_tokens(&tokens, rows).map_err(|e| Error::BadHeader(e.to_string()))?;
        Some(tokens)
    };
    Ok(Header {
        rows,
        cols,
        dtype,
        role,
        tokens,
    })
}

/// Writes `m` to `path`. Rejects non-finite entries.
pub fn write_matrix(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_matrix(m)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    decode_matrix(&bytes)
}
