//! Matrix file formats: Matrix Market arrays, a raw little-endian `f64`
//! container, and binary PPM images with channels stacked vertically.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use lowrank_core::matrix::DenseMatrix;

use crate::synthetic::RgbImage;

/// Magic bytes opening a RawF64 file.
pub const RAW_MAGIC: &[u8; 4] = b"SKLR";
pub const RAW_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    MatrixMarketArray,
    /// `"SKLR"`, `u32` rows, `u32` cols, `u32` reserved (zero), then the
    /// entries column by column as little-endian `f64`.
    RawF64,
    /// Binary PPM (P6). An `h x w` image becomes a `3h x w` matrix with
    /// the R, G and B planes stacked top to bottom.
    Ppm,
}

impl MatrixFormat {
    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "mm" | "mtx" | "matrix-market" => Some(Self::MatrixMarketArray),
            "raw" | "raw-f64" | "bin" => Some(Self::RawF64),
            "ppm" => Some(Self::Ppm),
            _ => None,
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        Self::from_label(&path.extension()?.to_str()?.to_ascii_lowercase())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("cannot write as {format:?}: {message}")]
    Unrepresentable { format: MatrixFormat, message: String },
}

fn bad(offset: usize, message: impl Into<String>) -> IoError {
    IoError::Format {
        offset,
        message: message.into(),
    }
}

fn checked_len(rows: usize, cols: usize, offset: usize) -> Result<usize, IoError> {
    rows.checked_mul(cols)
        .filter(|&n| n.checked_mul(8).is_some())
        .ok_or_else(|| bad(offset, format!("dimensions {rows}x{cols} overflow")))
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DenseMatrix, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix(&bytes, format)
}

pub fn parse_matrix(bytes: &[u8], format: MatrixFormat) -> Result<DenseMatrix, IoError> {
    match format {
        MatrixFormat::MatrixMarketArray => parse_matrix_market(bytes),
        MatrixFormat::RawF64 => parse_raw(bytes),
        MatrixFormat::Ppm => parse_ppm(bytes).map(|img| image_to_matrix(&img)),
    }
}

pub fn save_matrix(path: &Path, a: &DenseMatrix, format: MatrixFormat) -> Result<(), IoError> {
    let bytes = encode_matrix(a, format)?;
    let io_err = |source| IoError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    f.write_all(&bytes).map_err(io_err)?;
    f.flush().map_err(io_err)
}

pub fn encode_matrix(a: &DenseMatrix, format: MatrixFormat) -> Result<Vec<u8>, IoError> {
    match format {
        MatrixFormat::MatrixMarketArray => Ok(encode_matrix_market(a)),
        MatrixFormat::RawF64 => encode_raw(a),
        MatrixFormat::Ppm => Ok(encode_ppm(&matrix_to_image(a)?)),
    }
}

/// Whitespace-separated tokens with their starting byte offsets.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8], pos: usize) -> Self {
        Self { bytes, pos }
    }

    /// Skips whitespace and, when `comment` is given, lines starting with it.
    fn skip(&mut self, comment: Option<u8>) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if Some(c) == comment {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next(&mut self, comment: Option<u8>) -> Option<(usize, &'a str)> {
        self.skip(comment);
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        core::str::from_utf8(&self.bytes[start..self.pos]).ok().map(|t| (start, t))
    }

    fn expect<T: std::str::FromStr>(&mut self, what: &str, comment: Option<u8>) -> Result<(usize, T), IoError> {
        self.skip(comment);
        let at = self.pos;
        let (off, tok) = self.next(comment).ok_or_else(|| bad(at, format!("unexpected end of data, expected {what}")))?;
        tok.parse().map(|v| (off, v)).map_err(|_| bad(off, format!("expected {what}, found {tok:?}")))
    }
}

fn parse_matrix_market(bytes: &[u8]) -> Result<DenseMatrix, IoError> {
    let line_end = bytes.iter().position(|&c| c == b'\n').unwrap_or(bytes.len());
    let banner = core::str::from_utf8(&bytes[..line_end]).map_err(|_| bad(0, "banner is not UTF-8"))?;
    let fields: Vec<String> = banner.split_whitespace().map(|f| f.to_ascii_lowercase()).collect();
    if fields.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(bad(0, "missing %%MatrixMarket banner"));
    }
    match fields.get(1..5) {
        Some([obj, layout, field, sym]) if obj == "matrix" && layout == "array" && field == "real" && sym == "general" => {}
        _ => return Err(bad(0, format!("unsupported header {banner:?}; only 'matrix array real general' is read"))),
    }
    let mut toks = Tokens::new(bytes, line_end);
    let (_, rows) = toks.expect::<usize>("row count", Some(b'%'))?;
    let (off, cols) = toks.expect::<usize>("column count", Some(b'%'))?;
    let len = checked_len(rows, cols, off)?;
    let mut data = Vec::with_capacity(len.min(bytes.len()));
    for _ in 0..len {
        let (off, v) = toks.expect::<f64>("matrix entry", Some(b'%'))?;
        if !v.is_finite() {
            return Err(bad(off, "non-finite entry"));
        }
        data.push(v);
    }
    if let Some((off, tok)) = toks.next(Some(b'%')) {
        return Err(bad(off, format!("trailing data {tok:?} after {len} entries")));
    }
    Ok(DenseMatrix::from_col_major(rows, cols, data).expect("length checked"))
}

fn encode_matrix_market(a: &DenseMatrix) -> Vec<u8> {
    let mut out = format!("%%MatrixMarket matrix array real general\n{} {}\n", a.rows(), a.cols()).into_bytes();
    for v in a.as_slice() {
        // `{:?}` prints the shortest string that round-trips
        writeln!(out, "{v:?}").expect("writing to a Vec");
    }
    out
}

fn parse_raw(bytes: &[u8]) -> Result<DenseMatrix, IoError> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err(bad(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err(bad(0, "bad magic, expected \"SKLR\""));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let len = checked_len(rows, cols, 4)?;
    let expected = RAW_HEADER_LEN + len * 8;
    if bytes.len() < expected {
        return Err(bad(bytes.len(), format!("truncated payload: {rows}x{cols} needs {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(bad(expected, "trailing bytes after payload"));
    }
    let data = bytes[RAW_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseMatrix::from_col_major(rows, cols, data).map_err(|e| bad(RAW_HEADER_LEN, e.to_string()))
}

fn encode_raw(a: &DenseMatrix) -> Result<Vec<u8>, IoError> {
    let dim = |d: usize| {
        u32::try_from(d).map_err(|_| IoError::Unrepresentable {
            format: MatrixFormat::RawF64,
            message: format!("dimension {d} exceeds u32"),
        })
    };
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + a.as_slice().len() * 8);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&dim(a.rows())?.to_le_bytes());
    out.extend_from_slice(&dim(a.cols())?.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in a.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses a P6 image; samples wider than one byte are rescaled to `0..=255`.
pub fn parse_ppm(bytes: &[u8]) -> Result<RgbImage, IoError> {
    if !bytes.starts_with(b"P6") {
        return Err(bad(0, "bad magic, expected P6"));
    }
    let mut toks = Tokens::new(bytes, 2);
    let (_, width) = toks.expect::<usize>("width", Some(b'#'))?;
    let (_, height) = toks.expect::<usize>("height", Some(b'#'))?;
    let (off, maxval) = toks.expect::<u32>("maxval", Some(b'#'))?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad(off, format!("maxval {maxval} outside 1..=65535")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = toks.pos + 1;
    if toks.pos >= bytes.len() || !bytes[toks.pos].is_ascii_whitespace() {
        return Err(bad(toks.pos, "missing whitespace after maxval"));
    }
    let sample = if maxval < 256 { 1 } else { 2 };
    let count = checked_len(height, width, off)?
        .checked_mul(3 * sample)
        .ok_or_else(|| bad(off, "image size overflows"))?;
    let end = start.checked_add(count).ok_or_else(|| bad(off, "image size overflows"))?;
    if bytes.len() < end {
        return Err(bad(bytes.len(), format!("truncated raster: {width}x{height} needs {count} bytes")));
    }
    let raster = &bytes[start..end];
    let pixels = if sample == 1 && maxval == 255 {
        raster.to_vec()
    } else {
        let scale = 255.0 / maxval as f64;
        raster
            .chunks_exact(sample)
            .map(|c| {
                let v = if sample == 1 { c[0] as u32 } else { u16::from_be_bytes([c[0], c[1]]) as u32 };
                (v.min(maxval) as f64 * scale).round() as u8
            })
            .collect()
    };
    Ok(RgbImage { height, width, pixels })
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn save_ppm(path: &Path, img: &RgbImage) -> Result<(), IoError> {
    fs::write(path, encode_ppm(img)).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Stacks the R, G and B planes of an `h x w` image into a `3h x w` matrix.
pub fn image_to_matrix(img: &RgbImage) -> DenseMatrix {
    let (h, w) = (img.height, img.width);
    DenseMatrix::from_fn(3 * h, w, |i, j| {
        let (c, y) = (i / h, i % h);
        img.pixels[(y * w + j) * 3 + c] as f64
    })
}

/// Inverse of [`image_to_matrix`]; entries are rounded and clipped to `0..=255`.
pub fn matrix_to_image(a: &DenseMatrix) -> Result<RgbImage, IoError> {
    if !a.rows().is_multiple_of(3) {
        return Err(IoError::Unrepresentable {
            format: MatrixFormat::Ppm,
            message: format!("{} rows is not a multiple of 3", a.rows()),
        });
    }
    let (h, w) = (a.rows() / 3, a.cols());
    let mut pixels = vec![0u8; h * w * 3];
    for j in 0..w {
        for (i, v) in a.col(j).iter().enumerate() {
            let (c, y) = (i / h, i % h);
            pixels[(y * w + j) * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(RgbImage { height: h, width: w, pixels })
}
