//! Binary tensor files, proxy checkpoints, index lists, and number formatting.
//!
//! TensorFile layout (all integers little-endian):
//!
//! ```text
//! "KECF"  u16 version  u8 dtype  u8 rank  u64 dims[rank]  f64 payload[Π dims]  u32 crc32(payload)
//! ```
//!
//! The payload is column-major. Only dtype 1 (f64) is defined.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::proxy::{Activation, ProxyLayer, ProxyNetwork};

pub const MAGIC: [u8; 4] = *b"KECF";
pub const FORMAT_VERSION: u16 = 1;
pub const DTYPE_F64: u8 = 1;

/// Dense n-dimensional array in column-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = element_count(&dims)?;
        if len != data.len() {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Rank 2 maps directly; rank 1 becomes a single column; rank 0 a 1×1 matrix.
    pub fn into_matrix(self) -> Result<DenseMatrix> {
        let (rows, cols) = match self.dims[..] {
            [] => (1, 1),
            [r] => (r, 1),
            [r, c] => (r, c),
            _ => {
                return Err(Error::Malformed(format!(
                    "expected a matrix, got rank {}",
                    self.rank()
                )))
            }
        };
        DenseMatrix::new(rows, cols, self.data)
    }
}

impl From<&DenseMatrix> for Tensor {
    fn from(m: &DenseMatrix) -> Self {
        Self {
            dims: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        }
    }
}

fn element_count(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Malformed("tensor size overflows".into()))
}

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    let rank = u8::try_from(t.rank())
        .map_err(|_| Error::Malformed(format!("rank {} exceeds 255", t.rank())))?;
    let mut out = Vec::with_capacity(8 + 8 * t.dims.len() + 8 * t.data.len() + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(DTYPE_F64);
    out.push(rank);
    for &d in &t.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    let start = out.len();
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Decodes one record from the front of `bytes`, returning it and the number
/// of bytes consumed.
pub fn decode_tensor(bytes: &[u8]) -> Result<(Tensor, usize)> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let header = bytes
        .get(4..8)
        .ok_or_else(|| Error::Malformed("truncated header".into()))?;
    let version = u16::from_le_bytes([header[0], header[1]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if header[2] != DTYPE_F64 {
        return Err(Error::UnsupportedDtype(header[2]));
    }
    let rank = header[3] as usize;
    let mut pos = 8;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let raw = bytes
            .get(pos..pos + 8)
            .ok_or_else(|| Error::Malformed("truncated dimensions".into()))?;
        let d = u64::from_le_bytes(raw.try_into().expect("8 bytes"));
        dims.push(
            usize::try_from(d).map_err(|_| Error::Malformed(format!("dimension {d} too large")))?,
        );
        pos += 8;
    }
    let count = element_count(&dims)?;
    let payload_len = count
        .checked_mul(8)
        .ok_or_else(|| Error::Malformed("tensor size overflows".into()))?;
    let end = pos + payload_len;
    // a short payload or missing checksum cannot validate
    let payload = bytes.get(pos..end).ok_or(Error::BadCrc)?;
    let stored = bytes.get(end..end + 4).ok_or(Error::BadCrc)?;
    if crc32fast::hash(payload) != u32::from_le_bytes(stored.try_into().expect("4 bytes")) {
        return Err(Error::BadCrc);
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((Tensor { dims, data }, end + 4))
}

/// Decodes a file holding one or more consecutive records.
pub fn decode_tensors(mut bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (t, used) = decode_tensor(bytes)?;
        out.push(t);
        bytes = &bytes[used..];
    }
    Ok(out)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    write_all(path, &encode_tensor(t)?)
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = read_all(path)?;
    let (t, used) = decode_tensor(&bytes)?;
    if used != bytes.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after tensor",
            bytes.len() - used
        )));
    }
    Ok(t)
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_tensor(path, &Tensor::from(m))
}

/// Reads a matrix from a TensorFile, or from CSV when the extension is `.csv`.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        read_csv_matrix(path)
    } else {
        read_tensor(path)?.into_matrix()
    }
}

/// Headerless CSV with one sample per row, returned as `columns × rows`
/// (one matrix column per CSV row).
pub fn read_csv_matrix(path: &Path) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    let mut cols = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        let values = record
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::Malformed(format!(
                        "{}:{}: not a number: {s:?}",
                        path.display(),
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        cols.push(values);
    }
    if cols.is_empty() {
        return Err(Error::Malformed(format!("{}: no rows", path.display())));
    }
    DenseMatrix::from_columns(&cols)
}

/// One 0-based index per line; blank lines and `#` comments are skipped.
pub fn parse_indices(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<usize>()
                .map_err(|_| Error::Malformed(format!("bad index {l:?}")))
        })
        .collect()
}

pub fn read_indices(path: &Path) -> Result<Vec<usize>> {
    parse_indices(&std::fs::read_to_string(path)?)
}

pub fn format_indices(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

/// Formats like C's `%.{digits}g`: shortest of fixed or exponent notation
/// with trailing zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Proxy checkpoint: a meta record `[layer count, beta, activation code]`
/// followed by each layer's weight matrix and bias vector.
pub fn encode_proxy(net: &ProxyNetwork) -> Result<Vec<u8>> {
    let meta = Tensor::new(
        vec![3],
        vec![
            net.layers().len() as f64,
            net.beta(),
            net.activation().code() as f64,
        ],
    )?;
    let mut out = encode_tensor(&meta)?;
    for layer in net.layers() {
        out.extend(encode_tensor(&Tensor::from(&layer.weight))?);
        out.extend(encode_tensor(&Tensor::new(
            vec![layer.bias.len()],
            layer.bias.clone(),
        )?)?);
    }
    Ok(out)
}

pub fn decode_proxy(bytes: &[u8]) -> Result<ProxyNetwork> {
    let records = decode_tensors(bytes)?;
    let meta = records
        .first()
        .ok_or_else(|| Error::Malformed("empty checkpoint".into()))?;
    let [count, beta, code] = meta.data[..] else {
        return Err(Error::Malformed(
            "checkpoint meta record must hold 3 values".into(),
        ));
    };
    if count.fract() != 0.0 || count < 1.0 || records.len() != 1 + 2 * count as usize {
        return Err(Error::Malformed(format!(
            "checkpoint declares {count} layers but holds {} records",
            records.len()
        )));
    }
    let activation = (code.fract() == 0.0 && (0.0..=255.0).contains(&code))
        .then(|| Activation::from_code(code as u8))
        .flatten()
        .ok_or_else(|| Error::Malformed(format!("unknown activation code {code}")))?;
    let layers = records[1..]
        .chunks_exact(2)
        .map(|pair| {
            let weight = pair[0].clone().into_matrix()?;
            if pair[1].rank() != 1 {
                return Err(Error::Malformed("bias record must be rank 1".into()));
            }
            ProxyLayer::new(weight, pair[1].data.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    ProxyNetwork::new(layers, beta, activation)
}

pub fn write_proxy(path: &Path, net: &ProxyNetwork) -> Result<()> {
    write_all(path, &encode_proxy(net)?)
}

pub fn read_proxy(path: &Path) -> Result<ProxyNetwork> {
    decode_proxy(&read_all(path)?)
}
