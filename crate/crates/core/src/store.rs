//! Single-file tensor container (safetensors layout).
//!
//! ```text
//! [0..8)        u64 little-endian N, the header byte length
//! [8..8+N)      UTF-8 JSON: name -> {"dtype", "shape", "data_offsets": [begin, end]}
//!               plus an optional "__metadata__" object of string -> string
//! [8+N..)       data section; offsets are relative to its start
//! ```
//!
//! Writers emit tensors in lexicographic name order with contiguous ascending
//! ranges and pad the header with spaces to a multiple of 8 bytes. Readers
//! accept any header length and any non-overlapping in-bounds layout.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde_json::Value;
use thiserror::Error;

use crate::dtype::{decode_into, Dtype};
use crate::json::OrderedObject;

pub const METADATA_KEY: &str = "__metadata__";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("I/O error on {}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("header is not valid UTF-8")]
    HeaderUtf8,
    #[error("header is not valid JSON: {0}")]
    HeaderJson(String),
    #[error("invalid header entry `{name}`: {reason}")]
    InvalidEntry { name: String, reason: String },
    #[error("unknown dtype `{dtype}` for tensor `{name}`")]
    UnknownDtype { name: String, dtype: String },
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("tensors `{first}` and `{second}` have overlapping byte ranges")]
    Overlap { first: String, second: String },
    #[error("tensor `{name}` byte range {begin}..{end} lies outside the {len}-byte data section")]
    OutOfBounds { name: String, begin: usize, end: usize, len: usize },
    #[error("tensor `{name}`: expected {expected} bytes, found {found}")]
    LengthMismatch { name: String, expected: usize, found: usize },
    #[error("invalid tensor name `{0}`")]
    InvalidName(String),
    #[error("tensor `{0}` not found")]
    MissingTensor(String),
    #[error("data section size mismatch: layout needs {expected} bytes, {found} were written")]
    DataSize { expected: usize, found: usize },
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

fn numel(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

fn byte_len(dtype: Dtype, shape: &[usize]) -> Option<usize> {
    numel(shape)?.checked_mul(dtype.size())
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name == METADATA_KEY {
        return Err(StoreError::InvalidName(name.to_string()));
    }
    Ok(())
}

/// Header description of one tensor in a container file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorMeta {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Half-open range into the data section.
    pub byte_range: Range<usize>,
}

impl TensorMeta {
    pub fn numel(&self) -> usize {
        numel(&self.shape).unwrap_or(0)
    }

    pub fn byte_len(&self) -> usize {
        self.byte_range.end - self.byte_range.start
    }
}

/// Decodes a tensor's raw bytes to `f32`.
pub fn tensor_as_f32(meta: &TensorMeta, bytes: &[u8]) -> Result<Vec<f32>> {
    let expected = meta.numel() * meta.dtype.size();
    if bytes.len() != expected || meta.byte_len() != expected {
        return Err(StoreError::LengthMismatch {
            name: meta.name.clone(),
            expected,
            found: bytes.len(),
        });
    }
    let mut out = vec![0.0f32; meta.numel()];
    decode_into(meta.dtype, bytes, &mut out);
    Ok(out)
}

/// An owned tensor: dtype, shape and little-endian element bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    dtype: Dtype,
    shape: Vec<usize>,
    data: Vec<u8>,
}

impl Tensor {
    pub fn new(dtype: Dtype, shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        let expected = byte_len(dtype, &shape).ok_or_else(|| StoreError::InvalidEntry {
            name: String::new(),
            reason: format!("shape {shape:?} overflows"),
        })?;
        if data.len() != expected {
            return Err(StoreError::LengthMismatch {
                name: String::new(),
                expected,
                found: data.len(),
            });
        }
        Ok(Tensor { dtype, shape, data })
    }

    /// Encodes `values` as `dtype`.
    pub fn from_f32(dtype: Dtype, shape: Vec<usize>, values: &[f32]) -> Result<Self> {
        Tensor::new(dtype, shape, crate::dtype::f32_to_dtype(values, dtype))
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len() / self.dtype.size()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        let mut out = vec![0.0f32; self.numel()];
        decode_into(self.dtype, &self.data, &mut out);
        out
    }
}

/// A named, ordered collection of tensors plus string metadata.
///
/// Equality ignores tensor order; the file writer always sorts by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Checkpoint {
    tensors: IndexMap<String, Tensor>,
    metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        check_name(&name)?;
        if self.tensors.contains_key(&name) {
            return Err(StoreError::DuplicateName(name));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    /// Sum of all tensors' data bytes.
    pub fn data_len(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }
}

/// Read access to named tensors, either in memory or on disk.
///
/// Implementations are immutable, so concurrent reads are safe.
pub trait TensorSource: Sync {
    fn tensor_names(&self) -> Vec<&str>;

    fn tensor_info(&self, name: &str) -> Option<(Dtype, &[usize])>;

    /// Fills `buf` with the tensor's bytes starting at byte `offset`.
    fn read_bytes(&self, name: &str, offset: usize, buf: &mut [u8]) -> Result<()>;
}

impl TensorSource for Checkpoint {
    fn tensor_names(&self) -> Vec<&str> {
        self.names().collect()
    }

    fn tensor_info(&self, name: &str) -> Option<(Dtype, &[usize])> {
        self.tensors.get(name).map(|t| (t.dtype, t.shape.as_slice()))
    }

    fn read_bytes(&self, name: &str, offset: usize, buf: &mut [u8]) -> Result<()> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| StoreError::MissingTensor(name.to_string()))?;
        let src = offset
            .checked_add(buf.len())
            .and_then(|end| t.data.get(offset..end))
            .ok_or_else(|| StoreError::OutOfBounds {
                name: name.to_string(),
                begin: offset,
                end: offset.saturating_add(buf.len()),
                len: t.data.len(),
            })?;
        buf.copy_from_slice(src);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub tensors: Vec<TensorMeta>,
    pub metadata: BTreeMap<String, String>,
}

fn invalid(name: &str, reason: impl Into<String>) -> StoreError {
    StoreError::InvalidEntry {
        name: name.to_string(),
        reason: reason.into(),
    }
}

fn parse_entry(name: &str, value: &Value) -> Result<TensorMeta> {
    let obj = value
        .as_object()
        .ok_or_else(|| invalid(name, "expected an object"))?;
    let dtype_tag = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid(name, "missing string field `dtype`"))?;
    let dtype: Dtype = dtype_tag.parse().map_err(|_| StoreError::UnknownDtype {
        name: name.to_string(),
        dtype: dtype_tag.to_string(),
    })?;
    let shape = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| invalid(name, "missing array field `shape`"))?
        .iter()
        .map(|d| d.as_u64().and_then(|d| usize::try_from(d).ok()))
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| invalid(name, "shape entries must be non-negative integers"))?;
    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| invalid(name, "`data_offsets` must be a [begin, end] pair"))?;
    let begin = offsets[0]
        .as_u64()
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| invalid(name, "bad begin offset"))?;
    let end = offsets[1]
        .as_u64()
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| invalid(name, "bad end offset"))?;
    if begin > end {
        return Err(invalid(name, format!("begin {begin} > end {end}")));
    }
    let expected = byte_len(dtype, &shape).ok_or_else(|| invalid(name, "shape overflows"))?;
    if end - begin != expected {
        return Err(StoreError::LengthMismatch {
            name: name.to_string(),
            expected,
            found: end - begin,
        });
    }
    Ok(TensorMeta {
        name: name.to_string(),
        dtype,
        shape,
        byte_range: begin..end,
    })
}

impl Header {
    /// Parses and validates header bytes against a data section of
    /// `data_len` bytes.
    pub fn parse(bytes: &[u8], data_len: usize) -> Result<Header> {
        let text = std::str::from_utf8(bytes).map_err(|_| StoreError::HeaderUtf8)?;
        let obj: OrderedObject =
            serde_json::from_str(text).map_err(|e| StoreError::HeaderJson(e.to_string()))?;
        if let Some(dup) = obj.first_duplicate() {
            return Err(StoreError::DuplicateName(dup.to_string()));
        }

        let mut tensors = Vec::with_capacity(obj.0.len());
        let mut metadata = BTreeMap::new();
        for (name, value) in &obj.0 {
            if name == METADATA_KEY {
                let map = value
                    .as_object()
                    .ok_or_else(|| invalid(name, "expected an object"))?;
                for (k, v) in map {
                    let v = v
                        .as_str()
                        .ok_or_else(|| invalid(name, format!("value of `{k}` is not a string")))?;
                    metadata.insert(k.clone(), v.to_string());
                }
                continue;
            }
            if name.is_empty() {
                return Err(StoreError::InvalidName(String::new()));
            }
            tensors.push(parse_entry(name, value)?);
        }

        for t in &tensors {
            if t.byte_range.end > data_len {
                return Err(StoreError::OutOfBounds {
                    name: t.name.clone(),
                    begin: t.byte_range.start,
                    end: t.byte_range.end,
                    len: data_len,
                });
            }
        }

        let mut by_start: Vec<&TensorMeta> =
            tensors.iter().filter(|t| t.byte_len() > 0).collect();
        by_start.sort_by_key(|t| (t.byte_range.start, t.byte_range.end));
        for pair in by_start.windows(2) {
            if pair[1].byte_range.start < pair[0].byte_range.end {
                return Err(StoreError::Overlap {
                    first: pair[0].name.clone(),
                    second: pair[1].name.clone(),
                });
            }
        }

        Ok(Header { tensors, metadata })
    }

    /// Serializes the header, padded with spaces to a multiple of 8 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::from("{");
        let mut first = true;
        let mut sep = |out: &mut String| {
            if !first {
                out.push(',');
            }
            first = false;
        };
        if !self.metadata.is_empty() {
            sep(&mut out);
            out.push_str(&serde_json::to_string(METADATA_KEY).unwrap());
            out.push(':');
            out.push_str(&serde_json::to_string(&self.metadata).unwrap());
        }
        for t in &self.tensors {
            sep(&mut out);
            out.push_str(&serde_json::to_string(&t.name).unwrap());
            out.push_str(":{\"dtype\":\"");
            out.push_str(t.dtype.as_str());
            out.push_str("\",\"shape\":");
            out.push_str(&serde_json::to_string(&t.shape).unwrap());
            out.push_str(&format!(
                ",\"data_offsets\":[{},{}]}}",
                t.byte_range.start, t.byte_range.end
            ));
        }
        out.push('}');
        let mut bytes = out.into_bytes();
        let padded = bytes.len().div_ceil(8) * 8;
        bytes.resize(padded, b' ');
        bytes
    }

    /// Lays out `specs` in name order with contiguous ranges starting at 0.
    pub fn layout(
        mut specs: Vec<(String, Dtype, Vec<usize>)>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Header> {
        specs.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in specs.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(StoreError::DuplicateName(pair[0].0.clone()));
            }
        }
        let mut offset = 0usize;
        let mut tensors = Vec::with_capacity(specs.len());
        for (name, dtype, shape) in specs {
            check_name(&name)?;
            let len = byte_len(dtype, &shape).ok_or_else(|| invalid(&name, "shape overflows"))?;
            let end = offset
                .checked_add(len)
                .ok_or_else(|| invalid(&name, "data section overflows"))?;
            tensors.push(TensorMeta {
                name,
                dtype,
                shape,
                byte_range: offset..end,
            });
            offset = end;
        }
        Ok(Header { tensors, metadata })
    }

    pub fn data_len(&self) -> usize {
        self.tensors.iter().map(|t| t.byte_range.end).max().unwrap_or(0)
    }
}

#[cfg(unix)]
fn read_exact_at(file: &File, buf: &mut [u8], offset: u64) -> io::Result<()> {
    use std::os::unix::fs::FileExt;
    file.read_exact_at(buf, offset)
}

#[cfg(windows)]
fn read_exact_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        match file.seek_read(buf, offset)? {
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => {
                buf = &mut buf[n..];
                offset += n as u64;
            }
        }
    }
    Ok(())
}

/// An opened container file. Tensor bytes are read on demand with
/// positioned reads, so the handle can be shared between threads.
#[derive(Debug)]
pub struct CheckpointFile {
    file: File,
    path: PathBuf,
    header: Header,
    index: HashMap<String, usize>,
    data_start: u64,
}

impl CheckpointFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| StoreError::File {
            path: path.clone(),
            source,
        };
        let mut file = File::open(&path).map_err(io_err)?;
        let file_len = file.metadata().map_err(io_err)?.len();

        let mut prefix = [0u8; 8];
        if file_len < 8 {
            return Err(StoreError::Truncated(format!(
                "{file_len} bytes is shorter than the 8-byte length prefix"
            )));
        }
        file.read_exact(&mut prefix).map_err(io_err)?;
        let header_len = u64::from_le_bytes(prefix);
        if header_len > file_len - 8 {
            return Err(StoreError::Truncated(format!(
                "header declares {header_len} bytes but only {} follow",
                file_len - 8
            )));
        }
        let mut header_bytes = vec![0u8; header_len as usize];
        file.read_exact(&mut header_bytes).map_err(io_err)?;
        let data_len = (file_len - 8 - header_len) as usize;
        let header = match Header::parse(&header_bytes, data_len) {
            Err(StoreError::OutOfBounds { name, end, len, .. }) => {
                return Err(StoreError::Truncated(format!(
                    "tensor `{name}` ends at data byte {end} but the data section has {len}"
                )))
            }
            other => other?,
        };
        let index = header
            .tensors
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.clone(), i))
            .collect();
        Ok(CheckpointFile {
            file,
            path,
            header,
            index,
            data_start: 8 + header_len,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn tensors(&self) -> &[TensorMeta] {
        &self.header.tensors
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.header.metadata
    }

    pub fn meta(&self, name: &str) -> Option<&TensorMeta> {
        self.index.get(name).map(|&i| &self.header.tensors[i])
    }

    pub fn read_tensor(&self, name: &str) -> Result<Vec<u8>> {
        let meta = self
            .meta(name)
            .ok_or_else(|| StoreError::MissingTensor(name.to_string()))?;
        let mut buf = vec![0u8; meta.byte_len()];
        self.read_bytes(name, 0, &mut buf)?;
        Ok(buf)
    }

    /// Reads every tensor into memory, in header order.
    pub fn load(&self) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new();
        for meta in &self.header.tensors {
            let data = self.read_tensor(&meta.name)?;
            let tensor = Tensor {
                dtype: meta.dtype,
                shape: meta.shape.clone(),
                data,
            };
            ckpt.insert(meta.name.clone(), tensor)?;
        }
        ckpt.metadata = self.header.metadata.clone();
        Ok(ckpt)
    }
}

impl TensorSource for CheckpointFile {
    fn tensor_names(&self) -> Vec<&str> {
        self.header.tensors.iter().map(|t| t.name.as_str()).collect()
    }

    fn tensor_info(&self, name: &str) -> Option<(Dtype, &[usize])> {
        self.meta(name).map(|m| (m.dtype, m.shape.as_slice()))
    }

    fn read_bytes(&self, name: &str, offset: usize, buf: &mut [u8]) -> Result<()> {
        let meta = self
            .meta(name)
            .ok_or_else(|| StoreError::MissingTensor(name.to_string()))?;
        if offset.saturating_add(buf.len()) > meta.byte_len() {
            return Err(StoreError::OutOfBounds {
                name: name.to_string(),
                begin: offset,
                end: offset.saturating_add(buf.len()),
                len: meta.byte_len(),
            });
        }
        let pos = self.data_start + (meta.byte_range.start + offset) as u64;
        read_exact_at(&self.file, buf, pos).map_err(|source| StoreError::File {
            path: self.path.clone(),
            source,
        })
    }
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    CheckpointFile::open(path)?.load()
}

/// Streams a container: the header goes out on construction, tensor data is
/// then appended in layout order (lexicographic by name).
pub struct CheckpointWriter<W: Write> {
    inner: W,
    header: Header,
    written: usize,
}

impl<W: Write> CheckpointWriter<W> {
    pub fn new(
        mut inner: W,
        specs: Vec<(String, Dtype, Vec<usize>)>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        let header = Header::layout(specs, metadata)?;
        let bytes = header.to_bytes();
        inner.write_all(&(bytes.len() as u64).to_le_bytes())?;
        inner.write_all(&bytes)?;
        Ok(CheckpointWriter {
            inner,
            header,
            written: 0,
        })
    }

    /// Tensors in the order their data must be written.
    pub fn layout(&self) -> &[TensorMeta] {
        &self.header.tensors
    }

    pub fn write_data(&mut self, bytes: &[u8]) -> Result<()> {
        let expected = self.header.data_len();
        if self.written + bytes.len() > expected {
            return Err(StoreError::DataSize {
                expected,
                found: self.written + bytes.len(),
            });
        }
        self.inner.write_all(bytes)?;
        self.written += bytes.len();
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        let expected = self.header.data_len();
        if self.written != expected {
            return Err(StoreError::DataSize {
                expected,
                found: self.written,
            });
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn specs_of(ckpt: &Checkpoint) -> Vec<(String, Dtype, Vec<usize>)> {
    ckpt.iter()
        .map(|(n, t)| (n.to_string(), t.dtype, t.shape.clone()))
        .collect()
}

/// Serializes a checkpoint into any writer.
pub fn write_checkpoint_to<W: Write>(ckpt: &Checkpoint, out: W) -> Result<W> {
    let mut writer = CheckpointWriter::new(out, specs_of(ckpt), ckpt.metadata.clone())?;
    let order: Vec<String> = writer.layout().iter().map(|t| t.name.clone()).collect();
    for name in &order {
        writer.write_data(&ckpt.tensors[name].data)?;
    }
    writer.finish()
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| StoreError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let buf = write_checkpoint_to(ckpt, BufWriter::new(file))?;
    buf.into_inner()
        .map_err(|e| StoreError::File {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?
        .sync_all()
        .map_err(|source| StoreError::File {
            path: path.to_path_buf(),
            source,
        })
}
