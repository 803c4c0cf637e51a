//! `.npy` v1.0 tensor interchange and the on-disk section layout.
//!
//! Only little-endian `<f4` and `<i4` arrays in C order are accepted. The
//! writer reproduces numpy's own header layout byte for byte: the dict
//! literal is padded with spaces and terminated by `\n` so that the data
//! starts on a 64-byte boundary.
//!
//! A dataset is a directory `sections/<id>/` per section holding
//! `decoder_L1.npy .. decoder_L<L>.npy` (coarse to fine) and optionally
//! `probs.npy`, `ensemble_probs.npy`, `dropout_probs.npy`, `epoch_preds.npy`
//! and `labels.npy`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Grid;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE_LEN: usize = 10;
const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I32(Vec<i32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn descr(&self) -> &'static str {
        match self {
            TensorData::F32(_) => "<f4",
            TensorData::I32(_) => "<i4",
        }
    }
}

/// Dense row-major tensor with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} must be non-empty with positive entries"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {n} values, buffer has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn from_f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::new(shape, TensorData::F32(data))
    }

    pub fn from_i32(shape: Vec<usize>, data: Vec<i32>) -> Result<Self> {
        Self::new(shape, TensorData::I32(data))
    }

    /// Single-precision copy of a grid, shape `[h, w]`.
    pub fn from_grid(grid: &Grid) -> Self {
        let (h, w) = grid.hw();
        Self {
            shape: vec![h, w],
            data: TensorData::F32(grid.as_slice().iter().map(|&v| v as f32).collect()),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            TensorData::I32(_) => None,
        }
    }

    pub fn as_i32(&self) -> Option<&[i32]> {
        match &self.data {
            TensorData::I32(v) => Some(v),
            TensorData::F32(_) => None,
        }
    }

    /// Trailing two dimensions.
    pub fn spatial(&self) -> (usize, usize) {
        let r = self.shape.len();
        if r < 2 {
            return (1, self.shape[0]);
        }
        (self.shape[r - 2], self.shape[r - 1])
    }

    /// Interpret a rank-2 real tensor as a grid.
    pub fn to_grid(&self) -> Result<Grid> {
        if self.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected a 2-d map, got shape {:?}",
                self.shape
            )));
        }
        let data = match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::I32(v) => v.iter().map(|&x| x as f64).collect(),
        };
        Grid::new(self.shape[0], self.shape[1], data)
    }
}

/// Serialize a tensor to the exact bytes of a `.npy` v1.0 file.
pub fn encode_npy(t: &Tensor) -> Vec<u8> {
    let shape = match t.shape.len() {
        1 => format!("({},)", t.shape[0]),
        _ => format!(
            "({})",
            t.shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        t.data.descr(),
        shape
    );
    let unpadded = PREAMBLE_LEN + header.len() + 1;
    let padded = unpadded.div_ceil(ALIGN) * ALIGN;
    header.extend(std::iter::repeat_n(' ', padded - unpadded));
    header.push('\n');

    let mut out = Vec::with_capacity(padded + 4 * t.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match &t.data {
        TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

/// Parse the bytes of a `.npy` v1.0 file.
pub fn decode_npy(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < PREAMBLE_LEN || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing .npy magic".into()));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::Format(format!(
            "unsupported .npy version {}.{}",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_start = PREAMBLE_LEN + header_len;
    if bytes.len() < data_start {
        return Err(Error::Format("truncated header".into()));
    }
    let header = std::str::from_utf8(&bytes[PREAMBLE_LEN..data_start])
        .map_err(|_| Error::Format("header is not ASCII".into()))?;
    let header = parse_header(header)?;

    let n = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4).map(|_| n))
        .ok_or_else(|| Error::Format(format!("shape {:?} overflows", header.shape)))?;
    let body = &bytes[data_start..];
    if body.len() != 4 * n {
        return Err(Error::Format(format!(
            "shape {:?} needs {} data bytes, file has {}",
            header.shape,
            4 * n,
            body.len()
        )));
    }
    let words = body.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
    let data = match header.dtype {
        Dtype::F32 => TensorData::F32(words.map(f32::from_le_bytes).collect()),
        Dtype::I32 => TensorData::I32(words.map(i32::from_le_bytes).collect()),
    };
    Tensor::new(header.shape, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_npy(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_npy(t)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dtype {
    F32,
    I32,
}

struct Header {
    dtype: Dtype,
    shape: Vec<usize>,
}

/// Parser for the python dict literal in a `.npy` header.
struct HeaderParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn err<T>(&self, what: &str) -> Result<T> {
        Err(Error::Format(format!("malformed header at byte {}: {what}", self.pos)))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos] == b' ' {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected '{}'", c as char))
        }
    }

    fn string(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return self.err("expected string"),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.s.len() {
            return self.err("unterminated string");
        }
        let out = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        self.pos += 1;
        Ok(out)
    }

    fn boolean(&mut self) -> Result<bool> {
        self.skip_ws();
        let rest = &self.s[self.pos..];
        if rest.starts_with(b"False") {
            self.pos += 5;
            Ok(false)
        } else if rest.starts_with(b"True") {
            self.pos += 4;
            Ok(true)
        } else {
            self.err("expected True or False")
        }
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer");
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .expect("ascii")
            .parse()
            .or_else(|_| self.err("integer overflow"))
    }

    fn shape(&mut self) -> Result<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(b')') {
                self.pos += 1;
                break;
            }
            dims.push(self.integer()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    // a one-element tuple must carry its trailing comma
                    if dims.len() == 1 {
                        return self.err("one-element shape without trailing comma");
                    }
                    break;
                }
                _ => return self.err("expected ',' or ')'"),
            }
        }
        Ok(dims)
    }
}

fn parse_header(text: &str) -> Result<Header> {
    let Some(body) = text.strip_suffix('\n') else {
        return Err(Error::Format("header must end with a newline".into()));
    };
    let mut p = HeaderParser {
        s: body.as_bytes(),
        pos: 0,
    };
    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;

    p.expect(b'{')?;
    loop {
        p.skip_ws();
        if p.peek() == Some(b'}') {
            p.pos += 1;
            break;
        }
        let key = p.string()?;
        p.expect(b':')?;
        match key {
            "descr" if descr.is_none() => descr = Some(p.string()?),
            "fortran_order" if fortran.is_none() => fortran = Some(p.boolean()?),
            "shape" if shape.is_none() => shape = Some(p.shape()?),
            _ => return p.err(&format!("unexpected or repeated key '{key}'")),
        }
        p.skip_ws();
        match p.peek() {
            Some(b',') => p.pos += 1,
            Some(b'}') => {
                p.pos += 1;
                break;
            }
            _ => return p.err("expected ',' or '}'"),
        }
    }
    p.skip_ws();
    if p.pos != p.s.len() {
        return p.err("trailing characters after header dict");
    }

    let dtype = match descr {
        Some("<f4") => Dtype::F32,
        Some("<i4") => Dtype::I32,
        Some(other) => {
            return Err(Error::Format(format!("unsupported dtype '{other}'")));
        }
        None => return Err(Error::Format("header lacks 'descr'".into())),
    };
    match fortran {
        Some(false) => {}
        Some(true) => return Err(Error::Format("Fortran-ordered arrays are not supported".into())),
        None => return Err(Error::Format("header lacks 'fortran_order'".into())),
    }
    let shape = shape.ok_or_else(|| Error::Format("header lacks 'shape'".into()))?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Format(format!("unsupported shape {shape:?}")));
    }
    Ok(Header { dtype, shape })
}

/// One section's dumped network outputs.
#[derive(Debug, Clone)]
pub struct SectionDataset {
    pub section_id: String,
    /// Decoder activations, `C x H x W`, coarse to fine.
    pub decoder_features: Vec<Tensor>,
    /// `K x H x W` softmax output.
    pub probs: Option<Tensor>,
    /// `M x K x H x W` ensemble member outputs.
    pub ensemble_probs: Option<Tensor>,
    /// `T x K x H x W` MC-dropout passes.
    pub dropout_probs: Option<Tensor>,
    /// `E x H x W` per-epoch predicted classes.
    pub epoch_preds: Option<Tensor>,
    /// `H x W` ground-truth classes.
    pub labels: Option<Tensor>,
}

pub const PROBS_FILE: &str = "probs.npy";
pub const ENSEMBLE_FILE: &str = "ensemble_probs.npy";
pub const DROPOUT_FILE: &str = "dropout_probs.npy";
pub const EPOCH_PREDS_FILE: &str = "epoch_preds.npy";
pub const LABELS_FILE: &str = "labels.npy";

pub fn decoder_file_name(layer: usize) -> String {
    format!("decoder_L{layer}.npy")
}

fn decoder_index(name: &str) -> Option<usize> {
    name.strip_prefix("decoder_L")?
        .strip_suffix(".npy")?
        .parse()
        .ok()
}

impl SectionDataset {
    pub fn validate(&self) -> Result<()> {
        let feats = &self.decoder_features;
        if feats.len() < 2 {
            return Err(Error::Format(format!(
                "section {}: need at least 2 decoder layers, found {}",
                self.section_id,
                feats.len()
            )));
        }
        for (i, f) in feats.iter().enumerate() {
            if f.rank() != 3 || f.as_f32().is_none() {
                return Err(Error::Format(format!(
                    "section {}: decoder_L{} must be a real C x H x W tensor, got {:?}",
                    self.section_id,
                    i + 1,
                    f.shape()
                )));
            }
        }
        for (i, pair) in feats.windows(2).enumerate() {
            let (ha, wa) = pair[0].spatial();
            let (hb, wb) = pair[1].spatial();
            if hb < ha || wb < wa {
                return Err(Error::Format(format!(
                    "section {}: resolution must be non-decreasing, decoder_L{} is {ha}x{wa} but decoder_L{} is {hb}x{wb}",
                    self.section_id,
                    i + 1,
                    i + 2
                )));
            }
        }

        let finest = feats.last().unwrap().spatial();
        let mut out_hw: Option<(usize, usize)> = None;
        let optional = [
            ("probs", &self.probs, 3, false),
            ("ensemble_probs", &self.ensemble_probs, 4, false),
            ("dropout_probs", &self.dropout_probs, 4, false),
            ("epoch_preds", &self.epoch_preds, 3, true),
            ("labels", &self.labels, 2, true),
        ];
        for (name, t, rank, int) in optional {
            let Some(t) = t else { continue };
            if t.rank() != rank || t.as_i32().is_some() != int {
                return Err(Error::Format(format!(
                    "section {}: {name} must be a rank-{rank} {} tensor, got {:?}",
                    self.section_id,
                    if int { "int32" } else { "real32" },
                    t.shape()
                )));
            }
            let hw = t.spatial();
            match out_hw {
                None => out_hw = Some(hw),
                Some(prev) if prev != hw => {
                    return Err(Error::Format(format!(
                        "section {}: {name} is {}x{} but other outputs are {}x{}",
                        self.section_id, hw.0, hw.1, prev.0, prev.1
                    )));
                }
                _ => {}
            }
        }
        if let Some((h, w)) = out_hw {
            if h < finest.0 || w < finest.1 {
                return Err(Error::Format(format!(
                    "section {}: output resolution {h}x{w} is below the finest decoder resolution {}x{}",
                    self.section_id, finest.0, finest.1
                )));
            }
        }
        Ok(())
    }

    /// Resolution of the network outputs, or of the finest decoder layer
    /// when no outputs were dumped.
    pub fn output_hw(&self) -> (usize, usize) {
        [
            &self.probs,
            &self.ensemble_probs,
            &self.dropout_probs,
            &self.epoch_preds,
            &self.labels,
        ]
        .into_iter()
        .flatten()
        .map(|t| t.spatial())
        .next()
        .unwrap_or_else(|| self.decoder_features.last().unwrap().spatial())
    }

    pub fn decoder_resolutions(&self) -> Vec<(usize, usize)> {
        self.decoder_features.iter().map(|t| t.spatial()).collect()
    }

    /// Write every present tensor into `dir` using the standard file names.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, f) in self.decoder_features.iter().enumerate() {
            write_tensor(f, dir.join(decoder_file_name(i + 1)))?;
        }
        let optional = [
            (PROBS_FILE, &self.probs),
            (ENSEMBLE_FILE, &self.ensemble_probs),
            (DROPOUT_FILE, &self.dropout_probs),
            (EPOCH_PREDS_FILE, &self.epoch_preds),
            (LABELS_FILE, &self.labels),
        ];
        for (name, t) in optional {
            if let Some(t) = t {
                write_tensor(t, dir.join(name))?;
            }
        }
        Ok(())
    }
}

/// Load and validate one section directory.
pub fn load_section(dir: impl AsRef<Path>) -> Result<SectionDataset> {
    let dir = dir.as_ref();
    let section_id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut layers: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(idx) = decoder_index(&name.to_string_lossy()) {
            layers.push((idx, entry.path()));
        }
    }
    layers.sort();
    for (expected, (idx, _)) in (1..).zip(&layers) {
        if *idx != expected {
            return Err(Error::Format(format!(
                "section {section_id}: decoder layers must be numbered 1..L without gaps, missing decoder_L{expected}"
            )));
        }
    }
    if layers.len() < 2 {
        return Err(Error::Format(format!(
            "section {section_id}: need at least 2 decoder layers, found {}",
            layers.len()
        )));
    }
    let decoder_features = layers
        .iter()
        .map(|(_, p)| read_tensor(p))
        .collect::<Result<Vec<_>>>()?;

    let optional = |name: &str| -> Result<Option<Tensor>> {
        let p = dir.join(name);
        if p.exists() {
            read_tensor(p).map(Some)
        } else {
            Ok(None)
        }
    };
    let section = SectionDataset {
        section_id,
        decoder_features,
        probs: optional(PROBS_FILE)?,
        ensemble_probs: optional(ENSEMBLE_FILE)?,
        dropout_probs: optional(DROPOUT_FILE)?,
        epoch_preds: optional(EPOCH_PREDS_FILE)?,
        labels: optional(LABELS_FILE)?,
    };
    section.validate()?;
    Ok(section)
}

/// Section directories under `<dataset>/sections`, sorted by id.
pub fn list_sections(dataset: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = dataset.as_ref().join("sections");
    let mut out = Vec::new();
    for entry in fs::read_dir(&root).map_err(|e| Error::io(&root, e))? {
        let entry = entry.map_err(|e| Error::io(&root, e))?;
        if entry.path().is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}
