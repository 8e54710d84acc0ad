//! On-disk formats: binary feature and vector files, JSON model, codebook
//! and manifest documents, and a hex-lines importer.
//!
//! Binary integers are little-endian. JSON reals are written in shortest
//! round-trip form and parsed exactly, so every format round-trips bit for bit.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bitdesc::{bytes_for, BinaryDescriptor, FeatureSet, MAX_DIMS};
use crate::bmm::{BmmModel, EmReport, RNG_NAME};
use crate::bovw::BinaryCodebook;
use crate::error::{Error, Result};
use crate::eval::{RelevanceTruth, RetrievalIndex};
use crate::fisher::NormState;

pub const FEATURE_MAGIC: [u8; 4] = *b"BFVF";
pub const FEATURE_VERSION: u32 = 1;
pub const VECTOR_MAGIC: [u8; 4] = *b"BFVV";
pub const VECTOR_VERSION: u32 = 1;
pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const CODEBOOK_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

const FEATURE_HEADER_LEN: u64 = 20;
const MAX_ID_LEN: u32 = 4096;
// Upper bound on entries per vector, far above N * D for N = 4096, D = 1024.
const MAX_VECTOR_LEN: u64 = 1 << 24;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Reads as many bytes as are available up to `buf.len()`.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], consumed: u64, expected: u64) -> Result<()> {
    let got = read_full(r, buf)?;
    if got < buf.len() {
        return Err(Error::Truncated {
            expected,
            found: consumed + got as u64,
        });
    }
    Ok(())
}

fn trailing_bytes<R: Read>(r: &mut R) -> Result<u64> {
    Ok(io::copy(r, &mut io::sink())?)
}

fn check_magic(expected: [u8; 4], found: [u8; 4]) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::BadMagic { expected, found })
    }
}

fn check_version(expected: u32, found: u32) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::UnsupportedVersion(found))
    }
}

// ---- features ----

pub fn write_features_to<W: Write>(mut w: W, data: &FeatureSet) -> Result<()> {
    let mut header = Vec::with_capacity(FEATURE_HEADER_LEN as usize);
    header.extend_from_slice(&FEATURE_MAGIC);
    header.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    header.extend_from_slice(&(data.dims() as u32).to_le_bytes());
    header.extend_from_slice(&(data.len() as u64).to_le_bytes());
    w.write_all(&header)?;
    let mut row = Vec::with_capacity(bytes_for(data.dims()));
    for x in data {
        row.clear();
        x.write_bytes(&mut row);
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a feature file. Header fields are validated before any payload is
/// read; the payload is read row by row, so a lying count cannot trigger a
/// large allocation.
pub fn read_features_from<R: Read>(mut r: R) -> Result<FeatureSet> {
    let mut header = [0u8; FEATURE_HEADER_LEN as usize];
    let got = read_full(&mut r, &mut header)?;
    if got >= 4 {
        check_magic(FEATURE_MAGIC, header[..4].try_into().unwrap())?;
    }
    if got < header.len() {
        return Err(Error::Truncated {
            expected: FEATURE_HEADER_LEN,
            found: got as u64,
        });
    }
    check_version(FEATURE_VERSION, u32::from_le_bytes(header[4..8].try_into().unwrap()))?;
    let dims = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
    if !(1..=MAX_DIMS).contains(&dims) {
        return Err(Error::InvalidDimension(dims));
    }
    let row_len = bytes_for(dims);
    let payload = count
        .checked_mul(row_len as u64)
        .ok_or_else(|| Error::validation("count", format!("{count} rows overflow the payload size")))?;

    let mut out = FeatureSet::empty(dims)?;
    let mut row = vec![0u8; row_len];
    for t in 0..count {
        read_exact_or_truncated(&mut r, &mut row, t * row_len as u64, payload)?;
        let x = BinaryDescriptor::from_bytes(dims, &row).map_err(|_| Error::NonzeroPadding(t))?;
        out.push(x)?;
    }
    match trailing_bytes(&mut r)? {
        0 => Ok(out),
        n => Err(Error::TrailingData(n)),
    }
}

pub fn write_features(path: impl AsRef<Path>, data: &FeatureSet) -> Result<()> {
    write_features_to(create(path.as_ref())?, data)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    read_features_from(open(path.as_ref())?)
}

/// Imports one hex-encoded descriptor per line (packed-byte layout, bit 0 in
/// the low bit of the first byte). Blank lines and `#` comments are skipped.
/// Without `dims` the width is taken from the first line as `4 * hex length`.
pub fn read_hex_lines_from<R: BufRead>(r: R, dims: Option<usize>) -> Result<FeatureSet> {
    let mut out: Option<FeatureSet> = dims.map(FeatureSet::empty).transpose()?;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let hex = line.trim();
        if hex.is_empty() || hex.starts_with('#') {
            continue;
        }
        let set = match &mut out {
            Some(set) => set,
            None => out.insert(FeatureSet::empty(hex.len() * 4)?),
        };
        let x = BinaryDescriptor::from_hex(set.dims(), hex)
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        set.push(x)?;
    }
    out.ok_or_else(|| Error::Parse("no descriptors and no dimension given".into()))
}

pub fn read_hex_lines(path: impl AsRef<Path>, dims: Option<usize>) -> Result<FeatureSet> {
    read_hex_lines_from(open(path.as_ref())?, dims)
}

pub fn write_hex_lines_to<W: Write>(mut w: W, data: &FeatureSet) -> Result<()> {
    for x in data {
        writeln!(w, "{}", x.to_hex())?;
    }
    w.flush()?;
    Ok(())
}

// ---- vectors ----

/// What produced the vectors in a file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VectorKind {
    Fisher,
    BagOfWords,
}

impl VectorKind {
    fn code(self) -> u8 {
        match self {
            VectorKind::Fisher => 0,
            VectorKind::BagOfWords => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(VectorKind::Fisher),
            1 => Ok(VectorKind::BagOfWords),
            c => Err(Error::validation("kind", format!("unknown vector kind code {c}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VectorKind::Fisher => "fisher",
            VectorKind::BagOfWords => "bow",
        }
    }
}

fn norm_code(s: NormState) -> u8 {
    NormState::ALL.iter().position(|&n| n == s).unwrap() as u8
}

fn norm_from_code(code: u8) -> Result<NormState> {
    NormState::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| Error::validation("norm_state", format!("unknown code {code}")))
}

/// A batch of id-tagged vectors sharing kind, shape and normalization.
/// Each vector has `blocks * block_len` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFile {
    pub kind: VectorKind,
    pub norm_state: NormState,
    pub blocks: u32,
    pub block_len: u32,
    pub records: Vec<(String, Vec<f64>)>,
}

impl VectorFile {
    pub fn new(kind: VectorKind, norm_state: NormState, blocks: u32, block_len: u32) -> Self {
        Self {
            kind,
            norm_state,
            blocks,
            block_len,
            records: Vec::new(),
        }
    }

    pub fn vector_len(&self) -> usize {
        self.blocks as usize * self.block_len as usize
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.blocks as u64 * self.block_len as u64;
        if len == 0 || len > MAX_VECTOR_LEN {
            return Err(Error::validation(
                "blocks",
                format!("vector length {} x {} out of range", self.blocks, self.block_len),
            ));
        }
        let mut seen = HashSet::new();
        for (k, (id, v)) in self.records.iter().enumerate() {
            if id.is_empty() || id.len() > MAX_ID_LEN as usize {
                return Err(Error::validation(format!("records[{k}].id"), "empty or too long"));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::validation(format!("records[{k}].id"), format!("duplicate id {id:?}")));
            }
            if v.len() as u64 != len {
                return Err(Error::validation(
                    format!("records[{k}].values"),
                    format!("length {}, expected {len}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(format!("records[{k}].values"), "non-finite entry"));
            }
        }
        Ok(())
    }
}

pub fn write_vectors_to<W: Write>(mut w: W, file: &VectorFile) -> Result<()> {
    file.validate()?;
    w.write_all(&VECTOR_MAGIC)?;
    w.write_all(&VECTOR_VERSION.to_le_bytes())?;
    w.write_all(&[file.kind.code(), norm_code(file.norm_state), 0, 0])?;
    w.write_all(&file.blocks.to_le_bytes())?;
    w.write_all(&file.block_len.to_le_bytes())?;
    w.write_all(&(file.records.len() as u64).to_le_bytes())?;
    w.write_all(&[0; 4])?;
    let mut buf = Vec::new();
    for (id, values) in &file.records {
        buf.clear();
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vectors_from<R: Read>(mut r: R) -> Result<VectorFile> {
    let mut header = [0u8; 32];
    let got = read_full(&mut r, &mut header)?;
    if got >= 4 {
        check_magic(VECTOR_MAGIC, header[..4].try_into().unwrap())?;
    }
    if got < header.len() {
        return Err(Error::Truncated {
            expected: header.len() as u64,
            found: got as u64,
        });
    }
    check_version(VECTOR_VERSION, u32::from_le_bytes(header[4..8].try_into().unwrap()))?;
    let kind = VectorKind::from_code(header[8])?;
    let norm_state = norm_from_code(header[9])?;
    if header[10..12] != [0, 0] {
        return Err(Error::validation("header", "reserved bytes are nonzero"));
    }
    let mut file = VectorFile::new(
        kind,
        norm_state,
        u32::from_le_bytes(header[12..16].try_into().unwrap()),
        u32::from_le_bytes(header[16..20].try_into().unwrap()),
    );
    let count = u64::from_le_bytes(header[20..28].try_into().unwrap());
    // Bytes 28..32 are reserved.
    if header[28..32] != [0; 4] {
        return Err(Error::validation("header", "reserved bytes are nonzero"));
    }
    let len = file.blocks as u64 * file.block_len as u64;
    if len == 0 || len > MAX_VECTOR_LEN {
        return Err(Error::validation("blocks", format!("vector length {len} out of range")));
    }

    let mut consumed = header.len() as u64;
    let mut values_buf = vec![0u8; len as usize * 8];
    for _ in 0..count {
        let mut id_len = [0u8; 4];
        // The total size is unknown until every id is read; report what was expected so far.
        read_exact_or_truncated(&mut r, &mut id_len, consumed, consumed + 4)?;
        consumed += 4;
        let id_len = u32::from_le_bytes(id_len);
        if id_len == 0 || id_len > MAX_ID_LEN {
            return Err(Error::validation("id", format!("id length {id_len} out of range")));
        }
        let need = id_len as u64 + len * 8;
        let mut id = vec![0u8; id_len as usize];
        read_exact_or_truncated(&mut r, &mut id, consumed, consumed + need)?;
        read_exact_or_truncated(&mut r, &mut values_buf, consumed + id_len as u64, consumed + need)?;
        consumed += need;
        let id = String::from_utf8(id).map_err(|_| Error::validation("id", "not valid UTF-8"))?;
        let values = values_buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        file.records.push((id, values));
    }
    match trailing_bytes(&mut r)? {
        0 => {}
        n => return Err(Error::TrailingData(n)),
    }
    file.validate()?;
    Ok(file)
}

pub fn save_vectors(path: impl AsRef<Path>, file: &VectorFile) -> Result<()> {
    write_vectors_to(create(path.as_ref())?, file)
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<VectorFile> {
    read_vectors_from(open(path.as_ref())?)
}

/// Concatenates vector files that agree on kind, shape and normalization
/// state. Duplicate ids across files are rejected.
pub fn merge_vectors(files: Vec<VectorFile>) -> Result<VectorFile> {
    let mut iter = files.into_iter();
    let mut out = iter.next().ok_or_else(|| Error::param("vectors", "no vector files given"))?;
    for (k, f) in iter.enumerate() {
        if f.norm_state != out.norm_state {
            return Err(Error::validation(
                "norm_state",
                format!(
                    "file {} is `{}` but file 0 is `{}`",
                    k + 1,
                    f.norm_state,
                    out.norm_state
                ),
            ));
        }
        if f.kind != out.kind || f.blocks != out.blocks || f.block_len != out.block_len {
            return Err(Error::validation(
                "blocks",
                format!("file {} has a different kind or shape than file 0", k + 1),
            ));
        }
        out.records.extend(f.records);
    }
    out.validate()?;
    Ok(out)
}

/// Loads and merges vector files into a retrieval index.
pub fn load_index<P: AsRef<Path>>(paths: &[P]) -> Result<(RetrievalIndex, VectorFile)> {
    let files = paths.iter().map(load_vectors).collect::<Result<Vec<_>>>()?;
    let merged = merge_vectors(files)?;
    let mut index = RetrievalIndex::new();
    for (id, v) in &merged.records {
        index.insert(id.clone(), v.clone())?;
    }
    Ok((index, merged))
}

// ---- model ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub converged: bool,
    /// `(iteration, component)` pairs.
    #[serde(default)]
    pub reseed_events: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_descriptors: Option<u64>,
}

impl TrainingMeta {
    pub fn from_report(report: &EmReport, training_descriptors: usize) -> Self {
        Self {
            iterations: report.iterations_run,
            final_log_likelihood: report.final_log_likelihood(),
            converged: report.converged,
            reseed_events: report
                .reseed_events
                .iter()
                .map(|e| (e.iteration, e.component))
                .collect(),
            training_descriptors: Some(training_descriptors as u64),
        }
    }
}

/// A mixture plus the provenance needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: BmmModel,
    pub seed: Option<u64>,
    pub training: Option<TrainingMeta>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    schema_version: u32,
    n_components: usize,
    dims: usize,
    eps: f64,
    #[serde(default)]
    seed: Option<u64>,
    rng: String,
    weights: Vec<f64>,
    mu: Vec<Vec<f64>>,
    #[serde(default)]
    training: Option<TrainingMeta>,
}

pub fn model_to_string(file: &ModelFile) -> Result<String> {
    let m = &file.model;
    let doc = ModelDoc {
        schema_version: MODEL_SCHEMA_VERSION,
        n_components: m.n_components(),
        dims: m.dims(),
        eps: m.eps(),
        seed: file.seed,
        rng: RNG_NAME.to_owned(),
        weights: m.weights().to_vec(),
        mu: m.mu().chunks_exact(m.dims()).map(<[f64]>::to_vec).collect(),
        training: file.training.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_str(s: &str) -> Result<ModelFile> {
    let doc: ModelDoc = serde_json::from_str(s)?;
    check_version(MODEL_SCHEMA_VERSION, doc.schema_version)?;
    if doc.rng != RNG_NAME {
        return Err(Error::validation("rng", format!("unknown generator {:?}", doc.rng)));
    }
    if doc.weights.len() != doc.n_components {
        return Err(Error::validation(
            "weights",
            format!("{} entries, n_components is {}", doc.weights.len(), doc.n_components),
        ));
    }
    if doc.mu.len() != doc.n_components {
        return Err(Error::validation(
            "mu",
            format!("{} rows, n_components is {}", doc.mu.len(), doc.n_components),
        ));
    }
    if let Some(i) = doc.mu.iter().position(|row| row.len() != doc.dims) {
        return Err(Error::validation(
            format!("mu[{i}]"),
            format!("{} entries, dims is {}", doc.mu[i].len(), doc.dims),
        ));
    }
    Ok(ModelFile {
        model: BmmModel::new(doc.weights, doc.mu, doc.eps)?,
        seed: doc.seed,
        training: doc.training,
    })
}

pub fn save_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<()> {
    std::fs::write(path, model_to_string(file)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    model_from_str(&std::fs::read_to_string(path)?)
}

// ---- codebook ----

#[derive(Clone, Debug, PartialEq)]
pub struct CodebookFile {
    pub codebook: BinaryCodebook,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookDoc {
    schema_version: u32,
    k: usize,
    dims: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    iterations: Option<usize>,
    /// Packed-byte hex, one string per centroid.
    centroids: Vec<String>,
}

pub fn codebook_to_string(file: &CodebookFile) -> Result<String> {
    let cb = &file.codebook;
    let doc = CodebookDoc {
        schema_version: CODEBOOK_SCHEMA_VERSION,
        k: cb.len(),
        dims: cb.dims(),
        seed: file.seed,
        iterations: file.iterations,
        centroids: cb.centroids().iter().map(BinaryDescriptor::to_hex).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn codebook_from_str(s: &str) -> Result<CodebookFile> {
    let doc: CodebookDoc = serde_json::from_str(s)?;
    check_version(CODEBOOK_SCHEMA_VERSION, doc.schema_version)?;
    if doc.centroids.len() != doc.k {
        return Err(Error::validation(
            "centroids",
            format!("{} entries, k is {}", doc.centroids.len(), doc.k),
        ));
    }
    if !(1..=MAX_DIMS).contains(&doc.dims) {
        return Err(Error::InvalidDimension(doc.dims));
    }
    let centroids = doc
        .centroids
        .iter()
        .enumerate()
        .map(|(k, hex)| {
            BinaryDescriptor::from_hex(doc.dims, hex)
                .map_err(|e| Error::validation(format!("centroids[{k}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CodebookFile {
        codebook: BinaryCodebook::new(centroids)?,
        seed: doc.seed,
        iterations: doc.iterations,
    })
}

pub fn save_codebook(path: impl AsRef<Path>, file: &CodebookFile) -> Result<()> {
    std::fs::write(path, codebook_to_string(file)?)?;
    Ok(())
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<CodebookFile> {
    codebook_from_str(&std::fs::read_to_string(path)?)
}

// ---- manifest ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reference,
    Query,
    Distractor,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub class: String,
    /// Feature file, relative to the manifest's directory unless absolute.
    pub features: PathBuf,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub images: Vec<ManifestEntry>,
    pub relevance: RelevanceTruth,
}

impl Manifest {
    pub fn new(images: Vec<ManifestEntry>, relevance: RelevanceTruth) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            images,
            relevance,
        }
    }

    /// Structural checks that do not touch the file system: unique ids,
    /// relevance keyed by queries and pointing at database images.
    pub fn validate(&self) -> Result<()> {
        check_version(MANIFEST_SCHEMA_VERSION, self.schema_version)?;
        let mut roles = BTreeMap::new();
        for (k, e) in self.images.iter().enumerate() {
            if e.id.is_empty() {
                return Err(Error::validation(format!("images[{k}].id"), "empty id"));
            }
            if roles.insert(e.id.as_str(), e.role).is_some() {
                return Err(Error::validation(format!("images[{k}].id"), format!("duplicate id {:?}", e.id)));
            }
        }
        for (q, refs) in &self.relevance {
            match roles.get(q.as_str()) {
                Some(Role::Query) => {}
                _ => {
                    return Err(Error::validation(
                        format!("relevance[{q:?}]"),
                        "key is not a query image",
                    ))
                }
            }
            if refs.is_empty() {
                return Err(Error::validation(format!("relevance[{q:?}]"), "no relevant images"));
            }
            if let Some(r) = refs
                .iter()
                .find(|r| !matches!(roles.get(r.as_str()), Some(Role::Reference | Role::Distractor)))
            {
                return Err(Error::validation(
                    format!("relevance[{q:?}]"),
                    format!("{r:?} is not a database image"),
                ));
            }
        }
        for e in &self.images {
            if e.role == Role::Query && !self.relevance.contains_key(&e.id) {
                return Err(Error::validation("relevance", format!("query {:?} has no entry", e.id)));
            }
        }
        Ok(())
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.images.iter().filter(move |e| e.role == role)
    }

    /// Query id to class label.
    pub fn query_classes(&self) -> BTreeMap<String, String> {
        self.with_role(Role::Query)
            .map(|e| (e.id.clone(), e.class.clone()))
            .collect()
    }

    /// Resolves every feature path against `base` and checks that it exists.
    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        for (k, e) in self.images.iter_mut().enumerate() {
            let p = base.join(&e.features);
            if !p.is_file() {
                return Err(Error::validation(
                    format!("images[{k}].features"),
                    format!("{} does not exist", p.display()),
                ));
            }
            e.features = p;
        }
        Ok(())
    }
}

pub fn manifest_to_string(m: &Manifest) -> Result<String> {
    m.validate()?;
    let mut s = serde_json::to_string_pretty(m)?;
    s.push('\n');
    Ok(s)
}

pub fn manifest_from_str(s: &str) -> Result<Manifest> {
    let m: Manifest = serde_json::from_str(s)?;
    m.validate()?;
    Ok(m)
}

pub fn save_manifest(path: impl AsRef<Path>, m: &Manifest) -> Result<()> {
    std::fs::write(path, manifest_to_string(m)?)?;
    Ok(())
}

/// Loads a manifest and resolves feature paths relative to its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let mut m = manifest_from_str(&std::fs::read_to_string(path)?)?;
    m.resolve_paths(path.parent().unwrap_or(Path::new("")))?;
    Ok(m)
}

/// Relevance truth restricted to the given query ids.
pub fn relevance_for<'a>(m: &Manifest, queries: impl IntoIterator<Item = &'a str>) -> RelevanceTruth {
    queries
        .into_iter()
        .filter_map(|q| m.relevance.get(q).map(|r| (q.to_owned(), r.clone())))
        .collect::<BTreeMap<String, BTreeSet<String>>>()
}
