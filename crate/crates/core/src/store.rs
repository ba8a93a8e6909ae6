//! Checkpoints and their on-disk container.
//!
//! A container is a directory with a `manifest.json` (an array of
//! `{name, dtype, shape, file, byte_offset, byte_len}` records) and one or
//! more raw little-endian payload files. The checkpoint's model id is the
//! directory name. Tensors are always held as `f64` in memory; `f32`
//! payloads are widened on load, and saving always writes `f64` so that a
//! save/load round trip is bit-exact.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor, WeightMatrix, WeightVector};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "tensors.bin";

/// Named parameters of one model, iterated in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model_id: String,
    params: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            params: BTreeMap::new(),
        }
    }

    /// Builds a checkpoint, rejecting empty and duplicate names.
    pub fn from_params<I, S>(model_id: impl Into<String>, params: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Tensor)>,
        S: Into<String>,
    {
        let mut ckpt = Self::new(model_id);
        for (name, tensor) in params {
            ckpt.insert(name, tensor)?;
        }
        Ok(ckpt)
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: impl Into<Tensor>) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if self.params.contains_key(&name) {
            return Err(Error::DuplicateName(name));
        }
        self.params.insert(name, tensor.into());
        Ok(())
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<String, Tensor> {
        self.params
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Checks that `other` has exactly this checkpoint's names and shapes.
    pub fn check_compatible(&self, other: &Checkpoint) -> Result<()> {
        for (name, tensor) in &self.params {
            let theirs = other.get(name).ok_or_else(|| Error::ParameterMismatch {
                name: name.clone(),
                reason: format!("missing from checkpoint `{}`", other.model_id),
            })?;
            if theirs.shape() != tensor.shape() {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: tensor.shape(),
                    found: theirs.shape(),
                });
            }
        }
        if let Some(extra) = other.names().find(|n| !self.params.contains_key(*n)) {
            return Err(Error::ParameterMismatch {
                name: extra.to_string(),
                reason: format!(
                    "present in `{}` but not in `{}`",
                    other.model_id, self.model_id
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// One record of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub file: String,
    pub byte_offset: u64,
    pub byte_len: u64,
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::MissingManifest(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let entries = read_manifest(dir)?;
    let model_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut payloads: HashMap<String, Vec<u8>> = HashMap::new();
    let mut ckpt = Checkpoint::new(model_id);
    for entry in entries {
        if entry.file.contains("..") || Path::new(&entry.file).is_absolute() {
            return Err(Error::Container(format!(
                "payload path `{}` of `{}` escapes the container",
                entry.file, entry.name
            )));
        }
        if !payloads.contains_key(&entry.file) {
            let path = dir.join(&entry.file);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            payloads.insert(entry.file.clone(), bytes);
        }
        let bytes = &payloads[&entry.file];
        let start = entry.byte_offset as usize;
        let end = start
            .checked_add(entry.byte_len as usize)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| {
                Error::Container(format!(
                    "`{}` range {}+{} exceeds payload `{}` of {} bytes",
                    entry.name,
                    entry.byte_offset,
                    entry.byte_len,
                    entry.file,
                    bytes.len()
                ))
            })?;
        let slice = &bytes[start..end];
        let elem = entry.dtype.size();
        if !slice.len().is_multiple_of(elem) {
            return Err(Error::Container(format!(
                "`{}` byte length {} is not a multiple of {elem}",
                entry.name,
                slice.len()
            )));
        }
        let count = slice.len() / elem;
        let expected: usize = entry.shape.iter().product();
        if count != expected {
            return Err(Error::ShapeMismatch {
                name: entry.name.clone(),
                expected: entry.shape.clone(),
                found: vec![count],
            });
        }
        let data = decode_le(slice, entry.dtype);
        let tensor = Tensor::from_shape(&entry.name, &entry.shape, data)?;
        ckpt.insert(entry.name, tensor)?;
    }
    Ok(ckpt)
}

fn decode_le(bytes: &[u8], dtype: DType) -> Vec<f64> {
    match dtype {
        DType::F32 => bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect(),
        DType::F64 => bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect(),
    }
}

/// Writes `ckpt` as a single-payload `f64` container under `dir`.
pub fn save_checkpoint(ckpt: &Checkpoint, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut payload = Vec::new();
    let mut manifest = Vec::with_capacity(ckpt.len());
    for (name, tensor) in ckpt.params() {
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        let offset = payload.len() as u64;
        for v in tensor.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        manifest.push(ManifestEntry {
            name: name.clone(),
            dtype: DType::F64,
            shape: tensor.shape(),
            file: PAYLOAD_FILE.to_string(),
            byte_offset: offset,
            byte_len: payload.len() as u64 - offset,
        });
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let payload_path = dir.join(PAYLOAD_FILE);
    fs::write(&payload_path, &payload).map_err(|e| Error::io(&payload_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

/// Reads a single-file safetensors checkpoint holding F32/F64 tensors of rank 1 or 2.
pub fn load_safetensors(path: impl AsRef<Path>) -> Result<Checkpoint> {
    #[derive(Deserialize)]
    struct Info {
        dtype: String,
        shape: Vec<usize>,
        data_offsets: [usize; 2],
    }

    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::Container("safetensors file shorter than its header".into()));
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body_start = 8usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Container("safetensors header length out of range".into()))?;
    let header: BTreeMap<String, serde_json::Value> =
        serde_json::from_slice(&bytes[8..body_start])?;
    let body = &bytes[body_start..];

    let model_id = path
        .file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut ckpt = Checkpoint::new(model_id);
    for (name, value) in header {
        if name == "__metadata__" {
            continue;
        }
        let info: Info = serde_json::from_value(value)?;
        let dtype = match info.dtype.as_str() {
            "F32" => DType::F32,
            "F64" => DType::F64,
            other => {
                return Err(Error::InvalidTensor {
                    name,
                    reason: format!("unsupported dtype {other}"),
                })
            }
        };
        let [start, end] = info.data_offsets;
        if start > end || end > body.len() {
            return Err(Error::Container(format!("`{name}` offsets out of range")));
        }
        let slice = &body[start..end];
        let expected: usize = info.shape.iter().product();
        if slice.len() != expected * dtype.size() {
            return Err(Error::ShapeMismatch {
                name,
                expected: info.shape,
                found: vec![slice.len() / dtype.size()],
            });
        }
        let tensor = Tensor::from_shape(&name, &info.shape, decode_le(slice, dtype))?;
        ckpt.insert(name, tensor)?;
    }
    Ok(ckpt)
}

/// Loads a container directory, or a `.safetensors` file.
pub fn load_any(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    if path.is_file() && path.extension().is_some_and(|e| e == "safetensors") {
        load_safetensors(path)
    } else {
        load_checkpoint(path)
    }
}

/// Task matrices of one 2-D layer, one per domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSet {
    pub layer_name: String,
    deltas: Vec<WeightMatrix>,
    domain_ids: Vec<String>,
}

impl DeltaSet {
    pub fn new(
        layer_name: impl Into<String>,
        deltas: Vec<WeightMatrix>,
        domain_ids: Vec<String>,
    ) -> Result<Self> {
        let layer_name = layer_name.into();
        validate_domains(&layer_name, deltas.len(), &domain_ids)?;
        let shape = deltas[0].shape();
        if let Some(bad) = deltas.iter().find(|d| d.shape() != shape) {
            return Err(Error::ShapeMismatch {
                name: layer_name,
                expected: vec![shape.0, shape.1],
                found: vec![bad.rows(), bad.cols()],
            });
        }
        Ok(Self {
            layer_name,
            deltas,
            domain_ids,
        })
    }

    /// Domain ids default to `d0, d1, ...`.
    pub fn unnamed(layer_name: impl Into<String>, deltas: Vec<WeightMatrix>) -> Result<Self> {
        let ids = (0..deltas.len()).map(|d| format!("d{d}")).collect();
        Self::new(layer_name, deltas, ids)
    }

    pub fn deltas(&self) -> &[WeightMatrix] {
        &self.deltas
    }

    pub fn domain_ids(&self) -> &[String] {
        &self.domain_ids
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.deltas[0].shape()
    }

    /// Same set with domains reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Self::new(
            self.layer_name.clone(),
            order.iter().map(|&i| self.deltas[i].clone()).collect(),
            order.iter().map(|&i| self.domain_ids[i].clone()).collect(),
        )
    }
}

/// Deltas of one 1-D parameter, one per domain.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDeltaSet {
    pub name: String,
    deltas: Vec<WeightVector>,
    domain_ids: Vec<String>,
}

impl VectorDeltaSet {
    pub fn new(
        name: impl Into<String>,
        deltas: Vec<WeightVector>,
        domain_ids: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        validate_domains(&name, deltas.len(), &domain_ids)?;
        let len = deltas[0].len();
        if let Some(bad) = deltas.iter().find(|d| d.len() != len) {
            return Err(Error::ShapeMismatch {
                name,
                expected: vec![len],
                found: vec![bad.len()],
            });
        }
        Ok(Self {
            name,
            deltas,
            domain_ids,
        })
    }

    pub fn deltas(&self) -> &[WeightVector] {
        &self.deltas
    }

    pub fn domain_ids(&self) -> &[String] {
        &self.domain_ids
    }
}

fn validate_domains(name: &str, count: usize, ids: &[String]) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidArgument(format!("`{name}`: no domains")));
    }
    if ids.len() != count {
        return Err(Error::InvalidArgument(format!(
            "`{name}`: {count} deltas but {} domain ids",
            ids.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::InvalidArgument(format!(
            "`{name}`: duplicate domain id `{dup}`"
        )));
    }
    Ok(())
}

/// All deltas of a set of fine-tuned checkpoints, split by parameter rank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Deltas {
    pub matrices: BTreeMap<String, DeltaSet>,
    pub vectors: BTreeMap<String, VectorDeltaSet>,
}

/// `θ_d − θ_pre` for every parameter; domain ids are the checkpoints' model ids.
pub fn compute_deltas(fine_tuned: &[Checkpoint], pre: &Checkpoint) -> Result<Deltas> {
    if fine_tuned.is_empty() {
        return Err(Error::InvalidArgument("no fine-tuned checkpoints".into()));
    }
    for ft in fine_tuned {
        pre.check_compatible(ft)?;
    }
    let ids: Vec<String> = fine_tuned.iter().map(|c| c.model_id.clone()).collect();
    let mut out = Deltas::default();
    for (name, base) in pre.params() {
        match base {
            Tensor::Matrix(base) => {
                let deltas = fine_tuned
                    .iter()
                    .map(|ft| {
                        let m = ft.get(name).and_then(Tensor::as_matrix).expect("checked");
                        m.try_sub(base)
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.matrices
                    .insert(name.clone(), DeltaSet::new(name.clone(), deltas, ids.clone())?);
            }
            Tensor::Vector(base) => {
                let deltas = fine_tuned
                    .iter()
                    .map(|ft| {
                        let v = ft.get(name).and_then(Tensor::as_vector).expect("checked");
                        v.zip_with(base, |a, b| a - b)
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.vectors.insert(
                    name.clone(),
                    VectorDeltaSet::new(name.clone(), deltas, ids.clone())?,
                );
            }
        }
    }
    Ok(out)
}

/// `θ_pre + λ·Δ_merged`; `merged` must cover exactly the parameters of `pre`.
pub fn apply_merged(
    pre: &Checkpoint,
    merged: &BTreeMap<String, Tensor>,
    lambda: f64,
) -> Result<Checkpoint> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    let merged_ckpt = Checkpoint {
        model_id: "merged".into(),
        params: merged.clone(),
    };
    pre.check_compatible(&merged_ckpt)?;
    let mut out = Checkpoint::new("merged");
    for (name, base) in pre.params() {
        let tensor = match (base, &merged[name]) {
            (Tensor::Matrix(b), Tensor::Matrix(d)) => {
                Tensor::Matrix(b.zip_with(d, |x, y| x + lambda * y)?)
            }
            (Tensor::Vector(b), Tensor::Vector(d)) => {
                Tensor::Vector(b.zip_with(d, |x, y| x + lambda * y)?)
            }
            _ => unreachable!("shapes checked"),
        };
        out.insert(name.clone(), tensor)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Tensor {
        Tensor::Matrix(WeightMatrix::from_rows(rows))
    }

    fn write_container(dir: &Path, manifest: &str, payload: &[u8]) {
        fs::create_dir_all(dir).unwrap();
        fs::write(dir.join(MANIFEST_FILE), manifest).unwrap();
        fs::write(dir.join(PAYLOAD_FILE), payload).unwrap();
    }

    fn f64_bytes(values: &[f64]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn loads_literal_matrix() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("model");
        let manifest = r#"[{"name":"w","dtype":"f64","shape":[2,2],"file":"tensors.bin","byte_offset":0,"byte_len":32}]"#;
        write_container(&dir, manifest, &f64_bytes(&[1.0, 2.0, 3.0, 4.0]));
        let ckpt = load_checkpoint(&dir).unwrap();
        assert_eq!(ckpt.model_id, "model");
        assert_eq!(ckpt.get("w"), Some(&mat(&[&[1.0, 2.0], &[3.0, 4.0]])));
    }

    #[test]
    fn loads_f32_bias() {
        let tmp = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = [0.5f32, -1.0, 2.0, 3.25]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let manifest = r#"[{"name":"b","dtype":"f32","shape":[4],"file":"tensors.bin","byte_offset":0,"byte_len":16}]"#;
        write_container(tmp.path(), manifest, &bytes);
        let ckpt = load_checkpoint(tmp.path()).unwrap();
        let v = ckpt.get("b").unwrap().as_vector().unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.data(), &[0.5, -1.0, 2.0, 3.25]);
    }

    #[test]
    fn shape_mismatch_names_parameter() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = r#"[{"name":"w","dtype":"f64","shape":[2,3],"file":"tensors.bin","byte_offset":0,"byte_len":40}]"#;
        write_container(tmp.path(), manifest, &f64_bytes(&[1.0; 5]));
        match load_checkpoint(tmp.path()) {
            Err(Error::ShapeMismatch { name, .. }) => assert_eq!(name, "w"),
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_manifest_and_non_finite() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_checkpoint(tmp.path()),
            Err(Error::MissingManifest(_))
        ));
        let manifest = r#"[{"name":"w","dtype":"f64","shape":[1,2],"file":"tensors.bin","byte_offset":0,"byte_len":16}]"#;
        write_container(tmp.path(), manifest, &f64_bytes(&[1.0, f64::NAN]));
        match load_checkpoint(tmp.path()) {
            Err(Error::NonFinite { name, index }) => {
                assert_eq!(name, "w");
                assert_eq!(index, 1);
            }
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_payload() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = r#"[{"name":"w","dtype":"f64","shape":[1,2],"file":"tensors.bin","byte_offset":8,"byte_len":16}]"#;
        write_container(tmp.path(), manifest, &f64_bytes(&[1.0, 2.0]));
        assert!(matches!(load_checkpoint(tmp.path()), Err(Error::Container(_))));
    }

    #[test]
    fn duplicate_and_empty_names_rejected() {
        let v = || Tensor::Vector(WeightVector::zeros(1));
        assert!(matches!(
            Checkpoint::from_params("m", [("a", v()), ("a", v())]),
            Err(Error::DuplicateName(n)) if n == "a"
        ));
        assert!(matches!(
            Checkpoint::from_params("m", [("", v())]),
            Err(Error::EmptyName)
        ));
    }

    #[test]
    fn empty_checkpoint_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("empty");
        save_checkpoint(&Checkpoint::new("empty"), &dir).unwrap();
        assert_eq!(read_manifest(&dir).unwrap(), vec![]);
        let back = load_checkpoint(&dir).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.model_id, "empty");
    }

    #[test]
    fn safetensors_reader() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.safetensors");
        let header = r#"{"__metadata__":{"format":"pt"},"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]},"b":{"dtype":"F64","shape":[1],"data_offsets":[16,24]}}"#;
        let mut bytes = (header.len() as u64).to_le_bytes().to_vec();
        bytes.extend_from_slice(header.as_bytes());
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&7.5f64.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        let ckpt = load_any(&path).unwrap();
        assert_eq!(ckpt.model_id, "m");
        assert_eq!(ckpt.get("w"), Some(&mat(&[&[1.0, 2.0], &[3.0, 4.0]])));
        assert_eq!(ckpt.get("b").unwrap().data(), &[7.5]);
    }

    #[test]
    fn deltas_and_apply() {
        let pre = Checkpoint::from_params("pre", [("w", mat(&[&[0.0]]))]).unwrap();
        let ft = Checkpoint::from_params("ft", [("w", mat(&[&[3.0]]))]).unwrap();
        let deltas = compute_deltas(std::slice::from_ref(&ft), &pre).unwrap();
        assert_eq!(deltas.matrices["w"].deltas()[0].data(), &[3.0]);

        let same = compute_deltas(&[pre.clone(), pre.clone().with_model_id("b")], &pre).unwrap();
        assert!(same.matrices["w"].deltas().iter().all(WeightMatrix::is_zero));

        let one = Checkpoint::from_params("p", [("w", mat(&[&[1.0]]))]).unwrap();
        let merged = BTreeMap::from([("w".to_string(), mat(&[&[2.0]]))]);
        let out = apply_merged(&one, &merged, 0.5).unwrap();
        assert_eq!(out.get("w").unwrap().data(), &[2.0]);

        let zeros = BTreeMap::from([("w".to_string(), mat(&[&[0.0]]))]);
        assert_eq!(apply_merged(&one, &zeros, 1.0).unwrap().params(), one.params());
    }

    #[test]
    fn missing_layer_is_named() {
        let pre = Checkpoint::from_params(
            "pre",
            [("a", mat(&[&[0.0]])), ("b", mat(&[&[0.0]]))],
        )
        .unwrap();
        let full = pre.clone().with_model_id("x");
        let partial = Checkpoint::from_params("y", [("a", mat(&[&[1.0]]))]).unwrap();
        match compute_deltas(&[full, partial], &pre) {
            Err(Error::ParameterMismatch { name, .. }) => assert_eq!(name, "b"),
            other => panic!("expected parameter mismatch, got {other:?}"),
        }
    }
}
