//! On-disk run container: a directory with `manifest.json` and one raw
//! little-endian binary file per dataset.
//!
//! Real datasets are IEEE-754 `f64`; complex datasets are interleaved
//! `(re, im)` `f64` pairs. Arrays are row-major with the last axis fastest,
//! so a grid field of shape `[ny, nx]` matches the in-memory layout. The
//! manifest is written last and atomically; a directory without it is an
//! incomplete run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::real::Real;

pub const FORMAT: &str = "tdhf-container";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F64,
    C128,
}

impl DType {
    pub fn item_bytes(self) -> usize {
        match self {
            DType::F64 => 8,
            DType::C128 => 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub file: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub sha256: String,
}

impl DatasetEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grid description stored in manifests (internal units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
}

impl GridMeta {
    pub fn from_grid<T: Real>(g: &GridSpec<T>) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            dx: g.dx.to_f64_lossy(),
            dy: g.dy.to_f64_lossy(),
            x0: g.x0.to_f64_lossy(),
            y0: g.y0.to_f64_lossy(),
        }
    }

    pub fn to_grid<T: Real>(&self) -> Result<GridSpec<T>> {
        GridSpec::new(self.nx, self.ny, T::c(self.dx), T::c(self.dy), T::c(self.x0), T::c(self.y0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub complete: bool,
    pub datasets: Vec<DatasetEntry>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl Manifest {
    pub fn dataset(&self, name: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.name == name)
    }
}

fn file_name(name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.bin")
}

/// Streams datasets into a run directory; `finalize` commits the manifest.
#[derive(Debug)]
pub struct ContainerWriter {
    dir: PathBuf,
    kind: String,
    entries: Vec<DatasetEntry>,
    names: BTreeMap<String, usize>,
}

impl ContainerWriter {
    pub fn create(dir: impl AsRef<Path>, kind: impl Into<String>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            fs::remove_file(&manifest)?;
        }
        Ok(Self {
            dir,
            kind: kind.into(),
            entries: Vec::new(),
            names: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    fn put(&mut self, name: &str, dtype: DType, shape: &[usize], bytes: Vec<u8>) -> Result<()> {
        if self.names.contains_key(name) {
            return Err(Error::Container(format!("duplicate dataset `{name}`")));
        }
        let file = file_name(name);
        if self.entries.iter().any(|e| e.file == file) {
            return Err(Error::Container(format!("dataset `{name}` collides with an existing file name")));
        }
        let mut f = fs::File::create(self.dir.join(&file))?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        let entry = DatasetEntry {
            name: name.to_string(),
            file,
            dtype,
            shape: shape.to_vec(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        };
        self.names.insert(name.to_string(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn write_real<T: Real>(&mut self, name: &str, shape: &[usize], data: &[T]) -> Result<()> {
        check_shape(name, shape, data.len())?;
        let mut bytes = Vec::with_capacity(data.len() * 8);
        for v in data {
            bytes.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        self.put(name, DType::F64, shape, bytes)
    }

    pub fn write_complex<T: Real>(&mut self, name: &str, shape: &[usize], data: &[Complex<T>]) -> Result<()> {
        check_shape(name, shape, data.len())?;
        let mut bytes = Vec::with_capacity(data.len() * 16);
        for v in data {
            bytes.extend_from_slice(&v.re.to_f64_lossy().to_le_bytes());
            bytes.extend_from_slice(&v.im.to_f64_lossy().to_le_bytes());
        }
        self.put(name, DType::C128, shape, bytes)
    }

    /// Writes the manifest (atomically, via rename) and returns it.
    pub fn finalize(self, complete: bool, metadata: serde_json::Value) -> Result<Manifest> {
        let manifest = Manifest {
            format: FORMAT.to_string(),
            version: FORMAT_VERSION,
            kind: self.kind,
            complete,
            datasets: self.entries,
            metadata,
        };
        let tmp = self.dir.join(format!("{MANIFEST}.tmp"));
        let text = serde_json::to_string_pretty(&manifest)?;
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(MANIFEST))?;
        Ok(manifest)
    }
}

fn check_shape(name: &str, shape: &[usize], len: usize) -> Result<()> {
    if shape.iter().product::<usize>() != len {
        return Err(Error::Container(format!(
            "dataset `{name}`: shape {shape:?} does not match {len} values"
        )));
    }
    Ok(())
}

/// Read access to a finalized container.
#[derive(Clone, Debug)]
pub struct Container {
    dir: PathBuf,
    pub manifest: Manifest,
}

impl Container {
    /// Opens a container given its directory or the path of its manifest.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (dir, manifest_path) = if path.is_dir() {
            (path.to_path_buf(), path.join(MANIFEST))
        } else {
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
            (dir, path.to_path_buf())
        };
        let text = fs::read_to_string(&manifest_path)
            .map_err(|e| Error::Container(format!("cannot read {}: {e}", manifest_path.display())))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Container(format!("malformed manifest: {e}")))?;
        if manifest.format != FORMAT {
            return Err(Error::Container(format!("unknown format `{}`", manifest.format)));
        }
        if manifest.version != FORMAT_VERSION {
            return Err(Error::Container(format!("unsupported version {}", manifest.version)));
        }
        Ok(Self { dir, manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry(&self, name: &str) -> Result<&DatasetEntry> {
        self.manifest
            .dataset(name)
            .ok_or_else(|| Error::Container(format!("dataset `{name}` not in manifest")))
    }

    fn raw(&self, entry: &DatasetEntry) -> Result<Vec<u8>> {
        let bytes = fs::read(self.dir.join(&entry.file)).map_err(|e| Error::Integrity {
            dataset: entry.name.clone(),
            reason: format!("unreadable: {e}"),
        })?;
        let expected = entry.len() * entry.dtype.item_bytes();
        if bytes.len() != expected {
            return Err(Error::Integrity {
                dataset: entry.name.clone(),
                reason: format!("size {} bytes, expected {expected}", bytes.len()),
            });
        }
        if hex::encode(Sha256::digest(&bytes)) != entry.sha256 {
            return Err(Error::Integrity {
                dataset: entry.name.clone(),
                reason: "checksum mismatch".into(),
            });
        }
        Ok(bytes)
    }

    pub fn read_real(&self, name: &str) -> Result<Vec<f64>> {
        let entry = self.entry(name)?;
        if entry.dtype != DType::F64 {
            return Err(Error::Container(format!("dataset `{name}` is not real")));
        }
        let bytes = self.raw(entry)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    pub fn read_complex(&self, name: &str) -> Result<Vec<Complex<f64>>> {
        let entry = self.entry(name)?;
        if entry.dtype != DType::C128 {
            return Err(Error::Container(format!("dataset `{name}` is not complex")));
        }
        let bytes = self.raw(entry)?;
        Ok(bytes
            .chunks_exact(16)
            .map(|c| {
                Complex::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect())
    }

    /// Checks size and checksum of every dataset.
    pub fn verify(&self) -> Result<()> {
        for e in &self.manifest.datasets {
            self.raw(e)?;
        }
        Ok(())
    }
}
