//! Binary checkpoint: a magic line, a little-endian `u64` manifest length,
//! the JSON manifest, then one raw little-endian block per parameter in
//! manifest order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::Vocabularies;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::numerics::Tensor;

use super::TrainConfig;

pub const CHECKPOINT_MAGIC: &[u8] = b"DRPC-CHECKPOINT\n";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    fn width(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }

    /// Rounds a value the way storage at this precision would.
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::F32 => x as f32 as f64,
            Precision::F64 => x,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!("unknown precision {s:?}; expected f32 or f64"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub precision: Precision,
    pub params: Vec<ParamEntry>,
    pub model_config: ModelConfig,
    pub vocab: Vocabularies,
    pub train_config: Option<TrainConfig>,
    pub epoch: usize,
    pub dev_f1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub precision: Precision,
    pub train_config: Option<TrainConfig>,
    pub epoch: usize,
    pub dev_f1: Option<f64>,
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        Self { model, precision: Precision::F64, train_config: None, epoch: 0, dev_f1: None }
    }

    fn manifest(&self) -> Manifest {
        Manifest {
            version: CHECKPOINT_VERSION,
            precision: self.precision,
            params: self
                .model
                .store
                .iter()
                .map(|(_, name, t)| ParamEntry { name: name.to_string(), shape: t.shape().to_vec() })
                .collect(),
            model_config: self.model.config.clone(),
            vocab: self.model.vocab.clone(),
            train_config: self.train_config.clone(),
            epoch: self.epoch,
            dev_f1: self.dev_f1,
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let manifest = serde_json::to_vec(&self.manifest())?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(manifest.len() as u64).to_le_bytes())?;
        w.write_all(&manifest)?;
        let mut buf = Vec::new();
        for (_, _, t) in self.model.store.iter() {
            buf.clear();
            for &x in t.data() {
                match self.precision {
                    Precision::F32 => buf.extend_from_slice(&(x as f32).to_le_bytes()),
                    Precision::F64 => buf.extend_from_slice(&x.to_le_bytes()),
                }
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = vec![0u8; CHECKPOINT_MAGIC.len()];
        r.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format { expected: "checkpoint magic".into(), found: String::from_utf8_lossy(&magic).trim().to_string() });
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| truncated("manifest length"))?;
        let len = u64::from_le_bytes(len) as usize;
        let mut manifest = vec![0u8; len];
        r.read_exact(&mut manifest).map_err(|_| truncated("manifest"))?;
        let manifest: Manifest = serde_json::from_slice(&manifest)?;
        if manifest.version != CHECKPOINT_VERSION {
            return Err(Error::Format { expected: format!("version {CHECKPOINT_VERSION}"), found: format!("version {}", manifest.version) });
        }

        // Rebuild the layout from the stored config, then check it agrees
        // with the manifest before reading values.
        let mut model = Model::new(manifest.model_config.clone(), manifest.vocab.clone(), None, 0)?;
        let expected: Vec<ParamEntry> = model
            .store
            .iter()
            .map(|(_, name, t)| ParamEntry { name: name.to_string(), shape: t.shape().to_vec() })
            .collect();
        if expected != manifest.params {
            return Err(Error::Config(format!(
                "stored parameters {:?} do not match the layout implied by the config {:?}",
                manifest.params.iter().map(|p| &p.name).collect::<Vec<_>>(),
                expected.iter().map(|p| &p.name).collect::<Vec<_>>()
            )));
        }
        let width = manifest.precision.width();
        let ids: Vec<_> = model.store.ids().collect();
        for (id, entry) in ids.into_iter().zip(&manifest.params) {
            let count: usize = entry.shape.iter().product();
            let mut raw = vec![0u8; count * width];
            r.read_exact(&mut raw).map_err(|_| truncated(&entry.name))?;
            let data = raw
                .chunks_exact(width)
                .map(|c| match manifest.precision {
                    Precision::F32 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
                    Precision::F64 => f64::from_le_bytes(c.try_into().unwrap()),
                })
                .collect();
            model.store.set(id, Tensor::new(entry.shape.clone(), data)?)?;
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format { expected: "end of checkpoint".into(), found: format!("{} trailing bytes", rest.len()) });
        }
        Ok(Self {
            model,
            precision: manifest.precision,
            train_config: manifest.train_config,
            epoch: manifest.epoch,
            dev_f1: manifest.dev_f1,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn truncated(what: &str) -> Error {
    Error::Format { expected: format!("{what} block"), found: "end of file".into() }
}
