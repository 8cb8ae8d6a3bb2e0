//! Checkpoint files: model spec, parameters, optimizer state and the best
//! validation record, framed as `RNDC` containers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{layout, read_frame, write_frame, TensorEntry};
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::tensor::Tensor;

use super::adam::{AdamConfig, AdamState};

pub const MAGIC: &[u8; 4] = b"RNDC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub accuracy: f64,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub class_names: Vec<String>,
    pub params: Vec<Tensor>,
    pub adam: AdamState,
    pub best: Option<BestRecord>,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    model: ModelSpec,
    class_names: Vec<String>,
    seed: u64,
    best_val: Option<BestRecord>,
    param_count: usize,
    adam: AdamConfig,
    adam_step: u64,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn new(model: &Model, adam: &AdamState, class_names: Vec<String>, best: Option<BestRecord>, seed: u64) -> Self {
        Self {
            spec: model.spec().clone(),
            class_names,
            params: model.params().into_iter().cloned().collect(),
            adam: adam.clone(),
            best,
            seed,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_params(self.spec.clone(), self.params.clone())
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let names = self.spec.param_names();
        let tensors: Vec<(String, &Tensor)> = names
            .iter()
            .cloned()
            .zip(&self.params)
            .chain(names.iter().map(|n| format!("adam.m.{n}")).zip(&self.adam.m))
            .chain(names.iter().map(|n| format!("adam.v.{n}")).zip(&self.adam.v))
            .collect();
        let header = Header {
            model: self.spec.clone(),
            class_names: self.class_names.clone(),
            seed: self.seed,
            best_val: self.best,
            param_count: self.param_count(),
            adam: self.adam.config,
            adam_step: self.adam.t,
            tensors: layout(tensors.iter().map(|(n, t)| (n.clone(), *t))),
        };
        let mut out = Vec::new();
        write_frame(&mut out, MAGIC, VERSION, &header, tensors.iter().map(|(_, t)| *t))?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let frame = read_frame(bytes, MAGIC, VERSION)?;
        let header: Header = frame.parse_header()?;
        header
            .model
            .validate()
            .map_err(|e| Error::format(frame.payload_offset, format!("invalid model spec: {e}")))?;
        let mut tensors = frame.tensors(&header.tensors)?;
        if tensors.len() % 3 != 0 {
            return Err(Error::format(frame.payload_offset, "tensor list is not params + adam m + adam v"));
        }
        let per = tensors.len() / 3;
        let v = tensors.split_off(2 * per);
        let m = tensors.split_off(per);
        let params = tensors;
        let realized: usize = params.iter().map(Tensor::len).sum();
        if realized != header.param_count {
            return Err(Error::format(
                frame.payload_offset,
                format!("header declares {} parameters, tensors hold {realized}", header.param_count),
            ));
        }
        let shapes_match = params.iter().zip(&m).zip(&v).all(|((p, m), v)| p.shape() == m.shape() && p.shape() == v.shape());
        if !shapes_match {
            return Err(Error::format(frame.payload_offset, "optimizer moments do not match parameter shapes"));
        }
        // checks that the tensors fit the spec
        Model::from_params(header.model.clone(), params.clone())
            .map_err(|e| Error::format(frame.payload_offset, format!("parameters do not fit model spec: {e}")))?;
        header
            .adam
            .validate()
            .map_err(|e| Error::format(frame.payload_offset, e.to_string()))?;
        Ok(Self {
            spec: header.model,
            class_names: header.class_names,
            params,
            adam: AdamState {
                config: header.adam,
                m,
                v,
                t: header.adam_step,
            },
            best: header.best_val,
            seed: header.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    ckpt.save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::InitializerKind;
    use crate::rng::Rng;

    fn checkpoint() -> (Model, Checkpoint) {
        let spec = ModelSpec::rnd_cnn([16, 16, 3], 3, InitializerKind::Xavier).unwrap();
        let model: Model = Model::build(spec, &mut Rng::new(8)).unwrap();
        let adam = AdamState::new(AdamConfig::default(), &model.params()).unwrap();
        let best = Some(BestRecord { accuracy: 0.5, epoch: 2 });
        let ckpt = Checkpoint::new(&model, &adam, vec!["a".into(), "b".into(), "c".into()], best, 99);
        (model, ckpt)
    }

    #[test]
    fn round_trip_is_lossless() {
        let (model, ckpt) = checkpoint();
        let back = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.model().unwrap(), model);
    }

    #[test]
    fn header_is_readable_json() {
        let (_, ckpt) = checkpoint();
        let bytes = ckpt.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"RNDC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
        assert_eq!(header["seed"], 99);
        assert_eq!(header["tensors"][0]["name"], "conv1.kernel");
    }

    #[test]
    fn corrupted_param_count_rejected() {
        let (_, ckpt) = checkpoint();
        let bytes = ckpt.to_bytes().unwrap();
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[12..12 + len]).unwrap();
        let count = format!("\"param_count\": {}", ckpt.param_count());
        let patched = header.replacen(&count, &format!("\"param_count\": {}", ckpt.param_count() + 1), 1);
        assert_ne!(patched, header);
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(patched.len() as u32).to_le_bytes());
        out.extend_from_slice(patched.as_bytes());
        out.extend_from_slice(&bytes[12 + len..]);
        assert!(matches!(Checkpoint::from_bytes(&out), Err(Error::Format { .. })));
    }
}
