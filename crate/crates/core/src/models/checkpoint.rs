//! JSON checkpoint container.
//!
//! ```json
//! {
//!   "format": "ddkseg-checkpoint",
//!   "version": 1,
//!   "config": { ...ModelConfig... },
//!   "tensors": [ { "name": "block0.conv.weight", "shape": [32, 1, 16], "data": [...] }, ... ]
//! }
//! ```
//!
//! `tensors` lists every trainable parameter in visiting order followed by
//! the batch-norm running moments (`blockN.bn.running_mean`/`running_var`).
//! Values are `f32`, row-major. Loading rebuilds the network from `config`
//! and requires the names, order and shapes to match exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, Network};
use crate::nn::Parameterized;

pub const CHECKPOINT_FORMAT: &str = "ddkseg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_network(net: &Network<f32>) -> Self {
        let mut net = net.clone();
        let mut tensors = Vec::new();
        net.visit_params(&mut |name, p| {
            tensors.push(NamedTensor {
                name: name.to_string(),
                shape: p.shape.clone(),
                data: p.value.clone(),
            })
        });
        net.visit_buffers(&mut |name, b| {
            tensors.push(NamedTensor {
                name: name.to_string(),
                shape: vec![b.len()],
                data: b.clone(),
            })
        });
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: net.config,
            tensors,
        }
    }

    pub fn into_network(self) -> Result<Network<f32>, ModelError> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        self.config.validate()?;
        let mut net = Network::<f32>::init_unchecked(&self.config, 0)?;
        let mut it = self.tensors.into_iter();
        let mut error = None;
        let mut take = |name: &str, shape: &[usize], dst: &mut Vec<f32>| {
            if error.is_some() {
                return;
            }
            match it.next() {
                Some(t) if t.name == name && t.shape == shape && t.data.len() == dst.len() => {
                    *dst = t.data
                }
                Some(t) => {
                    error = Some(format!(
                        "expected `{name}` {shape:?}, found `{}` {:?} ({} values)",
                        t.name,
                        t.shape,
                        t.data.len()
                    ))
                }
                None => error = Some(format!("missing tensor `{name}`")),
            }
        };
        net.visit_params(&mut |name, p| {
            let shape = p.shape.clone();
            take(name, &shape, &mut p.value)
        });
        net.visit_buffers(&mut |name, b| {
            let shape = [b.len()];
            take(name, &shape, b)
        });
        if let Some(e) = error {
            return Err(ModelError::Checkpoint(e));
        }
        if let Some(extra) = it.next() {
            return Err(ModelError::Checkpoint(format!(
                "unexpected extra tensor `{}`",
                extra.name
            )));
        }
        Ok(net)
    }
}

pub fn write_checkpoint(net: &Network<f32>, writer: impl Write) -> Result<(), ModelError> {
    serde_json::to_writer(writer, &Checkpoint::from_network(net))?;
    Ok(())
}

pub fn read_checkpoint(reader: impl Read) -> Result<Network<f32>, ModelError> {
    let ckpt: Checkpoint = serde_json::from_reader(reader)?;
    ckpt.into_network()
}

pub fn save_checkpoint(net: &Network<f32>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network<f32>, ModelError> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
