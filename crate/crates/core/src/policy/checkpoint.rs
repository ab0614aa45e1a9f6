use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Architecture, PolicyParams, ValueParams};
use crate::error::{LabError, Result};

/// Parameters on disk: a JSON object with the header fields `model`,
/// `dims` and `step`, then the flat policy and value vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// "linear" or "mlp".
    pub model: String,
    /// `[input_dim]` or `[input_dim, hidden]`.
    pub dims: Vec<usize>,
    pub step: usize,
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
}

impl Checkpoint {
    pub fn new(policy: &PolicyParams, value: &ValueParams, step: usize) -> Self {
        let model = match policy.arch() {
            Architecture::Linear => "linear",
            Architecture::Mlp { .. } => "mlp",
        };
        Checkpoint {
            model: model.into(),
            dims: policy.dims(),
            step,
            policy: policy.as_slice().to_vec(),
            value: value.as_slice().to_vec(),
        }
    }

    pub fn policy_params(&self) -> Result<PolicyParams> {
        let bad = || LabError::Contract(format!("bad checkpoint dims {:?}", self.dims));
        let input = *self.dims.first().ok_or_else(bad)?;
        let arch = match (self.model.as_str(), self.dims.len()) {
            ("linear", 1) => Architecture::Linear,
            ("mlp", 2) => Architecture::Mlp { hidden: self.dims[1] },
            _ => return Err(bad()),
        };
        PolicyParams::from_flat(arch, input, self.policy.clone())
    }

    pub fn value_params(&self) -> Result<ValueParams> {
        ValueParams::from_flat(self.value.clone())
    }

    pub fn write<W: Write>(&self, w: W) -> std::io::Result<()> {
        serde_json::to_writer(w, self).map_err(std::io::Error::other)
    }

    pub fn read<R: Read>(r: R, source_name: &str) -> Result<Self> {
        serde_json::from_reader(r).map_err(|e| LabError::Parse {
            source_name: source_name.into(),
            line: e.line(),
            reason: e.to_string(),
        })
    }
}
