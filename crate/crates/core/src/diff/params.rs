use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Weight,
    Bias,
    /// Layer-norm gain, initialized to one.
    Gain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    /// `(rows, cols)`; biases and gains are `(1, n)`.
    pub shape: (usize, usize),
    pub kind: ParamKind,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named slices of the flat parameter vector, in allocation order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    entries: Vec<ParamEntry>,
    len: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves a block and returns its offset.
    pub fn push(
        &mut self,
        name: impl Into<String>,
        shape: (usize, usize),
        kind: ParamKind,
    ) -> usize {
        let offset = self.len;
        let entry = ParamEntry {
            name: name.into(),
            offset,
            shape,
            kind,
        };
        self.len += entry.len();
        self.entries.push(entry);
        offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// SHA-256 over names, shapes and kinds; identical for identical architectures.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.name.as_bytes());
            h.update([0u8]);
            h.update((e.offset as u64).to_le_bytes());
            h.update((e.shape.0 as u64).to_le_bytes());
            h.update((e.shape.1 as u64).to_le_bytes());
            h.update([e.kind as u8]);
        }
        h.finalize().into()
    }
}

/// Flat parameter array θ.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> ParamVector<T> {
    pub fn zeros(layout: &ParamLayout) -> Self {
        Self {
            values: vec![T::zero(); layout.len()],
        }
    }

    pub fn from_vec(layout: &ParamLayout, values: Vec<T>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::config(format!(
                "parameter vector has {} entries, layout expects {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    /// Splits into one owned block per layout entry.
    pub fn unflatten(&self, layout: &ParamLayout) -> Vec<Vec<T>> {
        layout
            .entries()
            .iter()
            .map(|e| self.values[e.range()].to_vec())
            .collect()
    }

    /// Inverse of [`unflatten`](Self::unflatten).
    pub fn flatten(layout: &ParamLayout, blocks: &[Vec<T>]) -> Result<Self> {
        if blocks.len() != layout.entries().len() {
            return Err(Error::config("block count does not match layout"));
        }
        let mut values = Vec::with_capacity(layout.len());
        for (e, b) in layout.entries().iter().zip(blocks) {
            if b.len() != e.len() {
                return Err(Error::config(format!("block {} has wrong length", e.name)));
            }
            values.extend_from_slice(b);
        }
        Ok(Self { values })
    }
}
