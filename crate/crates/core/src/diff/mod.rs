//! Differentiation engine: second-order forward jets in the input
//! coordinates, composed with a reverse-mode tape over network parameters.

pub mod fdcheck;
mod params;
mod tape;
mod tensor;

pub use params::{ParamEntry, ParamKind, ParamLayout, ParamVector};
pub use tape::{Tape, UnaryFn, Var};
pub use tensor::JetTensor;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Location of a jet entry on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JetHandle {
    pub var: Var,
    pub row: usize,
    pub col: usize,
}

/// A network output at one point: value, gradient and pure second
/// derivatives with respect to the point's coordinates, plus an optional
/// handle back into the tape that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffScalar<T> {
    pub value: T,
    pub d1: Vec<T>,
    pub d2: Vec<T>,
    handle: Option<JetHandle>,
}

impl<T: Scalar> DiffScalar<T> {
    /// A constant in `d` coordinates.
    pub fn constant(value: T, d: usize) -> Self {
        Self {
            value,
            d1: vec![T::zero(); d],
            d2: vec![T::zero(); d],
            handle: None,
        }
    }

    /// The identity map on coordinate `axis`.
    pub fn variable(value: T, axis: usize, d: usize) -> Self {
        let mut s = Self::constant(value, d);
        s.d1[axis] = T::one();
        s
    }

    /// Reads entry `(row, col)` of a jet node.
    pub fn from_tape(tape: &Tape<'_, T>, var: Var, row: usize, col: usize) -> Self {
        let t = tape.value(var);
        let d = t.jet_dim();
        Self {
            value: t.get(row, 0, col),
            d1: (0..d).map(|i| t.get(row, 1 + i, col)).collect(),
            d2: (0..d).map(|i| t.get(row, 1 + d + i, col)).collect(),
            handle: Some(JetHandle { var, row, col }),
        }
    }

    pub fn handle(&self) -> Option<JetHandle> {
        self.handle
    }

    pub fn dim(&self) -> usize {
        self.d1.len()
    }
}

/// `∂value/∂θ` for a scalar read from a tape.
pub fn param_gradient<T: Scalar>(scalar: &DiffScalar<T>, tape: &Tape<'_, T>) -> Result<Vec<T>> {
    let h = scalar
        .handle()
        .ok_or_else(|| Error::usage("scalar is detached from any tape"))?;
    tape.gradient_of_entry(h.var, h.row, h.col)
}

/// Jet channel selector for a column of a jet node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Deriv {
    Value,
    /// `∂/∂x_i`
    First(usize),
    /// `∂²/∂x_i²`
    Second(usize),
}

impl Deriv {
    pub fn channel(self, d: usize) -> usize {
        match self {
            Deriv::Value => 0,
            Deriv::First(i) => {
                assert!(i < d, "derivative axis out of range");
                1 + i
            }
            Deriv::Second(i) => {
                assert!(i < d, "derivative axis out of range");
                1 + d + i
            }
        }
    }
}

#[cfg(test)]
mod tests;
