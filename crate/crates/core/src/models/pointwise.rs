use serde::{Deserialize, Serialize};

use crate::diff::{ParamLayout, Tape, UnaryFn, Var};
use crate::error::{Error, Result};
use crate::models::layers::{check_finite, Dense};
use crate::scalar::Scalar;

/// Pointwise network widths: `in_dim → hidden[0] → … → out_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden: Vec<usize>,
}

impl MlpConfig {
    pub fn new(in_dim: usize, out_dim: usize, hidden: Vec<usize>) -> Self {
        Self {
            in_dim,
            out_dim,
            hidden,
        }
    }

    /// Four linear layers of width 512.
    pub fn pinn_default(in_dim: usize, out_dim: usize) -> Self {
        Self::new(in_dim, out_dim, vec![512; 3])
    }

    /// Four quadratic blocks of width 256.
    pub fn qres_default(in_dim: usize, out_dim: usize) -> Self {
        Self::new(in_dim, out_dim, vec![256; 4])
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::config("network input and output sizes must be >= 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be >= 1"));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.in_dim];
        w.extend(&self.hidden);
        w.push(self.out_dim);
        w
    }
}

/// Tanh MLP; with `first_sin` the first activation is `sin` (FLS).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub first_sin: bool,
    pub layers: Vec<Dense>,
    pub layout: ParamLayout,
}

impl Mlp {
    pub fn new(config: MlpConfig, first_sin: bool) -> Result<Self> {
        config.validate()?;
        let mut layout = ParamLayout::new();
        let layers = config
            .widths()
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::register(&mut layout, &format!("l{i}"), w[0], w[1]))
            .collect();
        Ok(Self {
            config,
            first_sin,
            layers,
            layout,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, mut x: Var) -> Result<Var> {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.apply(tape, x);
            if i < last {
                let f = if i == 0 && self.first_sin {
                    UnaryFn::Sin
                } else {
                    UnaryFn::Tanh
                };
                x = tape.unary(x, f);
            }
            check_finite(tape, x, i)?;
        }
        Ok(x)
    }
}

/// One quadratic residual block: `tanh(x1 ⊙ x2 + x1)`, `x1 = W1h + b1`, `x2 = W2h + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadBlock {
    pub first: Dense,
    pub second: Dense,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QRes {
    pub config: MlpConfig,
    pub blocks: Vec<QuadBlock>,
    pub head: Dense,
    pub layout: ParamLayout,
}

impl QRes {
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut layout = ParamLayout::new();
        let w = config.widths();
        let n = w.len();
        let blocks = w[..n - 1]
            .windows(2)
            .enumerate()
            .map(|(i, p)| QuadBlock {
                first: Dense::register(&mut layout, &format!("q{i}.1"), p[0], p[1]),
                second: Dense::register(&mut layout, &format!("q{i}.2"), p[0], p[1]),
            })
            .collect();
        let head = Dense::register(&mut layout, "out", w[n - 2], w[n - 1]);
        Ok(Self {
            config,
            blocks,
            head,
            layout,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, mut x: Var) -> Result<Var> {
        for (i, b) in self.blocks.iter().enumerate() {
            let x1 = b.first.apply(tape, x);
            let x2 = b.second.apply(tape, x);
            let q = tape.mul(x1, x2);
            let s = tape.add(q, x1);
            x = tape.tanh(s);
            check_finite(tape, x, i)?;
        }
        let y = self.head.apply(tape, x);
        check_finite(tape, y, self.blocks.len())?;
        Ok(y)
    }
}
