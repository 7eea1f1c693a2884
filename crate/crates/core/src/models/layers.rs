use crate::diff::{ParamKind, ParamLayout, Tape, UnaryFn, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Affine map `x Wᵀ + b` registered in a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub weight: usize,
    pub bias: usize,
}

impl Dense {
    pub fn register(layout: &mut ParamLayout, name: &str, input: usize, output: usize) -> Self {
        let weight = layout.push(format!("{name}.w"), (output, input), ParamKind::Weight);
        let bias = layout.push(format!("{name}.b"), (1, output), ParamKind::Bias);
        Self {
            input,
            output,
            weight,
            bias,
        }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Var {
        tape.linear(x, self.weight, self.output, Some(self.bias))
    }
}

/// Per-row normalization over the columns with learned gain and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub width: usize,
    pub gain: usize,
    pub bias: usize,
    pub eps: f64,
}

impl LayerNorm {
    pub fn register(layout: &mut ParamLayout, name: &str, width: usize) -> Self {
        let gain = layout.push(format!("{name}.g"), (1, width), ParamKind::Gain);
        let bias = layout.push(format!("{name}.b"), (1, width), ParamKind::Bias);
        Self {
            width,
            gain,
            bias,
            eps: 1e-5,
        }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Var {
        let n = self.width;
        let inv_n = T::one() / T::lit(n as f64);
        let mean = tape.sum_col_groups(x, n);
        let mean = tape.scale(mean, inv_n);
        let mean = tape.repeat_cols(mean, n);
        let c = tape.sub(x, mean);
        let sq = tape.mul(c, c);
        let var = tape.sum_col_groups(sq, n);
        let var = tape.scale(var, inv_n);
        let var = tape.add_scalar(var, T::lit(self.eps));
        let inv = tape.rsqrt(var);
        let inv = tape.repeat_cols(inv, n);
        let y = tape.mul(c, inv);
        tape.col_affine(y, self.gain, self.bias)
    }
}

/// Stack of dense layers with an activation after every layer but the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Stack {
    pub layers: Vec<Dense>,
    pub activation: UnaryFn,
}

impl Stack {
    pub fn register(
        layout: &mut ParamLayout,
        name: &str,
        widths: &[usize],
        activation: UnaryFn,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::register(layout, &format!("{name}.{i}"), w[0], w[1]))
            .collect();
        Self { layers, activation }
    }

    /// `first_layer` offsets the layer index reported on non-finite output.
    pub fn apply<T: Scalar>(
        &self,
        tape: &mut Tape<'_, T>,
        mut x: Var,
        first_layer: usize,
    ) -> Result<Var> {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.apply(tape, x);
            if i < last {
                x = tape.unary(x, self.activation);
            }
            check_finite(tape, x, first_layer + i)?;
        }
        Ok(x)
    }
}

/// Fails with the layer index when a node holds NaN or infinity.
pub fn check_finite<T: Scalar>(tape: &Tape<'_, T>, x: Var, layer: usize) -> Result<()> {
    if tape.value(x).all_finite() {
        Ok(())
    } else {
        Err(Error::non_finite("network forward pass", Some(layer)))
    }
}
