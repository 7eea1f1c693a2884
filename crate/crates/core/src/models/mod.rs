//! Network architectures, parameter initialization and checkpoints.

mod layers;
mod pointwise;
mod set;
#[cfg(test)]
mod tests;

use std::io::{Read, Write};

use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

pub use layers::{Dense, LayerNorm, Stack};
pub use pointwise::{Mlp, MlpConfig, QRes, QuadBlock};
pub use set::{EncoderBlock, SetForwardResult, SetPinn, SetPinnConfig};

use crate::diff::{DiffScalar, JetTensor, ParamKind, ParamLayout, ParamVector, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::Rng;
use crate::scalar::Scalar;

/// Architecture selector with its widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArchConfig {
    Pinn(MlpConfig),
    Fls(MlpConfig),
    Qres(MlpConfig),
    Setpinn(SetPinnConfig),
}

/// A constructed network with its parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Mlp(Mlp),
    QRes(QRes),
    Set(SetPinn),
}

impl Network {
    pub fn new(config: &ArchConfig) -> Result<Self> {
        Ok(match config {
            ArchConfig::Pinn(c) => Network::Mlp(Mlp::new(c.clone(), false)?),
            ArchConfig::Fls(c) => Network::Mlp(Mlp::new(c.clone(), true)?),
            ArchConfig::Qres(c) => Network::QRes(QRes::new(c.clone())?),
            ArchConfig::Setpinn(c) => Network::Set(SetPinn::new(c.clone())?),
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        match self {
            Network::Mlp(n) => &n.layout,
            Network::QRes(n) => &n.layout,
            Network::Set(n) => &n.layout,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout().len()
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Network::Mlp(n) => n.config.in_dim,
            Network::QRes(n) => n.config.in_dim,
            Network::Set(n) => n.config.in_dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Network::Mlp(n) => n.config.out_dim,
            Network::QRes(n) => n.config.out_dim,
            Network::Set(n) => n.config.out_dim,
        }
    }

    /// Points per set for set networks; `None` for pointwise networks.
    pub fn set_size(&self) -> Option<usize> {
        match self {
            Network::Set(n) => Some(n.set_size()),
            _ => None,
        }
    }

    /// Forward pass on a seeded jet input (`rows × d`); returns `rows × c`.
    /// Set networks treat consecutive groups of `set_size` rows as sets.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let cols = tape.value(x).cols();
        if cols != self.in_dim() {
            return Err(Error::config(format!(
                "input has {cols} coordinates, network expects {}",
                self.in_dim()
            )));
        }
        match self {
            Network::Mlp(n) => n.forward(tape, x),
            Network::QRes(n) => n.forward(tape, x),
            Network::Set(n) => Ok(n.forward_sets(tape, x)?.output),
        }
    }

    /// Seeds the jets of row-major `coords` and runs [`Network::forward`].
    pub fn forward_points<T: Scalar>(&self, tape: &mut Tape<'_, T>, coords: &[T]) -> Result<Var> {
        let d = self.in_dim();
        if !coords.len().is_multiple_of(d) {
            return Err(Error::config(format!(
                "coordinate array length {} is not a multiple of {d}",
                coords.len()
            )));
        }
        let x = tape.constant(JetTensor::seeded(coords.len() / d, d, coords));
        self.forward(tape, x)
    }
}

/// Output and input derivatives of a pointwise network at one point.
pub fn forward_with_derivatives<T: Scalar>(
    net: &Network,
    x: &[T],
    theta: &ParamVector<T>,
) -> Result<Vec<DiffScalar<T>>> {
    if net.set_size().is_some() {
        return Err(Error::usage(
            "set networks are evaluated on whole sets; use set_forward",
        ));
    }
    check_theta(net, theta)?;
    if x.len() != net.in_dim() {
        return Err(Error::config(format!(
            "point has {} coordinates, network expects {}",
            x.len(),
            net.in_dim()
        )));
    }
    let mut tape = Tape::new(theta.as_slice());
    let u = net.forward_points(&mut tape, x)?;
    Ok((0..net.out_dim())
        .map(|c| DiffScalar::from_tape(&tape, u, 0, c))
        .collect())
}

/// Per-point outputs for one set; `points` holds exactly `set_size` rows.
pub fn set_forward<T: Scalar>(
    net: &SetPinn,
    theta: &ParamVector<T>,
    points: &[T],
) -> Result<Vec<Vec<DiffScalar<T>>>> {
    let d = net.config.in_dim;
    if points.len() != net.set_size() * d {
        return Err(Error::usage(format!(
            "set has {} coordinates, expected {} points of dimension {d}",
            points.len(),
            net.set_size()
        )));
    }
    if theta.len() != net.layout.len() {
        return Err(Error::config(
            "parameter vector does not match the network layout",
        ));
    }
    let mut tape = Tape::new(theta.as_slice());
    let x = tape.constant(JetTensor::seeded(net.set_size(), d, points));
    let r = net.forward_sets(&mut tape, x)?;
    Ok((0..net.set_size())
        .map(|i| {
            (0..net.config.out_dim)
                .map(|c| DiffScalar::from_tape(&tape, r.output, i, c))
                .collect()
        })
        .collect())
}

fn check_theta<T: Scalar>(net: &Network, theta: &ParamVector<T>) -> Result<()> {
    if theta.len() != net.num_params() {
        return Err(Error::config(format!(
            "parameter vector has {} entries, network needs {}",
            theta.len(),
            net.num_params()
        )));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases, unit gains.
pub fn init_params<T: Scalar>(layout: &ParamLayout, rng: &mut Rng) -> ParamVector<T> {
    let mut values = vec![T::zero(); layout.len()];
    for entry in layout.entries() {
        let slot = &mut values[entry.range()];
        match entry.kind {
            ParamKind::Weight => {
                let (fan_out, fan_in) = entry.shape;
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                for v in slot {
                    *v = T::lit(dist.sample(rng));
                }
            }
            ParamKind::Bias => {}
            ParamKind::Gain => slot.fill(T::one()),
        }
    }
    ParamVector::from_vec(layout, values).expect("length matches layout")
}

/// Writes the layout digest followed by the parameters as little-endian f64.
pub fn write_checkpoint<T: Scalar, W: Write>(
    layout: &ParamLayout,
    theta: &ParamVector<T>,
    mut out: W,
) -> Result<()> {
    out.write_all(&layout.digest())?;
    for v in theta.as_slice() {
        out.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

/// Reads a checkpoint, refusing it when the digest names another layout.
pub fn read_checkpoint<T: Scalar, R: Read>(
    layout: &ParamLayout,
    mut input: R,
) -> Result<ParamVector<T>> {
    let mut digest = [0u8; 32];
    input.read_exact(&mut digest)?;
    if digest != layout.digest() {
        return Err(Error::config(
            "checkpoint layout digest does not match the configured network",
        ));
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * layout.len() {
        return Err(Error::Parse(format!(
            "checkpoint holds {} bytes of parameters, layout needs {}",
            bytes.len(),
            8 * layout.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    ParamVector::from_vec(layout, values)
}

/// Anything that maps seeded coordinates to output jets on a tape.
pub trait FieldModel<T: Scalar> {
    /// Points per set, or `None` for pointwise models.
    fn set_size(&self) -> Option<usize>;
    fn forward_points(&self, tape: &mut Tape<'_, T>, coords: &[T]) -> Result<Var>;
}

impl<T: Scalar> FieldModel<T> for Network {
    fn set_size(&self) -> Option<usize> {
        Network::set_size(self)
    }

    fn forward_points(&self, tape: &mut Tape<'_, T>, coords: &[T]) -> Result<Var> {
        Network::forward_points(self, tape, coords)
    }
}

/// A problem's reference solution posing as a parameter-free model.
pub struct ReferenceModel<'a>(pub &'a crate::pde::PdeProblem);

impl<T: Scalar> FieldModel<T> for ReferenceModel<'_> {
    fn set_size(&self) -> Option<usize> {
        None
    }

    fn forward_points(&self, tape: &mut Tape<'_, T>, coords: &[T]) -> Result<Var> {
        let d = self.0.dim();
        let c = self.0.out_dim();
        let rows = coords.len() / d;
        let mut t = JetTensor::zeros(rows, c, 1 + 2 * d);
        for (r, x) in coords.chunks_exact(d).enumerate() {
            let xf: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
            for (k, s) in self.0.solution_jet(&xf).iter().enumerate() {
                t.channel_mut(r, 0)[k] = T::lit(s.value);
                for i in 0..d {
                    t.channel_mut(r, 1 + i)[k] = T::lit(s.d1[i]);
                    t.channel_mut(r, 1 + d + i)[k] = T::lit(s.d2[i]);
                }
            }
        }
        Ok(tape.constant(t))
    }
}

/// Rows evaluated per tape in [`predict_values`].
const PREDICT_CHUNK: usize = 1024;

/// First output component at each row of `coords`, without input jets.
///
/// Set networks need `partition`: points are grouped by element, and set
/// `j` of an element with `n` points in `q` sets takes points
/// `j, j + q, j + 2q, …` (mod `n`), so every set spans the element and a
/// short element reuses its own points. Each point's prediction comes from
/// its first occurrence.
pub fn predict_values(
    net: &Network,
    theta: &[f64],
    coords: &[f64],
    partition: Option<&crate::geometry::Partition<f64>>,
) -> Result<Vec<f64>> {
    let d = net.in_dim();
    if theta.len() != net.num_params() {
        return Err(Error::config(
            "parameter vector does not match the network layout",
        ));
    }
    if !coords.len().is_multiple_of(d) {
        return Err(Error::config(format!(
            "coordinate array length {} is not a multiple of {d}",
            coords.len()
        )));
    }
    let n = coords.len() / d;
    let c = net.out_dim();
    let run = |rows: &[usize]| -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            x.extend_from_slice(&coords[r * d..(r + 1) * d]);
        }
        let mut tape = Tape::new(theta);
        let input = tape.constant(JetTensor::plain(rows.len(), d, x));
        let out = net.forward(&mut tape, input)?;
        let t = tape.value(out);
        Ok((0..rows.len()).map(|r| t.value(r, 0)).collect())
    };
    debug_assert!(c >= 1);

    let Some(s) = net.set_size() else {
        let mut out = Vec::with_capacity(n);
        let all: Vec<usize> = (0..n).collect();
        for chunk in all.chunks(PREDICT_CHUNK) {
            out.extend(run(chunk)?);
        }
        return Ok(out);
    };

    let partition =
        partition.ok_or_else(|| Error::usage("set networks need a partition to form sets"))?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); partition.len()];
    for r in 0..n {
        let k = partition
            .locate(&coords[r * d..(r + 1) * d])
            .ok_or_else(|| {
                Error::usage(format!("point {r} lies outside the partitioned domain"))
            })?;
        members[k].push(r);
    }
    let mut order = Vec::new();
    for m in members.iter().filter(|m| !m.is_empty()) {
        // strided so each set spans its element, as a random draw would
        let sets = m.len().div_ceil(s);
        order.extend((0..sets).flat_map(|j| (0..s).map(move |k| m[(j + k * sets) % m.len()])));
    }
    let mut out = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for chunk in order.chunks(PREDICT_CHUNK / s * s) {
        for (&r, v) in chunk.iter().zip(run(chunk)?) {
            if !seen[r] {
                seen[r] = true;
                out[r] = v;
            }
        }
    }
    Ok(out)
}
