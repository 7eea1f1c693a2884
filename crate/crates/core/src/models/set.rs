use serde::{Deserialize, Serialize};

use crate::diff::{ParamLayout, Tape, UnaryFn, Var};
use crate::error::{Error, Result};
use crate::models::layers::{check_finite, Dense, LayerNorm, Stack};
use crate::scalar::Scalar;

/// Widths of the set network. Hidden lists exclude the end widths, which
/// are fixed by `in_dim`, `embed` and `out_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetPinnConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub set_size: usize,
    pub embed: usize,
    pub heads: usize,
    pub blocks: usize,
    pub mixer_hidden: Vec<usize>,
    pub ffn_hidden: Vec<usize>,
    pub probe_hidden: Vec<usize>,
}

impl SetPinnConfig {
    /// Full-size network (about 368K parameters in two dimensions).
    pub fn reference_default(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            set_size: 4,
            embed: 32,
            heads: 2,
            blocks: 1,
            mixer_hidden: vec![32],
            ffn_hidden: vec![256, 256],
            probe_hidden: vec![512, 512],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 || self.set_size == 0 || self.embed == 0 {
            return Err(Error::config("set network sizes must be >= 1"));
        }
        if self.heads == 0 || !self.embed.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "embedding size {} must be divisible by heads {}",
                self.embed, self.heads
            )));
        }
        if self.blocks == 0 {
            return Err(Error::config("at least one encoder block is required"));
        }
        let all = self
            .mixer_hidden
            .iter()
            .chain(&self.ffn_hidden)
            .chain(&self.probe_hidden);
        if all.into_iter().any(|&w| w == 0) {
            return Err(Error::config("hidden widths must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderBlock {
    pub query: Dense,
    pub key: Dense,
    pub value: Dense,
    pub out: Dense,
    pub norm1: LayerNorm,
    pub ffn: Stack,
    pub norm2: LayerNorm,
}

/// Mixer → post-norm attention encoder → probe, applied to sets of points.
#[derive(Clone, Debug, PartialEq)]
pub struct SetPinn {
    pub config: SetPinnConfig,
    pub mixer: Stack,
    pub blocks: Vec<EncoderBlock>,
    pub probe: Stack,
    pub layout: ParamLayout,
}

/// Tape nodes of one batched set forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct SetForwardResult {
    /// `(sets·s) × c` outputs, each row's jets taken in its own coordinates.
    pub output: Var,
    /// Mixer embeddings, `(sets·s) × embed`.
    pub mixed: Var,
    /// Encoder output, `(sets·s) × embed`.
    pub encoded: Var,
    /// Per block: weights `(q·s) × heads`, row `q·s + j` is query row `q`
    /// against key `j` of its set. Without views `q` ranges over the input
    /// rows; with views (several blocks) over `rows·s` view rows.
    pub attention: Vec<Var>,
}

impl SetPinn {
    pub fn new(config: SetPinnConfig) -> Result<Self> {
        config.validate()?;
        let mut layout = ParamLayout::new();
        let e = config.embed;
        let widths = |a: usize, mid: &[usize], b: usize| {
            let mut w = vec![a];
            w.extend(mid);
            w.push(b);
            w
        };
        let mixer = Stack::register(
            &mut layout,
            "mixer",
            &widths(config.in_dim, &config.mixer_hidden, e),
            UnaryFn::Tanh,
        );
        let blocks = (0..config.blocks)
            .map(|b| {
                let p = format!("enc{b}");
                EncoderBlock {
                    query: Dense::register(&mut layout, &format!("{p}.q"), e, e),
                    key: Dense::register(&mut layout, &format!("{p}.k"), e, e),
                    value: Dense::register(&mut layout, &format!("{p}.v"), e, e),
                    out: Dense::register(&mut layout, &format!("{p}.o"), e, e),
                    norm1: LayerNorm::register(&mut layout, &format!("{p}.ln1"), e),
                    ffn: Stack::register(
                        &mut layout,
                        &format!("{p}.ffn"),
                        &widths(e, &config.ffn_hidden, e),
                        UnaryFn::Tanh,
                    ),
                    norm2: LayerNorm::register(&mut layout, &format!("{p}.ln2"), e),
                }
            })
            .collect();
        let probe = Stack::register(
            &mut layout,
            "probe",
            &widths(e, &config.probe_hidden, config.out_dim),
            UnaryFn::Tanh,
        );
        Ok(Self {
            config,
            mixer,
            blocks,
            probe,
            layout,
        })
    }

    pub fn set_size(&self) -> usize {
        self.config.set_size
    }

    /// Forward pass over consecutive groups of `set_size` rows of `x`.
    pub fn forward_sets<T: Scalar>(
        &self,
        tape: &mut Tape<'_, T>,
        x: Var,
    ) -> Result<SetForwardResult> {
        let s = self.config.set_size;
        let rows = tape.value(x).rows();
        if !rows.is_multiple_of(s) {
            return Err(Error::usage(format!(
                "{rows} points do not form whole sets of {s}"
            )));
        }
        let mut layer = 0;
        let mixed = self.mixer.apply(tape, x, layer)?;
        layer += self.mixer.layers.len();

        // A single block sees other members only through their mixer rows,
        // which do not depend on x_i, so stripping their jets is exact. Deeper
        // stacks run one view per point: view i is the set with only member
        // i's jets live, and u_i is read from row i of view i.
        let views = self.blocks.len() > 1;
        let mut h = mixed;
        if views {
            let mut src = Vec::with_capacity(rows * s);
            let mut keep = Vec::with_capacity(rows * s);
            for r in 0..rows {
                let g = r / s;
                for j in 0..s {
                    src.push(g * s + j);
                    keep.push(g * s + j == r);
                }
            }
            h = tape.gather(mixed, src, keep);
        }

        // Pair expansion: row (g·s + i)·s + j pairs query i with key j of set g.
        let expanded = tape.value(h).rows();
        let mut query_rows = Vec::with_capacity(expanded * s);
        let mut key_rows = Vec::with_capacity(expanded * s);
        let mut own = Vec::with_capacity(expanded * s);
        for q in 0..expanded {
            let g = q / s;
            for j in 0..s {
                query_rows.push(q);
                key_rows.push(g * s + j);
                own.push(views || g * s + j == q);
            }
        }

        let mut attention = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, a) = self.attend(tape, block, h, &query_rows, &key_rows, &own);
            attention.push(a);
            check_finite(tape, y, layer)?;
            layer += 1;
            let r = tape.add(h, y);
            let r = block.norm1.apply(tape, r);
            let f = block.ffn.apply(tape, r, layer)?;
            layer += block.ffn.layers.len();
            let r2 = tape.add(r, f);
            h = block.norm2.apply(tape, r2);
            check_finite(tape, h, layer)?;
        }
        if views {
            let diag: Vec<usize> = (0..rows).map(|r| r * s + r % s).collect();
            h = tape.gather(h, diag, vec![true; rows]);
        }
        let output = self.probe.apply(tape, h, layer)?;
        Ok(SetForwardResult {
            output,
            mixed,
            encoded: h,
            attention,
        })
    }

    /// Multi-head scaled dot-product self-attention within each set. Keys
    /// and values of other set members enter with their jets stripped, so
    /// each output's derivatives are partials in its own coordinates.
    fn attend<T: Scalar>(
        &self,
        tape: &mut Tape<'_, T>,
        block: &EncoderBlock,
        h: Var,
        query_rows: &[usize],
        key_rows: &[usize],
        own: &[bool],
    ) -> (Var, Var) {
        let s = self.config.set_size;
        let heads = self.config.heads;
        let dh = self.config.embed / heads;
        let q = block.query.apply(tape, h);
        let k = block.key.apply(tape, h);
        let v = block.value.apply(tape, h);
        let qp = tape.gather(q, query_rows.to_vec(), vec![true; query_rows.len()]);
        let kp = tape.gather(k, key_rows.to_vec(), own.to_vec());
        let vp = tape.gather(v, key_rows.to_vec(), own.to_vec());

        let prod = tape.mul(qp, kp);
        let scores = tape.sum_col_groups(prod, dh);
        let scores = tape.scale(scores, T::one() / T::lit(dh as f64).sqrt());

        // softmax over keys; the max shift is a constant and cancels exactly
        let sv = tape.value(scores);
        let pairs = sv.rows();
        let mut shift = vec![T::zero(); pairs * heads];
        for base in (0..pairs).step_by(s) {
            for c in 0..heads {
                let m = (base..base + s)
                    .map(|r| sv.value(r, c))
                    .fold(T::neg_infinity(), T::max);
                for r in base..base + s {
                    shift[r * heads + c] = -m;
                }
            }
        }
        let shifted = tape.shift(scores, &shift);
        let e = tape.exp(shifted);
        let denom = tape.sum_row_groups(e, s);
        let inv = tape.recip(denom);
        let back: Vec<usize> = (0..pairs).map(|r| r / s).collect();
        let inv = tape.gather(inv, back, vec![true; pairs]);
        let weights = tape.mul(e, inv);

        let wide = tape.repeat_cols(weights, dh);
        let weighted = tape.mul(wide, vp);
        let ctx = tape.sum_row_groups(weighted, s);
        (block.out.apply(tape, ctx), weights)
    }
}
