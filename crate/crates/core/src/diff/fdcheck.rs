//! Central finite-difference oracles for jets and parameter gradients.

use crate::diff::{JetTensor, Tape, Var};

/// Expression over seeded inputs; returns the output node.
pub type Build<'a> = dyn Fn(&mut Tape<'_, f64>, Var) -> Var + 'a;

/// Step for first and second input derivatives.
pub const INPUT_STEP: f64 = 1e-4;
/// Steps tried, in order, for parameter gradients.
pub const PARAM_STEPS: [f64; 3] = [1e-6, 1e-5, 1e-4];

/// `|a − b| / max(|a|, |b|, 1e-2)`; the floor keeps near-zero entries from
/// being judged on roundoff alone.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-2)
}

/// Largest relative errors of propagated first/second jets.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JetErrors {
    pub d1: f64,
    pub d2: f64,
}

fn eval_values(params: &[f64], coords: &[f64], rows: usize, d: usize, f: &Build) -> Vec<f64> {
    let mut tape = Tape::new(params);
    let x = tape.constant(JetTensor::seeded(rows, d, coords));
    let y = f(&mut tape, x);
    tape.value(y).values()
}

/// Compares every output column's jets with central differences in the
/// coordinates of its own row.
pub fn input_jet_errors(
    params: &[f64],
    coords: &[f64],
    rows: usize,
    d: usize,
    f: &Build,
) -> JetErrors {
    let mut tape = Tape::new(params);
    let x = tape.constant(JetTensor::seeded(rows, d, coords));
    let y = f(&mut tape, x);
    let yt = tape.value(y).clone();
    assert_eq!(
        yt.rows(),
        rows,
        "expression must keep one output row per input row"
    );
    let h = INPUT_STEP;
    let mut worst = JetErrors::default();
    for r in 0..rows {
        for i in 0..d {
            let mut plus = coords.to_vec();
            let mut minus = coords.to_vec();
            plus[r * d + i] += h;
            minus[r * d + i] -= h;
            let fp = eval_values(params, &plus, rows, d, f);
            let fm = eval_values(params, &minus, rows, d, f);
            for col in 0..yt.cols() {
                let k = r * yt.cols() + col;
                let f0 = yt.value(r, col);
                let fd1 = (fp[k] - fm[k]) / (2.0 * h);
                let fd2 = (fp[k] - 2.0 * f0 + fm[k]) / (h * h);
                worst.d1 = worst.d1.max(rel_err(yt.get(r, 1 + i, col), fd1));
                worst.d2 = worst.d2.max(rel_err(yt.get(r, 1 + d + i, col), fd2));
            }
        }
    }
    worst
}

/// `Σ (every jet channel of y)²`, so gradients pass through derivative channels.
pub fn jet_energy(tape: &mut Tape<'_, f64>, y: Var) -> Var {
    let (cols, ch) = (tape.value(y).cols(), tape.value(y).channels());
    let mut acc: Option<Var> = None;
    for col in 0..cols {
        for c in 0..ch {
            let v = tape.channel(y, col, c);
            let sq = tape.mul(v, v);
            let s = tape.sum(sq);
            acc = Some(match acc {
                None => s,
                Some(a) => tape.add(a, s),
            });
        }
    }
    acc.expect("expression has at least one column")
}

/// Largest relative error of `∂(jet energy)/∂θ_j` over `indices` (all
/// parameters when `None`).
///
/// Each entry is scored by the best central difference over
/// [`PARAM_STEPS`]: cancellation noise in a large energy can swamp the
/// smallest step, while truncation error grows with the larger ones.
pub fn param_grad_error(
    params: &[f64],
    coords: &[f64],
    rows: usize,
    d: usize,
    f: &Build,
    indices: Option<&[usize]>,
) -> f64 {
    let loss_of = |p: &[f64]| {
        let mut tape = Tape::new(p);
        let x = tape.constant(JetTensor::seeded(rows, d, coords));
        let y = f(&mut tape, x);
        let l = jet_energy(&mut tape, y);
        tape.scalar(l)
    };
    let mut tape = Tape::new(params);
    let x = tape.constant(JetTensor::seeded(rows, d, coords));
    let y = f(&mut tape, x);
    let l = jet_energy(&mut tape, y);
    let g = tape.gradient(l).expect("energy is a 1 × 1 node");
    let all: Vec<usize>;
    let idx = match indices {
        Some(i) => i,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };
    let mut worst = 0.0f64;
    let mut p = params.to_vec();
    for &j in idx {
        let mut best = f64::INFINITY;
        for h in PARAM_STEPS {
            p[j] = params[j] + h;
            let lp = loss_of(&p);
            p[j] = params[j] - h;
            let lm = loss_of(&p);
            best = best.min(rel_err(g[j], (lp - lm) / (2.0 * h)));
            if best <= 1e-7 {
                break;
            }
        }
        p[j] = params[j];
        worst = worst.max(best);
    }
    worst
}
