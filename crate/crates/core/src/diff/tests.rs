use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

type Build = fdcheck::Build<'static>;

fn check_input_jets(params: &[f64], coords: &[f64], rows: usize, d: usize, f: &Build) {
    let e = fdcheck::input_jet_errors(params, coords, rows, d, f);
    assert!(e.d1 <= 1e-5 && e.d2 <= 1e-4, "{e:?}");
}

fn check_param_grad(params: &[f64], coords: &[f64], rows: usize, d: usize, f: &Build) {
    let e = fdcheck::param_grad_error(params, coords, rows, d, f, None);
    assert!(e <= 1e-5, "param gradient rel err {e}");
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

#[test]
fn constant_and_identity_jets() {
    let c = DiffScalar::constant(3.0f64, 2);
    assert_eq!(c.d1, vec![0.0, 0.0]);
    assert_eq!(c.d2, vec![0.0, 0.0]);
    let v = DiffScalar::variable(0.7f64, 1, 3);
    assert_eq!(v.d1, vec![0.0, 1.0, 0.0]);
    assert_eq!(v.d2, vec![0.0; 3]);

    let t = JetTensor::seeded(1, 2, &[0.3f64, -0.2]);
    assert_eq!(t.get(0, 1, 0), 1.0);
    assert_eq!(t.get(0, 2, 0), 0.0);
    assert_eq!(t.get(0, 2, 1), 1.0);
    for c in 3..5 {
        assert_eq!(t.channel(0, c), &[0.0, 0.0]);
    }
}

#[test]
fn identity_linear_neuron() {
    // weight 1, bias 0 on a single coordinate
    let params = [1.0f64, 0.0];
    let mut tape = Tape::new(&params);
    let x = tape.constant(JetTensor::seeded(1, 1, &[0.7]));
    let y = tape.linear(x, 0, 1, Some(1));
    let s = DiffScalar::from_tape(&tape, y, 0, 0);
    assert_eq!(s.value, 0.7);
    assert_eq!(s.d1, vec![1.0]);
    assert_eq!(s.d2, vec![0.0]);
}

#[test]
fn tanh_at_origin() {
    let params = [0.5f64];
    let mut tape = Tape::new(&params);
    let x = tape.constant(JetTensor::seeded(1, 1, &[0.0]));
    let z = tape.linear(x, 0, 1, None);
    let y = tape.tanh(z);
    let s = DiffScalar::from_tape(&tape, y, 0, 0);
    assert_eq!(s.value, 0.0);
    assert_eq!(s.d1, vec![0.5]);
    assert_eq!(s.d2, vec![0.0]);
}

#[test]
fn unary_functions_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for f in [
        UnaryFn::Tanh,
        UnaryFn::Sin,
        UnaryFn::Exp,
        UnaryFn::Recip,
        UnaryFn::Rsqrt,
    ] {
        // positive, well-conditioned pre-activations for recip / rsqrt
        let params: Vec<f64> = (0..2 * 3 + 3).map(|_| rng.gen_range(0.2..0.8)).collect();
        let coords: Vec<f64> = (0..4 * 2).map(|_| rng.gen_range(0.1..1.0)).collect();
        let build = move |t: &mut Tape<'_, f64>, x: Var| {
            let z = t.linear(x, 0, 3, Some(6));
            let z2 = t.mul(z, z);
            let z3 = t.add_scalar(z2, 0.3);
            t.unary(z3, f)
        };
        check_input_jets(&params, &coords, 4, 2, &build);
        check_param_grad(&params, &coords, 4, 2, &build);
    }
}

#[test]
fn two_layer_tanh_network_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let (d, hdim) = (3, 5);
        let n = hdim * d + hdim + hdim + 1;
        let params = random_vec(&mut rng, n, 1.0);
        let coords = random_vec(&mut rng, 2 * d, 1.0);
        let build = move |t: &mut Tape<'_, f64>, x: Var| {
            let h = t.linear(x, 0, hdim, Some(hdim * d));
            let h = t.tanh(h);
            t.linear(h, hdim * d + hdim, 1, Some(hdim * d + 2 * hdim))
        };
        check_input_jets(&params, &coords, 2, d, &build);
        check_param_grad(&params, &coords, 2, d, &build);
    }
}

#[test]
fn structural_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 2;
    // layout: W (4×2) | b (4) | gamma (4) | beta (4) | extra params (3)
    let params = random_vec(&mut rng, 8 + 4 + 4 + 4 + 3, 1.0);
    let coords = random_vec(&mut rng, 4 * d, 1.0);
    let build = |t: &mut Tape<'_, f64>, x: Var| {
        let h = t.linear(x, 0, 4, Some(8));
        let h = t.sin(h);
        let a = t.col_affine(h, 12, 16);
        let s = t.sum_col_groups(a, 2); // rows × 2
        let r = t.repeat_cols(s, 2); // rows × 4
        let m = t.mul(r, h);
        let g = t.gather(m, vec![0, 1, 2, 3], vec![true; 4]);
        let e = t.sub(g, h);
        let e = t.scale(e, 0.7);
        let grouped = t.sum_row_groups(e, 2); // rows/2 × 4
        let back = t.gather(grouped, vec![0, 0, 1, 1], vec![true; 4]);
        let mixed = t.add(back, e);
        t.tanh(mixed)
    };
    check_param_grad(&params, &coords, 4, d, &build);

    // Input-jet check needs row-local ops only.
    let local = |t: &mut Tape<'_, f64>, x: Var| {
        let h = t.linear(x, 0, 4, Some(8));
        let h = t.exp(h);
        let a = t.col_affine(h, 12, 16);
        let s = t.sum_col_groups(a, 2);
        let r = t.repeat_cols(s, 2);
        let m = t.mul(r, h);
        let m = t.mul(m, m);
        let inv = t.add_scalar(m, 5.0);
        let inv = t.rsqrt(inv);
        t.shift(inv, &[0.1; 16])
    };
    check_input_jets(&params, &coords, 4, d, &local);
}

#[test]
fn stripped_gather_drops_jets_but_keeps_value_gradient() {
    let params = [2.0f64, -1.0];
    let mut tape = Tape::new(&params);
    let x = tape.constant(JetTensor::seeded(2, 1, &[0.5, 1.5]));
    let z = tape.linear(x, 0, 1, Some(1));
    let z = tape.mul(z, z);
    let g = tape.gather(z, vec![1, 0], vec![false, true]);
    let t = tape.value(g);
    // stripped row: value kept, jets zero
    assert_eq!(t.value(0, 0), 4.0);
    assert_eq!(t.get(0, 1, 0), 0.0);
    assert_eq!(t.get(0, 2, 0), 0.0);
    // kept row: (2·0.5 − 1)² = 0 with derivative 2·0·2 = 0 and second 2·2² = 8
    assert_eq!(t.get(1, 2, 0), 8.0);
    // ∂/∂w of value (2w·1.5 − 1)²... evaluated at row 0 = 2(2·1.5−1)·1.5 = 6
    let grad = tape.gradient_of_entry(g, 0, 0).unwrap();
    assert!((grad[0] - 6.0).abs() < 1e-12);
    assert!((grad[1] - 4.0).abs() < 1e-12);
}

#[test]
fn param_gradient_unit_vector_and_norm() {
    let params = [0.3f64, -1.2, 2.5, 0.0];
    let mut tape = Tape::new(&params);
    let p = tape.param_slice(2, 1);
    let g = tape.gradient(p).unwrap();
    assert_eq!(g, vec![0.0, 0.0, 1.0, 0.0]);

    let mut tape = Tape::new(&params);
    let all = tape.param_slice(0, 4);
    let sq = tape.mul(all, all);
    let s = tape.sum(sq);
    let half = tape.scale(s, 0.5);
    let g = tape.gradient(half).unwrap();
    assert_eq!(g, params.to_vec());
}

#[test]
fn gradient_of_sum_is_sum_of_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = random_vec(&mut rng, 3 * 2 + 3, 1.0);
    let coords = random_vec(&mut rng, 6, 1.0);
    let mut tape = Tape::new(&params);
    let x = tape.constant(JetTensor::seeded(3, 2, &coords));
    let z = tape.linear(x, 0, 3, Some(6));
    let z = tape.tanh(z);
    let a = tape.channel(z, 0, 3);
    let a = tape.sum(a);
    let b = tape.channel(z, 2, 1);
    let b = tape.mul(b, b);
    let b = tape.sum(b);
    let s = tape.add(a, b);
    let (ga, gb, gs) = (
        tape.gradient(a).unwrap(),
        tape.gradient(b).unwrap(),
        tape.gradient(s).unwrap(),
    );
    for j in 0..params.len() {
        assert!((ga[j] + gb[j] - gs[j]).abs() < 1e-14);
    }
    // replaying the backward sweep is bit-identical
    assert_eq!(tape.gradient(s).unwrap(), gs);
}

#[test]
fn detached_scalar_is_a_usage_error() {
    let params = [1.0f64];
    let tape = Tape::new(&params);
    let s = DiffScalar::constant(1.0, 1);
    assert!(matches!(param_gradient(&s, &tape), Err(Error::Usage(_))));
}

#[test]
fn linearity_of_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = random_vec(&mut rng, 2 * 2 + 2, 1.0);
    let coords = random_vec(&mut rng, 2, 1.0);
    let mut tape = Tape::new(&params);
    let x = tape.constant(JetTensor::seeded(1, 2, &coords));
    let z = tape.linear(x, 0, 2, Some(4));
    let f = tape.tanh(z);
    let g = tape.sin(z);
    let fa = tape.scale(f, 1.5);
    let gb = tape.scale(g, -0.25);
    let comb = tape.add(fa, gb);
    let (ft, gt, ct) = (tape.value(f), tape.value(g), tape.value(comb));
    for (i, c) in ct.data().iter().enumerate() {
        let want = 1.5 * ft.data()[i] - 0.25 * gt.data()[i];
        assert!((c - want).abs() <= 1e-15 * want.abs().max(1.0));
    }
}
