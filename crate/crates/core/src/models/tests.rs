use rand::Rng as _;

use super::*;
use crate::diff::fdcheck::{self, jet_energy};
use crate::geometry::rng_for;

fn small_set_config(d: usize, blocks: usize) -> SetPinnConfig {
    SetPinnConfig {
        in_dim: d,
        out_dim: 1,
        set_size: 4,
        embed: 8,
        heads: 2,
        blocks,
        mixer_hidden: vec![6],
        ffn_hidden: vec![10],
        probe_hidden: vec![7],
    }
}

fn random_theta(net: &Network, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = rng_for(seed, 1);
    let base: ParamVector<f64> = init_params(net.layout(), &mut rng);
    // perturb biases and gains away from their deterministic init values
    base.as_slice()
        .iter()
        .map(|v| v + scale * rng.gen_range(-0.3..0.3))
        .collect()
}

fn forward_build(net: &Network) -> impl Fn(&mut Tape<'_, f64>, Var) -> Var + '_ {
    move |t, x| net.forward(t, x).unwrap()
}

#[test]
fn parameter_counts() {
    let pinn = Network::new(&ArchConfig::Pinn(MlpConfig::pinn_default(2, 1))).unwrap();
    assert_eq!(pinn.num_params(), 527_361);
    let fls = Network::new(&ArchConfig::Fls(MlpConfig::pinn_default(2, 1))).unwrap();
    assert_eq!(fls.num_params(), 527_361);
    let qres = Network::new(&ArchConfig::Qres(MlpConfig::qres_default(2, 1))).unwrap();
    assert_eq!(qres.num_params(), 396_545);
    let set = Network::new(&ArchConfig::Setpinn(SetPinnConfig::reference_default(2, 1))).unwrap();
    assert_eq!(set.num_params(), 368_033);
    assert!((set.num_params() as f64 / 366_000.0 - 1.0).abs() <= 0.05);
}

#[test]
fn config_validation() {
    let mut c = SetPinnConfig::reference_default(2, 1);
    c.heads = 3;
    assert!(Network::new(&ArchConfig::Setpinn(c)).is_err());
    assert!(Network::new(&ArchConfig::Pinn(MlpConfig::new(2, 1, vec![4, 0]))).is_err());
    assert!(Network::new(&ArchConfig::Pinn(MlpConfig::new(0, 1, vec![4]))).is_err());
}

#[test]
fn zero_parameters_give_zero_output() {
    for arch in [
        ArchConfig::Pinn(MlpConfig::new(2, 1, vec![5, 5])),
        ArchConfig::Qres(MlpConfig::new(2, 1, vec![5, 5])),
    ] {
        let net = Network::new(&arch).unwrap();
        let theta = ParamVector::zeros(net.layout());
        let out = forward_with_derivatives(&net, &[0.3, -0.8], &theta).unwrap();
        assert_eq!(out[0].value, 0.0);
        assert_eq!(out[0].d1, vec![0.0, 0.0]);
        assert_eq!(out[0].d2, vec![0.0, 0.0]);
    }
}

#[test]
fn single_layer_is_affine() {
    let net = Network::new(&ArchConfig::Pinn(MlpConfig::new(2, 1, vec![]))).unwrap();
    let theta = ParamVector::from_vec(net.layout(), vec![1.5, -2.0, 0.25]).unwrap();
    let out = forward_with_derivatives(&net, &[0.4, 0.1], &theta).unwrap();
    assert_eq!(out[0].value, 1.5 * 0.4 - 2.0 * 0.1 + 0.25);
    assert_eq!(out[0].d1, vec![1.5, -2.0]);
    assert_eq!(out[0].d2, vec![0.0, 0.0]);
}

#[test]
fn fls_first_layer_is_a_sine() {
    // one sine unit, weight w, zero bias; tail weight 1, bias 0
    let net = Network::new(&ArchConfig::Fls(MlpConfig::new(1, 1, vec![1]))).unwrap();
    let w = 2.3;
    let theta = ParamVector::from_vec(net.layout(), vec![w, 0.0, 1.0, 0.0]).unwrap();
    let out = forward_with_derivatives(&net, &[0.0], &theta).unwrap();
    assert_eq!(out[0].value, 0.0);
    let mut rng = rng_for(3, 0);
    for _ in 0..20 {
        let x: f64 = rng.gen_range(-2.0..2.0);
        let o = &forward_with_derivatives(&net, &[x], &theta).unwrap()[0];
        assert!((o.value - (w * x).sin()).abs() < 1e-15);
        assert!((o.d1[0] - w * (w * x).cos()).abs() < 1e-14);
        assert!((o.d2[0] + w * w * (w * x).sin()).abs() < 1e-13);
    }
}

#[test]
fn qres_with_zero_second_branch_is_a_plain_layer() {
    let cfg = MlpConfig::new(2, 1, vec![4]);
    let q = Network::new(&ArchConfig::Qres(cfg.clone())).unwrap();
    let m = Network::new(&ArchConfig::Pinn(cfg)).unwrap();
    let theta_q = random_theta(&q, 5, 1.0);
    let Network::QRes(qr) = &q else {
        unreachable!()
    };
    let mut tq = theta_q.clone();
    let second = &qr.blocks[0].second;
    for j in second.weight..second.bias + second.output {
        tq[j] = 0.0;
    }
    // same first-branch and head weights in the MLP
    let first = &qr.blocks[0].first;
    let mut tm: Vec<f64> = tq[first.weight..first.bias + first.output].to_vec();
    tm.extend_from_slice(&tq[qr.head.weight..qr.head.bias + qr.head.output]);
    let tq = ParamVector::from_vec(q.layout(), tq).unwrap();
    let tm = ParamVector::from_vec(m.layout(), tm).unwrap();
    let a = forward_with_derivatives(&q, &[0.2, 0.9], &tq).unwrap();
    let b = forward_with_derivatives(&m, &[0.2, 0.9], &tm).unwrap();
    assert_eq!(
        (a[0].value, &a[0].d1, &a[0].d2),
        (b[0].value, &b[0].d1, &b[0].d2)
    );
}

#[test]
fn pointwise_networks_match_finite_differences() {
    for (k, arch) in [
        ArchConfig::Pinn(MlpConfig::new(2, 1, vec![6, 5])),
        ArchConfig::Fls(MlpConfig::new(3, 2, vec![6, 5])),
        ArchConfig::Qres(MlpConfig::new(2, 1, vec![5, 4])),
    ]
    .into_iter()
    .enumerate()
    {
        let net = Network::new(&arch).unwrap();
        let d = net.in_dim();
        let theta = random_theta(&net, k as u64, 1.0);
        let mut rng = rng_for(10 + k as u64, 0);
        let coords: Vec<f64> = (0..3 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = forward_build(&net);
        let e = fdcheck::input_jet_errors(&theta, &coords, 3, d, &f);
        assert!(e.d1 <= 1e-5 && e.d2 <= 1e-4, "{arch:?}: {e:?}");
        let g = fdcheck::param_grad_error(&theta, &coords, 3, d, &f, None);
        assert!(g <= 1e-5, "{arch:?}: {g}");
    }
}

#[test]
fn set_network_matches_finite_differences() {
    for blocks in [1, 2] {
        let net = Network::new(&ArchConfig::Setpinn(small_set_config(2, blocks))).unwrap();
        let theta = random_theta(&net, 21, 1.0);
        let mut rng = rng_for(22, 0);
        let coords: Vec<f64> = (0..8 * 2).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f = forward_build(&net);
        let e = fdcheck::input_jet_errors(&theta, &coords, 8, 2, &f);
        assert!(e.d1 <= 1e-5 && e.d2 <= 1e-4, "{blocks} blocks: {e:?}");
        let g = fdcheck::param_grad_error(&theta, &coords, 8, 2, &f, None);
        assert!(g <= 1e-5, "{blocks} blocks: {g}");
    }
}

fn set_outputs(net: &SetPinn, theta: &[f64], coords: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut tape = Tape::new(theta);
    let x = tape.constant(JetTensor::seeded(
        coords.len() / net.config.in_dim,
        net.config.in_dim,
        coords,
    ));
    let r = net.forward_sets(&mut tape, x).unwrap();
    (
        tape.value(r.output).data().to_vec(),
        tape.value(r.attention[0]).values(),
    )
}

#[test]
fn set_forward_is_permutation_equivariant() {
    use rand::seq::SliceRandom;
    for blocks in [1, 2] {
        let net = SetPinn::new(small_set_config(2, blocks)).unwrap();
        let theta: Vec<f64> = random_theta(&Network::Set(net.clone()), 30, 1.0);
        let mut rng = rng_for(31, 0);
        for _ in 0..50 {
            let coords: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut perm: Vec<usize> = (0..4).collect();
            perm.shuffle(&mut rng);
            let permuted: Vec<f64> = perm
                .iter()
                .flat_map(|&p| coords[2 * p..2 * p + 2].to_vec())
                .collect();
            let (a, _) = set_outputs(&net, &theta, &coords);
            let (b, _) = set_outputs(&net, &theta, &permuted);
            // each row holds value, 2 first and 2 second derivatives
            for (i, &p) in perm.iter().enumerate() {
                for c in 0..5 {
                    assert!((b[i * 5 + c] - a[p * 5 + c]).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn identical_points_and_row_stochastic_attention() {
    let net = SetPinn::new(small_set_config(2, 2)).unwrap();
    let theta = random_theta(&Network::Set(net.clone()), 40, 1.0);
    let same = [0.3, 0.6].repeat(4);
    let (out, _) = set_outputs(&net, &theta, &same);
    for i in 1..4 {
        for c in 0..5 {
            assert!((out[i * 5 + c] - out[c]).abs() <= 1e-12);
        }
    }
    let mut rng = rng_for(41, 0);
    let coords: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
    let (_, att) = set_outputs(&net, &theta, &coords);
    // two blocks: 8 rows × 4 views = 32 query rows, 4 keys each, 2 heads
    assert_eq!(att.len(), 32 * 4 * 2);
    for q in 0..32 {
        for h in 0..2 {
            let s: f64 = (0..4).map(|j| att[(q * 4 + j) * 2 + h]).sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn cross_point_derivative_isolation() {
    // Perturbing another member changes u_i, but u_i's jets stay equal to
    // finite differences in x_i with the other members held fixed.
    let net = SetPinn::new(small_set_config(2, 2)).unwrap();
    let theta = random_theta(&Network::Set(net.clone()), 50, 1.0);
    let mut coords = vec![0.1, 0.2, 0.5, 0.9, 0.7, 0.3, 0.4, 0.4];
    let (before, _) = set_outputs(&net, &theta, &coords);
    coords[2] += 0.05;
    let (after, _) = set_outputs(&net, &theta, &coords);
    assert_ne!(before[0], after[0]);
    let f = |t: &mut Tape<'_, f64>, x: Var| net.forward_sets(t, x).unwrap().output;
    let e = fdcheck::input_jet_errors(&theta, &coords, 4, 2, &f);
    assert!(e.d1 <= 1e-5 && e.d2 <= 1e-4, "{e:?}");
}

#[test]
fn set_size_is_enforced() {
    let net = SetPinn::new(small_set_config(2, 2)).unwrap();
    let theta = ParamVector::zeros(&net.layout);
    assert!(matches!(
        set_forward(&net, &theta, &[0.1; 6]),
        Err(Error::Usage(_))
    ));
    assert_eq!(set_forward(&net, &theta, &[0.1; 8]).unwrap().len(), 4);
    let mut tape = Tape::new(theta.as_slice());
    let x = tape.constant(JetTensor::seeded(3, 2, &[0.1; 6]));
    assert!(net.forward_sets(&mut tape, x).is_err());
    let pointwise = Network::Set(net);
    assert!(forward_with_derivatives(&pointwise, &[0.1, 0.1], &theta).is_err());
}

#[test]
fn dimension_mismatch_and_non_finite_layer() {
    let net = Network::new(&ArchConfig::Pinn(MlpConfig::new(2, 1, vec![3, 3]))).unwrap();
    let mut theta = ParamVector::zeros(net.layout());
    assert!(matches!(
        forward_with_derivatives(&net, &[0.1], &theta),
        Err(Error::Config(_))
    ));
    let off = net.layout().entry("l1.w").unwrap().offset;
    let mut v = theta.as_slice().to_vec();
    v[off] = f64::NAN;
    theta = ParamVector::from_vec(net.layout(), v).unwrap();
    match forward_with_derivatives(&net, &[0.1, 0.2], &theta) {
        Err(Error::NonFinite { layer, .. }) => assert_eq!(layer, Some(1)),
        other => panic!("expected non-finite error, got {other:?}"),
    }
}

#[test]
fn glorot_init_moments_and_determinism() {
    let net = Network::new(&ArchConfig::Pinn(MlpConfig::pinn_default(2, 1))).unwrap();
    let a: ParamVector<f64> = init_params(net.layout(), &mut rng_for(7, 0));
    let b: ParamVector<f64> = init_params(net.layout(), &mut rng_for(7, 0));
    assert_eq!(a, b);
    let layout = net.layout();
    let w = layout.entry("l1.w").unwrap();
    let vals = &a.as_slice()[w.range()];
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    let target = 2.0 / 1024.0;
    assert!(
        (var / target - 1.0).abs() < 0.1,
        "variance {var} vs {target}"
    );
    for e in layout
        .entries()
        .iter()
        .filter(|e| e.kind == ParamKind::Bias)
    {
        assert!(a.as_slice()[e.range()].iter().all(|&v| v == 0.0));
    }
    let set = Network::new(&ArchConfig::Setpinn(SetPinnConfig::reference_default(2, 1))).unwrap();
    let s: ParamVector<f64> = init_params(set.layout(), &mut rng_for(7, 0));
    for e in set
        .layout()
        .entries()
        .iter()
        .filter(|e| e.kind == ParamKind::Gain)
    {
        assert!(s.as_slice()[e.range()].iter().all(|&v| v == 1.0));
    }
}

#[test]
fn checkpoint_roundtrip_and_digest_guard() {
    let net = Network::new(&ArchConfig::Qres(MlpConfig::new(2, 1, vec![4]))).unwrap();
    let theta: ParamVector<f64> = init_params(net.layout(), &mut rng_for(1, 0));
    let mut buf = Vec::new();
    write_checkpoint(net.layout(), &theta, &mut buf).unwrap();
    assert_eq!(buf.len(), 32 + 8 * theta.len());
    let back: ParamVector<f64> = read_checkpoint(net.layout(), &buf[..]).unwrap();
    assert_eq!(back, theta);
    let other = Network::new(&ArchConfig::Pinn(MlpConfig::new(2, 1, vec![4]))).unwrap();
    assert!(read_checkpoint::<f64, _>(other.layout(), &buf[..]).is_err());
    assert!(read_checkpoint::<f64, _>(net.layout(), &buf[..40]).is_err());
}

#[test]
fn energy_gradient_through_full_set_network() {
    let net = Network::new(&ArchConfig::Setpinn(SetPinnConfig::reference_default(2, 1))).unwrap();
    let theta: ParamVector<f64> = init_params(net.layout(), &mut rng_for(2, 0));
    let coords = [0.1, 0.2, 0.5, 0.9, 0.7, 0.3, 0.4, 0.4];
    let mut tape = Tape::new(theta.as_slice());
    let u = net.forward_points(&mut tape, &coords).unwrap();
    let l = jet_energy(&mut tape, u);
    let g = tape.gradient(l).unwrap();
    assert_eq!(g.len(), 368_033);
    assert!(g.iter().all(|v| v.is_finite()));
}

#[test]
fn predictions_match_jet_forward() {
    use crate::geometry::{partition_uniform, Domain};
    let cfg = SetPinnConfig {
        embed: 8,
        heads: 2,
        blocks: 2,
        mixer_hidden: vec![8],
        ffn_hidden: vec![8],
        probe_hidden: vec![8],
        ..SetPinnConfig::reference_default(2, 1)
    };
    let net = Network::new(&ArchConfig::Setpinn(cfg)).unwrap();
    let theta: ParamVector<f64> = init_params(net.layout(), &mut rng_for(3, 0));
    let part = partition_uniform(&Domain::unit(2), &[2, 2]).unwrap();
    // element 0 holds 5 points p0..p4 in two strided sets: (p0 p2 p4 p1), (p1 p3 p0 p2)
    let coords = [0.1, 0.1, 0.2, 0.3, 0.3, 0.2, 0.4, 0.4, 0.05, 0.45, 0.9, 0.9];
    let pred = predict_values(&net, theta.as_slice(), &coords, Some(&part)).unwrap();
    let Network::Set(set) = &net else {
        unreachable!()
    };
    let p = |i: usize| [coords[2 * i], coords[2 * i + 1]];
    let first: Vec<f64> = [0, 2, 4, 1].iter().flat_map(|&i| p(i)).collect();
    let first = set_forward(set, &theta, &first).unwrap();
    for (slot, i) in [0, 2, 4, 1].into_iter().enumerate() {
        assert!((pred[i] - first[slot][0].value).abs() <= 1e-13);
    }
    let second: Vec<f64> = [1, 3, 0, 2].iter().flat_map(|&i| p(i)).collect();
    let second = set_forward(set, &theta, &second).unwrap();
    assert!((pred[3] - second[1][0].value).abs() <= 1e-13);
    let lone = set_forward(set, &theta, &[0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]).unwrap();
    assert!((pred[5] - lone[0][0].value).abs() <= 1e-13);
    assert!(matches!(
        predict_values(&net, theta.as_slice(), &coords, None),
        Err(Error::Usage(_))
    ));

    let mlp = Network::new(&ArchConfig::Pinn(MlpConfig::new(2, 1, vec![6, 6]))).unwrap();
    let th: ParamVector<f64> = init_params(mlp.layout(), &mut rng_for(4, 0));
    let pred = predict_values(&mlp, th.as_slice(), &coords, None).unwrap();
    for i in 0..6 {
        let v = forward_with_derivatives(&mlp, &coords[2 * i..2 * i + 2], &th).unwrap()[0].value;
        assert!((pred[i] - v).abs() <= 1e-14);
    }
}
