use rand::Rng as _;

use super::*;
use crate::diff::ParamVector;
use crate::geometry::{partition_uniform, rng_for, sample_eas, sample_gus, Allocation, Region};
use crate::models::{
    forward_with_derivatives, init_params, ArchConfig, MlpConfig, Network, ReferenceModel,
    SetPinnConfig,
};
use crate::pde::{
    convection_problem, harmonic_problem, reaction_problem, wave_problem, PointField,
};

fn small_mlp(d: usize) -> Network {
    Network::new(&ArchConfig::Pinn(MlpConfig::new(d, 1, vec![8, 8]))).unwrap()
}

fn theta_for(net: &Network, seed: u64) -> Vec<f64> {
    let p: ParamVector<f64> = init_params(net.layout(), &mut rng_for(seed, 0));
    p.as_slice().to_vec()
}

fn plan(sampler: Sampler, cells: Vec<usize>, m: usize) -> SamplingPlan {
    SamplingPlan {
        sampler,
        cells,
        points_per_element: m,
        face_points_per_element: m,
        rad: Default::default(),
    }
}

fn interior_only(points: PointBatch<f64>, measures: Vec<f64>) -> TrainingData<f64> {
    TrainingData {
        batches: vec![TermBatch {
            term: LossTerm::Interior,
            condition: None,
            points,
            partner: None,
            element_measures: measures,
        }],
    }
}

#[test]
fn reference_solution_has_zero_loss() {
    for p in [
        convection_problem(),
        reaction_problem(),
        wave_problem(),
        harmonic_problem(),
    ] {
        let data: TrainingData<f64> =
            sample_training_data(&p, &plan(Sampler::Eas, vec![5, 5], 4), 0, None).unwrap();
        let model = ReferenceModel(&p);
        for eval in [
            pinn_loss(&model, &p, &[], &data, &Lambdas::default()).unwrap(),
            setpinn_loss(&model, &p, &[], &data, &Lambdas::default()).unwrap(),
        ] {
            let b = &eval.breakdown;
            assert!(b.interior <= 1e-12, "{}: {}", p.name(), b.interior);
            assert!(b.total <= 1e-12, "{}: {b:?}", p.name());
        }
    }
}

#[test]
fn single_point_term_is_the_squared_residual() {
    let p = reaction_problem();
    let net = small_mlp(2);
    let theta = theta_for(&net, 1);
    let mut pts = PointBatch::new(2);
    pts.push(&[1.3, 0.4], None, Region::Interior);
    let data = interior_only(pts, vec![]);
    // interior-only data omits the required conditions
    assert!(matches!(
        pinn_loss(&net, &p, &theta, &data, &Lambdas::default()),
        Err(Error::Config(_))
    ));
    let sq = interior_squared_residuals(&net, &p, &theta, &[1.3, 0.4]).unwrap();
    let theta_v = ParamVector::from_vec(net.layout(), theta.clone()).unwrap();
    let jets = forward_with_derivatives(&net, &[1.3, 0.4], &theta_v).unwrap();
    let r = p.residual(&mut PointField {
        outputs: &jets,
        x: &[1.3, 0.4],
    })[0];
    assert!((sq[0] - r * r).abs() <= 1e-15 * r * r);
}

#[test]
fn pinn_loss_equals_hand_summed_residuals() {
    let p = reaction_problem();
    let net = small_mlp(2);
    let theta = theta_for(&net, 2);
    let data: TrainingData<f64> =
        sample_training_data(&p, &plan(Sampler::Gus, vec![10, 10], 1), 3, None).unwrap();
    let eval = pinn_loss(&net, &p, &theta, &data, &Lambdas::default()).unwrap();
    let theta_v = ParamVector::from_vec(net.layout(), theta.clone()).unwrap();
    let interior = data.interior().unwrap();
    assert_eq!(interior.points.len(), 100);
    let mut hand = 0.0;
    for x in interior.points.points() {
        let jets = forward_with_derivatives(&net, x, &theta_v).unwrap();
        let r = p.residual(&mut PointField { outputs: &jets, x })[0];
        hand += r * r;
    }
    hand /= 100.0;
    assert!((eval.breakdown.interior - hand).abs() <= 1e-12 * hand.max(1.0));

    // periodic term: mean of squared value mismatches across the pairs
    let b = data
        .batches
        .iter()
        .find(|b| b.term == LossTerm::Boundary)
        .unwrap();
    let partner = b.partner.as_ref().unwrap();
    let mut per = 0.0;
    for (x, y) in b.points.points().zip(partner.points()) {
        let u = forward_with_derivatives(&net, x, &theta_v).unwrap()[0].value;
        let v = forward_with_derivatives(&net, y, &theta_v).unwrap()[0].value;
        per += (u - v) * (u - v);
    }
    per /= b.points.len() as f64;
    assert!((eval.breakdown.boundary - per).abs() <= 1e-12 * per.max(1e-3));
    let want = eval.breakdown.interior + eval.breakdown.initial + eval.breakdown.boundary;
    assert!((eval.breakdown.total - want).abs() <= 1e-14 * want);
}

#[test]
fn localized_energy_arithmetic() {
    assert_eq!(localized_energy(0.5, &[0.0, 0.0, 0.0]), 0.0);
    let c: f64 = 1.7;
    for m in [1, 3, 8] {
        let e = localized_energy(0.0016, &vec![c * c; m]);
        assert!((e - 0.0016 * c * c).abs() <= 1e-15);
    }
    let mut rng = rng_for(4, 0);
    let r: Vec<f64> = (0..13)
        .map(|_| rng.gen_range(-2.0f64..2.0).powi(2))
        .collect();
    let mean = r.iter().sum::<f64>() / 13.0;
    assert!((localized_energy(0.03, &r) - 0.03 * mean).abs() <= 1e-12);
}

#[test]
fn element_energy_rejects_foreign_points() {
    let p = harmonic_problem();
    let net = small_mlp(2);
    let theta = theta_for(&net, 5);
    let part = partition_uniform(&p.domain::<f64>(), &[4, 4]).unwrap();
    let e = &part.elements()[0];
    let ok = element_energy(&net, &p, &theta, e, &[0.1, 0.1, 0.2, 0.05]).unwrap();
    let sq = interior_squared_residuals(&net, &p, &theta, &[0.1, 0.1, 0.2, 0.05]).unwrap();
    assert!((ok - e.measure * (sq[0] + sq[1]) / 2.0).abs() <= 1e-12 * ok);
    assert!(matches!(
        element_energy(&net, &p, &theta, e, &[0.9, 0.9]),
        Err(Error::Usage(_))
    ));
}

#[test]
fn single_element_scaling_identity() {
    // K = 1: localized interior term = |Ω| · mean squared residual
    let p = convection_problem();
    let net = small_mlp(2);
    let theta = theta_for(&net, 6);
    let domain = p.domain::<f64>();
    let part = partition_uniform(&domain, &[1, 1]).unwrap();
    let pts = sample_eas(
        &part,
        &Allocation::PerElement(40),
        false,
        &mut rng_for(7, 0),
    )
    .unwrap();
    let full = sample_training_data(&p, &plan(Sampler::Eas, vec![1, 1], 40), 7, None).unwrap();
    let mut data = full.clone();
    data.batches[0] = interior_only(pts, vec![part.elements()[0].measure])
        .batches
        .remove(0);
    let a = pinn_loss(&net, &p, &theta, &data, &Lambdas::default())
        .unwrap()
        .breakdown
        .interior;
    let b = setpinn_loss(&net, &p, &theta, &data, &Lambdas::default())
        .unwrap()
        .breakdown
        .interior;
    assert!((b - domain.measure() * a).abs() <= 1e-12 * b);
}

#[test]
fn equal_elements_scaling_identity() {
    let p = harmonic_problem();
    let net = small_mlp(2);
    let theta = theta_for(&net, 8);
    let data = sample_training_data(&p, &plan(Sampler::Eas, vec![6, 6], 4), 9, None).unwrap();
    let a = pinn_loss(&net, &p, &theta, &data, &Lambdas::default()).unwrap();
    let b = setpinn_loss(&net, &p, &theta, &data, &Lambdas::default()).unwrap();
    // |E| = 1/36 and K = 36: (|Ω|/K)·K·mean = |E|·(K·mean)/K ... reduces to |E| · mean · (K/K)
    let e = 1.0 / 36.0;
    assert!(
        (b.breakdown.interior - e * a.breakdown.interior).abs() <= 1e-12 * b.breakdown.interior
    );
    // faces: 4 faces × 6 elements of length 1/6
    assert!(
        (b.breakdown.boundary - a.breakdown.boundary / 6.0).abs()
            <= 1e-12 * b.breakdown.boundary.max(1e-12)
    );
    let energies = &b.breakdown.element_energies;
    let interior = &energies
        .iter()
        .find(|(t, _)| *t == LossTerm::Interior)
        .unwrap()
        .1;
    assert_eq!(interior.len(), 36);
    assert!(interior.iter().all(|&v| v >= 0.0));
    let avg = interior.iter().sum::<f64>() / 36.0;
    assert!((avg - b.breakdown.interior).abs() <= 1e-12 * avg);
}

#[test]
fn loss_gradients_match_finite_differences() {
    let p = wave_problem();
    let net = small_mlp(2);
    let theta = theta_for(&net, 10);
    let data = sample_training_data(&p, &plan(Sampler::Eas, vec![3, 3], 2), 11, None).unwrap();
    for w in [Weighting::Mean, Weighting::Localized] {
        let g = evaluate(&net, &p, &theta, &data, &Lambdas::default(), w)
            .unwrap()
            .gradient;
        let h = 1e-6;
        for j in (0..theta.len()).step_by(7) {
            let mut t = theta.clone();
            t[j] += h;
            let lp = evaluate(&net, &p, &t, &data, &Lambdas::default(), w)
                .unwrap()
                .breakdown
                .total;
            t[j] -= 2.0 * h;
            let lm = evaluate(&net, &p, &t, &data, &Lambdas::default(), w)
                .unwrap()
                .breakdown
                .total;
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                crate::diff::fdcheck::rel_err(g[j], fd) <= 1e-5,
                "{w:?} param {j}: {} vs {fd}",
                g[j]
            );
        }
    }
}

#[test]
fn set_network_loss_and_grouping() {
    let p = convection_problem();
    let mut cfg = SetPinnConfig::reference_default(2, 1);
    cfg.embed = 8;
    cfg.ffn_hidden = vec![8];
    cfg.probe_hidden = vec![8];
    cfg.mixer_hidden = vec![8];
    let net = Network::new(&ArchConfig::Setpinn(cfg)).unwrap();
    let theta = theta_for(&net, 12);
    let data = sample_training_data(&p, &plan(Sampler::Eas, vec![4, 4], 4), 13, None).unwrap();
    let eval = setpinn_loss(&net, &p, &theta, &data, &Lambdas::default()).unwrap();
    assert!(eval.breakdown.total > 0.0 && eval.gradient.iter().all(|g| g.is_finite()));
    let gus = sample_training_data(&p, &plan(Sampler::Gus, vec![4, 4], 4), 13, None).unwrap();
    assert!(matches!(
        setpinn_loss(&net, &p, &theta, &gus, &Lambdas::default()),
        Err(Error::Config(_))
    ));
    let odd = sample_training_data(&p, &plan(Sampler::Eas, vec![4, 4], 3), 13, None).unwrap();
    assert!(setpinn_loss(&net, &p, &theta, &odd, &Lambdas::default()).is_err());
}

#[test]
fn breakdown_json_fields() {
    let b = LossBreakdown {
        step: 3,
        interior: 1.0,
        initial: 2.0,
        initial_dt: 0.5,
        boundary: 0.25,
        total: 3.75,
        ..Default::default()
    };
    let v: serde_json::Value = serde_json::to_value(&b).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys.len(), 6);
    for k in [
        "step",
        "interior",
        "initial",
        "initial_dt",
        "boundary",
        "total",
    ] {
        assert!(keys.contains(&k));
    }
}

#[test]
fn training_data_layout() {
    let p = wave_problem();
    let data: TrainingData<f64> =
        sample_training_data(&p, &plan(Sampler::Eas, vec![5, 4], 4), 14, None).unwrap();
    let terms: Vec<LossTerm> = data.batches.iter().map(|b| b.term).collect();
    assert_eq!(
        terms,
        vec![
            LossTerm::Interior,
            LossTerm::Initial,
            LossTerm::InitialDt,
            LossTerm::Boundary,
            LossTerm::Boundary
        ]
    );
    assert_eq!(data.batches[0].points.len(), 80);
    // initial face t = 0 is split along x into 5 elements
    assert_eq!(data.batches[1].points.len(), 20);
    assert!(data.batches[1].points.points().all(|x| x[1] == 0.0));
    // boundary faces x = 0, 1 are split along t into 4 elements
    assert_eq!(data.batches[3].points.len(), 16);
    assert!(data.batches[4].points.points().all(|x| x[0] == 1.0));
    let again = sample_training_data(&p, &plan(Sampler::Eas, vec![5, 4], 4), 14, None).unwrap();
    assert_eq!(data, again);
    for s in [Sampler::Gus, Sampler::Lhs, Sampler::Rad] {
        let other: TrainingData<f64> =
            sample_training_data(&p, &plan(s, vec![5, 4], 4), 14, None).unwrap();
        assert_eq!(other.total_points(), data.total_points());
        assert!(other.batches[0]
            .points
            .elements()
            .iter()
            .all(|e| e.is_some()));
    }
    let field = |b: &PointBatch<f64>| {
        b.points()
            .map(|x| if x[0] < 0.5 { 1.0 } else { 0.0 })
            .collect()
    };
    let rad: TrainingData<f64> =
        sample_training_data(&p, &plan(Sampler::Rad, vec![5, 4], 4), 14, Some(&field)).unwrap();
    let left = rad.batches[0]
        .points
        .points()
        .filter(|x| x[0] < 0.5)
        .count();
    assert!(left >= 72);
    let _ = sample_gus(&p.domain::<f64>(), 1, None, &mut rng_for(0, 0));
}
