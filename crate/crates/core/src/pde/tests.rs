use std::f64::consts::PI;

use super::*;
use crate::diff::{JetTensor, ParamKind, ParamLayout, Tape};
use crate::geometry::{rng_for, sample_gus};

fn all_problems() -> Vec<PdeProblem> {
    PROBLEM_NAMES
        .iter()
        .map(|n| PdeProblem::by_name(n).unwrap())
        .collect()
}

fn random_points(p: &PdeProblem, n: usize, seed: u64) -> PointBatch<f64> {
    sample_gus(&p.domain::<f64>(), n, None, &mut rng_for(seed, 0))
}

fn point_residual(p: &PdeProblem, x: &[f64]) -> f64 {
    let jets = p.solution_jet(x);
    p.residual(&mut PointField { outputs: &jets, x })[0]
}

#[test]
fn closed_form_values() {
    let c = convection_problem();
    assert_eq!(c.solution(&[0.0, 0.0]), 0.0);
    assert!((c.solution(&[PI / 2.0, 0.0]) - 1.0).abs() < 1e-15);

    let r = reaction_problem();
    assert!((r.solution(&[PI, 0.0]) - 1.0).abs() < 1e-15);
    for x in [0.0, 1.0, 2.5, 4.0, 2.0 * PI] {
        let h = (-(x - PI) * (x - PI) / (2.0 * (PI / 4.0) * (PI / 4.0))).exp();
        assert!((r.solution(&[x, 0.0]) - h).abs() < 1e-14);
    }

    let w = wave_problem();
    for t in [0.0, 0.3, 0.77, 1.0] {
        assert!(w.solution(&[0.0, t]).abs() < 1e-15);
    }
    for x in [0.1, 0.45, 0.9] {
        let ic = (PI * x).sin() + 0.5 * (4.0 * PI * x).sin();
        assert!((w.solution(&[x, 0.0]) - ic).abs() < 1e-14);
    }

    let h = harmonic_problem();
    let expect = 500.0 * (5.0 * PI * 0.1).sin() * (3.0 * PI * 0.5).sin() / (34.0 * PI * PI);
    assert!((h.solution(&[0.1, 0.5]) - expect).abs() < 1e-14);
    assert!((h.solution(&[0.1, 0.5]) + 1.490_017_406_504_967).abs() < 1e-12);
}

#[test]
fn analytic_residuals_vanish() {
    for p in all_problems().into_iter().filter(|p| p.name() != "plate") {
        let pts = random_points(&p, 100, 1);
        for x in pts.points() {
            let r = point_residual(&p, x);
            assert!(r.abs() <= 1e-8, "{}: residual {r} at {x:?}", p.name());
        }
    }
}

#[test]
fn solution_jets_match_finite_differences() {
    for p in all_problems() {
        let pts = random_points(&p, 20, 2);
        for x in pts.points() {
            let jet = &p.solution_jet(x)[0];
            assert!((jet.value - p.solution(x)).abs() < 1e-12);
            for i in 0..p.dim() {
                let at = |dx: f64| {
                    let mut y = x.to_vec();
                    y[i] += dx;
                    p.solution(&y)
                };
                let h1 = 1e-6;
                let fd1 = (at(h1) - at(-h1)) / (2.0 * h1);
                let h2 = 1e-4;
                let fd2 = (at(h2) - 2.0 * at(0.0) + at(-h2)) / (h2 * h2);
                let scale1 = jet.d1[i].abs().max(1.0);
                let scale2 = jet.d2[i].abs().max(1.0);
                assert!(
                    (fd1 - jet.d1[i]).abs() / scale1 < 1e-5,
                    "{} d1[{i}] {fd1} vs {}",
                    p.name(),
                    jet.d1[i]
                );
                assert!(
                    (fd2 - jet.d2[i]).abs() / scale2 < 1e-3,
                    "{} d2[{i}] {fd2} vs {}",
                    p.name(),
                    jet.d2[i]
                );
            }
        }
    }
}

#[test]
fn solutions_satisfy_conditions() {
    for p in all_problems() {
        let tol = if p.name() == "plate" { 1e-5 } else { 1e-8 };
        let domain = p.domain::<f64>();
        for (ci, cond) in p.conditions().iter().enumerate() {
            let face = cond.face(&domain).unwrap();
            let pts = sample_gus(&face, 1000, None, &mut rng_for(3, ci as u64));
            for x in pts.points() {
                let r = match cond.op {
                    ConditionOp::Periodic => {
                        let mut y = x.to_vec();
                        y[cond.axis] += p.period(cond.axis);
                        p.solution(x) - p.solution(&y)
                    }
                    _ => {
                        let jets = p.solution_jet(x);
                        p.condition_residual(cond, &mut PointField { outputs: &jets, x })
                            .unwrap()[0]
                    }
                };
                assert!(r.abs() <= tol, "{} {:?}: {r} at {x:?}", p.name(), cond);
            }
        }
    }
}

#[test]
fn condition_sets() {
    let c = convection_problem();
    assert_eq!(c.conditions().len(), 2);
    assert_eq!(c.conditions()[1].op, ConditionOp::Periodic);
    let w = wave_problem();
    let terms: Vec<Term> = w.conditions().iter().map(|c| c.term).collect();
    assert_eq!(
        terms,
        vec![
            Term::Initial,
            Term::InitialDt,
            Term::Boundary,
            Term::Boundary
        ]
    );
    assert_eq!(harmonic_problem().conditions().len(), 4);
    assert_eq!(helmholtz3d_problem().conditions().len(), 6);
    assert!(PdeProblem::by_name("navier-stokes").is_err());
    let jets = w.solution_jet(&[0.3, 0.0]);
    assert!(w
        .condition_residual(
            &c.conditions()[1],
            &mut PointField {
                outputs: &jets,
                x: &[0.3, 0.0]
            }
        )
        .is_err());
}

#[test]
fn plate_forcing_and_series() {
    let p = plate_problem();
    assert_eq!(p.forcing(&[0.27, 0.72]), 20.0);
    assert_eq!(p.forcing(&[0.5, 0.5]), 0.0);
    for c in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
        assert!(p.solution(&c).abs() < 1e-12);
    }
    let center = [0.275, 0.725];
    let u = p.solution(&center);
    let doubled = plate_with_modes(2 * PLATE_MODES).solution(&center);
    assert!(u > 0.0);
    assert!((u - doubled).abs() < 1e-6, "tail {}", (u - doubled).abs());
}

#[test]
fn helmholtz_variants() {
    let resonant = helmholtz3d_with(1.0, [1.0, 1.0, 1.0], 1.0);
    assert!(resonant.is_resonant());
    assert_eq!(resonant.solution(&[0.3, 0.4, 0.5]), 0.0);
    // the forcing mode lies in the kernel of −Δ − κ²
    let x = [0.3, 0.4, 0.5];
    let mut mode = DiffScalar::constant(0.0, 3);
    product_mode(&mut mode, 1.0, &[PI, PI, PI], &x);
    let r = resonant.residual(&mut PointField {
        outputs: &[mode],
        x: &x,
    })[0];
    assert!((r + resonant.forcing(&x)).abs() < 1e-12);

    let p = helmholtz3d_problem();
    assert!(!p.is_resonant());
    let kappa = 0.9 * PI * 3f64.sqrt();
    let expect =
        (PI * 0.3).sin() * (PI * 0.4).sin() * (PI * 0.5).sin() / (3.0 * PI * PI - kappa * kappa);
    assert!((p.solution(&x) - expect).abs() < 1e-14);
}

/// A small tanh net on the tape: `u = v · tanh(W x + b)`.
fn tape_net<'p>(
    tape: &mut Tape<'p, f64>,
    layout: &ParamLayout,
    coords: &[f64],
    d: usize,
) -> crate::diff::Var {
    let n = coords.len() / d;
    let x = tape.constant(JetTensor::seeded(n, d, coords));
    let w = layout.entry("w").unwrap().offset;
    let b = layout.entry("b").unwrap().offset;
    let v = layout.entry("v").unwrap().offset;
    let h = tape.linear(x, w, 8, Some(b));
    let h = tape.tanh(h);
    tape.linear(h, v, 1, None)
}

#[test]
fn tape_and_point_paths_agree() {
    use rand::Rng as _;
    for p in all_problems() {
        let d = p.dim();
        let mut layout = ParamLayout::new();
        layout.push("w", (8, d), ParamKind::Weight);
        layout.push("b", (1, 8), ParamKind::Bias);
        layout.push("v", (1, 8), ParamKind::Weight);
        let mut rng = rng_for(4, 0);
        let theta: Vec<f64> = (0..layout.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let pts = random_points(&p, 16, 5);
        let mut tape = Tape::new(&theta);
        let u = tape_net(&mut tape, &layout, pts.coords(), d);
        let r = p.residual(&mut TapeField {
            tape: &mut tape,
            output: u,
            coords: pts.coords(),
        })[0];
        let batched = tape.value(r).values();
        for (i, x) in pts.points().enumerate() {
            let jets = vec![DiffScalar::from_tape(&tape, u, i, 0)];
            let single = p.residual(&mut PointField { outputs: &jets, x })[0];
            assert!(
                (single - batched[i]).abs() <= 1e-6 * single.abs().max(1.0),
                "{}",
                p.name()
            );
        }
    }
}

#[test]
fn periodic_pairing_mirrors_points() {
    let p = convection_problem();
    let face = p.conditions()[1].face(&p.domain::<f64>()).unwrap();
    let lo = sample_gus(&face, 50, None, &mut rng_for(6, 0));
    let pair = PeriodicPairing::from_lower(lo, 0, p.period(0));
    assert_eq!(pair.len(), 50);
    assert!(pair.is_consistent());
    for x in pair.hi.points() {
        assert_eq!(x[0], 2.0 * PI);
    }
}
