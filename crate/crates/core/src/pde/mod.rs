//! Benchmark PDEs: residual and condition operators plus reference solutions.
//!
//! Time-dependent problems use coordinates `(x, t)` with time on axis 1.
//! Every problem has a single output component.

mod algebra;
mod plate;
#[cfg(test)]
mod tests;

use std::f64::consts::PI;
use std::sync::Arc;

pub use algebra::{FieldAlgebra, PointField, TapeField};
pub use plate::PlateSeries;

use crate::diff::{Deriv, DiffScalar};
use crate::error::{Error, Result};
use crate::geometry::{Domain, PointBatch, Region};
use crate::scalar::Scalar;

/// Loss term a condition contributes to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Initial,
    /// Initial time-derivative condition, kept apart from `Initial`.
    InitialDt,
    Boundary,
}

/// How a condition is enforced on its face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionOp {
    /// `u − g(x)` with `g` from [`PdeProblem::condition_target`].
    Value,
    /// `∂u/∂t`.
    TimeDerivative,
    /// `u(x) − u(x + period·e_axis)`; the condition's face is the lower one.
    Periodic,
}

/// A constraint imposed on one face of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Condition {
    pub term: Term,
    pub axis: usize,
    pub upper: bool,
    pub op: ConditionOp,
}

impl Condition {
    pub fn region(&self) -> Region {
        match self.term {
            Term::Initial | Term::InitialDt => Region::Initial,
            Term::Boundary => Region::Boundary {
                axis: self.axis,
                upper: self.upper,
            },
        }
    }

    pub fn face<T: Scalar>(&self, domain: &Domain<T>) -> Result<Domain<T>> {
        domain.face(self.axis, self.upper, self.region())
    }
}

/// Problem-specific constants.
#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    Convection {
        beta: f64,
    },
    Reaction {
        rho: f64,
    },
    /// `u_tt − c2·u_xx` with the second mode at frequency `beta`.
    Wave {
        c2: f64,
        beta: f64,
    },
    Harmonic {
        a: f64,
        kx: f64,
        ky: f64,
    },
    Plate {
        q: f64,
        x_box: (f64, f64),
        y_box: (f64, f64),
        series: Arc<PlateSeries>,
    },
    Helmholtz {
        a: f64,
        k: [f64; 3],
        kappa: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeProblem {
    name: String,
    kind: Kind,
    bounds: Vec<(f64, f64)>,
    time_axis: Option<usize>,
    conditions: Vec<Condition>,
}

fn dirichlet_faces(axes: &[usize]) -> Vec<Condition> {
    axes.iter()
        .flat_map(|&axis| {
            [false, true].map(|upper| Condition {
                term: Term::Boundary,
                axis,
                upper,
                op: ConditionOp::Value,
            })
        })
        .collect()
}

fn space_time_conditions(periodic: bool) -> Vec<Condition> {
    let mut c = vec![Condition {
        term: Term::Initial,
        axis: 1,
        upper: false,
        op: ConditionOp::Value,
    }];
    if periodic {
        c.push(Condition {
            term: Term::Boundary,
            axis: 0,
            upper: false,
            op: ConditionOp::Periodic,
        });
    } else {
        c.push(Condition {
            term: Term::InitialDt,
            axis: 1,
            upper: false,
            op: ConditionOp::TimeDerivative,
        });
        c.extend(dirichlet_faces(&[0]));
    }
    c
}

/// Transport `u_t + 50 u_x = 0` on `[0, 2π] × [0, 1]`, `u(x, 0) = sin x`, periodic in `x`.
pub fn convection_problem() -> PdeProblem {
    PdeProblem {
        name: "convection".into(),
        kind: Kind::Convection { beta: 50.0 },
        bounds: vec![(0.0, 2.0 * PI), (0.0, 1.0)],
        time_axis: Some(1),
        conditions: space_time_conditions(true),
    }
}

/// Logistic reaction `u_t = 5u(1 − u)` with a Gaussian initial profile, periodic in `x`.
pub fn reaction_problem() -> PdeProblem {
    PdeProblem {
        name: "reaction1d".into(),
        kind: Kind::Reaction { rho: 5.0 },
        bounds: vec![(0.0, 2.0 * PI), (0.0, 1.0)],
        time_axis: Some(1),
        conditions: space_time_conditions(true),
    }
}

/// `u_tt = 4 u_xx` on the unit square, fixed ends, released from rest.
pub fn wave_problem() -> PdeProblem {
    PdeProblem {
        name: "wave1d".into(),
        kind: Kind::Wave { c2: 4.0, beta: 4.0 },
        bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        time_axis: Some(1),
        conditions: space_time_conditions(false),
    }
}

/// `−Δu = 500 sin(5πx) sin(3πy)` with zero Dirichlet data.
pub fn harmonic_problem() -> PdeProblem {
    PdeProblem {
        name: "harmonic".into(),
        kind: Kind::Harmonic {
            a: 500.0,
            kx: 5.0,
            ky: 3.0,
        },
        bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        time_axis: None,
        conditions: dirichlet_faces(&[0, 1]),
    }
}

/// Series truncation used for the plate reference solution.
pub const PLATE_MODES: usize = 400;

/// `−Δu = 20` on `[0.25, 0.3] × [0.7, 0.75]`, zero elsewhere; clamped edges.
pub fn plate_problem() -> PdeProblem {
    plate_with_modes(PLATE_MODES)
}

pub fn plate_with_modes(modes: usize) -> PdeProblem {
    let (q, x_box, y_box) = (20.0, (0.25, 0.3), (0.7, 0.75));
    PdeProblem {
        name: "plate".into(),
        kind: Kind::Plate {
            q,
            x_box,
            y_box,
            series: Arc::new(PlateSeries::new(q, x_box, y_box, modes)),
        },
        bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        time_axis: None,
        conditions: dirichlet_faces(&[0, 1]),
    }
}

/// `−Δu − κ²u = A Π sin(k_i π x_i)` on the unit cube with the default
/// constants and `κ = 0.9·π|k|`, the non-resonant scored variant.
pub fn helmholtz3d_problem() -> PdeProblem {
    helmholtz3d_with(1.0, [1.0, 1.0, 1.0], 0.9)
}

/// Helmholtz with `κ = kappa_scale · π|k|`. At `kappa_scale = 1` the forcing
/// is an eigenmode; the reference is then the least-norm least-squares
/// solution, which is identically zero.
pub fn helmholtz3d_with(a: f64, k: [f64; 3], kappa_scale: f64) -> PdeProblem {
    let kappa = kappa_scale * PI * k.iter().map(|v| v * v).sum::<f64>().sqrt();
    PdeProblem {
        name: "helmholtz3d".into(),
        kind: Kind::Helmholtz { a, k, kappa },
        bounds: vec![(0.0, 1.0); 3],
        time_axis: None,
        conditions: dirichlet_faces(&[0, 1, 2]),
    }
}

/// Names accepted by [`PdeProblem::by_name`].
pub const PROBLEM_NAMES: [&str; 6] = [
    "convection",
    "reaction1d",
    "wave1d",
    "harmonic",
    "plate",
    "helmholtz3d",
];

impl PdeProblem {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "convection" => Ok(convection_problem()),
            "reaction1d" => Ok(reaction_problem()),
            "wave1d" => Ok(wave_problem()),
            "harmonic" => Ok(harmonic_problem()),
            "plate" => Ok(plate_problem()),
            "helmholtz3d" => Ok(helmholtz3d_problem()),
            _ => Err(Error::config(format!(
                "unknown problem {name:?}; expected one of {}",
                PROBLEM_NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn out_dim(&self) -> usize {
        1
    }

    pub fn time_axis(&self) -> Option<usize> {
        self.time_axis
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn domain<T: Scalar>(&self) -> Domain<T> {
        Domain::new(
            self.bounds
                .iter()
                .map(|&(a, b)| (T::lit(a), T::lit(b)))
                .collect(),
        )
        .expect("problem bounds are valid")
    }

    /// Source term `f` of elliptic problems (zero for the others).
    pub fn forcing<T: Scalar>(&self, x: &[T]) -> T {
        let pi = T::PI();
        match &self.kind {
            Kind::Harmonic { a, kx, ky } => {
                T::lit(*a) * (T::lit(*kx) * pi * x[0]).sin() * (T::lit(*ky) * pi * x[1]).sin()
            }
            Kind::Plate {
                q, x_box, y_box, ..
            } => {
                let inside = |v: T, (lo, hi): (f64, f64)| v >= T::lit(lo) && v <= T::lit(hi);
                if inside(x[0], *x_box) && inside(x[1], *y_box) {
                    T::lit(*q)
                } else {
                    T::zero()
                }
            }
            Kind::Helmholtz { a, k, .. } => k.iter().zip(x).fold(T::lit(*a), |acc, (ki, xi)| {
                acc * (T::lit(*ki) * pi * *xi).sin()
            }),
            _ => T::zero(),
        }
    }

    /// Interior residual `O_Ω(u)`, one entry per output component.
    pub fn residual<T: Scalar, A: FieldAlgebra<T>>(&self, alg: &mut A) -> Vec<A::V> {
        let laplacian = |alg: &mut A| {
            let mut acc = alg.u(0, Deriv::Second(0));
            for i in 1..alg.dim() {
                let t = alg.u(0, Deriv::Second(i));
                acc = alg.add(&acc, &t);
            }
            acc
        };
        let r = match &self.kind {
            Kind::Convection { beta } => {
                let ut = alg.u(0, Deriv::First(1));
                let ux = alg.u(0, Deriv::First(0));
                let bux = alg.scale(&ux, T::lit(*beta));
                alg.add(&ut, &bux)
            }
            Kind::Reaction { rho } => {
                // u_t − ρu(1 − u) = u_t + ρ(u² − u)
                let ut = alg.u(0, Deriv::First(1));
                let u = alg.u(0, Deriv::Value);
                let uu = alg.mul(&u, &u);
                let g = alg.sub(&uu, &u);
                let g = alg.scale(&g, T::lit(*rho));
                alg.add(&ut, &g)
            }
            Kind::Wave { c2, .. } => {
                let utt = alg.u(0, Deriv::Second(1));
                let uxx = alg.u(0, Deriv::Second(0));
                let s = alg.scale(&uxx, T::lit(*c2));
                alg.sub(&utt, &s)
            }
            Kind::Harmonic { .. } | Kind::Plate { .. } => {
                let lap = laplacian(alg);
                let neg = alg.scale(&lap, -T::one());
                let f = alg.coord_fn(&|x| self.forcing(x));
                alg.sub(&neg, &f)
            }
            Kind::Helmholtz { kappa, .. } => {
                let lap = laplacian(alg);
                let u = alg.u(0, Deriv::Value);
                let ku = alg.scale(&u, T::lit(kappa * kappa));
                let lu = alg.add(&lap, &ku);
                let neg = alg.scale(&lu, -T::one());
                let f = alg.coord_fn(&|x| self.forcing(x));
                alg.sub(&neg, &f)
            }
        };
        vec![r]
    }

    /// Prescribed value `g` for a [`ConditionOp::Value`] condition.
    pub fn condition_target<T: Scalar>(&self, cond: &Condition, x: &[T]) -> T {
        match (cond.term, &self.kind) {
            (Term::Initial, Kind::Convection { .. }) => x[0].sin(),
            (Term::Initial, Kind::Reaction { .. }) => reaction_h(x[0]),
            (Term::Initial, Kind::Wave { beta, .. }) => {
                let pi = T::PI();
                (pi * x[0]).sin() + T::lit(0.5) * (T::lit(*beta) * pi * x[0]).sin()
            }
            _ => T::zero(),
        }
    }

    /// Pointwise condition residual. Periodic conditions pair two points and
    /// are evaluated by the loss instead.
    pub fn condition_residual<T: Scalar, A: FieldAlgebra<T>>(
        &self,
        cond: &Condition,
        alg: &mut A,
    ) -> Result<Vec<A::V>> {
        match cond.op {
            ConditionOp::Value => {
                let u = alg.u(0, Deriv::Value);
                let g = alg.coord_fn(&|x| self.condition_target(cond, x));
                Ok(vec![alg.sub(&u, &g)])
            }
            ConditionOp::TimeDerivative => {
                let axis = self.time_axis.ok_or_else(|| {
                    Error::config("time-derivative condition without a time axis")
                })?;
                Ok(vec![alg.u(0, Deriv::First(axis))])
            }
            ConditionOp::Periodic => Err(Error::usage(
                "periodic conditions are evaluated on point pairs",
            )),
        }
    }

    /// Length of the domain along `axis` (the period of periodic conditions).
    pub fn period(&self, axis: usize) -> f64 {
        self.bounds[axis].1 - self.bounds[axis].0
    }

    /// Reference solution value.
    pub fn solution(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Plate { series, .. } => series.eval(x[0], x[1]),
            _ => self.solution_jet(x)[0].value,
        }
    }

    /// Reference solution with closed-form (or termwise series) derivatives.
    pub fn solution_jet(&self, x: &[f64]) -> Vec<DiffScalar<f64>> {
        let d = self.dim();
        let mut out = DiffScalar::constant(0.0, d);
        match &self.kind {
            Kind::Convection { beta } => {
                let (s, c) = (x[0] - beta * x[1]).sin_cos();
                out.value = s;
                out.d1 = vec![c, -beta * c];
                out.d2 = vec![-s, -beta * beta * s];
            }
            Kind::Reaction { rho } => {
                // u = 1/(1 + g), g = (e^s − 1)e^{−ρt}, s = (x − π)²/(2σ²)
                let sigma2 = (PI / 4.0).powi(2);
                let s = (x[0] - PI).powi(2) / (2.0 * sigma2);
                let sp = (x[0] - PI) / sigma2;
                let decay = (-rho * x[1]).exp();
                let g = (s.exp() - 1.0) * decay;
                let gx = s.exp() * sp * decay;
                let gxx = s.exp() * (sp * sp + 1.0 / sigma2) * decay;
                let p = 1.0 + g;
                out.value = 1.0 / p;
                out.d1 = vec![-gx / (p * p), rho * g / (p * p)];
                out.d2 = vec![
                    -gxx / (p * p) + 2.0 * gx * gx / (p * p * p),
                    -rho * rho * g / (p * p) + 2.0 * rho * rho * g * g / (p * p * p),
                ];
            }
            Kind::Wave { c2, beta } => {
                let c = c2.sqrt();
                let (w1, w2) = (PI, beta * PI);
                let (v1, v2) = (c * w1, c * w2);
                let (sx1, cx1) = (w1 * x[0]).sin_cos();
                let (sx2, cx2) = (w2 * x[0]).sin_cos();
                let (st1, ct1) = (v1 * x[1]).sin_cos();
                let (st2, ct2) = (v2 * x[1]).sin_cos();
                out.value = sx1 * ct1 + 0.5 * sx2 * ct2;
                out.d1 = vec![
                    w1 * cx1 * ct1 + 0.5 * w2 * cx2 * ct2,
                    -v1 * sx1 * st1 - 0.5 * v2 * sx2 * st2,
                ];
                out.d2 = vec![
                    -w1 * w1 * sx1 * ct1 - 0.5 * w2 * w2 * sx2 * ct2,
                    -v1 * v1 * sx1 * ct1 - 0.5 * v2 * v2 * sx2 * ct2,
                ];
            }
            Kind::Harmonic { a, kx, ky } => {
                let w = [kx * PI, ky * PI];
                let amp = a / (w[0] * w[0] + w[1] * w[1]);
                product_mode(&mut out, amp, &w, x);
            }
            Kind::Plate { series, .. } => {
                let (u, g, h) = series.eval_jet(x[0], x[1]);
                out.value = u;
                out.d1 = g.to_vec();
                out.d2 = h.to_vec();
            }
            Kind::Helmholtz { a, k, kappa } => {
                let w: Vec<f64> = k.iter().map(|v| v * PI).collect();
                let lambda: f64 = w.iter().map(|v| v * v).sum();
                let denom = lambda - kappa * kappa;
                let amp = if denom.abs() <= 1e-12 * lambda {
                    0.0
                } else {
                    a / denom
                };
                product_mode(&mut out, amp, &w, x);
            }
        }
        vec![out]
    }

    /// Whether the reference is the resonant least-norm (zero) solution.
    pub fn is_resonant(&self) -> bool {
        match &self.kind {
            Kind::Helmholtz { k, kappa, .. } => {
                let lambda: f64 = k.iter().map(|v| (v * PI).powi(2)).sum();
                (lambda - kappa * kappa).abs() <= 1e-12 * lambda
            }
            _ => false,
        }
    }
}

/// Initial profile of the reaction problem: a Gaussian of width π/4 at π.
pub fn reaction_h<T: Scalar>(x: T) -> T {
    let sigma = T::PI() / T::lit(4.0);
    let z = (x - T::PI()) / sigma;
    (-(z * z) * T::lit(0.5)).exp()
}

/// `amp · Π sin(w_i x_i)` with its jets.
fn product_mode(out: &mut DiffScalar<f64>, amp: f64, w: &[f64], x: &[f64]) {
    let sc: Vec<(f64, f64)> = w
        .iter()
        .zip(x)
        .map(|(wi, xi)| (wi * xi).sin_cos())
        .collect();
    let prod_except = |skip: usize| {
        sc.iter()
            .enumerate()
            .filter(|(j, _)| *j != skip)
            .map(|(_, p)| p.0)
            .product::<f64>()
    };
    out.value = amp * sc.iter().map(|p| p.0).product::<f64>();
    for i in 0..w.len() {
        let rest = prod_except(i);
        out.d1[i] = amp * w[i] * sc[i].1 * rest;
        out.d2[i] = -amp * w[i] * w[i] * sc[i].0 * rest;
    }
}

/// Matched points on opposite faces of a periodic axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicPairing<T> {
    pub axis: usize,
    pub period: T,
    pub lo: PointBatch<T>,
    pub hi: PointBatch<T>,
}

impl<T: Scalar> PeriodicPairing<T> {
    /// Mirrors `lo` onto the upper face by one period, keeping element tags.
    pub fn from_lower(lo: PointBatch<T>, axis: usize, period: T) -> Self {
        let mut hi = PointBatch::new(lo.dim());
        let mut x = vec![T::zero(); lo.dim()];
        for (i, p) in lo.points().enumerate() {
            x.copy_from_slice(p);
            x[axis] = x[axis] + period;
            hi.push(&x, lo.elements()[i], Region::Boundary { axis, upper: true });
        }
        hi.set_allocation(lo.allocation().to_vec());
        Self {
            axis,
            period,
            lo,
            hi,
        }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    /// Pairs differ only along `axis`, by exactly one period.
    pub fn is_consistent(&self) -> bool {
        self.lo.len() == self.hi.len()
            && self.lo.points().zip(self.hi.points()).all(|(a, b)| {
                a.iter().zip(b).enumerate().all(|(i, (u, v))| {
                    if i == self.axis {
                        *v - *u == self.period
                    } else {
                        u == v
                    }
                })
            })
    }
}
