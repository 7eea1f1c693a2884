use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
    pub max_iters: usize,
    /// Stop once the gradient 2-norm is at or below this.
    pub tol: f64,
    /// Pairs with `sᵀy ≤ curvature_floor · ‖s‖‖y‖` are discarded.
    pub curvature_floor: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
            max_iters: 2000,
            tol: 1e-10,
            curvature_floor: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
}

/// One accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsRecord {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// Cumulative objective evaluations, including the initial one.
    pub evaluations: usize,
    pub sufficient_decrease: bool,
    pub curvature: bool,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub termination: Termination,
    /// History resets after a failed line search (at most one).
    pub resets: usize,
    pub evaluations: usize,
    pub trace: Vec<LbfgsRecord>,
}

impl LbfgsResult {
    pub fn accepted_steps(&self) -> usize {
        self.trace.len()
    }
}

/// Curvature pairs, newest last.
#[derive(Clone, Debug, Default)]
pub struct LbfgsState {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl LbfgsState {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores `(s, y)` if `sᵀy > floor·‖s‖‖y‖`; returns whether it was kept.
    /// The floor is relative so that pairs keep flowing once steps shrink
    /// below the square root of an absolute threshold.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>, memory: usize, floor: f64) -> bool {
        let sy = dot(&s, &y);
        if !(sy > floor * norm(&s) * norm(&y)) {
            return false;
        }
        if self.pairs.len() == memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    /// Two-loop recursion: `-H g` with `H₀ = γI`, `γ = sᵀy / yᵀy` of the
    /// newest pair (identity when empty).
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alpha = vec![0.0; self.pairs.len()];
        for (i, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            alpha[i] = rho * dot(s, &q);
            axpy(-alpha[i], y, &mut q);
        }
        if let Some((_, y, rho)) = self.pairs.back() {
            let gamma = 1.0 / (rho * dot(y, y));
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for (i, (s, y, rho)) in self.pairs.iter().enumerate() {
            let b = rho * dot(y, &q);
            axpy(alpha[i] - b, s, &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// A line-search trial point. `grad` is `None` when the loss was not finite.
struct Trial {
    alpha: f64,
    value: f64,
    slope: f64,
    grad: Option<Vec<f64>>,
}

struct Searcher<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    budget: usize,
    used: usize,
}

impl<F> Searcher<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Result<Trial> {
        self.used += 1;
        let xt: Vec<f64> = self
            .x
            .iter()
            .zip(self.d)
            .map(|(x, d)| x + alpha * d)
            .collect();
        match (self.f)(&xt) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|x| x.is_finite()) => Ok(Trial {
                alpha,
                value: v,
                slope: dot(&g, self.d),
                grad: Some(g),
            }),
            Ok(_) => Ok(infinite(alpha)),
            Err(e) if e.is_numerical() => Ok(infinite(alpha)),
            Err(e) => Err(e),
        }
    }

    fn exhausted(&self) -> bool {
        self.used >= self.budget
    }
}

fn infinite(alpha: f64) -> Trial {
    Trial {
        alpha,
        value: f64::INFINITY,
        slope: f64::NAN,
        grad: None,
    }
}

/// Slack on the sufficient-decrease test: once the predicted decrease is
/// below the loss's own rounding error, only the curvature test can
/// discriminate between steps.
pub(crate) fn roundoff(f: f64) -> f64 {
    16.0 * f64::EPSILON * f.abs()
}

/// Minimiser of the cubic through two points with known slopes, or `None`.
fn cubic_min(a: &Trial, b: &Trial) -> Option<f64> {
    if !(b.value.is_finite() && b.slope.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Minimiser of the quadratic matching `a`'s value and slope and `b`'s value.
fn quad_min(a: &Trial, b: &Trial) -> Option<f64> {
    if !b.value.is_finite() {
        return None;
    }
    let h = b.alpha - a.alpha;
    let c = (b.value - a.value - a.slope * h) / (h * h);
    if !(c > 0.0) {
        return None;
    }
    let t = a.alpha - a.slope / (2.0 * c);
    t.is_finite().then_some(t)
}

fn strong_wolfe<F>(
    s: &mut Searcher<'_, F>,
    f0: f64,
    slope0: f64,
    alpha0: f64,
    c1: f64,
    c2: f64,
) -> Result<Option<Trial>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let armijo = |t: &Trial| t.value <= f0 + c1 * t.alpha * slope0 + roundoff(f0);
    let curvature = |t: &Trial| t.slope.abs() <= -c2 * slope0;

    let mut prev = Trial {
        alpha: 0.0,
        value: f0,
        slope: slope0,
        grad: None,
    };
    let mut alpha = alpha0;
    let mut first = true;
    while !s.exhausted() {
        let t = s.eval(alpha)?;
        if !armijo(&t) || (!first && t.value >= prev.value + roundoff(f0)) {
            return zoom(s, prev, t, f0, slope0, c1, c2);
        }
        if curvature(&t) {
            return Ok(Some(t));
        }
        if t.slope >= 0.0 {
            return zoom(s, t, prev, f0, slope0, c1, c2);
        }
        // extrapolate, staying well away from the current point
        let next = cubic_min(&prev, &t)
            .filter(|&a| a > 1.1 * t.alpha)
            .map(|a| a.min(10.0 * t.alpha))
            .unwrap_or(2.0 * t.alpha);
        prev = t;
        alpha = next;
        first = false;
    }
    Ok(None)
}

/// Shrinks the bracket `[lo, hi]`; `lo` always satisfies sufficient decrease
/// and has the lowest value seen.
fn zoom<F>(
    s: &mut Searcher<'_, F>,
    mut lo: Trial,
    mut hi: Trial,
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
) -> Result<Option<Trial>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    while !s.exhausted() {
        let (a, b) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let width = b - a;
        if !(width > f64::EPSILON * b.max(1e-300)) {
            return Ok(None);
        }
        let guess = cubic_min(&lo, &hi).or_else(|| quad_min(&lo, &hi));
        let alpha = match guess {
            Some(g) if g > a + 0.1 * width && g < b - 0.1 * width => g,
            _ => 0.5 * (a + b),
        };
        let t = s.eval(alpha)?;
        if t.value > f0 + c1 * t.alpha * slope0 + roundoff(f0) || t.value >= lo.value + roundoff(f0)
        {
            hi = t;
            continue;
        }
        if t.slope.abs() <= -c2 * slope0 {
            return Ok(Some(t));
        }
        if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
            hi = std::mem::replace(&mut lo, t);
        } else {
            lo = t;
        }
    }
    Ok(None)
}

/// Limited-memory BFGS with a strong Wolfe line search.
///
/// `objective` returns `(value, gradient)` and must be deterministic. A
/// trial step whose loss is non-finite counts as a failed sufficient-decrease
/// test; a non-finite loss at the starting point is a `Diverged` error.
pub fn lbfgs_minimize<F>(objective: F, theta0: &[f64], config: &LbfgsConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    lbfgs_minimize_with(objective, theta0, config, |_| {})
}

/// [`lbfgs_minimize`] with a callback after every accepted step.
pub fn lbfgs_minimize_with<F, C>(
    mut objective: F,
    theta0: &[f64],
    config: &LbfgsConfig,
    mut on_step: C,
) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    C: FnMut(&LbfgsRecord),
{
    let diverged = |context: String, theta: &[f64]| Error::Diverged {
        context,
        last_theta: theta.to_vec(),
    };
    let mut x = theta0.to_vec();
    let (mut fx, mut g) = match objective(&x) {
        Ok(v) => v,
        Err(e) if e.is_numerical() => return Err(diverged(format!("initial loss: {e}"), &x)),
        Err(e) => return Err(e),
    };
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(diverged(
            "initial loss or gradient is not finite".into(),
            &x,
        ));
    }
    let mut evaluations = 1;
    let mut state = LbfgsState::default();
    let mut trace = Vec::new();
    let mut resets = 0;

    let termination = loop {
        let gn = norm(&g);
        if gn <= config.tol {
            break Termination::GradientTolerance;
        }
        if trace.len() >= config.max_iters {
            break Termination::MaxIterations;
        }
        let mut d = state.direction(&g);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            state.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let alpha0 = if state.is_empty() {
            (1.0 / gn).min(1.0)
        } else {
            1.0
        };

        let mut searcher = Searcher {
            f: &mut objective,
            x: &x,
            d: &d,
            budget: config.max_line_search,
            used: 0,
        };
        let found = strong_wolfe(&mut searcher, fx, slope, alpha0, config.c1, config.c2)?;
        evaluations += searcher.used;
        let Some(t) = found else {
            if resets == 0 && !state.is_empty() {
                resets += 1;
                state.clear();
                continue;
            }
            break Termination::LineSearchFailure;
        };

        let sufficient_decrease = t.value <= fx + config.c1 * t.alpha * slope + roundoff(fx);
        let curvature = t.slope.abs() <= -config.c2 * slope;
        debug_assert!(
            sufficient_decrease && curvature,
            "accepted step violates strong Wolfe"
        );

        let g_new = t.grad.expect("accepted trial has a gradient");
        let s: Vec<f64> = d.iter().map(|v| t.alpha * v).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        state.push(s, y, config.memory, config.curvature_floor);
        fx = t.value;
        g = g_new;

        let record = LbfgsRecord {
            iteration: trace.len() + 1,
            value: fx,
            grad_norm: norm(&g),
            step: t.alpha,
            evaluations,
            sufficient_decrease,
            curvature,
        };
        on_step(&record);
        trace.push(record);
    };

    Ok(LbfgsResult {
        theta: x,
        value: fx,
        gradient: g,
        termination,
        resets,
        evaluations,
        trace,
    })
}
