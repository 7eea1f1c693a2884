use crate::diff::{Deriv, DiffScalar, Tape, Var};
use crate::scalar::Scalar;

/// Arithmetic over residual values, so one operator definition serves both
/// the tape (batched, differentiable in θ) and single points with known jets.
pub trait FieldAlgebra<T: Scalar> {
    type V: Clone;

    /// Input dimension of the points.
    fn dim(&self) -> usize;
    /// A derivative channel of output component `comp`.
    fn u(&mut self, comp: usize, d: Deriv) -> Self::V;
    /// A parameter-free function of the coordinates.
    fn coord_fn(&mut self, f: &dyn Fn(&[T]) -> T) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn scale(&mut self, a: &Self::V, c: T) -> Self::V;
    fn add_const(&mut self, a: &Self::V, c: T) -> Self::V;
}

/// Batched residuals on a tape: every value is a plain `rows × 1` node.
pub struct TapeField<'a, 'p, T: Scalar> {
    pub tape: &'a mut Tape<'p, T>,
    /// Jet node of network outputs, `rows × c`.
    pub output: Var,
    /// Row-major `rows × d` coordinates of the points.
    pub coords: &'a [T],
}

impl<'a, 'p, T: Scalar> FieldAlgebra<T> for TapeField<'a, 'p, T> {
    type V = Var;

    fn dim(&self) -> usize {
        self.tape.value(self.output).jet_dim()
    }

    fn u(&mut self, comp: usize, d: Deriv) -> Var {
        let ch = d.channel(self.dim());
        self.tape.channel(self.output, comp, ch)
    }

    fn coord_fn(&mut self, f: &dyn Fn(&[T]) -> T) -> Var {
        let d = self.dim();
        let vals = self.coords.chunks_exact(d).map(f).collect();
        self.tape.constant_column(vals)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.add(*a, *b)
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.sub(*a, *b)
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.mul(*a, *b)
    }

    fn scale(&mut self, a: &Var, c: T) -> Var {
        self.tape.scale(*a, c)
    }

    fn add_const(&mut self, a: &Var, c: T) -> Var {
        self.tape.add_scalar(*a, c)
    }
}

/// One point with known output jets.
pub struct PointField<'a, T> {
    pub outputs: &'a [DiffScalar<T>],
    pub x: &'a [T],
}

impl<'a, T: Scalar> FieldAlgebra<T> for PointField<'a, T> {
    type V = T;

    fn dim(&self) -> usize {
        self.x.len()
    }

    fn u(&mut self, comp: usize, d: Deriv) -> T {
        let o = &self.outputs[comp];
        match d {
            Deriv::Value => o.value,
            Deriv::First(i) => o.d1[i],
            Deriv::Second(i) => o.d2[i],
        }
    }

    fn coord_fn(&mut self, f: &dyn Fn(&[T]) -> T) -> T {
        f(self.x)
    }

    fn add(&mut self, a: &T, b: &T) -> T {
        *a + *b
    }

    fn sub(&mut self, a: &T, b: &T) -> T {
        *a - *b
    }

    fn mul(&mut self, a: &T, b: &T) -> T {
        *a * *b
    }

    fn scale(&mut self, a: &T, c: T) -> T {
        *a * c
    }

    fn add_const(&mut self, a: &T, c: T) -> T {
        *a + c
    }
}
