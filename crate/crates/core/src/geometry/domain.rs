use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which constraint a point enforces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Interior,
    /// The `t = t0` slice of a space-time domain.
    Initial,
    /// The face `x_axis = lo` (`upper == false`) or `x_axis = hi`.
    Boundary {
        axis: usize,
        upper: bool,
    },
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Interior => write!(f, "interior"),
            Region::Initial => write!(f, "initial"),
            Region::Boundary { axis, upper } => {
                write!(f, "boundary:{axis}:{}", if *upper { "hi" } else { "lo" })
            }
        }
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(Region::Interior),
            "initial" => Ok(Region::Initial),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["boundary", axis, side] => {
                        let axis = axis
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad boundary axis in {s:?}")))?;
                        let upper = match *side {
                            "lo" => false,
                            "hi" => true,
                            _ => return Err(Error::Parse(format!("bad boundary side in {s:?}"))),
                        };
                        Ok(Region::Boundary { axis, upper })
                    }
                    _ => Err(Error::Parse(format!("unknown region {s:?}"))),
                }
            }
        }
    }
}

/// Axis-aligned box in `R^d`, optionally flattened onto one face.
///
/// A flattened domain keeps the ambient dimension (points carry all `d`
/// coordinates) but has `lo == hi` on its fixed axis; its measure is taken
/// over the remaining free axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain<T> {
    bounds: Vec<(T, T)>,
    fixed_axis: Option<usize>,
    region: Region,
}

impl<T: Scalar> Domain<T> {
    /// Full-dimensional interior box.
    pub fn new(bounds: Vec<(T, T)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::config("domain needs at least one axis"));
        }
        for (i, (lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::config(format!("axis {i}: require finite lo < hi")));
            }
        }
        Ok(Self {
            bounds,
            fixed_axis: None,
            region: Region::Interior,
        })
    }

    /// Unit hypercube `[0, 1]^d`.
    pub fn unit(d: usize) -> Self {
        Self::new(vec![(T::zero(), T::one()); d]).expect("unit cube is valid")
    }

    /// The face `x_axis = lo` or `x_axis = hi`, tagged with `region`.
    pub fn face(&self, axis: usize, upper: bool, region: Region) -> Result<Self> {
        if self.fixed_axis.is_some() {
            return Err(Error::config("cannot take a face of a face"));
        }
        if axis >= self.bounds.len() {
            return Err(Error::config(format!("face axis {axis} out of range")));
        }
        if self.bounds.len() < 2 {
            return Err(Error::config(
                "faces of a 1D domain are points; not supported",
            ));
        }
        let mut bounds = self.bounds.clone();
        let v = if upper {
            bounds[axis].1
        } else {
            bounds[axis].0
        };
        bounds[axis] = (v, v);
        Ok(Self {
            bounds,
            fixed_axis: Some(axis),
            region,
        })
    }

    /// Boundary face with the conventional region tag.
    pub fn boundary_face(&self, axis: usize, upper: bool) -> Result<Self> {
        self.face(axis, upper, Region::Boundary { axis, upper })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn fixed_axis(&self) -> Option<usize> {
        self.fixed_axis
    }

    /// Axes along which the domain has positive extent.
    pub fn free_axes(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&a| Some(a) != self.fixed_axis)
            .collect()
    }

    /// Lebesgue measure over the free axes.
    pub fn measure(&self) -> T {
        self.free_axes()
            .into_iter()
            .map(|a| self.bounds[a].1 - self.bounds[a].0)
            .fold(T::one(), |acc, w| acc * w)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_tags_roundtrip() {
        for r in [
            Region::Interior,
            Region::Initial,
            Region::Boundary {
                axis: 0,
                upper: false,
            },
            Region::Boundary {
                axis: 2,
                upper: true,
            },
        ] {
            assert_eq!(r.to_string().parse::<Region>().unwrap(), r);
        }
        assert!("boundary:x:lo".parse::<Region>().is_err());
    }

    #[test]
    fn measures() {
        let d = Domain::new(vec![(0.0, std::f64::consts::TAU), (0.0, 1.0)]).unwrap();
        assert!((d.measure() - std::f64::consts::TAU).abs() < 1e-15);
        let f = d.face(1, false, Region::Initial).unwrap();
        assert_eq!(f.free_axes(), vec![0]);
        assert!((f.measure() - std::f64::consts::TAU).abs() < 1e-15);
        let b = d.boundary_face(0, true).unwrap();
        assert_eq!(b.measure(), 1.0);
        assert!(b.contains(&[std::f64::consts::TAU, 0.5]));
        assert!(!b.contains(&[0.0, 0.5]));
    }

    #[test]
    fn rejects_degenerate_bounds() {
        assert!(Domain::new(vec![(1.0, 1.0)]).is_err());
        assert!(Domain::<f64>::new(vec![]).is_err());
    }
}
