use crate::error::{Error, Result};
use crate::geometry::domain::Domain;
use crate::scalar::Scalar;

/// One cell of a partition.
#[derive(Clone, Debug, PartialEq)]
pub struct Element<T> {
    pub index: usize,
    /// Ambient-dimension bounds (degenerate on a face's fixed axis).
    pub bounds: Vec<(T, T)>,
    pub measure: T,
}

impl<T: Scalar> Element<T> {
    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(&self.bounds)
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn centroid(&self) -> Vec<T> {
        self.bounds
            .iter()
            .map(|(lo, hi)| (*lo + *hi) * T::lit(0.5))
            .collect()
    }
}

/// Axis-aligned uniform grid of elements over a [`Domain`].
#[derive(Clone, Debug, PartialEq)]
pub struct Partition<T> {
    domain: Domain<T>,
    /// Cells along each free axis, in free-axis order.
    cells: Vec<usize>,
    elements: Vec<Element<T>>,
}

impl<T: Scalar> Partition<T> {
    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Total measure `Σ |E_k|`.
    pub fn total_measure(&self) -> T {
        self.elements.iter().map(|e| e.measure).sum()
    }

    fn cut(&self, free: usize, i: usize) -> T {
        let axis = self.domain.free_axes()[free];
        let (lo, hi) = self.domain.bounds()[axis];
        grid_cut(lo, hi, i, self.cells[free])
    }

    /// Element containing `x`, or `None` outside the domain. Points on a
    /// shared face go to the lower-index element.
    pub fn locate(&self, x: &[T]) -> Option<usize> {
        if !self.domain.contains(x) {
            return None;
        }
        let free = self.domain.free_axes();
        let mut index = 0;
        for (f, &axis) in free.iter().enumerate() {
            let n = self.cells[f];
            let (lo, hi) = self.domain.bounds()[axis];
            let v = x[axis];
            let guess = ((v - lo) / (hi - lo) * T::lit(n as f64))
                .floor()
                .to_f64_lossy();
            let mut i = (guess.max(0.0) as usize).min(n - 1);
            while i > 0 && v <= self.cut(f, i) {
                i -= 1;
            }
            while i + 1 < n && v > self.cut(f, i + 1) {
                i += 1;
            }
            index = index * n + i;
        }
        Some(index)
    }
}

/// `lo + (hi − lo)·i/n`, exact at both ends so neighbours share bitwise-equal faces.
fn grid_cut<T: Scalar>(lo: T, hi: T, i: usize, n: usize) -> T {
    if i == 0 {
        lo
    } else if i == n {
        hi
    } else {
        lo + (hi - lo) * T::lit(i as f64) / T::lit(n as f64)
    }
}

/// Splits `domain` into `Π cells` equal boxes, one count per free axis.
/// Element indices are row-major over the free axes (last axis fastest).
pub fn partition_uniform<T: Scalar>(domain: &Domain<T>, cells: &[usize]) -> Result<Partition<T>> {
    let free = domain.free_axes();
    if cells.len() != free.len() {
        return Err(Error::config(format!(
            "expected {} cell counts (one per free axis), got {}",
            free.len(),
            cells.len()
        )));
    }
    if let Some(i) = cells.iter().position(|&c| c == 0) {
        return Err(Error::config(format!(
            "cell count on free axis {i} must be >= 1"
        )));
    }
    let measure = free
        .iter()
        .zip(cells)
        .map(|(&a, &n)| (domain.bounds()[a].1 - domain.bounds()[a].0) / T::lit(n as f64))
        .fold(T::one(), |acc, w| acc * w);
    let total: usize = cells.iter().product();
    let mut elements = Vec::with_capacity(total);
    let mut idx = vec![0usize; cells.len()];
    for k in 0..total {
        let mut rem = k;
        for f in (0..cells.len()).rev() {
            idx[f] = rem % cells[f];
            rem /= cells[f];
        }
        let mut bounds = domain.bounds().to_vec();
        for (f, &axis) in free.iter().enumerate() {
            let (lo, hi) = domain.bounds()[axis];
            bounds[axis] = (
                grid_cut(lo, hi, idx[f], cells[f]),
                grid_cut(lo, hi, idx[f] + 1, cells[f]),
            );
        }
        elements.push(Element {
            index: k,
            bounds,
            measure,
        });
    }
    Ok(Partition {
        domain: domain.clone(),
        cells: cells.to_vec(),
        elements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn unit_square_25x25() {
        let p = partition_uniform(&Domain::<f64>::unit(2), &[25, 25]).unwrap();
        assert_eq!(p.len(), 625);
        for e in p.elements() {
            assert!((e.measure - 0.0016).abs() < 1e-15);
        }
        assert!((p.total_measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convection_domain_measure() {
        let d = Domain::new(vec![(0.0, TAU), (0.0, 1.0)]).unwrap();
        let p = partition_uniform(&d, &[25, 25]).unwrap();
        assert!((p.total_measure() - 2.0 * PI).abs() / (2.0 * PI) < 1e-12);
    }

    #[test]
    fn unit_cube() {
        let p = partition_uniform(&Domain::<f64>::unit(3), &[25, 25, 25]).unwrap();
        assert_eq!(p.len(), 15625);
        let (mx, mn) = p.elements().iter().fold((0.0f64, f64::MAX), |(a, b), e| {
            (a.max(e.measure), b.min(e.measure))
        });
        assert_eq!(mx / mn, 1.0);
        assert!((p.total_measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(partition_uniform(&Domain::<f64>::unit(2), &[0, 3]).is_err());
        assert!(partition_uniform(&Domain::<f64>::unit(2), &[3]).is_err());
    }

    #[test]
    fn locate_and_tie_break() {
        let p = partition_uniform(&Domain::<f64>::unit(2), &[4, 4]).unwrap();
        assert_eq!(p.locate(&[0.1, 0.1]), Some(0));
        assert_eq!(p.locate(&[0.1, 0.3]), Some(1));
        assert_eq!(p.locate(&[0.3, 0.1]), Some(4));
        // on the face between cells 0 and 1 along the last axis
        assert_eq!(p.locate(&[0.1, 0.25]), Some(0));
        // corner shared by four cells
        assert_eq!(p.locate(&[0.5, 0.5]), Some(5));
        assert_eq!(p.locate(&[1.0, 1.0]), Some(15));
        assert_eq!(p.locate(&[0.0, 0.0]), Some(0));
        assert_eq!(p.locate(&[1.1, 0.5]), None);
        for e in p.elements() {
            assert_eq!(p.locate(&e.centroid()), Some(e.index));
        }
    }

    #[test]
    fn face_partition() {
        let d = Domain::new(vec![(0.0, TAU), (0.0, 1.0)]).unwrap();
        let ic = d.face(1, false, Region::Initial).unwrap();
        let p = partition_uniform(&ic, &[10]).unwrap();
        assert_eq!(p.len(), 10);
        assert!((p.total_measure() - TAU).abs() < 1e-12);
        assert_eq!(p.elements()[3].bounds[1], (0.0, 0.0));
        assert_eq!(p.locate(&[TAU * 0.35, 0.0]), Some(3));
    }
}
