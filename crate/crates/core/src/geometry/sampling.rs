use rand::Rng as _;

use crate::error::{Error, Result};
use crate::geometry::domain::{Domain, Region};
use crate::geometry::partition::{Element, Partition};
use crate::geometry::rng::Rng;
use crate::scalar::Scalar;

/// Collocation points with their element and region tags.
#[derive(Clone, Debug, PartialEq)]
pub struct PointBatch<T> {
    dim: usize,
    coords: Vec<T>,
    elements: Vec<Option<usize>>,
    regions: Vec<Region>,
    /// Points per element (`m_k`); empty unless produced element-wise.
    allocation: Vec<usize>,
}

impl<T: Scalar> PointBatch<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            elements: Vec::new(),
            regions: Vec::new(),
            allocation: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[T], element: Option<usize>, region: Region) {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        self.coords.extend_from_slice(x);
        self.elements.push(element);
        self.regions.push(region);
    }

    pub fn set_allocation(&mut self, allocation: Vec<usize>) {
        self.allocation = allocation;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of points `M`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major `M × d` coordinates.
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn elements(&self) -> &[Option<usize>] {
        &self.elements
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn allocation(&self) -> &[usize] {
        &self.allocation
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Assigns element indices by locating each point in `partition`.
    pub fn assign_elements(&mut self, partition: &Partition<T>) {
        for i in 0..self.len() {
            let e = partition.locate(&self.coords[i * self.dim..(i + 1) * self.dim]);
            self.elements[i] = e;
        }
    }

    /// Appends all points of `other`.
    pub fn extend(&mut self, other: &PointBatch<T>) {
        assert_eq!(self.dim, other.dim, "point dimension mismatch");
        self.coords.extend_from_slice(&other.coords);
        self.elements.extend_from_slice(&other.elements);
        self.regions.extend_from_slice(&other.regions);
    }
}

/// How many points each element receives under element-aware sampling.
#[derive(Clone, Debug, PartialEq)]
pub enum Allocation<T> {
    /// The same count in every element (only valid for equal measures).
    PerElement(usize),
    /// `m_k = density · |E_k|`.
    Density(T),
    /// `m_k = M · |E_k| / |Ω|`.
    Total(usize),
    /// Explicit counts, proportional or not.
    Table(Vec<usize>),
}

/// Resolves an [`Allocation`] to integer counts.
///
/// Non-integer proportional counts are rejected unless `largest_remainder`
/// is set, in which case floors are topped up by largest fractional part
/// (ties to the lower element index) until the rounded total is met.
pub fn resolve_allocation<T: Scalar>(
    partition: &Partition<T>,
    allocation: &Allocation<T>,
    largest_remainder: bool,
) -> Result<Vec<usize>> {
    let k = partition.len();
    let exact: Vec<f64> = match allocation {
        Allocation::Table(v) => {
            if v.len() != k {
                return Err(Error::config(format!(
                    "allocation table has {} entries, partition has {k}",
                    v.len()
                )));
            }
            return Ok(v.clone());
        }
        Allocation::PerElement(m) => {
            let first = partition.elements()[0].measure;
            let tol = T::lit(1e-12) * first.abs();
            if partition
                .elements()
                .iter()
                .any(|e| (e.measure - first).abs() > tol)
            {
                return Err(Error::config(
                    "per-element counts require equal element measures",
                ));
            }
            return Ok(vec![*m; k]);
        }
        Allocation::Density(rho) => partition
            .elements()
            .iter()
            .map(|e| (*rho * e.measure).to_f64_lossy())
            .collect(),
        Allocation::Total(m) => {
            let total = partition.total_measure();
            partition
                .elements()
                .iter()
                .map(|e| (T::lit(*m as f64) * e.measure / total).to_f64_lossy())
                .collect()
        }
    };
    let is_int = |v: f64| (v - v.round()).abs() <= 1e-9 * v.abs().max(1.0);
    if exact.iter().all(|&v| is_int(v)) {
        return Ok(exact.iter().map(|v| v.round() as usize).collect());
    }
    if !largest_remainder {
        return Err(Error::config(
            "proportional allocation is not integral; enable largest-remainder rounding",
        ));
    }
    let target = exact.iter().sum::<f64>().round() as usize;
    let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let missing = target.saturating_sub(counts.iter().sum());
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    Ok(counts)
}

fn uniform_in<T: Scalar>(bounds: &[(T, T)], rng: &mut Rng, out: &mut Vec<T>) {
    out.clear();
    for (lo, hi) in bounds {
        if lo == hi {
            out.push(*lo);
        } else {
            let u: f64 = rng.gen();
            out.push(*lo + (*hi - *lo) * T::lit(u));
        }
    }
}

fn sample_element<T: Scalar>(
    e: &Element<T>,
    m: usize,
    region: Region,
    rng: &mut Rng,
    batch: &mut PointBatch<T>,
) {
    let mut x = Vec::with_capacity(e.bounds.len());
    for _ in 0..m {
        uniform_in(&e.bounds, rng, &mut x);
        batch.push(&x, Some(e.index), region);
    }
}

/// Element-aware sampling: `m_k` i.i.d. uniform points inside each element,
/// emitted element by element in index order.
pub fn sample_eas<T: Scalar>(
    partition: &Partition<T>,
    allocation: &Allocation<T>,
    largest_remainder: bool,
    rng: &mut Rng,
) -> Result<PointBatch<T>> {
    let counts = resolve_allocation(partition, allocation, largest_remainder)?;
    let region = partition.domain().region();
    let mut batch = PointBatch::new(partition.domain().dim());
    for (e, &m) in partition.elements().iter().zip(&counts) {
        sample_element(e, m, region, rng, &mut batch);
    }
    batch.set_allocation(counts);
    Ok(batch)
}

/// Global uniform sampling of `m` points; elements are located when a
/// partition is supplied.
pub fn sample_gus<T: Scalar>(
    domain: &Domain<T>,
    m: usize,
    partition: Option<&Partition<T>>,
    rng: &mut Rng,
) -> PointBatch<T> {
    let mut batch = PointBatch::new(domain.dim());
    let mut x = Vec::with_capacity(domain.dim());
    for _ in 0..m {
        uniform_in(domain.bounds(), rng, &mut x);
        batch.push(&x, None, domain.region());
    }
    if let Some(p) = partition {
        batch.assign_elements(p);
    }
    batch
}

/// Latin hypercube design: along every free axis the `m` points occupy each
/// of `m` equal strata exactly once.
pub fn sample_lhs<T: Scalar>(domain: &Domain<T>, m: usize, rng: &mut Rng) -> PointBatch<T> {
    use rand::seq::SliceRandom;
    let d = domain.dim();
    let mut columns: Vec<Vec<T>> = Vec::with_capacity(d);
    for &(lo, hi) in domain.bounds() {
        if lo == hi {
            columns.push(vec![lo; m]);
            continue;
        }
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(rng);
        let col = perm
            .into_iter()
            .map(|s| {
                let u: f64 = rng.gen();
                let frac = ((s as f64 + u) / m as f64).min(1.0);
                lo + (hi - lo) * T::lit(frac)
            })
            .collect();
        columns.push(col);
    }
    let mut batch = PointBatch::new(d);
    let mut x = vec![T::zero(); d];
    for i in 0..m {
        for a in 0..d {
            x[a] = columns[a][i];
        }
        batch.push(&x, None, domain.region());
    }
    batch
}

/// Settings for residual-based adaptive sampling.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RadConfig {
    /// Candidate pool size as a multiple of the requested count.
    pub pool_factor: usize,
    /// Density exponent `k` in `|r|^k + floor`.
    pub exponent: f64,
    pub floor: f64,
}

impl Default for RadConfig {
    fn default() -> Self {
        Self {
            pool_factor: 10,
            exponent: 2.0,
            floor: 1e-6,
        }
    }
}

/// Residual-proportional resampling: draws `m` points without replacement
/// from a uniform candidate pool of `pool_factor · m` points with weights
/// `|r(x)|^k + floor`. A residual that vanishes on the whole pool degrades
/// to global uniform sampling.
pub fn sample_rad<T: Scalar>(
    domain: &Domain<T>,
    m: usize,
    residual: &dyn Fn(&PointBatch<T>) -> Vec<T>,
    config: &RadConfig,
    rng: &mut Rng,
) -> Result<PointBatch<T>> {
    if m == 0 {
        return Ok(PointBatch::new(domain.dim()));
    }
    let pool = sample_gus(domain, m * config.pool_factor.max(1), None, rng);
    let r = residual(&pool);
    if r.len() != pool.len() {
        return Err(Error::usage(
            "residual field returned the wrong number of values",
        ));
    }
    let raw: Vec<f64> = r
        .iter()
        .map(|v| v.to_f64_lossy().abs().powf(config.exponent))
        .collect();
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("RAD residual weights", None));
    }
    let mut out = PointBatch::new(domain.dim());
    if raw.iter().all(|&v| v == 0.0) {
        for i in 0..m {
            out.push(pool.point(i), None, domain.region());
        }
        return Ok(out);
    }
    let weights: Vec<f64> = raw.iter().map(|v| v + config.floor).collect();
    let picked = rand::seq::index::sample_weighted(rng, pool.len(), |i| weights[i], m)
        .map_err(|e| Error::config(format!("RAD weighted selection failed: {e}")))?;
    let mut idx = picked.into_vec();
    idx.sort_unstable();
    for i in idx {
        out.push(pool.point(i), None, domain.region());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::partition::partition_uniform;
    use crate::geometry::rng::rng_for;

    #[test]
    fn eas_table4_count() {
        let p = partition_uniform(&Domain::<f64>::unit(2), &[25, 25]).unwrap();
        let b = sample_eas(&p, &Allocation::PerElement(4), false, &mut rng_for(0, 0)).unwrap();
        assert_eq!(b.len(), 2500);
        assert_eq!(b.allocation(), &vec![4; 625][..]);
        for (i, x) in b.points().enumerate() {
            let k = b.elements()[i].unwrap();
            assert!(p.elements()[k].contains(x));
            assert_eq!(k, i / 4);
        }
    }

    #[test]
    fn eas_single_element_is_uniform_over_domain() {
        let d = Domain::<f64>::unit(2);
        let p = partition_uniform(&d, &[1, 1]).unwrap();
        let b = sample_eas(&p, &Allocation::Total(10), false, &mut rng_for(1, 0)).unwrap();
        assert_eq!(b.len(), 10);
        assert!(b.points().all(|x| d.contains(x)));
    }

    #[test]
    fn eas_element_mean_near_centroid() {
        // 1000 points in one element of a 4×4 grid; per-axis sd = w/√12 with w = 0.25
        let p = partition_uniform(&Domain::<f64>::unit(2), &[4, 4]).unwrap();
        let mut table = vec![0; 16];
        table[5] = 1000;
        let b = sample_eas(&p, &Allocation::Table(table), false, &mut rng_for(2, 0)).unwrap();
        let c = p.elements()[5].centroid();
        let se = 0.25 / 12f64.sqrt() / 1000f64.sqrt();
        for a in 0..2 {
            let mean = b.points().map(|x| x[a]).sum::<f64>() / 1000.0;
            assert!(
                (mean - c[a]).abs() <= 3.0 * se,
                "axis {a}: {mean} vs {}",
                c[a]
            );
        }
    }

    #[test]
    fn allocation_rounding_policy() {
        let p = partition_uniform(&Domain::<f64>::unit(1), &[3]).unwrap();
        assert!(resolve_allocation(&p, &Allocation::Total(10), false).is_err());
        let counts = resolve_allocation(&p, &Allocation::Total(10), true).unwrap();
        assert_eq!(counts.iter().sum::<usize>(), 10);
        assert_eq!(counts, vec![4, 3, 3]);
        assert_eq!(
            resolve_allocation(&p, &Allocation::Density(6.0), false).unwrap(),
            vec![2, 2, 2]
        );
        assert!(resolve_allocation(&p, &Allocation::Table(vec![1, 2]), false).is_err());
    }

    #[test]
    fn gus_moments() {
        let m = 100_000;
        let b = sample_gus(&Domain::<f64>::unit(2), m, None, &mut rng_for(3, 0));
        let se = (1.0 / 12f64).sqrt() / (m as f64).sqrt();
        for a in 0..2 {
            let mean = b.points().map(|x| x[a]).sum::<f64>() / m as f64;
            assert!((mean - 0.5).abs() <= 3.0 * se);
        }
        // sub-rectangle [0, 0.5] × [0, 0.5] has measure 0.25
        let frac = b.points().filter(|x| x[0] <= 0.5 && x[1] <= 0.5).count() as f64 / m as f64;
        let sd = (0.25f64 * 0.75 / m as f64).sqrt();
        assert!((frac - 0.25).abs() <= 3.0 * sd);
    }

    #[test]
    fn gus_edge_counts() {
        let d = Domain::<f64>::unit(2);
        assert!(sample_gus(&d, 0, None, &mut rng_for(0, 0)).is_empty());
        let b = sample_gus(&d, 1, None, &mut rng_for(0, 0));
        assert!(d.contains(b.point(0)));
    }

    #[test]
    fn gus_locates_elements() {
        let d = Domain::<f64>::unit(2);
        let p = partition_uniform(&d, &[3, 3]).unwrap();
        let b = sample_gus(&d, 50, Some(&p), &mut rng_for(9, 0));
        for (i, x) in b.points().enumerate() {
            assert!(p.elements()[b.elements()[i].unwrap()].contains(x));
        }
    }

    fn bins_hit(values: impl Iterator<Item = f64>, m: usize) -> Vec<usize> {
        let mut hits = vec![0; m];
        for v in values {
            hits[((v * m as f64).floor() as usize).min(m - 1)] += 1;
        }
        hits
    }

    #[test]
    fn lhs_one_point_per_stratum() {
        let b = sample_lhs(&Domain::<f64>::unit(1), 4, &mut rng_for(4, 0));
        let mut xs: Vec<f64> = b.points().map(|x| x[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, x) in xs.iter().enumerate() {
            assert!(*x >= i as f64 * 0.25 && *x <= (i + 1) as f64 * 0.25);
        }
        let b = sample_lhs(&Domain::<f64>::unit(2), 100, &mut rng_for(5, 0));
        for a in 0..2 {
            assert_eq!(bins_hit(b.points().map(|x| x[a]), 100), vec![1; 100]);
        }
        let again = sample_lhs(&Domain::<f64>::unit(2), 100, &mut rng_for(5, 0));
        assert_eq!(b, again);
    }

    #[test]
    fn rad_constant_field_looks_uniform() {
        // chi-square on 10 bins of the first axis, 9 dof: p > 0.01 ⇔ χ² < 21.666
        let m = 2000;
        let field = |b: &PointBatch<f64>| vec![1.0; b.len()];
        let b = sample_rad(
            &Domain::<f64>::unit(2),
            m,
            &field,
            &RadConfig::default(),
            &mut rng_for(6, 0),
        )
        .unwrap();
        let hits = bins_hit(b.points().map(|x| x[0]), 10);
        let e = m as f64 / 10.0;
        let chi2: f64 = hits.iter().map(|&h| (h as f64 - e).powi(2) / e).sum();
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn rad_concentrates_on_left_half() {
        let field = |b: &PointBatch<f64>| {
            b.points()
                .map(|x| if x[0] < 0.5 { 1.0 } else { 0.0 })
                .collect()
        };
        let b = sample_rad(
            &Domain::<f64>::unit(2),
            500,
            &field,
            &RadConfig::default(),
            &mut rng_for(7, 0),
        )
        .unwrap();
        let left = b.points().filter(|x| x[0] < 0.5).count();
        assert!(left as f64 >= 0.9 * 500.0, "left = {left}");
    }

    #[test]
    fn rad_zero_field_and_empty() {
        let d = Domain::<f64>::unit(2);
        let zero = |b: &PointBatch<f64>| vec![0.0; b.len()];
        let b = sample_rad(&d, 20, &zero, &RadConfig::default(), &mut rng_for(8, 0)).unwrap();
        assert_eq!(b.len(), 20);
        assert!(
            sample_rad(&d, 0, &zero, &RadConfig::default(), &mut rng_for(8, 0))
                .unwrap()
                .is_empty()
        );
    }
}
