//! Regular lattices in two and three dimensions and the fields sampled on them.
//!
//! Samples are stored row-major with the last axis fastest. Between lattice
//! points a field is the multilinear interpolant of its samples; outside the
//! lattice hull it is exactly zero.

pub(crate) mod io;
mod phantom;

pub use io::{export_pgm, load_field, read_csv, store_field, write_csv, FieldMeta};
pub use phantom::{make_phantom, PhantomSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::BoundingBox;

/// Points within this many cells outside the hull still count as inside, absorbing rounding.
const EDGE_SLACK: f64 = 1e-9;

/// Anything that can be evaluated at a point: lattice fields and closed-form closures.
pub trait PointFunction {
    fn value_at(&self, p: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> PointFunction for F {
    fn value_at(&self, p: &[f64]) -> f64 {
        self(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Vec<f64>,
    spacing: Vec<f64>,
    counts: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let n = counts.len();
        if !(n == 2 || n == 3) {
            return Err(Error::InvalidGrid(format!("{n} axes; only 2 or 3 are supported")));
        }
        if origin.len() != n || spacing.len() != n {
            return Err(Error::InvalidGrid("origin, spacing and counts differ in length".into()));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidGrid("every axis needs at least 2 points".into()));
        }
        if spacing.iter().any(|h| !(h.is_finite() && *h > 0.0)) || origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("spacing must be positive and origin finite".into()));
        }
        Ok(Self { origin, spacing, counts })
    }

    /// Lattice spanning `bbox` with `counts` points per axis, corners included.
    pub fn spanning(bbox: &BoundingBox, counts: &[usize]) -> Result<Self> {
        if bbox.dim() != counts.len() {
            return Err(Error::DimensionMismatch { expected: bbox.dim(), found: counts.len() });
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidGrid("every axis needs at least 2 points".into()));
        }
        let spacing = (0..counts.len())
            .map(|i| (bbox.max[i] - bbox.min[i]) / (counts[i] - 1) as f64)
            .collect();
        Self::new(bbox.min.clone(), spacing, counts.to_vec())
    }

    /// Lattice on the unit square or cube.
    pub fn unit(counts: &[usize]) -> Result<Self> {
        let n = counts.len();
        Self::spanning(&BoundingBox { min: vec![0.0; n], max: vec![1.0; n] }, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    /// Default quadrature step: half the finest spacing.
    pub fn default_step(&self) -> f64 {
        self.min_spacing() / 2.0
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + (self.counts[axis] - 1) as f64 * self.spacing[axis]
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox { min: self.origin.clone(), max: (0..self.dim()).map(|i| self.upper(i)).collect() }
    }

    /// Writes the coordinates of flat index `idx` into `out`.
    pub fn point_into(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for axis in (0..self.dim()).rev() {
            let k = rem % self.counts[axis];
            rem /= self.counts[axis];
            out[axis] = self.origin[axis] + k as f64 * self.spacing[axis];
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(idx, &mut p);
        p
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.counts).fold(0, |acc, (&k, &n)| acc * n + k)
    }

    /// Cell index and fractional offset along `axis`, or `None` outside the hull.
    #[inline]
    fn locate(&self, axis: usize, x: f64) -> Option<(usize, f64)> {
        let u = (x - self.origin[axis]) / self.spacing[axis];
        let last = (self.counts[axis] - 1) as f64;
        if !(u >= -EDGE_SLACK && u <= last + EDGE_SLACK) {
            return None;
        }
        let u = u.clamp(0.0, last);
        let i = (u.floor() as usize).min(self.counts[axis] - 2);
        Some((i, u - i as f64))
    }

    /// Same origin, spacing and counts up to `1e-12` relative.
    pub fn same_as(&self, other: &Grid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        self.counts == other.counts
            && self.origin.iter().zip(&other.origin).all(|(a, b)| close(*a, *b))
            && self.spacing.iter().zip(&other.spacing).all(|(a, b)| close(*a, *b))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    samples: Vec<f64>,
    pub name: String,
}

impl ScalarField {
    pub fn new(grid: Grid, samples: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Format(format!(
                "sample count {} does not match the grid's {} points",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample {i} is not finite")));
        }
        Ok(Self { grid, samples, name: name.into() })
    }

    pub fn zeros(grid: Grid, name: impl Into<String>) -> Self {
        let samples = vec![0.0; grid.len()];
        Self { grid, samples, name: name.into() }
    }

    /// Evaluates `f` at every lattice point.
    pub fn from_fn<F>(grid: Grid, name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let samples = map_points(&grid, f);
        Self { grid, samples, name: name.into() }
    }

    pub(crate) fn from_parts(grid: Grid, samples: Vec<f64>, name: impl Into<String>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples, name: name.into() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn at(&self, multi: &[usize]) -> f64 {
        self.samples[self.grid.flat_index(multi)]
    }

    /// Multilinear interpolation; exactly 0 outside the lattice hull.
    pub fn sample(&self, p: &[f64]) -> f64 {
        match self.grid.dim() {
            2 => self.sample2(p),
            _ => self.sample3(p),
        }
    }

    #[inline]
    fn sample2(&self, p: &[f64]) -> f64 {
        let Some((i, fx)) = self.grid.locate(0, p[0]) else { return 0.0 };
        let Some((j, fy)) = self.grid.locate(1, p[1]) else { return 0.0 };
        let ny = self.grid.counts[1];
        let k = i * ny + j;
        let s = &self.samples;
        let lo = s[k] + fy * (s[k + 1] - s[k]);
        let hi = s[k + ny] + fy * (s[k + ny + 1] - s[k + ny]);
        if fx == 0.0 {
            return lo;
        }
        lo + fx * (hi - lo)
    }

    #[inline]
    fn sample3(&self, p: &[f64]) -> f64 {
        let Some((i, fx)) = self.grid.locate(0, p[0]) else { return 0.0 };
        let Some((j, fy)) = self.grid.locate(1, p[1]) else { return 0.0 };
        let Some((l, fz)) = self.grid.locate(2, p[2]) else { return 0.0 };
        let (ny, nz) = (self.grid.counts[1], self.grid.counts[2]);
        let s = &self.samples;
        let edge = |k: usize| s[k] + fz * (s[k + 1] - s[k]);
        let face = |k: usize| {
            let a = edge(k);
            a + fy * (edge(k + nz) - a)
        };
        let k = (i * ny + j) * nz + l;
        let a = face(k);
        if fx == 0.0 {
            return a;
        }
        a + fx * (face(k + ny * nz) - a)
    }

    /// Tensor-product Catmull-Rom interpolation, falling back to linear along axes
    /// where the four-point stencil leaves the lattice; exactly 0 outside the hull.
    pub fn sample_cubic(&self, p: &[f64]) -> f64 {
        let dim = self.grid.dim();
        let mut taps = [[(0usize, 0.0f64); 4]; 3];
        let mut widths = [0usize; 3];
        for axis in 0..dim {
            let Some((i, s)) = self.grid.locate(axis, p[axis]) else { return 0.0 };
            let n = self.grid.counts[axis];
            if i >= 1 && i + 2 < n {
                let (s2, s3) = (s * s, s * s * s);
                taps[axis] = [
                    (i - 1, 0.5 * (-s3 + 2.0 * s2 - s)),
                    (i, 0.5 * (3.0 * s3 - 5.0 * s2 + 2.0)),
                    (i + 1, 0.5 * (-3.0 * s3 + 4.0 * s2 + s)),
                    (i + 2, 0.5 * (s3 - s2)),
                ];
                widths[axis] = 4;
            } else {
                taps[axis][0] = (i, 1.0 - s);
                taps[axis][1] = (i + 1, s);
                widths[axis] = 2;
            }
        }
        let c = &self.grid.counts;
        let mut total = 0.0;
        if dim == 2 {
            for &(i, wi) in &taps[0][..widths[0]] {
                let row = i * c[1];
                let mut acc = 0.0;
                for &(j, wj) in &taps[1][..widths[1]] {
                    acc += wj * self.samples[row + j];
                }
                total += wi * acc;
            }
        } else {
            for &(i, wi) in &taps[0][..widths[0]] {
                for &(j, wj) in &taps[1][..widths[1]] {
                    let row = (i * c[1] + j) * c[2];
                    let mut acc = 0.0;
                    for &(l, wl) in &taps[2][..widths[2]] {
                        acc += wl * self.samples[row + l];
                    }
                    total += wi * wj * acc;
                }
            }
        }
        total
    }

    /// Integral of the multilinear interpolant over the hull (trapezoid weights).
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let cell: f64 = g.spacing.iter().product();
        let mut multi = vec![0usize; g.dim()];
        let mut total = 0.0;
        for (idx, v) in self.samples.iter().enumerate() {
            let mut rem = idx;
            for axis in (0..g.dim()).rev() {
                multi[axis] = rem % g.counts[axis];
                rem /= g.counts[axis];
            }
            let w: f64 = multi
                .iter()
                .zip(&g.counts)
                .map(|(&k, &n)| if k == 0 || k == n - 1 { 0.5 } else { 1.0 })
                .product();
            total += w * v;
        }
        total * cell
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self::from_parts(self.grid.clone(), self.samples.iter().map(|&v| f(v)).collect(), self.name.clone())
    }

    /// `a·self + b·other` on the same lattice.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("fields live on different lattices".into()));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        Ok(Self::from_parts(self.grid.clone(), samples, self.name.clone()))
    }
}

impl PointFunction for ScalarField {
    fn value_at(&self, p: &[f64]) -> f64 {
        self.sample(p)
    }
}

/// Evaluates `f` at every lattice point of `grid`, in flat index order.
pub(crate) fn map_points<F>(grid: &Grid, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let dim = grid.dim();
    exec::map_indices(grid.len(), |idx| {
        let mut p = [0.0; 3];
        grid.point_into(idx, &mut p[..dim]);
        f(&p[..dim])
    })
}

/// Error metrics between two fields over the lattice points inside a region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMetrics {
    pub linf: f64,
    /// `‖a − b‖₂ / ‖b‖₂`; 0 when both norms vanish, infinite when only `‖b‖₂` does.
    pub l2_rel: f64,
    /// Mean absolute difference.
    pub mean_err: f64,
    pub points: usize,
}

/// Compares `a` against the reference `b` at lattice points inside `region` (all points if `None`).
pub fn compare_fields(a: &ScalarField, b: &ScalarField, region: Option<&BoundingBox>) -> Result<FieldMetrics> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?} points",
            a.grid.counts(),
            b.grid.counts()
        )));
    }
    let grid = &a.grid;
    let mut p = vec![0.0; grid.dim()];
    let (mut linf, mut diff2, mut ref2, mut sum_abs, mut points) = (0.0f64, 0.0, 0.0, 0.0, 0usize);
    for idx in 0..grid.len() {
        if let Some(r) = region {
            grid.point_into(idx, &mut p);
            if !r.contains(&p) {
                continue;
            }
        }
        let d = a.samples[idx] - b.samples[idx];
        linf = linf.max(d.abs());
        diff2 += d * d;
        ref2 += b.samples[idx] * b.samples[idx];
        sum_abs += d.abs();
        points += 1;
    }
    let l2_rel = if diff2 == 0.0 {
        0.0
    } else if ref2 == 0.0 {
        f64::INFINITY
    } else {
        (diff2 / ref2).sqrt()
    };
    Ok(FieldMetrics { linf, l2_rel, mean_err: if points > 0 { sum_abs / points as f64 } else { 0.0 }, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit2(n: usize) -> Grid {
        Grid::unit(&[n, n]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![0.0], vec![1.0], vec![4]).is_err());
        assert!(Grid::new(vec![0.0, 0.0], vec![1.0, 0.0], vec![4, 4]).is_err());
        assert!(Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![1, 4]).is_err());
        let g = unit2(5);
        assert_eq!(g.point(g.flat_index(&[2, 3])), vec![0.5, 0.75]);
        assert_eq!(g.bbox().max, vec![1.0, 1.0]);
    }

    #[test]
    fn constant_interpolates_to_itself() {
        let f = ScalarField::from_fn(unit2(9), "one", |_| 1.0);
        assert_abs_diff_eq!(f.sample(&[0.37, 0.61]), 1.0, epsilon = 1e-15);
        assert_eq!(f.sample(&[-5.0, -5.0]), 0.0);
        assert_eq!(f.sample(&[1.0 + 1e-6, 0.5]), 0.0);
        assert_abs_diff_eq!(f.sample(&[1.0, 1.0]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn lattice_points_are_exact() {
        let g = Grid::unit(&[5, 6, 7]).unwrap();
        let f = ScalarField::from_fn(g.clone(), "f", |p| (p[0] * 3.0).sin() + p[1] * p[2].exp());
        for idx in [0, 17, 100, g.len() - 1] {
            let p = g.point(idx);
            assert_eq!(f.sample(&p), f.samples()[idx]);
        }
    }

    #[test]
    fn integral_of_bilinear_interpolant() {
        let f = ScalarField::from_fn(unit2(11), "f", |p| 2.0 * p[0] + p[1] + 0.5);
        assert_abs_diff_eq!(f.integral(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn metrics_examples() {
        let b = ScalarField::from_fn(unit2(8), "b", |_| 1.0);
        let m = compare_fields(&b, &b, None).unwrap();
        assert_eq!((m.linf, m.l2_rel, m.mean_err), (0.0, 0.0, 0.0));
        let a = b.map(|v| v + 0.001);
        let m = compare_fields(&a, &b, None).unwrap();
        assert_abs_diff_eq!(m.linf, 0.001, epsilon = 1e-12);
        assert_abs_diff_eq!(m.l2_rel, 0.001, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_err, 0.001, epsilon = 1e-12);
        let other = ScalarField::from_fn(unit2(9), "c", |_| 1.0);
        assert!(matches!(compare_fields(&a, &other, None), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #[test]
        fn affine_functions_are_reproduced(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64,
                                           x in 0.0..1.0f64, y in 0.0..1.0f64, z in 0.0..1.0f64) {
            let f2 = ScalarField::from_fn(unit2(7), "f", |p| a * p[0] + b * p[1] + c);
            prop_assert!((f2.sample(&[x, y]) - (a * x + b * y + c)).abs() < 1e-12);
            let f3 = ScalarField::from_fn(Grid::unit(&[4, 5, 6]).unwrap(), "f", |p| a * p[0] + b * p[1] + c * p[2]);
            prop_assert!((f3.sample(&[x, y, z]) - (a * x + b * y + c * z)).abs() < 1e-12);
        }

        #[test]
        fn continuous_across_cell_faces(k in 1usize..6, y in 0.0..1.0f64) {
            let g = unit2(7);
            let f = ScalarField::from_fn(g.clone(), "f", |p| (5.0 * p[0]).sin() * (3.0 * p[1]).cos());
            let x = k as f64 * g.spacing()[0];
            let left = f.sample(&[x - 1e-13, y]);
            let right = f.sample(&[x + 1e-13, y]);
            prop_assert!((left - right).abs() < 1e-12);
        }
    }
}
