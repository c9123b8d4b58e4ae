//! Forward transforms: ray, broken-ray, weighted and polyhedral-cone integrals.
//!
//! Every transform is sampled on the image lattice, one value per vertex, and
//! every ray is truncated at the lattice hull (the field is zero outside).

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::io::{load_with_meta, store_with_meta};
use crate::field::{map_points, FieldMeta, ScalarField};
use crate::geometry::{dot, ConeFrame, ConeFrame2, ConeFrameN, Frame, WeightedFrame2};
use crate::quad::midpoint;

/// Transform values `g = Tf` indexed by broken-ray vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    pub field: ScalarField,
    pub frame: Frame,
    pub quadrature_step: f64,
}

impl Sinogram {
    /// Wraps externally produced values; the step defaults to half the finest spacing.
    pub fn new(field: ScalarField, frame: Frame, quadrature_step: Option<f64>) -> Result<Self> {
        if field.dim() != frame.dim() {
            return Err(Error::DimensionMismatch { expected: frame.dim(), found: field.dim() });
        }
        let step = quadrature_step.unwrap_or_else(|| field.grid().default_step());
        check_step(&field, step)?;
        Ok(Self { field, frame, quadrature_step: step })
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let mut meta = FieldMeta::for_field(&self.field);
        meta.role = Some("sinogram".into());
        meta.frame = Some(self.frame.to_spec());
        meta.quadrature_step = Some(self.quadrature_step);
        store_with_meta(&self.field, meta, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (field, meta) = load_with_meta(path)?;
        if meta.role.as_deref() != Some("sinogram") {
            return Err(Error::Format(format!("{} is not a sinogram", path.display())));
        }
        let frame = meta
            .frame
            .as_ref()
            .ok_or_else(|| Error::Format("sinogram metadata lacks a frame".into()))?
            .build()?;
        Self::new(field, frame, meta.quadrature_step)
    }
}

fn check_step(field: &ScalarField, step: f64) -> Result<()> {
    let h = field.grid().min_spacing();
    if !(step > 0.0 && step <= h * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("quadrature step {step} must lie in (0, {h}]")));
    }
    Ok(())
}

/// Midpoint-rule integral of `field` along `{origin + s·direction : s ≥ 0}` within the lattice hull.
pub fn integrate_ray(field: &ScalarField, origin: &[f64], direction: &[f64], step: f64) -> f64 {
    let bbox = field.grid().bbox();
    let Some((t0, t1)) = bbox.ray_interval(origin, direction) else { return 0.0 };
    let dim = origin.len();
    let mut p = [0.0; 3];
    midpoint(t0.max(0.0), t1, step, |s| {
        for i in 0..dim {
            p[i] = origin[i] + s * direction[i];
        }
        field.sample(&p[..dim])
    })
}

fn require_dim(field: &ScalarField, dim: usize) -> Result<()> {
    if field.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: field.dim() });
    }
    Ok(())
}

/// `g(x, y) = ∫₀ˣ f(t, y) dt + ∫₀ʸ f(x, t) dt` relative to the lattice origin.
pub fn forward_perpendicular(field: &ScalarField, step: f64) -> Result<Sinogram> {
    forward_broken_ray(field, &ConeFrame2::perpendicular(), step)
}

/// Sum of the two ray integrals leaving each vertex along `u` and `v`.
pub fn forward_broken_ray(field: &ScalarField, frame: &ConeFrame2, step: f64) -> Result<Sinogram> {
    require_dim(field, 2)?;
    check_step(field, step)?;
    let (u, v) = (frame.u, frame.v);
    let values = map_points(field.grid(), |x| integrate_ray(field, x, &u, step) + integrate_ray(field, x, &v, step));
    Ok(Sinogram {
        field: ScalarField::from_parts(field.grid().clone(), values, format!("T[{}]", field.name)),
        frame: Frame::Broken(frame.clone()),
        quadrature_step: step,
    })
}

/// `c1·∫_{v-ray} f + c2·∫_{u-ray} f`.
pub fn forward_weighted(field: &ScalarField, wframe: &WeightedFrame2, step: f64) -> Result<Sinogram> {
    require_dim(field, 2)?;
    check_step(field, step)?;
    let (u, v, c1, c2) = (wframe.base.u, wframe.base.v, wframe.c1, wframe.c2);
    let values =
        map_points(field.grid(), |x| c1 * integrate_ray(field, x, &v, step) + c2 * integrate_ray(field, x, &u, step));
    Ok(Sinogram {
        field: ScalarField::from_parts(field.grid().clone(), values, format!("Tw[{}]", field.name)),
        frame: Frame::Weighted(wframe.clone()),
        quadrature_step: step,
    })
}

/// Surface integral of `f` over the boundary of the polyhedral cone at every vertex.
///
/// Each face `{x + s₁uⱼ + s₂uₖ : s ≥ 0}` is integrated by an iterated midpoint rule in
/// generator coordinates, scaled by the area element `√det Gram(uⱼ, uₖ)`.
pub fn forward_polyhedral(field: &ScalarField, frame: &ConeFrameN, step: f64) -> Result<Sinogram> {
    require_dim(field, 3)?;
    if frame.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: frame.dim() });
    }
    check_step(field, step)?;
    let faces: Vec<Face> = (0..3).map(|omit| Face::new(frame, omit)).collect();
    let corners: Vec<Vec<f64>> = field.grid().bbox().corners().collect();
    let values = map_points(field.grid(), |x| faces.iter().map(|face| face.integrate(field, x, &corners, step)).sum());
    Ok(Sinogram {
        field: ScalarField::from_parts(field.grid().clone(), values, format!("Tc[{}]", field.name)),
        frame: Frame::Polyhedral(frame.clone()),
        quadrature_step: step,
    })
}

struct Face {
    a: [f64; 3],
    b: [f64; 3],
    gram: f64,
    area: f64,
}

impl Face {
    fn new(frame: &ConeFrameN, omit: usize) -> Self {
        let idx: Vec<usize> = (0..3).filter(|&i| i != omit).collect();
        let a: [f64; 3] = frame.generators[idx[0]].as_slice().try_into().expect("3-D generator");
        let b: [f64; 3] = frame.generators[idx[1]].as_slice().try_into().expect("3-D generator");
        let gram = dot(&a, &b);
        Self { a, b, gram, area: (1.0 - gram * gram).sqrt() }
    }

    /// Largest `s₁` reached inside the box: the `a`-coordinate of `d` in the basis
    /// `(a, b, normal)` is `(d·a − g·d·b) / (1 − g²)`, affine in `d`, so corners bound it.
    fn outer_extent(&self, x: &[f64], corners: &[Vec<f64>]) -> f64 {
        corners
            .iter()
            .map(|c| {
                let d = [c[0] - x[0], c[1] - x[1], c[2] - x[2]];
                (dot(&d, &self.a) - self.gram * dot(&d, &self.b)) / (1.0 - self.gram * self.gram)
            })
            .fold(0.0, f64::max)
    }

    fn integrate(&self, field: &ScalarField, x: &[f64], corners: &[Vec<f64>], step: f64) -> f64 {
        let s_max = self.outer_extent(x, corners);
        let inner = midpoint(0.0, s_max, step, |s| {
            let o = [x[0] + s * self.a[0], x[1] + s * self.a[1], x[2] + s * self.a[2]];
            integrate_ray(field, &o, &self.b, step)
        });
        self.area * inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_phantom, Grid, PhantomSpec};
    use approx::assert_abs_diff_eq;

    fn unit2(n: usize) -> Grid {
        Grid::unit(&[n, n]).unwrap()
    }

    #[test]
    fn ray_through_constant_field() {
        let f = ScalarField::from_fn(unit2(33), "one", |_| 1.0);
        let step = f.grid().default_step();
        assert_abs_diff_eq!(integrate_ray(&f, &[0.2, 0.5], &[-1.0, 0.0], step), 0.2, epsilon = step * step);
        assert_abs_diff_eq!(integrate_ray(&f, &[0.5, 0.5], &[0.0, -1.0], step), 0.5, epsilon = step * step);
        // Enters the hull from outside.
        assert_abs_diff_eq!(integrate_ray(&f, &[-1.0, 0.5], &[1.0, 0.0], step), 1.0, epsilon = 1e-12);
        assert_eq!(integrate_ray(&f, &[-1.0, 0.5], &[-1.0, 0.0], step), 0.0);
    }

    #[test]
    fn gaussian_ray_matches_refined_step() {
        let spec = PhantomSpec::Gaussian { amplitude: 1.0, center: vec![0.45, 0.55], width: 0.12 };
        let f = make_phantom(&spec, &unit2(129)).unwrap();
        let dir = [0.6f64.cos(), 0.6f64.sin()];
        let h = f.grid().default_step();
        let coarse = integrate_ray(&f, &[0.05, 0.1], &dir, h);
        let fine = integrate_ray(&f, &[0.05, 0.1], &dir, h / 10.0);
        assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
    }

    #[test]
    fn perpendicular_matches_general_frame_and_vanishes_on_zero() {
        let f = make_phantom(&PhantomSpec::PolyExample1, &unit2(33)).unwrap();
        let h = f.grid().default_step();
        let a = forward_perpendicular(&f, h).unwrap();
        let b = forward_broken_ray(&f, &ConeFrame2::new([-1.0, 0.0], [0.0, -1.0]).unwrap(), h).unwrap();
        for (x, y) in a.field.samples().iter().zip(b.field.samples()) {
            assert!((x - y).abs() <= 1e-12);
        }
        let zero = ScalarField::zeros(unit2(9), "0");
        assert!(forward_perpendicular(&zero, 0.05).unwrap().field.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_reductions() {
        let f = make_phantom(&PhantomSpec::ExpExample2, &unit2(33)).unwrap();
        let h = f.grid().default_step();
        let w = WeightedFrame2::new([-1.0, 0.0], [0.0, -1.0], 1.0, 1.0).unwrap();
        let a = forward_weighted(&f, &w, h).unwrap();
        let b = forward_perpendicular(&f, h).unwrap();
        for (x, y) in a.field.samples().iter().zip(b.field.samples()) {
            assert!((x - y).abs() <= 1e-12);
        }

        let one = ScalarField::from_fn(unit2(65), "one", |_| 1.0);
        let h = one.grid().default_step();
        let w = WeightedFrame2::new([-1.0, 0.0], [0.0, -1.0], 2.0, 0.5).unwrap();
        let g = forward_weighted(&one, &w, h).unwrap();
        assert_abs_diff_eq!(g.field.sample(&[0.5, 0.5]), 1.25, epsilon = h * h);
    }

    #[test]
    fn polyhedral_examples() {
        let g = Grid::unit(&[9, 9, 9]).unwrap();
        let frame = ConeFrameN::orthonormal(3).unwrap();
        let one = ScalarField::from_fn(g.clone(), "one", |_| 1.0);
        let step = g.default_step();
        let s = forward_polyhedral(&one, &frame, step).unwrap();
        assert_abs_diff_eq!(s.field.at(&[0, 0, 0]), 3.0, epsilon = 2.0 * step);
        let xyz = make_phantom(&PhantomSpec::SeparablePoly { amplitude: 1.0 }, &g).unwrap();
        let s = forward_polyhedral(&xyz, &frame, step).unwrap();
        assert_abs_diff_eq!(s.field.at(&[0, 0, 0]), 0.0, epsilon = 1e-15);
        let zero = ScalarField::zeros(g, "0");
        assert!(forward_polyhedral(&zero, &frame, step).unwrap().field.samples().iter().all(|&v| v == 0.0));
        assert!(matches!(forward_polyhedral(&xyz.clone(), &frame, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn dimension_errors() {
        let g3 = ScalarField::zeros(Grid::unit(&[3, 3, 3]).unwrap(), "z");
        assert!(matches!(forward_perpendicular(&g3, 0.1), Err(Error::DimensionMismatch { .. })));
        let g2 = ScalarField::zeros(unit2(3), "z");
        let frame = ConeFrameN::orthonormal(3).unwrap();
        assert!(matches!(forward_polyhedral(&g2, &frame, 0.1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sinogram_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = make_phantom(&PhantomSpec::PolyExample1, &unit2(9)).unwrap();
        let w = WeightedFrame2::new([-1.0, 0.0], [0.0, -1.0], 2.0, 1.0).unwrap();
        let s = forward_weighted(&f, &w, 0.05).unwrap();
        let path = dir.path().join("g.f64");
        s.store(&path).unwrap();
        let text = std::fs::read_to_string(dir.path().join("g.json")).unwrap();
        assert!(text.contains("\"role\": \"sinogram\""));
        let back = Sinogram::load(&path).unwrap();
        assert_eq!(back, s);
        crate::field::store_field(&f, &path).unwrap();
        assert!(matches!(Sinogram::load(&path), Err(Error::Format(_))));
    }
}
