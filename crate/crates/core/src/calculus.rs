//! Cone integrals and cone differentiation.
//!
//! Accumulating a sinogram along the frame axis gives the integral of `f` over
//! the cone attached to each point. Alternating corner sums of that integral
//! over shrinking parallelograms give `f` back.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::io::{load_with_meta, store_with_meta};
use crate::field::{map_points, FieldMeta, Grid, PointFunction, ScalarField};
use crate::forward::Sinogram;
use crate::geometry::{
    cone_contains, cone_exit_parameter, corner_points, BoundingBox, ConeFrame, ConeFrame2, ConeFrameN, Frame,
    WeightedFrame2,
};
use crate::quad::midpoint;

/// Where the values of a cone integral came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Accumulated,
    Oracle,
    Imported,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Accumulated => "accumulated",
            Provenance::Oracle => "oracle",
            Provenance::Imported => "imported",
        }
    }
}

/// Values of `F(x) = ∫_{x + cone} f` at the lattice points.
///
/// Off-lattice values come from [`ScalarField::sample_cubic`]: corner sums
/// divide by `t²`, so linear interpolation would leave an `O(Δ²/t²)` bias at
/// stencil corners that miss the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeIntegralField {
    pub field: ScalarField,
    pub frame: Frame,
    pub source: Provenance,
}

impl ConeIntegralField {
    pub fn new(field: ScalarField, frame: Frame, source: Provenance) -> Result<Self> {
        if field.dim() != frame.dim() {
            return Err(Error::DimensionMismatch { expected: frame.dim(), found: field.dim() });
        }
        Ok(Self { field, frame, source })
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let mut meta = FieldMeta::for_field(&self.field);
        meta.role = Some("cone-integral".into());
        meta.frame = Some(self.frame.to_spec());
        meta.source = Some(self.source.as_str().into());
        store_with_meta(&self.field, meta, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (field, meta) = load_with_meta(path)?;
        if meta.role.as_deref() != Some("cone-integral") {
            return Err(Error::Format(format!("{} is not a cone integral", path.display())));
        }
        let frame = meta
            .frame
            .as_ref()
            .ok_or_else(|| Error::Format("cone integral metadata lacks a frame".into()))?
            .build()?;
        let source = match meta.source.as_deref() {
            Some("accumulated") => Provenance::Accumulated,
            Some("oracle") => Provenance::Oracle,
            _ => Provenance::Imported,
        };
        Self::new(field, frame, source)
    }
}

impl PointFunction for ConeIntegralField {
    fn value_at(&self, p: &[f64]) -> f64 {
        self.field.sample_cubic(p)
    }
}

/// Which derivation the differentiation follows; the arithmetic is identical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    ShrinkingAverage,
    MixedPartial,
}

/// Stencil of the cone differentiation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffScheme {
    /// Stencil scale in the units of the lattice spacing.
    pub t: f64,
    /// Combine scales `t` and `t/2` as `(4·V_{t/2} − V_t) / 3`.
    #[serde(default)]
    pub richardson: bool,
    pub mode: DiffMode,
}

impl DiffScheme {
    /// `t = 2Δ` with `Δ` the coarsest spacing, no extrapolation.
    pub fn default_for(grid: &Grid, mode: DiffMode) -> Self {
        Self { t: 2.0 * grid.max_spacing(), richardson: false, mode }
    }

    /// Every stencil scale used must reach at least one lattice cell.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let spacing = grid.max_spacing();
        let smallest = if self.richardson { self.t / 2.0 } else { self.t };
        if !(smallest.is_finite() && smallest >= spacing * (1.0 - 1e-9)) {
            return Err(Error::StencilTooSmall { t: smallest, spacing });
        }
        Ok(())
    }
}

/// `(−1)ⁿ`: each one-dimensional difference along a ray direction contributes `−1`.
pub fn orientation_sign(dim: usize) -> f64 {
    if dim.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `factor · ∫₀^{T} g(apex + t·axis) dt` with `T` the cone exit parameter for `bbox`.
pub fn cone_integral_at<G: PointFunction + ?Sized>(
    g: &G,
    frame: &dyn ConeFrame,
    apex: &[f64],
    bbox: &BoundingBox,
    step: f64,
) -> f64 {
    let n = frame.dim();
    let axis = frame.axis();
    let t_max = cone_exit_parameter(frame, apex, bbox);
    let mut p = [0.0; 8];
    let sum = midpoint(0.0, t_max, step, |t| {
        for i in 0..n {
            p[i] = apex[i] + t * axis[i];
        }
        g.value_at(&p[..n])
    });
    frame.accumulation_factor() * sum
}

/// Perpendicular-frame cone integral as a single slice integral:
/// `F(a, b) = ∫ g(a − b + s, s) ds` over `s ∈ [max(y₀, b − (a − x₀)), b]`.
pub fn accumulate_perpendicular_at<G: PointFunction + ?Sized>(
    g: &G,
    apex: [f64; 2],
    bbox: &BoundingBox,
    step: f64,
) -> f64 {
    let [a, b] = apex;
    let lo = bbox.min[1].max(b - (a - bbox.min[0]));
    let hi = b.min(bbox.max[1]);
    midpoint(lo, hi, step, |s| g.value_at(&[a - b + s, s]))
}

fn accumulate_field(g: &Sinogram, frame: &dyn ConeFrame) -> ScalarField {
    let grid = g.field.grid();
    let bbox = grid.bbox();
    let step = g.quadrature_step;
    let values = map_points(grid, |x| cone_integral_at(&g.field, frame, x, &bbox, step));
    ScalarField::from_parts(grid.clone(), values, format!("F[{}]", g.field.name))
}

fn require_frame(g: &Sinogram, frame: &Frame) -> Result<()> {
    if g.frame.dim() != frame.dim() {
        return Err(Error::DimensionMismatch { expected: frame.dim(), found: g.frame.dim() });
    }
    if !g.frame.matches(frame) {
        return Err(Error::FrameMismatch(format!("sinogram frame {:?} differs from {:?}", g.frame, frame)));
    }
    Ok(())
}

/// `F(x) = sin β · ∫₀^{T} g(x + t·α) dt`.
pub fn accumulate_cone_integral(g: &Sinogram, frame: &ConeFrame2) -> Result<ConeIntegralField> {
    let frame = Frame::Broken(frame.clone());
    require_frame(g, &frame)?;
    let field = accumulate_field(g, &frame);
    ConeIntegralField::new(field, frame, Provenance::Accumulated)
}

/// `F(x) = (sin β₁ / c₁) · ∫₀^{T} g(x + t·α_w) dt`.
pub fn accumulate_weighted(g: &Sinogram, wframe: &WeightedFrame2) -> Result<ConeIntegralField> {
    let frame = Frame::Weighted(wframe.clone());
    require_frame(g, &frame)?;
    let field = accumulate_field(g, &frame);
    ConeIntegralField::new(field, frame, Provenance::Accumulated)
}

/// `F(x) = ⟨w, y₁⟩ · ∫₀^{T} g(x + t·w) dt`.
pub fn accumulate_nd(g: &Sinogram, frame: &ConeFrameN) -> Result<ConeIntegralField> {
    let frame = Frame::Polyhedral(frame.clone());
    require_frame(g, &frame)?;
    let field = accumulate_field(g, &frame);
    ConeIntegralField::new(field, frame, Provenance::Accumulated)
}

/// Accumulates with whatever frame the sinogram carries.
pub fn accumulate(g: &Sinogram) -> Result<ConeIntegralField> {
    match &g.frame {
        Frame::Broken(f) => accumulate_cone_integral(g, f),
        Frame::Weighted(f) => accumulate_weighted(g, f),
        Frame::Polyhedral(f) => accumulate_nd(g, f),
    }
}

/// Brute-force `∫_{apex + cone} f`: midpoint Riemann sum over cells of `1/2` the field spacing.
pub fn cone_integral_oracle(f: &ScalarField, frame: &dyn ConeFrame, apex: &[f64]) -> f64 {
    cone_integral_oracle_refined(f, frame, apex, 2)
}

/// As [`cone_integral_oracle`] with cells `refine` times finer than the field spacing.
pub fn cone_integral_oracle_refined(f: &ScalarField, frame: &dyn ConeFrame, apex: &[f64], refine: usize) -> f64 {
    let grid = f.grid();
    let n = grid.dim();
    let refine = refine.max(1);
    let h: Vec<f64> = grid.spacing().iter().map(|s| s / refine as f64).collect();
    let cells: Vec<usize> = grid.counts().iter().map(|c| (c - 1) * refine).collect();
    let total: usize = cells.iter().product();
    let volume: f64 = h.iter().product();
    let origin = grid.origin();
    let sums = crate::exec::map_indices(cells[0], |i| {
        let mut p = [0.0; 3];
        p[0] = origin[0] + (i as f64 + 0.5) * h[0];
        let inner = total / cells[0];
        let mut acc = 0.0;
        for rest in 0..inner {
            let mut r = rest;
            for axis in (1..n).rev() {
                let k = r % cells[axis];
                r /= cells[axis];
                p[axis] = origin[axis] + (k as f64 + 0.5) * h[axis];
            }
            if cone_contains(frame, apex, &p[..n], 0.0) {
                acc += f.sample(&p[..n]);
            }
        }
        acc
    });
    sums.iter().sum::<f64>() * volume
}

/// `σₙ · Σ sgn · F(center + Σ ±halfᵢ uᵢ)`, the alternating corner sum shared by
/// cone differentiation and the pre-measure.
pub fn corner_sum<P: PointFunction + ?Sized>(big_f: &P, frame: &dyn ConeFrame, center: &[f64], half: &[f64]) -> f64 {
    let sum: f64 = corner_points(frame, center, half).iter().map(|(s, p)| s * big_f.value_at(p)).sum();
    orientation_sign(frame.dim()) * sum
}

/// `corner_sum` at half extents `t/2`, divided by `Π tᵢ · |det|`, for any point function.
pub fn stencil_average<P: PointFunction + ?Sized>(big_f: &P, frame: &dyn ConeFrame, x: &[f64], t: &[f64]) -> f64 {
    assert_eq!(t.len(), frame.dim(), "one stencil scale per generator");
    let half: Vec<f64> = t.iter().map(|ti| ti / 2.0).collect();
    let volume: f64 = t.iter().product::<f64>() * frame.det_abs();
    corner_sum(big_f, frame, x, &half) / volume
}

/// Average of `f` over the parallelogram of side scales `t` centered at `x`.
pub fn alternating_average(big_f: &ConeIntegralField, x: &[f64], t: &[f64]) -> f64 {
    stencil_average(big_f, &big_f.frame, x, t)
}

fn differentiate(big_f: &ConeIntegralField, scheme: &DiffScheme) -> Result<ScalarField> {
    let grid = big_f.field.grid();
    scheme.validate(grid)?;
    let n = grid.dim();
    let t = scheme.t;
    let full = vec![t; n];
    let halved = vec![t / 2.0; n];
    let values = map_points(grid, |x| {
        let v = stencil_average(big_f, &big_f.frame, x, &full);
        if scheme.richardson {
            (4.0 * stencil_average(big_f, &big_f.frame, x, &halved) - v) / 3.0
        } else {
            v
        }
    });
    Ok(ScalarField::from_parts(grid.clone(), values, format!("D[{}]", big_f.field.name)))
}

/// `f̂(x) = V_{t,…,t}(x)`, optionally Richardson-extrapolated.
pub fn invert_shrinking(big_f: &ConeIntegralField, scheme: &DiffScheme) -> Result<ScalarField> {
    differentiate(big_f, scheme)
}

/// `f̂ = σₙ/|det| · Δ_{u₁}…Δ_{uₙ} F` with central differences of step `t`.
///
/// The product of central differences expands to exactly the alternating corner
/// sum, so this shares the arithmetic of [`invert_shrinking`].
pub fn invert_mixed_partial(big_f: &ConeIntegralField, scheme: &DiffScheme) -> Result<ScalarField> {
    differentiate(big_f, scheme)
}

/// Runs the differentiation selected by `scheme.mode`.
pub fn invert(big_f: &ConeIntegralField, scheme: &DiffScheme) -> Result<ScalarField> {
    match scheme.mode {
        DiffMode::ShrinkingAverage => invert_shrinking(big_f, scheme),
        DiffMode::MixedPartial => invert_mixed_partial(big_f, scheme),
    }
}

const UPWARD_TOLERANCE: f64 = 1e-10;

/// Inversion for a frame symmetric about `+e₂`:
/// `f = (−cos β / 2)·[∂_y g + tan² β · ∫_y^{y_max} ∂²_x g(x, s) ds]`.
///
/// Derivatives are lattice central differences (one-sided on the edges); the
/// integral uses the midpoint rule with step `Δ_y / 2`. `y_max` defaults to the lattice top.
pub fn invert_alt_known(g: &Sinogram, y_max: Option<f64>) -> Result<ScalarField> {
    let frame = match &g.frame {
        Frame::Broken(f) => f,
        other => {
            let a = other.axis();
            return Err(Error::NotUpwardFrame(a[0], a.get(1).copied().unwrap_or(0.0)));
        }
    };
    let [ax, ay] = frame.alpha;
    if ax.abs() > UPWARD_TOLERANCE || (ay - 1.0).abs() > UPWARD_TOLERANCE {
        return Err(Error::NotUpwardFrame(ax, ay));
    }
    let grid = g.field.grid();
    let y_max = y_max.unwrap_or_else(|| grid.upper(1));
    let [nx, ny] = [grid.counts()[0], grid.counts()[1]];
    let [hx, hy] = [grid.spacing()[0], grid.spacing()[1]];
    let s = g.field.samples();
    let at = |i: usize, j: usize| s[i * ny + j];

    let dxx: Vec<f64> = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            let c = i.clamp(1, nx - 2);
            (at(c - 1, j) - 2.0 * at(c, j) + at(c + 1, j)) / (hx * hx)
        })
        .collect();
    let dxx = ScalarField::from_parts(grid.clone(), dxx, "gxx");

    let beta = frame.beta;
    let (tan2, scale) = (beta.tan().powi(2), -beta.cos() / 2.0);
    let step = hy / 2.0;
    let values = crate::exec::map_indices(nx * ny, |k| {
        let (i, j) = (k / ny, k % ny);
        let dy = if j == 0 {
            (at(i, 1) - at(i, 0)) / hy
        } else if j == ny - 1 {
            (at(i, j) - at(i, j - 1)) / hy
        } else {
            (at(i, j + 1) - at(i, j - 1)) / (2.0 * hy)
        };
        let x = grid.origin()[0] + i as f64 * hx;
        let y = grid.origin()[1] + j as f64 * hy;
        let tail = midpoint(y, y_max, step, |t| dxx.sample(&[x, t]));
        scale * (dy + tan2 * tail)
    });
    Ok(ScalarField::from_parts(grid.clone(), values, format!("A[{}]", g.field.name)))
}

/// Rows `∂_u`, `∂_v` in terms of `(∂_x, ∂_y)` for the upward frame of half-angle `beta`.
pub fn directional_stencil(beta: f64) -> Result<[[f64; 2]; 2]> {
    if !(beta > 0.0 && beta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidAngle(beta));
    }
    let (s, c) = beta.sin_cos();
    Ok([[s, c], [-s, c]])
}

/// Coefficients `(xx, xy, yy)` of `∂_v ∂_u` in the second derivatives of `(x, y)`.
pub fn mixed_second_coefficients(beta: f64) -> Result<[f64; 3]> {
    let [du, dv] = directional_stencil(beta)?;
    Ok([du[0] * dv[0], du[0] * dv[1] + du[1] * dv[0], du[1] * dv[1]])
}

/// Difference quotient of `F` against the axis: forward `(F(x) − F(x + εα)) / ε`
/// or central `(F(x − εα/2) − F(x + εα/2)) / ε`. Estimates `factor · g(x)`.
pub fn alpha_derivative<P: PointFunction + ?Sized>(big_f: &P, axis: &[f64], x: &[f64], eps: f64, central: bool) -> f64 {
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(axis).map(|(xi, ai)| xi + s * eps * ai).collect() };
    if central {
        (big_f.value_at(&shifted(-0.5)) - big_f.value_at(&shifted(0.5))) / eps
    } else {
        (big_f.value_at(x) - big_f.value_at(&shifted(1.0))) / eps
    }
}

/// [`alpha_derivative`] along the frame axis of a stored cone integral.
pub fn alpha_derivative_check(big_f: &ConeIntegralField, x: &[f64], eps: f64, central: bool) -> f64 {
    alpha_derivative(big_f, big_f.frame.axis(), x, eps, central)
}
