//! Range diagnostics for the broken-ray transform.
//!
//! A sinogram is the image of a nonnegative integrable function when its cone
//! integral `F` is increasing for the cone order and absolutely continuous.
//! Both conditions are probed through the pre-measure `ν₀(P)`, the alternating
//! corner sum of `F` over a parallelogram `P` spanned by the generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{accumulate, corner_sum, invert_mixed_partial, ConeIntegralField, DiffMode, DiffScheme};
use crate::error::{Error, Result};
use crate::field::{compare_fields, ScalarField};
use crate::forward::{forward_broken_ray, forward_polyhedral, forward_weighted, Sinogram};
use crate::geometry::{cone_sweep_interval, BoundingBox, ConeFrame, Frame, Parallelogram};
use crate::quad::midpoint;

/// Rejection-sampling budget per parallelogram.
const MAX_ATTEMPTS: usize = 10_000;
/// Smallest log-log growth of the worst `Σ|ν₀|` accepted as vanishing with area.
const MIN_ABSCONT_EXPONENT: f64 = 0.5;

/// Candidates drawn per slot when searching for the worst collection.
const CANDIDATES: usize = 32;
/// Largest number of parallelograms in one collection.
const MAX_COLLECTION: usize = 4;
/// Fraction of each boundary excluded from the reprojection comparison.
pub const INTERIOR_MARGIN: f64 = 0.05;

/// `ν₀(P) = σₙ · Σ sgn · F(corner)`; equals `∫_P f` when `F` is the cone integral of `f`.
pub fn premeasure(big_f: &ConeIntegralField, p: &Parallelogram) -> Result<f64> {
    if !p.frame.matches(&big_f.frame) {
        return Err(Error::FrameMismatch("parallelogram and cone integral use different frames".into()));
    }
    Ok(corner_sum(big_f, &big_f.frame, &p.center, &p.half_extents))
}

fn nu0(big_f: &ConeIntegralField, p: &Parallelogram) -> f64 {
    corner_sum(big_f, &big_f.frame, &p.center, &p.half_extents)
}

fn fits(bbox: &BoundingBox, p: &Parallelogram) -> bool {
    p.corners().iter().all(|(_, c)| bbox.contains(c))
}

fn uniform_point(rng: &mut ChaCha8Rng, bbox: &BoundingBox) -> Vec<f64> {
    bbox.min.iter().zip(&bbox.max).map(|(a, b)| rng.gen_range(*a..=*b)).collect()
}

fn hull_extent(bbox: &BoundingBox) -> f64 {
    bbox.min.iter().zip(&bbox.max).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min)
}

/// Outcome of [`monotonicity_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct Monotonicity {
    pub min_nu0: f64,
    /// Parallelogram attaining `min_nu0`.
    pub worst: Parallelogram,
    pub samples: usize,
}

/// Smallest `ν₀` over `sample_count` random parallelograms inside the lattice hull.
///
/// Half extents are log-uniform in `[Δ, hull/4]`; centers are uniform and
/// rejected until every corner lies in the hull, since outside it `F` is only
/// zero-extended and the corner sum would be meaningless.
pub fn monotonicity_check(big_f: &ConeIntegralField, sample_count: usize, rng_seed: u64) -> Result<Monotonicity> {
    if sample_count == 0 {
        return Err(Error::InvalidParameter("sample_count must be at least 1".into()));
    }
    let grid = big_f.field.grid();
    let bbox = grid.bbox();
    let n = grid.dim();
    let lo = grid.max_spacing();
    let hi = (hull_extent(&bbox) / 4.0).max(lo);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut shapes = Vec::with_capacity(sample_count);
    for _ in 0..sample_count {
        let mut chosen = None;
        for _ in 0..MAX_ATTEMPTS {
            let half: Vec<f64> = (0..n).map(|_| rng.gen_range(lo.ln()..=hi.ln()).exp()).collect();
            let p = Parallelogram::new(uniform_point(&mut rng, &bbox), half, big_f.frame.clone())?;
            if fits(&bbox, &p) {
                chosen = Some(p);
                break;
            }
        }
        shapes.push(chosen.ok_or_else(|| {
            Error::InvalidParameter("no parallelogram of the requested size fits in the lattice hull".into())
        })?);
    }
    let values = crate::exec::map_indices(shapes.len(), |k| nu0(big_f, &shapes[k]));
    let (worst, min_nu0) =
        values.iter().enumerate().fold((0, f64::INFINITY), |(wi, wv), (i, &v)| if v < wv { (i, v) } else { (wi, wv) });
    Ok(Monotonicity { min_nu0, worst: shapes.swap_remove(worst), samples: sample_count })
}

/// One sampled collection of pairwise-disjoint parallelograms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbscontRow {
    pub eps: f64,
    pub total_area: f64,
    pub total_abs_nu0: f64,
    pub parallelograms: usize,
}

/// Sampled collections plus the straight-line fit of the worst collection per `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbscontReport {
    pub rows: Vec<AbscontRow>,
    /// Least-squares fit `Σ|ν₀| ≈ slope · area + intercept` over the worst row of each `ε`.
    pub slope: f64,
    pub intercept: f64,
    /// Log-log slope of the same worst rows: near 1 for a bounded density, near 0
    /// when a singular part keeps `Σ|ν₀|` from shrinking. `None` when fewer than two
    /// rows carry mass.
    pub exponent: Option<f64>,
}

impl AbscontReport {
    pub fn samples(&self) -> usize {
        self.rows.iter().map(|r| r.parallelograms).sum()
    }

    /// `Σ|ν₀|` vanishing with area: finite slope, and either an intercept within
    /// `tolerance` or growth at least like `area^(1/2)`. The second arm accepts peaked
    /// densities whose concave worst-case envelope leaves a positive linear intercept.
    pub fn passes(&self, tolerance: f64) -> bool {
        let vanishing = self.exponent.is_some_and(|p| p >= MIN_ABSCONT_EXPONENT);
        self.slope.is_finite() && (self.intercept <= tolerance || vanishing)
    }
}

/// Absolute-continuity probe: for each `ε`, collections of disjoint parallelograms
/// with total measure below `ε`, each slot chosen as the largest `|ν₀|` among
/// random candidates, since the condition quantifies over every collection.
pub fn abscont_check(
    big_f: &ConeIntegralField,
    epsilons: &[f64],
    collections_per_eps: usize,
    rng_seed: u64,
) -> Result<AbscontReport> {
    if epsilons.is_empty() || collections_per_eps == 0 || epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter("epsilons must be positive and collections_per_eps at least 1".into()));
    }
    let grid = big_f.field.grid();
    let bbox = grid.bbox();
    let n = grid.dim();
    let det = big_f.frame.det_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut rows = Vec::new();
    let mut worst = Vec::new();
    for &eps in epsilons {
        let mut best: Option<AbscontRow> = None;
        for _ in 0..collections_per_eps {
            let slots = rng.gen_range(1..=MAX_COLLECTION);
            let mut taken: Vec<Parallelogram> = Vec::new();
            let mut sum = 0.0;
            for _ in 0..slots {
                let area = eps * rng.gen_range(0.5..0.95) / slots as f64;
                let side = (area / det).powf(1.0 / n as f64) / 2.0;
                let mut pick: Option<(f64, Parallelogram)> = None;
                for _ in 0..CANDIDATES {
                    let mut logs: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.1..1.1)).collect();
                    logs.push(-logs.iter().sum::<f64>());
                    let half = logs.iter().map(|l| side * l.exp()).collect();
                    let p = Parallelogram::new(uniform_point(&mut rng, &bbox), half, big_f.frame.clone())?;
                    if !fits(&bbox, &p) || taken.iter().any(|q| !q.is_disjoint(&p)) {
                        continue;
                    }
                    let v = nu0(big_f, &p).abs();
                    if pick.as_ref().is_none_or(|(w, _)| v > *w) {
                        pick = Some((v, p));
                    }
                }
                if let Some((v, p)) = pick {
                    sum += v;
                    taken.push(p);
                }
            }
            let row = AbscontRow {
                eps,
                total_area: taken.iter().map(Parallelogram::measure).sum(),
                total_abs_nu0: sum,
                parallelograms: taken.len(),
            };
            if best.as_ref().is_none_or(|b| row.total_abs_nu0 > b.total_abs_nu0) {
                best = Some(row.clone());
            }
            rows.push(row);
        }
        worst.extend(best);
    }
    let linear: Vec<_> = worst.iter().map(|r| (r.total_area, r.total_abs_nu0)).collect();
    let (slope, intercept) = line_fit(&linear);
    let logs: Vec<_> = worst
        .iter()
        .filter(|r| r.total_area > 0.0 && r.total_abs_nu0 > 0.0)
        .map(|r| (r.total_area.ln(), r.total_abs_nu0.ln()))
        .collect();
    let exponent = (logs.len() >= 2).then(|| line_fit(&logs).0);
    Ok(AbscontReport { rows, slope, intercept, exponent })
}

fn line_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let m = points.len() as f64;
    if points.len() < 2 {
        return points.first().map_or((0.0, 0.0), |&(_, y)| (0.0, y));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `factor · ∫ g(c + tα) dt` over the axis line through the lattice center `c`,
/// from the vertex whose cone holds the whole hull to the one whose cone misses it.
pub fn total_mass(g: &Sinogram) -> f64 {
    let grid = g.field.grid();
    let bbox = grid.bbox();
    let center: Vec<f64> = bbox.min.iter().zip(&bbox.max).map(|(a, b)| 0.5 * (a + b)).collect();
    let frame = &g.frame;
    let (lo, hi) = cone_sweep_interval(frame, &center, &bbox);
    let axis = frame.axis();
    let n = center.len();
    let mut p = [0.0; 3];
    let sum = midpoint(lo, hi, g.quadrature_step, |t| {
        for i in 0..n {
            p[i] = center[i] + t * axis[i];
        }
        g.field.sample(&p[..n])
    });
    frame.accumulation_factor() * sum
}

/// Thresholds and sampling budgets for [`range_membership`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangeTolerances {
    /// Most negative sinogram value accepted before the check is refused.
    pub negative_sinogram: f64,
    /// `ν₀ ≥ −nu0 · max|F|` counts as nonnegative.
    pub nu0: f64,
    /// Largest accepted abscont intercept, relative to `max|F|`.
    pub abscont_intercept: f64,
    /// Largest accepted relative L2 reprojection mismatch.
    pub reprojection: f64,
    pub monotonicity_samples: usize,
    pub abscont_epsilons: Vec<f64>,
    pub abscont_collections: usize,
    pub seed: u64,
}

impl Default for RangeTolerances {
    fn default() -> Self {
        Self {
            negative_sinogram: 1e-9,
            nu0: 1e-4,
            abscont_intercept: 0.01,
            reprojection: 0.02,
            monotonicity_samples: 2000,
            abscont_epsilons: vec![0.0025, 0.005, 0.01, 0.02, 0.04],
            abscont_collections: 8,
            seed: 0,
        }
    }
}

/// Verdict of [`range_membership`], serialized as the range report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub is_in_range: bool,
    /// Most negative `ν₀` found, 0 if none.
    pub max_nu0_violation: f64,
    pub mass: f64,
    pub reprojection_l2_rel: f64,
    pub samples_tested: usize,
    pub seed: u64,
}

/// Everything [`range_membership`] computed on the way to its verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeDiagnostics {
    pub report: RangeReport,
    pub monotonicity: Monotonicity,
    pub abscont: AbscontReport,
    pub cone_integral: ConeIntegralField,
    pub reconstruction: ScalarField,
}

/// Range membership of `g`; see [`range_diagnostics`] for the individual checks.
pub fn range_membership(g: &Sinogram, tol: &RangeTolerances) -> Result<RangeReport> {
    range_diagnostics(g, tol).map(|d| d.report)
}

/// Accumulates `F`, probes monotonicity and absolute continuity through `ν₀`,
/// then reconstructs `f̂`, clamps it at zero, reprojects, and compares with `g`
/// on the lattice interior.
pub fn range_diagnostics(g: &Sinogram, tol: &RangeTolerances) -> Result<RangeDiagnostics> {
    let min_g = g.field.min();
    if min_g < -tol.negative_sinogram {
        return Err(Error::NegativeSinogram { min: min_g, tolerance: tol.negative_sinogram });
    }
    let big_f = accumulate(g)?;
    let scale = big_f.field.max_abs().max(f64::MIN_POSITIVE);
    let monotonicity = monotonicity_check(&big_f, tol.monotonicity_samples, tol.seed)?;
    let abscont = abscont_check(&big_f, &tol.abscont_epsilons, tol.abscont_collections, tol.seed.wrapping_add(1))?;

    let grid = g.field.grid();
    let scheme = DiffScheme::default_for(grid, DiffMode::MixedPartial);
    let reconstruction = invert_mixed_partial(&big_f, &scheme)?;
    let clamped = reconstruction.map(|v| v.max(0.0));
    let reprojected = match &g.frame {
        Frame::Broken(f) => forward_broken_ray(&clamped, f, g.quadrature_step)?,
        Frame::Weighted(f) => forward_weighted(&clamped, f, g.quadrature_step)?,
        Frame::Polyhedral(f) => forward_polyhedral(&clamped, f, g.quadrature_step)?,
    };
    let interior = grid.bbox().inset(INTERIOR_MARGIN);
    let reprojection_l2_rel = compare_fields(&reprojected.field, &g.field, Some(&interior))?.l2_rel;
    let mass = total_mass(g);

    let monotone = monotonicity.min_nu0 >= -tol.nu0 * scale;
    let continuous = abscont.passes(tol.abscont_intercept * scale);
    let reprojects = reprojection_l2_rel <= tol.reprojection;
    let report = RangeReport {
        is_in_range: monotone && continuous && reprojects && mass.is_finite(),
        max_nu0_violation: monotonicity.min_nu0.min(0.0),
        mass,
        reprojection_l2_rel,
        samples_tested: monotonicity.samples + abscont.samples(),
        seed: tol.seed,
    };
    Ok(RangeDiagnostics { report, monotonicity, abscont, cone_integral: big_f, reconstruction })
}
