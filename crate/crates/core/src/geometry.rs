//! Partial orders on ℝⁿ induced by generator cones.
//!
//! A frame fixes the ray directions of every broken ray. The integration region
//! attached to a vertex `x` is `x + {Σ cᵢ·uᵢ : cᵢ ≥ 0}`: the generators are the
//! directions in which the rays leave the vertex. The perpendicular transform on
//! the unit square uses `u = -e₁`, `v = -e₂`, so the region of `(x, y)` is the
//! quadrant below and to the left of it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum `|det|` of a generator set.
pub const DET_THRESHOLD: f64 = 1e-8;
/// Tolerance on `‖u‖ = 1` for generators handed to frame constructors.
pub const UNIT_TOLERANCE: f64 = 1e-10;
/// Tolerance on equal pairwise generator distances for polyhedral cones.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_unit(v: &[f64]) -> Result<()> {
    let n = norm(v);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnitVector { norm: n });
    }
    Ok(())
}

/// Scales `v` to unit length; vectors already unit to rounding are returned unchanged.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::NotUnitVector { norm: n });
    }
    if (n - 1.0).abs() <= 1e-12 {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    // atan2 form stays accurate near 0 and π, unlike acos of the dot product.
    let d = dot(a, b);
    let cross2 = dot(a, a) * dot(b, b) - d * d;
    cross2.max(0.0).sqrt().atan2(d)
}

fn rotate2(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Common view of every frame: generators, accumulation axis and scaling.
pub trait ConeFrame: Sync {
    fn dim(&self) -> usize;
    fn generator(&self, i: usize) -> &[f64];
    /// Direction along which the sinogram is accumulated into the cone integral.
    fn axis(&self) -> &[f64];
    /// `|det(u₁, …, uₙ)|`.
    fn det_abs(&self) -> f64;
    /// Factor multiplying `∫ g(x + t·axis) dt` to give the cone integral.
    fn accumulation_factor(&self) -> f64;
    /// Coordinates of the displacement `d` in the generator basis.
    fn coordinates(&self, d: &[f64], out: &mut [f64]);
}

/// True iff `p - apex` has all generator coordinates `≥ -tol`.
pub fn cone_contains(frame: &dyn ConeFrame, apex: &[f64], p: &[f64], tol: f64) -> bool {
    let n = frame.dim();
    let mut d = [0.0; 8];
    let mut c = [0.0; 8];
    assert!(n <= 8, "cone dimension {n} is not supported");
    for i in 0..n {
        d[i] = p[i] - apex[i];
    }
    frame.coordinates(&d[..n], &mut c[..n]);
    c[..n].iter().all(|&ci| ci >= -tol)
}

/// Range `[t_lo, t_hi]` of axis parameters for which the cone at `origin + t·axis` meets `bbox`
/// but does not contain all of it.
///
/// With `ℓᵢ(q) = cᵢ(q − origin) / aᵢ`, where `c` are cone coordinates and `a` those of
/// the axis, the cone at `origin + t·axis` contains `q` iff `t ≤ minᵢ ℓᵢ(q)`. Containing
/// the box needs every corner, so `t_lo = min over corners`. Meeting the box needs one
/// point, so `t_hi = max over the box of minᵢ ℓᵢ`: a small linear program whose optimum
/// sits where `n` of the box faces and the planes `ℓᵢ = ℓⱼ` meet.
pub fn cone_sweep_interval(frame: &dyn ConeFrame, origin: &[f64], bbox: &BoundingBox) -> (f64, f64) {
    let n = frame.dim();
    let mut axis_c = vec![0.0; n];
    frame.coordinates(frame.axis(), &mut axis_c);
    // rows[i] is the gradient of ℓᵢ.
    let mut rows = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[k] = 1.0;
        frame.coordinates(&e, &mut col);
        for i in 0..n {
            rows[i][k] = col[i] / axis_c[i];
        }
    }
    let level = |q: &[f64]| -> f64 {
        rows.iter()
            .map(|r| r.iter().zip(q.iter().zip(origin)).map(|(g, (a, b))| g * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    };

    let lo = bbox.corners().map(|c| level(&c)).fold(f64::INFINITY, f64::min);

    // Candidate equations `normal · q = rhs`.
    let mut eqs: Vec<(Vec<f64>, f64)> = Vec::new();
    for k in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[k] = 1.0;
        eqs.push((e.clone(), bbox.min[k]));
        eqs.push((e.clone(), bbox.max[k]));
    }
    for i in 0..n {
        for j in i + 1..n {
            let normal: Vec<f64> = rows[i].iter().zip(&rows[j]).map(|(a, b)| a - b).collect();
            let rhs = normal.iter().zip(origin).map(|(a, b)| a * b).sum();
            eqs.push((normal, rhs));
        }
    }
    let scale = bbox.min.iter().zip(&bbox.max).map(|(a, b)| b - a).fold(0.0, f64::max);
    let slack = 1e-12 * (1.0 + scale);
    let mut hi = f64::NEG_INFINITY;
    let mut pick = vec![0usize; n];
    for_each_subset(eqs.len(), n, &mut pick, 0, 0, &mut |chosen| {
        let a: Vec<Vec<f64>> = chosen.iter().map(|&m| eqs[m].0.clone()).collect();
        let b: Vec<f64> = chosen.iter().map(|&m| eqs[m].1).collect();
        if let Some(q) = solve_small(a, b) {
            let inside = q.iter().enumerate().all(|(k, x)| *x >= bbox.min[k] - slack && *x <= bbox.max[k] + slack);
            if inside {
                hi = hi.max(level(&q));
            }
        }
    });
    (lo, hi.max(lo))
}

fn for_each_subset(total: usize, size: usize, pick: &mut [usize], depth: usize, start: usize, f: &mut dyn FnMut(&[usize])) {
    if depth == size {
        f(pick);
        return;
    }
    for m in start..total {
        pick[depth] = m;
        for_each_subset(total, size, pick, depth + 1, m + 1, f);
    }
}

/// Gaussian elimination with partial pivoting; `None` for (near-)singular systems.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let norm = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() <= 1e-12 * norm {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let factor = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= factor * a[c][k];
            }
            b[r] -= factor * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// Smallest `T ≥ 0` beyond which the cone with vertex `apex + t·axis` misses `bbox`.
pub fn cone_exit_parameter(frame: &dyn ConeFrame, apex: &[f64], bbox: &BoundingBox) -> f64 {
    cone_sweep_interval(frame, apex, bbox).1.max(0.0)
}

/// Two-dimensional broken-ray frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeFrame2 {
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub alpha: [f64; 2],
    /// Half opening angle, `angle(alpha, u)`.
    pub beta: f64,
    pub det_abs: f64,
    det: f64,
}

impl ConeFrame2 {
    pub fn new(u: [f64; 2], v: [f64; 2]) -> Result<Self> {
        check_unit(&u)?;
        check_unit(&v)?;
        let det = u[0] * v[1] - u[1] * v[0];
        if !(det.abs() >= DET_THRESHOLD) {
            return Err(Error::DegenerateFrame { det_abs: det.abs(), threshold: DET_THRESHOLD });
        }
        let s = [u[0] + v[0], u[1] + v[1]];
        let sn = norm(&s);
        let alpha = [s[0] / sn, s[1] / sn];
        let beta = angle_between(&alpha, &u);
        Ok(Self { u, v, alpha, beta, det_abs: det.abs(), det })
    }

    /// Frame `(−e₁, −e₂)`: rays run left and down from each vertex.
    pub fn perpendicular() -> Self {
        Self::new([-1.0, 0.0], [0.0, -1.0]).expect("perpendicular frame is valid")
    }

    /// Frame symmetric about `axis` with half opening angle `beta`; `u` is `axis` rotated by `-beta`.
    pub fn symmetric(axis: [f64; 2], beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidAngle(beta));
        }
        let a = normalize(&axis)?;
        let a = [a[0], a[1]];
        Self::new(rotate2(a, -beta), rotate2(a, beta))
    }

    /// The unique `(c1, c2)` with `p - apex = c1·u + c2·v`.
    pub fn cone_coordinates(&self, apex: [f64; 2], p: [f64; 2]) -> (f64, f64) {
        let mut c = [0.0; 2];
        self.coordinates(&[p[0] - apex[0], p[1] - apex[1]], &mut c);
        (c[0], c[1])
    }

    pub fn contains(&self, apex: [f64; 2], p: [f64; 2], tol: f64) -> bool {
        let (a, b) = self.cone_coordinates(apex, p);
        a >= -tol && b >= -tol
    }

    /// `angle(u, v) = 2β`.
    pub fn opening_angle(&self) -> f64 {
        angle_between(&self.u, &self.v)
    }
}

impl ConeFrame for ConeFrame2 {
    fn dim(&self) -> usize {
        2
    }
    fn generator(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.u,
            1 => &self.v,
            _ => panic!("generator index {i} out of range for a 2-D frame"),
        }
    }
    fn axis(&self) -> &[f64] {
        &self.alpha
    }
    fn det_abs(&self) -> f64 {
        self.det_abs
    }
    fn accumulation_factor(&self) -> f64 {
        self.beta.sin()
    }
    fn coordinates(&self, d: &[f64], out: &mut [f64]) {
        let (u, v) = (&self.u, &self.v);
        out[0] = (d[0] * v[1] - d[1] * v[0]) / self.det;
        out[1] = (u[0] * d[1] - u[1] * d[0]) / self.det;
    }
}

/// Frame of the weighted transform `c1·∫_{v-ray} f + c2·∫_{u-ray} f`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedFrame2 {
    pub base: ConeFrame2,
    /// Weight of the `v` ray.
    pub c1: f64,
    /// Weight of the `u` ray.
    pub c2: f64,
    pub alpha_w: [f64; 2],
    /// `angle(alpha_w, v)`.
    pub beta1: f64,
    /// `angle(alpha_w, u)`.
    pub beta2: f64,
}

impl WeightedFrame2 {
    /// Solves `sin β₁ / sin(θ − β₁) = c1 / c2` for the accumulation axis, `θ = angle(u, v)`.
    pub fn new(u: [f64; 2], v: [f64; 2], c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
            return Err(Error::InvalidWeight { c1, c2 });
        }
        let base = ConeFrame2::new(u, v)?;
        let theta = base.opening_angle();
        // c2·sin β₁ = c1·(sin θ cos β₁ − cos θ sin β₁)
        let beta1 = (c1 * theta.sin()).atan2(c2 + c1 * theta.cos());
        let beta2 = theta - beta1;
        // Rotate v towards u.
        let turn = (v[0] * u[1] - v[1] * u[0]).signum();
        let alpha_w = if c1 == c2 { base.alpha } else { rotate2(v, turn * beta1) };
        Ok(Self { base, c1, c2, alpha_w, beta1, beta2 })
    }
}

impl ConeFrame for WeightedFrame2 {
    fn dim(&self) -> usize {
        2
    }
    fn generator(&self, i: usize) -> &[f64] {
        self.base.generator(i)
    }
    fn axis(&self) -> &[f64] {
        &self.alpha_w
    }
    fn det_abs(&self) -> f64 {
        self.base.det_abs
    }
    fn accumulation_factor(&self) -> f64 {
        self.beta1.sin() / self.c1
    }
    fn coordinates(&self, d: &[f64], out: &mut [f64]) {
        self.base.coordinates(d, out)
    }
}

/// Symmetric polyhedral cone in ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeFrameN {
    pub generators: Vec<Vec<f64>>,
    /// Normalized generator sum.
    pub w: Vec<f64>,
    /// `face_normals[i]` is orthogonal to every generator except `u_i`, with `⟨w, y_i⟩ > 0`.
    pub face_normals: Vec<Vec<f64>>,
    /// Common value of `⟨w, y_i⟩`.
    pub axis_cos: f64,
    pub det_abs: f64,
    /// Row-major inverse of the generator matrix (columns `u_i`).
    inverse: Vec<f64>,
}

impl ConeFrameN {
    pub fn new(generators: Vec<Vec<f64>>) -> Result<Self> {
        let n = generators.len();
        if n < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: n });
        }
        for g in &generators {
            if g.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: g.len() });
            }
            check_unit(g)?;
        }

        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let d: f64 = generators[i]
                    .iter()
                    .zip(&generators[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                dmin = dmin.min(d);
                dmax = dmax.max(d);
            }
        }
        if dmax - dmin > SYMMETRY_TOLERANCE {
            return Err(Error::AsymmetricCone { spread: dmax - dmin });
        }

        let m = DMatrix::from_fn(n, n, |r, c| generators[c][r]);
        let det_abs = m.determinant().abs();
        if !(det_abs >= DET_THRESHOLD) {
            return Err(Error::DegenerateFrame { det_abs, threshold: DET_THRESHOLD });
        }
        let inv = m
            .try_inverse()
            .ok_or(Error::DegenerateFrame { det_abs, threshold: DET_THRESHOLD })?;

        let sum: Vec<f64> = (0..n).map(|r| generators.iter().map(|g| g[r]).sum()).collect();
        let w = normalize(&sum)?;

        // Row i of the inverse is orthogonal to u_j for j ≠ i and has ⟨row, u_i⟩ = 1,
        // which makes ⟨w, row⟩ = 1/‖Σu‖ > 0.
        let face_normals: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let row: Vec<f64> = (0..n).map(|c| inv[(i, c)]).collect();
                let rn = norm(&row);
                row.into_iter().map(|x| x / rn).collect()
            })
            .collect();
        let cosines: Vec<f64> = face_normals.iter().map(|y| dot(&w, y)).collect();
        let axis_cos = cosines[0];
        let spread = cosines.iter().fold(0.0f64, |m, c| m.max((c - axis_cos).abs()));
        if spread > SYMMETRY_TOLERANCE {
            return Err(Error::AsymmetricCone { spread });
        }

        let inverse = (0..n * n).map(|k| inv[(k / n, k % n)]).collect();
        Ok(Self { generators, w, face_normals, axis_cos, det_abs, inverse })
    }

    /// The orthonormal frame `(e₁, …, eₙ)`.
    pub fn orthonormal(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    }
}

impl ConeFrame for ConeFrameN {
    fn dim(&self) -> usize {
        self.generators.len()
    }
    fn generator(&self, i: usize) -> &[f64] {
        &self.generators[i]
    }
    fn axis(&self) -> &[f64] {
        &self.w
    }
    fn det_abs(&self) -> f64 {
        self.det_abs
    }
    fn accumulation_factor(&self) -> f64 {
        self.axis_cos
    }
    fn coordinates(&self, d: &[f64], out: &mut [f64]) {
        let n = self.generators.len();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = dot(&self.inverse[i * n..(i + 1) * n], d);
        }
    }
}

/// Any frame a sinogram or cone integral can carry.
#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    Broken(ConeFrame2),
    Weighted(WeightedFrame2),
    Polyhedral(ConeFrameN),
}

impl Frame {
    fn inner(&self) -> &dyn ConeFrame {
        match self {
            Frame::Broken(f) => f,
            Frame::Weighted(f) => f,
            Frame::Polyhedral(f) => f,
        }
    }

    /// Same generators (and weights) up to `1e-12` per component.
    pub fn matches(&self, other: &Frame) -> bool {
        const TOL: f64 = 1e-12;
        let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOL);
        let gens_match = self.dim() == other.dim()
            && (0..self.dim()).all(|i| close(self.generator(i), other.generator(i)));
        gens_match
            && match (self, other) {
                (Frame::Broken(_), Frame::Broken(_)) | (Frame::Polyhedral(_), Frame::Polyhedral(_)) => true,
                (Frame::Weighted(a), Frame::Weighted(b)) => {
                    (a.c1 - b.c1).abs() <= TOL && (a.c2 - b.c2).abs() <= TOL
                }
                _ => false,
            }
    }

    pub fn to_spec(&self) -> FrameSpec {
        match self {
            Frame::Broken(f) => FrameSpec::Generators { u: f.u.to_vec(), v: f.v.to_vec(), c1: None, c2: None },
            Frame::Weighted(f) => FrameSpec::Generators {
                u: f.base.u.to_vec(),
                v: f.base.v.to_vec(),
                c1: Some(f.c1),
                c2: Some(f.c2),
            },
            Frame::Polyhedral(f) => FrameSpec::Polyhedral { generators: f.generators.clone() },
        }
    }

    /// Generators of the underlying (unweighted) cone, used by cone differentiation.
    pub fn cone_generators(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.generator(i).to_vec()).collect()
    }
}

impl ConeFrame for Frame {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn generator(&self, i: usize) -> &[f64] {
        self.inner().generator(i)
    }
    fn axis(&self) -> &[f64] {
        self.inner().axis()
    }
    fn det_abs(&self) -> f64 {
        self.inner().det_abs()
    }
    fn accumulation_factor(&self) -> f64 {
        self.inner().accumulation_factor()
    }
    fn coordinates(&self, d: &[f64], out: &mut [f64]) {
        self.inner().coordinates(d, out)
    }
}

impl From<ConeFrame2> for Frame {
    fn from(f: ConeFrame2) -> Self {
        Frame::Broken(f)
    }
}

impl From<WeightedFrame2> for Frame {
    fn from(f: WeightedFrame2) -> Self {
        Frame::Weighted(f)
    }
}

impl From<ConeFrameN> for Frame {
    fn from(f: ConeFrameN) -> Self {
        Frame::Polyhedral(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Up,
    Down,
    Left,
    Right,
}

impl Orientation {
    pub fn axis(self) -> [f64; 2] {
        match self {
            Orientation::Up => [0.0, 1.0],
            Orientation::Down => [0.0, -1.0],
            Orientation::Left => [-1.0, 0.0],
            Orientation::Right => [1.0, 0.0],
        }
    }
}

/// JSON description of a frame.
///
/// `{"u":[ux,uy],"v":[vx,vy]}`, `{"beta":b,"orientation":"up"}` (symmetric about the
/// named axis), or `{"generators":[[...],...]}`. Either 2-D form becomes a weighted
/// frame when both `c1` and `c2` are present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameSpec {
    Generators {
        u: Vec<f64>,
        v: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c2: Option<f64>,
    },
    Symmetric {
        beta: f64,
        orientation: Orientation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c2: Option<f64>,
    },
    Polyhedral {
        generators: Vec<Vec<f64>>,
    },
}

impl FrameSpec {
    pub fn perpendicular() -> Self {
        FrameSpec::Generators { u: vec![-1.0, 0.0], v: vec![0.0, -1.0], c1: None, c2: None }
    }

    /// Parses frame JSON, also accepting the shorthand `perp`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim() == "perp" {
            return Ok(Self::perpendicular());
        }
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("frame JSON: {e}")))
    }

    /// Builds the frame; input vectors are normalized first.
    pub fn build(&self) -> Result<Frame> {
        fn two(v: &[f64]) -> Result<[f64; 2]> {
            if v.len() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: v.len() });
            }
            let n = normalize(v)?;
            Ok([n[0], n[1]])
        }
        fn weighted(base: ConeFrame2, c1: Option<f64>, c2: Option<f64>) -> Result<Frame> {
            match (c1, c2) {
                (None, None) => Ok(Frame::Broken(base)),
                (Some(c1), Some(c2)) => Ok(Frame::Weighted(WeightedFrame2::new(base.u, base.v, c1, c2)?)),
                _ => Err(Error::InvalidParameter("weighted frames need both c1 and c2".into())),
            }
        }
        match self {
            FrameSpec::Generators { u, v, c1, c2 } => weighted(ConeFrame2::new(two(u)?, two(v)?)?, *c1, *c2),
            FrameSpec::Symmetric { beta, orientation, c1, c2 } => {
                weighted(ConeFrame2::symmetric(orientation.axis(), *beta)?, *c1, *c2)
            }
            FrameSpec::Polyhedral { generators } => {
                let gens = generators.iter().map(|g| normalize(g)).collect::<Result<Vec<_>>>()?;
                Ok(Frame::Polyhedral(ConeFrameN::new(gens)?))
            }
        }
    }
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch { expected: min.len(), found: max.len() });
        }
        if min.iter().zip(&max).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("bounding box needs min < max on every axis".into()));
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Box shrunk by `fraction` of its extent on every side.
    pub fn inset(&self, fraction: f64) -> Self {
        let (min, max) = self
            .min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| {
                let m = (b - a) * fraction;
                (a + m, b - m)
            })
            .unzip();
        Self { min, max }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.min.iter().zip(&self.max)).all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    pub fn corners(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let n = self.dim();
        (0..1usize << n).map(move |mask| {
            (0..n).map(|i| if mask >> i & 1 == 1 { self.max[i] } else { self.min[i] }).collect()
        })
    }

    /// Parameter interval `[t0, t1]` where `origin + t·dir` lies in the box, if any.
    pub fn ray_interval(&self, origin: &[f64], dir: &[f64]) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..self.dim() {
            let (o, d) = (origin[i], dir[i]);
            if d == 0.0 {
                if o < self.min[i] || o > self.max[i] {
                    return None;
                }
            } else {
                let a = (self.min[i] - o) / d;
                let b = (self.max[i] - o) / d;
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                t0 = t0.max(a);
                t1 = t1.min(b);
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

/// `P(x, c) = {x + Σ tᵢuᵢ : −cᵢ ≤ tᵢ < cᵢ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parallelogram {
    pub center: Vec<f64>,
    pub half_extents: Vec<f64>,
    pub frame: Frame,
}

impl Parallelogram {
    pub fn new(center: Vec<f64>, half_extents: Vec<f64>, frame: Frame) -> Result<Self> {
        let n = frame.dim();
        for len in [center.len(), half_extents.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if half_extents.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidParameter("parallelogram half extents must be positive".into()));
        }
        Ok(Self { center, half_extents, frame })
    }

    /// Lebesgue measure `Π(2cᵢ)·|det|`.
    pub fn measure(&self) -> f64 {
        self.half_extents.iter().map(|c| 2.0 * c).product::<f64>() * self.frame.det_abs()
    }

    /// Corners `x + Σ sᵢcᵢuᵢ` paired with the sign `Π sᵢ`, in mask order.
    pub fn corners(&self) -> Vec<(f64, Vec<f64>)> {
        corner_points(&self.frame, &self.center, &self.half_extents)
    }

    /// Center in generator coordinates, relative to `origin`.
    pub fn generator_center(&self, origin: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = self.center.iter().zip(origin).map(|(a, b)| a - b).collect();
        let mut c = vec![0.0; d.len()];
        self.frame.coordinates(&d, &mut c);
        c
    }

    /// Disjointness of the generator-coordinate boxes (same frame assumed).
    pub fn is_disjoint(&self, other: &Parallelogram) -> bool {
        let origin = vec![0.0; self.center.len()];
        let a = self.generator_center(&origin);
        let b = other.generator_center(&origin);
        (0..a.len()).any(|i| (a[i] - b[i]).abs() >= self.half_extents[i] + other.half_extents[i])
    }

    /// Halves the parallelogram along generator `axis`.
    pub fn split(&self, axis: usize) -> (Parallelogram, Parallelogram) {
        let c = self.half_extents[axis] / 2.0;
        let g = self.frame.generator(axis);
        let shifted = |s: f64| -> Vec<f64> { self.center.iter().zip(g).map(|(x, gi)| x + s * c * gi).collect() };
        let mut half = self.half_extents.clone();
        half[axis] = c;
        (
            Parallelogram { center: shifted(-1.0), half_extents: half.clone(), frame: self.frame.clone() },
            Parallelogram { center: shifted(1.0), half_extents: half, frame: self.frame.clone() },
        )
    }
}

pub(crate) fn corner_points(frame: &dyn ConeFrame, center: &[f64], half: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let n = frame.dim();
    (0..1usize << n)
        .map(|mask| {
            let mut p = center.to_vec();
            let mut sign = 1.0;
            for i in 0..n {
                let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                sign *= s;
                for (pk, gk) in p.iter_mut().zip(frame.generator(i)) {
                    *pk += s * half[i] * gk;
                }
            }
            (sign, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, SQRT_2};

    const S3: f64 = 0.866_025_403_784_438_6;

    #[test]
    fn orthogonal_frame() {
        let f = ConeFrame2::new([1.0, 0.0], [0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(f.alpha[0], SQRT_2 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.alpha[1], SQRT_2 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.beta, FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(f.det_abs, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn upward_frame_det_is_sin_two_beta() {
        let f = ConeFrame2::new([0.5, S3], [-0.5, S3]).unwrap();
        assert_abs_diff_eq!(f.alpha[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.alpha[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.beta, FRAC_PI_6, epsilon = 1e-12);
        assert_abs_diff_eq!(f.det_abs, (2.0 * FRAC_PI_6).sin(), epsilon = 1e-12);
    }

    #[test]
    fn collinear_generators_are_degenerate() {
        assert!(matches!(ConeFrame2::new([1.0, 0.0], [1.0, 0.0]), Err(Error::DegenerateFrame { .. })));
        assert!(matches!(ConeFrame2::new([1.0, 0.0], [-1.0, 0.0]), Err(Error::DegenerateFrame { .. })));
        assert!(matches!(ConeFrame2::new([2.0, 0.0], [0.0, 1.0]), Err(Error::NotUnitVector { .. })));
    }

    #[test]
    fn coordinates_examples() {
        let f = ConeFrame2::new([1.0, 0.0], [0.0, 1.0]).unwrap();
        let (a, b) = f.cone_coordinates([0.0, 0.0], [0.3, 0.7]);
        assert_abs_diff_eq!(a, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.7, epsilon = 1e-15);
        assert_eq!(f.cone_coordinates([1.0, 1.0], [1.0, 1.0]), (0.0, 0.0));

        let up = ConeFrame2::new([0.5, S3], [-0.5, S3]).unwrap();
        let (a, b) = up.cone_coordinates([0.0, 0.0], [0.0, 3f64.sqrt()]);
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn containment_examples() {
        let f = ConeFrame2::new([1.0, 0.0], [0.0, 1.0]).unwrap();
        assert!(f.contains([0.0, 0.0], [0.3, 0.7], 0.0));
        assert!(!f.contains([0.0, 0.0], [-0.1, 0.5], 0.0));
        assert!(f.contains([0.0, 0.0], [-1e-14, 0.5], 1e-12));
        assert!(cone_contains(&f, &[0.0, 0.0], &[0.3, 0.7], 0.0));
    }

    #[test]
    fn weighted_direction_examples() {
        let w = WeightedFrame2::new([1.0, 0.0], [0.0, 1.0], 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(w.beta1, 2f64.atan(), epsilon = 1e-12);
        assert_abs_diff_eq!(w.alpha_w[0], 0.894_427_190_999_915_9, epsilon = 1e-12);
        assert_abs_diff_eq!(w.alpha_w[1], 0.447_213_595_499_958, epsilon = 1e-12);
        assert_abs_diff_eq!(w.beta1 + w.beta2, FRAC_PI_2, epsilon = 1e-10);
        assert_abs_diff_eq!(w.beta1.sin() / w.beta2.sin(), 2.0, epsilon = 1e-10);
        assert!(matches!(
            WeightedFrame2::new([1.0, 0.0], [0.0, 1.0], 1.0, 0.0),
            Err(Error::InvalidWeight { .. })
        ));
    }

    #[test]
    fn equal_weights_reduce_to_symmetric_axis() {
        let u = [FRAC_PI_3.cos(), FRAC_PI_3.sin()];
        let v = [(-0.4f64).cos(), (-0.4f64).sin()];
        let w = WeightedFrame2::new(u, v, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(w.alpha_w[0], w.base.alpha[0], epsilon = 1e-12);
        assert_abs_diff_eq!(w.alpha_w[1], w.base.alpha[1], epsilon = 1e-12);
        assert_abs_diff_eq!(w.beta1, w.base.beta, epsilon = 1e-12);
    }

    #[test]
    fn orthonormal_polyhedral_frame() {
        let f = ConeFrameN::orthonormal(3).unwrap();
        let r = 1.0 / 3f64.sqrt();
        for i in 0..3 {
            assert_abs_diff_eq!(f.w[i], r, epsilon = 1e-15);
            for j in 0..3 {
                assert_abs_diff_eq!(f.face_normals[i][j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(f.axis_cos, r, epsilon = 1e-15);
    }

    #[test]
    fn unequal_pairwise_distances_are_rejected() {
        let d = 1.0 / 3f64.sqrt();
        let r = ConeFrameN::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![d, d, d]]);
        assert!(matches!(r, Err(Error::AsymmetricCone { .. })));
    }

    #[test]
    fn sixty_degree_tripod() {
        // Polar angle φ, azimuths 0°, 120°, 240°: u_i·u_j = cos²φ − sin²φ/2 = 1/2 ⇒ cos²φ = 2/3.
        let phi = (2.0f64 / 3.0).sqrt().acos();
        let seed = [phi.sin(), 0.0, phi.cos()];
        let rot = |v: [f64; 3], a: f64| [a.cos() * v[0] - a.sin() * v[1], a.sin() * v[0] + a.cos() * v[1], v[2]];
        let third = 2.0 * std::f64::consts::PI / 3.0;
        let gens: Vec<Vec<f64>> = (0..3).map(|k| rot(seed, k as f64 * third).to_vec()).collect();
        assert_abs_diff_eq!(dot(&gens[0], &gens[1]), 0.5, epsilon = 1e-12);
        let f = ConeFrameN::new(gens).unwrap();
        for y in &f.face_normals {
            assert_abs_diff_eq!(dot(&f.w, y), f.axis_cos, epsilon = 1e-10);
        }
        assert!(f.axis_cos > 0.0 && f.axis_cos <= 1.0);
        assert_abs_diff_eq!(f.w[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exit_parameter_examples() {
        let f = ConeFrame2::perpendicular();
        let unit = BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(cone_exit_parameter(&f, &[0.5, 0.5], &unit), 0.5 * SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(cone_exit_parameter(&f, &[1.0, 1.0], &unit), SQRT_2, epsilon = 1e-12);
        // Apex below-left of the box with the cone opening away from it.
        assert_eq!(cone_exit_parameter(&f, &[-0.5, -0.5], &unit), 0.0);
        // An upward cone keeps meeting the box until its vertex passes the top edge.
        let up = ConeFrame2::symmetric([0.0, 1.0], FRAC_PI_3).unwrap();
        assert_abs_diff_eq!(cone_exit_parameter(&up, &[0.5, 0.5], &unit), 0.5, epsilon = 1e-12);
        let frame = ConeFrameN::orthonormal(3).unwrap();
        let cube = BoundingBox::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert_abs_diff_eq!(cone_exit_parameter(&frame, &[0.0; 3], &cube), 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn frame_spec_forms() {
        let f = FrameSpec::parse(r#"{"beta":0.5235987755982988,"orientation":"up"}"#).unwrap().build().unwrap();
        assert_abs_diff_eq!(f.axis()[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.generator(0)[0], 0.5, epsilon = 1e-15);
        let err = FrameSpec::parse(r#"{"u":[1,0],"v":[1,0]}"#).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("DegenerateFrame"));
        let w = FrameSpec::parse(r#"{"u":[-1,0],"v":[0,-1],"c1":2,"c2":1}"#).unwrap().build().unwrap();
        assert!(matches!(w, Frame::Weighted(_)));
        let p = FrameSpec::parse(r#"{"generators":[[1,0,0],[0,1,0],[0,0,1]]}"#).unwrap().build().unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(FrameSpec::parse("perp").unwrap().build().unwrap(), Frame::Broken(ConeFrame2::perpendicular()));
        let spec = w.to_spec();
        assert!(spec.build().unwrap().matches(&w));
    }

    #[test]
    fn split_halves_preserve_measure() {
        let p = Parallelogram::new(vec![0.4, 0.5], vec![0.2, 0.1], ConeFrame2::symmetric([0.0, 1.0], 0.7).unwrap().into()).unwrap();
        let (a, b) = p.split(0);
        assert_abs_diff_eq!(a.measure() + b.measure(), p.measure(), epsilon = 1e-15);
        assert!(a.is_disjoint(&b));
        assert!(!a.is_disjoint(&p));
    }

    fn arb_frame() -> impl Strategy<Value = ConeFrame2> {
        (0.0..std::f64::consts::TAU, 0.1..1.45f64).prop_map(|(a, b)| ConeFrame2::symmetric([a.cos(), a.sin()], b).unwrap())
    }

    proptest! {
        #[test]
        fn coordinates_round_trip(frame in arb_frame(), ax in -2.0..2.0f64, ay in -2.0..2.0f64, px in -2.0..2.0f64, py in -2.0..2.0f64) {
            let (a, b) = frame.cone_coordinates([ax, ay], [px, py]);
            let rx = ax + a * frame.u[0] + b * frame.v[0];
            let ry = ay + a * frame.u[1] + b * frame.v[1];
            prop_assert!((rx - px).abs() < 1e-12 * (1.0 + a.abs() + b.abs()) * 10.0);
            prop_assert!((ry - py).abs() < 1e-12 * (1.0 + a.abs() + b.abs()) * 10.0);
        }

        #[test]
        fn cone_membership(frame in arb_frame(), a in -1.0..1.0f64, b in -1.0..1.0f64) {
            let apex = [0.2, -0.3];
            let p = [apex[0] + a * frame.u[0] + b * frame.v[0], apex[1] + a * frame.u[1] + b * frame.v[1]];
            let tol = 1e-9;
            if a >= 0.0 && b >= 0.0 {
                prop_assert!(frame.contains(apex, p, tol));
            }
            if a.min(b) < -tol * 10.0 {
                prop_assert!(!frame.contains(apex, p, tol));
            }
        }

        #[test]
        fn exit_parameter_is_tight(frame in arb_frame(), ax in -1.0..2.0f64, ay in -1.0..2.0f64, extra in 1e-3..1.0f64) {
            let bbox = BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
            let exit = cone_exit_parameter(&frame, &[ax, ay], &bbox);
            let vertex = |t: f64| [ax + t * frame.alpha[0], ay + t * frame.alpha[1]];
            let lattice: Vec<[f64; 2]> =
                (0..=40).flat_map(|i| (0..=40).map(move |j| [i as f64 / 40.0, j as f64 / 40.0])).collect();
            let beyond = vertex(exit + extra);
            prop_assert!(lattice.iter().all(|q| !frame.contains(beyond, *q, 0.0)));
            // Slightly before the exit the cone still reaches into the box.
            if exit > 0.0 {
                let before = vertex(exit - extra.min(exit) * 0.5 - 0.05);
                let reached = lattice.iter().any(|q| frame.contains(before, *q, 0.0));
                prop_assert!(reached || exit < 0.05);
            }
        }

        #[test]
        fn sweep_interval_lower_end_contains_the_box(frame in arb_frame(), ax in -1.0..2.0f64, ay in -1.0..2.0f64) {
            let bbox = BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
            let (lo, hi) = cone_sweep_interval(&frame, &[ax, ay], &bbox);
            prop_assert!(lo <= hi);
            let v = [ax + lo * frame.alpha[0], ay + lo * frame.alpha[1]];
            prop_assert!(bbox.corners().all(|c| frame.contains(v, [c[0], c[1]], 1e-9)));
        }
    }
}
