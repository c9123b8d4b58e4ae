//! Analytic test fields.

use serde::{Deserialize, Serialize};

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

/// Closed-form phantom. Every kind is evaluated pointwise at lattice points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomSpec {
    /// `3x² + 3y²` (2-D).
    PolyExample1,
    /// `y·eˣ` (2-D).
    ExpExample2,
    Constant {
        amplitude: f64,
    },
    /// `A·exp(−‖p − c‖² / 2w²)`, truncated at the lattice edge.
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Indicator of the closed ball of `radius` about `center`, scaled by `amplitude`.
    Disk {
        amplitude: f64,
        center: Vec<f64>,
        radius: f64,
    },
    /// `A·Π pᵢ` in any dimension.
    SeparablePoly {
        amplitude: f64,
    },
}

impl PhantomSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PhantomSpec::PolyExample1 => "poly_example1",
            PhantomSpec::ExpExample2 => "exp_example2",
            PhantomSpec::Constant { .. } => "constant",
            PhantomSpec::Gaussian { .. } => "gaussian",
            PhantomSpec::Disk { .. } => "disk",
            PhantomSpec::SeparablePoly { .. } => "separable_poly",
        }
    }

    /// Phantom by kind name with default parameters for a `dim`-dimensional unit lattice.
    pub fn by_name(kind: &str, dim: usize) -> Result<Self> {
        let mid = vec![0.5; dim];
        Ok(match kind {
            "poly_example1" => PhantomSpec::PolyExample1,
            "exp_example2" => PhantomSpec::ExpExample2,
            "constant" => PhantomSpec::Constant { amplitude: 1.0 },
            "gaussian" => PhantomSpec::Gaussian { amplitude: 1.0, center: mid, width: 0.1 },
            "disk" => PhantomSpec::Disk { amplitude: 1.0, center: mid, radius: 0.3 },
            "separable_poly" => PhantomSpec::SeparablePoly { amplitude: 1.0 },
            other => return Err(Error::InvalidParameter(format!("unknown phantom kind `{other}`"))),
        })
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let need = |expected: usize| {
            if dim == expected {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, found: dim })
            }
        };
        match self {
            PhantomSpec::PolyExample1 | PhantomSpec::ExpExample2 => need(2),
            PhantomSpec::Constant { .. } | PhantomSpec::SeparablePoly { .. } => Ok(()),
            PhantomSpec::Gaussian { center, width, .. } => {
                need(center.len())?;
                if !(*width > 0.0) {
                    return Err(Error::InvalidParameter("gaussian width must be positive".into()));
                }
                Ok(())
            }
            PhantomSpec::Disk { center, radius, .. } => {
                need(center.len())?;
                if !(*radius > 0.0) {
                    return Err(Error::InvalidParameter("disk radius must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Formula value at `p`, ignoring any lattice.
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            PhantomSpec::PolyExample1 => 3.0 * p[0] * p[0] + 3.0 * p[1] * p[1],
            PhantomSpec::ExpExample2 => p[1] * p[0].exp(),
            PhantomSpec::Constant { amplitude } => *amplitude,
            PhantomSpec::Gaussian { amplitude, center, width } => {
                let r2: f64 = p.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            PhantomSpec::Disk { amplitude, center, radius } => {
                let r2: f64 = p.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                if r2 <= radius * radius {
                    *amplitude
                } else {
                    0.0
                }
            }
            PhantomSpec::SeparablePoly { amplitude } => amplitude * p.iter().product::<f64>(),
        }
    }
}

pub fn make_phantom(spec: &PhantomSpec, grid: &Grid) -> Result<ScalarField> {
    spec.validate(grid.dim())?;
    Ok(ScalarField::from_fn(grid.clone(), spec.name(), |p| spec.eval(p)))
}
