//! Sensor footprint models and their deterministic sample patterns.
//!
//! A footprint is a probability density over the workspace that depends on
//! the robot state. For planning it is replaced by `M` weighted point samples
//! per time step, placed by a fixed pattern that is scaled and shifted with
//! the state, so each sample has a closed-form Jacobian `dw_m/dx`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::Projection;
use crate::error::{invalid, Error, Result};
use crate::spectral::Workspace;

/// Grid spacing relative to the disk radius that yields a full 5x5 grid.
pub const DEFAULT_RELATIVE_SPACING: f64 = 1.0 / 2.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Grid spacing as a fraction of the disk radius; every grid point inside
    /// the disk is kept.
    RelativeSpacing(f64),
    /// Exact sample count. Disks need an odd square (1, 9, 25, ...).
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisPolicy {
    /// Points from the robot towards the centroid of the target cloud.
    ObjectFacing,
    /// Constant direction, e.g. `[0, 0, -1]` for a downward camera.
    Fixed([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FootprintModel {
    /// Dirac footprint at `f_q(x)`.
    Point,
    /// Uniform disk of constant radius.
    FixedDisk { radius: f64, sampling: Sampling },
    /// Uniform disk of radius `k_h * f_h(x)`.
    AltitudeDisk { k_h: f64, sampling: Sampling },
    /// Viewing cone of half-angle `atan(k_h)` traced against a surface.
    Cone {
        k_h: f64,
        samples: usize,
        axis: AxisPolicy,
    },
}

impl FootprintModel {
    /// Altitude disk with the default 25-sample grid.
    pub fn altitude_disk(k_h: f64) -> Self {
        FootprintModel::AltitudeDisk {
            k_h,
            sampling: Sampling::RelativeSpacing(DEFAULT_RELATIVE_SPACING),
        }
    }

    pub fn fixed_disk(radius: f64) -> Self {
        FootprintModel::FixedDisk {
            radius,
            sampling: Sampling::RelativeSpacing(DEFAULT_RELATIVE_SPACING),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                invalid(format!("{what} must be positive, got {v}"))
            }
        };
        match *self {
            FootprintModel::Point => Ok(()),
            FootprintModel::FixedDisk { radius, sampling } => {
                positive(radius, "disk radius")?;
                check_sampling(sampling)
            }
            FootprintModel::AltitudeDisk { k_h, sampling } => {
                positive(k_h, "k_h")?;
                check_sampling(sampling)
            }
            FootprintModel::Cone { k_h, samples, axis } => {
                positive(k_h, "k_h")?;
                if samples == 0 {
                    return invalid("cone needs at least one ray");
                }
                if let AxisPolicy::Fixed(a) = axis {
                    if a.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                        return invalid("fixed cone axis must be nonzero");
                    }
                }
                Ok(())
            }
        }
    }

    /// Disk radius at state `x`, if the model is a disk.
    pub fn radius(&self, projection: &Projection, x: &[f64]) -> Option<f64> {
        match *self {
            FootprintModel::FixedDisk { radius, .. } => Some(radius),
            FootprintModel::AltitudeDisk { k_h, .. } => projection.height(x).map(|h| k_h * h),
            _ => None,
        }
    }
}

fn check_sampling(sampling: Sampling) -> Result<()> {
    match sampling {
        Sampling::RelativeSpacing(s) if s > 0.0 && s.is_finite() => Ok(()),
        Sampling::RelativeSpacing(s) => invalid(format!("grid spacing must be positive, got {s}")),
        Sampling::Count(m) => {
            let side = (m as f64).sqrt().round() as usize;
            if m == 0 || side * side != m || side % 2 == 0 {
                invalid(format!("disk sample count must be an odd square, got {m}"))
            } else {
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FootprintDensity {
    Finite(f64),
    /// Point sensor: all weight at `f_q(x)`.
    Dirac,
}

/// Value of the footprint density at workspace point `w` for state `x`.
pub fn footprint_density(
    model: &FootprintModel,
    projection: &Projection,
    w: &[f64],
    x: &[f64],
) -> Result<FootprintDensity> {
    let q = projection.point(x);
    let radius = match *model {
        FootprintModel::Point => return Ok(FootprintDensity::Dirac),
        FootprintModel::FixedDisk { radius, .. } => radius,
        FootprintModel::AltitudeDisk { k_h, .. } => {
            let h = projection
                .height(x)
                .ok_or_else(|| Error::InvalidState("altitude footprint needs a height coordinate".into()))?;
            if !(h > 0.0) {
                return Err(Error::InvalidState(format!("height must be positive, got {h}")));
            }
            k_h * h
        }
        FootprintModel::Cone { .. } => {
            return Err(Error::Unsupported("cone footprints live on surfaces".into()))
        }
    };
    let d2: f64 = w.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(FootprintDensity::Finite(if d2 <= radius * radius {
        1.0 / (PI * radius * radius)
    } else {
        0.0
    }))
}

/// State-independent sample layout: offsets in unit-disk coordinates (disks)
/// or unit directions in a frame whose axis is `+z` (cones).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePattern {
    pub dim: usize,
    /// Flat, `dim` entries per sample.
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SamplePattern {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn offset(&self, m: usize) -> &[f64] {
        &self.offsets[m * self.dim..(m + 1) * self.dim]
    }

    fn uniform(dim: usize, offsets: Vec<f64>) -> Self {
        let m = offsets.len() / dim;
        Self {
            dim,
            offsets,
            weights: vec![1.0 / m as f64; m],
        }
    }
}

pub fn sample_pattern(model: &FootprintModel) -> Result<SamplePattern> {
    model.validate()?;
    match *model {
        FootprintModel::Point => Ok(SamplePattern::uniform(2, vec![0.0, 0.0])),
        FootprintModel::FixedDisk { sampling, .. } | FootprintModel::AltitudeDisk { sampling, .. } => {
            Ok(SamplePattern::uniform(2, disk_grid(sampling)))
        }
        FootprintModel::Cone { k_h, samples, .. } => {
            Ok(SamplePattern::uniform(3, cone_directions(k_h, samples)))
        }
    }
}

fn disk_grid(sampling: Sampling) -> Vec<f64> {
    match sampling {
        Sampling::RelativeSpacing(s) => {
            let reach = (1.0 / s).floor() as i64;
            let mut out = Vec::new();
            for i in -reach..=reach {
                for j in -reach..=reach {
                    let (a, b) = (i as f64 * s, j as f64 * s);
                    if a * a + b * b <= 1.0 + 1e-12 {
                        out.extend([a, b]);
                    }
                }
            }
            out
        }
        Sampling::Count(m) => {
            let side = (m as f64).sqrt().round() as i64;
            let half = (side - 1) / 2;
            // same corner clearance as the default 5x5 grid
            let s = if half == 0 { 0.0 } else { 1.0 / (1.45 * half as f64) };
            let mut out = Vec::with_capacity(2 * m);
            for i in -half..=half {
                for j in -half..=half {
                    out.extend([i as f64 * s, j as f64 * s]);
                }
            }
            out
        }
    }
}

/// Fibonacci spiral on the spherical cap of half-angle `atan(k_h)` around `+z`.
/// A single ray points along the axis.
pub fn cone_directions(k_h: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0, 0.0, 1.0];
    }
    let cos_alpha = 1.0 / (1.0 + k_h * k_h).sqrt();
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(3 * m);
    for i in 0..m {
        let z = 1.0 - (1.0 - cos_alpha) * (i as f64 + 0.5) / m as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        out.extend([r * phi.cos(), r * phi.sin(), z]);
    }
    out
}

/// Realized samples for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub nu: usize,
    pub state_dim: usize,
    /// Flat, `nu` coordinates per sample.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Flat `M x nu x n` Jacobians `dw_m/dx`.
    pub jacobians: Vec<f64>,
    /// Samples that were pulled back inside the workspace.
    pub clamped: Vec<bool>,
}

impl SampleSet {
    pub fn empty(nu: usize, state_dim: usize) -> Self {
        Self {
            nu,
            state_dim,
            points: Vec::new(),
            weights: Vec::new(),
            jacobians: Vec::new(),
            clamped: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, m: usize) -> &[f64] {
        &self.points[m * self.nu..(m + 1) * self.nu]
    }

    pub fn jacobian(&self, m: usize) -> &[f64] {
        let sz = self.nu * self.state_dim;
        &self.jacobians[m * sz..(m + 1) * sz]
    }

    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }
}

/// Places the pattern at state `x`.
///
/// Disk samples are `f_q(x) + radius(x) * g_m`. The height is used as is:
/// intermediate optimizer iterates with nonpositive height mirror the pattern
/// rather than fail. Samples outside the workspace are clamped, flagged, and
/// get a zero Jacobian row on the clamped axis.
pub fn realize_samples(
    model: &FootprintModel,
    pattern: &SamplePattern,
    projection: &Projection,
    workspace: &Workspace,
    x: &[f64],
) -> Result<SampleSet> {
    let nu = projection.nu;
    let n = x.len();
    if workspace.dim() != nu {
        return invalid("projection and workspace dimensions differ");
    }
    let q = projection.point(x);
    let (scale, height_index) = match *model {
        FootprintModel::Point => (0.0, None),
        FootprintModel::FixedDisk { radius, .. } => (radius, None),
        FootprintModel::AltitudeDisk { k_h, .. } => {
            let hi = projection
                .height_index
                .ok_or_else(|| Error::InvalidState("altitude footprint needs a height coordinate".into()))?;
            (k_h * x[hi], Some((hi, k_h)))
        }
        FootprintModel::Cone { .. } => {
            return Err(Error::Unsupported(
                "cone footprints are realized against a surface".into(),
            ))
        }
    };
    let m_count = if matches!(model, FootprintModel::Point) { 1 } else { pattern.len() };
    let mut set = SampleSet {
        nu,
        state_dim: n,
        points: Vec::with_capacity(m_count * nu),
        weights: Vec::with_capacity(m_count),
        jacobians: vec![0.0; m_count * nu * n],
        clamped: Vec::with_capacity(m_count),
    };
    let mut w = [0.0; 3];
    for m in 0..m_count {
        let (g, weight) = if matches!(model, FootprintModel::Point) {
            (&[0.0, 0.0][..], 1.0)
        } else {
            (pattern.offset(m), pattern.weights[m])
        };
        for o in 0..nu {
            w[o] = q[o] + scale * g[o];
        }
        let mask = workspace.clamp(&mut w[..nu]);
        let jac = &mut set.jacobians[m * nu * n..(m + 1) * nu * n];
        for o in 0..nu {
            if mask[o] {
                continue;
            }
            jac[o * n + o] = 1.0;
            if let Some((hi, k_h)) = height_index {
                jac[o * n + hi] += k_h * g[o];
            }
        }
        set.points.extend_from_slice(&w[..nu]);
        set.weights.push(weight);
        set.clamped.push(mask.iter().any(|&c| c));
    }
    Ok(set)
}

/// Bundles what is needed to realize samples along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FootprintSampler {
    pub model: FootprintModel,
    pub pattern: SamplePattern,
    pub projection: Projection,
    pub workspace: Workspace,
}

impl FootprintSampler {
    pub fn new(model: FootprintModel, projection: Projection, workspace: Workspace) -> Result<Self> {
        if matches!(model, FootprintModel::AltitudeDisk { .. }) && projection.height_index.is_none() {
            return invalid("altitude footprint needs a projection with a height coordinate");
        }
        let pattern = sample_pattern(&model)?;
        Ok(Self {
            model,
            pattern,
            projection,
            workspace,
        })
    }

    pub fn realize(&self, x: &[f64]) -> Result<SampleSet> {
        realize_samples(&self.model, &self.pattern, &self.projection, &self.workspace, x)
    }
}
