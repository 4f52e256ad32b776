//! JSON run configuration.
//!
//! Lengths are in workspace units (meters), times in seconds. Unknown keys are
//! rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Bound, DynamicsModel, ModelKind, Projection};
use crate::error::{Error, Result};
use crate::footprint::{AxisPolicy, FootprintModel, FootprintSampler, Sampling, DEFAULT_RELATIVE_SPACING};
use crate::infomap::{map_coeffs, normalize_map, InfoMap, MapConfig};
use crate::optimize::{Constraint, ConstraintSet, ProblemSpec, Robot, Sensor, SolverSettings};
use crate::presets;
use crate::spectral::{SpectralBasis, Workspace};
use crate::surface3d::{PointCloud, SurfaceSampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Side lengths of the workspace.
    pub workspace: Vec<f64>,
    /// Inline map document; exclusive with `map_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapConfig>,
    /// Path to a map document relative to the config, or `preset:<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_file: Option<String>,
    /// Basis terms per axis.
    pub basis: Vec<usize>,
    pub dynamics: DynamicsConfig,
    pub footprint: FootprintConfig,
    #[serde(default)]
    pub constraints: ConstraintsConfig,
    /// Diagonal of `R`, one entry per control. Defaults to `1e-3` each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_weight: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub model: ModelKind,
    /// Number of position coordinates; 3 for drones over a 2D map.
    pub position_dim: usize,
    /// Seconds per step.
    pub dt: f64,
    /// Seconds; must be a whole number of steps.
    pub horizon: f64,
    /// One initial state per robot.
    pub x0: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_bounds: Option<Vec<Option<Bound>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_bounds: Option<Vec<Option<Bound>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum FootprintConfig {
    Point,
    FixedDisk {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    AltitudeDisk {
        k_h: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    Cone {
        k_h: f64,
        rays: usize,
        #[serde(default = "default_axis")]
        axis: AxisPolicy,
    },
}

fn default_axis() -> AxisPolicy {
    AxisPolicy::ObjectFacing
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub max: f64,
    pub min: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsConfig {
    /// Minimum pairwise robot distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision: Option<f64>,
    /// Allowed robot-to-surface distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_range: Option<RangeConfig>,
    /// Keep disk footprints inside the workspace.
    #[serde(default)]
    pub footprint_interior: bool,
}

fn sampling(samples: Option<usize>) -> Sampling {
    match samples {
        None | Some(25) => Sampling::RelativeSpacing(DEFAULT_RELATIVE_SPACING),
        Some(m) => Sampling::Count(m),
    }
}

/// A built problem with the pieces the CLI reports on.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    /// Normalized information map.
    pub map: InfoMap,
    pub cloud: Option<PointCloud>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Number of steps `horizon / dt`.
    pub fn steps(&self) -> Result<usize> {
        let d = &self.dynamics;
        if !(d.dt > 0.0) || !(d.horizon > 0.0) {
            return Err(bad("dt and horizon must be positive"));
        }
        let n = d.horizon / d.dt;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * rounded.max(1.0) || rounded < 1.0 {
            return Err(bad(format!("horizon {} is not a whole number of {} s steps", d.horizon, d.dt)));
        }
        Ok(rounded as usize)
    }

    /// Schema-level checks that need no file access.
    pub fn check(&self) -> Result<()> {
        let ws = Workspace::new(self.workspace.clone()).map_err(|e| bad(e.to_string()))?;
        if self.basis.len() != ws.dim() || self.basis.iter().any(|&k| k == 0) {
            return Err(bad("basis needs one positive count per workspace axis"));
        }
        if self.map.is_some() == self.map_file.is_some() {
            return Err(bad("give exactly one of map and map_file"));
        }
        self.steps()?;
        let d = &self.dynamics;
        let model = DynamicsModel::new(d.model, d.position_dim).map_err(|e| bad(e.to_string()))?;
        if d.x0.is_empty() {
            return Err(bad("x0 needs at least one robot"));
        }
        if let Some(x) = d.x0.iter().find(|x| x.len() != model.state_dim()) {
            return Err(bad(format!("initial state {x:?} needs {} entries", model.state_dim())));
        }
        for (what, b, len) in [
            ("control_bounds", &d.control_bounds, model.control_dim()),
            ("state_bounds", &d.state_bounds, model.state_dim()),
        ] {
            if let Some(b) = b {
                if b.len() != len {
                    return Err(bad(format!("{what} needs {len} entries")));
                }
                if b.iter().flatten().any(|[lo, hi]| !(lo <= hi)) {
                    return Err(bad(format!("{what} must satisfy lo <= hi")));
                }
            }
        }
        if let Some(r) = &self.control_weight {
            if r.len() != model.control_dim() || r.iter().any(|w| !(*w > 0.0)) {
                return Err(bad("control_weight needs one positive entry per control"));
            }
        }
        match &self.footprint {
            FootprintConfig::Cone { .. } => {
                if ws.dim() != 3 || d.position_dim != 3 {
                    return Err(bad("cone footprints need a 3D workspace and 3D positions"));
                }
            }
            FootprintConfig::AltitudeDisk { .. } => {
                if ws.dim() != 2 || d.position_dim != 3 {
                    return Err(bad("altitude_disk needs a 2D workspace and 3D positions"));
                }
            }
            _ => {
                if d.position_dim < ws.dim() {
                    return Err(bad("robot positions must cover the workspace"));
                }
            }
        }
        if self.constraints.surface_range.is_some() && !matches!(self.footprint, FootprintConfig::Cone { .. }) {
            return Err(bad("surface_range needs a cone footprint"));
        }
        if let Some(RangeConfig { max, min }) = self.constraints.surface_range {
            if !(min >= 0.0 && min <= max) {
                return Err(bad("surface_range needs 0 <= min <= max"));
            }
        }
        let s = &self.solver;
        if !(s.mu0 > 0.0 && s.mu_growth >= 1.0 && s.mu_max >= s.mu0 && s.memory > 0) {
            return Err(bad("solver needs mu0 > 0, mu_growth >= 1, mu_max >= mu0, memory > 0"));
        }
        Ok(())
    }

    fn map_config(&self, base_dir: &Path) -> Result<(MapConfig, std::path::PathBuf)> {
        if let Some(m) = &self.map {
            return Ok((m.clone(), base_dir.to_path_buf()));
        }
        let file = self.map_file.as_deref().unwrap_or_default();
        if let Some(name) = file.strip_prefix("preset:") {
            let text = presets::map(name).ok_or_else(|| bad(format!("unknown map preset {name:?}")))?;
            return Ok((serde_json::from_str(text)?, base_dir.to_path_buf()));
        }
        let path = base_dir.join(file);
        let text = std::fs::read_to_string(&path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((serde_json::from_str(&text)?, dir))
    }

    /// Builds the planning problem. Relative paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Problem> {
        self.check()?;
        let ws = Workspace::new(self.workspace.clone())?;
        let (map_cfg, map_dir) = self.map_config(base_dir)?;
        let raw = map_cfg.build(&ws, &map_dir)?;
        let map = normalize_map(&raw)?;
        let basis = SpectralBasis::new(ws.clone(), &self.basis)?;
        let phi = map_coeffs(&map, &basis)?;

        let d = &self.dynamics;
        let model = DynamicsModel::new(d.model, d.position_dim)?;
        let projection = if ws.dim() == 2 && d.position_dim == 3 {
            Projection::with_altitude()
        } else {
            Projection::planar(ws.dim())
        };
        let (sensor, cloud) = match self.footprint {
            FootprintConfig::Cone { k_h, rays, axis } => {
                let InfoMap::DeltaCloud { points, weights, .. } = &raw else {
                    return Err(bad("cone footprints need a cloud map"));
                };
                let cloud = PointCloud::new(points.clone(), Some(weights.clone()), &ws)?;
                let sampler = SurfaceSampler::new(cloud.clone(), ws.clone(), k_h, rays, axis)?;
                (Sensor::Surface(sampler), Some(cloud))
            }
            ref planar => {
                let fm = match *planar {
                    FootprintConfig::Point => FootprintModel::Point,
                    FootprintConfig::FixedDisk { radius, samples } => FootprintModel::FixedDisk {
                        radius,
                        sampling: sampling(samples),
                    },
                    FootprintConfig::AltitudeDisk { k_h, samples } => FootprintModel::AltitudeDisk {
                        k_h,
                        sampling: sampling(samples),
                    },
                    FootprintConfig::Cone { .. } => unreachable!(),
                };
                (Sensor::Planar(FootprintSampler::new(fm, projection, ws.clone())?), None)
            }
        };

        let mut constraints = Vec::new();
        if let Some(bounds) = &d.state_bounds {
            constraints.push(Constraint::StateBox { bounds: bounds.clone() });
        }
        if let Some(bounds) = &d.control_bounds {
            constraints.push(Constraint::ControlBox { bounds: bounds.clone() });
        }
        if let Some(h1) = self.constraints.collision {
            constraints.push(Constraint::Collision { h1 });
        }
        if let Some(RangeConfig { max, min }) = self.constraints.surface_range {
            constraints.push(Constraint::SurfaceRange { h2: max, h3: min });
        }
        if self.constraints.footprint_interior {
            constraints.push(Constraint::FootprintInterior);
        }

        let spec = ProblemSpec {
            robots: d
                .x0
                .iter()
                .map(|x0| Robot {
                    dynamics: model.clone(),
                    x0: x0.clone(),
                })
                .collect(),
            sensor,
            basis,
            phi,
            control_weights: self
                .control_weight
                .clone()
                .unwrap_or_else(|| vec![1e-3; model.control_dim()]),
            steps: self.steps()?,
            dt: d.dt,
            constraints: ConstraintSet::new(constraints),
            settings: self.solver,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(Problem { spec, map, cloud })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drone_preset_builds() {
        let cfg = RunConfig::from_json(presets::config("drone").unwrap()).unwrap();
        assert_eq!(cfg.steps().unwrap(), 100);
        let p = cfg.build(Path::new(".")).unwrap();
        assert_eq!(p.spec.basis.len(), 100);
        let Sensor::Planar(s) = &p.spec.sensor else { panic!() };
        assert_eq!(s.pattern.len(), 25);
        assert_eq!(s.model, FootprintModel::altitude_disk(0.25));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let good = presets::config("drone").unwrap();
        let mut v: serde_json::Value = serde_json::from_str(good).unwrap();
        v["colour"] = serde_json::json!(1);
        assert!(matches!(RunConfig::from_json(&v.to_string()), Err(Error::Json(_))));

        let mut v: serde_json::Value = serde_json::from_str(good).unwrap();
        v["dynamics"]["horizon"] = serde_json::json!(10.05);
        assert!(matches!(RunConfig::from_json(&v.to_string()), Err(Error::Validation(_))));

        let mut v: serde_json::Value = serde_json::from_str(good).unwrap();
        v["dynamics"]["x0"] = serde_json::json!([[0.1, 0.1]]);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn every_preset_parses() {
        for name in presets::CONFIGS {
            let cfg = RunConfig::from_json(presets::config(name).unwrap()).unwrap();
            cfg.check().unwrap();
        }
        for name in presets::MAPS {
            let _: MapConfig = serde_json::from_str(presets::map(name).unwrap()).unwrap();
        }
    }
}
