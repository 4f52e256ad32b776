//! Information maps and their Fourier coefficients.
//!
//! Three representations are supported: a Gaussian mixture truncated to the
//! workspace, a cell-centred grid of densities, and a weighted cloud of point
//! masses (used for surfaces in 3D). Coefficients are computed by separable
//! tensor-product quadrature for the first two and by an exact finite sum for
//! the cloud.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{BasisScratch, SpectralBasis, Workspace};

/// Smallest accepted quadrature resolution per axis.
pub const MIN_QUADRATURE: usize = 32;

pub fn default_quadrature(nu: usize) -> usize {
    if nu == 2 {
        200
    } else {
        64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the covariance matrix (variances, m^2).
    pub cov: Vec<f64>,
}

impl GaussianComponent {
    fn pdf(&self, w: &[f64]) -> f64 {
        let mut expo = 0.0;
        let mut norm = 1.0;
        for ((&x, &m), &v) in w.iter().zip(&self.mean).zip(&self.cov) {
            expo += (x - m) * (x - m) / v;
            norm *= 2.0 * PI * v;
        }
        self.weight * (-0.5 * expo).exp() / norm.sqrt()
    }
}

/// Piecewise-constant density on a cell-centred grid. Values are stored
/// row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub workspace: Workspace,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridMap {
    pub fn new(workspace: Workspace, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.len() != workspace.dim() {
            return invalid("grid shape does not match workspace dimension");
        }
        if shape.iter().any(|&s| s == 0) {
            return invalid("grid shape entries must be positive");
        }
        let n: usize = shape.iter().product();
        if values.len() != n {
            return invalid(format!("grid has {} cells but shape needs {n}", values.len()));
        }
        Ok(Self {
            workspace,
            shape,
            values,
        })
    }

    pub fn filled(workspace: Workspace, shape: Vec<usize>, value: f64) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(workspace, shape, vec![value; n])
    }

    pub fn cell_volume(&self) -> f64 {
        self.workspace
            .lengths()
            .iter()
            .zip(&self.shape)
            .map(|(l, &s)| l / s as f64)
            .product()
    }

    pub fn cell_center(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5) * self.workspace.lengths()[axis] / self.shape[axis] as f64
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    fn cell_of(&self, w: &[f64]) -> usize {
        w.iter()
            .zip(self.workspace.lengths())
            .zip(&self.shape)
            .fold(0, |acc, ((&x, &l), &s)| {
                let i = ((x / l) * s as f64).floor().clamp(0.0, (s - 1) as f64) as usize;
                acc * s + i
            })
    }

    /// Heatmap as an ASCII PGM (P2, maxval 255), min-max scaled.
    ///
    /// Pixel (0, 0) is the corner `w = (0, L_2)`: image rows run from the top
    /// of the workspace (large `w_2`) downwards. 3D grids are summed along the
    /// last axis first.
    pub fn to_pgm(&self) -> String {
        let (nx, ny, plane) = self.top_plane();
        let lo = plane.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = plane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let mut out = String::new();
        out.push_str("P2\n");
        out.push_str("# pixel (0,0) is workspace corner w=(0,L2); rows descend in w2\n");
        let _ = writeln!(out, "{nx} {ny}\n255");
        for row in 0..ny {
            let j = ny - 1 - row;
            let line: Vec<String> = (0..nx)
                .map(|i| {
                    let v = plane[i * ny + j];
                    let px = if span > 0.0 {
                        ((v - lo) / span * 255.0).round() as u8
                    } else {
                        0
                    };
                    px.to_string()
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    fn top_plane(&self) -> (usize, usize, Vec<f64>) {
        let (nx, ny) = (self.shape[0], self.shape[1]);
        if self.shape.len() == 2 {
            return (nx, ny, self.values.clone());
        }
        let nz = self.shape[2];
        let plane = self
            .values
            .chunks(nz)
            .map(|col| col.iter().sum::<f64>())
            .collect();
        (nx, ny, plane)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InfoMap {
    GaussianMixture {
        workspace: Workspace,
        components: Vec<GaussianComponent>,
        /// Trapezoid nodes per axis used for normalization and coefficients.
        quadrature: usize,
    },
    Grid(GridMap),
    /// Point masses; `points` is flat with `nu` coordinates per point.
    DeltaCloud {
        workspace: Workspace,
        points: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl InfoMap {
    pub fn gaussian_mixture(workspace: Workspace, components: Vec<GaussianComponent>) -> Result<Self> {
        let quadrature = default_quadrature(workspace.dim());
        let map = InfoMap::GaussianMixture {
            workspace,
            components,
            quadrature,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn delta_cloud(workspace: Workspace, points: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        let nu = workspace.dim();
        let n = points.len() / nu.max(1);
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        let map = InfoMap::DeltaCloud {
            workspace,
            points,
            weights,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn workspace(&self) -> &Workspace {
        match self {
            InfoMap::GaussianMixture { workspace, .. } | InfoMap::DeltaCloud { workspace, .. } => {
                workspace
            }
            InfoMap::Grid(g) => &g.workspace,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nu = self.workspace().dim();
        match self {
            InfoMap::GaussianMixture {
                components,
                quadrature,
                ..
            } => {
                if components.is_empty() {
                    return invalid("gaussian mixture has no components");
                }
                for c in components {
                    if c.mean.len() != nu || c.cov.len() != nu {
                        return invalid("gaussian component dimension mismatch");
                    }
                    if !(c.weight >= 0.0) || c.cov.iter().any(|&v| !(v > 0.0)) {
                        return invalid("gaussian weights must be >= 0 and variances > 0");
                    }
                }
                if *quadrature < 2 {
                    return invalid("quadrature needs at least 2 nodes per axis");
                }
            }
            InfoMap::Grid(g) => {
                if g.values.iter().any(|&v| !(v >= 0.0)) {
                    return invalid("grid cells must be nonnegative");
                }
            }
            InfoMap::DeltaCloud {
                workspace,
                points,
                weights,
            } => {
                if points.is_empty() || points.len() % nu != 0 {
                    return invalid("cloud needs a nonempty list of points");
                }
                if weights.len() != points.len() / nu {
                    return invalid("cloud weight count does not match point count");
                }
                if weights.iter().any(|&v| !(v >= 0.0)) {
                    return invalid("cloud weights must be nonnegative");
                }
                if let Some(p) = points.chunks(nu).find(|p| !workspace.contains(p)) {
                    return Err(Error::Validation(format!("cloud point {p:?} lies outside the workspace")));
                }
            }
        }
        Ok(())
    }

    /// Total mass over the workspace under this map's own quadrature.
    pub fn mass(&self) -> f64 {
        match self {
            InfoMap::GaussianMixture { .. } => {
                let (shape, values, rules) = self.sampled_nodes();
                let ones: Vec<Vec<Vec<f64>>> = rules.iter().map(|r| vec![r.clone()]).collect();
                separable_apply(&values, &shape, &ones)[0]
            }
            InfoMap::Grid(g) => g.mass(),
            InfoMap::DeltaCloud { weights, .. } => weights.iter().sum(),
        }
    }

    /// Pointwise density, `None` for point-mass maps.
    pub fn density(&self, w: &[f64]) -> Option<f64> {
        match self {
            InfoMap::GaussianMixture { components, .. } => {
                Some(components.iter().map(|c| c.pdf(w)).sum())
            }
            InfoMap::Grid(g) => Some(g.values[g.cell_of(w)]),
            InfoMap::DeltaCloud { .. } => None,
        }
    }

    // Trapezoid nodes (gaussian) or cell centres (grid), the density sampled on
    // them, and per-axis quadrature weights.
    fn sampled_nodes(&self) -> (Vec<usize>, Vec<f64>, Vec<Vec<f64>>) {
        match self {
            InfoMap::GaussianMixture {
                workspace,
                components,
                quadrature,
            } => {
                let n = *quadrature;
                let nu = workspace.dim();
                let nodes: Vec<Vec<f64>> = workspace
                    .lengths()
                    .iter()
                    .map(|&l| (0..n).map(|i| i as f64 * l / (n - 1) as f64).collect())
                    .collect();
                let rules = workspace
                    .lengths()
                    .iter()
                    .map(|&l| {
                        let h = l / (n - 1) as f64;
                        (0..n)
                            .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                            .collect()
                    })
                    .collect();
                let shape = vec![n; nu];
                let total = n.pow(nu as u32);
                let mut values = Vec::with_capacity(total);
                let mut w = vec![0.0; nu];
                for flat in 0..total {
                    let mut rem = flat;
                    for o in (0..nu).rev() {
                        w[o] = nodes[o][rem % n];
                        rem /= n;
                    }
                    values.push(components.iter().map(|c| c.pdf(&w)).sum());
                }
                (shape, values, rules)
            }
            InfoMap::Grid(g) => {
                let rules = g
                    .workspace
                    .lengths()
                    .iter()
                    .zip(&g.shape)
                    .map(|(&l, &s)| vec![l / s as f64; s])
                    .collect();
                (g.shape.clone(), g.values.clone(), rules)
            }
            InfoMap::DeltaCloud { .. } => unreachable!("clouds are not sampled on a grid"),
        }
    }

    fn node_positions(&self) -> Vec<Vec<f64>> {
        match self {
            InfoMap::GaussianMixture {
                workspace,
                quadrature,
                ..
            } => workspace
                .lengths()
                .iter()
                .map(|&l| (0..*quadrature).map(|i| i as f64 * l / (*quadrature - 1) as f64).collect())
                .collect(),
            InfoMap::Grid(g) => (0..g.shape.len())
                .map(|o| (0..g.shape[o]).map(|i| g.cell_center(o, i)).collect())
                .collect(),
            InfoMap::DeltaCloud { .. } => Vec::new(),
        }
    }
}

/// Rescales a map to unit total mass.
pub fn normalize_map(map: &InfoMap) -> Result<InfoMap> {
    map.validate()?;
    let mass = map.mass();
    if !(mass > 0.0) || !mass.is_finite() {
        return invalid("map has zero total mass");
    }
    let mut out = map.clone();
    match &mut out {
        InfoMap::GaussianMixture { components, .. } => {
            components.iter_mut().for_each(|c| c.weight /= mass)
        }
        InfoMap::Grid(g) => g.values.iter_mut().for_each(|v| *v /= mass),
        InfoMap::DeltaCloud { weights, .. } => weights.iter_mut().for_each(|w| *w /= mass),
    }
    Ok(out)
}

/// Coefficients on a spectral basis, in the basis index order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    counts: Vec<usize>,
    lengths: Vec<f64>,
    pub values: Vec<f64>,
}

impl CoeffVector {
    pub fn zeros(basis: &SpectralBasis) -> Self {
        Self::from_values(basis, vec![0.0; basis.len()])
    }

    pub fn from_values(basis: &SpectralBasis, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), basis.len(), "coefficient count must match the basis");
        Self {
            counts: basis.counts().to_vec(),
            lengths: basis.workspace().lengths().to_vec(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_basis(&self, other: &CoeffVector) -> bool {
        self.counts == other.counts && self.lengths == other.lengths
    }

    pub fn matches(&self, basis: &SpectralBasis) -> bool {
        self.counts == basis.counts() && self.lengths == basis.workspace().lengths()
    }
}

/// Fourier coefficients `phi_k = integral of phi * F_k` over the workspace.
pub fn map_coeffs(map: &InfoMap, basis: &SpectralBasis) -> Result<CoeffVector> {
    if map.workspace() != basis.workspace() {
        return invalid("map and basis workspaces differ");
    }
    map.validate()?;
    project(map, basis)
}

/// Coefficients of a signed grid, such as a reconstruction. Only finiteness
/// is checked. Projection at cell centres inverts [`reconstruct`] exactly when
/// the grid has at least as many cells per axis as the basis has indices.
pub fn grid_coeffs(grid: &GridMap, basis: &SpectralBasis) -> Result<CoeffVector> {
    if &grid.workspace != basis.workspace() {
        return invalid("map and basis workspaces differ");
    }
    if grid.values.iter().any(|v| !v.is_finite()) {
        return invalid("grid cells must be finite");
    }
    project(&InfoMap::Grid(grid.clone()), basis)
}

fn project(map: &InfoMap, basis: &SpectralBasis) -> Result<CoeffVector> {
    match map {
        InfoMap::DeltaCloud { points, weights, .. } => {
            let nu = basis.dim();
            let mut acc = vec![0.0; basis.len()];
            let mut scratch = BasisScratch::default();
            for (p, &wt) in points.chunks(nu).zip(weights) {
                basis.accumulate(p, wt, &mut acc, &mut scratch);
            }
            Ok(CoeffVector::from_values(basis, acc))
        }
        InfoMap::GaussianMixture { quadrature, .. } if *quadrature < MIN_QUADRATURE => invalid(format!(
            "quadrature of {quadrature} nodes per axis is below the floor of {MIN_QUADRATURE}"
        )),
        _ => {
            let (shape, values, rules) = map.sampled_nodes();
            let nodes = map.node_positions();
            let lengths = basis.workspace().lengths();
            let mats: Vec<Vec<Vec<f64>>> = (0..basis.dim())
                .map(|o| {
                    (0..basis.counts()[o])
                        .map(|k| {
                            nodes[o]
                                .iter()
                                .zip(&rules[o])
                                .map(|(&x, &r)| r * (k as f64 * PI * x / lengths[o]).cos())
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let mut coeffs = separable_apply(&values, &shape, &mats);
            coeffs
                .iter_mut()
                .zip(basis.normalizers())
                .for_each(|(c, h)| *c /= h);
            Ok(CoeffVector::from_values(basis, coeffs))
        }
    }
}

/// Evaluates `sum_k coeff_k F_k` at the cell centres of a grid.
///
/// Truncation ringing can make some cells negative; nothing is clipped.
pub fn reconstruct(coeffs: &CoeffVector, basis: &SpectralBasis, resolution: &[usize]) -> Result<GridMap> {
    if !coeffs.matches(basis) {
        return invalid("coefficients were computed on a different basis");
    }
    if resolution.len() != basis.dim() || resolution.iter().any(|&r| r < 2) {
        return invalid("reconstruction needs at least 2 cells per axis");
    }
    let lengths = basis.workspace().lengths();
    let scaled: Vec<f64> = coeffs
        .values
        .iter()
        .zip(basis.normalizers())
        .map(|(c, h)| c / h)
        .collect();
    let mats: Vec<Vec<Vec<f64>>> = (0..basis.dim())
        .map(|o| {
            (0..resolution[o])
                .map(|i| {
                    let x = (i as f64 + 0.5) * lengths[o] / resolution[o] as f64;
                    (0..basis.counts()[o])
                        .map(|k| (k as f64 * PI * x / lengths[o]).cos())
                        .collect()
                })
                .collect()
        })
        .collect();
    let values = separable_apply(&scaled, basis.counts(), &mats);
    GridMap::new(basis.workspace().clone(), resolution.to_vec(), values)
}

/// Applies one matrix per axis to a row-major tensor.
///
/// `mats[o]` has shape `(out_o, shape[o])`; the result has shape
/// `(out_0, ..., out_last)`, row-major.
fn separable_apply(values: &[f64], shape: &[usize], mats: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let mut cur = values.to_vec();
    let mut cur_shape = shape.to_vec();
    // Contract the leading axis and append the new one at the end; after one
    // pass per axis the axes are back in their original order.
    for mat in mats {
        let lead = cur_shape[0];
        let rest: usize = cur_shape[1..].iter().product();
        let out_n = mat.len();
        let mut next = vec![0.0; rest * out_n];
        for (k, row) in mat.iter().enumerate() {
            debug_assert_eq!(row.len(), lead);
            for (i, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let src = &cur[i * rest..(i + 1) * rest];
                for (r, &v) in src.iter().enumerate() {
                    next[r * out_n + k] += m * v;
                }
            }
        }
        cur = next;
        cur_shape.remove(0);
        cur_shape.push(out_n);
    }
    cur
}

/// Map document: `{type, workspace?, components | shape+cells | points}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapConfig {
    Gmm {
        #[serde(default)]
        workspace: Option<Vec<f64>>,
        components: Vec<GaussianComponent>,
        #[serde(default)]
        quadrature: Option<usize>,
    },
    Grid {
        #[serde(default)]
        workspace: Option<Vec<f64>>,
        shape: Vec<usize>,
        cells: Vec<f64>,
    },
    Cloud {
        #[serde(default)]
        workspace: Option<Vec<f64>>,
        #[serde(default)]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        /// XYZ or PLY file, relative to the document that references it.
        #[serde(default)]
        path: Option<String>,
        /// Name of a built-in generated cloud.
        #[serde(default)]
        synthetic: Option<String>,
    },
}

impl MapConfig {
    pub fn workspace(&self) -> Option<&[f64]> {
        match self {
            MapConfig::Gmm { workspace, .. }
            | MapConfig::Grid { workspace, .. }
            | MapConfig::Cloud { workspace, .. } => workspace.as_deref(),
        }
    }

    /// Builds the (unnormalized) map. `base_dir` resolves relative cloud paths.
    pub fn build(&self, workspace: &Workspace, base_dir: &Path) -> Result<InfoMap> {
        if let Some(ws) = self.workspace() {
            if ws != workspace.lengths() {
                return Err(Error::Validation(format!(
                    "map workspace {ws:?} differs from run workspace {:?}",
                    workspace.lengths()
                )));
            }
        }
        let map = match self {
            MapConfig::Gmm {
                components,
                quadrature,
                ..
            } => InfoMap::GaussianMixture {
                workspace: workspace.clone(),
                components: components.clone(),
                quadrature: quadrature.unwrap_or_else(|| default_quadrature(workspace.dim())),
            },
            MapConfig::Grid { shape, cells, .. } => {
                InfoMap::Grid(GridMap::new(workspace.clone(), shape.clone(), cells.clone())?)
            }
            MapConfig::Cloud {
                points,
                weights,
                path,
                synthetic,
                ..
            } => {
                let sources = [points.is_some(), path.is_some(), synthetic.is_some()];
                if sources.iter().filter(|&&s| s).count() != 1 {
                    return Err(Error::Validation(
                        "cloud map needs exactly one of points, path or synthetic".into(),
                    ));
                }
                let cloud = if let Some(points) = points {
                    if points.iter().any(|p| p.len() != workspace.dim()) {
                        return invalid("cloud point dimension mismatch");
                    }
                    points.concat()
                } else if let Some(path) = path {
                    crate::surface3d::load_cloud(&base_dir.join(path), workspace)?.points
                } else {
                    let name = synthetic.as_deref().unwrap_or_default();
                    crate::surface3d::synthetic_cloud(name, workspace)?.points
                };
                InfoMap::delta_cloud(workspace.clone(), cloud, weights.clone())?
            }
        };
        map.validate()?;
        Ok(map)
    }
}
