//! Point-cloud surfaces and cone-footprint sampling for 3D coverage.
//!
//! A cone footprint is realized by casting a fixed bundle of rays from the
//! robot position and snapping each ray to the nearest cloud point along it.
//! Exact hits are piecewise constant in the robot state, so the optimizer
//! works with a frozen-range surrogate: for each hit, the range `rho_m` and
//! the ray's tangential offset are frozen and the sample moves as
//! `r_m(p) = p + rho_m * normalize(a(p) + t_m)`, where `a(p)` is the current
//! sensor axis. The surrogate equals the exact hit at the state it was traced
//! from and is re-traced by the optimizer between outer iterations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::footprint::{cone_directions, AxisPolicy, SampleSet};
use crate::spectral::Workspace;

type Vec3 = [f64; 3];

fn sub(a: &[f64], b: &[f64]) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64], b: &[f64]) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scaled(a: &[f64], s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    /// Flat, three coordinates per point.
    pub points: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    /// Perpendicular snapping distance for ray hits.
    pub hit_radius: f64,
    pub centroid: Vec3,
}

impl PointCloud {
    pub fn new(points: Vec<f64>, weights: Option<Vec<f64>>, workspace: &Workspace) -> Result<Self> {
        if workspace.dim() != 3 {
            return invalid("point clouds need a 3D workspace");
        }
        if points.is_empty() || points.len() % 3 != 0 {
            return invalid("cloud is empty");
        }
        if let Some(p) = points.chunks(3).find(|p| !workspace.contains(p)) {
            return Err(Error::Validation(format!("cloud point {p:?} lies outside the workspace")));
        }
        if let Some(w) = &weights {
            if w.len() != points.len() / 3 {
                return invalid("cloud weight count does not match point count");
            }
        }
        let n = points.len() / 3;
        let mut centroid = [0.0; 3];
        for p in points.chunks(3) {
            for o in 0..3 {
                centroid[o] += p[o] / n as f64;
            }
        }
        let hit_radius = 2.0 * median_nn_spacing(&points);
        let hit_radius = if hit_radius > 0.0 {
            hit_radius
        } else {
            // single point or coincident points: fall back to a scale-free guess
            1e-3 * workspace.lengths().iter().cloned().fold(f64::INFINITY, f64::min)
        };
        Ok(Self {
            points,
            weights,
            hit_radius,
            centroid,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / 3
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[3 * i..3 * i + 3]
    }

    pub fn translated(&self, by: Vec3) -> Self {
        let mut out = self.clone();
        for p in out.points.chunks_mut(3) {
            for o in 0..3 {
                p[o] += by[o];
            }
        }
        for o in 0..3 {
            out.centroid[o] += by[o];
        }
        out
    }
}

fn median_nn_spacing(points: &[f64]) -> f64 {
    let n = points.len() / 3;
    if n < 2 {
        return 0.0;
    }
    let mut nn: Vec<f64> = (0..n)
        .map(|i| {
            let p = &points[3 * i..3 * i + 3];
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = sub(p, &points[3 * j..3 * j + 3]);
                    dot(&d, &d)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    nn[n / 2].sqrt()
}

/// Reads an ASCII XYZ file (`x y z` per line, `#` comments) or an ASCII PLY
/// file with `x`, `y`, `z` vertex properties.
pub fn load_cloud(path: &Path, workspace: &Workspace) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let points = if text.trim_start().starts_with("ply") {
        parse_ply(&text)?
    } else {
        parse_xyz(&text)?
    };
    if points.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: format!("{} contains no points", path.display()),
        });
    }
    PointCloud::new(points, None, workspace)
}

fn parse_xyz(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 3 coordinates, found {}", vals.len()),
            });
        }
        for v in vals {
            out.push(parse_num(v, i + 1)?);
        }
    }
    Ok(out)
}

fn parse_num(v: &str, line: usize) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::Parse {
        line,
        message: format!("not a number: {v:?}"),
    })?;
    if !x.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite coordinate {v:?}"),
        });
    }
    Ok(x)
}

fn parse_ply(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().enumerate();
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut header_done = false;
    for (i, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["ply"] | [] => {}
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("only ascii PLY is supported, got {fmt}"),
                    });
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count.parse::<usize>().map_err(|_| Error::Parse {
                        line: i + 1,
                        message: "bad vertex count".into(),
                    })?);
                }
            }
            ["property", "list", ..] => {}
            ["property", _, name] => {
                if in_vertex {
                    props.push(name.to_string());
                }
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("unexpected PLY header line {line:?}"),
                })
            }
        }
    }
    if !header_done {
        return Err(Error::Parse {
            line: 0,
            message: "PLY header has no end_header".into(),
        });
    }
    let count = vertex_count.ok_or(Error::Parse {
        line: 0,
        message: "PLY has no vertex element".into(),
    })?;
    let find = |n: &str| {
        props.iter().position(|p| p == n).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("PLY vertex has no {n} property"),
        })
    };
    let idx = [find("x")?, find("y")?, find("z")?];
    let mut out = Vec::with_capacity(3 * count);
    let mut read = 0;
    for (i, line) in lines {
        if read == count {
            break;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < props.len() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("vertex has {} values, header declares {}", toks.len(), props.len()),
            });
        }
        for &j in &idx {
            out.push(parse_num(toks[j], i + 1)?);
        }
        read += 1;
    }
    if read != count {
        return Err(Error::Parse {
            line: 0,
            message: format!("PLY declares {count} vertices but contains {read}"),
        });
    }
    Ok(out)
}

pub fn to_xyz(cloud: &PointCloud) -> String {
    let mut s = String::new();
    for p in cloud.points.chunks(3) {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    s
}

pub fn to_ply(cloud: &PointCloud) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    );
    s.push_str(&to_xyz(cloud));
    s
}

/// Built-in generated clouds. `sphere_handle`: a sphere with a half-ring handle
/// on top, scaled to the workspace.
pub fn synthetic_cloud(name: &str, workspace: &Workspace) -> Result<PointCloud> {
    if name != "sphere_handle" {
        return invalid(format!("unknown synthetic cloud {name:?}"));
    }
    if workspace.dim() != 3 {
        return invalid("synthetic clouds need a 3D workspace");
    }
    let l = workspace.lengths();
    let s = l.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = [0.5 * l[0], 0.5 * l[1], 0.45 * l[2]];
    let radius = 0.15 * s;
    let mut pts = Vec::new();
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let n_sphere = 900;
    for i in 0..n_sphere {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n_sphere as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        pts.extend([
            center[0] + radius * r * phi.cos(),
            center[1] + radius * r * phi.sin(),
            center[2] + radius * z,
        ]);
    }
    // half torus standing on the sphere in the x-z plane
    let (major, minor) = (0.1 * s, 0.02 * s);
    let ring_center = [center[0], center[1], center[2] + radius];
    let (n_major, n_minor) = (40, 8);
    for i in 0..n_major {
        let u = std::f64::consts::PI * (i as f64 + 0.5) / n_major as f64;
        for j in 0..n_minor {
            let v = 2.0 * std::f64::consts::PI * j as f64 / n_minor as f64;
            let rr = major + minor * v.cos();
            pts.extend([
                ring_center[0] + rr * u.cos(),
                ring_center[1] + minor * v.sin(),
                ring_center[2] + rr * u.sin(),
            ]);
        }
    }
    PointCloud::new(pts, None, workspace)
}

/// Sensor axis at position `p`.
pub fn sensor_axis(p: &[f64], policy: AxisPolicy, target: Vec3) -> Result<Vec3> {
    let a = match policy {
        AxisPolicy::ObjectFacing => sub(&target, p),
        AxisPolicy::Fixed(a) => a,
    };
    let n = norm(&a);
    if !(n > 1e-12) {
        return Err(Error::DegenerateAxis);
    }
    Ok(scaled(&a, 1.0 / n))
}

/// Orthonormal frame `(e1, e2)` completing `axis`.
fn frame(axis: &Vec3) -> (Vec3, Vec3) {
    let i = (0..3)
        .min_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()))
        .unwrap();
    let mut helper = [0.0; 3];
    helper[i] = 1.0;
    let e1 = cross(&helper, axis);
    let e1 = scaled(&e1, 1.0 / norm(&e1));
    let e2 = cross(axis, &e1);
    (e1, e2)
}

/// `M` unit ray directions within half-angle `atan(k_h)` of the sensor axis.
pub fn cone_rays(p: &[f64], policy: AxisPolicy, target: Vec3, k_h: f64, m: usize) -> Result<Vec<Vec3>> {
    let axis = sensor_axis(p, policy, target)?;
    let (e1, e2) = frame(&axis);
    Ok(cone_directions(k_h, m)
        .chunks(3)
        .map(|g| {
            let mut d = [0.0; 3];
            for o in 0..3 {
                d[o] = g[0] * e1[o] + g[1] * e2[o] + g[2] * axis[o];
            }
            d
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub index: usize,
    pub point: Vec3,
    pub range: f64,
}

/// Nearest cloud point along a ray within `hit_radius` of it. Ties on range go
/// to the lowest point index.
pub fn ray_hit(cloud: &PointCloud, origin: &[f64], dir: &[f64], hit_radius: f64) -> Option<RayHit> {
    let r2 = hit_radius * hit_radius;
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in cloud.points.chunks(3).enumerate() {
        let v = sub(p, origin);
        let along = dot(&v, dir);
        if along <= 0.0 {
            continue;
        }
        let perp2 = dot(&v, &v) - along * along;
        if perp2 > r2 {
            continue;
        }
        if best.map_or(true, |(_, b)| along < b) {
            best = Some((i, along));
        }
    }
    best.map(|(index, _)| {
        let point = [cloud.points[3 * index], cloud.points[3 * index + 1], cloud.points[3 * index + 2]];
        RayHit {
            index,
            point,
            range: norm(&sub(&point, origin)),
        }
    })
}

/// One hit with the frozen quantities of the surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenRay {
    pub ray: usize,
    pub hit: RayHit,
    /// Offset of the ray direction from the axis, scaled to unit axial length.
    pub tangent: Vec3,
}

impl FrozenRay {
    fn direction(&self, axis: &Vec3) -> (Vec3, f64) {
        let v = [
            axis[0] + self.tangent[0],
            axis[1] + self.tangent[1],
            axis[2] + self.tangent[2],
        ];
        let n = norm(&v);
        (scaled(&v, 1.0 / n), n)
    }

    /// Surrogate sample position `p + rho * d(p)` and its 3x3 Jacobian.
    pub fn surrogate(&self, p: &[f64], policy: AxisPolicy, target: Vec3) -> Result<(Vec3, [f64; 9])> {
        let axis = sensor_axis(p, policy, target)?;
        let (d, vnorm) = self.direction(&axis);
        let rho = self.hit.range;
        let mut point = [0.0; 3];
        for o in 0..3 {
            point[o] = p[o] + rho * d[o];
        }
        let mut jac = [0.0; 9];
        for o in 0..3 {
            jac[o * 3 + o] = 1.0;
        }
        if let AxisPolicy::ObjectFacing = policy {
            // dd/dv = (I - d d^T)/|v|, da/dp = -(I - a a^T)/dist
            let dist = norm(&sub(&target, p));
            let mut pd = [0.0; 9];
            let mut pa = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    pd[i * 3 + j] = (id - d[i] * d[j]) / vnorm;
                    pa[i * 3 + j] = -(id - axis[i] * axis[j]) / dist;
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    let s: f64 = (0..3).map(|k| pd[i * 3 + k] * pa[k * 3 + j]).sum();
                    jac[i * 3 + j] += rho * s;
                }
            }
        }
        Ok((point, jac))
    }
}

/// Rays traced from one state; `rays[m]` is `None` when ray `m` missed.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedStep {
    pub rays: Vec<Option<FrozenRay>>,
}

impl TracedStep {
    pub fn hit_count(&self) -> usize {
        self.rays.iter().filter(|r| r.is_some()).count()
    }

    pub fn hits(&self) -> impl Iterator<Item = &FrozenRay> {
        self.rays.iter().flatten()
    }
}

/// Cone footprint over a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSampler {
    pub cloud: PointCloud,
    pub workspace: Workspace,
    pub k_h: f64,
    pub rays: usize,
    pub axis: AxisPolicy,
    pub hit_radius: f64,
}

impl SurfaceSampler {
    pub fn new(cloud: PointCloud, workspace: Workspace, k_h: f64, rays: usize, axis: AxisPolicy) -> Result<Self> {
        if !(k_h > 0.0) || rays == 0 {
            return invalid("cone needs k_h > 0 and at least one ray");
        }
        let hit_radius = cloud.hit_radius;
        Ok(Self {
            cloud,
            workspace,
            k_h,
            rays,
            axis,
            hit_radius,
        })
    }

    /// Traces the cone from the position part of `x`.
    pub fn trace(&self, x: &[f64]) -> Result<TracedStep> {
        let p = &x[..3];
        let axis = sensor_axis(p, self.axis, self.cloud.centroid)?;
        let dirs = cone_rays(p, self.axis, self.cloud.centroid, self.k_h, self.rays)?;
        let rays = dirs
            .iter()
            .enumerate()
            .map(|(m, d)| {
                let hit = ray_hit(&self.cloud, p, d, self.hit_radius)?;
                // freeze the direction to the snapped point so the surrogate
                // reproduces the hit exactly at the traced state
                let to_hit = scaled(&sub(&hit.point, p), 1.0 / hit.range);
                let c = dot(&to_hit, &axis);
                if !(c > 1e-9) {
                    return None;
                }
                let tangent = [to_hit[0] / c - axis[0], to_hit[1] / c - axis[1], to_hit[2] / c - axis[2]];
                Some(FrozenRay { ray: m, hit, tangent })
            })
            .collect();
        Ok(TracedStep { rays })
    }

    /// Surrogate samples of a traced step at state `x`; uniform weights over hits.
    pub fn realize(&self, traced: &TracedStep, x: &[f64]) -> Result<SampleSet> {
        let n = x.len();
        let hits = traced.hit_count();
        let mut set = SampleSet::empty(3, n);
        if hits == 0 {
            return Ok(set);
        }
        let weight = 1.0 / hits as f64;
        set.jacobians = vec![0.0; hits * 3 * n];
        for (m, ray) in traced.hits().enumerate() {
            let (mut w, jac) = ray.surrogate(&x[..3], self.axis, self.cloud.centroid)?;
            let mask = self.workspace.clamp(&mut w);
            let dst = &mut set.jacobians[m * 3 * n..(m + 1) * 3 * n];
            for o in 0..3 {
                if mask[o] {
                    continue;
                }
                dst[o * n..o * n + 3].copy_from_slice(&jac[o * 3..o * 3 + 3]);
            }
            set.points.extend_from_slice(&w);
            set.weights.push(weight);
            set.clamped.push(mask.iter().any(|&c| c));
        }
        Ok(set)
    }
}

/// Traces and realizes in one go: hits are exact cloud points at `x`.
pub fn surface_samples(sampler: &SurfaceSampler, x: &[f64]) -> Result<(TracedStep, SampleSet)> {
    let traced = sampler.trace(x)?;
    let set = sampler.realize(&traced, x)?;
    Ok((traced, set))
}
