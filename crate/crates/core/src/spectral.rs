//! Cosine Fourier basis over a box workspace.
//!
//! Every basis function is a product of one cosine per axis,
//! `F_k(w) = (1/h_k) * prod_o cos(k_o * pi * w_o / L_o)`, with `h_k` chosen so
//! that `F_k` has unit L2 norm over the box. Coefficients are weighted by
//! `Lambda_k = (1 + |k|^2)^(-(nu + 1) / 2)`, which favours large spatial
//! scales over fine detail.
//!
//! Index vectors are enumerated in row-major order with the last axis varying
//! fastest, so `(2, 2)` counts give `[(0,0), (0,1), (1,0), (1,1)]`. All
//! coefficient vectors in the crate use this order.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Axis-aligned box `[0, L_1] x ... x [0, L_nu]` with `nu` in `{2, 3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Workspace {
    lengths: Vec<f64>,
}

impl Workspace {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&lengths.len()) {
            return invalid(format!(
                "workspace must have 2 or 3 dimensions, got {}",
                lengths.len()
            ));
        }
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return invalid(format!("workspace lengths must be positive: {lengths:?}"));
        }
        Ok(Self { lengths })
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![1.0; dim]).expect("unit box is valid")
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.iter()
            .zip(&self.lengths)
            .all(|(&x, &l)| (0.0..=l).contains(&x))
    }

    /// Clamps `w` into the box in place. Returns a mask of clamped axes.
    pub fn clamp(&self, w: &mut [f64]) -> [bool; 3] {
        let mut mask = [false; 3];
        for (o, (x, &l)) in w.iter_mut().zip(&self.lengths).enumerate() {
            if *x < 0.0 {
                *x = 0.0;
                mask[o] = true;
            } else if *x > l {
                *x = l;
                mask[o] = true;
            }
        }
        mask
    }
}

impl TryFrom<Vec<f64>> for Workspace {
    type Error = crate::Error;

    fn try_from(lengths: Vec<f64>) -> Result<Self> {
        Self::new(lengths)
    }
}

impl From<Workspace> for Vec<f64> {
    fn from(w: Workspace) -> Self {
        w.lengths
    }
}

/// Enumerates `{0..K_1-1} x ... x {0..K_nu-1}` in row-major order.
pub fn index_set(counts: &[usize]) -> Result<Vec<Vec<usize>>> {
    if counts.is_empty() {
        return invalid("index set needs at least one dimension");
    }
    if let Some(c) = counts.iter().find(|&&c| c == 0) {
        return invalid(format!("frequency counts must be >= 1, got {c}"));
    }
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut k = vec![0usize; counts.len()];
    for _ in 0..total {
        out.push(k.clone());
        for o in (0..counts.len()).rev() {
            k[o] += 1;
            if k[o] < counts[o] {
                break;
            }
            k[o] = 0;
        }
    }
    Ok(out)
}

/// L2 norm of the unnormalized cosine product over the workspace.
pub fn normalizer(k: &[usize], workspace: &Workspace) -> f64 {
    k.iter()
        .zip(workspace.lengths())
        .map(|(&ko, &l)| if ko == 0 { l } else { 0.5 * l })
        .product::<f64>()
        .sqrt()
}

/// Coefficient weight `(1 + |k|^2)^(-(nu + 1) / 2)`.
pub fn weight(k: &[usize], nu: usize) -> f64 {
    let norm2: f64 = k.iter().map(|&ko| (ko * ko) as f64).sum();
    (1.0 + norm2).powf(-((nu as f64) + 1.0) / 2.0)
}

/// Per-axis cosine and sine tables at a single point, reused across calls.
#[derive(Debug, Clone, Default)]
pub struct BasisScratch {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    workspace: Workspace,
    counts: Vec<usize>,
    indices: Vec<Vec<usize>>,
    normalizers: Vec<f64>,
    weights: Vec<f64>,
    inv_h: Vec<f64>,
    offsets: Vec<usize>,
}

impl SpectralBasis {
    pub fn new(workspace: Workspace, counts: &[usize]) -> Result<Self> {
        if counts.len() != workspace.dim() {
            return invalid(format!(
                "basis has {} frequency counts but the workspace is {}-dimensional",
                counts.len(),
                workspace.dim()
            ));
        }
        let indices = index_set(counts)?;
        let nu = workspace.dim();
        let normalizers: Vec<f64> = indices.iter().map(|k| normalizer(k, &workspace)).collect();
        let weights = indices.iter().map(|k| weight(k, nu)).collect();
        let inv_h = normalizers.iter().map(|h| 1.0 / h).collect();
        let mut offsets = vec![0];
        for c in counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        Ok(Self {
            workspace,
            counts: counts.to_vec(),
            indices,
            normalizers,
            weights,
            inv_h,
            offsets,
        })
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn dim(&self) -> usize {
        self.workspace.dim()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn normalizers(&self) -> &[f64] {
        &self.normalizers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Position of `k` in the coefficient ordering.
    pub fn position(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.dim() || k.iter().zip(&self.counts).any(|(a, b)| a >= b) {
            return None;
        }
        Some(k.iter().zip(&self.counts).fold(0, |acc, (&ko, &c)| acc * c + ko))
    }

    /// `F_k(w)` for a single index, evaluated directly.
    pub fn eval(&self, k: &[usize], w: &[f64]) -> f64 {
        let h = normalizer(k, &self.workspace);
        let prod: f64 = k
            .iter()
            .zip(w)
            .zip(self.workspace.lengths())
            .map(|((&ko, &wo), &l)| (ko as f64 * PI * wo / l).cos())
            .product();
        prod / h
    }

    /// Gradient of `F_k` with respect to `w`, evaluated directly.
    pub fn grad(&self, k: &[usize], w: &[f64]) -> Vec<f64> {
        let h = normalizer(k, &self.workspace);
        let lengths = self.workspace.lengths();
        let nu = self.dim();
        (0..nu)
            .map(|o| {
                let freq = k[o] as f64 * PI / lengths[o];
                let mut g = -freq * (freq * w[o]).sin() / h;
                for p in (0..nu).filter(|&p| p != o) {
                    g *= (k[p] as f64 * PI * w[p] / lengths[p]).cos();
                }
                g
            })
            .collect()
    }

    fn fill_tables(&self, w: &[f64], scratch: &mut BasisScratch) {
        let total = *self.offsets.last().unwrap();
        scratch.cos.resize(total, 0.0);
        scratch.sin.resize(total, 0.0);
        for (o, (&wo, &l)) in w.iter().zip(self.workspace.lengths()).enumerate() {
            let theta = PI * wo / l;
            let (s1, c1) = theta.sin_cos();
            let base = self.offsets[o];
            let (mut c, mut s) = (1.0, 0.0);
            for ko in 0..self.counts[o] {
                scratch.cos[base + ko] = c;
                scratch.sin[base + ko] = s;
                // angle addition keeps the tables consistent to rounding
                let next_c = c * c1 - s * s1;
                s = s * c1 + c * s1;
                c = next_c;
            }
        }
    }

    /// Adds `scale * F_k(w)` to `acc[k]` for every index.
    pub fn accumulate(&self, w: &[f64], scale: f64, acc: &mut [f64], scratch: &mut BasisScratch) {
        debug_assert_eq!(acc.len(), self.len());
        self.fill_tables(w, scratch);
        let c = &scratch.cos;
        match self.dim() {
            2 => {
                let (k1, k2) = (self.counts[0], self.counts[1]);
                let (c1, c2) = (&c[..k1], &c[k1..k1 + k2]);
                for (a, &x) in c1.iter().enumerate() {
                    let sx = scale * x;
                    let row = a * k2;
                    for (b, &y) in c2.iter().enumerate() {
                        acc[row + b] += sx * y * self.inv_h[row + b];
                    }
                }
            }
            3 => {
                let (k1, k2, k3) = (self.counts[0], self.counts[1], self.counts[2]);
                let c1 = &c[..k1];
                let c2 = &c[k1..k1 + k2];
                let c3 = &c[k1 + k2..k1 + k2 + k3];
                for (a, &x) in c1.iter().enumerate() {
                    for (b, &y) in c2.iter().enumerate() {
                        let sxy = scale * x * y;
                        let row = (a * k2 + b) * k3;
                        for (d, &z) in c3.iter().enumerate() {
                            acc[row + d] += sxy * z * self.inv_h[row + d];
                        }
                    }
                }
            }
            _ => unreachable!("workspace dimension is validated"),
        }
    }

    /// All basis values at `w`, in index order.
    pub fn eval_all(&self, w: &[f64], out: &mut [f64], scratch: &mut BasisScratch) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.accumulate(w, 1.0, out, scratch);
    }

    /// `sum_k a_k * grad F_k(w)`.
    pub fn weighted_gradient(&self, w: &[f64], a: &[f64], scratch: &mut BasisScratch) -> [f64; 3] {
        debug_assert_eq!(a.len(), self.len());
        self.fill_tables(w, scratch);
        let lengths = self.workspace.lengths();
        let (c, s) = (&scratch.cos, &scratch.sin);
        let mut g = [0.0; 3];
        match self.dim() {
            2 => {
                let (k1, k2) = (self.counts[0], self.counts[1]);
                let (f1, f2) = (PI / lengths[0], PI / lengths[1]);
                for a1 in 0..k1 {
                    let (cx, dx) = (c[a1], -(a1 as f64) * f1 * s[a1]);
                    let row = a1 * k2;
                    let (mut gx, mut gy) = (0.0, 0.0);
                    for a2 in 0..k2 {
                        let coef = a[row + a2] * self.inv_h[row + a2];
                        let (cy, dy) = (c[k1 + a2], -(a2 as f64) * f2 * s[k1 + a2]);
                        gx += coef * cy;
                        gy += coef * dy;
                    }
                    g[0] += dx * gx;
                    g[1] += cx * gy;
                }
            }
            3 => {
                let (k1, k2, k3) = (self.counts[0], self.counts[1], self.counts[2]);
                let (f1, f2, f3) = (PI / lengths[0], PI / lengths[1], PI / lengths[2]);
                for a1 in 0..k1 {
                    let (cx, dx) = (c[a1], -(a1 as f64) * f1 * s[a1]);
                    for a2 in 0..k2 {
                        let (cy, dy) = (c[k1 + a2], -(a2 as f64) * f2 * s[k1 + a2]);
                        let row = (a1 * k2 + a2) * k3;
                        let (mut sz, mut sdz) = (0.0, 0.0);
                        for a3 in 0..k3 {
                            let coef = a[row + a3] * self.inv_h[row + a3];
                            sz += coef * c[k1 + k2 + a3];
                            sdz += coef * (-(a3 as f64) * f3 * s[k1 + k2 + a3]);
                        }
                        g[0] += dx * cy * sz;
                        g[1] += cx * dy * sz;
                        g[2] += cx * cy * sdz;
                    }
                }
            }
            _ => unreachable!("workspace dimension is validated"),
        }
        g
    }
}
