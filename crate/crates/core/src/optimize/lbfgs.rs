//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `||grad||_inf` drops below this.
    pub grad_tol: f64,
    /// Relative decrease per iteration counted as no progress.
    pub stall_tol: f64,
    pub stall_iters: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 200,
            grad_tol: 1e-6,
            stall_tol: 1e-10,
            stall_iters: 5,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    Stalled,
    MaxIterations,
}

/// An accepted step: `f1` at step length `alpha` from `f0` with slope `slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub f0: f64,
    pub f1: f64,
    pub alpha: f64,
    pub slope: f64,
}

impl StepRecord {
    pub fn satisfies_armijo(&self, c1: f64) -> bool {
        self.f1 <= self.f0 + c1 * self.alpha * self.slope
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: InnerStatus,
    pub steps: Vec<StepRecord>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

struct Objective<'a, F> {
    f: &'a mut F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>> Objective<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluations += 1;
        let (f, g) = (self.f)(x)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure(format!(
                "non-finite objective or gradient at evaluation {}",
                self.evaluations
            )));
        }
        Ok((f, g))
    }

    fn probe(&mut self, x0: &[f64], d: &[f64], alpha: f64) -> Result<Probe> {
        let x: Vec<f64> = x0.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        let (f, g) = self.eval(&x)?;
        let slope = dot(&g, d);
        Ok(Probe { alpha, f, slope, x, g })
    }
}

/// Minimizer of the cubic through two points with values and slopes, if it
/// lies strictly inside the bracket.
fn cubic_min(a: &Probe, b: &Probe) -> Option<f64> {
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Strong-Wolfe line search. Returns `None` when no acceptable point is found.
fn line_search<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>>(
    obj: &mut Objective<F>,
    x0: &[f64],
    f0: f64,
    d: &[f64],
    slope0: f64,
    alpha_init: f64,
    s: &LbfgsSettings,
) -> Result<Option<Probe>> {
    let origin = Probe {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        x: Vec::new(),
        g: Vec::new(),
    };
    let armijo = |p: &Probe| p.f <= f0 + s.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -s.c2 * slope0;
    let mut best: Option<Probe> = None;
    let keep_best = |p: &Probe, best: &mut Option<Probe>| {
        if armijo(p) && best.as_ref().map_or(true, |b| p.f < b.f) {
            *best = Some(Probe {
                alpha: p.alpha,
                f: p.f,
                slope: p.slope,
                x: p.x.clone(),
                g: p.g.clone(),
            });
        }
    };

    let mut prev = origin;
    let mut alpha = alpha_init;
    let mut evals = 0;
    let (mut lo, mut hi) = loop {
        if evals >= s.max_line_search {
            return Ok(best);
        }
        let p = obj.probe(x0, d, alpha)?;
        evals += 1;
        keep_best(&p, &mut best);
        if !armijo(&p) || (prev.alpha > 0.0 && p.f >= prev.f) {
            break (prev, p);
        }
        if curvature(&p) {
            return Ok(Some(p));
        }
        if p.slope >= 0.0 {
            break (p, prev);
        }
        prev = p;
        alpha *= 2.0;
    };

    // zoom: lo satisfies Armijo and has the lowest value seen in the bracket
    while evals < s.max_line_search {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= 1e-16 * b.max(1e-16) {
            break;
        }
        let mut t = cubic_min(&lo, &hi).unwrap_or(0.5 * (a + b));
        if !(t > a + 0.1 * width && t < b - 0.1 * width) {
            t = 0.5 * (a + b);
        }
        let p = obj.probe(x0, d, t)?;
        evals += 1;
        keep_best(&p, &mut best);
        if !armijo(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(Some(p));
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    Ok(best)
}

/// Minimizes `f` from `x0`. `f` returns the value and gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], s: &LbfgsSettings) -> Result<InnerResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut obj = Objective {
        f: &mut f,
        evaluations: 0,
    };
    let mut x = x0.to_vec();
    let (mut fx, mut g) = obj.eval(&x)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(s.memory);
    let mut steps = Vec::new();
    let mut restarted = false;
    let mut flat = 0;
    let mut status = InnerStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < s.max_iters {
        if inf_norm(&g) < s.grad_tol {
            status = InnerStatus::Converged;
            break;
        }
        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let alpha_init = if history.is_empty() { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let found = line_search(&mut obj, &x, fx, &d, slope, alpha_init, s)?;
        let Some(p) = found else {
            if history.is_empty() {
                status = InnerStatus::Stalled;
                break;
            }
            history.clear();
            continue;
        };
        iterations += 1;
        steps.push(StepRecord {
            f0: fx,
            f1: p.f,
            alpha: p.alpha,
            slope,
        });
        let sv: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > 1e-12 * dot(&sv, &sv).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
            if history.len() == s.memory {
                history.pop_front();
            }
            history.push_back((sv, yv, 1.0 / sy));
        }
        let progress = (fx - p.f) / fx.abs().max(1e-300);
        x = p.x;
        g = p.g;
        fx = p.f;
        if progress < s.stall_tol {
            flat += 1;
            if flat >= s.stall_iters {
                if restarted {
                    status = InnerStatus::Stalled;
                    break;
                }
                // one steepest-descent restart before giving up
                restarted = true;
                flat = 0;
                history.clear();
            }
        } else {
            flat = 0;
        }
    }
    if status == InnerStatus::MaxIterations && inf_norm(&g) < s.grad_tol {
        status = InnerStatus::Converged;
    }
    Ok(InnerResult {
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations: obj.evaluations,
        status,
        steps,
    })
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (sv, yv, rho) in history.iter().rev() {
        let a = rho * dot(sv, &q);
        for (qi, yi) in q.iter_mut().zip(yv) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((sv, yv, _)) = history.back() {
        let gamma = dot(sv, yv) / dot(yv, yv);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((sv, yv, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(yv, &q);
        for (qi, si) in q.iter_mut().zip(sv) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
