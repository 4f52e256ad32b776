//! Inequality constraints `g(X, U) <= 0` and their sparse gradients.
//!
//! State constraints apply to `x_1..x_N`; the initial state is fixed and is
//! never constrained. Surface-range constraints compare each robot position
//! with the hit points traced at the start of the current outer iteration.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Bound, Projection, Trajectory};
use crate::footprint::FootprintModel;
use crate::spectral::Workspace;
use crate::surface3d::TracedStep;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum Constraint {
    /// Elementwise state bounds; `None` leaves a coordinate free.
    StateBox { bounds: Vec<Option<Bound>> },
    ControlBox { bounds: Vec<Option<Bound>> },
    /// `||p_i - p_j|| >= h1` for every robot pair.
    Collision { h1: f64 },
    /// `h3 <= ||p - r|| <= h2` for every hit point `r` of the robot's cone.
    SurfaceRange { h2: f64, h3: f64 },
    /// Keeps disk footprints inside the workspace.
    FootprintInterior,
}

/// A decision-dependent variable touched by a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    State { robot: usize, step: usize, index: usize },
    Control { robot: usize, step: usize, index: usize },
}

/// Everything a constraint may look at.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintContext<'a> {
    pub trajectories: &'a [Trajectory],
    pub pos_dim: usize,
    /// Per robot, per interval.
    pub traces: Option<&'a [Vec<TracedStep>]>,
    pub footprint: Option<(&'a FootprintModel, &'a Projection)>,
    pub workspace: &'a Workspace,
    /// Rays per step for surface problems.
    pub rays: usize,
}

const MAX_TERMS: usize = 6;

/// One constraint value with its gradient entries.
pub(crate) struct Term {
    g: f64,
    grad: [(Var, f64); MAX_TERMS],
    len: usize,
}

impl Term {
    fn new(g: f64) -> Self {
        Term {
            g,
            grad: [(Var::State { robot: 0, step: 0, index: 0 }, 0.0); MAX_TERMS],
            len: 0,
        }
    }

    fn push(&mut self, v: Var, d: f64) {
        self.grad[self.len] = (v, d);
        self.len += 1;
    }
}

fn visit_box(
    bounds: &[Option<Bound>],
    robots: usize,
    steps: std::ops::Range<usize>,
    value: impl Fn(usize, usize, usize) -> f64,
    var: impl Fn(usize, usize, usize) -> Var,
    f: &mut dyn FnMut(Term),
) {
    for r in 0..robots {
        for t in steps.clone() {
            for (i, b) in bounds.iter().enumerate() {
                let Some([lo, hi]) = *b else { continue };
                let x = value(r, t, i);
                let mut lower = Term::new(lo - x);
                lower.push(var(r, t, i), -1.0);
                f(lower);
                let mut upper = Term::new(x - hi);
                upper.push(var(r, t, i), 1.0);
                f(upper);
            }
        }
    }
}

impl Constraint {
    pub(crate) fn visit(&self, ctx: &ConstraintContext, f: &mut dyn FnMut(Term)) {
        let trajs = ctx.trajectories;
        let robots = trajs.len();
        let steps = trajs.first().map_or(0, |t| t.steps());
        match self {
            Constraint::StateBox { bounds } => visit_box(
                bounds,
                robots,
                1..steps + 1,
                |r, t, i| trajs[r].state(t)[i],
                |robot, step, index| Var::State { robot, step, index },
                f,
            ),
            Constraint::ControlBox { bounds } => visit_box(
                bounds,
                robots,
                0..steps,
                |r, t, i| trajs[r].control(t)[i],
                |robot, step, index| Var::Control { robot, step, index },
                f,
            ),
            Constraint::Collision { h1 } => {
                let d = ctx.pos_dim;
                for i in 0..robots {
                    for j in i + 1..robots {
                        for t in 1..=steps {
                            let (pi, pj) = (&trajs[i].state(t)[..d], &trajs[j].state(t)[..d]);
                            let dist = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                            let mut term = Term::new(h1 - dist);
                            // zero subgradient when the robots coincide
                            if dist > 0.0 {
                                for o in 0..d {
                                    let u = (pi[o] - pj[o]) / dist;
                                    term.push(Var::State { robot: i, step: t, index: o }, -u);
                                    term.push(Var::State { robot: j, step: t, index: o }, u);
                                }
                            }
                            f(term);
                        }
                    }
                }
            }
            Constraint::SurfaceRange { h2, h3 } => {
                let Some(traces) = ctx.traces else { return };
                for (r, robot_traces) in traces.iter().enumerate() {
                    for (t, traced) in robot_traces.iter().enumerate() {
                        let p = &trajs[r].state(t)[..3];
                        for m in 0..ctx.rays {
                            // missing rays keep their slot with an inert value
                            let Some(ray) = traced.rays.get(m).copied().flatten() else {
                                f(Term::new(0.0));
                                f(Term::new(0.0));
                                continue;
                            };
                            let v: Vec<f64> = (0..3).map(|o| p[o] - ray.hit.point[o]).collect();
                            let dist = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                            let mut upper = Term::new(dist - h2);
                            let mut lower = Term::new(h3 - dist);
                            // x_0 is fixed, so step 0 carries no gradient
                            if dist > 0.0 && t > 0 {
                                for o in 0..3 {
                                    let u = v[o] / dist;
                                    upper.push(Var::State { robot: r, step: t, index: o }, u);
                                    lower.push(Var::State { robot: r, step: t, index: o }, -u);
                                }
                            }
                            f(upper);
                            f(lower);
                        }
                    }
                }
            }
            Constraint::FootprintInterior => {
                let Some((model, proj)) = ctx.footprint else { return };
                let lengths = ctx.workspace.lengths();
                for r in 0..robots {
                    for t in 1..=steps {
                        let x = trajs[r].state(t);
                        let (radius, height) = match *model {
                            FootprintModel::FixedDisk { radius, .. } => (radius, None),
                            FootprintModel::AltitudeDisk { k_h, .. } => match proj.height_index {
                                Some(h) => (k_h * x[h], Some((h, k_h))),
                                None => continue,
                            },
                            _ => continue,
                        };
                        for o in 0..proj.nu {
                            let mut lower = Term::new(radius - x[o]);
                            lower.push(Var::State { robot: r, step: t, index: o }, -1.0);
                            let mut upper = Term::new(x[o] + radius - lengths[o]);
                            upper.push(Var::State { robot: r, step: t, index: o }, 1.0);
                            if let Some((h, k_h)) = height {
                                lower.push(Var::State { robot: r, step: t, index: h }, k_h);
                                upper.push(Var::State { robot: r, step: t, index: h }, k_h);
                            }
                            f(lower);
                            f(upper);
                        }
                    }
                }
            }
        }
    }
}

/// Per-step values `g_j` of one constraint in its fixed slot order.
pub fn constraint_eval(constraint: &Constraint, ctx: &ConstraintContext) -> Vec<f64> {
    let mut out = Vec::new();
    constraint.visit(ctx, &mut |term| out.push(term.g));
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self { constraints }
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn eval(&self, ctx: &ConstraintContext) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.constraints {
            c.visit(ctx, &mut |term| out.push(term.g));
        }
        out
    }

    /// Calls `f(j, g_j, d)` for each gradient entry `d = dg_j/dv`.
    pub(crate) fn for_each_gradient(&self, ctx: &ConstraintContext, f: &mut dyn FnMut(usize, f64, Var, f64)) {
        let mut j = 0;
        for c in &self.constraints {
            c.visit(ctx, &mut |term| {
                for &(v, d) in &term.grad[..term.len] {
                    f(j, term.g, v, d);
                }
                j += 1;
            });
        }
    }
}

/// `max_j max(0, g_j)`, zero for an empty set.
pub fn max_violation(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, &v| if v > m { v } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DynamicsModel, ModelKind};
    use crate::surface3d::{FrozenRay, RayHit};

    fn still(x: &[f64], steps: usize) -> Trajectory {
        let model = DynamicsModel::new(ModelKind::SingleIntegrator, x.len()).unwrap();
        model.rollout(x, &vec![0.0; steps * x.len()], 0.1).unwrap()
    }

    fn ctx<'a>(trajs: &'a [Trajectory], ws: &'a Workspace) -> ConstraintContext<'a> {
        ConstraintContext {
            trajectories: trajs,
            pos_dim: 3,
            traces: None,
            footprint: None,
            workspace: ws,
            rays: 0,
        }
    }

    #[test]
    fn collision_values() {
        let ws = Workspace::unit(3);
        let trajs = [still(&[0.5, 0.5, 0.3], 1), still(&[0.55, 0.5, 0.3], 1)];
        let g = constraint_eval(&Constraint::Collision { h1: 0.1 }, &ctx(&trajs, &ws));
        assert_eq!(g.len(), 1);
        assert!((g[0] - 0.05).abs() < 1e-12);

        let trajs = [still(&[0.5, 0.5, 0.3], 1), still(&[0.5, 0.5, 0.2], 1)];
        let g = constraint_eval(&Constraint::Collision { h1: 0.1 }, &ctx(&trajs, &ws));
        assert!(g[0].abs() < 1e-15);
    }

    #[test]
    fn surface_range_values() {
        let ws = Workspace::unit(3);
        let trajs = [still(&[0.5, 0.5, 0.8], 2)];
        let hit = RayHit {
            index: 0,
            point: [0.5, 0.5, 0.5],
            range: 0.3,
        };
        let traced = TracedStep {
            rays: vec![Some(FrozenRay {
                ray: 0,
                hit,
                tangent: [0.0; 3],
            })],
        };
        let traces = vec![vec![traced.clone(), traced]];
        let c = ConstraintContext {
            traces: Some(&traces),
            rays: 1,
            ..ctx(&trajs, &ws)
        };
        let g = constraint_eval(&Constraint::SurfaceRange { h2: 0.5, h3: 0.1 }, &c);
        assert_eq!(g.len(), 4);
        assert!((g[0] + 0.2).abs() < 1e-12 && (g[1] + 0.2).abs() < 1e-12);
        assert!(g.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn box_and_interior_values() {
        let ws = Workspace::unit(2);
        let trajs = [still(&[0.05, 0.5, 0.4], 1)];
        let c = ctx(&trajs, &ws);
        let g = constraint_eval(
            &Constraint::StateBox {
                bounds: vec![None, None, Some([0.1, 0.5])],
            },
            &c,
        );
        assert_eq!(g.len(), 2);
        assert!((g[0] + 0.3).abs() < 1e-12 && (g[1] + 0.1).abs() < 1e-12);

        let model = FootprintModel::altitude_disk(0.25);
        let proj = Projection::with_altitude();
        let c = ConstraintContext {
            footprint: Some((&model, &proj)),
            ..c
        };
        let g = constraint_eval(&Constraint::FootprintInterior, &c);
        // radius 0.1 around x = 0.05 pokes 0.05 out of the left edge
        assert!((g[0] - 0.05).abs() < 1e-12);
        assert_eq!(max_violation(&g), g[0]);
        assert_eq!(max_violation(&[]), 0.0);
    }
}
