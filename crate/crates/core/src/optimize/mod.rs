//! Direct-transcription planner: single shooting over the control sequence,
//! an augmented-Lagrangian outer loop for the inequality constraints and
//! L-BFGS for each inner problem.
//!
//! The decision vector stacks every robot's controls, robot-major then
//! step-major. Gradients are exact for the discrete problem: state gradients
//! from the metric and the constraints are swept backward through the Euler
//! steps.

pub mod constraints;
pub mod lbfgs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsModel, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::footprint::{FootprintSampler, SampleSet};
use crate::infomap::CoeffVector;
use crate::metric::{ergodicity, footprint_coeffs, multi_robot_coeffs, pullback_coeffs};
use crate::spectral::SpectralBasis;
use crate::surface3d::{SurfaceSampler, TracedStep};

pub use constraints::{constraint_eval, max_violation, Constraint, ConstraintContext, ConstraintSet, Var};
pub use lbfgs::{InnerStatus, LbfgsSettings, StepRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct Robot {
    pub dynamics: DynamicsModel,
    pub x0: Vec<f64>,
}

/// How states are turned into workspace samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Sensor {
    Planar(FootprintSampler),
    Surface(SurfaceSampler),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_outer: usize,
    pub max_inner: usize,
    pub mu0: f64,
    pub mu_growth: f64,
    pub mu_max: f64,
    pub multiplier_max: f64,
    pub grad_tol: f64,
    pub violation_tol: f64,
    pub memory: usize,
    /// Initial controls are uniform within this fraction of the control range.
    pub init_fraction: f64,
    pub stall_tol: f64,
    pub stall_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_outer: 20,
            max_inner: 200,
            mu0: 10.0,
            mu_growth: 5.0,
            mu_max: 1e6,
            multiplier_max: 1e8,
            grad_tol: 1e-6,
            violation_tol: 1e-3,
            memory: 10,
            init_fraction: 0.05,
            stall_tol: 1e-10,
            stall_iters: 5,
        }
    }
}

/// One planning instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub robots: Vec<Robot>,
    pub sensor: Sensor,
    pub basis: SpectralBasis,
    pub phi: CoeffVector,
    /// Diagonal of the control weight `R`.
    pub control_weights: Vec<f64>,
    pub steps: usize,
    pub dt: f64,
    pub constraints: ConstraintSet,
    pub settings: SolverSettings,
    pub seed: u64,
}

/// Surface hits frozen for one outer iteration; empty for planar sensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Linearization {
    pub traces: Option<Vec<Vec<TracedStep>>>,
}

/// Everything computed at one control vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub trajectories: Vec<Trajectory>,
    pub coeffs: CoeffVector,
    pub ergodicity: f64,
    pub control_cost: f64,
    pub constraints: Vec<f64>,
    /// Objective plus augmented-Lagrangian terms (objective alone without multipliers).
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub ergodicity: f64,
    pub control_cost: f64,
    pub max_constraint_violation: f64,
    pub al_value: f64,
    pub mu: f64,
    pub inner_iterations: usize,
    pub inner_status: InnerStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub trajectories: Vec<Trajectory>,
    pub controls: Vec<f64>,
    pub ergodicity: f64,
    pub control_cost: f64,
    pub violation: f64,
    pub converged: bool,
    pub log: Vec<IterationRecord>,
    /// Accepted inner steps over the whole solve.
    pub steps: Vec<StepRecord>,
    pub evaluations: usize,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() {
            return invalid("at least one robot is required");
        }
        if self.steps == 0 || !(self.dt > 0.0) {
            return invalid("horizon must be positive");
        }
        let m = self.robots[0].dynamics.control_dim();
        for r in &self.robots {
            if r.dynamics.control_dim() != m {
                return invalid("all robots need the same control dimension");
            }
            if r.x0.len() != r.dynamics.state_dim() {
                return invalid("initial state does not match the dynamics");
            }
        }
        if self.control_weights.len() != m || self.control_weights.iter().any(|w| !(*w > 0.0)) {
            return invalid("control weights must be positive, one per control");
        }
        if !self.phi.matches(&self.basis) {
            return invalid("map coefficients are on a different basis");
        }
        match &self.sensor {
            Sensor::Planar(s) if s.workspace.dim() != self.basis.dim() => {
                invalid("footprint workspace and basis differ in dimension")
            }
            Sensor::Surface(_) if self.basis.dim() != 3 => invalid("surface sensors need a 3D basis"),
            Sensor::Surface(_) if self.robots.iter().any(|r| r.dynamics.pos_dim != 3) => {
                invalid("surface sensors need 3D robot positions")
            }
            _ => Ok(()),
        }
    }

    pub fn control_dim(&self) -> usize {
        self.robots[0].dynamics.control_dim()
    }

    /// Length of the stacked control vector.
    pub fn decision_len(&self) -> usize {
        self.robots.len() * self.steps * self.control_dim()
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn rollout(&self, controls: &[f64]) -> Result<Vec<Trajectory>> {
        if controls.len() != self.decision_len() {
            return invalid(format!(
                "expected {} control values, got {}",
                self.decision_len(),
                controls.len()
            ));
        }
        let per = self.steps * self.control_dim();
        self.robots
            .iter()
            .enumerate()
            .map(|(i, r)| r.dynamics.rollout(&r.x0, &controls[i * per..(i + 1) * per], self.dt))
            .collect()
    }

    /// Traces surface hits along the trajectories of `controls`.
    pub fn linearize(&self, controls: &[f64]) -> Result<Linearization> {
        let Sensor::Surface(s) = &self.sensor else {
            return Ok(Linearization::default());
        };
        let trajs = self.rollout(controls)?;
        let traces = trajs
            .iter()
            .map(|tr| (0..self.steps).map(|t| s.trace(tr.state(t))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Linearization { traces: Some(traces) })
    }

    /// Sample sets for every robot and interval.
    pub fn sample_sets(&self, trajs: &[Trajectory], lin: &Linearization) -> Result<Vec<Vec<SampleSet>>> {
        trajs
            .iter()
            .enumerate()
            .map(|(r, tr)| {
                (0..self.steps)
                    .map(|t| match (&self.sensor, &lin.traces) {
                        (Sensor::Planar(s), _) => s.realize(tr.state(t)),
                        (Sensor::Surface(s), Some(traces)) => s.realize(&traces[r][t], tr.state(t)),
                        (Sensor::Surface(_), None) => Err(Error::InvalidState("surface sensor used without traced hits".into())),
                    })
                    .collect()
            })
            .collect()
    }

    fn constraint_context<'a>(&'a self, trajs: &'a [Trajectory], lin: &'a Linearization) -> ConstraintContext<'a> {
        let (footprint, workspace, rays) = match &self.sensor {
            Sensor::Planar(s) => (Some((&s.model, &s.projection)), &s.workspace, 0),
            Sensor::Surface(s) => (None, &s.workspace, s.rays),
        };
        ConstraintContext {
            trajectories: trajs,
            pos_dim: self.robots[0].dynamics.pos_dim,
            traces: lin.traces.as_deref(),
            footprint,
            workspace,
            rays,
        }
    }

    /// Objective, constraint values and optionally the gradient of the
    /// augmented Lagrangian with multipliers `lambda` and penalty `mu`.
    pub fn evaluate(
        &self,
        controls: &[f64],
        lin: &Linearization,
        al: Option<(&[f64], f64)>,
        want_gradient: bool,
    ) -> Result<Evaluation> {
        let trajs = self.rollout(controls)?;
        let sets = self.sample_sets(&trajs, lin)?;
        let per_robot = sets
            .iter()
            .map(|s| footprint_coeffs(s, &self.basis))
            .collect::<Result<Vec<_>>>()?;
        let coeffs = multi_robot_coeffs(&per_robot)?;
        let erg = ergodicity(&coeffs, &self.phi, self.basis.weights())?;

        let m = self.control_dim();
        let control_cost: f64 = self.dt
            * controls
                .chunks(m)
                .map(|u| u.iter().zip(&self.control_weights).map(|(v, w)| w * v * v).sum::<f64>())
                .sum::<f64>();

        let ctx = self.constraint_context(&trajs, lin);
        let g = self.constraints.eval(&ctx);
        let mut value = erg + control_cost;
        if let Some((lambda, mu)) = al {
            if lambda.len() != g.len() {
                return invalid(format!("expected {} multipliers, got {}", g.len(), lambda.len()));
            }
            if !(mu > 0.0) {
                return invalid("penalty must be positive");
            }
            value += g
                .iter()
                .zip(lambda)
                .map(|(gj, lj)| ((lj + mu * gj).max(0.0).powi(2) - lj * lj) / (2.0 * mu))
                .sum::<f64>();
        }

        let gradient = if want_gradient {
            Some(self.gradient(&trajs, &sets, &coeffs, controls, &ctx, al))
        } else {
            None
        };
        Ok(Evaluation {
            trajectories: trajs,
            coeffs,
            ergodicity: erg,
            control_cost,
            constraints: g,
            value,
            gradient,
        })
    }

    fn gradient(
        &self,
        trajs: &[Trajectory],
        sets: &[Vec<SampleSet>],
        coeffs: &CoeffVector,
        controls: &[f64],
        ctx: &ConstraintContext,
        al: Option<(&[f64], f64)>,
    ) -> Vec<f64> {
        let nr = self.robots.len();
        let a: Vec<f64> = coeffs
            .values
            .iter()
            .zip(&self.phi.values)
            .zip(self.basis.weights())
            .map(|((c, p), l)| 2.0 * l * (c - p) / nr as f64)
            .collect();
        let mut state_grads: Vec<Vec<f64>> = trajs.iter().map(|t| vec![0.0; t.states.len()]).collect();
        for (r, s) in sets.iter().enumerate() {
            pullback_coeffs(s, &a, &self.basis, &mut state_grads[r]);
        }
        let m = self.control_dim();
        let per = self.steps * m;
        let mut grad: Vec<f64> = controls
            .iter()
            .enumerate()
            .map(|(i, u)| 2.0 * self.dt * self.control_weights[i % m] * u)
            .collect();
        if let Some((lambda, mu)) = al {
            self.constraints.for_each_gradient(ctx, &mut |j, gj, var, d| {
                let w = (lambda[j] + mu * gj).max(0.0);
                if w == 0.0 {
                    return;
                }
                match var {
                    Var::State { robot, step, index } => {
                        let n = trajs[robot].state_dim;
                        state_grads[robot][step * n + index] += w * d;
                    }
                    Var::Control { robot, step, index } => grad[robot * per + step * m + index] += w * d,
                }
            });
        }
        for (r, robot) in self.robots.iter().enumerate() {
            let n = robot.dynamics.state_dim();
            let sg = &state_grads[r];
            let mut delta = sg[self.steps * n..].to_vec();
            let mut at = vec![0.0; n];
            let mut bt = vec![0.0; m];
            for t in (0..self.steps).rev() {
                robot.dynamics.pullback(self.dt, &delta, &mut at, &mut bt);
                for i in 0..m {
                    grad[r * per + t * m + i] += bt[i];
                }
                for i in 0..n {
                    delta[i] = at[i] + sg[t * n + i];
                }
            }
        }
        grad
    }

    /// `E + dt sum u^T R u`, with surface hits traced at `controls`.
    pub fn objective(&self, controls: &[f64]) -> Result<f64> {
        let lin = self.linearize(controls)?;
        Ok(self.evaluate(controls, &lin, None, false)?.value)
    }

    /// Augmented-Lagrangian value and gradient with surface hits frozen at
    /// `controls`.
    pub fn al_value_and_grad(&self, controls: &[f64], multipliers: &[f64], mu: f64) -> Result<(f64, Vec<f64>)> {
        let lin = self.linearize(controls)?;
        self.al_value_and_grad_frozen(controls, &lin, multipliers, mu)
    }

    pub fn al_value_and_grad_frozen(
        &self,
        controls: &[f64],
        lin: &Linearization,
        multipliers: &[f64],
        mu: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(controls, lin, Some((multipliers, mu)), true)?;
        Ok((e.value, e.gradient.unwrap_or_default()))
    }

    /// Number of constraint slots, fixed for a given problem.
    pub fn constraint_count(&self) -> Result<usize> {
        let zeros = vec![0.0; self.decision_len()];
        let lin = self.linearize(&zeros)?;
        Ok(self.evaluate(&zeros, &lin, None, false)?.constraints.len())
    }

    /// Seeded small-amplitude initial controls.
    pub fn initial_controls(&self) -> Vec<f64> {
        let m = self.control_dim();
        let bounds = self.constraints.constraints.iter().find_map(|c| match c {
            Constraint::ControlBox { bounds } => Some(bounds.clone()),
            _ => None,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.decision_len())
            .map(|i| {
                let (lo, hi) = match bounds.as_ref().and_then(|b| b.get(i % m).copied().flatten()) {
                    Some([lo, hi]) => (lo, hi),
                    None => (-1.0, 1.0),
                };
                let center = 0.0f64.clamp(lo, hi);
                let amp = self.settings.init_fraction * (hi - lo);
                center + amp * rng.gen_range(-1.0..=1.0)
            })
            .collect()
    }
}

/// Metrics of given trajectories, with surface hits traced along them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assessment {
    pub ergodicity: f64,
    /// Ergodicity of the positions alone, ignoring the footprint.
    pub point_ergodicity: f64,
    pub control_cost: f64,
    pub violation: f64,
    pub min_pairwise_distance: Option<f64>,
    #[serde(skip)]
    pub coeffs: CoeffVector,
}

impl ProblemSpec {
    /// Recomputes every reported metric from trajectories, e.g. ones read back
    /// from disk.
    pub fn assess(&self, trajs: &[Trajectory]) -> Result<Assessment> {
        if trajs.len() != self.robots.len() {
            return invalid(format!("expected {} robots, got {}", self.robots.len(), trajs.len()));
        }
        for (tr, r) in trajs.iter().zip(&self.robots) {
            if tr.steps() != self.steps || tr.state_dim != r.dynamics.state_dim() || tr.control_dim != self.control_dim() {
                return invalid("trajectory dimensions do not match the problem");
            }
        }
        let lin = match &self.sensor {
            Sensor::Planar(_) => Linearization::default(),
            Sensor::Surface(s) => Linearization {
                traces: Some(
                    trajs
                        .iter()
                        .map(|tr| (0..self.steps).map(|t| s.trace(tr.state(t))).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?,
                ),
            },
        };
        let sets = self.sample_sets(trajs, &lin)?;
        let per_robot = sets
            .iter()
            .map(|s| footprint_coeffs(s, &self.basis))
            .collect::<Result<Vec<_>>>()?;
        let coeffs = multi_robot_coeffs(&per_robot)?;
        let erg = ergodicity(&coeffs, &self.phi, self.basis.weights())?;
        let projection = match &self.sensor {
            Sensor::Planar(s) => s.projection,
            Sensor::Surface(_) => crate::dynamics::Projection::planar(3),
        };
        let point = trajs
            .iter()
            .map(|tr| crate::metric::point_coeffs(tr, &projection, &self.basis))
            .collect::<Result<Vec<_>>>()?;
        let point_erg = ergodicity(&multi_robot_coeffs(&point)?, &self.phi, self.basis.weights())?;
        let control_cost: f64 = trajs
            .iter()
            .map(|tr| {
                self.dt
                    * tr.controls
                        .chunks(tr.control_dim)
                        .map(|u| u.iter().zip(&self.control_weights).map(|(v, w)| w * v * v).sum::<f64>())
                        .sum::<f64>()
            })
            .sum();
        let g = self.constraints.eval(&self.constraint_context(trajs, &lin));
        let d = self.robots[0].dynamics.pos_dim;
        let mut min_dist: Option<f64> = None;
        for i in 0..trajs.len() {
            for j in i + 1..trajs.len() {
                for t in 1..=self.steps {
                    let (a, b) = (&trajs[i].state(t)[..d], &trajs[j].state(t)[..d]);
                    let dist = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                    min_dist = Some(min_dist.map_or(dist, |m| m.min(dist)));
                }
            }
        }
        Ok(Assessment {
            ergodicity: erg,
            point_ergodicity: point_erg,
            control_cost,
            violation: max_violation(&g),
            min_pairwise_distance: min_dist,
            coeffs,
        })
    }
}

/// Solves from the seeded initial controls.
pub fn solve(spec: &ProblemSpec) -> Result<SolveResult> {
    solve_from(spec, &spec.initial_controls())
}

pub fn solve_from(spec: &ProblemSpec, init: &[f64]) -> Result<SolveResult> {
    spec.validate()?;
    let st = spec.settings;
    let inner_settings = LbfgsSettings {
        memory: st.memory,
        max_iters: st.max_inner,
        grad_tol: st.grad_tol,
        stall_tol: st.stall_tol,
        stall_iters: st.stall_iters,
        ..LbfgsSettings::default()
    };
    let mut controls = init.to_vec();
    let mut lin = spec.linearize(&controls)?;
    let count = spec.evaluate(&controls, &lin, None, false)?.constraints.len();
    let mut lambda = vec![0.0; count];
    let mut mu = st.mu0;
    let mut prev_violation = f64::INFINITY;
    let mut log = Vec::new();
    let mut steps = Vec::new();
    let mut evaluations = 0;
    let mut converged = false;

    for outer in 0..st.max_outer.max(1) {
        let inner = lbfgs::minimize(
            |u| spec.al_value_and_grad_frozen(u, &lin, &lambda, mu),
            &controls,
            &inner_settings,
        )?;
        evaluations += inner.evaluations;
        steps.extend_from_slice(&inner.steps);
        controls = inner.x;
        let e = spec.evaluate(&controls, &lin, None, false)?;
        let violation = max_violation(&e.constraints);
        let grad_inf = inner.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        log.push(IterationRecord {
            iteration: outer,
            ergodicity: e.ergodicity,
            control_cost: e.control_cost,
            max_constraint_violation: violation,
            al_value: inner.f,
            mu,
            inner_iterations: inner.iterations,
            inner_status: inner.status,
        });
        let settled = grad_inf < st.grad_tol || inner.status == InnerStatus::Stalled;
        let surface = lin.traces.is_some();
        if violation < st.violation_tol && settled && !surface {
            converged = true;
            break;
        }
        for (l, gj) in lambda.iter_mut().zip(&e.constraints) {
            *l = (*l + mu * gj).clamp(0.0, st.multiplier_max);
        }
        // grow the penalty only while a meaningful violation fails to shrink
        if violation > 0.1 * st.violation_tol && violation > 0.25 * prev_violation {
            mu = (mu * st.mu_growth).min(st.mu_max);
        }
        prev_violation = violation;
        if surface {
            let fresh = spec.linearize(&controls)?;
            let changed = fresh != lin;
            lin = fresh;
            // re-trace and stop once the hit pattern has settled
            if !changed && violation < st.violation_tol && settled {
                converged = true;
                break;
            }
        }
    }

    let final_lin = spec.linearize(&controls)?;
    let e = spec.evaluate(&controls, &final_lin, None, false)?;
    if !e.value.is_finite() {
        return Err(Error::SolverFailure("final objective is not finite".into()));
    }
    Ok(SolveResult {
        trajectories: e.trajectories,
        controls,
        ergodicity: e.ergodicity,
        control_cost: e.control_cost,
        violation: max_violation(&e.constraints),
        converged,
        log,
        steps,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ModelKind, Projection};
    use crate::footprint::FootprintModel;
    use crate::infomap::{map_coeffs, InfoMap, GridMap};
    use crate::spectral::Workspace;

    fn uniform_spec(robots: usize, steps: usize) -> ProblemSpec {
        let ws = Workspace::unit(2);
        let basis = SpectralBasis::new(ws.clone(), &[6, 6]).unwrap();
        let map = InfoMap::Grid(GridMap::filled(ws.clone(), vec![8, 8], 1.0).unwrap());
        let phi = map_coeffs(&map, &basis).unwrap();
        let sampler = FootprintSampler::new(FootprintModel::Point, Projection::planar(2), ws).unwrap();
        let robot = Robot {
            dynamics: DynamicsModel::new(ModelKind::SingleIntegrator, 2).unwrap(),
            x0: vec![0.5, 0.5],
        };
        ProblemSpec {
            robots: vec![robot; robots],
            sensor: Sensor::Planar(sampler),
            basis,
            phi,
            control_weights: vec![1e-3, 1e-3],
            steps,
            dt: 0.1,
            constraints: ConstraintSet::default(),
            settings: SolverSettings::default(),
            seed: 7,
        }
    }

    #[test]
    fn objective_at_rest_matches_closed_form() {
        let spec = uniform_spec(1, 10);
        let zeros = vec![0.0; spec.decision_len()];
        let v = spec.objective(&zeros).unwrap();
        let expect: f64 = spec
            .basis
            .indices()
            .iter()
            .zip(spec.basis.weights())
            .skip(1)
            .map(|(k, l)| l * spec.basis.eval(k, &[0.5, 0.5]).powi(2))
            .sum();
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn copies_share_ergodicity() {
        let one = uniform_spec(1, 10);
        let three = uniform_spec(3, 10);
        let u = one.initial_controls();
        let u3: Vec<f64> = u.iter().cycle().take(3 * u.len()).cloned().collect();
        let e1 = one.evaluate(&u, &Linearization::default(), None, false).unwrap();
        let e3 = three.evaluate(&u3, &Linearization::default(), None, false).unwrap();
        assert!((e1.ergodicity - e3.ergodicity).abs() < 1e-14);
    }

    #[test]
    fn doubling_r_doubles_control_cost_only() {
        let mut spec = uniform_spec(1, 10);
        let u = spec.initial_controls();
        let a = spec.evaluate(&u, &Linearization::default(), None, false).unwrap();
        spec.control_weights.iter_mut().for_each(|w| *w *= 2.0);
        let b = spec.evaluate(&u, &Linearization::default(), None, false).unwrap();
        assert_eq!(a.ergodicity, b.ergodicity);
        assert!((b.control_cost - 2.0 * a.control_cost).abs() < 1e-18);
    }

    #[test]
    fn inactive_constraints_leave_the_objective() {
        let mut spec = uniform_spec(1, 10);
        spec.constraints = ConstraintSet::new(vec![Constraint::ControlBox {
            bounds: vec![Some([-5.0, 5.0]); 2],
        }]);
        let u = spec.initial_controls();
        let n = spec.constraint_count().unwrap();
        let (v, g) = spec.al_value_and_grad(&u, &vec![0.0; n], 10.0).unwrap();
        let e = spec.evaluate(&u, &Linearization::default(), None, true).unwrap();
        assert_eq!(v, e.value);
        assert_eq!(g, e.gradient.unwrap());
    }

    #[test]
    fn violated_box_adds_penalty_gradient() {
        let mut spec = uniform_spec(1, 2);
        spec.constraints = ConstraintSet::new(vec![Constraint::ControlBox {
            bounds: vec![Some([-0.1, 0.1]), None],
        }]);
        let u = vec![0.3, 0.0, 0.0, 0.0];
        let n = spec.constraint_count().unwrap();
        let lambda = vec![0.0; n];
        let (_, g_al) = spec.al_value_and_grad(&u, &lambda, 10.0).unwrap();
        let e = spec.evaluate(&u, &Linearization::default(), None, true).unwrap();
        let g0 = e.gradient.unwrap();
        // g = u - hi = 0.2 on the violated upper bound
        assert!((g_al[0] - g0[0] - 10.0 * 0.2).abs() < 1e-12);
        assert_eq!(g_al[1], g0[1]);
    }

    #[test]
    fn solve_is_deterministic_and_descends() {
        let mut spec = uniform_spec(1, 20);
        spec.settings.max_inner = 50;
        spec.settings.max_outer = 2;
        let a = solve(&spec).unwrap();
        let b = solve(&spec).unwrap();
        assert_eq!(a, b);
        let zero = spec.objective(&vec![0.0; spec.decision_len()]).unwrap();
        assert!(a.ergodicity < zero);
        assert!(a.steps.iter().all(|s| s.satisfies_armijo(1e-4)));
    }
}
