//! Discrete-time integrator models, rollouts and step linearizations.
//!
//! Both models are stepped with explicit Euler, which is exact for the
//! single integrator under piecewise-constant controls.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// State is a position, control is a velocity.
    SingleIntegrator,
    /// State is position then velocity, control is an acceleration.
    DoubleIntegrator,
}

/// Closed interval `[lo, hi]` on one coordinate.
pub type Bound = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    pub kind: ModelKind,
    /// Number of position coordinates (2 or 3).
    pub pos_dim: usize,
    pub control_bounds: Option<Vec<Bound>>,
    pub state_bounds: Option<Vec<Bound>>,
}

impl DynamicsModel {
    pub fn new(kind: ModelKind, pos_dim: usize) -> Result<Self> {
        if !(1..=3).contains(&pos_dim) {
            return invalid(format!("position dimension must be 1..=3, got {pos_dim}"));
        }
        Ok(Self {
            kind,
            pos_dim,
            control_bounds: None,
            state_bounds: None,
        })
    }

    pub fn with_control_bounds(mut self, bounds: Vec<Bound>) -> Result<Self> {
        check_bounds(&bounds, self.control_dim(), "control")?;
        self.control_bounds = Some(bounds);
        Ok(self)
    }

    pub fn with_state_bounds(mut self, bounds: Vec<Bound>) -> Result<Self> {
        check_bounds(&bounds, self.state_dim(), "state")?;
        self.state_bounds = Some(bounds);
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            ModelKind::SingleIntegrator => self.pos_dim,
            ModelKind::DoubleIntegrator => 2 * self.pos_dim,
        }
    }

    pub fn control_dim(&self) -> usize {
        self.pos_dim
    }

    /// Position part of a state.
    pub fn position<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.pos_dim]
    }

    pub fn step(&self, x: &[f64], u: &[f64], dt: f64) -> Vec<f64> {
        let mut next = x.to_vec();
        self.step_into(x, u, dt, &mut next);
        next
    }

    fn step_into(&self, x: &[f64], u: &[f64], dt: f64, out: &mut [f64]) {
        let d = self.pos_dim;
        match self.kind {
            ModelKind::SingleIntegrator => {
                for i in 0..d {
                    out[i] = x[i] + u[i] * dt;
                }
            }
            ModelKind::DoubleIntegrator => {
                for i in 0..d {
                    out[i] = x[i] + x[d + i] * dt;
                    out[d + i] = x[d + i] + u[i] * dt;
                }
            }
        }
    }

    /// `(A, B)` with `A = dx'/dx` (n x n) and `B = dx'/du` (n x m), row-major.
    pub fn step_jacobians(&self, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let (n, m, d) = (self.state_dim(), self.control_dim(), self.pos_dim);
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n * m];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        match self.kind {
            ModelKind::SingleIntegrator => {
                for i in 0..d {
                    b[i * m + i] = dt;
                }
            }
            ModelKind::DoubleIntegrator => {
                for i in 0..d {
                    a[i * n + d + i] = dt;
                    b[(d + i) * m + i] = dt;
                }
            }
        }
        (a, b)
    }

    /// Applies `A^T v` and `B^T v` for the Euler step without forming the matrices.
    pub(crate) fn pullback(&self, dt: f64, v: &[f64], at_v: &mut [f64], bt_v: &mut [f64]) {
        let d = self.pos_dim;
        at_v.copy_from_slice(v);
        match self.kind {
            ModelKind::SingleIntegrator => {
                for i in 0..d {
                    bt_v[i] = dt * v[i];
                }
            }
            ModelKind::DoubleIntegrator => {
                for i in 0..d {
                    at_v[d + i] += dt * v[i];
                    bt_v[i] = dt * v[d + i];
                }
            }
        }
    }

    /// Integrates `controls` (flat, `N x m`) from `x0`.
    pub fn rollout(&self, x0: &[f64], controls: &[f64], dt: f64) -> Result<Trajectory> {
        let (n, m) = (self.state_dim(), self.control_dim());
        if x0.len() != n {
            return invalid(format!("initial state has {} entries, model needs {n}", x0.len()));
        }
        if controls.len() % m != 0 {
            return invalid("control sequence length is not a multiple of the control dimension");
        }
        if !(dt > 0.0) {
            return invalid("time step must be positive");
        }
        let steps = controls.len() / m;
        let mut states = vec![0.0; (steps + 1) * n];
        states[..n].copy_from_slice(x0);
        for t in 0..steps {
            let (done, rest) = states.split_at_mut((t + 1) * n);
            self.step_into(&done[t * n..], &controls[t * m..(t + 1) * m], dt, &mut rest[..n]);
        }
        Ok(Trajectory {
            state_dim: n,
            control_dim: m,
            dt,
            states,
            controls: controls.to_vec(),
        })
    }
}

fn check_bounds(bounds: &[Bound], dim: usize, what: &str) -> Result<()> {
    if bounds.len() != dim {
        return invalid(format!("{what} bounds need {dim} intervals, got {}", bounds.len()));
    }
    if bounds.iter().any(|[lo, hi]| !(lo <= hi)) {
        return invalid(format!("{what} bounds must satisfy lo <= hi"));
    }
    Ok(())
}

/// States `x_0..x_N` and controls `u_0..u_{N-1}`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state_dim: usize,
    pub control_dim: usize,
    pub dt: f64,
    pub states: Vec<f64>,
    pub controls: Vec<f64>,
}

impl Trajectory {
    /// Wraps states and controls read from elsewhere.
    pub fn from_parts(
        state_dim: usize,
        control_dim: usize,
        dt: f64,
        states: Vec<f64>,
        controls: Vec<f64>,
    ) -> Result<Self> {
        if state_dim == 0 || states.is_empty() || states.len() % state_dim != 0 {
            return invalid("state array does not match the state dimension");
        }
        let steps = states.len() / state_dim - 1;
        if controls.len() != steps * control_dim {
            return invalid("trajectory needs exactly one control per interval");
        }
        if !(dt > 0.0) {
            return invalid("time step must be positive");
        }
        Ok(Self {
            state_dim,
            control_dim,
            dt,
            states,
            controls,
        })
    }

    /// Number of intervals `N`.
    pub fn steps(&self) -> usize {
        self.states.len() / self.state_dim - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    pub fn control(&self, t: usize) -> &[f64] {
        &self.controls[t * self.control_dim..(t + 1) * self.control_dim]
    }
}

/// Maps a robot state onto the workspace (`f_q`) and, for altitude-dependent
/// footprints, onto a height (`f_h`). Both are coordinate selections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Projection {
    /// Workspace dimension; `f_q(x)` is the first `nu` coordinates.
    pub nu: usize,
    pub height_index: Option<usize>,
}

impl Projection {
    pub fn planar(nu: usize) -> Self {
        Self {
            nu,
            height_index: None,
        }
    }

    /// 2D map seen from a robot whose third coordinate is its height.
    pub fn with_altitude() -> Self {
        Self {
            nu: 2,
            height_index: Some(2),
        }
    }

    pub fn point<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.nu]
    }

    pub fn height(&self, x: &[f64]) -> Option<f64> {
        self.height_index.map(|i| x[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_steps() {
        let si = DynamicsModel::new(ModelKind::SingleIntegrator, 3).unwrap();
        let x = si.step(&[0.0, 0.0, 0.3], &[0.1, 0.0, 0.0], 0.1);
        assert!((x[0] - 0.01).abs() < 1e-15 && x[1] == 0.0 && x[2] == 0.3);
        assert_eq!(si.step(&[0.2, 0.4, 0.3], &[0.0; 3], 0.1), vec![0.2, 0.4, 0.3]);

        let di = DynamicsModel::new(ModelKind::DoubleIntegrator, 2).unwrap();
        let x = di.step(&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0], 0.1);
        assert_eq!(&x[..2], &[0.1, 0.0]);
    }

    #[test]
    fn rollout_examples() {
        let si = DynamicsModel::new(ModelKind::SingleIntegrator, 3).unwrap();
        let controls: Vec<f64> = (0..10).flat_map(|_| [0.1, 0.0, 0.0]).collect();
        let traj = si.rollout(&[0.0, 0.0, 0.3], &controls, 0.1).unwrap();
        assert_eq!(traj.steps(), 10);
        let last = traj.state(10);
        assert!((last[0] - 0.1).abs() < 1e-12 && last[2] == 0.3);

        let empty = si.rollout(&[0.1, 0.2, 0.3], &[], 0.1).unwrap();
        assert_eq!(empty.steps(), 0);
        assert_eq!(empty.state(0), &[0.1, 0.2, 0.3]);

        let again = si.rollout(traj.state(0), &traj.controls, traj.dt).unwrap();
        assert_eq!(again, traj);
        assert!(si.rollout(&[0.0; 2], &controls, 0.1).is_err());
        assert!(si.rollout(&[0.0; 3], &controls, 0.0).is_err());
    }

    #[test]
    fn jacobians() {
        let si = DynamicsModel::new(ModelKind::SingleIntegrator, 3).unwrap();
        let (a, b) = si.step_jacobians(0.1);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert_eq!(a[i * 3 + j], id);
                assert_eq!(b[i * 3 + j], 0.1 * id);
            }
        }
        let di = DynamicsModel::new(ModelKind::DoubleIntegrator, 2).unwrap();
        let (a, b) = di.step_jacobians(0.5);
        #[rustfmt::skip]
        let expect_a = [
            1.0, 0.0, 0.5, 0.0,
            0.0, 1.0, 0.0, 0.5,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        assert_eq!(a, expect_a);
        assert_eq!(b, vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn pullback_matches_dense_transpose() {
        let di = DynamicsModel::new(ModelKind::DoubleIntegrator, 3).unwrap();
        let (a, b) = di.step_jacobians(0.2);
        let v: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).cos()).collect();
        let (mut atv, mut btv) = (vec![0.0; 6], vec![0.0; 3]);
        di.pullback(0.2, &v, &mut atv, &mut btv);
        for j in 0..6 {
            let e: f64 = (0..6).map(|i| a[i * 6 + j] * v[i]).sum();
            assert!((atv[j] - e).abs() < 1e-15);
        }
        for j in 0..3 {
            let e: f64 = (0..6).map(|i| b[i * 3 + j] * v[i]).sum();
            assert!((btv[j] - e).abs() < 1e-15);
        }
    }
}
