//! Ergodic and footprint-ergodic metrics with exact gradients.
//!
//! Time integrals use the left-endpoint rule over the `N` intervals of a
//! trajectory, so state `x_N` never enters the metric. The footprint variant
//! replaces each state by its weighted sample set; steps whose set is empty
//! (a cone that misses the surface) are skipped and the time average is taken
//! over the remaining steps.

use crate::dynamics::{Projection, Trajectory};
use crate::error::{invalid, Result};
use crate::footprint::SampleSet;
use crate::infomap::CoeffVector;
use crate::spectral::{BasisScratch, SpectralBasis};

/// Coefficients, metric value and gradient for one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicEval {
    pub coeffs: CoeffVector,
    pub value: f64,
    /// `(N + 1) x n`, row-major.
    pub gradient: Vec<f64>,
}

/// Coefficients of the time-averaged statistics of a point trajectory.
pub fn point_coeffs(traj: &Trajectory, projection: &Projection, basis: &SpectralBasis) -> Result<CoeffVector> {
    let steps = traj.steps();
    if steps == 0 {
        return invalid("trajectory has no intervals");
    }
    let mut acc = vec![0.0; basis.len()];
    let mut scratch = BasisScratch::default();
    let scale = traj.dt / traj.horizon();
    for t in 0..steps {
        basis.accumulate(projection.point(traj.state(t)), scale, &mut acc, &mut scratch);
    }
    Ok(CoeffVector::from_values(basis, acc))
}

fn active_steps(sets: &[SampleSet]) -> usize {
    sets.iter().filter(|s| !s.is_empty()).count()
}

/// Coefficients of the sampled footprint trajectory; one set per interval.
pub fn footprint_coeffs(sets: &[SampleSet], basis: &SpectralBasis) -> Result<CoeffVector> {
    if sets.is_empty() {
        return invalid("no sample sets");
    }
    let mut acc = vec![0.0; basis.len()];
    let active = active_steps(sets);
    if active == 0 {
        return Ok(CoeffVector::from_values(basis, acc));
    }
    let scale = 1.0 / active as f64;
    let mut scratch = BasisScratch::default();
    for set in sets {
        for m in 0..set.len() {
            basis.accumulate(set.point(m), scale * set.weights[m], &mut acc, &mut scratch);
        }
    }
    Ok(CoeffVector::from_values(basis, acc))
}

/// `sum_k Lambda_k (c_k - phi_k)^2`.
pub fn ergodicity(c: &CoeffVector, phi: &CoeffVector, weights: &[f64]) -> Result<f64> {
    if !c.same_basis(phi) || weights.len() != c.len() {
        return invalid("coefficient vectors are on different bases");
    }
    Ok(c.values
        .iter()
        .zip(&phi.values)
        .zip(weights)
        .map(|((a, b), l)| l * (a - b) * (a - b))
        .sum())
}

/// Adds `d/dx_t sum_k a_k c_k` to `grad` (`(N + 1) x n`), where `c` are the
/// footprint coefficients of `sets`.
pub fn pullback_coeffs(sets: &[SampleSet], a: &[f64], basis: &SpectralBasis, grad: &mut [f64]) {
    let active = active_steps(sets);
    if active == 0 {
        return;
    }
    let scale = 1.0 / active as f64;
    let mut scratch = BasisScratch::default();
    for (t, set) in sets.iter().enumerate() {
        let n = set.state_dim;
        let nu = set.nu;
        let row = &mut grad[t * n..(t + 1) * n];
        for m in 0..set.len() {
            let gw = basis.weighted_gradient(set.point(m), a, &mut scratch);
            let jac = set.jacobian(m);
            let s = scale * set.weights[m];
            for o in 0..nu {
                let go = s * gw[o];
                if go == 0.0 {
                    continue;
                }
                for (r, &j) in row.iter_mut().zip(&jac[o * n..(o + 1) * n]) {
                    *r += go * j;
                }
            }
        }
    }
}

/// Gradient of the footprint ergodicity with respect to every state.
pub fn metric_gradient(
    sets: &[SampleSet],
    phi: &CoeffVector,
    basis: &SpectralBasis,
) -> Result<Vec<f64>> {
    let c = footprint_coeffs(sets, basis)?;
    if !phi.matches(basis) {
        return invalid("map coefficients are on a different basis");
    }
    let a: Vec<f64> = c
        .values
        .iter()
        .zip(&phi.values)
        .zip(basis.weights())
        .map(|((c, p), l)| 2.0 * l * (c - p))
        .collect();
    let n = sets[0].state_dim;
    let mut grad = vec![0.0; (sets.len() + 1) * n];
    pullback_coeffs(sets, &a, basis, &mut grad);
    Ok(grad)
}

/// Coefficients, value and gradient in one pass.
pub fn evaluate(sets: &[SampleSet], phi: &CoeffVector, basis: &SpectralBasis) -> Result<ErgodicEval> {
    let coeffs = footprint_coeffs(sets, basis)?;
    let value = ergodicity(&coeffs, phi, basis.weights())?;
    let gradient = metric_gradient(sets, phi, basis)?;
    Ok(ErgodicEval {
        coeffs,
        value,
        gradient,
    })
}

/// Auxiliary accumulator `s_k(t) = integral of (c-rate - phi_k)` with its
/// terminal weight `Q = (2 / T^2) diag(Lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryState {
    pub s: Vec<f64>,
    pub q: Vec<f64>,
    pub elapsed: f64,
}

impl AuxiliaryState {
    pub fn new(basis: &SpectralBasis, horizon: f64) -> Self {
        let q = basis
            .weights()
            .iter()
            .map(|l| 2.0 / (horizon * horizon) * l)
            .collect();
        Self {
            s: vec![0.0; basis.len()],
            q,
            elapsed: 0.0,
        }
    }

    /// Integrates `s' = sum_m w_m F_k(w_m) - phi_k` over one interval.
    pub fn advance(&mut self, set: &SampleSet, phi: &CoeffVector, basis: &SpectralBasis, dt: f64, scratch: &mut BasisScratch) {
        for (s, p) in self.s.iter_mut().zip(&phi.values) {
            *s -= dt * p;
        }
        for m in 0..set.len() {
            basis.accumulate(set.point(m), dt * set.weights[m], &mut self.s, scratch);
        }
        self.elapsed += dt;
    }

    /// `0.5 * s^T Q s`.
    pub fn terminal_value(&self) -> f64 {
        0.5 * self.s.iter().zip(&self.q).map(|(s, q)| q * s * s).sum::<f64>()
    }
}

/// Footprint ergodicity through the auxiliary-state terminal form.
/// Returns `(s(T), 0.5 s(T)^T Q s(T))`.
pub fn terminal_form_metric(
    sets: &[SampleSet],
    dt: f64,
    phi: &CoeffVector,
    basis: &SpectralBasis,
) -> Result<(Vec<f64>, f64)> {
    if sets.is_empty() || !(dt > 0.0) {
        return invalid("terminal form needs at least one interval and dt > 0");
    }
    if !phi.matches(basis) {
        return invalid("map coefficients are on a different basis");
    }
    let horizon = dt * sets.len() as f64;
    let mut aux = AuxiliaryState::new(basis, horizon);
    let mut scratch = BasisScratch::default();
    for set in sets {
        aux.advance(set, phi, basis, dt, &mut scratch);
    }
    let value = aux.terminal_value();
    Ok((aux.s, value))
}

/// Average of per-robot coefficients.
pub fn multi_robot_coeffs(per_robot: &[CoeffVector]) -> Result<CoeffVector> {
    let Some(first) = per_robot.first() else {
        return invalid("no robots");
    };
    if per_robot.iter().any(|c| !c.same_basis(first)) {
        return invalid("robot coefficients are on different bases");
    }
    let inv = 1.0 / per_robot.len() as f64;
    let mut out = first.clone();
    for (k, v) in out.values.iter_mut().enumerate() {
        *v = per_robot.iter().map(|c| c.values[k]).sum::<f64>() * inv;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DynamicsModel, ModelKind};
    use crate::footprint::{FootprintModel, FootprintSampler};
    use crate::spectral::Workspace;

    fn basis() -> SpectralBasis {
        SpectralBasis::new(Workspace::unit(2), &[10, 10]).unwrap()
    }

    fn uniform_phi(b: &SpectralBasis) -> CoeffVector {
        let mut v = vec![0.0; b.len()];
        v[0] = 1.0;
        CoeffVector::from_values(b, v)
    }

    fn stationary(q: [f64; 3], steps: usize) -> Trajectory {
        DynamicsModel::new(ModelKind::SingleIntegrator, 3)
            .unwrap()
            .rollout(&q, &vec![0.0; 3 * steps], 0.1)
            .unwrap()
    }

    fn sets_for(traj: &Trajectory, sampler: &FootprintSampler) -> Vec<SampleSet> {
        (0..traj.steps()).map(|t| sampler.realize(traj.state(t)).unwrap()).collect()
    }

    #[test]
    fn stationary_point_coeffs() {
        let b = basis();
        let traj = stationary([0.3, 0.8, 0.2], 12);
        let c = point_coeffs(&traj, &Projection::with_altitude(), &b).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-12);
        for (k, v) in b.indices().iter().zip(&c.values) {
            assert!((v - b.eval(k, &[0.3, 0.8])).abs() < 1e-12);
        }
    }

    #[test]
    fn point_footprint_matches_point_coeffs() {
        let b = basis();
        let proj = Projection::with_altitude();
        let model = DynamicsModel::new(ModelKind::SingleIntegrator, 3).unwrap();
        let controls: Vec<f64> = (0..30).map(|i| 0.05 * ((i as f64) * 1.3).sin()).collect();
        let traj = model.rollout(&[0.4, 0.5, 0.3], &controls, 0.1).unwrap();
        let sampler = FootprintSampler::new(FootprintModel::Point, proj, Workspace::unit(2)).unwrap();
        let c1 = point_coeffs(&traj, &proj, &b).unwrap();
        let c2 = footprint_coeffs(&sets_for(&traj, &sampler), &b).unwrap();
        for (a, c) in c1.values.iter().zip(&c2.values) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn ergodicity_examples() {
        let b = basis();
        let phi = uniform_phi(&b);
        assert_eq!(ergodicity(&phi, &phi, b.weights()).unwrap(), 0.0);

        let q = [0.3, 0.6];
        let traj = stationary([q[0], q[1], 0.3], 5);
        let c = point_coeffs(&traj, &Projection::with_altitude(), &b).unwrap();
        let oracle: f64 = b
            .indices()
            .iter()
            .skip(1)
            .map(|k| crate::spectral::weight(k, 2) * b.eval(k, &q).powi(2))
            .sum();
        let e = ergodicity(&c, &phi, b.weights()).unwrap();
        assert!((e - oracle).abs() < 1e-12);

        let doubled: Vec<f64> = b.weights().iter().map(|w| 2.0 * w).collect();
        assert_eq!(ergodicity(&c, &phi, &doubled).unwrap(), 2.0 * e);

        let other = SpectralBasis::new(Workspace::unit(2), &[3, 3]).unwrap();
        assert!(ergodicity(&c, &uniform_phi(&other), b.weights()).is_err());
    }

    #[test]
    fn gradient_vanishes_at_match() {
        let b = basis();
        let sampler =
            FootprintSampler::new(FootprintModel::altitude_disk(0.25), Projection::with_altitude(), Workspace::unit(2))
                .unwrap();
        let traj = stationary([0.4, 0.6, 0.3], 8);
        let sets = sets_for(&traj, &sampler);
        let c = footprint_coeffs(&sets, &b).unwrap();
        let g = metric_gradient(&sets, &c, &b).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn centered_point_gradient_vanishes_by_symmetry() {
        let b = basis();
        let sampler = FootprintSampler::new(FootprintModel::Point, Projection::with_altitude(), Workspace::unit(2)).unwrap();
        let traj = stationary([0.5, 0.5, 0.3], 4);
        let g = metric_gradient(&sets_for(&traj, &sampler), &uniform_phi(&b), &b).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10), "{g:?}");
    }

    #[test]
    fn terminal_form_examples() {
        let b = basis();
        let sampler =
            FootprintSampler::new(FootprintModel::altitude_disk(0.25), Projection::with_altitude(), Workspace::unit(2))
                .unwrap();
        let phi = uniform_phi(&b);
        let traj = stationary([0.2, 0.7, 0.35], 1);
        let sets = sets_for(&traj, &sampler);
        let (s, v) = terminal_form_metric(&sets, 0.1, &phi, &b).unwrap();
        assert!(v.is_finite());
        let e = ergodicity(&footprint_coeffs(&sets, &b).unwrap(), &phi, b.weights()).unwrap();
        assert!((v - e).abs() < 1e-10);
        assert_eq!(s.len(), b.len());
        let aux = AuxiliaryState::new(&b, 1.0);
        assert!(aux.s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn multi_robot_examples() {
        let b = basis();
        let c1 = CoeffVector::from_values(&b, (0..100).map(|i| i as f64).collect());
        let c2 = CoeffVector::from_values(&b, (0..100).map(|i| (i * i) as f64).collect());
        let same = multi_robot_coeffs(&[c1.clone(), c1.clone(), c1.clone()]).unwrap();
        assert_eq!(same, c1);
        let avg = multi_robot_coeffs(&[c1.clone(), c2.clone()]).unwrap();
        for k in 0..100 {
            assert_eq!(avg.values[k], 0.5 * (c1.values[k] + c2.values[k]));
        }
        assert!(multi_robot_coeffs(&[]).is_err());
    }
}
