use ergodic_footprint::dynamics::{DynamicsModel, ModelKind, Projection, Trajectory};
use ergodic_footprint::footprint::{AxisPolicy, FootprintModel, FootprintSampler, SampleSet};
use ergodic_footprint::infomap::{grid_coeffs, map_coeffs, normalize_map, reconstruct, CoeffVector, GaussianComponent, GridMap, InfoMap};
use ergodic_footprint::metric::{
    ergodicity, footprint_coeffs, metric_gradient, multi_robot_coeffs, point_coeffs, terminal_form_metric,
};
use ergodic_footprint::spectral::{SpectralBasis, Workspace};
use ergodic_footprint::surface3d::{synthetic_cloud, SurfaceSampler};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn basis2(k: usize) -> SpectralBasis {
    SpectralBasis::new(Workspace::unit(2), &[k, k]).unwrap()
}

fn random_map(rng: &mut ChaCha8Rng) -> InfoMap {
    let components = (0..3)
        .map(|_| GaussianComponent {
            weight: rng.gen_range(0.2..1.0),
            mean: vec![rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)],
            cov: vec![rng.gen_range(0.005..0.05), rng.gen_range(0.005..0.05)],
        })
        .collect();
    normalize_map(&InfoMap::gaussian_mixture(Workspace::unit(2), components).unwrap()).unwrap()
}

/// Drone trajectory kept well inside the unit square.
fn random_drone(rng: &mut ChaCha8Rng, steps: usize) -> Trajectory {
    let model = DynamicsModel::new(ModelKind::SingleIntegrator, 3).unwrap();
    let x0 = [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7), rng.gen_range(0.2..0.4)];
    let u: Vec<f64> = (0..3 * steps)
        .map(|i| if i % 3 == 2 { rng.gen_range(-0.1..0.1) } else { rng.gen_range(-0.15..0.15) })
        .collect();
    model.rollout(&x0, &u, 0.1).unwrap()
}

fn sets_of(sampler: &FootprintSampler, states: &[f64], n: usize, steps: usize) -> Vec<SampleSet> {
    (0..steps).map(|t| sampler.realize(&states[t * n..(t + 1) * n]).unwrap()).collect()
}

fn footprint_value(sampler: &FootprintSampler, states: &[f64], n: usize, steps: usize, phi: &CoeffVector, basis: &SpectralBasis) -> f64 {
    let c = footprint_coeffs(&sets_of(sampler, states, n, steps), basis).unwrap();
    ergodicity(&c, phi, basis.weights()).unwrap()
}

/// Max-abs error relative to the largest gradient entry.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let err = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    err / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn metric_gradient_matches_central_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = basis2(10);
        let phi = map_coeffs(&random_map(&mut rng), &basis).unwrap();
        let sampler = FootprintSampler::new(FootprintModel::altitude_disk(0.25), Projection::with_altitude(), Workspace::unit(2)).unwrap();
        let traj = random_drone(&mut rng, 20);
        let sets = sets_of(&sampler, &traj.states, 3, 20);
        prop_assume!(sets.iter().all(|s| !s.any_clamped()));
        let grad = metric_gradient(&sets, &phi, &basis).unwrap();
        let h = 1e-6;
        let mut fd = vec![0.0; grad.len()];
        for i in 0..traj.states.len() {
            let mut p = traj.states.clone();
            let mut m = traj.states.clone();
            p[i] += h;
            m[i] -= h;
            fd[i] = (footprint_value(&sampler, &p, 3, 20, &phi, &basis) - footprint_value(&sampler, &m, 3, 20, &phi, &basis)) / (2.0 * h);
        }
        prop_assert!(rel_err(&grad, &fd) < 1e-5, "{}", rel_err(&grad, &fd));
    }

    #[test]
    fn terminal_form_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = basis2(8);
        let phi = map_coeffs(&random_map(&mut rng), &basis).unwrap();
        let sampler = FootprintSampler::new(FootprintModel::altitude_disk(0.25), Projection::with_altitude(), Workspace::unit(2)).unwrap();
        let traj = random_drone(&mut rng, 30);
        let sets = sets_of(&sampler, &traj.states, 3, 30);
        let direct = ergodicity(&footprint_coeffs(&sets, &basis).unwrap(), &phi, basis.weights()).unwrap();
        let (s, value) = terminal_form_metric(&sets, traj.dt, &phi, &basis).unwrap();
        prop_assert!((direct - value).abs() < 1e-10);
        prop_assert_eq!(s.len(), basis.len());
    }

    #[test]
    fn ergodicity_nonnegative_and_zero_at_match(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = basis2(6);
        let a = map_coeffs(&random_map(&mut rng), &basis).unwrap();
        let b = map_coeffs(&random_map(&mut rng), &basis).unwrap();
        prop_assert!(ergodicity(&a, &b, basis.weights()).unwrap() > 0.0);
        prop_assert_eq!(ergodicity(&a, &a, basis.weights()).unwrap(), 0.0);
    }

    #[test]
    fn single_robot_mean_is_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = basis2(6);
        let traj = random_drone(&mut rng, 15);
        let c = point_coeffs(&traj, &Projection::with_altitude(), &basis).unwrap();
        prop_assert_eq!(multi_robot_coeffs(std::slice::from_ref(&c)).unwrap(), c);
    }

    #[test]
    fn map_coeffs_are_linear(seed in any::<u64>(), alpha in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = basis2(6);
        let ws = Workspace::unit(2);
        let a: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
        let grid = |v: Vec<f64>| InfoMap::Grid(GridMap::new(ws.clone(), vec![8, 8], v).unwrap());
        let ca = map_coeffs(&grid(a), &basis).unwrap();
        let cb = map_coeffs(&grid(b), &basis).unwrap();
        let cm = map_coeffs(&grid(mix), &basis).unwrap();
        for i in 0..basis.len() {
            prop_assert!((cm.values[i] - (alpha * ca.values[i] + cb.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = basis2(10);
        let cells: Vec<f64> = (0..400).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g = InfoMap::Grid(GridMap::new(Workspace::unit(2), vec![20, 20], cells).unwrap());
        let phi = map_coeffs(&g, &basis).unwrap();
        let grid = reconstruct(&phi, &basis, &[16, 16]).unwrap();
        let again = grid_coeffs(&grid, &basis).unwrap();
        for i in 0..basis.len() {
            prop_assert!((again.values[i] - phi.values[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn surface_hits_are_rigid_and_snapped(dx in -0.1f64..0.1, dy in -0.1f64..0.1, dz in -0.1f64..0.1) {
        let ws = Workspace::unit(3);
        let cloud = synthetic_cloud("sphere_handle", &ws).unwrap();
        let s = SurfaceSampler::new(cloud.clone(), ws.clone(), 0.3, 12, AxisPolicy::ObjectFacing).unwrap();
        let p = [0.2, 0.3, 0.6];
        let traced = s.trace(&p).unwrap();
        for hit in traced.hits() {
            prop_assert_eq!(cloud.point(hit.hit.index), &hit.hit.point[..]);
        }
        let set = s.realize(&traced, &p).unwrap();
        if !set.is_empty() {
            prop_assert!((set.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let moved = SurfaceSampler { cloud: cloud.translated([dx, dy, dz]), ..s.clone() };
        let q = [p[0] + dx, p[1] + dy, p[2] + dz];
        let traced2 = moved.trace(&q).unwrap();
        prop_assert_eq!(traced.hit_count(), traced2.hit_count());
        for (a, b) in traced.hits().zip(traced2.hits()) {
            prop_assert_eq!(a.hit.index, b.hit.index);
            let shift = [dx, dy, dz];
            for o in 0..3 {
                prop_assert!((b.hit.point[o] - a.hit.point[o] - shift[o]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn basis_is_orthonormal_under_fine_quadrature() {
    let basis = basis2(4);
    let n = 400;
    let h = 1.0 / n as f64;
    let mut gram = vec![0.0; basis.len() * basis.len()];
    let mut vals = vec![0.0; basis.len()];
    for i in 0..n {
        for j in 0..n {
            let w = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            for (a, k) in basis.indices().iter().enumerate() {
                vals[a] = basis.eval(k, &w);
            }
            for a in 0..basis.len() {
                for b in 0..basis.len() {
                    gram[a * basis.len() + b] += vals[a] * vals[b] * h * h;
                }
            }
        }
    }
    for a in 0..basis.len() {
        for b in 0..basis.len() {
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((gram[a * basis.len() + b] - expect).abs() < 1e-3);
        }
    }
}

#[test]
fn small_footprints_converge_to_the_point_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let basis = basis2(10);
    let phi = map_coeffs(&random_map(&mut rng), &basis).unwrap();
    let traj = random_drone(&mut rng, 50);
    let point = ergodicity(&point_coeffs(&traj, &Projection::with_altitude(), &basis).unwrap(), &phi, basis.weights()).unwrap();
    let gaps: Vec<f64> = [0.2, 0.02, 0.002]
        .iter()
        .map(|&k_h| {
            let s = FootprintSampler::new(FootprintModel::altitude_disk(k_h), Projection::with_altitude(), Workspace::unit(2)).unwrap();
            (footprint_value(&s, &traj.states, 3, 50, &phi, &basis) - point).abs()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 1e-4);

    let s = FootprintSampler::new(FootprintModel::altitude_disk(1e-3), Projection::with_altitude(), Workspace::unit(2)).unwrap();
    let c = footprint_coeffs(&sets_of(&s, &traj.states, 3, 50), &basis).unwrap();
    let p = point_coeffs(&traj, &Projection::with_altitude(), &basis).unwrap();
    let worst = c.values.iter().zip(&p.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(worst < 1e-4);
}

#[test]
fn point_coeffs_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let basis = basis2(6);
    let traj = random_drone(&mut rng, 20);
    let c = point_coeffs(&traj, &Projection::with_altitude(), &basis).unwrap();
    for (i, k) in basis.indices().iter().enumerate() {
        let mut sum = 0.0;
        for t in 0..20 {
            let x = traj.state(t);
            let mut v = 1.0;
            for o in 0..2 {
                v *= (k[o] as f64 * std::f64::consts::PI * x[o]).cos();
            }
            sum += v / basis.normalizers()[i];
        }
        assert!((c.values[i] - sum / 20.0).abs() < 1e-12);
    }
}

#[test]
fn stationary_robot_has_closed_form_ergodicity() {
    let basis = basis2(6);
    let uniform = InfoMap::Grid(GridMap::filled(Workspace::unit(2), vec![10, 10], 1.0).unwrap());
    let phi = map_coeffs(&uniform, &basis).unwrap();
    let model = DynamicsModel::new(ModelKind::SingleIntegrator, 2).unwrap();
    let q = [0.3, 0.7];
    let traj = model.rollout(&q, &[0.0; 20], 0.1).unwrap();
    let e = ergodicity(&point_coeffs(&traj, &Projection::planar(2), &basis).unwrap(), &phi, basis.weights()).unwrap();
    let expect: f64 = basis
        .indices()
        .iter()
        .zip(basis.weights())
        .skip(1)
        .map(|(k, l)| l * basis.eval(k, &q).powi(2))
        .sum();
    assert!((e - expect).abs() < 1e-12);
}
