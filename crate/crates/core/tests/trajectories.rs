//! Sampled connections of every bundled system obey their own dynamics.

use kinorrt::scenarios::{bundled, Scenario};
use kinorrt::steer::{Backend, Steer, Trajectory};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_pairs(s: &Scenario, count: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                s.environment.sample_uniform(&mut rng),
                s.environment.sample_uniform(&mut rng),
            )
        })
        .collect()
}

/// Largest `‖ẋ − (Ax + Bu + c)‖ / (1 + ‖ẋ‖)` over interior samples, with
/// `ẋ` from central differences.
fn dynamics_residual(steer: &Steer<f64>, traj: &Trajectory<f64>) -> f64 {
    let sys = steer.system();
    let s = &traj.samples;
    let mut worst: f64 = 0.0;
    for k in 1..s.len() - 1 {
        let xdot = (&s[k + 1].x - &s[k - 1].x) / (s[k + 1].t - s[k - 1].t);
        let model = sys.derivative(&s[k].x, &s[k].u);
        worst = worst.max((&xdot - model).norm() / (1.0 + xdot.norm()));
    }
    worst
}

#[test]
fn closed_form_trajectories_satisfy_dynamics() {
    for (name, s) in bundled() {
        for (x0, x1) in random_pairs(&s, 10, 11) {
            let sys = s.linear_model::<f64>(&x0).unwrap();
            let steer = Steer::new(sys, Backend::ClosedForm).unwrap();
            let conn = steer.optimal_arrival_time(&x0, &x1).unwrap();
            let traj = steer
                .trajectory(&conn, Some(conn.tau_star / 4000.0))
                .unwrap();
            assert!((&traj.samples[0].x - &x0).norm() < 1e-6, "{name}: start");
            assert!(
                (&traj.samples.last().unwrap().x - &x1).norm() < 1e-6,
                "{name}: end"
            );
            let r = dynamics_residual(&steer, &traj);
            assert!(r < 1e-4, "{name}: dynamics residual {r}");
        }
    }
}

#[test]
fn rk4_trajectories_satisfy_dynamics() {
    for (name, s) in bundled() {
        for (x0, x1) in random_pairs(&s, 3, 12) {
            let sys = s.linear_model::<f64>(&x0).unwrap();
            let steer = Steer::new(sys, Backend::Rk4).unwrap();
            let conn = steer.optimal_arrival_time(&x0, &x1).unwrap();
            let traj = steer
                .trajectory(&conn, Some(conn.tau_star / 4000.0))
                .unwrap();
            assert!((&traj.samples[0].x - &x0).norm() < 1e-4, "{name}: start");
            assert!(
                (&traj.samples.last().unwrap().x - &x1).norm() < 1e-4,
                "{name}: end"
            );
            let r = dynamics_residual(&steer, &traj);
            assert!(r < 1e-4, "{name}: dynamics residual {r}");
        }
    }
}

#[test]
fn zero_control_follows_drift() {
    for (name, s) in bundled() {
        let x0 = &s.start;
        let sys = s.linear_model::<f64>(x0).unwrap();
        let steer = Steer::new(sys, Backend::ClosedForm).unwrap();
        let tau = 1.5;
        let x1 = steer.drift_state(x0, tau).unwrap();
        let conn = steer.optimal_arrival_time(x0, &x1).unwrap();
        // reaching the drift state costs at most its own duration
        assert!(conn.cost <= tau + 1e-9, "{name}: {} > {tau}", conn.cost);
    }
}
