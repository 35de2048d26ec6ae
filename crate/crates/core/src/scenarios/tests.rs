use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::steer::Steer;

#[test]
fn double_integrator_matches_its_definition() {
    let s = double_integrator(DoubleIntegratorLayout::Empty);
    let ScenarioSystem::Linear(sys) = &s.system else {
        panic!("linear")
    };
    assert_eq!(sys.nilpotency().index, Some(2));
    assert_eq!(sys.r(), &(DMatrix::identity(2, 2) * 0.25));
    assert_eq!(
        s.environment.state_lower.as_slice(),
        &[0.0, 0.0, -10.0, -10.0]
    );
    assert_eq!(
        s.environment.state_upper.as_slice(),
        &[200.0, 100.0, 10.0, 10.0]
    );
    assert_eq!(s.environment.control_lower.as_slice(), &[-10.0, -10.0]);
    assert_eq!(s.environment.control_upper.as_slice(), &[10.0, 10.0]);
    assert_eq!(s.planner.radius, Radius::Infinite);
}

#[test]
fn quadrotor_matches_its_definition() {
    let s = quadrotor(QuadrotorParams::default()).unwrap();
    let ScenarioSystem::Linear(sys) = &s.system else {
        panic!("linear")
    };
    let a = sys.a();
    for i in 0..10 {
        for j in 0..=i {
            assert_eq!(a[(i, j)], 0.0, "A must be strictly upper triangular");
        }
    }
    assert!(sys.nilpotency().is_nilpotent);
    assert_eq!(a[(3, 7)], 9.8);
    assert_eq!(a[(4, 6)], -9.8);
    let p = QuadrotorParams::default();
    assert_eq!(sys.b()[(5, 0)], 1.0 / p.mass);
    assert_eq!(sys.b()[(8, 1)], p.arm / p.inertia);
    assert_eq!(sys.r().diagonal().as_slice(), &[0.25, 0.5, 0.5]);
    assert_eq!(
        s.environment.control_lower.as_slice(),
        &[-4.545, -3.62, -3.62]
    );
    assert_eq!(s.environment.control_upper.as_slice(), &[9.935, 3.62, 3.62]);
    assert!(Steer::new(sys.clone(), Backend::ClosedForm)
        .unwrap()
        .is_graded());
}

#[test]
fn quadrotor_rejects_nonpositive_constants() {
    for p in [
        QuadrotorParams {
            mass: 0.0,
            ..QuadrotorParams::default()
        },
        QuadrotorParams {
            arm: -1.0,
            ..QuadrotorParams::default()
        },
        QuadrotorParams {
            inertia: f64::NAN,
            ..QuadrotorParams::default()
        },
    ] {
        assert!(quadrotor_system::<f64>(p).is_err());
    }
}

#[test]
fn car_matches_its_definition() {
    let s = car();
    let ScenarioSystem::Car(model) = &s.system else {
        panic!("car")
    };
    assert_eq!(model.r(), &DMatrix::identity(2, 2));
    let env = &s.environment;
    assert_eq!((env.state_lower[4], env.state_upper[4]), (-0.25, 0.25));
    assert_eq!(env.angle_dims, vec![2]);
    assert!(env.sample_bounds().0[3] > 0.0);
    assert!(s.planner.radius_cap.is_some());
}

#[test]
fn car_samples_never_stop() {
    let s = car();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let x = s.environment.sample_uniform(&mut rng);
        assert!(x[3] >= CAR_MIN_SAMPLE_SPEED && x[3] <= 10.0);
    }
}

#[test]
fn bundled_scenarios_are_valid() {
    for (file, s) in bundled() {
        s.validate().unwrap_or_else(|e| panic!("{file}: {e}"));
        if let ScenarioSystem::Linear(sys) = &s.system {
            assert!(sys.nilpotency().is_nilpotent, "{file}");
            assert!(sys.is_controllable(), "{file}");
        }
    }
}

#[test]
fn bundled_scenarios_round_trip() {
    for (file, s) in bundled() {
        let text = s.to_toml().unwrap();
        let back = Scenario::from_toml(&text).unwrap_or_else(|e| panic!("{file}: {e}\n{text}"));
        assert_eq!(back, s, "{file}");
    }
}

#[test]
fn files_on_disk_match_the_builders() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for (file, s) in bundled() {
        let loaded = Scenario::load(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
        assert_eq!(loaded, s, "{file}");
    }
}

#[test]
fn schedule_and_overrides_round_trip() {
    let mut s = double_integrator(DoubleIntegratorLayout::Slalom);
    s.planner.radius = Radius::Schedule {
        gamma: 120.5,
        dim: 4,
    };
    s.planner.radius_cap = Some(40.0);
    s.planner.backend = Backend::Rk4;
    s.planner.sample_dt = Some(0.01);
    s.planner.rng_seed = 99;
    let back = Scenario::from_toml(&s.to_toml().unwrap()).unwrap();
    assert_eq!(back, s);
    let mut c = car();
    c.system = ScenarioSystem::Car(
        CarModel::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap(),
    );
    c.planner.relinearize = false;
    let back = Scenario::from_toml(&c.to_toml().unwrap()).unwrap();
    assert_eq!(back, c);
}

const MINIMAL: &str = r#"
name = "minimal"

[system]
kind = "linear"
a = [[0.0, 1.0], [0.0, 0.0]]
b = [[0.0], [1.0]]
r = [1.0]

[environment]
state_lower = [-1.0, -1.0]
state_upper = [1.0, 1.0]

[planner]
iterations = 10
radius = "inf"

[endpoints]
start = [0.0, 0.0]
goal = [0.5, 0.0]
"#;

#[test]
fn minimal_file_takes_defaults() {
    let s = Scenario::from_toml(MINIMAL).unwrap();
    assert_eq!(s.planner.max_iterations, 10);
    assert_eq!(s.planner.radius, Radius::Infinite);
    assert_eq!(s.environment.control_lower[0], f64::NEG_INFINITY);
    assert!(s.environment.obstacles.is_empty());
    let ScenarioSystem::Linear(sys) = &s.system else {
        panic!("linear")
    };
    assert_eq!(sys.c().as_slice(), &[0.0, 0.0]);
}

#[test]
fn syntax_errors_carry_a_location() {
    let broken = MINIMAL.replace("iterations = 10", "iterations = ");
    let msg = Scenario::from_toml(&broken).unwrap_err().to_string();
    assert!(msg.contains("line"), "{msg}");
}

#[test]
fn semantic_errors_name_the_field() {
    let cases = [
        (
            MINIMAL.replace("a = [[0.0, 1.0], [0.0, 0.0]]", "a = [[0.0, 1.0], [0.0]]"),
            "system.a",
        ),
        (
            MINIMAL.replace("radius = \"inf\"", "radius = \"wide\""),
            "planner.radius",
        ),
        (
            MINIMAL.replace("radius = \"inf\"", "gamma = 3.0"),
            "planner.gamma",
        ),
        (
            MINIMAL.replace("goal = [0.5, 0.0]", "goal = [5.0, 0.0]"),
            "endpoints.goal",
        ),
        (
            MINIMAL.replace("start = [0.0, 0.0]", "start = [0.0]"),
            "endpoints.start",
        ),
        (
            MINIMAL.replace("iterations = 10", "iterations = 10\nbackend = \"euler\""),
            "planner.backend",
        ),
    ];
    for (text, field) in cases {
        let msg = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(msg.contains(field), "expected `{field}` in: {msg}");
    }
    let unknown = MINIMAL.replace("iterations = 10", "iterations = 10\nspeed = 3");
    let msg = Scenario::from_toml(&unknown).unwrap_err().to_string();
    assert!(msg.contains("speed"), "{msg}");
}

#[test]
fn problem_converts_to_single_precision() {
    let s = double_integrator(DoubleIntegratorLayout::Block);
    let p = s.problem::<f32>().unwrap();
    assert_eq!(p.env.obstacles.len(), 1);
    assert_eq!(p.start[0], 20.0f32);
    assert!(p.system.is_linear());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrotor_is_controllable_for_any_constants(
        mass in 0.01f64..50.0, arm in 0.01f64..2.0, inertia in 1e-4f64..1.0,
    ) {
        let sys = quadrotor_system::<f64>(QuadrotorParams { mass, arm, inertia }).unwrap();
        prop_assert_eq!(sys.controllability_rank(), 10);
    }

    #[test]
    fn car_linearizations_are_graded(seed in any::<u64>()) {
        let s = car();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = s.environment.sample_uniform(&mut rng);
        let sys = s.linear_model::<f64>(&x).unwrap();
        prop_assert!(sys.nilpotency().is_nilpotent);
        let steer = Steer::new(sys, Backend::ClosedForm).unwrap();
        prop_assert!(steer.is_graded());
    }
}
