use vtem::{
    example_duffing_vdp, example_planar_quartic, example_scalar_cubic, interpolate_auxiliary, simulate,
    BrownianGrid, Error, ModelBundle, Scheme, SchemeConfig,
};

fn run(b: &ModelBundle<f64>, scheme: Scheme<f64>, dt: f64, t: f64, seed: u64, id: u64) -> vtem::PathResult<f64> {
    let cfg = SchemeConfig::new(scheme, dt, t, b.x0.clone()).unwrap();
    let grid = BrownianGrid::generate(seed, id, t, dt, b.system.noise_dim()).unwrap();
    simulate(&cfg, &b.system, &b.lyapunov, &grid).unwrap()
}

#[test]
fn same_key_same_path_bits() {
    let b = example_duffing_vdp::<f64>().unwrap();
    let p = run(&b, Scheme::Truncated(b.policy.clone()), 0.01, 2.0, 5, 9);
    let q = run(&b, Scheme::Truncated(b.policy.clone()), 0.01, 2.0, 5, 9);
    assert!(p.states.iter().zip(&q.states).all(|(a, c)| a.to_bits() == c.to_bits()));
    let other = run(&b, Scheme::Truncated(b.policy.clone()), 0.01, 2.0, 5, 10);
    assert_ne!(p.states, other.states);
}

#[test]
fn truncated_paths_stay_in_the_ball() {
    for b in [
        example_planar_quartic::<f64>().unwrap(),
        example_scalar_cubic::<f64>().unwrap(),
        example_duffing_vdp::<f64>().unwrap(),
    ] {
        let dt = b.policy.delta_star;
        let r = b.policy.truncation_radius(dt).unwrap();
        for id in 0..20 {
            let p = run(&b, Scheme::Truncated(b.policy.clone()), dt, 1.0, 3, id);
            assert!(p.max_norm <= r * (1.0 + 1e-12), "{} path {id}", b.name);
            assert!(p.v_values.iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn no_truncation_means_classical_bits() {
    // from x0 = 0.5 the radius is never reached at this step size, so both
    // schemes perform the same floating-point operations
    let b = example_scalar_cubic::<f64>().unwrap().with_initial_state(vec![0.5]).unwrap();
    for id in 0..10 {
        let t = run(&b, Scheme::Truncated(b.policy.clone()), 0.005, 1.0, 8, id);
        let c = run(&b, Scheme::Classical, 0.005, 1.0, 8, id);
        assert!(t.first_truncation_step.is_none());
        assert!(t.states.iter().zip(&c.states).all(|(a, d)| a.to_bits() == d.to_bits()));
    }
}

#[test]
fn pre_truncation_states_are_kept_on_request() {
    let b = example_scalar_cubic::<f64>().unwrap();
    let cfg = SchemeConfig::new(Scheme::Truncated(b.policy.clone()), 0.005, 0.05, b.x0.clone())
        .unwrap()
        .storing_pre();
    let grid = BrownianGrid::generate(1, 0, 0.05, 0.005, 1).unwrap();
    let p = simulate(&cfg, &b.system, &b.lyapunov, &grid).unwrap();
    let r = p.radius.unwrap();
    for k in 1..p.len() {
        let pre = p.pre(k).unwrap()[0];
        let post = p.state(k)[0];
        if pre.abs() <= r {
            assert_eq!(pre.to_bits(), post.to_bits());
        } else {
            assert_eq!(post.abs(), r);
            assert!(p.truncated[k - 1]);
        }
    }
}

#[test]
fn classical_blow_up_is_recorded() {
    // a large start makes the explicit step oscillate with growing amplitude
    let b = example_scalar_cubic::<f64>().unwrap();
    let cfg = SchemeConfig::new(Scheme::Classical, 0.005, 1.0, vec![40.0]).unwrap();
    let grid = BrownianGrid::zero(1.0, 0.005, 1).unwrap();
    let p = simulate(&cfg, &b.system, &b.lyapunov, &grid).unwrap();
    let k = p.diverged_at.expect("diverges");
    assert_eq!(p.len(), k);
    assert!(p.states.iter().all(|v| v.abs() <= 1e100));
}

#[test]
fn step_above_delta_star_is_refused() {
    let b = example_scalar_cubic::<f64>().unwrap();
    let e = SchemeConfig::new(Scheme::Truncated(b.policy.clone()), 0.01, 1.0, b.x0.clone()).unwrap_err();
    assert!(matches!(e, Error::PolicyViolation(_)));
}

#[test]
fn auxiliary_process_at_grid_points_is_the_scheme() {
    let b = example_duffing_vdp::<f64>().unwrap();
    let grid = BrownianGrid::generate(2, 0, 1.0, 0.001, 2).unwrap();
    let cfg = SchemeConfig::new(Scheme::Truncated(b.policy.clone()), 0.01, 1.0, b.x0.clone()).unwrap();
    let p = simulate(&cfg, &b.system, &b.lyapunov, &grid).unwrap();
    for k in [0usize, 7, 100] {
        let y = interpolate_auxiliary(&p, &b.system, &grid, k as f64 * 0.01).unwrap();
        assert_eq!(y, p.state(k));
    }
    let mid = interpolate_auxiliary(&p, &b.system, &grid, 0.073).unwrap();
    assert!(mid.iter().all(|v| v.is_finite()));
    assert!(interpolate_auxiliary(&p, &b.system, &grid, 0.0735).is_err());
}

#[test]
fn single_precision_paths_track_double() {
    let b64 = example_scalar_cubic::<f64>().unwrap();
    let b32 = example_scalar_cubic::<f32>().unwrap();
    let g64 = BrownianGrid::<f64>::generate(4, 0, 1.0, 0.005, 1).unwrap();
    let inc32: Vec<f32> = g64.increments().iter().map(|&v| v as f32).collect();
    let g32 = BrownianGrid::from_increments(1.0f32, 0.005, 1, inc32).unwrap();
    let c64 = SchemeConfig::new(Scheme::Truncated(b64.policy.clone()), 0.005, 1.0, b64.x0.clone()).unwrap();
    let c32 = SchemeConfig::new(Scheme::Truncated(b32.policy.clone()), 0.005f32, 1.0, b32.x0.clone()).unwrap();
    let p64 = simulate(&c64, &b64.system, &b64.lyapunov, &g64).unwrap();
    let p32 = simulate(&c32, &b32.system, &b32.lyapunov, &g32).unwrap();
    for k in 0..p64.len() {
        assert!((p64.state(k)[0] - p32.state(k)[0] as f64).abs() < 1e-3, "step {k}");
    }
}
