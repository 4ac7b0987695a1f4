//! Acceptance gate. Every criterion runs at its stated tolerance inside one
//! test so wall-clock limits are measured without other tests competing for
//! cores; one PASS/FAIL line is written per criterion.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vtem::{
    estimate_moment_sup, estimate_strong_error, example_duffing_vdp, example_planar_quartic,
    example_scalar_cubic, generator, growth_bound_check, load_model, simulate, stability_experiment,
    validate_derivatives, BrownianGrid, ModelBundle, MonteCarloSettings, Scheme, SchemeConfig, BUILTIN_MODELS,
};

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn emit(line: &str) {
    // Bypasses libtest capture so the lines appear in every run.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn points(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
}

fn c1_generator_oracles() -> Outcome {
    let scalar = example_scalar_cubic::<f64>().unwrap();
    let duffing = example_duffing_vdp::<f64>().unwrap();
    let mut worst: f64 = 0.0;
    for x in points(1, 1000, 101) {
        let lv = generator(&scalar.lyapunov, &scalar.system, &x).unwrap();
        worst = worst.max((lv + 2.0 * x[0].powi(4)).abs());
    }
    let mut worst2: f64 = 0.0;
    for x in points(2, 1000, 102) {
        let (a, b) = (x[0], x[1]);
        let lv = generator(&duffing.lyapunov, &duffing.system, &x).unwrap();
        let closed = -4.0 * a * a * b * b - a * a - 0.5 * b * b - a.powi(4);
        worst2 = worst2.max((lv - closed).abs());
    }
    outcome(
        worst <= 1e-10 && worst2 <= 1e-10,
        format!("max abs error scalar-cubic {worst:.3e}, duffing-vdp {worst2:.3e} (tol 1e-10)"),
    )
}

fn c2_truncation_radii() -> Outcome {
    let planar = example_planar_quartic::<f64>().unwrap();
    let scalar = example_scalar_cubic::<f64>().unwrap();
    let mut worst: f64 = 0.0;
    for dt in [1e-4, 5e-5, 1e-5, 1e-6, 1e-8] {
        let r = planar.policy.truncation_radius(dt).unwrap();
        let exact = 4.0 * dt.powf(-0.2) - 2.0;
        worst = worst.max((r - exact).abs() / exact);
    }
    for dt in [0.008, 0.005, 2f64.powi(-8), 1e-3, 1e-5] {
        let r = scalar.policy.truncation_radius(dt).unwrap();
        let exact = (110.0 * dt.powf(-0.25) - 1.0).sqrt();
        worst = worst.max((r - exact).abs() / exact);
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.3e} over 10 radii (tol 1e-9)"))
}

fn c3_policy_feasibility() -> Outcome {
    let b = example_scalar_cubic::<f64>().unwrap();
    let lhs = b.policy.k_const * b.policy.delta_star.powf(-b.policy.theta);
    let rhs = b.policy.envelope.forward(19f64.max(1.0));
    outcome(lhs >= rhs, format!("K delta_star^-theta = {lhs:.4} >= envelope(19) = {rhs}"))
}

fn c4_per_step_bounds() -> Outcome {
    let mut checked = 0usize;
    let mut failures = Vec::new();
    for (name, _) in BUILTIN_MODELS {
        let b: ModelBundle<f64> = load_model(name).unwrap();
        let dt = b.policy.delta_star;
        let cfg = SchemeConfig::new(Scheme::Truncated(b.policy.clone()), dt, 1.0, b.x0.clone()).unwrap();
        for id in 0..50 {
            let grid = BrownianGrid::generate(SEED, id, 1.0, dt, b.system.noise_dim()).unwrap();
            let path = simulate(&cfg, &b.system, &b.lyapunov, &grid).unwrap();
            for k in 0..path.len() {
                checked += 1;
                let ok = growth_bound_check(&b.policy, &b.lyapunov, &b.system, b.decay.as_ref(), path.state(k), dt)
                    .unwrap();
                if !ok {
                    failures.push(format!("{name} path {id} step {k}"));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{checked} states checked, {} violations {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    )
}

fn c5_moment_uniformity() -> Outcome {
    let b = example_scalar_cubic::<f64>().unwrap();
    let dts = [2f64.powi(-8), 2f64.powi(-11)];
    let report = estimate_moment_sup(&b, 0.5, &dts, 1.0, &MonteCarloSettings::new(2000, SEED)).unwrap();
    let (a, c) = (report.rows[0].sup_moment, report.rows[1].sup_moment);
    let rel = (a - c).abs() / a.max(c);
    outcome(
        a.is_finite() && c.is_finite() && rel <= 0.25,
        format!(
            "sup E V^1/2: {a:.6} (dt 2^-8, step {}), {c:.6} (dt 2^-11, step {}); relative gap {rel:.3e} (limit 0.25)",
            report.rows[0].argmax_step, report.rows[1].argmax_step
        ),
    )
}

fn c6_strong_order() -> Outcome {
    let b = example_scalar_cubic::<f64>().unwrap().with_initial_state(vec![2.0]).unwrap();
    let dts: Vec<f64> = (6..=12).map(|k| 2f64.powi(-k)).collect();
    let report = estimate_strong_error(
        &b,
        1.0,
        &dts,
        2f64.powi(-16),
        1.0,
        &MonteCarloSettings::new(1000, SEED),
        None,
    )
    .unwrap();
    let slope = report.slope().unwrap_or(f64::NAN);
    let errs: Vec<String> = report.rows.iter().map(|r| format!("{:.3e}", r.mean_error)).collect();
    outcome(
        (0.35..=0.65).contains(&slope),
        format!("fitted slope {slope:.4} (want [0.35, 0.65]); errors {errs:?}"),
    )
}

fn c7_c8_stability_contrast() -> (Outcome, Outcome) {
    let b = example_scalar_cubic::<f64>().unwrap();
    let r = stability_experiment(&b, 0.005, 10.0, &MonteCarloSettings::new(100, SEED), 1.0).unwrap();
    let near = r.truncated.iter().filter(|s| s.terminal_norm < 1.0).count() as f64 / 100.0;
    let diverged = r.classical.iter().filter(|s| s.diverged).count();
    let c7 = outcome(
        r.bounded_fraction == 1.0 && near >= 0.95 && diverged >= 1,
        format!(
            "truncated bounded {:.2}, |Z(T)| < 1 for {near:.2}; classical diverged {diverged}/100 (need >= 1)",
            r.bounded_fraction
        ),
    );
    let (mu, varrho, rho) = (0.5, 0.25, 0.5);
    let bound = -(mu - varrho) / rho;
    let c8 = outcome(
        r.median_slope <= -0.4 + 3.0 * r.median_slope_stderr,
        format!(
            "median slope of log V on [2, 10] = {:.4} (SE {:.4}); threshold -0.4 + 3 SE; bound {bound}",
            r.median_slope, r.median_slope_stderr
        ),
    );
    (c7, c8)
}

fn c9_lasalle() -> Outcome {
    let b = example_planar_quartic::<f64>().unwrap();
    let r = stability_experiment(&b, 1e-4, 20.0, &MonteCarloSettings::new(10, SEED), 0.5).unwrap();
    outcome(
        r.bounded_fraction == 1.0 && r.converged_fraction >= 0.8,
        format!(
            "bounded by radius {:.4}: {:.2}; |Z(T)| < 0.5: {:.2} (need 0.8)",
            r.radius, r.bounded_fraction, r.converged_fraction
        ),
    )
}

fn c10_duffing() -> Outcome {
    let b = example_duffing_vdp::<f64>().unwrap();
    let r = stability_experiment(&b, 1e-3, 50.0, &MonteCarloSettings::new(20, SEED), 0.2).unwrap();
    let hits = r
        .truncated
        .iter()
        .filter(|s| s.terminal_state[0].abs() + s.terminal_state[1].abs() < 0.2)
        .count();
    let frac = hits as f64 / 20.0;
    outcome(frac >= 0.8, format!("|Z1(T)| + |Z2(T)| < 0.2 for {hits}/20 paths (need 0.8)"))
}

fn c11_infrastructure() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let b = example_scalar_cubic::<f64>().unwrap().with_initial_state(vec![2.0]).unwrap();
    let dt_ref = 2f64.powi(-10);
    let report = estimate_strong_error(
        &b,
        1.0,
        &[2f64.powi(-6), dt_ref],
        dt_ref,
        1.0,
        &MonteCarloSettings::new(64, SEED),
        None,
    )
    .unwrap();
    let at_ref = report.rows.iter().find(|r| r.dt == dt_ref).unwrap().mean_error;
    pass &= at_ref == 0.0;
    notes.push(format!("error at dt_ref = {at_ref:e}"));

    let s1 = MonteCarloSettings::new(40, SEED).with_workers(1);
    let s4 = MonteCarloSettings::new(40, SEED).with_workers(4);
    let a = stability_experiment(&b, 2f64.powi(-6), 1.0, &s1, 0.5).unwrap();
    let c = stability_experiment(&b, 2f64.powi(-6), 1.0, &s4, 0.5).unwrap();
    let e1 = estimate_strong_error(&b, 1.0, &[2f64.powi(-6)], dt_ref, 1.0, &s1, None).unwrap();
    let e4 = estimate_strong_error(&b, 1.0, &[2f64.powi(-6)], dt_ref, 1.0, &s4, None).unwrap();
    let same = format!("{a:?}") == format!("{c:?}") && format!("{e1:?}") == format!("{e4:?}");
    pass &= same;
    notes.push(format!("1 vs 4 workers identical: {same}"));

    let mut worst_rt: f64 = 0.0;
    let mut worst_fd = true;
    for (name, _) in BUILTIN_MODELS {
        let m: ModelBundle<f64> = load_model(name).unwrap();
        let env = &m.policy.envelope;
        for u in [1.0, 1.5, 2.0, 5.0, 19.0, 100.0, 1e3] {
            let back = env.inverse(env.forward(u)).unwrap();
            worst_rt = worst_rt.max((back - u).abs() / u);
        }
        worst_fd &= validate_derivatives(&m.lyapunov, &m.default_samples(), 1e-5).unwrap().passed();
    }
    pass &= worst_rt <= 1e-9 && worst_fd;
    notes.push(format!("inverse round trip max rel {worst_rt:.2e} (tol 1e-9)"));
    notes.push(format!("derivatives at 1e-5 pass: {worst_fd}"));
    outcome(pass, notes.join("; "))
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, &str, Outcome, Duration, Duration)> = Vec::new();
    let mut run = |n: usize, name: &'static str, limit: Duration, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        results.push((n, name, o, t.elapsed(), limit));
    };
    let secs = Duration::from_secs;
    run(1, "generator oracles", secs(1), &c1_generator_oracles);
    run(2, "truncation radii", Duration::MAX, &c2_truncation_radii);
    run(3, "policy feasibility", Duration::MAX, &c3_policy_feasibility);
    run(4, "per-step coefficient bounds", secs(30), &c4_per_step_bounds);
    run(5, "moment uniformity", secs(120), &c5_moment_uniformity);
    run(6, "strong convergence order", secs(300), &c6_strong_order);

    let t = Instant::now();
    let (c7, c8) = c7_c8_stability_contrast();
    let shared = t.elapsed();
    results.push((7, "stability contrast", c7, shared, secs(60)));
    results.push((8, "exponential decay", c8, shared, Duration::MAX));

    let mut run = |n: usize, name: &'static str, limit: Duration, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        results.push((n, name, o, t.elapsed(), limit));
    };
    run(9, "LaSalle convergence", secs(120), &c9_lasalle);
    run(10, "Duffing-van der Pol convergence", secs(120), &c10_duffing);
    run(11, "infrastructure properties", secs(10), &c11_infrastructure);

    let mut failed = Vec::new();
    for (n, name, o, took, limit) in &results {
        let in_time = took <= limit;
        let pass = o.pass && in_time;
        let limit_text = if *limit == Duration::MAX {
            String::new()
        } else {
            format!(" / limit {:.0}s", limit.as_secs_f64())
        };
        emit(&format!(
            "{} criterion {n:>2} ({name}): {} [{:.2}s{limit_text}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
        ));
        if !pass {
            failed.push(*n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
