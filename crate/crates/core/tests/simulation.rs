use barrierlab_core::barrier::{AffineBarrier, AlphaFn, ControllerSpec, Unconstrained};
use barrierlab_core::montecarlo::{
    estimate_exit_probability_with, estimate_local_time, map_paths, ExitConfig, Execution,
};
use barrierlab_core::sde::{simulate_path, IntegratorConfig, ScalarSde};
use statrs::function::erf::erfc;

fn brownian_exit_oracle(x0: f64, t: f64) -> f64 {
    // 2Φ(−x0/√t) by the reflection principle.
    erfc(x0 / (2.0 * t).sqrt())
}

#[test]
fn paths_do_not_depend_on_scheduling() {
    let model = ScalarSde::single_integrator(1.0);
    let spec = ControllerSpec::rcbf(AlphaFn::identity());
    let barrier = AffineBarrier::identity();
    let cfg = |i| IntegratorConfig::new(1e-3, 0.5).with_bridge(true).with_stream(11, i);
    let alone = simulate_path(&model, &spec, &barrier, &[1.0], &cfg(7)).unwrap();
    let ensemble = map_paths(Execution::default(), 16, |i| simulate_path(&model, &spec, &barrier, &[1.0], &cfg(i)).unwrap());
    assert_eq!(ensemble[7], alone);
    let backwards: Vec<_> = (0..16).rev().map(|i| simulate_path(&model, &spec, &barrier, &[1.0], &cfg(i)).unwrap()).collect();
    assert_eq!(backwards[16 - 1 - 7], alone);
    assert_ne!(ensemble[6], alone);
}

#[test]
fn sequential_and_parallel_estimates_agree() {
    let model = ScalarSde::brownian(1.0);
    let cfg = ExitConfig {
        n_paths: 500,
        dt: 1e-2,
        horizon: 1.0,
        seed: 5,
        bridge_correction: true,
    };
    let barrier = AffineBarrier::identity();
    let a = estimate_exit_probability_with(&model, &ControllerSpec::none(), &barrier, &[1.0], &cfg, Execution::Sequential).unwrap();
    let b = estimate_exit_probability_with(&model, &ControllerSpec::none(), &barrier, &[1.0], &cfg, Execution::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_noise_matches_forward_euler() {
    let model = ScalarSde::new(|x| -x + (3.0 * x).sin(), |x| 0.5 * x, |_| 0.0);
    let spec = ControllerSpec::modified_zcbf(AlphaFn::identity());
    let barrier = AffineBarrier::identity();
    let cfg = IntegratorConfig::new(1e-3, 1.0).with_stream(9, 0);
    let path = simulate_path(&model, &spec, &barrier, &[0.8], &cfg).unwrap();
    let mut x = 0.8f64;
    for k in 0..path.n_steps() {
        let u = path.control(k)[0];
        x += (-x + (3.0 * x).sin() + 0.5 * x * u) * 1e-3;
        assert!((path.state(k + 1)[0] - x).abs() <= 1e-14 * x.abs().max(1.0));
    }
    assert_eq!(path.n_steps(), 1000);
}

#[test]
fn brownian_terminal_moments() {
    let model = ScalarSde::brownian(1.0);
    let n = 100_000u64;
    let ends = map_paths(Execution::default(), n, |i| {
        let cfg = IntegratorConfig::new(1e-2, 1.0).with_stream(21, i);
        let p = simulate_path(&model, &ControllerSpec::none(), &Unconstrained { dim: 1 }, &[0.0], &cfg).unwrap();
        p.state(p.n_steps())[0]
    });
    let mean = ends.iter().sum::<f64>() / n as f64;
    let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // E W₁ = 0, Var W₁ = 1; SE of the variance is √(2/n).
    assert!(mean.abs() <= 3.0 / (n as f64).sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() <= 3.0 * (2.0 / n as f64).sqrt(), "var {var}");
}

#[test]
fn exit_intervals_cover_reflection_oracle() {
    let model = ScalarSde::brownian(1.0);
    let barrier = AffineBarrier::identity();
    let oracle = brownian_exit_oracle(1.0, 1.0);
    let mut covered = 0;
    let mut total = 0;
    for rep in 0..20u64 {
        for n_paths in [1500u64, 3000] {
            let cfg = ExitConfig {
                n_paths,
                dt: 1e-2,
                horizon: 1.0,
                seed: 1000 + 2 * rep + n_paths / 3000,
                bridge_correction: true,
            };
            let est = estimate_exit_probability_with(&model, &ControllerSpec::none(), &barrier, &[1.0], &cfg, Execution::default()).unwrap();
            assert!(est.ci_low <= est.p_hat && est.p_hat <= est.ci_high);
            total += 1;
            covered += (est.ci_low <= oracle && oracle <= est.ci_high) as u32;
        }
    }
    assert!(covered as f64 >= 0.9 * total as f64, "covered {covered}/{total}");
}

#[test]
fn tanaka_residual_shrinks_with_step() {
    let model = ScalarSde::brownian(1.0);
    let mut means = Vec::new();
    for dt in [1e-2, 1e-3, 1e-4] {
        let n = 400u64;
        let residuals = map_paths(Execution::default(), n, |i| {
            let cfg = IntegratorConfig::new(dt, 1.0).with_stream(77, i);
            let p = simulate_path(&model, &ControllerSpec::none(), &Unconstrained { dim: 1 }, &[0.0], &cfg).unwrap();
            let x = p.component(0);
            let rates = vec![1.0; p.n_steps()];
            let eps = 5.0 * dt.sqrt();
            estimate_local_time(&p.times, &x, &rates, 0.0, eps).unwrap().tanaka_residual.abs()
        });
        means.push(residuals.iter().sum::<f64>() / n as f64);
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn zcbf_controller_is_idle_inside_the_set() {
    let model = ScalarSde::single_integrator(1.0);
    let cfg = IntegratorConfig::new(1e-3, 1.0).with_stream(4, 0);
    let path = simulate_path(&model, &ControllerSpec::zcbf(), &AffineBarrier::identity(), &[1.0], &cfg).unwrap();
    assert!((0..path.n_steps()).all(|k| path.control(k)[0] == 0.0));
}
