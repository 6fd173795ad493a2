use levy_spde::functions::{Drift, TestFunction};
use levy_spde::grid::{Axis, GridFunction};
use levy_spde::kolmogorov::{solve_picard, PicardConfig, TimeQuadrature};
use levy_spde::mehler::sample_ou_state;
use levy_spde::rng::{MeanAccumulator, StreamKey};
use levy_spde::simulator::*;
use levy_spde::spectral::{reaction_diffusion_preset, SpectralModel};
use levy_spde::stable::{DensityTable, GridSpec};
use levy_spde::stats::ks_two_sample;

fn skeleton_config(n: usize, drift: &str, amplitude: f64, dt: f64, base_cells: usize) -> SimConfig {
    let (model, budget) = reaction_diffusion_preset(1, 1.8, 0.35, n).unwrap();
    SimConfig {
        model,
        drift: Drift::from_name(drift, n, amplitude, budget.beta).unwrap(),
        x0: vec![0.3; n],
        dt,
        horizon: 1.0,
        noise: NoiseMode::Skeleton { epsilon: None, base_cells },
        seed: 5,
    }
}

#[test]
fn exact_increments_reproduce_the_mehler_law() {
    let model = SpectralModel::explicit(1.5, vec![1.0, 4.0], vec![1.0, 0.5]).unwrap();
    let base = SimConfig {
        model: model.clone(),
        drift: Drift::from_name("zero", 2, 0.0, 1.0).unwrap(),
        x0: vec![1.0, -2.0],
        dt: 0.25,
        horizon: 1.0,
        noise: NoiseMode::ExactIncrement,
        seed: 0,
    };
    let n = 100_000;
    let paths: Vec<Vec<f64>> =
        (0..n as u64).map(|s| simulate_path(&SimConfig { seed: s, ..base.clone() }).unwrap().terminal().to_vec()).collect();
    let direct: Vec<Vec<f64>> =
        (0..n as u64).map(|i| sample_ou_state(&model, &base.x0, 1.0, StreamKey::new(99).child(i)).unwrap()).collect();
    for k in 0..2 {
        let a: Vec<f64> = paths.iter().map(|v| v[k]).collect();
        let b: Vec<f64> = direct.iter().map(|v| v[k]).collect();
        let (_, p) = ks_two_sample(&a, &b);
        assert!(p >= 0.01, "mode {k}: p = {p}");
    }
}

#[test]
fn ito_residual_is_centred_and_shrinks_with_step() {
    let f = TestFunction::cos_linear(vec![1.0], 0.0);
    let mut rms = Vec::new();
    for dt in [1.0 / 32.0, 1.0 / 128.0] {
        let c = skeleton_config(1, "holder-cusp", 0.5, dt, 8);
        let mut mean = MeanAccumulator::new();
        let mut sq = MeanAccumulator::new();
        for r in 0..1000 {
            let p = simulate_with_skeleton(&c, &c.skeleton(r).unwrap()).unwrap();
            let s = ito_residual(&p, &f, &c).unwrap();
            mean.push(s.terminal_residual());
            sq.push(s.terminal_pathwise().powi(2));
        }
        assert!(mean.mean().abs() < 3.0 * mean.std_error(), "dt {dt}: {} ± {}", mean.mean(), mean.std_error());
        rms.push(sq.mean().sqrt());
    }
    assert!(rms[1] < rms[0], "{rms:?}");
}

#[test]
fn zvonkin_residual_decreases_along_step_ladder() {
    let (model, budget) = reaction_diffusion_preset(1, 1.8, 0.35, 1).unwrap();
    let table = DensityTable::build(1.8, GridSpec::default()).unwrap();
    let drift = Drift::from_name("holder-cusp", 1, 0.3, budget.beta).unwrap();
    let b = GridFunction::from_field(vec![Axis::symmetric(10.0, 161).unwrap()], &drift).unwrap();
    let lambda = 16.0;
    let cfg = PicardConfig {
        lambda,
        gamma: budget.gamma,
        theta: budget.theta,
        beta: budget.beta,
        drift_norm: drift.holder_norm(),
        tol: 1e-6,
        max_iter: 30,
        quadrature: TimeQuadrature::default(),
        samples: 512,
    };
    let u = solve_picard(&b, &b, &model, &table, cfg, StreamKey::new(3)).unwrap().iterate;
    let mut medians = Vec::new();
    for dt in [1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0] {
        let c = SimConfig {
            model: model.clone(),
            drift: drift.clone(),
            x0: vec![0.3],
            dt,
            horizon: 1.0,
            noise: NoiseMode::Skeleton { epsilon: None, base_cells: 8 },
            seed: 9,
        };
        let mut v: Vec<f64> = (0..60)
            .map(|r| {
                let p = simulate_with_skeleton(&c, &c.skeleton(r).unwrap()).unwrap();
                let z = zvonkin_identity_residual(&p, &u, &c, lambda).unwrap();
                assert_eq!(z.norms[0], 0.0);
                z.terminal_norm()
            })
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        medians.push(v[30]);
    }
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn lipschitz_ladder_decreases_on_most_replicates() {
    let c = skeleton_config(2, "lipschitz", 0.5, 0.1, 10);
    let r = shared_noise_refinement_experiment(&c, &[0.1, 0.05, 0.025], 0.1 / 32.0, 100, None).unwrap();
    assert!(r.medians_strictly_decreasing, "{:?}", r.medians);
    assert!(r.monotone_fraction >= 0.9, "{}", r.monotone_fraction);
    assert!(r.observed_order > 1.0 / 1.8 - 0.1, "{}", r.observed_order);
}

#[test]
fn experiment_is_independent_of_worker_count() {
    let c = skeleton_config(3, "reaction", 0.5, 0.1, 10);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| shared_noise_refinement_experiment(&c, &[0.1, 0.05], 0.025, 16, None).unwrap())
    };
    assert_eq!(run(1), run(4));
}
