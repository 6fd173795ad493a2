//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. Runs without the libtest harness so the lines always print.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use levy_spde::functions::{Drift, TestFunction};
use levy_spde::grid::{Axis, GridFunction};
use levy_spde::kolmogorov::{
    semigroup_resolvent, solve_picard, verify_estimates, Generator, PicardConfig, PicardState, ResolventConfig, TimeQuadrature,
};
use levy_spde::mehler::{
    first_bound, gradient, gradient_bound_cs, hessian_action, hessian_bound_cs, second_bound, CosOracle, OuCoefficients,
};
use levy_spde::quadrature::GaussLegendre;
use levy_spde::rng::{MeanAccumulator, StreamKey};
use levy_spde::simulator::{
    ito_residual, shared_noise_refinement_experiment, simulate_with_skeleton, zvonkin_identity_residual, NoiseMode, SimConfig, SimError,
};
use levy_spde::spectral::{
    lambda_t_envelope, reaction_diffusion_preset, reaction_diffusion_r_interval, RegularityBudget, SpectralModel,
};
use levy_spde::stable::{sample_standard, DensityTable, GridSpec, StableLaw};

// criterion 1
const ECF_SAMPLES: usize = 1_000_000;
const ECF_TOL: f64 = 4e-3;
const MASS_TOL: f64 = 1e-6;
const CAUCHY_TOL: f64 = 1e-4;
// criterion 2
const LAMBDA_BRUTE_N: usize = 1_000_000;
const LAMBDA_REL_TOL: f64 = 1e-12;
const ENVELOPE_PROBES: usize = 1000;
const ARITHMETIC_TOL: f64 = 1e-10;
// criterion 3
const MEHLER_SAMPLES: usize = 100_000;
const SIGMAS: f64 = 3.0;
const BOUND_TUPLES: usize = 100;
const BOUND_SAMPLES: usize = 10_000;
// criterion 4
const RESOLVENT_TOL: f64 = 1e-3;
// criterion 5
const SYMBOL_TOL: f64 = 1e-3;
const TRIPLES: usize = 10_000;
const HOLDING: f64 = 0.99;
// criterion 6
const ITO_REPLICATES: usize = 1000;
const ZVONKIN_REPLICATES: usize = 100;
// criterion 7
const LADDER_REPLICATES: usize = 200;

/// Why criterion 3b cannot pass: the plain sup bound ignores the alignment
/// between `h` and `e^{-At}`, and the exact sine gradient already exceeds it.
const LITERAL_GAP: &str = "the bound c_alpha Lambda_t ||f|| is false for aligned data (closed-form counterexample above); \
the Cauchy-Schwarz bounds of criterion 3 hold instead";

/// Label, name, runner and known-gap explanation of one criterion.
type Criterion = (&'static str, &'static str, fn() -> Verdict, Option<&'static str>);

struct Verdict {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, notes: Vec::new() }
    }
}

fn rd(p: u32, alpha: f64, r: f64, n: usize) -> (SpectralModel, RegularityBudget) {
    reaction_diffusion_preset(p, alpha, r, n).expect("valid preset")
}

fn table(alpha: f64) -> DensityTable {
    DensityTable::build(alpha, GridSpec::default()).expect("table")
}

fn unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / norm).collect()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn stable_law_fidelity() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut mass_err: f64 = 0.0;
    for (i, alpha) in [1.2, 1.5, 1.8].into_iter().enumerate() {
        let law = StableLaw::standard(alpha).unwrap();
        let draws = sample_standard(&law, ECF_SAMPLES, StreamKey::new(101).child(i as u64)).unwrap();
        for u in [0.5, 1.0, 2.0] {
            let ecf = draws.iter().map(|s| (u * s).cos()).sum::<f64>() / draws.len() as f64;
            worst = worst.max((ecf - (-f64::powf(u, alpha)).exp()).abs());
        }
        mass_err = mass_err.max((table(alpha).mass() - 1.0).abs());
    }
    let c1 = DensityTable::cauchy_validation(GridSpec::default()).unwrap().c_alpha().unwrap();
    let pass = worst <= ECF_TOL && mass_err <= MASS_TOL && (c1 - 0.5).abs() <= CAUCHY_TOL;
    Verdict::new(pass, format!("max ECF error {worst:.2e} (tol {ECF_TOL:.0e}), mass error {mass_err:.1e}, Cauchy c_1 {c1:.7}"))
}

fn spectral_functionals() -> Verdict {
    // Λ_t against a direct maximum of e^{-γ_n t} γ_n^{1/α} / β_n
    let mut brute_err: f64 = 0.0;
    for (p, alpha, r) in [(1u32, 1.8, 0.35), (2, 1.5, 0.25)] {
        let (model, _) = rd(p, alpha, r, 1);
        let q = 2.0 * p as f64;
        for t in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let brute = (1..=LAMBDA_BRUTE_N)
                .map(|n| {
                    let g = (n as f64).powf(q);
                    (-g * t).exp() * g.powf(1.0 / alpha) * g.powf(r)
                })
                .fold(0.0, f64::max);
            let v = model.lambda_t(t).unwrap().value;
            brute_err = brute_err.max((v - brute).abs() / brute);
        }
    }
    // envelope ((r+1/α)/(e t))^{r+1/α} over random presets and times
    let mut rng = StreamKey::new(102).rng();
    let mut dominated = 0;
    for _ in 0..ENVELOPE_PROBES {
        let alpha = rng.random_range(1.55..1.95);
        let (lo, hi) = reaction_diffusion_r_interval(1.0, alpha);
        let r = rng.random_range(lo + 0.05 * (hi - lo)..hi - 0.05 * (hi - lo));
        let t = 10f64.powf(rng.random_range(-4.0..2.0));
        let (model, _) = rd(1, alpha, r, 1);
        let env = lambda_t_envelope(r, alpha).unwrap();
        if model.lambda_t(t).unwrap().value <= env(t) * (1.0 + 1e-12) {
            dominated += 1;
        }
    }
    // hand-computed (r-interval, γ, lower end of the β interval)
    let hand = [
        ((1u32, 1.8, 0.35), (0.2777777777777778, 0.4444444444444444, 1.1042944785276074, 0.7957055214723926)),
        ((2, 1.5, 0.25), (0.16666666666666666, 0.3333333333333333, 1.0909090909090908, 0.6590909090909091)),
        ((1, 1.9, 0.4), (0.2631578947368421, 0.47368421052631576, 1.0795454545454546, 0.8704545454545455)),
        ((3, 1.7, 0.3), (0.09803921568627451, 0.4117647058823529, 1.1258278145695364, 0.7241721854304636)),
    ];
    let mut arith_err: f64 = 0.0;
    for ((p, alpha, r), (lo, hi, gamma, beta_lo)) in hand {
        let (model, budget) = rd(p, alpha, r, 1);
        let (clo, chi) = reaction_diffusion_r_interval(p as f64, alpha);
        let report = model.check_conditions();
        let g = report.gamma_exponent.unwrap_or(f64::NAN);
        for (a, b) in [(clo, lo), (chi, hi), (budget.gamma, gamma), (g, gamma), (budget.beta_interval.lower, beta_lo)] {
            arith_err = arith_err.max((a - b).abs());
        }
        arith_err = arith_err.max((budget.beta_interval.upper - 1.0).abs());
    }
    let pass = brute_err <= LAMBDA_REL_TOL && dominated == ENVELOPE_PROBES && arith_err <= ARITHMETIC_TOL;
    Verdict::new(
        pass,
        format!("Lambda_t rel. error {brute_err:.1e}, envelope dominates {dominated}/{ENVELOPE_PROBES}, arithmetic error {arith_err:.1e}"),
    )
}

fn mehler_derivatives() -> Verdict {
    let alpha = 1.5;
    let model = SpectralModel::explicit(alpha, vec![1.0], vec![1.0]).unwrap();
    let tab = table(alpha);
    let (c_alpha, i2, c_tilde) = (tab.c_alpha().unwrap(), tab.curvature_information().unwrap(), tab.c_tilde_alpha().unwrap());
    let key = StreamKey::new(103);
    let f = TestFunction::cos_linear(vec![1.0], 0.4);
    let one = TestFunction::constant(1, 1.0);
    let (x, h) = ([0.3], [1.0]);
    let mut oracle_miss = 0;
    let mut worst_z: f64 = 0.0;
    let mut constant_miss = 0;
    for (i, t) in [0.05, 0.2, 0.5, 1.0, 2.0].into_iter().enumerate() {
        let o = CosOracle::new(&[1.0], 0.4, &model, &x, t).unwrap();
        let k = key.child(i as u64);
        let g = gradient(&f, &model, &tab, &x, &h, t, MEHLER_SAMPLES, k.named("g")).unwrap();
        let hs = hessian_action(&f, &model, &tab, &x, &h, &h, t, MEHLER_SAMPLES, k.named("h")).unwrap();
        for (est, target) in [(&g, o.directional(&h)), (&hs, o.second_directional(&h, &h))] {
            worst_z = worst_z.max((est.value - target).abs() / est.std_error);
            oracle_miss += usize::from(!est.within(target, SIGMAS));
        }
        let g1 = gradient(&one, &model, &tab, &x, &h, t, MEHLER_SAMPLES, k.named("g1")).unwrap();
        let h1 = hessian_action(&one, &model, &tab, &x, &h, &h, t, MEHLER_SAMPLES, k.named("h1")).unwrap();
        constant_miss += usize::from(!g1.within(0.0, SIGMAS)) + usize::from(!h1.within(0.0, SIGMAS));
    }
    let suite = bound_suite();
    let pass = oracle_miss == 0 && constant_miss == 0 && suite.cs_first == 0 && suite.cs_second == 0;
    let mut v = Verdict::new(
        pass,
        format!(
            "oracle misses {oracle_miss}/10 (max |z| {worst_z:.2}), constant-score misses {constant_miss}/10, \
             Cauchy-Schwarz bound violations {} + {} over {BOUND_TUPLES} tuples",
            suite.cs_first, suite.cs_second
        ),
    );
    v.notes.push(format!("c_alpha {c_alpha:.6}, I2 {i2:.6}, c_tilde_alpha {c_tilde:.6} at alpha 1.5"));
    v
}

struct BoundSuite {
    literal_first: usize,
    literal_second: usize,
    cs_first: usize,
    cs_second: usize,
    first_literal_violation: Option<String>,
}

/// Random reaction–diffusion tuples, run once and shared by criteria 3 and 3b.
fn bound_suite() -> &'static BoundSuite {
    static SUITE: OnceLock<BoundSuite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let alphas = [1.6, 1.7, 1.8, 1.9];
        let tables: Vec<DensityTable> = alphas.iter().map(|a| table(*a)).collect();
        let mut rng = StreamKey::new(104).rng();
        let mut s = BoundSuite { literal_first: 0, literal_second: 0, cs_first: 0, cs_second: 0, first_literal_violation: None };
        for i in 0..BOUND_TUPLES {
            let ai = rng.random_range(0..alphas.len());
            let alpha = alphas[ai];
            let tab = &tables[ai];
            let (lo, hi) = reaction_diffusion_r_interval(1.0, alpha);
            let r = rng.random_range(lo + 0.1 * (hi - lo)..hi - 0.1 * (hi - lo));
            let n = rng.random_range(1..=3usize);
            let (model, _) = rd(1, alpha, r, n);
            let t = 10f64.powf(rng.random_range(-2.0..0.3));
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let h = unit(&mut rng, n);
            let f = TestFunction::cos_linear(w, rng.random_range(0.0..std::f64::consts::TAU));
            let (c1, ii, ct) = (tab.c_alpha().unwrap(), tab.curvature_information().unwrap(), tab.c_tilde_alpha().unwrap());
            let lam = model.lambda_t(t).unwrap().value;
            let coef = OuCoefficients::new(&model, t).unwrap();
            let k = StreamKey::new(105).child(i as u64);
            let g = gradient(&f, &model, tab, &x, &h, t, BOUND_SAMPLES, k.named("g")).unwrap();
            let hs = hessian_action(&f, &model, tab, &x, &h, &h, t, BOUND_SAMPLES, k.named("h")).unwrap();
            // a violation must clear the bound by more than the Monte Carlo band
            let excess = |v: f64, se: f64, bound: f64| v.abs() - SIGMAS * se > bound;
            if excess(g.value, g.std_error, first_bound(c1, lam, 1.0)) {
                s.literal_first += 1;
                s.first_literal_violation.get_or_insert(format!(
                    "alpha {alpha} r {r:.3} N {n} t {t:.3}: |grad| {:.4} vs c_alpha Lambda_t = {:.4}",
                    g.value.abs(),
                    first_bound(c1, lam, 1.0)
                ));
            }
            s.literal_second += usize::from(excess(hs.value, hs.std_error, second_bound(ct, lam, 1.0)));
            s.cs_first += usize::from(excess(g.value, g.std_error, gradient_bound_cs(&coef, c1, &h, 1.0)));
            s.cs_second += usize::from(excess(hs.value, hs.std_error, hessian_bound_cs(&coef, c1, ii, &h, &h, 1.0)));
        }
        s
    })
}

fn literal_bounds() -> Verdict {
    let suite = bound_suite();
    let model = SpectralModel::explicit(1.5, vec![1.0], vec![1.0]).unwrap();
    let c_alpha = table(1.5).c_alpha().unwrap();
    // aligned counterexample: γ = β = 1, x = 0, f = sin, exact gradient
    let t = 0.5;
    let o = CosOracle::new(&[1.0], -std::f64::consts::FRAC_PI_2, &model, &[0.0], t).unwrap();
    let literal = first_bound(c_alpha, model.lambda_t(t).unwrap().value, 1.0);
    let pass = suite.literal_first == 0 && suite.literal_second == 0 && o.gradient[0].abs() <= literal;
    let mut v = Verdict::new(
        pass,
        format!(
            "violations beyond {SIGMAS} sigma: first {}/{BOUND_TUPLES}, second {}/{BOUND_TUPLES}; \
             exact sin gradient at x = 0, t = {t}: {:.4} against c_alpha Lambda_t = {literal:.4}",
            suite.literal_first,
            suite.literal_second,
            o.gradient[0].abs()
        ),
    );
    if let Some(s) = &suite.first_literal_violation {
        v.notes.push(format!("first sampled violation: {s}"));
    }
    v
}

fn picard_config(budget: &RegularityBudget, drift_norm: f64, lambda: f64, samples: usize) -> PicardConfig {
    PicardConfig {
        lambda,
        gamma: budget.gamma,
        theta: budget.theta,
        beta: budget.beta,
        drift_norm,
        tol: 1e-6,
        max_iter: 30,
        quadrature: TimeQuadrature::default(),
        samples,
    }
}

fn holder_picard(lambda: f64) -> (PicardState, GridFunction) {
    let (model, budget) = rd(1, 1.8, 0.35, 1);
    let tab = table(1.8);
    let drift = Drift::from_name("holder-power", 1, 0.3, budget.beta).unwrap();
    let axes = vec![Axis::symmetric(6.0, 121).unwrap()];
    let b = GridFunction::from_field(axes.clone(), &drift).unwrap();
    let f = GridFunction::from_field(axes, &TestFunction::cos_linear(vec![1.0], 0.0)).unwrap();
    let cfg = picard_config(&budget, drift.holder_norm(), lambda, 1024);
    (solve_picard(&f, &b, &model, &tab, cfg, StreamKey::new(106)).unwrap(), f)
}

fn kolmogorov_solver() -> Verdict {
    // B = 0: ∫ e^{-λt} cos(e^{-t}x) exp(-(1 - e^{-αt})/α) dt by composite Gauss–Legendre
    let alpha = 1.5;
    let lambda = 1.0;
    let model = SpectralModel::explicit(alpha, vec![1.0], vec![1.0]).unwrap();
    let tab = table(alpha);
    let axes = vec![Axis::symmetric(4.0, 33).unwrap()];
    let g = TestFunction::cos_linear(vec![1.0], 0.0);
    let r = semigroup_resolvent(&g, &model, &tab, &axes, ResolventConfig::new(lambda), StreamKey::new(107)).unwrap();
    let gl = GaussLegendre::new(20);
    let breaks: Vec<f64> = (0..=400).map(|i| i as f64 * 60.0 / lambda / 400.0).collect();
    let mut worst: f64 = 0.0;
    for i in 0..r.u.len() {
        let x = r.u.node_coords(i)[0];
        if x.abs() > 3.0 {
            continue;
        }
        let oracle = gl.composite(&breaks, |t| {
            let scale_alpha = (1.0 - (-alpha * t).exp()) / alpha;
            (-lambda * t).exp() * ((-t).exp() * x).cos() * (-scale_alpha).exp()
        });
        worst = worst.max((r.u.node_value(i)[0] - oracle).abs());
    }
    // smallest power-of-two λ passing the contraction gate
    let (model18, budget) = rd(1, 1.8, 0.35, 1);
    let c_alpha = table(1.8).c_alpha().unwrap();
    let drift_norm = Drift::from_name("holder-power", 1, 0.3, budget.beta).unwrap().holder_norm();
    let q = budget.gamma + budget.theta - budget.beta;
    let threshold = (-8..=8)
        .map(|k| 2f64.powi(k))
        .find(|l| 2.0 * c_alpha * model18.c_lambda_truncated(*l, q).unwrap() * drift_norm < 1.0)
        .unwrap_or(f64::INFINITY);
    let mut ratios = Vec::new();
    let mut fitted = Vec::new();
    let mut converged = true;
    for lambda in [1.0, 4.0, 16.0] {
        let (state, f) = holder_picard(lambda);
        converged &= state.converged;
        fitted.push(state.fitted_ratio().unwrap_or(f64::INFINITY));
        ratios.push(verify_estimates(&state, &f, 2000, StreamKey::new(108)).ratio);
    }
    let geometric = fitted.iter().all(|r| *r < 1.0) && converged;
    let falling = ratios.windows(2).all(|w| w[1] < w[0]);
    let pass = worst <= RESOLVENT_TOL && threshold <= 1.0 && geometric && falling;
    Verdict::new(
        pass,
        format!(
            "B=0 interior sup error {worst:.2e} (tol {RESOLVENT_TOL:.0e}); gate threshold lambda {threshold}; \
             fitted ratios {fitted:.3?}; ||U||/||F|| over lambda 1,4,16: {ratios:.4?}"
        ),
    )
}

fn generator_symbol() -> Verdict {
    let beta = 0.7;
    let model = SpectralModel::explicit(1.5, vec![1.0], vec![beta]).unwrap();
    let mut worst: f64 = 0.0;
    for u in [0.5f64, 1.0, 2.0] {
        let g = GridFunction::from_fn(vec![Axis::symmetric(200.0, 40001).unwrap()], 1, |x, o| o[0] = (u * x[0]).cos()).unwrap();
        let gen = Generator::new(&g, &model).unwrap();
        for x in [0.0, 0.3, -1.1] {
            let v = gen.apply(&[x]).unwrap();
            let expect = -f64::powf(beta, 1.5) * u.powf(1.5) * (u * x).cos();
            worst = worst.max((v.jump[0] - expect).abs());
        }
    }
    let (state, f) = holder_picard(16.0);
    let est = verify_estimates(&state, &f, TRIPLES, StreamKey::new(109));
    let pass = worst <= SYMBOL_TOL && est.holding_fraction >= HOLDING;
    Verdict::new(
        pass,
        format!("symbol error {worst:.2e} (tol {SYMBOL_TOL:.0e}); double increment holds on {:.4} of {TRIPLES}", est.holding_fraction),
    )
}

fn skeleton_config(drift: &str, amplitude: f64, n: usize, dt: f64, base_cells: usize, seed: u64) -> (SimConfig, RegularityBudget) {
    let (model, budget) = rd(1, 1.8, 0.35, n);
    let cfg = SimConfig {
        model,
        drift: Drift::from_name(drift, n, amplitude, budget.beta).unwrap(),
        x0: vec![0.3; n],
        dt,
        horizon: 1.0,
        noise: NoiseMode::Skeleton { epsilon: None, base_cells },
        seed,
    };
    (cfg, budget)
}

fn residuals() -> Verdict {
    let f = TestFunction::cos_linear(vec![1.0], 0.0);
    let (c, _) = skeleton_config("holder-cusp", 0.5, 1, 1.0 / 32.0, 8, 110);
    let mut acc = MeanAccumulator::new();
    for r in 0..ITO_REPLICATES as u64 {
        let p = simulate_with_skeleton(&c, &c.skeleton(r).unwrap()).unwrap();
        acc.push(ito_residual(&p, &f, &c).unwrap().terminal_residual());
    }
    let ito_ok = acc.mean().abs() <= SIGMAS * acc.std_error();

    let (model, budget) = rd(1, 1.8, 0.35, 1);
    let tab = table(1.8);
    let drift = Drift::from_name("holder-cusp", 1, 0.3, budget.beta).unwrap();
    let b = GridFunction::from_field(vec![Axis::symmetric(10.0, 161).unwrap()], &drift).unwrap();
    let lambda = 16.0;
    let u = solve_picard(&b, &b, &model, &tab, picard_config(&budget, drift.holder_norm(), lambda, 512), StreamKey::new(111))
        .unwrap()
        .iterate;
    let mut medians = Vec::new();
    for dt in [1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0] {
        let (c, _) = skeleton_config("holder-cusp", 0.3, 1, dt, 8, 112);
        let v: Vec<f64> = (0..ZVONKIN_REPLICATES as u64)
            .map(|r| {
                let p = simulate_with_skeleton(&c, &c.skeleton(r).unwrap()).unwrap();
                zvonkin_identity_residual(&p, &u, &c, lambda).unwrap().terminal_norm()
            })
            .collect();
        medians.push(median(&v));
    }
    let zv_ok = medians.windows(2).all(|w| w[1] < w[0]);
    Verdict::new(
        ito_ok && zv_ok,
        format!(
            "Itô mean {:.3e} ± {:.2e} over {ITO_REPLICATES}; Zvonkin medians {}",
            acc.mean(),
            acc.std_error(),
            sci(&medians)
        ),
    )
}

fn uniqueness_surrogate() -> Verdict {
    let levels = [0.1, 0.05, 0.025, 0.0125];
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [1usize, 4] {
        let (c, budget) = skeleton_config("reaction", 0.5, n, 0.1, 10, 113);
        let rep = shared_noise_refinement_experiment(&c, &levels, 0.1 / 64.0, LADDER_REPLICATES, Some(budget.gamma)).unwrap();
        pass &= rep.medians_strictly_decreasing;
        parts.push(format!("N={n} medians {} (monotone {:.2}, order {:.2})", sci(&rep.medians), rep.monotone_fraction, rep.observed_order));
    }
    let mut v = Verdict::new(pass, parts.join("; "));
    // below the admissible interval: recorded, not asserted
    let (mut c, budget) = skeleton_config("reaction", 0.5, 1, 0.1, 10, 113);
    let low = budget.beta_interval.lower - 0.2;
    c.drift = Drift::from_name("reaction", 1, 0.5, low).unwrap();
    let note = match shared_noise_refinement_experiment(&c, &levels, 0.1 / 64.0, 8, Some(budget.gamma)) {
        Err(SimError::Inadmissible { beta, lower, upper }) => format!("inadmissible beta {beta:.3} refused: interval ({lower:.3}, {upper:.3})"),
        other => format!("inadmissible beta {low:.3}: unexpected {:?}", other.map(|r| r.medians)),
    };
    v.notes.push(note);
    v
}

fn run_binary(args: &[&str], threads: &str, cwd: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_levy-spde"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .current_dir(cwd)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("binary runs");
    status.code().unwrap_or(-1)
}

fn differing_outputs(a: &Path, b: &Path) -> Vec<String> {
    let mut diff = Vec::new();
    let mut names: Vec<PathBuf> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for p in names {
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        if name == "manifest.toml" {
            continue;
        }
        if std::fs::read(&p).ok() != std::fs::read(b.join(&name)).ok() {
            diff.push(name);
        }
    }
    diff
}

fn manifest_value(path: &Path, key: &str) -> Option<String> {
    std::fs::read_to_string(path).ok()?.lines().find(|l| l.starts_with(key)).map(str::to_string)
}

fn determinism() -> Verdict {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let suites: [(&str, &[&str]); 7] = [
        ("check", &["check"]),
        ("sample", &["sample", "--draws", "20000", "--emit-plot-data"]),
        ("semigroup", &["semigroup", "--samples", "4000", "--times", "0.5,1", "--oracle"]),
        ("kolmogorov", &["kolmogorov", "--half-width", "4", "--grid-points", "41", "--resolvent-samples", "128", "--triples", "500"]),
        ("simulate", &["simulate", "--residual", "ito", "--dt", "0.0125", "--base-cells", "10"]),
        ("refinement", &["experiment", "--replicates", "24", "--levels", "0.1,0.05", "--drift", "reaction", "--modes", "3"]),
        ("ito", &["experiment", "--kind", "ito", "--replicates", "64", "--levels", "0.0625,0.03125"]),
    ];
    let mut failures = Vec::new();
    for (name, args) in suites {
        let first = format!("first/{name}");
        let second = format!("second/{name}");
        let mut a: Vec<&str> = args.to_vec();
        a.extend(["--seed", "2024", "--out", &first, "--cache", "cache"]);
        let code1 = run_binary(&a, "1", &root);
        let manifest = format!("{first}/manifest.toml");
        let b = [args[0], "--config", &manifest, "--out", &second, "--cache", "cache"];
        let code2 = run_binary(&b, "4", &root);
        let diff = differing_outputs(&root.join(&first), &root.join(&second));
        let hash_same = manifest_value(&root.join(&manifest), "config_hash") == manifest_value(&root.join(format!("{second}/manifest.toml")), "config_hash");
        if code1 != code2 || !(code1 == 0 || code1 == 2) || !diff.is_empty() || !hash_same {
            failures.push(format!("{name}: exit {code1}/{code2}, differing {diff:?}, hash equal {hash_same}"));
        }
    }
    // entropy seed: recorded in the manifest and honoured on rerun
    let code = run_binary(&["sample", "--draws", "5000", "--out", "entropy/a", "--cache", "cache"], "2", &root);
    let seed_line = manifest_value(&root.join("entropy/a/manifest.toml"), "seed =");
    let source = manifest_value(&root.join("entropy/a/manifest.toml"), "seed_source");
    run_binary(&["sample", "--config", "entropy/a/manifest.toml", "--out", "entropy/b", "--cache", "cache"], "3", &root);
    let entropy_diff = differing_outputs(&root.join("entropy/a"), &root.join("entropy/b"));
    let entropy_ok = code == 0 && seed_line.is_some() && source.as_deref() == Some("seed_source = \"entropy\"") && entropy_diff.is_empty();
    if !entropy_ok {
        failures.push(format!("entropy rerun: exit {code}, {seed_line:?}, {source:?}, differing {entropy_diff:?}"));
    }
    let pass = failures.is_empty();
    let detail = if pass {
        "7 suites rerun from manifest with 4 workers after 1: byte-identical; entropy seed recorded and reproduced".to_string()
    } else {
        failures.join("; ")
    };
    Verdict::new(pass, detail)
}

fn main() {
    // `cargo test -- --list` and filters from the harness protocol
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    // (label, name, run, known gap); a known gap prints FAIL but does not fail the run
    let criteria: [Criterion; 9] = [
        ("1", "stable law fidelity", stable_law_fidelity, None),
        ("2", "spectral functionals", spectral_functionals, None),
        ("3", "Mehler derivative formulas and Cauchy-Schwarz bounds", mehler_derivatives, None),
        ("3b", "literal sup bounds c_alpha Lambda_t and c_tilde_alpha Lambda_t^2", literal_bounds, Some(LITERAL_GAP)),
        ("4", "Kolmogorov solver", kolmogorov_solver, None),
        ("5", "generator symbol and double increments", generator_symbol, None),
        ("6", "Itô and Zvonkin residuals", residuals, None),
        ("7", "pathwise-uniqueness surrogate", uniqueness_surrogate, None),
        ("8", "determinism", determinism, None),
    ];
    let mut failed = Vec::new();
    let mut gaps = Vec::new();
    for (label, name, run, gap) in criteria {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        println!("{} {label}. {name}: {} [{secs:.1} s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        for n in &v.notes {
            println!("    note: {n}");
        }
        match (v.pass, gap) {
            (true, _) => {}
            (false, Some(why)) => {
                println!("    known gap: {why}");
                gaps.push(label);
            }
            (false, None) => failed.push(label),
        }
    }
    println!("acceptance: {} criteria, failing {failed:?}, known gaps {gaps:?}", criteria.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
