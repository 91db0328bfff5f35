//! Property suites: gradients against finite differences, PCA against an
//! independent eigen-solver, optimizer invariants and thread-count
//! determinism.

use aego::analysis::{pca_fit, pca_metrics};
use aego::bench::{build_c1_instance, Problem, ProblemId};
use aego::latent::{differential_evolution_with, latent_cost, optimize_latent, DEConfig};
use aego::localopt::{generate_training_set, AdamConfig};
use aego::nn::{
    build_network, discriminator_loss_gradients, reconstruction_loss_gradients, surrogate_loss_gradients,
    Activation, AutoencoderBundle, DenseNetwork, NetworkGradients, Normalization, TrainConfig,
};
use aego::pipeline::{run_aego, AegoConfig, C1Settings};
use aego::rng;
use aego::trace::RunTrace;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_point(p: &Problem, r: &mut impl Rng, margin: f64) -> Vec<f64> {
    p.lower()
        .iter()
        .zip(p.upper())
        .map(|(lo, hi)| {
            let w = hi - lo;
            r.random_range(lo + margin * w..hi - margin * w)
        })
        .collect()
}

#[test]
fn benchmark_gradients_match_central_differences() {
    let c1 = Problem::c1(build_c1_instance(5, 20, 3, 200, 0.3).unwrap());
    let mut problems = vec![c1];
    for id in [ProblemId::C2, ProblemId::C3, ProblemId::C4] {
        problems.push(Problem::new(id, 20).unwrap());
    }
    let mut r = rng::rng(77);
    for p in &problems {
        let width = p.upper()[0] - p.lower()[0];
        let h = 1e-5 * width;
        for _ in 0..20 {
            let x = random_point(p, &mut r, 0.01);
            let g = p.gradient(&x);
            for k in 0..p.dim() {
                // sqrt|x| has unbounded higher derivatives at 0, so central
                // differences with this step are only accurate well away from it.
                if p.id() == ProblemId::C2 && x[k].abs() < 100.0 * h {
                    continue;
                }
                let mut up = x.clone();
                up[k] += h;
                let mut down = x.clone();
                down[k] -= h;
                let fd = (p.cost(&up) - p.cost(&down)) / (2.0 * h);
                // Absolute floor relative to the cost scale guards coordinates
                // whose derivative is essentially zero.
                let scale = fd.abs().max(g[k].abs()).max(1e-6 * p.cost(&x).abs().max(1.0));
                assert!(
                    (fd - g[k]).abs() / scale < 1e-5,
                    "{} coordinate {k} at {}: fd {fd} vs analytic {}",
                    p.id(),
                    x[k],
                    g[k]
                );
            }
        }
    }
}

/// Central-difference check of `loss` over every parameter of `net`.
fn check_net_gradient(net: &DenseNetwork, analytic: &NetworkGradients, loss: impl Fn(&DenseNetwork) -> f64, what: &str) {
    let base = net.params();
    let flat = analytic.flatten();
    let mut probe = net.clone();
    let h = 1e-6;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] += h;
        probe.set_params(&p);
        let up = loss(&probe);
        p[k] -= 2.0 * h;
        probe.set_params(&p);
        let down = loss(&probe);
        let fd = (up - down) / (2.0 * h);
        let scale = fd.abs().max(flat[k].abs()).max(1e-4);
        assert!((fd - flat[k]).abs() / scale < 1e-5, "{what} param {k}: fd {fd} vs {}", flat[k]);
    }
}

fn small_net(dims: &[usize], acts: &[Activation], seed: u64) -> DenseNetwork {
    let mut net = build_network(dims, acts, seed).unwrap();
    let mut r = rng::rng(seed ^ 0xabc);
    for l in net.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = r.random_range(-0.3..0.3));
    }
    net
}

#[test]
fn network_loss_gradients_match_central_differences() {
    use Activation::*;
    let enc = small_net(&[6, 5, 3], &[TanhLeakyRelu, Sigmoid], 1);
    let dec = small_net(&[3, 5, 6], &[TanhLeakyRelu, Tanh], 2);
    let head = small_net(&[3, 4, 1], &[Tanh, Sigmoid], 3);
    let mut r = rng::rng(9);
    let x = Array2::from_shape_fn((5, 6), |_| r.random_range(-0.9..0.9));
    let weights: Vec<f64> = (0..6).map(|_| r.random_range(0.2..1.5)).collect();
    let targets: Vec<f64> = (0..5).map(|_| r.random_range(0.1..0.9)).collect();
    let prior = Array2::from_shape_fn((5, 3), |_| r.random::<f64>());

    let (_, ge, gd) = reconstruction_loss_gradients(&enc, &dec, x.view(), Some(&weights));
    check_net_gradient(&enc, &ge, |e| reconstruction_loss_gradients(e, &dec, x.view(), Some(&weights)).0, "recon/encoder");
    check_net_gradient(&dec, &gd, |d| reconstruction_loss_gradients(&enc, d, x.view(), Some(&weights)).0, "recon/decoder");

    let (_, ge, gs) = surrogate_loss_gradients(&enc, &head, x.view(), &targets, 0.7);
    check_net_gradient(&enc, &ge, |e| surrogate_loss_gradients(e, &head, x.view(), &targets, 0.7).0, "surrogate/encoder");
    check_net_gradient(&head, &gs, |s| surrogate_loss_gradients(&enc, s, x.view(), &targets, 0.7).0, "surrogate/head");

    let (_, gdis, _, genc) = discriminator_loss_gradients(&enc, &head, x.view(), prior.view());
    check_net_gradient(&head, &gdis, |d| discriminator_loss_gradients(&enc, d, x.view(), prior.view()).0, "critic/discriminator");
    check_net_gradient(&enc, &genc, |e| discriminator_loss_gradients(e, &head, x.view(), prior.view()).2, "fool/encoder");
}

/// Independent oracle: power iteration with deflation, one eigenpair at a
/// time.
fn power_eigen(cov: &[f64], n: usize) -> Vec<(f64, Vec<f64>)> {
    let mut a = cov.to_vec();
    let mut out = Vec::new();
    let mut r = rng::rng(123);
    for _ in 0..n {
        let mut v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                lambda = 0.0;
                break;
            }
            v = w.iter().map(|x| x / norm).collect();
            lambda = (0..n).map(|i| v[i] * (0..n).map(|j| a[i * n + j] * v[j]).sum::<f64>()).sum();
        }
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] -= lambda * v[i] * v[j];
            }
        }
        out.push((lambda, v));
    }
    out
}

#[test]
fn pca_matches_power_iteration_oracle() {
    let (count, n) = (5, 8);
    let mut r = rng::rng(31);
    let data: Vec<f64> = (0..count * n).map(|_| r.random_range(-1.0..1.0)).collect();
    let model = pca_fit(&data, n).unwrap();

    // Covariance computed directly, divisor count - 1.
    let mean: Vec<f64> = (0..n).map(|j| (0..count).map(|i| data[i * n + j]).sum::<f64>() / count as f64).collect();
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cov[i * n + j] = (0..count)
                .map(|s| (data[s * n + i] - mean[i]) * (data[s * n + j] - mean[j]))
                .sum::<f64>()
                / (count - 1) as f64;
        }
    }
    let oracle = power_eigen(&cov, n);
    for (k, (lambda, v)) in oracle.iter().enumerate() {
        assert!((model.eigenvalues[k] - lambda.max(0.0)).abs() < 1e-8, "eigenvalue {k}");
        // Rank is count - 1; directions of the null space are not unique.
        if k < count - 1 {
            let c = model.component(k);
            let dot: f64 = c.iter().zip(v).map(|(a, b)| a * b).sum();
            let sign = dot.signum();
            for (a, b) in c.iter().zip(v) {
                assert!((a - sign * b).abs() < 1e-8, "component {k}");
            }
        }
    }
    // Ratios are the oracle partial sums.
    let total: f64 = oracle.iter().map(|(l, _)| l.max(0.0)).sum();
    for m in 1..=n {
        let (_, ratio) = pca_metrics(&model, &data, m).unwrap();
        let partial: f64 = oracle[..m].iter().map(|(l, _)| l.max(0.0)).sum();
        assert!((ratio - partial / total).abs() < 1e-8);
    }
}

#[test]
fn pca_orthonormal_and_loss_identity() {
    let (count, n) = (40, 9);
    let mut r = rng::rng(8);
    let data: Vec<f64> = (0..count * n).map(|i| r.random_range(-1.0..1.0) * (1.0 + (i % n) as f64)).collect();
    let model = pca_fit(&data, n).unwrap();
    for a in 0..n {
        for b in 0..n {
            let d: f64 = model.component(a).iter().zip(model.component(b)).map(|(x, y)| x * y).sum();
            assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
    }
    assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    for m in 1..=n {
        let (loss, _) = pca_metrics(&model, &data, m).unwrap();
        // Mean over samples uses divisor count, the covariance count - 1.
        let tail: f64 = model.eigenvalues[m..].iter().sum();
        let expected = (count - 1) as f64 / count as f64 * tail / n as f64;
        assert!((loss - expected).abs() < 1e-8, "m = {m}: {loss} vs {expected}");
    }
    let (loss, ratio) = pca_metrics(&model, &data, n).unwrap();
    assert!(loss <= 1e-10 && (ratio - 1.0).abs() < 1e-12);
}

#[test]
fn pca_on_a_subspace_and_isotropic_sample() {
    // Points on a 3-dimensional affine subspace of R^7.
    let (n, k) = (7, 3);
    let mut r = rng::rng(4);
    let basis: Vec<f64> = (0..k * n).map(|_| r.random_range(-1.0..1.0)).collect();
    let data: Vec<f64> = (0..50)
        .flat_map(|_| {
            let c: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
            let basis = &basis;
            (0..n).map(move |j| 0.5 + (0..k).map(|i| c[i] * basis[i * n + j]).sum::<f64>())
        })
        .collect();
    let model = pca_fit(&data, n).unwrap();
    assert!(model.eigenvalues[k..].iter().all(|&l| l < 1e-10));
    assert!(pca_metrics(&model, &data, k).unwrap().0 <= 1e-10);

    let iso: Vec<f64> = (0..20_000).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let model = pca_fit(&iso, 2).unwrap();
    assert!(model.eigenvalues[1] / model.eigenvalues[0] > 0.95);
}

#[test]
fn mean_minimizes_the_sum_of_squared_distances() {
    let mut r = rng::rng(12);
    let (count, n) = (30, 4);
    let pts: Vec<Vec<f64>> = (0..count).map(|_| (0..n).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
    let objective = |c: &[f64]| -> f64 { pts.iter().map(|p| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum() };
    let mean: Vec<f64> = (0..n).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / count as f64).collect();
    let best = objective(&mean);
    for _ in 0..100 {
        let scale = 10f64.powf(r.random_range(-4.0..0.0));
        let other: Vec<f64> = mean.iter().map(|m| m + scale * r.random_range(-1.0..1.0)).collect();
        assert!(objective(&other) > best);
    }
}

#[test]
fn de_is_monotone_and_stays_in_the_cube() {
    let cost = |z: &[f64]| -> f64 { z.iter().enumerate().map(|(i, v)| ((i + 1) as f64 * v).sin().abs() + (v - 0.7).powi(2)).sum() };
    for seed in 0..5 {
        let cfg = DEConfig::new(10, 40, 0.6, 0.95).with_seed(seed);
        let mut outside = 0;
        let res = differential_evolution_with(
            |z| Ok((cost(z), ())),
            3,
            &cfg,
            |z, _, _| outside += z.iter().filter(|v| !(0.0..=1.0).contains(*v)).count(),
        )
        .unwrap();
        assert_eq!(outside, 0);
        assert!(res.generation_best.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn encode_decode_ranges_and_zero_step_latent_cost() {
    for id in ProblemId::BENCHMARKS {
        let n = 12;
        let problem = if id == ProblemId::C1 {
            Problem::c1(build_c1_instance(1, n, 2, 30, 0.1).unwrap())
        } else {
            Problem::new(id, n).unwrap()
        };
        let bundle = AutoencoderBundle::new(Normalization::for_problem(&problem), 3, &TrainConfig { seed: 6, ..TrainConfig::default() }).unwrap();
        let mut r = rng::rng(2);
        for _ in 0..10_000 {
            let z: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
            let x = bundle.decode(&z);
            assert!(x.iter().zip(problem.lower().iter().zip(problem.upper())).all(|(v, (lo, hi))| v > lo && v < hi));
        }
        for _ in 0..200 {
            let x = random_point(&problem, &mut r, 0.0);
            assert!(bundle.encode(&x).iter().all(|v| *v > 0.0 && *v < 1.0));
            let z: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
            let e = latent_cost(&bundle, &problem, &z, 0, &AdamConfig::new(0.1, 0.9, 0.999)).unwrap();
            assert_eq!(e.cost, problem.cost(&bundle.decode(&z)));
        }
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn one_and_eight_threads_agree_bit_for_bit() {
    let p = Problem::new(ProblemId::C4, 10).unwrap();
    let cfg = AdamConfig::new(30.0, 0.9, 0.999);
    let a = in_pool(1, || generate_training_set(&p, 64, 20, &cfg, 3).unwrap());
    let b = in_pool(8, || generate_training_set(&p, 64, 20, &cfg, 3).unwrap());
    assert_eq!(a, b);

    let bundle = AutoencoderBundle::new(Normalization::for_problem(&p), 2, &TrainConfig::default()).unwrap();
    let de = DEConfig::new(10, 15, 0.6, 0.95).with_seed(4);
    let latent = |threads| {
        in_pool(threads, || {
            let mut t = RunTrace::new();
            optimize_latent(&bundle, &p, 3, &AdamConfig::new(0.5, 0.9, 0.999), &de, &mut t).unwrap();
            t.to_csv()
        })
    };
    assert_eq!(latent(1), latent(8));

    let mut run_cfg = AegoConfig::preset(ProblemId::C1, 10, 2);
    run_cfg.samples = 40;
    run_cfg.lambda = 5;
    run_cfg.nu = 20;
    run_cfg.de.generations = 5;
    run_cfg.train.epochs = 3;
    run_cfg.c1 = C1Settings {
        manifold_dim: 2,
        num_minima: 30,
        radius: 0.1,
        ..C1Settings::default()
    };
    let full = |threads| {
        in_pool(threads, || {
            let out = run_aego(&run_cfg).unwrap();
            (out.trace.to_csv(), out.report.without_timing())
        })
    };
    assert_eq!(full(1), full(8));
}
