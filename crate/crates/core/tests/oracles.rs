mod common;

use nalgebra::DMatrix;
use qwfs::configurations::{coincidence_probability, Layout, MacroPixelMap, PhaseMask, ShapingConfiguration};
use qwfs::experiments::{baseline_probability, run_ensemble, BaselineMode, ExperimentSetup, RunSpec};
use qwfs::media::{generate, haar_unitary, MediumKind, MediumModel};
use qwfs::numerics::{largest_singular_value_sq, matmul, Complex64, ComplexMatrix, RngStream};
use qwfs::shaping::{analytic_phases_1ps, build_kernel, optimize, OptimizerSpec};

use common::grid_search;

#[test]
fn one_photon_closed_form_beats_exhaustive_grid() {
    let n = 6;
    let levels = 12;
    let full = MacroPixelMap::full(n).unwrap();
    for seed in 0..3 {
        let t = generate(MediumModel::new(MediumKind::GaussianIID, n, RngStream::new(seed, 0))).unwrap();
        let cfg = ShapingConfiguration::new(Layout::OnePhotonShaping, 1, 4);
        let (grid_best, _) = grid_search(n, levels, |ph| {
            coincidence_probability(&cfg, &t, &PhaseMask::new(ph.to_vec(), full.clone()).unwrap()).unwrap()
        });
        let analytic = coincidence_probability(&cfg, &t, &analytic_phases_1ps(&t, 1, 4).unwrap()).unwrap();
        assert!(analytic >= grid_best - 1e-15, "grid {grid_best} above closed form {analytic}");
        // every term is off by at most half a grid step, so |Amp| shrinks by at most cos(π/levels)
        let slack = (std::f64::consts::PI / levels as f64).cos().powi(2);
        assert!(grid_best >= analytic * slack, "grid {grid_best} vs closed form {analytic}");
    }
}

#[test]
fn detection_optimizer_matches_exhaustive_grid() {
    let n = 3;
    let levels = 64;
    let full = MacroPixelMap::full(n).unwrap();
    for seed in 0..4 {
        let t = generate(MediumModel::new(MediumKind::HaarUnitary, n, RngStream::new(seed, 0))).unwrap();
        for (alpha, beta) in [(0, 1), (2, 2)] {
            let cfg = ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, alpha, beta);
            let (grid_best, _) = grid_search(n, levels, |ph| {
                coincidence_probability(&cfg, &t, &PhaseMask::new(ph.to_vec(), full.clone()).unwrap()).unwrap()
            });
            let kernel = build_kernel(&t, &cfg).unwrap();
            let res = optimize(&kernel, &full, &OptimizerSpec::default(), RngStream::new(seed, 1)).unwrap();
            assert!(res.objective >= grid_best - 1e-15, "grid {grid_best} beats optimizer {}", res.objective);

            // Hessian bound: with S = Σ|a_nm|, every second derivative of P is at most 8S²/N
            let s: f64 = kernel.a.as_slice().iter().map(|z| z.norm()).sum();
            let half_step = std::f64::consts::PI / levels as f64;
            let slack = 0.5 * (n as f64) * (8.0 * s * s / n as f64) * (n as f64) * half_step * half_step;
            assert!(res.objective <= grid_best + slack, "optimizer {} far above grid {grid_best}", res.objective);
        }
    }
}

#[test]
fn power_iteration_matches_dense_svd() {
    for seed in 0..5 {
        let t = generate(MediumModel::new(MediumKind::GaussianIID, 8, RngStream::new(seed, 0))).unwrap();
        let j = t.j();
        let dense = DMatrix::from_fn(8, 8, |r, c| j[(r, c)]);
        let svd_top = dense.singular_values().max();
        let estimate = largest_singular_value_sq(j, 1e-14).unwrap();
        assert!((estimate - svd_top * svd_top).abs() < 1e-8, "{estimate} vs {}", svd_top * svd_top);
    }
}

#[test]
fn haar_marginal_has_beta_mean() {
    // |t_00|² ~ Beta(1, N−1), mean 1/N
    let n = 32;
    let samples = 2000;
    let mean: f64 = (0..samples)
        .map(|s| haar_unitary(n, RngStream::new(11, s)).unwrap()[(0, 0)].norm_sqr())
        .sum::<f64>()
        / samples as f64;
    assert!((mean * n as f64 - 1.0).abs() < 0.1, "mean |t00|² = {mean}");
}

fn ks_statistic(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / k).abs().max(((i + 1) as f64 / k - c).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn haar_is_invariant_under_fixed_rotations() {
    let n = 8;
    let samples = 3000;
    let fixed = haar_unitary(n, RngStream::new(999, 0)).unwrap();
    let beta_cdf = |x: f64| 1.0 - (1.0 - x).powi(n as i32 - 1);
    let mut plain = Vec::new();
    let mut rotated = Vec::new();
    let mut trace_sq = 0.0;
    let mut entry_mean = Complex64::new(0.0, 0.0);
    for s in 0..samples {
        let u = haar_unitary(n, RngStream::new(12, s)).unwrap();
        plain.push(u[(0, 0)].norm_sqr());
        rotated.push(matmul(&u, &fixed).unwrap()[(0, 0)].norm_sqr());
        trace_sq += u.diagonal().iter().sum::<Complex64>().norm_sqr();
        entry_mean += u[(0, 0)];
    }
    // 1% critical value of the one-sample KS statistic
    let critical = 1.63 / (samples as f64).sqrt();
    assert!(ks_statistic(plain, beta_cdf) < critical);
    assert!(ks_statistic(rotated, beta_cdf) < critical);
    // E|tr U|² = 1 and E[u_00] = 0 for the Haar measure; a wrong phase
    // correction of the QR factor breaks both
    let trace_sq = trace_sq / samples as f64;
    assert!((trace_sq - 1.0).abs() < 0.12, "E|tr U|² = {trace_sq}");
    assert!((entry_mean / samples as f64).norm() < 4.0 / ((n * samples as usize) as f64).sqrt());
}

#[test]
fn gaussian_spatial_baseline_averages_to_unitary_value() {
    let n = 256;
    let mean: f64 = (0..50)
        .map(|s| {
            let t = generate(MediumModel::new(MediumKind::GaussianIID, n, RngStream::new(s, 0))).unwrap();
            baseline_probability(&t, 0, BaselineMode::SpatialMean).unwrap()
        })
        .sum::<f64>()
        / 50.0;
    let reference = 1.0 / (2.0 * (n * n) as f64);
    assert!((mean / reference - 1.0).abs() < 0.15, "ratio {}", mean / reference);
}

#[test]
fn ensembles_are_bit_identical_across_thread_counts() {
    let spec = RunSpec::new(
        ExperimentSetup::new(Layout::TwoPhotonDetectionShaping, false),
        MediumKind::GaussianIID,
        24,
    )
    .with_doc(0.5);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&spec, 31, 6).unwrap().records)
    };
    let one = run(1);
    let eight = run(8);
    for (a, b) in one.iter().zip(&eight) {
        assert_eq!(a.p_opt.to_bits(), b.p_opt.to_bits());
        assert_eq!(a, b);
    }
}

#[test]
fn identity_matrix_round_trip_is_exact() {
    let id = ComplexMatrix::identity(5);
    assert_eq!(matmul(&id, &id).unwrap(), id);
}
