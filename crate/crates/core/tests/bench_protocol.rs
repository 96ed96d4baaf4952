use fracsvt::bench::{
    add_noise, freedom_ratio, gen_low_rank, gen_mask, low_rank_approx, run_experiment,
    sample_count, ExperimentSpec,
};
use fracsvt::LambdaMode;

#[test]
fn truncation_residual_is_tail_energy() {
    for seed in 1..=5 {
        let m = gen_low_rank(10, 10, 10, seed).unwrap();
        let s = m.singular_values().unwrap();
        for r in [0, 3, 7] {
            let tail: f64 = s.values()[r..].iter().map(|v| v * v).sum();
            let resid = m.sub(&low_rank_approx(&m, r).unwrap()).unwrap().frobenius_norm_sq();
            assert!((resid - tail).abs() <= 1e-8 * tail.max(1e-300), "r={r}: {resid} vs {tail}");
        }
    }
}

#[test]
fn noise_energy_matches_its_expectation() {
    // E ||b - P(M)||^2 = xi1^2 s
    let (xi1, s) = (0.05, 1000);
    let m = gen_low_rank(40, 50, 3, 1).unwrap();
    let mut total = 0.0;
    for seed in 1..=20 {
        let mask = gen_mask(40, 50, 0.5, seed).unwrap();
        assert_eq!(mask.len(), s);
        let clean = mask.gather(&m).unwrap();
        let b = add_noise(&m, &mask, xi1, seed).unwrap();
        total += b.iter().zip(&clean).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    }
    let estimate = total / 20.0;
    let expected = xi1 * xi1 * s as f64;
    assert!((estimate / expected - 1.0).abs() < 0.1, "{estimate} vs {expected}");
}

#[test]
fn table_freedom_ratios() {
    assert_eq!(sample_count(256, 256, 0.5), 32768);
    assert_eq!(sample_count(256, 256, 0.4), 26214);
    assert_eq!(format!("{:.4}", freedom_ratio(32768, 256, 256, 30).unwrap()), "2.2661");
    assert_eq!(format!("{:.4}", freedom_ratio(26214, 256, 256, 30).unwrap()), "1.8129");
}

#[test]
fn repeated_experiments_are_identical() {
    let spec = ExperimentSpec {
        seed: 42,
        repetitions: 2,
        ..ExperimentSpec::synthetic(20, 18, 2, 0.5, 0.02, LambdaMode::Scheme2)
    };
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.re.to_bits(), y.re.to_bits());
        assert_eq!(x.iterations, y.iterations);
    }
    assert_ne!(a[0].re, a[1].re);
}
