//! Statistical behaviour of exponential sampling.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use weaver::exact::build_pmf_vector;
use weaver::rational::{frac, to_f64, Rational};
use weaver::sampler::{
    chi_square_statistic, draw_selection_path, dyadic_ks_distance, leaf_histogram, monte_carlo_moments,
    run_exponential_sample, sample_means, standardize_parents, ParentDistribution, StreamRng,
};
use weaver::WeaverParams;

fn points() -> (ParentDistribution, ParentDistribution) {
    (
        ParentDistribution::point_mass(0.0).unwrap(),
        ParentDistribution::point_mass(1.0).unwrap(),
    )
}

fn gaussians() -> (ParentDistribution, ParentDistribution) {
    (
        ParentDistribution::gaussian(0.0, 1.0).unwrap(),
        ParentDistribution::gaussian(1.0, 1.0).unwrap(),
    )
}

fn binomial_pmf(n: u32, l: u32, p: f64) -> f64 {
    let c: f64 = (0..l).map(|i| (n - i) as f64 / (i + 1) as f64).product();
    c * p.powi(l as i32) * (1.0 - p).powi((n - l) as i32)
}

#[test]
fn selection_counts_are_binomial() {
    let p = frac(3, 10);
    let draws = 100_000u64;
    let mut counts = [0u64; 5];
    for i in 0..draws {
        let path = draw_selection_path(4, &p, &mut StreamRng::new(11, i)).unwrap();
        counts[path.ones() as usize] += 1;
    }
    let stat: f64 = (0..=4)
        .map(|l| {
            let e = draws as f64 * binomial_pmf(4, l, 0.3);
            (counts[l as usize] as f64 - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(4.0).unwrap().cdf(stat);
    assert!(p_value > 0.001, "chi2 = {stat}, p = {p_value}");
}

#[test]
fn leaf_frequencies_within_four_sigma() {
    let reps = 100_000usize;
    for (n, p) in [(3u32, frac(2, 3)), (6, frac(2, 3)), (6, frac(3, 10))] {
        let counts = leaf_histogram(n, &p, reps, 2024).unwrap();
        let pmf = build_pmf_vector(&WeaverParams::new(n, p.clone()).unwrap()).unwrap().into_pmf().unwrap();
        for (k, (&c, mass)) in counts.iter().zip(&pmf).enumerate() {
            let m = to_f64(mass);
            let sd = (reps as f64 * m * (1.0 - m)).sqrt();
            let dev = (c as f64 - reps as f64 * m).abs() / sd;
            assert!(dev < 4.0, "n={n} p={p} k={k}: {dev:.2} sd");
        }
        let stat = chi_square_statistic(&counts, &pmf);
        let df = (pmf.len() - 1) as f64;
        assert!(1.0 - ChiSquared::new(df).unwrap().cdf(stat) > 0.001);
    }
}

#[test]
fn conditional_mean_is_the_binary_expansion() {
    let (h0, h1) = gaussians();
    for stream in 0..200 {
        let run = run_exponential_sample(9, &h0, &h1, &frac(5, 8), &mut StreamRng::new(1, stream)).unwrap();
        let expansion: u64 = (1..=9).map(|j| (run.path.bit(j - 1) as u64) << (j - 1)).sum();
        let width = Rational::from_integer(511.into());
        assert_eq!(&run.conditional_mean * width, Rational::from_integer(expansion.into()));
        let from_bits = run.path.bits().iter().fold(0u64, |acc, &b| acc * 2 + b as u64);
        assert_eq!(from_bits, expansion);
    }
}

#[test]
fn identical_seeds_give_identical_runs() {
    let (h0, h1) = standardize_parents(
        &ParentDistribution::uniform(0.0, 2.0).unwrap(),
        &ParentDistribution::gaussian(3.0, 2.0).unwrap(),
    )
    .unwrap();
    let p = frac(4, 7);
    let a = run_exponential_sample(10, &h0, &h1, &p, &mut StreamRng::new(77, 3)).unwrap();
    let b = run_exponential_sample(10, &h0, &h1, &p, &mut StreamRng::new(77, 3)).unwrap();
    assert_eq!(a, b);
    let x = monte_carlo_moments(6, &h0, &h1, &p, 500, 77).unwrap();
    let y = monte_carlo_moments(6, &h0, &h1, &p, 500, 77).unwrap();
    assert_eq!(x, y);
    assert_eq!(x.empirical_mean.to_bits(), y.empirical_mean.to_bits());
    let z = monte_carlo_moments(6, &h0, &h1, &p, 500, 78).unwrap();
    assert_ne!(x.empirical_mean, z.empirical_mean);
}

#[test]
fn mean_contract_over_standard_grid() {
    let uniforms = standardize_parents(
        &ParentDistribution::uniform(-1.0, 1.0).unwrap(),
        &ParentDistribution::uniform(0.0, 4.0).unwrap(),
    )
    .unwrap();
    let bern = standardize_parents(
        &ParentDistribution::bernoulli(0.2).unwrap(),
        &ParentDistribution::bernoulli(0.9).unwrap(),
    )
    .unwrap();
    for (h0, h1) in [points(), gaussians(), uniforms, bern] {
        for n in [1u32, 4, 8] {
            for p in [frac(1, 3), frac(1, 2), frac(2, 3)] {
                let report = monte_carlo_moments(n, &h0, &h1, &p, 2_000, 5).unwrap();
                assert!(report.z_score.abs() < 4.0, "n={n} p={p} {h0:?}: z={}", report.z_score);
                assert!(report.standard_error > 0.0);
                let expected_z = (report.empirical_mean - to_f64(&report.exact_mean)) / report.standard_error;
                assert_eq!(report.z_score, expected_z);
            }
        }
    }
}

#[test]
fn point_mass_variance_estimates_the_weaver_variance() {
    let (h0, h1) = points();
    for (n, p) in [(3u32, frac(2, 3)), (5, frac(1, 4)), (10, frac(1, 2))] {
        let report = monte_carlo_moments(n, &h0, &h1, &p, 20_000, 31).unwrap();
        let exact = to_f64(&weaver::analysis::exact_variance(&WeaverParams::new(n, p.clone()).unwrap()));
        assert_eq!(report.exact_variance, exact);
        assert!(report.variance_z_score.abs() < 3.0, "n={n}: {}", report.variance_z_score);
    }
}

#[test]
fn sample_means_approach_the_limit_law() {
    let (h0, h1) = gaussians();
    let p = frac(2, 3);
    let distances: Vec<f64> = [2u32, 6, 12]
        .iter()
        .map(|&n| {
            let xs = sample_means(n, &h0, &h1, &p, 4_000, 99).unwrap();
            dyadic_ks_distance(&xs, &p, 4).unwrap()
        })
        .collect();
    assert!(distances[0] > distances[1] && distances[1] > distances[2], "{distances:?}");
    assert!(distances[2] < 0.05, "{distances:?}");
}
