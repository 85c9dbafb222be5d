//! Exponential sampling from two parent populations.
//!
//! A run of depth `n` draws `n` independent Bernoulli(p) selections
//! `b_0, ..., b_{n-1}` and then, for block `j = 1..=n`, `2^{j-1}` iid values
//! from the second population if `b_{j-1} = 1` and from the first otherwise.
//! The run records the block sums `T_j`, the total `S_n`, the sample mean
//! `S_n / (2^n - 1)` and the exact conditional mean `Y_n`, which depends on
//! the selections alone.
//!
//! Replications are independent ChaCha8 streams of one root seed, so
//! ensembles can be produced in parallel and still reproduce bit for bit.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::analysis;
use crate::error::{Result, WeaverError};
use crate::exact::{check_probability, cdf_at_dyadic, DyadicPoint, SelectionPath, WeaverParams};
use crate::rational::{self, Rational};

/// Largest depth for runs that materialize every draw (`2^30 - 1` draws).
pub const MAX_DRAW_DEPTH: u32 = 30;
/// Largest depth for runs that only draw the selections.
pub const MAX_PATH_DEPTH: u32 = 63;
pub const MIN_REPLICATIONS: usize = 100;

const STANDARDIZATION_TOLERANCE: f64 = 1e-12;

/// A parent population with finite variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParentDistribution {
    PointMass { value: f64 },
    /// `high` with probability `q`, otherwise `low`.
    Bernoulli { q: f64, low: f64, high: f64 },
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, variance: f64 },
}

fn finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(WeaverError::InvalidParent(format!("{what} parameters must be finite")))
    }
}

impl ParentDistribution {
    pub fn point_mass(value: f64) -> Result<Self> {
        finite(&[value], "point-mass")?;
        Ok(Self::PointMass { value })
    }

    /// Standard Bernoulli(q) on `{0, 1}`.
    pub fn bernoulli(q: f64) -> Result<Self> {
        Self::two_point(q, 0.0, 1.0)
    }

    pub fn two_point(q: f64, low: f64, high: f64) -> Result<Self> {
        finite(&[q, low, high], "bernoulli")?;
        if !(0.0..=1.0).contains(&q) {
            return Err(WeaverError::InvalidParent(format!(
                "bernoulli probability {q} outside [0, 1]"
            )));
        }
        Ok(Self::Bernoulli { q, low, high })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        finite(&[low, high], "uniform")?;
        if low >= high {
            return Err(WeaverError::InvalidParent(format!(
                "uniform interval ({low}, {high}) is empty"
            )));
        }
        Ok(Self::Uniform { low, high })
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        finite(&[mean, variance], "gaussian")?;
        if variance < 0.0 {
            return Err(WeaverError::InvalidParent(format!("negative variance {variance}")));
        }
        Ok(Self::Gaussian { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::PointMass { value } => value,
            Self::Bernoulli { q, low, high } => low + q * (high - low),
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::Gaussian { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::PointMass { .. } => 0.0,
            Self::Bernoulli { q, low, high } => q * (1.0 - q) * (high - low) * (high - low),
            Self::Uniform { low, high } => (high - low) * (high - low) / 12.0,
            Self::Gaussian { variance, .. } => variance,
        }
    }

    /// The law of `(X - shift) / scale`.
    pub fn affine(&self, shift: f64, scale: f64) -> Self {
        let map = |x: f64| (x - shift) / scale;
        match *self {
            Self::PointMass { value } => Self::PointMass { value: map(value) },
            Self::Bernoulli { q, low, high } => Self::Bernoulli {
                q,
                low: map(low),
                high: map(high),
            },
            Self::Uniform { low, high } => {
                let (a, b) = (map(low), map(high));
                Self::Uniform {
                    low: a.min(b),
                    high: a.max(b),
                }
            }
            Self::Gaussian { mean, variance } => Self::Gaussian {
                mean: map(mean),
                variance: variance / (scale * scale),
            },
        }
    }

    fn sampler(&self) -> ParentSampler {
        match *self {
            Self::PointMass { value } => ParentSampler::Constant(value),
            Self::Bernoulli { q, low, high } => ParentSampler::TwoPoint { q, low, high },
            Self::Uniform { low, high } => {
                ParentSampler::Uniform(Uniform::new(low, high).expect("validated interval"))
            }
            Self::Gaussian { mean, variance } => {
                ParentSampler::Normal(Normal::new(mean, variance.sqrt()).expect("validated variance"))
            }
        }
    }
}

enum ParentSampler {
    Constant(f64),
    TwoPoint { q: f64, low: f64, high: f64 },
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
}

impl ParentSampler {
    fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::TwoPoint { q, low, high } => {
                if rng.random::<f64>() < *q {
                    *high
                } else {
                    *low
                }
            }
            Self::Uniform(u) => u.sample(rng),
            Self::Normal(n) => n.sample(rng),
        }
    }
}

/// Maps both parents by `x -> (x - mu0) / (mu1 - mu0)` so their means become 0 and 1.
pub fn standardize_parents(
    h0: &ParentDistribution,
    h1: &ParentDistribution,
) -> Result<(ParentDistribution, ParentDistribution)> {
    let (m0, m1) = (h0.mean(), h1.mean());
    let span = m1 - m0;
    if span == 0.0 || !span.is_finite() {
        return Err(WeaverError::DegenerateParents(m0));
    }
    Ok((h0.affine(m0, span), h1.affine(m0, span)))
}

fn check_standardized(h0: &ParentDistribution, h1: &ParentDistribution) -> Result<()> {
    let (mean0, mean1) = (h0.mean(), h1.mean());
    if mean0.abs() > STANDARDIZATION_TOLERANCE || (mean1 - 1.0).abs() > STANDARDIZATION_TOLERANCE {
        return Err(WeaverError::Unstandardized { mean0, mean1 });
    }
    Ok(())
}

/// Bernoulli(p) for an exact rational `p`, by comparing a uniform 128-bit
/// integer against `floor(p 2^128)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BernoulliThreshold {
    threshold: u128,
}

impl BernoulliThreshold {
    pub fn new(p: &Rational) -> Result<Self> {
        check_probability(p)?;
        let scaled = p * rational::from_biguint(BigUint::one() << 128usize);
        let floor = scaled.floor().to_integer();
        let too_close = floor.is_zero() || scaled.ceil().to_integer() >= (num_bigint::BigInt::one() << 128usize);
        if too_close {
            return Err(WeaverError::BelowResolution(rational::format_fraction(p)));
        }
        let threshold = floor.to_u128().expect("below 2^128");
        Ok(Self { threshold })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> bool {
        let hi = rng.next_u64() as u128;
        let lo = rng.next_u64() as u128;
        ((hi << 64) | lo) < self.threshold
    }
}

/// A ChaCha8 stream identified by a root seed and a stream index.
#[derive(Debug, Clone)]
pub struct StreamRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn check_path_depth(n: u32, max: u32) -> Result<()> {
    if n == 0 {
        return Err(WeaverError::InvalidDepth {
            n,
            reason: "at least one selection is required",
        });
    }
    if n > max {
        return Err(WeaverError::Capacity { n, cap: max });
    }
    Ok(())
}

fn draw_path_with<R: RngCore + ?Sized>(n: u32, coin: &BernoulliThreshold, rng: &mut R) -> SelectionPath {
    let k = (0..n).fold(0u64, |k, j| k | (coin.sample(rng) as u64) << j);
    SelectionPath::new(n, k).expect("depth checked by caller")
}

/// Draws `b_0, ..., b_{n-1}` in that order, each Bernoulli(p).
pub fn draw_selection_path<R: RngCore + ?Sized>(n: u32, p: &Rational, rng: &mut R) -> Result<SelectionPath> {
    check_path_depth(n, MAX_PATH_DEPTH)?;
    let coin = BernoulliThreshold::new(p)?;
    Ok(draw_path_with(n, &coin, rng))
}

/// One realization of exponential sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    pub seed: u64,
    pub stream: u64,
    pub n: u32,
    pub path: SelectionPath,
    /// `T_1, ..., T_n`; block `j` holds `2^{j-1}` draws.
    pub block_sums: Vec<f64>,
    /// `S_n`
    pub total: f64,
    /// `S_n / (2^n - 1)`
    pub mean: f64,
    /// `Y_n = k / (2^n - 1)`
    pub conditional_mean: Rational,
}

impl SampleRun {
    pub fn block_len(j: u32) -> u64 {
        1u64 << (j - 1)
    }

    pub fn draw_count(&self) -> u64 {
        (1u64 << self.n) - 1
    }
}

struct RunPlan {
    n: u32,
    coin: BernoulliThreshold,
    parents: [ParentSampler; 2],
}

impl RunPlan {
    fn new(n: u32, h0: &ParentDistribution, h1: &ParentDistribution, p: &Rational) -> Result<Self> {
        check_path_depth(n, MAX_DRAW_DEPTH)?;
        check_standardized(h0, h1)?;
        Ok(Self {
            n,
            coin: BernoulliThreshold::new(p)?,
            parents: [h0.sampler(), h1.sampler()],
        })
    }

    fn run(&self, rng: &mut StreamRng) -> SampleRun {
        let path = draw_path_with(self.n, &self.coin, rng);
        let block_sums: Vec<f64> = (1..=self.n)
            .map(|j| {
                let parent = &self.parents[path.bit(j - 1) as usize];
                (0..SampleRun::block_len(j)).map(|_| parent.draw(rng)).sum()
            })
            .collect();
        let total: f64 = block_sums.iter().sum();
        SampleRun {
            seed: rng.seed(),
            stream: rng.stream(),
            n: self.n,
            path,
            mean: total / ((1u64 << self.n) - 1) as f64,
            total,
            block_sums,
            conditional_mean: path.conditional_mean(),
        }
    }
}

/// Runs exponential sampling once. Parents must already be standardized.
pub fn run_exponential_sample(
    n: u32,
    h0: &ParentDistribution,
    h1: &ParentDistribution,
    p: &Rational,
    rng: &mut StreamRng,
) -> Result<SampleRun> {
    Ok(RunPlan::new(n, h0, h1, p)?.run(rng))
}

/// Sample means `S_n / (2^n - 1)` of `replications` independent runs;
/// replication `i` uses stream `i` of `seed`.
pub fn sample_means(
    n: u32,
    h0: &ParentDistribution,
    h1: &ParentDistribution,
    p: &Rational,
    replications: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let plan = RunPlan::new(n, h0, h1, p)?;
    Ok((0..replications as u64)
        .into_par_iter()
        .map(|i| plan.run(&mut StreamRng::new(seed, i)).mean)
        .collect())
}

/// Leaf indices of `replications` selection paths, without any draws.
pub fn simulate_leaves(n: u32, p: &Rational, replications: usize, seed: u64) -> Result<Vec<u64>> {
    check_path_depth(n, MAX_PATH_DEPTH)?;
    let coin = BernoulliThreshold::new(p)?;
    Ok((0..replications as u64)
        .into_par_iter()
        .map(|i| draw_path_with(n, &coin, &mut StreamRng::new(seed, i)).k())
        .collect())
}

/// Occupation counts of the `2^n` leaves.
pub fn leaf_histogram(n: u32, p: &Rational, replications: usize, seed: u64) -> Result<Vec<u64>> {
    check_path_depth(n, crate::exact::DEFAULT_MATERIALIZATION_CAP)?;
    let mut counts = vec![0u64; 1usize << n];
    for k in simulate_leaves(n, p, replications, seed)? {
        counts[k as usize] += 1;
    }
    Ok(counts)
}

/// Pearson's statistic `sum (O - E)^2 / E` against exact cell probabilities.
pub fn chi_square_statistic(counts: &[u64], probabilities: &[Rational]) -> f64 {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probabilities)
        .map(|(&o, prob)| {
            let e = total as f64 * rational::to_f64(prob);
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// Summation in fixed pairwise order; the result depends only on the slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// `sigma^2(Y_n) + (p sigma_1^2 + (1 - p) sigma_0^2) / (2^n - 1)`.
pub fn full_process_variance(params: &WeaverParams, h0: &ParentDistribution, h1: &ParentDistribution) -> f64 {
    let p = rational::to_f64(params.p());
    let within = p * h1.variance() + (1.0 - p) * h0.variance();
    rational::to_f64(&analysis::exact_variance(params)) + within / ((1u64 << params.n()) - 1) as f64
}

/// Empirical moments of the sample mean against their exact values.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub n: u32,
    pub replications: usize,
    pub seed: u64,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub exact_mean: Rational,
    pub exact_variance: f64,
    /// Standard error of the empirical mean.
    pub standard_error: f64,
    pub z_score: f64,
    /// Standard error of the empirical variance, from the fourth central moment.
    pub variance_standard_error: f64,
    pub variance_z_score: f64,
}

impl MomentReport {
    pub fn from_samples(params: &WeaverParams, exact_variance: f64, samples: &[f64], seed: u64) -> Self {
        let r = samples.len() as f64;
        let mean = pairwise_sum(samples) / r;
        let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
        let squares: Vec<f64> = centered.iter().map(|d| d * d).collect();
        let fourths: Vec<f64> = squares.iter().map(|s| s * s).collect();
        let variance = pairwise_sum(&squares) / (r - 1.0);
        let m4 = pairwise_sum(&fourths) / r;
        let standard_error = (variance / r).sqrt();
        let var_of_var = (m4 - variance * variance * (r - 3.0) / (r - 1.0)) / r;
        let variance_standard_error = var_of_var.max(0.0).sqrt();
        let exact_mean = analysis::exact_mean(params);
        let z_score = (mean - rational::to_f64(&exact_mean)) / standard_error;
        Self {
            n: params.n(),
            replications: samples.len(),
            seed,
            empirical_mean: mean,
            empirical_variance: variance,
            exact_mean,
            exact_variance,
            standard_error,
            z_score,
            variance_standard_error,
            variance_z_score: (variance - exact_variance) / variance_standard_error,
        }
    }
}

pub fn monte_carlo_moments(
    n: u32,
    h0: &ParentDistribution,
    h1: &ParentDistribution,
    p: &Rational,
    replications: usize,
    seed: u64,
) -> Result<MomentReport> {
    if replications < MIN_REPLICATIONS {
        return Err(WeaverError::TooFewReplications {
            min: MIN_REPLICATIONS,
            got: replications,
        });
    }
    let params = WeaverParams::new(n, p.clone())?;
    let samples = sample_means(n, h0, h1, p, replications, seed)?;
    Ok(MomentReport::from_samples(
        &params,
        full_process_variance(&params, h0, h1),
        &samples,
        seed,
    ))
}

/// Largest gap between the empirical distribution function of `samples` and
/// the limit law's distribution function over the dyadic grid `k / 2^depth`.
pub fn dyadic_ks_distance(samples: &[f64], p: &Rational, depth: u32) -> Result<f64> {
    let params = WeaverParams::new(depth.max(1), p.clone())?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let mut worst = 0.0f64;
    for k in 0..=(1u128 << depth) {
        let point = DyadicPoint::new(k, depth)?;
        let v = rational::to_f64(&point.value());
        let exact = rational::to_f64(&cdf_at_dyadic(point, &params)?);
        let below = sorted.partition_point(|&x| x <= v) as f64 / r;
        worst = worst.max((below - exact).abs());
    }
    Ok(worst)
}
