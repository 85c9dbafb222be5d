//! Closed-form moments of W(n, p), the weaving/merging split of the
//! Bernoulli variance, and diagnostics of the limit law.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Result, WeaverError};
use crate::exact::{self, check_cap, check_probability, WeaverParams, DEFAULT_MATERIALIZATION_CAP};
use crate::rational::{self, Rational};

fn width(n: u32) -> BigUint {
    (BigUint::one() << n as usize) - BigUint::one()
}

/// `(4^n - 1) / 3`, the trace of the outer-product matrix of block sizes.
pub fn weaving_count(n: u32) -> BigUint {
    ((BigUint::one() << (2 * n as usize)) - BigUint::one()) / BigUint::from(3u32)
}

/// `2 (4^n - 3 * 2^n + 2) / 3`, the off-diagonal sum of the same matrix.
pub fn merging_count(n: u32) -> BigUint {
    let four_n = BigUint::one() << (2 * n as usize);
    let two_n = BigUint::one() << n as usize;
    (four_n + BigUint::from(2u32) - BigUint::from(3u32) * two_n) * BigUint::from(2u32) / BigUint::from(3u32)
}

/// `sigma^2(Y_n) / (p (1 - p))`, which does not depend on `p`.
pub fn variance_ratio(n: u32) -> Rational {
    let w = width(n);
    rational::from_biguint(weaving_count(n)) / rational::from_biguint(&w * &w)
}

/// `E Y_n = p` for every `n`.
pub fn exact_mean(params: &WeaverParams) -> Rational {
    params.p().clone()
}

/// `sigma^2(Y_n) = (4^n - 1) / (3 (2^n - 1)^2) * p (1 - p)`.
pub fn exact_variance(params: &WeaverParams) -> Rational {
    variance_ratio(params.n()) * params.p() * params.q()
}

/// `E Y_n^j` by exact enumeration over all leaves.
pub fn exact_moment(params: &WeaverParams, j: u32) -> Result<Rational> {
    exact_moment_capped(params, j, DEFAULT_MATERIALIZATION_CAP)
}

pub fn exact_moment_capped(params: &WeaverParams, j: u32, cap: u32) -> Result<Rational> {
    let n = params.n();
    check_cap(n, cap)?;
    if j == 0 {
        return Ok(Rational::one());
    }
    // Leaves sharing a popcount share a mass, so sum k^j per class first.
    let mut class_sums = vec![BigUint::zero(); n as usize + 1];
    for k in 0..(1u64 << n) {
        class_sums[k.count_ones() as usize] += num_traits::pow(BigUint::from(k), j as usize);
    }
    let q = params.q();
    let mut total = Rational::zero();
    for (ones, sum) in class_sums.into_iter().enumerate() {
        let mass = num_traits::pow(params.p().clone(), ones) * num_traits::pow(q.clone(), n as usize - ones);
        total += mass * rational::from_biguint(sum);
    }
    let scale = num_traits::pow(rational::from_biguint(width(n)), j as usize);
    Ok(total / scale)
}

/// One row of the weaving/merging table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionRow {
    pub n: u32,
    pub p: Rational,
    /// `(2^n - 1)^2`
    pub denom: BigUint,
    pub weaving: BigUint,
    pub merging: BigUint,
    pub weaving_share: Rational,
    pub merging_share: Rational,
}

impl DecompositionRow {
    /// `sigma^2(Y_n)`, the variance of the conditional means.
    pub fn weaving_variance(&self) -> Rational {
        &self.weaving_share * &self.p * (Rational::one() - &self.p)
    }

    /// The expected conditional variance of the merged variable `Z_n`.
    pub fn merging_variance(&self) -> Rational {
        &self.merging_share * &self.p * (Rational::one() - &self.p)
    }
}

pub fn variance_decomposition(n: u32, p: &Rational) -> Result<DecompositionRow> {
    if n == 0 {
        return Err(WeaverError::InvalidDepth {
            n,
            reason: "at least one selection is required",
        });
    }
    check_probability(p)?;
    let w = width(n);
    let denom = &w * &w;
    let weaving = weaving_count(n);
    let merging = merging_count(n);
    let d = rational::from_biguint(denom.clone());
    Ok(DecompositionRow {
        n,
        p: p.clone(),
        weaving_share: rational::from_biguint(weaving.clone()) / &d,
        merging_share: rational::from_biguint(merging.clone()) / &d,
        denom,
        weaving,
        merging,
    })
}

/// Mean and variance of `Z_n`, the variable that replaces each realization
/// `y_k` by a Bernoulli(`y_k`). Its law is Bernoulli(p) at every depth.
pub fn merged_variable_stats(params: &WeaverParams) -> (Rational, Rational) {
    let p = params.p().clone();
    let var = &p * params.q();
    (p, var)
}

/// `p (1 - p) / 3`, the variance of the weaver's hem.
pub fn limit_variance(p: &Rational) -> Result<Rational> {
    check_probability(p)?;
    Ok(p * (Rational::one() - p) / rational::int(3))
}

/// `g_{k,n} = 2^n p_k` as an exact rational.
pub fn local_density_exact(k: u64, params: &WeaverParams) -> Result<Rational> {
    Ok(exact::pmf_point(k, params)? * rational::pow2(params.n()))
}

/// `g_{k,n} = 2^n p_k` in binary64, evaluated in log space so that deep
/// levels neither underflow nor overflow prematurely. Relative tolerance 1e-12.
pub fn local_density(k: u64, params: &WeaverParams) -> Result<f64> {
    Ok((params.n() as f64 + exact::log2_pmf_point(k, params)?).exp2())
}

/// How unevenly a leaf's mass spreads over its descendants after `level`
/// further splits.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughnessReport {
    pub p: Rational,
    pub f: Rational,
    pub level: u32,
    /// Rightmost over leftmost descendant mass, `f^level`.
    pub ratio_exact: Rational,
    pub ratio: f64,
    /// `ln f / ln 2`
    pub fractal_dimension: f64,
    /// `log2` of the factor `2^l (1 - p)^l` applied to the leftmost descendant density.
    pub left_factor_log2: f64,
    /// `log2` of the factor `2^l p^l` applied to the rightmost descendant density.
    pub right_factor_log2: f64,
}

impl RoughnessReport {
    /// `log2` of `2^l (1-p)^l p_k` and `2^l p^l p_k` for a leaf of mass `2^leaf_mass_log2`.
    pub fn products_log2(&self, leaf_mass_log2: f64) -> (f64, f64) {
        (
            self.left_factor_log2 + leaf_mass_log2,
            self.right_factor_log2 + leaf_mass_log2,
        )
    }
}

pub fn roughness_report(p: &Rational, level: u32) -> Result<RoughnessReport> {
    check_probability(p)?;
    let q = Rational::one() - p;
    let f = p / &q;
    let ratio_exact = num_traits::pow(f.clone(), level as usize);
    let l = level as f64;
    Ok(RoughnessReport {
        p: p.clone(),
        ratio: rational::to_f64(&ratio_exact),
        ratio_exact,
        fractal_dimension: rational::log2(&f),
        left_factor_log2: l * (1.0 + rational::log2(&q)),
        right_factor_log2: l * (1.0 + rational::log2(p)),
        f,
        level,
    })
}

/// Cell masses of the continuous p-model on `I_k = (k/2^n, (k+1)/2^n)`.
///
/// Starts from the uniform density on the unit interval and refines it
/// locally: each cell hands `2(1-p)` times its density to its left half and
/// `2p` times to its right half. The mass of a cell is its density over `2^n`.
pub fn pmodel_cell_masses(n: u32, p: &Rational) -> Result<Vec<Rational>> {
    pmodel_cell_masses_capped(n, p, DEFAULT_MATERIALIZATION_CAP)
}

pub fn pmodel_cell_masses_capped(n: u32, p: &Rational, cap: u32) -> Result<Vec<Rational>> {
    check_probability(p)?;
    check_cap(n, cap)?;
    let two = rational::int(2);
    let left = &two * (Rational::one() - p);
    let right = &two * p;
    let mut density = vec![Rational::one()];
    for _ in 0..n {
        density = density
            .iter()
            .flat_map(|g| [g * &left, g * &right])
            .collect();
    }
    let cell = rational::pow2(n);
    Ok(density.into_iter().map(|g| g / &cell).collect())
}
