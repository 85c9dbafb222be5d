//! Exact construction of the weaver distribution W(n, p).
//!
//! After `n` independent Bernoulli(p) selections the conditional mean `Y_n`
//! sits on the grid `k / (2^n - 1)`, where the binary digits of the leaf
//! index `k` are the selections `(b_{n-1}, ..., b_0)`. Leaf `k` carries mass
//! `p^ones(k) * (1 - p)^zeros(k)`.
//!
//! Everything here is exact. Full mass vectors grow as `2^n`, so they are
//! only built up to a materialization cap; pointwise queries work for any
//! depth up to 64 (the width of a leaf index).

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Result, WeaverError};
use crate::rational::{self, Rational};

/// Largest depth for which full vectors are materialized by default.
pub const DEFAULT_MATERIALIZATION_CAP: u32 = 24;

/// Leaf indices are `u64`, which bounds every pointwise query.
pub const MAX_POINTWISE_DEPTH: u32 = 64;

/// Parameters `(n, p)` of W(n, p): `n >= 1` selections with `0 < p < 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeaverParams {
    n: u32,
    p: Rational,
}

impl WeaverParams {
    pub fn new(n: u32, p: Rational) -> Result<Self> {
        if n == 0 {
            return Err(WeaverError::InvalidDepth {
                n,
                reason: "at least one selection is required",
            });
        }
        check_probability(&p)?;
        Ok(Self { n, p })
    }

    /// Builds the parameters from a float by way of its shortest decimal
    /// representation, so `0.1` means exactly `1/10`.
    pub fn from_f64(n: u32, p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(WeaverError::InvalidProbability(p.to_string()));
        }
        Self::new(n, rational::parse_rational(&format!("{p}"))?)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    /// `1 - p`, the probability of choosing the first population.
    pub fn q(&self) -> Rational {
        Rational::one() - &self.p
    }

    /// The odds `f = p / (1 - p)` that separate sibling leaves.
    pub fn odds(&self) -> Rational {
        &self.p / self.q()
    }

    /// Same depth, probability `1 - p`.
    pub fn complement(&self) -> Self {
        Self {
            n: self.n,
            p: self.q(),
        }
    }

    /// Same probability, another depth.
    pub fn with_depth(&self, n: u32) -> Result<Self> {
        Self::new(n, self.p.clone())
    }
}

pub(crate) fn check_probability(p: &Rational) -> Result<()> {
    if rational::is_open_unit(p) {
        Ok(())
    } else {
        Err(WeaverError::InvalidProbability(rational::format_fraction(p)))
    }
}

fn check_pointwise_depth(n: u32) -> Result<()> {
    if n == 0 {
        Err(WeaverError::InvalidDepth {
            n,
            reason: "at least one selection is required",
        })
    } else if n > MAX_POINTWISE_DEPTH {
        Err(WeaverError::InvalidDepth {
            n,
            reason: "leaf indices are limited to 64 bits",
        })
    } else {
        Ok(())
    }
}

fn max_leaf(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_leaf(k: u64, n: u32) -> Result<()> {
    check_pointwise_depth(n)?;
    let max = max_leaf(n);
    if k > max {
        return Err(WeaverError::OutOfRange {
            k: k as u128,
            n,
            max: max as u128,
        });
    }
    Ok(())
}

pub(crate) fn check_cap(n: u32, cap: u32) -> Result<()> {
    if n > cap {
        Err(WeaverError::Capacity { n, cap })
    } else {
        Ok(())
    }
}

/// The selection vector `B_n = (b_{n-1}, ..., b_0)` packed into its leaf
/// index `k = sum b_j 2^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SelectionPath {
    n: u32,
    k: u64,
}

impl SelectionPath {
    pub fn new(n: u32, k: u64) -> Result<Self> {
        check_leaf(k, n)?;
        Ok(Self { n, k })
    }

    /// Packs selections given most significant first, i.e. `(b_{n-1}, ..., b_0)`.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let n = bits.len() as u32;
        check_pointwise_depth(n)?;
        let k = bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        Ok(Self { n, k })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Selection `b_j`, i.e. whether block `j + 1` was drawn from the second population.
    pub fn bit(&self, j: u32) -> bool {
        j < self.n && (self.k >> j) & 1 == 1
    }

    /// `(b_{n-1}, ..., b_0)`.
    pub fn bits(&self) -> Vec<bool> {
        (0..self.n).rev().map(|j| self.bit(j)).collect()
    }

    pub fn ones(&self) -> u32 {
        self.k.count_ones()
    }

    pub fn zeros(&self) -> u32 {
        self.n - self.ones()
    }

    /// `Y_n = k / (2^n - 1)`.
    pub fn conditional_mean(&self) -> Rational {
        realization_unchecked(self.k, self.n)
    }
}

fn realization_unchecked(k: u64, n: u32) -> Rational {
    let width = (1u128 << n) - 1;
    Rational::new(k.into(), width.into())
}

/// `y_{k,n} = k / (2^n - 1)`.
pub fn realization_value(k: u64, n: u32) -> Result<Rational> {
    check_leaf(k, n)?;
    Ok(realization_unchecked(k, n))
}

fn mass_from_counts(ones: u32, zeros: u32, params: &WeaverParams) -> Rational {
    num_traits::pow(params.p.clone(), ones as usize) * num_traits::pow(params.q(), zeros as usize)
}

/// `p_k = p^#1 (1 - p)^#0`, evaluated in O(n) without building the vector.
pub fn pmf_point(k: u64, params: &WeaverParams) -> Result<Rational> {
    let path = SelectionPath::new(params.n, k)?;
    Ok(mass_from_counts(path.ones(), path.zeros(), params))
}

/// `log2 p_k` in binary64. Intended for depths where exact masses are
/// unwieldy; relative error stays around 1e-15 per term.
pub fn log2_pmf_point(k: u64, params: &WeaverParams) -> Result<f64> {
    let path = SelectionPath::new(params.n, k)?;
    Ok(path.ones() as f64 * rational::log2(&params.p) + path.zeros() as f64 * rational::log2(&params.q()))
}

/// `2^n - 1 - k`: the leaf reflected across `y = 1/2`.
pub fn mirror_index(k: u64, n: u32) -> Result<u64> {
    check_leaf(k, n)?;
    Ok(max_leaf(n) - k)
}

/// W(n, p) with an optionally materialized mass vector indexed by leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeaverDist {
    params: WeaverParams,
    pmf: Option<Vec<Rational>>,
}

impl WeaverDist {
    /// A lazy distribution; masses are computed pointwise on demand.
    pub fn new(params: WeaverParams) -> Self {
        Self { params, pmf: None }
    }

    pub fn params(&self) -> &WeaverParams {
        &self.params
    }

    pub fn pmf(&self) -> Option<&[Rational]> {
        self.pmf.as_deref()
    }

    pub fn into_pmf(self) -> Option<Vec<Rational>> {
        self.pmf
    }

    pub fn is_materialized(&self) -> bool {
        self.pmf.is_some()
    }

    pub fn mass(&self, k: u64) -> Result<Rational> {
        match &self.pmf {
            Some(v) => v.get(k as usize).cloned().ok_or(WeaverError::OutOfRange {
                k: k as u128,
                n: self.params.n,
                max: v.len() as u128 - 1,
            }),
            None => pmf_point(k, &self.params),
        }
    }
}

/// Materializes the mass vector with the default cap.
pub fn build_pmf_vector(params: &WeaverParams) -> Result<WeaverDist> {
    build_pmf_vector_capped(params, DEFAULT_MATERIALIZATION_CAP)
}

/// Materializes the mass vector by weaving: `p_{n+1} = ((1-p) p_n, p p_n)`.
pub fn build_pmf_vector_capped(params: &WeaverParams, cap: u32) -> Result<WeaverDist> {
    check_cap(params.n, cap)?;
    let p = params.p.clone();
    let q = params.q();
    let mut masses = vec![Rational::one()];
    for _ in 0..params.n {
        let mut next = Vec::with_capacity(masses.len() * 2);
        next.extend(masses.iter().map(|m| m * &q));
        next.extend(masses.iter().map(|m| m * &p));
        masses = next;
    }
    Ok(WeaverDist {
        params: params.clone(),
        pmf: Some(masses),
    })
}

/// Row `n` of the geometric triangle: the exponent of `f` at each leaf,
/// which is the number of one-bits of the leaf index.
pub fn geometric_triangle_row(n: u32) -> Result<Vec<u32>> {
    geometric_triangle_row_capped(n, DEFAULT_MATERIALIZATION_CAP)
}

pub fn geometric_triangle_row_capped(n: u32, cap: u32) -> Result<Vec<u32>> {
    check_cap(n, cap)?;
    let mut row = vec![0u32];
    for _ in 0..n {
        let shifted: Vec<u32> = row.iter().map(|e| e + 1).collect();
        row.extend(shifted);
    }
    Ok(row)
}

/// Sum of row `n` of the exponent triangle, via `s_{n+1} = 2 s_n + 2^n`.
pub fn exponent_sum(n: u32) -> BigUint {
    let mut s = BigUint::zero();
    let mut width = BigUint::one();
    for _ in 0..n {
        s = (s << 1usize) + &width;
        width <<= 1usize;
    }
    s
}

/// The dyadic point `v_{k,n} = k / 2^n`, `0 <= k <= 2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicPoint {
    k: u128,
    n: u32,
}

impl DyadicPoint {
    pub fn new(k: u128, n: u32) -> Result<Self> {
        if n > MAX_POINTWISE_DEPTH {
            return Err(WeaverError::InvalidDepth {
                n,
                reason: "dyadic depth is limited to 64",
            });
        }
        let max = 1u128 << n;
        if k > max {
            return Err(WeaverError::OutOfRange { k, n, max });
        }
        Ok(Self { k, n })
    }

    pub fn k(&self) -> u128 {
        self.k
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn value(&self) -> Rational {
        Rational::new(self.k.into(), (1u128 << self.n).into())
    }
}

/// Distribution function of W(N, p) at `v_{k,n}` for `n <= N`.
///
/// The result is the mass of all leaves `j < k 2^{N-n}`. Leaf masses factor
/// over the bits, so the sum collapses to one term per one-bit of `k`: the
/// mass of the shared prefix, times `1 - p` for the zero branch, times the
/// unit mass of the free lower bits. The value does not depend on `N`.
pub fn cdf_at_dyadic(point: DyadicPoint, params: &WeaverParams) -> Result<Rational> {
    if point.n > params.n {
        return Err(WeaverError::Refinement {
            point_depth: point.n,
            n: params.n,
        });
    }
    if point.k == 1u128 << point.n {
        return Ok(Rational::one());
    }
    let q = params.q();
    let mut prefix = Rational::one();
    let mut acc = Rational::zero();
    for bit in (0..point.n).rev() {
        if (point.k >> bit) & 1 == 1 {
            acc += &prefix * &q;
            prefix *= &params.p;
        } else {
            prefix *= &q;
        }
    }
    Ok(acc)
}

/// One distinct jump height of the distribution function and how often it occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Jump {
    pub ones: u32,
    pub height: Rational,
    pub multiplicity: BigUint,
}

/// The `n + 1` jump heights `p^j (1-p)^{n-j}` with binomial multiplicities.
pub fn jump_spectrum(params: &WeaverParams) -> Vec<Jump> {
    let n = params.n;
    let mut multiplicity = BigUint::one();
    let mut out = Vec::with_capacity(n as usize + 1);
    for j in 0..=n {
        out.push(Jump {
            ones: j,
            height: mass_from_counts(j, n - j, params),
            multiplicity: multiplicity.clone(),
        });
        multiplicity = multiplicity * BigUint::from(n - j) / BigUint::from(j + 1);
    }
    out
}
