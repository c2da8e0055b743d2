//! Exact scalars: arbitrary-precision rationals and truncated formal power
//! series in a single deformation parameter.
//!
//! Every coefficient in the engine is one of these two types. There is no
//! floating-point mode: all algebraic identities are checked with tolerance
//! zero, so the arithmetic must be exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{EngineError, Result};

/// Exact rational scalar. Always stored reduced with positive denominator
/// (maintained by `num_rational`).
pub type Rat = BigRational;

/// Rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Rational `p/q`. Panics if `q == 0`.
pub fn rat(p: i64, q: i64) -> Rat {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// 1/n! as an exact rational.
pub fn inv_factorial(n: usize) -> Rat {
    let mut f = BigInt::one();
    for k in 2..=n {
        f *= BigInt::from(k);
    }
    BigRational::new(BigInt::one(), f)
}

/// n! as an exact integer.
pub fn factorial(n: usize) -> BigInt {
    let mut f = BigInt::one();
    for k in 2..=n {
        f *= BigInt::from(k);
    }
    f
}

/// Renders a rational as `p/q` (denominator printed even when 1, so the
/// serialized form round-trips without a separate integer case).
pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q` or a bare integer `p`.
pub fn rat_from_str(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p, q),
        None => (s, "1"),
    };
    let numer: BigInt = p
        .parse()
        .map_err(|_| EngineError::argument(format!("bad rational numerator: {s:?}")))?;
    let denom: BigInt = q
        .parse()
        .map_err(|_| EngineError::argument(format!("bad rational denominator: {s:?}")))?;
    if denom.is_zero() {
        return Err(EngineError::argument(format!("zero denominator: {s:?}")));
    }
    Ok(BigRational::new(numer, denom))
}

/// Coefficient ring shared by all element types.
///
/// Implemented by [`Rat`] (the ground field) and [`FormalSeries`]
/// (rationals adjoined a formal parameter, truncated at a fixed order).
/// Operations must be exact; `is_zero` decides equality against zero
/// exactly.
pub trait Scalar: Clone + PartialEq + fmt::Debug {
    fn zero_like(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    /// Multiply by a rational constant.
    fn scale(&self, c: &Rat) -> Self;
    /// The multiplicative unit of the same shape (same truncation order).
    fn one_like(&self) -> Self;
}

impl Scalar for Rat {
    fn zero_like(&self) -> Self {
        Rat::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn scale(&self, c: &Rat) -> Self {
        self * c
    }
    fn one_like(&self) -> Self {
        Rat::one()
    }
}

/// Truncated formal power series `c_0 + c_1 h + ... + c_K h^K` over the
/// rationals. Products discard powers above the truncation order, making
/// every series manipulation used in twisting finite and exact.
#[derive(Clone, PartialEq, Eq)]
pub struct FormalSeries {
    /// Coefficients indexed by power of the parameter; always length `K+1`.
    coeffs: Vec<Rat>,
}

impl fmt::Debug for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", rat_to_string(c))?;
        }
        write!(f, "]")
    }
}

impl FormalSeries {
    /// The zero series truncated at order `k`.
    pub fn zero(k: usize) -> Self {
        FormalSeries {
            coeffs: vec![Rat::zero(); k + 1],
        }
    }

    /// The constant series `c` truncated at order `k`.
    pub fn constant(c: Rat, k: usize) -> Self {
        let mut s = Self::zero(k);
        s.coeffs[0] = c;
        s
    }

    /// `c * h^p` truncated at order `k`. Returns zero if `p > k`.
    pub fn monomial(c: Rat, p: usize, k: usize) -> Self {
        let mut s = Self::zero(k);
        if p <= k {
            s.coeffs[p] = c;
        }
        s
    }

    pub fn from_coeffs(coeffs: Vec<Rat>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(EngineError::argument("series needs at least one coefficient"));
        }
        Ok(FormalSeries { coeffs })
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, p: usize) -> &Rat {
        &self.coeffs[p]
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    /// True when the series vanishes at parameter order 0.
    pub fn vanishes_at_zero(&self) -> bool {
        Zero::is_zero(&self.coeffs[0])
    }

    fn check_same_order(&self, other: &Self) -> usize {
        assert_eq!(
            self.coeffs.len(),
            other.coeffs.len(),
            "mismatched series truncation orders"
        );
        self.coeffs.len() - 1
    }

    /// Cauchy product truncated at the common order.
    pub fn mul_series(&self, other: &Self) -> Self {
        let k = self.check_same_order(other);
        let mut out = Self::zero(k);
        for (i, a) in self.coeffs.iter().enumerate() {
            if Zero::is_zero(a) {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j > k {
                    break;
                }
                if Zero::is_zero(b) {
                    continue;
                }
                out.coeffs[i + j] += a * b;
            }
        }
        out
    }
}

impl Scalar for FormalSeries {
    fn zero_like(&self) -> Self {
        Self::zero(self.truncation_order())
    }
    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }
    fn add_ref(&self, other: &Self) -> Self {
        let k = self.check_same_order(other);
        let mut out = Self::zero(k);
        for i in 0..=k {
            out.coeffs[i] = &self.coeffs[i] + &other.coeffs[i];
        }
        out
    }
    fn sub_ref(&self, other: &Self) -> Self {
        let k = self.check_same_order(other);
        let mut out = Self::zero(k);
        for i in 0..=k {
            out.coeffs[i] = &self.coeffs[i] - &other.coeffs[i];
        }
        out
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self.mul_series(other)
    }
    fn neg_ref(&self) -> Self {
        FormalSeries {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
    fn scale(&self, c: &Rat) -> Self {
        FormalSeries {
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }
    fn one_like(&self) -> Self {
        Self::constant(Rat::one(), self.truncation_order())
    }
}

impl Add for FormalSeries {
    type Output = FormalSeries;
    fn add(self, rhs: FormalSeries) -> FormalSeries {
        self.add_ref(&rhs)
    }
}

impl Sub for FormalSeries {
    type Output = FormalSeries;
    fn sub(self, rhs: FormalSeries) -> FormalSeries {
        self.sub_ref(&rhs)
    }
}

impl Mul for FormalSeries {
    type Output = FormalSeries;
    fn mul(self, rhs: FormalSeries) -> FormalSeries {
        self.mul_series(&rhs)
    }
}

impl Neg for FormalSeries {
    type Output = FormalSeries;
    fn neg(self) -> FormalSeries {
        self.neg_ref()
    }
}

/// Checked series product: mismatched truncation orders are an argument
/// error rather than a panic.
pub fn series_mul(a: &FormalSeries, b: &FormalSeries) -> Result<FormalSeries> {
    if a.truncation_order() != b.truncation_order() {
        return Err(EngineError::argument(format!(
            "series truncation orders differ: {} vs {}",
            a.truncation_order(),
            b.truncation_order()
        )));
    }
    Ok(a.mul_series(b))
}

/// Signum helper for tests and serialization.
pub fn rat_is_negative(r: &Rat) -> bool {
    r.is_negative()
}
