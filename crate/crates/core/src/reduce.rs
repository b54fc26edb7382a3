//! Reduction values and an exact floating-point summation accumulator.
//!
//! Every sum that crosses ranks goes through [`ExactSum`], a fixed-point
//! accumulator wide enough to hold any finite `f64` without rounding. Partial
//! sums can therefore be merged in any grouping (per worker chunk, per color,
//! along a binomial tree) and still round to the same final value, which is
//! what makes results bitwise independent of the color grid and worker count.

use std::fmt;

/// Bits below the smallest subnormal exponent.
const BIAS: i32 = 1074;
/// Base-2^32 digits: covers 2^-1074 .. 2^1024 plus headroom for carries.
const DIGITS: usize = 70;
const DIGIT_BITS: u32 = 32;
const DIGIT_MASK: i64 = (1 << DIGIT_BITS) - 1;
/// Adds allowed before the digits are renormalized. Each add contributes less
/// than 2^32 to a digit, so i64 digits cannot overflow before this.
const RENORM_EVERY: u32 = 1 << 29;

/// Associative-commutative reduction operators supported by collectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReduceOp {
    Sum,
    Max,
    Min,
}

impl ReduceOp {
    pub fn name(self) -> &'static str {
        match self {
            ReduceOp::Sum => "sum",
            ReduceOp::Max => "max",
            ReduceOp::Min => "min",
        }
    }
}

/// Exact sum of a multiset of `f64` values.
///
/// Non-finite inputs are tracked separately and poison the result the same
/// way ordinary IEEE addition would (NaN, or the signed infinity).
#[derive(Clone, PartialEq, Eq)]
pub struct ExactSum {
    digits: Box<[i64; DIGITS]>,
    pending: u32,
    nan: bool,
    pos_inf: bool,
    neg_inf: bool,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for ExactSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ExactSum").field(&self.value()).finish()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self {
            digits: Box::new([0; DIGITS]),
            pending: 0,
            nan: false,
            pos_inf: false,
            neg_inf: false,
        }
    }

    pub fn from_value(x: f64) -> Self {
        let mut acc = Self::new();
        acc.add(x);
        acc
    }

    pub fn add(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        if !x.is_finite() {
            if x.is_nan() {
                self.nan = true;
            } else if x > 0.0 {
                self.pos_inf = true;
            } else {
                self.neg_inf = true;
            }
            return;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let exp_field = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exp) = if exp_field == 0 {
            (frac, 1 - 1075)
        } else {
            (frac | (1u64 << 52), exp_field - 1075)
        };
        let shift = (exp + BIAS) as u32;
        let digit = (shift / DIGIT_BITS) as usize;
        let wide = (mantissa as u128) << (shift % DIGIT_BITS);
        let sign = if negative { -1 } else { 1 };
        for k in 0..3 {
            let part = ((wide >> (DIGIT_BITS * k as u32)) as i64) & DIGIT_MASK;
            if part != 0 {
                self.digits[digit + k] += sign * part;
            }
        }
        self.pending += 1;
        if self.pending >= RENORM_EVERY {
            self.normalize();
        }
    }

    /// Merges another accumulator into this one. Exact, so order-free.
    pub fn merge(&mut self, other: &ExactSum) {
        self.normalize();
        let mut other = other.clone();
        other.normalize();
        for (a, b) in self.digits.iter_mut().zip(other.digits.iter()) {
            *a += *b;
        }
        self.pending = 2;
        self.normalize();
        self.nan |= other.nan;
        self.pos_inf |= other.pos_inf;
        self.neg_inf |= other.neg_inf;
    }

    /// Propagates carries so every digit but the top one lies in [0, 2^32).
    fn normalize(&mut self) {
        let mut carry = 0i64;
        for d in self.digits.iter_mut() {
            let v = *d + carry;
            carry = v >> DIGIT_BITS;
            *d = v & DIGIT_MASK;
        }
        // The top digit keeps the sign; magnitudes here never exceed the
        // representable range for finite inputs.
        self.digits[DIGITS - 1] += carry << DIGIT_BITS;
        self.pending = 0;
    }

    /// Correctly rounded (round-to-nearest-even) value of the exact sum.
    pub fn value(&self) -> f64 {
        if self.nan || (self.pos_inf && self.neg_inf) {
            return f64::NAN;
        }
        if self.pos_inf {
            return f64::INFINITY;
        }
        if self.neg_inf {
            return f64::NEG_INFINITY;
        }
        let mut acc = self.clone();
        acc.normalize();
        let negative = acc.digits[DIGITS - 1] < 0;
        if negative {
            // Two's complement negation across base-2^32 digits.
            let mut carry = 1i64;
            for d in acc.digits.iter_mut() {
                let v = (!*d & DIGIT_MASK) + carry;
                carry = v >> DIGIT_BITS;
                *d = v & DIGIT_MASK;
            }
        }
        let top = match acc.digits.iter().rposition(|&d| d != 0) {
            Some(i) => i,
            None => return 0.0,
        };
        let lo = top.saturating_sub(2);
        let mut window: u128 = 0;
        for i in (lo..=top).rev() {
            window = (window << DIGIT_BITS) | acc.digits[i] as u128;
        }
        // A window of at least 65 significant bits plus a sticky bit rounds
        // exactly like the full value.
        if acc.digits[..lo].iter().any(|&d| d != 0) {
            window |= 1;
        }
        let exponent = (lo as i32) * DIGIT_BITS as i32 - BIAS;
        let magnitude = scale_by_pow2(window as f64, exponent);
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

/// `x * 2^exp` without overflowing intermediate powers.
fn scale_by_pow2(mut x: f64, mut exp: i32) -> f64 {
    while exp > 1000 {
        x *= pow2(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        x *= pow2(-1000);
        exp += 1000;
    }
    x * pow2(exp)
}

fn pow2(exp: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&exp));
    f64::from_bits(((exp + 1023) as u64) << 52)
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// A rank's contribution to a reduction, before it is combined.
#[derive(Debug, Clone, PartialEq)]
pub enum Partial {
    None,
    Sum(ExactSum),
    SumVec(Vec<ExactSum>),
    Max(f64),
    Min(f64),
}

impl Partial {
    pub fn sum(x: f64) -> Self {
        Partial::Sum(ExactSum::from_value(x))
    }

    pub fn from_op(op: ReduceOp, x: f64) -> Self {
        match op {
            ReduceOp::Sum => Partial::sum(x),
            ReduceOp::Max => Partial::Max(x),
            ReduceOp::Min => Partial::Min(x),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Partial::None)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Partial::None => "none",
            Partial::Sum(_) => "sum",
            Partial::SumVec(_) => "sum_vec",
            Partial::Max(_) => "max",
            Partial::Min(_) => "min",
        }
    }

    /// Combines `self` (lower ranks) with `other` (higher ranks).
    pub fn combine(self, other: Partial) -> Result<Partial, (&'static str, &'static str)> {
        match (self, other) {
            (Partial::None, Partial::None) => Ok(Partial::None),
            (Partial::Sum(mut a), Partial::Sum(b)) => {
                a.merge(&b);
                Ok(Partial::Sum(a))
            }
            (Partial::SumVec(mut a), Partial::SumVec(b)) if a.len() == b.len() => {
                for (x, y) in a.iter_mut().zip(&b) {
                    x.merge(y);
                }
                Ok(Partial::SumVec(a))
            }
            // NaN propagates through max/min so that bad data is not hidden.
            (Partial::Max(a), Partial::Max(b)) => Ok(Partial::Max(if a.is_nan() || b.is_nan() {
                f64::NAN
            } else {
                a.max(b)
            })),
            (Partial::Min(a), Partial::Min(b)) => Ok(Partial::Min(if a.is_nan() || b.is_nan() {
                f64::NAN
            } else {
                a.min(b)
            })),
            (a, b) => Err((a.kind(), b.kind())),
        }
    }

    pub fn finish(&self) -> TaskValue {
        match self {
            Partial::None => TaskValue::Unit,
            Partial::Sum(s) => TaskValue::Scalar(s.value()),
            Partial::SumVec(v) => TaskValue::Vector(v.iter().map(ExactSum::value).collect()),
            Partial::Max(x) | Partial::Min(x) => TaskValue::Scalar(*x),
        }
    }
}

/// Final value of a task: nothing, a scalar reduction, or a vector of sums.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskValue {
    Unit,
    Scalar(f64),
    Vector(Vec<f64>),
}

impl TaskValue {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            TaskValue::Scalar(x) => Some(*x),
            _ => None,
        }
    }

    pub fn vector(&self) -> Option<&[f64]> {
        match self {
            TaskValue::Vector(v) => Some(v),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_integers() {
        let acc: ExactSum = [1.0, 2.0, 3.0, -0.5].into_iter().collect();
        assert_eq!(acc.value(), 5.5);
        assert_eq!(ExactSum::new().value(), 0.0);
    }

    #[test]
    fn cancellation_is_exact() {
        let acc: ExactSum = [1e300, 1.0, -1e300, 1e-300].into_iter().collect();
        assert_eq!(acc.value(), 1.0 + 1e-300);
        let acc: ExactSum = [0.1, 0.2, -0.3].into_iter().collect();
        // exact value of the three doubles, not 5.55e-17 from naive addition
        assert_eq!(acc.value(), 2.7755575615628914e-17);
    }

    #[test]
    fn negative_totals() {
        let acc: ExactSum = [-3.25, 1.0].into_iter().collect();
        assert_eq!(acc.value(), -2.25);
        let acc = ExactSum::from_value(-f64::MIN_POSITIVE / 8.0);
        assert_eq!(acc.value(), -f64::MIN_POSITIVE / 8.0);
    }

    #[test]
    fn extremes_round_trip() {
        for x in [f64::MAX, f64::MIN_POSITIVE, 5e-324, -f64::MAX, 1.0 / 3.0] {
            assert_eq!(ExactSum::from_value(x).value(), x);
        }
    }

    #[test]
    fn merge_is_grouping_free() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 * 1.37e-3 - 0.6).collect();
        let whole: ExactSum = xs.iter().copied().collect();
        let mut parts = ExactSum::new();
        for chunk in xs.chunks(37).rev() {
            parts.merge(&chunk.iter().copied().collect());
        }
        assert_eq!(whole.value().to_bits(), parts.value().to_bits());
    }

    #[test]
    fn non_finite() {
        let mut acc = ExactSum::from_value(1.0);
        acc.add(f64::INFINITY);
        assert_eq!(acc.value(), f64::INFINITY);
        acc.add(f64::NEG_INFINITY);
        assert!(acc.value().is_nan());
    }

    #[test]
    fn partial_mismatch() {
        assert!(Partial::Max(1.0).combine(Partial::sum(1.0)).is_err());
        assert_eq!(
            Partial::Min(2.0).combine(Partial::Min(-1.0)).unwrap(),
            Partial::Min(-1.0)
        );
    }
}
