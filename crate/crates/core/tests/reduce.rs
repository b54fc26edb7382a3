//! Exact summation against an arbitrary-precision integer oracle.

use num_bigint::{BigInt, Sign};
use num_traits::{One, Zero};
use proptest::prelude::*;
use taskgrid::reduce::ExactSum;

/// Fixed-point scale: every generated input is a multiple of 2^-SCALE.
const SCALE: i32 = 120;

fn to_fixed(x: f64) -> BigInt {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mant = if exp == 0 {
        (bits & ((1 << 52) - 1)) << 1
    } else {
        (bits & ((1 << 52) - 1)) | (1 << 52)
    };
    // x = mant · 2^(exp - 1075)
    let shift = exp - 1075 + SCALE;
    assert!(shift >= 0, "input below the fixed-point grid");
    let v = BigInt::from(mant) << shift as usize;
    if x.is_sign_negative() {
        -v
    } else {
        v
    }
}

/// Round-to-nearest-even of `s · 2^-SCALE`, assuming a normal result.
fn round_fixed(s: &BigInt) -> f64 {
    if s.is_zero() {
        return 0.0;
    }
    let (sign, mag) = (s.sign(), s.magnitude().clone());
    let bits = mag.bits() as i64;
    let shift = (bits - 53).max(0) as usize;
    let mut q = &mag >> shift;
    if shift > 0 {
        let r = &mag - (&q << shift);
        let half = num_bigint::BigUint::one() << (shift - 1);
        if r > half || (r == half && q.bit(0)) {
            q += 1u32;
        }
    }
    let q: u64 = q.try_into().unwrap();
    let v = q as f64 * 2f64.powi(shift as i32 - SCALE);
    if sign == Sign::Minus {
        -v
    } else {
        v
    }
}

fn finite_value() -> impl Strategy<Value = f64> {
    (any::<bool>(), 0u64..(1 << 52), -60i32..60).prop_map(|(neg, m, e)| {
        let x = (1.0 + m as f64 / (1u64 << 52) as f64) * 2f64.powi(e);
        if neg {
            -x
        } else {
            x
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_big_integer_oracle(xs in prop::collection::vec(finite_value(), 1..60)) {
        let exact: BigInt = xs.iter().map(|&x| to_fixed(x)).sum();
        let acc: ExactSum = xs.iter().copied().collect();
        prop_assert_eq!(acc.value().to_bits(), round_fixed(&exact).to_bits());
    }

    #[test]
    fn cancelling_pairs_leave_the_remainder(xs in prop::collection::vec(finite_value(), 1..30), tail in finite_value()) {
        let mut acc = ExactSum::new();
        for &x in &xs {
            acc.add(x);
        }
        acc.add(tail);
        for &x in xs.iter().rev() {
            acc.add(-x);
        }
        prop_assert_eq!(acc.value(), tail);
    }
}

#[test]
fn oracle_rounding_ties_to_even() {
    // 2^53 + 1 is halfway between 2^53 and 2^53 + 2
    let s = (BigInt::from(1u64 << 53) + 1) << SCALE as usize;
    assert_eq!(round_fixed(&s), 2f64.powi(53));
    let s = (BigInt::from(1u64 << 53) + 3) << SCALE as usize;
    assert_eq!(round_fixed(&s), 2f64.powi(53) + 4.0);
}
