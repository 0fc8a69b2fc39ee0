//! Platform-deterministic elementary functions.
//!
//! libm implementations of log2/exp2/pow may differ across platforms and
//! libc versions, which would break bit-identical workload streams. These
//! versions use only IEEE-754 +, -, *, / (all correctly rounded and thus
//! identical everywhere) plus exact exponent-bit manipulation, so the Zipf
//! table construction is reproducible anywhere.
//!
//! Accuracy is ~1e-13 relative, far tighter than anything the sampling
//! statistics can observe; the point is determinism, not ulp-exactness.

/// 2/ln(2), the atanh-series scale factor for log2.
const TWO_OVER_LN2: f64 = 2.885390081777926814;
/// ln(2), for exp2 via the exponential Taylor series.
const LN2: f64 = 0.693147180559945309;
const SQRT2: f64 = 1.414213562373095049;

/// Exact 2^n for integer n in the normal range.
fn pow2i(n: i64) -> f64 {
    assert!((-1022..=1023).contains(&n), "pow2i exponent {n} out of normal range");
    f64::from_bits(((n + 1023) as u64) << 52)
}

/// Base-2 logarithm of a finite positive value.
///
/// Exact for powers of two. Argument reduction puts the mantissa in
/// (sqrt(2)/2, sqrt(2)]; the remainder uses the atanh series
/// log2(m) = 2/ln2 * (s + s^3/3 + ...) with s = (m-1)/(m+1).
pub fn log2_det(x: f64) -> f64 {
    assert!(x.is_finite() && x > 0.0, "log2_det domain: finite positive, got {x}");
    let mut x = x;
    let mut e_adj: i64 = 0;
    if x < f64::MIN_POSITIVE {
        // Subnormal: scale up exactly by 2^64.
        x *= pow2i(64);
        e_adj = -64;
    }
    let bits = x.to_bits();
    let mut e = ((bits >> 52) & 0x7ff) as i64 - 1023 + e_adj;
    let mut m = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | (1023u64 << 52));
    if m > SQRT2 {
        m *= 0.5;
        e += 1;
    }
    let s = (m - 1.0) / (m + 1.0);
    let z = s * s;
    // Horner over 1 + z/3 + z^2/5 + ... ; |s| <= 0.1716 so 9 terms reach
    // ~1e-15 of the sum.
    let mut acc = 1.0 / 19.0;
    for k in (1..=8u32).rev() {
        acc = 1.0 / (2 * k + 1) as f64 + z * acc;
    }
    let series = 1.0 + z * acc;
    e as f64 + TWO_OVER_LN2 * s * series
}

/// 2^y for y in the normal result range. Exact for integer y.
pub fn exp2_det(y: f64) -> f64 {
    assert!(y.is_finite() && y.abs() < 1020.0, "exp2_det domain: |y| < 1020, got {y}");
    let n = y.floor();
    let f = y - n; // in [0, 1)
    let t = f * LN2;
    // e^t by Taylor: acc_k = 1 + (t/k) * acc_{k+1}, 17 terms.
    let mut acc = 1.0;
    for k in (1..=17u32).rev() {
        acc = 1.0 + t / k as f64 * acc;
    }
    pow2i(n as i64) * acc
}

/// x^y for finite positive x.
pub fn pow_det(x: f64, y: f64) -> f64 {
    exp2_det(y * log2_det(x))
}
