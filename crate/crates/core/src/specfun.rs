//! Scalar special functions: log-gamma, generalized Laguerre polynomials and
//! the regularized lower incomplete gamma function, with log-space variants
//! for parameters far outside the range of `f64`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two log magnitudes closer than this are treated as exact cancellation.
const CANCEL_LOG_TOL: f64 = 1e-14;

/// Above this shape parameter only the ascending series is available.
pub const HUGE_SHAPE: f64 = 1e15;

/// A signed quantity stored as `sign * exp(log_mag)`.
///
/// `sign == 0` means the value is exactly zero and `log_mag` is `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogWeight {
    sign: i8,
    log_mag: f64,
}

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight { sign: 0, log_mag: f64::NEG_INFINITY };
    pub const ONE: LogWeight = LogWeight { sign: 1, log_mag: 0.0 };

    pub fn new(sign: i8, log_mag: f64) -> Self {
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogWeight { sign: sign.signum(), log_mag }
        }
    }

    /// Positive weight `exp(log_mag)`.
    pub fn from_log(log_mag: f64) -> Self {
        Self::new(1, log_mag)
    }

    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogWeight { sign: if x > 0.0 { 1 } else { -1 }, log_mag: x.abs().ln() }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_mag(&self) -> f64 {
        self.log_mag
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Materialize as `f64`; underflows to zero and overflows to infinity.
    pub fn value(&self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.log_mag.exp()
        }
    }

    pub fn abs(self) -> Self {
        LogWeight { sign: self.sign.abs(), log_mag: self.log_mag }
    }

    /// Multiply by `exp(delta)`.
    pub fn scale_log(self, delta: f64) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogWeight { sign: self.sign, log_mag: self.log_mag + delta }
        }
    }

    /// Sum many terms with a single shift by the largest magnitude.
    pub fn sum<I: IntoIterator<Item = LogWeight>>(terms: I) -> Self {
        let terms: Vec<LogWeight> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        let Some(shift) = terms.iter().map(|t| t.log_mag).reduce(f64::max) else {
            return Self::ZERO;
        };
        // Neumaier-compensated sum of the shifted values.
        let mut total = 0.0_f64;
        let mut comp = 0.0_f64;
        for t in &terms {
            let x = f64::from(t.sign) * (t.log_mag - shift).exp();
            let s = total + x;
            if total.abs() >= x.abs() {
                comp += (total - s) + x;
            } else {
                comp += (x - s) + total;
            }
            total = s;
        }
        Self::from_value(total + comp).scale_log(shift)
    }
}

impl Neg for LogWeight {
    type Output = LogWeight;
    fn neg(self) -> LogWeight {
        LogWeight { sign: -self.sign, log_mag: self.log_mag }
    }
}

impl Mul for LogWeight {
    type Output = LogWeight;
    fn mul(self, rhs: LogWeight) -> LogWeight {
        if self.sign == 0 || rhs.sign == 0 {
            LogWeight::ZERO
        } else {
            LogWeight { sign: self.sign * rhs.sign, log_mag: self.log_mag + rhs.log_mag }
        }
    }
}

impl Add for LogWeight {
    type Output = LogWeight;
    fn add(self, rhs: LogWeight) -> LogWeight {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_mag >= rhs.log_mag { (self, rhs) } else { (rhs, self) };
        let d = small.log_mag - big.log_mag;
        if big.sign == small.sign {
            LogWeight { sign: big.sign, log_mag: big.log_mag + d.exp().ln_1p() }
        } else if d > -CANCEL_LOG_TOL {
            LogWeight::ZERO
        } else {
            LogWeight { sign: big.sign, log_mag: big.log_mag + (-d.exp_m1()).ln() }
        }
    }
}

impl Sub for LogWeight {
    type Output = LogWeight;
    fn sub(self, rhs: LogWeight) -> LogWeight {
        self + (-rhs)
    }
}

/// Polynomial in `s` with `coeffs[k]` multiplying `s^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySeries {
    coeffs: Vec<f64>,
}

impl PolySeries {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        PolySeries { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    pub fn mul(&self, other: &PolySeries) -> PolySeries {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PolySeries::new(out)
    }
}

// Bernoulli-number coefficients B_{2k} / (2k (2k - 1)) of the Stirling series.
const STIRLING: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

fn stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut corr = 0.0;
    let mut p = inv;
    for c in STIRLING {
        corr += c * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + corr
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma requires finite x > 0, got {x}")));
    }
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x >= 10.0 {
        return stirling(x);
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < 10.0 {
        prod *= shifted;
        shifted += 1.0;
    }
    stirling(shifted) - prod.ln()
}

/// `ln(n!)`.
pub fn log_factorial(n: u64) -> f64 {
    log_gamma_unchecked(n as f64 + 1.0)
}

/// `ln((m + k)! / m!)` as a sum of logs, exact in relative terms even when `m`
/// is far beyond integer range.
pub fn log_rising(m: f64, k: u64) -> f64 {
    (1..=k).map(|i| (m + i as f64).ln()).sum()
}

/// Generalized Laguerre polynomial `L_q^{(m)}(s)` by the three-term recurrence.
pub fn laguerre(q: u64, m: u64, s: f64) -> f64 {
    laguerre_alpha(q, m as f64, s)
}

pub(crate) fn laguerre_alpha(q: u64, alpha: f64, s: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - s;
    for n in 1..q {
        let n = n as f64;
        let next = ((2.0 * n + 1.0 + alpha - s) * cur - (n + alpha) * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Monomial coefficients of `L_q^{(m)}`: `(-1)^l C(q+m, q-l) / l!`.
pub fn laguerre_coefficients(q: u64, m: u64) -> PolySeries {
    let coeffs = (0..=q)
        .map(|l| {
            let mut binom = 1.0;
            for i in 1..=(q - l) {
                binom *= (m + l + i) as f64 / i as f64;
            }
            let fact: f64 = (1..=l).map(|i| i as f64).product();
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom / fact
        })
        .collect();
    PolySeries::new(coeffs)
}

/// Coefficients of `L_{q1}^{(m)}(s) L_{q2}^{(m)}(s)`.
pub fn laguerre_product(q1: u64, q2: u64, m: u64) -> PolySeries {
    laguerre_coefficients(q1, m).mul(&laguerre_coefficients(q2, m))
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("incomplete gamma requires finite a > 0, got {a}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    Ok(())
}

/// `ln( gamma(a, x) / x^a )` = `-x + ln sum_n x^n / (a (a+1) ... (a+n))`.
///
/// Converges for every `x`, quickly when `x < a + 1`. The `x^a` factor is left
/// to the caller so that huge shapes can be handled in a shifted frame.
pub fn log_lower_gamma_scaled(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = 1.0;
    while n < 100_000.0 {
        term *= x / (a + n);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        n += 1.0;
    }
    -x + sum.ln()
}

/// `ln P(a, x)` by the ascending series; valid for any `x > 0`, efficient for `x < a + 1`.
fn log_reg_lower_series(a: f64, x: f64) -> f64 {
    // P = x^a e^{-x} / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
    a * x.ln() + log_lower_gamma_scaled(a, x) - log_gamma_unchecked(a)
}

/// `ln Q(a, x)` by the modified Lentz continued fraction; for `x >= a + 1`.
fn log_reg_upper_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    a * x.ln() - x - log_gamma_unchecked(a) + h.ln()
}

/// Regularized lower incomplete gamma `P(a, x) = gamma(a, x) / Gamma(a)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(log_reg_lower_series(a, x).exp().min(1.0))
    } else if a > HUGE_SHAPE {
        Err(Error::Domain(format!(
            "x = {x} >= a + 1 with a = {a}: only the ascending series is supported for huge shapes"
        )))
    } else {
        Ok((1.0 - log_reg_upper_cf(a, x).exp()).clamp(0.0, 1.0))
    }
}

/// Regularized mass `P(a, s_hi) - P(a, s_lo)` in log space. `s_hi` may be infinite.
pub fn interval_gamma_log(a: f64, s_lo: f64, s_hi: f64) -> Result<LogWeight> {
    check_gamma_args(a, s_lo)?;
    if s_hi.is_nan() || s_lo > s_hi {
        return Err(Error::Domain(format!("interval [{s_lo}, {s_hi}] is reversed")));
    }
    if s_lo == s_hi {
        return Ok(LogWeight::ZERO);
    }
    let series_lo = s_lo < a + 1.0;
    let series_hi = s_hi < a + 1.0;
    if a > HUGE_SHAPE && !series_hi {
        return Err(Error::Domain(format!(
            "s_hi = {s_hi} >= a + 1 with a = {a}: only the ascending series is supported for huge shapes"
        )));
    }
    let lower = |x: f64| {
        if x == 0.0 {
            LogWeight::ZERO
        } else {
            LogWeight::from_log(log_reg_lower_series(a, x))
        }
    };
    let upper = |x: f64| {
        if x == f64::INFINITY {
            LogWeight::ZERO
        } else {
            LogWeight::from_log(log_reg_upper_cf(a, x))
        }
    };
    Ok(match (series_lo, series_hi) {
        (true, true) => lower(s_hi) - lower(s_lo),
        (false, false) => upper(s_lo) - upper(s_hi),
        _ => LogWeight::from_value(1.0 - upper(s_hi).value() - lower(s_lo).value()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_weight_roundtrip() {
        for x in [1e-300, -3.5, 0.25, 7e200] {
            assert_relative_eq!(LogWeight::from_value(x).value(), x, max_relative = 1e-12);
        }
        assert!(LogWeight::from_value(0.0).is_zero());
    }

    #[test]
    fn log_weight_cancellation_is_zero() {
        let a = LogWeight::from_log(-1234.5);
        assert!((a - a).is_zero());
        let b = LogWeight::from_value(3.0) - LogWeight::from_value(1.0);
        assert_relative_eq!(b.value(), 2.0, max_relative = 1e-15);
        assert_eq!((LogWeight::from_value(1.0) - LogWeight::from_value(3.0)).sign(), -1);
    }

    #[test]
    fn log_weight_sum_matches_pairwise() {
        let terms = [2.5, -1.25, 1e-3, -7.0].map(LogWeight::from_value);
        let s = LogWeight::sum(terms);
        assert_relative_eq!(s.value(), 2.5 - 1.25 + 1e-3 - 7.0, max_relative = 1e-15);
    }

    #[test]
    fn log_gamma_domain() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.0).is_err());
        assert!(log_gamma(f64::NAN).is_err());
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
    }

    #[test]
    fn poly_trims_trailing_zeros() {
        let p = PolySeries::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert_eq!(PolySeries::new(vec![]).coeffs(), &[0.0]);
    }

    #[test]
    fn laguerre_low_orders() {
        assert_eq!(laguerre(0, 7, 3.3), 1.0);
        assert_relative_eq!(laguerre(2, 1, 2.0), -1.0, epsilon = 1e-15);
        assert_relative_eq!(laguerre(2, 1, 0.0), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn product_examples() {
        assert_eq!(laguerre_product(0, 0, 4).coeffs(), &[1.0]);
        assert_eq!(laguerre_product(1, 0, 0).coeffs(), &[1.0, -1.0]);
        assert_eq!(laguerre_product(1, 1, 0).coeffs(), &[1.0, -2.0, 1.0]);
    }

    #[test]
    fn incomplete_gamma_edges() {
        assert_eq!(reg_lower_gamma(2.0, 0.0).unwrap(), 0.0);
        assert!((reg_lower_gamma(3.0, 50.0).unwrap() - 1.0).abs() <= 1e-13);
        assert!(reg_lower_gamma(0.0, 1.0).is_err());
        assert!(reg_lower_gamma(1.0, -1.0).is_err());
        assert!(interval_gamma_log(1.0, 2.0, 1.0).is_err());
        assert!(interval_gamma_log(4.0, 0.7, 0.7).unwrap().is_zero());
    }

    #[test]
    fn interval_with_infinite_upper_end() {
        let w = interval_gamma_log(3.0, 10.0, f64::INFINITY).unwrap();
        let q = 1.0 - reg_lower_gamma(3.0, 10.0).unwrap();
        assert_relative_eq!(w.value(), q, max_relative = 1e-12);
    }
}
