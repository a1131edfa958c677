//! Landau-level structure of the unperturbed angular-momentum sectors.
//!
//! With `s = b rho^2 / 2` the normalized radial eigenfunctions satisfy
//! `2 pi phi_{q,m}(rho)^2 rho d rho = q!/(q+m)! s^m L_q^{(m)}(s)^2 e^{-s} ds`,
//! so every annulus integral reduces to lower incomplete gamma functions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_nodes, PANEL_ORDER};
use crate::specfun::{
    interval_gamma_log, laguerre_alpha, log_factorial, log_gamma_unchecked, log_rising, LogWeight,
};

/// Angular momentum `m` of one Fourier sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectorIndex(pub i64);

impl SectorIndex {
    pub fn m(self) -> i64 {
        self.0
    }

    /// Lowest admissible Landau index, `max(0, -m)`.
    pub fn m_minus(self) -> u64 {
        if self.0 < 0 {
            self.0.unsigned_abs()
        } else {
            0
        }
    }

    pub fn abs_m(self) -> u64 {
        self.0.unsigned_abs()
    }

    /// Radial index inside the `|m|` operator that carries Landau level `q`.
    pub fn radial_index(self, q: u64) -> Option<u64> {
        q.checked_sub(self.m_minus())
    }
}

/// Field strength and target Landau index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub b: f64,
    pub q: u64,
}

impl FieldParams {
    pub fn new(b: f64, q: u64) -> Result<Self> {
        check_field(b)?;
        Ok(FieldParams { b, q })
    }

    pub fn level(&self) -> f64 {
        landau_level(self.b, self.q)
    }
}

pub fn landau_level(b: f64, q: u64) -> f64 {
    2.0 * b * q as f64
}

pub(crate) fn check_field(b: f64) -> Result<()> {
    if b.is_finite() && b > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("field strength must be finite and positive, got {b}")))
    }
}

/// First `count` eigenvalues of the unperturbed sector operator.
pub fn sector_levels(m: SectorIndex, b: f64, count: usize) -> Vec<f64> {
    let start = m.m_minus();
    (0..count as u64).map(|k| landau_level(b, start + k)).collect()
}

/// `ln` of the normalization prefactor `q!/(pi (q+m)!) (b/2)^{m+1}`.
fn log_norm_sq(q: u64, m: f64, b: f64) -> f64 {
    let log_qm_factorial = log_gamma_unchecked(m + 1.0) + log_rising(m, q);
    log_factorial(q) - log_qm_factorial - std::f64::consts::PI.ln() + (m + 1.0) * (0.5 * b).ln()
}

/// `phi_{q,m}(rho)` in sign/log-magnitude form. `rho <= 0` returns the limit at the origin.
pub fn phi_log(q: u64, m: u64, b: f64, rho: f64) -> LogWeight {
    let mf = m as f64;
    if rho <= 0.0 {
        if m > 0 {
            return LogWeight::ZERO;
        }
        return LogWeight::from_value(laguerre_alpha(q, 0.0, 0.0))
            .scale_log(0.5 * log_norm_sq(q, 0.0, b));
    }
    let s = 0.5 * b * rho * rho;
    let lag = LogWeight::from_value(laguerre_alpha(q, mf, s));
    lag.scale_log(0.5 * log_norm_sq(q, mf, b) + mf * rho.ln() - 0.5 * s)
}

/// Normalized radial eigenfunction `phi_{q,m}(rho)`.
pub fn phi(q: u64, m: u64, b: f64, rho: f64) -> f64 {
    phi_log(q, m, b, rho).value()
}

fn annulus_to_s(b: f64, r_lo: f64, r_hi: f64) -> Result<(f64, f64)> {
    check_field(b)?;
    if r_lo.is_nan() || r_hi.is_nan() || r_lo < 0.0 || r_lo > r_hi {
        return Err(Error::Domain(format!("annulus bounds must satisfy 0 <= r_lo <= r_hi, got [{r_lo}, {r_hi}]")));
    }
    let s = |r: f64| if r == f64::INFINITY { r } else { 0.5 * b * r * r };
    Ok((s(r_lo), s(r_hi)))
}

/// Largest order for which [`cross_overlap_log_real`] may switch to quadrature.
const QUADRATURE_MAX_M: f64 = 1e5;

/// `2 pi int phi_{q1,m} phi_{q2,m} rho d rho` over an annulus, in log form.
///
/// `m` is a real so the same routine serves sectors far beyond integer range.
pub fn cross_overlap_log_real(q1: u64, q2: u64, m: f64, b: f64, r_lo: f64, r_hi: f64) -> Result<LogWeight> {
    let (s_lo, s_hi) = annulus_to_s(b, r_lo, r_hi)?;
    if s_lo == s_hi {
        return Ok(LogWeight::ZERO);
    }
    let (q1, q2) = (q1.min(q2), q1.max(q2));
    // Each (l1, l2) pair of the product of monomial expansions contributes
    // (-1)^k sqrt(q1! q2!) / ((q1-l1)! (q2-l2)! l1! l2!)
    //   * sqrt((q1+m)! (q2+m)!) (m+k)! / ((m+l1)! (m+l2)!) * dP(m+k+1).
    let half_norm = 0.5 * (log_factorial(q1) + log_factorial(q2))
        + 0.5 * (log_rising(m, q1) + log_rising(m, q2));
    let mut terms = Vec::with_capacity(((q1 + 1) * (q2 + 1)) as usize);
    for l1 in 0..=q1 {
        for l2 in 0..=q2 {
            let k = l1 + l2;
            let mass = interval_gamma_log(m + k as f64 + 1.0, s_lo, s_hi)?;
            if mass.is_zero() {
                continue;
            }
            let log_coef = half_norm
                - log_factorial(q1 - l1)
                - log_factorial(q2 - l2)
                - log_factorial(l1)
                - log_factorial(l2)
                - log_rising(m, l1)
                - log_rising(m, l2)
                + log_rising(m, k);
            let sign = if k % 2 == 0 { 1 } else { -1 };
            terms.push(LogWeight::new(sign, log_coef) * mass);
        }
    }
    let total = LogWeight::sum(terms.iter().copied());
    // rounding in the alternating sum is about eps * sum |terms|; quadrature
    // errs by about eps, so it wins once the terms exceed unit size
    let magnitude = LogWeight::sum(terms.iter().map(|t| t.abs()));
    if magnitude.log_mag() > 0.0 && m.fract() == 0.0 && m <= QUADRATURE_MAX_M {
        return Ok(LogWeight::from_value(cross_overlap_quadrature(q1, q2, m as u64, b, r_lo, r_hi)));
    }
    Ok(total)
}

pub fn cross_overlap(q1: u64, q2: u64, m: u64, b: f64, r_lo: f64, r_hi: f64) -> Result<f64> {
    Ok(cross_overlap_log_real(q1, q2, m as f64, b, r_lo, r_hi)?.value())
}

/// Fraction of the `phi_{q,m}` mass (area measure) inside `[r_lo, r_hi]`, in log form.
pub fn overlap_log(q: u64, m: u64, b: f64, r_lo: f64, r_hi: f64) -> Result<LogWeight> {
    cross_overlap_log_real(q, q, m as f64, b, r_lo, r_hi)
}

pub fn overlap(q: u64, m: u64, b: f64, r_lo: f64, r_hi: f64) -> Result<f64> {
    Ok(overlap_log(q, m, b, r_lo, r_hi)?.value().clamp(0.0, 1.0))
}

/// Values of the orthonormal Laguerre functions
/// `psi_n(s) = sqrt(n!/(n+m)!) s^{m/2} e^{-s/2} L_n^{(m)}(s)`, `n < count`.
pub(crate) fn laguerre_functions(count: usize, m: u64, s: f64, out: &mut [f64]) {
    let mf = m as f64;
    let log0 = 0.5 * (mf * s.ln() - s - log_gamma_unchecked(mf + 1.0));
    out[0] = if s > 0.0 { log0.exp() } else if m == 0 { 1.0 } else { 0.0 };
    if count > 1 {
        out[1] = (mf + 1.0 - s) / (mf + 1.0).sqrt() * out[0];
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        let up = ((nf + 1.0) * (nf + mf + 1.0)).sqrt();
        let down = (nf * (nf + mf)).sqrt();
        out[n + 1] = ((2.0 * nf + mf + 1.0 - s) * out[n] - down * out[n - 1]) / up;
    }
}

/// Galerkin block of the indicator of `[r_lo, r_hi]` on the first `size` radial
/// levels of sector `|m|`: entry `(i, j)` is `cross_overlap(i, j, m, b, r_lo, r_hi)`.
///
/// Evaluated by composite Gauss–Legendre in `rho`, where the integrand is
/// a polynomial times a Gaussian, which avoids the alternating-sum cancellation
/// of the closed form at large indices.
pub fn annulus_block(size: usize, m: u64, b: f64, r_lo: f64, r_hi: f64) -> Result<DMatrix<f64>> {
    annulus_to_s(b, r_lo, r_hi)?;
    let mut block = DMatrix::zeros(size, size);
    if r_lo == r_hi || size == 0 {
        return Ok(block);
    }
    let mut psi = vec![0.0; size];
    for (s, weight) in quadrature_nodes(size, m, b, r_lo, r_hi) {
        laguerre_functions(size, m, s, &mut psi);
        for i in 0..size {
            let wi = weight * psi[i];
            if wi == 0.0 {
                continue;
            }
            for j in i..size {
                block[(i, j)] += wi * psi[j];
            }
        }
    }
    for i in 0..size {
        for j in 0..i {
            block[(i, j)] = block[(j, i)];
        }
    }
    Ok(block)
}

/// Nodes `s` and weights for `int f(s) ds` over an annulus, exact enough for
/// products of the first `size` Laguerre functions of order `m`.
fn quadrature_nodes(size: usize, m: u64, b: f64, r_lo: f64, r_hi: f64) -> impl Iterator<Item = (f64, f64)> {
    let r_hi = if r_hi.is_finite() {
        r_hi
    } else {
        // mass beyond s = 4 size + 2 m + 200 is below double precision
        let s_max = 4.0 * size as f64 + 2.0 * m as f64 + 200.0;
        (2.0 * s_max / b).sqrt().max(r_lo)
    };
    let s_width = 0.5 * b * (r_hi * r_hi - r_lo * r_lo);
    let degree = 4 * size + 2 * m as usize + 2;
    let panels = (degree / PANEL_ORDER + 1).max((s_width / 2.0).ceil() as usize).max(2);
    composite_nodes(r_lo, r_hi, panels).into_iter().map(move |(rho, w)| (0.5 * b * rho * rho, w * b * rho))
}

/// One entry of [`annulus_block`], for integer `m`.
fn cross_overlap_quadrature(q1: u64, q2: u64, m: u64, b: f64, r_lo: f64, r_hi: f64) -> f64 {
    let size = q1.max(q2) as usize + 1;
    let mut psi = vec![0.0; size];
    let mut total = 0.0;
    for (s, weight) in quadrature_nodes(size, m, b, r_lo, r_hi) {
        laguerre_functions(size, m, s, &mut psi);
        total += weight * psi[q1 as usize] * psi[q2 as usize];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sector_index_minus() {
        assert_eq!(SectorIndex(-3).m_minus(), 3);
        assert_eq!(SectorIndex(4).m_minus(), 0);
        assert_eq!(SectorIndex(-3).radial_index(1), None);
        assert_eq!(SectorIndex(-1).radial_index(2), Some(1));
    }

    #[test]
    fn levels_examples() {
        assert_eq!(sector_levels(SectorIndex(0), 1.0, 3), vec![0.0, 2.0, 4.0]);
        assert_eq!(sector_levels(SectorIndex(-2), 1.0, 3), vec![4.0, 6.0, 8.0]);
        assert_eq!(sector_levels(SectorIndex(5), 0.5, 2), vec![0.0, 1.0]);
    }

    #[test]
    fn phi_at_origin() {
        assert_relative_eq!(phi(0, 0, 1.0, 0.0), (1.0 / (2.0 * std::f64::consts::PI)).sqrt(), max_relative = 1e-14);
        assert_eq!(phi(0, 3, 1.0, 0.0), 0.0);
    }

    #[test]
    fn phi_node_of_first_excited_level() {
        assert!(phi(1, 0, 1.0, 2f64.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn overlap_ground_disk() {
        assert_relative_eq!(overlap(0, 0, 1.0, 0.0, 1.0).unwrap(), 1.0 - (-0.5f64).exp(), max_relative = 1e-13);
        assert_eq!(overlap(2, 3, 1.0, 0.7, 0.7).unwrap(), 0.0);
        assert!(overlap(0, 0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn block_matches_closed_form() {
        let block = annulus_block(6, 2, 1.3, 0.4, 1.7).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let c = cross_overlap(i as u64, j as u64, 2, 1.3, 0.4, 1.7).unwrap();
                assert!((block[(i, j)] - c).abs() < 1e-12, "{i} {j}: {} vs {c}", block[(i, j)]);
            }
        }
    }

    #[test]
    fn full_line_block_is_identity() {
        let block = annulus_block(40, 3, 0.8, 0.0, f64::INFINITY).unwrap();
        let err = (block - DMatrix::identity(40, 40)).abs().max();
        assert!(err < 1e-12, "{err}");
    }
}
