//! Disk perturbations of one sign: eigenvalues of the Toeplitz operator
//! `Pi_q chi_r Pi_q`, its trace, and scans showing that every resolvable
//! sector leaves the Landau level on the side of the perturbation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landau_basis::{check_field, overlap_log, SectorIndex};
use crate::radial_potential::StepPotential;
use crate::report::fmt_f64;
use crate::sector_solver::{default_tol, eigenvalue_near_level};
use crate::specfun::{log_factorial, log_rising, LogWeight};

/// First-order displacements below `RESOLUTION_FLOOR * b` are not sign-checked.
pub const RESOLUTION_FLOOR: f64 = 1e-9;

/// Eigenvalues `lambda_{q,m}` of `Pi_q chi_{disk r} Pi_q`, one per sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzSpectrum {
    pub q: u64,
    pub b: f64,
    pub r: f64,
    pub lambdas: BTreeMap<i64, f64>,
    /// `ln lambda`, finite even where `lambda` underflows.
    pub log_lambdas: BTreeMap<i64, f64>,
}

pub fn toeplitz_eigs(b: f64, q: u64, r: f64, m_lo: i64, m_hi: i64) -> Result<ToeplitzSpectrum> {
    check_field(b)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("disk radius must be positive, got {r}")));
    }
    if m_lo < -(q as i64) || m_lo > m_hi {
        return Err(Error::Domain(format!("sector range {m_lo}..={m_hi} must start at or above -q = -{q}")));
    }
    let mut lambdas = BTreeMap::new();
    let mut log_lambdas = BTreeMap::new();
    for m in m_lo..=m_hi {
        let sector = SectorIndex(m);
        let radial = sector.radial_index(q).expect("m >= -q");
        let w = overlap_log(radial, sector.abs_m(), b, 0.0, r)?;
        lambdas.insert(m, w.value().clamp(0.0, 1.0));
        log_lambdas.insert(m, w.log_mag());
    }
    Ok(ToeplitzSpectrum { q, b, r, lambdas, log_lambdas })
}

/// Partial trace against the full trace `b r^2 / 2` of one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub partial_sum: f64,
    pub target: f64,
    /// `target - partial_sum`.
    pub gap: f64,
    /// Upper bound on the eigenvalues of sectors outside the scanned range.
    pub tail_bound: f64,
}

impl TraceCheck {
    /// `0 <= gap <= tail_bound`, up to `slack` of rounding.
    pub fn is_consistent(&self, slack: f64) -> bool {
        self.gap >= -slack && self.gap <= self.tail_bound + slack
    }
}

/// `ln` of `binom(q+m, q) s^{m+1} / (m+1)!`, which bounds `lambda_{q,m}`
/// through `|L_q^{(m)}(s)| <= binom(q+m, q) e^{s/2}`.
fn log_lambda_bound(q: u64, m: f64, s: f64) -> f64 {
    log_rising(m, q) - log_factorial(q) + (m + 1.0) * s.ln() - crate::specfun::log_gamma_unchecked(m + 2.0)
}

pub fn trace_check(spectrum: &ToeplitzSpectrum) -> Result<TraceCheck> {
    let (&m_lo, _) = spectrum
        .lambdas
        .first_key_value()
        .ok_or_else(|| Error::Precondition("trace check needs a nonempty spectrum".into()))?;
    let (&m_hi, _) = spectrum.lambdas.last_key_value().expect("nonempty");
    let q = spectrum.q;
    let s = 0.5 * spectrum.b * spectrum.r * spectrum.r;
    let partial_sum: f64 = spectrum.lambdas.values().sum();
    // sectors below the scan: each eigenvalue is at most 1
    let mut tail_bound = (m_lo + q as i64).max(0) as f64;
    let next = (m_hi + 1).max(0) as f64;
    let ratio_at = |m: f64| (q as f64 + m + 1.0) / (m + 1.0) * s / (m + 2.0);
    let ratio = ratio_at(next);
    if ratio >= 1.0 {
        tail_bound = f64::INFINITY;
    } else if q == 0 && m_hi >= 0 {
        // P(a+1, s) <= P(a, s) s/(a+1)
        let rho = s / (next + 2.0);
        let first = spectrum.lambdas[&m_hi] * s / (next + 1.0);
        tail_bound += first / (1.0 - rho);
    } else {
        tail_bound += LogWeight::from_log(log_lambda_bound(q, next, s)).value() / (1.0 - ratio);
    }
    let target = s;
    Ok(TraceCheck { partial_sum, target, gap: target - partial_sum, tail_bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            other => Err(Error::Domain(format!("sign must be + or -, got {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub t: f64,
    pub m: i64,
    pub energy: f64,
    pub displacement: f64,
    pub first_order: f64,
    pub resolved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingTable {
    pub b: f64,
    pub q: u64,
    pub sign: Sign,
    pub c: f64,
    pub r: f64,
    pub rows: Vec<SplitRow>,
}

impl SplittingTable {
    /// Columns `t,m,E,displacement,first_order,resolved`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,m,E,displacement,first_order,resolved\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_f64(row.t),
                row.m,
                fmt_f64(row.energy),
                fmt_f64(row.displacement),
                fmt_f64(row.first_order),
                row.resolved
            ));
        }
        out
    }

    /// Resolved rows whose displacement is zero or on the wrong side.
    pub fn violations(&self) -> Vec<SplitRow> {
        let sign = self.sign.factor();
        // negated so a NaN displacement also counts as a violation
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let wrong = |r: &&SplitRow| r.resolved && !(r.displacement * sign > 0.0);
        self.rows.iter().filter(wrong).copied().collect()
    }

    /// Pairs of rows in one sector where a larger `t` gives a smaller `|d|`.
    pub fn monotonicity_breaks(&self) -> Vec<(SplitRow, SplitRow)> {
        let sign = self.sign.factor();
        let mut by_sector: BTreeMap<i64, Vec<SplitRow>> = BTreeMap::new();
        for row in &self.rows {
            by_sector.entry(row.m).or_default().push(*row);
        }
        let mut out = Vec::new();
        for rows in by_sector.values_mut() {
            rows.sort_by(|a, b| a.t.total_cmp(&b.t));
            for w in rows.windows(2) {
                if sign * w[1].displacement < sign * w[0].displacement {
                    out.push((w[0], w[1]));
                }
            }
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        match self.violations().first() {
            None => Ok(()),
            Some(row) => Err(Error::Structure(format!(
                "{} resolved sector(s) fail to split with the sign of the perturbation, first at t = {}, m = {} (d = {:e})",
                self.violations().len(),
                row.t,
                row.m,
                row.displacement
            ))),
        }
    }
}

/// Displacements of `E_q(+-t c chi_{disk r}; m)` over a grid of `t` and sectors.
pub fn splitting_scan(
    b: f64,
    q: u64,
    sign: Sign,
    c: f64,
    r: f64,
    t_grid: &[f64],
    m_range: std::ops::RangeInclusive<i64>,
) -> Result<SplittingTable> {
    check_field(b)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain(format!("disk height c must be positive, got {c}")));
    }
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Domain("t grid must be finite and nonnegative".into()));
    }
    if (sign == Sign::Minus || q >= 1) && c >= 2.0 * b {
        return Err(Error::Precondition(format!("disk height c = {c} violates the sup-norm bound ||V||_inf < 2b = {}", 2.0 * b)));
    }
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    if c * t_max >= b {
        return Err(Error::Precondition(format!("c * max t = {} must stay below b = {b}", c * t_max)));
    }
    let (m_lo, m_hi) = (*m_range.start(), *m_range.end());
    let m_lo = m_lo.max(-(q as i64));
    if m_lo > m_hi {
        return Ok(SplittingTable { b, q, sign, c, r, rows: Vec::new() });
    }
    let spectrum = toeplitz_eigs(b, q, r, m_lo, m_hi)?;
    let disk = StepPotential::disk(sign.factor() * c, r)?;
    let cells: Vec<(f64, i64)> = t_grid.iter().flat_map(|&t| (m_lo..=m_hi).map(move |m| (t, m))).collect();
    let tol = default_tol(b);
    let level = crate::landau_basis::landau_level(b, q);
    let rows = cells
        .par_iter()
        .map(|&(t, m)| {
            let ev = eigenvalue_near_level(b, q, m, &disk.scaled(t), tol)?;
            let lambda = spectrum.lambdas[&m];
            let log_floor = (RESOLUTION_FLOOR * b).ln();
            let resolved = t > 0.0 && (t * c).ln() + spectrum.log_lambdas[&m] > log_floor;
            Ok(SplitRow {
                t,
                m,
                energy: ev.energy,
                displacement: ev.energy - level,
                first_order: sign.factor() * t * c * lambda,
                resolved,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplittingTable { b, q, sign, c, r, rows })
}
