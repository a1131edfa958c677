//! First-order response of sector eigenvalues to the potential, the
//! rescaled eigenvalue map of the annular construction, and its Jacobi
//! matrix at zero coupling.
//!
//! Sectors of the construction have `m_j = 2^{N j^2} - 1`, far beyond the
//! reach of any eigensolver, so the Jacobi matrix is evaluated analytically.
//! Every entry of row `2l` shares the factor `(b/2)^{m_l+1} / m_l!`, which is
//! dropped before anything is exponentiated; what remains has magnitude
//! comparable to the entries themselves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landau_basis::{check_field, landau_level, overlap_log, SectorIndex};
use crate::radial_potential::{build_vt, exponents, ConstructionParams, CouplingVector, StepPotential};
use crate::sector_solver::eigenvalue_near_level;
use crate::quadrature::composite_nodes;
use crate::specfun::{log_factorial, log_lower_gamma_scaled, log_rising, LogWeight};

/// Largest construction sector handed to the eigensolver by [`rescaled_map`].
pub const SOLVER_MAX_M: f64 = 400.0;

fn radial_index(q: u64, m: i64) -> Result<u64> {
    SectorIndex(m).radial_index(q).ok_or_else(|| {
        Error::Precondition(format!("Landau index q = {q} is below m_- = {} for m = {m}", SectorIndex(m).m_minus()))
    })
}

/// `dE_q(t v; m)/dt` at `t = 0` in log form: `sum height * 2 pi int phi^2 rho d rho`.
pub fn first_order_log(q: u64, m: i64, b: f64, v: &StepPotential) -> Result<LogWeight> {
    check_field(b)?;
    let radial = radial_index(q, m)?;
    let m_abs = SectorIndex(m).abs_m();
    let terms = v
        .annuli
        .iter()
        .filter(|a| a.height != 0.0)
        .map(|a| Ok(overlap_log(radial, m_abs, b, a.r_inner, a.r_outer)? * LogWeight::from_value(a.height)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LogWeight::sum(terms))
}

pub fn first_order(q: u64, m: i64, b: f64, v: &StepPotential) -> Result<f64> {
    Ok(first_order_log(q, m, b, v)?.value())
}

/// Central difference of the tracked eigenvalue in the coupling, with one
/// Richardson step over `h` and `h/2`.
pub fn fd_derivative(q: u64, m: i64, b: f64, v: &StepPotential, h: f64) -> Result<f64> {
    check_field(b)?;
    if !(h > 0.0 && h * v.sup_norm() < 0.25 * b) {
        return Err(Error::Precondition(format!("step h = {h} must satisfy h * sup|v| < b/4")));
    }
    let tol = crate::sector_solver::default_tol(b);
    let central = |step: f64| -> Result<f64> {
        let plus = eigenvalue_near_level(b, q, m, &v.scaled(step), tol)?.energy;
        let minus = eigenvalue_near_level(b, q, m, &v.scaled(-step), tol)?.energy;
        Ok((plus - minus) / (2.0 * step))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Sector of pair `j` (1-based): `2^{N j^2} - 1`, as a real.
pub fn construction_sector(n: u32, j: usize) -> f64 {
    let e = f64::from(n) * (j * j) as f64;
    e.exp2() - 1.0
}

/// `int_beta^alpha exp(-a (g - beta) - x(g)) dg` with `x(g) = (b/2) e^{-g}`, so
/// that `gamma(a, x(beta)) - gamma(a, x(alpha)) = x(beta)^a` times this.
fn log_bracket(a: f64, b: f64, alpha: f64, beta: f64) -> LogWeight {
    let width = alpha - beta;
    let x_hi = 0.5 * b * (-beta).exp();
    let stiffness = (a + x_hi) * width;
    if stiffness <= 64.0 {
        // thin annulus: the gamma difference would cancel, integrate the density
        let panels = stiffness.ceil().max(1.0) as usize;
        let nodes = composite_nodes(0.0, width, panels);
        let peak = nodes
            .iter()
            .map(|&(d, _)| -a * d - x_hi * (-d).exp_m1())
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = nodes.iter().map(|&(d, w)| w * (-a * d - x_hi * (-d).exp_m1() - peak).exp()).sum();
        return LogWeight::from_log(-x_hi + peak + total.ln());
    }
    let x_lo = 0.5 * b * (-alpha).exp();
    let hi = log_lower_gamma_scaled(a, x_hi);
    let lo = -a * width + log_lower_gamma_scaled(a, x_lo);
    LogWeight::from_log(hi + (-(lo - hi).exp_m1()).ln())
}

/// Overlap of `phi_{q,m}` with annulus `k` of the construction, split as
/// `ln (b/2)^{m+1}/m! + offset + ln rel` with `offset = -(m+1) beta_k`.
/// Exponents enter directly so no radius is ever rounded to 1.
#[derive(Clone, Copy, Debug)]
struct FramedOverlap {
    offset: f64,
    rel: LogWeight,
}

fn framed_overlap(q: u64, m: f64, b: f64, n: u32, k: usize) -> FramedOverlap {
    let (alpha, beta) = exponents(n, k);
    let log_half_b = (0.5 * b).ln();
    let half_norm = log_factorial(q) + log_rising(m, q);
    let brackets: Vec<LogWeight> = (0..=2 * q)
        .map(|kp| {
            let a = m + kp as f64 + 1.0;
            log_bracket(a, b, alpha, beta).scale_log(kp as f64 * (log_half_b - beta))
        })
        .collect();
    let mut terms = Vec::new();
    for l1 in 0..=q {
        for l2 in 0..=q {
            let kp = l1 + l2;
            // (q+m)!/((m+l1)! (m+l2)!) = rising(q)/(m! rising(l1) rising(l2)); 1/m! is the row factor
            let log_coef = half_norm
                - log_factorial(q - l1)
                - log_factorial(q - l2)
                - log_factorial(l1)
                - log_factorial(l2)
                - log_rising(m, l1)
                - log_rising(m, l2);
            let sign = if kp % 2 == 0 { 1 } else { -1 };
            terms.push(LogWeight::new(sign, log_coef) * brackets[kp as usize]);
        }
    }
    FramedOverlap { offset: -(m + 1.0) * beta, rel: LogWeight::sum(terms) }
}

/// `ln` of `(b/2)^{m+1} / m!`.
fn log_row_factor(m: f64, b: f64) -> f64 {
    (m + 1.0) * (0.5 * b).ln() - crate::specfun::log_gamma_unchecked(m + 1.0)
}

/// Even row of pair `l`: responses to annuli `1..=2J` with the construction
/// signs (odd annuli carry `-t`), divided by the diagonal response. Also
/// returns the diagonal response in the row frame.
fn normalized_even_row(q: u64, b: f64, n: u32, pairs: usize, l: usize) -> (Vec<LogWeight>, FramedOverlap) {
    let m = construction_sector(n, l);
    let framed: Vec<FramedOverlap> = (1..=2 * pairs).map(|k| framed_overlap(q, m, b, n, k)).collect();
    let diag = framed[2 * l - 1];
    let beta_diag = exponents(n, 2 * l).1;
    let row = framed
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if i == 2 * l - 1 {
                return LogWeight::ONE;
            }
            if f.rel.is_zero() {
                return LogWeight::ZERO;
            }
            let shift = -(m + 1.0) * (exponents(n, i + 1).1 - beta_diag) - diag.rel.log_mag();
            let w = LogWeight::new(f.rel.sign(), f.rel.log_mag() + shift);
            if i % 2 == 0 {
                -w
            } else {
                w
            }
        })
        .collect();
    (row, diag)
}

/// Jacobi matrix of the rescaled map at `t = 0`, decomposed into its 2x2 block
/// diagonal and the remainder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub n: u32,
    pub pairs: usize,
    pub q: u64,
    pub b: f64,
    /// Full matrix, row-major; entries below `f64` range are 0 here.
    pub matrix: Vec<Vec<f64>>,
    /// `ln |entry|` (`-inf` for exact zeros).
    pub log_abs: Vec<Vec<f64>>,
    pub blocks: Vec<[[f64; 2]; 2]>,
    pub kappa: Vec<f64>,
    /// Max `|entry|` over off-block entries at block distance `d`.
    pub offdiag_max_by_distance: BTreeMap<usize, f64>,
    /// Max `ln |entry|` at block distance `d` for rows inside their column pair (`l < j`).
    pub inner_log_max: BTreeMap<usize, f64>,
    /// Max `ln |entry|` at block distance `d` for rows outside their column pair (`l > j`).
    pub outer_log_max: BTreeMap<usize, f64>,
    /// Infinity-norm of the off-block remainder.
    pub error_norm: f64,
    /// `ln C_j` of the even rows.
    pub log_c: Vec<f64>,
    /// Even rows are always first-order data.
    pub analytic_rows: Vec<bool>,
}

#[derive(Serialize)]
struct JacobianJson<'a> {
    #[serde(rename = "N")]
    n: u32,
    blocks: &'a [[[f64; 2]; 2]],
    kappa: &'a [f64],
    offdiag: BTreeMap<String, f64>,
    error_norm: f64,
}

impl JacobianReport {
    /// `{"N":..,"blocks":[..],"kappa":[..],"offdiag":{"1":..},"error_norm":..}`
    pub fn to_json(&self) -> String {
        let doc = JacobianJson {
            n: self.n,
            blocks: &self.blocks,
            kappa: &self.kappa,
            offdiag: self.offdiag_max_by_distance.iter().map(|(d, v)| (d.to_string(), *v)).collect(),
            error_norm: self.error_norm,
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    /// Smallest singular value over the 2x2 diagonal blocks.
    pub fn min_block_singular_value(&self) -> f64 {
        self.blocks
            .iter()
            .map(|blk| {
                let [[a, b], [c, d]] = *blk;
                let fro2 = a * a + b * b + c * c + d * d;
                let det = (a * d - b * c).abs();
                let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
                (0.5 * (fro2 - disc)).max(0.0).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `ln C_j`: the prefactor making `dE~_{2j}/dt_{2j}(0) = 1`.
fn log_c_constant(q: u64, m: f64, diag: FramedOverlap) -> f64 {
    // 2 pi q! m (m!)^2/(q+m)! (2/b)^{m+1} times the diagonal response; (q+m)! = m! (m+1)..(m+q)
    (2.0 * std::f64::consts::PI).ln() + log_factorial(q) + m.ln() - log_rising(m, q) + diag.offset + diag.rel.log_mag()
}

/// Jacobi matrix of the rescaled eigenvalue map at zero coupling.
pub fn jacobian_at_zero(n: u32, pairs: usize, q: u64, b: f64) -> Result<JacobianReport> {
    check_field(b)?;
    if n < 4 || pairs < 1 {
        return Err(Error::Precondition(format!("jacobian requires N >= 4 and at least one pair, got N = {n}, J = {pairs}")));
    }
    if !crate::radial_potential::ordering_check(n, pairs) {
        return Err(Error::Construction(format!("exponent ordering chain fails for N = {n}, J = {pairs}")));
    }
    let dim = 2 * pairs;
    let mut logs = vec![vec![LogWeight::ZERO; dim]; dim];
    let mut log_c = Vec::with_capacity(pairs);
    for l in 1..=pairs {
        // odd row 2l-1: t_{2l} + t_{2l-1}
        logs[2 * l - 2][2 * l - 2] = LogWeight::ONE;
        logs[2 * l - 2][2 * l - 1] = LogWeight::ONE;
        let m = construction_sector(n, l);
        let (row, diag) = normalized_even_row(q, b, n, pairs, l);
        if diag.rel.sign() <= 0 {
            return Err(Error::Structure(format!("even diagonal response of pair {l} is not positive")));
        }
        log_c.push(log_c_constant(q, m, diag));
        logs[2 * l - 1] = row;
    }
    let matrix: Vec<Vec<f64>> = logs.iter().map(|row| row.iter().map(LogWeight::value).collect()).collect();
    let log_abs: Vec<Vec<f64>> = logs.iter().map(|row| row.iter().map(LogWeight::log_mag).collect()).collect();
    let blocks: Vec<[[f64; 2]; 2]> = (0..pairs)
        .map(|p| {
            let (r, c) = (2 * p, 2 * p);
            [[matrix[r][c], matrix[r][c + 1]], [matrix[r + 1][c], matrix[r + 1][c + 1]]]
        })
        .collect();
    let kappa = blocks.iter().map(|blk| -blk[1][0]).collect();
    let mut offdiag = BTreeMap::new();
    let mut inner = BTreeMap::new();
    let mut outer = BTreeMap::new();
    let mut error_norm: f64 = 0.0;
    for (r, row) in matrix.iter().enumerate() {
        let row_pair = r / 2;
        let mut row_sum = 0.0;
        for (c, val) in row.iter().enumerate() {
            let col_pair = c / 2;
            if row_pair == col_pair {
                continue;
            }
            let d = row_pair.abs_diff(col_pair);
            row_sum += val.abs();
            let e = offdiag.entry(d).or_insert(0.0_f64);
            *e = e.max(val.abs());
            if r % 2 == 1 {
                let lg = log_abs[r][c];
                let target = if row_pair < col_pair { &mut inner } else { &mut outer };
                let e = target.entry(d).or_insert(f64::NEG_INFINITY);
                *e = f64::max(*e, lg);
            }
        }
        error_norm = error_norm.max(row_sum);
    }
    Ok(JacobianReport {
        n,
        pairs,
        q,
        b,
        matrix,
        log_abs,
        blocks,
        kappa,
        offdiag_max_by_distance: offdiag,
        inner_log_max: inner,
        outer_log_max: outer,
        error_norm,
        log_c,
        analytic_rows: (0..dim).map(|r| r % 2 == 1).collect(),
    })
}

/// Output of [`rescaled_map`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledMap {
    pub values: Vec<f64>,
    /// True for even rows evaluated by first-order linearization.
    pub linearized: Vec<bool>,
    pub log_c: Vec<f64>,
}

/// The map `t -> (t_{2j} + t_{2j-1}, E~_q(v_t; m_j))_j`.
///
/// Even components use the eigensolver when `m_j <= SOLVER_MAX_M` and the
/// diagonal response is resolvable; otherwise they are the first-order
/// linearization, flagged in the output.
pub fn rescaled_map(t: &CouplingVector, n: u32, pairs: usize, q: u64, b: f64) -> Result<RescaledMap> {
    let params = ConstructionParams { n, pairs, t: t.clone() };
    let jac = jacobian_at_zero(n, pairs, q, b)?;
    let potential = match build_vt(&params, b) {
        Ok(v) => Some(v),
        Err(Error::Construction(msg)) if msg.contains("double precision") => None,
        Err(e) => return Err(e),
    };
    let mut values = vec![0.0; 2 * pairs];
    let mut linearized = vec![false; 2 * pairs];
    let tol = crate::sector_solver::default_tol(b);
    for j in 1..=pairs {
        values[2 * j - 2] = t.0[2 * j - 1] + t.0[2 * j - 2];
        let m = construction_sector(n, j);
        let row = &jac.matrix[2 * j - 1];
        let linear = || row.iter().zip(&t.0).map(|(a, x)| a * x).sum::<f64>();
        let solvable = m <= SOLVER_MAX_M && potential.is_some();
        let diag = framed_overlap(q, m, b, n, 2 * j);
        let diag_log = log_row_factor(m, b) + diag.offset + diag.rel.log_mag();
        if solvable && diag_log > (1e-12_f64).ln() {
            let v = potential.as_ref().expect("checked");
            let ev = eigenvalue_near_level(b, q, m as i64, v, tol)?;
            values[2 * j - 1] = (ev.energy - landau_level(b, q)) / diag_log.exp();
        } else {
            values[2 * j - 1] = linear();
            linearized[2 * j - 1] = true;
        }
    }
    Ok(RescaledMap { values, linearized, log_c: jac.log_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_potential::{radii, Annulus};

    #[test]
    fn zero_potential_has_zero_slope() {
        assert_eq!(first_order(1, 2, 1.0, &StepPotential::zero()).unwrap(), 0.0);
    }

    #[test]
    fn ground_disk_slope() {
        let v = StepPotential::disk(1.0, 1.0).unwrap();
        let expected = 1.0 - (-0.5f64).exp();
        assert!((first_order(0, 0, 1.0, &v).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn row_frame_matches_direct_overlaps() {
        // N = 4: sector 15 and annuli 1, 2 are within reach of the general routine
        let (n, b, q) = (4, 1.3_f64, 1);
        let m = construction_sector(n, 1);
        for k in 1..=4 {
            let (lo, hi) = radii(n, k);
            let direct = overlap_log(q, m as u64, b, lo, hi).unwrap();
            let f = framed_overlap(q, m, b, n, k);
            let framed = f.rel.scale_log(log_row_factor(m, b) + f.offset);
            assert!((direct.log_mag() - framed.log_mag()).abs() < 1e-9, "{k}: {direct:?} {framed:?}");
        }
    }

    #[test]
    fn odd_rows_are_exact_pattern() {
        let jac = jacobian_at_zero(6, 3, 0, 1.0).unwrap();
        for l in 0..3 {
            for c in 0..6 {
                let expected = if c / 2 == l { 1.0 } else { 0.0 };
                assert_eq!(jac.matrix[2 * l][c], expected);
            }
            assert_eq!(jac.matrix[2 * l + 1][2 * l + 1], 1.0);
        }
    }

    #[test]
    fn json_schema_keys() {
        let jac = jacobian_at_zero(6, 2, 0, 1.0).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&jac.to_json()).unwrap();
        let keys: Vec<&str> = doc.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, vec!["N", "blocks", "error_norm", "kappa", "offdiag"]);
        assert!(doc["offdiag"]["1"].is_number());
    }

    #[test]
    fn fd_step_precondition() {
        let v = StepPotential::new(vec![Annulus::new(0.2, 0.8, 0.5).unwrap()]).unwrap();
        assert!(fd_derivative(0, 0, 1.0, &v, 1.0).is_err());
    }

    #[test]
    fn rescaled_map_vanishes_at_zero() {
        let out = rescaled_map(&CouplingVector::zeros(4), 4, 2, 0, 1.0).unwrap();
        assert!(out.values.iter().all(|v| *v == 0.0));
    }
}
