//! Choosing annulus couplings so that selected sectors keep an eigenvalue
//! exactly on the Landau level, and certifying the result.
//!
//! Layout: pair `j` owns annuli `2j-1` (height `-fixed_odd_j`, held fixed) and
//! `2j` (height `+t_{2j}`, solved for) and pins sector `m_j`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landau_basis::{check_field, landau_level, overlap, SectorIndex};
use crate::radial_potential::{radii, Annulus, CouplingVector, StepPotential};
use crate::sector_solver::{default_tol, eigenvalue_near_level, level_sensitivities, sector_row, SectorRow};

pub const MAX_NEWTON_ITERATIONS: usize = 50;
const MAX_HALVINGS: usize = 30;
/// Smallest paired first-order response, relative to `b`, the solver accepts.
pub const RESOLVABLE_RESPONSE: f64 = 1e-12;

/// Radial extent of one annulus, without a height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusGeometry {
    pub r_inner: f64,
    pub r_outer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinningProblem {
    pub b: f64,
    pub q: u64,
    pub sectors: Vec<i64>,
    /// Explicit geometry for annuli `1..=2J`; exclusive with `construction_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annuli: Option<Vec<AnnulusGeometry>>,
    /// Take annuli `1..=2J` from the construction radii with this `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction_n: Option<u32>,
    pub fixed_odd: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_even: Option<Vec<f64>>,
    pub tol: f64,
}

impl PinningProblem {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: PinningProblem = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn pairs(&self) -> usize {
        self.sectors.len()
    }

    /// Geometry of annuli `1..=2J`.
    pub fn geometry(&self) -> Result<Vec<(f64, f64)>> {
        match (&self.annuli, self.construction_n) {
            (Some(list), None) => Ok(list.iter().map(|a| (a.r_inner, a.r_outer)).collect()),
            (None, Some(n)) => Ok((1..=2 * self.pairs()).map(|k| radii(n, k)).collect()),
            _ => Err(Error::Domain("exactly one of `annuli` and `construction_n` must be given".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_field(self.b)?;
        let pairs = self.pairs();
        if pairs == 0 {
            return Err(Error::Domain("at least one sector is required".into()));
        }
        if !self.sectors.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain(format!("sectors must be strictly increasing: {:?}", self.sectors)));
        }
        if let Some(&m) = self.sectors.iter().find(|&&m| SectorIndex(m).radial_index(self.q).is_none()) {
            return Err(Error::Domain(format!("sector m = {m} carries no level q = {}", self.q)));
        }
        let geometry = self.geometry()?;
        if geometry.len() != 2 * pairs {
            return Err(Error::Domain(format!("{pairs} sectors need {} annuli, got {}", 2 * pairs, geometry.len())));
        }
        for &(lo, hi) in &geometry {
            Annulus::new(lo, hi, 0.0)?;
        }
        if self.fixed_odd.len() != pairs {
            return Err(Error::Domain(format!("fixed_odd needs {pairs} entries, got {}", self.fixed_odd.len())));
        }
        if let Some(t) = self.fixed_odd.iter().find(|t| !t.is_finite() || t.abs() >= 0.5 * self.b) {
            return Err(Error::Domain(format!("|fixed_odd| = {t} must be below b/2 = {}", 0.5 * self.b)));
        }
        if let Some(init) = &self.initial_even {
            if init.len() != pairs || init.iter().any(|t| !t.is_finite()) {
                return Err(Error::Domain(format!("initial_even needs {pairs} finite entries")));
            }
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    /// `v_t` for a full coupling vector `[t_1, t_2, ..]`; only the even entries vary.
    pub fn potential_of(&self, t: &CouplingVector) -> Result<StepPotential> {
        let geometry = self.geometry()?;
        if t.len() != geometry.len() {
            return Err(Error::Domain(format!("coupling vector has {} entries for {} annuli", t.len(), geometry.len())));
        }
        let even: Vec<f64> = t.0.iter().skip(1).step_by(2).copied().collect();
        self.potential(&geometry, &even)
    }

    fn potential(&self, geometry: &[(f64, f64)], even: &[f64]) -> Result<StepPotential> {
        let annuli = geometry
            .iter()
            .enumerate()
            .map(|(k, &(lo, hi))| {
                let height = if k % 2 == 0 { -self.fixed_odd[k / 2] } else { even[k / 2] };
                Annulus::new(lo, hi, height)
            })
            .collect::<Result<Vec<_>>>()?;
        StepPotential::new(annuli)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinningCertificate {
    pub b: f64,
    pub q: u64,
    pub tol: f64,
    /// Heights of the annuli in order, odd ones negated (`v = sum (-1)^k t_k chi_k`).
    pub t_solution: CouplingVector,
    pub pinned_sectors: Vec<i64>,
    /// `|E_q - 2bq|` per pinned sector.
    pub residuals: Vec<f64>,
    pub sup_norm: f64,
    pub sign_indefinite: bool,
    /// Sectors classified as sitting on the level over the pinned set and the scan.
    pub pinned_count: usize,
    pub unpinned_scan: Vec<SectorRow>,
    /// Newton iterations; 0 when the certificate was recomputed from a potential.
    #[serde(default)]
    pub iterations: usize,
}

impl PinningCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn residuals(b: f64, q: u64, sectors: &[i64], v: &StepPotential) -> Result<Vec<f64>> {
    let tol = default_tol(b);
    let level = landau_level(b, q);
    sectors
        .par_iter()
        .map(|&m| Ok(eigenvalue_near_level(b, q, m, v, tol)?.energy - level))
        .collect()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `dF_j / dt_{2k}`: Hellmann–Feynman at the current potential.
fn newton_jacobian(p: &PinningProblem, geometry: &[(f64, f64)], v: &StepPotential) -> Result<DMatrix<f64>> {
    let even: Vec<(f64, f64)> = geometry.iter().skip(1).step_by(2).copied().collect();
    let rows = p
        .sectors
        .par_iter()
        .map(|&m| level_sensitivities(p.b, p.q, m, v, &even))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn solve_step(jac: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let sv = jac.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if !(hi > 0.0 && lo > 1e-13 * hi) {
        return Err(Error::Structure(format!("pinning Jacobian is singular (singular values {lo:e} .. {hi:e})")));
    }
    jac.clone().lu().solve(rhs).ok_or_else(|| Error::Structure("pinning Jacobian is singular".into()))
}

/// Damped Newton on `F_j(t) = E_q(v_t; m_j) - 2bq` over the even couplings.
pub fn solve_pinning(p: &PinningProblem) -> Result<(CouplingVector, PinningCertificate)> {
    p.validate()?;
    let geometry = p.geometry()?;
    let pairs = p.pairs();
    let mut even = p.initial_even.clone().unwrap_or_else(|| vec![0.0; pairs]);
    if p.fixed_odd.iter().all(|t| *t == 0.0) && even.iter().all(|t| *t == 0.0) {
        return Err(Error::Precondition(
            "zero odd couplings with zero start pin every sector trivially with v = 0".into(),
        ));
    }
    for (j, &m) in p.sectors.iter().enumerate() {
        let (lo, hi) = geometry[2 * j + 1];
        let radial = SectorIndex(m).radial_index(p.q).expect("validated");
        let response = overlap(radial, SectorIndex(m).abs_m(), p.b, lo, hi)?;
        if response < RESOLVABLE_RESPONSE * p.b {
            return Err(Error::Precondition(format!(
                "sector m = {m} responds to its even annulus with {response:e} < {RESOLVABLE_RESPONSE:e} b"
            )));
        }
    }

    let mut v = p.potential(&geometry, &even)?;
    v.check_sup_norm_below(p.b, "pinning potential")?;
    let mut f = residuals(p.b, p.q, &p.sectors, &v)?;
    let mut iterations = 0;
    while max_abs(&f) > p.tol {
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(Error::Convergence(format!(
                "pinning Newton stalled at max residual {:e} after {MAX_NEWTON_ITERATIONS} iterations",
                max_abs(&f)
            )));
        }
        iterations += 1;
        let jac = newton_jacobian(p, &geometry, &v)?;
        let step = solve_step(&jac, &-DVector::from_column_slice(&f))?;
        let mut lambda = 1.0;
        let mut wall = false;
        let accepted = loop {
            let trial: Vec<f64> = even.iter().zip(step.iter()).map(|(t, d)| t + lambda * d).collect();
            let trial_v = p.potential(&geometry, &trial)?;
            if trial_v.sup_norm() < p.b {
                let trial_f = residuals(p.b, p.q, &p.sectors, &trial_v)?;
                if max_abs(&trial_f) < max_abs(&f) {
                    break Some((trial, trial_v, trial_f));
                }
                wall = false;
            } else {
                wall = true;
            }
            lambda *= 0.5;
            if lambda < 0.5f64.powi(MAX_HALVINGS as i32) {
                break None;
            }
        };
        match accepted {
            Some((t, tv, tf)) => {
                even = t;
                v = tv;
                f = tf;
            }
            None if wall => {
                return Err(Error::Infeasible(format!("Newton step blocked by the wall sup|v| < b = {}", p.b)));
            }
            None => {
                return Err(Error::Convergence(format!("no damped step reduces the residual {:e}", max_abs(&f))));
            }
        }
    }

    let mut t = Vec::with_capacity(2 * pairs);
    for (&odd, &e) in p.fixed_odd.iter().zip(&even) {
        t.push(odd);
        t.push(e);
    }
    let t = CouplingVector(t);
    if t.is_zero() {
        return Err(Error::Infeasible("Newton converged to the trivial coupling t = 0".into()));
    }
    let scan = p.sectors.first().copied().unwrap_or(0)..=p.sectors.last().copied().unwrap_or(0);
    let mut cert = certify(&v, p.b, p.q, &p.sectors, scan, p.tol)?;
    cert.iterations = iterations;
    Ok((t, cert))
}

/// Recomputes every certificate field from the potential alone.
///
/// `unpinned_scan` lists admissible sectors of `scan_range` outside
/// `pinned_sectors`; `pinned_count` counts sectors classified pinned over the
/// union of both sets.
pub fn certify(
    v: &StepPotential,
    b: f64,
    q: u64,
    pinned_sectors: &[i64],
    scan_range: std::ops::RangeInclusive<i64>,
    tol: f64,
) -> Result<PinningCertificate> {
    check_field(b)?;
    v.validate()?;
    let pinned: BTreeSet<i64> = pinned_sectors.iter().copied().collect();
    let scanned: BTreeSet<i64> = scan_range.filter(|&m| SectorIndex(m).radial_index(q).is_some()).collect();
    let all: Vec<i64> = pinned.union(&scanned).copied().collect();
    let rows = all
        .par_iter()
        .map(|&m| sector_row(b, q, m, v, tol))
        .collect::<Result<Vec<_>>>()?;
    let residuals = pinned_sectors
        .iter()
        .map(|m| rows.iter().find(|r| r.m == *m).expect("pinned sector evaluated").displacement.abs())
        .collect();
    let t_solution = CouplingVector(
        v.annuli
            .iter()
            .enumerate()
            .map(|(k, a)| if k % 2 == 0 { -a.height } else { a.height })
            .collect(),
    );
    Ok(PinningCertificate {
        b,
        q,
        tol,
        t_solution,
        pinned_sectors: pinned_sectors.to_vec(),
        residuals,
        sup_norm: v.sup_norm(),
        sign_indefinite: v.is_sign_indefinite(),
        pinned_count: rows.iter().filter(|r| r.pinned).count(),
        unpinned_scan: rows.into_iter().filter(|r| !pinned.contains(&r.m)).collect(),
        iterations: 0,
    })
}
