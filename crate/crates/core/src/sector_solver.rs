//! Spectral Galerkin solver for one angular-momentum sector `H_0^{(m)} + v`.
//!
//! The basis is the unperturbed radial eigenbasis, so the free part is
//! diagonal and the potential enters through closed-form annulus blocks.
//! Step potentials make the Galerkin eigenvalues converge only like
//! `Q^{-3/2}`, so the Galerkin value locates and isolates the branch and a
//! matching solve on the exact piecewise solutions pins it to full precision.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landau_basis::{annulus_block, check_field, landau_level, overlap_log, SectorIndex};
use crate::radial_potential::StepPotential;
use crate::shooting::{refine, Matcher};
use crate::specfun::LogWeight;

/// Largest Galerkin basis tried before giving up.
pub const MAX_BASIS: usize = 1024;

/// Successive Galerkin values closer than this (in units of `b`) end the
/// basis doubling and hand over to the matching solve.
pub const GALERKIN_BRACKET_TOL: f64 = 1e-4;

/// A sector is resolved at tolerance `tol` when its first-order scale exceeds
/// `RESOLVE_FACTOR * tol`.
pub const RESOLVE_FACTOR: f64 = 100.0;

/// Default tolerance `1e-10 b`.
pub fn default_tol(b: f64) -> f64 {
    1e-10 * b
}

/// One sector block and its Galerkin truncation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorModel {
    pub b: f64,
    pub m: i64,
    pub q_target: u64,
    pub size: usize,
}

impl SectorModel {
    /// Smallest admissible model around `q_target`.
    pub fn minimal(b: f64, m: i64, q_target: u64) -> Result<Self> {
        let sector = SectorIndex(m);
        let radial = sector.radial_index(q_target).ok_or_else(|| not_admissible(m, q_target))?;
        let model = SectorModel { b, m, q_target, size: radial as usize + 8 };
        model.validate()?;
        Ok(model)
    }

    pub fn sector(&self) -> SectorIndex {
        SectorIndex(self.m)
    }

    pub fn validate(&self) -> Result<()> {
        check_field(self.b)?;
        let radial = self.sector().radial_index(self.q_target).ok_or_else(|| not_admissible(self.m, self.q_target))?;
        if self.size < radial as usize + 8 {
            return Err(Error::Precondition(format!(
                "basis size {} must be at least q - m_- + 8 = {}",
                self.size,
                radial + 8
            )));
        }
        Ok(())
    }
}

fn not_admissible(m: i64, q: u64) -> Error {
    Error::Precondition(format!("Landau index q = {q} is below m_- = {} for sector m = {m}", SectorIndex(m).m_minus()))
}

/// Galerkin matrix of `H_0^{(m)} + v` on radial levels `m_-, .., m_- + size - 1`.
pub fn assemble(model: &SectorModel, v: &StepPotential) -> Result<DMatrix<f64>> {
    model.validate()?;
    v.validate()?;
    v.check_sup_norm_below(2.0 * model.b, "bounded-perturbation condition ||V||_inf < 2b")?;
    let sector = model.sector();
    let shift = sector.m_minus();
    let mut h = DMatrix::from_diagonal(&DVector::from_iterator(
        model.size,
        (0..model.size as u64).map(|i| landau_level(model.b, i + shift)),
    ));
    for a in &v.annuli {
        if a.height == 0.0 {
            continue;
        }
        let block = annulus_block(model.size, sector.abs_m(), model.b, a.r_inner, a.r_outer)?;
        h += block * a.height;
    }
    Ok(h)
}

/// Symmetric eigendecomposition with eigenvalues ascending; eigenvectors are columns.
pub fn eigen_sym(h: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !h.is_square() {
        return Err(Error::Domain(format!("matrix is {}x{}, not square", h.nrows(), h.ncols())));
    }
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let asym = (h - h.transpose()).amax();
    if asym > 1e-14 * scale {
        return Err(Error::Domain(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    // a diagonal matrix is its own decomposition; skipping rotations keeps it exact
    let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || h[(i, j)] == 0.0));
    let eig = if is_diagonal {
        SymmetricEigen { eigenvalues: h.diagonal(), eigenvectors: DMatrix::identity(n, n) }
    } else {
        SymmetricEigen::new(h.clone())
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// The tracked eigenvalue near one Landau level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorEigenvalue {
    pub m: i64,
    pub energy: f64,
    pub level_window: (f64, f64),
    /// Width of the final root bracket (0 when the value is exact).
    pub residual: f64,
    pub q_used: usize,
    pub galerkin_energy: f64,
}

impl SectorEigenvalue {
    pub fn displacement(&self, b: f64, q: u64) -> f64 {
        self.energy - landau_level(b, q)
    }
}

struct GalerkinBranch {
    energy: f64,
    size: usize,
    last_change: f64,
    vector: DVector<f64>,
}

fn window_eigenvalue(model: &SectorModel, v: &StepPotential, lo: f64, hi: f64) -> Result<(f64, DVector<f64>)> {
    let h = assemble(model, v)?;
    let (values, vectors) = eigen_sym(&h)?;
    let inside: Vec<usize> = (0..values.len()).filter(|&i| values[i] > lo && values[i] < hi).collect();
    if inside.len() != 1 {
        return Err(Error::Multiplicity { m: model.m, found: inside.len(), lo, hi });
    }
    let i = inside[0];
    Ok((values[i], vectors.column(i).into_owned()))
}

fn galerkin_branch(b: f64, q: u64, m: i64, v: &StepPotential) -> Result<GalerkinBranch> {
    let level = landau_level(b, q);
    let (lo, hi) = (level - b, level + b);
    let radial = SectorIndex(m).radial_index(q).ok_or_else(|| not_admissible(m, q))? as usize;
    let mut size = radial + 16;
    let mut prev: Option<f64> = None;
    loop {
        let model = SectorModel { b, m, q_target: q, size };
        let (energy, vector) = window_eigenvalue(&model, v, lo, hi)?;
        if let Some(p) = prev {
            let change = (energy - p).abs();
            if change < GALERKIN_BRACKET_TOL * b {
                return Ok(GalerkinBranch { energy, size, last_change: change, vector });
            }
        }
        if size >= MAX_BASIS {
            return Err(Error::Convergence(format!(
                "Galerkin basis reached {MAX_BASIS} levels without stabilizing for sector m = {m}"
            )));
        }
        prev = Some(energy);
        size = (size * 2).min(MAX_BASIS);
    }
}

/// The unique eigenvalue of `H_0^{(m)} + v` in `(2bq - b, 2bq + b)`.
///
/// `tol` bounds the returned bracket width; the matching solve normally
/// resolves the root to a few ulps, well inside any sensible `tol`.
pub fn eigenvalue_near_level(b: f64, q: u64, m: i64, v: &StepPotential, tol: f64) -> Result<SectorEigenvalue> {
    check_field(b)?;
    v.validate()?;
    v.check_sup_norm_below(b, "simple-eigenvalue window requires ||v||_inf < b")?;
    let sector = SectorIndex(m);
    let radial = sector.radial_index(q).ok_or_else(|| not_admissible(m, q))?;
    let level = landau_level(b, q);
    let window = (level - b, level + b);
    if v.is_zero() {
        return Ok(SectorEigenvalue {
            m,
            energy: level,
            level_window: window,
            residual: 0.0,
            q_used: radial as usize + 16,
            galerkin_energy: level,
        });
    }
    let branch = galerkin_branch(b, q, m, v)?;
    let shift = landau_level(b, sector.m_minus());
    let matcher = Matcher::new(sector.abs_m(), b, v).expect("nonzero potential has support");
    let xtol = 0.25 * f64::EPSILON * b;
    let (reduced, width) = refine(
        &matcher,
        branch.energy - shift,
        4.0 * branch.last_change + 1e-12 * b,
        window.0 - shift,
        window.1 - shift,
        xtol,
    )?;
    let energy = reduced + shift;
    if width > tol {
        return Err(Error::Convergence(format!("root bracket {width:e} exceeds tolerance {tol:e} for sector m = {m}")));
    }
    let norm = v.sup_norm();
    if (energy - level).abs() > norm * (1.0 + 1e-12) + 4.0 * f64::EPSILON * level.abs() {
        return Err(Error::Convergence(format!(
            "sector m = {m}: eigenvalue {energy} violates the perturbation bound |E - 2bq| <= {norm}"
        )));
    }
    Ok(SectorEigenvalue {
        m,
        energy,
        level_window: window,
        residual: width,
        q_used: branch.size,
        galerkin_energy: branch.energy,
    })
}

/// Derivatives of the tracked eigenvalue with respect to the heights of the
/// given annuli (Hellmann–Feynman on the converged Galerkin eigenvector).
pub fn level_sensitivities(b: f64, q: u64, m: i64, v: &StepPotential, annuli: &[(f64, f64)]) -> Result<Vec<f64>> {
    check_field(b)?;
    let sector = SectorIndex(m);
    let radial = sector.radial_index(q).ok_or_else(|| not_admissible(m, q))?;
    let (size, vector) = if v.is_zero() {
        let size = radial as usize + 16;
        let mut e = DVector::zeros(size);
        e[radial as usize] = 1.0;
        (size, e)
    } else {
        let branch = galerkin_branch(b, q, m, v)?;
        (branch.size, branch.vector)
    };
    annuli
        .iter()
        .map(|&(lo, hi)| {
            let block = annulus_block(size, sector.abs_m(), b, lo, hi)?;
            Ok((&block * &vector).dot(&vector))
        })
        .collect()
}

/// `sum |height| * overlap` for the tracked level: the size of the
/// first-order response, in log form so that it never underflows.
pub fn first_order_scale(b: f64, q: u64, m: i64, v: &StepPotential) -> Result<LogWeight> {
    let sector = SectorIndex(m);
    let radial = sector.radial_index(q).ok_or_else(|| not_admissible(m, q))?;
    let terms = v
        .pieces()
        .into_iter()
        .filter(|p| p.value != 0.0)
        .map(|p| Ok(overlap_log(radial, sector.abs_m(), b, p.r_lo, p.r_hi)? * LogWeight::from_value(p.value.abs())))
        .collect::<Result<Vec<_>>>()?;
    Ok(LogWeight::sum(terms))
}

/// One row of a per-sector table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub m: i64,
    pub energy: f64,
    pub displacement: f64,
    pub q_used: usize,
    pub residual: f64,
    /// `ln` of the first-order scale; `-inf` when the potential misses the sector.
    pub log_scale: f64,
    pub resolved: bool,
    pub pinned: bool,
}

/// Counts of sectors sitting on the level, with the per-sector table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub count: usize,
    pub rows: Vec<SectorRow>,
}

impl MultiplicityReport {
    /// CSV with columns `m,E,displacement,Q_used,residual`.
    pub fn to_csv(&self) -> String {
        sector_rows_csv(&self.rows)
    }
}

pub fn sector_rows_csv(rows: &[SectorRow]) -> String {
    let mut out = String::from("m,E,displacement,Q_used,residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.m,
            crate::report::fmt_f64(r.energy),
            crate::report::fmt_f64(r.displacement),
            r.q_used,
            crate::report::fmt_f64(r.residual)
        ));
    }
    out
}

/// Evaluate one admissible sector and classify it against `tol`.
pub fn sector_row(b: f64, q: u64, m: i64, v: &StepPotential, tol: f64) -> Result<SectorRow> {
    let ev = eigenvalue_near_level(b, q, m, v, tol)?;
    let scale = first_order_scale(b, q, m, v)?;
    let resolved = scale.is_zero() || scale.log_mag() >= (RESOLVE_FACTOR * tol).ln();
    let displacement = ev.displacement(b, q);
    Ok(SectorRow {
        m,
        energy: ev.energy,
        displacement,
        q_used: ev.q_used,
        residual: ev.residual,
        log_scale: scale.log_mag(),
        resolved,
        pinned: resolved && displacement.abs() <= tol,
    })
}

/// Number of sectors in `m_range` whose eigenvalue sits within `tol` of `2bq`.
///
/// Sectors with `q < m_-` carry no level `2bq` and are skipped. Sectors whose
/// first-order scale is nonzero but below `RESOLVE_FACTOR * tol` are listed as
/// unresolved and never counted.
pub fn multiplicity_count(
    b: f64,
    q: u64,
    v: &StepPotential,
    m_range: std::ops::RangeInclusive<i64>,
    tol: f64,
) -> Result<MultiplicityReport> {
    let sectors: Vec<i64> = m_range.filter(|&m| SectorIndex(m).radial_index(q).is_some()).collect();
    let rows = sectors
        .par_iter()
        .map(|&m| sector_row(b, q, m, v, tol))
        .collect::<Result<Vec<_>>>()?;
    let count = rows.iter().filter(|r| r.pinned).count();
    Ok(MultiplicityReport { count, rows })
}
