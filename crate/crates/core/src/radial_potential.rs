//! Radially symmetric step potentials built from signed annular indicators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indicator of `r_inner <= rho <= r_outer` scaled by `height`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annulus {
    pub r_inner: f64,
    pub r_outer: f64,
    pub height: f64,
}

impl Annulus {
    pub fn new(r_inner: f64, r_outer: f64, height: f64) -> Result<Self> {
        let a = Annulus { r_inner, r_outer, height };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_inner.is_finite() && self.r_outer.is_finite() && self.height.is_finite()) {
            return Err(Error::Domain(format!("annulus fields must be finite: {self:?}")));
        }
        if self.r_inner < 0.0 || self.r_inner >= self.r_outer {
            return Err(Error::Domain(format!(
                "annulus requires 0 <= r_inner < r_outer, got [{}, {}]",
                self.r_inner, self.r_outer
            )));
        }
        Ok(())
    }

    pub fn contains(&self, rho: f64) -> bool {
        self.r_inner <= rho && rho <= self.r_outer
    }
}

/// Sum of annular indicators; overlapping annuli add.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepPotential {
    pub annuli: Vec<Annulus>,
}

/// Constant piece `[r_lo, r_hi]` of a flattened step potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub r_lo: f64,
    pub r_hi: f64,
    pub value: f64,
}

impl StepPotential {
    pub fn new(annuli: Vec<Annulus>) -> Result<Self> {
        let v = StepPotential { annuli };
        v.validate()?;
        Ok(v)
    }

    pub fn zero() -> Self {
        StepPotential::default()
    }

    /// `c` times the indicator of the disk of radius `r`.
    pub fn disk(c: f64, r: f64) -> Result<Self> {
        Self::new(vec![Annulus::new(0.0, r, c)?])
    }

    pub fn validate(&self) -> Result<()> {
        self.annuli.iter().try_for_each(Annulus::validate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: StepPotential = serde_json::from_str(text)?;
        v.validate()?;
        Ok(v)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("step potential serializes")
    }

    pub fn is_zero(&self) -> bool {
        self.pieces().iter().all(|p| p.value == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> StepPotential {
        StepPotential {
            annuli: self.annuli.iter().map(|a| Annulus { height: a.height * factor, ..*a }).collect(),
        }
    }

    pub fn evaluate(&self, rho: f64) -> f64 {
        self.annuli.iter().filter(|a| a.contains(rho)).map(|a| a.height).sum()
    }

    /// Sorted distinct annulus edges.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.annuli.iter().flat_map(|a| [a.r_inner, a.r_outer]).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Flatten into disjoint constant pieces between consecutive breakpoints.
    pub fn pieces(&self) -> Vec<Piece> {
        self.breakpoints()
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                Piece { r_lo: w[0], r_hi: w[1], value: self.evaluate(mid) }
            })
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.pieces().iter().map(|p| p.value.abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.pieces().iter().map(|p| p.value).fold(0.0, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.pieces().iter().map(|p| p.value).fold(0.0, f64::max)
    }

    pub fn is_sign_indefinite(&self) -> bool {
        self.min_value() < 0.0 && self.max_value() > 0.0
    }

    pub fn support_radius(&self) -> f64 {
        self.annuli.iter().map(|a| a.r_outer).fold(0.0, f64::max)
    }

    /// `|v|` as disjoint annuli.
    pub fn abs(&self) -> StepPotential {
        StepPotential {
            annuli: self
                .pieces()
                .into_iter()
                .filter(|p| p.value != 0.0)
                .map(|p| Annulus { r_inner: p.r_lo, r_outer: p.r_hi, height: p.value.abs() })
                .collect(),
        }
    }

    /// `int v dA` over `[r_lo, r_hi]` with area measure `2 pi rho d rho`.
    pub fn integrate_area(&self, r_lo: f64, r_hi: f64) -> f64 {
        self.pieces()
            .iter()
            .map(|p| {
                let lo = p.r_lo.max(r_lo);
                let hi = p.r_hi.min(r_hi);
                if hi > lo {
                    p.value * std::f64::consts::PI * (hi * hi - lo * lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Fails with a message citing the sup-norm bound if `sup|v| >= bound`.
    pub fn check_sup_norm_below(&self, bound: f64, what: &str) -> Result<()> {
        let norm = self.sup_norm();
        if norm < bound {
            Ok(())
        } else {
            Err(Error::Precondition(format!("sup-norm {norm} of the potential must be < {bound} ({what})")))
        }
    }
}

/// Amplitudes `t_1 .. t_{2J}` of the annular family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CouplingVector(pub Vec<f64>);

impl CouplingVector {
    pub fn zeros(len: usize) -> Self {
        CouplingVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| *t == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, t| m.max(t.abs()))
    }
}

/// Parameters of the two-scale annular construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionParams {
    pub n: u32,
    pub pairs: usize,
    pub t: CouplingVector,
}

impl ConstructionParams {
    pub fn validate(&self, b: f64) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Construction(format!("N must be >= 2, got {}", self.n)));
        }
        if self.pairs < 1 {
            return Err(Error::Construction("at least one annulus pair is required".into()));
        }
        if self.t.len() != 2 * self.pairs {
            return Err(Error::Construction(format!(
                "coupling vector has length {}, expected {}",
                self.t.len(),
                2 * self.pairs
            )));
        }
        if let Some((k, t)) = self.t.0.iter().enumerate().find(|(_, t)| !t.is_finite() || t.abs() >= 0.5 * b) {
            return Err(Error::Construction(format!("|t_{}| = {} violates |t_k| < b/2 = {}", k + 1, t.abs(), 0.5 * b)));
        }
        if let Some(k) = (1..=2 * self.pairs).find(|&k| {
            let (lo, hi) = radii(self.n, k);
            !(0.0 < lo && lo < hi && hi < 1.0)
        }) {
            return Err(Error::Construction(format!(
                "radii of annulus {k} are not distinct below 1 in double precision (N = {})",
                self.n
            )));
        }
        if !ordering_check(self.n, self.pairs) {
            return Err(Error::Construction(format!(
                "exponent ordering chain fails for N = {} with {} pairs",
                self.n, self.pairs
            )));
        }
        Ok(())
    }
}

/// Exponents `(alpha_k, beta_k)` of annulus `k >= 1`, as base-2 logs.
pub fn exponent_log2(n: u32, k: usize) -> (f64, f64) {
    let j = k.div_ceil(2) as f64;
    let n = f64::from(n);
    let half = n * (j - 0.5) * (j - 0.5);
    let full = n * j * j;
    if k % 2 == 1 {
        (1.0 - half, 1.0 - full)
    } else {
        (-half, -full)
    }
}

/// `(alpha_k, beta_k)`.
pub fn exponents(n: u32, k: usize) -> (f64, f64) {
    let (a, b) = exponent_log2(n, k);
    (a.exp2(), b.exp2())
}

/// Radii `(x_minus, x_plus) = (e^{-alpha/2}, e^{-beta/2})` of annulus `k >= 1`.
pub fn radii(n: u32, k: usize) -> (f64, f64) {
    let (alpha, beta) = exponents(n, k);
    ((-0.5 * alpha).exp(), (-0.5 * beta).exp())
}

/// Checks `N(j-1)^2 < N(j-1/2)^2 - 1 < N(j-1/2)^2 < N j^2 - 1 < N j^2` for
/// `1 <= j <= j_max` and that consecutive pairs have disjoint supports.
///
/// At `j = 1` the first link only bounds `alpha_1 <= 1` and is not strict.
pub fn ordering_check(n: u32, j_max: usize) -> bool {
    let nf = f64::from(n);
    (1..=j_max).all(|j| {
        let j = j as f64;
        let prev = nf * (j - 1.0) * (j - 1.0);
        let half = nf * (j - 0.5) * (j - 0.5);
        let full = nf * j * j;
        let first = if j == 1.0 { prev <= half - 1.0 } else { prev < half - 1.0 };
        let chain = first && half - 1.0 < half && half < full - 1.0 && full - 1.0 < full;
        // annulus 2j must end before annulus 2j+1 starts
        let next_half = nf * (j + 0.5) * (j + 0.5);
        chain && full < next_half - 1.0
    })
}

/// The annuli `1 .. 2 * pairs` of the construction with unit heights.
pub fn construction_annuli(n: u32, pairs: usize) -> Vec<(f64, f64)> {
    (1..=2 * pairs).map(|k| radii(n, k)).collect()
}

/// `v_t`: odd annuli carry `-t_{2j-1}`, even annuli `+t_{2j}`.
pub fn build_vt(params: &ConstructionParams, b: f64) -> Result<StepPotential> {
    params.validate(b)?;
    let annuli = construction_annuli(params.n, params.pairs)
        .into_iter()
        .zip(&params.t.0)
        .enumerate()
        .map(|(i, ((lo, hi), t))| {
            let height = if i % 2 == 0 { -t } else { *t };
            Annulus::new(lo, hi, height)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StepPotential { annuli })
}
