//! Reference computations that share no code with the library.
#![allow(dead_code)]

use landau_levels::StepPotential;
use statrs::function::gamma::ln_gamma;

/// `L_q^{(m)}(s) = sum_l (-1)^l binom(q+m, q-l) s^l / l!`, term by term with
/// integer binomials.
pub fn laguerre_direct(q: u64, m: u64, s: f64) -> f64 {
    laguerre_direct_with_magnitude(q, m, s).0
}

/// Direct sum together with the sum of absolute terms, which bounds its
/// cancellation error.
pub fn laguerre_direct_with_magnitude(q: u64, m: u64, s: f64) -> (f64, f64) {
    let binom = |n: u64, k: u64| (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as f64;
    let mut factorial = 1.0;
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for l in 0..=q {
        if l > 0 {
            factorial *= l as f64;
        }
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let term = binom(q + m, q - l) * s.powi(l as i32) / factorial;
        total += sign * term;
        magnitude += term;
    }
    (total, magnitude)
}

/// Density of the `phi_{q1,m} phi_{q2,m}` product in `s = b rho^2 / 2`, area measure.
pub fn cross_density(q1: u64, q2: u64, m: u64, s: f64) -> f64 {
    let log_norm = 0.5
        * (ln_gamma((q1 + 1) as f64) - ln_gamma((q1 + m + 1) as f64) + ln_gamma((q2 + 1) as f64)
            - ln_gamma((q2 + m + 1) as f64));
    if s == 0.0 {
        return if m == 0 { log_norm.exp() * laguerre_direct(q1, 0, 0.0) * laguerre_direct(q2, 0, 0.0) } else { 0.0 };
    }
    (log_norm + m as f64 * s.ln() - s).exp() * laguerre_direct(q1, m, s) * laguerre_direct(q2, m, s)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let floor = 4.0 * f64::EPSILON * (left + right).abs();
    if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    // split up front so narrow peaks are seen
    let pieces = 64;
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = lo + width;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = width / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(&f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 30)
        })
        .sum()
}

/// `2 pi int phi_{q1,m} phi_{q2,m} rho d rho` over `[r_lo, r_hi]` by quadrature.
pub fn cross_overlap_quadrature(q1: u64, q2: u64, m: u64, b: f64, r_lo: f64, r_hi: f64) -> f64 {
    let s_lo = 0.5 * b * r_lo * r_lo;
    let s_cap = (4 * (q1 + q2) + 2 * m + 200) as f64;
    let s_hi = if r_hi.is_finite() { (0.5 * b * r_hi * r_hi).min(s_cap) } else { s_cap };
    adaptive_simpson(|s| cross_density(q1, q2, m, s), s_lo, s_hi, 1e-15)
}

/// Sector eigenvalue by a conservative finite-volume discretization of
/// `-(1/rho)(rho u')' + (m/rho - b rho/2)^2 u - b u + v u` on `[0, R]`,
/// Dirichlet at `R`, cell faces on every breakpoint of `v`.
pub struct RadialGrid {
    faces: Vec<f64>,
}

impl RadialGrid {
    /// Segments between breakpoints get `ceil(len / h) * refine` equal cells.
    pub fn new(breakpoints: &[f64], r_max: f64, h: f64, refine: usize) -> Self {
        let mut knots: Vec<f64> = breakpoints.iter().copied().filter(|&r| r > 0.0 && r < r_max).collect();
        knots.push(0.0);
        knots.push(r_max);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut faces = vec![0.0];
        for w in knots.windows(2) {
            let cells = ((w[1] - w[0]) / h).ceil().max(1.0) as usize * refine;
            for i in 1..=cells {
                faces.push(w[0] + (w[1] - w[0]) * i as f64 / cells as f64);
            }
        }
        RadialGrid { faces }
    }

    /// Symmetric tridiagonal `(diag, offdiag)`.
    pub fn operator(&self, b: f64, m: i64, v: &StepPotential) -> (Vec<f64>, Vec<f64>) {
        let n = self.faces.len() - 1;
        let centers: Vec<f64> = (0..n).map(|i| 0.5 * (self.faces[i] + self.faces[i + 1])).collect();
        let mass: Vec<f64> = (0..n).map(|i| 0.5 * (self.faces[i + 1].powi(2) - self.faces[i].powi(2))).collect();
        let kappa: Vec<f64> = (0..n)
            .map(|i| {
                let f = self.faces[i + 1];
                if i + 1 < n {
                    f / (centers[i + 1] - centers[i])
                } else {
                    f / (f - centers[i])
                }
            })
            .collect();
        let mf = m as f64;
        let diag = (0..n)
            .map(|i| {
                let rho = centers[i];
                let left = if i == 0 { 0.0 } else { kappa[i - 1] };
                let well = (mf / rho - 0.5 * b * rho).powi(2) - b;
                // faces sit on breakpoints, so v is constant on the cell
                (left + kappa[i]) / mass[i] + well + v.evaluate(rho)
            })
            .collect();
        let off = (0..n - 1).map(|i| -kappa[i] / (mass[i] * mass[i + 1]).sqrt()).collect();
        (diag, off)
    }
}

/// Number of eigenvalues below `x` (Sturm sequence).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = diag[0] - x;
    if d < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if d == 0.0 { 1e-300 } else { d };
        d = diag[i] - x - off[i - 1] * off[i - 1] / prev;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th eigenvalue (0-based) by bisection on `[lo, hi]`.
pub fn bisect_eigenvalue(diag: &[f64], off: &[f64], k: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Richardson-extrapolated finite-volume eigenvalue of sector `m` near `2bq`.
pub fn fd_sector_eigenvalue(b: f64, q: u64, m: i64, v: &StepPotential) -> f64 {
    let m_minus = (-m).max(0) as u64;
    let k = (q - m_minus) as usize;
    let s_needed = 2.0 * (2.0 * q as f64 + m.unsigned_abs() as f64 + 1.0) + 60.0;
    let r_max = (2.0 * s_needed / b).sqrt().max(v.support_radius() + 1.0);
    let breaks = v.breakpoints();
    let level = 2.0 * b * q as f64;
    let h = r_max / 3000.0;
    let solve = |refine: usize| {
        let grid = RadialGrid::new(&breaks, r_max, h, refine);
        let (d, o) = grid.operator(b, m, v);
        bisect_eigenvalue(&d, &o, k, level - 1.5 * b, level + 1.5 * b)
    };
    let coarse = solve(1);
    let fine = solve(2);
    (4.0 * fine - coarse) / 3.0
}
