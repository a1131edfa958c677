//! High-precision sector eigenvalues for step potentials by exact matching.
//!
//! With `s = b rho^2 / 2` and `u = s^{|m|/2} e^{-s/2} w(s)`, the radial
//! equation on a piece of constant potential `v` is Kummer's equation
//! `s w'' + (c - s) w' - a w = 0` with `c = |m| + 1` and
//! `a = (v - E) / (2b)`. The regular solution is propagated outward from the
//! origin, the decaying solution inward from far outside the support, and the
//! two are matched at `max(support edge, |m| + 1)`. That point lies inside
//! the classically allowed region of every level, so neither propagation
//! runs against a dominant solution. Both propagations use
//! Taylor expansions of the ODE about regular points, so no truncation of the
//! radial domain or of a basis is involved.

use crate::error::{Error, Result};
use crate::radial_potential::StepPotential;

/// Constant segment of the potential in the `s` variable.
#[derive(Clone, Copy, Debug)]
struct Segment {
    s_lo: f64,
    s_hi: f64,
    value: f64,
}

/// Matching problem for one reduced sector (`m >= 0`).
#[derive(Clone, Debug)]
pub(crate) struct Matcher {
    c: f64,
    b: f64,
    segments: Vec<Segment>,
    s_match: f64,
}

impl Matcher {
    /// `m_abs` is `|m|`; energies passed to [`Matcher::mismatch`] are those of the
    /// `|m|` operator (without the `2 b m_-` shift).
    pub(crate) fn new(m_abs: u64, b: f64, v: &StepPotential) -> Option<Matcher> {
        let pieces = v.pieces();
        let s_support = 0.5 * b * v.support_radius().powi(2);
        if pieces.is_empty() || s_support == 0.0 {
            return None;
        }
        // below |m| + 1 the decaying solution grows against s^{-|m|} when carried inward
        let s_match = s_support.max(m_abs as f64 + 1.0);
        let to_s = |r: f64| 0.5 * b * r * r;
        let mut segments = Vec::new();
        let mut cursor = 0.0;
        for p in pieces {
            let lo = to_s(p.r_lo);
            if lo > cursor {
                segments.push(Segment { s_lo: cursor, s_hi: lo, value: 0.0 });
            }
            segments.push(Segment { s_lo: lo, s_hi: to_s(p.r_hi), value: p.value });
            cursor = to_s(p.r_hi);
        }
        segments.retain(|seg| seg.s_hi > seg.s_lo);
        Some(Matcher { c: m_abs as f64 + 1.0, b, segments, s_match })
    }

    fn kummer_a(&self, value: f64, energy: f64) -> f64 {
        (value - energy) / (2.0 * self.b)
    }

    /// Normalized Wronskian of the regular and decaying solutions at the match
    /// point; its zeros in `energy` are the sector eigenvalues.
    pub(crate) fn mismatch(&self, energy: f64) -> f64 {
        let (wi, dwi) = self.inner(energy);
        let (wo, dwo) = self.outer(energy);
        let sm = self.s_match;
        let cross = wi * (sm * dwo) - (sm * dwi) * wo;
        cross / ((wi.hypot(sm * dwi)) * (wo.hypot(sm * dwo)))
    }

    fn inner(&self, energy: f64) -> (f64, f64) {
        let first = self.segments[0];
        let a0 = self.kummer_a(first.value, energy);
        let s_start = first.s_hi.min(1.0);
        let (mut w, mut dw) = kummer_m(a0, self.c, s_start);
        let mut s = s_start;
        for seg in &self.segments {
            if seg.s_hi <= s {
                continue;
            }
            let a = self.kummer_a(seg.value, energy);
            (w, dw) = propagate(a, self.c, s, seg.s_hi, w, dw);
            s = seg.s_hi;
        }
        if s < self.s_match {
            (w, dw) = propagate(self.kummer_a(0.0, energy), self.c, s, self.s_match, w, dw);
        }
        (w, dw)
    }

    fn outer(&self, energy: f64) -> (f64, f64) {
        let a = self.kummer_a(0.0, energy);
        let start = self.s_match + 40.0 + a.abs();
        let (w, dw) = tricomi_u_asymptotic(a, self.c, start);
        propagate(a, self.c, start, self.s_match, w, dw)
    }
}

/// Confluent hypergeometric `M(a, c, s)` and its derivative, by the defining series.
fn kummer_m(a: f64, c: f64, s: f64) -> (f64, f64) {
    let mut term = 1.0;
    let mut w = 1.0;
    let mut dterm = a / c;
    let mut dw = dterm;
    let mut n = 0.0;
    while n < 2000.0 {
        term *= (a + n) * s / ((c + n) * (n + 1.0));
        dterm *= (a + 1.0 + n) * s / ((c + 1.0 + n) * (n + 1.0));
        w += term;
        dw += dterm;
        if term.abs() <= 1e-18 * w.abs() && dterm.abs() <= 1e-18 * dw.abs().max(1e-300) {
            break;
        }
        n += 1.0;
    }
    (w, dw)
}

/// Leading terms of the asymptotic expansion of `U(a, c, s)` with the common
/// factor `s^{-a}` removed. Only the direction of `(w, w')` matters.
fn tricomi_u_asymptotic(a: f64, c: f64, s: f64) -> (f64, f64) {
    let mut term = 1.0;
    let mut f = 1.0;
    let mut df = 0.0;
    for n in 0..30 {
        let nf = f64::from(n);
        let next = -term * (a + nf) * (a - c + 1.0 + nf) / ((nf + 1.0) * s);
        if next.abs() > term.abs() || next == 0.0 {
            break;
        }
        term = next;
        f += term;
        df += -(nf + 1.0) * term / s;
    }
    (f, -a * f / s + df)
}

/// Carry `(w, w')` of Kummer's equation from `s_from` to `s_to` (either direction).
fn propagate(a: f64, c: f64, s_from: f64, s_to: f64, mut w: f64, mut dw: f64) -> (f64, f64) {
    let mut s = s_from;
    let dir = if s_to >= s_from { 1.0 } else { -1.0 };
    while (s_to - s) * dir > 0.0 {
        let h_max = (0.5 * s)
            .min(2.0 * s / (1.0 + (c - s).abs()))
            .min((2.0 * s / (1.0 + a.abs())).sqrt())
            .min(4.0);
        let h = h_max.min((s_to - s).abs()) * dir;
        let (nw, ndw) = taylor_step(a, c, s, h, w, dw);
        s = if (s_to - (s + h)) * dir <= 0.0 { s_to } else { s + h };
        let scale = nw.hypot(ndw);
        w = nw / scale;
        dw = ndw / scale;
    }
    (w, dw)
}

/// One Taylor step of `s w'' + (c - s) w' - a w = 0` about the regular point `s0`.
fn taylor_step(a: f64, c: f64, s0: f64, h: f64, w0: f64, dw0: f64) -> (f64, f64) {
    // t_n = c_n h^n with c_{n+2} = ((n+a) c_n - (n+1)(n+c-s0) c_{n+1}) / (s0 (n+1)(n+2))
    let mut t0 = w0;
    let mut t1 = dw0 * h;
    let mut w = t0 + t1;
    let mut dwh = t1;
    let mut quiet = 0;
    for n in 0..4000 {
        let nf = f64::from(n);
        let t2 = ((nf + a) * t0 * h * h - (nf + 1.0) * (nf + c - s0) * t1 * h) / (s0 * (nf + 1.0) * (nf + 2.0));
        w += t2;
        dwh += (nf + 2.0) * t2;
        let size = w.abs().max(dwh.abs()).max(1e-300);
        if t2.abs() <= 1e-18 * size {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        t0 = t1;
        t1 = t2;
    }
    (w, dwh / h)
}

/// Root of `f` in `[lo, hi]` given a sign change, by Brent's method.
pub(crate) fn brent<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, mut f_lo: f64, mut f_hi: f64, xtol: f64) -> Result<(f64, f64)> {
    if f_lo == 0.0 {
        return Ok((lo, 0.0));
    }
    if f_hi == 0.0 {
        return Ok((hi, 0.0));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Convergence("root not bracketed".into()));
    }
    if f_lo.abs() < f_hi.abs() {
        std::mem::swap(&mut lo, &mut hi);
        std::mem::swap(&mut f_lo, &mut f_hi);
    }
    // lo: previous best (larger residual), hi: current best
    let (mut a, mut fa, mut b, mut fb) = (lo, f_lo, hi, f_hi);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let mid = 0.5 * (c - b);
        if fb == 0.0 {
            return Ok((b, 0.0));
        }
        if mid.abs() <= tol {
            return Ok((b, (c - b).abs()));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * mid * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * mid * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * mid * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = mid;
                e = d;
            }
        } else {
            d = mid;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(mid) };
        fb = f(b);
    }
    Err(Error::Convergence("Brent iteration limit reached".into()))
}

/// Refine an approximate eigenvalue `guess` of the `|m|` operator (unshifted).
///
/// Searches outward from `guess` for a sign change of the mismatch, never
/// leaving `(lo, hi)`. Returns the root and the final bracket width.
pub(crate) fn refine(matcher: &Matcher, guess: f64, initial_step: f64, lo: f64, hi: f64, xtol: f64) -> Result<(f64, f64)> {
    let f = |e: f64| matcher.mismatch(e);
    let f_mid = f(guess);
    if f_mid == 0.0 {
        return Ok((guess, 0.0));
    }
    let mut step = initial_step.max(1e-13 * (1.0 + guess.abs()));
    loop {
        let left = (guess - step).max(lo);
        let right = (guess + step).min(hi);
        let f_left = f(left);
        if f_left.signum() != f_mid.signum() {
            return brent(f, left, guess, f_left, f_mid, xtol);
        }
        let f_right = f(right);
        if f_right.signum() != f_mid.signum() {
            return brent(f, guess, right, f_mid, f_right, xtol);
        }
        if left <= lo && right >= hi {
            return Err(Error::Convergence(format!(
                "no eigenvalue of the matching problem found near {guess} in ({lo}, {hi})"
            )));
        }
        step *= 4.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_potential::Annulus;

    #[test]
    fn kummer_m_matches_laguerre_at_integer_level() {
        // M(-2, 1, s) = L_2(s) = 1 - 2s + s^2/2
        let (w, dw) = kummer_m(-2.0, 1.0, 0.7);
        assert!((w - (1.0 - 1.4 + 0.245)).abs() < 1e-15);
        assert!((dw - (-2.0 + 0.7)).abs() < 1e-15);
    }

    #[test]
    fn taylor_propagation_reproduces_polynomial_solution() {
        // L_3^{(2)} solves the equation with a = -3, c = 3.
        let lag = |s: f64| crate::specfun::laguerre(3, 2, s);
        let (w, dw) = kummer_m(-3.0, 3.0, 0.5);
        let (w2, dw2) = propagate(-3.0, 3.0, 0.5, 6.0, w, dw);
        let ratio = w2 / lag(6.0);
        let h = 1e-6;
        let d_exact = (lag(6.0 + h) - lag(6.0 - h)) / (2.0 * h);
        assert!((dw2 / ratio - d_exact).abs() < 1e-6 * d_exact.abs().max(1.0));
    }

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| x * x * x - 2.0;
        let (r, _) = brent(f, 0.0, 2.0, f(0.0), f(2.0), 0.0).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_inside_support_keeps_unperturbed_level() {
        // a vanishing piece leaves the Landau level 2b q as an exact root
        let v = StepPotential::new(vec![Annulus::new(0.3, 1.2, 0.0).unwrap()]).unwrap();
        let matcher = Matcher::new(2, 1.0, &v).unwrap();
        let (e, _) = refine(&matcher, 4.0 + 1e-6, 1e-5, 3.0, 5.0, 1e-17).unwrap();
        assert!((e - 4.0).abs() < 1e-13, "{e}");
    }
}

