//! Gauss–Legendre rules for the Galerkin matrix elements.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

pub(crate) const PANEL_ORDER: usize = 32;

pub(crate) fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Composite rule on `[lo, hi]` split into `panels` equal pieces.
pub(crate) fn composite_nodes(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = panel_rule();
    let width = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let mid = a + 0.5 * width;
        for (xi, wi) in x.iter().zip(w) {
            out.push((mid + 0.5 * width * xi, 0.5 * width * wi));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // int_{-1}^{1} x^22 dx = 2/23
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((v - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn odd_rule_has_center_node() {
        let (x, _) = gauss_legendre(7);
        assert!(x[3].abs() < 1e-15);
    }
}
