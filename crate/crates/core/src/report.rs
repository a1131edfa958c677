//! Shared output formatting.

/// Float with 17 significant digits, lossless under `str::parse::<f64>`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrips() {
        for x in [0.1, -1.0 / 3.0, 6.02e23, 0.0, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
