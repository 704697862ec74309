//! Standard Normal quantile and density used to normalize tail risk measures.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::standard()
}

/// `Φ⁻¹(p)` for `0 < p < 1`.
pub fn quantile(p: f64) -> f64 {
    standard().inverse_cdf(p)
}

/// `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    standard().cdf(x)
}

/// `φ(x)`.
pub fn pdf(x: f64) -> f64 {
    standard().pdf(x)
}

/// Divisor that turns an empirical `(1-p)` loss quantile into a stdev-equivalent.
pub fn var_scale(p: f64) -> f64 {
    quantile(1.0 - p)
}

/// Divisor that turns an empirical tail-mean loss into a stdev-equivalent.
pub fn esf_scale(p: f64) -> f64 {
    pdf(quantile(p)) / p
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from published tables (20 significant digits).
    const TABLE: &[(f64, f64)] = &[
        (0.99, 2.326_347_874_040_840_8),
        (0.975, 1.959_963_984_540_054),
        (0.5, 0.0),
        (1e-6, -4.753_424_308_822_899),
    ];

    #[test]
    fn quantile_matches_tables() {
        for &(p, x) in TABLE {
            let q = quantile(p);
            assert!(
                (q - x).abs() <= 1e-10 * x.abs().max(1e-300),
                "p={p}: got {q}, want {x}"
            );
        }
    }

    #[test]
    fn pdf_matches_closed_form() {
        let x = 1.0;
        let want = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((pdf(x) - want).abs() < 1e-15);
    }

    #[test]
    fn tail_normalizers_at_one_percent() {
        assert!((var_scale(0.01) - 2.326_347_874_040_840_8).abs() < 1e-10);
        assert!((esf_scale(0.01) - 2.665_214_220_345_808).abs() < 1e-10);
    }
}
