//! Float helpers for the `no_std` build.
//!
//! `core` exposes `abs`/`max`/`total_cmp` on `f64` but not the libm-backed
//! transcendentals, so the handful we need are routed through [`libm`].
//! Going through libm everywhere also keeps results bit-identical across
//! platforms, which the determinism guarantees rely on.

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Fractional distance from `x` to the nearest integer.
pub fn int_distance(x: f64) -> f64 {
    (x - round(x)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_distance_is_symmetric() {
        assert_eq!(int_distance(2.25), 0.25);
        assert_eq!(int_distance(-2.25), 0.25);
        assert_eq!(int_distance(3.0), 0.0);
    }

    #[test]
    fn transcendentals_match_std() {
        for &x in &[0.0_f64, 0.5, 1.0, 2.718281828, 10.0] {
            assert!((exp(x) - x.exp()).abs() < 1e-15 * x.exp());
            if x > 0.0 {
                assert!((ln(x) - x.ln()).abs() < 1e-15);
            }
        }
    }
}
