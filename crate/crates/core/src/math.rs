//! Float helpers routed through `libm` so results do not depend on `std`.

/// Default RBF width, `1/sqrt(2)`, which turns the kernel into `exp(-distance)`.
pub const DEFAULT_MU: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Success scores are clamped into `[FLOOR, 1 - FLOOR]` before any logarithm.
pub const FLOOR: f64 = 1e-10;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `exp(-||u - v|| / (2 mu^2))`.
#[inline]
pub fn rbf(a: &[f64], b: &[f64], mu: f64) -> f64 {
    exp(-sqrt(squared_distance(a, b)) / (2.0 * mu * mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_bounded() {
        for &x in &[-40.0, -3.0, -0.5, 0.0, 0.5, 3.0, 40.0] {
            let s = sigmoid(x);
            assert!((0.0..=1.0).contains(&s));
            assert!((s + sigmoid(-x) - 1.0).abs() < 1e-12);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn default_mu_reduces_to_plain_exponential() {
        let u = [0.0, 0.0];
        let v = [3.0, 4.0];
        assert!((rbf(&u, &v, DEFAULT_MU) - exp(-5.0)).abs() < 1e-15);
    }
}
