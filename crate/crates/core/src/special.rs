//! Cancellation-free elementary functions used by the kernels.

use num_complex::Complex64;

/// `ln(eˣ − 1)` for `x > 0`, without overflow for large `x`.
pub fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln(1 − e^{−x})` for `x > 0`.
pub fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x > 0.7 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

/// `coth x` for `x > 0`, with a series below `1e-4`.
pub fn coth(x: f64) -> f64 {
    if x < 1e-4 {
        let x2 = x * x;
        1.0 / x + x / 3.0 - x * x2 / 45.0 + 2.0 * x * x2 * x2 / 945.0
    } else {
        1.0 + 2.0 / (2.0 * x).exp_m1()
    }
}

/// Principal `ln(1 + w)`, accurate for small `|w|`.
pub fn ln_1p_c(w: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p();
    let im = w.im.atan2(1.0 + w.re);
    Complex64::new(re, im)
}

/// `e^w − 1`, accurate for small `|w|`.
pub fn exp_m1_c(w: Complex64) -> Complex64 {
    // e^{a+ib} − 1 = (e^a − 1) cos b + (cos b − 1) + i e^a sin b
    let em1 = w.re.exp_m1();
    let (s, c) = w.im.sin_cos();
    let half = (0.5 * w.im).sin();
    let cos_m1 = -2.0 * half * half;
    Complex64::new(em1 * c + cos_m1, (em1 + 1.0) * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_expm1_matches_direct() {
        for x in [1e-8f64, 0.3, 2.0, 29.0, 31.0] {
            let direct = x.exp_m1().ln();
            assert!((ln_expm1(x) - direct).abs() < 1e-14 * direct.abs().max(1.0));
        }
        assert!((ln_expm1(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn ln_one_minus_exp_neg_small_and_large() {
        assert!((ln_one_minus_exp_neg(1e-10) - (1e-10f64).ln()).abs() < 1e-9);
        assert!((ln_one_minus_exp_neg(40.0) + (-40f64).exp()).abs() < 1e-30);
        let x: f64 = 0.69;
        assert!((ln_one_minus_exp_neg(x) - (1.0 - (-x).exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn coth_branches_agree() {
        for x in [5e-5f64, 9.99e-5, 1.01e-4, 0.5, 3.0] {
            assert!((coth(x) - 1.0 / x.tanh()).abs() < 1e-12 * coth(x));
        }
    }

    #[test]
    fn complex_log1p_expm1() {
        let w = Complex64::new(1e-12, -3e-13);
        assert!((ln_1p_c(w) - w).norm() < 1e-24);
        assert!((exp_m1_c(w) - w).norm() < 1e-24);
        let w = Complex64::new(0.7, -2.1);
        assert!((ln_1p_c(w) - (w + 1.0).ln()).norm() < 1e-15);
        assert!((exp_m1_c(w) - (w.exp() - 1.0)).norm() < 1e-15);
    }
}
