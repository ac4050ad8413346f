//! The `r`-integrals of the Green kernel for one direction `α` and one
//! multi-index `L`.
//!
//! Everything is evaluated in `u = −ln r ∈ (0, ∞)`, where `dr/r = du`,
//! `r^a = e^{−au}` and `(1 + r^a)/(1 − r^a) = 1 + 2/(e^{au} − 1)`. The
//! integrand is assembled in log form so neither the `1/(1 − r^a)` poles nor
//! the large power of `A − iα·t` can overflow, and inside `Γ_L` the
//! subtracted bracket is formed with `expm1`/`ln1p` so it keeps full
//! relative accuracy as `u → ∞`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levi_spectral::{MultiIndex, SpectralData};
use crate::quadrature::{exp_sinh, tanh_sinh, DeOptions, Estimate};
use crate::special::{exp_m1_c, ln_1p_c, ln_expm1, ln_one_minus_exp_neg};

/// Only exact zeros are degenerate for the radial integrand; the
/// classification band is not used here. The angular integrand has a log
/// singularity where an eigenvalue vanishes, and a band would replace the
/// finite `log(1/|μ|)` growth by a divergent degenerate integral.
fn is_radial_zero(mu: f64) -> bool {
    mu == 0.0
}

/// Per-`(α, L)` data of the radial integrand.
#[derive(Debug, Clone)]
pub struct RadialIntegrand {
    /// `|μ_j|` over the nonzero eigenvalues.
    a: Vec<f64>,
    eps: Vec<i8>,
    /// `|z_j^α|²` over the nonzero eigenvalues.
    w: Vec<f64>,
    /// `|z''|²`, the weight of the zero eigenvalues.
    w_zero: f64,
    /// `n − ν`.
    degenerate: i32,
    /// `α·t`.
    beta: f64,
    /// `n + m − 1`.
    power: i32,
    subtracted: bool,
}

impl RadialIntegrand {
    pub fn new(s: &SpectralData, m: usize, l: &MultiIndex, z_alpha: &[Complex64], t: &[f64]) -> Self {
        let n = s.n();
        let mut a = Vec::with_capacity(n);
        let mut eps = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut w_zero = 0.0;
        let mut gamma = true;
        for j in 0..n {
            let mu = s.mu()[j];
            if is_radial_zero(mu) {
                w_zero += z_alpha[j].norm_sqr();
                gamma = false;
            } else {
                let sg = if mu > 0.0 { 1 } else { -1 };
                a.push(mu.abs());
                eps.push(if l.contains_slot(j) { sg } else { -sg });
                w.push(z_alpha[j].norm_sqr());
                gamma &= (sg > 0) == l.contains_slot(j);
            }
        }
        let beta = s.alpha().iter().zip(t).map(|(x, y)| x * y).sum();
        Self {
            degenerate: (n - a.len()) as i32,
            a,
            eps,
            w,
            w_zero,
            beta,
            power: (n + m - 1) as i32,
            subtracted: gamma,
        }
    }

    /// Whether `α ∈ Γ_L`, i.e. the subtracted form is used.
    pub fn subtracted(&self) -> bool {
        self.subtracted
    }

    /// `A_α` at `u = −ln r`.
    pub fn a_of_u(&self, u: f64) -> f64 {
        let mut acc = if self.w_zero > 0.0 { 2.0 * self.w_zero / u } else { 0.0 };
        for (&a, &w) in self.a.iter().zip(&self.w) {
            acc += a * (1.0 + 2.0 / (a * u).exp_m1()) * w;
        }
        acc
    }

    /// `A_α(0, z) = Σ |μ_j||z_j|²`.
    pub fn a_at_zero(&self) -> f64 {
        self.a.iter().zip(&self.w).map(|(a, w)| a * w).sum()
    }

    /// The integrand in `u`, without the overall constant.
    pub fn eval_u(&self, u: f64) -> Complex64 {
        let k = self.power as f64;
        if self.subtracted {
            let b0 = Complex64::new(self.a_at_zero(), -self.beta);
            let mut ln_p = 0.0;
            let mut delta_a = 0.0;
            for (&a, &w) in self.a.iter().zip(&self.w) {
                let au = a * u;
                // δ = 1/(e^{au} − 1), ln(1 + δ) = −ln(1 − e^{−au})
                ln_p -= ln_one_minus_exp_neg(au);
                let delta = if au > 700.0 { 0.0 } else { 1.0 / au.exp_m1() };
                delta_a += 2.0 * a * delta * w;
            }
            let prod: f64 = self.a.iter().product();
            let lead = prod * b0.powi(-self.power);
            let expo = Complex64::new(ln_p, 0.0) - ln_1p_c(Complex64::new(delta_a, 0.0) / b0) * k;
            lead * exp_m1_c(expo)
        } else {
            let mut ln_p = -(self.degenerate as f64) * u.ln();
            for (&a, &e) in self.a.iter().zip(&self.eps) {
                let au = a * u;
                ln_p += a.ln()
                    - if e < 0 {
                        ln_expm1(au)
                    } else {
                        ln_one_minus_exp_neg(au)
                    };
            }
            let b = Complex64::new(self.a_of_u(u), -self.beta);
            (Complex64::new(ln_p, 0.0) - b.ln() * k).exp()
        }
    }

    /// The integrand in `r`, given `r` and `1 − r`.
    pub fn eval_r(&self, r: f64, one_minus_r: f64) -> Complex64 {
        let u = if r < 0.5 { -r.ln() } else { -(-one_minus_r).ln_1p() };
        self.eval_u(u) / r
    }

    /// `∫₀^∞ eval_u du` by exp-sinh.
    pub fn integrate(&self, opts: &DeOptions) -> Estimate<Complex64> {
        let scale = self.a.iter().cloned().fold(0.0, f64::max);
        let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        exp_sinh(|u| self.eval_u(u), scale, opts)
    }
}

/// `A_α(r, z)`: `2|z''|²/|ln r| + Σ |μ_j| (1 + r^{|μ_j|})/(1 − r^{|μ_j|}) |z_j|²`,
/// the first term present only when some eigenvalue vanishes.
pub fn a_alpha(s: &SpectralData, r: f64, z_alpha: &[Complex64]) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("r = {r} outside (0, 1)")));
    }
    if z_alpha.len() != s.n() {
        return Err(Error::dim("z dimension", s.n(), z_alpha.len()));
    }
    let u = -r.ln();
    let mut acc = 0.0;
    let mut w_zero = 0.0;
    for (j, z) in z_alpha.iter().enumerate() {
        if is_radial_zero(s.mu()[j]) {
            w_zero += z.norm_sqr();
        } else {
            let a = s.mu()[j].abs();
            acc += a * (1.0 + 2.0 / (a * u).exp_m1()) * z.norm_sqr();
        }
    }
    if w_zero > 0.0 {
        acc += 2.0 * w_zero / u;
    }
    Ok(acc)
}

/// Tanh-sinh over `r ∈ (0, 1)`; `f(r, 1 − r)`. Fails with
/// [`Error::ToleranceNotMet`] when the level budget runs out.
pub fn integrate_r<F>(f: F, opts: &DeOptions) -> Result<(Complex64, f64)>
where
    F: Fn(f64, f64) -> Complex64,
{
    let e = tanh_sinh(f, opts).require("r-integral", opts.rel_tol, opts.abs_tol)?;
    Ok((e.value, e.abs_error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::Preset;
    use crate::levi_spectral::DEFAULT_ZERO_TOL;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn a_alpha_examples() {
        let q = Preset::Heisenberg(1).quadric();
        let s = q.spectral(&[1.0], DEFAULT_ZERO_TOL).unwrap();
        let v = a_alpha(&s, (-2f64).exp(), &[c(1.0, 0.0)]).unwrap();
        assert!((v - 1.0 / 1f64.tanh()).abs() < 1e-14);
        assert!((v - 1.3130352854993312).abs() < 1e-12);
        assert_eq!(a_alpha(&s, 0.3, &[c(0.0, 0.0)]).unwrap(), 0.0);
        assert!(a_alpha(&s, 1.0, &[c(1.0, 0.0)]).is_err());
        assert!(a_alpha(&s, 0.0, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn a_alpha_small_r_limit() {
        let q = Preset::M2.quadric();
        let s = q.spectral(&[0.6, 0.8], DEFAULT_ZERO_TOL).unwrap();
        let z = s.eigen_coordinates(&[c(0.3, 0.1), c(-0.2, 0.5)]).unwrap();
        let limit: f64 = (0..2).map(|j| s.mu()[j].abs() * z[j].norm_sqr()).sum();
        let v = a_alpha(&s, 1e-40, &z).unwrap();
        assert!((v - limit).abs() < 1e-14);
    }

    #[test]
    fn a_alpha_degenerate_variant() {
        let q = Preset::M3.quadric();
        let s = q.spectral(&[1.0, 0.0], DEFAULT_ZERO_TOL).unwrap();
        let z = [c(0.0, 0.0), c(1.0, 0.0)];
        let r: f64 = 0.25;
        let v = a_alpha(&s, r, &z).unwrap();
        assert!((v - 2.0 / r.ln().abs()).abs() < 1e-14);
    }

    #[test]
    fn u_and_r_parameterizations_agree() {
        let q = Preset::M2.quadric();
        let s = q.spectral(&[0.8, -0.6], DEFAULT_ZERO_TOL).unwrap();
        let z = s.eigen_coordinates(&[c(0.4, 0.3), c(-0.5, 0.2)]).unwrap();
        let f = RadialIntegrand::new(&s, 2, &MultiIndex::empty(), &z, &[0.3, -0.7]);
        let opts = DeOptions::default();
        let via_u = f.integrate(&opts);
        let (via_r, _) = integrate_r(|r, cr| f.eval_r(r, cr), &opts).unwrap();
        assert!((via_u.value - via_r).norm() < 1e-11 * via_r.norm());
    }

    #[test]
    fn subtracted_form_matches_direct_difference() {
        let q = Preset::Heisenberg(2).quadric();
        let s = q.spectral(&[-1.0], DEFAULT_ZERO_TOL).unwrap();
        let z = [c(0.5, 0.1), c(0.2, -0.3)];
        let f = RadialIntegrand::new(&s, 1, &MultiIndex::empty(), &z, &[0.4]);
        assert!(f.subtracted());
        for u in [0.05, 0.5, 2.0, 6.0] {
            let k = 2;
            let a = f.a_of_u(u);
            let b = c(a, -f.beta);
            let b0 = c(f.a_at_zero(), -f.beta);
            let p = 1.0 / (-(-u).exp_m1());
            let direct = p * p / b.powi(k) - 1.0 / b0.powi(k);
            assert!((f.eval_u(u) - direct).norm() < 1e-12 * direct.norm());
        }
        // far out the bracket is tiny and still resolved
        let far = f.eval_u(40.0);
        assert!(far.norm() > 0.0 && far.norm() < 1e-15);
    }
}
