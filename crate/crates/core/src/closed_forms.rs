//! Named quadrics and explicit kernels used as independent oracles for the
//! generic evaluators.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levi_spectral::QuadricForm;
use crate::linalg::CMatrix;
use crate::quadrature::{tanh_sinh, DeOptions, Estimate};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `φ = (|z₁|², |z₂|²)`.
    M1,
    /// `φ = (2 Re(z₁ z̄₂), |z₁|² − |z₂|²)`.
    M2,
    /// `φ = (2|z₁|², 2 Re(z₁ z̄₂))`.
    M3,
    /// `ℍⁿ`: `m = 1`, `φ = |z|²`.
    Heisenberg(usize),
    /// Product of Heisenberg groups of the given sizes.
    ProductHeisenberg(Vec<usize>),
}

fn real(n: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_iterator(n, n, entries.iter().map(|&x| Complex64::new(x, 0.0))).transpose()
}

impl Preset {
    pub fn quadric(&self) -> QuadricForm {
        let mats = match self {
            Preset::M1 => vec![real(2, &[1.0, 0.0, 0.0, 0.0]), real(2, &[0.0, 0.0, 0.0, 1.0])],
            Preset::M2 => vec![real(2, &[0.0, 1.0, 1.0, 0.0]), real(2, &[1.0, 0.0, 0.0, -1.0])],
            Preset::M3 => vec![real(2, &[2.0, 0.0, 0.0, 0.0]), real(2, &[0.0, 1.0, 1.0, 0.0])],
            Preset::Heisenberg(n) => vec![CMatrix::identity(*n, *n)],
            Preset::ProductHeisenberg(sizes) => {
                let n: usize = sizes.iter().sum();
                let mut offset = 0;
                sizes
                    .iter()
                    .map(|&k| {
                        let mut a = CMatrix::zeros(n, n);
                        for i in offset..offset + k {
                            a[(i, i)] = Complex64::new(1.0, 0.0);
                        }
                        offset += k;
                        a
                    })
                    .collect()
            }
        };
        QuadricForm::new(mats).expect("preset matrices are Hermitian")
    }

    /// The presets exercised by the verification suite.
    pub fn catalog() -> Vec<Preset> {
        vec![
            Preset::M1,
            Preset::M2,
            Preset::M3,
            Preset::Heisenberg(1),
            Preset::Heisenberg(2),
            Preset::Heisenberg(3),
            Preset::ProductHeisenberg(vec![1, 1]),
        ]
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::M1 => write!(f, "M1"),
            Preset::M2 => write!(f, "M2"),
            Preset::M3 => write!(f, "M3"),
            Preset::Heisenberg(n) => write!(f, "heisenberg:{n}"),
            Preset::ProductHeisenberg(sizes) => {
                let parts: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
                write!(f, "product-heisenberg:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown preset {s:?}"));
        let s = s.trim();
        match s.to_ascii_uppercase().as_str() {
            "M1" => return Ok(Preset::M1),
            "M2" => return Ok(Preset::M2),
            "M3" => return Ok(Preset::M3),
            _ => {}
        }
        let (name, arg) = s.split_once(':').ok_or_else(bad)?;
        let sizes = arg
            .split(',')
            .map(|p| match p.trim().parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>>>()?;
        match name.trim().to_ascii_lowercase().as_str() {
            "heisenberg" if sizes.len() == 1 => Ok(Preset::Heisenberg(sizes[0])),
            "product-heisenberg" => Ok(Preset::ProductHeisenberg(sizes)),
            _ => Err(bad()),
        }
    }
}

fn norm_sqr(z: &[Complex64]) -> f64 {
    z.iter().map(|w| w.norm_sqr()).sum()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn harmonic(k: usize) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}

/// Relative fundamental solution on the Heisenberg group `ℍⁿ`.
///
/// `top = false` is the function case,
/// `2^{n−2}(n−1)!/π^{n+1} (|z|²+it)^{−n} [log(|z|²+it) − log(|z|²−it) − H_{n−1}]`,
/// each logarithm on the principal branch. `top = true` is the
/// `(0, n)`-form case, the same expression with `t ↦ −t`.
pub fn heisenberg_n(n: usize, top: bool, z: &[Complex64], t: f64) -> Result<Complex64> {
    if n == 0 || z.len() != n {
        return Err(Error::dim("Heisenberg z dimension", n.max(1), z.len()));
    }
    let r2 = norm_sqr(z);
    if r2 == 0.0 && t == 0.0 {
        return Err(Error::Domain("Heisenberg kernel at the origin".into()));
    }
    let t = if top { -t } else { t };
    let w = Complex64::new(r2, t);
    let c = 2f64.powi(n as i32 - 2) * factorial(n - 1) / PI.powi(n as i32 + 1);
    let bracket = w.ln() - w.conj().ln() - harmonic(n - 1);
    Ok(c * bracket / w.powi(n as i32))
}

/// Szegő kernel of `ℍⁿ`: `2^{n−1} n!/π^{n+1} (|z|²+it)^{−(n+1)}`.
pub fn heisenberg_szego(n: usize, z: &[Complex64], t: f64) -> Result<Complex64> {
    if n == 0 || z.len() != n {
        return Err(Error::dim("Heisenberg z dimension", n.max(1), z.len()));
    }
    let r2 = norm_sqr(z);
    if r2 == 0.0 && t == 0.0 {
        return Err(Error::Domain("Szegő kernel at the origin".into()));
    }
    let w = Complex64::new(r2, t);
    let c = 2f64.powi(n as i32 - 1) * factorial(n) / PI.powi(n as i32 + 1);
    Ok(c / w.powi(n as i32 + 1))
}

/// Szegő kernel of a product of Heisenberg groups: the product of the
/// factors' kernels. `z` is the concatenation of the factors' coordinates.
pub fn product_szego(sizes: &[usize], z: &[Complex64], t: &[f64]) -> Result<Complex64> {
    let n: usize = sizes.iter().sum();
    if z.len() != n {
        return Err(Error::dim("product z dimension", n, z.len()));
    }
    if t.len() != sizes.len() {
        return Err(Error::dim("product t dimension", sizes.len(), t.len()));
    }
    let mut offset = 0;
    let mut out = Complex64::new(1.0, 0.0);
    for (&k, &tj) in sizes.iter().zip(t) {
        out *= heisenberg_szego(k, &z[offset..offset + k], tj)?;
        offset += k;
    }
    Ok(out)
}

/// `1/(π⁴ (|z₁|²+it₁)² (|z₂|²+it₂)²)`, the Szegő kernel of `ℍ¹ × ℍ¹`.
pub fn product_heisenberg_szego(z: &[Complex64; 2], t: &[f64; 2]) -> Result<Complex64> {
    let mut out = Complex64::new(1.0 / PI.powi(4), 0.0);
    for j in 0..2 {
        if z[j].norm_sqr() == 0.0 && t[j] == 0.0 {
            return Err(Error::Domain(format!("factor {} at its origin", j + 1)));
        }
        let w = Complex64::new(z[j].norm_sqr(), t[j]);
        out /= w * w;
    }
    Ok(out)
}

/// `C (|z|⁴ + |t|²)^{−3/2}`.
pub fn m2_power_law(z: &[Complex64; 2], t: &[f64; 2], c: f64) -> Result<f64> {
    let r2 = norm_sqr(z);
    let d = r2 * r2 + t[0] * t[0] + t[1] * t[1];
    if d == 0.0 {
        return Err(Error::Domain("power law at the origin".into()));
    }
    Ok(c * d.powf(-1.5))
}

/// Fundamental solution on functions for `M3`, evaluated from its
/// two-term `(σ, x)` representation: `σ ∈ (0, ∞)` via `σ = v/(1 − v)`,
/// tanh-sinh in both `v` and `x`.
pub fn m3_corollary(z: &[Complex64; 2], t: &[f64; 2], rel_tol: f64) -> Result<Estimate<Complex64>> {
    if norm_sqr(z) == 0.0 {
        if t[0] == 0.0 && t[1] == 0.0 {
            return Err(Error::Domain("M3 kernel at the origin".into()));
        }
        return Err(Error::Domain("M3 double integral diverges at z = 0".into()));
    }
    let inner_opts = DeOptions::with_tol(rel_tol * 0.1, 1e-300);
    let outer_opts = DeOptions::with_tol(rel_tol, 1e-300);
    let (z1, z2) = (z[0], z[1]);
    let (t1, t2) = (t[0], t[1]);

    let inner_failed = std::sync::atomic::AtomicBool::new(false);
    let outer = tanh_sinh(
        |v: f64, cv: f64| {
            // the σ-integrand decays like σ^{-3/2}; beyond σ = 1e30 the tail is below 1e-15
            if cv < 1e-30 {
                return Complex64::new(0.0, 0.0);
            }
            let sigma = v / cv;
            let rs = sigma.sqrt();
            let norm = 1.0 / (1.0 + sigma).sqrt();
            // dσ = dv/(1−v)²
            let jac = 1.0 / (cv * cv);
            let terms = [
                (
                    ((z1 + z2 * rs) * norm).norm_sqr(),
                    ((z1 * rs - z2) * norm).norm_sqr(),
                    t1 * (1.0 - sigma) / 2.0 + t2 * rs,
                ),
                (
                    ((-z1 + z2 * rs) * norm).norm_sqr(),
                    ((z1 * rs + z2) * norm).norm_sqr(),
                    t1 * (1.0 - sigma) / 2.0 - t2 * rs,
                ),
            ];
            let mut acc = Complex64::new(0.0, 0.0);
            for (w1, w2, time) in terms {
                let e = tanh_sinh(
                    |x: f64, cx: f64| {
                        let lx = if x < 0.5 { x.ln() } else { (-cx).ln_1p() };
                        let one_minus_xs = -(sigma * lx).exp_m1();
                        if one_minus_xs <= 0.0 {
                            return Complex64::new(0.0, 0.0);
                        }
                        let xs = 1.0 - one_minus_xs;
                        // everything multiplied through by (1 − x) to stay finite at x → 1
                        let ratio = cx / one_minus_xs;
                        let d = Complex64::new(
                            (1.0 + x) * w1 + sigma * (1.0 + xs) * ratio * w2,
                            -time * cx,
                        );
                        rs * (sigma + 1.0) * cx * ratio / (d * d * d)
                    },
                    &inner_opts,
                );
                if !e.converged {
                    inner_failed.store(true, std::sync::atomic::Ordering::Relaxed);
                }
                acc += e.value;
            }
            acc * jac
        },
        &outer_opts,
    );
    let c = 4.0 / (2.0 * PI).powi(4);
    let mut est = Estimate {
        value: outer.value * c,
        abs_error: outer.abs_error * c,
        evaluations: outer.evaluations,
        converged: outer.converged && !inner_failed.into_inner(),
    };
    if !est.value.re.is_finite() || !est.value.im.is_finite() {
        est.converged = false;
    }
    Ok(est)
}
