//! Heat kernel, Szegő projection and Kohn Laplacian after a partial Fourier
//! transform in the central variable `t`, for one dual vector `λ ≠ 0` and
//! one multi-index `L`.
//!
//! Coordinates are the eigen-coordinates `z^α` of `A^α`, `α = λ/|λ|`, and
//! `μ^λ = |λ| μ^α`. Everything positive is evaluated as a logarithm first.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::classifier::{epsilon_at, in_gamma};
use crate::error::{Error, Result};
use crate::green::green_constant;
use crate::levi_spectral::{unit_direction, MultiIndex, QuadricForm, SpectralData};
use crate::quadrature::{exp_sinh, tanh_sinh, DeOptions, Estimate};
use crate::special::{coth, ln_one_minus_exp_neg};

/// A point of the transformed picture.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformPoint {
    pub z_alpha: Vec<Complex64>,
    pub lambda: Vec<f64>,
    pub s: f64,
    pub l: MultiIndex,
}

impl TransformPoint {
    pub fn new(z_alpha: Vec<Complex64>, lambda: Vec<f64>, s: f64, l: MultiIndex) -> Result<Self> {
        unit_direction(&lambda)?;
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("heat time s = {s} must be finite and nonnegative")));
        }
        Ok(Self { z_alpha, lambda, s, l })
    }
}

/// Spectral data of `(Q, λ, L)` prepared for repeated heat-kernel calls.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    spectral: SpectralData,
    l: MultiIndex,
    m: usize,
    tau: f64,
    /// Slots of the nonzero eigenvalues.
    nonzero: Vec<usize>,
    /// Slots of the zero eigenvalues.
    zero: Vec<usize>,
    /// `|μ_j^λ|` over `nonzero`.
    a: Vec<f64>,
    /// `ε_{j,L}` over `nonzero`.
    eps: Vec<f64>,
    /// Signed `μ_j^λ` over all slots, zero inside the zero band.
    mu_lambda: Vec<f64>,
    gamma: bool,
}

impl HeatKernel {
    pub fn new(q: &QuadricForm, l: &MultiIndex, lambda: &[f64], zero_tol: f64) -> Result<Self> {
        if lambda.len() != q.m() {
            return Err(Error::dim("λ dimension", q.m(), lambda.len()));
        }
        let n = q.n();
        if l.entries().last().is_some_and(|&e| e > n) {
            return Err(Error::InvalidMultiIndex {
                entries: l.entries().to_vec(),
                reason: format!("entries must lie in 1..={n}"),
            });
        }
        let (tau, alpha) = unit_direction(lambda)?;
        let spectral = q.spectral(&alpha, zero_tol)?;
        let mut nonzero = Vec::new();
        let mut zero = Vec::new();
        let mut a = Vec::new();
        let mut eps = Vec::new();
        let mut mu_lambda = vec![0.0; n];
        for j in 0..n {
            if spectral.sign(j) == 0 {
                zero.push(j);
            } else {
                nonzero.push(j);
                a.push(tau * spectral.mu()[j].abs());
                eps.push(epsilon_at(&spectral, l, j) as f64);
                mu_lambda[j] = tau * spectral.mu()[j];
            }
        }
        let gamma = in_gamma(&spectral, l);
        Ok(Self {
            spectral,
            l: l.clone(),
            m: q.m(),
            tau,
            nonzero,
            zero,
            a,
            eps,
            mu_lambda,
            gamma,
        })
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn l(&self) -> &MultiIndex {
        &self.l
    }

    /// `|λ|`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Signed `μ^λ`, one per slot.
    pub fn mu_lambda(&self) -> &[f64] {
        &self.mu_lambda
    }

    /// Whether `α ∈ Γ_L`, i.e. the Szegő transform is nonzero.
    pub fn in_gamma(&self) -> bool {
        self.gamma
    }

    /// `Σ_{k∈L} μ_k^λ − Σ_{k∉L} μ_k^λ`.
    pub fn shift(&self) -> f64 {
        (0..self.n())
            .map(|k| {
                if self.l.contains_slot(k) {
                    self.mu_lambda[k]
                } else {
                    -self.mu_lambda[k]
                }
            })
            .sum()
    }

    fn n(&self) -> usize {
        self.mu_lambda.len()
    }

    fn check_z(&self, z_alpha: &[Complex64]) -> Result<()> {
        if z_alpha.len() != self.n() {
            return Err(Error::dim("z dimension", self.n(), z_alpha.len()));
        }
        Ok(())
    }

    /// `ln H̃_L(s, z^α, λ)` as a function of `ρ_j = |z_j^α|²`.
    pub fn ln_heat_rho(&self, s: f64, rho: &[f64]) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!(
                "heat kernel at s = {s}: the s → 0 limit is a delta, not a value"
            )));
        }
        let degenerate = self.zero.len() as f64;
        let mut acc = degenerate * (2f64.ln() - s.ln()) - (0.5 * self.m as f64 + self.n() as f64) * (2.0 * PI).ln();
        for &j in &self.zero {
            acc -= rho[j] / s;
        }
        for (i, &j) in self.nonzero.iter().enumerate() {
            let a = self.a[i];
            let x = s * a;
            // 2 e^{xε}/sinh x = 4 e^{x(ε−1)}/(1 − e^{−2x})
            let (ln_rate, decay) = if x < 1e-150 {
                (-(2.0 * s).ln(), 1.0 / s)
            } else {
                (a.ln() - ln_one_minus_exp_neg(2.0 * x), a * coth(x))
            };
            acc += 2.0 * 2f64.ln() + ln_rate + x * (self.eps[i] - 1.0) - decay * rho[j];
        }
        Ok(acc)
    }

    pub fn ln_heat(&self, s: f64, z_alpha: &[Complex64]) -> Result<f64> {
        self.check_z(z_alpha)?;
        let rho: Vec<f64> = z_alpha.iter().map(|w| w.norm_sqr()).collect();
        self.ln_heat_rho(s, &rho)
    }

    /// `H̃_L(s, z^α, λ)`.
    pub fn heat(&self, s: f64, z_alpha: &[Complex64]) -> Result<f64> {
        Ok(self.ln_heat(s, z_alpha)?.exp())
    }

    /// `S̃_L(z^α, λ)`; exactly zero off `Γ_L`.
    pub fn szego(&self, z_alpha: &[Complex64]) -> Result<f64> {
        self.check_z(z_alpha)?;
        if !self.gamma {
            return Ok(0.0);
        }
        let n = self.n() as f64;
        let mut ln = n * 4f64.ln() - (n + 0.5 * self.m as f64) * (2.0 * PI).ln();
        for (i, &j) in self.nonzero.iter().enumerate() {
            ln += self.a[i].ln() - self.a[i] * z_alpha[j].norm_sqr();
        }
        Ok(ln.exp())
    }

    /// `H̃ − S̃`, formed without cancellation when `α ∈ Γ_L`.
    pub fn heat_minus_szego(&self, s: f64, z_alpha: &[Complex64]) -> Result<f64> {
        if !self.gamma {
            return self.heat(s, z_alpha);
        }
        self.check_z(z_alpha)?;
        if !(s > 0.0) {
            return Err(Error::Domain(format!("heat kernel at s = {s}")));
        }
        // ln H̃ − ln S̃ = Σ [−ln(1 − e^{−2x}) − 2a|z|²/(e^{2x} − 1)], x = s a
        let mut d = 0.0;
        for (i, &j) in self.nonzero.iter().enumerate() {
            let x = 2.0 * s * self.a[i];
            let tail = if x > 700.0 { 0.0 } else { 2.0 * self.a[i] / x.exp_m1() };
            d += -ln_one_minus_exp_neg(x) - tail * z_alpha[j].norm_sqr();
        }
        Ok(self.szego(z_alpha)? * d.exp_m1())
    }

    /// `∫_{ℂⁿ} H̃_L dz = (2π)^{−m/2} Π e^{sε|μ^λ|}/cosh(s|μ^λ|)`.
    pub fn mass(&self, s: f64) -> f64 {
        let mut ln = -0.5 * self.m as f64 * (2.0 * PI).ln();
        for (&a, &e) in self.a.iter().zip(&self.eps) {
            let x = s * a;
            // e^{xε}/cosh x = 2 e^{x(ε−1)}/(1 + e^{−2x})
            ln += 2f64.ln() + x * (e - 1.0) - (-2.0 * x).exp().ln_1p();
        }
        ln.exp()
    }

    /// `∫_{ℂⁿ} H̃_L dz` by cubature. `H̃` is a product of one radial factor
    /// per eigen-coordinate, so the integral is a product of one-dimensional
    /// integrals `π ∫₀^∞ g_j(ρ) dρ` over `ρ = |z_j|²`, each by exp-sinh.
    pub fn mass_numeric(&self, s: f64, opts: &DeOptions) -> Result<Estimate<f64>> {
        let n = self.n();
        let base = self.ln_heat_rho(s, &vec![0.0; n])?;
        let mut value = base.exp();
        let mut rel_err = 0.0;
        let mut evaluations = 0;
        let mut converged = true;
        for j in 0..n {
            // g_j(ρ) / g_j(0) = e^{−b ρ}, with b read off ln H̃ itself
            let mut unit = vec![0.0; n];
            unit[j] = 1.0;
            let b = base - self.ln_heat_rho(s, &unit)?;
            let factor = |x: f64| {
                let mut r = vec![0.0; n];
                r[j] = x;
                (self.ln_heat_rho(s, &r).unwrap_or(f64::NAN) - base).exp()
            };
            let e = exp_sinh(factor, 1.0 / b, opts);
            value *= PI * e.value;
            rel_err += e.abs_error / e.value.abs();
            evaluations += e.evaluations;
            converged &= e.converged;
        }
        Ok(Estimate {
            value,
            abs_error: rel_err * value.abs(),
            evaluations,
            converged: converged && value.is_finite(),
        })
    }

    /// `□` applied to a real function of `z^α` at `z`, by central
    /// differences of step `h` in the `2n` real coordinates.
    pub fn apply_box<F>(&self, f: &F, z: &[Complex64], h: f64) -> Complex64
    where
        F: Fn(&[Complex64]) -> f64,
    {
        let f0 = f(z);
        let mut lap = 0.0;
        let mut out = Complex64::new(0.0, 0.0);
        let mut p = z.to_vec();
        for k in 0..self.n() {
            let base = z[k];
            let mut probe = |d: Complex64| {
                p[k] = base + d;
                let v = f(&p);
                p[k] = base;
                v
            };
            let xp = probe(Complex64::new(h, 0.0));
            let xm = probe(Complex64::new(-h, 0.0));
            let yp = probe(Complex64::new(0.0, h));
            let ym = probe(Complex64::new(0.0, -h));
            lap += (xp + xm + yp + ym - 4.0 * f0) / (h * h);
            let fx = (xp - xm) / (2.0 * h);
            let fy = (yp - ym) / (2.0 * h);
            let mu = self.mu_lambda[k];
            // 2iμ Im(z ∂_z f) = iμ (y ∂_x − x ∂_y) f for real f
            out += Complex64::new(0.0, mu * (base.im * fx - base.re * fy));
            out += mu * mu * base.norm_sqr() * f0;
        }
        out + Complex64::new(-0.25 * lap - self.shift() * f0, 0.0)
    }
}

pub fn heat_transform(q: &QuadricForm, p: &TransformPoint, zero_tol: f64) -> Result<Complex64> {
    let hk = HeatKernel::new(q, &p.l, &p.lambda, zero_tol)?;
    Ok(Complex64::new(hk.heat(p.s, &p.z_alpha)?, 0.0))
}

pub fn szego_transform(
    q: &QuadricForm,
    l: &MultiIndex,
    z_alpha: &[Complex64],
    lambda: &[f64],
    zero_tol: f64,
) -> Result<f64> {
    HeatKernel::new(q, l, lambda, zero_tol)?.szego(z_alpha)
}

/// Residual lattice: stencil centres on a cube `[−extent, extent]^{2n}`
/// with `points_per_axis` nodes per axis; boundary layers are dropped and
/// so are centres outside the ball of radius `extent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub extent: f64,
    pub points_per_axis: usize,
    pub h: f64,
}

impl GridSpec {
    pub fn centres(&self, n: usize) -> Result<Vec<Vec<Complex64>>> {
        if self.points_per_axis < 3 {
            return Err(Error::GridTooSmall(format!(
                "{} points per axis leave no interior centre",
                self.points_per_axis
            )));
        }
        if !(self.h > 0.0) || !(self.extent > 0.0) {
            return Err(Error::GridTooSmall(format!(
                "extent {} and step {} must be positive",
                self.extent, self.h
            )));
        }
        let spacing = 2.0 * self.extent / (self.points_per_axis - 1) as f64;
        if self.h >= spacing {
            return Err(Error::GridTooSmall(format!(
                "step {} does not fit inside lattice spacing {spacing}",
                self.h
            )));
        }
        let inner = self.points_per_axis - 2;
        let coord = |i: usize| -self.extent + (i + 1) as f64 * spacing;
        let dims = 2 * n;
        let total = inner.pow(dims as u32);
        let mut out = Vec::new();
        for mut idx in 0..total {
            let mut x = Vec::with_capacity(dims);
            for _ in 0..dims {
                x.push(coord(idx % inner));
                idx /= inner;
            }
            let z: Vec<Complex64> = x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            if z.iter().map(|w| w.norm_sqr()).sum::<f64>() <= self.extent * self.extent {
                out.push(z);
            }
        }
        Ok(out)
    }
}

/// Step of the central difference in `s`, as a fraction of the spatial step.
/// The `s`-truncation constant is much larger than the spatial one at small
/// heat times; tying `ds` to `h` keeps the whole residual `O(h²)`.
pub const S_STEP_FRACTION: f64 = 0.125;

/// `max |∂_s H̃ + □ H̃| / max |H̃|` over the lattice and the given heat
/// times, with `ds = h·S_STEP_FRACTION`.
pub fn box_transformed_residual(
    q: &QuadricForm,
    l: &MultiIndex,
    lambda: &[f64],
    grid: &GridSpec,
    s_values: &[f64],
    zero_tol: f64,
) -> Result<f64> {
    let hk = HeatKernel::new(q, l, lambda, zero_tol)?;
    let centres = grid.centres(q.n())?;
    let h = grid.h;
    let mut worst: f64 = 0.0;
    for &s in s_values {
        if !(s > h) {
            return Err(Error::InvalidArgument(format!("heat time {s} must exceed the step {h}")));
        }
        let heat = |z: &[Complex64]| hk.ln_heat(s, z).map(f64::exp).unwrap_or(f64::NAN);
        let rows: Vec<(f64, f64)> = centres
            .par_iter()
            .map(|z| {
                let dt = h * S_STEP_FRACTION;
                let up = hk.heat(s + dt, z).unwrap_or(f64::NAN);
                let down = hk.heat(s - dt, z).unwrap_or(f64::NAN);
                let ds = (up - down) / (2.0 * dt);
                let r = hk.apply_box(&heat, z, h) + ds;
                (r.norm(), heat(z))
            })
            .collect();
        let peak = rows.iter().fold(0.0f64, |acc, r| acc.max(r.1.abs()));
        let res = rows.iter().fold(0.0f64, |acc, r| acc.max(r.0));
        if !(peak > 0.0) || !res.is_finite() {
            return Err(Error::Domain("heat kernel vanished or overflowed on the lattice".into()));
        }
        worst = worst.max(res / peak);
    }
    Ok(worst)
}

/// `max |□ S̃| / max |S̃|` over the lattice; zero when `α ∉ Γ_L`.
pub fn box_szego_residual(
    q: &QuadricForm,
    l: &MultiIndex,
    lambda: &[f64],
    grid: &GridSpec,
    zero_tol: f64,
) -> Result<f64> {
    let hk = HeatKernel::new(q, l, lambda, zero_tol)?;
    if !hk.in_gamma() {
        return Ok(0.0);
    }
    let centres = grid.centres(q.n())?;
    let sz = |z: &[Complex64]| hk.szego(z).unwrap_or(f64::NAN);
    let rows: Vec<(f64, f64)> = centres
        .par_iter()
        .map(|z| (hk.apply_box(&sz, z, grid.h).norm(), sz(z)))
        .collect();
    let peak = rows.iter().fold(0.0f64, |acc, r| acc.max(r.1));
    let res = rows.iter().fold(0.0f64, |acc, r| acc.max(r.0));
    Ok(res / peak)
}

/// `max_{k≠ℓ} |v_k^* A^λ v_ℓ|` over the eigenbasis of `α = λ/|λ|`.
pub fn off_diagonal_defect(q: &QuadricForm, lambda: &[f64], zero_tol: f64) -> Result<f64> {
    let (_, alpha) = unit_direction(lambda)?;
    let s = q.spectral(&alpha, zero_tol)?;
    let a = q.assemble_directional(lambda)?;
    let d = s.u().adjoint() * a * s.u();
    let mut worst: f64 = 0.0;
    for i in 0..q.n() {
        for j in 0..q.n() {
            if i != j {
                worst = worst.max(d[(i, j)].norm());
            }
        }
    }
    Ok(worst)
}

/// `Ñ_L(z^α, λ) = ∫₀^∞ (H̃_L − S̃_L) ds`: tanh-sinh on `(0, s_cut)` and
/// exp-sinh on the tail. `tail_tol` is the relative tolerance of each piece.
pub fn n_transform_from_heat(
    q: &QuadricForm,
    l: &MultiIndex,
    z_alpha: &[Complex64],
    lambda: &[f64],
    s_cut: f64,
    tail_tol: f64,
    zero_tol: f64,
) -> Result<Estimate<Complex64>> {
    let hk = HeatKernel::new(q, l, lambda, zero_tol)?;
    hk.check_z(z_alpha)?;
    if !(s_cut > 0.0) || !s_cut.is_finite() {
        return Err(Error::InvalidArgument(format!("s_cut = {s_cut} must be positive")));
    }
    n_transform(&hk, z_alpha, s_cut, &DeOptions::with_tol(tail_tol, 0.0))
}

fn n_transform(hk: &HeatKernel, z_alpha: &[Complex64], s_cut: f64, opts: &DeOptions) -> Result<Estimate<Complex64>> {
    if z_alpha.iter().all(|w| w.norm_sqr() == 0.0) {
        return Err(Error::Domain(
            "∫ H̃ ds diverges at s → 0 when z = 0".into(),
        ));
    }
    // z ≠ 0, so the integrand vanishes as s → 0 (nodes can underflow to 0)
    let f = |s: f64| {
        if s > 0.0 {
            hk.heat_minus_szego(s, z_alpha).unwrap_or(f64::NAN)
        } else {
            0.0
        }
    };
    let head = tanh_sinh(|x, _| s_cut * f(s_cut * x), opts);
    let min_rate = hk.a.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = if min_rate.is_finite() { 1.0 / (2.0 * min_rate) } else { 1.0 };
    let tail = exp_sinh(|x| f(s_cut + x), scale, opts);
    let value = head.value + tail.value;
    Ok(Estimate {
        value: Complex64::new(value, 0.0),
        abs_error: head.abs_error + tail.abs_error,
        evaluations: head.evaluations + tail.evaluations,
        converged: head.converged && tail.converged && value.is_finite(),
    })
}

/// `(2π)^{−m/2} ∫₀^∞ τ^{m−1} e^{iτα·t} Ñ_L(z^α, τα) dτ` with `Ñ` from the
/// heat side. Equals `green_constant(n, m)` times the radial integral of
/// the Green kernel at `(α, L)`.
pub fn heat_bridge(
    q: &QuadricForm,
    l: &MultiIndex,
    alpha: &[f64],
    z_alpha: &[Complex64],
    t: &[f64],
    rel_tol: f64,
    zero_tol: f64,
) -> Result<Estimate<Complex64>> {
    let (norm, _) = unit_direction(alpha)?;
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("α must be a unit vector".into()));
    }
    if t.len() != q.m() {
        return Err(Error::dim("t dimension", q.m(), t.len()));
    }
    let unit = HeatKernel::new(q, l, alpha, zero_tol)?;
    unit.check_z(z_alpha)?;
    let beta: f64 = alpha.iter().zip(t).map(|(a, b)| a * b).sum();
    let m = q.m();
    let inner = DeOptions::with_tol(0.1 * rel_tol, 0.0);
    let failure = std::cell::Cell::new(None::<Error>);
    let decay: f64 = z_alpha.iter().map(|w| w.norm_sqr()).sum::<f64>()
        * unit.a.iter().cloned().fold(1.0, f64::min);
    let zero = || vec![Complex64::new(0.0, 0.0); 2];
    // slot 0 carries the value, slot 1 the inner error estimate
    let est = exp_sinh(
        |tau: f64| {
            // Ñ(τα) grows at most like τ^{n−1} as τ → 0 and decays like e^{−τ|z|²}
            if !(1e-100..=1e100).contains(&tau) {
                return zero();
            }
            let lambda: Vec<f64> = alpha.iter().map(|a| a * tau).collect();
            let hk = match HeatKernel::new(q, l, &lambda, zero_tol) {
                Ok(hk) => hk,
                Err(e) => {
                    failure.set(Some(e));
                    return zero();
                }
            };
            // the s-integral lives on the scale 1/|μ^λ|
            let s_cut = 1.0 / tau;
            match n_transform(&hk, z_alpha, s_cut, &inner) {
                Ok(e) => {
                    let w = tau.powi(m as i32 - 1);
                    vec![
                        e.value * Complex64::from_polar(w, tau * beta),
                        Complex64::new(e.abs_error * w, 0.0),
                    ]
                }
                Err(e) => {
                    failure.set(Some(e));
                    zero()
                }
            }
        },
        1.0 / decay.max(1e-3),
        &DeOptions::with_tol(rel_tol, 0.0),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let c = (2.0 * PI).powf(-0.5 * m as f64);
    let value = est.value[0] * c;
    let inner_err = est.value[1].re * c;
    let abs_error = est.abs_error * c + inner_err;
    Ok(Estimate {
        value,
        abs_error,
        evaluations: est.evaluations,
        converged: est.converged && abs_error.is_finite() && inner_err <= rel_tol * value.norm(),
    })
}

/// The Green-side counterpart of [`heat_bridge`]: `green_constant(n, m)`
/// times the radial integral at `(α, L)`.
pub fn radial_bridge(
    q: &QuadricForm,
    l: &MultiIndex,
    alpha: &[f64],
    z_alpha: &[Complex64],
    t: &[f64],
    rel_tol: f64,
    zero_tol: f64,
) -> Result<Estimate<Complex64>> {
    let s = q.spectral(alpha, zero_tol)?;
    if z_alpha.len() != q.n() {
        return Err(Error::dim("z dimension", q.n(), z_alpha.len()));
    }
    let f = crate::green::radial::RadialIntegrand::new(&s, q.m(), l, z_alpha, t);
    let est = f.integrate(&DeOptions::with_tol(rel_tol, 0.0));
    let c = green_constant(q.n(), q.m());
    Ok(Estimate {
        value: est.value * c,
        abs_error: est.abs_error * c,
        ..est
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::Preset;
    use crate::levi_spectral::DEFAULT_ZERO_TOL;
    use proptest::prelude::*;

    const TOL: f64 = DEFAULT_ZERO_TOL;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn idx(e: &[usize], n: usize) -> MultiIndex {
        MultiIndex::new(e.to_vec(), n).unwrap()
    }

    #[test]
    fn zero_form_is_euclidean_gaussian() {
        // A ≡ 0 in every direction: ν = 0
        let q = QuadricForm::new(vec![crate::linalg::CMatrix::zeros(2, 2)]).unwrap();
        let hk = HeatKernel::new(&q, &MultiIndex::empty(), &[0.7], TOL).unwrap();
        let z = [c(0.3, -0.2), c(0.5, 0.1)];
        let s = 0.8;
        let r2: f64 = z.iter().map(|w| w.norm_sqr()).sum();
        let expect = 4.0 / ((2.0 * PI).powf(2.5) * s * s) * (-r2 / s).exp();
        assert!((hk.heat(s, &z).unwrap() - expect).abs() < 1e-15 * expect);
    }

    #[test]
    fn heat_matches_sinh_display() {
        let q = Preset::M2.quadric();
        let lambda = [0.9, -1.3];
        let z = [c(0.4, 0.2), c(-0.1, 0.6)];
        for l in MultiIndex::all(2, 0).into_iter().chain(MultiIndex::all(2, 1)) {
            let hk = HeatKernel::new(&q, &l, &lambda, TOL).unwrap();
            for s in [0.1, 0.7, 3.0] {
                let mut direct = 1.0 / (2.0 * PI).powi(3);
                for j in 0..2 {
                    let mu = hk.mu_lambda()[j];
                    let eps = if l.contains_slot(j) { mu.signum() } else { -mu.signum() };
                    let a = mu.abs();
                    direct *= 2.0 * (s * eps * a).exp() * a / (s * a).sinh()
                        * (-a / (s * a).tanh() * z[j].norm_sqr()).exp();
                }
                let v = hk.heat(s, &z).unwrap();
                assert!((v - direct).abs() < 1e-13 * direct, "{l} s={s}");
            }
        }
    }

    #[test]
    fn heat_at_zero_time_is_domain_error() {
        let hk = HeatKernel::new(&Preset::Heisenberg(1).quadric(), &MultiIndex::empty(), &[1.0], TOL).unwrap();
        assert!(matches!(hk.heat(0.0, &[c(1.0, 0.0)]), Err(Error::Domain(_))));
        assert!(TransformPoint::new(vec![c(1.0, 0.0)], vec![0.0], 1.0, MultiIndex::empty()).is_err());
        assert!(TransformPoint::new(vec![c(1.0, 0.0)], vec![1.0], -1.0, MultiIndex::empty()).is_err());
    }

    #[test]
    fn heat_does_not_overflow_at_large_time() {
        let hk = HeatKernel::new(&Preset::Heisenberg(2).quadric(), &MultiIndex::empty(), &[50.0], TOL).unwrap();
        let v = hk.heat(40.0, &[c(0.1, 0.0), c(0.0, 0.1)]).unwrap();
        assert!(v.is_finite() && v >= 0.0);
        let v = hk.heat(1e-7, &[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn product_heisenberg_szego_at_origin() {
        let q = Preset::ProductHeisenberg(vec![1, 1]).quadric();
        let v = szego_transform(&q, &idx(&[1, 2], 2), &[c(0.0, 0.0), c(0.0, 0.0)], &[1.0, 1.0], TOL).unwrap();
        assert!((v - 2.0 / PI.powi(3)).abs() < 1e-15);
        // (1, 1)/√2 has μ = (1, 1)/√2 so α ∉ Γ_∅
        let v = szego_transform(&q, &MultiIndex::empty(), &[c(0.0, 0.0), c(0.0, 0.0)], &[1.0, 1.0], TOL).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn szego_decays_monotonically() {
        let q = Preset::ProductHeisenberg(vec![1, 1]).quadric();
        let l = idx(&[1, 2], 2);
        let mut last = f64::INFINITY;
        for k in 0..30 {
            let r = 0.2 * k as f64;
            let v = szego_transform(&q, &l, &[c(r, 0.0), c(0.3, 0.0)], &[0.5, 2.0], TOL).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn heat_tends_to_szego_in_gamma() {
        let q = Preset::ProductHeisenberg(vec![1, 1]).quadric();
        let l = idx(&[1, 2], 2);
        let hk = HeatKernel::new(&q, &l, &[0.8, 1.1], TOL).unwrap();
        let z = [c(0.3, 0.4), c(-0.7, 0.2)];
        let sz = hk.szego(&z).unwrap();
        let gap = (hk.heat(60.0, &z).unwrap() - sz).abs();
        assert!(gap < 1e-14 * sz);
        let d = hk.heat_minus_szego(5.0, &z).unwrap();
        assert!((d - (hk.heat(5.0, &z).unwrap() - sz)).abs() < 1e-12 * sz);
    }

    #[test]
    fn semigroup_limit_monotone_beyond_s0() {
        // twenty (z, λ) samples with α ∈ Γ_{1,2} of ℍ¹ × ℍ¹
        for k in 0..20 {
            let th = 0.05 + 1.45 * k as f64 / 19.0;
            let tau = 0.3 + 0.2 * k as f64;
            let q = Preset::ProductHeisenberg(vec![1, 1]).quadric();
            let hk = HeatKernel::new(&q, &idx(&[1, 2], 2), &[tau * th.cos(), tau * th.sin()], TOL).unwrap();
            assert!(hk.in_gamma());
            let z = [c(0.1 * k as f64, 0.3), c(-0.4, 0.05 * k as f64)];
            let s0 = 2.0 / hk.a.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut last = f64::INFINITY;
            for i in 0..40 {
                let s = s0 * (1.0 + 0.25 * i as f64);
                let g = hk.heat_minus_szego(s, &z).unwrap().abs();
                assert!(g <= last, "sample {k} s={s}");
                last = g;
            }
            assert!(last < 1e-6 * hk.szego(&z).unwrap());
        }
    }

    #[test]
    fn mass_identity_against_cubature() {
        let q = Preset::M2.quadric();
        for l in MultiIndex::all(2, 1) {
            let hk = HeatKernel::new(&q, &l, &[0.4, 0.9], TOL).unwrap();
            for s in [0.2, 1.5] {
                let e = hk.mass_numeric(s, &DeOptions::with_tol(1e-11, 0.0)).unwrap();
                assert!(e.converged);
                assert!((e.value - hk.mass(s)).abs() < 1e-9 * hk.mass(s), "{l} s={s}");
            }
        }
    }

    #[test]
    fn residual_small_on_heisenberg_and_second_order() {
        let q = Preset::Heisenberg(1).quadric();
        let grid = |h| GridSpec {
            extent: 2.0,
            points_per_axis: 9,
            h,
        };
        let r1 = box_transformed_residual(&q, &MultiIndex::empty(), &[1.0], &grid(1e-3), &[0.5], TOL).unwrap();
        let r2 = box_transformed_residual(&q, &MultiIndex::empty(), &[1.0], &grid(2e-3), &[0.5], TOL).unwrap();
        assert!(r1 < 5e-5, "{r1}");
        assert!(r2 / r1 > 3.5, "{r2} / {r1}");
    }

    #[test]
    fn box_annihilates_szego() {
        let q = Preset::Heisenberg(1).quadric();
        let grid = GridSpec {
            extent: 2.0,
            points_per_axis: 9,
            h: 1e-3,
        };
        let r = box_szego_residual(&q, &idx(&[1], 1), &[1.5], &grid, TOL).unwrap();
        assert!(r < 5e-5, "{r}");
        assert_eq!(box_szego_residual(&q, &MultiIndex::empty(), &[1.5], &grid, TOL).unwrap(), 0.0);
    }

    #[test]
    fn grid_too_small() {
        let q = Preset::Heisenberg(1).quadric();
        for g in [
            GridSpec { extent: 1.0, points_per_axis: 2, h: 1e-3 },
            GridSpec { extent: 1.0, points_per_axis: 5, h: 0.6 },
            GridSpec { extent: 1.0, points_per_axis: 5, h: 0.0 },
        ] {
            assert!(matches!(
                box_transformed_residual(&q, &MultiIndex::empty(), &[1.0], &g, &[1.0], TOL),
                Err(Error::GridTooSmall(_))
            ));
        }
    }

    #[test]
    fn off_diagonal_vanishes() {
        for p in Preset::catalog() {
            let q = p.quadric();
            let lambda: Vec<f64> = (0..q.m()).map(|i| 0.7 - 0.4 * i as f64).collect();
            assert!(off_diagonal_defect(&q, &lambda, TOL).unwrap() < 1e-10, "{p}");
        }
    }

    #[test]
    fn n_transform_origin_is_domain_error() {
        let q = Preset::Heisenberg(2).quadric();
        let r = n_transform_from_heat(&q, &idx(&[1], 2), &[c(0.0, 0.0); 2], &[1.0], 1.0, 1e-10, TOL);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn n_transform_without_szego_is_plain_heat_integral() {
        let q = Preset::Heisenberg(1).quadric();
        let z = [c(0.5, 0.5)];
        let hk = HeatKernel::new(&q, &MultiIndex::empty(), &[1.0], TOL).unwrap();
        assert!(!hk.in_gamma());
        let e = n_transform_from_heat(&q, &MultiIndex::empty(), &z, &[1.0], 1.0, 1e-11, TOL).unwrap();
        assert!(e.converged);
        // plain composite Simpson on [1e-6, 40] as the reference
        let n = 400_000;
        let (a, b) = (1e-6, 40.0);
        let h = (b - a) / n as f64;
        let mut acc = hk.heat(a, &z).unwrap() + hk.heat(b, &z).unwrap();
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * hk.heat(a + i as f64 * h, &z).unwrap();
        }
        let simpson = acc * h / 3.0;
        assert!((e.value.re - simpson).abs() < 1e-9 * simpson);
    }

    #[test]
    fn heat_bridge_matches_radial_integral() {
        let q = Preset::Heisenberg(2).quadric();
        let l = idx(&[1], 2);
        let z = [c(0.4, -0.3), c(0.2, 0.5)];
        for (alpha, t) in [([1.0], [0.3]), ([-1.0], [-0.6])] {
            let a = heat_bridge(&q, &l, &alpha, &z, &t, 1e-10, TOL).unwrap();
            let b = radial_bridge(&q, &l, &alpha, &z, &t, 1e-12, TOL).unwrap();
            assert!(a.converged && b.converged);
            assert!((a.value - b.value).norm() < 1e-8 * b.value.norm(), "{:?} vs {:?}", a.value, b.value);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn heat_positive(
            s in 1e-3f64..20.0,
            th in 0.0f64..std::f64::consts::TAU,
            tau in 0.05f64..5.0,
            x in -2.0f64..2.0, y in -2.0f64..2.0, u in -2.0f64..2.0, v in -2.0f64..2.0,
            li in 0usize..4,
        ) {
            let q = Preset::M3.quadric();
            let l = [MultiIndex::empty(), idx(&[1], 2), idx(&[2], 2), idx(&[1, 2], 2)][li].clone();
            let hk = HeatKernel::new(&q, &l, &[tau * th.cos(), tau * th.sin()], TOL).unwrap();
            let h = hk.heat(s, &[c(x, y), c(u, v)]).unwrap();
            prop_assert!(h > 0.0 || (h == 0.0 && hk.ln_heat(s, &[c(x, y), c(u, v)]).unwrap() < -700.0));
        }

        #[test]
        fn heat_parabolic_scaling(
            s in 0.01f64..5.0,
            cc in 0.2f64..5.0,
            th in 0.0f64..std::f64::consts::TAU,
            x in -1.0f64..1.0, y in -1.0f64..1.0, u in -1.0f64..1.0, v in -1.0f64..1.0,
            li in 0usize..3,
        ) {
            // H̃(s/c, z/√c, cλ) = cⁿ H̃(s, z, λ)
            let q = Preset::M2.quadric();
            let l = [MultiIndex::empty(), idx(&[1], 2), idx(&[1, 2], 2)][li].clone();
            let lambda = [th.cos(), th.sin()];
            let z = [c(x, y), c(u, v)];
            let base = HeatKernel::new(&q, &l, &lambda, TOL).unwrap();
            let scaled = HeatKernel::new(&q, &l, &[cc * lambda[0], cc * lambda[1]], TOL).unwrap();
            let zs: Vec<Complex64> = z.iter().map(|w| w / cc.sqrt()).collect();
            let lhs = scaled.ln_heat(s / cc, &zs).unwrap();
            let rhs = base.ln_heat(s, &z).unwrap() + 2.0 * cc.ln();
            prop_assert!((lhs - rhs).abs() < 1e-11 * rhs.abs().max(1.0));
        }
    }
}
