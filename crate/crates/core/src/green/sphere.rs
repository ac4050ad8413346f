//! Integration over the unit sphere `S^{m−1}` of direction space.
//!
//! `m = 1` uses the counting measure on `{±1}`. `m = 2` runs adaptive
//! Gauss–Kronrod in the angle with mandatory breaks where an eigenvalue of
//! `A^α` changes sign or touches zero and where two eigenvalues nearly
//! cross. `m ≥ 3` nests the same rule in hyperspherical coordinates, with
//! the break detection applied along the innermost (azimuthal) sweep.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use super::{QuadratureSpec, SphereRule};
use crate::classifier::hyperspherical;
use crate::error::{Error, Result};
use crate::levi_spectral::QuadricForm;
use crate::quadrature::{gauss_kronrod, Estimate, GkOptions};

const SCAN_POINTS: usize = 256;
const REFINE_ITERS: usize = 80;

/// Mandatory breakpoints in `[0, 2π]` for the circle `θ ↦ α(θ)`.
pub fn circle_breaks<A>(alpha_of: A, q: &QuadricForm, spec: &QuadratureSpec) -> Result<Vec<f64>>
where
    A: Fn(f64) -> Vec<f64>,
{
    let two_pi = 2.0 * PI;
    let eig = |th: f64| -> Result<(Vec<f64>, f64)> {
        let s = q.spectral(&alpha_of(th), spec.zero_tol)?;
        Ok((s.mu().to_vec(), s.scale()))
    };
    let thetas: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| two_pi * i as f64 / SCAN_POINTS as f64)
        .collect();
    let vals = thetas.iter().map(|&th| eig(th)).collect::<Result<Vec<_>>>()?;
    let n = q.n();
    let mut breaks: Vec<f64> = (0..=8).map(|k| k as f64 * FRAC_PI_4).collect();

    for j in 0..n {
        let mu = |i: usize| vals[i].0[j];
        for i in 0..SCAN_POINTS {
            let (a, b) = (mu(i), mu(i + 1));
            if a == 0.0 {
                breaks.push(thetas[i]);
            }
            if a * b < 0.0 {
                let f = |th: f64| eig(th).map(|v| v.0[j]);
                breaks.push(bisect_root(&f, thetas[i], thetas[i + 1], a)?);
            }
        }
        // tangential zeros: local minima of |μ_j| that stay small
        let absmu = |i: usize| vals[i % SCAN_POINTS].0[j].abs();
        for i in 0..SCAN_POINTS {
            let prev = absmu(i + SCAN_POINTS - 1);
            let here = absmu(i);
            let next = absmu(i + 1);
            if here <= prev && here <= next && here < spec.crossing_split_tol * vals[i].1 {
                let f = |th: f64| eig(th).map(|v| v.0[j].abs());
                let lo = if i == 0 { -thetas[1] } else { thetas[i - 1] };
                breaks.push(wrap(golden_min(&f, lo, thetas[i + 1])?));
            }
        }
    }
    for j in 0..n.saturating_sub(1) {
        let gap = |i: usize| {
            let v = &vals[i % SCAN_POINTS].0;
            v[j] - v[j + 1]
        };
        for i in 0..SCAN_POINTS {
            let prev = gap(i + SCAN_POINTS - 1);
            let here = gap(i);
            let next = gap(i + 1);
            if here <= prev && here <= next && here < spec.crossing_split_tol * vals[i].1 {
                let f = |th: f64| eig(th).map(|v| v.0[j] - v.0[j + 1]);
                let lo = if i == 0 { -thetas[1] } else { thetas[i - 1] };
                breaks.push(wrap(golden_min(&f, lo, thetas[i + 1])?));
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if let Some(last) = breaks.last_mut() {
        *last = two_pi;
    }
    Ok(breaks)
}

fn wrap(th: f64) -> f64 {
    th.rem_euclid(2.0 * PI)
}

fn bisect_root<F>(f: &F, mut lo: f64, mut hi: f64, f_lo: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let lo_sign = f_lo.signum();
    for _ in 0..REFINE_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn golden_min<F>(f: &F, mut a: f64, mut b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..REFINE_ITERS {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// `∫_{S^{m−1}} g(α) dα` for vector-valued `g`.
///
/// The reported error is the Gauss–Kronrod estimate of the outermost sweep
/// plus the integrated error estimates of the inner sweeps.
pub fn integrate_sphere<G>(g: &G, q: &QuadricForm, spec: &QuadratureSpec) -> Result<Estimate<Vec<Complex64>>>
where
    G: Fn(&[f64]) -> Vec<Complex64> + Sync,
{
    let m = q.m();
    let rule = spec.sphere_rule.unwrap_or_else(|| SphereRule::for_codimension(m));
    if rule != SphereRule::for_codimension(m) {
        return Err(Error::InvalidArgument(format!(
            "sphere rule {rule:?} does not apply to m = {m}"
        )));
    }
    match rule {
        SphereRule::TwoPoint => {
            let mut v = g(&[1.0]);
            for (a, b) in v.iter_mut().zip(g(&[-1.0])) {
                *a += b;
            }
            Ok(Estimate {
                value: v,
                abs_error: 0.0,
                evaluations: 2,
                converged: true,
            })
        }
        SphereRule::AdaptiveAngles | SphereRule::ProductSpherical => {
            let est = sweep(g, q, spec, m, &mut Vec::new())?;
            let mut value = est.value;
            let inner_err = value.pop().map(|e| e.re.abs()).unwrap_or(0.0);
            Ok(Estimate {
                value,
                abs_error: est.abs_error + inner_err,
                evaluations: est.evaluations,
                converged: est.converged,
            })
        }
    }
}

/// One hyperspherical sweep. The returned vector carries an extra last
/// slot: the integrated error of the sweeps nested inside this one.
fn sweep<G>(
    g: &G,
    q: &QuadricForm,
    spec: &QuadratureSpec,
    m: usize,
    prefix: &mut Vec<f64>,
) -> Result<Estimate<Vec<Complex64>>>
where
    G: Fn(&[f64]) -> Vec<Complex64> + Sync,
{
    let depth = prefix.len();
    let innermost = depth + 2 == m;
    let nested_rel = if depth == 0 { spec.rel_tol } else { 0.1 * spec.rel_tol };
    let opts = GkOptions {
        rel_tol: nested_rel,
        abs_tol: spec.abs_tol,
        max_panels: spec.max_panels,
    };
    let failure = std::sync::Mutex::new(None::<Error>);
    let est = if innermost {
        let base = prefix.clone();
        let alpha_of = |th: f64| {
            let mut phi = base.clone();
            phi.push(th);
            hyperspherical(&phi)
        };
        let breaks = circle_breaks(alpha_of, q, spec)?;
        let f = |th: f64| {
            let mut v = g(&alpha_of(th));
            v.push(Complex64::new(0.0, 0.0));
            v
        };
        gauss_kronrod(&f, &breaks, &opts)
    } else {
        let power = (m - 2 - depth) as i32;
        let base = prefix.clone();
        let f = |phi: f64| {
            let mut p = base.clone();
            p.push(phi);
            match sweep(g, q, spec, m, &mut p) {
                Ok(inner) => {
                    let w = phi.sin().powi(power);
                    let mut v: Vec<Complex64> = inner.value.iter().map(|x| x * w).collect();
                    if let Some(last) = v.last_mut() {
                        *last += inner.abs_error * w;
                    }
                    if !inner.converged {
                        failure.lock().expect("poisoned").get_or_insert(Error::ToleranceNotMet {
                            context: "inner sphere sweep".into(),
                            abs_error: inner.abs_error,
                            target: spec.rel_tol,
                        });
                    }
                    v
                }
                Err(e) => {
                    failure.lock().expect("poisoned").get_or_insert(e);
                    Vec::new()
                }
            }
        };
        let breaks: Vec<f64> = (0..=4).map(|k| k as f64 * FRAC_PI_4).collect();
        gauss_kronrod(&f, &breaks, &opts)
    };
    match failure.into_inner().expect("poisoned") {
        Some(Error::ToleranceNotMet { .. }) => Ok(Estimate {
            converged: false,
            ..est
        }),
        Some(e) => Err(e),
        None => Ok(est),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::Preset;

    fn one(_: &[f64]) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0)]
    }

    #[test]
    fn constant_on_circle_and_points() {
        let spec = QuadratureSpec::default();
        let e = integrate_sphere(&one, &Preset::M2.quadric(), &spec).unwrap();
        assert!((e.value[0].re - 2.0 * PI).abs() < 1e-12);
        let e = integrate_sphere(&one, &Preset::Heisenberg(2).quadric(), &spec).unwrap();
        assert_eq!(e.value[0].re, 2.0);
    }

    #[test]
    fn area_of_two_and_three_spheres() {
        let spec = QuadratureSpec::default();
        let q3 = Preset::ProductHeisenberg(vec![1, 1, 1]).quadric();
        let e = integrate_sphere(&one, &q3, &spec).unwrap();
        assert!((e.value[0].re - 4.0 * PI).abs() < 1e-11);
        let q4 = Preset::ProductHeisenberg(vec![1, 1, 1, 1]).quadric();
        let e = integrate_sphere(&|a: &[f64]| vec![Complex64::new(a[3] * a[3], 0.0)], &q4, &spec).unwrap();
        // ∫ α₄² over S³ = |S³|/4 = π²/2
        assert!((e.value[0].re - PI * PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn m1_breaks_include_axes_and_diagonals() {
        let spec = QuadratureSpec::default();
        let q = Preset::M1.quadric();
        let b = circle_breaks(|th| vec![th.cos(), th.sin()], &q, &spec).unwrap();
        for target in [0.0, PI / 2.0, PI, 1.5 * PI, PI / 4.0, 1.25 * PI, 2.0 * PI] {
            assert!(b.iter().any(|x| (x - target).abs() < 1e-9), "missing {target}");
        }
    }

    #[test]
    fn m3_breaks_at_tangential_zeros() {
        let spec = QuadratureSpec::default();
        let q = Preset::M3.quadric();
        let b = circle_breaks(|th| vec![th.cos(), th.sin()], &q, &spec).unwrap();
        assert!(b.iter().any(|x| x.abs() < 1e-6));
        assert!(b.iter().any(|x| (x - PI).abs() < 1e-6));
    }

    #[test]
    fn wrong_rule_rejected() {
        let spec = QuadratureSpec {
            sphere_rule: Some(SphereRule::TwoPoint),
            ..QuadratureSpec::default()
        };
        assert!(integrate_sphere(&one, &Preset::M2.quadric(), &spec).is_err());
    }
}
