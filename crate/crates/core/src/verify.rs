//! Named end-to-end checks: each compares a generic evaluator against an
//! independent closed form or identity and reports the worst deviation.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::{classify_degree, signature_set, Signature, SphereSampler};
use crate::closed_forms::{heisenberg_n, m3_corollary, product_heisenberg_szego, Preset};
use crate::error::{Error, Result};
use crate::green::{EvalPoint, FormCoefficients, KernelEvaluator, QuadratureSpec};
use crate::levi_spectral::{MultiIndex, QuadricForm};
use crate::linalg::CMatrix;
use crate::quadrature::DeOptions;
use crate::transformed_kernels::{box_transformed_residual, heat_bridge, radial_bridge, GridSpec, HeatKernel};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation, in the units of `bound`.
    pub metric: f64,
    pub bound: f64,
    pub seconds: f64,
    /// Wall-clock allowance; `None` when the check has none.
    pub budget_seconds: Option<f64>,
    pub detail: String,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let budget = match self.budget_seconds {
            Some(b) => format!("{:.2}s/{b:.0}s", self.seconds),
            None => format!("{:.2}s", self.seconds),
        };
        write!(
            f,
            "{} {:<16} metric={:.3e} bound={:.1e} [{budget}] {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.metric,
            self.bound,
            self.detail
        )
    }
}

type CheckFn = fn(&QuadratureSpec, u64) -> Result<Outcome>;

struct Outcome {
    metric: f64,
    bound: f64,
    ok: bool,
    detail: String,
}

impl Outcome {
    fn below(metric: f64, bound: f64, detail: String) -> Self {
        Self {
            metric,
            bound,
            ok: metric <= bound,
            detail,
        }
    }
}

const CHECKS: &[(&str, Option<f64>, CheckFn)] = &[
    ("heisenberg", Some(10.0), check_heisenberg),
    ("m2-power-law", Some(60.0), check_m2_power_law),
    ("product-szego", Some(5.0), check_product_szego),
    ("m3-cross", Some(120.0), check_m3_cross),
    ("classification", Some(5.0), check_classification),
    ("heat-residual", Some(60.0), check_heat_residual),
    ("heat-bridge", Some(30.0), check_heat_bridge),
    ("mass-identity", Some(60.0), check_mass_identity),
    ("homogeneity", None, check_homogeneity),
    ("linear-algebra", Some(10.0), check_linear_algebra),
];

/// Names accepted by [`run_check`], in suite order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs one check. Library errors inside the check become a failed report.
pub fn run_check(name: &str, spec: &QuadratureSpec, seed: u64) -> Result<CheckReport> {
    let &(name, budget, f) = CHECKS
        .iter()
        .find(|c| c.0 == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown check {name:?}")))?;
    spec.validate()?;
    let start = Instant::now();
    let out = f(spec, seed);
    let seconds = start.elapsed().as_secs_f64();
    let in_budget = budget.is_none_or(|b| seconds <= b);
    Ok(match out {
        Ok(o) => CheckReport {
            name,
            passed: o.ok && in_budget,
            metric: o.metric,
            bound: o.bound,
            seconds,
            budget_seconds: budget,
            detail: if in_budget { o.detail } else { format!("{} (over time budget)", o.detail) },
        },
        Err(e) => CheckReport {
            name,
            passed: false,
            metric: f64::NAN,
            bound: f64::NAN,
            seconds,
            budget_seconds: budget,
            detail: format!("error: {e}"),
        },
    })
}

/// `"all"` or a comma-separated list of check names.
pub fn run_suite(suite: &str, spec: &QuadratureSpec, seed: u64) -> Result<Vec<CheckReport>> {
    let names: Vec<&str> = if suite.trim() == "all" {
        check_names()
    } else {
        suite.split(',').map(str::trim).collect()
    };
    for n in &names {
        if !CHECKS.iter().any(|c| c.0 == *n) {
            return Err(Error::InvalidArgument(format!(
                "unknown check {n:?}; expected one of {}",
                check_names().join(", ")
            )));
        }
    }
    names.iter().map(|n| run_check(n, spec, seed)).collect()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Uniform direction in `ℂⁿ` scaled to length `r`.
fn random_z(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n).map(|_| c(gauss(rng), gauss(rng))).collect();
    let norm = v.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|w| w * (r / norm)).collect()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

/// `m` random Hermitian `n × n` matrices with standard normal entries.
pub fn random_quadric(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QuadricForm {
    let mats = (0..m)
        .map(|_| {
            let mut a = CMatrix::zeros(n, n);
            for i in 0..n {
                a[(i, i)] = c(gauss(rng), 0.0);
                for j in i + 1..n {
                    let w = c(gauss(rng), gauss(rng)) * std::f64::consts::FRAC_1_SQRT_2;
                    a[(i, j)] = w;
                    a[(j, i)] = w.conj();
                }
            }
            a
        })
        .collect();
    QuadricForm::new(mats).expect("constructed Hermitian")
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn check_heisenberg(spec: &QuadratureSpec, seed: u64) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in 1..=3 {
        let q = Preset::Heisenberg(n).quadric();
        let ev = KernelEvaluator::new(&q, 0, spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x4e00 + n as u64));
        for _ in 0..10 {
            let r = rng.gen_range(0.2..2.0);
            let z = random_z(&mut rng, n, r);
            let t = rng.gen_range(-2.0..2.0);
            let v = ev.green(&EvalPoint::functions(z.clone(), vec![t]))?.require_converged(spec.rel_tol)?;
            let exact = heisenberg_n(n, false, &z, t)?;
            worst = worst.max(rel(v.scalar(), exact));
            count += 1;
        }
    }
    Ok(Outcome::below(worst, 1e-6, format!("{count} points, n = 1..3, max relative error")))
}

fn check_m2_power_law(spec: &QuadratureSpec, seed: u64) -> Result<Outcome> {
    let q = Preset::M2.quadric();
    let ev = KernelEvaluator::new(&q, 0, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3232);
    let pts: Vec<EvalPoint> = (0..12)
        .map(|_| {
            let r = rng.gen_range(0.3..1.5);
            let z = random_z(&mut rng, 2, r);
            let t = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            EvalPoint::functions(z, t)
        })
        .collect();
    let fits: Vec<(Complex64, f64)> = pts
        .par_iter()
        .map(|p| {
            let v = ev.green(p)?.require_converged(spec.rel_tol)?;
            let r2: f64 = p.z.iter().map(|w| w.norm_sqr()).sum();
            let d = (r2 * r2 + p.t[0] * p.t[0] + p.t[1] * p.t[1]).powf(1.5);
            Ok((v.scalar() * d, v.abs_error.values().cloned().fold(0.0, f64::max) * d))
        })
        .collect::<Result<_>>()?;
    let mean = fits.iter().map(|f| f.0).sum::<Complex64>() / fits.len() as f64;
    let spread = fits.iter().map(|f| (f.0 - mean).norm()).fold(0.0, f64::max) / mean.norm();
    let err = fits.iter().map(|f| f.1).fold(0.0, f64::max);
    Ok(Outcome::below(
        spread,
        1e-4,
        format!("{} points, C = {:.12e} ± {err:.1e}", fits.len(), mean.re),
    ))
}

fn check_product_szego(spec: &QuadratureSpec, seed: u64) -> Result<Outcome> {
    let q = Preset::ProductHeisenberg(vec![1, 1]).quadric();
    // the display is the function-level kernel S_∅, supported on the third quadrant
    let ev = KernelEvaluator::new(&q, 0, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let z = [
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        ];
        let t = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let v = ev
            .szego(&EvalPoint::functions(z.to_vec(), t.to_vec()))?
            .require_converged(spec.rel_tol)?;
        worst = worst.max(rel(v.scalar(), product_heisenberg_szego(&z, &t)?));
    }
    Ok(Outcome::below(worst, 1e-8, "10 points, max relative error".into()))
}

fn check_m3_cross(spec: &QuadratureSpec, seed: u64) -> Result<Outcome> {
    let q = Preset::M3.quadric();
    let ev = KernelEvaluator::new(&q, 0, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3333);
    let pts: Vec<([Complex64; 2], [f64; 2])> = (0..5)
        .map(|_| {
            let r = rng.gen_range(0.4..1.2);
            let z = random_z(&mut rng, 2, r);
            ([z[0], z[1]], [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        })
        .collect();
    let errs: Vec<f64> = pts
        .par_iter()
        .map(|(z, t)| {
            let g = ev
                .green(&EvalPoint::functions(z.to_vec(), t.to_vec()))?
                .require_converged(spec.rel_tol)?;
            let m = m3_corollary(z, t, spec.rel_tol)?.require("M3 corollary", spec.rel_tol, 0.0)?;
            Ok(rel(g.scalar(), m.value))
        })
        .collect::<Result<_>>()?;
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome::below(worst, 1e-5, "5 points, max relative disagreement".into()))
}

fn check_classification(spec: &QuadratureSpec, _seed: u64) -> Result<Outcome> {
    let sampler = SphereSampler {
        seed: spec.seed,
        zero_tol: spec.zero_tol,
        ..SphereSampler::default()
    };
    type Row = (Preset, &'static [Signature], [bool; 3], Option<[bool; 3]>);
    let table: [Row; 3] = [
        (Preset::M1, &[(2, 0), (1, 0), (1, 1), (0, 1), (0, 2)], [false; 3], None),
        (Preset::M2, &[(1, 1)], [true, false, true], Some([true, false, true])),
        (Preset::M3, &[(1, 0), (1, 1), (0, 1)], [true, false, true], Some([false; 3])),
    ];
    let mut mismatches = Vec::new();
    for (p, sigs, solv, hypo) in table {
        let q = p.quadric();
        let want: BTreeSet<Signature> = sigs.iter().cloned().collect();
        let got = signature_set(&q, &sampler);
        if got != want {
            mismatches.push(format!("{p}: signatures {got:?}"));
        }
        for degree in 0..=2 {
            let d = classify_degree(&q, degree, &sampler);
            if d.solvable != solv[degree] {
                mismatches.push(format!("{p} q={degree}: solvable = {}", d.solvable));
            }
            if let Some(h) = hypo {
                if d.hypoelliptic != h[degree] {
                    mismatches.push(format!("{p} q={degree}: hypoelliptic = {}", d.hypoelliptic));
                }
            }
        }
    }
    let detail = if mismatches.is_empty() {
        "M1, M2, M3 signature sets and degree table".to_string()
    } else {
        mismatches.join("; ")
    };
    Ok(Outcome::below(mismatches.len() as f64, 0.0, detail))
}

fn check_heat_residual(spec: &QuadratureSpec, _seed: u64) -> Result<Outcome> {
    let cases: Vec<(Preset, Vec<Vec<f64>>)> = vec![
        (
            Preset::Heisenberg(1),
            vec![vec![1.0], vec![-1.0], vec![0.5], vec![-2.0]],
        ),
        (
            Preset::M2,
            (0..4)
                .map(|k| {
                    let th = 0.3 + k as f64 * FRAC_PI_2;
                    vec![th.cos(), th.sin()]
                })
                .collect(),
        ),
    ];
    let s_values = [0.25, 0.5, 1.0];
    let mut jobs = Vec::new();
    for (p, lambdas) in &cases {
        let q = p.quadric();
        for lambda in lambdas {
            for degree in 0..=q.n() {
                for l in MultiIndex::all(q.n(), degree) {
                    jobs.push((p.clone(), q.clone(), lambda.clone(), l));
                }
            }
        }
    }
    let rows: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|(_, q, lambda, l)| {
            let ppa = if q.n() == 1 { 9 } else { 7 };
            let grid = |h| GridSpec {
                extent: 2.0,
                points_per_axis: ppa,
                h,
            };
            let fine = box_transformed_residual(q, l, lambda, &grid(1e-3), &s_values, spec.zero_tol)?;
            let coarse = box_transformed_residual(q, l, lambda, &grid(2e-3), &s_values, spec.zero_tol)?;
            Ok((fine, coarse / fine))
        })
        .collect::<Result<_>>()?;
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let min_ratio = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        metric: worst,
        bound: 5e-5,
        ok: worst <= 5e-5 && min_ratio >= 3.5,
        detail: format!("{} (λ, L) cases, min h-halving ratio {min_ratio:.3}", rows.len()),
    })
}

fn check_heat_bridge(spec: &QuadratureSpec, seed: u64) -> Result<Outcome> {
    let q = Preset::Heisenberg(2).quadric();
    let l = MultiIndex::new(vec![1], 2)?;
    let alpha = [1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb41d);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let r = rng.gen_range(0.3..1.5);
        let z = random_z(&mut rng, 2, r);
        let t = [rng.gen_range(-1.0..1.0)];
        let heat = heat_bridge(&q, &l, &alpha, &z, &t, 1e-10, spec.zero_tol)?.require("heat side", 1e-10, 0.0)?;
        let radial = radial_bridge(&q, &l, &alpha, &z, &t, 1e-12, spec.zero_tol)?.require("radial side", 1e-12, 0.0)?;
        worst = worst.max(rel(heat.value, radial.value));
    }
    Ok(Outcome::below(worst, 1e-8, "ℍ², L = {1}, α = +1, 5 points".into()))
}

fn check_mass_identity(spec: &QuadratureSpec, seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3a55);
    let opts = DeOptions::with_tol(1e-11, 0.0);
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for i in 0..20 {
        let n = 1 + i % 3;
        let m = 1 + (i / 3) % 2;
        let q = random_quadric(&mut rng, n, m);
        let degree = rng.gen_range(0..=n);
        let all = MultiIndex::all(n, degree);
        let l = all[rng.gen_range(0..all.len())].clone();
        let s = rng.gen_range(0.1..3.0);
        let scale = rng.gen_range(0.2..3.0);
        let dir: Vec<f64> = (0..m).map(|_| gauss(&mut rng)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lambda: Vec<f64> = dir.iter().map(|x| x * scale / norm).collect();
        let hk = HeatKernel::new(&q, &l, &lambda, spec.zero_tol)?;
        let e = hk.mass_numeric(s, &opts)?.require("mass cubature", opts.rel_tol, 0.0)?;
        let err = (e.value - hk.mass(s)).abs() / hk.mass(s);
        if err > worst {
            worst = err;
            detail = format!("20 samples, worst at n={n} m={m} L={l} s={s:.3}");
        }
    }
    Ok(Outcome::below(worst, 1e-8, detail))
}

fn coefficient_gap(a: &FormCoefficients, b: &FormCoefficients, factor: f64) -> f64 {
    let scale = b.coeffs.values().map(|v| v.norm()).fold(0.0, f64::max) * factor;
    a.coeffs
        .iter()
        .map(|(k, v)| (v - b.coeffs[k] * factor).norm())
        .fold(0.0, f64::max)
        / scale
}

fn check_homogeneity(spec: &QuadratureSpec, _seed: u64) -> Result<Outcome> {
    let mut jobs = Vec::new();
    for p in Preset::catalog() {
        let n = p.quadric().n();
        for degree in 0..=n {
            jobs.push((p.clone(), degree));
        }
    }
    let bound = 100.0 * spec.rel_tol;
    let rows: Vec<(f64, String)> = jobs
        .par_iter()
        .map(|(p, degree)| {
            let q = p.quadric();
            let (n, m) = (q.n(), q.m());
            let ev = KernelEvaluator::new(&q, *degree, spec)?;
            let z: Vec<Complex64> = (0..n).map(|j| c(0.5 - 0.2 * j as f64, 0.3 + 0.1 * j as f64)).collect();
            let t: Vec<f64> = (0..m).map(|i| 0.4 - 0.7 * i as f64).collect();
            let k = MultiIndex::all(n, *degree)[0].clone();
            let base = EvalPoint::new(z, t, k);
            let mut worst: f64 = 0.0;
            let n_pow = -2.0 * (n + m - 1) as f64;
            let s_pow = -2.0 * (n + m) as f64;
            let g0 = ev.green(&base)?.require_converged(spec.rel_tol)?;
            let s0 = if ev.has_szego() {
                Some(ev.szego(&base)?.require_converged(spec.rel_tol)?)
            } else {
                None
            };
            for delta in [0.5, 2.0] {
                let p2 = base.dilated(delta);
                let g = ev.green(&p2)?.require_converged(spec.rel_tol)?;
                worst = worst.max(coefficient_gap(&g, &g0, delta.powf(n_pow)));
                if let Some(s0) = &s0 {
                    let s = ev.szego(&p2)?.require_converged(spec.rel_tol)?;
                    worst = worst.max(coefficient_gap(&s, s0, delta.powf(s_pow)));
                }
            }
            Ok((worst, format!("{p} q={degree}")))
        })
        .collect::<Result<_>>()?;
    let (worst, at) = rows
        .into_iter()
        .fold((0.0, String::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok(Outcome::below(
        worst,
        bound,
        format!("{} (preset, q) pairs, δ ∈ {{1/2, 2}}, worst at {at}", jobs.len()),
    ))
}

fn check_linear_algebra(spec: &QuadratureSpec, seed: u64) -> Result<Outcome> {
    let worst: f64 = (0..1000u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x1a00_0000 + i));
            let n = 1 + (i % 4) as usize;
            let m = 1 + ((i / 4) % 3) as usize;
            let q = random_quadric(&mut rng, n, m);
            let dir: Vec<f64> = (0..m).map(|_| gauss(&mut rng)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let alpha: Vec<f64> = dir.iter().map(|x| x / norm).collect();
            linear_algebra_defect(&q, &alpha, spec.zero_tol)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Outcome::below(
        worst,
        1e-10,
        "1000 samples: unitarity, diagonalization, Cauchy–Binet, minor duality".into(),
    ))
}

/// Largest violation of the eigenbasis and minor identities at one `α`.
pub fn linear_algebra_defect(q: &QuadricForm, alpha: &[f64], zero_tol: f64) -> Result<f64> {
    let n = q.n();
    let s = q.spectral(alpha, zero_tol)?;
    let u = s.u();
    let a = q.assemble_directional(alpha)?;
    let mut worst: f64 = 0.0;
    let gram = u.adjoint() * u;
    let diag = u.adjoint() * &a * u;
    let scale = s.scale().max(1.0);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - id).norm());
            let d = if i == j { s.mu()[i] } else { 0.0 };
            worst = worst.max((diag[(i, j)] - d).norm() / scale);
        }
    }
    for degree in 0..=n {
        let all = MultiIndex::all(n, degree);
        for k in &all {
            let row: f64 = all
                .iter()
                .map(|l| s.minor_coefficient(k, l).map(|v| v.norm_sqr()))
                .sum::<Result<f64>>()?;
            worst = worst.max((row - 1.0).abs());
            for kp in &all {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in &all {
                    acc += s.minor_coefficient(k, l)? * s.inverse_minor(l, kp)?;
                }
                let id = if k == kp { 1.0 } else { 0.0 };
                worst = worst.max((acc - id).norm());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_check_rejected() {
        let spec = QuadratureSpec::default();
        assert!(run_check("nope", &spec, 0).is_err());
        assert!(run_suite("classification,nope", &spec, 0).is_err());
    }

    #[test]
    fn cheap_checks_pass() {
        let spec = QuadratureSpec::default();
        let r = run_suite("classification,linear-algebra", &spec, 0).unwrap();
        for rep in r {
            assert!(rep.passed, "{rep}");
        }
    }

    #[test]
    fn report_line_format() {
        let r = CheckReport {
            name: "heisenberg",
            passed: true,
            metric: 1.5e-9,
            bound: 1e-6,
            seconds: 0.5,
            budget_seconds: Some(10.0),
            detail: "x".into(),
        };
        let s = r.to_string();
        assert!(s.starts_with("PASS heisenberg"));
        assert!(s.contains("metric=1.500e-9"));
    }

    #[test]
    fn random_quadric_is_hermitian_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(random_quadric(&mut a, 3, 2), random_quadric(&mut b, 3, 2));
    }
}
