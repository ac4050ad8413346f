//! Green and Szegő kernels of the Kohn Laplacian as `(0,q)`-form
//! coefficients in the fixed `dz̄^{K'}` basis.
//!
//! For each direction `α` the integrand is expanded in the eigen-covectors
//! `dZ̄(z, α)^L`, integrated in `r` (see [`radial`]), and converted back to
//! the fixed basis with `C_{K,L}(α)·M_{K',L}(α)` before the sphere
//! integral, so every `α`-slice contributes to the same coefficients.

pub mod radial;
mod sphere;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;

pub use radial::{a_alpha, integrate_r, RadialIntegrand};
pub use sphere::{circle_breaks, integrate_sphere};

use crate::classifier::{gamma_report, in_gamma, SphereSampler};
use crate::error::{Error, Result};
use crate::levi_spectral::{MultiIndex, QuadricForm, DEFAULT_ZERO_TOL};
use crate::quadrature::{DeOptions, Estimate};

/// How the sphere of directions is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SphereRule {
    /// `m = 1`: the two points `±1`.
    TwoPoint,
    /// `m = 2`: adaptive panels in the angle.
    AdaptiveAngles,
    /// `m ≥ 3`: nested adaptive sweeps in hyperspherical angles.
    ProductSpherical,
}

impl SphereRule {
    pub fn for_codimension(m: usize) -> Self {
        match m {
            1 => SphereRule::TwoPoint,
            2 => SphereRule::AdaptiveAngles,
            _ => SphereRule::ProductSpherical,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SphereRule::TwoPoint => "TWO_POINT",
            SphereRule::AdaptiveAngles => "ADAPTIVE_ANGLES",
            SphereRule::ProductSpherical => "PRODUCT_SPHERICAL",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TWO_POINT" => Some(SphereRule::TwoPoint),
            "ADAPTIVE_ANGLES" => Some(SphereRule::AdaptiveAngles),
            "PRODUCT_SPHERICAL" => Some(SphereRule::ProductSpherical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Panel budget of each adaptive angular sweep.
    pub max_panels: usize,
    /// `None` picks the rule from the codimension.
    pub sphere_rule: Option<SphereRule>,
    /// Relative eigenvalue gap (and eigenvalue size) below which an angular
    /// panel is split at the local minimum.
    pub crossing_split_tol: f64,
    pub zero_tol: f64,
    /// Finest double-exponential level of the radial integrals.
    pub radial_max_level: usize,
    /// Seed of the sphere sampler used to decide which `Γ_L` are nonempty.
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_panels: 2000,
            sphere_rule: None,
            crossing_split_tol: 1e-2,
            zero_tol: DEFAULT_ZERO_TOL,
            radial_max_level: 10,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) || !(self.crossing_split_tol >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_panels == 0 || self.radial_max_level < 3 {
            return Err(Error::InvalidArgument("quadrature budgets too small".into()));
        }
        Ok(())
    }

    fn radial_opts(&self) -> DeOptions {
        DeOptions {
            rel_tol: 0.1 * self.rel_tol,
            abs_tol: 0.0,
            max_level: self.radial_max_level,
        }
    }

    fn sampler(&self) -> SphereSampler {
        SphereSampler {
            seed: self.seed,
            zero_tol: self.zero_tol,
            ..SphereSampler::default()
        }
    }
}

/// A point `(z, t)` of the group and the input component `dz̄^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub z: Vec<Complex64>,
    pub t: Vec<f64>,
    pub k: MultiIndex,
}

impl EvalPoint {
    pub fn new(z: Vec<Complex64>, t: Vec<f64>, k: MultiIndex) -> Self {
        Self { z, t, k }
    }

    pub fn functions(z: Vec<Complex64>, t: Vec<f64>) -> Self {
        Self::new(z, t, MultiIndex::empty())
    }

    /// `(δz, δ²t)`.
    pub fn dilated(&self, delta: f64) -> Self {
        Self {
            z: self.z.iter().map(|w| w * delta).collect(),
            t: self.t.iter().map(|x| x * delta * delta).collect(),
            k: self.k.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formula {
    NNoSzego,
    NWithSzego,
    Szego,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formula::NNoSzego => "N_NO_SZEGO",
            Formula::NWithSzego => "N_WITH_SZEGO",
            Formula::Szego => "SZEGO",
        })
    }
}

/// Coefficients of a `(0, q)`-current in the fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FormCoefficients {
    pub coeffs: BTreeMap<MultiIndex, Complex64>,
    pub abs_error: BTreeMap<MultiIndex, f64>,
    pub formula_used: Formula,
    /// False when some quadrature stopped on its budget; the values are
    /// then the best available estimate.
    pub converged: bool,
}

impl FormCoefficients {
    /// The only coefficient of a function (`q = 0`) or top-degree form.
    pub fn scalar(&self) -> Complex64 {
        *self.coeffs.values().next().expect("nonempty coefficient map")
    }

    pub fn require_converged(self, rel_tol: f64) -> Result<Self> {
        if self.converged {
            return Ok(self);
        }
        let err = self.abs_error.values().cloned().fold(0.0, f64::max);
        let mag = self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        Err(Error::ToleranceNotMet {
            context: format!("{} kernel", self.formula_used),
            abs_error: err,
            target: rel_tol * mag,
        })
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `4ⁿ (n+m−2)! / (2 (2π)^{m+n})`.
pub fn green_constant(n: usize, m: usize) -> f64 {
    4f64.powi(n as i32) * factorial(n + m - 2) / (2.0 * (2.0 * PI).powi((m + n) as i32))
}

/// `4ⁿ (n+m−1)! / (2π)^{m+n}`.
pub fn szego_constant(n: usize, m: usize) -> f64 {
    4f64.powi(n as i32) * factorial(n + m - 1) / (2.0 * PI).powi((m + n) as i32)
}

/// Evaluates kernels of one quadric in one form degree. Construction
/// decides which `Γ_L` are nonempty; evaluation is then per point.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    q: QuadricForm,
    degree: usize,
    spec: QuadratureSpec,
    indices: Vec<MultiIndex>,
    gamma_nonempty: Vec<bool>,
}

/// What one direction contributes: a value per output index, the summed
/// radial error, and whether `α` lay in some `Γ_L`.
#[derive(Debug, Clone)]
pub struct SliceValue {
    pub values: Vec<Complex64>,
    pub abs_error: f64,
    pub in_gamma: bool,
    pub converged: bool,
}

impl KernelEvaluator {
    pub fn new(q: &QuadricForm, degree: usize, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        if degree > q.n() {
            return Err(Error::InvalidArgument(format!(
                "form degree {degree} exceeds n = {}",
                q.n()
            )));
        }
        let indices = MultiIndex::all(q.n(), degree);
        let sampler = spec.sampler();
        let gamma_nonempty = indices
            .iter()
            .map(|l| gamma_report(q, l, &sampler).nonempty_positive_measure)
            .collect();
        Ok(Self {
            q: q.clone(),
            degree,
            spec: spec.clone(),
            indices,
            gamma_nonempty,
        })
    }

    pub fn quadric(&self) -> &QuadricForm {
        &self.q
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// `I_q`, the output indices in coefficient order.
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Whether some `Γ_L` with `|L| = q` has positive measure.
    pub fn has_szego(&self) -> bool {
        self.gamma_nonempty.iter().any(|&b| b)
    }

    fn check_point(&self, p: &EvalPoint) -> Result<()> {
        let (n, m) = (self.q.n(), self.q.m());
        if p.z.len() != n {
            return Err(Error::dim("z dimension", n, p.z.len()));
        }
        if p.t.len() != m {
            return Err(Error::dim("t dimension", m, p.t.len()));
        }
        if p.k.q() != self.degree {
            return Err(Error::dim("|K|", self.degree, p.k.q()));
        }
        if p.k.entries().last().is_some_and(|&e| e > n) {
            return Err(Error::InvalidMultiIndex {
                entries: p.k.entries().to_vec(),
                reason: format!("entries must lie in 1..={n}"),
            });
        }
        if p.z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite())
            || p.t.iter().any(|x| !x.is_finite())
        {
            return Err(Error::InvalidArgument("point must be finite".into()));
        }
        Ok(())
    }

    fn origin(p: &EvalPoint) -> (bool, bool) {
        let z_zero = p.z.iter().all(|w| w.norm_sqr() == 0.0);
        (z_zero, z_zero && p.t.iter().all(|&x| x == 0.0))
    }

    /// The Green integrand at one direction, constant included.
    pub fn green_slice(&self, alpha: &[f64], p: &EvalPoint) -> Result<SliceValue> {
        let s = self.q.spectral(alpha, self.spec.zero_tol)?;
        let z_alpha = s.eigen_coordinates(&p.z)?;
        let c = green_constant(self.q.n(), self.q.m());
        let opts = self.spec.radial_opts();
        let mut out = SliceValue {
            values: vec![Complex64::new(0.0, 0.0); self.indices.len()],
            abs_error: 0.0,
            in_gamma: false,
            converged: true,
        };
        for l in &self.indices {
            let coef = s.minor_coefficient(&p.k, l)?;
            if coef.norm() == 0.0 {
                continue;
            }
            let f = RadialIntegrand::new(&s, self.q.m(), l, &z_alpha, &p.t);
            out.in_gamma |= f.subtracted();
            let est = f.integrate(&opts);
            out.converged &= est.converged;
            let mut max_minor: f64 = 0.0;
            for (slot, kp) in self.indices.iter().enumerate() {
                let minor = s.inverse_minor(l, kp)?;
                max_minor = max_minor.max(minor.norm());
                out.values[slot] += coef * minor * est.value * c;
            }
            out.abs_error += coef.norm() * max_minor * est.abs_error * c;
        }
        Ok(out)
    }

    /// The Szegő integrand at one direction, constant included.
    pub fn szego_slice(&self, alpha: &[f64], p: &EvalPoint) -> Result<SliceValue> {
        let s = self.q.spectral(alpha, self.spec.zero_tol)?;
        let z_alpha = s.eigen_coordinates(&p.z)?;
        let (n, m) = (self.q.n(), self.q.m());
        let c = szego_constant(n, m);
        let mut out = SliceValue {
            values: vec![Complex64::new(0.0, 0.0); self.indices.len()],
            abs_error: 0.0,
            in_gamma: false,
            converged: true,
        };
        for l in &self.indices {
            if !in_gamma(&s, l) {
                continue;
            }
            out.in_gamma = true;
            let coef = s.minor_coefficient(&p.k, l)?;
            let beta: f64 = alpha.iter().zip(&p.t).map(|(a, t)| a * t).sum();
            let a0: f64 = (0..n).map(|j| s.mu()[j].abs() * z_alpha[j].norm_sqr()).sum();
            let prod: f64 = s.mu().iter().map(|x| x.abs()).product();
            let kernel = Complex64::new(a0, -beta).powi(-((n + m) as i32)) * prod * c;
            for (slot, kp) in self.indices.iter().enumerate() {
                out.values[slot] += coef * s.inverse_minor(l, kp)? * kernel;
            }
        }
        Ok(out)
    }

    fn integrate<S>(&self, slice: S) -> Result<(Vec<Complex64>, f64, bool, bool)>
    where
        S: Fn(&[f64]) -> Result<SliceValue> + Sync,
    {
        let hit = AtomicBool::new(false);
        let inner_ok = AtomicBool::new(true);
        let failure = Mutex::new(None::<Error>);
        let k = self.indices.len();
        let g = |alpha: &[f64]| -> Vec<Complex64> {
            match slice(alpha) {
                Ok(v) => {
                    if v.in_gamma {
                        hit.store(true, Ordering::Relaxed);
                    }
                    if !v.converged {
                        inner_ok.store(false, Ordering::Relaxed);
                    }
                    let mut out = v.values;
                    out.push(Complex64::new(v.abs_error, 0.0));
                    out
                }
                Err(e) => {
                    failure.lock().expect("poisoned").get_or_insert(e);
                    vec![Complex64::new(0.0, 0.0); k + 1]
                }
            }
        };
        let est = integrate_sphere(&g, &self.q, &self.spec)?;
        if let Some(e) = failure.into_inner().expect("poisoned") {
            return Err(e);
        }
        let mut values = est.value;
        let radial_err = values.pop().map(|e| e.re.abs()).unwrap_or(0.0);
        let converged = est.converged && inner_ok.into_inner();
        Ok((values, est.abs_error + radial_err, hit.into_inner(), converged))
    }

    fn assemble(&self, values: Vec<Complex64>, err: f64, formula: Formula, converged: bool) -> FormCoefficients {
        let mut coeffs = BTreeMap::new();
        let mut abs_error = BTreeMap::new();
        for (kp, v) in self.indices.iter().zip(values) {
            coeffs.insert(kp.clone(), v);
            abs_error.insert(kp.clone(), err);
        }
        FormCoefficients {
            coeffs,
            abs_error,
            formula_used: formula,
            converged,
        }
    }

    /// Fundamental solution (no `Γ_L` of positive measure) or canonical
    /// relative fundamental solution (otherwise).
    pub fn green(&self, p: &EvalPoint) -> Result<FormCoefficients> {
        self.check_point(p)?;
        match Self::origin(p) {
            (_, true) => return Err(Error::Domain("kernel evaluated at the origin".into())),
            (true, false) => {
                return Err(Error::Domain(
                    "Green kernel r-integral is not absolutely convergent at z = 0".into(),
                ))
            }
            _ => {}
        }
        let (values, err, hit, converged) = self.integrate(|a| self.green_slice(a, p))?;
        let formula = if self.has_szego() || hit {
            Formula::NWithSzego
        } else {
            Formula::NNoSzego
        };
        Ok(self.assemble(values, err, formula, converged))
    }

    /// Szegő projection kernel; identically zero when every `Γ_L` is empty.
    pub fn szego(&self, p: &EvalPoint) -> Result<FormCoefficients> {
        self.check_point(p)?;
        if Self::origin(p).1 {
            return Err(Error::Domain("kernel evaluated at the origin".into()));
        }
        let (values, err, _, converged) = self.integrate(|a| self.szego_slice(a, p))?;
        Ok(self.assemble(values, err, Formula::Szego, converged))
    }

    /// The radial integral for one `(α, L)`, without the constant.
    pub fn radial(&self, alpha: &[f64], l: &MultiIndex, z: &[Complex64], t: &[f64]) -> Result<Estimate<Complex64>> {
        let s = self.q.spectral(alpha, self.spec.zero_tol)?;
        let z_alpha = s.eigen_coordinates(z)?;
        let f = RadialIntegrand::new(&s, self.q.m(), l, &z_alpha, t);
        Ok(f.integrate(&self.spec.radial_opts()))
    }
}

pub fn eval_green(q: &QuadricForm, p: &EvalPoint, spec: &QuadratureSpec) -> Result<FormCoefficients> {
    KernelEvaluator::new(q, p.k.q(), spec)?.green(p)
}

pub fn eval_szego(q: &QuadricForm, p: &EvalPoint, spec: &QuadratureSpec) -> Result<FormCoefficients> {
    KernelEvaluator::new(q, p.k.q(), spec)?.szego(p)
}

/// Which kernel a batch evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Green,
    Szego,
}

/// Evaluates many points in parallel; results are in input order and do
/// not depend on the number of threads.
pub fn eval_batch(
    q: &QuadricForm,
    kind: KernelKind,
    points: &[EvalPoint],
    spec: &QuadratureSpec,
) -> Result<Vec<Result<FormCoefficients>>> {
    let mut degrees: Vec<usize> = points.iter().map(|p| p.k.q()).collect();
    degrees.sort_unstable();
    degrees.dedup();
    let evaluators = degrees
        .iter()
        .map(|&d| KernelEvaluator::new(q, d, spec).map(|e| (d, e)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(points
        .par_iter()
        .map(|p| {
            let ev = &evaluators[&p.k.q()];
            match kind {
                KernelKind::Green => ev.green(p),
                KernelKind::Szego => ev.szego(p),
            }
        })
        .collect())
}
