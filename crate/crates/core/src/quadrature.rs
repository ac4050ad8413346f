//! One-dimensional integrators: tanh-sinh on `(0, 1)`, exp-sinh on
//! `(0, ∞)` and globally adaptive Gauss–Kronrod (7, 15) with mandatory
//! breakpoints.
//!
//! All three are generic over [`QuadValue`], so a single pass can integrate
//! a scalar, a complex number or a vector of complex coefficients.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A value that can be accumulated by a quadrature rule.
pub trait QuadValue: Clone + Send + Sync {
    /// Same shape, all zeros.
    fn zeroed(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    /// Max-norm of `self - other`.
    fn max_abs_diff(&self, other: &Self) -> f64;
    /// Max-norm.
    fn max_abs(&self) -> f64;
}

impl QuadValue for f64 {
    fn zeroed(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += w * other;
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zeroed(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn max_abs(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for Vec<Complex64> {
    fn zeroed(&self) -> Self {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.iter_mut().zip(other) {
            *a += b * w;
        }
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }
    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |acc, a| acc.max(a.norm()))
    }
}

/// Result of a quadrature together with its error estimate.
#[derive(Debug, Clone)]
pub struct Estimate<T> {
    pub value: T,
    pub abs_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: QuadValue> Estimate<T> {
    /// Turns an unconverged estimate into [`Error::ToleranceNotMet`].
    pub fn require(self, context: &str, rel_tol: f64, abs_tol: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::ToleranceNotMet {
                context: context.to_string(),
                abs_error: self.abs_error,
                target: abs_tol.max(rel_tol * self.value.max_abs()),
            })
        }
    }
}

/// Options for the double-exponential rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Finest level; level `l` uses step `2^{-l}`.
    pub max_level: usize,
}

impl Default for DeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_level: 10,
        }
    }
}

impl DeOptions {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }
}

/// Must stay clear of the endpoints: `1 - x` is still above `1e-260` here.
const TANH_SINH_T_MAX: f64 = 6.0;
/// Nodes of exp-sinh span roughly `[1e-200, 1e200]`.
const EXP_SINH_T_MAX: f64 = 6.37;
const MIN_LEVEL: usize = 3;

/// Drives the level refinement shared by both double-exponential rules.
/// `node(t)` returns `(weight without h, value)` or `None` to skip.
fn de_levels<T, N>(t_max: f64, opts: &DeOptions, node: N) -> Estimate<T>
where
    T: QuadValue,
    N: Fn(f64) -> Option<(f64, T)>,
{
    let mut raw: Option<T> = None;
    let mut evaluations = 0usize;
    let mut accumulate = |raw: &mut Option<T>, t: f64| {
        if let Some((w, v)) = node(t) {
            evaluations += 1;
            match raw {
                Some(acc) => acc.add_scaled(&v, w),
                None => {
                    let mut acc = v.zeroed();
                    acc.add_scaled(&v, w);
                    *raw = Some(acc);
                }
            }
        }
    };

    let h0 = 1.0;
    let k_max = (t_max / h0).floor() as i64;
    for k in -k_max..=k_max {
        accumulate(&mut raw, k as f64 * h0);
    }
    let mut prev: Option<T> = raw.as_ref().map(|r| {
        let mut s = r.zeroed();
        s.add_scaled(r, h0);
        s
    });
    let mut h = h0;
    let mut abs_error = f64::INFINITY;
    let mut converged = false;
    for level in 1..=opts.max_level {
        h *= 0.5;
        let k_max = (t_max / h).floor() as i64;
        let mut k = -k_max;
        if k % 2 == 0 {
            k += 1;
        }
        while k <= k_max {
            accumulate(&mut raw, k as f64 * h);
            k += 2;
        }
        let cur = raw.as_ref().map(|r| {
            let mut s = r.zeroed();
            s.add_scaled(r, h);
            s
        });
        if let (Some(c), Some(p)) = (&cur, &prev) {
            abs_error = c.max_abs_diff(p);
            let target = opts.abs_tol.max(opts.rel_tol * c.max_abs());
            if level >= MIN_LEVEL && abs_error <= target {
                converged = true;
                prev = cur;
                break;
            }
        }
        prev = cur;
    }
    match prev {
        Some(value) => Estimate {
            value,
            abs_error,
            evaluations,
            converged,
        },
        None => panic!("double-exponential rule evaluated no nodes"),
    }
}

/// Tanh-sinh quadrature of `∫₀¹ f` where `f(x, 1 − x)` receives both the
/// node and its complement, so integrands singular at `x = 1` can be written
/// without cancellation. Endpoints are never evaluated.
pub fn tanh_sinh<T, F>(f: F, opts: &DeOptions) -> Estimate<T>
where
    T: QuadValue,
    F: Fn(f64, f64) -> T,
{
    de_levels(TANH_SINH_T_MAX, opts, |t| {
        let y = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * y.abs()).exp();
        let small = e / (1.0 + e);
        let large = 1.0 / (1.0 + e);
        let (x, c) = if t >= 0.0 { (large, small) } else { (small, large) };
        if small <= 0.0 {
            return None;
        }
        let w = std::f64::consts::PI * t.cosh() * x * c;
        if w == 0.0 {
            return None;
        }
        Some((w, f(x, c)))
    })
}

/// Tanh-sinh on a finite interval `(a, b)`; `f` receives the node and its
/// distances to both ends.
pub fn tanh_sinh_interval<T, F>(f: F, a: f64, b: f64, opts: &DeOptions) -> Estimate<T>
where
    T: QuadValue,
    F: Fn(f64, f64, f64) -> T,
{
    let len = b - a;
    let mut est = tanh_sinh(|x, c| f(a + len * x, len * x, len * c), opts);
    let mut v = est.value.zeroed();
    v.add_scaled(&est.value, len);
    est.value = v;
    est.abs_error *= len.abs();
    est
}

/// Exp-sinh quadrature of `∫₀^∞ f(x) dx` with nodes `x = scale·exp(π/2 sinh t)`.
pub fn exp_sinh<T, F>(f: F, scale: f64, opts: &DeOptions) -> Estimate<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    de_levels(EXP_SINH_T_MAX, opts, |t| {
        let x = scale * (FRAC_PI_2 * t.sinh()).exp();
        if x == 0.0 || !x.is_finite() {
            return None;
        }
        let w = FRAC_PI_2 * t.cosh() * x;
        Some((w, f(x)))
    })
}

/// Kronrod abscissae on `[-1, 1]` (non-negative half, descending).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Gauss weights for `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

#[derive(Debug, Clone)]
struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

/// The 15 Kronrod nodes of `[a, b]`, in the order used by [`gk_combine`].
fn gk_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [c; 15];
    for j in 0..7 {
        x[2 * j] = c - h * XGK[j];
        x[2 * j + 1] = c + h * XGK[j];
    }
    x
}

fn gk_combine<T: QuadValue>(a: f64, b: f64, fx: &[T]) -> Panel<T> {
    let h = 0.5 * (b - a);
    let centre = &fx[14];
    let mut kron = centre.zeroed();
    let mut gauss = centre.zeroed();
    kron.add_scaled(centre, WGK[7]);
    gauss.add_scaled(centre, WG[3]);
    let mut resabs = WGK[7] * centre.max_abs();
    for j in 0..7 {
        let (lo, hi) = (&fx[2 * j], &fx[2 * j + 1]);
        kron.add_scaled(lo, WGK[j]);
        kron.add_scaled(hi, WGK[j]);
        resabs += WGK[j] * (lo.max_abs() + hi.max_abs());
        if j % 2 == 1 {
            gauss.add_scaled(lo, WG[j / 2]);
            gauss.add_scaled(hi, WG[j / 2]);
        }
    }
    let mut mean = kron.zeroed();
    mean.add_scaled(&kron, 0.5);
    let mut resasc = WGK[7] * centre.max_abs_diff(&mean);
    for (j, w) in WGK.iter().enumerate().take(7) {
        resasc += w * (fx[2 * j].max_abs_diff(&mean) + fx[2 * j + 1].max_abs_diff(&mean));
    }
    let scale = h.abs();
    let err = rescale_error(kron.max_abs_diff(&gauss) * scale, resabs * scale, resasc * scale);
    let mut value = kron.zeroed();
    value.add_scaled(&kron, h);
    Panel {
        a,
        b,
        value,
        error: err,
    }
}

/// The QUADPACK error heuristic.
fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = err.abs();
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * resabs;
        if min_err > err {
            err = min_err;
        }
    }
    err
}

fn eval_panels<T, F>(f: &F, bounds: &[(f64, f64)]) -> Vec<Panel<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T + Sync,
{
    let nodes: Vec<f64> = bounds
        .iter()
        .flat_map(|&(a, b)| gk_nodes(a, b))
        .collect();
    let values: Vec<T> = nodes.par_iter().map(|&x| f(x)).collect();
    bounds
        .iter()
        .zip(values.chunks(15))
        .map(|(&(a, b), fx)| gk_combine(a, b, fx))
        .collect()
}

/// Globally adaptive Gauss–Kronrod over `[breaks[0], breaks.last()]`,
/// starting from the panels delimited by `breaks`, which are never merged.
/// Node evaluations are parallel; accumulation is in panel order, so the
/// result is independent of the thread count.
pub fn gauss_kronrod<T, F>(f: &F, breaks: &[f64], opts: &GkOptions) -> Estimate<T>
where
    T: QuadValue,
    F: Fn(f64) -> T + Sync,
{
    assert!(breaks.len() >= 2, "need at least one panel");
    let bounds: Vec<(f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    let mut panels = eval_panels(f, &bounds);
    let mut evaluations = 15 * panels.len();

    let total = |panels: &[Panel<T>]| {
        let mut v = panels[0].value.zeroed();
        let mut e = 0.0;
        for p in panels {
            v.add_scaled(&p.value, 1.0);
            e += p.error;
        }
        (v, e)
    };

    loop {
        let (value, error) = total(&panels);
        let target = opts.abs_tol.max(opts.rel_tol * value.max_abs());
        if error <= target || panels.len() >= opts.max_panels {
            return Estimate {
                value,
                abs_error: error,
                evaluations,
                converged: error <= target,
            };
        }
        // Bisect every panel whose error exceeds its share of the budget,
        // largest first, up to the panel budget.
        let share = target / panels.len() as f64;
        let mut order: Vec<usize> = (0..panels.len())
            .filter(|&i| panels[i].error > share)
            .collect();
        order.sort_by(|&i, &j| panels[j].error.total_cmp(&panels[i].error).then(i.cmp(&j)));
        let room = (opts.max_panels - panels.len()).max(1);
        order.truncate(room.min(64));
        let mut split: Vec<bool> = vec![false; panels.len()];
        let mut halves = Vec::with_capacity(2 * order.len());
        for &i in &order {
            let p = &panels[i];
            let mid = 0.5 * (p.a + p.b);
            if mid <= p.a || mid >= p.b {
                continue;
            }
            split[i] = true;
            halves.push((p.a, mid));
            halves.push((mid, p.b));
        }
        if halves.is_empty() {
            let (value, error) = total(&panels);
            return Estimate {
                value,
                abs_error: error,
                evaluations,
                converged: false,
            };
        }
        let fresh = eval_panels(f, &halves);
        evaluations += 15 * fresh.len();
        let mut fresh = fresh.into_iter();
        let mut next = Vec::with_capacity(panels.len() + halves.len() / 2);
        for (i, p) in panels.into_iter().enumerate() {
            if split[i] {
                next.push(fresh.next().expect("left half"));
                next.push(fresh.next().expect("right half"));
            } else {
                next.push(p);
            }
        }
        panels = next;
    }
}
