//! Signatures of the directional Levi form, the solvability and
//! hypoellipticity criterion per form degree, the cones `Γ_L` and the twist
//! signs `ε_{j,L}`.
//!
//! The criterion quantifies over every direction, so it is decided on a
//! deterministic sphere sample that always contains the coordinate
//! directions and is refined by bisection wherever the signature changes
//! between neighbouring samples.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::levi_spectral::{MultiIndex, QuadricForm, SpectralData, DEFAULT_ZERO_TOL};

pub type Signature = (usize, usize);

/// Deterministic sample of `S^{m-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSampler {
    /// Base number of points (ignored for `m = 1`).
    pub density: usize,
    /// Offsets the base grid; the same seed always yields the same sample.
    pub seed: u64,
    /// Bisection steps across each detected signature change.
    pub refine_steps: usize,
    /// Relative zero tolerance for eigenvalues.
    pub zero_tol: f64,
}

impl Default for SphereSampler {
    fn default() -> Self {
        Self {
            density: 2048,
            seed: 0,
            refine_steps: 48,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }
}

impl SphereSampler {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// The unrefined base sample, coordinate directions `±e_j` included.
    pub fn base_points(&self, m: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shift: f64 = rng.gen();
        let mut pts = match m {
            0 => Vec::new(),
            1 => vec![vec![1.0], vec![-1.0]],
            2 => {
                let k = self.density.max(4);
                (0..k)
                    .map(|i| {
                        let th = 2.0 * PI * (i as f64 + shift) / k as f64;
                        vec![th.cos(), th.sin()]
                    })
                    .collect()
            }
            3 => fibonacci_sphere(self.density.max(8), shift),
            _ => product_grid(m, self.density.max(16), shift),
        };
        if m >= 2 {
            for j in 0..m {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; m];
                    e[j] = s;
                    pts.push(e);
                }
            }
        }
        pts
    }
}

fn fibonacci_sphere(k: usize, shift: f64) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let th = golden * i as f64 + 2.0 * PI * shift;
            vec![r * th.cos(), y, r * th.sin()]
        })
        .collect()
}

/// Hyperspherical product grid with about `k` points on `S^{m-1}`.
fn product_grid(m: usize, k: usize, shift: f64) -> Vec<Vec<f64>> {
    let per = ((k as f64).powf(1.0 / (m - 1) as f64).ceil() as usize).max(3);
    let mut out = Vec::new();
    let mut angles = vec![0usize; m - 1];
    loop {
        let mut phi = Vec::with_capacity(m - 1);
        for (a, &i) in angles.iter().enumerate() {
            if a + 2 == m {
                phi.push(2.0 * PI * (i as f64 + shift) / per as f64);
            } else {
                phi.push(PI * (i as f64 + 0.5) / per as f64);
            }
        }
        out.push(hyperspherical(&phi));
        let mut a = 0;
        loop {
            if a == m - 1 {
                return out;
            }
            angles[a] += 1;
            if angles[a] < per {
                break;
            }
            angles[a] = 0;
            a += 1;
        }
    }
}

/// `α(φ)` for hyperspherical angles `φ₁,…,φ_{m−1}`, the last one azimuthal.
pub fn hyperspherical(phi: &[f64]) -> Vec<f64> {
    let m = phi.len() + 1;
    let mut out = vec![0.0; m];
    let mut prod = 1.0;
    for (j, &p) in phi.iter().enumerate() {
        out[j] = prod * p.cos();
        prod *= p.sin();
    }
    out[m - 1] = prod;
    out
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn signature_at(q: &QuadricForm, alpha: &[f64], zero_tol: f64) -> Option<SpectralData> {
    q.spectral(alpha, zero_tol).ok()
}

/// Sample plus refinement: every base point, and for each neighbouring
/// pair with different signatures the bisected boundary point and the two
/// bracketing points closest to it.
pub fn refined_sample(q: &QuadricForm, sampler: &SphereSampler) -> Vec<SpectralData> {
    let m = q.m();
    let base = sampler.base_points(m);
    let data: Vec<SpectralData> = base
        .iter()
        .filter_map(|a| signature_at(q, a, sampler.zero_tol))
        .collect();
    let mut out = data.clone();
    if m == 1 {
        return out;
    }
    for (i, j) in neighbour_pairs(&base, m, sampler.density.max(4)) {
        let (a, b) = (&data[i], &data[j]);
        if a.signature() == b.signature() {
            continue;
        }
        let (mut lo, mut hi) = (a.alpha().to_vec(), b.alpha().to_vec());
        let sig_lo = a.signature();
        let mut pts = Vec::new();
        for _ in 0..sampler.refine_steps {
            let mut mid: Vec<f64> = lo.iter().zip(&hi).map(|(x, y)| 0.5 * (x + y)).collect();
            if mid.iter().all(|x| *x == 0.0) {
                break;
            }
            normalize(&mut mid);
            match signature_at(q, &mid, sampler.zero_tol) {
                Some(s) if s.signature() == sig_lo => lo = mid,
                Some(s) => {
                    if s.signature() != b.signature() {
                        pts.push(s);
                    }
                    hi = mid;
                }
                None => break,
            }
        }
        for p in [lo, hi] {
            if let Some(s) = signature_at(q, &p, sampler.zero_tol) {
                pts.push(s);
            }
        }
        out.extend(pts);
    }
    out
}

/// Index pairs to scan for signature changes.
fn neighbour_pairs(points: &[Vec<f64>], m: usize, density: usize) -> Vec<(usize, usize)> {
    if m == 2 {
        // base ring is in angular order; the appended ±e_j are checked
        // against their ring neighbours below
        let ring = density;
        let mut pairs: Vec<(usize, usize)> = (0..ring).map(|i| (i, (i + 1) % ring)).collect();
        for extra in ring..points.len() {
            let nearest = nearest(points, extra, 2);
            pairs.extend(nearest.into_iter().map(|j| (extra, j)));
        }
        return pairs;
    }
    let mut pairs = Vec::new();
    for i in 0..points.len() {
        for j in nearest(points, i, 6) {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

fn nearest(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| {
            let dist: f64 = p.iter().zip(&points[i]).map(|(a, b)| (a - b).powi(2)).sum();
            (dist, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// All signatures `(n⁺, n⁻)` seen on the refined sample.
pub fn signature_set(q: &QuadricForm, sampler: &SphereSampler) -> BTreeSet<Signature> {
    refined_sample(q, sampler)
        .iter()
        .map(|s| s.signature())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeClassification {
    pub q: usize,
    pub solvable: bool,
    pub hypoelliptic: bool,
    /// A direction with signature `(q, n − q)`, if one was found.
    pub solvability_witness: Option<Vec<f64>>,
    /// A direction with `n⁺ ≤ q` and `n⁻ ≤ n − q`, if one was found.
    pub hypoellipticity_witness: Option<Vec<f64>>,
    pub sample_size: usize,
}

/// Solvability and hypoellipticity of the Kohn Laplacian on `(0, q)`-forms.
pub fn classify_degree(q: &QuadricForm, degree: usize, sampler: &SphereSampler) -> DegreeClassification {
    let n = q.n();
    assert!(degree <= n, "degree {degree} exceeds n = {n}");
    let sample = refined_sample(q, sampler);
    let solv = sample
        .iter()
        .find(|s| s.signature() == (degree, n - degree));
    let hypo = sample
        .iter()
        .find(|s| s.n_plus() <= degree && s.n_minus() <= n - degree);
    DegreeClassification {
        q: degree,
        solvable: solv.is_none(),
        hypoelliptic: hypo.is_none(),
        solvability_witness: solv.map(|s| s.alpha().to_vec()),
        hypoellipticity_witness: hypo.map(|s| s.alpha().to_vec()),
        sample_size: sample.len(),
    }
}

/// `α ∈ Γ_L`: every eigenvalue is nonzero, positive exactly on the slots of `L`.
pub fn in_gamma(s: &SpectralData, l: &MultiIndex) -> bool {
    s.nu() == s.n() && (0..s.n()).all(|j| (s.sign(j) > 0) == l.contains_slot(j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaReport {
    pub l: MultiIndex,
    pub nonempty_positive_measure: bool,
    /// Up to [`GAMMA_SAMPLE_CAP`] members of `Γ_L` from the sample.
    pub sample_points: Vec<Vec<f64>>,
    /// Fraction of the base sample inside `Γ_L` (counting measure for `m = 1`).
    pub sphere_fraction_estimate: f64,
}

pub const GAMMA_SAMPLE_CAP: usize = 64;

pub fn gamma_report(q: &QuadricForm, l: &MultiIndex, sampler: &SphereSampler) -> GammaReport {
    let m = q.m();
    let base = sampler.base_points(m);
    // the appended ±e_j would bias the fraction
    let uniform = if m == 1 { base.len() } else { base.len() - 2 * m };
    let mut hits = 0usize;
    let mut pts = Vec::new();
    for (i, a) in base.iter().enumerate() {
        let Some(s) = signature_at(q, a, sampler.zero_tol) else {
            continue;
        };
        if in_gamma(&s, l) {
            if i < uniform {
                hits += 1;
            }
            if pts.len() < GAMMA_SAMPLE_CAP {
                pts.push(a.clone());
            }
        }
    }
    if pts.is_empty() {
        for s in refined_sample(q, sampler) {
            if in_gamma(&s, l) {
                pts.push(s.alpha().to_vec());
                break;
            }
        }
    }
    GammaReport {
        l: l.clone(),
        nonempty_positive_measure: !pts.is_empty(),
        sample_points: pts,
        sphere_fraction_estimate: hits as f64 / uniform as f64,
    }
}

/// `ε_{j,L}` for the nonzero eigenvalues, in slot order.
pub fn epsilon_signs(s: &SpectralData, l: &MultiIndex) -> Vec<i8> {
    (0..s.n())
        .filter(|&j| s.sign(j) != 0)
        .map(|j| epsilon_at(s, l, j))
        .collect()
}

/// `ε_{j,L}` at slot `j`; zero for a zero eigenvalue.
pub fn epsilon_at(s: &SpectralData, l: &MultiIndex, j: usize) -> i8 {
    let sg = s.sign(j);
    if l.contains_slot(j) {
        sg
    } else {
        -sg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::Preset;

    fn set(v: &[(usize, usize)]) -> BTreeSet<Signature> {
        v.iter().copied().collect()
    }

    #[test]
    fn preset_signature_sets() {
        let s = SphereSampler::default();
        assert_eq!(
            signature_set(&Preset::M1.quadric(), &s),
            set(&[(2, 0), (1, 0), (1, 1), (0, 1), (0, 2)])
        );
        assert_eq!(signature_set(&Preset::M2.quadric(), &s), set(&[(1, 1)]));
        assert_eq!(
            signature_set(&Preset::M3.quadric(), &s),
            set(&[(1, 0), (1, 1), (0, 1)])
        );
    }

    #[test]
    fn preset_degrees() {
        let s = SphereSampler::default();
        let m1 = Preset::M1.quadric();
        for q in 0..=2 {
            let c = classify_degree(&m1, q, &s);
            assert!(!c.solvable && !c.hypoelliptic, "M1 q={q}");
        }
        let m2 = Preset::M2.quadric();
        for (q, ok) in [(0, true), (1, false), (2, true)] {
            let c = classify_degree(&m2, q, &s);
            assert_eq!((c.solvable, c.hypoelliptic), (ok, ok), "M2 q={q}");
        }
        let m3 = Preset::M3.quadric();
        for (q, ok) in [(0, true), (1, false), (2, true)] {
            let c = classify_degree(&m3, q, &s);
            assert_eq!(c.solvable, ok, "M3 q={q}");
            assert!(!c.hypoelliptic);
        }
    }

    #[test]
    fn witnesses_reproduce_signature() {
        let s = SphereSampler::default();
        let m3 = Preset::M3.quadric();
        let c = classify_degree(&m3, 1, &s);
        let w = c.solvability_witness.unwrap();
        let sd = m3.spectral(&w, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(sd.signature(), (1, 1));
        let c0 = classify_degree(&m3, 0, &s);
        let h = c0.hypoellipticity_witness.unwrap();
        let sd = m3.spectral(&h, DEFAULT_ZERO_TOL).unwrap();
        assert!(sd.n_plus() == 0 && sd.n_minus() <= 2);
    }

    #[test]
    fn product_heisenberg_quadrant() {
        let q = Preset::M1.quadric();
        let r = gamma_report(&q, &MultiIndex::full(2), &SphereSampler::default());
        assert!(r.nonempty_positive_measure);
        assert!((r.sphere_fraction_estimate - 0.25).abs() < 2e-3);
        for a in &r.sample_points {
            assert!(a[0] > 0.0 && a[1] > 0.0);
        }
    }

    #[test]
    fn heisenberg_middle_cone_is_empty() {
        let q = Preset::Heisenberg(2).quadric();
        let l = MultiIndex::new(vec![1], 2).unwrap();
        let r = gamma_report(&q, &l, &SphereSampler::default());
        assert!(!r.nonempty_positive_measure);
        assert_eq!(r.sphere_fraction_estimate, 0.0);
        let r0 = gamma_report(&q, &MultiIndex::empty(), &SphereSampler::default());
        assert!(r0.nonempty_positive_measure);
        assert_eq!(r0.sphere_fraction_estimate, 0.5);
    }

    #[test]
    fn m2_has_no_szego_cone_in_degree_zero() {
        let r = gamma_report(&Preset::M2.quadric(), &MultiIndex::empty(), &SphereSampler::default());
        assert!(!r.nonempty_positive_measure);
    }

    #[test]
    fn m3_epsilon_degree_zero() {
        let q = Preset::M3.quadric();
        let th: f64 = 1.1;
        let s = q.spectral(&[th.cos(), th.sin()], DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(epsilon_signs(&s, &MultiIndex::empty()), vec![-1, 1]);
        assert_eq!(epsilon_signs(&s, &MultiIndex::full(2)), vec![1, -1]);
    }

    #[test]
    fn epsilon_is_plus_on_gamma() {
        let q = Preset::M1.quadric();
        let s = q.spectral(&[0.6, 0.8], DEFAULT_ZERO_TOL).unwrap();
        let l = MultiIndex::full(2);
        assert!(in_gamma(&s, &l));
        assert_eq!(epsilon_signs(&s, &l), vec![1, 1]);
    }

    #[test]
    fn zero_eigenvalues_are_excluded() {
        let q = Preset::M3.quadric();
        let s = q.spectral(&[1.0, 0.0], DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(s.signature(), (1, 0));
        assert_eq!(epsilon_signs(&s, &MultiIndex::empty()).len(), 1);
        assert!(!in_gamma(&s, &MultiIndex::new(vec![1], 2).unwrap()));
    }

    #[test]
    fn seeds_change_sample_but_not_answer() {
        let m1 = Preset::M1.quadric();
        let a = SphereSampler::with_seed(1).base_points(2);
        let b = SphereSampler::with_seed(2).base_points(2);
        assert_ne!(a[0], b[0]);
        for seed in [1, 2, 99] {
            assert_eq!(signature_set(&m1, &SphereSampler::with_seed(seed)).len(), 5);
        }
    }

    #[test]
    fn higher_codimension_samplers_are_unit() {
        let s = SphereSampler {
            density: 300,
            ..SphereSampler::default()
        };
        for m in [3, 4, 5] {
            let pts = s.base_points(m);
            assert!(pts.len() >= 300);
            for p in pts {
                let n: f64 = p.iter().map(|x| x * x).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }
}
