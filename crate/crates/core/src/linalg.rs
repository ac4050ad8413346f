//! Small dense complex linear algebra: a cyclic Jacobi eigensolver for
//! Hermitian matrices and the helpers the spectral layer needs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Sweep budget for the Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 50;

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues, sorted descending.
    pub values: Vec<f64>,
    /// Unitary matrix whose column `j` pairs with `values[j]`.
    pub vectors: CMatrix,
    pub sweeps: usize,
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest entry modulus of `m - m^*`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn off_diagonal_norm(w: &CMatrix) -> f64 {
    let n = w.nrows();
    let mut acc = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            acc += w[(p, q)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Diagonalizes a Hermitian matrix with cyclic complex Jacobi rotations.
///
/// The input is symmetrized as `(A + A^*)/2` first. Eigenvalues come back
/// sorted descending; each eigenvector column is rotated so that its
/// largest-modulus entry (lowest row on ties) is real and positive.
pub fn jacobi_hermitian(a: &CMatrix, max_sweeps: usize) -> Result<HermitianEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim("square matrix columns", n, a.ncols()));
    }
    let mut w = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v = CMatrix::identity(n, n);

    let fro = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut sweeps = 0;
    if fro > 0.0 {
        loop {
            let off = off_diagonal_norm(&w);
            if off <= 4.0 * f64::EPSILON * fro {
                break;
            }
            if sweeps == max_sweeps {
                return Err(Error::EigenNoConvergence {
                    sweeps,
                    off_norm: off,
                });
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut w, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| w[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    fix_phases(&mut vectors);

    Ok(HermitianEigen {
        values,
        vectors,
        sweeps,
    })
}

fn rotate(w: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let b = w[(p, q)];
    let g = b.norm();
    if g == 0.0 {
        return;
    }
    let app = w[(p, p)].re;
    let aqq = w[(q, q)].re;
    // below the representable perturbation of the diagonal: just drop it
    if g < 1e-18 * (app.abs() + aqq.abs()) {
        w[(p, q)] = Complex64::new(0.0, 0.0);
        w[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    let phase = b / g;
    let phase_bar = phase.conj();

    let theta = (aqq - app) / (2.0 * g);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // G = [[c, s], [-s conj(phase), c conj(phase)]] on (p, q)
    let g_pp = Complex64::new(c, 0.0);
    let g_pq = Complex64::new(s, 0.0);
    let g_qp = -phase_bar * s;
    let g_qq = phase_bar * c;

    let n = w.nrows();
    for k in 0..n {
        let wkp = w[(k, p)];
        let wkq = w[(k, q)];
        w[(k, p)] = wkp * g_pp + wkq * g_qp;
        w[(k, q)] = wkp * g_pq + wkq * g_qq;
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * g_pp + vkq * g_qp;
        v[(k, q)] = vkp * g_pq + vkq * g_qq;
    }
    for k in 0..n {
        let wpk = w[(p, k)];
        let wqk = w[(q, k)];
        w[(p, k)] = g_pp.conj() * wpk + g_qp.conj() * wqk;
        w[(q, k)] = g_pq.conj() * wpk + g_qq.conj() * wqk;
    }
    w[(p, q)] = Complex64::new(0.0, 0.0);
    w[(q, p)] = Complex64::new(0.0, 0.0);
    w[(p, p)] = Complex64::new(w[(p, p)].re, 0.0);
    w[(q, q)] = Complex64::new(w[(q, q)].re, 0.0);
}

fn fix_phases(u: &mut CMatrix) {
    let n = u.nrows();
    for j in 0..n {
        let big = (0..n).fold(0.0_f64, |acc, i| acc.max(u[(i, j)].norm()));
        if big == 0.0 {
            continue;
        }
        let pivot = (0..n)
            .find(|&i| u[(i, j)].norm() >= big * (1.0 - 1e-12))
            .unwrap_or(0);
        let z = u[(pivot, j)];
        let rot = z.conj() / z.norm();
        for i in 0..n {
            u[(i, j)] *= rot;
        }
        u[(pivot, j)] = Complex64::new(u[(pivot, j)].norm(), 0.0);
    }
}

/// Determinant of the submatrix with the given (0-based) rows and columns.
pub fn sub_determinant(m: &CMatrix, rows: &[usize], cols: &[usize]) -> Complex64 {
    debug_assert_eq!(rows.len(), cols.len());
    match rows.len() {
        0 => Complex64::new(1.0, 0.0),
        1 => m[(rows[0], cols[0])],
        2 => {
            m[(rows[0], cols[0])] * m[(rows[1], cols[1])]
                - m[(rows[0], cols[1])] * m[(rows[1], cols[0])]
        }
        k => {
            let sub = CMatrix::from_fn(k, k, |i, j| m[(rows[i], cols[j])]);
            sub.determinant()
        }
    }
}
