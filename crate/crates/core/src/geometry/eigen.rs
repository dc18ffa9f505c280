//! Cyclic Jacobi eigen-solver for small symmetric matrices.

use crate::math::sqrt;

const MAX_SWEEPS: usize = 64;

/// An off-diagonal entry is treated as zero once it is this small relative
/// to the geometric mean of its two diagonal entries. Measuring against the
/// diagonal rather than the whole matrix keeps small eigenvalues accurate to
/// their own size.
pub const JACOBI_TOLERANCE: f64 = 1e-15;

/// Eigen-decomposition of a symmetric `N x N` matrix.
///
/// Returns eigenvalues sorted ascending and the matching eigenvectors as the
/// columns of the second array (`vectors[row][col]`). Only the upper triangle
/// of `a` is trusted. Returns `None` on non-finite input.
pub fn jacobi_eigen<const N: usize>(a: &[[f64; N]; N]) -> Option<([f64; N], [[f64; N]; N])> {
    let mut m = *a;
    for r in 0..N {
        for c in 0..r {
            m[r][c] = m[c][r];
        }
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return None;
    }
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let frob: f64 = sqrt(m.iter().flatten().map(|x| x * x).sum::<f64>());
    if frob == 0.0 {
        return Some(([0.0; N], v));
    }

    // floor for pairs whose diagonal is (near) zero
    let floor = f64::EPSILON * f64::EPSILON * frob;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = m[p][q];
                if apq.abs() <= JACOBI_TOLERANCE * sqrt((m[p][p] * m[q][q]).abs()) || apq.abs() <= floor {
                    continue;
                }
                rotated = true;
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;

                for k in 0..N {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..N {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order = [0usize; N];
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    // insertion sort keeps this allocation-free
    for i in 1..N {
        let mut j = i;
        while j > 0 && m[order[j - 1]][order[j - 1]] > m[order[j]][order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut values = [0.0; N];
    let mut vectors = [[0.0; N]; N];
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = m[src][src];
        for r in 0..N {
            vectors[r][dst] = v[r][src];
        }
    }
    Some((values, vectors))
}
