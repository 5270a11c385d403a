//! Dense linear algebra for desk-scale matrices (n ≲ a few hundred).
//!
//! Everything is written against row-major `&[T]` slices with explicit
//! dimensions, generic over [`Real`]. The kernels are the classic dense
//! ones: partially pivoted LU for solves/inverses/determinants, cyclic
//! Jacobi for symmetric eigenproblems, and one-sided Jacobi for the SVD.
//! One-sided Jacobi is chosen deliberately: it computes small singular
//! values with high relative accuracy, which the rank decisions downstream
//! depend on (a Gram-matrix eigensolve would lose half the digits).

use crate::scalar::Real;

/// Row-major matrix index.
#[inline]
pub fn at(cols: usize, r: usize, c: usize) -> usize {
    r * cols + c
}

/// `C = A * B` for row-major slices, `A` is `m×k`, `B` is `k×n`.
pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[at(k, i, p)];
            if aip == T::zero() {
                continue;
            }
            for j in 0..n {
                out[at(n, i, j)] = out[at(n, i, j)] + aip * b[at(n, p, j)];
            }
        }
    }
    out
}

/// Transpose of an `m×n` row-major matrix.
pub fn transpose<T: Real>(a: &[T], m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[at(m, j, i)] = a[at(n, i, j)];
        }
    }
    out
}

/// Maximum absolute entry; zero for empty input.
pub fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// LU decomposition with partial pivoting. Returns the packed factors, the
/// pivot permutation, and the determinant. `None` if a pivot collapses to
/// exactly zero.
fn lu_factor<T: Real>(a: &[T], n: usize) -> Option<(Vec<T>, Vec<usize>, T)> {
    let mut lu = a.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut det = T::one();
    for col in 0..n {
        let mut best = col;
        let mut best_val = lu[at(n, col, col)].abs();
        for r in (col + 1)..n {
            let v = lu[at(n, r, col)].abs();
            if v > best_val {
                best = r;
                best_val = v;
            }
        }
        if best_val == T::zero() {
            return None;
        }
        if best != col {
            for c in 0..n {
                lu.swap(at(n, col, c), at(n, best, c));
            }
            piv.swap(col, best);
            det = -det;
        }
        let pivot = lu[at(n, col, col)];
        det = det * pivot;
        for r in (col + 1)..n {
            let factor = lu[at(n, r, col)] / pivot;
            lu[at(n, r, col)] = factor;
            for c in (col + 1)..n {
                lu[at(n, r, c)] = lu[at(n, r, c)] - factor * lu[at(n, col, c)];
            }
        }
    }
    Some((lu, piv, det))
}

/// Determinant of an `n×n` matrix.
pub fn det<T: Real>(a: &[T], n: usize) -> T {
    match lu_factor(a, n) {
        Some((_, _, d)) => d,
        None => T::zero(),
    }
}

/// Solve `A x = b` for a single right-hand side.
pub fn solve<T: Real>(a: &[T], b: &[T], n: usize) -> Option<Vec<T>> {
    let (lu, piv, _) = lu_factor(a, n)?;
    let mut x: Vec<T> = piv.iter().map(|&p| b[p]).collect();
    for r in 1..n {
        for c in 0..r {
            x[r] = x[r] - lu[at(n, r, c)] * x[c];
        }
    }
    for r in (0..n).rev() {
        for c in (r + 1)..n {
            x[r] = x[r] - lu[at(n, r, c)] * x[c];
        }
        x[r] = x[r] / lu[at(n, r, r)];
    }
    Some(x)
}

/// Matrix inverse via LU.
pub fn invert<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let (lu, piv, _) = lu_factor(a, n)?;
    let mut inv = vec![T::zero(); n * n];
    for rhs in 0..n {
        let mut x = vec![T::zero(); n];
        for (r, &p) in piv.iter().enumerate() {
            x[r] = if p == rhs { T::one() } else { T::zero() };
        }
        for r in 1..n {
            for c in 0..r {
                let f = lu[at(n, r, c)];
                let xc = x[c];
                x[r] = x[r] - f * xc;
            }
        }
        for r in (0..n).rev() {
            for c in (r + 1)..n {
                let f = lu[at(n, r, c)];
                let xc = x[c];
                x[r] = x[r] - f * xc;
            }
            x[r] = x[r] / lu[at(n, r, r)];
        }
        for r in 0..n {
            inv[at(n, r, rhs)] = x[r];
        }
    }
    Some(inv)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and eigenvectors as matrix columns.
pub fn sym_eigen<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[at(n, i, i)] = T::one();
    }
    let tol = T::epsilon() * T::of_usize(n.max(1)) * max_abs(a).max(T::min_positive_value());
    for _sweep in 0..60 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[at(n, p, q)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[at(n, p, q)];
                if apq.abs() <= tol {
                    continue;
                }
                let app = m[at(n, p, p)];
                let aqq = m[at(n, q, q)];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[at(n, k, p)];
                    let mkq = m[at(n, k, q)];
                    m[at(n, k, p)] = c * mkp - s * mkq;
                    m[at(n, k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[at(n, p, k)];
                    let mqk = m[at(n, q, k)];
                    m[at(n, p, k)] = c * mpk - s * mqk;
                    m[at(n, q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[at(n, k, p)];
                    let vkq = v[at(n, k, q)];
                    v[at(n, k, p)] = c * vkp - s * vkq;
                    v[at(n, k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| m[at(n, i, i)]).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("eigenvalue is NaN"));
    let vals: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vecs[at(n, r, new_c)] = v[at(n, r, old_c)];
        }
    }
    (vals, vecs)
}

/// Singular value decomposition.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// Left singular vectors, `m×k` (columns for zero singular values are zero).
    pub u: Vec<T>,
    /// Singular values, descending, length `k = min(m,n)` plus padding zeros
    /// up to `n` so that every right vector has a value attached.
    pub s: Vec<T>,
    /// Right singular vectors as columns of an `n×n` matrix.
    pub v: Vec<T>,
    pub m: usize,
    pub n: usize,
}

/// One-sided Jacobi SVD. Rows are zero-padded when `m < n` so the full set
/// of right singular vectors (including the nullspace) is always produced.
pub fn svd<T: Real>(a: &[T], m: usize, n: usize) -> Svd<T> {
    let rows = m.max(n);
    let mut w = vec![T::zero(); rows * n];
    for r in 0..m {
        for c in 0..n {
            w[at(n, r, c)] = a[at(n, r, c)];
        }
    }
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[at(n, i, i)] = T::one();
    }
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = T::zero();
                for r in 0..rows {
                    let wp = w[at(n, r, p)];
                    let wq = w[at(n, r, q)];
                    alpha = alpha + wp * wp;
                    beta = beta + wq * wq;
                    gamma = gamma + wp * wq;
                }
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = {
                    let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                    sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let wp = w[at(n, r, p)];
                    let wq = w[at(n, r, q)];
                    w[at(n, r, p)] = c * wp - s * wq;
                    w[at(n, r, q)] = s * wp + c * wq;
                }
                for r in 0..n {
                    let vp = v[at(n, r, p)];
                    let vq = v[at(n, r, q)];
                    v[at(n, r, p)] = c * vp - s * vq;
                    v[at(n, r, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<T> = (0..n)
        .map(|c| {
            let mut s2 = T::zero();
            for r in 0..rows {
                let x = w[at(n, r, c)];
                s2 = s2 + x * x;
            }
            s2.sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).expect("singular value is NaN"));
    let mut v_sorted = vec![T::zero(); n * n];
    let mut u = vec![T::zero(); m * n];
    let sigma_sorted: Vec<T> = order.iter().map(|&c| sigma[c]).collect();
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            v_sorted[at(n, r, new_c)] = v[at(n, r, old_c)];
        }
        if sigma[old_c] > T::zero() {
            for r in 0..m {
                u[at(n, r, new_c)] = w[at(n, r, old_c)] / sigma[old_c];
            }
        }
    }
    sigma = sigma_sorted;
    Svd { u, s: sigma, v: v_sorted, m, n }
}

/// Numerical rank with a relative singular-value cutoff, plus an ambiguity
/// guard: values falling inside `(threshold/window, threshold*window)`
/// relative to the largest make the rank decision unreliable.
pub struct RankDecision<T> {
    pub rank: usize,
    pub singular_values: Vec<T>,
    /// `Some((rank_low, rank_high))` when values sit inside the guard window.
    pub ambiguous: Option<(usize, usize)>,
}

pub fn rank_with_threshold<T: Real>(sv: &[T], rel_threshold: T, window: T) -> RankDecision<T> {
    let smax = sv.first().copied().unwrap_or_else(T::zero);
    if smax == T::zero() {
        return RankDecision { rank: 0, singular_values: sv.to_vec(), ambiguous: None };
    }
    let cut = rel_threshold * smax;
    let lo = cut / window;
    let hi = cut * window;
    let rank = sv.iter().filter(|&&s| s > cut).count();
    let in_window = sv.iter().filter(|&&s| s > lo && s < hi).count();
    let ambiguous = if in_window > 0 {
        let rank_low = sv.iter().filter(|&&s| s >= hi).count();
        let rank_high = sv.iter().filter(|&&s| s > lo).count();
        Some((rank_low, rank_high))
    } else {
        None
    };
    RankDecision { rank, singular_values: sv.to_vec(), ambiguous }
}

/// Minimum-norm least-squares solve via the SVD pseudo-inverse.
/// `a` is `m×n`, `b` has length `m`.
pub fn lstsq<T: Real>(a: &[T], b: &[T], m: usize, n: usize, rel_threshold: T) -> Vec<T> {
    let dec = svd(a, m, n);
    let smax = dec.s.first().copied().unwrap_or_else(T::zero);
    let cut = rel_threshold * smax;
    let mut x = vec![T::zero(); n];
    for k in 0..n.min(dec.s.len()) {
        if dec.s[k] <= cut || dec.s[k] == T::zero() {
            continue;
        }
        let mut ub = T::zero();
        for r in 0..m {
            ub = ub + dec.u[at(n, r, k)] * b[r];
        }
        let coeff = ub / dec.s[k];
        for r in 0..n {
            x[r] = x[r] + coeff * dec.v[at(n, r, k)];
        }
    }
    x
}

/// Euclidean orthonormalization of the columns of `a` (m×k), dropping
/// near-dependent columns. Returns the orthonormal columns as an `m×r` matrix.
pub fn orthonormal_columns<T: Real>(a: &[T], m: usize, k: usize, rel_tol: T) -> (Vec<T>, usize) {
    let scale = max_abs(a).max(T::min_positive_value());
    let mut cols: Vec<Vec<T>> = Vec::new();
    for c in 0..k {
        let mut v: Vec<T> = (0..m).map(|r| a[at(k, r, c)]).collect();
        for _ in 0..2 {
            for q in &cols {
                let d: T = (0..m).map(|r| v[r] * q[r]).sum();
                for r in 0..m {
                    v[r] = v[r] - d * q[r];
                }
            }
        }
        let norm: T = (0..m).map(|r| v[r] * v[r]).sum::<T>().sqrt();
        if norm > rel_tol * scale {
            for r in 0..m {
                v[r] = v[r] / norm;
            }
            cols.push(v);
        }
    }
    let r = cols.len();
    let mut out = vec![T::zero(); m * r];
    for (c, col) in cols.iter().enumerate() {
        for row in 0..m {
            out[at(r, row, c)] = col[row];
        }
    }
    (out, r)
}

/// Largest principal angle (radians) between the column spans of two `m×d`
/// matrices. Requires equal span dimensions after orthonormalization.
/// Computed through the sine, `sin θ_max = σ_max(Q_b − Q_a (Q_aᵀ Q_b))`,
/// which keeps full relative accuracy for small angles (the cosine route
/// cannot resolve angles below √ε).
pub fn max_principal_angle<T: Real>(a: &[T], b: &[T], m: usize, d: usize) -> Option<T> {
    let (qa, ra) = orthonormal_columns(a, m, d, T::of(1e-12));
    let (qb, rb) = orthonormal_columns(b, m, d, T::of(1e-12));
    if ra != rb {
        return None;
    }
    if ra == 0 {
        return Some(T::zero());
    }
    let qat = transpose(&qa, m, ra);
    let coeff = matmul(&qat, &qb, ra, m, rb);
    let fitted = matmul(&qa, &coeff, m, ra, rb);
    let resid: Vec<T> = qb.iter().zip(&fitted).map(|(&x, &y)| x - y).collect();
    let dec = svd(&resid, m, rb);
    let sin_max = dec.s.first().copied().unwrap_or_else(T::zero);
    Some(sin_max.min(T::one()).asin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_inverts() {
        let a: Vec<f64> = vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let b: Vec<f64> = vec![1.0, 2.0, 3.0];
        let x = solve(&a, &b, 3).unwrap();
        let back = matmul(&a, &x, 3, 3, 1);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
        let inv = invert(&a, 3).unwrap();
        let id = matmul(&a, &inv, 3, 3, 3);
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((id[at(3, r, c)] - expect).abs() < 1e-12);
            }
        }
        assert!((det(&a, 3) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigen_recovers_spectrum() {
        // Symmetric matrix with known eigenvalues 3, 1 (vectors (1,1), (1,-1)).
        let a: Vec<f64> = vec![2.0, 1.0, 1.0, 2.0];
        let (vals, vecs) = sym_eigen(&a, 2);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let v0 = [vecs[0], vecs[2]];
        assert!((v0[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v0[1] - v0[0]).abs() < 1e-12);
    }

    #[test]
    fn svd_rank_and_nullspace() {
        // Rank-2 3x3 matrix: third row = row0 + row1.
        let a: Vec<f64> = vec![1.0, 0.0, 2.0, 0.0, 1.0, -1.0, 1.0, 1.0, 1.0];
        let dec = svd(&a, 3, 3);
        let rd = rank_with_threshold(&dec.s, 1e-8, 100.0);
        assert_eq!(rd.rank, 2);
        assert!(rd.ambiguous.is_none());
        // Null vector: A x = 0 with x ∝ (-2, 1, 1).
        let x: Vec<f64> = (0..3).map(|r| dec.v[at(3, r, 2)]).collect();
        let ax = matmul(&a, &x, 3, 3, 1);
        assert!(max_abs(&ax) < 1e-12);
    }

    #[test]
    fn svd_handles_wide_matrices() {
        let a: Vec<f64> = vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let dec = svd(&a, 2, 3);
        assert!((dec.s[0] - 2.0).abs() < 1e-12);
        assert!((dec.s[1] - 1.0).abs() < 1e-12);
        assert!(dec.s[2].abs() < 1e-12);
        let null: Vec<f64> = (0..3).map(|r| dec.v[at(3, r, 2)]).collect();
        assert!((null[2].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_singular_values_keep_relative_accuracy() {
        let a: Vec<f64> = vec![1.0, 0.0, 0.0, 1e-12];
        let dec = svd(&a, 2, 2);
        assert!((dec.s[1] - 1e-12).abs() < 1e-24 * 10.0 + 1e-27);
    }

    #[test]
    fn principal_angle_detects_tilt() {
        let a: Vec<f64> = vec![1.0, 0.0, 0.0]; // span{e1} in R^3, stored 3x1
        let b: Vec<f64> = vec![1.0, 0.1, 0.0];
        let ang = max_principal_angle(&a, &b, 3, 1).unwrap();
        assert!((ang - 0.1f64.atan()).abs() < 1e-12);
    }
}
