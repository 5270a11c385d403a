//! Dense small-dimension tensor values with index-variance tracking.
//!
//! Components are stored row-major by slot order. The module provides the
//! operations the curvature pipeline leans on: metric contraction, the
//! valued-wedge product of symmetric bilinear forms (a Kulkarni–Nomizu-type
//! product), the operator a curvature-type tensor induces on exterior
//! 2-forms, and the linear system expressing wedge-divisibility of 2-forms
//! by a 1-form.

use crate::linalg;
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("slot {slot} out of range for rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("contracting two {0:?} slots requires a metric")]
    VarianceMismatchWithoutMetric(Variance),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("input violates the required symmetry: residual {0:.3e}")]
    SymmetryViolation(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("rank {0} outside supported range 0..=5")]
    RankOutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Covariant,
    Contravariant,
}

/// Dense tensor of rank ≤ 5 with per-slot variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    pub dim: usize,
    pub variance: Vec<Variance>,
    pub data: Vec<T>,
}

/// Iterate all multi-indices of the given rank.
pub fn for_each_index(dim: usize, rank: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; rank];
    loop {
        f(&idx);
        let mut pos = rank;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < dim {
                break;
            }
            idx[pos] = 0;
        }
    }
}

impl<T: Real> DenseTensor<T> {
    pub fn zeros(dim: usize, variance: Vec<Variance>) -> Result<Self, TensorError> {
        let rank = variance.len();
        if rank > 5 {
            return Err(TensorError::RankOutOfRange(rank));
        }
        let len = dim.pow(rank as u32);
        Ok(DenseTensor { dim, variance, data: vec![T::zero(); len] })
    }

    pub fn from_fn(
        dim: usize,
        variance: Vec<Variance>,
        mut f: impl FnMut(&[usize]) -> T,
    ) -> Result<Self, TensorError> {
        let mut t = Self::zeros(dim, variance)?;
        let rank = t.rank();
        let mut flat = 0usize;
        for_each_index(dim, rank, |idx| {
            t.data[flat] = f(idx);
            flat += 1;
        });
        Ok(t)
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut out = 0usize;
        for &i in idx {
            out = out * self.dim + i;
        }
        out
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.flat(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: T) {
        let f = self.flat(idx);
        self.data[f] = v;
    }

    pub fn max_abs(&self) -> T {
        linalg::max_abs(&self.data)
    }

    pub fn scale(&self, c: T) -> Self {
        DenseTensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, TensorError> {
        if self.dim != rhs.dim {
            return Err(TensorError::DimensionMismatch(self.dim, rhs.dim));
        }
        Ok(DenseTensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.add(&rhs.scale(-T::one()))
    }

    /// Contract two slots. Slots of opposite variance contract directly;
    /// two covariant slots need the inverse metric, two contravariant slots
    /// the metric (caller supplies the right one as `pairing`).
    pub fn contract(
        &self,
        slot_a: usize,
        slot_b: usize,
        pairing: Option<&[T]>,
    ) -> Result<Self, TensorError> {
        let rank = self.rank();
        if slot_a >= rank {
            return Err(TensorError::SlotOutOfRange { slot: slot_a, rank });
        }
        if slot_b >= rank || slot_a == slot_b {
            return Err(TensorError::SlotOutOfRange { slot: slot_b, rank });
        }
        let same_variance = self.variance[slot_a] == self.variance[slot_b];
        if same_variance && pairing.is_none() {
            return Err(TensorError::VarianceMismatchWithoutMetric(self.variance[slot_a]));
        }
        let (lo, hi) = if slot_a < slot_b { (slot_a, slot_b) } else { (slot_b, slot_a) };
        let out_variance: Vec<Variance> = self
            .variance
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != lo && *s != hi)
            .map(|(_, &v)| v)
            .collect();
        let mut out = Self::zeros(self.dim, out_variance)?;
        let n = self.dim;
        let out_rank = rank - 2;
        let mut out_flat = 0usize;
        let mut full = vec![0usize; rank];
        for_each_index(n, out_rank, |idx| {
            let mut pos = 0;
            for s in 0..rank {
                if s != lo && s != hi {
                    full[s] = idx[pos];
                    pos += 1;
                }
            }
            let mut acc = T::zero();
            for p in 0..n {
                for q in 0..n {
                    let weight = match pairing {
                        Some(m) => m[p * n + q],
                        None => {
                            if p == q {
                                T::one()
                            } else {
                                T::zero()
                            }
                        }
                    };
                    if weight == T::zero() {
                        continue;
                    }
                    full[lo] = p;
                    full[hi] = q;
                    acc = acc + weight * self.get(&full);
                }
            }
            out.data[out_flat] = acc;
            out_flat += 1;
        });
        Ok(out)
    }
}

/// Valued-wedge product of two symmetric (0,2)-tensors:
/// `(a∧b)_{ijkl} = a_ik b_jl − a_jk b_il − a_il b_jk + a_jl b_ik`.
/// The result carries all curvature-type symmetries. The grouping below
/// makes the pair antisymmetries and the exchange identity
/// `(a∧b)_ijkl = (b∧a)_klij` hold bit-exactly, not just to rounding:
/// each group maps to itself with the two products swapped, and floating
/// addition is commutative.
pub fn valued_wedge<T: Real>(
    a: &DenseTensor<T>,
    b: &DenseTensor<T>,
) -> Result<DenseTensor<T>, TensorError> {
    if a.dim != b.dim {
        return Err(TensorError::DimensionMismatch(a.dim, b.dim));
    }
    let n = a.dim;
    DenseTensor::from_fn(n, vec![Variance::Covariant; 4], |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let plus = a.get(&[i, k]) * b.get(&[j, l]) + a.get(&[j, l]) * b.get(&[i, k]);
        let minus = a.get(&[j, k]) * b.get(&[i, l]) + a.get(&[i, l]) * b.get(&[j, k]);
        plus - minus
    })
}

/// Ordered list of index pairs (i < j): the coordinate basis of 2-forms.
pub fn pair_basis(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

/// Matrix of the operator a (0,4) curvature-type tensor induces on 2-forms,
/// in the lexicographic pair basis, indices raised with `ginv`.
/// Rejects inputs whose first-pair antisymmetry fails beyond 1e-9 relative.
pub fn two_form_operator<T: Real>(
    w: &DenseTensor<T>,
    ginv: &[T],
) -> Result<Vec<T>, TensorError> {
    let n = w.dim;
    let scale = w.max_abs().max(T::min_positive_value());
    let mut asym = T::zero();
    for_each_index(n, 4, |idx| {
        let v = w.get(idx) + w.get(&[idx[1], idx[0], idx[2], idx[3]]);
        asym = asym.max(v.abs());
    });
    if asym / scale > T::of(1e-9) {
        return Err(TensorError::SymmetryViolation(
            (asym / scale).to_f64().unwrap_or(f64::NAN),
        ));
    }
    // Raise the last two indices: W_ij^kl = W_ijab g^ak g^bl.
    let pairs = pair_basis(n);
    let np = pairs.len();
    let mut raised = vec![T::zero(); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = T::zero();
                    for a in 0..n {
                        for b in 0..n {
                            acc = acc
                                + w.get(&[i, j, a, b]) * ginv[a * n + k] * ginv[b * n + l];
                        }
                    }
                    raised[((i * n + j) * n + k) * n + l] = acc;
                }
            }
        }
    }
    let mut mat = vec![T::zero(); np * np];
    for (row, &(i, j)) in pairs.iter().enumerate() {
        for (col, &(k, l)) in pairs.iter().enumerate() {
            mat[row * np + col] = raised[((i * n + j) * n + k) * n + l];
        }
    }
    Ok(mat)
}

/// Stacked coefficients of the maps `ξ ↦ ξ∧Ω` over a family of 2-forms:
/// `(ξ∧Ω)_abc = ξ_a Ω_bc + ξ_b Ω_ca + ξ_c Ω_ab`, rows over (a<b<c, Ω),
/// columns over the components of ξ. The kernel of this matrix is the space
/// of 1-forms dividing every supplied 2-form.
pub fn wedge_divisibility_system<T: Real>(
    two_forms: &[Vec<T>],
    n: usize,
) -> Result<Vec<T>, TensorError> {
    if two_forms.is_empty() {
        return Err(TensorError::EmptyInput);
    }
    for f in two_forms {
        if f.len() != n * n {
            return Err(TensorError::DimensionMismatch(f.len(), n * n));
        }
    }
    let mut triples = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                triples.push((a, b, c));
            }
        }
    }
    let rows = triples.len() * two_forms.len();
    let mut mat = vec![T::zero(); rows * n];
    for (fi, form) in two_forms.iter().enumerate() {
        for (ti, &(a, b, c)) in triples.iter().enumerate() {
            let row = fi * triples.len() + ti;
            mat[row * n + a] = mat[row * n + a] + form[b * n + c];
            mat[row * n + b] = mat[row * n + b] + form[c * n + a];
            mat[row * n + c] = mat[row * n + c] + form[a * n + b];
        }
    }
    Ok(mat)
}

/// Sign pattern of the metric at a point: counts of negative, zero and
/// positive eigenvalues (zero means |λ| below 1e-10 of the largest).
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureDiagnostic {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
    pub eigenvalues: Vec<f64>,
}

pub fn signature<T: Real>(g: &[T], n: usize) -> SignatureDiagnostic {
    let (vals, _) = linalg::sym_eigen(g, n);
    let scale = vals.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let cut = scale * T::of(1e-10);
    let mut negative = 0;
    let mut zero = 0;
    let mut positive = 0;
    for &v in &vals {
        if v.abs() <= cut {
            zero += 1;
        } else if v > T::zero() {
            positive += 1;
        } else {
            negative += 1;
        }
    }
    SignatureDiagnostic {
        negative,
        zero,
        positive,
        eigenvalues: vals.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rank_with_threshold, svd};

    fn identity_mixed(n: usize) -> DenseTensor<f64> {
        DenseTensor::from_fn(
            n,
            vec![Variance::Contravariant, Variance::Covariant],
            |idx| if idx[0] == idx[1] { 1.0 } else { 0.0 },
        )
        .unwrap()
    }

    #[test]
    fn trace_of_identity_is_dimension() {
        for n in [2usize, 4, 6] {
            let t = identity_mixed(n).contract(0, 1, None).unwrap();
            assert_eq!(t.rank(), 0);
            assert_eq!(t.data[0], n as f64);
        }
    }

    #[test]
    fn metric_times_inverse_contracts_to_identity() {
        let n = 3;
        let g = vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.25, 0.0, 0.25, 3.0];
        let ginv = crate::linalg::invert(&g, n).unwrap();
        // Form g_ij g^jk by contracting the (0,4)... simpler: rank-2 co ⊗ contra.
        let gt = DenseTensor {
            dim: n,
            variance: vec![Variance::Covariant; 2],
            data: g.clone(),
        };
        let contracted = gt.contract(0, 1, Some(&ginv)).unwrap();
        assert!((contracted.data[0] - n as f64).abs() < 1e-12);
    }

    #[test]
    fn contraction_without_metric_on_same_variance_fails() {
        let t = DenseTensor::<f64>::zeros(3, vec![Variance::Covariant; 2]).unwrap();
        assert!(matches!(
            t.contract(0, 1, None),
            Err(TensorError::VarianceMismatchWithoutMetric(_))
        ));
    }

    #[test]
    fn valued_wedge_of_zero_is_zero_and_symmetries_hold_exactly() {
        let n = 4;
        let zero = DenseTensor::<f64>::zeros(n, vec![Variance::Covariant; 2]).unwrap();
        let w = valued_wedge(&zero, &zero).unwrap();
        assert_eq!(w.max_abs(), 0.0);

        // Random-ish symmetric a, b: first-pair antisymmetry and pair
        // exchange must hold exactly (forced by the component formula).
        let a = DenseTensor::from_fn(n, vec![Variance::Covariant; 2], |i| {
            ((i[0] * 7 + i[1] * 3) % 5) as f64 + if i[0] == i[1] { 2.0 } else { 0.0 }
        })
        .unwrap();
        let a = DenseTensor::from_fn(n, vec![Variance::Covariant; 2], |i| {
            0.5 * (a.get(&[i[0], i[1]]) + a.get(&[i[1], i[0]]))
        })
        .unwrap();
        let b = DenseTensor::from_fn(n, vec![Variance::Covariant; 2], |i| {
            ((i[0] + 2 * i[1]) % 3) as f64 * 0.25 + if i[0] == i[1] { 1.0 } else { 0.0 }
        })
        .unwrap();
        let b = DenseTensor::from_fn(n, vec![Variance::Covariant; 2], |i| {
            0.5 * (b.get(&[i[0], i[1]]) + b.get(&[i[1], i[0]]))
        })
        .unwrap();
        let w = valued_wedge(&a, &b).unwrap();
        let wba = valued_wedge(&b, &a).unwrap();
        for_each_index(n, 4, |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            assert_eq!(w.get(idx), -w.get(&[j, i, k, l]));
            assert_eq!(w.get(idx), -w.get(&[i, j, l, k]));
            // (a∧b)_ijkl = (b∧a)_klij
            assert_eq!(w.get(idx), wba.get(&[k, l, i, j]));
        });
    }

    #[test]
    fn wedge_divisibility_kernel_of_decomposable_form() {
        // Ω = e¹∧e² in n = 4: kernel must be span{e¹, e²}.
        let n = 4;
        let mut omega = vec![0.0f64; n * n];
        omega[0 * n + 1] = 1.0;
        omega[1 * n + 0] = -1.0;
        let sys = wedge_divisibility_system(&[omega], n).unwrap();
        let rows = sys.len() / n;
        let dec = svd(&sys, rows, n);
        let rank = rank_with_threshold(&dec.s, 1e-8, 100.0);
        assert_eq!(rank.rank, 2);
        // Null vectors live in the (e1, e2) coordinate plane.
        for k in [2usize, 3] {
            for r in [2usize, 3] {
                assert!(dec.v[r * n + k].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wedge_divisibility_two_disjoint_forms_have_trivial_kernel() {
        let n = 4;
        let mut f1 = vec![0.0f64; n * n];
        f1[0 * n + 1] = 1.0;
        f1[1 * n + 0] = -1.0;
        let mut f2 = vec![0.0f64; n * n];
        f2[2 * n + 3] = 1.0;
        f2[3 * n + 2] = -1.0;
        let sys = wedge_divisibility_system(&[f1, f2], n).unwrap();
        let rows = sys.len() / n;
        assert_eq!(rows, 8);
        let dec = svd(&sys, rows, n);
        let rank = rank_with_threshold(&dec.s, 1e-8, 100.0);
        assert_eq!(rank.rank, 4);
    }

    #[test]
    fn empty_wedge_system_is_an_error() {
        assert!(matches!(
            wedge_divisibility_system::<f64>(&[], 4),
            Err(TensorError::EmptyInput)
        ));
    }

    #[test]
    fn two_form_operator_of_zero_is_zero() {
        let n = 4;
        let w = DenseTensor::<f64>::zeros(n, vec![Variance::Covariant; 4]).unwrap();
        let ginv = vec![
            1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ];
        let op = two_form_operator(&w, &ginv).unwrap();
        assert_eq!(linalg::max_abs(&op), 0.0);
    }

    #[test]
    fn two_form_operator_rejects_asymmetric_input() {
        let n = 4;
        let mut w = DenseTensor::<f64>::zeros(n, vec![Variance::Covariant; 4]).unwrap();
        w.set(&[0, 0, 1, 2], 1.0); // not antisymmetric in the first pair
        let ginv = vec![
            1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ];
        assert!(matches!(
            two_form_operator(&w, &ginv),
            Err(TensorError::SymmetryViolation(_))
        ));
    }

    #[test]
    fn signature_counts_match_lorentz_metric() {
        let g = vec![
            -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ];
        let sig = signature(&g, 4);
        assert_eq!((sig.negative, sig.zero, sig.positive), (1, 0, 3));
    }
}
