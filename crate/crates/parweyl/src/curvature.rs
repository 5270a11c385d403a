//! Curvature from metric jets: connection, Riemann, Ricci, scalar,
//! Schouten, Weyl, and the covariant derivatives of Riemann and Weyl.
//!
//! Conventions (fixed by two calibration tests, see below):
//!
//! * mixed curvature components are stored as `R[j][k][l][s]`, the
//!   coefficient of the coordinate field `∂_s` in `R(∂_j, ∂_k)∂_l`, with
//!   `R(u,v) = ∇_v ∇_u − ∇_u ∇_v + ∇_{[u,v]}`; in coordinates
//!   `R_jkl^s = ∂_k Γ^s_jl − ∂_j Γ^s_kl + Γ^m_jl Γ^s_km − Γ^m_kl Γ^s_jm`;
//! * the Ricci tensor contracts the second lower slot with the upper one,
//!   `ρ_jl = R_jkl^k`, the covariant tensor lowers the upper slot with `g`.
//!
//! Calibration: the round unit 2-sphere gets scalar curvature +2, and on
//! the null-line family the contraction of the curvature-endomorphism
//! identity reproduces `ρu = −Ωu`. Together these pin every sign and slot
//! choice; both are enforced in tests.

use crate::chart::{check_nondegenerate, fd_metric_jet, MetricJet};
use crate::jet::Jet;
use crate::linalg;
use crate::scalar::Real;
use crate::tensor::{valued_wedge, DenseTensor, Variance};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurvatureError {
    #[error("jet order {got} insufficient: need at least {need}")]
    InsufficientJetOrder { need: usize, got: usize },
    #[error("metric degenerate: {0}")]
    DegenerateMetric(String),
    #[error("Weyl tensor undefined in dimension {0} (need n ≥ 3)")]
    DimensionTooSmall(usize),
    #[error("variance mask mismatch: tensor rank {rank}, derivative rank {deriv_rank}")]
    VarianceMaskMismatch { rank: usize, deriv_rank: usize },
}

/// Christoffel symbols and their first two coordinate-derivative blocks.
///
/// Storage: `gamma[(k,i,j)] = Γ^k_ij`, `dgamma[(k,i,j,m)] = ∂_m Γ^k_ij`,
/// `d2gamma[(k,i,j,m,p)] = ∂_m ∂_p Γ^k_ij`. `deriv_order` says how many of
/// the derivative blocks are populated.
#[derive(Debug, Clone)]
pub struct ConnectionCoefficients<T> {
    pub n: usize,
    pub deriv_order: usize,
    pub gamma: Vec<T>,
    pub dgamma: Vec<T>,
    pub d2gamma: Vec<T>,
}

impl<T: Real> ConnectionCoefficients<T> {
    #[inline]
    pub fn at(&self, k: usize, i: usize, j: usize) -> T {
        self.gamma[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn d_at(&self, k: usize, i: usize, j: usize, m: usize) -> T {
        self.dgamma[((k * self.n + i) * self.n + j) * self.n + m]
    }

    #[inline]
    pub fn d2_at(&self, k: usize, i: usize, j: usize, m: usize, p: usize) -> T {
        self.d2gamma[(((k * self.n + i) * self.n + j) * self.n + m) * self.n + p]
    }
}

/// Invert a matrix of jets by Gaussian elimination with value-part pivoting.
pub fn invert_jet_matrix<T: Real>(m: &[Jet<T>], n: usize) -> Option<Vec<Jet<T>>> {
    let order = m[0].order;
    let nn = m[0].n;
    let mut a: Vec<Jet<T>> = m.to_vec();
    let mut inv: Vec<Jet<T>> = (0..n * n)
        .map(|idx| {
            let (r, c) = (idx / n, idx % n);
            Jet::constant(nn, order, if r == c { T::one() } else { T::zero() })
        })
        .collect();
    for col in 0..n {
        let mut best = col;
        let mut best_val = a[col * n + col].v.abs();
        for r in (col + 1)..n {
            let v = a[r * n + col].v.abs();
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
                a.swap(col * n + c, best * n + c);
                inv.swap(col * n + c, best * n + c);
            }
        }
        let pivot_inv = a[col * n + col].recip();
        for c in 0..n {
            a[col * n + c] = a[col * n + c].mul(&pivot_inv);
            inv[col * n + c] = inv[col * n + c].mul(&pivot_inv);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * n + col].clone();
            if factor.v == T::zero() && linalg::max_abs(&factor.d1) == T::zero() {
                // still may carry higher-order parts; fall through unless all zero
                let z2 = linalg::max_abs(&factor.d2) == T::zero();
                let z3 = linalg::max_abs(&factor.d3) == T::zero();
                if z2 && z3 {
                    continue;
                }
            }
            for c in 0..n {
                let sub = factor.mul(&a[col * n + c]);
                a[r * n + c] = a[r * n + c].sub(&sub);
                let subi = factor.mul(&inv[col * n + c]);
                inv[r * n + c] = inv[r * n + c].sub(&subi);
            }
        }
    }
    Some(inv)
}

/// Value-level Christoffel symbols from `g` and `∂g` (row-major blocks as
/// in [`MetricJet`]). Shared by the exact path, the finite-difference
/// oracle and the geodesic right-hand side.
pub fn christoffel_values<T: Real>(g: &[T], dg: &[T], n: usize) -> Option<Vec<T>> {
    let ginv = linalg::invert(g, n)?;
    let half = T::of(0.5);
    let mut gamma = vec![T::zero(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for l in 0..n {
                    let term = dg[(j * n + l) * n + i] + dg[(i * n + l) * n + j]
                        - dg[(i * n + j) * n + l];
                    acc = acc + ginv[k * n + l] * term;
                }
                let v = half * acc;
                gamma[(k * n + i) * n + j] = v;
                gamma[(k * n + j) * n + i] = v;
            }
        }
    }
    Some(gamma)
}

fn christoffel_jets<T: Real>(jet: &MetricJet<T>) -> Result<Vec<Jet<T>>, CurvatureError> {
    if jet.order < 1 {
        return Err(CurvatureError::InsufficientJetOrder { need: 1, got: jet.order });
    }
    let n = jet.n;
    let gjets: Vec<Jet<T>> = (0..n * n).map(|idx| jet.component_jet(idx / n, idx % n)).collect();
    let ginv = invert_jet_matrix(&gjets, n)
        .ok_or_else(|| CurvatureError::DegenerateMetric("jet matrix inversion failed".into()))?;
    let dg: Vec<Jet<T>> = {
        // ∂_k g_ij as jets of one order less, indexed (i, j, k)
        let mut out = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out.push(gjets[i * n + j].diff(k));
                }
            }
        }
        out
    };
    let half = T::of(0.5);
    let mut gamma = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    // symmetric in the lower pair; reuse the (i ≤ j) entry
                    let prev: &Jet<T> = &gamma[(k * n + j) * n + i];
                    gamma.push(prev.clone());
                    continue;
                }
                let mut acc = Jet::constant(n, jet.order - 1, T::zero());
                for l in 0..n {
                    let term = dg[(j * n + l) * n + i]
                        .add(&dg[(i * n + l) * n + j])
                        .sub(&dg[(i * n + j) * n + l]);
                    acc = acc.add(&ginv[k * n + l].mul(&term));
                }
                gamma.push(acc.scale(half));
            }
        }
    }
    Ok(gamma)
}

/// Christoffel symbols (with derivative blocks as far as the jet allows).
pub fn christoffel<T: Real>(
    jet: &MetricJet<T>,
) -> Result<ConnectionCoefficients<T>, CurvatureError> {
    let n = jet.n;
    let jets = christoffel_jets(jet)?;
    let deriv_order = jets[0].order.min(2);
    let mut conn = ConnectionCoefficients {
        n,
        deriv_order,
        gamma: vec![T::zero(); n * n * n],
        dgamma: vec![T::zero(); n * n * n * n],
        d2gamma: vec![T::zero(); n * n * n * n * n],
    };
    for (idx, j) in jets.iter().enumerate() {
        conn.gamma[idx] = j.v;
        if deriv_order >= 1 {
            for m in 0..n {
                conn.dgamma[idx * n + m] = j.d1[m];
            }
        }
        if deriv_order >= 2 {
            for m in 0..n {
                for p in 0..n {
                    conn.d2gamma[(idx * n + m) * n + p] = j.d2_at(m, p);
                }
            }
        }
    }
    Ok(conn)
}

fn riemann_mixed_jets<T: Real>(gamma: &[Jet<T>], n: usize) -> Vec<Jet<T>> {
    let order = gamma[0].order - 1;
    let at = |k: usize, i: usize, j: usize| -> &Jet<T> { &gamma[(k * n + i) * n + j] };
    let mut out = Vec::with_capacity(n * n * n * n);
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                for s in 0..n {
                    if j == k {
                        out.push(Jet::constant(gamma[0].n, order, T::zero()));
                        continue;
                    }
                    let mut acc = at(s, j, l).diff(k).sub(&at(s, k, l).diff(j));
                    for m in 0..n {
                        acc = acc.add(&at(m, j, l).mul(at(s, k, m)));
                        acc = acc.sub(&at(m, k, l).mul(at(s, j, m)));
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

/// Riemann tensor from a connection: mixed components `R[j][k][l][s]` and
/// the covariant tensor obtained by lowering the last slot with `g`.
pub fn riemann<T: Real>(
    conn: &ConnectionCoefficients<T>,
    g: &[T],
) -> Result<(DenseTensor<T>, DenseTensor<T>), CurvatureError> {
    if conn.deriv_order < 1 {
        return Err(CurvatureError::InsufficientJetOrder { need: 2, got: 1 });
    }
    let n = conn.n;
    let mixed = DenseTensor::from_fn(
        n,
        vec![
            Variance::Covariant,
            Variance::Covariant,
            Variance::Covariant,
            Variance::Contravariant,
        ],
        |idx| {
            let (j, k, l, s) = (idx[0], idx[1], idx[2], idx[3]);
            let mut acc = conn.d_at(s, j, l, k) - conn.d_at(s, k, l, j);
            for m in 0..n {
                acc = acc + conn.at(m, j, l) * conn.at(s, k, m)
                    - conn.at(m, k, l) * conn.at(s, j, m);
            }
            acc
        },
    )
    .expect("rank 4 tensor");
    let cov = lower_last(&mixed, g);
    Ok((mixed, cov))
}

fn lower_last<T: Real>(mixed: &DenseTensor<T>, g: &[T]) -> DenseTensor<T> {
    let n = mixed.dim;
    DenseTensor::from_fn(n, vec![Variance::Covariant; 4], |idx| {
        let (j, k, l, m) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = T::zero();
        for s in 0..n {
            acc = acc + mixed.get(&[j, k, l, s]) * g[s * n + m];
        }
        acc
    })
    .expect("rank 4 tensor")
}

/// Ricci, scalar curvature and Schouten tensor.
/// `ρ_jl = R_jkl^k`, `s = tr_g ρ`, `σ = ρ − s/(2n−2) g`.
pub fn ricci_scalar_schouten<T: Real>(
    mixed: &DenseTensor<T>,
    g: &[T],
    ginv: &[T],
) -> (DenseTensor<T>, T, DenseTensor<T>) {
    let n = mixed.dim;
    let ricci = DenseTensor::from_fn(n, vec![Variance::Covariant; 2], |idx| {
        let (j, l) = (idx[0], idx[1]);
        let mut acc = T::zero();
        for k in 0..n {
            acc = acc + mixed.get(&[j, k, l, k]);
        }
        acc
    })
    .expect("rank 2");
    let mut scalar = T::zero();
    for j in 0..n {
        for l in 0..n {
            scalar = scalar + ginv[j * n + l] * ricci.get(&[j, l]);
        }
    }
    let coeff = scalar / T::of_usize(2 * n - 2);
    let schouten = DenseTensor::from_fn(n, vec![Variance::Covariant; 2], |idx| {
        ricci.get(idx) - coeff * g[idx[0] * n + idx[1]]
    })
    .expect("rank 2");
    (ricci, scalar, schouten)
}

/// Weyl tensor `W = R − (n−2)⁻¹ g∧σ` (vanishes identically for n = 3).
pub fn weyl<T: Real>(
    riemann_cov: &DenseTensor<T>,
    g: &[T],
    schouten: &DenseTensor<T>,
) -> Result<DenseTensor<T>, CurvatureError> {
    let n = riemann_cov.dim;
    if n <= 2 {
        return Err(CurvatureError::DimensionTooSmall(n));
    }
    let gt = DenseTensor { dim: n, variance: vec![Variance::Covariant; 2], data: g.to_vec() };
    let gs = valued_wedge(&gt, schouten).expect("dims match");
    let coeff = T::one() / T::of_usize(n - 2);
    riemann_cov.sub(&gs.scale(coeff)).map_err(|_| CurvatureError::DimensionTooSmall(n))
}

/// Covariant derivative of a tensor with an arbitrary variance mask.
/// `dt` holds the coordinate derivatives with the derivative index FIRST;
/// the result uses the same layout.
pub fn covariant_derivative<T: Real>(
    t: &DenseTensor<T>,
    dt: &DenseTensor<T>,
    conn: &ConnectionCoefficients<T>,
) -> Result<DenseTensor<T>, CurvatureError> {
    if dt.rank() != t.rank() + 1 {
        return Err(CurvatureError::VarianceMaskMismatch {
            rank: t.rank(),
            deriv_rank: dt.rank(),
        });
    }
    let n = t.dim;
    let rank = t.rank();
    let mut variance = vec![Variance::Covariant];
    variance.extend(t.variance.iter().copied());
    DenseTensor::from_fn(n, variance, |idx| {
        let m = idx[0];
        let inner = &idx[1..];
        let mut acc = dt.get(idx);
        let mut tmp = inner.to_vec();
        for (slot, &var) in t.variance.iter().enumerate() {
            let orig = inner[slot];
            for p in 0..n {
                tmp[slot] = p;
                let correction = match var {
                    Variance::Contravariant => conn.at(orig, m, p) * t.get(&tmp),
                    Variance::Covariant => -conn.at(p, m, orig) * t.get(&tmp),
                };
                acc = acc + correction;
            }
            tmp[slot] = orig;
        }
        acc
    })
    .map_err(|_| CurvatureError::VarianceMaskMismatch { rank, deriv_rank: rank + 1 })
}

/// Everything the verifier needs at one point.
#[derive(Debug, Clone)]
pub struct CurvatureBundle<T> {
    pub n: usize,
    pub point: Vec<T>,
    pub g: Vec<T>,
    pub ginv: Vec<T>,
    pub conn: ConnectionCoefficients<T>,
    /// Mixed components `R[j][k][l][s]`.
    pub riemann_mixed: DenseTensor<T>,
    /// Covariant `R[j][k][l][m]`.
    pub riemann: DenseTensor<T>,
    pub ricci: DenseTensor<T>,
    pub scalar: T,
    pub schouten: DenseTensor<T>,
    pub weyl: DenseTensor<T>,
    /// `(∇R)[m][j][k][l][p]`, derivative index first.
    pub nabla_riemann: DenseTensor<T>,
    pub nabla_weyl: DenseTensor<T>,
    pub nabla_ricci: DenseTensor<T>,
}

/// Full curvature pipeline over jets; requires an order-3 jet and n ≥ 3.
pub fn curvature_bundle<T: Real>(jet: &MetricJet<T>) -> Result<CurvatureBundle<T>, CurvatureError> {
    if jet.order < 3 {
        return Err(CurvatureError::InsufficientJetOrder { need: 3, got: jet.order });
    }
    let n = jet.n;
    if n <= 2 {
        return Err(CurvatureError::DimensionTooSmall(n));
    }
    check_nondegenerate(&jet.g, n)
        .map_err(|e| CurvatureError::DegenerateMetric(e.to_string()))?;
    let ginv = linalg::invert(&jet.g, n)
        .ok_or_else(|| CurvatureError::DegenerateMetric("inverse failed".into()))?;

    let gamma_jets = christoffel_jets(jet)?; // order 2
    let rm_jets = riemann_mixed_jets(&gamma_jets, n); // order 1

    // Covariant Riemann, Ricci, scalar, Schouten, Weyl as order-1 jets so
    // their coordinate derivatives feed the covariant derivatives below.
    let gjets: Vec<Jet<T>> = (0..n * n).map(|i| jet.component_jet(i / n, i % n)).collect();
    let ginv_jets = invert_jet_matrix(&gjets, n)
        .ok_or_else(|| CurvatureError::DegenerateMetric("jet inverse failed".into()))?;

    let jat = |v: &[Jet<T>], idx: &[usize]| -> Jet<T> {
        let mut f = 0usize;
        for &i in idx {
            f = f * n + i;
        }
        v[f].clone()
    };

    let mut rcov_jets: Vec<Jet<T>> = Vec::with_capacity(n * n * n * n);
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let mut acc = Jet::constant(n, 1, T::zero());
                    for s in 0..n {
                        acc = acc.add(&jat(&rm_jets, &[j, k, l, s]).mul(&gjets[s * n + m]));
                    }
                    rcov_jets.push(acc);
                }
            }
        }
    }
    let mut ricci_jets: Vec<Jet<T>> = Vec::with_capacity(n * n);
    for j in 0..n {
        for l in 0..n {
            let mut acc = Jet::constant(n, 1, T::zero());
            for k in 0..n {
                acc = acc.add(&jat(&rm_jets, &[j, k, l, k]));
            }
            ricci_jets.push(acc);
        }
    }
    let mut scalar_jet = Jet::constant(n, 1, T::zero());
    for j in 0..n {
        for l in 0..n {
            scalar_jet = scalar_jet.add(&ginv_jets[j * n + l].mul(&ricci_jets[j * n + l]));
        }
    }
    let schouten_coeff = T::one() / T::of_usize(2 * n - 2);
    let mut schouten_jets: Vec<Jet<T>> = Vec::with_capacity(n * n);
    for j in 0..n {
        for l in 0..n {
            let sg = scalar_jet.mul(&gjets[j * n + l]).scale(schouten_coeff);
            schouten_jets.push(ricci_jets[j * n + l].sub(&sg));
        }
    }
    let weyl_coeff = T::one() / T::of_usize(n - 2);
    let mut weyl_jets: Vec<Jet<T>> = Vec::with_capacity(n * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    // (g∧σ)_ijkl = g_ik σ_jl − g_jk σ_il − g_il σ_jk + g_jl σ_ik
                    let gs = gjets[i * n + k]
                        .mul(&schouten_jets[j * n + l])
                        .sub(&gjets[j * n + k].mul(&schouten_jets[i * n + l]))
                        .sub(&gjets[i * n + l].mul(&schouten_jets[j * n + k]))
                        .add(&gjets[j * n + l].mul(&schouten_jets[i * n + k]));
                    weyl_jets
                        .push(rcov_jets[((i * n + j) * n + k) * n + l].sub(&gs.scale(weyl_coeff)));
                }
            }
        }
    }

    let conn = christoffel(jet)?;
    let value_tensor = |jets: &[Jet<T>], variance: Vec<Variance>| -> DenseTensor<T> {
        DenseTensor {
            dim: n,
            variance,
            data: jets.iter().map(|j| j.v).collect(),
        }
    };
    let deriv_tensor = |jets: &[Jet<T>], variance: Vec<Variance>| -> DenseTensor<T> {
        // derivative index first: dt[m][idx] = ∂_m T_idx
        let rank = variance.len();
        let mut v = vec![Variance::Covariant];
        v.extend(variance);
        let mut out = DenseTensor::zeros(n, v).expect("rank ok");
        let stride = jets.len();
        for m in 0..n {
            for (f, jjet) in jets.iter().enumerate() {
                out.data[m * stride + f] = jjet.d1[m];
            }
        }
        let _ = rank;
        out
    };

    let cov4 = vec![Variance::Covariant; 4];
    let riemann_cov = value_tensor(&rcov_jets, cov4.clone());
    let d_riemann = deriv_tensor(&rcov_jets, cov4.clone());
    let weyl_t = value_tensor(&weyl_jets, cov4.clone());
    let d_weyl = deriv_tensor(&weyl_jets, cov4);
    let ricci_t = value_tensor(&ricci_jets, vec![Variance::Covariant; 2]);
    let d_ricci = deriv_tensor(&ricci_jets, vec![Variance::Covariant; 2]);

    let nabla_riemann = covariant_derivative(&riemann_cov, &d_riemann, &conn)?;
    let nabla_weyl = covariant_derivative(&weyl_t, &d_weyl, &conn)?;
    let nabla_ricci = covariant_derivative(&ricci_t, &d_ricci, &conn)?;

    let riemann_mixed = value_tensor(
        &rm_jets,
        vec![
            Variance::Covariant,
            Variance::Covariant,
            Variance::Covariant,
            Variance::Contravariant,
        ],
    );
    let schouten_t = value_tensor(&schouten_jets, vec![Variance::Covariant; 2]);

    Ok(CurvatureBundle {
        n,
        point: jet.point.clone(),
        g: jet.g.clone(),
        ginv,
        conn,
        riemann_mixed,
        riemann: riemann_cov,
        ricci: ricci_t,
        scalar: scalar_jet.v,
        schouten: schouten_t,
        weyl: weyl_t,
        nabla_riemann,
        nabla_weyl,
        nabla_ricci,
    })
}

impl<T: Real> CurvatureBundle<T> {
    /// Divergence of the Weyl tensor: `(div W)_jkl = g^{mi} ∇_m W_ijkl`.
    pub fn div_weyl(&self) -> DenseTensor<T> {
        let n = self.n;
        DenseTensor::from_fn(n, vec![Variance::Covariant; 3], |idx| {
            let mut acc = T::zero();
            for m in 0..n {
                for i in 0..n {
                    acc = acc
                        + self.ginv[m * n + i]
                            * self.nabla_weyl.get(&[m, i, idx[0], idx[1], idx[2]]);
                }
            }
            acc
        })
        .expect("rank 3")
    }

    /// Mixed Weyl components `W[j][k][l][s]` (last slot raised).
    pub fn weyl_mixed(&self) -> DenseTensor<T> {
        let n = self.n;
        DenseTensor::from_fn(
            n,
            vec![
                Variance::Covariant,
                Variance::Covariant,
                Variance::Covariant,
                Variance::Contravariant,
            ],
            |idx| {
                let mut acc = T::zero();
                for m in 0..n {
                    acc = acc + self.weyl.get(&[idx[0], idx[1], idx[2], m])
                        * self.ginv[m * n + idx[3]];
                }
                acc
            },
        )
        .expect("rank 4")
    }
}

// ---------------------------------------------------------------------------
// Residual diagnostics shared by tests and the verifier
// ---------------------------------------------------------------------------

/// Worst violation of the curvature pair symmetries, relative to max |R|:
/// antisymmetry in (0,1) and (2,3), symmetry under pair exchange.
pub fn pair_symmetry_residual<T: Real>(r: &DenseTensor<T>) -> T {
    let n = r.dim;
    let scale = r.max_abs().max(T::min_positive_value());
    let mut worst = T::zero();
    crate::tensor::for_each_index(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let v = r.get(idx);
        worst = worst.max((v + r.get(&[j, i, k, l])).abs());
        worst = worst.max((v + r.get(&[i, j, l, k])).abs());
        worst = worst.max((v - r.get(&[k, l, i, j])).abs());
    });
    worst / scale
}

/// Worst violation of the first Bianchi identity, relative to max |R|.
pub fn first_bianchi_residual<T: Real>(r: &DenseTensor<T>) -> T {
    let n = r.dim;
    let scale = r.max_abs().max(T::min_positive_value());
    let mut worst = T::zero();
    crate::tensor::for_each_index(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let cyc = r.get(&[i, j, k, l]) + r.get(&[j, k, i, l]) + r.get(&[k, i, j, l]);
        worst = worst.max(cyc.abs());
    });
    worst / scale
}

/// Worst trace of a (0,4)-tensor over all slot pairs, relative to a scale.
pub fn trace_residual<T: Real>(w: &DenseTensor<T>, ginv: &[T], scale: T) -> T {
    let denom = scale.max(T::min_positive_value());
    let mut worst = T::zero();
    let slot_pairs = [(0usize, 2usize), (0, 3), (1, 2), (1, 3), (0, 1), (2, 3)];
    for (a, b) in slot_pairs {
        let traced = w.contract(a, b, Some(ginv)).expect("valid contraction");
        worst = worst.max(traced.max_abs());
    }
    worst / denom
}

/// Deviation of `(∇ρ)[m][j][l]` from total symmetry in (m, j), relative to
/// max |∇ρ| (zero when ∇ρ vanishes).
pub fn codazzi_residual<T: Real>(nabla_ricci: &DenseTensor<T>) -> T {
    let n = nabla_ricci.dim;
    let scale = nabla_ricci.max_abs();
    if scale == T::zero() {
        return T::zero();
    }
    let mut worst = T::zero();
    crate::tensor::for_each_index(n, 3, |idx| {
        let v = nabla_ricci.get(idx) - nabla_ricci.get(&[idx[1], idx[0], idx[2]]);
        worst = worst.max(v.abs());
    });
    worst / scale
}

/// Independent curvature oracle: Christoffel symbols from finite-difference
/// jets at displaced points, their derivative by central differences, and
/// the same assembly formula. Returns mixed components `R[j][k][l][s]`.
pub fn riemann_fd_oracle<T: Real>(
    eval: impl Fn(&[T]) -> Vec<T>,
    n: usize,
    point: &[T],
    step: T,
) -> Option<DenseTensor<T>> {
    let gamma_at = |p: &[T]| -> Option<Vec<T>> {
        let jet = fd_metric_jet(&eval, n, p, 1, step);
        christoffel_values(&jet.g, &jet.dg, n)
    };
    let center = gamma_at(point)?;
    let mut dgamma = vec![T::zero(); n * n * n * n];
    let two = T::of(2.0);
    for m in 0..n {
        let mut plus = point.to_vec();
        plus[m] = plus[m] + step;
        let mut minus = point.to_vec();
        minus[m] = minus[m] - step;
        let gp = gamma_at(&plus)?;
        let gm = gamma_at(&minus)?;
        for idx in 0..n * n * n {
            dgamma[idx * n + m] = (gp[idx] - gm[idx]) / (two * step);
        }
    }
    let at = |k: usize, i: usize, j: usize| center[(k * n + i) * n + j];
    let dat = |k: usize, i: usize, j: usize, m: usize| dgamma[((k * n + i) * n + j) * n + m];
    DenseTensor::from_fn(
        n,
        vec![
            Variance::Covariant,
            Variance::Covariant,
            Variance::Covariant,
            Variance::Contravariant,
        ],
        |idx| {
            let (j, k, l, s) = (idx[0], idx[1], idx[2], idx[3]);
            let mut acc = dat(s, j, l, k) - dat(s, k, l, j);
            for m in 0..n {
                acc = acc + at(m, j, l) * at(s, k, m) - at(m, k, l) * at(s, j, m);
            }
            acc
        },
    )
    .ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartSpec, MetricField};
    use crate::expr::Expr;

    /// Hand-built order-3 jet of the unit 2-sphere metric dφ² + sin²φ dθ².
    fn sphere_jet(phi: f64) -> MetricJet<f64> {
        let n = 2;
        let mut jet = MetricJet::zeroed(n, 3, vec![phi, 0.3]);
        let s2 = phi.sin().powi(2);
        jet.g = vec![1.0, 0.0, 0.0, s2];
        // ∂_φ sin²φ = sin 2φ, ∂²= 2cos 2φ, ∂³ = -4 sin 2φ
        jet.dg[(1 * n + 1) * n + 0] = (2.0 * phi).sin();
        jet.d2g[((1 * n + 1) * n + 0) * n + 0] = 2.0 * (2.0 * phi).cos();
        jet.d3g[(((1 * n + 1) * n + 0) * n + 0) * n + 0] = -4.0 * (2.0 * phi).sin();
        jet
    }

    #[test]
    fn sphere_scalar_curvature_calibrates_sign() {
        let jet = sphere_jet(1.1);
        let conn = christoffel(&jet).unwrap();
        // Γ^φ_θθ = -sinφ cosφ, Γ^θ_φθ = cotφ
        let phi = 1.1f64;
        assert!((conn.at(0, 1, 1) + phi.sin() * phi.cos()).abs() < 1e-12);
        assert!((conn.at(1, 0, 1) - phi.cos() / phi.sin()).abs() < 1e-12);
        let (mixed, _cov) = riemann(&conn, &jet.g).unwrap();
        let ginv = linalg::invert(&jet.g, 2).unwrap();
        let (ricci, scalar, _) = ricci_scalar_schouten(&mixed, &jet.g, &ginv);
        // Unit sphere: ρ = g, s = +2. This pins the global sign convention.
        assert!((ricci.get(&[0, 0]) - 1.0).abs() < 1e-10);
        assert!((scalar - 2.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_against_fd_of_christoffel_oracle() {
        let phi = 1.1;
        let jet = sphere_jet(phi);
        let conn = christoffel(&jet).unwrap();
        let (mixed, _) = riemann(&conn, &jet.g).unwrap();
        let eval = |p: &[f64]| -> Vec<f64> {
            vec![1.0, 0.0, 0.0, p[0].sin().powi(2)]
        };
        let oracle = riemann_fd_oracle(eval, 2, &[phi, 0.3], 1e-4).unwrap();
        let scale = mixed.max_abs();
        for (a, b) in mixed.data.iter().zip(&oracle.data) {
            assert!((a - b).abs() / scale < 1e-6);
        }
    }

    fn polar_field() -> MetricField {
        let chart = ChartSpec::new(
            vec![(1.0, 3.0), (-1.0, 1.0)],
            vec!["r".into(), "theta".into()],
        )
        .unwrap();
        MetricField::from_fn(chart, |i, j| match (i, j) {
            (0, 0) => Expr::Const(1.0),
            (1, 1) => Expr::PowInt(Box::new(Expr::Coord(0)), 2),
            _ => Expr::Const(0.0),
        })
        .unwrap()
    }

    #[test]
    fn polar_christoffels_match_hand_computation() {
        let field = polar_field();
        let jet = field.evaluate_jet(&[2.0f64, 0.1], 3).unwrap();
        let conn = christoffel(&jet).unwrap();
        assert!((conn.at(0, 1, 1) + 2.0).abs() < 1e-14); // Γ^r_θθ = -r
        assert!((conn.at(1, 0, 1) - 0.5).abs() < 1e-14); // Γ^θ_rθ = 1/r
        let (mixed, _) = riemann(&conn, &jet.g).unwrap();
        assert!(mixed.max_abs() < 1e-12); // flat
    }

    #[test]
    fn flat_lorentz_curvature_vanishes() {
        let chart = ChartSpec::new(
            vec![(-2.0, 2.0); 4],
            (0..4).map(|i| format!("x{i}")).collect(),
        )
        .unwrap();
        let field = MetricField::from_fn(chart, |i, j| {
            Expr::Const(if i == j { if i == 0 { -1.0 } else { 1.0 } } else { 0.0 })
        })
        .unwrap();
        let jet = field.evaluate_jet(&[0.1f64, 0.2, 0.3, -0.2], 3).unwrap();
        let bundle = curvature_bundle(&jet).unwrap();
        assert!(bundle.conn.gamma.iter().all(|&x| x == 0.0));
        assert_eq!(bundle.riemann.max_abs(), 0.0);
        assert_eq!(bundle.weyl.max_abs(), 0.0);
        assert_eq!(bundle.nabla_weyl.max_abs(), 0.0);
        assert_eq!(bundle.scalar, 0.0);
    }

    fn random_poly_metric(n: usize, seed: u64) -> MetricField {
        // Small polynomial perturbation of a diagonal metric; nondegenerate
        // on the chart box.
        let chart = ChartSpec::new(
            vec![(-0.4, 0.4); n],
            (0..n).map(|i| format!("x{i}")).collect(),
        )
        .unwrap();
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 1000) as f64 / 1000.0 - 0.5
        };
        MetricField::from_fn(chart, |i, j| {
            let base = if i == j { Expr::Const(1.0 + 0.3 * next().abs()) } else { Expr::Const(0.0) };
            let c1 = 0.2 * next();
            let c2 = 0.15 * next();
            let v1 = (i + j) % n;
            let v2 = (i * 2 + j) % n;
            base.add(Expr::Const(c1).mul(Expr::Coord(v1)))
                .add(Expr::Const(c2).mul(Expr::Coord(v1).mul(Expr::Coord(v2))))
        })
        .unwrap()
    }

    #[test]
    fn metric_is_parallel_for_random_fields() {
        for seed in [3u64, 11, 42] {
            let field = random_poly_metric(4, seed);
            let jet = field.evaluate_jet(&[0.05f64, -0.1, 0.2, 0.0], 3).unwrap();
            let conn = christoffel(&jet).unwrap();
            let gt = DenseTensor {
                dim: 4,
                variance: vec![Variance::Covariant; 2],
                data: jet.g.clone(),
            };
            let mut dg = DenseTensor::zeros(4, vec![Variance::Covariant; 3]).unwrap();
            for m in 0..4 {
                for i in 0..4 {
                    for j in 0..4 {
                        dg.set(&[m, i, j], jet.dg_at(i, j, m));
                    }
                }
            }
            let nabla_g = covariant_derivative(&gt, &dg, &conn).unwrap();
            assert!(nabla_g.max_abs() < 1e-12 * jet.block_scales()[0].max(1.0));
        }
    }

    #[test]
    fn weyl_vanishes_in_dimension_three() {
        for seed in [7u64, 19] {
            let field = random_poly_metric(3, seed);
            let jet = field.evaluate_jet(&[0.1f64, 0.05, -0.1], 3).unwrap();
            let bundle = curvature_bundle(&jet).unwrap();
            let scale = bundle.riemann.max_abs().max(1e-30);
            assert!(bundle.weyl.max_abs() / scale < 1e-9);
        }
    }

    #[test]
    fn weyl_is_fully_traceless_for_random_four_metrics() {
        for seed in [5u64, 23, 91] {
            let field = random_poly_metric(4, seed);
            let jet = field.evaluate_jet(&[0.1f64, -0.05, 0.15, 0.02], 3).unwrap();
            let bundle = curvature_bundle(&jet).unwrap();
            let scale = bundle.riemann.max_abs();
            assert!(trace_residual(&bundle.weyl, &bundle.ginv, scale) < 1e-9);
            assert!(pair_symmetry_residual(&bundle.riemann) < 1e-10);
            assert!(first_bianchi_residual(&bundle.riemann) < 1e-10);
            assert!(pair_symmetry_residual(&bundle.weyl) < 1e-10);
            assert!(first_bianchi_residual(&bundle.weyl) < 1e-10);
        }
    }

    #[test]
    fn curvature_matches_fd_oracle_on_random_field() {
        let field = random_poly_metric(4, 77);
        let point = [0.1f64, 0.0, -0.08, 0.12];
        let jet = field.evaluate_jet(&point, 3).unwrap();
        let conn = christoffel(&jet).unwrap();
        let (mixed, _) = riemann(&conn, &jet.g).unwrap();
        let oracle = riemann_fd_oracle(|p| field.values(p), 4, &point, 1e-3).unwrap();
        let scale = mixed.max_abs().max(1e-30);
        let mut worst = 0.0f64;
        for (a, b) in mixed.data.iter().zip(&oracle.data) {
            worst = worst.max((a - b).abs() / scale);
        }
        assert!(worst < 1e-5, "worst relative deviation {worst:.3e}");
    }

    #[test]
    fn nabla_weyl_matches_central_difference_rederivation() {
        // ∇W from the jet pipeline against (W(x+h) − W(x−h))/2h plus the
        // Γ-corrections, on a field with genuinely nonzero ∇W.
        let field = random_poly_metric(4, 31);
        let n = 4;
        let point = [0.1f64, -0.05, 0.12, 0.08];
        let h = 1e-4;
        let weyl_at = |p: &[f64]| -> DenseTensor<f64> {
            let jet = field.evaluate_jet(p, 3).unwrap();
            curvature_bundle(&jet).unwrap().weyl
        };
        let center_jet = field.evaluate_jet(&point, 3).unwrap();
        let bundle = curvature_bundle(&center_jet).unwrap();
        let mut dweyl = DenseTensor::zeros(n, vec![Variance::Covariant; 5]).unwrap();
        for m in 0..n {
            let mut plus = point.to_vec();
            plus[m] += h;
            let mut minus = point.to_vec();
            minus[m] -= h;
            let (wp, wm) = (weyl_at(&plus), weyl_at(&minus));
            let stride = wp.data.len();
            for f in 0..stride {
                dweyl.data[m * stride + f] = (wp.data[f] - wm.data[f]) / (2.0 * h);
            }
        }
        let fd_nabla = covariant_derivative(&bundle.weyl, &dweyl, &bundle.conn).unwrap();
        let scale = bundle.nabla_weyl.max_abs().max(bundle.weyl.max_abs());
        assert!(scale > 1e-6, "test field must have nonzero Weyl derivative");
        let mut worst = 0.0f64;
        for (a, b) in bundle.nabla_weyl.data.iter().zip(&fd_nabla.data) {
            worst = worst.max((a - b).abs() / scale);
        }
        assert!(worst < 1e-5, "nabla W mismatch {worst:.3e}");
    }

    #[test]
    fn insufficient_jet_order_is_reported() {
        let field = polar_field();
        let jet = field.evaluate_jet(&[2.0f64, 0.0], 1).unwrap();
        let err = curvature_bundle(&jet).unwrap_err();
        assert!(matches!(err, CurvatureError::InsufficientJetOrder { .. }));
    }
}
